/* tslint:disable */
/* eslint-disable */

/**
 * Per-layer beta, weight variance and theoretical forward/backward ratios
 * of one scheme on a uniform-width network.
 */
export function plan(kind: string, layers: number, width: number, variance: number, shift: number): string;

/**
 * Monte Carlo variance profile next to the theoretical one. Empirical
 * values are normalized to layer 1 (forward) and layer L (backward).
 */
export function profile(kind: string, layers: number, width: number, variance: number, shift: number, uniform: boolean, trials: number, batch: number, seed: number): string;

/**
 * Solved K for every depth in `2..=max_layers`.
 */
export function solve_k_sweep(width: number, variance: number, shift: number, max_layers: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly plan: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly profile: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
    readonly solve_k_sweep: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
