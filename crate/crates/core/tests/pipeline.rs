use depthscale::analyzer::{
    compare_profiles, empirical_profile, theoretical_profile, InputDistribution, ProfileOptions,
};
use depthscale::data::{gen_synthetic, load_cifar10_binary, Scaling};
use depthscale::nn::init_network;
use depthscale::train::{train, TrainConfig};
use depthscale::{
    build_plan, gain_product, Direction, Distribution, FanMode, InitScheme, KSource, NetworkSpec,
    Propagation,
};

fn he(distribution: Distribution) -> InitScheme {
    InitScheme::He {
        distribution,
        fan_mode: FanMode::FanIn,
    }
}

fn all_schemes() -> Vec<InitScheme> {
    let mut out = vec![
        InitScheme::Glorot { distribution: Distribution::Normal },
        he(Distribution::Uniform),
        InitScheme::ConstantScaled {
            target_variance: 22.0,
            distribution: Distribution::Normal,
            fan_mode: FanMode::FanOut,
        },
    ];
    for direction in [Direction::Increasing, Direction::Decreasing] {
        for shift in [0, 3] {
            out.push(InitScheme::DepthwiseLog {
                k_source: KSource::SolveFromV(22.0),
                shift,
                direction,
                distribution: Distribution::Normal,
                fan_mode: FanMode::FanOut,
            });
        }
    }
    out
}

#[test]
fn forward_theory_ends_at_gain_product() {
    let spec = NetworkSpec::uniform(64, 54).unwrap();
    for scheme in all_schemes() {
        let plan = build_plan(&spec, &scheme).unwrap();
        let profile = theoretical_profile(&spec, &plan).unwrap();
        let last = profile.layers.last().unwrap().theoretical_forward_ratio;
        let gain = gain_product(&plan, &spec, Propagation::Forward).unwrap();
        assert!((last / gain - 1.0).abs() < 1e-12, "{}: {last} vs {gain}", scheme.label());
    }
}

#[test]
fn profile_ignores_thread_count() {
    let spec = NetworkSpec::uniform(32, 12).unwrap();
    let scheme = &all_schemes()[3];
    let options = ProfileOptions {
        trials: 7,
        batch: 24,
        seed: 99,
        input: InputDistribution::StandardNormal,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| empirical_profile(&spec, scheme, &options).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn separated_blobs_are_learned() {
    let data = gen_synthetic(6, 400, 16, 4, 6.0, Scaling::ZeroOne).unwrap();
    let spec = NetworkSpec::classifier(16, 32, 2, 4).unwrap();
    let config = TrainConfig {
        epochs: 20,
        lr: 0.1,
        batch_size: 16,
        seed: 6,
        probe_size: 64,
    };
    let report = train(&spec, &he(Distribution::Normal), &data, &config).unwrap();
    let acc = report.final_stats().accuracy;
    assert!(acc >= 0.95, "accuracy {acc}");
}

#[test]
fn unseparated_blobs_stay_at_chance() {
    let data = gen_synthetic(7, 4000, 16, 4, 0.0, Scaling::ZeroOne).unwrap();
    let spec = NetworkSpec::classifier(16, 8, 2, 4).unwrap();
    let config = TrainConfig {
        epochs: 5,
        lr: 0.05,
        batch_size: 32,
        seed: 7,
        probe_size: 64,
    };
    let report = train(&spec, &he(Distribution::Normal), &data, &config).unwrap();
    let acc = report.final_stats().accuracy;
    assert!((acc - 0.25).abs() < 0.05, "accuracy {acc}");
}

#[test]
fn cifar_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data_batch.bin");
    let mut bytes = Vec::new();
    let mut state = 12345u32;
    for i in 0..10u8 {
        bytes.push(i);
        for _ in 0..3072 {
            state = state.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            bytes.push((state >> 24) as u8);
        }
    }
    std::fs::write(&path, &bytes).unwrap();
    let data = load_cifar10_binary(&path, None).unwrap();
    assert_eq!(data.len(), 10);
    assert_eq!(data.dims(), 3072);
    for (r, record) in bytes.chunks(3073).enumerate() {
        assert_eq!(data.labels[r], record[0] as usize);
        for (c, &b) in record[1..].iter().enumerate() {
            assert_eq!(data.features[[r, c]], b as f64 / 255.0);
        }
    }
}

#[test]
fn network_matches_plan_variances() {
    let spec = NetworkSpec::uniform(128, 6).unwrap();
    let scheme = &all_schemes()[4];
    let plan = build_plan(&spec, scheme).unwrap();
    let net = init_network(&spec, &plan, 3).unwrap();
    for (measured, planned) in net.weight_variances().iter().zip(plan.weight_variances()) {
        assert!((measured / planned - 1.0).abs() < 0.05, "{measured} vs {planned}");
    }
}

// He-uniform at the reference depth: the dead-signal flags are reported,
// whatever they turn out to be.
#[test]
fn he_uniform_reference_profile_reports_flags() {
    let spec = NetworkSpec::uniform(64, 54).unwrap();
    let options = ProfileOptions {
        trials: 4,
        batch: 64,
        seed: 0,
        input: InputDistribution::ZeroOne,
    };
    let profile = empirical_profile(&spec, &he(Distribution::Uniform), &options).unwrap();
    let cmp = compare_profiles(&profile).unwrap();
    assert_eq!(cmp.layers.len(), 54);
    for l in &cmp.layers {
        assert_eq!(l.dead_activation || l.dead_gradient, cmp.dead_layers.contains(&l.layer));
    }
}
