//! Datasets: Gaussian blobs and the CIFAR-10 binary format.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

/// Bytes per CIFAR-10 record: one label byte and a 32x32x3 image.
pub const CIFAR10_RECORD_BYTES: usize = 3073;
pub const CIFAR10_PIXELS: usize = 3072;
pub const CIFAR10_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Each feature mapped into `[0, 1]`.
    #[default]
    ZeroOne,
    /// Each feature shifted and scaled to zero mean, unit variance.
    Standardized,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        seed: u64,
        samples: usize,
        dims: usize,
        classes: usize,
        separation: f64,
    },
    Cifar10 {
        path: String,
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// One sample per row.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub scaling: Scaling,
    pub source: DataSource,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rescales the features in place. Scaling an already scaled dataset
    /// composes the transforms.
    pub fn rescale(&mut self, scaling: Scaling) {
        apply_scaling(&mut self.features, scaling);
        self.scaling = scaling;
    }

    /// CSV with header `f0,...,f{d-1},label`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dims()).map(|i| format!("f{i}")).collect();
        writeln!(out, "{},label", header.join(","))?;
        for (row, y) in self.features.rows().into_iter().zip(&self.labels) {
            for v in row {
                write!(out, "{v},")?;
            }
            writeln!(out, "{y}")?;
        }
        Ok(())
    }
}

fn apply_scaling(features: &mut Array2<f64>, scaling: Scaling) {
    match scaling {
        Scaling::Raw => {}
        Scaling::ZeroOne => {
            for mut col in features.axis_iter_mut(Axis(1)) {
                let lo = col.fold(f64::INFINITY, |m, &v| m.min(v));
                let hi = col.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let span = hi - lo;
                if span > 0.0 {
                    col.mapv_inplace(|v| ((v - lo) / span).clamp(0.0, 1.0));
                } else {
                    col.fill(0.0);
                }
            }
        }
        Scaling::Standardized => {
            for mut col in features.axis_iter_mut(Axis(1)) {
                let n = col.len() as f64;
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                if std > 0.0 {
                    col.mapv_inplace(|v| (v - mean) / std);
                } else {
                    col.fill(0.0);
                }
            }
        }
    }
}

/// Gaussian blobs with unit within-class variance.
///
/// Class `k` is centred at `separation / sqrt(2) * e_k`, so every pair of
/// class means is exactly `separation` apart (this needs `classes <= dims`).
/// Labels are assigned round-robin and then shuffled, which keeps class counts
/// within one of each other.
pub fn gen_synthetic(
    seed: u64,
    samples: usize,
    dims: usize,
    classes: usize,
    separation: f64,
    scaling: Scaling,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(invalid(format!("need at least 2 classes, got {classes}")));
    }
    if samples < classes {
        return Err(invalid(format!(
            "need at least one sample per class: {samples} samples for {classes} classes"
        )));
    }
    if dims < classes {
        return Err(invalid(format!(
            "equidistant class means need dims >= classes, got {dims} < {classes}"
        )));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(invalid(format!(
            "separation must be finite and non-negative, got {separation}"
        )));
    }

    let mut rng = stream_rng(seed, 0);
    let mut labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);

    let offset = separation / std::f64::consts::SQRT_2;
    let mut features = Array2::zeros((samples, dims));
    for (mut row, &y) in features.rows_mut().into_iter().zip(&labels) {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        row[y] += offset;
    }
    apply_scaling(&mut features, scaling);
    Ok(Dataset {
        features,
        labels,
        num_classes: classes,
        scaling,
        source: DataSource::Synthetic {
            seed,
            samples,
            dims,
            classes,
            separation,
        },
    })
}

/// Parses CIFAR-10 binary records from memory; `path` is only used in
/// error messages.
pub fn parse_cifar10_binary(bytes: &[u8], limit: Option<usize>, path: &Path) -> Result<Dataset> {
    if limit == Some(0) {
        return Err(invalid("limit must be positive"));
    }
    if !bytes.len().is_multiple_of(CIFAR10_RECORD_BYTES) {
        return Err(Error::CorruptFile {
            path: path.to_path_buf(),
            reason: format!(
                "size {} is not a multiple of the {CIFAR10_RECORD_BYTES}-byte record",
                bytes.len()
            ),
        });
    }
    let available = bytes.len() / CIFAR10_RECORD_BYTES;
    let count = limit.map_or(available, |l| l.min(available));
    let mut features = Array2::zeros((count, CIFAR10_PIXELS));
    let mut labels = Vec::with_capacity(count);
    for (index, (record, mut row)) in bytes
        .chunks_exact(CIFAR10_RECORD_BYTES)
        .zip(features.rows_mut())
        .enumerate()
    {
        let label = record[0] as usize;
        if label >= CIFAR10_CLASSES {
            return Err(Error::CorruptRecord {
                path: path.to_path_buf(),
                index,
                reason: format!("label byte {label} > 9"),
            });
        }
        labels.push(label);
        for (dst, &px) in row.iter_mut().zip(&record[1..]) {
            *dst = f64::from(px) / 255.0;
        }
    }
    Ok(Dataset {
        features,
        labels,
        num_classes: CIFAR10_CLASSES,
        scaling: Scaling::ZeroOne,
        source: DataSource::Cifar10 {
            path: path.display().to_string(),
            limit,
        },
    })
}

/// Loads a CIFAR-10 binary batch file with pixels scaled to `[0, 1]`.
pub fn load_cifar10_binary(path: impl AsRef<Path>, limit: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cifar10_binary(&bytes, limit, path)
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use super::*;

    fn record(label: u8, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut r = vec![label];
        r.extend((0..CIFAR10_PIXELS).map(fill));
        r
    }

    #[test]
    fn synthetic_is_deterministic_and_balanced() {
        let a = gen_synthetic(5, 103, 8, 4, 3.0, Scaling::ZeroOne).unwrap();
        let b = gen_synthetic(5, 103, 8, 4, 3.0, Scaling::ZeroOne).unwrap();
        assert_eq!(a, b);
        let counts = a.class_counts();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
        assert!(a.features.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_ne!(a, gen_synthetic(6, 103, 8, 4, 3.0, Scaling::ZeroOne).unwrap());
    }

    #[test]
    fn synthetic_means_are_separated() {
        let d = gen_synthetic(1, 40_000, 4, 2, 6.0, Scaling::Raw).unwrap();
        let mut means = Array2::<f64>::zeros((2, 4));
        for (row, &y) in d.features.rows().into_iter().zip(&d.labels) {
            let mut m = means.row_mut(y);
            m += &row;
        }
        let counts = d.class_counts();
        for (mut m, &n) in means.outer_iter_mut().zip(&counts) {
            m /= n as f64;
        }
        let dist = (&means.row(0) - &means.row(1)).mapv(|v| v * v).sum().sqrt();
        assert!((dist - 6.0).abs() < 0.1, "{dist}");
    }

    #[test]
    fn standardized_scaling_centres_features() {
        let d = gen_synthetic(2, 500, 6, 3, 4.0, Scaling::Standardized).unwrap();
        for col in d.features.axis_iter(Axis(1)) {
            let mean = col.sum() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_rejects_bad_sizes() {
        assert!(gen_synthetic(0, 10, 4, 1, 1.0, Scaling::Raw).is_err());
        assert!(gen_synthetic(0, 3, 4, 4, 1.0, Scaling::Raw).is_err());
        assert!(gen_synthetic(0, 10, 3, 4, 1.0, Scaling::Raw).is_err());
        assert!(gen_synthetic(0, 10, 4, 2, -1.0, Scaling::Raw).is_err());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let d = gen_synthetic(3, 5, 3, 2, 1.0, Scaling::ZeroOne).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "f0,f1,f2,label");
        assert_eq!(lines.len(), 6);
        let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[..3], d.features.row(0).to_vec()[..]);
        assert_eq!(first[3] as usize, d.labels[0]);
    }

    #[test]
    fn cifar_pixels_scale_to_unit_interval() {
        let mut bytes = record(3, |i| (i % 256) as u8);
        bytes.extend(record(9, |_| 255));
        let d = parse_cifar10_binary(&bytes, None, &PathBuf::from("mem")).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dims(), 3072);
        assert_eq!(d.labels, vec![3, 9]);
        assert_eq!(d.features[[1, 17]], 1.0);
        assert_eq!(d.features[[0, 0]], 0.0);
        for i in 0..CIFAR10_PIXELS {
            assert_eq!(d.features[[0, i]], (i % 256) as f64 / 255.0);
        }
    }

    #[test]
    fn cifar_limit_and_count() {
        let bytes: Vec<u8> = (0..10).flat_map(|k| record(k, |_| k * 10)).collect();
        let path = PathBuf::from("mem");
        assert_eq!(parse_cifar10_binary(&bytes, None, &path).unwrap().len(), 10);
        let limited = parse_cifar10_binary(&bytes, Some(4), &path).unwrap();
        assert_eq!(limited.len(), 4);
        assert_eq!(limited.labels, vec![0, 1, 2, 3]);
        assert_eq!(parse_cifar10_binary(&bytes, Some(50), &path).unwrap().len(), 10);
    }

    #[test]
    fn cifar_rejects_corruption() {
        let path = PathBuf::from("mem");
        let mut bytes = record(1, |_| 0);
        bytes.push(0);
        assert!(matches!(
            parse_cifar10_binary(&bytes, None, &path),
            Err(Error::CorruptFile { .. })
        ));
        let mut bytes = record(1, |_| 0);
        bytes.extend(record(10, |_| 0));
        assert!(matches!(
            parse_cifar10_binary(&bytes, None, &path),
            Err(Error::CorruptRecord { index: 1, .. })
        ));
    }

    #[test]
    fn cifar_missing_file_is_io_error() {
        assert!(matches!(
            load_cifar10_binary("/nonexistent/data_batch_1.bin", None),
            Err(Error::Io { .. })
        ));
    }
}
