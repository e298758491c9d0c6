//! In-memory datasets: synthetic generators, stratified splitting and
//! train-statistics standardization. CSV ingestion lives in the `kanbench` crate.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Feature matrix plus integer class labels in `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Data("dataset has no samples".into()));
        }
        if labels.len() != features.rows() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} feature rows", features.rows()),
                format!("{} labels", labels.len()),
            ));
        }
        if class_count < 2 {
            return Err(Error::Data(format!("need at least 2 classes, got {class_count}")));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::Data(format!("label {l} at row {i} is outside 0..{class_count}")));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite feature at row {}, column {}",
                pos / features.cols(),
                pos % features.cols()
            )));
        }
        Ok(Dataset {
            features,
            labels,
            class_count,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.features.cols() {
            return Err(Error::shape(
                "feature names",
                format!("{} columns", self.features.cols()),
                format!("{} names", names.len()),
            ));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut d = Dataset::new(
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.class_count,
        )?;
        d.feature_names = self.feature_names.clone();
        Ok(d)
    }

    fn with_features(&self, features: Matrix) -> Dataset {
        Dataset {
            features,
            labels: self.labels.clone(),
            class_count: self.class_count,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Cluster centres of the two-class XOR-style generator: class 0 sits on
/// the horizontal axis, class 1 on the vertical axis.
pub const TWO_CLUSTER_CENTERS: [[(f64, f64); 2]; 2] = [[(-2.0, 0.0), (2.0, 0.0)], [(0.0, -2.0), (0.0, 2.0)]];

/// Standard deviation of every cluster in [`gen_two_cluster`].
pub const TWO_CLUSTER_SIGMA: f64 = 0.5;

/// Two classes of two isotropic Gaussian clusters each, `n / 4` points per
/// cluster. Rows are ordered cluster by cluster.
pub fn gen_two_cluster(n: usize, rng: &mut RngStream) -> Result<Dataset> {
    if n < 8 || !n.is_multiple_of(4) {
        return Err(Error::Config(format!(
            "two-cluster sample count must be >= 8 and divisible by 4, got {n}"
        )));
    }
    let per_cluster = n / 4;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (class, centres) in TWO_CLUSTER_CENTERS.iter().enumerate() {
        for &(cx, cy) in centres {
            for _ in 0..per_cluster {
                data.push(cx + TWO_CLUSTER_SIGMA * rng.normal());
                data.push(cy + TWO_CLUSTER_SIGMA * rng.normal());
                labels.push(class);
            }
        }
    }
    Dataset::new(Matrix::from_vec(n, 2, data)?, labels, 2)?.with_feature_names(vec!["x1".into(), "x2".into()])
}

/// Column names of the printer schema, label column excluded.
pub const PRINTER_FEATURES: [&str; 7] = [
    "tensile_strength",
    "elastic_modulus",
    "elongation_at_break",
    "extrusion_temperature",
    "layer_height",
    "bed_temperature",
    "print_speed",
];

/// Printer class names in label order.
pub const PRINTER_CLASSES: [&str; 3] = ["makerbot", "ultimaker", "zortrax"];

/// Synthetic stand-in with the shape of the 3D-printer data: 104 samples,
/// 7 features, 3 classes (35 / 35 / 34).
///
/// Process settings are drawn from a small factorial design; the three
/// mechanical responses depend on those settings plus a printer-specific
/// offset and interaction term, with noise comparable to the offsets, so the
/// printer is only partially identifiable from any single feature.
pub fn gen_printer_surrogate(rng: &mut RngStream) -> Result<Dataset> {
    const SIZES: [usize; 3] = [35, 35, 34];
    const EXTRUSION: [f64; 3] = [200.0, 215.0, 230.0];
    const LAYER: [f64; 3] = [0.1, 0.2, 0.3];
    const BED: [f64; 2] = [50.0, 70.0];
    const SPEED: [f64; 3] = [30.0, 50.0, 70.0];
    // per printer: tensile offset (MPa), modulus offset (MPa), elongation offset (%),
    // layer-height sensitivity of tensile strength
    const PRINTER: [[f64; 4]; 3] = [
        [0.0, 0.0, 0.0, -20.0],
        [3.0, 120.0, -0.5, -5.0],
        [-2.0, 220.0, 0.6, -30.0],
    ];
    let n: usize = SIZES.iter().sum();
    let mut data = Vec::with_capacity(n * 7);
    let mut labels = Vec::with_capacity(n);
    for (class, &size) in SIZES.iter().enumerate() {
        let p = PRINTER[class];
        for _ in 0..size {
            let extrusion = EXTRUSION[rng.below(3)];
            let layer = LAYER[rng.below(3)];
            let bed = BED[rng.below(2)];
            let speed = SPEED[rng.below(3)];
            let tensile = 45.0 + p[0] + p[3] * (layer - 0.2) + 0.08 * (extrusion - 215.0) - 0.03 * (speed - 50.0)
                + 2.0 * rng.normal();
            let modulus = 2100.0 + p[1] + 2.0 * (extrusion - 215.0) - 300.0 * (layer - 0.2) + 70.0 * rng.normal();
            let elongation = 3.0 + p[2] + 0.01 * (bed - 60.0) + 2.0 * (layer - 0.2) + 0.3 * rng.normal();
            data.extend_from_slice(&[tensile, modulus, elongation, extrusion, layer, bed, speed]);
            labels.push(class);
        }
    }
    Dataset::new(Matrix::from_vec(n, 7, data)?, labels, 3)?
        .with_feature_names(PRINTER_FEATURES.iter().map(|s| String::from(*s)).collect())
}

/// Train/test partition with the row indices (into the source) of each side.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub split_seed: u64,
}

/// Per class: shuffle, then move `round_half_up(n_class * test_frac)`
/// samples to the test side. Index lists are returned in ascending order.
pub fn stratified_split(data: &Dataset, test_frac: f64, rng: &mut RngStream) -> Result<SplitPair> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_frac}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.class_count()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    if let Some((c, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < 2) {
        return Err(Error::Data(format!(
            "class {c} has {} sample(s); stratified splitting needs at least 2",
            members.len()
        )));
    }
    let mut train_indices = Vec::with_capacity(data.len());
    let mut test_indices = Vec::new();
    for members in &mut by_class {
        rng.shuffle(members);
        let n_test = libm::floor(members.len() as f64 * test_frac + 0.5) as usize;
        let n_test = n_test.min(members.len());
        test_indices.extend_from_slice(&members[..n_test]);
        train_indices.extend_from_slice(&members[n_test..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    if train_indices.is_empty() || test_indices.is_empty() {
        return Err(Error::Data(format!(
            "test fraction {test_frac} leaves an empty side ({} train / {} test)",
            train_indices.len(),
            test_indices.len()
        )));
    }
    Ok(SplitPair {
        train: data.subset(&train_indices)?,
        test: data.subset(&test_indices)?,
        train_indices,
        test_indices,
        split_seed: rng.master_seed(),
    })
}

/// Per-feature affine map `(x - mean) / std` with statistics from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column; a (near-)constant
    /// column gets `std = 1` so it is only centred.
    pub fn fit(features: &Matrix) -> Self {
        let (n, d) = features.shape();
        let nf = n as f64;
        let mut mean = vec![0.0; d];
        for row in features.row_iter() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![0.0; d];
        for row in features.row_iter() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = libm::sqrt(s / nf);
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, features: &Matrix) -> Matrix {
        let mut out = features.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Dataset {
        data.with_features(self.apply(data.features()))
    }
}

/// Fits on the training side and transforms both sides.
pub fn standardize_fit_apply(pair: &SplitPair) -> (SplitPair, Standardizer) {
    let s = Standardizer::fit(pair.train.features());
    let out = SplitPair {
        train: s.apply_dataset(&pair.train),
        test: s.apply_dataset(&pair.test),
        train_indices: pair.train_indices.clone(),
        test_indices: pair.test_indices.clone(),
        split_seed: pair.split_seed,
    };
    (out, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_ten() -> Dataset {
        let features = Matrix::from_vec(20, 1, (0..20).map(|i| i as f64).collect()).unwrap();
        let labels = (0..20).map(|i| i % 2).collect();
        Dataset::new(features, labels, 2).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(
            Dataset::new(Matrix::zeros(0, 2), vec![], 2),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            Dataset::new(Matrix::zeros(2, 2), vec![0, 2], 2),
            Err(Error::Data(_))
        ));
        let mut m = Matrix::zeros(2, 2);
        m[(1, 0)] = f64::NAN;
        assert!(matches!(Dataset::new(m, vec![0, 1], 2), Err(Error::Data(_))));
    }

    #[test]
    fn two_cluster_shape() {
        let d = gen_two_cluster(1000, &mut RngStream::derive(1, 0)).unwrap();
        assert_eq!((d.len(), d.dim(), d.class_count()), (1000, 2, 2));
        assert_eq!(d.class_counts(), vec![500, 500]);
        let b = gen_two_cluster(100, &mut RngStream::derive(1, 0)).unwrap();
        assert_eq!(b.class_counts(), vec![50, 50]);
        assert_eq!(b, gen_two_cluster(100, &mut RngStream::derive(1, 0)).unwrap());
        assert!(matches!(
            gen_two_cluster(10, &mut RngStream::derive(1, 0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            gen_two_cluster(4, &mut RngStream::derive(1, 0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn two_cluster_means_near_centres() {
        let d = gen_two_cluster(1000, &mut RngStream::derive(5, 0)).unwrap();
        let tol = 3.0 * TWO_CLUSTER_SIGMA / libm::sqrt(250.0);
        let centres = [(-2.0, 0.0), (2.0, 0.0), (0.0, -2.0), (0.0, 2.0)];
        for (c, &(cx, cy)) in centres.iter().enumerate() {
            let rows = c * 250..(c + 1) * 250;
            let mx = rows.clone().map(|r| d.features()[(r, 0)]).sum::<f64>() / 250.0;
            let my = rows.map(|r| d.features()[(r, 1)]).sum::<f64>() / 250.0;
            assert!(
                (mx - cx).abs() < tol && (my - cy).abs() < tol,
                "cluster {c}: ({mx}, {my})"
            );
        }
    }

    #[test]
    fn printer_surrogate_shape() {
        let d = gen_printer_surrogate(&mut RngStream::derive(3, 0)).unwrap();
        assert_eq!((d.len(), d.dim(), d.class_count()), (104, 7, 3));
        assert_eq!(d.class_counts(), vec![35, 35, 34]);
    }

    #[test]
    fn exact_split_sizes() {
        let d = two_by_ten();
        let pair = stratified_split(&d, 0.3, &mut RngStream::derive(4, 0)).unwrap();
        assert_eq!(pair.test.class_counts(), vec![3, 3]);
        assert_eq!(pair.train.class_counts(), vec![7, 7]);
        let mut all: Vec<usize> = pair.train_indices.iter().chain(&pair.test_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn split_rounding_569() {
        let labels: Vec<usize> = (0..569).map(|i| usize::from(i < 212)).collect();
        let d = Dataset::new(Matrix::zeros(569, 1), labels, 2).unwrap();
        let pair = stratified_split(&d, 0.3, &mut RngStream::derive(4, 0)).unwrap();
        // 357 * 0.3 = 107.1 -> 107, 212 * 0.3 = 63.6 -> 64
        assert_eq!(pair.test.class_counts(), vec![107, 64]);
    }

    #[test]
    fn split_errors() {
        let d = Dataset::new(Matrix::zeros(3, 1), vec![0, 0, 1], 2).unwrap();
        assert!(matches!(
            stratified_split(&d, 0.3, &mut RngStream::derive(0, 0)),
            Err(Error::Data(_))
        ));
        let d = two_by_ten();
        assert!(matches!(
            stratified_split(&d, 1.0, &mut RngStream::derive(0, 0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            stratified_split(&d, 0.0, &mut RngStream::derive(0, 0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn standardize_rules() {
        let features = Matrix::from_rows(&[[1.0, 5.0, 10.0], [2.0, 5.0, 30.0], [6.0, 5.0, 20.0]]).unwrap();
        let s = Standardizer::fit(&features);
        assert_eq!(s.std[1], 1.0);
        let z = s.apply(&features);
        for c in 0..3 {
            let mean = (0..3).map(|r| z[(r, c)]).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-10);
        }
        // constant column is only centred
        assert_eq!((0..3).map(|r| z[(r, 1)]).collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
        let mean_row = Matrix::from_rows(core::slice::from_ref(&s.mean)).unwrap();
        assert!(s.apply(&mean_row).as_slice().iter().all(|v| v.abs() < 1e-12));
    }
}
