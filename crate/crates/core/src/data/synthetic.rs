//! Synthetic dataset generators.
//!
//! Three families:
//!
//! * [`SyntheticLinearSpec`] — Gaussian features with a sparse linear target,
//!   for feature-selection experiments where the relevant set is known.
//! * [`FiniteDomainSpec`] — an explicit finite distribution over points and
//!   labels, small enough that expected errors can be computed exactly by
//!   enumeration and compared against sampled estimates.
//! * [`ClusteredSpec`] — a mixture of Gaussian subclusters grouped into
//!   classes, with controllable class imbalance and per-class contamination.
//!   Stands in for image data at desk scale in prototype-selection runs.

use serde::{Deserialize, Serialize};

use super::rng::{self, streams};
use super::{DataError, LabeledDataset, Provenance};
use crate::metrics::ErrorEstimate;
use crate::models::{LossFunction, ModelError, Predict};

/// Sparse linear regression data: `x ~ N(0, I_d)`,
/// `y = sum(coefficients[k] * x[relevant[k]]) + noise * N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLinearSpec {
    pub n: usize,
    pub d: usize,
    /// Indices of the features that actually drive the target.
    pub relevant: Vec<usize>,
    /// One coefficient per relevant feature.
    pub coefficients: Vec<f64>,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticLinearSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |msg: String| Err(DataError::InvalidSpec(msg));
        if self.n == 0 || self.d == 0 {
            return fail("n and d must be positive".into());
        }
        if self.relevant.is_empty() {
            return fail("relevant feature set is empty".into());
        }
        let mut seen = self.relevant.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.relevant.len() {
            return fail("relevant features contain duplicates".into());
        }
        if let Some(&bad) = self.relevant.iter().find(|&&f| f >= self.d) {
            return fail(format!("relevant feature {bad} out of range for d={}", self.d));
        }
        if self.coefficients.len() != self.relevant.len() {
            return fail(format!(
                "{} coefficients for {} relevant features",
                self.coefficients.len(),
                self.relevant.len()
            ));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return fail(format!("noise must be a nonnegative real, got {}", self.noise));
        }
        Ok(())
    }
}

/// Generates a dataset from a [`SyntheticLinearSpec`].
///
/// The provenance records the sorted relevant set as ground truth for the
/// feature-recall loss.
pub fn synth_linear(spec: &SyntheticLinearSpec) -> Result<LabeledDataset, DataError> {
    spec.validate()?;
    let mut rng = rng::stream_rng(spec.seed, streams::SAMPLE);
    let mut features = Vec::with_capacity(spec.n * spec.d);
    let mut targets = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = features.len();
        for _ in 0..spec.d {
            features.push(rng::standard_normal(&mut rng));
        }
        let row = &features[start..];
        let mut y = 0.0;
        for (k, &f) in spec.relevant.iter().enumerate() {
            y += spec.coefficients[k] * row[f];
        }
        y += spec.noise * rng::standard_normal(&mut rng);
        targets.push(y);
    }
    let mut provenance = Provenance::new(format!(
        "synth_linear(n={}, d={}, seed={})",
        spec.n, spec.d, spec.seed
    ));
    let mut truth = spec.relevant.clone();
    truth.sort_unstable();
    provenance.truth_features = Some(truth);
    let names = (0..spec.d).map(|j| format!("f{j}")).collect();
    LabeledDataset::from_flat(features, spec.n, spec.d, targets, provenance)?
        .with_feature_names(names)
}

/// An explicit finite distribution: `K` points with marginal probabilities
/// and a per-point distribution over integer labels `0..L-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDomainSpec {
    /// The domain, one feature vector per point.
    pub points: Vec<Vec<f64>>,
    /// Marginal probability of each point; must sum to 1.
    pub point_probs: Vec<f64>,
    /// `label_probs[k][l]` = P(label = l | point k); each row sums to 1.
    pub label_probs: Vec<Vec<f64>>,
    pub seed: u64,
}

impl FiniteDomainSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |msg: String| Err(DataError::InvalidSpec(msg));
        if self.points.is_empty() {
            return fail("domain has no points".into());
        }
        let d = self.points[0].len();
        if d == 0 {
            return fail("domain points have no features".into());
        }
        if self.points.iter().any(|p| p.len() != d) {
            return fail("domain points differ in dimensionality".into());
        }
        if self.point_probs.len() != self.points.len() {
            return fail(format!(
                "{} point probabilities for {} points",
                self.point_probs.len(),
                self.points.len()
            ));
        }
        if self.label_probs.len() != self.points.len() {
            return fail(format!(
                "{} label rows for {} points",
                self.label_probs.len(),
                self.points.len()
            ));
        }
        let labels = self.label_probs[0].len();
        if labels == 0 || self.label_probs.iter().any(|r| r.len() != labels) {
            return fail("label distributions must share one nonempty label set".into());
        }
        let check_dist = |name: &str, probs: &[f64]| -> Result<(), DataError> {
            if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(DataError::InvalidSpec(format!("{name} has negative entries")));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(DataError::InvalidSpec(format!("{name} sums to {sum}, expected 1")));
            }
            Ok(())
        };
        check_dist("point distribution", &self.point_probs)?;
        for (k, row) in self.label_probs.iter().enumerate() {
            check_dist(&format!("label distribution of point {k}"), row)?;
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// Draws `n` labeled samples from a finite domain.
pub fn sample_finite_domain(spec: &FiniteDomainSpec, n: usize) -> Result<LabeledDataset, DataError> {
    spec.validate()?;
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }
    let point_cum = rng::cumulative(&spec.point_probs);
    let label_cums: Vec<Vec<f64>> = spec.label_probs.iter().map(|r| rng::cumulative(r)).collect();
    let mut rng = rng::stream_rng(spec.seed, streams::SAMPLE);
    let d = spec.dim();
    let mut features = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng::weighted_index(&mut rng, &point_cum);
        features.extend_from_slice(&spec.points[k]);
        targets.push(rng::weighted_index(&mut rng, &label_cums[k]) as f64);
    }
    let provenance = Provenance::new(format!(
        "finite_domain(points={}, seed={})",
        spec.points.len(),
        spec.seed
    ));
    LabeledDataset::from_flat(features, n, d, targets, provenance)
}

/// Expected loss of a model over a finite domain, computed exactly by
/// enumerating every (point, label) pair. The returned estimate carries the
/// domain size as its sample size.
pub fn exact_expected_error<M: Predict + ?Sized>(
    spec: &FiniteDomainSpec,
    model: &M,
    loss: LossFunction,
) -> Result<ErrorEstimate, ModelError> {
    spec.validate().map_err(|e| ModelError::InvalidInput(e.to_string()))?;
    if model.input_dim() != spec.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: model.input_dim(),
            found: spec.dim(),
        });
    }
    let mut numerator = 0.0;
    let mut target_mass = 0.0;
    for (k, point) in spec.points.iter().enumerate() {
        let pred = model.predict(point)?;
        for (label, &p_label) in spec.label_probs[k].iter().enumerate() {
            let w = spec.point_probs[k] * p_label;
            if w == 0.0 {
                continue;
            }
            let y = label as f64;
            match loss {
                LossFunction::ZeroOne => {
                    if pred != y {
                        numerator += w;
                    }
                }
                LossFunction::SquaredError => numerator += w * (pred - y) * (pred - y),
                LossFunction::MapePercent => {
                    numerator += w * (pred - y).abs();
                    target_mass += w * y;
                }
                LossFunction::FeatureRecallComplement => {
                    return Err(ModelError::InvalidInput(
                        "feature recall is not an expectation over labels".into(),
                    ))
                }
            }
        }
    }
    let value = match loss {
        LossFunction::MapePercent => {
            if target_mass <= 0.0 {
                return Err(ModelError::InvalidTarget(format!(
                    "expected target mass is {target_mass}, percentage error undefined"
                )));
            }
            100.0 * numerator / target_mass
        }
        _ => numerator,
    };
    Ok(ErrorEstimate::new(value, spec.points.len(), loss.id()))
}

/// Gaussian subclusters grouped into classes.
///
/// The world (subcluster centers and weights) is drawn from `seed`; point
/// draws come from the separate sample seed passed to [`synth_clusters`], so
/// one world can be resampled many times. Each point picks a class by
/// `class_weights`, then one of the class's subclusters by a weight that is
/// log-normal with spread `cluster_weight_spread` (zero = equal). With
/// probability `fringe` (per class when `class_fringe` is given) the point is
/// drawn at `fringe_scale` around its subcluster center instead of
/// `cluster_scale`, scattering it far from home; the fringe rate acts as a
/// per-class contamination level no prototype choice can repair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredSpec {
    pub classes: usize,
    #[serde(default = "one")]
    pub clusters_per_class: usize,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default = "one_f64")]
    pub center_scale: f64,
    #[serde(default = "default_cluster_scale")]
    pub cluster_scale: f64,
    #[serde(default)]
    pub cluster_weight_spread: f64,
    #[serde(default)]
    pub class_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub fringe_fraction: f64,
    #[serde(default)]
    pub class_fringe: Option<Vec<f64>>,
    #[serde(default = "default_fringe_scale")]
    pub fringe_scale: f64,
}

fn one() -> usize {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn default_cluster_scale() -> f64 {
    0.2
}
fn default_fringe_scale() -> f64 {
    3.0
}

impl Default for ClusteredSpec {
    fn default() -> Self {
        ClusteredSpec {
            classes: 2,
            clusters_per_class: 1,
            d: 2,
            n: 100,
            seed: 0,
            center_scale: 1.0,
            cluster_scale: default_cluster_scale(),
            cluster_weight_spread: 0.0,
            class_weights: None,
            fringe_fraction: 0.0,
            class_fringe: None,
            fringe_scale: default_fringe_scale(),
        }
    }
}

impl ClusteredSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |msg: String| Err(DataError::InvalidSpec(msg));
        if self.classes == 0 || self.clusters_per_class == 0 || self.d == 0 || self.n == 0 {
            return fail("classes, clusters_per_class, d and n must be positive".into());
        }
        for (name, v) in [
            ("center_scale", self.center_scale),
            ("cluster_scale", self.cluster_scale),
            ("fringe_scale", self.fringe_scale),
            ("cluster_weight_spread", self.cluster_weight_spread),
        ] {
            if !v.is_finite() || v < 0.0 {
                return fail(format!("{name} must be a nonnegative real, got {v}"));
            }
        }
        if let Some(w) = &self.class_weights {
            if w.len() != self.classes {
                return fail(format!("{} class weights for {} classes", w.len(), self.classes));
            }
            if w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                return fail("class weights must be positive".into());
            }
        }
        let check_fringe = |v: f64| v.is_finite() && (0.0..1.0).contains(&v);
        if !check_fringe(self.fringe_fraction) {
            return fail(format!("fringe_fraction must lie in [0, 1), got {}", self.fringe_fraction));
        }
        if let Some(f) = &self.class_fringe {
            if f.len() != self.classes {
                return fail(format!("{} fringe rates for {} classes", f.len(), self.classes));
            }
            if !f.iter().all(|&x| check_fringe(x)) {
                return fail("class fringe rates must lie in [0, 1)".into());
            }
        }
        Ok(())
    }
}

/// Generates a dataset from a [`ClusteredSpec`] world.
///
/// `sample_seed` controls only the point draws; the subcluster layout is
/// fixed by `spec.seed`, so different sample seeds are independent samples
/// from the same population.
pub fn synth_clusters(spec: &ClusteredSpec, sample_seed: u64) -> Result<LabeledDataset, DataError> {
    spec.validate()?;
    let total_clusters = spec.classes * spec.clusters_per_class;

    // World: centers in class-major order, then subcluster weights.
    let mut world = rng::stream_rng(spec.seed, streams::DATASET);
    let mut centers = Vec::with_capacity(total_clusters);
    for _ in 0..total_clusters {
        let c: Vec<f64> =
            (0..spec.d).map(|_| spec.center_scale * rng::standard_normal(&mut world)).collect();
        centers.push(c);
    }
    let mut cluster_cums = Vec::with_capacity(spec.classes);
    for _ in 0..spec.classes {
        let raw: Vec<f64> = (0..spec.clusters_per_class)
            .map(|_| (spec.cluster_weight_spread * rng::standard_normal(&mut world)).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        cluster_cums.push(rng::cumulative(&probs));
    }

    let class_probs: Vec<f64> = match &spec.class_weights {
        Some(w) => {
            let sum: f64 = w.iter().sum();
            w.iter().map(|x| x / sum).collect()
        }
        None => vec![1.0 / spec.classes as f64; spec.classes],
    };
    let class_cum = rng::cumulative(&class_probs);
    let fringe_of = |class: usize| -> f64 {
        spec.class_fringe.as_ref().map(|f| f[class]).unwrap_or(spec.fringe_fraction)
    };

    let mut draws = rng::stream_rng(sample_seed, streams::SAMPLE);
    let mut features = Vec::with_capacity(spec.n * spec.d);
    let mut targets = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let class = rng::weighted_index(&mut draws, &class_cum);
        let sub = rng::weighted_index(&mut draws, &cluster_cums[class]);
        let scale = if rng::uniform_f64(&mut draws) < fringe_of(class) {
            spec.fringe_scale
        } else {
            spec.cluster_scale
        };
        let center = &centers[class * spec.clusters_per_class + sub];
        for &cj in center {
            features.push(cj + scale * rng::standard_normal(&mut draws));
        }
        targets.push(class as f64);
    }
    let provenance = Provenance::new(format!(
        "clusters(classes={}, per_class={}, d={}, seed={}, sample_seed={})",
        spec.classes, spec.clusters_per_class, spec.d, spec.seed, sample_seed
    ));
    LabeledDataset::from_flat(features, spec.n, spec.d, targets, provenance)
}
