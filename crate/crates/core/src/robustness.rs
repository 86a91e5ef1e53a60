//! Adversarial test-set generators.
//!
//! A robustness generator turns the standard test set into a family of
//! shifted sets; the spread between a model's error there and on the original
//! set is the robustness gap that gamma tracks. Three generators:
//!
//! * [`RobustnessGenerator::Identity`] — clones of the test set. The gap is
//!   zero by construction, so gamma collapses to 0 and certification reduces
//!   to delta alone.
//! * [`RobustnessGenerator::ClassSkew`] — each set contains rows of a single
//!   class, cycling through the classes present. Punishes models whose
//!   accuracy leans on the class mix.
//! * [`RobustnessGenerator::AdditivePerturbation`] — adds a random direction
//!   scaled to exactly `epsilon` under the chosen norm to every row.

use serde::{Deserialize, Serialize};

use crate::data::rng::{self, streams};
use crate::data::LabeledDataset;
use crate::metrics::{cv_error, ErrorEstimate, MetricsError};
use crate::models::{evaluate, LossFunction, ModelError, Predict};

/// Errors raised while generating robust sets or scoring them.
#[derive(Debug, thiserror::Error)]
pub enum RobustnessError {
    #[error("class {class} has no instances in the source set")]
    InsufficientClass { class: f64 },
    #[error("perturbation radius must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("set count must be positive")]
    InvalidCount,
    #[error("skew set size must be positive")]
    InvalidSetSize,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("dataset error: {0}")]
    Data(#[from] crate::data::DataError),
}

/// Norm under which a perturbation radius is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationNorm {
    L2,
    Linf,
}

/// How per-set errors are combined into the adversarial error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean over sets (sample sizes accumulate).
    #[default]
    Mean,
    /// Worst set.
    Max,
}

/// A recipe for adversarial test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobustnessGenerator {
    /// Unmodified clones of the source set.
    Identity,
    /// Single-class sets of `set_size` rows each. When `count` equals the
    /// number of classes, each class appears exactly once; otherwise sets
    /// cycle through the classes in ascending label order. Classes with
    /// fewer than `set_size` rows are resampled with replacement (recorded
    /// in the provenance).
    ClassSkew {
        set_size: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Adds an isotropic Gaussian direction rescaled to exactly `epsilon`
    /// under `norm` to every row; targets are unchanged.
    AdditivePerturbation {
        epsilon: f64,
        norm: PerturbationNorm,
        #[serde(default)]
        seed: u64,
    },
}

impl RobustnessGenerator {
    /// Identifier used in certificates and reports.
    pub fn id(&self) -> String {
        match self {
            RobustnessGenerator::Identity => "identity".into(),
            RobustnessGenerator::ClassSkew { set_size, .. } => format!("class_skew(size={set_size})"),
            RobustnessGenerator::AdditivePerturbation { epsilon, norm, .. } => {
                let norm = match norm {
                    PerturbationNorm::L2 => "l2",
                    PerturbationNorm::Linf => "linf",
                };
                format!("perturb({norm}, eps={epsilon})")
            }
        }
    }

    /// Returns a copy whose internal seed is offset by `offset`, leaving
    /// seedless generators untouched. Used to vary robust draws across run
    /// seeds without changing the generator's identity.
    pub fn with_seed_offset(&self, offset: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            RobustnessGenerator::Identity => {}
            RobustnessGenerator::ClassSkew { seed, .. }
            | RobustnessGenerator::AdditivePerturbation { seed, .. } => {
                *seed = seed.wrapping_add(offset);
            }
        }
        out
    }
}

/// Produces `count` adversarial sets from `source`.
pub fn generate_robust_sets(
    generator: &RobustnessGenerator,
    source: &LabeledDataset,
    count: usize,
) -> Result<Vec<LabeledDataset>, RobustnessError> {
    if count == 0 {
        return Err(RobustnessError::InvalidCount);
    }
    match generator {
        RobustnessGenerator::Identity => Ok(vec![source.clone(); count]),
        RobustnessGenerator::ClassSkew { set_size, seed } => {
            skewed_sets(source, *set_size, count, *seed)
        }
        RobustnessGenerator::AdditivePerturbation { epsilon, norm, seed } => {
            perturbed_sets(source, *epsilon, *norm, count, *seed)
        }
    }
}

fn skewed_sets(
    source: &LabeledDataset,
    set_size: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<LabeledDataset>, RobustnessError> {
    if set_size == 0 {
        return Err(RobustnessError::InvalidSetSize);
    }
    let classes = source.distinct_labels();
    // rows per class, classes in ascending label order
    let pools: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..source.len()).filter(|&i| source.target(i) == c).collect())
        .collect();
    let mut rng = rng::stream_rng(seed, streams::ROBUSTNESS);
    let mut sets = Vec::with_capacity(count);
    for s in 0..count {
        let class_idx = s % classes.len();
        let pool = &pools[class_idx];
        if pool.is_empty() {
            return Err(RobustnessError::InsufficientClass { class: classes[class_idx] });
        }
        let (rows, replaced): (Vec<usize>, bool) = if pool.len() >= set_size {
            let picks = rng::sample_without_replacement(&mut rng, pool.len(), set_size);
            (picks.into_iter().map(|i| pool[i]).collect(), false)
        } else {
            let picks =
                (0..set_size).map(|_| pool[rng::uniform_index(&mut rng, pool.len())]).collect();
            (picks, true)
        };
        let mut set = source.subset(&rows)?;
        set.provenance_mut().with_replacement = replaced;
        set.provenance_mut().source =
            format!("{} [skew class {}]", source.provenance().source, classes[class_idx]);
        sets.push(set);
    }
    Ok(sets)
}

fn perturbed_sets(
    source: &LabeledDataset,
    epsilon: f64,
    norm: PerturbationNorm,
    count: usize,
    seed: u64,
) -> Result<Vec<LabeledDataset>, RobustnessError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(RobustnessError::InvalidEpsilon(epsilon));
    }
    let d = source.dim();
    let mut rng = rng::stream_rng(seed, streams::ROBUSTNESS);
    let mut sets = Vec::with_capacity(count);
    for s in 0..count {
        let mut features = Vec::with_capacity(source.len() * d);
        let mut eta = vec![0.0; d];
        for i in 0..source.len() {
            for e in eta.iter_mut() {
                *e = rng::standard_normal(&mut rng);
            }
            let magnitude = match norm {
                PerturbationNorm::L2 => eta.iter().map(|e| e * e).sum::<f64>().sqrt(),
                PerturbationNorm::Linf => eta.iter().fold(0.0f64, |m, e| m.max(e.abs())),
            };
            if magnitude == 0.0 {
                // measure-zero draw; push along the first axis instead
                eta[0] = 1.0;
                for e in eta.iter_mut().skip(1) {
                    *e = 0.0;
                }
            }
            let magnitude = match norm {
                PerturbationNorm::L2 => eta.iter().map(|e| e * e).sum::<f64>().sqrt(),
                PerturbationNorm::Linf => eta.iter().fold(0.0f64, |m, e| m.max(e.abs())),
            };
            let scale = epsilon / magnitude;
            for (j, x) in source.row(i).iter().enumerate() {
                features.push(x + scale * eta[j]);
            }
        }
        let mut set = LabeledDataset::from_flat(
            features,
            source.len(),
            d,
            source.targets().to_vec(),
            source.provenance().clone(),
        )?;
        set.provenance_mut().source =
            format!("{} [perturbed set {s}]", source.provenance().source);
        sets.push(set);
    }
    Ok(sets)
}

/// Per-set errors of a model across the robust family.
pub fn per_set_errors<M: Predict + ?Sized>(
    model: &M,
    sets: &[LabeledDataset],
    loss: LossFunction,
) -> Result<Vec<ErrorEstimate>, RobustnessError> {
    if sets.is_empty() {
        return Err(RobustnessError::InvalidCount);
    }
    sets.iter().map(|s| evaluate(model, s, loss).map_err(RobustnessError::from)).collect()
}

/// The adversarial error: per-set errors combined by `aggregation`.
pub fn robust_error<M: Predict + ?Sized>(
    model: &M,
    sets: &[LabeledDataset],
    loss: LossFunction,
    aggregation: Aggregation,
) -> Result<ErrorEstimate, RobustnessError> {
    let per_set = per_set_errors(model, sets, loss)?;
    aggregate_errors(&per_set, aggregation)
}

/// Combines already-computed per-set errors.
pub fn aggregate_errors(
    per_set: &[ErrorEstimate],
    aggregation: Aggregation,
) -> Result<ErrorEstimate, RobustnessError> {
    match aggregation {
        Aggregation::Mean => Ok(cv_error(per_set)?),
        Aggregation::Max => {
            let worst = per_set
                .iter()
                .max_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
                .ok_or(RobustnessError::InvalidCount)?;
            Ok(worst.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::models::TargetModel;

    fn toy_classes() -> LabeledDataset {
        // 12 rows, classes 0/1/2 with 6/4/2 rows
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let targets = vec![0., 0., 0., 0., 0., 0., 1., 1., 1., 1., 2., 2.];
        LabeledDataset::from_rows(rows, targets, Provenance::new("toy")).unwrap()
    }

    #[test]
    fn identity_returns_exact_clones() {
        let data = toy_classes();
        let sets = generate_robust_sets(&RobustnessGenerator::Identity, &data, 3).unwrap();
        assert_eq!(sets.len(), 3);
        for s in &sets {
            assert_eq!(s, &data);
        }
    }

    #[test]
    fn count_of_zero_is_rejected() {
        let data = toy_classes();
        assert!(matches!(
            generate_robust_sets(&RobustnessGenerator::Identity, &data, 0),
            Err(RobustnessError::InvalidCount)
        ));
    }

    #[test]
    fn class_skew_produces_single_class_sets_in_label_order() {
        let data = toy_classes();
        let generator = RobustnessGenerator::ClassSkew { set_size: 2, seed: 5 };
        let sets = generate_robust_sets(&generator, &data, 3).unwrap();
        for (s, set) in sets.iter().enumerate() {
            assert_eq!(set.len(), 2);
            assert!(set.targets().iter().all(|&t| t == s as f64), "set {s}: {:?}", set.targets());
            assert!(!set.provenance().with_replacement);
        }
    }

    #[test]
    fn class_skew_cycles_when_count_exceeds_classes() {
        let data = toy_classes();
        let generator = RobustnessGenerator::ClassSkew { set_size: 2, seed: 5 };
        let sets = generate_robust_sets(&generator, &data, 7).unwrap();
        assert_eq!(sets[3].targets(), &[0.0, 0.0]);
        assert_eq!(sets[6].targets(), &[0.0, 0.0]);
    }

    #[test]
    fn class_skew_small_class_resamples_with_replacement() {
        let data = toy_classes(); // class 2 has two rows
        let generator = RobustnessGenerator::ClassSkew { set_size: 5, seed: 5 };
        let sets = generate_robust_sets(&generator, &data, 3).unwrap();
        assert_eq!(sets[2].len(), 5);
        assert!(sets[2].targets().iter().all(|&t| t == 2.0));
        assert!(sets[2].provenance().with_replacement);
        // classes 0 (6 rows) does not need replacement even at size 5
        assert!(!sets[0].provenance().with_replacement);
    }

    #[test]
    fn class_skew_draws_within_class_pool() {
        let data = toy_classes();
        let generator = RobustnessGenerator::ClassSkew { set_size: 4, seed: 11 };
        let sets = generate_robust_sets(&generator, &data, 2).unwrap();
        // every row of set 1 must be one of rows 6..=9 of the source
        for i in 0..sets[1].len() {
            let row = sets[1].row(i);
            assert!((6..=9).any(|j| data.row(j) == row));
        }
    }

    #[test]
    fn class_skew_is_deterministic_per_seed() {
        let data = toy_classes();
        let g5 = RobustnessGenerator::ClassSkew { set_size: 3, seed: 5 };
        let a = generate_robust_sets(&g5, &data, 3).unwrap();
        let b = generate_robust_sets(&g5, &data, 3).unwrap();
        assert_eq!(a, b);
        let g6 = g5.with_seed_offset(1);
        let c = generate_robust_sets(&g6, &data, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn perturbation_hits_exact_radius() {
        let data = toy_classes();
        type Radius = fn(&[f64]) -> f64;
        let cases: [(PerturbationNorm, Radius); 2] = [
            (PerturbationNorm::L2, |eta| eta.iter().map(|e| e * e).sum::<f64>().sqrt()),
            (PerturbationNorm::Linf, |eta| eta.iter().fold(0.0f64, |m, e| m.max(e.abs()))),
        ];
        for (norm, check) in cases {
            let generator =
                RobustnessGenerator::AdditivePerturbation { epsilon: 0.25, norm, seed: 3 };
            let sets = generate_robust_sets(&generator, &data, 2).unwrap();
            for set in &sets {
                assert_eq!(set.targets(), data.targets());
                for i in 0..set.len() {
                    let eta: Vec<f64> =
                        set.row(i).iter().zip(data.row(i)).map(|(a, b)| a - b).collect();
                    let magnitude = check(&eta);
                    assert!(
                        (magnitude - 0.25).abs() < 1e-12,
                        "{norm:?} magnitude {magnitude}"
                    );
                }
            }
        }
    }

    #[test]
    fn perturbation_rejects_nonpositive_epsilon() {
        let data = toy_classes();
        for eps in [0.0, -1.0, f64::NAN] {
            let generator = RobustnessGenerator::AdditivePerturbation {
                epsilon: eps,
                norm: PerturbationNorm::L2,
                seed: 0,
            };
            assert!(matches!(
                generate_robust_sets(&generator, &data, 1),
                Err(RobustnessError::InvalidEpsilon(_))
            ));
        }
    }

    #[test]
    fn robust_error_mean_and_max() {
        let data = toy_classes();
        // classify everything as class 0: exact errors per skew set are 0, 1, 1
        let model = TargetModel::nearest_prototype(&data, &[0]).unwrap();
        let generator = RobustnessGenerator::ClassSkew { set_size: 2, seed: 1 };
        let sets = generate_robust_sets(&generator, &data, 3).unwrap();
        let mean = robust_error(&model, &sets, LossFunction::ZeroOne, Aggregation::Mean).unwrap();
        assert!((mean.value - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(mean.sample_size, 6);
        let max = robust_error(&model, &sets, LossFunction::ZeroOne, Aggregation::Max).unwrap();
        assert_eq!(max.value, 1.0);
        assert_eq!(max.sample_size, 2);
    }

    #[test]
    fn identity_gap_is_exactly_zero() {
        let data = toy_classes();
        let model = TargetModel::nearest_prototype(&data, &[0, 7]).unwrap();
        let sets = generate_robust_sets(&RobustnessGenerator::Identity, &data, 4).unwrap();
        let on_test = evaluate(&model, &data, LossFunction::ZeroOne).unwrap();
        let on_robust =
            robust_error(&model, &sets, LossFunction::ZeroOne, Aggregation::Mean).unwrap();
        // averaging identical values can move the last ulp; the gap must
        // still sit far inside the gamma tolerance
        assert!((on_robust.value - on_test.value).abs() <= 1e-15);
    }
}
