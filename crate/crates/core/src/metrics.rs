//! Certificate arithmetic.
//!
//! A certificate pairs two ratios computed from four error estimates:
//!
//! * `delta = e_new_T / e_base_T` — error on the standard test distribution
//!   after the information transfer, relative to before.
//! * `gamma = (e_new_R - e_new_T) / (e_base_R - e_base_T)` — the robustness
//!   gap (adversarial minus standard error) after, relative to before.
//!
//! Lower is better for both. The baseline gap can legitimately be zero (the
//! identity generator reproduces the test distribution), which makes gamma
//! degenerate; [`compute_gamma`] resolves those cases explicitly instead of
//! emitting infinities.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Absolute tolerance under which a robustness gap counts as zero.
pub const GAMMA_GAP_TOLERANCE: f64 = 1e-12;

/// Errors raised by certificate arithmetic.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("baseline error is zero; no certificate can be issued")]
    ZeroBaseline,
    #[error("loss mismatch: `{expected}` vs `{found}`")]
    LossMismatch { expected: String, found: String },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("certificates come from different contexts: {0}")]
    ContextMismatch(String),
}

/// An empirical (or exactly computed) error value with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub value: f64,
    /// Number of evaluation points behind the value.
    pub sample_size: usize,
    /// Identifier of the loss that produced the value.
    pub loss_id: String,
}

impl ErrorEstimate {
    /// Panics on negative, non-finite values or an empty sample: an error
    /// estimate that fails those checks is a bug at the call site, not an
    /// input condition.
    pub fn new(value: f64, sample_size: usize, loss_id: impl Into<String>) -> Self {
        assert!(value.is_finite() && value >= 0.0, "error value must be a nonnegative real, got {value}");
        assert!(sample_size > 0, "sample size must be positive");
        ErrorEstimate { value, sample_size, loss_id: loss_id.into() }
    }
}

/// The robustness ratio. `Undefined` marks the degenerate case where the
/// baseline model had no robustness gap but the new model does: the ratio
/// carries no information and no finite surrogate would be honest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Defined(f64),
    Undefined,
}

impl Gamma {
    pub fn is_defined(&self) -> bool {
        matches!(self, Gamma::Defined(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Gamma::Defined(v) => Some(*v),
            Gamma::Undefined => None,
        }
    }

    /// `self <= other` in the certificate order. `Undefined` ranks strictly
    /// worse than every defined value.
    fn le(&self, other: &Gamma) -> bool {
        match (self, other) {
            (Gamma::Defined(a), Gamma::Defined(b)) => a <= b,
            (Gamma::Defined(_), Gamma::Undefined) => true,
            (Gamma::Undefined, Gamma::Defined(_)) => false,
            (Gamma::Undefined, Gamma::Undefined) => true,
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Gamma::Defined(v) => s.serialize_f64(*v),
            Gamma::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Gamma::Defined(v)),
            Repr::Text(t) if t == "undefined" => Ok(Gamma::Undefined),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid gamma marker `{t}`"))),
        }
    }
}

/// The four error estimates a certificate is computed from. `T` is the
/// standard test distribution, `R` the adversarially sampled one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateErrors {
    #[serde(rename = "base_T")]
    pub base_t: ErrorEstimate,
    #[serde(rename = "base_R")]
    pub base_r: ErrorEstimate,
    #[serde(rename = "new_T")]
    pub new_t: ErrorEstimate,
    #[serde(rename = "new_R")]
    pub new_r: ErrorEstimate,
}

/// Identifiers tying a certificate back to its experimental context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateIds {
    pub procedure: String,
    pub target_model: String,
    pub robustness: String,
}

/// The product of one certification run: both ratios, the raw errors they
/// were computed from, context identifiers and the seed, plus an optional
/// audit payload describing the communicated information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilityCertificate {
    pub delta: f64,
    pub gamma: Gamma,
    pub errors: CertificateErrors,
    pub ids: CertificateIds,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub information: Option<serde_json::Value>,
}

impl InterpretabilityCertificate {
    pub fn loss_id(&self) -> &str {
        &self.errors.base_t.loss_id
    }

    /// Recomputes delta from the stored errors. Always equals `self.delta`
    /// for certificates produced by [`certify`].
    pub fn recomputed_delta(&self) -> Result<f64, MetricsError> {
        compute_delta(&self.errors.base_t, &self.errors.new_t)
    }

    /// Recomputes gamma from the stored errors.
    pub fn recomputed_gamma(&self) -> Result<Gamma, MetricsError> {
        compute_gamma(&self.errors.base_t, &self.errors.base_r, &self.errors.new_t, &self.errors.new_r)
    }
}

fn check_loss(expected: &ErrorEstimate, others: &[&ErrorEstimate]) -> Result<(), MetricsError> {
    for e in others {
        if e.loss_id != expected.loss_id {
            return Err(MetricsError::LossMismatch {
                expected: expected.loss_id.clone(),
                found: e.loss_id.clone(),
            });
        }
    }
    Ok(())
}

/// Error ratio after the information transfer, relative to before.
pub fn compute_delta(e_base_t: &ErrorEstimate, e_new_t: &ErrorEstimate) -> Result<f64, MetricsError> {
    check_loss(e_base_t, &[e_new_t])?;
    if e_base_t.value == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(e_new_t.value / e_base_t.value)
}

/// Robustness-gap ratio after the information transfer, relative to before.
///
/// Gaps within [`GAMMA_GAP_TOLERANCE`] of zero count as zero. Both gaps zero
/// means robustness was perfect before and stayed perfect: gamma is 0. A zero
/// baseline gap with a real new gap admits no finite ratio and is reported as
/// [`Gamma::Undefined`]. A negative ratio (the new model's adversarial error
/// fell below its standard error) is reported as-is.
pub fn compute_gamma(
    e_base_t: &ErrorEstimate,
    e_base_r: &ErrorEstimate,
    e_new_t: &ErrorEstimate,
    e_new_r: &ErrorEstimate,
) -> Result<Gamma, MetricsError> {
    check_loss(e_base_t, &[e_base_r, e_new_t, e_new_r])?;
    let gap_base = e_base_r.value - e_base_t.value;
    let gap_new = e_new_r.value - e_new_t.value;
    if gap_base.abs() <= GAMMA_GAP_TOLERANCE {
        if gap_new.abs() <= GAMMA_GAP_TOLERANCE {
            return Ok(Gamma::Defined(0.0));
        }
        return Ok(Gamma::Undefined);
    }
    Ok(Gamma::Defined(gap_new / gap_base))
}

/// Builds a full certificate from the four error estimates.
pub fn certify(
    e_base_t: ErrorEstimate,
    e_base_r: ErrorEstimate,
    e_new_t: ErrorEstimate,
    e_new_r: ErrorEstimate,
    ids: CertificateIds,
    seed: u64,
) -> Result<InterpretabilityCertificate, MetricsError> {
    let delta = compute_delta(&e_base_t, &e_new_t)?;
    let gamma = compute_gamma(&e_base_t, &e_base_r, &e_new_t, &e_new_r)?;
    Ok(InterpretabilityCertificate {
        delta,
        gamma,
        errors: CertificateErrors { base_t: e_base_t, base_r: e_base_r, new_t: e_new_t, new_r: e_new_r },
        ids,
        seed,
        information: None,
    })
}

/// Cross-validated error: the unweighted mean of per-fold estimates, with
/// sample sizes accumulated. All folds must use the same loss.
pub fn cv_error(folds: &[ErrorEstimate]) -> Result<ErrorEstimate, MetricsError> {
    let first = folds.first().ok_or(MetricsError::EmptyInput("cv_error needs at least one fold"))?;
    check_loss(first, &folds.iter().skip(1).collect::<Vec<_>>())?;
    let value = folds.iter().map(|e| e.value).sum::<f64>() / folds.len() as f64;
    let sample_size = folds.iter().map(|e| e.sample_size).sum();
    Ok(ErrorEstimate::new(value, sample_size, first.loss_id.clone()))
}

/// Worst-case certificate across several adversarial distributions.
///
/// `delta` is the maximum of the per-distribution deltas and `gamma` the
/// maximum of the gammas, each taken independently; any undefined gamma makes
/// the aggregate undefined. The error block of the worst-delta distribution
/// is retained for audit (so the stored gamma may not recompute from it), and
/// the robustness id records every constituent.
pub fn aggregate_multi_distribution(
    certs: &[InterpretabilityCertificate],
) -> Result<InterpretabilityCertificate, MetricsError> {
    let first = certs
        .first()
        .ok_or(MetricsError::EmptyInput("aggregation needs at least one certificate"))?;
    for c in &certs[1..] {
        if c.ids.procedure != first.ids.procedure || c.ids.target_model != first.ids.target_model {
            return Err(MetricsError::ContextMismatch(format!(
                "({}, {}) vs ({}, {})",
                first.ids.procedure, first.ids.target_model, c.ids.procedure, c.ids.target_model
            )));
        }
        if c.loss_id() != first.loss_id() {
            return Err(MetricsError::LossMismatch {
                expected: first.loss_id().to_string(),
                found: c.loss_id().to_string(),
            });
        }
    }
    let worst = certs
        .iter()
        .max_by(|a, b| a.delta.partial_cmp(&b.delta).unwrap_or(Ordering::Equal))
        .unwrap();
    let gamma = certs.iter().fold(Gamma::Defined(f64::NEG_INFINITY), |acc, c| {
        match (acc, c.gamma) {
            (Gamma::Undefined, _) | (_, Gamma::Undefined) => Gamma::Undefined,
            (Gamma::Defined(a), Gamma::Defined(b)) => Gamma::Defined(a.max(b)),
        }
    });
    let robustness = {
        let mut parts: Vec<&str> = certs.iter().map(|c| c.ids.robustness.as_str()).collect();
        parts.dedup();
        format!("max[{}]", parts.join(", "))
    };
    Ok(InterpretabilityCertificate {
        delta: worst.delta,
        gamma,
        errors: worst.errors.clone(),
        ids: CertificateIds {
            procedure: first.ids.procedure.clone(),
            target_model: first.ids.target_model.clone(),
            robustness,
        },
        seed: first.seed,
        information: None,
    })
}

/// Outcome of comparing two certificates componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    /// Strictly at least as good on both ratios, better on at least one.
    Dominates,
    DominatedBy,
    /// Better on one ratio, worse on the other.
    Incomparable,
    Equal,
}

fn same_context(a: &InterpretabilityCertificate, b: &InterpretabilityCertificate) -> Result<(), MetricsError> {
    if a.loss_id() != b.loss_id() {
        return Err(MetricsError::LossMismatch {
            expected: a.loss_id().to_string(),
            found: b.loss_id().to_string(),
        });
    }
    if a.ids.robustness != b.ids.robustness {
        return Err(MetricsError::ContextMismatch(format!(
            "robustness `{}` vs `{}`",
            a.ids.robustness, b.ids.robustness
        )));
    }
    Ok(())
}

/// Componentwise comparison: `a` dominates `b` when it is no worse on both
/// delta and gamma and the two are not identical. Certificates must share
/// their loss and robustness context to be comparable at all.
pub fn dominates(
    a: &InterpretabilityCertificate,
    b: &InterpretabilityCertificate,
) -> Result<Dominance, MetricsError> {
    same_context(a, b)?;
    let a_le_b = a.delta <= b.delta && a.gamma.le(&b.gamma);
    let b_le_a = b.delta <= a.delta && b.gamma.le(&a.gamma);
    Ok(match (a_le_b, b_le_a) {
        (true, true) => Dominance::Equal,
        (true, false) => Dominance::Dominates,
        (false, true) => Dominance::DominatedBy,
        (false, false) => Dominance::Incomparable,
    })
}

/// A comparable collection of certificates with an equivalence threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateSet {
    pub certificates: Vec<InterpretabilityCertificate>,
    /// Two certificates with deltas within `alpha` are considered equivalent
    /// (transitively).
    pub alpha: f64,
}

impl CertificateSet {
    pub fn new(certificates: Vec<InterpretabilityCertificate>, alpha: f64) -> Self {
        assert!(alpha.is_finite() && alpha >= 0.0, "alpha must be a nonnegative real, got {alpha}");
        CertificateSet { certificates, alpha }
    }

    /// Partitions the certificates into alpha-equivalence classes on delta.
    ///
    /// Equivalence is the transitive closure of "deltas within alpha", which
    /// for points on a line is exactly: sort by delta and split wherever two
    /// consecutive deltas differ by more than alpha. Classes are returned in
    /// ascending delta order; each class lists certificate indices ascending.
    pub fn equivalence_classes(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.certificates.len()).collect();
        order.sort_by(|&i, &j| {
            self.certificates[i]
                .delta
                .partial_cmp(&self.certificates[j].delta)
                .unwrap_or(Ordering::Equal)
                .then(i.cmp(&j))
        });
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut prev_delta = f64::NEG_INFINITY;
        for &idx in &order {
            let delta = self.certificates[idx].delta;
            match classes.last_mut() {
                Some(class) if delta - prev_delta <= self.alpha => class.push(idx),
                _ => classes.push(vec![idx]),
            }
            prev_delta = delta;
        }
        for class in &mut classes {
            class.sort_unstable();
        }
        classes
    }
}
