//! Certification harness for interpretable procedures.
//!
//! A procedure explains a complex model by communicating a piece of
//! information (a prototype set, a feature subset, a parameter adjustment,
//! instance weights) to a simpler target model. The harness quantifies how
//! useful that information was with a two-number certificate:
//!
//! * `delta` — the ratio of the target model's error after absorbing the
//!   information to its error before. Smaller is better; `delta = 1` means
//!   the information was useless.
//! * `gamma` — the ratio of the error gap between an adversarially sampled
//!   test distribution and the standard one, after versus before. It bounds
//!   how much of the improvement survives distribution shift.
//!
//! Modules:
//!
//! * [`data`] — datasets, deterministic sampling, CSV/IDX loaders, synthetic
//!   generators with exactly computable expected errors.
//! * [`models`] — target models (linear, logistic, nearest-prototype), a
//!   k-NN stand-in for the complex model, losses, and information transfer.
//! * [`procedures`] — the information-producing procedures (greedy kernel
//!   prototype selection, random prototypes, stepwise feature selection,
//!   identity) and the end-to-end certification pipeline.
//! * [`robustness`] — adversarial test-set generators (identity, class skew,
//!   norm-bounded additive perturbation).
//! * [`metrics`] — certificate arithmetic: delta, gamma with its degenerate
//!   cases, cross-validated averaging, dominance and equivalence classes.
//! * [`report`] — declarative run specs, parallel execution, JSON and text
//!   reports.
//!
//! Every random choice flows from an explicit `u64` seed through named
//! ChaCha8 streams, so runs are reproducible byte for byte across platforms.

pub mod data;
pub mod metrics;
pub mod models;
pub mod procedures;
pub mod report;
pub mod robustness;

pub use data::{DataError, LabeledDataset, Provenance};
pub use metrics::{
    CertificateIds, CertificateSet, Dominance, ErrorEstimate, Gamma, InterpretabilityCertificate,
    MetricsError,
};
pub use models::{
    ComplexModel, Information, InformationKind, LossFunction, ModelError, Predict, TargetModel,
};
pub use procedures::{ProcedureError, ProcedureKind, ProcedureSpec};
pub use report::{Report, ReportError, RunSpec};
pub use robustness::{RobustnessError, RobustnessGenerator};
