//! Run specifications, batch execution and report assembly.
//!
//! A [`RunSpec`] describes a complete study: one dataset, one target-model
//! family, several procedures, an adversarial sampler, a loss and a set of
//! seeds. [`execute`] runs every (procedure, seed) pair — in parallel — and
//! assembles per-run certificates, cross-seed aggregates, dominance edges
//! and alpha-equivalence classes into a [`Report`] that [`write_report`]
//! lays out on disk.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::rng::{self, streams};
use crate::data::{
    kfold, load_csv, load_idx, sample_finite_domain, split, synth_clusters, synth_linear,
    ClusteredSpec, CsvSchema, DataError, FiniteDomainSpec, LabeledDataset, SyntheticLinearSpec,
};
use crate::metrics::{
    certify, cv_error, dominates, CertificateSet, Dominance, ErrorEstimate, Gamma,
    InterpretabilityCertificate, MetricsError,
};
use crate::models::{fit_logistic, fit_ols, LossFunction, ModelError, TargetModel};
use crate::procedures::{run_pipeline, Pipeline, ProcedureError, ProcedureKind, ProcedureSpec};
use crate::robustness::{generate_robust_sets, Aggregation, RobustnessError, RobustnessGenerator};

/// Errors raised while validating, executing or persisting a run.
#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("invalid run spec: {}", .0.join("; "))]
    SpecValidation(Vec<String>),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Procedure(#[from] ProcedureError),
    #[error(transparent)]
    Robustness(#[from] RobustnessError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the data comes from.
///
/// File-backed datasets are loaded once and shared across runs; synthetic
/// datasets are redrawn per run seed (the clustered generator keeps its
/// world fixed by its own seed and redraws only the sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Csv {
        path: PathBuf,
        target: String,
        #[serde(default)]
        features: Option<Vec<String>>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    SyntheticLinear(SyntheticLinearSpec),
    FiniteDomain {
        #[serde(flatten)]
        domain: FiniteDomainSpec,
        n: usize,
    },
    Clustered(ClusteredSpec),
}

/// Feature columns the baseline regression/classification model is fitted
/// on before any procedure communicates anything.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineFeatures {
    #[default]
    All,
    /// A seeded uniform draw of `size` distinct features.
    RandomSubset { size: usize },
    Indices { indices: Vec<usize> },
}

/// The model family certificates are issued for, plus its baseline state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetModelSpec {
    LinearRegressor {
        #[serde(default)]
        baseline_features: BaselineFeatures,
    },
    /// Baseline prototypes are a seeded uniform draw of `m` training rows.
    NearestPrototypeClassifier { m: usize },
    LogisticClassifier {
        #[serde(default)]
        baseline_features: BaselineFeatures,
    },
}

/// Adversarial sampler plus how many sets it draws per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPlan {
    pub generator: RobustnessGenerator,
    pub count: usize,
}

/// How each realized dataset is divided into train and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitPlan {
    /// One seeded split with this train fraction; the rest is test.
    Fraction { train: f64 },
    /// k-fold cross-validation; the four error estimates are fold means.
    Folds { k: usize },
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan::Fraction { train: 0.5 }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// A complete, serializable description of one certification study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: DatasetSpec,
    pub target_model: TargetModelSpec,
    pub procedures: Vec<ProcedureSpec>,
    pub robustness: RobustnessPlan,
    pub loss: LossFunction,
    #[serde(default)]
    pub split: SplitPlan,
    /// Each seed drives one full run per procedure: dataset realization,
    /// splitting, baseline fitting, adversarial sampling and the
    /// procedure's own randomness. Per-procedure `seed` fields are
    /// overridden by the run seed during execution.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Delta slack for grouping procedures into equivalence classes.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl RunSpec {
    /// Checks everything that can be checked without touching data files,
    /// collecting every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<(), ReportError> {
        let mut problems = Vec::new();
        let mut push = |msg: String| problems.push(msg);

        match &self.dataset {
            DatasetSpec::Csv { target, .. } => {
                if target.is_empty() {
                    push("dataset.target: column name must not be empty".into());
                }
            }
            DatasetSpec::Idx { .. } => {}
            DatasetSpec::SyntheticLinear(s) => {
                if let Err(e) = s.validate() {
                    push(format!("dataset: {e}"));
                }
            }
            DatasetSpec::FiniteDomain { domain, n } => {
                if let Err(e) = domain.validate() {
                    push(format!("dataset: {e}"));
                }
                if *n == 0 {
                    push("dataset.n: must be positive".into());
                }
            }
            DatasetSpec::Clustered(s) => {
                if let Err(e) = s.validate() {
                    push(format!("dataset: {e}"));
                }
            }
        }

        match &self.target_model {
            TargetModelSpec::NearestPrototypeClassifier { m } if *m == 0 => {
                push("target_model.m: must be positive".into());
            }
            TargetModelSpec::LinearRegressor { baseline_features }
            | TargetModelSpec::LogisticClassifier { baseline_features } => {
                match baseline_features {
                    BaselineFeatures::RandomSubset { size } if *size == 0 => {
                        push("target_model.baseline_features.size: must be positive".into());
                    }
                    BaselineFeatures::Indices { indices } if indices.is_empty() => {
                        push("target_model.baseline_features.indices: must not be empty".into());
                    }
                    _ => {}
                }
            }
            _ => {}
        }

        if self.procedures.is_empty() {
            push("procedures: at least one procedure is required".into());
        }
        let mut seen = BTreeSet::new();
        for (i, p) in self.procedures.iter().enumerate() {
            if !seen.insert(p.id()) {
                push(format!("procedures[{i}]: duplicate id `{}`", p.id()));
            }
            match &p.kind {
                ProcedureKind::MmdGreedy { m, kernel_bandwidth } => {
                    if *m == 0 {
                        push(format!("procedures[{i}].m: must be positive"));
                    }
                    if let Some(bw) = kernel_bandwidth {
                        if !bw.is_finite() || *bw <= 0.0 {
                            push(format!("procedures[{i}].kernel_bandwidth: must be positive"));
                        }
                    }
                }
                ProcedureKind::RandomPrototypes { m } | ProcedureKind::StepwiseFeatures { m, .. }
                    if *m == 0 =>
                {
                    push(format!("procedures[{i}].m: must be positive"));
                }
                _ => {}
            }
            if matches!(p.kind, ProcedureKind::StepwiseFeatures { .. })
                && matches!(self.target_model, TargetModelSpec::NearestPrototypeClassifier { .. })
            {
                push(format!(
                    "procedures[{i}]: stepwise features cannot target the prototype classifier"
                ));
            }
            if let Some(cm) = &p.complex_model {
                if cm.k == 0 {
                    push(format!("procedures[{i}].complex_model.k: must be positive"));
                }
            }
        }

        if self.robustness.count == 0 {
            push("robustness.count: must be positive".into());
        }
        match self.split {
            SplitPlan::Fraction { train } => {
                if !(train > 0.0 && train < 1.0) {
                    push("split.train: must lie strictly between 0 and 1".into());
                }
            }
            SplitPlan::Folds { k } => {
                if k < 2 {
                    push("split.k: needs at least two folds".into());
                }
            }
        }
        if self.seeds.is_empty() {
            push("seeds: at least one seed is required".into());
        }
        let mut seed_set = BTreeSet::new();
        for s in &self.seeds {
            if !seed_set.insert(*s) {
                push(format!("seeds: duplicate seed {s}"));
            }
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            push("alpha: must be a nonnegative real".into());
        }
        if self.loss == LossFunction::FeatureRecallComplement
            && !matches!(self.dataset, DatasetSpec::SyntheticLinear(_))
        {
            push(
                "loss: feature recall needs a dataset that records its relevant features"
                    .into(),
            );
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ReportError::SpecValidation(problems))
        }
    }
}

/// A run that errored instead of producing a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub procedure_id: String,
    pub seed: u64,
    pub message: String,
}

/// Context for reading a report later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub version: String,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub aggregation: Aggregation,
    pub loss: String,
    pub robustness: String,
    /// Unix epoch seconds at assembly time. Certificates themselves carry
    /// no timestamps, so re-running a spec reproduces them byte for byte.
    pub timestamp: u64,
}

/// Everything a study produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// One certificate per completed (procedure, seed) run, in spec order.
    pub certificates: Vec<InterpretabilityCertificate>,
    /// Per-procedure certificates built from error means across seeds
    /// (`seed` is 0 as a marker; constituent seeds are in `information`).
    /// Only procedures with every seed completed are aggregated.
    pub aggregated: Vec<InterpretabilityCertificate>,
    /// Transitively reduced strict-dominance pairs over the aggregated
    /// certificates: `(a, b)` means procedure `a` dominates `b`.
    pub dominance_edges: Vec<(String, String)>,
    /// Alpha-equivalence classes of aggregated certificates on delta,
    /// ascending; each class lists procedure ids.
    pub equivalence_classes: Vec<Vec<String>>,
    pub failures: Vec<FailureRecord>,
    pub metadata: ReportMetadata,
}

fn resolve_path(path: &Path, data_root: Option<&Path>) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(root) = data_root {
            return root.join(path);
        }
    }
    path.to_path_buf()
}

fn load_fixed_dataset(
    spec: &DatasetSpec,
    data_root: Option<&Path>,
) -> Result<Option<LabeledDataset>, ReportError> {
    match spec {
        DatasetSpec::Csv { path, target, features } => {
            let schema = CsvSchema { target: target.clone(), features: features.clone() };
            Ok(Some(load_csv(resolve_path(path, data_root), &schema)?))
        }
        DatasetSpec::Idx { images, labels } => Ok(Some(load_idx(
            resolve_path(images, data_root),
            resolve_path(labels, data_root),
        )?)),
        _ => Ok(None),
    }
}

fn realize_dataset(
    spec: &DatasetSpec,
    fixed: Option<&LabeledDataset>,
    run_seed: u64,
) -> Result<LabeledDataset, ReportError> {
    match spec {
        DatasetSpec::Csv { .. } | DatasetSpec::Idx { .. } => {
            Ok(fixed.expect("file-backed data is preloaded").clone())
        }
        DatasetSpec::SyntheticLinear(s) => {
            let mut per_run = s.clone();
            per_run.seed = s.seed.wrapping_add(run_seed);
            Ok(synth_linear(&per_run)?)
        }
        DatasetSpec::FiniteDomain { domain, n } => {
            let per_run = domain.clone().with_seed(domain.seed.wrapping_add(run_seed));
            Ok(sample_finite_domain(&per_run, *n)?)
        }
        DatasetSpec::Clustered(s) => Ok(synth_clusters(s, run_seed)?),
    }
}

fn resolve_baseline_features(
    features: &BaselineFeatures,
    dim: usize,
    run_seed: u64,
) -> Option<Vec<usize>> {
    match features {
        BaselineFeatures::All => None,
        BaselineFeatures::RandomSubset { size } => {
            let mut rng = rng::stream_rng(run_seed, streams::BASELINE);
            let mut subset = rng::sample_without_replacement(&mut rng, dim, (*size).min(dim));
            subset.sort_unstable();
            Some(subset)
        }
        BaselineFeatures::Indices { indices } => Some(indices.clone()),
    }
}

fn fit_baseline(
    spec: &TargetModelSpec,
    train: &LabeledDataset,
    loss: LossFunction,
    run_seed: u64,
) -> Result<TargetModel, ReportError> {
    let model = match spec {
        TargetModelSpec::LinearRegressor { baseline_features } => {
            let subset = resolve_baseline_features(baseline_features, train.dim(), run_seed);
            fit_ols(train, subset.as_deref())?
        }
        TargetModelSpec::LogisticClassifier { baseline_features } => {
            let subset = resolve_baseline_features(baseline_features, train.dim(), run_seed);
            fit_logistic(train, subset.as_deref())?
        }
        TargetModelSpec::NearestPrototypeClassifier { m } => {
            if *m > train.len() {
                return Err(ModelError::InvalidInput(format!(
                    "baseline needs {m} prototypes but training data has {} rows",
                    train.len()
                ))
                .into());
            }
            let mut rng = rng::stream_rng(run_seed, streams::BASELINE);
            let indices = rng::sample_without_replacement(&mut rng, train.len(), *m);
            TargetModel::nearest_prototype(train, &indices)?
        }
    };
    Ok(model.with_loss_id(loss.id()))
}

fn run_fold(
    spec: &RunSpec,
    procedure: &ProcedureSpec,
    train: &LabeledDataset,
    test: &LabeledDataset,
    run_seed: u64,
) -> Result<InterpretabilityCertificate, ReportError> {
    let baseline = fit_baseline(&spec.target_model, train, spec.loss, run_seed)?;
    let generator = spec.robustness.generator.with_seed_offset(run_seed);
    let robust_sets = generate_robust_sets(&generator, test, spec.robustness.count)?;
    run_pipeline(&Pipeline {
        procedure,
        target_model: &baseline,
        train,
        test,
        robust_sets: &robust_sets,
        robustness_id: &spec.robustness.generator.id(),
        loss: spec.loss,
        aggregation: spec.aggregation,
    })
    .map_err(Into::into)
}

fn error_slots(certs: &[&InterpretabilityCertificate]) -> [Vec<ErrorEstimate>; 4] {
    let mut slots: [Vec<ErrorEstimate>; 4] = Default::default();
    for c in certs {
        slots[0].push(c.errors.base_t.clone());
        slots[1].push(c.errors.base_r.clone());
        slots[2].push(c.errors.new_t.clone());
        slots[3].push(c.errors.new_r.clone());
    }
    slots
}

fn merge_certificates(
    certs: &[&InterpretabilityCertificate],
    seed: u64,
    information: serde_json::Value,
) -> Result<InterpretabilityCertificate, ReportError> {
    let [bt, br, nt, nr] = error_slots(certs);
    let mut merged = certify(
        cv_error(&bt)?,
        cv_error(&br)?,
        cv_error(&nt)?,
        cv_error(&nr)?,
        certs[0].ids.clone(),
        seed,
    )?;
    merged.information = Some(information);
    Ok(merged)
}

fn run_task(
    spec: &RunSpec,
    procedure_index: usize,
    run_seed: u64,
    fixed: Option<&LabeledDataset>,
) -> Result<InterpretabilityCertificate, ReportError> {
    let procedure = spec.procedures[procedure_index].clone().with_seed(run_seed);
    let data = realize_dataset(&spec.dataset, fixed, run_seed)?;
    match spec.split {
        SplitPlan::Fraction { train } => {
            let parts = split(&data, &[train, 1.0 - train], run_seed)?;
            run_fold(spec, &procedure, &parts[0], &parts[1], run_seed)
        }
        SplitPlan::Folds { k } => {
            let folds = kfold(&data, k, run_seed)?;
            let mut fold_certs = Vec::with_capacity(k);
            for test_index in 0..folds.len() {
                let complement: Vec<&LabeledDataset> = folds
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != test_index)
                    .map(|(_, f)| f)
                    .collect();
                let train = LabeledDataset::concat(&complement)?;
                fold_certs.push(run_fold(spec, &procedure, &train, &folds[test_index], run_seed)?);
            }
            let audits: Vec<serde_json::Value> =
                fold_certs.iter().map(|c| c.information.clone().unwrap_or(json!(null))).collect();
            let refs: Vec<&InterpretabilityCertificate> = fold_certs.iter().collect();
            merge_certificates(&refs, run_seed, json!({ "folds": audits }))
        }
    }
}

/// Dominance edges `(winner, loser)` plus alpha-equivalence classes of
/// procedure ids.
pub type ComparisonSummary = (Vec<(String, String)>, Vec<Vec<String>>);

/// Strict-dominance edges (transitively reduced) and alpha-equivalence
/// classes over certificates sharing a loss and an adversarial sampler.
/// Edge `(a, b)` means `a` dominates `b`.
pub fn compare(
    certificates: &[InterpretabilityCertificate],
    alpha: f64,
) -> Result<ComparisonSummary, MetricsError> {
    let n = certificates.len();
    let mut dom = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&certificates[i], &certificates[j])? == Dominance::Dominates {
                dom[i][j] = true;
            }
        }
    }
    // strict dominance is acyclic, so dropping every edge with an
    // intermediate witness yields the unique minimal (Hasse) diagram
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if dom[i][j] && !(0..n).any(|k| dom[i][k] && dom[k][j]) {
                edges.push((
                    certificates[i].ids.procedure.clone(),
                    certificates[j].ids.procedure.clone(),
                ));
            }
        }
    }
    let set = CertificateSet::new(certificates.to_vec(), alpha);
    let classes = set
        .equivalence_classes()
        .into_iter()
        .map(|class| {
            class.into_iter().map(|i| certificates[i].ids.procedure.clone()).collect()
        })
        .collect();
    Ok((edges, classes))
}

fn epoch_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs()
}

/// Runs the whole study. Individual run failures are isolated into
/// [`Report::failures`]; spec-level and I/O problems abort.
pub fn execute(spec: &RunSpec, data_root: Option<&Path>) -> Result<Report, ReportError> {
    spec.validate()?;
    let fixed = load_fixed_dataset(&spec.dataset, data_root)?;

    let tasks: Vec<(usize, u64)> = (0..spec.procedures.len())
        .flat_map(|pi| spec.seeds.iter().map(move |&s| (pi, s)))
        .collect();
    let outcomes: Vec<Result<InterpretabilityCertificate, FailureRecord>> = tasks
        .par_iter()
        .map(|&(pi, seed)| {
            run_task(spec, pi, seed, fixed.as_ref()).map_err(|e| FailureRecord {
                procedure_id: spec.procedures[pi].id(),
                seed,
                message: e.to_string(),
            })
        })
        .collect();

    let mut certificates = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(cert) => certificates.push(cert),
            Err(failure) => failures.push(failure),
        }
    }

    let mut aggregated = Vec::new();
    for procedure in &spec.procedures {
        let id = procedure.id();
        let mine: Vec<&InterpretabilityCertificate> =
            certificates.iter().filter(|c| c.ids.procedure == id).collect();
        if !mine.is_empty() && mine.len() == spec.seeds.len() {
            let seeds: Vec<u64> = mine.iter().map(|c| c.seed).collect();
            aggregated.push(merge_certificates(&mine, 0, json!({ "seeds": seeds }))?);
        }
    }

    let (dominance_edges, equivalence_classes) = compare(&aggregated, spec.alpha)?;

    Ok(Report {
        certificates,
        aggregated,
        dominance_edges,
        equivalence_classes,
        failures,
        metadata: ReportMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: spec.seeds.clone(),
            alpha: spec.alpha,
            aggregation: spec.aggregation,
            loss: spec.loss.id().to_string(),
            robustness: spec.robustness.generator.id(),
            timestamp: epoch_seconds(),
        },
    })
}

fn sanitize_id(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Writes `certificates/<procedure>__seed<N>.json` per run, `summary.json`
/// with the whole report, and a human-readable `table.txt`.
pub fn write_report(report: &Report, out_dir: &Path) -> Result<(), ReportError> {
    let cert_dir = out_dir.join("certificates");
    fs::create_dir_all(&cert_dir)?;
    for cert in &report.certificates {
        let name = format!("{}__seed{}.json", sanitize_id(&cert.ids.procedure), cert.seed);
        let mut body = serde_json::to_string_pretty(cert)?;
        body.push('\n');
        fs::write(cert_dir.join(name), body)?;
    }
    let mut summary = serde_json::to_string_pretty(report)?;
    summary.push('\n');
    fs::write(out_dir.join("summary.json"), summary)?;
    fs::write(out_dir.join("table.txt"), render_table(report))?;
    Ok(())
}

fn metric_label(loss_id: &str) -> &str {
    match loss_id {
        "zero_one" => "0-1 error",
        "mape_percent" => "MAPE %",
        "squared_error" => "sq. error",
        "feature_recall_complement" => "1 - recall",
        other => other,
    }
}

fn format_gamma(gamma: &Gamma) -> String {
    match gamma {
        Gamma::Defined(g) => format!("{g:.3}"),
        Gamma::Undefined => "undef".into(),
    }
}

/// Renders the aggregated certificates as a fixed-width text table, one row
/// per procedure, with per-seed spreads, followed by any failures.
pub fn render_table(report: &Report) -> String {
    let header =
        ["procedure", "target model", "delta", "gamma", "delta range", "gamma range", "robustness", "metric"];
    let mut rows: Vec<Vec<String>> = Vec::new();
    for agg in &report.aggregated {
        let per_seed: Vec<&InterpretabilityCertificate> = report
            .certificates
            .iter()
            .filter(|c| c.ids.procedure == agg.ids.procedure)
            .collect();
        let deltas: Vec<f64> = per_seed.iter().map(|c| c.delta).collect();
        let delta_range = match (
            deltas.iter().cloned().reduce(f64::min),
            deltas.iter().cloned().reduce(f64::max),
        ) {
            (Some(lo), Some(hi)) => format!("{lo:.3}..{hi:.3}"),
            _ => "-".into(),
        };
        let gamma_range = if per_seed.iter().any(|c| !c.gamma.is_defined()) {
            "undef".into()
        } else {
            let gs: Vec<f64> = per_seed.iter().filter_map(|c| c.gamma.value()).collect();
            match (gs.iter().cloned().reduce(f64::min), gs.iter().cloned().reduce(f64::max)) {
                (Some(lo), Some(hi)) => format!("{lo:.3}..{hi:.3}"),
                _ => "-".into(),
            }
        };
        rows.push(vec![
            agg.ids.procedure.clone(),
            agg.ids.target_model.clone(),
            format!("{:.3}", agg.delta),
            format_gamma(&agg.gamma),
            delta_range,
            gamma_range,
            agg.ids.robustness.clone(),
            metric_label(agg.loss_id()).to_string(),
        ]);
    }

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let render_row = |cells: &[String]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };

    let mut out = String::new();
    out.push_str(&render_row(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>()));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &rows {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    if !report.equivalence_classes.is_empty() {
        out.push('\n');
        out.push_str(&format!("equivalence classes (alpha = {}):\n", report.metadata.alpha));
        for class in &report.equivalence_classes {
            out.push_str(&format!("  {{{}}}\n", class.join(", ")));
        }
    }
    if !report.dominance_edges.is_empty() {
        out.push('\n');
        out.push_str("dominance:\n");
        for (a, b) in &report.dominance_edges {
            out.push_str(&format!("  {a} > {b}\n"));
        }
    }
    if !report.failures.is_empty() {
        out.push('\n');
        for f in &report.failures {
            out.push_str(&format!("FAILED {} seed {}: {}\n", f.procedure_id, f.seed, f.message));
        }
    }
    out
}
