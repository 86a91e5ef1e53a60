//! End-to-end studies over `execute`: dominance between selection strategies
//! on a clustered population, and the rendered summary table.

use interp_cert::data::ClusteredSpec;
use interp_cert::metrics::{certify, CertificateIds, ErrorEstimate, Gamma};
use interp_cert::models::LossFunction;
use interp_cert::procedures::{ProcedureKind, ProcedureSpec};
use interp_cert::report::{
    execute, render_table, DatasetSpec, Report, ReportMetadata, RobustnessPlan, RunSpec,
    SplitPlan, TargetModelSpec,
};
use interp_cert::robustness::{Aggregation, RobustnessGenerator};

fn study_spec() -> RunSpec {
    let mut class_fringe = vec![0.01; 5];
    class_fringe[0] = 0.35;
    RunSpec {
        dataset: DatasetSpec::Clustered(ClusteredSpec {
            classes: 5,
            clusters_per_class: 4,
            d: 16,
            n: 1200,
            seed: 424242,
            center_scale: 1.0,
            cluster_scale: 0.33,
            cluster_weight_spread: 1.0,
            class_weights: None,
            fringe_fraction: 0.0,
            class_fringe: Some(class_fringe),
            fringe_scale: 3.0,
        }),
        target_model: TargetModelSpec::NearestPrototypeClassifier { m: 60 },
        procedures: vec![
            ProcedureSpec::new(ProcedureKind::MmdGreedy { m: 60, kernel_bandwidth: Some(2.5) }),
            ProcedureSpec::new(ProcedureKind::RandomPrototypes { m: 60 }),
        ],
        robustness: RobustnessPlan {
            generator: RobustnessGenerator::ClassSkew { set_size: 150, seed: 0 },
            count: 6,
        },
        loss: LossFunction::ZeroOne,
        split: SplitPlan::Fraction { train: 1.0 / 3.0 },
        seeds: vec![1, 2, 3],
        alpha: 0.05,
        aggregation: Aggregation::Max,
    }
}

#[test]
fn greedy_selection_dominates_random_prototypes() {
    let report = execute(&study_spec(), None).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let greedy = &report.aggregated[0];
    let random = &report.aggregated[1];
    assert!(greedy.ids.procedure.starts_with("mmd_greedy"));
    assert!(random.ids.procedure.starts_with("random_prototypes"));
    assert!(
        greedy.delta < random.delta,
        "greedy delta {} not below random delta {}",
        greedy.delta,
        random.delta
    );
    assert!(
        report
            .dominance_edges
            .contains(&(greedy.ids.procedure.clone(), random.ids.procedure.clone())),
        "expected a dominance edge, got {:?} (greedy {:?} {:?}, random {:?} {:?})",
        report.dominance_edges,
        greedy.delta,
        greedy.gamma,
        random.delta,
        random.gamma
    );
}

fn table_report(certs: Vec<interp_cert::InterpretabilityCertificate>) -> Report {
    Report {
        certificates: certs.clone(),
        aggregated: certs,
        dominance_edges: vec![],
        equivalence_classes: vec![],
        failures: vec![],
        metadata: ReportMetadata {
            version: "test".into(),
            seeds: vec![0],
            alpha: 0.0,
            aggregation: Aggregation::Mean,
            loss: "mape_percent".into(),
            robustness: "identity".into(),
            timestamp: 0,
        },
    }
}

#[test]
fn table_row_reports_three_decimal_ratios_for_an_arithmetic_run() {
    let est = |v: f64| ErrorEstimate::new(v, 100, "mape_percent");
    let cert = certify(
        est(103.64),
        est(103.64),
        est(95.83),
        est(95.83),
        CertificateIds {
            procedure: "decimal_expansion".into(),
            target_model: "arithmetic_student".into(),
            robustness: "identity".into(),
        },
        0,
    )
    .unwrap();
    let table = render_table(&table_report(vec![cert]));
    let row = table.lines().nth(2).unwrap();
    assert!(row.contains("decimal_expansion"), "{table}");
    assert!(row.contains("0.925"), "{table}");
    assert!(row.contains("0.000"), "{table}");
    assert!(row.contains("MAPE %"), "{table}");
}

#[test]
fn the_readme_example_spec_parses_and_validates() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md"))
        .unwrap();
    let fence = readme.split("```json").nth(1).and_then(|s| s.split("```").next()).unwrap();
    let spec: RunSpec = serde_json::from_str(fence).unwrap();
    spec.validate().unwrap();
    assert_eq!(spec.procedures.len(), 2);
}

#[test]
fn table_renders_an_undefined_gamma_as_undef() {
    let est = |v: f64| ErrorEstimate::new(v, 100, "zero_one");
    let cert = certify(
        est(0.2),
        est(0.2),
        est(0.1),
        est(0.3),
        CertificateIds {
            procedure: "p".into(),
            target_model: "m".into(),
            robustness: "class_skew(150)".into(),
        },
        0,
    )
    .unwrap();
    assert_eq!(cert.gamma, Gamma::Undefined);
    let table = render_table(&table_report(vec![cert]));
    let row = table.lines().nth(2).unwrap();
    assert!(row.contains("undef"), "{table}");
}
