use std::fs;
use std::path::Path;

use rdbounds::harness::{
    emit_sweep, emit_tables, run_experiment, run_sweep, ApproximationKind, ExperimentConfig, FluxMode, MuChoice,
    OutputFormat, Report, SweepAxis, EFFICIENCY_COLUMNS, SWEEP_COLUMNS, TERMS_COLUMNS,
};
use rdbounds::problem::PresetId;

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn small(preset: PresetId, cells: usize, slabs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new("small", preset, vec![cells], slabs);
    c.flux = FluxMode::Average;
    c
}

fn run_frozen(c: &ExperimentConfig) -> Report {
    let mut r = run_experiment(c).unwrap();
    r.metadata.wall_time_s = 0.0;
    r
}

#[test]
fn shipped_configs_parse_and_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let c = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            c.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            for (_, child) in c.expand().unwrap() {
                child.validate().unwrap();
            }
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn report_round_trips_through_json() {
    let mut c = small(PresetId::Ex2 { rho: 1.0 }, 8, 4);
    c.indicators.slabs = vec![2];
    c.indicators.theta = vec![0.3, 0.5];
    let r = run_frozen(&c);
    assert_eq!(r.rows.len(), 4);
    assert_eq!(r.indicators.len(), 1);
    let back = Report::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    let cfg = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(cfg, c);
    assert_eq!(cfg.hash(), c.hash());
}

#[test]
fn reruns_are_byte_identical() {
    let mut c = small(PresetId::Ex1, 10, 5);
    c.flux = FluxMode::Optimize;
    c.indicators.slabs = vec![4];
    c.indicators.theta = vec![0.4];
    let (a, b) = (run_frozen(&c), run_frozen(&c));
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = emit_tables(&a, da.path(), OutputFormat::Csv).unwrap();
    let fb = emit_tables(&b, db.path(), OutputFormat::Csv).unwrap();
    assert_eq!(fa.len(), 4);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let ind = fs::read_to_string(da.path().join("indicators_slab4.csv")).unwrap();
    assert!(ind.starts_with("element,err,ind,mark_err_0.4,mark_ind_0.4\n"));
    assert_eq!(ind.lines().count(), 11);
}

#[test]
fn empty_report_writes_header_only_tables() {
    let r = Report::empty(small(PresetId::Ex1, 4, 2));
    let dir = tempfile::tempdir().unwrap();
    emit_tables(&r, dir.path(), OutputFormat::Csv).unwrap();
    let eff = fs::read_to_string(dir.path().join("efficiency_by_time.csv")).unwrap();
    assert_eq!(eff, EFFICIENCY_COLUMNS.join(",") + "\n");
    let terms = fs::read_to_string(dir.path().join("majorant_terms.csv")).unwrap();
    assert_eq!(terms, TERMS_COLUMNS.join(",") + "\n");
    emit_tables(&r, dir.path(), OutputFormat::Json).unwrap();
    let back = Report::from_json(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn exact_interpolant_of_zero_solution_is_flagged() {
    let c = ExperimentConfig::load(&configs_dir().join("trivial_exact.json")).unwrap();
    assert_eq!(c.approximation, ApproximationKind::ExactInterpolant);
    let r = run_experiment(&c).unwrap();
    assert!(r.exact);
    assert!(r.violations.is_empty());
    for row in &r.rows {
        assert_eq!(row.maj_sq, 0.0);
        assert_eq!(row.err_sq, 0.0);
        assert!(row.i_maj.is_none() && row.i_eff.is_none());
    }
}

#[test]
fn reporting_stride_yields_requested_times() {
    let mut c = small(PresetId::Ex1, 39, 39);
    c.minorant.enabled = false;
    c.report_stride = 4;
    let r = run_experiment(&c).unwrap();
    let t: Vec<f64> = r.rows.iter().map(|r| r.t).collect();
    assert_eq!(t.len(), 10);
    for (got, want) in t.iter().zip([1.03, 2.05, 3.08, 4.10, 5.13, 6.15, 7.18, 8.21, 9.23, 10.0]) {
        assert!((got - want).abs() < 5e-3, "{got} vs {want}");
    }
    assert!(r.rows.iter().all(|row| row.min_sq.is_none() && row.i_maj.unwrap() >= 1.0));
}

#[test]
fn sweep_writes_one_summary_row_per_run() {
    let mut c = small(PresetId::Ex2 { rho: 1.0 }, 6, 3);
    c.sweep = vec![SweepAxis::Mu(vec![MuChoice::Zero, MuChoice::One, MuChoice::Optimal])];
    let s = run_sweep(&c).unwrap();
    assert_eq!(s.runs.len(), 3);
    assert_eq!(s.violations(), 0);
    assert!(s.find("mu=one").is_some());
    let dir = tempfile::tempdir().unwrap();
    emit_sweep(&s, dir.path(), OutputFormat::Csv).unwrap();
    let text = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
    assert_eq!(lines.count(), 3);
    assert!(run_experiment(&c).is_err());
}
