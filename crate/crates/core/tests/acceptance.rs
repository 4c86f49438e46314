//! Acceptance gate: ten go/no-go checks over the experiment campaigns.
//! Each test prints one pass/fail line; tolerances are pinned here rather
//! than inherited from config defaults.

use conelab_core::experiments::{
    run_all, run_bilinear_equivalence, run_chain_check, run_convergence, run_majorant_check,
    run_partition_and_reconstruction, run_square_scaling, run_steinweiss_check,
    run_weighted_sweep, ExperimentConfig, ReportTable, Tolerances,
};
use std::time::Instant;

const STEINWEISS_TOL: f64 = 1e-8;
const STEINWEISS_BUDGET_SECS: f64 = 1.0;
const PARTITION_TOL: f64 = 1e-10;
const PARTITION_BUDGET_SECS: f64 = 10.0;
const EQUIVALENCE_TOL: f64 = 1e-6;
const EQUIVALENCE_BUDGET_SECS: f64 = 60.0;
const MAJORANT_FLOOR: f64 = -1e-10;
const SLOPE_WINDOW: (f64, f64) = (-2.3, -1.7);
const DECAY_FACTOR: f64 = 50.0;
const GNU_RATIO_TOL: f64 = 1e-3;
const SQUARE_SLOPE_DEV: f64 = 0.1;
const PLANCHEREL_TOL: f64 = 1e-8;
const SATURATION_GROWTH: f64 = 0.05;
const CHAIN_FLOOR: f64 = -1e-10;
const SEED: u64 = 42;

fn config() -> ExperimentConfig {
    ExperimentConfig {
        seed: SEED,
        ensemble: 8,
        tolerances: Tolerances {
            steinweiss: STEINWEISS_TOL,
            partition: PARTITION_TOL,
            equivalence: EQUIVALENCE_TOL,
            equivalence_fractional: 1e-4,
            majorant_floor: MAJORANT_FLOOR,
            slope_window: SLOPE_WINDOW,
            decay_factor: DECAY_FACTOR,
            square_slope_dev: SQUARE_SLOPE_DEV,
            plancherel: PLANCHEREL_TOL,
            gnu_ratio: GNU_RATIO_TOL,
            saturation_growth: SATURATION_GROWTH,
            chain_floor: CHAIN_FLOOR,
        },
        ..ExperimentConfig::default()
    }
}

fn report(criterion: u32, label: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} ({label}): {verdict} [{detail}]");
    assert!(pass, "criterion {criterion} ({label}) failed: {detail}");
}

fn column(table: &ReportTable, name: &str) -> usize {
    table.columns.iter().position(|c| *c == name).expect("column exists")
}

/// Max over rows of a numeric column, restricted to rows whose `key`
/// column equals `value`.
fn col_max(table: &ReportTable, key: &str, value: &str, target: &str) -> f64 {
    let ik = column(table, key);
    let it = column(table, target);
    table
        .rows
        .iter()
        .filter(|r| r.cells[ik] == value)
        .map(|r| r.cells[it].parse::<f64>().expect("numeric cell"))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn criterion_01_scalar_identity_scan() {
    let started = Instant::now();
    let table = run_steinweiss_check(&config()).expect("campaign runs");
    let elapsed = started.elapsed().as_secs_f64();
    let worst = col_max(&table, "kind", "grid", "max_err");
    let pass = table.passed() && worst < STEINWEISS_TOL && elapsed < STEINWEISS_BUDGET_SECS;
    report(
        1,
        "scalar reduction identity",
        pass,
        &format!("max err {worst:.3e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_02_partition_and_reconstruction() {
    let started = Instant::now();
    let table = run_partition_and_reconstruction(&config()).expect("campaign runs");
    let elapsed = started.elapsed().as_secs_f64();
    let scan = col_max(&table, "check", "partition_scan", "max_residual");
    let l1 = col_max(&table, "check", "level1", "max_residual");
    let l2 = col_max(&table, "check", "level2", "max_residual");
    let worst = scan.max(l1).max(l2);
    let pass = table.passed() && worst < PARTITION_TOL && elapsed < PARTITION_BUDGET_SECS;
    report(
        2,
        "partition and reconstruction",
        pass,
        &format!("max residual {worst:.3e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_03_subordination_equivalence() {
    let started = Instant::now();
    let table = run_bilinear_equivalence(&config()).expect("campaign runs");
    let elapsed = started.elapsed().as_secs_f64();
    let il = column(&table, "lambda");
    let ik = column(&table, "kind");
    let ie = column(&table, "rel_err");
    let worst = table
        .rows
        .iter()
        .filter(|r| r.cells[il] == "1" && r.cells[ik] == "exact_split")
        .map(|r| r.cells[ie].parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = table.passed() && worst < EQUIVALENCE_TOL && elapsed < EQUIVALENCE_BUDGET_SECS;
    report(
        3,
        "subordinated vs direct evaluation",
        pass,
        &format!("rel L2 err {worst:.3e} at unit order, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_04_pointwise_majorant() {
    let cfg = config();
    let table = run_majorant_check(&cfg).expect("campaign runs");
    let ik = column(&table, "min_gap");
    let worst = table
        .rows
        .iter()
        .filter_map(|r| r.cells[ik].parse::<f64>().ok())
        .fold(f64::INFINITY, f64::min);
    let pass = table.passed() && worst >= MAJORANT_FLOOR;
    report(
        4,
        "pointwise upper bound",
        pass,
        &format!("min gap {worst:.3e} over j in {:?}", cfg.js),
    );
}

#[test]
fn criterion_05_product_convergence() {
    let table = run_convergence(&config()).expect("campaign runs");
    let slopes: Vec<f64> = {
        let ik = column(&table, "kind");
        let iv = column(&table, "value");
        table
            .rows
            .iter()
            .filter(|r| r.cells[ik] == "slope")
            .map(|r| r.cells[iv].parse::<f64>().unwrap())
            .collect()
    };
    let in_window = slopes
        .iter()
        .all(|s| *s >= SLOPE_WINDOW.0 && *s <= SLOPE_WINDOW.1);
    let pass = table.passed() && in_window && slopes.len() == 2;
    report(
        5,
        "large-scale convergence",
        pass,
        &format!("slopes {slopes:?}, decay factor gate {DECAY_FACTOR}"),
    );
}

#[test]
fn criterion_06_difference_square_function_law() {
    let table = run_square_scaling(&config()).expect("campaign runs");
    let worst = col_max(&table, "check", "gnu_ratio_dev", "value");
    let ik = column(&table, "check");
    let count = table
        .rows
        .iter()
        .filter(|r| r.cells[ik] == "gnu_ratio_dev")
        .count();
    let pass = count == 3 && worst < GNU_RATIO_TOL;
    report(
        6,
        "exact square-function constant",
        pass,
        &format!("max ratio deviation {worst:.3e} over three orders"),
    );
}

#[test]
fn criterion_07_annulus_scaling() {
    let table = run_square_scaling(&config()).expect("campaign runs");
    let slope = col_max(&table, "check", "gdelta_slope", "value");
    let plancherel = col_max(&table, "check", "plancherel_max_dev", "value");
    let pass = (slope - 0.5).abs() <= SQUARE_SLOPE_DEV && plancherel < PLANCHEREL_TOL;
    report(
        7,
        "annulus square-function scaling",
        pass,
        &format!("slope {slope:.4}, Plancherel dev {plancherel:.3e}"),
    );
}

#[test]
fn criterion_08_weighted_saturation() {
    let table = run_weighted_sweep(&config()).expect("campaign runs");
    let ik = column(&table, "cell_kind");
    let ig = column(&table, "growth");
    let inside_worst = table
        .rows
        .iter()
        .filter(|r| r.cells[ik] == "inside")
        .map(|r| r.cells[ig].parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let probes_ungated = table
        .rows
        .iter()
        .filter(|r| r.cells[ik] == "probe")
        .all(|r| r.pass.is_none());
    let pass = table.passed() && inside_worst < SATURATION_GROWTH && probes_ungated;
    report(
        8,
        "weighted ratio saturation",
        pass,
        &format!("worst inside-cell growth {inside_worst:.3e}, probes ungated"),
    );
}

#[test]
fn criterion_09_maximal_average_chain() {
    let table = run_chain_check(&config()).expect("campaign runs");
    let ik = column(&table, "kind");
    let iv = column(&table, "value");
    let worst = table
        .rows
        .iter()
        .filter(|r| r.cells[ik] == "min_gap")
        .map(|r| r.cells[iv].parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    let pass = table.passed() && worst >= CHAIN_FLOOR;
    report(
        9,
        "order-lowering chain",
        pass,
        &format!("pointwise min gap {worst:.3e} at two steps"),
    );
}

#[test]
fn criterion_10_byte_identical_reruns() {
    let cfg = config();
    let first = run_all(&cfg).expect("first run");
    let second = run_all(&cfg).expect("second run");
    assert_eq!(first.tables.len(), second.tables.len());
    let mut identical = true;
    for (a, b) in first.tables.iter().zip(&second.tables) {
        identical &= a.to_csv_bytes() == b.to_csv_bytes();
    }
    let pass = identical && first.all_passed();
    report(
        10,
        "byte-identical reruns",
        pass,
        &format!("{} tables compared", first.tables.len()),
    );
}
