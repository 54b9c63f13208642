//! Oracle checks: sampled decompositions of the linear, diagonal and shear
//! maps against their closed forms, the exact moment identity, and Kac's
//! return-time lemma on the cat map.

use serde::{Deserialize, Serialize};
use transit_core::analytic::{self, AnalyticModel};
use transit_core::maps::{CatMap, DiagHyperbolic, Linear2D, Shear, VolumeMap};
use transit_core::region::AxisBox;
use transit_core::sampling::BoxSampler;
use transit_core::stats::{kac_check, second_moment_diverges, summarize, Moment};
use transit_core::transit::estimate_decomposition;
use transit_core::{Result as CoreResult, TransitDecomposition};

use crate::config::RunConfig;
use crate::error::Result;

/// Closed-form formulas the sampled results are compared against. Replacing
/// one with a wrong formula must make verification fail.
#[derive(Clone, Copy)]
pub struct Oracles {
    pub linear_tj: fn(f64, i64) -> CoreResult<f64>,
    pub linear_average_times: fn(f64) -> CoreResult<(f64, f64, f64)>,
    pub diag_tj: fn(f64, f64, i64) -> CoreResult<f64>,
    pub shear_tj: fn(i64) -> CoreResult<f64>,
}

impl Default for Oracles {
    fn default() -> Self {
        Oracles {
            linear_tj: analytic::linear_tj,
            linear_average_times: analytic::linear_average_times,
            diag_tj: analytic::diag_tj,
            shear_tj: analytic::shear_tj,
        }
    }
}

/// Deliberately wrong formulas, for checking that verification can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    LinearTj,
    LinearAverage,
    DiagTj,
    ShearTj,
}

fn wrong_linear_tj(lambda: f64, j: i64) -> CoreResult<f64> {
    Ok(analytic::linear_tj(lambda, j)? / lambda)
}

fn wrong_linear_average(lambda: f64) -> CoreResult<(f64, f64, f64)> {
    let (a, b, c) = analytic::linear_average_times(lambda)?;
    Ok((a * 1.01, b, c))
}

fn wrong_diag_tj(big_lambda: f64, big_pi: f64, j: i64) -> CoreResult<f64> {
    analytic::diag_tj(big_lambda, big_pi, j + 1)
}

fn wrong_shear_tj(j: i64) -> CoreResult<f64> {
    let j = analytic::shear_tj(j)?;
    Ok(j * 1.05)
}

impl Oracles {
    pub fn with_fault(fault: Fault) -> Self {
        let mut o = Oracles::default();
        match fault {
            Fault::LinearTj => o.linear_tj = wrong_linear_tj,
            Fault::LinearAverage => o.linear_average_times = wrong_linear_average,
            Fault::DiagTj => o.diag_tj = wrong_diag_tj,
            Fault::ShearTj => o.shear_tj = wrong_shear_tj,
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub tolerance: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    /// Human-readable report, one line per check.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "[{}] {}: expected {}, observed {} ({})\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.observed,
                c.tolerance
            ));
        }
        s.push_str(&format!("{} checks, {} failed\n", self.checks.len(), self.failures()));
        s
    }
}

/// Linear-map expansion rates checked.
pub const LINEAR_LAMBDAS: [f64; 3] = [1.5, 2.0, 4.0];
/// Diagonal map checked: expansion `Lambda = 3`, contraction `Pi = 1/3`.
pub const DIAG_EIGENVALUES: [f64; 3] = [2.0, 1.5, 1.0 / 3.0];
pub const KAC_SAMPLES: u64 = 100_000;
const SIGMAS: f64 = 3.0;
const REL_TOL: f64 = 0.005;

fn rel_err(observed: f64, expected: f64) -> f64 {
    (observed - expected).abs() / expected.abs()
}

/// Standard error of a sampled measure whose true value is `expect`; unlike
/// the table's own error it stays positive for bins that drew no points.
fn null_stderr(d: &TransitDecomposition, expect: f64) -> f64 {
    match &d.sampling {
        Some(s) => {
            let p = (expect / s.box_measure).clamp(0.0, 1.0);
            s.box_measure * (p * (1.0 - p) / s.draws as f64).sqrt()
        }
        None => 0.0,
    }
}

/// Compares bins `1..=j_max` with the closed form, in standard errors
/// implied by the closed form; reports the largest deviation.
fn bins_check(name: String, d: &TransitDecomposition, j_max: u64, oracle: impl Fn(i64) -> CoreResult<f64>) -> CoreResult<Check> {
    let mut worst: f64 = 0.0;
    let mut worst_j = 1;
    for j in 1..=j_max {
        let expect = oracle(j as i64)?;
        let se = null_stderr(d, expect);
        let z = (d.measure(j) - expect).abs() / se;
        if z > worst {
            worst = z;
            worst_j = j;
        }
    }
    Ok(Check {
        name,
        expected: format!("closed form for j = 1..={j_max}"),
        observed: format!("largest deviation {worst:.2} sigma at j = {worst_j}"),
        tolerance: format!("{SIGMAS} sigma"),
        passed: worst <= SIGMAS,
    })
}

fn rel_check(name: String, expected: f64, observed: f64, tol: f64) -> Check {
    Check {
        name,
        expected: format!("{expected:.6}"),
        observed: format!("{observed:.6}"),
        tolerance: format!("{:.2}% relative", tol * 100.0),
        passed: rel_err(observed, expected) <= tol,
    }
}

/// `<t+>_A` computed directly as `sum j (j + 1) / 2 mu_j / sum j mu_j`
/// against `(<t_transit>_A + 1) / 2` from the summary.
fn moment_identity_check(name: String, d: &TransitDecomposition) -> CoreResult<Check> {
    let s = summarize(d)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &m) in d.bins.iter().enumerate() {
        let j = (i + 1) as f64;
        num += 0.5 * j * (j + 1.0) * m;
        den += j * m;
    }
    let direct = num / den;
    let (passed, observed) = match (s.avg_exit_accessible, s.avg_transit_accessible) {
        (Moment::Finite { value: exit_a, .. }, Moment::Finite { value: transit, .. }) => {
            (rel_err(exit_a, direct) <= 1e-12 && rel_err(0.5 * (transit + 1.0), direct) <= 1e-12, format!("{exit_a:.12}"))
        }
        _ => (false, "divergent".into()),
    };
    Ok(Check {
        name,
        expected: format!("{direct:.12}"),
        observed,
        tolerance: "1e-12 relative".into(),
        passed,
    })
}

fn unit_box_decomposition<M: VolumeMap>(map: &M, dim: usize, cfg: &RunConfig, stream: u64) -> CoreResult<TransitDecomposition> {
    let unit = AxisBox::unit(dim);
    let sampler = BoxSampler::new(unit.clone(), cfg.samples, cfg.sampling_mode()).with_box(unit.clone(), stream);
    estimate_decomposition(map, &unit, &sampler, cfg.t_max, cfg.bins)
}

fn linear_checks(cfg: &RunConfig, o: &Oracles, out: &mut Vec<Check>) -> CoreResult<()> {
    for (i, &lambda) in LINEAR_LAMBDAS.iter().enumerate() {
        let d = unit_box_decomposition(&Linear2D::new(lambda)?, 2, cfg, i as u64)?;
        out.push(bins_check(format!("linear lambda={lambda}: mu(T_j)"), &d, 12, |j| (o.linear_tj)(lambda, j))?);
        let (exit_i, transit, exit_a) = (o.linear_average_times)(lambda)?;
        let s = summarize(&d)?;
        out.push(rel_check(format!("linear lambda={lambda}: <t+>_I"), exit_i, s.avg_exit_entry.value, REL_TOL));
        let observed_transit = s.avg_transit_accessible.value().unwrap_or(f64::NAN);
        out.push(rel_check(format!("linear lambda={lambda}: <t_transit>_A"), transit, observed_transit, REL_TOL));
        let observed_exit_a = s.avg_exit_accessible.value().unwrap_or(f64::NAN);
        out.push(Check {
            name: format!("linear lambda={lambda}: (<t+>_I, <t_transit>_A, <t+>_A)"),
            expected: format!("({exit_i}, {transit}, {exit_a})"),
            observed: format!("({:.4}, {observed_transit:.4}, {observed_exit_a:.4})", s.avg_exit_entry.value),
            tolerance: format!("{:.2}% relative", REL_TOL * 100.0),
            passed: rel_err(s.avg_exit_entry.value, exit_i) <= REL_TOL
                && rel_err(observed_transit, transit) <= REL_TOL
                && rel_err(observed_exit_a, exit_a) <= REL_TOL,
        });
        out.push(moment_identity_check(format!("linear lambda={lambda}: <t+>_A = (<t_transit>_A + 1)/2"), &d)?);
    }
    Ok(())
}

fn diag_checks(cfg: &RunConfig, o: &Oracles, out: &mut Vec<Check>) -> CoreResult<()> {
    let map = DiagHyperbolic::new(&DIAG_EIGENVALUES)?;
    let (big_lambda, big_pi) = (map.expansion(), map.contraction());
    let d = unit_box_decomposition(&map, 3, cfg, 10)?;
    out.push(bins_check(format!("diag {DIAG_EIGENVALUES:?}: mu(T_j)"), &d, 8, |j| (o.diag_tj)(big_lambda, big_pi, j))?);
    let expect: f64 = (1..=d.horizon as i64).map(|j| j as f64 * (o.diag_tj)(big_lambda, big_pi, j).unwrap_or(f64::NAN)).sum::<f64>()
        / (1..=d.horizon as i64).map(|j| (o.diag_tj)(big_lambda, big_pi, j).unwrap_or(f64::NAN)).sum::<f64>();
    let s = summarize(&d)?;
    out.push(rel_check(format!("diag {DIAG_EIGENVALUES:?}: <t+>_I"), expect, s.avg_exit_entry.value, REL_TOL));
    out.push(moment_identity_check(format!("diag {DIAG_EIGENVALUES:?}: <t+>_A = (<t_transit>_A + 1)/2"), &d)?);
    Ok(())
}

fn shear_checks(cfg: &RunConfig, o: &Oracles, out: &mut Vec<Check>) -> CoreResult<()> {
    let d = unit_box_decomposition(&Shear, 2, cfg, 20)?;
    for j in [1u64, 5] {
        let expect = (o.shear_tj)(j as i64)?;
        let se = null_stderr(&d, expect);
        out.push(Check {
            name: format!("shear: mu(T_{j})"),
            expected: format!("{expect:.6}"),
            observed: format!("{:.6} +- {se:.1e}", d.measure(j)),
            tolerance: format!("{SIGMAS} sigma"),
            passed: (d.measure(j) - expect).abs() <= SIGMAS * se,
        });
    }
    // Partial sums of the closed form, smallest terms first.
    let big_j: i64 = 1_000_000;
    let total: f64 = (1..=big_j).rev().map(|j| (o.shear_tj)(j).unwrap_or(f64::NAN)).sum();
    out.push(Check {
        name: format!("shear: sum_(j<={big_j}) mu(T_j)"),
        expected: "0.5".into(),
        observed: format!("{total:.12}"),
        tolerance: "1e-6 absolute".into(),
        passed: (total - 0.5).abs() <= 1e-6,
    });
    for big_j in [10i64, 100, 1_000, 10_000, 100_000] {
        let first: f64 = (1..=big_j).rev().map(|j| j as f64 * (o.shear_tj)(j).unwrap_or(f64::NAN)).sum();
        let deficit = 1.0 - first;
        out.push(Check {
            name: format!("shear: 1 - sum_(j<={big_j}) j mu(T_j)"),
            expected: format!("<= {:.3e}", 1.1 / big_j as f64),
            observed: format!("{deficit:.3e}"),
            tolerance: "deficit in [0, 1.1/J]".into(),
            passed: (0.0..=1.1 / big_j as f64).contains(&deficit),
        });
    }
    for decade in [10i64, 100, 1_000, 10_000] {
        let inc: f64 = (decade + 1..=10 * decade).map(|j| (j * j) as f64 * (o.shear_tj)(j).unwrap_or(f64::NAN)).sum();
        out.push(Check {
            name: format!("shear: sum_({decade}<j<={}) j^2 mu(T_j)", 10 * decade),
            expected: ">= 0.6".into(),
            observed: format!("{inc:.4}"),
            tolerance: "second moment keeps growing".into(),
            passed: inc >= 0.6,
        });
    }
    let exact = AnalyticModel::Shear.decomposition(100_000)?;
    out.push(Check {
        name: "shear: second moment flagged divergent".into(),
        expected: "divergent".into(),
        observed: if second_moment_diverges(&exact) { "divergent".into() } else { "finite".into() },
        tolerance: "exact".into(),
        passed: second_moment_diverges(&exact) && summarize(&exact)?.avg_transit_accessible.value().is_none(),
    });
    Ok(())
}

fn kac_checks(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let torus = AxisBox::unit(2);
    let m_sampler = BoxSampler::random(torus.clone(), KAC_SAMPLES / 5, cfg.seed ^ 0x6b61);
    for (i, (hi, expect)) in [([0.5, 0.5], 4.0), ([0.1, 1.0], 10.0)].into_iter().enumerate() {
        let a = AxisBox::new(&[0.0, 0.0], &hi)?;
        let a_sampler = BoxSampler::random(a.clone(), KAC_SAMPLES, cfg.seed.wrapping_add(i as u64 + 1));
        let r = kac_check(&CatMap, &a, &torus, &a_sampler, &m_sampler, cfg.t_max)?;
        out.push(rel_check(format!("cat map Kac: <t_return> on [0,{}]x[0,{}]", hi[0], hi[1]), expect, r.avg_return.value, 0.05));
    }
    Ok(())
}

fn push_error(out: &mut Vec<Check>, name: &str, e: transit_core::Error) {
    out.push(Check {
        name: name.into(),
        expected: "completes".into(),
        observed: format!("error: {e}"),
        tolerance: "-".into(),
        passed: false,
    });
}

/// Runs all checks; a failing computation is recorded as a failed check.
pub fn run_verify(cfg: &RunConfig, oracles: &Oracles) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut checks = Vec::new();
    if let Err(e) = linear_checks(cfg, oracles, &mut checks) {
        push_error(&mut checks, "linear map suite", e);
    }
    if let Err(e) = diag_checks(cfg, oracles, &mut checks) {
        push_error(&mut checks, "diagonal map suite", e);
    }
    if let Err(e) = shear_checks(cfg, oracles, &mut checks) {
        push_error(&mut checks, "shear suite", e);
    }
    if let Err(e) = kac_checks(cfg, &mut checks) {
        push_error(&mut checks, "Kac suite", e);
    }
    Ok(VerifyReport { checks })
}
