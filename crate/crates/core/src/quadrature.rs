//! Quadrature of the piecewise-constant exit-time field over the entry lobe.
//!
//! Each vertical fiber `x = const` of the lobe is sampled on a uniform grid;
//! jumps of the exit time between neighbouring samples are located by
//! bisection. The fiber integrals `T(x)` are then combined with Simpson's
//! rule, giving the average exit time of the lobe and, through
//! `mu(A_acc) = mu(I) <t+>_I`, the measure of orbits that never enter.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{AxisBox, Region};
use crate::resonance::{build_zone, ResonanceZone};
use crate::sampling::BoxSampler;
use crate::transit::{AccessibleEstimate, ExitTally, TimeValue, TransitDecomposition};

pub const DEFAULT_VALUE_TOL: f64 = 1e-3;
pub const DEFAULT_N: usize = 2000;
pub const DEFAULT_T_MAX: u64 = 100_000;
pub const MAX_BISECTION_DEPTH: u32 = 40;
/// Censored fraction above which a lobe average is flagged.
pub const MOSTLY_TRAPPED: f64 = 0.5;

/// An exit-time field over a lobe whose fibers `x = const` are intervals.
pub trait LobeField: Sync {
    /// Abscissae of the two lobe corners.
    fn x_range(&self) -> (f64, f64);
    /// `(lower, upper)` ends of the fiber, `None` outside the lobe.
    fn fiber_bounds(&self, x: f64) -> Option<(f64, f64)>;
    fn exit_time(&self, x: f64, y: f64, t_max: u64) -> TimeValue;
}

impl LobeField for ResonanceZone {
    fn x_range(&self) -> (f64, f64) {
        (self.lobe.x0, self.lobe.x_end())
    }

    fn fiber_bounds(&self, x: f64) -> Option<(f64, f64)> {
        self.lobe.graphs(x).map(|(u, s)| (u.min(s), u.max(s)))
    }

    fn exit_time(&self, x: f64, y: f64, t_max: u64) -> TimeValue {
        self.exit_time_xy(x, y, t_max)
    }
}

/// Exit time along one fiber, as a step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeProfile {
    pub x: f64,
    /// Interval ends, from `y^u(x)` to `y^s(x)`.
    pub breakpoints: Vec<f64>,
    /// Exit time on each interval.
    pub times: Vec<TimeValue>,
    /// `T(x)`: integral of the exit time over the uncensored intervals.
    pub integral: f64,
    pub length: f64,
    pub censored_length: f64,
    /// Upper bound on the integral error from unresolved jumps.
    pub error_bound: f64,
    pub evaluations: u64,
}

struct FiberWork<'a, F: LobeField + ?Sized> {
    field: &'a F,
    x: f64,
    t_max: u64,
    budget: f64,
    evaluations: u64,
    error: f64,
}

impl<F: LobeField + ?Sized> FiberWork<'_, F> {
    fn eval(&mut self, y: f64) -> TimeValue {
        self.evaluations += 1;
        self.field.exit_time(self.x, y, self.t_max)
    }

    /// Appends the jump locations between `a` and `b` to `out`, as
    /// `(position, time to the right of it)`.
    fn resolve(&mut self, a: f64, ta: TimeValue, b: f64, tb: TimeValue, depth: u32, out: &mut Vec<(f64, TimeValue)>) {
        if ta == tb {
            // Equal ends: assumed constant in between.
            return;
        }
        let jump = (b - a) * ta.value().abs_diff(tb.value()) as f64;
        if jump <= self.budget || depth >= MAX_BISECTION_DEPTH {
            self.error += 0.5 * jump;
            out.push((0.5 * (a + b), tb));
            return;
        }
        let m = 0.5 * (a + b);
        let tm = self.eval(m);
        self.resolve(a, ta, m, tm, depth + 1, out);
        self.resolve(m, tm, b, tb, depth + 1, out);
    }
}

/// Exit-time profile of the fiber at `x`, sampled on a grid of spacing
/// about `h` and bisected at jumps until the neglected contribution of each
/// jump is at most `value_tol * T / (number of jumps)`.
pub fn fiber_profile<F: LobeField + ?Sized>(field: &F, x: f64, h: f64, t_max: u64, value_tol: f64) -> Result<ExitTimeProfile> {
    let (x0, x1) = field.x_range();
    let outside = || Error::OutsideLobe { x, lo: x0.min(x1), hi: x0.max(x1) };
    if !(x > x0.min(x1) && x < x0.max(x1)) {
        return Err(outside());
    }
    if !(h > 0.0 && value_tol > 0.0 && t_max >= 1) {
        return Err(Error::InvalidParameter("h, value_tol and t_max must be positive".into()));
    }
    let (lo, hi) = field.fiber_bounds(x).ok_or_else(outside)?;
    let length = hi - lo;
    let cells = ((length / h).ceil() as usize).max(1);
    let d = length / cells as f64;
    let mut work = FiberWork { field, x, t_max, budget: 0.0, evaluations: 0, error: 0.0 };
    let centres: Vec<f64> = (0..cells).map(|i| lo + (i as f64 + 0.5) * d).collect();
    let samples: Vec<TimeValue> = centres.iter().map(|&y| work.eval(y)).collect();

    // Censored samples are left out of T(x), so they do not widen the budget.
    let grid_integral: f64 = samples.iter().filter_map(|t| t.finite()).map(|t| t as f64 * d).sum();
    let jumps = samples.windows(2).filter(|w| w[0] != w[1]).count();
    work.budget = value_tol * grid_integral / jumps.max(1) as f64;

    let mut cuts: Vec<(f64, TimeValue)> = Vec::new();
    for i in 0..cells - 1 {
        work.resolve(centres[i], samples[i], centres[i + 1], samples[i + 1], 0, &mut cuts);
    }
    let mut breakpoints = vec![lo];
    let mut times = vec![samples[0]];
    for (y, t) in cuts {
        if y > *breakpoints.last().unwrap() && y < hi {
            breakpoints.push(y);
            times.push(t);
        } else {
            *times.last_mut().unwrap() = t;
        }
    }
    breakpoints.push(hi);

    let mut integral = 0.0;
    let mut censored_length = 0.0;
    for (w, t) in breakpoints.windows(2).zip(&times) {
        let len = w[1] - w[0];
        match t {
            TimeValue::Finite(n) => integral += len * *n as f64,
            TimeValue::Censored(_) => censored_length += len,
        }
    }
    Ok(ExitTimeProfile {
        x,
        breakpoints,
        times,
        integral,
        length,
        censored_length,
        error_bound: work.error,
        evaluations: work.evaluations,
    })
}

/// Simpson weights `1, 4, 2, ..., 4, 1` times `dx / 3`.
fn simpson(values: &[f64], dx: f64) -> f64 {
    let n = values.len() - 1;
    let inner: f64 = values[1..n].iter().enumerate().map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v }).sum();
    (values[0] + values[n] + inner) * dx / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobeAverage {
    /// `<t+>_I`, with censored points contributing nothing to the integral.
    pub avg_exit: f64,
    /// Simpson integrals of `T(x)`, fiber length and censored length.
    pub integral: f64,
    pub area: f64,
    pub censored_area: f64,
    pub censored_fraction: f64,
    /// More than half the lobe did not exit within `t_max`.
    pub mostly_trapped: bool,
    /// Relative bound on the error from unresolved jumps.
    pub relative_error_bound: f64,
    pub fibers: usize,
    pub evaluations: u64,
}

/// Average exit time over the lobe using `n + 1` fibers (`n` even, at least
/// 100) at spacing `h = (x_m - x_h) / n`, each sampled at spacing about `h`.
pub fn average_exit_over_lobe<F: LobeField + ?Sized>(field: &F, n: usize, t_max: u64, value_tol: f64) -> Result<LobeAverage> {
    if n < 100 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("N = {n} must be even and at least 100")));
    }
    let (x0, x1) = field.x_range();
    let h = (x1 - x0) / n as f64;
    let profiles: Vec<ExitTimeProfile> = (1..n)
        .into_par_iter()
        .map(|i| fiber_profile(field, x0 + h * i as f64, h.abs(), t_max, value_tol))
        .collect::<Result<_>>()?;
    let column = |f: &dyn Fn(&ExitTimeProfile) -> f64| {
        let mut v = Vec::with_capacity(n + 1);
        v.push(0.0);
        v.extend(profiles.iter().map(f));
        v.push(0.0);
        v
    };
    let integral = simpson(&column(&|p| p.integral), h.abs());
    let area = simpson(&column(&|p| p.length), h.abs());
    let censored_area = simpson(&column(&|p| p.censored_length), h.abs());
    let error = simpson(&column(&|p| p.error_bound), h.abs());
    if !(area > 0.0) {
        return Err(Error::EmptyEntrySet);
    }
    let censored_fraction = censored_area / area;
    Ok(LobeAverage {
        avg_exit: integral / area,
        integral,
        area,
        censored_area,
        censored_fraction,
        mostly_trapped: censored_fraction > MOSTLY_TRAPPED,
        relative_error_bound: if integral > 0.0 { error / integral } else { 0.0 },
        fibers: n + 1,
        evaluations: profiles.iter().map(|p| p.evaluations).sum(),
    })
}

/// One `k` of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub mu_a: f64,
    pub mu_i: f64,
    pub avg_exit_i: f64,
    pub mu_a_acc: f64,
    pub mu_a_i: f64,
    pub acc_frac: f64,
    pub inacc_frac: f64,
    pub censored_frac: f64,
    pub n: usize,
    pub t_max: u64,
    /// Wall-clock time, recorded only on request so outputs stay reproducible.
    pub seconds: Option<f64>,
    pub status: String,
}

pub const SWEEP_HEADER: [&str; 13] = [
    "k", "mu_A", "mu_I", "avg_exit_I", "mu_A_acc", "mu_A_i", "acc_frac", "inacc_frac", "censored_frac", "N", "t_max",
    "seconds", "status",
];

impl SweepRow {
    /// Combines zone areas with the lobe average:
    /// `mu(A_i) = mu(A) - mu(I) <t+>_I`.
    pub fn from_parts(zone: &ResonanceZone, avg: &LobeAverage, t_max: u64) -> Self {
        let mu_a = zone.areas.zone_action;
        let mu_i = zone.areas.lobe_action;
        let mu_a_acc = mu_i * avg.avg_exit;
        let mu_a_i = mu_a - mu_a_acc;
        SweepRow {
            k: zone.k,
            mu_a,
            mu_i,
            avg_exit_i: avg.avg_exit,
            mu_a_acc,
            mu_a_i,
            acc_frac: mu_a_acc / mu_a,
            inacc_frac: mu_a_i / mu_a,
            censored_frac: avg.censored_fraction,
            n: zone.n,
            t_max,
            seconds: None,
            status: if avg.mostly_trapped { "mostly_trapped".into() } else { "ok".into() },
        }
    }

    fn failed(k: f64, n: usize, t_max: u64, err: &Error) -> Self {
        SweepRow {
            k,
            mu_a: f64::NAN,
            mu_i: f64::NAN,
            avg_exit_i: f64::NAN,
            mu_a_acc: f64::NAN,
            mu_a_i: f64::NAN,
            acc_frac: f64::NAN,
            inacc_frac: f64::NAN,
            censored_frac: f64::NAN,
            n,
            t_max,
            seconds: None,
            status: format!("error: {err}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self) -> Vec<String> {
        let f = |v: f64| if v.is_nan() { String::new() } else { format!("{v:e}") };
        vec![
            self.k.to_string(),
            f(self.mu_a),
            f(self.mu_i),
            f(self.avg_exit_i),
            f(self.mu_a_acc),
            f(self.mu_a_i),
            f(self.acc_frac),
            f(self.inacc_frac),
            f(self.censored_frac),
            self.n.to_string(),
            self.t_max.to_string(),
            self.seconds.map(|s| format!("{s:.3}")).unwrap_or_default(),
            self.status.clone(),
        ]
    }
}

/// Sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub n: usize,
    pub t_max: u64,
    pub value_tol: f64,
    /// Worker threads; `None` uses all available cores.
    pub jobs: Option<usize>,
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { n: DEFAULT_N, t_max: DEFAULT_T_MAX, value_tol: DEFAULT_VALUE_TOL, jobs: None, timing: false }
    }
}

pub fn sweep_row(k: f64, opts: &SweepOptions) -> SweepRow {
    let start = Instant::now();
    let result = build_zone(k, opts.n).and_then(|zone| {
        let avg = average_exit_over_lobe(&zone, opts.n, opts.t_max, opts.value_tol)?;
        Ok(SweepRow::from_parts(&zone, &avg, opts.t_max))
    });
    let mut row = result.unwrap_or_else(|e| SweepRow::failed(k, opts.n, opts.t_max, &e));
    if opts.timing {
        row.seconds = Some(start.elapsed().as_secs_f64());
    }
    row
}

/// One row per `k`, in input order; failures are recorded in the row status.
pub fn sweep(k_values: &[f64], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        if j == 0 {
            return Err(Error::InvalidParameter("jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(|| k_values.par_iter().map(|&k| sweep_row(k, opts)).collect()))
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record(r.record())?;
    }
    out.flush()?;
    Ok(())
}

/// Monte-Carlo average exit time over the lobe, for cross-checking the
/// quadrature: censored samples count in the denominator only, matching
/// [`LobeAverage::avg_exit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobeMonteCarlo {
    pub avg_exit: f64,
    pub stderr: f64,
    pub hits: u64,
    pub censored: u64,
}

/// Axis box enclosing the entry lobe.
pub fn lobe_box(zone: &ResonanceZone) -> AxisBox {
    let (x0, x1) = zone.x_range();
    let (y0, y1) = zone.lobe.y_range();
    AxisBox::new(&[x0.min(x1), y0], &[x0.max(x1), y1]).expect("lobe has positive extent")
}

/// Samples of `samples` points in the lobe's bounding box; those in the lobe
/// contribute their exit times.
pub fn monte_carlo_lobe(zone: &ResonanceZone, samples: u64, seed: u64, t_max: u64) -> LobeMonteCarlo {
    let sampler = BoxSampler::random(lobe_box(zone), samples, seed);
    let (hits, censored, sum, sum_sq) = sampler.fold(
        || (0u64, 0u64, 0u128, 0u128),
        |acc, p| {
            if !zone.in_entry(p.x(), p.y()) {
                return;
            }
            match zone.exit_time_xy(p.x(), p.y(), t_max) {
                TimeValue::Finite(t) => {
                    acc.0 += 1;
                    acc.2 += t as u128;
                    acc.3 += (t as u128) * (t as u128);
                }
                TimeValue::Censored(_) => acc.1 += 1,
            }
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3),
    );
    let n = (hits + censored) as f64;
    let mean = sum as f64 / n;
    let var = (sum_sq as f64 / n - mean * mean).max(0.0);
    LobeMonteCarlo { avg_exit: mean, stderr: (var / n).sqrt(), hits, censored }
}

/// Transit decomposition of the entry lobe by sampling its bounding box,
/// using the tabulated lobes for entry and exit tests.
pub fn lobe_decomposition(zone: &ResonanceZone, sampler: &BoxSampler, t_max: u64, bins: u64) -> Result<TransitDecomposition> {
    if bins == 0 || t_max == 0 {
        return Err(Error::InvalidParameter("t_max and bins must be at least 1".into()));
    }
    if sampler.bbox.lo.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: sampler.bbox.lo.len() });
    }
    let horizon = t_max.min(bins);
    let tally = sampler.fold(
        ExitTally::default,
        |acc, p| {
            acc.draws += 1;
            if zone.in_entry(p.x(), p.y()) {
                acc.record(zone.exit_time_xy(p.x(), p.y(), horizon));
            }
        },
        ExitTally::merge,
    );
    tally.into_decomposition(sampler.bbox.volume(), sampler.mode, horizon, Some(zone.areas.zone_action))
}

/// Monte-Carlo estimate of the accessible measure at horizon `t_max`: the
/// part of the zone covered by the forward images of the entry lobe whose
/// transit time is at most `t_max`. This is the quantity the quadrature
/// measures as `mu(I) <t+>_I` when censored points are left out.
pub fn monte_carlo_accessible(zone: &ResonanceZone, samples: u64, seed: u64, t_max: u64) -> AccessibleEstimate {
    let bbox = zone.bounding_box().expect("zone is bounded");
    let volume = bbox.volume();
    let sampler = BoxSampler::random(bbox, samples, seed);
    let (inside, accessible) = sampler.fold(
        || (0u64, 0u64),
        |acc, p| {
            let (x, y) = (p.x(), p.y());
            if !zone.contains(p.coords()) {
                return;
            }
            acc.0 += 1;
            if let TimeValue::Finite(back) = zone.backward_exit_time_xy(x, y, t_max) {
                // transit = back + forward - 1 <= t_max
                if zone.exit_time_xy(x, y, t_max + 1 - back).is_finite() {
                    acc.1 += 1;
                }
            }
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    AccessibleEstimate::from_counts(samples, inside, accessible, volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::sync::OnceLock;

    /// Triangle lobe `0 < x < 1`, `0 < y < x` with a prescribed field.
    struct Synthetic<F: Fn(f64, f64) -> TimeValue + Sync>(F);

    impl<F: Fn(f64, f64) -> TimeValue + Sync> LobeField for Synthetic<F> {
        fn x_range(&self) -> (f64, f64) {
            (0.0, 1.0)
        }
        fn fiber_bounds(&self, x: f64) -> Option<(f64, f64)> {
            (0.0..=1.0).contains(&x).then_some((0.0, x))
        }
        fn exit_time(&self, x: f64, y: f64, _t_max: u64) -> TimeValue {
            (self.0)(x, y)
        }
    }

    fn zone05() -> &'static ResonanceZone {
        static Z: OnceLock<ResonanceZone> = OnceLock::new();
        Z.get_or_init(|| build_zone(0.5, 400).unwrap())
    }

    #[test]
    fn constant_field_is_exact() {
        let f = Synthetic(|_, _| TimeValue::Finite(7));
        let p = fiber_profile(&f, 0.5, 0.01, 100, 1e-3).unwrap();
        assert_eq!(p.integral, 7.0 * 0.5);
        assert_eq!(p.breakpoints, vec![0.0, 0.5]);
        assert_eq!(p.evaluations, 50);
        let avg = average_exit_over_lobe(&f, 100, 100, 1e-3).unwrap();
        assert_abs_diff_eq!(avg.avg_exit, 7.0, epsilon = 1e-12);
        assert_eq!(avg.censored_fraction, 0.0);
    }

    #[test]
    fn step_field_is_located() {
        // t = 2 below y = 0.3, 5 above.
        let f = Synthetic(|_, y| TimeValue::Finite(if y < 0.3 { 2 } else { 5 }));
        let p = fiber_profile(&f, 0.9, 0.01, 100, 1e-3).unwrap();
        assert_eq!(p.breakpoints.len(), 3);
        assert!((p.breakpoints[1] - 0.3).abs() < 1e-3);
        let exact = 2.0 * 0.3 + 5.0 * 0.6;
        assert!((p.integral - exact).abs() <= 1e-3 * exact);
        assert!(p.error_bound <= 1e-3 * exact);
    }

    #[test]
    fn censored_sliver_is_excluded() {
        let f = Synthetic(|_, y| if (0.2..0.25).contains(&y) { TimeValue::Censored(50) } else { TimeValue::Finite(3) });
        let p = fiber_profile(&f, 0.8, 0.01, 50, 1e-3).unwrap();
        assert!((p.censored_length - 0.05).abs() < 1e-2);
        assert!((p.integral - 3.0 * (0.8 - p.censored_length)).abs() < 1e-9);
        assert!(p.times.iter().any(|t| !t.is_finite()));
    }

    #[test]
    fn validation() {
        let f = Synthetic(|_, _| TimeValue::Finite(1));
        assert!(matches!(fiber_profile(&f, 1.5, 0.01, 10, 1e-3), Err(Error::OutsideLobe { .. })));
        assert!(matches!(fiber_profile(&f, 0.0, 0.01, 10, 1e-3), Err(Error::OutsideLobe { .. })));
        assert!(average_exit_over_lobe(&f, 101, 10, 1e-3).is_err());
        assert!(average_exit_over_lobe(&f, 50, 10, 1e-3).is_err());
    }

    #[test]
    fn mostly_trapped_flag() {
        let f = Synthetic(|_, _| TimeValue::Censored(10));
        let avg = average_exit_over_lobe(&f, 100, 10, 1e-3).unwrap();
        assert!(avg.mostly_trapped);
        assert_abs_diff_eq!(avg.censored_fraction, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn henon_fibers_exit_after_four() {
        let z = zone05();
        let (x0, x1) = z.x_range();
        for i in [10, 100, 200, 300, 390] {
            let x = x0 + (x1 - x0) * i as f64 / 400.0;
            let p = fiber_profile(z, x, (x1 - x0) / 400.0, 10_000, 1e-3).unwrap();
            let min = p.times.iter().filter_map(|t| t.finite()).min().unwrap();
            assert!(min >= 4);
            assert!(p.breakpoints.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn henon_average_matches_monte_carlo() {
        let z = zone05();
        let avg = average_exit_over_lobe(z, 400, 10_000, 1e-3).unwrap();
        assert!(avg.avg_exit >= 4.0 && avg.avg_exit.is_finite());
        assert!((avg.area - z.lobe_area().1).abs() < 1e-3 * avg.area);
        let mc = monte_carlo_lobe(z, 200_000, 5, 10_000);
        // Grid sampling can only miss thin strips, and missed strips carry
        // long exit times, so the quadrature may fall short of the sampled
        // mean but never exceed it beyond noise.
        assert!(avg.avg_exit < mc.avg_exit + 3.0 * mc.stderr, "mc {mc:?} quad {avg:?}");
        assert!(avg.avg_exit > 0.95 * mc.avg_exit, "mc {mc:?} quad {avg:?}");
    }

    #[test]
    fn henon_lobe_decomposition() {
        let z = zone05();
        let d = lobe_decomposition(z, &BoxSampler::random(lobe_box(z), 100_000, 3), 10_000, 200).unwrap();
        // The first exit from the entry lobe takes four steps.
        assert_eq!(d.measure(1) + d.measure(2) + d.measure(3), 0.0);
        assert!(d.measure(4) > 0.0);
        assert!((d.mu_entry - z.lobe_area().0).abs() < 3.0 * d.mu_entry_stderr);
        assert!(d.accounting_residual().abs() < 1e-12);
    }

    #[test]
    fn accessible_estimate_is_bounded_by_zone() {
        let z = zone05();
        let e = monte_carlo_accessible(z, 20_000, 1, 2_000);
        assert!(e.mu_accessible <= e.mu_region);
        assert!((e.mu_region - z.resonance_area().0).abs() < 4.0 * e.mu_region_stderr);
    }

    #[test]
    fn sweep_rows_in_order_with_errors() {
        let opts = SweepOptions { n: 200, t_max: 2000, value_tol: 1e-3, jobs: Some(1), timing: false };
        let rows = sweep(&[0.5, 9.0], &opts).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].k, 0.5);
        assert!(rows[0].is_ok());
        assert!(rows[0].acc_frac > 0.0 && rows[0].acc_frac <= 1.0 + 1e-3);
        assert!((rows[0].mu_a_acc - rows[0].mu_i * rows[0].avg_exit_i).abs() < 1e-12);
        assert!(rows[1].status.starts_with("error"));
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "k,mu_A,mu_I,avg_exit_I,mu_A_acc,mu_A_i,acc_frac,inacc_frac,censored_frac,N,t_max,seconds,status\n"
        ));
        assert!(sweep(&[0.5], &SweepOptions { jobs: Some(0), ..opts }).is_err());
    }
}
