//! Average exit and transit times, accessible measure, exit-time
//! distributions, tail fits and the first-return-time check, all derived
//! from a transit decomposition.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::VolumeMap;
use crate::region::Region;
use crate::sampling::BoxSampler;
use crate::transit::{backward_crossing_time, return_time, TimeValue, TransitDecomposition};

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    /// `|value - target| <= k * stderr`, with a rounding allowance for exact values.
    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr + 1e-12 * target.abs().max(1.0)
    }
}

/// A moment that may fail to exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Moment {
    Finite { value: f64, stderr: f64 },
    Divergent,
}

impl Moment {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Moment::Finite { value, .. } => Some(value),
            Moment::Divergent => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportSummary {
    pub mu_entry: Estimate,
    /// `<t+>_I = sum_j j mu(T_j) / mu(I)`.
    pub avg_exit_entry: Estimate,
    /// `mu(A_acc) = sum_j j mu(T_j)`.
    pub mu_accessible: Estimate,
    /// `sum_j j^2 mu(T_j) / mu(A_acc)`.
    pub avg_transit_accessible: Moment,
    /// `(avg_transit_accessible + 1) / 2`.
    pub avg_exit_accessible: Moment,
    pub censored: Estimate,
    /// Censored mass as a fraction of `mu(I)`.
    pub censored_fraction: f64,
}

/// Sums `sum_j w(j) mu_j` over the table.
fn moment(d: &TransitDecomposition, w: impl Fn(f64) -> f64) -> f64 {
    d.bins.iter().enumerate().map(|(i, &m)| w((i + 1) as f64) * m).sum()
}

/// Standard error of `E[X] / E[Y]` where each draw contributes
/// `X = B f(j)`, `Y = B g(j)` if it lands in `T_j` (and `Y = B g_c` if it
/// is censored), estimated by the delta method from the table itself.
fn ratio_stderr(d: &TransitDecomposition, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, g_censored: f64) -> f64 {
    let Some(s) = &d.sampling else { return 0.0 };
    let (b, n) = (s.box_measure, s.draws as f64);
    let ex = moment(d, &f);
    let ey = moment(d, &g) + g_censored * d.censored;
    if ey == 0.0 {
        return f64::NAN;
    }
    let exx = b * moment(d, |j| f(j) * f(j));
    let eyy = b * (moment(d, |j| g(j) * g(j)) + g_censored * g_censored * d.censored);
    let exy = b * moment(d, |j| f(j) * g(j));
    let r = ex / ey;
    let var_x = exx - ex * ex;
    let var_y = eyy - ey * ey;
    let cov = exy - ex * ey;
    ((var_x - 2.0 * r * cov + r * r * var_y).max(0.0) / n).sqrt() / ey
}

/// Standard error of `E[X]` with `X = B f(j)` on `T_j`.
fn sum_stderr(d: &TransitDecomposition, f: impl Fn(f64) -> f64) -> f64 {
    let Some(s) = &d.sampling else { return 0.0 };
    let ex = moment(d, &f);
    let exx = s.box_measure * moment(d, |j| f(j) * f(j));
    ((exx - ex * ex).max(0.0) / s.draws as f64).sqrt()
}

/// Whether `sum_j j^2 mu(T_j)` fails to settle within the table: the last
/// decade `J/10 < j <= J` adds more than 10% of the total, or the censored
/// mass alone could.
pub fn second_moment_diverges(d: &TransitDecomposition) -> bool {
    let total = moment(d, |j| j * j);
    let horizon = d.bins.len();
    let cut = horizon / 10;
    let tail: f64 = d.bins[cut..].iter().enumerate().map(|(i, &m)| ((cut + i + 1) as f64).powi(2) * m).sum();
    let censored_floor = (d.horizon as f64).powi(2) * d.censored;
    (horizon >= 10 && tail > 0.1 * total) || censored_floor > 0.1 * total
}

pub fn summarize(d: &TransitDecomposition) -> Result<TransportSummary> {
    if !(d.mu_entry > 0.0) {
        return Err(Error::EmptyEntrySet);
    }
    let s1 = moment(d, |j| j);
    let s2 = moment(d, |j| j * j);
    let mu_accessible = Estimate { value: s1, stderr: sum_stderr(d, |j| j) };
    let avg_exit_entry = Estimate { value: s1 / d.mu_entry, stderr: ratio_stderr(d, |j| j, |_| 1.0, 1.0) };
    let (avg_transit_accessible, avg_exit_accessible) = if second_moment_diverges(d) || s1 == 0.0 {
        (Moment::Divergent, Moment::Divergent)
    } else {
        let value = s2 / s1;
        let stderr = ratio_stderr(d, |j| j * j, |j| j, 0.0);
        (
            Moment::Finite { value, stderr },
            Moment::Finite { value: 0.5 * (value + 1.0), stderr: 0.5 * stderr },
        )
    };
    Ok(TransportSummary {
        mu_entry: Estimate { value: d.mu_entry, stderr: d.mu_entry_stderr },
        avg_exit_entry,
        mu_accessible,
        avg_transit_accessible,
        avg_exit_accessible,
        censored: Estimate { value: d.censored, stderr: d.censored_stderr },
        censored_fraction: d.censored / d.mu_entry,
    })
}

/// Exit and transit time distributions, indexed by `k = 1..=J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    /// `P(t+(I) = k)`.
    pub exit_pdf_entry: Vec<f64>,
    /// `P(t+(I) >= k)` over the tabulated (uncensored) mass.
    pub survival_entry: Vec<f64>,
    /// `P(t+(A_acc) = k)`.
    pub exit_pdf_accessible: Vec<f64>,
    /// `P(t_transit(A_acc) = k)`.
    pub transit_pdf_accessible: Vec<f64>,
    /// `P(t+(A_acc) >= k)`.
    pub survival_accessible: Vec<f64>,
}

pub fn distributions(d: &TransitDecomposition) -> Result<DistributionTable> {
    if !(d.mu_entry > 0.0) {
        return Err(Error::EmptyEntrySet);
    }
    let n = d.bins.len();
    let mu_acc = moment(d, |j| j);
    // tail[k - 1] = sum_{m >= k} mu_m
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + d.bins[k];
    }
    // sum_{m >= k} (m - k + 1) mu_m = sum_{i >= k} tail_i
    let mut tail2 = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail2[k] = tail2[k + 1] + tail[k];
    }
    let safe = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(DistributionTable {
        exit_pdf_entry: d.bins.iter().map(|&m| m / d.mu_entry).collect(),
        survival_entry: tail[..n].iter().map(|&t| t / d.mu_entry).collect(),
        exit_pdf_accessible: tail[..n].iter().map(|&t| safe(t, mu_acc)).collect(),
        transit_pdf_accessible: d.bins.iter().enumerate().map(|(i, &m)| safe((i + 1) as f64 * m, mu_acc)).collect(),
        survival_accessible: tail2[..n].iter().map(|&t| safe(t, mu_acc)).collect(),
    })
}

impl DistributionTable {
    pub fn len(&self) -> usize {
        self.exit_pdf_entry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit_pdf_entry.is_empty()
    }

    /// Writes rows `k = 1..=rows` (all rows when `None`).
    pub fn write_csv<W: Write>(&self, w: W, rows: Option<usize>) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "exit_pdf_I", "survival_I", "exit_pdf_acc", "transit_pdf_acc", "survival_A"])?;
        for i in 0..rows.unwrap_or(self.len()).min(self.len()) {
            out.write_record([
                (i + 1).to_string(),
                format!("{:e}", self.exit_pdf_entry[i]),
                format!("{:e}", self.survival_entry[i]),
                format!("{:e}", self.exit_pdf_accessible[i]),
                format!("{:e}", self.transit_pdf_accessible[i]),
                format!("{:e}", self.survival_accessible[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Power-law fit `mu(T_j) ~ j^-(2 + alpha)` over a window, compared against
/// an exponential fit of the same data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub alpha: f64,
    pub slope: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    /// RMS residual of the log-linear (exponential) fit.
    pub exponential_residual: f64,
    /// The exponential fit is the better description.
    pub exponential: bool,
    pub points: usize,
}

/// Ordinary least squares; returns `(slope, intercept, rms residual)`.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    (slope, icpt, (rss / n).sqrt())
}

pub fn tail_exponent(d: &TransitDecomposition, j_min: u64, j_max: u64) -> Result<TailFit> {
    if j_min < 1 || j_max <= j_min {
        return Err(Error::InvalidParameter(format!("window [{j_min}, {j_max}] is empty")));
    }
    let (mut lx, mut x, mut ly) = (Vec::new(), Vec::new(), Vec::new());
    for j in j_min..=j_max.min(d.bins.len() as u64) {
        let m = d.measure(j);
        if m > 0.0 {
            lx.push((j as f64).ln());
            x.push(j as f64);
            ly.push(m.ln());
        }
    }
    if ly.len() < 5 {
        return Err(Error::InsufficientData(format!("{} nonzero bins in [{j_min}, {j_max}], need 5", ly.len())));
    }
    let (slope, _, residual) = ols(&lx, &ly);
    let (_, _, exponential_residual) = ols(&x, &ly);
    Ok(TailFit {
        alpha: -slope - 2.0,
        slope,
        residual,
        exponential_residual,
        exponential: exponential_residual < residual,
        points: ly.len(),
    })
}

/// Empirical mean first-return time versus the prediction `mu(M_acc) / mu(A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KacResult {
    pub avg_return: Estimate,
    pub predicted: f64,
    pub mu_region: f64,
    pub mu_space_accessible: f64,
    pub samples: u64,
    pub censored_fraction: f64,
}

/// Maximum tolerated fraction of censored return times.
pub const KAC_CENSOR_LIMIT: f64 = 0.01;

/// Averages return times to `a` over the points of `a_sampler` inside `a`,
/// and estimates `mu(M_acc)` as the part of `m` (sampled by `m_sampler`)
/// whose backward orbit visits `a` within `t_max` steps.
pub fn kac_check<M, A, S>(
    map: &M,
    a: &A,
    m: &S,
    a_sampler: &BoxSampler,
    m_sampler: &BoxSampler,
    t_max: u64,
) -> Result<KacResult>
where
    M: VolumeMap + ?Sized,
    A: Region + ?Sized,
    S: Region + ?Sized,
{
    let (hits, a_draws, sum, sum_sq, censored) = a_sampler.fold(
        || (0u64, 0u64, 0u64, 0u128, 0u64),
        |acc, p| {
            acc.1 += 1;
            if !a.contains(p.coords()) {
                return;
            }
            match return_time(map, p, a, t_max) {
                Ok(TimeValue::Finite(n)) => {
                    acc.0 += 1;
                    acc.2 += n;
                    acc.3 += (n as u128) * (n as u128);
                }
                _ => acc.4 += 1,
            }
        },
        |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2, x.3 + y.3, x.4 + y.4),
    );
    let inside = hits + censored;
    if inside == 0 {
        return Err(Error::InsufficientData("no samples fell in the return region".into()));
    }
    let censored_fraction = censored as f64 / inside as f64;
    if censored_fraction > KAC_CENSOR_LIMIT {
        return Err(Error::UnreliableEstimate { fraction: censored_fraction, limit: KAC_CENSOR_LIMIT });
    }
    let n = hits as f64;
    let mean = sum as f64 / n;
    let var = (sum_sq as f64 / n - mean * mean).max(0.0);
    let mu_region = a.measure().unwrap_or(a_sampler.bbox.volume() * inside as f64 / a_draws as f64);

    let (m_draws, m_inside, m_reached) = m_sampler.fold(
        || (0u64, 0u64, 0u64),
        |acc, p| {
            acc.0 += 1;
            if !m.contains(p.coords()) {
                return;
            }
            acc.1 += 1;
            let reached = a.contains(p.coords())
                || matches!(backward_crossing_time(map, p, a, t_max), Ok(TimeValue::Finite(_)));
            acc.2 += reached as u64;
        },
        |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2),
    );
    if m_inside == 0 {
        return Err(Error::InsufficientData("no samples fell in the ambient region".into()));
    }
    let mu_space = m.measure().unwrap_or(m_sampler.bbox.volume() * m_inside as f64 / m_draws as f64);
    let mu_space_accessible = mu_space * m_reached as f64 / m_inside as f64;
    Ok(KacResult {
        avg_return: Estimate { value: mean, stderr: (var / n).sqrt() },
        predicted: mu_space_accessible / mu_region,
        mu_region,
        mu_space_accessible,
        samples: hits,
        censored_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::AnalyticModel;
    use crate::maps::CatMap;
    use crate::region::AxisBox;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn summarize_linear() {
        let d = AnalyticModel::Linear { lambda: 2.0 }.decomposition(200).unwrap();
        let s = summarize(&d).unwrap();
        assert_abs_diff_eq!(s.avg_exit_entry.value, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mu_accessible.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.avg_transit_accessible.value().unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.avg_exit_accessible.value().unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn summarize_shear() {
        let d = AnalyticModel::Shear.decomposition(1_000_000).unwrap();
        let s = summarize(&d).unwrap();
        assert_abs_diff_eq!(s.avg_exit_entry.value, 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(s.mu_accessible.value, 1.0, epsilon = 1e-5);
        assert_eq!(s.avg_transit_accessible, Moment::Divergent);
        assert_eq!(s.avg_exit_accessible, Moment::Divergent);
    }

    #[test]
    fn summarize_single_bin() {
        let d = TransitDecomposition::exact(Some(1.0), 0.3, vec![0.3], 0.0);
        let s = summarize(&d).unwrap();
        assert_eq!(s.avg_exit_entry.value, 1.0);
        let empty = TransitDecomposition::exact(Some(1.0), 0.0, vec![0.0], 0.0);
        assert_eq!(summarize(&empty), Err(Error::EmptyEntrySet));
    }

    #[test]
    fn distributions_linear_and_shear() {
        let d = AnalyticModel::Linear { lambda: 2.0 }.decomposition(60).unwrap();
        let t = distributions(&d).unwrap();
        for (i, expect) in [0.5, 0.25, 0.125].iter().enumerate() {
            assert_abs_diff_eq!(t.exit_pdf_entry[i], *expect, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(t.survival_entry[0], 1.0, epsilon = 1e-12);

        let d = AnalyticModel::Shear.decomposition(100_000).unwrap();
        let t = distributions(&d).unwrap();
        assert_abs_diff_eq!(t.transit_pdf_accessible[1], 1.0 / 3.0, epsilon = 1e-4);
    }

    #[test]
    fn accessible_exit_identity() {
        let d = AnalyticModel::Linear { lambda: 1.5 }.decomposition(100).unwrap();
        let t = distributions(&d).unwrap();
        let s = summarize(&d).unwrap();
        for k in 0..t.len() {
            let rhs = t.survival_entry[k] / s.avg_exit_entry.value;
            assert!((t.exit_pdf_accessible[k] - rhs).abs() <= 1e-14 * rhs.max(1e-300) + 1e-300);
        }
        assert_abs_diff_eq!(t.exit_pdf_accessible.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.transit_pdf_accessible.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.survival_accessible[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distribution_csv_header() {
        let d = AnalyticModel::Shear.decomposition(10).unwrap();
        let mut buf = Vec::new();
        distributions(&d).unwrap().write_csv(&mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,exit_pdf_I,survival_I,exit_pdf_acc,transit_pdf_acc,survival_A\n"));
        assert_eq!(text.lines().count(), 11);
    }

    #[test]
    fn tail_fits() {
        let d = AnalyticModel::Shear.decomposition(10_000).unwrap();
        let f = tail_exponent(&d, 100, 10_000).unwrap();
        assert_abs_diff_eq!(f.slope, -3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(f.alpha, 1.0, epsilon = 1e-3);
        assert!(!f.exponential);

        let d = AnalyticModel::Linear { lambda: 2.0 }.decomposition(60).unwrap();
        assert!(tail_exponent(&d, 1, 50).unwrap().exponential);

        let bins: Vec<f64> = (1..=1000).map(|j| (j as f64).powf(-2.25)).collect();
        let mu: f64 = bins.iter().sum();
        let d = TransitDecomposition::exact(None, mu, bins, 0.0);
        assert_abs_diff_eq!(tail_exponent(&d, 10, 1000).unwrap().alpha, 0.25, epsilon = 1e-9);

        let sparse = TransitDecomposition::exact(None, 1.0, vec![0.5, 0.0, 0.5], 0.0);
        assert!(matches!(tail_exponent(&sparse, 1, 3), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn kac_cat_map() {
        let torus = AxisBox::unit(2);
        let m_sampler = BoxSampler::random(torus.clone(), 20_000, 2);
        for (hi, expect) in [([0.5, 0.5], 4.0), ([0.1, 1.0], 10.0)] {
            let a = AxisBox::new(&[0.0, 0.0], &hi).unwrap();
            let a_sampler = BoxSampler::random(a.clone(), 100_000, 1);
            let r = kac_check(&CatMap, &a, &torus, &a_sampler, &m_sampler, 10_000).unwrap();
            assert!((r.avg_return.value - expect).abs() < 0.05 * expect, "{r:?}");
            assert_abs_diff_eq!(r.predicted, expect, epsilon = 1e-12);
        }
        // A = M: every return takes one step.
        let r = kac_check(&CatMap, &torus, &torus, &m_sampler, &m_sampler, 10).unwrap();
        assert_eq!(r.avg_return.value, 1.0);
    }

    #[test]
    fn kac_rejects_heavy_censoring() {
        let torus = AxisBox::unit(2);
        let a = AxisBox::new(&[0.0, 0.0], &[0.01, 0.01]).unwrap();
        let s = BoxSampler::random(a.clone(), 2_000, 1);
        assert!(matches!(
            kac_check(&CatMap, &a, &torus, &s, &s, 3),
            Err(Error::UnreliableEstimate { .. })
        ));
    }

    proptest! {
        #[test]
        fn identities_on_random_tables(bins in proptest::collection::vec(0.0f64..1.0, 1..60), cens in 0.0f64..0.1) {
            let mu: f64 = bins.iter().sum::<f64>() + cens;
            prop_assume!(mu > 1e-6 && bins.iter().any(|&b| b > 0.0));
            let d = TransitDecomposition::exact(None, mu, bins, cens);
            let t = distributions(&d).unwrap();
            let s = summarize(&d).unwrap();
            for w in t.survival_entry.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for w in t.survival_accessible.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            if let (Some(tr), Some(ex)) = (s.avg_transit_accessible.value(), s.avg_exit_accessible.value()) {
                prop_assert_eq!(ex, 0.5 * (tr + 1.0));
            }
            prop_assert!((t.survival_entry[0] - (1.0 - cens / mu)).abs() < 1e-12);
        }
    }
}
