//! Crossing, exit, return and transit times, and estimation of the transit
//! time decomposition of an entry set.
//!
//! For a region `A` the entry set `I` holds the points whose preimage lies
//! outside `A`, and the exit set `E` those whose image does. `T_j` is the part
//! of `I` that leaves after exactly `j` steps.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::csvio::{self, Metadata};
use crate::error::{Error, Result};
use crate::maps::{PhasePoint, VolumeMap};
use crate::region::{Outside, Region};
use crate::sampling::{BoxSampler, SamplingMode};

/// A first-passage time, or a lower bound when the orbit was cut off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeValue {
    Finite(u64),
    /// Not reached within `t_max` iterates.
    Censored(u64),
}

impl TimeValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, TimeValue::Finite(_))
    }

    pub fn finite(&self) -> Option<u64> {
        match *self {
            TimeValue::Finite(n) => Some(n),
            TimeValue::Censored(_) => None,
        }
    }

    /// The time, or `t_max` for a censored value.
    pub fn value(&self) -> u64 {
        match *self {
            TimeValue::Finite(n) | TimeValue::Censored(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

fn passage_time<M, R>(map: &M, a: &PhasePoint, target: &R, t_max: u64, dir: Direction) -> Result<TimeValue>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be at least 1".into()));
    }
    if a.dim() != map.dim() {
        return Err(Error::DimensionMismatch { expected: map.dim(), got: a.dim() });
    }
    let radius = map.escape_radius();
    let mut p = a.clone();
    for n in 1..=t_max {
        let next = match dir {
            Direction::Forward => map.forward(&p),
            Direction::Backward => map.inverse(&p),
        };
        let escaped = match next {
            Ok(q) => {
                p = q;
                p.max_abs() > radius
            }
            Err(Error::Escaped { .. }) => true,
            Err(e) => return Err(e),
        };
        if escaped {
            // Escaped orbits never come back; they hit the target only if it
            // covers the whole far field.
            return Ok(if target.contains_far_field(radius) {
                TimeValue::Finite(n)
            } else {
                TimeValue::Censored(t_max)
            });
        }
        if target.contains(p.coords()) {
            return Ok(TimeValue::Finite(n));
        }
    }
    Ok(TimeValue::Censored(t_max))
}

/// Smallest `n` in `1..=t_max` with `f^n(a)` in `target`.
pub fn crossing_time<M, R>(map: &M, a: &PhasePoint, target: &R, t_max: u64) -> Result<TimeValue>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    passage_time(map, a, target, t_max, Direction::Forward)
}

/// Smallest `n` in `1..=t_max` with `f^-n(a)` in `target`.
pub fn backward_crossing_time<M, R>(map: &M, a: &PhasePoint, target: &R, t_max: u64) -> Result<TimeValue>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    passage_time(map, a, target, t_max, Direction::Backward)
}

fn require_inside<R: Region + ?Sized>(a: &PhasePoint, region: &R) -> Result<()> {
    if !region.contains(a.coords()) {
        return Err(Error::NotInRegion);
    }
    Ok(())
}

/// Forward exit time `t+`.
pub fn exit_time<M, R>(map: &M, a: &PhasePoint, region: &R, t_max: u64) -> Result<TimeValue>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    require_inside(a, region)?;
    crossing_time(map, a, &Outside(region), t_max)
}

/// Backward exit time `t-`.
pub fn backward_exit_time<M, R>(map: &M, a: &PhasePoint, region: &R, t_max: u64) -> Result<TimeValue>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    require_inside(a, region)?;
    backward_crossing_time(map, a, &Outside(region), t_max)
}

/// First return time; equals 1 whenever `f(a)` stays in the region.
pub fn return_time<M, R>(map: &M, a: &PhasePoint, region: &R, t_max: u64) -> Result<TimeValue>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    require_inside(a, region)?;
    crossing_time(map, a, region, t_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitRecord {
    pub t_plus: TimeValue,
    pub t_minus: TimeValue,
    pub t_transit: TimeValue,
}

/// Forward, backward and transit time `t+ + t- - 1`.
pub fn transit_record<M, R>(map: &M, a: &PhasePoint, region: &R, t_max: u64) -> Result<TransitRecord>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    let t_plus = exit_time(map, a, region, t_max)?;
    let t_minus = backward_exit_time(map, a, region, t_max)?;
    let t_transit = match (t_plus, t_minus) {
        (TimeValue::Finite(p), TimeValue::Finite(m)) => TimeValue::Finite(p + m - 1),
        _ => TimeValue::Censored(t_max),
    };
    Ok(TransitRecord { t_plus, t_minus, t_transit })
}

fn image_outside<M, R>(map: &M, a: &PhasePoint, region: &R, backward: bool) -> Result<bool>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    let img = if backward { map.inverse(a) } else { map.forward(a) };
    match img {
        Ok(q) => Ok(q.max_abs() > map.escape_radius() || !region.contains(q.coords())),
        Err(Error::Escaped { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

/// `(a in E, a in I)`: whether the image, respectively preimage, leaves the region.
pub fn entry_exit_membership<M, R>(map: &M, a: &PhasePoint, region: &R) -> Result<(bool, bool)>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    require_inside(a, region)?;
    Ok((image_outside(map, a, region, false)?, image_outside(map, a, region, true)?))
}

/// How a sampled decomposition was drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub mode: SamplingMode,
    /// Points drawn in the sampling box.
    pub draws: u64,
    pub box_measure: f64,
    /// Draws that landed in the entry set.
    pub entry_hits: u64,
}

/// Measures `mu(T_j)` for `j = 1..=J` plus the mass censored at `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitDecomposition {
    pub mu_region: Option<f64>,
    pub mu_entry: f64,
    pub mu_entry_stderr: f64,
    /// `bins[j - 1] = mu(T_j)`.
    pub bins: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Entry mass whose exit time exceeds the horizon.
    pub censored: f64,
    pub censored_stderr: f64,
    /// Largest tabulated exit time `J`.
    pub horizon: u64,
    pub sampling: Option<SampleInfo>,
}

/// Integer tallies of exit times; merging is plain addition, so partial
/// tallies combine identically in any order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExitTally {
    pub draws: u64,
    pub entries: u64,
    /// `counts[j - 1]` = entry points with exit time `j`.
    pub counts: Vec<u64>,
    pub censored: u64,
}

impl ExitTally {
    pub fn record(&mut self, t: TimeValue) {
        self.entries += 1;
        match t {
            TimeValue::Finite(j) => {
                let j = j as usize;
                if self.counts.len() < j {
                    self.counts.resize(j, 0);
                }
                self.counts[j - 1] += 1;
            }
            TimeValue::Censored(_) => self.censored += 1,
        }
    }

    pub fn merge(mut self, other: ExitTally) -> ExitTally {
        self.draws += other.draws;
        self.entries += other.entries;
        self.censored += other.censored;
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self
    }

    /// Converts counts into measures using the sampling box measure.
    pub fn into_decomposition(
        self,
        box_measure: f64,
        mode: SamplingMode,
        horizon: u64,
        mu_region: Option<f64>,
    ) -> Result<TransitDecomposition> {
        if self.entries == 0 {
            return Err(Error::EmptyEntrySet);
        }
        let n = self.draws as f64;
        let est = |c: u64| {
            let p = c as f64 / n;
            (box_measure * p, box_measure * (p * (1.0 - p) / n).sqrt())
        };
        let mut bins = Vec::with_capacity(horizon as usize);
        let mut stderr = Vec::with_capacity(horizon as usize);
        for j in 0..horizon as usize {
            let (m, s) = est(self.counts.get(j).copied().unwrap_or(0));
            bins.push(m);
            stderr.push(s);
        }
        let (mu_entry, mu_entry_stderr) = est(self.entries);
        let (censored, censored_stderr) = est(self.censored);
        Ok(TransitDecomposition {
            mu_region,
            mu_entry,
            mu_entry_stderr,
            bins,
            stderr,
            censored,
            censored_stderr,
            horizon,
            sampling: Some(SampleInfo { mode, draws: self.draws, box_measure, entry_hits: self.entries }),
        })
    }
}

impl TransitDecomposition {
    /// Decomposition with exactly known measures and no sampling error.
    pub fn exact(mu_region: Option<f64>, mu_entry: f64, bins: Vec<f64>, censored: f64) -> Self {
        let horizon = bins.len() as u64;
        TransitDecomposition {
            mu_region,
            mu_entry,
            mu_entry_stderr: 0.0,
            stderr: vec![0.0; bins.len()],
            bins,
            censored,
            censored_stderr: 0.0,
            horizon,
            sampling: None,
        }
    }

    /// `mu(T_j)`, zero outside the table.
    pub fn measure(&self, j: u64) -> f64 {
        if j == 0 {
            return 0.0;
        }
        self.bins.get(j as usize - 1).copied().unwrap_or(0.0)
    }

    pub fn stderr_of(&self, j: u64) -> f64 {
        if j == 0 {
            return 0.0;
        }
        self.stderr.get(j as usize - 1).copied().unwrap_or(0.0)
    }

    /// `sum_j mu(T_j) + censored - mu(I)`; zero up to rounding for sampled tables.
    pub fn accounting_residual(&self) -> f64 {
        self.bins.iter().sum::<f64>() + self.censored - self.mu_entry
    }

    /// Largest `j` with nonzero measure.
    pub fn last_nonzero(&self) -> usize {
        self.bins.iter().rposition(|&m| m > 0.0).map_or(0, |i| i + 1)
    }

    /// Writes the `j, measure, stderr` table with a metadata preamble.
    ///
    /// Rows stop at the last nonzero bin; the horizon is in the preamble.
    pub fn write_csv<W: Write>(&self, mut w: W, map: &str, region: &str, extra: &[(String, String)]) -> Result<()> {
        let (mode, seed, draws) = match &self.sampling {
            Some(s) => (
                match s.mode {
                    SamplingMode::Grid => "grid",
                    SamplingMode::Random { .. } => "random",
                },
                s.mode.seed().map(|s| s.to_string()).unwrap_or_default(),
                s.draws.to_string(),
            ),
            None => ("exact", String::new(), String::new()),
        };
        let mut meta: Metadata = vec![
            ("map".into(), map.into()),
            ("region".into(), region.into()),
            ("t_max".into(), self.horizon.to_string()),
            ("samples".into(), draws),
            ("seed".into(), seed),
            ("mode".into(), mode.into()),
            ("mu_region".into(), self.mu_region.map(|m| format!("{m:e}")).unwrap_or_default()),
            ("mu_entry".into(), format!("{:e}", self.mu_entry)),
            ("mu_entry_stderr".into(), format!("{:e}", self.mu_entry_stderr)),
            ("censored".into(), format!("{:e}", self.censored)),
            ("censored_stderr".into(), format!("{:e}", self.censored_stderr)),
        ];
        if let Some(s) = &self.sampling {
            meta.push(("box_measure".into(), format!("{:e}", s.box_measure)));
            meta.push(("entry_hits".into(), s.entry_hits.to_string()));
        }
        meta.extend(extra.iter().cloned());
        csvio::write_preamble(&mut w, &meta)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["j", "measure", "stderr"])?;
        for j in 1..=self.last_nonzero() {
            out.write_record([j.to_string(), format!("{:e}", self.bins[j - 1]), format!("{:e}", self.stderr[j - 1])])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv), returning the
    /// full metadata alongside.
    pub fn read_csv<R: Read>(r: R) -> Result<(Self, Metadata)> {
        let (meta, body) = csvio::read_preamble(std::io::BufReader::new(r))?;
        let horizon: u64 = csvio::parse_field(&meta, "t_max")?;
        let mut bins = vec![0.0; horizon as usize];
        let mut stderr = vec![0.0; horizon as usize];
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad row {rec:?}")))
            };
            let j = parse(0)? as usize;
            if j == 0 || j > bins.len() {
                return Err(Error::Parse(format!("bin {j} outside 1..={horizon}")));
            }
            bins[j - 1] = parse(1)?;
            stderr[j - 1] = parse(2)?;
        }
        let opt = |key: &str| -> Result<Option<f64>> {
            match csvio::lookup(&meta, key) {
                None | Some("") => Ok(None),
                Some(_) => csvio::parse_field(&meta, key).map(Some),
            }
        };
        let sampling = match csvio::lookup(&meta, "mode") {
            Some("grid") | Some("random") => {
                let mode = if csvio::lookup(&meta, "mode") == Some("grid") {
                    SamplingMode::Grid
                } else {
                    SamplingMode::Random { seed: csvio::parse_field(&meta, "seed")? }
                };
                Some(SampleInfo {
                    mode,
                    draws: csvio::parse_field(&meta, "samples")?,
                    box_measure: csvio::parse_field(&meta, "box_measure")?,
                    entry_hits: csvio::parse_field(&meta, "entry_hits")?,
                })
            }
            _ => None,
        };
        let d = TransitDecomposition {
            mu_region: opt("mu_region")?,
            mu_entry: csvio::parse_field(&meta, "mu_entry")?,
            mu_entry_stderr: opt("mu_entry_stderr")?.unwrap_or(0.0),
            bins,
            stderr,
            censored: csvio::parse_field(&meta, "censored")?,
            censored_stderr: opt("censored_stderr")?.unwrap_or(0.0),
            horizon,
            sampling,
        };
        Ok((d, meta))
    }
}

/// Samples the sampler's box, keeps points of the entry set of `region` and
/// tabulates their exit times.
///
/// Exit times beyond `bins` are censored at `bins`, so the effective horizon
/// is `min(t_max, bins)`.
pub fn estimate_decomposition<M, R>(
    map: &M,
    region: &R,
    sampler: &BoxSampler,
    t_max: u64,
    bins: u64,
) -> Result<TransitDecomposition>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    if bins == 0 || t_max == 0 {
        return Err(Error::InvalidParameter("t_max and bins must be at least 1".into()));
    }
    let horizon = t_max.min(bins);
    let tally = sampler.fold(
        ExitTally::default,
        |acc, p| {
            acc.draws += 1;
            if !region.contains(p.coords()) {
                return;
            }
            if !matches!(image_outside(map, p, region, true), Ok(true)) {
                return;
            }
            // Exit times from inside the region cannot fail except on
            // dimension errors, which were ruled out by `contains`.
            let t = crossing_time(map, p, &Outside(region), horizon).unwrap_or(TimeValue::Censored(horizon));
            acc.record(t);
        },
        ExitTally::merge,
    );
    tally.into_decomposition(sampler.bbox.volume(), sampler.mode, horizon, region.measure())
}

/// Sampled measures of the exit and entry sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnstileEstimate {
    pub mu_exit: f64,
    pub mu_exit_stderr: f64,
    pub mu_entry: f64,
    pub mu_entry_stderr: f64,
}

impl TurnstileEstimate {
    /// `|mu(E) - mu(I)|` in units of the combined standard error.
    pub fn imbalance_sigmas(&self) -> f64 {
        let se = self.mu_exit_stderr.hypot(self.mu_entry_stderr);
        if se == 0.0 {
            return if self.mu_exit == self.mu_entry { 0.0 } else { f64::INFINITY };
        }
        (self.mu_exit - self.mu_entry).abs() / se
    }
}

pub fn estimate_turnstile<M, R>(map: &M, region: &R, sampler: &BoxSampler) -> Result<TurnstileEstimate>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    let (draws, exits, entries) = sampler.fold(
        || (0u64, 0u64, 0u64),
        |acc, p| {
            acc.0 += 1;
            if region.contains(p.coords()) {
                if let Ok((e, i)) = entry_exit_membership(map, p, region) {
                    acc.1 += e as u64;
                    acc.2 += i as u64;
                }
            }
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
    );
    let b = sampler.bbox.volume();
    let n = draws as f64;
    let est = |c: u64| {
        let p = c as f64 / n;
        (b * p, b * (p * (1.0 - p) / n).sqrt())
    };
    let (mu_exit, mu_exit_stderr) = est(exits);
    let (mu_entry, mu_entry_stderr) = est(entries);
    Ok(TurnstileEstimate { mu_exit, mu_exit_stderr, mu_entry, mu_entry_stderr })
}

/// Sampled measure of the accessible set: points of the region with finite
/// backward exit time, i.e. the union of the first `t_max` forward images of
/// the entry set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessibleEstimate {
    pub mu_accessible: f64,
    pub stderr: f64,
    pub mu_region: f64,
    pub mu_region_stderr: f64,
    pub draws: u64,
    pub region_hits: u64,
    pub accessible_hits: u64,
}

impl AccessibleEstimate {
    pub fn from_counts(draws: u64, region_hits: u64, accessible_hits: u64, box_measure: f64) -> Self {
        let n = draws as f64;
        let est = |c: u64| {
            let p = c as f64 / n;
            (box_measure * p, box_measure * (p * (1.0 - p) / n).sqrt())
        };
        let (mu_accessible, stderr) = est(accessible_hits);
        let (mu_region, mu_region_stderr) = est(region_hits);
        AccessibleEstimate { mu_accessible, stderr, mu_region, mu_region_stderr, draws, region_hits, accessible_hits }
    }
}

pub fn estimate_accessible<M, R>(map: &M, region: &R, sampler: &BoxSampler, t_max: u64) -> Result<AccessibleEstimate>
where
    M: VolumeMap + ?Sized,
    R: Region + ?Sized,
{
    let (draws, inside, acc) = sampler.fold(
        || (0u64, 0u64, 0u64),
        |c, p| {
            c.0 += 1;
            if region.contains(p.coords()) {
                c.1 += 1;
                if matches!(backward_exit_time(map, p, region, t_max), Ok(TimeValue::Finite(_))) {
                    c.2 += 1;
                }
            }
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
    );
    Ok(AccessibleEstimate::from_counts(draws, inside, acc, sampler.bbox.volume()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{CatMap, Henon, Linear2D, Shear};
    use crate::region::{AxisBox, Triangle};

    fn p(x: f64, y: f64) -> PhasePoint {
        PhasePoint::xy(x, y)
    }

    #[test]
    fn crossing_examples() {
        let sq = AxisBox::unit(2);
        let out = Outside(&sq);
        let lin = Linear2D::new(2.0).unwrap();
        // 0.3 -> 0.6 -> 1.2
        assert_eq!(crossing_time(&lin, &p(0.3, 0.8), &out, 100).unwrap(), TimeValue::Finite(2));
        // 0.5 -> 0.8 -> 1.1
        assert_eq!(crossing_time(&Shear, &p(0.5, 0.3), &out, 100).unwrap(), TimeValue::Finite(2));
        assert_eq!(crossing_time(&lin, &p(0.9, 0.5), &out, 100).unwrap(), TimeValue::Finite(1));
        assert!(crossing_time(&lin, &p(0.9, 0.5), &out, 0).is_err());
    }

    #[test]
    fn escape_semantics() {
        // Orbit from (3, 0) escapes to infinity under Hénon k = 0.
        let h = Henon::new(0.0);
        let far = AxisBox::new(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(crossing_time(&h, &p(3.0, 0.0), &Outside(&far), 50).unwrap(), TimeValue::Finite(1)));
        // A bounded target is never reached after escape.
        let target = AxisBox::new(&[-0.1, -0.1], &[0.1, 0.1]).unwrap();
        assert_eq!(crossing_time(&h, &p(3.0, 0.0), &target, 50).unwrap(), TimeValue::Censored(50));
    }

    #[test]
    fn exit_examples() {
        let sq = AxisBox::unit(2);
        let lin = Linear2D::new(2.0).unwrap();
        assert_eq!(exit_time(&lin, &p(0.6, 0.9), &sq, 10).unwrap(), TimeValue::Finite(1));
        assert_eq!(exit_time(&lin, &p(1.6, 0.9), &sq, 10), Err(Error::NotInRegion));

        let h = Henon::new(0.5);
        let ze = 1.0 - 1.5_f64.sqrt();
        let b = AxisBox::new(&[-2.0, -2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(exit_time(&h, &p(ze, -ze), &b, 1000).unwrap(), TimeValue::Censored(1000));
        assert_eq!(backward_exit_time(&h, &p(ze, -ze), &b, 1000).unwrap(), TimeValue::Censored(1000));
    }

    #[test]
    fn backward_exit_examples() {
        let sq = AxisBox::unit(2);
        let lin = Linear2D::new(2.0).unwrap();
        assert_eq!(backward_exit_time(&lin, &p(0.3, 0.8), &sq, 10).unwrap(), TimeValue::Finite(1));

        // Oracle: subtract y until x < 0.
        let (mut x, y, mut n) = (0.9_f64, 0.5, 0);
        while x >= 0.0 {
            x -= y;
            n += 1;
        }
        assert_eq!(backward_exit_time(&Shear, &p(0.9, 0.5), &sq, 10).unwrap(), TimeValue::Finite(n));
        assert_eq!(n, 2);
    }

    #[test]
    fn return_examples() {
        let sq = AxisBox::unit(2);
        let lin = Linear2D::new(2.0).unwrap();
        assert_eq!(return_time(&lin, &p(0.2, 0.5), &sq, 10).unwrap(), TimeValue::Finite(1));
        assert_eq!(return_time(&lin, &p(0.9, 0.5), &sq, 10).unwrap(), TimeValue::Censored(10));

        let a = AxisBox::new(&[0.0, 0.0], &[0.5, 0.5]).unwrap();
        let (mut x, mut y, mut n) = (0.1_f64, 0.2_f64, 0u64);
        loop {
            (x, y) = ((x + y).rem_euclid(1.0), (x + 2.0 * y).rem_euclid(1.0));
            n += 1;
            if x <= 0.5 && y <= 0.5 {
                break;
            }
        }
        assert_eq!(return_time(&CatMap, &p(0.1, 0.2), &a, 1000).unwrap(), TimeValue::Finite(n));
    }

    #[test]
    fn transit_record_examples() {
        let sq = AxisBox::unit(2);
        let lin = Linear2D::new(2.0).unwrap();
        let r = transit_record(&lin, &p(0.3, 0.8), &sq, 10).unwrap();
        assert_eq!(r.t_minus, TimeValue::Finite(1));
        assert_eq!(r.t_plus, TimeValue::Finite(2));
        assert_eq!(r.t_transit, TimeValue::Finite(2));

        let h = Henon::new(0.5);
        let ze = 1.0 - 1.5_f64.sqrt();
        let b = AxisBox::new(&[-2.0, -2.0], &[2.0, 2.0]).unwrap();
        let r = transit_record(&h, &p(ze, -ze), &b, 100).unwrap();
        assert!(!r.t_plus.is_finite() && !r.t_minus.is_finite() && !r.t_transit.is_finite());

        let r1 = transit_record(&lin, &p(0.3, 0.8), &sq, 10).unwrap();
        let r2 = transit_record(&lin, &p(0.6, 0.4), &sq, 10).unwrap();
        assert_eq!(r1.t_transit, r2.t_transit);
    }

    #[test]
    fn membership_examples() {
        let sq = AxisBox::unit(2);
        let lin = Linear2D::new(2.0).unwrap();
        assert_eq!(entry_exit_membership(&lin, &p(0.3, 0.8), &sq).unwrap(), (false, true));
        assert_eq!(entry_exit_membership(&lin, &p(0.8, 0.3), &sq).unwrap(), (true, false));
        assert_eq!(entry_exit_membership(&lin, &p(0.2, 0.2), &sq).unwrap(), (false, false));
        assert_eq!(entry_exit_membership(&lin, &p(2.0, 0.2), &sq), Err(Error::NotInRegion));
    }

    #[test]
    fn decomposition_linear_grid() {
        let lin = Linear2D::new(2.0).unwrap();
        let sampler = BoxSampler::grid(AxisBox::unit(2), 1_000_000);
        let d = estimate_decomposition(&lin, &AxisBox::unit(2), &sampler, 200, 200).unwrap();
        assert!(d.accounting_residual().abs() < 1e-12);
        // mu(T_3) = (2 - 1)(1 - 1/2)/8
        assert!((d.measure(3) - 0.0625).abs() < 3.0 * d.stderr_of(3));
        assert!((d.mu_entry - 0.5).abs() < 3.0 * d.mu_entry_stderr);
    }

    #[test]
    fn decomposition_shear_bins_censor() {
        let sampler = BoxSampler::grid(AxisBox::unit(2), 1_000_000);
        let d = estimate_decomposition(&Shear, &AxisBox::unit(2), &sampler, 10_000, 10).unwrap();
        assert_eq!(d.horizon, 10);
        assert!((d.measure(2) - 1.0 / 6.0).abs() < 3.0 * d.stderr_of(2));
        // tail beyond J = 10 is 1/(2 J (J + 1))
        assert!((d.censored - 1.0 / 220.0).abs() < 3.0 * d.censored_stderr.max(1e-4));
        assert!(d.accounting_residual().abs() < 1e-12);
    }

    #[test]
    fn empty_entry_set() {
        let lin = Linear2D::new(2.0).unwrap();
        // Box far away from the region: no entry points.
        let sampler = BoxSampler::grid(AxisBox::new(&[5.0, 5.0], &[6.0, 6.0]).unwrap(), 100);
        assert_eq!(
            estimate_decomposition(&lin, &AxisBox::unit(2), &sampler, 10, 10),
            Err(Error::EmptyEntrySet)
        );
    }

    #[test]
    fn shear_entry_triangle_sampling() {
        // Sampling only the entry triangle gives the same decomposition.
        let tri = Triangle::new([0.0, 0.0], [1.0, 1.0], [0.0, 1.0]).unwrap();
        let sampler = BoxSampler::random(AxisBox::unit(2), 200_000, 3);
        let d = estimate_decomposition(&Shear, &AxisBox::unit(2), &sampler, 50, 50).unwrap();
        let inside = sampler.points().iter().filter(|q| tri.contains(q.coords())).count() as u64;
        assert_eq!(inside, d.sampling.as_ref().unwrap().entry_hits);
    }

    #[test]
    fn tally_merge_is_order_independent() {
        let mut a = ExitTally::default();
        let mut b = ExitTally::default();
        a.draws = 3;
        b.draws = 5;
        a.record(TimeValue::Finite(2));
        b.record(TimeValue::Finite(5));
        b.record(TimeValue::Censored(9));
        assert_eq!(a.clone().merge(b.clone()), b.merge(a));
    }

    #[test]
    fn csv_round_trip() {
        let lin = Linear2D::new(2.0).unwrap();
        let sampler = BoxSampler::random(AxisBox::unit(2), 50_000, 11);
        let d = estimate_decomposition(&lin, &AxisBox::unit(2), &sampler, 40, 40).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, "linear", "unit-square", &[("note".into(), "x".into())]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("# seed: 11"));
        assert!(text.contains("j,measure,stderr"));
        let (back, meta) = TransitDecomposition::read_csv(buf.as_slice()).unwrap();
        assert_eq!(csvio::lookup(&meta, "note"), Some("x"));
        assert_eq!(back.horizon, 40);
        for j in 1..=40 {
            assert_eq!(back.measure(j), d.measure(j));
        }
        assert_eq!(back.sampling, d.sampling);
    }
}
