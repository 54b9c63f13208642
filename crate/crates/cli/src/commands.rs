//! Decomposition runs, Hénon zone builds and parameter sweeps, with their
//! output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use transit_core::maps::{DiagHyperbolic, Linear2D, Shear};
use transit_core::quadrature::{self, lobe_box, lobe_decomposition, SweepOptions, SweepRow};
use transit_core::region::AxisBox;
use transit_core::resonance::{build_zone, ZoneSummary};
use transit_core::sampling::BoxSampler;
use transit_core::stats::{distributions, summarize, tail_exponent, DistributionTable, TailFit, TransportSummary};
use transit_core::transit::estimate_decomposition;
use transit_core::{csvio, TransitDecomposition};

use crate::config::{sibling, MapSpec, OutputFormat, RunConfig};
use crate::error::Result;

/// Everything a decomposition run produces.
#[derive(Debug, Clone, Serialize)]
pub struct DecomposeOutput {
    pub decomposition: TransitDecomposition,
    pub summary: TransportSummary,
    pub tail: Option<TailFit>,
    pub distributions: DistributionTable,
    pub zone: Option<ZoneSummary>,
}

pub fn decompose(cfg: &RunConfig) -> Result<DecomposeOutput> {
    cfg.validate()?;
    let map = cfg.map.as_ref().expect("validated");
    let unit_sampler = |dim: usize| BoxSampler::new(AxisBox::unit(dim), cfg.samples, cfg.sampling_mode());
    let mut zone = None;
    let d = match map {
        MapSpec::Linear { lambda } => {
            estimate_decomposition(&Linear2D::new(*lambda)?, &AxisBox::unit(2), &unit_sampler(2), cfg.t_max, cfg.bins)?
        }
        MapSpec::Diag { eigenvalues } => {
            let n = eigenvalues.len();
            estimate_decomposition(&DiagHyperbolic::new(eigenvalues)?, &AxisBox::unit(n), &unit_sampler(n), cfg.t_max, cfg.bins)?
        }
        MapSpec::Shear => estimate_decomposition(&Shear, &AxisBox::unit(2), &unit_sampler(2), cfg.t_max, cfg.bins)?,
        MapSpec::Henon { k } => {
            let z = build_zone(*k, cfg.n_pixels)?;
            let sampler = BoxSampler::new(lobe_box(&z), cfg.samples, cfg.sampling_mode());
            let d = lobe_decomposition(&z, &sampler, cfg.t_max, cfg.bins)?;
            zone = Some(z.summary());
            d
        }
    };
    let summary = summarize(&d)?;
    let last = d.last_nonzero() as u64;
    let tail = if last >= 20 { tail_exponent(&d, (last / 10).max(2), last).ok() } else { None };
    let distributions = distributions(&d)?;
    Ok(DecomposeOutput { decomposition: d, summary, tail, distributions, zone })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<W: Write>(mut w: W, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes decomposition outputs. CSV: the `j, measure, stderr` table at
/// `out`, the summary at `out.summary.json` and the distribution table at
/// `out.dist.csv`. JSON: one document. Without `out`, the primary output
/// goes to `stdout`.
pub fn write_decompose(cfg: &RunConfig, result: &DecomposeOutput, stdout: &mut dyn Write) -> Result<()> {
    let map = cfg.map.as_ref().map(|m| m.label()).unwrap_or_default();
    let region = cfg.map.as_ref().map(|m| m.region().label()).unwrap_or_default();
    let summary_doc = json!({
        "config": cfg,
        "summary": result.summary,
        "tail": result.tail,
        "zone": result.zone,
    });
    match (cfg.format, &cfg.out) {
        (OutputFormat::Json, out) => {
            let doc = json!({
                "config": cfg,
                "decomposition": result.decomposition,
                "summary": result.summary,
                "tail": result.tail,
                "distributions": result.distributions,
                "zone": result.zone,
            });
            match out {
                Some(path) => write_json(create(path)?, &doc)?,
                None => write_json(stdout, &doc)?,
            }
        }
        (OutputFormat::Csv, Some(path)) => {
            result.decomposition.write_csv(create(path)?, &map, &region, &[cfg.preamble_entry()])?;
            write_json(create(&sibling(path, "summary.json"))?, &summary_doc)?;
            let mut dist = create(&sibling(path, "dist.csv"))?;
            csvio::write_preamble(&mut dist, &[cfg.preamble_entry()])?;
            result.distributions.write_csv(dist, Some(result.decomposition.last_nonzero()))?;
        }
        (OutputFormat::Csv, None) => {
            result.decomposition.write_csv(&mut *stdout, &map, &region, &[cfg.preamble_entry()])?;
        }
    }
    Ok(())
}

/// Builds the zone and writes its boundary (`x, y, which_manifold,
/// iterate_depth`) and summary.
pub fn henon_zone(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<ZoneSummary> {
    cfg.validate()?;
    let Some(MapSpec::Henon { k }) = cfg.map else { unreachable!("validated") };
    let zone = build_zone(k, cfg.n_pixels)?;
    let summary = zone.summary();
    match (cfg.format, &cfg.out) {
        (OutputFormat::Json, out) => {
            let mut boundary = Vec::new();
            zone.write_boundary_csv(&mut boundary, &[])?;
            let (_, body) = csvio::read_preamble(boundary.as_slice())?;
            let rows: Vec<serde_json::Value> = body
                .lines()
                .skip(1)
                .map(|l| {
                    let f: Vec<&str> = l.split(',').collect();
                    json!({
                        "x": f[0].parse::<f64>().unwrap_or(f64::NAN),
                        "y": f[1].parse::<f64>().unwrap_or(f64::NAN),
                        "which_manifold": f[2],
                        "iterate_depth": f[3].parse::<i64>().unwrap_or(0),
                    })
                })
                .collect();
            let doc = json!({ "config": cfg, "summary": summary, "boundary": rows });
            match out {
                Some(path) => write_json(create(path)?, &doc)?,
                None => write_json(stdout, &doc)?,
            }
        }
        (OutputFormat::Csv, Some(path)) => {
            zone.write_boundary_csv(create(path)?, &[cfg.preamble_entry()])?;
            write_json(create(&sibling(path, "summary.json"))?, &json!({ "config": cfg, "summary": summary }))?;
        }
        (OutputFormat::Csv, None) => zone.write_boundary_csv(&mut *stdout, &[cfg.preamble_entry()])?,
    }
    Ok(summary)
}

/// Runs the sweep and writes one row per `k`, ordered by `k`.
pub fn sweep(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let ks = cfg.k_range.expect("validated").values();
    let opts = SweepOptions { n: cfg.n_pixels, t_max: cfg.t_max, value_tol: cfg.value_tol, jobs: cfg.jobs, timing: cfg.timing };
    let rows = quadrature::sweep(&ks, &opts)?;
    let write_csv = |mut w: &mut dyn Write| -> Result<()> {
        csvio::write_preamble(&mut w, &[cfg.preamble_entry()])?;
        quadrature::write_sweep_csv(&mut w, &rows)?;
        Ok(())
    };
    match (cfg.format, &cfg.out) {
        (OutputFormat::Json, out) => {
            let doc = json!({ "config": cfg, "rows": rows });
            match out {
                Some(path) => write_json(create(path)?, &doc)?,
                None => write_json(stdout, &doc)?,
            }
        }
        (OutputFormat::Csv, Some(path)) => {
            let mut f = create(path)?;
            write_csv(&mut f)?;
            f.flush()?;
        }
        (OutputFormat::Csv, None) => write_csv(stdout)?,
    }
    Ok(rows)
}
