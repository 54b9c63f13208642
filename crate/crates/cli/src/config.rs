//! Run configuration: everything that determines a command's output.
//!
//! Every output file embeds the configuration that produced it, as a
//! `# config: {...}` preamble line in CSV files and a top-level `config`
//! field in JSON files, so a run can be identified and repeated from its
//! output alone.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transit_core::csvio;
use transit_core::resonance::{K_MAX, K_MIN};
use transit_core::sampling::{SamplingMode, DEFAULT_SEED};

use crate::error::{CliError, Result};

/// Metadata key of the embedded configuration in CSV preambles.
pub const CONFIG_KEY: &str = "config";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Verify,
    Decompose,
    HenonZone,
    Sweep,
}

/// Map selection with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum MapSpec {
    /// `(x, y) -> (lambda x, y / lambda)`.
    Linear { lambda: f64 },
    /// Diagonal map with the given eigenvalues, expanding ones first.
    Diag { eigenvalues: Vec<f64> },
    /// `(x, y) -> (x + y, y)`.
    Shear,
    /// Quadratic Hénon map `(x, y) -> (y - k + x^2, -x)`.
    Henon { k: f64 },
}

impl MapSpec {
    pub fn label(&self) -> String {
        match self {
            MapSpec::Linear { lambda } => format!("linear(lambda={lambda})"),
            MapSpec::Diag { eigenvalues } => format!("diag(eigenvalues={eigenvalues:?})"),
            MapSpec::Shear => "shear".into(),
            MapSpec::Henon { k } => format!("henon(k={k})"),
        }
    }

    /// The region whose transport the map is studied on.
    pub fn region(&self) -> RegionSpec {
        match self {
            MapSpec::Linear { .. } | MapSpec::Shear => RegionSpec::UnitBox { dim: 2 },
            MapSpec::Diag { eigenvalues } => RegionSpec::UnitBox { dim: eigenvalues.len() },
            MapSpec::Henon { .. } => RegionSpec::ResonanceZone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegionSpec {
    /// `[0, 1]^dim`.
    UnitBox { dim: usize },
    /// The fixed-point resonance zone of the Hénon map, entered through its
    /// incoming lobe.
    ResonanceZone,
}

impl RegionSpec {
    pub fn label(&self) -> String {
        match self {
            RegionSpec::UnitBox { dim } => format!("unit-box(dim={dim})"),
            RegionSpec::ResonanceZone => "resonance-zone".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Random,
    Grid,
}

/// Parameter range of a sweep: `steps` equally spaced values from `k_min`
/// to `k_max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRange {
    pub k_min: f64,
    pub k_max: f64,
    pub steps: usize,
}

impl KRange {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.k_min];
        }
        let dk = (self.k_max - self.k_min) / (self.steps - 1) as f64;
        // Rounded to 12 decimals so that grid values print as typed.
        let round = |k: f64| (k * 1e12).round() / 1e12;
        (0..self.steps).map(|i| if i + 1 == self.steps { self.k_max } else { round(self.k_min + dk * i as f64) }).collect()
    }
}

pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_BINS: u64 = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub map: Option<MapSpec>,
    pub region: Option<RegionSpec>,
    /// Lobe resolution `N`: pixels across the lobe.
    pub n_pixels: usize,
    pub t_max: u64,
    pub value_tol: f64,
    /// Number of tabulated exit-time bins `J`.
    pub bins: u64,
    pub samples: u64,
    pub seed: u64,
    pub mode: Mode,
    pub k_range: Option<KRange>,
    /// Worker threads; `None` uses all available cores. Results do not
    /// depend on it.
    pub jobs: Option<usize>,
    /// Record wall-clock time per sweep row (makes output non-reproducible).
    pub timing: bool,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl RunConfig {
    /// Defaults for a subcommand, before flags are applied.
    pub fn new(subcommand: Subcommand) -> Self {
        RunConfig {
            subcommand,
            map: None,
            region: None,
            n_pixels: transit_core::quadrature::DEFAULT_N,
            t_max: transit_core::quadrature::DEFAULT_T_MAX,
            value_tol: transit_core::quadrature::DEFAULT_VALUE_TOL,
            bins: DEFAULT_BINS,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            mode: Mode::Random,
            k_range: None,
            jobs: None,
            timing: false,
            out: None,
            format: OutputFormat::Csv,
        }
    }

    pub fn sampling_mode(&self) -> SamplingMode {
        match self.mode {
            Mode::Random => SamplingMode::Random { seed: self.seed },
            Mode::Grid => SamplingMode::Grid,
        }
    }

    /// Checks parameter ranges, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Err(CliError::Config { field: field.into(), message });
        if self.t_max == 0 {
            return bad("t_max", "must be at least 1".into());
        }
        if self.bins == 0 {
            return bad("bins", "must be at least 1".into());
        }
        if self.samples == 0 {
            return bad("samples", "must be at least 1".into());
        }
        if !(self.value_tol > 0.0 && self.value_tol < 1.0) {
            return bad("value_tol", format!("must lie in (0, 1), got {}", self.value_tol));
        }
        if self.jobs == Some(0) {
            return bad("jobs", "must be at least 1".into());
        }
        let needs_pixels = matches!(self.subcommand, Subcommand::HenonZone | Subcommand::Sweep)
            || matches!(self.map, Some(MapSpec::Henon { .. }));
        if needs_pixels && (self.n_pixels < 100 || self.n_pixels % 2 != 0) {
            return bad("n_pixels", format!("must be even and at least 100, got {}", self.n_pixels));
        }
        let check_k = |field: &str, k: f64| -> Result<()> {
            if !(K_MIN..=K_MAX).contains(&k) {
                return bad(field, format!("k = {k} outside the supported range [{K_MIN}, {K_MAX}]"));
            }
            Ok(())
        };
        match &self.map {
            Some(MapSpec::Linear { lambda }) if !(*lambda > 1.0 && lambda.is_finite()) => {
                return bad("lambda", format!("must exceed 1, got {lambda}"));
            }
            Some(MapSpec::Diag { eigenvalues }) => {
                if let Err(e) = transit_core::maps::DiagHyperbolic::new(eigenvalues) {
                    return bad("eigenvalues", e.to_string());
                }
            }
            Some(MapSpec::Henon { k }) => check_k("k", *k)?,
            _ => {}
        }
        if let Some(r) = &self.k_range {
            check_k("k_min", r.k_min)?;
            check_k("k_max", r.k_max)?;
            if r.steps == 0 {
                return bad("steps", "must be at least 1".into());
            }
            if r.k_max < r.k_min {
                return bad("k_max", format!("must not be below k_min = {}", r.k_min));
            }
        }
        if matches!(self.subcommand, Subcommand::Decompose) && self.map.is_none() {
            return bad("map", "decompose needs a map".into());
        }
        if matches!(self.subcommand, Subcommand::HenonZone) && !matches!(self.map, Some(MapSpec::Henon { .. })) {
            return bad("map", "henon-zone needs a Hénon parameter k".into());
        }
        if matches!(self.subcommand, Subcommand::Sweep) && self.k_range.is_none() {
            return bad("k_range", "sweep needs k_min, k_max and steps".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// Preamble entry carrying this configuration.
    pub fn preamble_entry(&self) -> (String, String) {
        (CONFIG_KEY.to_string(), self.to_json())
    }
}

/// Recovers the configuration embedded in an output file (CSV or JSON).
pub fn extract_config(text: &str) -> Result<RunConfig> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        #[derive(Deserialize)]
        struct Wrapper {
            config: RunConfig,
        }
        let w: Wrapper = serde_json::from_str(trimmed)?;
        return Ok(w.config);
    }
    let (meta, _) = csvio::read_preamble(std::io::BufReader::new(text.as_bytes()))?;
    let raw = csvio::lookup(&meta, CONFIG_KEY)
        .ok_or_else(|| CliError::Config { field: CONFIG_KEY.into(), message: "no embedded configuration".into() })?;
    Ok(serde_json::from_str(raw)?)
}

pub fn read_config_file(path: &Path) -> Result<RunConfig> {
    let file = std::fs::File::open(path)?;
    let mut text = String::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        text.push_str(&line);
        text.push('\n');
    }
    extract_config(&text)
}

/// A companion file next to `out`: `run.csv` -> `run.<suffix>`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_range_values_hit_both_ends() {
        let r = KRange { k_min: 0.2, k_max: 0.4, steps: 3 };
        assert_eq!(r.values(), vec![0.2, 0.3, 0.4]);
        assert_eq!(KRange { k_min: 1.0, k_max: 2.0, steps: 1 }.values(), vec![1.0]);
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = RunConfig::new(Subcommand::Decompose);
        c.map = Some(MapSpec::Linear { lambda: 0.5 });
        match c.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "lambda"),
            other => panic!("{other:?}"),
        }
        c.map = Some(MapSpec::Henon { k: 7.0 });
        assert!(matches!(c.validate(), Err(CliError::Config { field, .. }) if field == "k"));
        c.map = Some(MapSpec::Diag { eigenvalues: vec![2.0, 0.6] });
        assert!(matches!(c.validate(), Err(CliError::Config { field, .. }) if field == "eigenvalues"));
        c.map = Some(MapSpec::Shear);
        c.t_max = 0;
        assert!(matches!(c.validate(), Err(CliError::Config { field, .. }) if field == "t_max"));
    }

    #[test]
    fn config_round_trips_through_csv_and_json() {
        let mut c = RunConfig::new(Subcommand::Sweep);
        c.k_range = Some(KRange { k_min: 0.1, k_max: 0.7, steps: 4 });
        c.value_tol = 1.0 / 3.0;
        c.out = Some("a/b.csv".into());
        let mut csv_text = Vec::new();
        csvio::write_preamble(&mut csv_text, &[c.preamble_entry(), ("x".into(), "1".into())]).unwrap();
        csv_text.extend_from_slice(b"k,mu_A\n0.1,2\n");
        assert_eq!(extract_config(std::str::from_utf8(&csv_text).unwrap()).unwrap(), c);
        let json = serde_json::json!({ "config": c, "rows": [] }).to_string();
        assert_eq!(extract_config(&json).unwrap(), c);
        assert!(extract_config("k,mu_A\n").is_err());
    }
}
