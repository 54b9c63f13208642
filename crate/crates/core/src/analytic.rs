//! Closed-form transit decompositions for the linear hyperbolic map, the
//! diagonal hyperbolic map and the shear, all on the unit square (cube).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{Region, Triangle};
use crate::transit::TransitDecomposition;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 1.0) {
        return Err(Error::InvalidSpectrum(format!("expansion rate {lambda} must exceed 1")));
    }
    Ok(())
}

fn check_index(j: i64) -> Result<u64> {
    if j < 1 {
        return Err(Error::InvalidIndex(j));
    }
    Ok(j as u64)
}

/// `mu(T_j) = (lambda - 1)(1 - 1/lambda) / lambda^j` for `(x, y) -> (lambda x, y / lambda)`.
pub fn linear_tj(lambda: f64, j: i64) -> Result<f64> {
    check_lambda(lambda)?;
    diag_tj(lambda, 1.0 / lambda, j)
}

/// `(<t+>_I, <t_transit>_A, <t+>_A)` for the linear map on the unit square.
pub fn linear_average_times(lambda: f64) -> Result<(f64, f64, f64)> {
    check_lambda(lambda)?;
    let exit_i = lambda / (lambda - 1.0);
    let transit = (lambda + 1.0) / (lambda - 1.0);
    let exit_a = 0.5 * (transit + 1.0);
    debug_assert!((exit_a - exit_i).abs() <= 1e-12 * exit_i);
    Ok((exit_i, transit, exit_a))
}

/// `mu(T_j) = (Lambda - 1)(1 - Pi) / Lambda^j` where `Lambda` is the product
/// of the expanding and `Pi` of the contracting eigenvalues.
pub fn diag_tj(big_lambda: f64, big_pi: f64, j: i64) -> Result<f64> {
    check_lambda(big_lambda)?;
    if !(big_pi > 0.0 && big_pi < 1.0) {
        return Err(Error::InvalidSpectrum(format!("contraction product {big_pi} must lie in (0, 1)")));
    }
    let j = check_index(j)?;
    Ok((big_lambda - 1.0) * (1.0 - big_pi) / big_lambda.powf(j as f64))
}

/// `mu(T_1) = 1/4`, `mu(T_j) = 1 / (j (j^2 - 1))` for the shear `(x + y, y)`.
pub fn shear_tj(j: i64) -> Result<f64> {
    let j = check_index(j)?;
    Ok(shear_tj_unchecked(j))
}

fn shear_tj_unchecked(j: u64) -> f64 {
    if j == 1 {
        0.25
    } else {
        let j = j as f64;
        1.0 / (j * (j * j - 1.0))
    }
}

/// Exact geometry of the shear's entry set `0 <= x < y <= 1` and its
/// exit-time wedges `1 - j y < x < 1 - (j - 1) y`.
#[derive(Debug, Clone)]
pub struct ShearGeometry {
    pub entry: Triangle,
}

impl ShearGeometry {
    pub fn mu_entry(&self) -> f64 {
        0.5
    }

    pub fn in_entry(&self, x: f64, y: f64) -> bool {
        (0.0..=1.0).contains(&y) && x >= 0.0 && x < y
    }

    pub fn in_tj(&self, j: u64, x: f64, y: f64) -> bool {
        j >= 1 && self.in_entry(x, y) && 1.0 - j as f64 * y < x && x < 1.0 - (j as f64 - 1.0) * y
    }

    /// Exit time of an entry point, read off the wedge it lies in.
    pub fn exit_time(&self, x: f64, y: f64) -> Option<u64> {
        if !self.in_entry(x, y) || y <= 0.0 {
            return None;
        }
        Some(((1.0 - x) / y).floor() as u64 + 1)
    }
}

pub fn shear_entry_geometry() -> ShearGeometry {
    let entry = Triangle::new([0.0, 0.0], [1.0, 1.0], [0.0, 1.0]).expect("non-degenerate triangle");
    debug_assert_eq!(entry.measure(), Some(0.5));
    ShearGeometry { entry }
}

/// A model with a known transit decomposition on a region of unit measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum AnalyticModel {
    Linear { lambda: f64 },
    Diag { big_lambda: f64, big_pi: f64 },
    Shear,
}

/// Totals of the decomposition; `None` marks a divergent sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSums {
    pub measure: f64,
    pub first: f64,
    pub second: Option<f64>,
}

impl AnalyticModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AnalyticModel::Linear { lambda } => check_lambda(lambda),
            AnalyticModel::Diag { big_lambda, big_pi } => diag_tj(big_lambda, big_pi, 1).map(|_| ()),
            AnalyticModel::Shear => Ok(()),
        }
    }

    fn lambda_pi(&self) -> Option<(f64, f64)> {
        match *self {
            AnalyticModel::Linear { lambda } => Some((lambda, 1.0 / lambda)),
            AnalyticModel::Diag { big_lambda, big_pi } => Some((big_lambda, big_pi)),
            AnalyticModel::Shear => None,
        }
    }

    /// `mu(T_j)`, zero for `j = 0`.
    pub fn measure(&self, j: u64) -> f64 {
        if j == 0 {
            return 0.0;
        }
        match self.lambda_pi() {
            Some((l, p)) => (l - 1.0) * (1.0 - p) / l.powf(j as f64),
            None => shear_tj_unchecked(j),
        }
    }

    pub fn mu_region(&self) -> f64 {
        1.0
    }

    pub fn mu_entry(&self) -> f64 {
        match self.lambda_pi() {
            Some((_, p)) => 1.0 - p,
            None => 0.5,
        }
    }

    /// Closed-form infinite sums of `mu(T_j)`, `j mu(T_j)`, `j^2 mu(T_j)`.
    pub fn sums(&self) -> MomentSums {
        match self.lambda_pi() {
            Some((l, p)) => MomentSums {
                measure: 1.0 - p,
                first: l * (1.0 - p) / (l - 1.0),
                second: Some((1.0 - p) * l * (l + 1.0) / ((l - 1.0) * (l - 1.0))),
            },
            None => MomentSums { measure: 0.5, first: 1.0, second: None },
        }
    }

    /// Closed-form partial sums over `j <= J`.
    pub fn partial_sums(&self, big_j: u64) -> (f64, f64) {
        let n = big_j as f64;
        match self.lambda_pi() {
            Some((l, p)) => {
                let r = 1.0 / l;
                let rn = r.powf(n);
                let s0 = (1.0 - p) * (1.0 - rn);
                let s1 = (l - 1.0) * (1.0 - p) * r * (1.0 - (n + 1.0) * rn + n * rn * r) / ((1.0 - r) * (1.0 - r));
                (s0, s1)
            }
            None => {
                if big_j == 0 {
                    return (0.0, 0.0);
                }
                (0.5 - 1.0 / (2.0 * n * (n + 1.0)), 1.0 - 0.5 * (1.0 / n + 1.0 / (n + 1.0)))
            }
        }
    }

    /// `mu(A_acc) = sum_j j mu(T_j)`.
    pub fn mu_accessible(&self) -> f64 {
        self.sums().first
    }

    pub fn first_moment_converges(&self) -> bool {
        true
    }

    pub fn second_moment_converges(&self) -> bool {
        self.sums().second.is_some()
    }

    /// Decomposition truncated at `J`, with the tail beyond `J` reported as censored.
    pub fn decomposition(&self, big_j: u64) -> Result<TransitDecomposition> {
        self.validate()?;
        if big_j == 0 {
            return Err(Error::InvalidParameter("J must be at least 1".into()));
        }
        let bins: Vec<f64> = (1..=big_j).map(|j| self.measure(j)).collect();
        let (s0, _) = self.partial_sums(big_j);
        let censored = (self.mu_entry() - s0).max(0.0);
        Ok(TransitDecomposition::exact(Some(self.mu_region()), self.mu_entry(), bins, censored))
    }
}
