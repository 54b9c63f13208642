//! The map zoo: Hénon's quadratic map, linear hyperbolic maps, the trivial
//! shear and the cat map on the unit torus.
//!
//! Every map is an immutable value object implementing [`VolumeMap`]. All of
//! them preserve Lebesgue measure, so `|det J| = 1` everywhere.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Coordinates beyond this magnitude are reported as an overflow escape.
pub const OVERFLOW_LIMIT: f64 = 1e150;

/// A point in phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint(SmallVec<[f64; 4]>);

impl PhasePoint {
    pub fn new(coords: &[f64]) -> Self {
        PhasePoint(SmallVec::from_slice(coords))
    }

    pub fn xy(x: f64, y: f64) -> Self {
        PhasePoint(SmallVec::from_slice(&[x, y]))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<(f64, f64)> for PhasePoint {
    fn from((x, y): (f64, f64)) -> Self {
        PhasePoint::xy(x, y)
    }
}

/// A measure-preserving invertible map of phase space.
pub trait VolumeMap: Send + Sync {
    fn dim(&self) -> usize;

    fn forward(&self, p: &PhasePoint) -> Result<PhasePoint>;

    fn inverse(&self, p: &PhasePoint) -> Result<PhasePoint>;

    fn jacobian(&self, p: &PhasePoint) -> DMatrix<f64>;

    /// Orbits with any coordinate beyond this radius are considered escaped.
    fn escape_radius(&self) -> f64 {
        OVERFLOW_LIMIT
    }

    /// Short human-readable description, used in output metadata.
    fn label(&self) -> String;
}

fn check_dim(p: &PhasePoint, expected: usize) -> Result<()> {
    if p.dim() != expected {
        return Err(Error::DimensionMismatch { expected, got: p.dim() });
    }
    Ok(())
}

fn guard(p: PhasePoint) -> Result<PhasePoint> {
    if !p.is_finite() || p.max_abs() > OVERFLOW_LIMIT {
        return Err(Error::Escaped { radius: OVERFLOW_LIMIT });
    }
    Ok(p)
}

/// Parameter of Hénon's area-preserving quadratic map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HenonParams {
    pub k: f64,
}

/// Hénon's quadratic map `(x, y) -> (y - k + x^2, -x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Henon {
    pub k: f64,
}

impl Henon {
    pub fn new(k: f64) -> Self {
        Henon { k }
    }

    pub fn params(&self) -> HenonParams {
        HenonParams { k: self.k }
    }

    #[inline(always)]
    pub fn step(&self, x: f64, y: f64) -> (f64, f64) {
        (y - self.k + x * x, -x)
    }

    #[inline(always)]
    pub fn step_back(&self, x: f64, y: f64) -> (f64, f64) {
        (-y, x + self.k - y * y)
    }

    /// `x_s = 1 + sqrt(1 + k)`, the saddle abscissa. `None` when `k <= -1`.
    pub fn saddle_abscissa(&self) -> Option<f64> {
        (self.k > -1.0).then(|| 1.0 + (1.0 + self.k).sqrt())
    }
}

impl VolumeMap for Henon {
    fn dim(&self) -> usize {
        2
    }

    fn forward(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, 2)?;
        let (x, y) = self.step(p.x(), p.y());
        guard(PhasePoint::xy(x, y))
    }

    fn inverse(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, 2)?;
        let (x, y) = self.step_back(p.x(), p.y());
        guard(PhasePoint::xy(x, y))
    }

    fn jacobian(&self, p: &PhasePoint) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0 * p.x(), 1.0, -1.0, 0.0])
    }

    /// Ten times the saddle abscissa: every bounded orbit stays inside
    /// `|x|, |y| < x_s`.
    fn escape_radius(&self) -> f64 {
        self.saddle_abscissa().map_or(OVERFLOW_LIMIT, |xs| 10.0 * xs)
    }

    fn label(&self) -> String {
        format!("henon(k={})", self.k)
    }
}

pub fn henon_forward(p: &PhasePoint, params: HenonParams) -> Result<PhasePoint> {
    Henon::new(params.k).forward(p)
}

pub fn henon_inverse(p: &PhasePoint, params: HenonParams) -> Result<PhasePoint> {
    Henon::new(params.k).inverse(p)
}

/// Elliptic and saddle fixed points, `z = (x, -x)` with `x = 1 -/+ sqrt(1 + k)`.
pub fn henon_fixed_points(params: HenonParams) -> Result<(PhasePoint, PhasePoint)> {
    if !(params.k > -1.0) {
        return Err(Error::NoRealFixedPoints { k: params.k });
    }
    let r = (1.0 + params.k).sqrt();
    let xe = 1.0 - r;
    let xs = 1.0 + r;
    Ok((PhasePoint::xy(xe, -xe), PhasePoint::xy(xs, -xs)))
}

/// Eigenvalues and unit eigenvectors of a planar saddle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenstructure {
    /// Expanding eigenvalue, `> 1`. The contracting one is its reciprocal.
    pub lambda: f64,
    pub unstable: [f64; 2],
    pub stable: [f64; 2],
}

impl Eigenstructure {
    pub fn contracting(&self) -> f64 {
        1.0 / self.lambda
    }
}

/// Eigenstructure of the Jacobian `[[2x_s, 1], [-1, 0]]` at the saddle.
///
/// The directions are normalised to point towards negative `x` for the
/// unstable vector and positive `y` for the stable one, i.e. along the
/// left-going branches that bound the resonance zone.
pub fn henon_saddle_eigenstructure(params: HenonParams) -> Result<Eigenstructure> {
    if !(params.k > -1.0) {
        return Err(Error::NoRealFixedPoints { k: params.k });
    }
    let xs = 1.0 + (1.0 + params.k).sqrt();
    let disc = (xs * xs - 1.0).sqrt();
    let lambda = xs + disc;
    if !(lambda > 1.0) {
        // k = -1 exactly is rejected above; this only guards rounding.
        return Err(Error::InvalidSpectrum(format!("saddle is degenerate at k = {}", params.k)));
    }
    // (J - lambda) v = 0  =>  v = (1, lambda - 2 x_s) = (1, -1/lambda)
    let u = normalize([-1.0, 1.0 / lambda]);
    // contracting eigenvalue 1/lambda  =>  v = (1, -lambda)
    let s = normalize([-1.0 / lambda, 1.0]);
    Ok(Eigenstructure { lambda, unstable: u, stable: s })
}

fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// The reversor `R(x, y) = (-y, -x)`; `R H R = H^-1` and its fixed set is `x + y = 0`.
pub fn henon_reversor(p: &PhasePoint) -> PhasePoint {
    PhasePoint::xy(-p.y(), -p.x())
}

/// Planar linear saddle `(x, y) -> (lambda x, y / lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear2D {
    lambda: f64,
}

impl Linear2D {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::InvalidSpectrum(format!("linear map needs lambda > 1, got {lambda}")));
        }
        Ok(Linear2D { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl VolumeMap for Linear2D {
    fn dim(&self) -> usize {
        2
    }

    fn forward(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, 2)?;
        guard(PhasePoint::xy(self.lambda * p.x(), p.y() / self.lambda))
    }

    fn inverse(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, 2)?;
        guard(PhasePoint::xy(p.x() / self.lambda, self.lambda * p.y()))
    }

    fn jacobian(&self, _p: &PhasePoint) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[self.lambda, 0.0, 0.0, 1.0 / self.lambda])
    }

    fn label(&self) -> String {
        format!("linear(lambda={})", self.lambda)
    }
}

pub fn linear2d_forward(p: &PhasePoint, lambda: f64) -> Result<PhasePoint> {
    Linear2D::new(lambda)?.forward(p)
}

/// Diagonal hyperbolic map: expanding eigenvalues first, then contracting ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagHyperbolic {
    eigenvalues: Vec<f64>,
    expanding: usize,
}

impl DiagHyperbolic {
    /// Requires `lambda_1..lambda_d > 1` followed by `mu_{d+1}..mu_n` in
    /// `(0, 1)`, with `d >= 1`, `n - d >= 1`, and total product 1.
    pub fn new(eigenvalues: &[f64]) -> Result<Self> {
        let n = eigenvalues.len();
        if n < 2 {
            return Err(Error::InvalidSpectrum("need at least two eigenvalues".into()));
        }
        let expanding = eigenvalues.iter().take_while(|&&v| v > 1.0).count();
        let contracting_ok = eigenvalues[expanding..].iter().all(|&v| v > 0.0 && v < 1.0);
        if expanding == 0 || expanding == n || !contracting_ok {
            return Err(Error::InvalidSpectrum(format!(
                "expected expanding eigenvalues (> 1) followed by contracting ones in (0, 1), got {eigenvalues:?}"
            )));
        }
        let volume: f64 = eigenvalues.iter().product();
        if (volume - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalue product is {volume}, not 1 (map must preserve volume)"
            )));
        }
        Ok(DiagHyperbolic { eigenvalues: eigenvalues.to_vec(), expanding })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Total expansion, the product of the expanding eigenvalues.
    pub fn expansion(&self) -> f64 {
        self.eigenvalues[..self.expanding].iter().product()
    }

    /// Total contraction, the product of the contracting eigenvalues.
    pub fn contraction(&self) -> f64 {
        self.eigenvalues[self.expanding..].iter().product()
    }
}

impl VolumeMap for DiagHyperbolic {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn forward(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, self.dim())?;
        let c: SmallVec<[f64; 4]> =
            p.coords().iter().zip(&self.eigenvalues).map(|(x, l)| x * l).collect();
        guard(PhasePoint(c))
    }

    fn inverse(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, self.dim())?;
        let c: SmallVec<[f64; 4]> =
            p.coords().iter().zip(&self.eigenvalues).map(|(x, l)| x / l).collect();
        guard(PhasePoint(c))
    }

    fn jacobian(&self, _p: &PhasePoint) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues))
    }

    fn label(&self) -> String {
        format!("diag(eigenvalues={:?})", self.eigenvalues)
    }
}

pub fn diag_forward(p: &PhasePoint, eigenvalues: &[f64]) -> Result<PhasePoint> {
    DiagHyperbolic::new(eigenvalues)?.forward(p)
}

/// The trivial shear `y' = y, x' = x + y'`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Shear;

impl VolumeMap for Shear {
    fn dim(&self) -> usize {
        2
    }

    fn forward(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, 2)?;
        guard(PhasePoint::xy(p.x() + p.y(), p.y()))
    }

    fn inverse(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, 2)?;
        guard(PhasePoint::xy(p.x() - p.y(), p.y()))
    }

    fn jacobian(&self, _p: &PhasePoint) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])
    }

    fn label(&self) -> String {
        "shear".into()
    }
}

pub fn shear_forward(p: &PhasePoint) -> Result<PhasePoint> {
    Shear.forward(p)
}

/// Arnold's cat map `(x, y) -> (x + y, x + 2y) mod 1` on the unit torus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CatMap;

impl VolumeMap for CatMap {
    fn dim(&self) -> usize {
        2
    }

    fn forward(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, 2)?;
        let (x, y) = (p.x(), p.y());
        Ok(PhasePoint::xy((x + y).rem_euclid(1.0), (x + 2.0 * y).rem_euclid(1.0)))
    }

    fn inverse(&self, p: &PhasePoint) -> Result<PhasePoint> {
        check_dim(p, 2)?;
        let (x, y) = (p.x(), p.y());
        Ok(PhasePoint::xy((2.0 * x - y).rem_euclid(1.0), (y - x).rem_euclid(1.0)))
    }

    fn jacobian(&self, _p: &PhasePoint) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0])
    }

    fn label(&self) -> String {
        "cat".into()
    }
}
