//! Measurable regions of phase space with deterministic membership tests.

use robust::{orient2d, Coord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A region of phase space, given by its membership predicate.
pub trait Region: Send + Sync {
    fn dim(&self) -> usize;

    fn contains(&self, p: &[f64]) -> bool;

    /// Lebesgue measure when it is known in closed form.
    fn measure(&self) -> Option<f64> {
        None
    }

    fn bounding_box(&self) -> Option<AxisBox> {
        None
    }

    /// True if every point with some `|coordinate| > radius` is in the region.
    fn contains_far_field(&self, _radius: f64) -> bool {
        false
    }

    fn label(&self) -> String;
}

/// Closed axis-aligned box `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidRegion("box corners must have equal, nonzero length".into()));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidRegion(format!("box corners out of order: {lo:?} > {hi:?}")));
        }
        Ok(AxisBox { lo: lo.to_vec(), hi: hi.to_vec() })
    }

    /// The unit hypercube `[0, 1]^n`.
    pub fn unit(n: usize) -> Self {
        AxisBox { lo: vec![0.0; n], hi: vec![1.0; n] }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Largest absolute coordinate over the box.
    pub fn extent(&self) -> f64 {
        self.lo.iter().chain(&self.hi).fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

impl Region for AxisBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.lo.len()
            && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    fn measure(&self) -> Option<f64> {
        Some(self.volume())
    }

    fn bounding_box(&self) -> Option<AxisBox> {
        Some(self.clone())
    }

    fn label(&self) -> String {
        format!("box(lo={:?}, hi={:?})", self.lo, self.hi)
    }
}

fn coord(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Closed triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [[f64; 2]; 3],
}

impl Triangle {
    pub fn new(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Result<Self> {
        if orient2d(coord(a), coord(b), coord(c)) == 0.0 {
            return Err(Error::InvalidRegion("degenerate triangle".into()));
        }
        Ok(Triangle { vertices: [a, b, c] })
    }
}

impl Region for Triangle {
    fn dim(&self) -> usize {
        2
    }

    fn contains(&self, p: &[f64]) -> bool {
        if p.len() != 2 {
            return false;
        }
        let q = coord([p[0], p[1]]);
        let [a, b, c] = self.vertices.map(coord);
        let d1 = orient2d(a, b, q);
        let d2 = orient2d(b, c, q);
        let d3 = orient2d(c, a, q);
        let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
        let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
        !(neg && pos)
    }

    fn measure(&self) -> Option<f64> {
        let [a, b, c] = self.vertices;
        Some(0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs())
    }

    fn bounding_box(&self) -> Option<AxisBox> {
        bbox_of(&self.vertices)
    }

    fn label(&self) -> String {
        format!("triangle({:?})", self.vertices)
    }
}

fn bbox_of(v: &[[f64; 2]]) -> Option<AxisBox> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in v {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    AxisBox::new(&lo, &hi).ok()
}

/// Signed shoelace area of a closed polyline (positive when counter-clockwise).
pub fn shoelace(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    // Shift to the first vertex to limit cancellation.
    let o = v[0];
    let mut s = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        s += (a[0] - o[0]) * (b[1] - o[1]) - (b[0] - o[0]) * (a[1] - o[1]);
    }
    0.5 * s
}

const SLABS_PER_EDGE: usize = 4;

/// Simple polygon with even-odd membership.
///
/// Edges are bucketed into horizontal slabs so a membership query only tests
/// the edges that straddle the query's `y`.
#[derive(Debug, Clone)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
    bbox: AxisBox,
    y0: f64,
    slab_height: f64,
    slabs: Vec<Vec<u32>>,
}

impl Polygon {
    /// Builds the polygon, rejecting fewer than three vertices, non-finite
    /// coordinates and self-intersecting boundaries.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let poly = Self::new_unchecked(vertices)?;
        if let Some((i, j)) = poly.find_self_intersection() {
            return Err(Error::InvalidRegion(format!("polygon edges {i} and {j} intersect")));
        }
        Ok(poly)
    }

    /// Builds the polygon without the simplicity check.
    pub fn new_unchecked(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidRegion("polygon needs at least three vertices".into()));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidRegion("polygon has non-finite vertices".into()));
        }
        let bbox = bbox_of(&vertices).expect("finite vertices");
        let n = vertices.len();
        let nslabs = (n / SLABS_PER_EDGE).clamp(1, 1 << 16);
        let y0 = bbox.lo[1];
        let span = (bbox.hi[1] - bbox.lo[1]).max(f64::MIN_POSITIVE);
        let slab_height = span / nslabs as f64;
        let mut slabs = vec![Vec::new(); nslabs];
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let lo = slab_index(a[1].min(b[1]), y0, slab_height, nslabs);
            let hi = slab_index(a[1].max(b[1]), y0, slab_height, nslabs);
            for s in &mut slabs[lo..=hi] {
                s.push(i as u32);
            }
        }
        Ok(Polygon { vertices, bbox, y0, slab_height, slabs })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    fn edge(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        (self.vertices[i], self.vertices[(i + 1) % self.vertices.len()])
    }

    /// Returns the indices of two non-adjacent edges that touch, if any.
    pub fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        // Uniform grid over the bounding box, about one edge per cell.
        let side = ((n as f64).sqrt().ceil() as usize).max(1);
        let w = (self.bbox.hi[0] - self.bbox.lo[0]).max(f64::MIN_POSITIVE) / side as f64;
        let h = (self.bbox.hi[1] - self.bbox.lo[1]).max(f64::MIN_POSITIVE) / side as f64;
        let cell = |v: f64, lo: f64, size: f64| (((v - lo) / size) as usize).min(side - 1);
        let mut grid: Vec<Vec<u32>> = vec![Vec::new(); side * side];
        for i in 0..n {
            let (a, b) = self.edge(i);
            let (cx0, cx1) = (cell(a[0].min(b[0]), self.bbox.lo[0], w), cell(a[0].max(b[0]), self.bbox.lo[0], w));
            let (cy0, cy1) = (cell(a[1].min(b[1]), self.bbox.lo[1], h), cell(a[1].max(b[1]), self.bbox.lo[1], h));
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    grid[cy * side + cx].push(i as u32);
                }
            }
        }
        for bucket in &grid {
            for (ai, &i) in bucket.iter().enumerate() {
                for &j in &bucket[ai + 1..] {
                    let (i, j) = (i as usize, j as usize);
                    let adjacent = j == i + 1 || i == j + 1 || (i == 0 && j == n - 1) || (j == 0 && i == n - 1);
                    if adjacent {
                        continue;
                    }
                    let (a, b) = self.edge(i);
                    let (c, d) = self.edge(j);
                    if segments_intersect(a, b, c, d) {
                        return Some((i.min(j), i.max(j)));
                    }
                }
            }
        }
        None
    }
}

fn slab_index(y: f64, y0: f64, height: f64, n: usize) -> usize {
    let s = ((y - y0) / height).floor();
    if s < 0.0 {
        0
    } else {
        (s as usize).min(n - 1)
    }
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Exact segment intersection test (touching counts).
pub fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient2d(coord(c), coord(d), coord(a));
    let d2 = orient2d(coord(c), coord(d), coord(b));
    let d3 = orient2d(coord(a), coord(b), coord(c));
    let d4 = orient2d(coord(a), coord(b), coord(d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

impl Polygon {
    /// Even-odd membership; points exactly on an edge count as inside.
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        if x < self.bbox.lo[0] || x > self.bbox.hi[0] || y < self.bbox.lo[1] || y > self.bbox.hi[1] {
            return false;
        }
        let slab = slab_index(y, self.y0, self.slab_height, self.slabs.len());
        let q = Coord { x, y };
        let mut inside = false;
        for &i in &self.slabs[slab] {
            let (a, b) = self.edge(i as usize);
            if (a[1] > y) != (b[1] > y) {
                let o = orient2d(coord(a), coord(b), q);
                if o == 0.0 {
                    return true;
                }
                // Upward edge: crossing when q is left of it; downward: right.
                if (o > 0.0) == (b[1] > a[1]) {
                    inside = !inside;
                }
            } else if a[1] == y && b[1] == y && x >= a[0].min(b[0]) && x <= a[0].max(b[0]) {
                return true;
            }
        }
        inside
    }
}

impl Region for Polygon {
    fn dim(&self) -> usize {
        2
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.len() == 2 && self.contains_xy(p[0], p[1])
    }

    fn measure(&self) -> Option<f64> {
        Some(self.signed_area().abs())
    }

    fn bounding_box(&self) -> Option<AxisBox> {
        Some(self.bbox.clone())
    }

    fn label(&self) -> String {
        format!("polygon({} vertices)", self.vertices.len())
    }
}

/// Intersection of closed half-spaces `normal . x <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfPlaneIntersection {
    pub dim: usize,
    pub constraints: Vec<(Vec<f64>, f64)>,
}

impl HalfPlaneIntersection {
    pub fn new(dim: usize, constraints: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if constraints.iter().any(|(n, _)| n.len() != dim) {
            return Err(Error::InvalidRegion("constraint normal has the wrong dimension".into()));
        }
        Ok(HalfPlaneIntersection { dim, constraints })
    }
}

impl Region for HalfPlaneIntersection {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim
            && self
                .constraints
                .iter()
                .all(|(n, b)| n.iter().zip(p).map(|(a, x)| a * x).sum::<f64>() <= *b)
    }

    fn label(&self) -> String {
        format!("halfplanes({} constraints)", self.constraints.len())
    }
}

/// Complement of a region.
#[derive(Debug, Clone, Copy)]
pub struct Outside<'a, R: Region + ?Sized>(pub &'a R);

impl<R: Region + ?Sized> Region for Outside<'_, R> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn contains(&self, p: &[f64]) -> bool {
        !self.0.contains(p)
    }

    fn contains_far_field(&self, radius: f64) -> bool {
        self.0.bounding_box().is_some_and(|b| b.extent() <= radius)
    }

    fn label(&self) -> String {
        format!("complement of {}", self.0.label())
    }
}

/// Owned complement, for targets built at run time.
pub struct Complement(pub Box<dyn Region>);

impl Region for Complement {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn contains(&self, p: &[f64]) -> bool {
        !self.0.contains(p)
    }

    fn contains_far_field(&self, radius: f64) -> bool {
        Outside(self.0.as_ref()).contains_far_field(radius)
    }

    fn label(&self) -> String {
        format!("complement of {}", self.0.label())
    }
}
