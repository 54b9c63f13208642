//! Reproducible uniform sampling of axis-aligned boxes.
//!
//! Samples are generated in fixed-size chunks. Random chunks use their own
//! ChaCha stream derived from the seed, so the sample set does not depend on
//! how chunks are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::maps::PhasePoint;
use crate::region::AxisBox;

pub const DEFAULT_SEED: u64 = 0x5eed_1996;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SamplingMode {
    /// Cell centres of a regular grid.
    Grid,
    /// Independent uniform draws.
    Random { seed: u64 },
}

impl SamplingMode {
    pub fn seed(&self) -> Option<u64> {
        match self {
            SamplingMode::Grid => None,
            SamplingMode::Random { seed } => Some(*seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSampler {
    pub bbox: AxisBox,
    pub mode: SamplingMode,
    per_axis: u64,
    total: u64,
}

impl BoxSampler {
    /// For grid mode the sample count is rounded to the nearest `m^d`.
    pub fn new(bbox: AxisBox, samples: u64, mode: SamplingMode) -> Self {
        let d = bbox.lo.len() as u32;
        match mode {
            SamplingMode::Grid => {
                let m = ((samples.max(1) as f64).powf(1.0 / d as f64).round() as u64).max(1);
                BoxSampler { bbox, mode, per_axis: m, total: m.pow(d) }
            }
            SamplingMode::Random { .. } => BoxSampler { bbox, mode, per_axis: 0, total: samples },
        }
    }

    pub fn grid(bbox: AxisBox, samples: u64) -> Self {
        Self::new(bbox, samples, SamplingMode::Grid)
    }

    pub fn random(bbox: AxisBox, samples: u64, seed: u64) -> Self {
        Self::new(bbox, samples, SamplingMode::Random { seed })
    }

    /// Number of points actually drawn.
    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Same mode and count over a different box; random seeds are decorrelated.
    pub fn with_box(&self, bbox: AxisBox, stream: u64) -> Self {
        let mode = match self.mode {
            SamplingMode::Grid => SamplingMode::Grid,
            SamplingMode::Random { seed } => SamplingMode::Random { seed: seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) },
        };
        let mut s = Self::new(bbox, self.total, mode);
        if matches!(mode, SamplingMode::Grid) {
            s.per_axis = self.per_axis;
            s.total = self.total;
        }
        s
    }

    fn grid_point(&self, mut i: u64) -> PhasePoint {
        let d = self.bbox.lo.len();
        let mut coords: Vec<f64> = Vec::with_capacity(d);
        for axis in 0..d {
            let cell = i % self.per_axis;
            i /= self.per_axis;
            let (lo, hi) = (self.bbox.lo[axis], self.bbox.hi[axis]);
            let v = lo + (hi - lo) * (cell as f64 + 0.5) / self.per_axis as f64;
            coords.push(v);
        }
        PhasePoint::new(&coords)
    }

    fn chunk_points(&self, chunk: u64) -> Vec<PhasePoint> {
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(self.total);
        match self.mode {
            SamplingMode::Grid => (start..end).map(|i| self.grid_point(i)).collect(),
            SamplingMode::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(chunk);
                let d = self.bbox.lo.len();
                let mut buf = vec![0.0; d];
                (start..end)
                    .map(|_| {
                        for (axis, b) in buf.iter_mut().enumerate() {
                            let (lo, hi) = (self.bbox.lo[axis], self.bbox.hi[axis]);
                            *b = lo + (hi - lo) * rng.random::<f64>();
                        }
                        PhasePoint::new(&buf)
                    })
                    .collect()
            }
        }
    }

    /// Parallel fold over all sample points. `merge` must be associative and
    /// commutative for the result to be schedule independent.
    pub fn fold<T, I, F, M>(&self, identity: I, fold: F, merge: M) -> T
    where
        T: Send,
        I: Fn() -> T + Sync + Send,
        F: Fn(&mut T, &PhasePoint) + Sync + Send,
        M: Fn(T, T) -> T + Sync + Send,
    {
        let chunks = self.total.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = identity();
                for p in self.chunk_points(c) {
                    fold(&mut acc, &p);
                }
                acc
            })
            .reduce(&identity, &merge)
    }

    /// All points in draw order.
    pub fn points(&self) -> Vec<PhasePoint> {
        let chunks = self.total.div_ceil(CHUNK);
        (0..chunks).flat_map(|c| self.chunk_points(c)).collect()
    }
}
