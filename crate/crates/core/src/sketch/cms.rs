use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EwEstimate, RwCounts, RwEstimator, SketchError, Tier};
use crate::workload::{Key, Op};

/// One row's hash, drawn from the multiply-add-shift family
/// `h(x) = ((a x + b) mod 2^128) >> 64`, then scaled onto `[0, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowHash {
    a: u128,
    b: u128,
}

impl RowHash {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            a: rng.random::<u128>() | 1,
            b: rng.random::<u128>(),
        }
    }

    #[inline]
    pub fn column(&self, key: Key, width: usize) -> usize {
        let mixed = (self.a.wrapping_mul(key.0 as u128).wrapping_add(self.b) >> 64) as u64;
        ((mixed as u128 * width as u128) >> 64) as usize
    }
}

const ROW_SEED_BYTES: usize = 2 * 16;

/// A pair of count-min sketches (reads, writes) with conservative update:
/// an increment raises only the cells that sit at the key's current minimum.
/// Point queries never underestimate.
#[derive(Debug, Clone)]
pub struct CountMinSketch {
    depth: usize,
    width: usize,
    rows: Vec<RowHash>,
    reads: Vec<u64>,
    writes: Vec<u64>,
}

impl CountMinSketch {
    pub fn new(depth: usize, width: usize, seed: u64) -> Result<Self, SketchError> {
        if depth == 0 || width == 0 {
            return Err(SketchError::EmptySketch { depth, width });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..depth).map(|_| RowHash::random(&mut rng)).collect();
        Ok(Self {
            depth,
            width,
            rows,
            reads: vec![0; depth * width],
            writes: vec![0; depth * width],
        })
    }

    /// Dimensions for additive error `epsilon * N` with probability `1 - delta`:
    /// `w = ceil(e / epsilon)`, `d = ceil(ln(1 / delta))`.
    pub fn with_error_bounds(epsilon: f64, delta: f64, seed: u64) -> Result<Self, SketchError> {
        let width = (std::f64::consts::E / epsilon).ceil() as usize;
        let depth = (1.0 / delta).ln().ceil() as usize;
        Self::new(depth, width, seed)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn table(&self, op: Op) -> &[u64] {
        match op {
            Op::Read => &self.reads,
            Op::Write => &self.writes,
        }
    }

    fn cells(&self, key: Key) -> impl Iterator<Item = usize> + '_ {
        self.rows
            .iter()
            .enumerate()
            .map(move |(row, h)| row * self.width + h.column(key, self.width))
    }

    /// Add `amount` occurrences of `op` for `key`.
    pub fn add(&mut self, key: Key, op: Op, amount: u64) {
        if amount == 0 {
            return;
        }
        let cells: Vec<usize> = self.cells(key).collect();
        let table = match op {
            Op::Read => &mut self.reads,
            Op::Write => &mut self.writes,
        };
        let floor = cells.iter().map(|&c| table[c]).min().unwrap_or(0) + amount;
        for c in cells {
            table[c] = table[c].max(floor);
        }
    }

    pub fn estimate(&self, key: Key, op: Op) -> u64 {
        let table = self.table(op);
        self.cells(key).map(|c| table[c]).min().unwrap_or(0)
    }
}

impl RwEstimator for CountMinSketch {
    fn record(&mut self, key: Key, op: Op) {
        self.add(key, op, 1);
    }

    fn counts(&self, key: Key) -> RwCounts {
        RwCounts {
            reads: self.estimate(key, Op::Read),
            writes: self.estimate(key, Op::Write),
        }
    }

    fn estimate_ew(&self, key: Key) -> EwEstimate {
        EwEstimate::from_counts(self.counts(key), Tier::CountMin)
    }

    fn memory_footprint(&self) -> usize {
        2 * self.depth * self.width * std::mem::size_of::<u64>() + self.depth * ROW_SEED_BYTES
    }
}
