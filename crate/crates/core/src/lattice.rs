//! Toroidal square lattice: patch coordinates, the Moore neighborhood and
//! wrapped distances.
//!
//! One patch is the unit of length; an agent moves exactly one neighbor
//! offset per tick.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of movement directions on the square lattice.
pub const DIRECTIONS: usize = 8;

/// Smallest side for which the 8-neighborhood of a patch does not overlap itself.
pub const MIN_SIDE: u32 = 3;

/// Moore-neighborhood offsets. Offset `k` and offset `7 - k` are opposite.
pub const NEIGHBOR_OFFSETS: [(i32, i32); DIRECTIONS] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("lattice side {0} is below the minimum of {MIN_SIDE}")]
    TooSmall(u32),
}

/// The ordered list of the 8 neighbor displacements.
pub fn neighbor_offsets() -> [(i32, i32); DIRECTIONS] {
    NEIGHBOR_OFFSETS
}

/// Index of the offset pointing the opposite way.
#[inline]
pub const fn opposite(k: usize) -> usize {
    DIRECTIONS - 1 - k
}

/// Euclidean length of neighbor offset `k` (1 for axis moves, √2 for diagonals).
#[inline]
pub fn offset_length(k: usize) -> f64 {
    let (dx, dy) = NEIGHBOR_OFFSETS[k];
    f64::from(dx * dx + dy * dy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub x: u32,
    pub y: u32,
}

impl Position {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    side: u32,
}

impl Lattice {
    pub fn new(side: u32) -> Result<Self, LatticeError> {
        if side < MIN_SIDE {
            return Err(LatticeError::TooSmall(side));
        }
        Ok(Self { side })
    }

    #[inline]
    pub fn side(&self) -> u32 {
        self.side
    }

    /// `A²`, the number of patches.
    #[inline]
    pub fn patch_count(&self) -> u64 {
        u64::from(self.side) * u64::from(self.side)
    }

    /// Reduce arbitrary integer coordinates into `[0, A)²`.
    #[inline]
    pub fn wrap(&self, x: i64, y: i64) -> Position {
        let a = i64::from(self.side);
        Position {
            x: x.rem_euclid(a) as u32,
            y: y.rem_euclid(a) as u32,
        }
    }

    /// Position reached from `p` by displacement `(dx, dy)`.
    #[inline]
    pub fn shift(&self, p: Position, dx: i32, dy: i32) -> Position {
        self.wrap(
            i64::from(p.x) + i64::from(dx),
            i64::from(p.y) + i64::from(dy),
        )
    }

    /// Neighbor of `p` along offset `k`.
    #[inline]
    pub fn neighbor(&self, p: Position, k: usize) -> Position {
        let (dx, dy) = NEIGHBOR_OFFSETS[k];
        self.shift(p, dx, dy)
    }

    /// Minimum-image displacement from `a` to `b`, each axis in `(-A/2, A/2]`.
    #[inline]
    pub fn displacement(&self, a: Position, b: Position) -> (i64, i64) {
        (self.axis_delta(a.x, b.x), self.axis_delta(a.y, b.y))
    }

    #[inline]
    fn axis_delta(&self, from: u32, to: u32) -> i64 {
        let a = i64::from(self.side);
        let mut d = (i64::from(to) - i64::from(from)).rem_euclid(a);
        if d > a / 2 {
            d -= a;
        }
        d
    }

    /// Squared wrapped Euclidean distance, exact in integers.
    #[inline]
    pub fn distance_sq(&self, a: Position, b: Position) -> u64 {
        let (dx, dy) = self.displacement(a, b);
        (dx * dx + dy * dy) as u64
    }

    pub fn toroidal_distance(&self, a: Position, b: Position) -> f64 {
        (self.distance_sq(a, b) as f64).sqrt()
    }

    /// `toroidal_distance(a, b) <= d`, evaluated without a square root.
    #[inline]
    pub fn within(&self, a: Position, b: Position, d: f64) -> bool {
        self.distance_sq(a, b) as f64 <= d * d
    }

    /// Row-major patch index.
    #[inline]
    pub fn index(&self, p: Position) -> usize {
        p.y as usize * self.side as usize + p.x as usize
    }

    pub fn position_of(&self, index: usize) -> Position {
        let a = self.side as usize;
        Position::new((index % a) as u32, (index / a) as u32)
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.patch_count() as usize).map(move |i| self.position_of(i))
    }

    /// Distinct integer displacements whose length is at most `radius`.
    ///
    /// Every patch within `radius` of a center is reached by exactly one of
    /// the returned offsets, even when the disc wraps around the torus.
    pub fn disc_offsets(&self, radius: f64) -> Vec<(i32, i32)> {
        if radius.is_nan() || radius < 0.0 {
            return Vec::new();
        }
        let a = self.side as i64;
        let reach = (radius.floor() as i64).min(a);
        let mut seen = vec![false; self.patch_count() as usize];
        let mut out = Vec::new();
        let origin = Position::new(0, 0);
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let q = self.wrap(dx, dy);
                if !self.within(origin, q, radius) {
                    continue;
                }
                let idx = self.index(q);
                if !seen[idx] {
                    seen[idx] = true;
                    out.push((dx as i32, dy as i32));
                }
            }
        }
        out
    }
}
