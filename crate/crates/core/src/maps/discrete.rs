use serde::{Deserialize, Serialize};
use std::fmt;

/// Integer cell coordinate of the trunk in the voxel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiscreteState {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl DiscreteState {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn step(self, a: Action) -> Self {
        Self::new(
            self.x + a.dx as i32,
            self.y + a.dy as i32,
            self.z + a.dz as i32,
        )
    }

    /// Euclidean distance in cell units.
    pub fn distance(self, other: Self) -> f64 {
        let dx = (other.x - self.x) as f64;
        let dy = (other.y - self.y) as f64;
        let dz = (other.z - self.z) as f64;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn below(self) -> Self {
        Self::new(self.x, self.y, self.z - 1)
    }
}

impl fmt::Display for DiscreteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// One move to a neighbouring cell of the 26-neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub dx: i8,
    pub dy: i8,
    pub dz: i8,
}

impl Action {
    /// Returns `None` for the zero move or any component outside `{-1, 0, 1}`.
    pub fn new(dx: i8, dy: i8, dz: i8) -> Option<Self> {
        let ok = [dx, dy, dz].iter().all(|c| (-1..=1).contains(c)) && (dx, dy, dz) != (0, 0, 0);
        ok.then_some(Self { dx, dy, dz })
    }

    /// All 26 moves in lexicographic order of `(dx, dy, dz)`.
    pub fn all() -> [Action; 26] {
        let mut out = [Action {
            dx: 0,
            dy: 0,
            dz: 1,
        }; 26];
        let mut i = 0;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(a) = Action::new(dx, dy, dz) {
                        out[i] = a;
                        i += 1;
                    }
                }
            }
        }
        out
    }

    /// The move taking `from` to `to`, if they are neighbours.
    pub fn between(from: DiscreteState, to: DiscreteState) -> Option<Self> {
        let d = |a: i32, b: i32| i8::try_from(b - a).ok();
        Action::new(d(from.x, to.x)?, d(from.y, to.y)?, d(from.z, to.z)?)
    }

    /// Base cost: Euclidean length of the move in cell units.
    pub fn norm(self) -> f64 {
        let sq = (self.dx as i32).pow(2) + (self.dy as i32).pow(2) + (self.dz as i32).pow(2);
        (sq as f64).sqrt()
    }
}
