use super::DiscreteState;
use crate::geometry::{Aabb, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("point ({x:.4}, {y:.4}, {z:.4}) lies outside the voxel map")]
    OutOfBounds { x: f64, y: f64, z: f64 },
    #[error("cell {0} lies outside the voxel map")]
    CellOutOfBounds(DiscreteState),
    #[error("voxel map of {requested} cells exceeds the limit of {limit}")]
    TooLarge { requested: u64, limit: u64 },
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
}

/// Provenance of an occupied cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellTag {
    Terrain,
    UserVirtual,
}

impl CellTag {
    fn code(self) -> u8 {
        match self {
            CellTag::Terrain => 1,
            CellTag::UserVirtual => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(CellTag::Terrain),
            2 => Some(CellTag::UserVirtual),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellTag::Terrain => "terrain",
            CellTag::UserVirtual => "user_virtual",
        }
    }
}

/// Occupancy grid over `[0, dims)` cell indices. Cell `(i, j, k)` covers the
/// half-open cube `origin + [i, i+1) * resolution` along each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMap {
    resolution: f64,
    origin: Vec3,
    dims: [usize; 3],
    cells: Vec<u8>,
}

impl VoxelMap {
    pub fn new(resolution: f64, origin: Vec3, dims: [usize; 3]) -> Result<Self, MapError> {
        Self::with_limit(resolution, origin, dims, u64::MAX)
    }

    pub fn with_limit(
        resolution: f64,
        origin: Vec3,
        dims: [usize; 3],
        max_cells: u64,
    ) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::BadResolution(resolution));
        }
        let requested = dims.iter().map(|&d| d as u64).product::<u64>();
        if requested > max_cells {
            return Err(MapError::TooLarge {
                requested,
                limit: max_cells,
            });
        }
        Ok(Self {
            resolution,
            origin,
            dims,
            cells: vec![0; requested as usize],
        })
    }

    /// Builds a map directly from occupied cells, mostly for tests and
    /// synthetic fixtures.
    pub fn from_cells(
        resolution: f64,
        origin: Vec3,
        dims: [usize; 3],
        occupied: impl IntoIterator<Item = (DiscreteState, CellTag)>,
    ) -> Result<Self, MapError> {
        let mut map = Self::new(resolution, origin, dims)?;
        for (q, tag) in occupied {
            map.set(q, Some(tag))?;
        }
        Ok(map)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn in_bounds(&self, q: DiscreteState) -> bool {
        q.x >= 0
            && q.y >= 0
            && q.z >= 0
            && (q.x as usize) < self.dims[0]
            && (q.y as usize) < self.dims[1]
            && (q.z as usize) < self.dims[2]
    }

    pub(crate) fn index(&self, q: DiscreteState) -> Option<usize> {
        self.in_bounds(q)
            .then(|| (q.z as usize * self.dims[1] + q.y as usize) * self.dims[0] + q.x as usize)
    }

    pub fn set(&mut self, q: DiscreteState, tag: Option<CellTag>) -> Result<(), MapError> {
        let i = self.index(q).ok_or(MapError::CellOutOfBounds(q))?;
        self.cells[i] = tag.map_or(0, CellTag::code);
        Ok(())
    }

    /// Marks a cell occupied. Terrain provenance is never downgraded to
    /// user_virtual.
    pub(crate) fn mark(&mut self, q: DiscreteState, tag: CellTag) {
        if let Some(i) = self.index(q) {
            if self.cells[i] != CellTag::Terrain.code() {
                self.cells[i] = tag.code();
            }
        }
    }

    pub fn tag(&self, q: DiscreteState) -> Option<CellTag> {
        self.index(q)
            .and_then(|i| CellTag::from_code(self.cells[i]))
    }

    /// Out-of-bounds cells read as free.
    pub fn is_occupied(&self, q: DiscreteState) -> bool {
        self.tag(q).is_some()
    }

    /// Cell containing `p`, without a bounds check.
    pub fn discretize(&self, p: &Vec3) -> DiscreteState {
        let rel = (p - self.origin) / self.resolution;
        DiscreteState::new(
            rel.x.floor() as i32,
            rel.y.floor() as i32,
            rel.z.floor() as i32,
        )
    }

    /// `floor((p - origin) / resolution)` componentwise; errors outside bounds.
    pub fn world_to_discrete(&self, p: &Vec3) -> Result<DiscreteState, MapError> {
        let q = self.discretize(p);
        if self.in_bounds(q) {
            Ok(q)
        } else {
            Err(MapError::OutOfBounds {
                x: p.x,
                y: p.y,
                z: p.z,
            })
        }
    }

    /// World position of a cell center.
    pub fn discrete_to_world(&self, q: DiscreteState) -> Vec3 {
        self.origin
            + Vec3::new(q.x as f64 + 0.5, q.y as f64 + 0.5, q.z as f64 + 0.5) * self.resolution
    }

    pub fn cell_aabb(&self, q: DiscreteState) -> Aabb {
        let min = self.origin + Vec3::new(q.x as f64, q.y as f64, q.z as f64) * self.resolution;
        Aabb {
            min,
            max: min + Vec3::repeat(self.resolution),
        }
    }

    /// Height of the top face of the cells in layer `z`.
    pub fn layer_top(&self, z: i32) -> f64 {
        self.origin.z + (z + 1) as f64 * self.resolution
    }

    /// Number of free cells strictly below `q` before the first occupied
    /// cell of its column, or `None` when the column below is entirely free.
    pub fn support_distance(&self, q: DiscreteState) -> Option<u32> {
        let mut gap = 0;
        let mut c = q.below();
        while c.z >= 0 {
            if self.is_occupied(c) {
                return Some(gap);
            }
            gap += 1;
            c = c.below();
        }
        None
    }

    /// Inclusive cell index range overlapped by a world-space box, clipped to
    /// the map bounds. `None` when the box misses the map.
    pub fn cell_range(&self, aabb: &Aabb) -> Option<(DiscreteState, DiscreteState)> {
        let lo = self.discretize(&aabb.min);
        let hi = self.discretize(&aabb.max);
        let clip = |v: i32, d: usize| v.clamp(0, d as i32 - 1);
        if hi.x < 0
            || hi.y < 0
            || hi.z < 0
            || lo.x >= self.dims[0] as i32
            || lo.y >= self.dims[1] as i32
            || lo.z >= self.dims[2] as i32
        {
            return None;
        }
        Some((
            DiscreteState::new(
                clip(lo.x, self.dims[0]),
                clip(lo.y, self.dims[1]),
                clip(lo.z, self.dims[2]),
            ),
            DiscreteState::new(
                clip(hi.x, self.dims[0]),
                clip(hi.y, self.dims[1]),
                clip(hi.z, self.dims[2]),
            ),
        ))
    }

    /// Occupied cells within an inclusive index range, in z-y-x scan order.
    pub fn occupied_in(
        &self,
        lo: DiscreteState,
        hi: DiscreteState,
    ) -> impl Iterator<Item = DiscreteState> + '_ {
        (lo.z..=hi.z).flat_map(move |z| {
            (lo.y..=hi.y).flat_map(move |y| {
                (lo.x..=hi.x)
                    .map(move |x| DiscreteState::new(x, y, z))
                    .filter(|q| self.is_occupied(*q))
            })
        })
    }

    /// All occupied cells with provenance, in lexicographic `(x, y, z)` order.
    pub fn occupied(&self) -> Vec<(DiscreteState, CellTag)> {
        let mut out = Vec::new();
        for (i, &c) in self.cells.iter().enumerate() {
            if let Some(tag) = CellTag::from_code(c) {
                let x = i % self.dims[0];
                let y = (i / self.dims[0]) % self.dims[1];
                let z = i / (self.dims[0] * self.dims[1]);
                out.push((DiscreteState::new(x as i32, y as i32, z as i32), tag));
            }
        }
        out.sort();
        out
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != 0).count()
    }
}
