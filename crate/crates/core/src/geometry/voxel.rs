use serde::{Deserialize, Serialize};

use super::{Pose, Vec3};
use crate::error::{invalid, Result};

#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum CellState {
    #[default]
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

/// Linear voxel index, x fastest.
pub type VoxelIndex = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    cells: Vec<CellState>,
}

impl VoxelGrid {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self> {
        if !(resolution > 0.0) || dims.contains(&0) {
            return Err(invalid("voxel grid needs positive resolution and dims"));
        }
        Ok(Self {
            origin,
            resolution,
            dims,
            cells: vec![CellState::Unknown; dims[0] * dims[1] * dims[2]],
        })
    }

    /// Smallest grid anchored at `min` that covers `[min, max]`.
    pub fn covering(min: Vec3, max: Vec3, resolution: f64) -> Result<Self> {
        let span = max - min;
        let dim = |s: f64| ((s / resolution) - 1e-9).ceil().max(1.0) as usize;
        Self::new(min, resolution, [dim(span.x), dim(span.y), dim(span.z)])
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn max_corner(&self) -> Vec3 {
        self.origin + Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution
    }

    pub fn linear(&self, c: [usize; 3]) -> VoxelIndex {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn coords(&self, idx: VoxelIndex) -> [usize; 3] {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn voxel_center(&self, idx: VoxelIndex) -> Vec3 {
        let c = self.coords(idx);
        self.origin + Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * self.resolution
    }

    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.resolution;
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = rel[a].floor();
            if !(f >= 0.0 && (f as usize) < self.dims[a]) {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }

    pub fn voxel_of_clamped(&self, p: &Vec3) -> [usize; 3] {
        let rel = (p - self.origin) / self.resolution;
        let mut out = [0usize; 3];
        for a in 0..3 {
            out[a] = (rel[a].floor().max(0.0) as usize).min(self.dims[a] - 1);
        }
        out
    }

    pub fn index_of(&self, p: &Vec3) -> Option<VoxelIndex> {
        self.voxel_of(p).map(|c| self.linear(c))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.voxel_of(p).is_some()
    }

    pub fn state(&self, idx: VoxelIndex) -> CellState {
        self.cells[idx]
    }

    pub fn state_at(&self, p: &Vec3) -> Option<CellState> {
        self.index_of(p).map(|i| self.cells[i])
    }

    /// Applies a state transition; occupied is terminal and nothing reverts
    /// to unknown.
    pub fn mark(&mut self, idx: VoxelIndex, state: CellState) {
        let cur = self.cells[idx];
        if state > cur {
            self.cells[idx] = state;
        }
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// 6-connected neighbours of a voxel.
    pub fn neighbors6(&self, idx: VoxelIndex) -> impl Iterator<Item = VoxelIndex> + '_ {
        let c = self.coords(idx);
        let d = self.dims;
        const OFFS: [(isize, isize, isize); 6] = [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)];
        OFFS.iter().filter_map(move |&(dx, dy, dz)| {
            let x = c[0] as isize + dx;
            let y = c[1] as isize + dy;
            let z = c[2] as isize + dz;
            if x < 0 || y < 0 || z < 0 || x >= d[0] as isize || y >= d[1] as isize || z >= d[2] as isize {
                None
            } else {
                Some(self.linear([x as usize, y as usize, z as usize]))
            }
        })
    }

    /// Voxel traversal (Amanatides & Woo) from `origin` along unit `dir`.
    /// Visits every voxel whose entry parameter is below `max_t`, in order,
    /// starting with the voxel containing `origin`. The visitor returns
    /// `false` to stop. Does nothing if `origin` is outside the grid.
    pub fn traverse<F>(&self, origin: &Vec3, dir: &Vec3, max_t: f64, mut visit: F)
    where
        F: FnMut(VoxelIndex, f64) -> bool,
    {
        let Some(mut cur) = self.voxel_of(origin) else {
            return;
        };
        let mut step = [0isize; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let d = dir[a];
            let o = origin[a] - self.origin[a];
            if d > 0.0 {
                step[a] = 1;
                t_max[a] = ((cur[a] + 1) as f64 * self.resolution - o) / d;
                t_delta[a] = self.resolution / d;
            } else if d < 0.0 {
                step[a] = -1;
                t_max[a] = (cur[a] as f64 * self.resolution - o) / d;
                t_delta[a] = -self.resolution / d;
            }
        }
        let mut t_enter = 0.0;
        loop {
            if t_enter >= max_t || !visit(self.linear(cur), t_enter) {
                return;
            }
            let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            t_enter = t_max[axis];
            if !t_enter.is_finite() {
                return;
            }
            let next = cur[axis] as isize + step[axis];
            if next < 0 || next >= self.dims[axis] as isize {
                return;
            }
            cur[axis] = next as usize;
            t_max[axis] += t_delta[axis];
        }
    }

    /// Parameter at which the ray from inside the grid leaves it.
    fn exit_t(&self, origin: &Vec3, dir: &Vec3) -> f64 {
        let hi = self.max_corner();
        let mut t = f64::INFINITY;
        for a in 0..3 {
            if dir[a] > 0.0 {
                t = t.min((hi[a] - origin[a]) / dir[a]);
            } else if dir[a] < 0.0 {
                t = t.min((self.origin[a] - origin[a]) / dir[a]);
            }
        }
        t
    }
}

/// Pinhole ray grid. Pixel rays are unit vectors in the camera frame
/// (x right, y down, z forward) through pixel centers, square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub horizontal_fov: f64,
    pub width: usize,
    pub height: usize,
    pub max_range: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            horizontal_fov: std::f64::consts::FRAC_PI_2,
            width: 64,
            height: 48,
            max_range: 6.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < std::f64::consts::PI) {
            return Err(invalid("camera field of view must lie in (0, pi)"));
        }
        if self.width < 8 || self.height < 8 {
            return Err(invalid("camera ray grid must be at least 8x8"));
        }
        if !(self.max_range > 0.0) {
            return Err(invalid("camera max range must be positive"));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Raster-order (row-major) unit rays.
    pub fn rays(&self) -> Vec<Vec3> {
        let t = (0.5 * self.horizontal_fov).tan();
        let aspect = self.height as f64 / self.width as f64;
        let mut out = Vec::with_capacity(self.pixel_count());
        for v in 0..self.height {
            let y = (2.0 * (v as f64 + 0.5) / self.height as f64 - 1.0) * t * aspect;
            for u in 0..self.width {
                let x = (2.0 * (u as f64 + 0.5) / self.width as f64 - 1.0) * t;
                out.push(Vec3::new(x, y, 1.0).normalize());
            }
        }
        out
    }
}

/// Carves free space along each sensor ray and marks the end voxel
/// occupied. Voxels strictly between the sensor voxel and the end voxel
/// become free unless already occupied. End points outside the grid are
/// clipped to its boundary.
pub fn integrate_scan(grid: &mut VoxelGrid, sensor_origin: &Vec3, points: &[Vec3]) {
    let Some(start) = grid.index_of(sensor_origin) else {
        return;
    };
    let mut path = Vec::new();
    for p in points {
        let delta = p - sensor_origin;
        let len = delta.norm();
        if len == 0.0 {
            grid.mark(start, CellState::Occupied);
            continue;
        }
        let dir = delta / len;
        let (end, len) = match grid.index_of(p) {
            Some(e) => (e, len),
            None => {
                let t = grid.exit_t(sensor_origin, &dir).min(len);
                let clipped = sensor_origin + dir * t;
                (grid.linear(grid.voxel_of_clamped(&clipped)), t)
            }
        };
        path.clear();
        grid.traverse(sensor_origin, &dir, len, |idx, _| {
            path.push(idx);
            true
        });
        for &idx in &path {
            if idx != start && idx != end {
                grid.mark(idx, CellState::Free);
            }
        }
        grid.mark(end, CellState::Occupied);
    }
}

/// Precomputed camera rays for repeated casting from many poses.
#[derive(Debug, Clone)]
pub struct RayCaster {
    rays: Vec<Vec3>,
    max_range: f64,
}

impl RayCaster {
    pub fn new(camera: &CameraModel) -> Self {
        Self {
            rays: camera.rays(),
            max_range: camera.max_range,
        }
    }

    pub fn ray_count(&self) -> usize {
        self.rays.len()
    }

    /// Walks every pixel ray from `pose`; `visit(ray, voxel)` returns
    /// `false` to stop that ray.
    pub fn cast<F>(&self, grid: &VoxelGrid, pose: &Pose, mut visit: F)
    where
        F: FnMut(usize, VoxelIndex) -> bool,
    {
        let o = pose.translation;
        for (r, ray) in self.rays.iter().enumerate() {
            let d = pose.transform_vector(ray);
            grid.traverse(&o, &d, self.max_range, |idx, _| visit(r, idx));
        }
    }
}

/// Voxels seen from `pose`: every ray reports voxels up to and including
/// the first occupied one under the effective occupancy (`occupancy_override`
/// where given, else the grid). Unknown voxels do not block. Returned sorted
/// by index with the effective state.
pub fn visible_cells(
    grid: &VoxelGrid,
    pose: &Pose,
    camera: &CameraModel,
    occupancy_override: Option<&[CellState]>,
) -> Result<Vec<(VoxelIndex, CellState)>> {
    if !grid.contains(&pose.translation) {
        return Err(invalid("pose lies outside the voxel grid"));
    }
    if let Some(o) = occupancy_override {
        if o.len() != grid.len() {
            return Err(invalid("occupancy override size does not match grid"));
        }
    }
    let states = occupancy_override.unwrap_or(grid.cells());
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    RayCaster::new(camera).cast(grid, pose, |_, idx| {
        if !seen[idx] {
            seen[idx] = true;
            out.push((idx, states[idx]));
        }
        states[idx] != CellState::Occupied
    });
    out.sort_unstable_by_key(|&(i, _)| i);
    Ok(out)
}
