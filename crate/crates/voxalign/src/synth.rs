//! Deterministic synthetic scenes and the brute-force oracles used by tests.
//!
//! Scenes are painted from primitive lists (later primitives overwrite
//! earlier ones) and rendered into exact depth maps by integer ray traversal,
//! so back-projection tests can demand bit-level agreement. All randomness
//! comes from SplitMix64 seeded by the scene spec.
//!
//! The oracles restate their target operations by literal enumeration and
//! share no implementation code with the modules they check.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraRig, DepthMap};
use crate::csa::{AnisotropyMap, BorderPolicy, CsaParams};
use crate::error::{Error, Result};
use crate::grid::{linear_index, GridDims, GridGeometry, LabelGrid};
use crate::util::SplitMix64;

/// One scene-building primitive. Boxes use inclusive integer voxel extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Primitive {
    /// Axis-aligned box: voxels `min .. min + size` (exclusive upper corner).
    Box {
        min: [u32; 3],
        size: [u32; 3],
        class: u16,
    },
    /// Horizontal slab covering every (x, y) for `thickness` z-layers.
    Ground { z: u32, thickness: u32, class: u16 },
    /// `count` randomly placed boxes with per-axis sizes drawn from
    /// `min_size ..= max_size`, positions uniform inside the grid.
    Scatter {
        count: u32,
        class: u16,
        min_size: [u32; 3],
        max_size: [u32; 3],
    },
}

/// Camera orientation, either an explicit matrix or a look-at pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PoseSpec {
    Matrix { r: [[f64; 3]; 3], t: [f64; 3] },
    LookAt {
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub pose: PoseSpec,
}

impl CameraSpec {
    pub fn build(&self) -> Result<CameraRig> {
        let k = Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0);
        let (r, t) = match &self.pose {
            PoseSpec::Matrix { r, t } => {
                let r = Matrix3::from_fn(|i, j| r[i][j]);
                (r, Vector3::new(t[0], t[1], t[2]))
            }
            PoseSpec::LookAt { eye, target, up } => {
                let eye = Vector3::new(eye[0], eye[1], eye[2]);
                let target = Vector3::new(target[0], target[1], target[2]);
                let up = Vector3::new(up[0], up[1], up[2]);
                let forward = target - eye;
                if forward.norm() < 1e-12 {
                    return Err(Error::Validation("look-at target equals the eye".into()));
                }
                let z = forward.normalize();
                let x_raw = z.cross(&up);
                if x_raw.norm() < 1e-9 {
                    return Err(Error::Validation(
                        "look-at up vector is parallel to the view direction".into(),
                    ));
                }
                let x = x_raw.normalize();
                let y = z.cross(&x);
                let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
                (r, -(r * eye))
            }
        };
        CameraRig::new(k, r, t, (self.width, self.height))
    }
}

fn default_origin() -> [f64; 3] {
    [0.0; 3]
}

fn default_voxel_size() -> f64 {
    1.0
}

/// Full description of a synthetic scene; the seed determines all
/// pseudo-random placement bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub dims: GridDims,
    /// Number of classes including empty; primitive classes must stay below.
    pub class_count: u16,
    #[serde(default = "default_origin")]
    pub origin: [f64; 3],
    #[serde(default = "default_voxel_size")]
    pub voxel_size: f64,
    pub seed: u64,
    pub primitives: Vec<Primitive>,
    #[serde(default)]
    pub cameras: Vec<CameraSpec>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Paints the label grid and renders one exact depth map per camera.
///
/// Depth is the camera-frame z at the midpoint of the ray's traversal of the
/// first occupied voxel, so back-projecting a valid pixel always lands
/// strictly inside that voxel. Pixels whose ray hits nothing are 0 (invalid).
pub fn generate_scene(spec: &SceneSpec) -> Result<(LabelGrid, Vec<CameraRig>, Vec<DepthMap>)> {
    if spec.class_count < 2 {
        return Err(Error::Validation("scene needs at least two classes".into()));
    }
    let geometry = GridGeometry::new(spec.dims, spec.origin, spec.voxel_size)?;
    let mut labels = vec![0u16; spec.dims.voxel_count()];
    let mut rng = SplitMix64::new(spec.seed);

    for primitive in &spec.primitives {
        paint(&mut labels, spec, primitive, &mut rng)?;
    }
    let grid = LabelGrid::new(geometry, labels, None)?;

    let mut rigs = Vec::with_capacity(spec.cameras.len());
    let mut depths = Vec::with_capacity(spec.cameras.len());
    for camera in &spec.cameras {
        let rig = camera.build()?;
        let depth = render_depth(&grid, &rig)?;
        rigs.push(rig);
        depths.push(depth);
    }
    Ok((grid, rigs, depths))
}

fn paint(
    labels: &mut [u16],
    spec: &SceneSpec,
    primitive: &Primitive,
    rng: &mut SplitMix64,
) -> Result<()> {
    let dims = spec.dims;
    let mut fill_box = |min: [u32; 3], size: [u32; 3], class: u16| -> Result<()> {
        if class >= spec.class_count {
            return Err(Error::Validation(format!(
                "primitive class {class} outside the {}-class table",
                spec.class_count
            )));
        }
        if size.iter().any(|&s| s == 0) {
            return Err(Error::Validation("primitive size must be positive".into()));
        }
        let max = [min[0] + size[0], min[1] + size[1], min[2] + size[2]];
        if max[0] > dims.x || max[1] > dims.y || max[2] > dims.z {
            return Err(Error::Validation(format!(
                "primitive {min:?}+{size:?} exceeds grid {dims}"
            )));
        }
        for x in min[0]..max[0] {
            for y in min[1]..max[1] {
                for z in min[2]..max[2] {
                    labels[linear_index([x, y, z], dims)?] = class;
                }
            }
        }
        Ok(())
    };

    match primitive {
        Primitive::Box { min, size, class } => fill_box(*min, *size, *class),
        Primitive::Ground {
            z,
            thickness,
            class,
        } => fill_box([0, 0, *z], [dims.x, dims.y, *thickness], *class),
        Primitive::Scatter {
            count,
            class,
            min_size,
            max_size,
        } => {
            for axis in 0..3 {
                if min_size[axis] == 0 || min_size[axis] > max_size[axis] {
                    return Err(Error::Validation(
                        "scatter sizes must satisfy 0 < min <= max".into(),
                    ));
                }
            }
            let dims_arr = [dims.x, dims.y, dims.z];
            for _ in 0..*count {
                let mut size = [0u32; 3];
                let mut min = [0u32; 3];
                for axis in 0..3 {
                    let span = (max_size[axis] - min_size[axis] + 1) as u64;
                    size[axis] = min_size[axis] + rng.next_below(span) as u32;
                    if size[axis] > dims_arr[axis] {
                        return Err(Error::Validation(format!(
                            "scatter size {} exceeds grid extent {}",
                            size[axis], dims_arr[axis]
                        )));
                    }
                    let room = (dims_arr[axis] - size[axis] + 1) as u64;
                    min[axis] = rng.next_below(room) as u32;
                }
                fill_box(min, size, *class)?;
            }
            Ok(())
        }
    }
}

/// Renders a depth map by 3D DDA through the label grid: per pixel, the ray
/// through the pixel center is traversed voxel by voxel; the first occupied
/// voxel with a nonzero traversal segment yields the depth.
pub fn render_depth(grid: &LabelGrid, rig: &CameraRig) -> Result<DepthMap> {
    let (width, height) = rig.image_size();
    let k_inv = rig
        .intrinsics()
        .try_inverse()
        .ok_or(Error::SingularMatrix)?;
    let origin = rig.center();
    let r_t = rig.rotation().transpose();

    let mut depth = vec![0.0f64; width as usize * height as usize];
    for py in 0..height {
        for px in 0..width {
            // K⁻¹·[u, v, 1] has camera z exactly 1, so the ray parameter is
            // the camera-frame depth.
            let pixel = Vector3::new(px as f64 + 0.5, py as f64 + 0.5, 1.0);
            let dir = r_t * (k_inv * pixel);
            if let Some(t_mid) = traverse_first_hit(grid, &origin, &dir) {
                depth[(py * width + px) as usize] = t_mid;
            }
        }
    }
    DepthMap::new(width, height, depth)
}

/// Amanatides–Woo traversal; returns the segment-midpoint parameter of the
/// first occupied voxel, or None when the ray exits without a hit.
fn traverse_first_hit(grid: &LabelGrid, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let geom = &grid.geometry;
    let dims = geom.dims;
    let gmin = Vector3::new(geom.origin[0], geom.origin[1], geom.origin[2]);
    let extent = Vector3::new(
        dims.x as f64 * geom.voxel_size,
        dims.y as f64 * geom.voxel_size,
        dims.z as f64 * geom.voxel_size,
    );
    let gmax = gmin + extent;

    // Slab clip of the forward ray against the grid box.
    let mut t_enter = 0.0f64;
    let mut t_leave = f64::INFINITY;
    for a in 0..3 {
        if dir[a] == 0.0 {
            if origin[a] < gmin[a] || origin[a] >= gmax[a] {
                return None;
            }
        } else {
            let t0 = (gmin[a] - origin[a]) / dir[a];
            let t1 = (gmax[a] - origin[a]) / dir[a];
            let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            t_enter = t_enter.max(lo);
            t_leave = t_leave.min(hi);
        }
    }
    if t_enter >= t_leave {
        return None;
    }

    let start = origin + dir * t_enter;
    let size = geom.voxel_size;
    let dims_arr = [dims.x as i64, dims.y as i64, dims.z as i64];
    let mut voxel = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let coord = ((start[a] - gmin[a]) / size).floor() as i64;
        voxel[a] = coord.clamp(0, dims_arr[a] - 1);
        if dir[a] > 0.0 {
            step[a] = 1;
            t_max[a] = (gmin[a] + (voxel[a] + 1) as f64 * size - origin[a]) / dir[a];
            t_delta[a] = size / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            t_max[a] = (gmin[a] + voxel[a] as f64 * size - origin[a]) / dir[a];
            t_delta[a] = size / -dir[a];
        }
    }

    let mut t_current = t_enter;
    loop {
        let axis = (0..3).min_by(|&a, &b| t_max[a].total_cmp(&t_max[b])).unwrap();
        let t_exit = t_max[axis].min(t_leave);
        let idx = voxel[0] as usize * (dims.y as usize * dims.z as usize)
            + voxel[1] as usize * dims.z as usize
            + voxel[2] as usize;
        if grid.labels[idx] != 0 && t_exit > t_current {
            return Some(0.5 * (t_current + t_exit));
        }
        t_current = t_max[axis];
        if t_current >= t_leave {
            return None;
        }
        voxel[axis] += step[axis];
        if voxel[axis] < 0 || voxel[axis] >= dims_arr[axis] {
            return None;
        }
        t_max[axis] += t_delta[axis];
    }
}

// -------------------------------------------------------------------------
// Oracles
// -------------------------------------------------------------------------

/// Independent restatement of the cubic anisotropy: literal triple loop over
/// dx, dy, dz with inline adjacency classification.
pub fn oracle_csa(v_re: &LabelGrid, params: &CsaParams) -> AnisotropyMap {
    let dims = v_re.dims();
    let n = dims.voxel_count();
    let mut s_surface = vec![0u8; n];
    let mut s_edge = vec![0u8; n];
    let mut s_vertex = vec![0u8; n];
    let mut s_csa = vec![0.0f64; n];

    let label_at = |x: i64, y: i64, z: i64| -> Option<u16> {
        if x < 0 || y < 0 || z < 0 || x >= dims.x as i64 || y >= dims.y as i64 || z >= dims.z as i64
        {
            return None;
        }
        let idx = x as usize * (dims.y as usize * dims.z as usize)
            + y as usize * dims.z as usize
            + z as usize;
        Some(v_re.labels[idx])
    };

    let mut idx = 0usize;
    for x in 0..dims.x as i64 {
        for y in 0..dims.y as i64 {
            for z in 0..dims.z as i64 {
                let own = v_re.labels[idx];
                let mut surf = 0u8;
                let mut edge = 0u8;
                let mut vert = 0u8;
                for dx in -1..=1i64 {
                    for dy in -1..=1i64 {
                        for dz in -1..=1i64 {
                            if dx == 0 && dy == 0 && dz == 0 {
                                continue;
                            }
                            let neighbor = match label_at(x + dx, y + dy, z + dz) {
                                Some(l) => l,
                                None => match params.border_policy {
                                    BorderPolicy::Skip => continue,
                                    BorderPolicy::PadEmpty => 0,
                                },
                            };
                            if neighbor == own {
                                continue;
                            }
                            let axes = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
                            if axes == 1 {
                                surf += 1;
                            } else if axes == 2 {
                                edge += 1;
                            } else {
                                vert += 1;
                            }
                        }
                    }
                }
                s_surface[idx] = surf;
                s_edge[idx] = edge;
                s_vertex[idx] = vert;
                s_csa[idx] = params.alpha
                    * (surf as f64 + params.w_e * edge as f64 + params.w_v * vert as f64)
                    + params.beta;
                idx += 1;
            }
        }
    }

    AnisotropyMap {
        geometry: v_re.geometry,
        s_surface,
        s_edge,
        s_vertex,
        s_csa,
    }
}

/// Full-sort top-k reference: descending value, ties by ascending index.
pub fn oracle_topk(values: &[f64], k: usize) -> Vec<usize> {
    assert!(k <= values.len(), "k = {k} exceeds {} values", values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then_with(|| a.cmp(&b)));
    order.truncate(k);
    order
}

/// Central-difference gradient: `(f(x + h·e) − f(x − h·e)) / 2h` per
/// coordinate, in double precision.
pub fn oracle_grad<F>(mut loss: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    let mut grad = vec![0.0f64; point.len()];
    for i in 0..point.len() {
        let original = x[i];
        x[i] = original + h;
        let plus = loss(&x);
        x[i] = original - h;
        let minus = loss(&x);
        x[i] = original;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}
