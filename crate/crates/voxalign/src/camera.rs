//! Pinhole camera model: world-to-image projection, field-of-view tests,
//! and depth-map back-projection.
//!
//! Conventions: the rig maps world points into the camera frame via
//! `cam = R·p + t`; image coordinates are continuous with pixel (0,0)
//! covering [0,1)x[0,1), and the field of view uses half-open bounds.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{voxel_centroid, GridGeometry};

const MIN_CAMERA_Z: f64 = 1e-12;
const ORTHONORMAL_TOL: f64 = 1e-9;

/// Pinhole intrinsics plus rigid extrinsics (world → camera).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    k: Matrix3<f64>,
    r: Matrix3<f64>,
    t: Vector3<f64>,
    image_size: (u32, u32),
}

impl CameraRig {
    /// Validates K (upper-triangular, K[2][2] = 1, positive focals) and R
    /// (orthonormal, det +1, tolerance 1e-9).
    pub fn new(k: Matrix3<f64>, r: Matrix3<f64>, t: Vector3<f64>, image_size: (u32, u32)) -> Result<Self> {
        Self::with_tolerance(k, r, t, image_size, ORTHONORMAL_TOL)
    }

    /// Same as [`CameraRig::new`] with an explicit orthonormality tolerance
    /// (calibration files are parsed at 1e-6).
    pub fn with_tolerance(
        k: Matrix3<f64>,
        r: Matrix3<f64>,
        t: Vector3<f64>,
        image_size: (u32, u32),
        tol: f64,
    ) -> Result<Self> {
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::Validation(
                "intrinsics matrix must be upper-triangular".into(),
            ));
        }
        if k[(2, 2)] != 1.0 {
            return Err(Error::Validation("intrinsics K[2][2] must be 1".into()));
        }
        if !(k[(0, 0)] > 0.0) || !(k[(1, 1)] > 0.0) {
            return Err(Error::Validation(
                "intrinsics focal entries must be positive".into(),
            ));
        }
        let gram = r.transpose() * r;
        let eye_err = (gram - Matrix3::identity()).abs().max();
        if eye_err > tol {
            return Err(Error::Validation(format!(
                "rotation is not orthonormal (max deviation {eye_err:.3e})"
            )));
        }
        if (r.determinant() - 1.0).abs() > tol.max(1e-6) {
            return Err(Error::Validation(
                "rotation determinant must be +1".into(),
            ));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(Error::Validation("image size must be positive".into()));
        }
        Ok(Self {
            k,
            r,
            t,
            image_size,
        })
    }

    /// Rig with KITTI axis conventions: world x (forward) maps to camera z,
    /// world y (left) to -x, world z (up) to -y; camera at the world origin.
    pub fn kitti_axes(k: Matrix3<f64>, image_size: (u32, u32)) -> Result<Self> {
        let r = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
        Self::new(k, r, Vector3::zeros(), image_size)
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.k
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.t
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    /// Camera center in world coordinates, `-Rᵀ·t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.r.transpose() * self.t)
    }

    /// Analytic inverse of the upper-triangular intrinsics.
    fn k_inverse(&self) -> Result<Matrix3<f64>> {
        let fx = self.k[(0, 0)];
        let fy = self.k[(1, 1)];
        if fx.abs() < MIN_CAMERA_Z || fy.abs() < MIN_CAMERA_Z {
            return Err(Error::SingularMatrix);
        }
        let s = self.k[(0, 1)];
        let cx = self.k[(0, 2)];
        let cy = self.k[(1, 2)];
        Ok(Matrix3::new(
            1.0 / fx,
            -s / (fx * fy),
            (s * cy - cx * fy) / (fx * fy),
            0.0,
            1.0 / fy,
            -cy / fy,
            0.0,
            0.0,
            1.0,
        ))
    }
}

/// Projects a world point: `cam = R·p + t`, then perspective division of
/// `K·cam` by the camera-frame depth. The returned depth is signed.
pub fn project_point(p: [f64; 3], rig: &CameraRig) -> Result<(f64, f64, f64)> {
    let cam = rig.r * Vector3::new(p[0], p[1], p[2]) + rig.t;
    let z = cam.z;
    if z.abs() < MIN_CAMERA_Z {
        return Err(Error::BehindCamera { z });
    }
    let h = rig.k * cam;
    Ok((h.x / z, h.y / z, z))
}

/// True iff the projection lands in front of the camera and inside the
/// half-open image bounds `[0, width) x [0, height)`.
pub fn in_fov(u: f64, v: f64, z_cam: f64, rig: &CameraRig) -> bool {
    z_cam > 0.0
        && u >= 0.0
        && u < rig.image_size.0 as f64
        && v >= 0.0
        && v < rig.image_size.1 as f64
}

/// Per-voxel FOV membership: projects every voxel centroid and tests
/// [`in_fov`]. Voxels at or behind the camera plane are outside.
pub fn fov_mask(geom: &GridGeometry, rig: &CameraRig) -> Vec<bool> {
    let dims = geom.dims;
    (0..dims.voxel_count())
        .into_par_iter()
        .map(|idx| {
            let p = crate::grid::decode_index(idx, dims).expect("index in range");
            let c = voxel_centroid(p, geom).expect("coordinate in range");
            match project_point(c, rig) {
                Ok((u, v, z)) => in_fov(u, v, z, rig),
                Err(_) => false,
            }
        })
        .collect()
}

/// Back-projects an image point at depth `d`: `p = Rᵀ·(K⁻¹·(d·[u,v,1]) − t)`.
/// Exact inverse of [`project_point`] for d > 0.
pub fn backproject_pixel(u: f64, v: f64, d: f64, rig: &CameraRig) -> Result<[f64; 3]> {
    if !(d > 0.0) {
        return Err(Error::InvalidDepth { d });
    }
    let k_inv = rig.k_inverse()?;
    let cam = k_inv * Vector3::new(d * u, d * v, d);
    let p = rig.r.transpose() * (cam - rig.t);
    Ok([p.x, p.y, p.z])
}

/// Dense per-pixel depths in meters; entries ≤ 0 are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    /// Row-major, `depth[y·width + x]`.
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != width as usize * height as usize {
            return Err(Error::Shape(format!(
                "depth map holds {} entries, expected {}x{}",
                depth.len(),
                width,
                height
            )));
        }
        if depth.iter().any(|d| !d.is_finite()) {
            return Err(Error::Validation("depth map contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.depth[(y * self.width + x) as usize] > 0.0
    }
}

/// Back-projects every valid pixel of a depth map through its pixel center,
/// in row-major order. Invalid pixels (depth ≤ 0) are skipped.
pub fn backproject_depthmap(dm: &DepthMap, rig: &CameraRig) -> Result<Vec<[f64; 3]>> {
    let mut cloud = Vec::new();
    for y in 0..dm.height {
        for x in 0..dm.width {
            let d = dm.depth[(y * dm.width + x) as usize];
            if d > 0.0 {
                cloud.push(backproject_pixel(x as f64 + 0.5, y as f64 + 0.5, d, rig)?);
            }
        }
    }
    Ok(cloud)
}
