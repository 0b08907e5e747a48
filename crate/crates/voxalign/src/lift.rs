//! Multi-resolution 2D → 3D feature lifting and cross-resolution seed fusion.
//!
//! Voxel centroids project into each image; in-FOV samples are averaged
//! (weight 1/δ over the δ images that see the voxel, zero vector outside
//! every view). Seed fusion runs trilinear upsampling and average pooling
//! between the two resolution levels.

use rayon::prelude::*;

use crate::camera::{in_fov, project_point, CameraRig};
use crate::error::{Error, Result};
use crate::grid::{decode_index, linear_index, voxel_centroid, GridDims, GridGeometry, ResolutionPair};

/// A 2D feature map in cell units, `downscale` full-image pixels per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap2D {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    /// Row-major, channel-minor: `values[(y·width + x)·channels + c]`.
    pub values: Vec<f64>,
    /// Full-image pixels per feature cell (1/16-resolution maps use 16).
    pub downscale: f64,
}

impl FeatureMap2D {
    pub fn new(width: u32, height: u32, channels: u32, values: Vec<f64>, downscale: f64) -> Result<Self> {
        let expected = width as usize * height as usize * channels as usize;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "feature map holds {} values, expected {expected}",
                values.len()
            )));
        }
        if !(downscale >= 1.0) {
            return Err(Error::Validation(format!(
                "downscale must be >= 1, got {downscale}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("feature map contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
            downscale,
        })
    }

    fn at(&self, x: u32, y: u32, c: u32) -> f64 {
        self.values[((y * self.width + x) * self.channels + c) as usize]
    }

    /// Bilinear sample at cell coordinates with border clamping; cell (i,j)
    /// is centered at coordinate (i, j).
    fn sample_bilinear(&self, sx: f64, sy: f64, out: &mut [f64]) {
        let clamp = |v: f64, hi: u32| -> (u32, u32, f64) {
            let lo = v.floor();
            let frac = v - lo;
            let i0 = lo.max(0.0).min((hi - 1) as f64) as u32;
            let i1 = (lo + 1.0).max(0.0).min((hi - 1) as f64) as u32;
            (i0, i1, frac)
        };
        let (x0, x1, fx) = clamp(sx, self.width);
        let (y0, y1, fy) = clamp(sy, self.height);
        for c in 0..self.channels {
            let top = lerp(self.at(x0, y0, c), self.at(x1, y0, c), fx);
            let bottom = lerp(self.at(x0, y1, c), self.at(x1, y1, c), fx);
            out[c as usize] = lerp(top, bottom, fy);
        }
    }
}

/// `a + t·(b − a)`; exact for a == b.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Dense per-voxel feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub geometry: GridGeometry,
    pub channels: u32,
    /// Voxel-major, channel-minor: `values[idx·channels + c]`.
    pub values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(geometry: GridGeometry, channels: u32, values: Vec<f64>) -> Result<Self> {
        let expected = geometry.dims.voxel_count() * channels as usize;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "feature grid holds {} values, expected {expected}",
                values.len()
            )));
        }
        Ok(Self {
            geometry,
            channels,
            values,
        })
    }

    pub fn zeros(geometry: GridGeometry, channels: u32) -> Self {
        let n = geometry.dims.voxel_count() * channels as usize;
        Self {
            geometry,
            channels,
            values: vec![0.0; n],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.geometry.dims
    }

    /// The feature row of one voxel.
    pub fn row(&self, idx: usize) -> &[f64] {
        let c = self.channels as usize;
        &self.values[idx * c..(idx + 1) * c]
    }
}

/// One scalar score per voxel, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid {
    pub geometry: GridGeometry,
    pub scores: Vec<f64>,
}

impl ScoreGrid {
    pub fn new(geometry: GridGeometry, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != geometry.dims.voxel_count() {
            return Err(Error::Shape(format!(
                "score grid holds {} values, expected {}",
                scores.len(),
                geometry.dims.voxel_count()
            )));
        }
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Validation("scores must lie in [0, 1]".into()));
        }
        Ok(Self { geometry, scores })
    }
}

/// Voxels whose occupancy proposal passed the confidence threshold,
/// carrying their feature rows. Indices are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub indices: Vec<usize>,
    /// Row-per-seed, matching `indices`.
    pub features: Vec<Vec<f64>>,
}

/// Samples multi-view 2D features onto a voxel grid (Eq. 3/4 semantics:
/// masked bilinear samples averaged by view count, zero outside every FOV).
///
/// The projected full-image pixel (u, v) samples the map at cell
/// coordinates `(u/downscale − 0.5, v/downscale − 0.5)`.
pub fn sample_features(maps: &[(FeatureMap2D, CameraRig)], geom: &GridGeometry) -> Result<FeatureGrid> {
    let Some(first) = maps.first() else {
        return Err(Error::Shape("at least one feature map is required".into()));
    };
    let channels = first.0.channels;
    if maps.iter().any(|(m, _)| m.channels != channels) {
        return Err(Error::Shape("feature maps disagree in channel count".into()));
    }

    let dims = geom.dims;
    let c = channels as usize;
    let mut values = vec![0.0f64; dims.voxel_count() * c];

    values
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(idx, out)| {
            let p = decode_index(idx, dims).expect("index in range");
            let centroid = voxel_centroid(p, geom).expect("coordinate in range");
            let mut sample = vec![0.0f64; c];
            let mut seen = 0u32;
            for (map, rig) in maps {
                let Ok((u, v, z)) = project_point(centroid, rig) else {
                    continue;
                };
                if !in_fov(u, v, z, rig) {
                    continue;
                }
                map.sample_bilinear(u / map.downscale - 0.5, v / map.downscale - 0.5, &mut sample);
                for (acc, s) in out.iter_mut().zip(&sample) {
                    *acc += s;
                }
                seen += 1;
            }
            if seen > 0 {
                let w = 1.0 / seen as f64;
                for acc in out.iter_mut() {
                    *acc *= w;
                }
            }
        });

    FeatureGrid::new(*geom, channels, values)
}

/// Selects the voxels with proposal score strictly above `theta`,
/// in increasing linear-index order.
pub fn select_seeds(feat: &FeatureGrid, proposals: &ScoreGrid, theta: f64) -> Result<SeedSet> {
    if feat.geometry != proposals.geometry {
        return Err(Error::Shape(
            "feature grid and proposal grid geometries differ".into(),
        ));
    }
    let mut indices = Vec::new();
    let mut features = Vec::new();
    for (idx, &score) in proposals.scores.iter().enumerate() {
        if score > theta {
            indices.push(idx);
            features.push(feat.row(idx).to_vec());
        }
    }
    Ok(SeedSet { indices, features })
}

/// Zeroes the rows of every voxel not present in the seed set.
pub fn mask_to_seeds(feat: &FeatureGrid, seeds: &SeedSet) -> FeatureGrid {
    let mut out = FeatureGrid::zeros(feat.geometry, feat.channels);
    let c = feat.channels as usize;
    for &idx in &seeds.indices {
        out.values[idx * c..(idx + 1) * c].copy_from_slice(feat.row(idx));
    }
    out
}

/// Trilinear upsampling by an integer factor (align-corners-false: output
/// cell `o` reads input coordinate `(o + 0.5)/factor − 0.5`, borders clamped).
pub fn upsample_trilinear(feat: &FeatureGrid, factor: u32) -> Result<FeatureGrid> {
    if factor == 0 {
        return Err(Error::Validation("upsample factor must be positive".into()));
    }
    let in_dims = feat.dims();
    let out_dims = GridDims::new(in_dims.x * factor, in_dims.y * factor, in_dims.z * factor)?;
    let out_geom = GridGeometry {
        dims: out_dims,
        origin: feat.geometry.origin,
        voxel_size: feat.geometry.voxel_size / factor as f64,
    };
    let c = feat.channels as usize;
    let f = factor as f64;

    // Per-axis source cell pair and interpolation weight.
    let axis = |o: u32, extent: u32| -> (usize, usize, f64) {
        let coord = (o as f64 + 0.5) / f - 0.5;
        let lo = coord.floor();
        let frac = coord - lo;
        let clamp = |v: f64| v.max(0.0).min((extent - 1) as f64) as usize;
        (clamp(lo), clamp(lo + 1.0), frac)
    };

    let mut values = vec![0.0f64; out_dims.voxel_count() * c];
    values
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(idx, out)| {
            let p = decode_index(idx, out_dims).expect("index in range");
            let (x0, x1, fx) = axis(p[0], in_dims.x);
            let (y0, y1, fy) = axis(p[1], in_dims.y);
            let (z0, z1, fz) = axis(p[2], in_dims.z);
            let yz = in_dims.y as usize * in_dims.z as usize;
            let at = |x: usize, y: usize, z: usize, ch: usize| {
                feat.values[(x * yz + y * in_dims.z as usize + z) * c + ch]
            };
            for ch in 0..c {
                let c00 = lerp(at(x0, y0, z0, ch), at(x1, y0, z0, ch), fx);
                let c01 = lerp(at(x0, y0, z1, ch), at(x1, y0, z1, ch), fx);
                let c10 = lerp(at(x0, y1, z0, ch), at(x1, y1, z0, ch), fx);
                let c11 = lerp(at(x0, y1, z1, ch), at(x1, y1, z1, ch), fx);
                let c0 = lerp(c00, c10, fy);
                let c1 = lerp(c01, c11, fy);
                out[ch] = lerp(c0, c1, fz);
            }
        });

    FeatureGrid::new(out_geom, feat.channels, values)
}

/// Average pooling by an integer factor; every output voxel is the mean of
/// its `factor³` children per channel.
pub fn downsample_avgpool(feat: &FeatureGrid, factor: u32) -> Result<FeatureGrid> {
    if factor == 0 {
        return Err(Error::Validation("downsample factor must be positive".into()));
    }
    let in_dims = feat.dims();
    if in_dims.x % factor != 0 || in_dims.y % factor != 0 || in_dims.z % factor != 0 {
        return Err(Error::Shape(format!(
            "dims {in_dims} not divisible by factor {factor}"
        )));
    }
    let out_dims = GridDims {
        x: in_dims.x / factor,
        y: in_dims.y / factor,
        z: in_dims.z / factor,
    };
    let out_geom = GridGeometry {
        dims: out_dims,
        origin: feat.geometry.origin,
        voxel_size: feat.geometry.voxel_size * factor as f64,
    };
    let c = feat.channels as usize;
    let inv = 1.0 / (factor as f64).powi(3);

    let mut values = vec![0.0f64; out_dims.voxel_count() * c];
    values
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(idx, out)| {
            let p = decode_index(idx, out_dims).expect("index in range");
            for cx in 0..factor {
                for cy in 0..factor {
                    for cz in 0..factor {
                        let child = [p[0] * factor + cx, p[1] * factor + cy, p[2] * factor + cz];
                        let child_idx = linear_index(child, in_dims).expect("child in range");
                        let row = feat.row(child_idx);
                        for (acc, v) in out.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                }
            }
            for acc in out.iter_mut() {
                *acc *= inv;
            }
        });

    FeatureGrid::new(out_geom, feat.channels, values)
}

/// Order of the two seed-alignment updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FuseMode {
    /// high += Up(low), then low += Down(updated high).
    #[default]
    Sequential,
    /// Both updates read the pre-update fields.
    Simultaneous,
}

/// Mutual seed-field alignment across a resolution pair, sequential order
/// by default (the downsampling reads the already-updated high field).
pub fn fuse_seeds(
    high: &FeatureGrid,
    low: &FeatureGrid,
    pair: &ResolutionPair,
) -> Result<(FeatureGrid, FeatureGrid)> {
    fuse_seeds_with_mode(high, low, pair, FuseMode::Sequential)
}

/// [`fuse_seeds`] with an explicit update order.
pub fn fuse_seeds_with_mode(
    high: &FeatureGrid,
    low: &FeatureGrid,
    pair: &ResolutionPair,
    mode: FuseMode,
) -> Result<(FeatureGrid, FeatureGrid)> {
    if high.dims() != pair.high || low.dims() != pair.low {
        return Err(Error::Shape(format!(
            "grids {} / {} do not match resolution pair {} / {}",
            high.dims(),
            low.dims(),
            pair.high,
            pair.low
        )));
    }
    if high.channels != low.channels {
        return Err(Error::Shape("resolution levels disagree in channel count".into()));
    }

    let up = upsample_trilinear(low, pair.lambda)?;
    let mut new_high = high.clone();
    for (h, u) in new_high.values.iter_mut().zip(&up.values) {
        *h += u;
    }

    let down_src = match mode {
        FuseMode::Sequential => &new_high,
        FuseMode::Simultaneous => high,
    };
    let down = downsample_avgpool(down_src, pair.lambda)?;
    let mut new_low = low.clone();
    for (l, d) in new_low.values.iter_mut().zip(&down.values) {
        *l += d;
    }

    Ok((new_high, new_low))
}
