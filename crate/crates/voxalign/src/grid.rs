//! Dense voxel grids: dimensions, metric placement, label storage,
//! multi-resolution relationships, and the 26-voxel cubic neighborhood.
//!
//! Linearization is x-major throughout the crate:
//! `idx = x·(Y·Z) + y·Z + z`, matching the SemanticKITTI voxel layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel counts along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl GridDims {
    /// Builds dimensions, rejecting zero extents and grids past 2³¹ voxels.
    pub fn new(x: u32, y: u32, z: u32) -> Result<Self> {
        if x == 0 || y == 0 || z == 0 {
            return Err(Error::Validation(format!(
                "grid dimensions must be positive, got {x}x{y}x{z}"
            )));
        }
        let count = x as u64 * y as u64 * z as u64;
        if count > (1u64 << 31) {
            return Err(Error::Validation(format!(
                "grid of {count} voxels exceeds the 2^31 limit"
            )));
        }
        Ok(Self { x, y, z })
    }

    pub fn voxel_count(&self) -> usize {
        self.x as usize * self.y as usize * self.z as usize
    }

    /// True when every axis is an exact `factor` multiple of `other`.
    pub fn is_multiple_of(&self, other: GridDims, factor: u32) -> bool {
        factor > 0
            && self.x == other.x * factor
            && self.y == other.y * factor
            && self.z == other.z * factor
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

/// Metric placement of a grid: origin is the minimum corner of voxel (0,0,0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub dims: GridDims,
    /// Minimum corner of voxel (0,0,0), meters.
    pub origin: [f64; 3],
    /// Edge length of one voxel, meters.
    pub voxel_size: f64,
}

impl GridGeometry {
    pub fn new(dims: GridDims, origin: [f64; 3], voxel_size: f64) -> Result<Self> {
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(Error::Validation(format!(
                "voxel size must be a positive finite number, got {voxel_size}"
            )));
        }
        Ok(Self {
            dims,
            origin,
            voxel_size,
        })
    }

    /// SemanticKITTI scene volume: 256x256x32 voxels of 0.2 m starting at
    /// (0, -25.6, -2), i.e. x in [0, 51.2], y in [-25.6, 25.6], z in [-2, 4.4].
    pub fn semantic_kitti() -> Self {
        Self {
            dims: GridDims {
                x: 256,
                y: 256,
                z: 32,
            },
            origin: [0.0, -25.6, -2.0],
            voxel_size: 0.2,
        }
    }

    /// Same metric volume as [`GridGeometry::semantic_kitti`] at other dims.
    pub fn semantic_kitti_at(dims: GridDims) -> Self {
        Self {
            dims,
            origin: [0.0, -25.6, -2.0],
            voxel_size: 51.2 / dims.x as f64,
        }
    }
}

/// Encodes a voxel coordinate as a linear index (x-major).
pub fn linear_index(p: [u32; 3], dims: GridDims) -> Result<usize> {
    if p[0] >= dims.x || p[1] >= dims.y || p[2] >= dims.z {
        return Err(Error::OutOfBounds {
            x: p[0] as i64,
            y: p[1] as i64,
            z: p[2] as i64,
            dx: dims.x,
            dy: dims.y,
            dz: dims.z,
        });
    }
    Ok(p[0] as usize * (dims.y as usize * dims.z as usize)
        + p[1] as usize * dims.z as usize
        + p[2] as usize)
}

/// Inverse of [`linear_index`].
pub fn decode_index(idx: usize, dims: GridDims) -> Result<[u32; 3]> {
    if idx >= dims.voxel_count() {
        return Err(Error::OutOfBounds {
            x: idx as i64,
            y: 0,
            z: 0,
            dx: dims.x,
            dy: dims.y,
            dz: dims.z,
        });
    }
    let yz = dims.y as usize * dims.z as usize;
    let x = idx / yz;
    let rem = idx % yz;
    let y = rem / dims.z as usize;
    let z = rem % dims.z as usize;
    Ok([x as u32, y as u32, z as u32])
}

/// Metric center of a voxel: `origin + (p + 0.5)·voxel_size` per axis.
pub fn voxel_centroid(p: [u32; 3], geom: &GridGeometry) -> Result<[f64; 3]> {
    linear_index(p, geom.dims)?;
    Ok([
        geom.origin[0] + (p[0] as f64 + 0.5) * geom.voxel_size,
        geom.origin[1] + (p[1] as f64 + 0.5) * geom.voxel_size,
        geom.origin[2] + (p[2] as f64 + 0.5) * geom.voxel_size,
    ])
}

/// Adjacency class of a neighbor in the 3x3x3 cube around a voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Adjacency {
    /// Shares a face: exactly one nonzero offset axis (6 neighbors).
    Surface,
    /// Shares an edge: exactly two nonzero offset axes (12 neighbors).
    Edge,
    /// Shares a vertex: all three offset axes nonzero (8 neighbors).
    Vertex,
}

/// The 26 neighbor offsets of the cubic neighborhood, each tagged with its
/// adjacency class. Deterministic order: dx, then dy, then dz ascending.
pub fn neighborhood26() -> [([i32; 3], Adjacency); 26] {
    let mut out = [([0i32; 3], Adjacency::Surface); 26];
    let mut n = 0;
    for dx in -1..=1i32 {
        for dy in -1..=1i32 {
            for dz in -1..=1i32 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let nonzero = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
                let class = match nonzero {
                    1 => Adjacency::Surface,
                    2 => Adjacency::Edge,
                    _ => Adjacency::Vertex,
                };
                out[n] = ([dx, dy, dz], class);
                n += 1;
            }
        }
    }
    out
}

/// Class table: id 0 is always the empty class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTable {
    names: Vec<String>,
}

impl ClassTable {
    /// Builds a table from names (index = class id). Requires at least
    /// two classes and unique names; name 0 denotes the empty class.
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::Validation(
                "class table needs at least the empty class and one semantic class".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("duplicate class name '{name}'")));
            }
        }
        Ok(Self { names })
    }

    /// The 19 SemanticKITTI semantic classes plus empty, in training-id order.
    pub fn semantic_kitti() -> Self {
        let names = [
            "empty",
            "car",
            "bicycle",
            "motorcycle",
            "truck",
            "other-vehicle",
            "person",
            "bicyclist",
            "motorcyclist",
            "road",
            "parking",
            "sidewalk",
            "other-ground",
            "building",
            "fence",
            "vegetation",
            "trunk",
            "terrain",
            "pole",
            "traffic-sign",
        ];
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub const EMPTY_ID: u16 = 0;

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<u16> {
        self.names.iter().position(|n| n == name).map(|i| i as u16)
    }
}

/// Dense grid of per-voxel class ids with an optional invalid mask.
///
/// Invalid voxels (unobservable in the dataset) are carried as a separate
/// mask, never as a class id, so losses and metrics can exclude them
/// uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub geometry: GridGeometry,
    /// One class id per voxel, x-major.
    pub labels: Vec<u16>,
    /// `true` marks voxels to exclude from losses and metrics.
    pub invalid_mask: Option<Vec<bool>>,
}

impl LabelGrid {
    pub fn new(geometry: GridGeometry, labels: Vec<u16>, invalid_mask: Option<Vec<bool>>) -> Result<Self> {
        let n = geometry.dims.voxel_count();
        if labels.len() != n {
            return Err(Error::Shape(format!(
                "label array has {} entries, grid {} needs {n}",
                labels.len(),
                geometry.dims
            )));
        }
        if let Some(mask) = &invalid_mask {
            if mask.len() != n {
                return Err(Error::Shape(format!(
                    "invalid mask has {} entries, grid {} needs {n}",
                    mask.len(),
                    geometry.dims
                )));
            }
        }
        Ok(Self {
            geometry,
            labels,
            invalid_mask,
        })
    }

    /// All-empty grid.
    pub fn empty(geometry: GridGeometry) -> Self {
        let n = geometry.dims.voxel_count();
        Self {
            geometry,
            labels: vec![0; n],
            invalid_mask: None,
        }
    }

    pub fn dims(&self) -> GridDims {
        self.geometry.dims
    }

    /// Checks that every label id is below the table's class count.
    pub fn validate_against(&self, table: &ClassTable) -> Result<()> {
        let count = table.count() as u16;
        for &label in &self.labels {
            if label >= count {
                return Err(Error::UnmappedLabel { id: label });
            }
        }
        Ok(())
    }

    pub fn is_invalid(&self, idx: usize) -> bool {
        self.invalid_mask.as_ref().is_some_and(|m| m[idx])
    }
}

/// Integer relationship between a high- and a low-resolution grid,
/// `high = lambda · low` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionPair {
    pub high: GridDims,
    pub low: GridDims,
    pub lambda: u32,
}

impl ResolutionPair {
    pub fn new(high: GridDims, low: GridDims, lambda: u32) -> Result<Self> {
        if lambda == 0 || !high.is_multiple_of(low, lambda) {
            return Err(Error::Shape(format!(
                "{high} is not {lambda} times {low} on every axis"
            )));
        }
        Ok(Self { high, low, lambda })
    }

    /// Infers lambda from the x extents and validates the other axes.
    pub fn infer(high: GridDims, low: GridDims) -> Result<Self> {
        if low.x == 0 || high.x % low.x != 0 {
            return Err(Error::Shape(format!("{high} is not a multiple of {low}")));
        }
        Self::new(high, low, high.x / low.x)
    }
}

/// Majority-vote label rescaling by an integer factor per axis.
///
/// Each output voxel takes the most frequent label among its `factor³`
/// children. Ties prefer the most frequent non-empty label, and among
/// remaining ties the smallest class id. The output voxel is invalid iff
/// all of its children are invalid.
pub fn rescale_labels(grid: &LabelGrid, factor: u32) -> Result<LabelGrid> {
    if factor == 0 {
        return Err(Error::Validation("rescale factor must be positive".into()));
    }
    let dims = grid.dims();
    if dims.x % factor != 0 || dims.y % factor != 0 || dims.z % factor != 0 {
        return Err(Error::Shape(format!(
            "dims {dims} not divisible by factor {factor}"
        )));
    }
    let out_dims = GridDims {
        x: dims.x / factor,
        y: dims.y / factor,
        z: dims.z / factor,
    };
    let out_geom = GridGeometry {
        dims: out_dims,
        origin: grid.geometry.origin,
        voxel_size: grid.geometry.voxel_size * factor as f64,
    };

    let block = (factor as usize).pow(3);
    let mut child_labels = Vec::with_capacity(block);
    let mut out_labels = vec![0u16; out_dims.voxel_count()];
    let mut out_invalid = grid
        .invalid_mask
        .as_ref()
        .map(|_| vec![false; out_dims.voxel_count()]);

    for ox in 0..out_dims.x {
        for oy in 0..out_dims.y {
            for oz in 0..out_dims.z {
                child_labels.clear();
                let mut all_invalid = true;
                for cx in 0..factor {
                    for cy in 0..factor {
                        for cz in 0..factor {
                            let p = [ox * factor + cx, oy * factor + cy, oz * factor + cz];
                            let idx = linear_index(p, dims)?;
                            child_labels.push(grid.labels[idx]);
                            if !grid.is_invalid(idx) {
                                all_invalid = false;
                            }
                        }
                    }
                }
                let winner = majority_label(&mut child_labels);
                let out_idx = linear_index([ox, oy, oz], out_dims)?;
                out_labels[out_idx] = winner;
                if let Some(mask) = out_invalid.as_mut() {
                    mask[out_idx] = all_invalid;
                }
            }
        }
    }

    LabelGrid::new(out_geom, out_labels, out_invalid)
}

/// Majority vote with the non-empty-preferring tie-break. Sorts in place.
fn majority_label(labels: &mut [u16]) -> u16 {
    labels.sort_unstable();
    let mut best_label = labels[0];
    let mut best_count = 0usize;
    let mut i = 0;
    while i < labels.len() {
        let label = labels[i];
        let mut j = i;
        while j < labels.len() && labels[j] == label {
            j += 1;
        }
        let count = j - i;
        let beats = count > best_count
            || (count == best_count && rank_for_tie(label) < rank_for_tie(best_label));
        if beats {
            best_label = label;
            best_count = count;
        }
        i = j;
    }
    best_label
}

/// Tie rank: non-empty labels sort before empty, then by ascending id.
fn rank_for_tie(label: u16) -> (bool, u16) {
    (label == ClassTable::EMPTY_ID, label)
}
