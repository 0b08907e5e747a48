//! Bit-exact I/O: SemanticKITTI voxel files, KITTI calibration text, and the
//! toolkit's internal grid container.
//!
//! # Container layout (little-endian)
//!
//! ```text
//! magic    4 bytes  "VXAL"
//! version  u16      currently 1
//! kind     u8       0 labels | 1 scores | 2 features | 3 anisotropy
//! dims     3 x u32  voxel counts per axis
//! channels u32
//! elem     u8       0 u16 | 1 f32 | 2 f64 | 3 u8-bool
//! payload  dims.product() x channels x elem-size bytes
//! crc32    u32      CRC-32 (IEEE) over header + payload
//! ```
//!
//! SemanticKITTI `.bin`/`.invalid` files are bit-packed occupancy, MSB-first
//! within each byte, voxels in the crate's x-major order; `.label` files are
//! one little-endian u16 raw class id per voxel.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use crate::camera::{CameraRig, DepthMap};
use crate::csa::AnisotropyMap;
use crate::error::{Error, Result};
use crate::grid::{GridDims, GridGeometry, LabelGrid};
use crate::lift::{FeatureGrid, FeatureMap2D, ScoreGrid};

/// Voxel extent of SemanticKITTI SSC ground truth.
pub const SEMANTIC_KITTI_DIMS: GridDims = GridDims { x: 256, y: 256, z: 32 };
/// Byte size of a bit-packed `.bin` / `.invalid` file.
pub const OCCUPANCY_BIN_LEN: usize = 256 * 256 * 32 / 8;
/// Byte size of a `.label` file (u16 per voxel).
pub const LABEL_FILE_LEN: usize = 256 * 256 * 32 * 2;

// -------------------------------------------------------------------------
// SemanticKITTI voxel files
// -------------------------------------------------------------------------

/// Unpacks MSB-first bit-packed occupancy into a 0/1 label grid at the
/// standard SemanticKITTI geometry.
pub fn read_occupancy_bin(bytes: &[u8]) -> Result<LabelGrid> {
    let bits = unpack_bits(bytes, OCCUPANCY_BIN_LEN)?;
    let labels = bits.iter().map(|&b| b as u16).collect();
    LabelGrid::new(GridGeometry::semantic_kitti(), labels, None)
}

/// Packs a 0/1 label grid back into the bit-packed `.bin` layout.
pub fn write_occupancy_bin(grid: &LabelGrid) -> Result<Vec<u8>> {
    if grid.dims() != SEMANTIC_KITTI_DIMS {
        return Err(Error::Shape(format!(
            "occupancy .bin requires {} dims, got {}",
            SEMANTIC_KITTI_DIMS,
            grid.dims()
        )));
    }
    let bits: Vec<bool> = grid.labels.iter().map(|&l| l != 0).collect();
    Ok(pack_bits(&bits))
}

/// Unpacks a `.invalid` file into a per-voxel mask (true = invalid).
pub fn read_invalid_bin(bytes: &[u8]) -> Result<Vec<bool>> {
    unpack_bits(bytes, OCCUPANCY_BIN_LEN)
}

pub fn write_invalid_bin(mask: &[bool]) -> Result<Vec<u8>> {
    if mask.len() != SEMANTIC_KITTI_DIMS.voxel_count() {
        return Err(Error::Shape(format!(
            "invalid mask holds {} entries, expected {}",
            mask.len(),
            SEMANTIC_KITTI_DIMS.voxel_count()
        )));
    }
    Ok(pack_bits(mask))
}

fn unpack_bits(bytes: &[u8], expected_len: usize) -> Result<Vec<bool>> {
    if bytes.len() != expected_len {
        return Err(Error::Format(format!(
            "bit-packed file holds {} bytes, expected {expected_len}",
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(bytes.len() * 8);
    for &byte in bytes {
        for bit in (0..8).rev() {
            out.push(byte >> bit & 1 == 1);
        }
    }
    Ok(out)
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    debug_assert_eq!(bits.len() % 8, 0);
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (b as u8) << (7 - i))
        })
        .collect()
}

/// Raw-id → training-id remapping plus the training class names, loaded
/// from JSON: `{"names": [...], "map": {"<raw id>": training id, ...}}`.
#[derive(Debug, Clone)]
pub struct LabelMap {
    pub names: Vec<String>,
    map: BTreeMap<u16, u16>,
}

impl LabelMap {
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct MapFile {
            names: Vec<String>,
            map: BTreeMap<String, u16>,
        }
        let file: MapFile = serde_json::from_str(text)?;
        let mut map = BTreeMap::new();
        for (raw, train) in file.map {
            let raw: u16 = raw
                .parse()
                .map_err(|_| Error::Parse(format!("raw label id '{raw}' is not an integer")))?;
            if train as usize >= file.names.len() {
                return Err(Error::Validation(format!(
                    "training id {train} has no entry in the names array"
                )));
            }
            map.insert(raw, train);
        }
        Ok(Self {
            names: file.names,
            map,
        })
    }

    pub fn lookup(&self, raw: u16) -> Result<u16> {
        self.map
            .get(&raw)
            .copied()
            .ok_or(Error::UnmappedLabel { id: raw })
    }
}

/// Decodes a `.label` file without remapping: one little-endian u16 per voxel.
pub fn read_labels_raw(bytes: &[u8]) -> Result<Vec<u16>> {
    if bytes.len() != LABEL_FILE_LEN {
        return Err(Error::Format(format!(
            ".label file holds {} bytes, expected {LABEL_FILE_LEN}",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect())
}

pub fn write_labels_raw(labels: &[u16]) -> Result<Vec<u8>> {
    if labels.len() != SEMANTIC_KITTI_DIMS.voxel_count() {
        return Err(Error::Shape(format!(
            "label array holds {} entries, expected {}",
            labels.len(),
            SEMANTIC_KITTI_DIMS.voxel_count()
        )));
    }
    let mut out = Vec::with_capacity(labels.len() * 2);
    for &l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a `.label` file and remaps raw dataset ids to contiguous
/// training ids. Unknown raw ids error, naming the id.
pub fn read_labels(bytes: &[u8], map: &LabelMap) -> Result<LabelGrid> {
    let raw = read_labels_raw(bytes)?;
    let mut labels = Vec::with_capacity(raw.len());
    for id in raw {
        labels.push(map.lookup(id)?);
    }
    LabelGrid::new(GridGeometry::semantic_kitti(), labels, None)
}

// -------------------------------------------------------------------------
// KITTI calibration
// -------------------------------------------------------------------------

/// Parses a KITTI `calib.txt`: `P2:` supplies the intrinsics (its left 3x3)
/// and `Tr:` the world-to-camera extrinsics. Any translation in P2's fourth
/// column is composed into the rig translation as `K⁻¹ · P2[:,3]`.
/// The rotation is validated orthonormal to 1e-6.
pub fn read_calibration(text: &str, image_size: (u32, u32)) -> Result<CameraRig> {
    let p2 = parse_calib_row(text, "P2")?;
    let tr = parse_calib_row(text, "Tr")?;

    let k = Matrix3::new(p2[0], p2[1], p2[2], p2[4], p2[5], p2[6], p2[8], p2[9], p2[10]);
    let p2_t = Vector3::new(p2[3], p2[7], p2[11]);
    let r = Matrix3::new(tr[0], tr[1], tr[2], tr[4], tr[5], tr[6], tr[8], tr[9], tr[10]);
    let tr_t = Vector3::new(tr[3], tr[7], tr[11]);

    let k_inv = k.try_inverse().ok_or(Error::SingularMatrix)?;
    let t = tr_t + k_inv * p2_t;

    CameraRig::with_tolerance(k, r, t, image_size, 1e-6)
}

/// Renders a rig back into calibration text (P2 with a zero fourth column,
/// Tr as [R|t]); numbers print in shortest round-trip form.
pub fn write_calibration(rig: &CameraRig) -> String {
    let k = rig.intrinsics();
    let r = rig.rotation();
    let t = rig.translation();
    let mut p2 = String::from("P2:");
    let mut tr = String::from("Tr:");
    for row in 0..3 {
        for col in 0..3 {
            p2.push_str(&format!(" {}", k[(row, col)]));
            if col == 2 {
                p2.push_str(" 0");
            }
        }
        for col in 0..3 {
            tr.push_str(&format!(" {}", r[(row, col)]));
            if col == 2 {
                tr.push_str(&format!(" {}", t[row]));
            }
        }
    }
    format!("{p2}\n{tr}\n")
}

fn parse_calib_row(text: &str, key: &str) -> Result<[f64; 12]> {
    let prefix = format!("{key}:");
    let line = text
        .lines()
        .find(|l| l.trim_start().starts_with(&prefix))
        .ok_or_else(|| Error::Parse(format!("calibration text has no '{key}:' line")))?;
    let rest = line.trim_start().strip_prefix(&prefix).expect("prefix checked");
    let mut values = [0.0f64; 12];
    let mut count = 0;
    for token in rest.split_whitespace() {
        if count == 12 {
            count += 1;
            break;
        }
        values[count] = token
            .parse()
            .map_err(|_| Error::Parse(format!("'{token}' in the {key} row is not a number")))?;
        count += 1;
    }
    if count != 12 {
        return Err(Error::Parse(format!(
            "the {key} row must hold exactly 12 numbers"
        )));
    }
    Ok(values)
}

// -------------------------------------------------------------------------
// Internal grid container
// -------------------------------------------------------------------------

pub const CONTAINER_MAGIC: &[u8; 4] = b"VXAL";
pub const CONTAINER_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 12 + 4 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Labels = 0,
    Scores = 1,
    Features = 2,
    Anisotropy = 3,
}

impl PayloadKind {
    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Self::Labels),
            1 => Ok(Self::Scores),
            2 => Ok(Self::Features),
            3 => Ok(Self::Anisotropy),
            other => Err(Error::Format(format!("unknown payload kind tag {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemType {
    U16 = 0,
    F32 = 1,
    F64 = 2,
    Bool = 3,
}

impl ElemType {
    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Self::U16),
            1 => Ok(Self::F32),
            2 => Ok(Self::F64),
            3 => Ok(Self::Bool),
            other => Err(Error::Format(format!("unknown element type tag {other}"))),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Self::U16 => 2,
            Self::F32 => 4,
            Self::F64 => 8,
            Self::Bool => 1,
        }
    }
}

/// In-memory form of one container: typed header plus raw payload bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridContainer {
    pub kind: PayloadKind,
    pub dims: GridDims,
    pub channels: u32,
    pub elem: ElemType,
    pub payload: Vec<u8>,
}

impl GridContainer {
    fn expected_payload_len(dims: GridDims, channels: u32, elem: ElemType) -> Result<usize> {
        let count = dims.voxel_count() as u64;
        let len = count
            .checked_mul(channels as u64)
            .and_then(|v| v.checked_mul(elem.size() as u64))
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        usize::try_from(len).map_err(|_| Error::Format("payload size overflows".into()))
    }

    pub fn new(
        kind: PayloadKind,
        dims: GridDims,
        channels: u32,
        elem: ElemType,
        payload: Vec<u8>,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Validation("container needs at least one channel".into()));
        }
        let expected = Self::expected_payload_len(dims, channels, elem)?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload holds {} bytes, header declares {expected}",
                payload.len()
            )));
        }
        Ok(Self {
            kind,
            dims,
            channels,
            elem,
            payload,
        })
    }

    pub fn from_label_grid(grid: &LabelGrid) -> Result<Self> {
        let mut payload = Vec::with_capacity(grid.labels.len() * 2);
        for &l in &grid.labels {
            payload.extend_from_slice(&l.to_le_bytes());
        }
        Self::new(PayloadKind::Labels, grid.dims(), 1, ElemType::U16, payload)
    }

    pub fn to_label_grid(&self, geometry: GridGeometry) -> Result<LabelGrid> {
        self.check(PayloadKind::Labels, ElemType::U16, 1, geometry.dims)?;
        let labels = self
            .payload
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        LabelGrid::new(geometry, labels, None)
    }

    pub fn from_score_grid(grid: &ScoreGrid) -> Result<Self> {
        Self::new(
            PayloadKind::Scores,
            grid.geometry.dims,
            1,
            ElemType::F64,
            f64_bytes(&grid.scores),
        )
    }

    pub fn to_score_grid(&self, geometry: GridGeometry) -> Result<ScoreGrid> {
        self.check(PayloadKind::Scores, ElemType::F64, 1, geometry.dims)?;
        ScoreGrid::new(geometry, f64_values(&self.payload))
    }

    pub fn from_feature_grid(grid: &FeatureGrid) -> Result<Self> {
        Self::new(
            PayloadKind::Features,
            grid.dims(),
            grid.channels,
            ElemType::F64,
            f64_bytes(&grid.values),
        )
    }

    pub fn to_feature_grid(&self, geometry: GridGeometry) -> Result<FeatureGrid> {
        if self.kind != PayloadKind::Features {
            return Err(Error::Format("container does not hold features".into()));
        }
        if self.dims != geometry.dims {
            return Err(Error::Shape(format!(
                "container dims {} differ from requested {}",
                self.dims, geometry.dims
            )));
        }
        let values = match self.elem {
            ElemType::F64 => f64_values(&self.payload),
            ElemType::F32 => self
                .payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
            other => {
                return Err(Error::Format(format!(
                    "feature payload must be f32 or f64, found {other:?}"
                )))
            }
        };
        FeatureGrid::new(geometry, self.channels, values)
    }

    /// A 2D feature map travels as a (width, height, 1) features container;
    /// the downscale factor is not part of the header.
    pub fn from_feature_map(map: &FeatureMap2D) -> Result<Self> {
        let dims = GridDims::new(map.width, map.height, 1)?;
        Self::new(
            PayloadKind::Features,
            dims,
            map.channels,
            ElemType::F64,
            f64_bytes(&map.values),
        )
    }

    pub fn to_feature_map(&self, downscale: f64) -> Result<FeatureMap2D> {
        if self.kind != PayloadKind::Features || self.dims.z != 1 {
            return Err(Error::Format(
                "container does not hold a 2D feature map (features kind, z = 1)".into(),
            ));
        }
        if self.elem != ElemType::F64 {
            return Err(Error::Format("2D feature map payload must be f64".into()));
        }
        FeatureMap2D::new(
            self.dims.x,
            self.dims.y,
            self.channels,
            f64_values(&self.payload),
            downscale,
        )
    }

    /// Depth maps travel as (width, height, 1) scalar scores containers.
    pub fn from_depth_map(map: &DepthMap) -> Result<Self> {
        let dims = GridDims::new(map.width, map.height, 1)?;
        Self::new(
            PayloadKind::Scores,
            dims,
            1,
            ElemType::F64,
            f64_bytes(&map.depth),
        )
    }

    pub fn to_depth_map(&self) -> Result<DepthMap> {
        if self.kind != PayloadKind::Scores || self.dims.z != 1 || self.elem != ElemType::F64 {
            return Err(Error::Format(
                "container does not hold a depth map (scores kind, f64, z = 1)".into(),
            ));
        }
        DepthMap::new(self.dims.x, self.dims.y, f64_values(&self.payload))
    }

    /// Anisotropy maps pack [s_surface, s_edge, s_vertex, s_csa] per voxel.
    pub fn from_anisotropy(map: &AnisotropyMap) -> Result<Self> {
        let n = map.dims().voxel_count();
        let mut values = Vec::with_capacity(n * 4);
        for idx in 0..n {
            values.push(map.s_surface[idx] as f64);
            values.push(map.s_edge[idx] as f64);
            values.push(map.s_vertex[idx] as f64);
            values.push(map.s_csa[idx]);
        }
        Self::new(
            PayloadKind::Anisotropy,
            map.dims(),
            4,
            ElemType::F64,
            f64_bytes(&values),
        )
    }

    pub fn to_anisotropy(&self, geometry: GridGeometry) -> Result<AnisotropyMap> {
        self.check(PayloadKind::Anisotropy, ElemType::F64, 4, geometry.dims)?;
        let values = f64_values(&self.payload);
        let n = geometry.dims.voxel_count();
        let mut s_surface = Vec::with_capacity(n);
        let mut s_edge = Vec::with_capacity(n);
        let mut s_vertex = Vec::with_capacity(n);
        let mut s_csa = Vec::with_capacity(n);
        let count = |v: f64, max: u8| -> Result<u8> {
            if v.fract() != 0.0 || v < 0.0 || v > max as f64 {
                return Err(Error::Format(format!(
                    "anisotropy count {v} outside 0..={max}"
                )));
            }
            Ok(v as u8)
        };
        for chunk in values.chunks_exact(4) {
            s_surface.push(count(chunk[0], 6)?);
            s_edge.push(count(chunk[1], 12)?);
            s_vertex.push(count(chunk[2], 8)?);
            s_csa.push(chunk[3]);
        }
        Ok(AnisotropyMap {
            geometry,
            s_surface,
            s_edge,
            s_vertex,
            s_csa,
        })
    }

    /// Boolean masks travel as labels containers with u8-bool payload.
    pub fn from_mask(dims: GridDims, mask: &[bool]) -> Result<Self> {
        if mask.len() != dims.voxel_count() {
            return Err(Error::Shape(format!(
                "mask holds {} entries, grid {dims} needs {}",
                mask.len(),
                dims.voxel_count()
            )));
        }
        Self::new(
            PayloadKind::Labels,
            dims,
            1,
            ElemType::Bool,
            mask.iter().map(|&b| b as u8).collect(),
        )
    }

    pub fn to_mask(&self) -> Result<Vec<bool>> {
        if self.kind != PayloadKind::Labels || self.elem != ElemType::Bool || self.channels != 1 {
            return Err(Error::Format(
                "container does not hold a mask (labels kind, u8-bool)".into(),
            ));
        }
        self.payload
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Format(format!("mask byte {other} is not 0 or 1"))),
            })
            .collect()
    }

    fn check(&self, kind: PayloadKind, elem: ElemType, channels: u32, dims: GridDims) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!(
                "container holds {:?}, expected {kind:?}",
                self.kind
            )));
        }
        if self.elem != elem {
            return Err(Error::Format(format!(
                "container payload is {:?}, expected {elem:?}",
                self.elem
            )));
        }
        if self.channels != channels {
            return Err(Error::Format(format!(
                "container has {} channels, expected {channels}",
                self.channels
            )));
        }
        if self.dims != dims {
            return Err(Error::Shape(format!(
                "container dims {} differ from requested {dims}",
                self.dims
            )));
        }
        Ok(())
    }
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn f64_values(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| {
            f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
        })
        .collect()
}

/// Serializes a container: header, payload, CRC-32 footer.
pub fn write_container(container: &GridContainer) -> Result<Vec<u8>> {
    // Re-validate so hand-built containers cannot write inconsistent headers.
    let expected =
        GridContainer::expected_payload_len(container.dims, container.channels, container.elem)?;
    if container.channels == 0 || container.payload.len() != expected {
        return Err(Error::Validation(
            "container payload does not match its header".into(),
        ));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + container.payload.len() + 4);
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.push(container.kind as u8);
    out.extend_from_slice(&container.dims.x.to_le_bytes());
    out.extend_from_slice(&container.dims.y.to_le_bytes());
    out.extend_from_slice(&container.dims.z.to_le_bytes());
    out.extend_from_slice(&container.channels.to_le_bytes());
    out.push(container.elem as u8);
    out.extend_from_slice(&container.payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses and validates a container. The payload length is computed from
/// the header and checked against the buffer before any allocation.
pub fn read_container(bytes: &[u8]) -> Result<GridContainer> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Format(format!(
            "container of {} bytes is shorter than header + footer",
            bytes.len()
        )));
    }
    if &bytes[0..4] != CONTAINER_MAGIC {
        return Err(Error::Format("bad magic, not a VXAL container".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CONTAINER_VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {version}"
        )));
    }
    let kind = PayloadKind::from_tag(bytes[6])?;
    let read_u32 = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let dims = GridDims::new(read_u32(7), read_u32(11), read_u32(15))
        .map_err(|e| Error::Format(format!("bad dims in header: {e}")))?;
    let channels = read_u32(19);
    if channels == 0 {
        return Err(Error::Format("container declares zero channels".into()));
    }
    let elem = ElemType::from_tag(bytes[23])?;

    let payload_len = GridContainer::expected_payload_len(dims, channels, elem)?;
    let total = HEADER_LEN
        .checked_add(payload_len)
        .and_then(|v| v.checked_add(4))
        .ok_or_else(|| Error::Format("container size overflows".into()))?;
    if bytes.len() != total {
        return Err(Error::Format(format!(
            "container holds {} bytes, header requires {total}",
            bytes.len()
        )));
    }

    let body_end = HEADER_LEN + payload_len;
    let stored_crc = u32::from_le_bytes([
        bytes[body_end],
        bytes[body_end + 1],
        bytes[body_end + 2],
        bytes[body_end + 3],
    ]);
    let actual_crc = crc32fast::hash(&bytes[..body_end]);
    if stored_crc != actual_crc {
        return Err(Error::Format(format!(
            "checksum mismatch: stored {stored_crc:08x}, computed {actual_crc:08x}"
        )));
    }

    Ok(GridContainer {
        kind,
        dims,
        channels,
        elem,
        payload: bytes[HEADER_LEN..body_end].to_vec(),
    })
}

pub fn write_container_file(path: &Path, container: &GridContainer) -> Result<()> {
    std::fs::write(path, write_container(container)?)?;
    Ok(())
}

pub fn read_container_file(path: &Path) -> Result<GridContainer> {
    read_container(&std::fs::read(path)?)
}

// -------------------------------------------------------------------------
// Voxel file bundles
// -------------------------------------------------------------------------

/// Paths of one SemanticKITTI frame's voxel files; at least one present.
#[derive(Debug, Clone)]
pub struct VoxelFileBundle {
    pub occupancy: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub invalid: Option<PathBuf>,
}

impl VoxelFileBundle {
    /// Collects `<dir>/<frame>.bin|.label|.invalid` where present.
    pub fn locate(dir: &Path, frame: &str) -> Result<Self> {
        let candidate = |ext: &str| -> Option<PathBuf> {
            let p = dir.join(format!("{frame}.{ext}"));
            p.is_file().then_some(p)
        };
        let bundle = Self {
            occupancy: candidate("bin"),
            labels: candidate("label"),
            invalid: candidate("invalid"),
        };
        if bundle.occupancy.is_none() && bundle.labels.is_none() && bundle.invalid.is_none() {
            return Err(Error::Validation(format!(
                "no voxel files for frame '{frame}' under {}",
                dir.display()
            )));
        }
        Ok(bundle)
    }

    /// Reads the labels (remapped) with the invalid mask attached when present.
    pub fn load_labels(&self, map: &LabelMap) -> Result<LabelGrid> {
        let path = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Validation("bundle has no .label file".into()))?;
        let mut grid = read_labels(&std::fs::read(path)?, map)?;
        if let Some(invalid) = &self.invalid {
            grid.invalid_mask = Some(read_invalid_bin(&std::fs::read(invalid)?)?);
        }
        Ok(grid)
    }
}
