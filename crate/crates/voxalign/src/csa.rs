//! Cubic semantic anisotropy: semantic reassignment, per-voxel difference
//! counts against the 26-voxel cubic neighborhood, and the anisotropy-weighted
//! cross-entropy loss with analytic gradients.
//!
//! A voxel's significance weight aggregates how many of its surface-, edge-,
//! and vertex-adjacent neighbors carry a different (reassigned) semantic
//! group, then maps the weighted sum linearly:
//! `s_csa = alpha·(s_surface + w_e·s_edge + w_v·s_vertex) + beta`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{neighborhood26, Adjacency, ClassTable, GridDims, GridGeometry, LabelGrid};
use crate::lift::FeatureGrid;
use crate::util::{pairwise_sum, softmax_into};

/// Built-in grouping granularities, coarsest to finest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupConfig {
    /// {empty, occupied}.
    C0,
    /// {empty, foreground, background}.
    C1,
    /// {empty, vehicle, human, ground, building, infrastructure, plant}.
    C2,
    /// Original classes, no grouping.
    C3,
    Custom(String),
}

/// Total mapping from class ids to contiguous group ids; empty stays 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticGroups {
    pub config: GroupConfig,
    mapping: Vec<u16>,
    group_count: u16,
}

/// Member classes of the refined semantic groups, by class name.
const C2_GROUPS: [(&str, &[&str]); 6] = [
    ("vehicle", &["car", "bicycle", "motorcycle", "truck", "other-vehicle"]),
    ("human", &["person", "bicyclist", "motorcyclist"]),
    ("ground", &["road", "parking", "sidewalk", "other-ground", "terrain"]),
    ("building", &["building"]),
    ("infrastructure", &["fence", "pole", "traffic-sign"]),
    ("plant", &["vegetation", "trunk"]),
];

impl SemanticGroups {
    /// Builds a grouping from an explicit class-id → group-id mapping.
    /// Group ids must be contiguous from 0 and class 0 must map to group 0.
    pub fn from_mapping(config: GroupConfig, mapping: Vec<u16>) -> Result<Self> {
        if mapping.is_empty() || mapping[0] != 0 {
            return Err(Error::Validation(
                "the empty class (id 0) must map to group 0".into(),
            ));
        }
        let max = *mapping.iter().max().expect("non-empty");
        let mut present = vec![false; max as usize + 1];
        for &g in &mapping {
            present[g as usize] = true;
        }
        if present.iter().any(|p| !p) {
            return Err(Error::Validation(
                "group ids must be contiguous from 0".into(),
            ));
        }
        Ok(Self {
            config,
            mapping,
            group_count: max + 1,
        })
    }

    /// Two groups: empty and occupied.
    pub fn c0(table: &ClassTable) -> Self {
        let mapping = (0..table.count() as u16).map(|id| (id != 0) as u16).collect();
        Self {
            config: GroupConfig::C0,
            mapping,
            group_count: 2,
        }
    }

    /// Empty, foreground (vehicle + human classes), background (the rest).
    pub fn c1(table: &ClassTable) -> Result<Self> {
        let foreground: Vec<&str> = C2_GROUPS[0].1.iter().chain(C2_GROUPS[1].1).copied().collect();
        let mapping = (0..table.count() as u16)
            .map(|id| {
                if id == 0 {
                    0
                } else if foreground.contains(&table.names()[id as usize].as_str()) {
                    1
                } else {
                    2
                }
            })
            .collect();
        Self::from_mapping(GroupConfig::C1, mapping)
    }

    /// The refined six-group clustering of similar classes.
    /// Errors if the table carries a class name outside the known groups.
    pub fn c2(table: &ClassTable) -> Result<Self> {
        let mut mapping = vec![0u16; table.count()];
        for (id, name) in table.names().iter().enumerate().skip(1) {
            let group = C2_GROUPS
                .iter()
                .position(|(_, members)| members.contains(&name.as_str()))
                .ok_or(Error::UnmappedLabel { id: id as u16 })?;
            mapping[id] = group as u16 + 1;
        }
        Self::from_mapping(GroupConfig::C2, mapping)
    }

    /// Identity grouping: every class is its own group.
    pub fn c3(table: &ClassTable) -> Self {
        Self {
            config: GroupConfig::C3,
            mapping: (0..table.count() as u16).collect(),
            group_count: table.count() as u16,
        }
    }

    /// Builds the grouping named by `config` for the given table.
    pub fn for_config(config: &GroupConfig, table: &ClassTable) -> Result<Self> {
        match config {
            GroupConfig::C0 => Ok(Self::c0(table)),
            GroupConfig::C1 => Self::c1(table),
            GroupConfig::C2 => Self::c2(table),
            GroupConfig::C3 => Ok(Self::c3(table)),
            GroupConfig::Custom(name) => Err(Error::Validation(format!(
                "custom grouping '{name}' must be loaded from a mapping file"
            ))),
        }
    }

    /// Loads a custom grouping from JSON: `{"name": ..., "mapping": {"<class id>": group id, ...}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct GroupsFile {
            name: String,
            mapping: BTreeMap<String, u16>,
        }
        let file: GroupsFile = serde_json::from_str(text)?;
        let mut pairs = Vec::with_capacity(file.mapping.len());
        for (key, group) in file.mapping {
            let id: u16 = key
                .parse()
                .map_err(|_| Error::Parse(format!("class id '{key}' is not an integer")))?;
            pairs.push((id, group));
        }
        pairs.sort_by_key(|&(id, _)| id);
        for (expect, &(id, _)) in pairs.iter().enumerate() {
            if id as usize != expect {
                return Err(Error::Validation(format!(
                    "mapping must cover every class id from 0, missing {expect}"
                )));
            }
        }
        Self::from_mapping(
            GroupConfig::Custom(file.name),
            pairs.into_iter().map(|(_, g)| g).collect(),
        )
    }

    pub fn group_count(&self) -> u16 {
        self.group_count
    }

    pub fn group_of(&self, class: u16) -> Result<u16> {
        self.mapping
            .get(class as usize)
            .copied()
            .ok_or(Error::UnmappedLabel { id: class })
    }
}

/// How neighbors outside the grid participate in difference counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BorderPolicy {
    /// Out-of-grid neighbors are not counted.
    #[default]
    Skip,
    /// Out-of-grid neighbors count as the empty group.
    PadEmpty,
}

/// Anisotropy aggregation weights and the linear projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsaParams {
    pub w_e: f64,
    pub w_v: f64,
    pub alpha: f64,
    pub beta: f64,
    pub border_policy: BorderPolicy,
}

impl Default for CsaParams {
    /// The published operating point: w_e 0.1, w_v 0.3, alpha 1.0, beta 0.5.
    fn default() -> Self {
        Self {
            w_e: 0.1,
            w_v: 0.3,
            alpha: 1.0,
            beta: 0.5,
            border_policy: BorderPolicy::Skip,
        }
    }
}

impl CsaParams {
    pub fn validate(&self) -> Result<()> {
        if self.w_e < 0.0 || self.w_v < 0.0 {
            return Err(Error::Validation("w_e and w_v must be nonnegative".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Validation("alpha must be positive".into()));
        }
        Ok(())
    }

    /// Six-neighbor-only baseline: edge and vertex weights zero.
    pub fn lga(alpha: f64, beta: f64, border_policy: BorderPolicy) -> Self {
        Self {
            w_e: 0.0,
            w_v: 0.0,
            alpha,
            beta,
            border_policy,
        }
    }
}

/// Per-voxel semantic-difference counts by adjacency class and the
/// projected scalar weight.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropyMap {
    pub geometry: GridGeometry,
    /// Differing surface-adjacent neighbors, 0..=6.
    pub s_surface: Vec<u8>,
    /// Differing edge-adjacent neighbors, 0..=12.
    pub s_edge: Vec<u8>,
    /// Differing vertex-adjacent neighbors, 0..=8.
    pub s_vertex: Vec<u8>,
    /// `alpha·(s_surface + w_e·s_edge + w_v·s_vertex) + beta`.
    pub s_csa: Vec<f64>,
}

impl AnisotropyMap {
    pub fn dims(&self) -> GridDims {
        self.geometry.dims
    }
}

/// Scalar loss value with its analytic gradient with respect to the raw
/// score input (same layout as the scores).
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Replaces every voxel's class id by its semantic group id.
pub fn reassign(labels: &LabelGrid, groups: &SemanticGroups) -> Result<LabelGrid> {
    let mut out = Vec::with_capacity(labels.labels.len());
    for &label in &labels.labels {
        out.push(groups.group_of(label)?);
    }
    LabelGrid::new(labels.geometry, out, labels.invalid_mask.clone())
}

/// Counts, for every voxel, the neighbors in its 3x3x3 cube whose group id
/// differs, split by surface/edge/vertex adjacency, and projects the
/// weighted sum to the scalar anisotropy weight.
pub fn cubic_anisotropy(v_re: &LabelGrid, params: &CsaParams) -> Result<AnisotropyMap> {
    params.validate()?;
    let dims = v_re.dims();
    let hood = neighborhood26();
    let n = dims.voxel_count();

    let mut s_surface = vec![0u8; n];
    let mut s_edge = vec![0u8; n];
    let mut s_vertex = vec![0u8; n];
    let mut s_csa = vec![0.0f64; n];

    let yz = dims.y as usize * dims.z as usize;
    let zs = dims.z as usize;

    s_surface
        .par_iter_mut()
        .zip(s_edge.par_iter_mut())
        .zip(s_vertex.par_iter_mut())
        .zip(s_csa.par_iter_mut())
        .enumerate()
        .for_each(|(idx, (((surf, edge), vert), csa))| {
            let x = (idx / yz) as i64;
            let rem = idx % yz;
            let y = (rem / zs) as i64;
            let z = (rem % zs) as i64;
            let own = v_re.labels[idx];
            for (off, class) in &hood {
                let nx = x + off[0] as i64;
                let ny = y + off[1] as i64;
                let nz = z + off[2] as i64;
                let inside = nx >= 0
                    && ny >= 0
                    && nz >= 0
                    && nx < dims.x as i64
                    && ny < dims.y as i64
                    && nz < dims.z as i64;
                let neighbor = if inside {
                    v_re.labels[nx as usize * yz + ny as usize * zs + nz as usize]
                } else {
                    match params.border_policy {
                        BorderPolicy::Skip => continue,
                        BorderPolicy::PadEmpty => 0,
                    }
                };
                if neighbor != own {
                    match class {
                        Adjacency::Surface => *surf += 1,
                        Adjacency::Edge => *edge += 1,
                        Adjacency::Vertex => *vert += 1,
                    }
                }
            }
            *csa = params.alpha
                * (*surf as f64 + params.w_e * *edge as f64 + params.w_v * *vert as f64)
                + params.beta;
        });

    Ok(AnisotropyMap {
        geometry: v_re.geometry,
        s_surface,
        s_edge,
        s_vertex,
        s_csa,
    })
}

/// Anisotropy-weighted cross entropy over softmaxed per-voxel scores.
///
/// Per included voxel n with class probabilities `p = softmax(scores[n])`:
/// the loss contributes `s_csa[n] · (−log p[label])`, averaged over the
/// `N_v` included voxels. The gradient with respect to the raw scores is
/// `(1/N_v) · s_csa[n] · (p − onehot(label))` at included voxels and zero
/// elsewhere. Voxels marked invalid in the label grid are always excluded;
/// `mask` (true = include) further restricts the set.
pub fn csa_cross_entropy(
    scores: &FeatureGrid,
    labels: &LabelGrid,
    csa: &AnisotropyMap,
    mask: Option<&[bool]>,
) -> Result<LossReport> {
    let dims = scores.dims();
    if labels.dims() != dims || csa.dims() != dims {
        return Err(Error::Shape(format!(
            "scores {}, labels {} and anisotropy {} must share dims",
            dims,
            labels.dims(),
            csa.dims()
        )));
    }
    let classes = scores.channels as usize;
    if let Some(m) = mask {
        if m.len() != dims.voxel_count() {
            return Err(Error::Shape("mask length does not match the grid".into()));
        }
    }
    let n = dims.voxel_count();
    let included = |idx: usize| -> bool {
        !labels.is_invalid(idx) && mask.map_or(true, |m| m[idx])
    };
    let n_v = (0..n).filter(|&i| included(i)).count();
    if n_v == 0 {
        return Err(Error::Degenerate("no voxels left to evaluate the loss on".into()));
    }
    for idx in 0..n {
        if included(idx) && labels.labels[idx] as usize >= classes {
            return Err(Error::UnmappedLabel {
                id: labels.labels[idx],
            });
        }
    }

    let inv_nv = 1.0 / n_v as f64;
    let mut gradient = vec![0.0f64; scores.values.len()];
    let mut per_voxel = vec![0.0f64; n];

    gradient
        .par_chunks_mut(classes)
        .zip(per_voxel.par_iter_mut())
        .enumerate()
        .for_each(|(idx, (grad, term))| {
            if !included(idx) {
                return;
            }
            let mut probs = vec![0.0f64; classes];
            let log_sum = softmax_into(scores.row(idx), &mut probs);
            let label = labels.labels[idx] as usize;
            let weight = csa.s_csa[idx];
            // -log p[label] computed from the stabilized log-sum-exp.
            *term = weight * (log_sum - scores.row(idx)[label]);
            for c in 0..classes {
                let indicator = (c == label) as u8 as f64;
                grad[c] = inv_nv * weight * (probs[c] - indicator);
            }
        });

    let value = inv_nv * pairwise_sum(&per_voxel);
    Ok(LossReport { value, gradient })
}
