//! Scene-completion evaluation: confusion tallies, IoU / mIoU,
//! range-restricted masks, and voxel sparsity statistics.

use serde::Serialize;

use crate::camera::CameraRig;
use crate::error::{Error, Result};
use crate::grid::{decode_index, voxel_centroid, GridGeometry, LabelGrid};
use nalgebra::Vector3;

/// True/false positive/negative tallies per class plus the binary
/// (any-occupancy) tallies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub per_class: Vec<ClassCounts>,
    pub binary: ClassCounts,
    /// Voxels that entered the tally (not invalid, not ignored).
    pub evaluated: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(num_classes: usize) -> Self {
        Self {
            per_class: vec![ClassCounts::default(); num_classes],
            binary: ClassCounts::default(),
            evaluated: 0,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }
}

/// Tallies prediction against ground truth, excluding voxels marked invalid
/// in either grid or masked by `ignore` (true = exclude). Any non-empty
/// class counts as occupied for the binary tallies. The class count is the
/// largest label mentioned by either grid plus one.
pub fn confusion(pred: &LabelGrid, gt: &LabelGrid, ignore: Option<&[bool]>) -> Result<ConfusionCounts> {
    let max_label = pred
        .labels
        .iter()
        .chain(&gt.labels)
        .copied()
        .max()
        .unwrap_or(0);
    confusion_with_classes(pred, gt, ignore, max_label as usize + 1)
}

/// [`confusion`] with an explicit class count; labels at or above it error.
pub fn confusion_with_classes(
    pred: &LabelGrid,
    gt: &LabelGrid,
    ignore: Option<&[bool]>,
    num_classes: usize,
) -> Result<ConfusionCounts> {
    if pred.dims() != gt.dims() {
        return Err(Error::Shape(format!(
            "prediction {} and ground truth {} differ",
            pred.dims(),
            gt.dims()
        )));
    }
    let n = pred.dims().voxel_count();
    if let Some(mask) = ignore {
        if mask.len() != n {
            return Err(Error::Shape("ignore mask length does not match the grid".into()));
        }
    }
    if num_classes == 0 {
        return Err(Error::Validation("class count must be positive".into()));
    }

    let mut counts = ConfusionCounts::new(num_classes);
    for idx in 0..n {
        if pred.is_invalid(idx) || gt.is_invalid(idx) || ignore.is_some_and(|m| m[idx]) {
            continue;
        }
        let p = pred.labels[idx] as usize;
        let g = gt.labels[idx] as usize;
        if p >= num_classes {
            return Err(Error::UnmappedLabel { id: pred.labels[idx] });
        }
        if g >= num_classes {
            return Err(Error::UnmappedLabel { id: gt.labels[idx] });
        }
        counts.evaluated += 1;
        if p == g {
            counts.per_class[p].tp += 1;
        } else {
            counts.per_class[p].fp += 1;
            counts.per_class[g].fn_ += 1;
        }
        let p_occ = p != 0;
        let g_occ = g != 0;
        match (p_occ, g_occ) {
            (true, true) => counts.binary.tp += 1,
            (true, false) => counts.binary.fp += 1,
            (false, true) => counts.binary.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(counts)
}

/// How classes with an empty denominator enter the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsentClassRule {
    /// Score 0 (SemanticKITTI benchmark convention).
    #[default]
    ScoreZero,
    /// Leave them out of the mean.
    Skip,
}

/// IoU / mIoU summary computed from confusion tallies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IouSummary {
    /// Binary occupancy IoU.
    pub iou: f64,
    /// Per semantic class (ids 1..), `tp/(tp+fp+fn)`.
    pub per_class: Vec<f64>,
    /// Unweighted mean over the semantic classes (empty excluded).
    pub miou: f64,
}

/// Computes binary IoU, per-class IoU over the non-empty classes, and their
/// unweighted mean. Zero-denominator classes score 0 by default.
pub fn iou_miou(counts: &ConfusionCounts) -> IouSummary {
    iou_miou_with_rule(counts, AbsentClassRule::ScoreZero)
}

/// [`iou_miou`] with an explicit rule for absent classes.
pub fn iou_miou_with_rule(counts: &ConfusionCounts, rule: AbsentClassRule) -> IouSummary {
    let ratio = |c: &ClassCounts| -> Option<f64> {
        let denom = c.tp + c.fp + c.fn_;
        (denom > 0).then(|| c.tp as f64 / denom as f64)
    };
    let iou = ratio(&counts.binary).unwrap_or(0.0);

    let mut per_class = Vec::with_capacity(counts.per_class.len().saturating_sub(1));
    let mut sum = 0.0;
    let mut counted = 0usize;
    for c in counts.per_class.iter().skip(1) {
        match ratio(c) {
            Some(v) => {
                per_class.push(v);
                sum += v;
                counted += 1;
            }
            None => match rule {
                AbsentClassRule::ScoreZero => {
                    per_class.push(0.0);
                    counted += 1;
                }
                AbsentClassRule::Skip => per_class.push(f64::NAN),
            },
        }
    }
    let miou = if counted > 0 { sum / counted as f64 } else { 0.0 };
    IouSummary {
        iou,
        per_class,
        miou,
    }
}

/// True for voxels whose centroid lies within `max_range` meters of the
/// camera along its forward (depth) axis. The distance is signed; no
/// Euclidean radius is applied.
pub fn range_mask(geom: &GridGeometry, rig: &CameraRig, max_range: f64) -> Result<Vec<bool>> {
    if !(max_range > 0.0) {
        return Err(Error::Validation(format!(
            "max range must be positive, got {max_range}"
        )));
    }
    let dims = geom.dims;
    let mut out = vec![false; dims.voxel_count()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let p = decode_index(idx, dims)?;
        let c = voxel_centroid(p, geom)?;
        let cam = rig.rotation() * Vector3::new(c[0], c[1], c[2]) + rig.translation();
        *slot = cam.z <= max_range;
    }
    Ok(out)
}

/// Per-class voxel counts over the valid voxels of a label grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    /// Count per class id.
    pub counts: Vec<u64>,
    /// Empty-class share of the valid voxels, in [0, 1].
    pub empty_fraction: f64,
    /// log10 of each count, `None` where the count is zero.
    pub log10_counts: Vec<Option<f64>>,
    pub valid_voxels: u64,
}

/// Tallies class frequencies over valid voxels and the empty fraction.
pub fn sparsity_stats(gt: &LabelGrid) -> SparsityReport {
    let max_label = gt.labels.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max_label + 1];
    let mut valid = 0u64;
    for (idx, &label) in gt.labels.iter().enumerate() {
        if gt.is_invalid(idx) {
            continue;
        }
        counts[label as usize] += 1;
        valid += 1;
    }
    let empty_fraction = if valid > 0 {
        counts[0] as f64 / valid as f64
    } else {
        1.0
    };
    let log10_counts = counts
        .iter()
        .map(|&c| (c > 0).then(|| (c as f64).log10()))
        .collect();
    SparsityReport {
        counts,
        empty_fraction,
        log10_counts,
        valid_voxels: valid,
    }
}
