//! Critical distribution alignment: occupancy confidence, anisotropy-guided
//! top-k voxel selection, cross-resolution pairing, the circulated
//! symmetric-KL loss with analytic gradients, and the objective combinator.

use serde::{Deserialize, Serialize};

use crate::csa::{AnisotropyMap, LossReport};
use crate::error::{Error, Result};
use crate::grid::{decode_index, linear_index, GridDims, ResolutionPair};
use crate::lift::{FeatureGrid, ScoreGrid};
use crate::util::{pairwise_sum, softmax_into};

/// Log clamp for the circulated loss; probabilities below this enter the
/// logs at exactly this value.
pub const KL_EPSILON: f64 = 1e-12;

/// The selected critical voxels of one resolution level: indices in ranking
/// order (descending confidence × anisotropy, ties by ascending index),
/// their ranking scores, and optionally their class distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub resolution: GridDims,
    pub indices: Vec<usize>,
    pub ranking_score: Vec<f64>,
    /// Row-per-voxel probability vectors, filled by [`voxel_distributions`].
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distributions: Option<Vec<Vec<f64>>>,
}

impl CriticalSet {
    pub fn k(&self) -> usize {
        self.indices.len()
    }
}

/// Which loss terms participate at one resolution level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermToggles {
    pub csa_ce: bool,
    pub lovasz_plugin: bool,
    pub scal_plugin: bool,
}

impl Default for TermToggles {
    fn default() -> Self {
        Self {
            csa_ce: true,
            lovasz_plugin: true,
            scal_plugin: true,
        }
    }
}

/// Weights of the combined objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    /// Weight of the circulated loss (the published operating point is 1.0).
    pub gamma: f64,
    /// Per-resolution-level term switches.
    pub term_toggles: Vec<TermToggles>,
}

impl ObjectiveWeights {
    pub fn new(gamma: f64, term_toggles: Vec<TermToggles>) -> Result<Self> {
        if gamma < 0.0 {
            return Err(Error::Validation("gamma must be nonnegative".into()));
        }
        Ok(Self {
            gamma,
            term_toggles,
        })
    }
}

/// Per voxel: softmax over the class channels, then the maximum probability.
/// Values lie in [1/N, 1].
pub fn occupancy_confidence(scores: &FeatureGrid) -> Result<ScoreGrid> {
    let classes = scores.channels as usize;
    if classes < 2 {
        return Err(Error::Shape(format!(
            "occupancy confidence needs at least 2 class channels, got {classes}"
        )));
    }
    let n = scores.dims().voxel_count();
    let mut out = vec![0.0f64; n];
    let mut probs = vec![0.0f64; classes];
    for idx in 0..n {
        softmax_into(scores.row(idx), &mut probs);
        out[idx] = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    ScoreGrid::new(scores.geometry, out)
}

/// Pooling rule for resampling the anisotropy weight to a coarser grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsaPooling {
    /// Block maximum: a boundary child keeps the parent significant.
    #[default]
    Max,
    /// Block mean.
    Mean,
}

/// Resamples the scalar anisotropy weight to a coarser resolution by block
/// max-pooling (default; see [`csa_to_resolution_with`] for mean-pooling).
/// Returns one value per target voxel in x-major order.
pub fn csa_to_resolution(csa: &AnisotropyMap, target: GridDims) -> Result<Vec<f64>> {
    csa_to_resolution_with(csa, target, CsaPooling::Max)
}

/// [`csa_to_resolution`] with an explicit pooling rule.
pub fn csa_to_resolution_with(
    csa: &AnisotropyMap,
    target: GridDims,
    pooling: CsaPooling,
) -> Result<Vec<f64>> {
    let dims = csa.dims();
    if target.x == 0
        || target.y == 0
        || target.z == 0
        || dims.x % target.x != 0
        || dims.y % target.y != 0
        || dims.z % target.z != 0
    {
        return Err(Error::Shape(format!(
            "anisotropy dims {dims} are not an integer multiple of target {target}"
        )));
    }
    let fx = dims.x / target.x;
    let fy = dims.y / target.y;
    let fz = dims.z / target.z;
    let block = (fx * fy * fz) as f64;

    let mut out = vec![0.0f64; target.voxel_count()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let p = decode_index(idx, target)?;
        let mut acc = match pooling {
            CsaPooling::Max => f64::NEG_INFINITY,
            CsaPooling::Mean => 0.0,
        };
        for cx in 0..fx {
            for cy in 0..fy {
                for cz in 0..fz {
                    let child = [p[0] * fx + cx, p[1] * fy + cy, p[2] * fz + cz];
                    let v = csa.s_csa[linear_index(child, dims)?];
                    match pooling {
                        CsaPooling::Max => acc = acc.max(v),
                        CsaPooling::Mean => acc += v,
                    }
                }
            }
        }
        *slot = match pooling {
            CsaPooling::Max => acc,
            CsaPooling::Mean => acc / block,
        };
    }
    Ok(out)
}

/// Selects the `k` voxels maximizing confidence × anisotropy.
///
/// Deterministic: ties break toward the smaller linear index. The returned
/// indices are in ranking order.
pub fn select_critical(conf: &ScoreGrid, csa_at_res: &[f64], k: usize) -> Result<CriticalSet> {
    let dims = conf.geometry.dims;
    let n = dims.voxel_count();
    if csa_at_res.len() != n {
        return Err(Error::Shape(format!(
            "anisotropy values ({}) do not match the confidence grid ({n})",
            csa_at_res.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::Validation(format!(
            "k = {k} must lie in 1..={n} for this grid"
        )));
    }

    let mut order: Vec<(f64, usize)> = conf
        .scores
        .iter()
        .zip(csa_at_res)
        .map(|(&c, &s)| c * s)
        .enumerate()
        .map(|(idx, product)| (product, idx))
        .collect();

    let cmp = |a: &(f64, usize), b: &(f64, usize)| {
        b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
    };
    // Partition the top k to the front, then order just that prefix.
    if k < n {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);

    Ok(CriticalSet {
        resolution: dims,
        indices: order.iter().map(|&(_, idx)| idx).collect(),
        ranking_score: order.iter().map(|&(score, _)| score).collect(),
        distributions: None,
    })
}

/// Maps high-resolution voxel indices to their enclosing low-resolution
/// voxels, `(x, y, z) → (⌊x/λ⌋, ⌊y/λ⌋, ⌊z/λ⌋)`. Duplicates are permitted.
pub fn pair_across_resolutions(high_indices: &[usize], pair: &ResolutionPair) -> Result<Vec<usize>> {
    let lambda = pair.lambda;
    let mut out = Vec::with_capacity(high_indices.len());
    for &idx in high_indices {
        let p = decode_index(idx, pair.high)?;
        out.push(linear_index(
            [p[0] / lambda, p[1] / lambda, p[2] / lambda],
            pair.low,
        )?);
    }
    Ok(out)
}

/// Per selected voxel, the softmax of its score vector over the channel
/// dimension. Rows follow the order of `indices`.
pub fn voxel_distributions(scores: &FeatureGrid, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n = scores.dims().voxel_count();
    let classes = scores.channels as usize;
    let mut rows = Vec::with_capacity(indices.len());
    for &idx in indices {
        if idx >= n {
            return Err(Error::OutOfBounds {
                x: idx as i64,
                y: 0,
                z: 0,
                dx: scores.dims().x,
                dy: scores.dims().y,
                dz: scores.dims().z,
            });
        }
        let mut probs = vec![0.0f64; classes];
        softmax_into(scores.row(idx), &mut probs);
        rows.push(probs);
    }
    Ok(rows)
}

/// Circulated loss value with gradients for both probability matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculatedLoss {
    pub value: f64,
    /// d value / d p1, row-major (k × D).
    pub grad_p1: Vec<f64>,
    /// d value / d p2, row-major (k × D).
    pub grad_p2: Vec<f64>,
}

/// Row-averaged symmetric KL divergence between paired distributions:
/// `(1/k)·Σ_rows [KL(p1‖p2) + KL(p2‖p1)]` with natural logs and
/// probabilities clamped to [`KL_EPSILON`] inside the logs.
///
/// Gradients are the exact derivatives of the clamped expression with
/// respect to the raw matrix entries; rows are not renormalized.
pub fn circulated_loss(p1: &[Vec<f64>], p2: &[Vec<f64>]) -> Result<CirculatedLoss> {
    if p1.len() != p2.len() {
        return Err(Error::Shape(format!(
            "row counts differ: {} vs {}",
            p1.len(),
            p2.len()
        )));
    }
    let k = p1.len();
    if k == 0 {
        return Err(Error::Degenerate("no rows to align".into()));
    }
    let dim = p1[0].len();
    let inv_k = 1.0 / k as f64;

    let mut row_terms = vec![0.0f64; k];
    let mut grad_p1 = vec![0.0f64; k * dim];
    let mut grad_p2 = vec![0.0f64; k * dim];

    for (row, term) in row_terms.iter_mut().enumerate() {
        let a = &p1[row];
        let b = &p2[row];
        if a.len() != dim || b.len() != dim {
            return Err(Error::Shape(format!(
                "row {row} width differs from {dim}"
            )));
        }
        let mut acc = 0.0f64;
        for d in 0..dim {
            let (pa, pb) = (a[d], b[d]);
            if pa < 0.0 || pb < 0.0 {
                return Err(Error::Domain(format!(
                    "negative probability at row {row}, column {d}"
                )));
            }
            let ca = pa.max(KL_EPSILON);
            let cb = pb.max(KL_EPSILON);
            let log_ratio = ca.ln() - cb.ln();
            // Symmetric KL contribution (pa - pb)·log(ca/cb), always >= 0.
            acc += pa * log_ratio - pb * log_ratio;
            let slot = row * dim + d;
            let mut ga = log_ratio;
            if pa > KL_EPSILON {
                ga += (pa - pb) / ca;
            }
            let mut gb = -log_ratio;
            if pb > KL_EPSILON {
                gb += (pb - pa) / cb;
            }
            grad_p1[slot] = inv_k * ga;
            grad_p2[slot] = inv_k * gb;
        }
        *term = acc;
    }

    Ok(CirculatedLoss {
        value: inv_k * pairwise_sum(&row_terms),
        grad_p1,
        grad_p2,
    })
}

/// Chains a gradient with respect to softmax outputs back to the logits:
/// `dL/dz = p ⊙ g − p·(pᵀg)` per row, scattered into a full score grid at
/// the given voxel indices (duplicate indices accumulate).
pub fn scatter_distribution_gradient(
    scores: &FeatureGrid,
    indices: &[usize],
    distributions: &[Vec<f64>],
    grad_rows: &[f64],
) -> Result<Vec<f64>> {
    let classes = scores.channels as usize;
    if distributions.len() != indices.len() || grad_rows.len() != indices.len() * classes {
        return Err(Error::Shape(
            "distribution rows, gradient rows and indices must agree".into(),
        ));
    }
    let mut out = vec![0.0f64; scores.values.len()];
    for (row, &idx) in indices.iter().enumerate() {
        let p = &distributions[row];
        let g = &grad_rows[row * classes..(row + 1) * classes];
        let dot: f64 = p.iter().zip(g).map(|(pi, gi)| pi * gi).sum();
        let slot = &mut out[idx * classes..(idx + 1) * classes];
        for c in 0..classes {
            slot[c] += p[c] * (g[c] - dot);
        }
    }
    Ok(out)
}

/// Loss terms of one resolution level. Lovász and scene-class-affinity
/// reports come from external plug-in callables; absent terms contribute
/// zero.
#[derive(Debug, Clone, Default)]
pub struct LevelTerms {
    pub csa_ce: Option<LossReport>,
    pub lovasz: Option<LossReport>,
    pub scal: Option<LossReport>,
}

/// The circulated term expressed at the raw-score level: its value plus one
/// gradient array per resolution level (produced by chaining the
/// [`circulated_loss`] gradients through [`scatter_distribution_gradient`]).
#[derive(Debug, Clone)]
pub struct CirculatedTerm {
    pub value: f64,
    pub score_gradients: Vec<Vec<f64>>,
}

/// Combined objective: summed per-level values plus gamma times the
/// circulated term, with gradients combined linearly per level.
#[derive(Debug, Clone)]
pub struct TotalObjective {
    pub value: f64,
    /// One gradient array per level, shaped like that level's scores.
    pub score_gradients: Vec<Vec<f64>>,
}

/// Combines per-level loss terms and the circulated term,
/// `value = Σ_i L_occ^i + gamma·L_circ`. Toggled-off or absent plug-in
/// slots contribute zero.
pub fn total_objective(
    levels: &[LevelTerms],
    circulated: Option<&CirculatedTerm>,
    weights: &ObjectiveWeights,
) -> Result<TotalObjective> {
    if weights.gamma < 0.0 {
        return Err(Error::Validation("gamma must be nonnegative".into()));
    }
    if weights.term_toggles.len() != levels.len() {
        return Err(Error::Shape(format!(
            "{} toggle sets for {} levels",
            weights.term_toggles.len(),
            levels.len()
        )));
    }
    if let Some(circ) = circulated {
        if circ.score_gradients.len() != levels.len() {
            return Err(Error::Shape(
                "circulated gradients must cover every level".into(),
            ));
        }
    }

    let mut value = 0.0;
    let mut score_gradients = Vec::with_capacity(levels.len());

    for (level, toggles) in levels.iter().zip(&weights.term_toggles) {
        let mut grad: Option<Vec<f64>> = None;
        let mut add = |report: &LossReport, enabled: bool| -> Result<()> {
            if !enabled {
                return Ok(());
            }
            value += report.value;
            match grad.as_mut() {
                None => grad = Some(report.gradient.clone()),
                Some(g) => {
                    if g.len() != report.gradient.len() {
                        return Err(Error::Shape(
                            "loss terms of one level disagree in gradient shape".into(),
                        ));
                    }
                    for (acc, v) in g.iter_mut().zip(&report.gradient) {
                        *acc += v;
                    }
                }
            }
            Ok(())
        };
        if let Some(report) = &level.csa_ce {
            add(report, toggles.csa_ce)?;
        }
        if let Some(report) = &level.lovasz {
            add(report, toggles.lovasz_plugin)?;
        }
        if let Some(report) = &level.scal {
            add(report, toggles.scal_plugin)?;
        }
        score_gradients.push(grad.unwrap_or_default());
    }

    if let Some(circ) = circulated {
        value += weights.gamma * circ.value;
        for (acc, extra) in score_gradients.iter_mut().zip(&circ.score_gradients) {
            if acc.is_empty() {
                acc.resize(extra.len(), 0.0);
            } else if acc.len() != extra.len() {
                return Err(Error::Shape(
                    "circulated gradient shape differs from the level's scores".into(),
                ));
            }
            for (a, e) in acc.iter_mut().zip(extra) {
                *a += weights.gamma * e;
            }
        }
    }

    Ok(TotalObjective {
        value,
        score_gradients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridDims, GridGeometry};

    fn geom(x: u32, y: u32, z: u32) -> GridGeometry {
        GridGeometry::new(GridDims::new(x, y, z).unwrap(), [0.0; 3], 1.0).unwrap()
    }

    #[test]
    fn confidence_of_uniform_scores() {
        let scores = FeatureGrid::zeros(geom(2, 2, 2), 4);
        let conf = occupancy_confidence(&scores).unwrap();
        assert!(conf.scores.iter().all(|&c| (c - 0.25).abs() < 1e-12));
    }

    #[test]
    fn confidence_saturates_with_margin() {
        let mut scores = FeatureGrid::zeros(geom(1, 1, 1), 3);
        scores.values[1] = 200.0;
        let conf = occupancy_confidence(&scores).unwrap();
        assert!((conf.scores[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confidence_matches_direct_recomputation() {
        let g = geom(2, 2, 2);
        let values: Vec<f64> = (0..24).map(|i| ((i * 7919) % 13) as f64 / 3.0 - 2.0).collect();
        let scores = FeatureGrid::new(g, 3, values).unwrap();
        let conf = occupancy_confidence(&scores).unwrap();
        for idx in 0..8 {
            let row = scores.row(idx);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&v| (v - m).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let expect = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max) / sum;
            assert!((conf.scores[idx] - expect).abs() < 1e-12);
        }
    }

    fn flat_map(g: GridGeometry, values: Vec<f64>) -> AnisotropyMap {
        let n = g.dims.voxel_count();
        AnisotropyMap {
            geometry: g,
            s_surface: vec![0; n],
            s_edge: vec![0; n],
            s_vertex: vec![0; n],
            s_csa: values,
        }
    }

    #[test]
    fn csa_resampling_max_and_mean() {
        let g = geom(2, 2, 2);
        let target = GridDims::new(1, 1, 1).unwrap();

        let constant = flat_map(g, vec![0.7; 8]);
        assert_eq!(csa_to_resolution(&constant, target).unwrap(), vec![0.7]);

        let mut values = vec![0.5; 8];
        values[5] = 10.1;
        let spiky = flat_map(g, values);
        assert_eq!(csa_to_resolution(&spiky, target).unwrap(), vec![10.1]);
        let mean = csa_to_resolution_with(&spiky, target, CsaPooling::Mean).unwrap();
        assert!((mean[0] - (0.5 * 7.0 + 10.1) / 8.0).abs() < 1e-12);

        let bad = GridDims::new(3, 1, 1).unwrap();
        assert!(csa_to_resolution(&spiky, bad).is_err());
    }

    fn score_grid(values: Vec<f64>, g: GridGeometry) -> ScoreGrid {
        ScoreGrid::new(g, values).unwrap()
    }

    #[test]
    fn select_critical_basics() {
        let g = geom(3, 1, 1);
        let conf = score_grid(vec![0.9, 0.1, 0.5], g);
        let csa = vec![1.0; 3];
        let set = select_critical(&conf, &csa, 2).unwrap();
        assert_eq!(set.indices, vec![0, 2]);

        let equal = score_grid(vec![0.5; 3], g);
        let set = select_critical(&equal, &csa, 3).unwrap();
        assert_eq!(set.indices, vec![0, 1, 2]);

        assert!(select_critical(&equal, &csa, 4).is_err());
        assert!(select_critical(&equal, &[1.0; 2], 1).is_err());
    }

    #[test]
    fn select_critical_tie_break_prefers_small_index() {
        let g = geom(2, 2, 1);
        let conf = score_grid(vec![0.5, 0.5, 0.5, 0.5], g);
        let csa = vec![2.0, 2.0, 2.0, 2.0];
        let set = select_critical(&conf, &csa, 2).unwrap();
        assert_eq!(set.indices, vec![0, 1]);
    }

    #[test]
    fn pairing_examples() {
        let pair = ResolutionPair::new(
            GridDims::new(8, 8, 8).unwrap(),
            GridDims::new(4, 4, 4).unwrap(),
            2,
        )
        .unwrap();
        let high = linear_index([5, 3, 7], pair.high).unwrap();
        let low = pair_across_resolutions(&[high], &pair).unwrap()[0];
        assert_eq!(decode_index(low, pair.low).unwrap(), [2, 1, 3]);

        // All 8 children of one low-resolution voxel map to the same index.
        let mut children = Vec::new();
        for dx in 0..2 {
            for dy in 0..2 {
                for dz in 0..2 {
                    children.push(linear_index([2 + dx, 4 + dy, 6 + dz], pair.high).unwrap());
                }
            }
        }
        let mapped = pair_across_resolutions(&children, &pair).unwrap();
        assert!(mapped.iter().all(|&m| m == mapped[0]));

        let identity = ResolutionPair::new(pair.high, pair.high, 1).unwrap();
        let same = pair_across_resolutions(&[high], &identity).unwrap();
        assert_eq!(same, vec![high]);
    }

    #[test]
    fn distributions_are_softmax_rows() {
        let g = geom(1, 1, 2);
        let scores = FeatureGrid::new(g, 3, vec![0.0; 6]).unwrap();
        let rows = voxel_distributions(&scores, &[0, 1]).unwrap();
        assert!(rows[0].iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-12));

        let scores = FeatureGrid::new(g, 2, vec![3.0f64.ln(), 0.0, 0.0, 0.0]).unwrap();
        let rows = voxel_distributions(&scores, &[0]).unwrap();
        assert!((rows[0][0] - 0.75).abs() < 1e-12);
        assert!((rows[0][1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn circulated_identical_rows_are_zero() {
        let p = vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.3, 0.1]];
        let loss = circulated_loss(&p, &p).unwrap();
        assert_eq!(loss.value, 0.0);
    }

    #[test]
    fn circulated_reference_value() {
        let p1 = vec![vec![0.75, 0.25]];
        let p2 = vec![vec![0.5, 0.5]];
        let loss = circulated_loss(&p1, &p2).unwrap();
        // KL(p||q) + KL(q||p) computed by direct summation.
        let direct = 0.75 * (0.75f64 / 0.5).ln()
            + 0.25 * (0.25f64 / 0.5).ln()
            + 0.5 * (0.5f64 / 0.75).ln()
            + 0.5 * (0.5f64 / 0.25).ln();
        assert!((loss.value - direct).abs() < 1e-12);
        assert!((loss.value - 0.274653).abs() < 1e-5);
    }

    #[test]
    fn circulated_swap_symmetry_is_exact() {
        let p1 = vec![vec![0.1, 0.9], vec![0.4, 0.6], vec![0.25, 0.75]];
        let p2 = vec![vec![0.3, 0.7], vec![0.9, 0.1], vec![0.5, 0.5]];
        let a = circulated_loss(&p1, &p2).unwrap();
        let b = circulated_loss(&p2, &p1).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.grad_p1, b.grad_p2);
        assert_eq!(a.grad_p2, b.grad_p1);
    }

    #[test]
    fn circulated_rejects_bad_input() {
        let p1 = vec![vec![0.5, 0.5]];
        let neg = vec![vec![-0.1, 1.1]];
        assert!(matches!(circulated_loss(&p1, &neg), Err(Error::Domain(_))));
        let short = vec![vec![1.0]];
        assert!(matches!(circulated_loss(&p1, &short), Err(Error::Shape(_))));
        let empty: Vec<Vec<f64>> = vec![];
        assert!(circulated_loss(&empty, &empty).is_err());
    }

    #[test]
    fn total_objective_combines_linearly() {
        let report = |v: f64, g: Vec<f64>| LossReport { value: v, gradient: g };
        let levels = vec![
            LevelTerms {
                csa_ce: Some(report(1.5, vec![1.0, 2.0])),
                lovasz: Some(report(0.25, vec![0.5, 0.5])),
                scal: None,
            },
            LevelTerms {
                csa_ce: Some(report(0.75, vec![3.0])),
                lovasz: None,
                scal: None,
            },
        ];
        let circ = CirculatedTerm {
            value: 0.5,
            score_gradients: vec![vec![0.1, 0.2], vec![0.4]],
        };
        let weights = ObjectiveWeights::new(1.0, vec![TermToggles::default(); 2]).unwrap();
        let total = total_objective(&levels, Some(&circ), &weights).unwrap();
        assert!((total.value - (1.5 + 0.25 + 0.75 + 0.5)).abs() < 1e-12);
        assert!((total.score_gradients[0][0] - 1.6).abs() < 1e-12);
        assert!((total.score_gradients[1][0] - 3.4).abs() < 1e-12);

        // gamma = 0 drops the circulated term.
        let weights0 = ObjectiveWeights::new(0.0, vec![TermToggles::default(); 2]).unwrap();
        let total0 = total_objective(&levels, Some(&circ), &weights0).unwrap();
        assert!((total0.value - 2.5).abs() < 1e-12);

        // Toggling off the lovasz slot removes its contribution.
        let toggles = TermToggles {
            lovasz_plugin: false,
            ..TermToggles::default()
        };
        let weights_t =
            ObjectiveWeights::new(1.0, vec![toggles, TermToggles::default()]).unwrap();
        let total_t = total_objective(&levels, Some(&circ), &weights_t).unwrap();
        assert!((total_t.value - (1.5 + 0.75 + 0.5)).abs() < 1e-12);
        assert!((total_t.score_gradients[0][0] - 1.1).abs() < 1e-12);

        // All-zero terms stay zero.
        let zero_levels = vec![LevelTerms::default(), LevelTerms::default()];
        let zero = total_objective(&zero_levels, None, &weights).unwrap();
        assert_eq!(zero.value, 0.0);
    }
}
