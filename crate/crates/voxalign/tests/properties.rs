//! Property tests for the invariants each module guarantees.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use proptest::prelude::*;

use voxalign::camera::{backproject_pixel, in_fov, project_point, CameraRig};
use voxalign::cda::{circulated_loss, select_critical};
use voxalign::csa::{
    csa_cross_entropy, cubic_anisotropy, reassign, AnisotropyMap, BorderPolicy, CsaParams,
    SemanticGroups,
};
use voxalign::grid::{
    decode_index, linear_index, rescale_labels, ClassTable, GridDims, GridGeometry, LabelGrid,
};
use voxalign::kittio::{read_container, write_container, GridContainer};
use voxalign::lift::{
    downsample_avgpool, select_seeds, upsample_trilinear, FeatureGrid, ScoreGrid,
};
use voxalign::metrics::{confusion, iou_miou, sparsity_stats};

fn dims_strategy(max: u32) -> impl Strategy<Value = GridDims> {
    (1..=max, 1..=max, 1..=max).prop_map(|(x, y, z)| GridDims::new(x, y, z).unwrap())
}

fn unit_geometry(dims: GridDims) -> GridGeometry {
    GridGeometry::new(dims, [0.0; 3], 1.0).unwrap()
}

fn label_grid_strategy(max_dim: u32, classes: u16) -> impl Strategy<Value = LabelGrid> {
    dims_strategy(max_dim).prop_flat_map(move |dims| {
        proptest::collection::vec(0..classes, dims.voxel_count())
            .prop_map(move |labels| LabelGrid::new(unit_geometry(dims), labels, None).unwrap())
    })
}

fn rotation_strategy() -> impl Strategy<Value = Matrix3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.01..1.0f64).prop_map(|(x, y, z, w)| {
        UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z))
            .to_rotation_matrix()
            .into_inner()
    })
}

fn rig_strategy() -> impl Strategy<Value = CameraRig> {
    (
        rotation_strategy(),
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
        (50.0..500.0f64, 50.0..500.0f64),
        (-20.0..20.0f64, -20.0..20.0f64),
    )
        .prop_map(|(r, (tx, ty, tz), (fx, fy), (cx, cy))| {
            let k = Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
            CameraRig::new(k, r, Vector3::new(tx, ty, tz), (640, 480)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_index_is_a_bijection(dims in dims_strategy(8)) {
        let mut seen = vec![false; dims.voxel_count()];
        for x in 0..dims.x {
            for y in 0..dims.y {
                for z in 0..dims.z {
                    let idx = linear_index([x, y, z], dims).unwrap();
                    prop_assert!(!seen[idx]);
                    seen[idx] = true;
                    prop_assert_eq!(decode_index(idx, dims).unwrap(), [x, y, z]);
                }
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn rescale_identity_and_histogram(grid in label_grid_strategy(6, 5)) {
        let same = rescale_labels(&grid, 1).unwrap();
        prop_assert_eq!(&same.labels, &grid.labels);

        // A constant grid stays constant under any valid factor.
        let constant = LabelGrid::new(grid.geometry, vec![3; grid.labels.len()], None).unwrap();
        let dims = grid.dims();
        for factor in 2..=3u32 {
            if dims.x % factor == 0 && dims.y % factor == 0 && dims.z % factor == 0 {
                let out = rescale_labels(&constant, factor).unwrap();
                prop_assert!(out.labels.iter().all(|&l| l == 3));
                // Output histogram total equals the low-resolution voxel count.
                let report = sparsity_stats(&out);
                prop_assert_eq!(report.valid_voxels as usize, out.dims().voxel_count());
            }
        }
    }

    #[test]
    fn projection_roundtrip(rig in rig_strategy(),
                            cam_point in ((-10.0..10.0f64), (-10.0..10.0f64), (0.1..100.0f64))) {
        // Build the world point from a camera-frame point so depth is positive.
        let cam = Vector3::new(cam_point.0, cam_point.1, cam_point.2);
        let world = rig.rotation().transpose() * (cam - rig.translation());
        let p = [world.x, world.y, world.z];
        let (u, v, z) = project_point(p, &rig).unwrap();
        prop_assert!((z - cam_point.2).abs() < 1e-9);
        let back = backproject_pixel(u, v, z, &rig).unwrap();
        for axis in 0..3 {
            prop_assert!((back[axis] - p[axis]).abs() < 1e-9);
        }
    }

    #[test]
    fn fov_is_monotone_in_image_size(rig in rig_strategy(),
                                     u in -100.0..800.0f64,
                                     v in -100.0..600.0f64,
                                     z in -2.0..10.0f64) {
        let bigger = CameraRig::new(
            *rig.intrinsics(),
            *rig.rotation(),
            *rig.translation(),
            (1280, 960),
        ).unwrap();
        if in_fov(u, v, z, &rig) {
            prop_assert!(in_fov(u, v, z, &bigger));
        }
    }

    #[test]
    fn projection_is_rigid_invariant(rig in rig_strategy(),
                                     g_rot in rotation_strategy(),
                                     gt in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
                                     cam_point in ((-5.0..5.0f64), (-5.0..5.0f64), (0.5..50.0f64))) {
        let cam = Vector3::new(cam_point.0, cam_point.1, cam_point.2);
        let world = rig.rotation().transpose() * (cam - rig.translation());
        let g_t = Vector3::new(gt.0, gt.1, gt.2);

        // Transform the point by G and fold G⁻¹ into the rig.
        let moved = g_rot * world + g_t;
        let new_r = rig.rotation() * g_rot.transpose();
        let new_t = rig.translation() - new_r * g_t;
        let composed = CameraRig::with_tolerance(
            *rig.intrinsics(), new_r, new_t, rig.image_size(), 1e-6,
        ).unwrap();

        let (u0, v0, z0) = project_point([world.x, world.y, world.z], &rig).unwrap();
        let (u1, v1, z1) = project_point([moved.x, moved.y, moved.z], &composed).unwrap();
        prop_assert!((u0 - u1).abs() < 1e-6, "{u0} vs {u1}");
        prop_assert!((v0 - v1).abs() < 1e-6);
        prop_assert!((z0 - z1).abs() < 1e-9);
    }

    #[test]
    fn avgpool_preserves_global_mean(values in proptest::collection::vec(-10.0..10.0f64, 64),
                                     factor in prop_oneof![Just(2u32), Just(4u32)]) {
        let geom = unit_geometry(GridDims::new(4, 4, 4).unwrap());
        let feat = FeatureGrid::new(geom, 1, values).unwrap();
        let down = downsample_avgpool(&feat, factor).unwrap();
        let mean_in: f64 = feat.values.iter().sum::<f64>() / feat.values.len() as f64;
        let mean_out: f64 = down.values.iter().sum::<f64>() / down.values.len() as f64;
        prop_assert!((mean_in - mean_out).abs() < 1e-12);
    }

    #[test]
    fn upsample_respects_input_bounds(values in proptest::collection::vec(-10.0..10.0f64, 27),
                                      factor in 1..=3u32) {
        let geom = unit_geometry(GridDims::new(3, 3, 3).unwrap());
        let feat = FeatureGrid::new(geom, 1, values).unwrap();
        let up = upsample_trilinear(&feat, factor).unwrap();
        let lo = feat.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = feat.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for &v in &up.values {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn seed_selection_ignores_feature_values(scores in proptest::collection::vec(0.0..1.0f64, 8),
                                             a in proptest::collection::vec(-5.0..5.0f64, 8),
                                             b in proptest::collection::vec(-5.0..5.0f64, 8),
                                             theta in 0.0..1.0f64) {
        let geom = unit_geometry(GridDims::new(2, 2, 2).unwrap());
        let proposals = ScoreGrid::new(geom, scores).unwrap();
        let feat_a = FeatureGrid::new(geom, 1, a).unwrap();
        let feat_b = FeatureGrid::new(geom, 1, b).unwrap();
        let seeds_a = select_seeds(&feat_a, &proposals, theta).unwrap();
        let seeds_b = select_seeds(&feat_b, &proposals, theta).unwrap();
        prop_assert_eq!(seeds_a.indices, seeds_b.indices);
    }

    #[test]
    fn anisotropy_count_bounds(grid in label_grid_strategy(5, 4),
                               pad in proptest::bool::ANY) {
        let params = CsaParams {
            border_policy: if pad { BorderPolicy::PadEmpty } else { BorderPolicy::Skip },
            ..CsaParams::default()
        };
        let map = cubic_anisotropy(&grid, &params).unwrap();
        for idx in 0..grid.dims().voxel_count() {
            prop_assert!(map.s_surface[idx] <= 6);
            prop_assert!(map.s_edge[idx] <= 12);
            prop_assert!(map.s_vertex[idx] <= 8);
        }
        // Global bounds of the projected weight.
        let upper = params.alpha * (6.0 + 12.0 * params.w_e + 8.0 * params.w_v) + params.beta;
        for &w in &map.s_csa {
            prop_assert!(w >= params.beta - 1e-12 && w <= upper + 1e-12);
        }
    }

    #[test]
    fn anisotropy_is_group_permutation_invariant(grid in label_grid_strategy(4, 4)) {
        // Apply a bijection to the group ids; XOR only sees equality.
        let perm = [2u16, 0, 3, 1];
        let permuted_labels: Vec<u16> = grid.labels.iter().map(|&l| perm[l as usize]).collect();
        let permuted = LabelGrid::new(grid.geometry, permuted_labels, None).unwrap();
        let params = CsaParams::default();
        let a = cubic_anisotropy(&grid, &params).unwrap();
        let b = cubic_anisotropy(&permuted, &params).unwrap();
        prop_assert_eq!(a.s_surface, b.s_surface);
        prop_assert_eq!(a.s_edge, b.s_edge);
        prop_assert_eq!(a.s_vertex, b.s_vertex);
    }

    #[test]
    fn coarser_grouping_never_increases_counts(grid in label_grid_strategy(4, 20)) {
        let table = ClassTable::semantic_kitti();
        let params = CsaParams::default();
        let groupings = [
            SemanticGroups::c0(&table),
            SemanticGroups::c1(&table).unwrap(),
            SemanticGroups::c2(&table).unwrap(),
            SemanticGroups::c3(&table),
        ];
        let maps: Vec<AnisotropyMap> = groupings
            .iter()
            .map(|g| cubic_anisotropy(&reassign(&grid, g).unwrap(), &params).unwrap())
            .collect();
        // C0 coarsens C1 coarsens C2 coarsens C3.
        for pair in maps.windows(2) {
            for idx in 0..grid.dims().voxel_count() {
                prop_assert!(pair[0].s_surface[idx] <= pair[1].s_surface[idx]);
                prop_assert!(pair[0].s_edge[idx] <= pair[1].s_edge[idx]);
                prop_assert!(pair[0].s_vertex[idx] <= pair[1].s_vertex[idx]);
            }
        }
    }

    #[test]
    fn unit_weights_reduce_to_plain_cross_entropy(
        logits in proptest::collection::vec(-4.0..4.0f64, 24),
        labels in proptest::collection::vec(0..3u16, 8),
    ) {
        let geom = unit_geometry(GridDims::new(2, 2, 2).unwrap());
        let scores = FeatureGrid::new(geom, 3, logits).unwrap();
        let label_grid = LabelGrid::new(geom, labels.clone(), None).unwrap();
        let ones = AnisotropyMap {
            geometry: geom,
            s_surface: vec![0; 8],
            s_edge: vec![0; 8],
            s_vertex: vec![0; 8],
            s_csa: vec![1.0; 8],
        };
        let report = csa_cross_entropy(&scores, &label_grid, &ones, None).unwrap();

        // Direct mean cross entropy with an independent softmax.
        let mut direct = 0.0;
        for idx in 0..8 {
            let row = scores.row(idx);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&v| (v - m).exp()).sum();
            let p = (row[labels[idx] as usize] - m).exp() / sum;
            direct += -p.ln();
        }
        direct /= 8.0;
        prop_assert!((report.value - direct).abs() < 1e-12);

        // Softmax-Jacobian property: gradient rows sum to zero.
        for row in report.gradient.chunks(3) {
            prop_assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn circulated_loss_nonnegative_and_symmetric(
        raw1 in proptest::collection::vec(0.01..1.0f64, 12),
        raw2 in proptest::collection::vec(0.01..1.0f64, 12),
    ) {
        let normalize = |raw: &[f64]| -> Vec<Vec<f64>> {
            raw.chunks(4)
                .map(|row| {
                    let sum: f64 = row.iter().sum();
                    row.iter().map(|v| v / sum).collect()
                })
                .collect()
        };
        let p1 = normalize(&raw1);
        let p2 = normalize(&raw2);
        let a = circulated_loss(&p1, &p2).unwrap();
        let b = circulated_loss(&p2, &p1).unwrap();
        prop_assert!(a.value >= 0.0);
        prop_assert_eq!(a.value, b.value);

        let same = circulated_loss(&p1, &p1).unwrap();
        prop_assert_eq!(same.value, 0.0);
    }

    #[test]
    fn critical_selection_scale_invariant(scores in proptest::collection::vec(0.0..1.0f64, 27),
                                          csa in proptest::collection::vec(0.5..10.0f64, 27),
                                          k in 1..27usize) {
        let geom = unit_geometry(GridDims::new(3, 3, 3).unwrap());
        let conf = ScoreGrid::new(geom, scores).unwrap();
        let set = select_critical(&conf, &csa, k).unwrap();
        // Doubling the anisotropy rescales every product exactly.
        let scaled: Vec<f64> = csa.iter().map(|v| v * 2.0).collect();
        let set2 = select_critical(&conf, &scaled, k).unwrap();
        prop_assert_eq!(set.indices, set2.indices);
    }

    #[test]
    fn confusion_swap_symmetry_and_relabeling(
        a in proptest::collection::vec(0..4u16, 27),
        b in proptest::collection::vec(0..4u16, 27),
    ) {
        let geom = unit_geometry(GridDims::new(3, 3, 3).unwrap());
        let pred = LabelGrid::new(geom, a.clone(), None).unwrap();
        let gt = LabelGrid::new(geom, b.clone(), None).unwrap();

        let ab = confusion(&pred, &gt, None).unwrap();
        let ba = confusion(&gt, &pred, None).unwrap();
        prop_assert_eq!(ab.binary.tp, ba.binary.tp);
        prop_assert_eq!(ab.binary.fp, ba.binary.fn_);
        prop_assert_eq!(ab.binary.fn_, ba.binary.fp);
        for (x, y) in ab.per_class.iter().zip(&ba.per_class) {
            prop_assert_eq!(x.tp, y.tp);
            prop_assert_eq!(x.fp, y.fn_);
            prop_assert_eq!(x.fn_, y.fp);
        }

        // A bijective relabeling of the NON-empty classes permutes the
        // per-class IoUs and leaves mIoU unchanged.
        let perm = [0u16, 3, 1, 2];
        let map = |v: &[u16]| -> Vec<u16> { v.iter().map(|&l| perm[l as usize]).collect() };
        let pred_p = LabelGrid::new(geom, map(&a), None).unwrap();
        let gt_p = LabelGrid::new(geom, map(&b), None).unwrap();
        let base = iou_miou(&voxalign::metrics::confusion_with_classes(&pred, &gt, None, 4).unwrap());
        let perm_res = iou_miou(&voxalign::metrics::confusion_with_classes(&pred_p, &gt_p, None, 4).unwrap());
        prop_assert!((base.miou - perm_res.miou).abs() < 1e-12);
        prop_assert!((base.iou - perm_res.iou).abs() < 1e-12);
        let mut sorted_a = base.per_class.clone();
        let mut sorted_b = perm_res.per_class.clone();
        sorted_a.sort_by(f64::total_cmp);
        sorted_b.sort_by(f64::total_cmp);
        prop_assert_eq!(sorted_a, sorted_b);
    }

    #[test]
    fn container_roundtrips_are_lossless(dims in dims_strategy(4),
                                         channels in 1..4u32,
                                         seed in proptest::num::u64::ANY) {
        let geom = unit_geometry(dims);
        let mut rng = voxalign::SplitMix64::new(seed);
        let n = dims.voxel_count() * channels as usize;
        let values: Vec<f64> = (0..n).map(|_| rng.next_f64() * 200.0 - 100.0).collect();
        let grid = FeatureGrid::new(geom, channels, values).unwrap();
        let container = GridContainer::from_feature_grid(&grid).unwrap();
        let bytes = write_container(&container).unwrap();
        let back = read_container(&bytes).unwrap();
        prop_assert_eq!(&back, &container);
        let bytes_again = write_container(&back).unwrap();
        prop_assert_eq!(bytes_again, bytes);
    }
}
