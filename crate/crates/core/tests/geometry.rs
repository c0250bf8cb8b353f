mod common;

use common::{brute_knn, brute_radius_edges, rng};
use proptest::prelude::*;
use protfit::geometry::{
    build_knn_graph, build_radius_graph, cross_knn, knn_lists, mat_vec, random_rotation, rbf_expand, rigid_apply,
    RbfConfig, Vec3,
};
use rand::Rng;

fn cloud(n: usize, extent: f64, rng: &mut impl Rng) -> Vec<Vec3> {
    (0..n).map(|_| [rng.random_range(0.0..extent), rng.random_range(0.0..extent), rng.random_range(0.0..extent)]).collect()
}

/// Points on an integer lattice, so many pairwise distances tie exactly.
fn lattice_cloud(n: usize, side: i32, rng: &mut impl Rng) -> Vec<Vec3> {
    (0..n).map(|_| [0, 1, 2].map(|_| rng.random_range(0..side) as f64)).collect()
}

#[test]
fn radius_graph_matches_brute_force() {
    let mut r = rng(1);
    for trial in 0..20 {
        let pts = if trial % 2 == 0 { cloud(50, 20.0, &mut r) } else { cloud(300, 40.0, &mut r) };
        let g = build_radius_graph(&pts, 8.0);
        assert_eq!(g.edge_set(), brute_radius_edges(&pts, 8.0));
        for e in 0..g.n_edges() {
            let (j, i) = (g.src[e], g.dst[e]);
            assert_eq!(g.edge_vec[e], [pts[j][0] - pts[i][0], pts[j][1] - pts[i][1], pts[j][2] - pts[i][2]]);
        }
    }
}

#[test]
fn knn_graph_matches_brute_force_with_ties() {
    let mut r = rng(2);
    for trial in 0..10 {
        let pts = if trial % 2 == 0 { cloud(200, 15.0, &mut r) } else { lattice_cloud(200, 6, &mut r) };
        let lists = knn_lists(&pts, 16).unwrap();
        for (i, l) in lists.iter().enumerate() {
            assert_eq!(l, &brute_knn(pts[i], &pts, 16, Some(i)), "node {i}");
        }
        let g = build_knn_graph(&pts, 16).unwrap();
        assert!(g.in_degrees().iter().all(|&d| d == 16));
    }
}

#[test]
fn cross_knn_matches_brute_force() {
    let mut r = rng(3);
    for trial in 0..5 {
        let q = cloud(100, 20.0, &mut r);
        let refs = if trial % 2 == 0 { cloud(500, 20.0, &mut r) } else { lattice_cloud(500, 8, &mut r) };
        let got = cross_knn(&q, &refs, 20).unwrap();
        for (qi, row) in got.iter().enumerate() {
            assert_eq!(row, &brute_knn(q[qi], &refs, 20, None));
        }
    }
    assert!(cross_knn(&[[0.0; 3]], &[[1.0; 3]], 2).is_err());
}

#[test]
fn small_and_degenerate_inputs() {
    assert!(knn_lists(&[[0.0; 3]], 3).is_err());
    let two = knn_lists(&[[0.0; 3], [1.0, 0.0, 0.0]], 16).unwrap();
    assert_eq!(two[0].len(), 1);
    // coincident points never link in the radius graph
    let g = build_radius_graph(&[[1.0; 3], [1.0; 3], [2.0, 1.0, 1.0]], 5.0);
    assert!(g.edge_set().iter().all(|&(a, b)| !(a < 2 && b < 2)));
    assert_eq!(build_radius_graph(&[], 5.0).n_edges(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edges_invariant_and_vectors_equivariant_under_rigid_motion(seed in any::<u64>(), n in 2usize..120) {
        let mut r = rng(seed);
        let pts = cloud(n, 25.0, &mut r);
        let rot = random_rotation(&mut r);
        let shift = [r.random_range(-50.0..50.0), r.random_range(-50.0..50.0), r.random_range(-50.0..50.0)];
        let moved: Vec<Vec3> = pts.iter().map(|&p| rigid_apply(&rot, shift, p)).collect();
        let (a, b) = (build_radius_graph(&pts, 8.0), build_radius_graph(&moved, 8.0));
        prop_assert_eq!(a.edge_set(), b.edge_set());
        for e in 0..a.n_edges() {
            let want = mat_vec(&rot, a.edge_vec[e]);
            for k in 0..3 {
                prop_assert!((want[k] - b.edge_vec[e][k]).abs() < 1e-9);
            }
            prop_assert!((a.edge_dist[e] - b.edge_dist[e]).abs() < 1e-9);
        }
        let k = 8.min(n - 1);
        let (ka, kb) = (build_knn_graph(&pts, k).unwrap(), build_knn_graph(&moved, k).unwrap());
        prop_assert_eq!(ka.edge_set(), kb.edge_set());
    }

    #[test]
    fn rbf_features_in_unit_interval(d in 0.0f64..100.0, kernels in 1usize..32) {
        let cfg = RbfConfig::evenly_spaced(kernels, 0.0, 20.0).unwrap();
        let f = rbf_expand(d, &cfg);
        prop_assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // far kernels may underflow, the nearest one cannot inside the range
        if d <= 20.0 && kernels > 1 {
            prop_assert!(f.iter().cloned().fold(0.0, f64::max) >= (-0.25f64).exp() - 1e-15);
        }
    }

    #[test]
    fn rotations_are_orthonormal(seed in any::<u64>()) {
        let rot = random_rotation(&mut rng(seed));
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rot[i][k] * rot[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-12);
            }
        }
        let det = rot[0][0] * (rot[1][1] * rot[2][2] - rot[1][2] * rot[2][1])
            - rot[0][1] * (rot[1][0] * rot[2][2] - rot[1][2] * rot[2][0])
            + rot[0][2] * (rot[1][0] * rot[2][1] - rot[1][1] * rot[2][0]);
        prop_assert!((det - 1.0).abs() < 1e-12);
    }
}

#[test]
fn rbf_peaks_at_centers() {
    let cfg = RbfConfig::evenly_spaced(16, 0.0, 20.0).unwrap();
    for (r, &c) in cfg.centers.iter().enumerate() {
        let f = rbf_expand(c, &cfg);
        assert_eq!(f[r], 1.0);
        let step = 20.0 / 15.0;
        assert!((cfg.gamma - 1.0 / (step * step)).abs() < 1e-12);
    }
}
