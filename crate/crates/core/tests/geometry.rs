//! Condition numbers, the L1 minorization and exact projection on random polytopes.

use noisylp::geometry::{distance_to_polytope, l1_violation, normalize_rows, polytope_condition_number, Polytope};
use noisylp::linalg::{rank, singular_values};
use noisylp::lp::{enumerate_system_vertices, TAU_RANK};
use noisylp::rng::substream;
use noisylp::Matrix;
use rand::Rng as _;

/// Bounded polytope: a box `[−1, 1]^d` plus random rows through or near a
/// random interior point. Some rows are tight at that point (degenerate faces).
fn random_polytope(seed: u64, case: u64) -> Polytope {
    let mut rng = substream(seed, &[case]);
    let d = rng.random_range(1..=3);
    let extra = rng.random_range(0..=8 - 2 * d);
    let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut rows = Vec::new();
    let mut c = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut r = vec![0.0; d];
            r[i] = s;
            rows.push(r);
            c.push(-1.0);
        }
    }
    for _ in 0..extra {
        let r: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let slack = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) };
        c.push(r.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() - slack);
        rows.push(r);
    }
    Polytope::new(Matrix::from_rows(&rows).unwrap(), c).unwrap()
}

#[test]
fn l1_minorization_on_random_polytopes() {
    let mut worst = f64::INFINITY;
    for case in 0..500 {
        let poly = normalize_rows(&random_polytope(11, case)).unwrap();
        let kappa = polytope_condition_number(&poly).unwrap();
        assert!(kappa > 0.0);
        let mut rng = substream(12, &[case]);
        let mut tested = 0;
        while tested < 10 {
            let x: Vec<f64> = (0..poly.d()).map(|_| rng.random_range(-3.0..3.0)).collect();
            if poly.contains(&x) {
                continue;
            }
            let (dist, _) = distance_to_polytope(&poly, &x).unwrap();
            let slack = l1_violation(&poly, &x) - dist * kappa;
            worst = worst.min(slack);
            assert!(slack >= -1e-8, "case {case}: violation below κ·distance by {slack}");
            tested += 1;
        }
    }
    println!("smallest L1 minorization slack {worst:e}");
}

/// κ over every proper face by brute force: faces from row subsets, each
/// described by the rows binding on all of its vertices.
fn kappa_over_faces(poly: &Polytope) -> f64 {
    let q = poly.m.rows();
    let verts = enumerate_system_vertices(&poly.m, &poly.c, 1 << 20).unwrap();
    let mut kappa = f64::INFINITY;
    for mask in 1u32..(1 << q) {
        let s: Vec<usize> = (0..q).filter(|j| mask >> j & 1 == 1).collect();
        let on_face: Vec<_> = verts.iter().filter(|v| s.iter().all(|j| v.binding.contains(j))).collect();
        if on_face.is_empty() {
            continue;
        }
        let a: Vec<usize> = (0..q).filter(|j| on_face.iter().all(|v| v.binding.contains(j))).collect();
        let r = rank(&poly.m.select_rows(&a), TAU_RANK);
        if r == 0 {
            continue;
        }
        // Subsets B of A with |B| = rk(M_B) = r.
        for bmask in 1u32..(1 << a.len()) {
            if bmask.count_ones() as usize != r {
                continue;
            }
            let b: Vec<usize> = (0..a.len()).filter(|k| bmask >> k & 1 == 1).map(|k| a[k]).collect();
            let mb = poly.m.select_rows(&b);
            if rank(&mb, TAU_RANK) == r {
                let sv = singular_values(&mb);
                kappa = kappa.min(sv.iter().copied().fold(f64::INFINITY, f64::min));
            }
        }
    }
    kappa
}

#[test]
fn vertex_condition_number_equals_face_minimum() {
    for case in 0..100 {
        let poly = normalize_rows(&random_polytope(21, case)).unwrap();
        let by_vertex = polytope_condition_number(&poly).unwrap();
        let by_face = kappa_over_faces(&poly);
        assert!((by_vertex - by_face).abs() <= 1e-9, "case {case}: {by_vertex} vs {by_face}");
    }
}

#[test]
fn projection_matches_dense_grid() {
    let h = 0.01;
    let steps = 600;
    for case in 0..30 {
        let poly = (0..).map(|k| random_polytope(31, case + 1000 * k)).find(|p| p.d() == 2).unwrap();
        let mut rng = substream(32, &[case]);
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let (dist, proj) = distance_to_polytope(&poly, &x).unwrap();
        assert!(poly.contains(&proj));
        let mut grid_best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let g = [-3.0 + h * i as f64, -3.0 + h * j as f64];
                if poly.contains(&g) {
                    grid_best = grid_best.min(((g[0] - x[0]).powi(2) + (g[1] - x[1]).powi(2)).sqrt());
                }
            }
        }
        // The grid minimizer is never closer than the exact one and at most one cell diagonal farther.
        assert!(dist <= grid_best + 1e-12, "case {case}: exact {dist} vs grid {grid_best}");
        assert!(grid_best - dist <= h * 2f64.sqrt(), "case {case}: exact {dist} vs grid {grid_best}");
    }
}

#[test]
fn unit_box_condition_number_is_one() {
    for d in 1..=4 {
        let mut rows = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; d];
                r[i] = s;
                rows.push(r);
            }
        }
        let poly = Polytope::new(Matrix::from_rows(&rows).unwrap(), vec![-1.0; 2 * d]).unwrap();
        assert_eq!(polytope_condition_number(&poly).unwrap(), 1.0);
    }
}
