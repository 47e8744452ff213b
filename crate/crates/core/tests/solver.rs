//! Simplex against the vertex-enumeration oracle, plus linear-algebra identities.

use noisylp::estimators::{plug_in_value, set_expansion_value};
use noisylp::linalg::{singular_values, sym_eigen};
use noisylp::{
    enumerate_vertices, inverse_vectorize, smallest_singular_value, solve_lp, BoxBounds, LpParams, Matrix, Status,
};
use proptest::prelude::*;

/// Small LPs with box [−2, 2]^d; entries from `cell`.
fn lp_strategy(cell: BoxedStrategy<f64>) -> impl Strategy<Value = LpParams> {
    (1usize..=4, 1usize..=8).prop_flat_map(move |(d, q)| {
        (
            prop::collection::vec(cell.clone(), d),
            prop::collection::vec(cell.clone(), q * d),
            prop::collection::vec(cell.clone(), q),
        )
            .prop_map(move |(p, m, c)| {
                let m = Matrix::new(q, d, m).unwrap();
                LpParams::new(p, m, c, BoxBounds::uniform(d, -2.0, 2.0)).unwrap()
            })
    })
}

/// Integer entries: many degenerate and parallel constraints.
fn integer_cell() -> BoxedStrategy<f64> {
    (-3i32..=3).prop_map(f64::from).boxed()
}

fn real_cell() -> BoxedStrategy<f64> {
    (-3.0f64..3.0).boxed()
}

fn agrees_with_enumeration(lp: &LpParams) -> Result<(), TestCaseError> {
    let sol = solve_lp(lp, true).unwrap();
    let verts = enumerate_vertices(lp).unwrap();
    let (em, ec) = lp.extended();
    for v in &verts {
        for j in 0..em.rows() {
            let lhs: f64 = em.row(j).iter().zip(&v.point).map(|(a, b)| a * b).sum();
            prop_assert!(lhs >= ec[j] - 1e-9, "vertex {:?} violates row {}", v.point, j);
        }
    }
    if verts.is_empty() {
        prop_assert_eq!(sol.status, Status::Infeasible);
        return Ok(());
    }
    prop_assert_eq!(sol.status, Status::Optimal);
    let oracle =
        verts.iter().map(|v| v.point.iter().zip(&lp.p).map(|(a, b)| a * b).sum::<f64>()).fold(f64::INFINITY, f64::min);
    let value = sol.value.unwrap();
    prop_assert!((value - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "simplex {} vs oracle {}", value, oracle);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn simplex_matches_enumeration_integer(lp in lp_strategy(integer_cell())) {
        agrees_with_enumeration(&lp)?;
    }

    #[test]
    fn simplex_matches_enumeration_real(lp in lp_strategy(real_cell())) {
        agrees_with_enumeration(&lp)?;
    }

    #[test]
    fn zero_expansion_is_plug_in(lp in lp_strategy(real_cell()), n in 1usize..10_000) {
        let a = plug_in_value(&lp).unwrap();
        let b = set_expansion_value(&lp, 0.0, n).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.value.map(f64::to_bits), b.value.map(f64::to_bits));
        prop_assert_eq!(a.vertex, b.vertex);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn smallest_singular_value_squared_is_smallest_eigenvalue(entries in prop::collection::vec(-5.0f64..5.0, 25)) {
        let m = Matrix::new(5, 5, entries).unwrap();
        let s = smallest_singular_value(&m).unwrap();
        let (eig, _) = sym_eigen(&m.transpose().matmul(&m).unwrap()).unwrap();
        let lam = eig.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((s * s - lam).abs() <= 1e-9 * (1.0 + lam.abs()), "{} vs {}", s * s, lam);
        prop_assert_eq!(singular_values(&m).len(), 5);
    }

    #[test]
    fn vectorize_round_trip_is_exact(q in 1usize..6, d in 1usize..6, seed in any::<u64>()) {
        let data: Vec<f64> = (0..q * d).map(|k| f64::from_bits(seed.rotate_left(k as u32) >> 2)).collect();
        let m = Matrix::new(q, d, data).unwrap();
        let back = inverse_vectorize(&m.vectorize(), q, d).unwrap();
        prop_assert!(m.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn example_one_truth() {
    let lp = |b: f64| {
        let m = Matrix::from_rows(&[vec![-(1.0 + b), 1.0], vec![1.0, -1.0], vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        LpParams::new(vec![1.0, 0.0], m, vec![0.0, 0.0, -1.0, -1.0], BoxBounds::uniform(2, -2.0, 2.0)).unwrap()
    };
    let sol = solve_lp(&lp(0.0), true).unwrap();
    assert_eq!(sol.value, Some(-1.0));
    assert_eq!(sol.vertex, Some(vec![-1.0, -1.0]));
    for b in [-0.5, -0.05, -1e-3] {
        assert!(solve_lp(&lp(b), true).unwrap().value.unwrap().abs() < 1e-12);
    }
}
