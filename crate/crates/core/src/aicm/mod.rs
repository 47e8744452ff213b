//! Bounds on treatment effects from affine inequalities over conditional
//! moments: microdata ingestion, compilation of assumption sets into LP
//! parameters, the closed-form recursion for the weak conditional-monotone
//! instrument, and a θ̂ estimator that plugs compiled bounds into inference.

mod cmivw;
mod compile;
mod estimator;
mod table;

pub use cmivw::{alpha_allocation, cmivw_bounds, ets_estimate, miv_bounds, RecursiveBounds};
pub use compile::{
    block, block_program, compile, identified_set, mtr_matrix, variable_labels, Assumption, AssumptionSpec, BlockKind,
    BoundResult, CompiledProgram, Direction, MomentLabel, Relaxation, Target,
};
pub use estimator::AicmThetaEstimator;
pub use table::{ingest_sample, ingest_with_support, read_records, sort_labels, ConditionalMomentTable, Record};

use rand::Rng as _;

use crate::error::{arg_err, Result};
use crate::rng::Rng;

fn level(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// A random table whose population moments satisfy every assumption here:
/// all `E[Y(t) | T = d, Z = z]` equal `g_t(z)`, increasing in t and z and
/// inside `[k0, k1]`. Cell probabilities are random; counts are zero.
pub fn synthetic_table(rng: &mut Rng, n_t: usize, n_z: usize, k0: f64, k1: f64) -> Result<ConditionalMomentTable> {
    if n_t == 0 || n_z == 0 || !(k0 < k1) {
        return arg_err("synthetic table needs n_t, n_z >= 1 and k0 < k1");
    }
    let mut a: Vec<f64> = (0..n_t).map(|_| rng.random::<f64>()).collect();
    let mut b: Vec<f64> = (0..n_z).map(|_| rng.random::<f64>()).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut prob: Vec<Vec<f64>> = (0..n_t).map(|_| (0..n_z).map(|_| 0.05 + rng.random::<f64>()).collect()).collect();
    let total: f64 = prob.iter().flatten().sum();
    prob.iter_mut().flatten().for_each(|p| *p /= total);
    let mean = (0..n_t).map(|t| (0..n_z).map(|z| Some(k0 + (k1 - k0) * (a[t] + b[z]) / 2.0)).collect()).collect();
    ConditionalMomentTable::new(
        (0..n_t).map(|t| t.to_string()).collect(),
        (0..n_z).map(|z| z.to_string()).collect(),
        mean,
        prob,
        vec![vec![0; n_z]; n_t],
        vec![true; n_t],
    )
}

/// Microdata from a design satisfying every assumption: Z uniform on
/// `0..n_z`, T | Z with fixed uneven weights, and
/// `Y(t) = g_t(Z) + U` with `g_t` increasing in t and Z and U uniform,
/// independent of (T, Z), all within `[k0, k1]`.
pub fn synthetic_records(rng: &mut Rng, n: usize, n_t: usize, n_z: usize, k0: f64, k1: f64) -> Result<Vec<Record>> {
    if n_t == 0 || n_z == 0 || !(k0 < k1) {
        return arg_err("synthetic records need n_t, n_z >= 1 and k0 < k1");
    }
    let span = k1 - k0;
    let weights: Vec<Vec<f64>> =
        (0..n_z).map(|z| (0..n_t).map(|t| 0.5 + ((t * 7 + z * 3) % 5) as f64 / 5.0).collect()).collect();
    Ok((0..n)
        .map(|_| {
            let z = rng.random_range(0..n_z);
            let total: f64 = weights[z].iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut t = n_t - 1;
            for (k, w) in weights[z].iter().enumerate() {
                if u < *w {
                    t = k;
                    break;
                }
                u -= w;
            }
            let g = k0 + span * (0.25 + 0.25 * (level(t, n_t) + level(z, n_z)));
            let y = g + span * 0.25 * (2.0 * rng.random::<f64>() - 1.0);
            Record { y: Some(y), t: t.to_string(), z: z.to_string() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Status;
    use crate::rng::substream;

    /// Binary T, three z levels, observed means 0, P[T ≠ t | Z] = 1/8, 1/2, 1/4.
    fn ironing_example() -> ConditionalMomentTable {
        let pz = 1.0 / 3.0;
        let pn = [0.125, 0.5, 0.25];
        let prob = vec![pn.iter().map(|p| pz * p).collect(), pn.iter().map(|p| pz * (1.0 - p)).collect()];
        ConditionalMomentTable::new(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into(), "2".into()],
            vec![vec![Some(0.0); 3], vec![Some(0.0); 3]],
            prob,
            vec![vec![1; 3]; 2],
            vec![true, true],
        )
        .unwrap()
    }

    fn spec(assumptions: Vec<Assumption>, target: Target) -> AssumptionSpec {
        AssumptionSpec { assumptions, target, direction: Direction::Lower }
    }

    #[test]
    fn ironing_example_bounds() {
        let tab = ironing_example();
        let (miv_lo, _) = miv_bounds(&tab, "1", -1.0, 1.0).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14);
        assert!(close(&miv_lo, &[-0.125; 3]), "{miv_lo:?}");
        let r = cmivw_bounds(&tab, "1", -1.0, 1.0).unwrap();
        assert!(close(&r.lower, &[-0.125, -0.125, -0.0625]), "{r:?}");
        assert!(close(&r.lower_cf, &[-1.0, -0.25, -0.25]), "{r:?}");
        // The LP for E[Y(t) | Z = z] agrees with both closed forms.
        for (assumption, expect) in [(Assumption::Miv, -0.125), (Assumption::CmivP, -0.0625)] {
            let s = spec(
                vec![Assumption::Bounds { k0: -1.0, k1: 1.0 }, assumption],
                Target::ConditionalMean { t: "1".into(), z: "2".into() },
            );
            let b = compile(&tab, &s).unwrap().solve().unwrap();
            assert!((b.bound.unwrap() - expect).abs() < 1e-9, "{b:?}");
        }
    }

    #[test]
    fn mtr_matrix_three() {
        let m = mtr_matrix(3).unwrap();
        assert_eq!(m.to_rows(), vec![vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0]]);
    }

    #[test]
    fn miv_block_is_probability_row() {
        let tab = ironing_example();
        let (g, c) = block(&tab, 1, 0, BlockKind::Miv);
        assert_eq!(g.to_rows(), vec![vec![0.125]]);
        assert_eq!(c, vec![0.0]);
        let (g, _) = block(&tab, 1, 0, BlockKind::CmivS);
        assert_eq!(g.rows(), 2);
    }

    #[test]
    fn labels_cover_unobserved_moments() {
        let tab = ironing_example();
        let s = spec(vec![Assumption::Bounds { k0: -1.0, k1: 1.0 }], Target::MeanPotential { t: "1".into() });
        let prog = compile(&tab, &s).unwrap();
        assert_eq!(prog.labels.len(), 6);
        assert!(prog.labels.iter().all(|l| l.t != l.d));
        assert_eq!(prog.labels[0], MomentLabel { t: "0".into(), d: "1".into(), z: "2".into() });
    }

    #[test]
    fn degenerate_support_gives_point_bounds() {
        let mut rng = substream(3, &[]);
        let tab = synthetic_table(&mut rng, 2, 3, 0.0, 1.0).unwrap();
        let mut tab2 = tab.clone();
        tab2.cell_mean.iter_mut().flatten().for_each(|m| *m = Some(0.5));
        let (lo, hi) =
            identified_set(&tab2, &[Assumption::Bounds { k0: 0.5, k1: 0.5 }], &Target::MeanPotential { t: "0".into() })
                .unwrap();
        assert_eq!(lo.status, Status::Optimal);
        assert!((lo.bound.unwrap() - 0.5).abs() < 1e-12 && (hi.bound.unwrap() - 0.5).abs() < 1e-12);
        let r = cmivw_bounds(&tab2, "0", 0.5, 0.5).unwrap();
        assert!(r.lower.iter().chain(&r.upper).all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn ets_and_alpha() {
        let tab = ConditionalMomentTable::new(
            vec!["0".into(), "1".into()],
            vec!["a".into()],
            vec![vec![Some(0.5)], vec![Some(2.0)]],
            vec![vec![0.5], vec![0.5]],
            vec![vec![1], vec![1]],
            vec![true, true],
        )
        .unwrap();
        assert!((ets_estimate(&tab, "1", "0").unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(ets_estimate(&tab, "1", "1").unwrap(), 0.0);
        let a = alpha_allocation(0.1, 4).unwrap();
        assert!((a - 0.0260).abs() < 5e-5);
        assert!(((1.0 - a).powi(4) - 0.9).abs() < 1e-12);
        assert_eq!(alpha_allocation(0.1, 1).unwrap(), 0.1);
    }

    #[test]
    fn ingest_and_faults() {
        let rec = |y: Option<f64>, t: &str, z: &str| Record { y, t: t.into(), z: z.into() };
        let recs = vec![
            rec(Some(3.0), "0", "0"),
            rec(Some(3.0), "0", "1"),
            rec(Some(3.0), "1", "0"),
            rec(Some(3.0), "1", "1"),
        ];
        let tab = ingest_sample(&recs, None).unwrap();
        assert!(tab.cell_prob.iter().flatten().all(|&p| p == 0.25));
        assert!(tab.cell_mean.iter().flatten().all(|&m| m == Some(3.0)));
        let err = ingest_sample(&recs[..3], None).unwrap_err();
        assert_eq!(err, crate::Error::EmptyCell { t: "1".into(), z: "1".into() });
        let mut miss = recs.clone();
        miss[3].y = None;
        assert!(ingest_sample(&miss, None).is_err());
        let csv = "y,t,z\n1.5,0,a\n,1,a\n";
        let parsed = read_records(csv.as_bytes()).unwrap();
        assert_eq!(parsed[1], rec(None, "1", "a"));
    }

    #[test]
    fn missing_data_with_bounds_only() {
        let rec = |y: Option<f64>, t: &str| Record { y, t: t.into(), z: "0".into() };
        let recs = vec![rec(Some(1.0), "1"), rec(None, "0"), rec(Some(1.0), "1"), rec(None, "0")];
        let tab = ingest_sample(&recs, None).unwrap();
        assert_eq!(tab.observed, vec![false, true]);
        let (lo, hi) =
            identified_set(&tab, &[Assumption::Bounds { k0: 0.0, k1: 2.0 }], &Target::MeanPotential { t: "0".into() })
                .unwrap();
        assert_eq!((lo.bound.unwrap(), hi.bound.unwrap()), (0.0, 2.0));
        let s = spec(
            vec![Assumption::Bounds { k0: 0.0, k1: 2.0 }, Assumption::CmivP],
            Target::MeanPotential { t: "0".into() },
        );
        assert!(matches!(compile(&tab, &s), Err(crate::Error::Unsupported(_))));
    }
}
