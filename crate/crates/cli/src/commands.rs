use std::collections::BTreeMap;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use noisylp::aicm::{
    cmivw_bounds, compile, ets_estimate, ingest_sample, read_records, AicmThetaEstimator, Assumption, AssumptionSpec,
    BoundResult, ConditionalMomentTable, Direction, Target,
};
use noisylp::estimators::{debiased_estimate, kappa_rule, penalty_value, plug_in_value, set_expansion_value, Penalty};
use noisylp::geometry::{check_a1, delta_condition, polytope_condition_number, Polytope};
use noisylp::inference::{combine_two_sided, run_inference, InferenceResult, MeanThetaEstimator, TwoSidedInterval};
use noisylp::linalg::psd_factor;
use noisylp::montecarlo::{draw_observations, run_consistency, run_inference_study, run_uniform_grid, EstimatorKind};
use noisylp::rng::{purpose, substream};
use noisylp::{Error, LpDocument, LpParams, Matrix, Result};

use crate::config::{
    check_command, AicmConfig, BoundSide, EstimateConfig, InferConfig, SimulateConfig, Study, ThetaSource,
};

/// A command's product: canonical JSON or CSV text.
pub enum Output {
    Json(Value),
    Csv(String),
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn fault_value(e: &Error) -> Value {
    json!({"error": {"code": e.code(), "message": e.to_string()}})
}

fn diagnostics(params: &LpParams, weights: Option<&[f64]>) -> Value {
    let delta = delta_condition(params).map_or_else(|e| fault_value(&e), |r| to_value(&r));
    let kappa =
        polytope_condition_number(&Polytope::from_params(params, true)).map_or_else(|e| fault_value(&e), |k| json!(k));
    let mut out = json!({"delta_condition": delta, "condition_number": kappa});
    if let Some(w) = weights {
        out["a1"] = check_a1(params, w).map_or_else(|e| fault_value(&e), |r| to_value(&r));
    }
    out
}

pub fn estimate(cfg: &EstimateConfig, base: &Path, diagnostics_flag: bool, seed: Option<u64>) -> Result<Output> {
    check_command(&cfg.command, "estimate")?;
    let params = cfg.lp.load(base)?.to_params()?;
    if cfg.estimators.is_empty() {
        return Err(Error::InvalidArgument("no estimators selected".into()));
    }
    let need_n = |what: &str| cfg.n.ok_or_else(|| Error::InvalidArgument(format!("`n` is required for {what}")));
    let uses_penalty = cfg.estimators.iter().any(|k| matches!(k, EstimatorKind::Penalty | EstimatorKind::Debiased));
    let weights = if uses_penalty || diagnostics_flag || cfg.diagnostics {
        match (&cfg.penalty.w, cfg.n) {
            (Some(w), _) => Some(w.resolve(params.q())?),
            (None, Some(n)) => Some(cfg.penalty.weights(&params, n)?),
            (None, None) if uses_penalty => return Err(need_n("a data-driven penalty").unwrap_err()),
            (None, None) => None,
        }
    } else {
        None
    };
    let mut results = BTreeMap::new();
    for kind in &cfg.estimators {
        let entry = match kind {
            EstimatorKind::Plugin => {
                let s = plug_in_value(&params)?;
                json!({"status": s.status, "value": s.value, "vertex": s.vertex, "binding": s.binding})
            }
            EstimatorKind::Penalty => {
                let w = Penalty::Vector(weights.clone().expect("weights"));
                json!({"status": "optimal", "value": penalty_value(&params, &w)?})
            }
            EstimatorKind::Debiased => {
                let w = Penalty::Vector(weights.clone().expect("weights"));
                let r = debiased_estimate(&params, &w, cfg.pick)?;
                json!({
                    "status": "optimal",
                    "value": r.value,
                    "vertex": r.vertex,
                    "binding": r.binding,
                    "penalty_residual": r.penalty_residual,
                    "penalized_value": r.penalized_value,
                })
            }
            EstimatorKind::Setexp => {
                let n = need_n("set expansion")?;
                let kappa_n = kappa_rule(n, cfg.kappa0)?;
                let s = set_expansion_value(&params, kappa_n, n)?;
                json!({"status": s.status, "value": s.value, "vertex": s.vertex, "kappa_n": kappa_n})
            }
        };
        results.insert(kind.name().to_string(), entry);
    }
    let mut out = json!({
        "command": "estimate",
        "n": cfg.n,
        "penalty_weights": weights,
        "estimators": results,
        "seed": seed.or(cfg.seed),
    });
    if diagnostics_flag || cfg.diagnostics {
        out["diagnostics"] = diagnostics(&params, weights.as_deref());
    }
    Ok(Output::Json(out))
}

fn read_observations(path: &Path, cols: usize) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        let row: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("row {}: bad number `{f}`", i + 2))))
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::DimensionMismatch(format!("row {} has {} columns, expected {cols}", i + 2, row.len())));
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// θ̂ source → template and per-observation θ_i rows.
fn load_source(source: &ThetaSource, base: &Path, seed: u64) -> Result<(LpParams, Matrix)> {
    match source {
        ThetaSource::Observations { lp, data } => {
            let template = lp.load(base)?.to_params()?;
            let s = template.theta().len();
            Ok((template, read_observations(&base.join(data), s)?))
        }
        ThetaSource::Scenario { scenario, n } => {
            scenario.validate()?;
            let mut rng = substream(seed, &[purpose::DATA, *n as u64]);
            Ok((scenario.truth_params()?, draw_observations(scenario, *n, &mut rng)?))
        }
        ThetaSource::Gaussian { lp, sigma, n } => {
            let template = lp.load(base)?.to_params()?;
            let theta0 = template.theta();
            let s = theta0.len();
            let sigma = Matrix::from_rows(sigma)?;
            if sigma.rows() != s || sigma.cols() != s {
                return Err(Error::DimensionMismatch(format!("sigma must be {s}x{s}")));
            }
            let l = psd_factor(&sigma, 1e-10)?;
            let mut rng = substream(seed, &[purpose::DATA, *n as u64]);
            let mut rows = Vec::with_capacity(*n);
            for _ in 0..*n {
                let eps: Vec<f64> = (0..s).map(|_| StandardNormal.sample(&mut rng)).collect();
                let shift = l.matvec(&eps)?;
                rows.push(theta0.iter().zip(shift).map(|(a, b)| a + b).collect());
            }
            Ok((template, Matrix::from_rows(&rows)?))
        }
    }
}

fn negate_objective(template: &LpParams, obs: &Matrix) -> Result<(LpParams, Matrix)> {
    let d = template.d();
    let rows: Vec<Vec<f64>> = (0..obs.rows())
        .map(|i| obs.row(i).iter().enumerate().map(|(k, v)| if k < d { -v } else { *v }).collect())
        .collect();
    Ok((template.with_p(template.p.iter().map(|v| -v).collect())?, Matrix::from_rows(&rows)?))
}

pub fn infer(cfg: &InferConfig, base: &Path, seed: Option<u64>) -> Result<Output> {
    check_command(&cfg.command, "infer")?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let (template, obs) = load_source(&cfg.source, base, seed)?;
    let (template, obs) = match cfg.side {
        BoundSide::Lower => (template, obs),
        BoundSide::Upper => negate_objective(&template, &obs)?,
    };
    let n = obs.rows();
    let est = MeanThetaEstimator::new(&template, obs)?;
    let res = run_inference(&est, &cfg.inference, seed)?;
    let res = match cfg.side {
        BoundSide::Lower => res,
        BoundSide::Upper => res.negated(),
    };
    Ok(Output::Json(json!({
        "command": "infer",
        "side": match cfg.side { BoundSide::Lower => "lower", BoundSide::Upper => "upper" },
        "n": n,
        "seed": seed,
        "result": to_value(&res),
    })))
}

pub fn simulate(cfg: &SimulateConfig, seed: Option<u64>, full_scale: bool) -> Result<Output> {
    check_command(&cfg.command, "simulate")?;
    let mut scenario = cfg.scenario.clone();
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if full_scale {
        scenario.replications = match cfg.study {
            Study::Inference => scenario.replications.max(1_000),
            _ => scenario.replications.max(10_000),
        };
    }
    let mut buf = Vec::new();
    match cfg.study {
        Study::Consistency => run_consistency(&scenario)?.write_csv(&mut buf)?,
        Study::Inference => run_inference_study(&scenario)?.write_csv(&mut buf)?,
        Study::UniformGrid => run_uniform_grid(&scenario)?.write_csv(&mut buf)?,
    }
    Ok(Output::Csv(String::from_utf8(buf).expect("csv is utf-8")))
}

fn table_from_config(
    cfg: &AicmConfig,
    base: &Path,
) -> Result<(ConditionalMomentTable, Option<Vec<noisylp::aicm::Record>>)> {
    match (&cfg.data, &cfg.table) {
        (Some(path), None) => {
            let path = base.join(path);
            let file = std::fs::File::open(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let records = read_records(file)?;
            Ok((ingest_sample(&records, cfg.observed.as_deref())?, Some(records)))
        }
        (None, Some(t)) => {
            let nt = t.treatments.len();
            let nz = t.instruments.len();
            let observed = t
                .observed
                .clone()
                .unwrap_or_else(|| t.cell_mean.iter().map(|r| r.iter().all(Option::is_some)).collect());
            let table = ConditionalMomentTable::new(
                t.treatments.clone(),
                t.instruments.clone(),
                t.cell_mean.clone(),
                t.cell_prob.clone(),
                vec![vec![0; nz]; nt],
                observed,
            )?;
            Ok((table, None))
        }
        _ => Err(Error::InvalidArgument("give exactly one of `data` and `table`".into())),
    }
}

/// The closed-form recursion applies with outcome bounds plus one
/// conditional monotonicity restriction (any variant for binary T, the weak
/// one otherwise) and nothing else.
fn recursion(cfg: &AicmConfig, table: &ConditionalMomentTable) -> Result<Option<Value>> {
    let mut bounds = None;
    let mut cmiv = None;
    for a in &cfg.assumptions {
        match a {
            Assumption::Bounds { k0, k1 } => bounds = Some((*k0, *k1)),
            Assumption::CmivW => cmiv = Some(a),
            Assumption::CmivP | Assumption::CmivS if table.n_t() == 2 => cmiv = Some(a),
            _ => return Ok(None),
        }
    }
    let (Some((k0, k1)), Some(_)) = (bounds, cmiv) else { return Ok(None) };
    let (t, z) = match &cfg.target {
        Target::MeanPotential { t } => (t, None),
        Target::ConditionalMean { t, z } => (t, Some(z)),
        Target::Ate { .. } => return Ok(None),
    };
    let r = cmivw_bounds(table, t, k0, k1)?;
    let pick = match z {
        None => Some(r.aggregate),
        Some(z) => table.instruments.iter().position(|l| l == z).map(|j| (r.lower[j], r.upper[j])),
    };
    Ok(Some(json!({"lower": pick.map(|p| p.0), "upper": pick.map(|p| p.1), "by_instrument": to_value(&r)})))
}

#[derive(Serialize)]
struct IntervalReport<'a> {
    lower: &'a InferenceResult,
    upper: &'a InferenceResult,
    two_sided: TwoSidedInterval,
}

pub fn aicm(cfg: &AicmConfig, base: &Path, seed: Option<u64>) -> Result<Output> {
    check_command(&cfg.command, "aicm")?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let (table, records) = table_from_config(cfg, base)?;
    let spec =
        |direction| AssumptionSpec { assumptions: cfg.assumptions.clone(), target: cfg.target.clone(), direction };
    let lower_prog = compile(&table, &spec(Direction::Lower))?;
    let upper_prog = compile(&table, &spec(Direction::Upper))?;
    let (lower, upper): (BoundResult, BoundResult) = (lower_prog.solve()?, upper_prog.solve()?);
    let mut out = json!({
        "command": "aicm",
        "seed": seed,
        "lower": to_value(&lower),
        "upper": to_value(&upper),
        "sharp": lower_prog.sharp,
        "valid_only": lower_prog.valid_only,
        "target_range": [lower_prog.target_range.0, lower_prog.target_range.1],
        "table": to_value(&table),
    });
    if cfg.dump_lp {
        let mut doc = LpDocument::from_params(&lower_prog.lp);
        doc.labels = Some(lower_prog.labels.iter().map(|l| format!("E[Y({})|T={},Z={}]", l.t, l.d, l.z)).collect());
        out["lp"] = json!({"program": to_value(&doc), "offset": lower_prog.offset});
    }
    if let Some(r) = recursion(cfg, &table)? {
        out["recursion"] = r;
    }
    if let Target::Ate { t, d } = &cfg.target {
        if let Ok(v) = ets_estimate(&table, t, d) {
            out["ets"] = json!(v);
        }
    }
    if let (Some(inf), Some(records)) = (&cfg.inference, records) {
        let run = |direction, s: u64| -> Result<InferenceResult> {
            let mut est = AicmThetaEstimator::new(records.clone(), &table, spec(direction), s)?;
            est.bootstrap_reps = cfg.bootstrap_reps;
            run_inference(&est, inf, s)
        };
        let lo = run(Direction::Lower, seed)?;
        let hi = run(Direction::Upper, seed.wrapping_add(1))?.negated();
        let two_sided = combine_two_sided(&lo, &hi, cfg.alpha)?;
        out["confidence"] = to_value(&IntervalReport { lower: &lo, upper: &hi, two_sided });
    }
    Ok(Output::Json(out))
}
