use rand::Rng as _;
use rayon::prelude::*;

use super::compile::{compile, AssumptionSpec};
use super::table::{ingest_with_support, ConditionalMomentTable, Record};
use crate::error::{arg_err, Result};
use crate::inference::{sample_covariance, ThetaEstimator};
use crate::linalg::Matrix;
use crate::lp::LpParams;
use crate::rng::{purpose, substream};

/// θ̂ for the epigraph form of a compiled bound, re-ingesting and
/// re-compiling on each index subset. Σ̂ comes from a record bootstrap.
pub struct AicmThetaEstimator {
    records: Vec<Record>,
    treatments: Vec<String>,
    instruments: Vec<String>,
    observed: Vec<bool>,
    spec: AssumptionSpec,
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl AicmThetaEstimator {
    /// Supports and the observation pattern are fixed from `table`, which
    /// should be the full-sample table.
    pub fn new(records: Vec<Record>, table: &ConditionalMomentTable, spec: AssumptionSpec, seed: u64) -> Result<Self> {
        if records.len() < 2 {
            return arg_err("need at least two records");
        }
        Ok(Self {
            records,
            treatments: table.treatments.clone(),
            instruments: table.instruments.clone(),
            observed: table.observed.clone(),
            spec,
            bootstrap_reps: 500,
            seed,
        })
    }

    pub fn table(&self, idx: &[usize]) -> Result<ConditionalMomentTable> {
        let sub: Vec<Record> = idx.iter().map(|&i| self.records[i].clone()).collect();
        ingest_with_support(&sub, &self.treatments, &self.instruments, &self.observed)
    }
}

impl ThetaEstimator for AicmThetaEstimator {
    fn n_obs(&self) -> usize {
        self.records.len()
    }

    fn estimate(&self, idx: &[usize]) -> Result<LpParams> {
        compile(&self.table(idx)?, &self.spec)?.epigraph_lp()
    }

    /// `n` times the bootstrap covariance of θ̂ over `idx`.
    fn covariance(&self, idx: &[usize]) -> Result<Option<Matrix>> {
        if self.bootstrap_reps < 2 {
            return arg_err("bootstrap covariance needs at least two replications");
        }
        let k = idx.len();
        let thetas: Vec<Vec<f64>> = (0..self.bootstrap_reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(self.seed, &[purpose::COVARIANCE, r as u64]);
                let pick: Vec<usize> = (0..k).map(|_| idx[rng.random_range(0..k)]).collect();
                Ok(self.estimate(&pick)?.theta())
            })
            .collect::<Result<_>>()?;
        let s = thetas[0].len();
        let flat: Vec<f64> = thetas.into_iter().flatten().collect();
        let obs = Matrix::new(self.bootstrap_reps, s, flat)?;
        let all: Vec<usize> = (0..self.bootstrap_reps).collect();
        Ok(Some(sample_covariance(&obs, &all)?.scale(k as f64)))
    }
}
