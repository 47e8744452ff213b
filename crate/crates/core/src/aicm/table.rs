use std::collections::HashMap;
use std::io::Read;

use serde::Serialize;

use crate::error::{arg_err, dim_err, Error, Result};

/// One microdata record; `y` is `None` when the outcome is not observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub y: Option<f64>,
    pub t: String,
    pub z: String,
}

/// Cell means and joint probabilities over the treatment × instrument grid.
/// Index order is `[t][z]`, both supports sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalMomentTable {
    pub treatments: Vec<String>,
    pub instruments: Vec<String>,
    /// `E[Y | T = t, Z = z]`, present exactly for observed treatments.
    pub cell_mean: Vec<Vec<Option<f64>>>,
    /// `P[T = t, Z = z]`.
    pub cell_prob: Vec<Vec<f64>>,
    pub cell_count: Vec<Vec<usize>>,
    /// Treatments whose outcomes are observed.
    pub observed: Vec<bool>,
}

/// Numeric order when every label parses as a number, else lexicographic.
pub fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    match numeric {
        Some(_) => labels.sort_by(|a, b| {
            let (x, y) = (a.trim().parse::<f64>().unwrap(), b.trim().parse::<f64>().unwrap());
            x.total_cmp(&y)
        }),
        None => labels.sort(),
    }
}

impl ConditionalMomentTable {
    /// Validates shapes, probabilities, full support and the observation pattern.
    pub fn new(
        treatments: Vec<String>,
        instruments: Vec<String>,
        cell_mean: Vec<Vec<Option<f64>>>,
        cell_prob: Vec<Vec<f64>>,
        cell_count: Vec<Vec<usize>>,
        observed: Vec<bool>,
    ) -> Result<Self> {
        let (nt, nz) = (treatments.len(), instruments.len());
        if nt == 0 || nz == 0 {
            return arg_err("empty treatment or instrument support");
        }
        let shape_ok = |rows: usize, lens: Vec<usize>| rows == nt && lens.iter().all(|&l| l == nz);
        if !shape_ok(cell_mean.len(), cell_mean.iter().map(Vec::len).collect())
            || !shape_ok(cell_prob.len(), cell_prob.iter().map(Vec::len).collect())
            || !shape_ok(cell_count.len(), cell_count.iter().map(Vec::len).collect())
            || observed.len() != nt
        {
            return dim_err(format!("table arrays must be {nt}x{nz}"));
        }
        let mut total = 0.0;
        for ti in 0..nt {
            for zi in 0..nz {
                let p = cell_prob[ti][zi];
                if !(p > 0.0) || !p.is_finite() {
                    return Err(Error::EmptyCell { t: treatments[ti].clone(), z: instruments[zi].clone() });
                }
                total += p;
                match (observed[ti], cell_mean[ti][zi]) {
                    (true, Some(m)) if m.is_finite() => {}
                    (true, _) => {
                        return arg_err(format!(
                            "missing mean for observed cell ({}, {})",
                            treatments[ti], instruments[zi]
                        ))
                    }
                    (false, Some(_)) => {
                        return arg_err(format!("mean given for unobserved treatment {}", treatments[ti]))
                    }
                    (false, None) => {}
                }
            }
        }
        if (total - 1.0).abs() > 1e-10 {
            return arg_err(format!("cell probabilities sum to {total}"));
        }
        Ok(Self { treatments, instruments, cell_mean, cell_prob, cell_count, observed })
    }

    pub fn n_t(&self) -> usize {
        self.treatments.len()
    }

    pub fn n_z(&self) -> usize {
        self.instruments.len()
    }

    pub fn treatment_index(&self, t: &str) -> Result<usize> {
        self.treatments
            .iter()
            .position(|l| l == t)
            .ok_or_else(|| Error::InvalidArgument(format!("treatment {t} not in support")))
    }

    /// `P[Z = z_j]`.
    pub fn p_z(&self, zi: usize) -> f64 {
        (0..self.n_t()).map(|ti| self.cell_prob[ti][zi]).sum()
    }

    /// `P[T = t | Z = z_j]`.
    pub fn p_t_given_z(&self, ti: usize, zi: usize) -> f64 {
        self.cell_prob[ti][zi] / self.p_z(zi)
    }

    /// Observed `E[Y | T = t, Z = z]`; zero for unobserved treatments.
    pub fn mean(&self, ti: usize, zi: usize) -> f64 {
        self.cell_mean[ti][zi].unwrap_or(0.0)
    }

    pub fn total_count(&self) -> usize {
        self.cell_count.iter().flatten().sum()
    }
}

/// Empirical table over the supports found in the records.
///
/// With `observed = None`, a treatment counts as observed when any of its
/// records carries an outcome.
pub fn ingest_sample(records: &[Record], observed: Option<&[String]>) -> Result<ConditionalMomentTable> {
    let mut ts: Vec<String> = records.iter().map(|r| r.t.clone()).collect();
    let mut zs: Vec<String> = records.iter().map(|r| r.z.clone()).collect();
    ts.sort();
    ts.dedup();
    zs.sort();
    zs.dedup();
    sort_labels(&mut ts);
    sort_labels(&mut zs);
    let obs: Vec<bool> = match observed {
        Some(o) => {
            if let Some(bad) = o.iter().find(|l| !ts.contains(l)) {
                return arg_err(format!("observed treatment {bad} not in the data"));
            }
            ts.iter().map(|t| o.contains(t)).collect()
        }
        None => ts.iter().map(|t| records.iter().any(|r| &r.t == t && r.y.is_some())).collect(),
    };
    ingest_with_support(records, &ts, &zs, &obs)
}

/// Empirical table over fixed supports. Every cell must be populated.
pub fn ingest_with_support(
    records: &[Record],
    treatments: &[String],
    instruments: &[String],
    observed: &[bool],
) -> Result<ConditionalMomentTable> {
    let tix: HashMap<&str, usize> = treatments.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let zix: HashMap<&str, usize> = instruments.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let (nt, nz) = (treatments.len(), instruments.len());
    let mut count = vec![vec![0usize; nz]; nt];
    let mut sum = vec![vec![0.0; nz]; nt];
    for r in records {
        let (Some(&ti), Some(&zi)) = (tix.get(r.t.as_str()), zix.get(r.z.as_str())) else {
            return arg_err(format!("record ({}, {}) outside the support", r.t, r.z));
        };
        match (observed[ti], r.y) {
            (true, Some(y)) if y.is_finite() => sum[ti][zi] += y,
            (true, Some(_)) => return Err(Error::NonFinite(format!("outcome for t = {}", r.t))),
            (true, None) => return arg_err(format!("missing outcome for observed treatment {}", r.t)),
            (false, Some(_)) => return arg_err(format!("outcome present for unobserved treatment {}", r.t)),
            (false, None) => {}
        }
        count[ti][zi] += 1;
    }
    let n = records.len() as f64;
    for ti in 0..nt {
        for zi in 0..nz {
            if count[ti][zi] == 0 {
                return Err(Error::EmptyCell { t: treatments[ti].clone(), z: instruments[zi].clone() });
            }
        }
    }
    let mean = (0..nt)
        .map(|ti| (0..nz).map(|zi| observed[ti].then(|| sum[ti][zi] / count[ti][zi] as f64)).collect())
        .collect();
    let prob: Vec<Vec<f64>> = count.iter().map(|row| row.iter().map(|&c| c as f64 / n).collect()).collect();
    ConditionalMomentTable::new(treatments.to_vec(), instruments.to_vec(), mean, prob, count, observed.to_vec())
}

/// Reads `y,t,z` CSV; an empty `y` marks a missing outcome.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("CSV header lacks column `{name}`")))
    };
    let (iy, it, iz) = (col("y")?, col("t")?, col("z")?);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let ys = field(iy);
        let y = if ys.is_empty() {
            None
        } else {
            Some(ys.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("row {}: bad y `{ys}`", line + 2)))?)
        };
        let (t, z) = (field(it), field(iz));
        if t.is_empty() || z.is_empty() {
            return arg_err(format!("row {}: t and z are required", line + 2));
        }
        out.push(Record { y, t, z });
    }
    Ok(out)
}
