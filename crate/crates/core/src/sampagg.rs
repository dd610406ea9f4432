//! Sample and aggregate: split the records into `m` blocks, run an arbitrary
//! non-private estimator on each block, and release a noisy mean of the
//! clamped block estimates.
//!
//! Blocks are assigned by hashing `(seed, record, occurrence)`, where
//! `occurrence` counts earlier copies of an identical record. Adding or
//! removing one record therefore changes exactly one block, which is what
//! makes the estimate vector 1-stable. Positional assignment would not be:
//! inserting a record shifts the position of every record after it.

use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::calculus::{
    Bounds, Cell, CellKind, Column, Dataset, DatasetDomain, Domain, Measurement, Metric, Record, Schema, StabilityMap,
    Transformation, Value,
};
use crate::combinators::{chain_mt, chain_tt};
use crate::error::{Error, Result};
use crate::mechanisms::{laplace_noise, LaplaceScale};
use crate::{exact, transforms};

/// A non-private estimator run on each block.
pub type Estimator = Arc<dyn Fn(&Dataset) -> f64 + Send + Sync>;

/// Name of the single column in the dataset of block estimates.
pub const ESTIMATE_COLUMN: &str = "estimate";

#[derive(Clone)]
pub struct SampleAggregate {
    estimator: Estimator,
    blocks: usize,
    seed: u64,
    range: Bounds,
    timeout: Option<Duration>,
}

impl std::fmt::Debug for SampleAggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampleAggregate")
            .field("blocks", &self.blocks)
            .field("seed", &self.seed)
            .field("range", &self.range)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl SampleAggregate {
    pub fn new(
        estimator: impl Fn(&Dataset) -> f64 + Send + Sync + 'static,
        blocks: usize,
        seed: u64,
        lower: f64,
        upper: f64,
    ) -> Result<Self> {
        Self::from_arc(Arc::new(estimator), blocks, seed, lower, upper)
    }

    pub fn from_arc(estimator: Estimator, blocks: usize, seed: u64, lower: f64, upper: f64) -> Result<Self> {
        if blocks < 2 {
            return Err(Error::TooFewBlocks(blocks));
        }
        let range = Bounds::new(lower, upper)?;
        if lower == upper {
            return Err(Error::InvalidBounds(format!("output range [{lower}, {upper}] is empty")));
        }
        Ok(SampleAggregate { estimator, blocks, seed, range, timeout: None })
    }

    /// Bounds each block's wall-clock time; a block that overruns contributes
    /// the midpoint of the output range.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn range(&self) -> Bounds {
        self.range
    }

    fn midpoint(&self) -> f64 {
        self.range.lower + (self.range.upper - self.range.lower) / 2.0
    }

    /// Splits `d` into the blocks fixed by the seed.
    pub fn split(&self, d: &Dataset) -> Result<Vec<Dataset>> {
        let mut parts: Vec<Vec<Record>> = vec![Vec::new(); self.blocks];
        let records = d.records();
        let mut occurrence = 0u64;
        for (i, r) in records.iter().enumerate() {
            occurrence = if i > 0 && records[i - 1] == *r { occurrence + 1 } else { 0 };
            parts[block_of(self.seed, r, occurrence, self.blocks)].push(r.clone());
        }
        parts.into_iter().map(|p| Dataset::with_schema(d.schema_arc().clone(), p)).collect()
    }

    /// Clamped estimate for every block, in block order.
    pub fn estimates(&self, d: &Dataset) -> Result<Vec<f64>> {
        let blocks = self.split(d)?;
        let raw: Vec<Option<f64>> = match self.timeout {
            None => blocks.iter().map(|b| Some((self.estimator)(b))).collect(),
            Some(limit) => self.run_with_deadline(blocks, limit),
        };
        Ok(raw
            .into_iter()
            .map(|v| match v {
                Some(x) if x.is_finite() => x.clamp(self.range.lower, self.range.upper),
                _ => self.midpoint(),
            })
            .collect())
    }

    fn run_with_deadline(&self, blocks: Vec<Dataset>, limit: Duration) -> Vec<Option<f64>> {
        let (tx, rx) = mpsc::channel();
        let n = blocks.len();
        for (i, block) in blocks.into_iter().enumerate() {
            let (tx, f) = (tx.clone(), self.estimator.clone());
            std::thread::spawn(move || {
                let _ = tx.send((i, f(&block)));
            });
        }
        drop(tx);
        let deadline = Instant::now() + limit;
        let mut out = vec![None; n];
        for _ in 0..n {
            let wait = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(wait) {
                Ok((i, v)) => out[i] = Some(v),
                Err(_) => break,
            }
        }
        out
    }

    /// The mean of the clamped block estimates with no noise added.
    pub fn noiseless(&self, d: &Dataset) -> Result<f64> {
        let e = self.estimates(d)?;
        Ok(e.iter().sum::<f64>() / e.len() as f64)
    }

    /// `T_{P,f}`: datasets to the fixed-size dataset of clamped block
    /// estimates, compared under change-one distance. One inserted or removed
    /// record changes one estimate; one changed record can change two.
    pub fn transformation(&self, input: &DatasetDomain, metric: Metric) -> Result<Transformation> {
        if !metric.is_dataset_metric() {
            return Err(Error::IncompatibleMetric { metric, carrier: crate::calculus::Carrier::Dataset });
        }
        let schema = Arc::new(Schema::new(vec![Column { name: ESTIMATE_COLUMN.into(), kind: CellKind::Float64 }])?);
        let out = DatasetDomain::from_arc(schema.clone()).with_bounds(ESTIMATE_COLUMN, self.range)?;
        let this = self.clone();
        let c = if metric == Metric::ChangeOneDistance { 2.0 } else { 1.0 };
        Transformation::new(
            Domain::Dataset(input.clone()),
            Domain::Dataset(out),
            metric,
            Metric::ChangeOneDistance,
            move |x| {
                let rows = this.estimates(x.as_dataset()?)?.into_iter().map(|v| Record(vec![Cell::Float(v)])).collect();
                Ok(Value::Dataset(Dataset::with_schema(schema.clone(), rows)?))
            },
            StabilityMap::linear(c)?,
        )
    }

    /// The full mechanism: block estimates, then a Laplace-noised sum of the
    /// `m` values in `[L, U]` divided by `m`, i.e. a noisy mean with scale
    /// `(U - L)/(m ε)`.
    pub fn measurement(&self, input: &DatasetDomain, metric: Metric, epsilon: f64) -> Result<Measurement> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::NonpositiveEpsilon(epsilon));
        }
        let t = self.transformation(input, metric)?;
        let estimates = t.output_domain().as_dataset()?.clone();
        let (lo, hi) = (self.range.lower, self.range.upper);
        let sum = transforms::sum_clamped(&estimates, Metric::ChangeOneDistance, ESTIMATE_COLUMN, lo, hi)?;
        let c = sum.stability().linear_constant().cloned().expect("sum is linear");
        let noise = laplace_noise(&LaplaceScale::calibrated_exact(&c, &exact::from_decimal(epsilon)?)?)?;
        let m = self.blocks as f64;
        let noisy_sum = chain_mt(&noise, &chain_tt(&sum, &t)?)?;
        Ok(noisy_sum
            .map_output(Domain::Scalar, move |v| Ok(Value::Scalar(v.as_scalar()? / m)))
            .with_name(format!("sample_aggregate(blocks={}, range=[{lo}, {hi}], epsilon={epsilon})", self.blocks)))
    }
}

/// Block index of the `occurrence`-th copy of `record` under `seed`.
pub fn block_of(seed: u64, record: &Record, occurrence: u64, blocks: usize) -> usize {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(serde_json::to_vec(record).unwrap_or_default());
    h.update(occurrence.to_le_bytes());
    let digest = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(word) % blocks as u64) as usize
}

/// Named estimators over one numeric column, for plans: `mean`, `median`,
/// `variance`, `min`, `max`. Empty blocks yield NaN and fall back to the
/// range midpoint.
pub fn estimator(name: &str, schema: &Schema, column: &str) -> Result<Estimator> {
    let index = schema.numeric_index(column)?;
    let values = move |d: &Dataset| -> Vec<f64> { d.records().iter().filter_map(|r| r.0[index].as_f64()).collect() };
    let f: Estimator = match name {
        "mean" => Arc::new(move |d| mean(&values(d))),
        "median" => Arc::new(move |d| median(values(d))),
        "variance" => Arc::new(move |d| {
            let v = values(d);
            let mu = mean(&v);
            mean(&v.iter().map(|x| (x - mu) * (x - mu)).collect::<Vec<_>>())
        }),
        "min" => Arc::new(move |d| values(d).into_iter().reduce(f64::min).unwrap_or(f64::NAN)),
        "max" => Arc::new(move |d| values(d).into_iter().reduce(f64::max).unwrap_or(f64::NAN)),
        other => return Err(Error::Unsupported(format!("unknown estimator {other:?}"))),
    };
    Ok(f)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
