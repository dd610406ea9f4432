use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Serialize};

use super::data::{Dataset, Schema};
use crate::error::{Error, Result};

/// The kinds of values that flow between transformations and measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Carrier {
    Dataset,
    DatasetVector,
    Scalar,
    Vector,
    Bit,
    Tuple,
}

#[derive(Debug, Clone)]
pub enum Value {
    Dataset(Dataset),
    Datasets(Vec<Dataset>),
    Scalar(f64),
    Vector(Vec<f64>),
    Bit(bool),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn carrier(&self) -> Carrier {
        match self {
            Value::Dataset(_) => Carrier::Dataset,
            Value::Datasets(_) => Carrier::DatasetVector,
            Value::Scalar(_) => Carrier::Scalar,
            Value::Vector(_) => Carrier::Vector,
            Value::Bit(_) => Carrier::Bit,
            Value::Tuple(_) => Carrier::Tuple,
        }
    }

    pub fn as_dataset(&self) -> Result<&Dataset> {
        match self {
            Value::Dataset(d) => Ok(d),
            other => Err(Error::NotInDomain(format!("expected a dataset, got {:?}", other.carrier()))),
        }
    }

    pub fn as_datasets(&self) -> Result<&[Dataset]> {
        match self {
            Value::Datasets(d) => Ok(d),
            other => Err(Error::NotInDomain(format!("expected datasets, got {:?}", other.carrier()))),
        }
    }

    pub fn as_scalar(&self) -> Result<f64> {
        match self {
            Value::Scalar(x) => Ok(*x),
            other => Err(Error::NotInDomain(format!("expected a scalar, got {:?}", other.carrier()))),
        }
    }

    pub fn as_bit(&self) -> Result<bool> {
        match self {
            Value::Bit(b) => Ok(*b),
            other => Err(Error::NotInDomain(format!("expected a bit, got {:?}", other.carrier()))),
        }
    }

    pub fn as_vector(&self) -> Result<&[f64]> {
        match self {
            Value::Vector(v) => Ok(v),
            other => Err(Error::NotInDomain(format!("expected a vector, got {:?}", other.carrier()))),
        }
    }

    pub fn as_tuple(&self) -> Result<&[Value]> {
        match self {
            Value::Tuple(v) => Ok(v),
            other => Err(Error::NotInDomain(format!("expected a tuple, got {:?}", other.carrier()))),
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        fn floats(a: &[f64], b: &[f64]) -> Ordering {
            a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or_else(|| a.len().cmp(&b.len()))
        }
        match (self, other) {
            (Value::Dataset(a), Value::Dataset(b)) => {
                a.records().cmp(b.records()).then_with(|| a.schema().columns().len().cmp(&b.schema().columns().len()))
            }
            (Value::Datasets(a), Value::Datasets(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| x.records().cmp(y.records()))
                .find(|o| o.is_ne())
                .unwrap_or_else(|| a.len().cmp(&b.len())),
            (Value::Scalar(a), Value::Scalar(b)) => a.total_cmp(b),
            (Value::Vector(a), Value::Vector(b)) => floats(a, b),
            (Value::Bit(a), Value::Bit(b)) => a.cmp(b),
            (Value::Tuple(a), Value::Tuple(b)) => a.cmp(b),
            _ => (self.carrier() as u8).cmp(&(other.carrier() as u8)),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

struct Records<'a>(&'a Dataset);

impl Serialize for Records<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for r in self.0.records() {
            seq.serialize_element(r)?;
        }
        seq.end()
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Scalar(x) => s.serialize_f64(*x),
            Value::Bit(b) => s.serialize_bool(*b),
            Value::Vector(v) => v.serialize(s),
            Value::Tuple(v) => v.serialize(s),
            Value::Dataset(d) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("records", &Records(d))?;
                m.end()
            }
            Value::Datasets(ds) => {
                let pieces: Vec<_> = ds.iter().map(Records).collect();
                pieces.serialize(s)
            }
        }
    }
}

/// Static clamping bounds carried by a dataset domain for one numeric column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidBounds(format!("[{lower}, {upper}] is not finite")));
        }
        if lower > upper {
            return Err(Error::BoundsInverted { lower, upper });
        }
        Ok(Bounds { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn within(&self, outer: &Bounds) -> bool {
        outer.lower <= self.lower && self.upper <= outer.upper
    }
}

/// Datasets over a schema, optionally with static per-column bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDomain {
    schema: Arc<Schema>,
    bounds: BTreeMap<String, Bounds>,
}

impl DatasetDomain {
    pub fn new(schema: Schema) -> Self {
        DatasetDomain { schema: Arc::new(schema), bounds: BTreeMap::new() }
    }

    pub fn from_arc(schema: Arc<Schema>) -> Self {
        DatasetDomain { schema, bounds: BTreeMap::new() }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn bounds(&self, column: &str) -> Option<Bounds> {
        self.bounds.get(column).copied()
    }

    pub fn with_bounds(mut self, column: &str, bounds: Bounds) -> Result<Self> {
        self.schema.numeric_index(column)?;
        self.bounds.insert(column.to_string(), bounds);
        Ok(self)
    }

    pub fn is_unbounded(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn without_bounds(mut self) -> Self {
        self.bounds.clear();
        self
    }

    pub fn check(&self, d: &Dataset) -> Result<()> {
        if d.schema() != self.schema.as_ref() {
            return Err(Error::NotInDomain("dataset schema differs from domain schema".into()));
        }
        for (col, b) in &self.bounds {
            let i = self.schema.index_of(col)?;
            if let Some(r) = d.records().iter().find(|r| !b.contains(r.0[i].as_f64().unwrap_or(f64::NAN))) {
                return Err(Error::NotInDomain(format!(
                    "column {col:?} value {} outside [{}, {}]",
                    r.0[i], b.lower, b.upper
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Dataset(DatasetDomain),
    /// The output of a partition: `pieces` datasets over the same schema.
    DatasetVector {
        pieces: usize,
        inner: DatasetDomain,
    },
    Scalar,
    Vector,
    Bit,
    Tuple(Vec<Domain>),
}

impl Domain {
    pub fn dataset(schema: Schema) -> Self {
        Domain::Dataset(DatasetDomain::new(schema))
    }

    pub fn carrier(&self) -> Carrier {
        match self {
            Domain::Dataset(_) => Carrier::Dataset,
            Domain::DatasetVector { .. } => Carrier::DatasetVector,
            Domain::Scalar => Carrier::Scalar,
            Domain::Vector => Carrier::Vector,
            Domain::Bit => Carrier::Bit,
            Domain::Tuple(_) => Carrier::Tuple,
        }
    }

    pub fn as_dataset(&self) -> Result<&DatasetDomain> {
        match self {
            Domain::Dataset(d) => Ok(d),
            other => Err(Error::DomainMismatch(format!("expected a dataset domain, got {:?}", other.carrier()))),
        }
    }

    /// Membership test.
    pub fn check(&self, v: &Value) -> Result<()> {
        match (self, v) {
            (Domain::Dataset(dom), Value::Dataset(d)) => dom.check(d),
            (Domain::DatasetVector { pieces, inner }, Value::Datasets(ds)) => {
                if ds.len() != *pieces {
                    return Err(Error::NotInDomain(format!("expected {pieces} pieces, got {}", ds.len())));
                }
                ds.iter().try_for_each(|d| inner.check(d))
            }
            (Domain::Scalar, Value::Scalar(_)) | (Domain::Vector, Value::Vector(_)) | (Domain::Bit, Value::Bit(_)) => {
                Ok(())
            }
            (Domain::Tuple(ds), Value::Tuple(vs)) if ds.len() == vs.len() => {
                ds.iter().zip(vs).try_for_each(|(d, v)| d.check(v))
            }
            (d, v) => Err(Error::NotInDomain(format!("{:?} value in {:?} domain", v.carrier(), d.carrier()))),
        }
    }
}

/// Distances between inputs or outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Insertions plus deletions between multisets (unbounded DP).
    SymmetricDistance,
    /// Records changed between equal-size multisets (bounded DP).
    ChangeOneDistance,
    /// `|y - y'|` on scalars; bits count as 0 and 1.
    AbsoluteDistance,
    L1Distance,
    /// Sum of per-piece symmetric distances between dataset vectors.
    PerPieceDistance,
}

impl Metric {
    pub fn applies_to(self, carrier: Carrier) -> bool {
        matches!(
            (self, carrier),
            (Metric::SymmetricDistance | Metric::ChangeOneDistance, Carrier::Dataset)
                | (Metric::AbsoluteDistance, Carrier::Scalar | Carrier::Bit)
                | (Metric::L1Distance, Carrier::Vector)
                | (Metric::PerPieceDistance, Carrier::DatasetVector)
        )
    }

    pub fn check_carrier(self, carrier: Carrier) -> Result<()> {
        if self.applies_to(carrier) {
            Ok(())
        } else {
            Err(Error::IncompatibleMetric { metric: self, carrier })
        }
    }

    pub fn is_dataset_metric(self) -> bool {
        matches!(self, Metric::SymmetricDistance | Metric::ChangeOneDistance)
    }

    /// Distance between two values; infinite when the metric cannot relate them
    /// (e.g. change-one distance between datasets of different size).
    pub fn distance(self, a: &Value, b: &Value) -> Result<f64> {
        match (self, a, b) {
            (Metric::SymmetricDistance, Value::Dataset(x), Value::Dataset(y)) => Ok(symmetric(x, y) as f64),
            (Metric::ChangeOneDistance, Value::Dataset(x), Value::Dataset(y)) => {
                if x.len() != y.len() {
                    Ok(f64::INFINITY)
                } else {
                    // equal sizes: |x \ y| = |y \ x| = symmetric / 2
                    Ok((symmetric(x, y) / 2) as f64)
                }
            }
            (Metric::AbsoluteDistance, Value::Scalar(x), Value::Scalar(y)) => Ok((x - y).abs()),
            (Metric::AbsoluteDistance, Value::Bit(x), Value::Bit(y)) => Ok(if x == y { 0.0 } else { 1.0 }),
            (Metric::L1Distance, Value::Vector(x), Value::Vector(y)) => {
                if x.len() != y.len() {
                    Ok(f64::INFINITY)
                } else {
                    Ok(x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum())
                }
            }
            (Metric::PerPieceDistance, Value::Datasets(x), Value::Datasets(y)) => {
                if x.len() != y.len() {
                    Ok(f64::INFINITY)
                } else {
                    Ok(x.iter().zip(y).map(|(p, q)| symmetric(p, q) as f64).sum())
                }
            }
            _ => Err(Error::IncompatibleMetric { metric: self, carrier: a.carrier() }),
        }
    }
}

/// Size of the multiset symmetric difference, by merging canonical orders.
fn symmetric(x: &Dataset, y: &Dataset) -> usize {
    let (a, b) = (x.records(), y.records());
    let (mut i, mut j, mut diff) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
            Ordering::Less => {
                diff += 1;
                i += 1;
            }
            Ordering::Greater => {
                diff += 1;
                j += 1;
            }
        }
    }
    diff + (a.len() - i) + (b.len() - j)
}
