//! Stable dataset transformations.
//!
//! Each constructor takes the input dataset domain and adjacency metric and
//! returns a [`Transformation`] whose stability constant depends on that
//! metric: e.g. `count` is 1-stable under symmetric distance but 0-stable
//! under change-one distance, where the size is public.

mod partition;

use std::sync::Arc;

pub use partition::{PartitionSpec, RecordAssignment, RecordPredicate};

use crate::calculus::{
    Bounds, Cell, CellKind, Dataset, DatasetDomain, Domain, Metric, Record, Schema, StabilityMap, Transformation, Value,
};
use crate::error::{Error, Result};
use crate::exact;
use crate::predicate::Predicate;

pub type RecordFn = Arc<dyn Fn(&Record) -> Result<Record> + Send + Sync>;

fn require_dataset_metric(metric: Metric) -> Result<()> {
    if metric.is_dataset_metric() {
        Ok(())
    } else {
        Err(Error::IncompatibleMetric { metric, carrier: crate::calculus::Carrier::Dataset })
    }
}

fn apply_rows(x: &Value, out_schema: &Arc<Schema>, fs: &[RecordFn]) -> Result<Value> {
    let d = x.as_dataset()?;
    let mut out = Vec::with_capacity(d.len() * fs.len());
    for r in d.records() {
        for f in fs {
            let y = f(r)?;
            out_schema.check(&y).map_err(|e| Error::RecordFunction(e.to_string()))?;
            out.push(y);
        }
    }
    Ok(Value::Dataset(Dataset::with_schema(out_schema.clone(), out)?))
}

/// Record-wise map. Each input record affects only its own output record,
/// so the map is 1-stable. A failing record aborts the whole evaluation.
pub fn map_rows(
    input: &DatasetDomain,
    metric: Metric,
    out_schema: Schema,
    f: impl Fn(&Record) -> Result<Record> + Send + Sync + 'static,
) -> Result<Transformation> {
    multi_map(input, metric, out_schema, vec![Arc::new(f)])
}

/// One-to-many map: each record yields `k` records, one per function, so the
/// map is k-stable.
pub fn multi_map(
    input: &DatasetDomain,
    metric: Metric,
    out_schema: Schema,
    fs: Vec<RecordFn>,
) -> Result<Transformation> {
    require_dataset_metric(metric)?;
    if fs.is_empty() {
        return Err(Error::InvalidArity("multi_map needs k >= 1 functions".into()));
    }
    let k = fs.len();
    let out_schema = Arc::new(out_schema);
    let schema = out_schema.clone();
    Transformation::new(
        Domain::Dataset(input.clone()),
        Domain::Dataset(DatasetDomain::from_arc(out_schema)),
        metric,
        metric,
        move |x| apply_rows(x, &schema, &fs),
        StabilityMap::linear(k as f64)?,
    )
}

/// Keeps records satisfying `pred`. Under change-one adjacency the output
/// size is no longer fixed, so the output metric is symmetric distance and
/// one changed record can cost two edits.
pub fn filter_rows(
    input: &DatasetDomain,
    metric: Metric,
    pred: impl Fn(&Record) -> bool + Send + Sync + 'static,
) -> Result<Transformation> {
    require_dataset_metric(metric)?;
    let c = match metric {
        Metric::ChangeOneDistance => 2.0,
        _ => 1.0,
    };
    Transformation::new(
        Domain::Dataset(input.clone()),
        Domain::Dataset(input.clone()),
        metric,
        Metric::SymmetricDistance,
        move |x| {
            let d = x.as_dataset()?;
            let kept = d.records().iter().filter(|r| pred(r)).cloned().collect();
            Ok(Value::Dataset(Dataset::with_schema(d.schema_arc().clone(), kept)?))
        },
        StabilityMap::linear(c)?,
    )
}

/// [`filter_rows`] with a predicate from the comparison grammar.
pub fn filter_where(input: &DatasetDomain, metric: Metric, predicate: &str) -> Result<Transformation> {
    let p = Predicate::parse(predicate, input.schema())?;
    filter_rows(input, metric, move |r| p.eval(r))
}

/// Restricts a numeric column to `[lower, upper]`; the output domain records
/// the bounds so that `sum_clamped` can rely on them. Integer columns need
/// integral bounds.
pub fn clamp(input: &DatasetDomain, metric: Metric, column: &str, lower: f64, upper: f64) -> Result<Transformation> {
    require_dataset_metric(metric)?;
    let bounds = Bounds::new(lower, upper)?;
    let index = input.schema().numeric_index(column)?;
    let kind = input.schema().columns()[index].kind;
    if kind == CellKind::Int64 && (lower.fract() != 0.0 || upper.fract() != 0.0) {
        return Err(Error::InvalidBounds(format!("int64 column {column:?} needs integral bounds")));
    }
    let output = input.clone().with_bounds(column, bounds)?;
    Transformation::new(
        Domain::Dataset(input.clone()),
        Domain::Dataset(output),
        metric,
        metric,
        move |x| {
            let d = x.as_dataset()?;
            let out = d
                .records()
                .iter()
                .map(|r| {
                    let mut cells = r.0.clone();
                    cells[index] = match cells[index] {
                        Cell::Int(v) => Cell::Int(v.clamp(lower as i64, upper as i64)),
                        Cell::Float(v) => Cell::Float(v.clamp(lower, upper)),
                        ref other => other.clone(),
                    };
                    Record(cells)
                })
                .collect();
            Ok(Value::Dataset(Dataset::with_schema(d.schema_arc().clone(), out)?))
        },
        StabilityMap::linear(1.0)?,
    )
}

/// Sum of a column whose values the input domain already bounds within
/// `[lower, upper]`. Sensitivity is `max(|lower|, |upper|)` under symmetric
/// distance and `upper - lower` under change-one distance.
pub fn sum_clamped(
    input: &DatasetDomain,
    metric: Metric,
    column: &str,
    lower: f64,
    upper: f64,
) -> Result<Transformation> {
    require_dataset_metric(metric)?;
    let declared = Bounds::new(lower, upper)?;
    let index = input.schema().numeric_index(column)?;
    match input.bounds(column) {
        Some(b) if b.within(&declared) => {}
        _ => return Err(Error::UnclampedDomain(column.to_string())),
    }
    let (lo, hi) = (exact::from_decimal(lower)?, exact::from_decimal(upper)?);
    let c = match metric {
        Metric::ChangeOneDistance => &hi - &lo,
        _ => {
            use num_traits::Signed;
            exact::max(&lo.abs(), &hi.abs())
        }
    };
    Transformation::new(
        Domain::Dataset(input.clone()),
        Domain::Scalar,
        metric,
        Metric::AbsoluteDistance,
        move |x| {
            let d = x.as_dataset()?;
            Ok(Value::Scalar(d.records().iter().map(|r| r.0[index].as_f64().unwrap_or(0.0)).sum()))
        },
        StabilityMap::linear_exact(c),
    )
}

/// Number of records: 1-stable under symmetric distance, 0-stable under
/// change-one distance.
pub fn count(input: &DatasetDomain, metric: Metric) -> Result<Transformation> {
    require_dataset_metric(metric)?;
    let c = match metric {
        Metric::ChangeOneDistance => 0.0,
        _ => 1.0,
    };
    Transformation::new(
        Domain::Dataset(input.clone()),
        Domain::Scalar,
        metric,
        Metric::AbsoluteDistance,
        |x| Ok(Value::Scalar(x.as_dataset()?.len() as f64)),
        StabilityMap::linear(c)?,
    )
}

/// Whether any record satisfies `predicate`, as a bit. However many records
/// change, the bit flips at most once, so the map is `d ↦ min(d, 1)`.
pub fn any_match(input: &DatasetDomain, metric: Metric, predicate: &str) -> Result<Transformation> {
    require_dataset_metric(metric)?;
    let p = Predicate::parse(predicate, input.schema())?;
    Transformation::new(
        Domain::Dataset(input.clone()),
        Domain::Bit,
        metric,
        Metric::AbsoluteDistance,
        move |x| Ok(Value::Bit(x.as_dataset()?.records().iter().any(|r| p.eval(r)))),
        StabilityMap::from_fn(|d| d.min(1.0)),
    )
}

/// Splits a dataset into disjoint pieces. Under symmetric distance each
/// record touches one piece (1-stable); under change-one distance a changed
/// record may leave one piece and enter another (2-stable).
pub fn partition(input: &DatasetDomain, metric: Metric, spec: PartitionSpec) -> Result<Transformation> {
    require_dataset_metric(metric)?;
    let c = match metric {
        Metric::ChangeOneDistance => 2.0,
        _ => 1.0,
    };
    Transformation::new(
        Domain::Dataset(input.clone()),
        Domain::DatasetVector { pieces: spec.len(), inner: input.clone() },
        metric,
        Metric::PerPieceDistance,
        move |x| Ok(Value::Datasets(spec.split(x.as_dataset()?)?)),
        StabilityMap::linear(c)?,
    )
}
