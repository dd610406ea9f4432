//! Domains, metrics, privacy measures, and the transformation/measurement
//! pair that every other module builds on.
//!
//! A [`Transformation`] is a deterministic function carrying a
//! [`StabilityMap`] from input distance to output distance. A
//! [`Measurement`] is a randomized function carrying a [`PrivacyMap`] from
//! input distance to privacy loss. Adjacency defaults to
//! [`Metric::SymmetricDistance`] (add or remove one record).

mod data;
mod loss;
mod maps;
mod metric;
mod ops;

pub use data::{Cell, CellKind, Column, Dataset, Record, Schema};
pub use loss::{ExactLoss, MeasureKind, PrivacyLoss};
pub use maps::{PrivacyMap, StabilityMap, AUDIT_GRID};
pub use metric::{Bounds, Carrier, DatasetDomain, Domain, Metric, Value};
pub use ops::{MeasureFn, Measurement, PmfFn, TransformFn, Transformation};

/// The adjacency used when a pipeline does not name one.
pub const DEFAULT_METRIC: Metric = Metric::SymmetricDistance;
