//! Non-adaptive batch programs.
//!
//! A plan names a schema, an adjacency metric, a budget and a list of
//! queries. Every query is built from registered operations before any data
//! is read, and the total loss (basic composition over the queries) is
//! checked against the budget in exact arithmetic. Data is loaded only
//! after both steps succeed.
//!
//! ```json
//! {
//!   "version": 1,
//!   "schema": {"columns": [{"name": "age", "kind": "int64"}]},
//!   "metric": "symmetric_distance",
//!   "budget": {"epsilon": 1.0},
//!   "queries": [
//!     {"op": "noisy_count", "name": "n", "epsilon": 0.4},
//!     {"op": "pipeline", "name": "adults", "stages": [
//!       {"op": "filter", "where": "age >= 18"},
//!       {"op": "noisy_count", "epsilon": 0.6}
//!     ]}
//!   ]
//! }
//! ```

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::calculus::{
    Dataset, DatasetDomain, Domain, ExactLoss, MeasureKind, Measurement, Metric, PrivacyLoss, Schema, Transformation,
    Value, DEFAULT_METRIC,
};
use crate::combinators::{chain_mt, chain_tt, compose_basic, compose_parallel};
use crate::error::{Error, Result};
use crate::mechanisms::{self, laplace_noise, laplace_vector, randomized_response, LaplaceScale};
use crate::sampagg::{self, SampleAggregate};
use crate::transforms::{self, PartitionSpec};
use crate::{exact, seeded_rng};

pub const PLAN_VERSION: u32 = 1;

/// The published JSON Schema for plans, for documentation and editors.
pub const PLAN_JSON_SCHEMA: &str = include_str!("../schemas/plan.schema.json");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plan {
    pub version: u32,
    /// Optional path of the CSV file, relative to the plan.
    #[serde(default)]
    pub dataset: Option<String>,
    pub schema: Schema,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    pub budget: PrivacyLoss,
    pub queries: Vec<Op>,
}

fn default_metric() -> Metric {
    DEFAULT_METRIC
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDecl {
    /// Predicates in the comparison grammar, one per piece.
    pub by: Vec<String>,
    /// Adds a final piece for records matching no predicate.
    #[serde(default)]
    pub rest: bool,
}

/// A plan operation. Containers (`pipeline`, `compose`, `parallel`) and
/// measurements may appear as queries; transformations only as pipeline
/// stages before the closing measurement.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    Pipeline {
        #[serde(default)]
        name: Option<String>,
        stages: Vec<Op>,
    },
    Compose {
        #[serde(default)]
        name: Option<String>,
        children: Vec<Op>,
    },
    Parallel {
        #[serde(default)]
        name: Option<String>,
        partition: PartitionDecl,
        children: Vec<Op>,
    },
    Filter {
        #[serde(rename = "where")]
        predicate: String,
    },
    Clamp {
        column: String,
        lower: f64,
        upper: f64,
    },
    Count {},
    SumClamped {
        column: String,
        lower: f64,
        upper: f64,
    },
    AnyMatch {
        #[serde(rename = "where")]
        predicate: String,
    },
    Laplace {
        #[serde(default)]
        scale: Option<f64>,
        #[serde(default)]
        epsilon: Option<f64>,
    },
    RandomizedResponse {
        p: f64,
    },
    NoisyCount {
        #[serde(default)]
        name: Option<String>,
        epsilon: f64,
    },
    NoisySum {
        #[serde(default)]
        name: Option<String>,
        column: String,
        lower: f64,
        upper: f64,
        epsilon: f64,
    },
    NoisyAverage {
        #[serde(default)]
        name: Option<String>,
        column: String,
        epsilon: f64,
    },
    SampleAggregate {
        #[serde(default)]
        name: Option<String>,
        estimator: String,
        column: String,
        blocks: usize,
        range: [f64; 2],
        epsilon: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
}

impl Op {
    fn name(&self) -> Option<&str> {
        match self {
            Op::Pipeline { name, .. }
            | Op::Compose { name, .. }
            | Op::Parallel { name, .. }
            | Op::NoisyCount { name, .. }
            | Op::NoisySum { name, .. }
            | Op::NoisyAverage { name, .. }
            | Op::SampleAggregate { name, .. } => name.as_deref(),
            _ => None,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Op::Pipeline { .. } => "pipeline",
            Op::Compose { .. } => "compose",
            Op::Parallel { .. } => "parallel",
            Op::Filter { .. } => "filter",
            Op::Clamp { .. } => "clamp",
            Op::Count {} => "count",
            Op::SumClamped { .. } => "sum_clamped",
            Op::AnyMatch { .. } => "any_match",
            Op::Laplace { .. } => "laplace",
            Op::RandomizedResponse { .. } => "randomized_response",
            Op::NoisyCount { .. } => "noisy_count",
            Op::NoisySum { .. } => "noisy_sum",
            Op::NoisyAverage { .. } => "noisy_average",
            Op::SampleAggregate { .. } => "sample_aggregate",
        }
    }
}

impl Plan {
    pub fn from_json(text: &str) -> Result<Plan> {
        let plan: Plan = serde_json::from_str(text).map_err(|e| Error::PlanInvalid(e.to_string()))?;
        if plan.version != PLAN_VERSION {
            return Err(Error::PlanInvalid(format!("unsupported plan version {}", plan.version)));
        }
        if !plan.metric.is_dataset_metric() {
            return Err(Error::PlanInvalid(format!("{:?} is not a dataset metric", plan.metric)));
        }
        if plan.queries.is_empty() {
            return Err(Error::PlanInvalid("a plan needs at least one query".into()));
        }
        plan.budget.validate().map_err(|e| Error::PlanInvalid(format!("budget: {e}")))?;
        Ok(plan)
    }

    /// Builds every query. Any construction error is reported as an invalid plan.
    pub fn compile(&self) -> Result<CompiledPlan> {
        let domain = DatasetDomain::new(self.schema.clone());
        let measure = self.budget.measure();
        let budget = ExactLoss::from_decimal(&self.budget).map_err(|e| Error::PlanInvalid(format!("budget: {e}")))?;
        let mut queries = Vec::with_capacity(self.queries.len());
        let mut total = ExactLoss::zero(measure);
        for (i, q) in self.queries.iter().enumerate() {
            let path = format!("queries[{i}]");
            let m = build_query(q, &domain, self.metric, &path)?;
            let loss = coerce(exact_unit_loss(&m).map_err(|e| invalid(&path, e))?, measure, &path)?;
            total = total.add(&loss).map_err(|e| invalid(&path, e))?;
            let name = q.name().map(str::to_string).unwrap_or_else(|| format!("q{i}"));
            queries.push(CompiledQuery { name, measurement: m, loss });
        }
        Ok(CompiledPlan { metric: self.metric, budget, declared: self.budget, total, queries })
    }
}

fn invalid(path: &str, e: impl std::fmt::Display) -> Error {
    Error::PlanInvalid(format!("{path}: {e}"))
}

/// Loss at distance one, exactly when the map is linear and otherwise read
/// from its float value.
fn exact_unit_loss(m: &Measurement) -> Result<ExactLoss> {
    match m.exact_loss_at(1.0)? {
        Some(l) => Ok(l),
        None => ExactLoss::from_binary(&m.loss_at(1.0)?),
    }
}

fn coerce(loss: ExactLoss, measure: MeasureKind, path: &str) -> Result<ExactLoss> {
    match (measure, loss.measure) {
        (a, b) if a == b => Ok(loss),
        (MeasureKind::ApproxDp, MeasureKind::PureDp) => Ok(ExactLoss { measure, ..loss }),
        _ => Err(invalid(path, Error::HeterogeneousMeasures)),
    }
}

fn build_query(op: &Op, domain: &DatasetDomain, metric: Metric, path: &str) -> Result<Measurement> {
    match op {
        Op::Pipeline { stages, .. } => build_pipeline(stages, domain, metric, path),
        Op::Compose { children, .. } => {
            let ms = children
                .iter()
                .enumerate()
                .map(|(i, c)| build_query(c, domain, metric, &format!("{path}.children[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            compose_basic(&ms).map_err(|e| invalid(path, e))
        }
        Op::Parallel { partition, children, .. } => {
            let sources: Vec<&str> = partition.by.iter().map(String::as_str).collect();
            let spec = PartitionSpec::from_predicates(domain.schema(), &sources, partition.rest)
                .map_err(|e| invalid(&format!("{path}.partition"), e))?;
            // pieces are compared under symmetric distance whatever the plan metric
            let ms = children
                .iter()
                .enumerate()
                .map(|(i, c)| build_query(c, domain, Metric::SymmetricDistance, &format!("{path}.children[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            compose_parallel(domain, metric, spec, &ms).map_err(|e| invalid(path, e))
        }
        other if is_measurement(other) => build_pipeline(std::slice::from_ref(other), domain, metric, path),
        other => {
            Err(invalid(path, format!("{} is a transformation and must be followed by a measurement", other.tag())))
        }
    }
}

fn is_measurement(op: &Op) -> bool {
    matches!(
        op,
        Op::Laplace { .. }
            | Op::RandomizedResponse { .. }
            | Op::NoisyCount { .. }
            | Op::NoisySum { .. }
            | Op::NoisyAverage { .. }
            | Op::SampleAggregate { .. }
    )
}

fn build_pipeline(stages: &[Op], domain: &DatasetDomain, metric: Metric, path: &str) -> Result<Measurement> {
    let (last, prefix) = stages.split_last().ok_or_else(|| invalid(path, "pipeline has no stages"))?;
    if !is_measurement(last) {
        return Err(invalid(path, "a pipeline must end with a measurement"));
    }
    let mut t: Option<Transformation> = None;
    for (i, stage) in prefix.iter().enumerate() {
        let here = format!("{path}.stages[{i}]");
        let (dom, met) = match &t {
            None => (Domain::Dataset(domain.clone()), metric),
            Some(t) => (t.output_domain().clone(), t.output_metric()),
        };
        let dom = dom.as_dataset().map_err(|_| invalid(&here, format!("{} needs dataset input", stage.tag())))?.clone();
        let next = build_transformation(stage, &dom, met).map_err(|e| invalid(&here, e))?;
        t = Some(match t {
            None => next,
            Some(prev) => chain_tt(&next, &prev).map_err(|e| invalid(&here, e))?,
        });
    }
    let here = format!("{path}.stages[{}]", prefix.len());
    let here = if stages.len() == 1 { path.to_string() } else { here };
    let m = build_measurement(last, t.as_ref(), domain, metric).map_err(|e| invalid(&here, e))?;
    match (&t, last) {
        (Some(t), op) if consumes_dataset(op) => chain_mt(&m, t).map_err(|e| invalid(&here, e)),
        _ => Ok(m),
    }
}

fn consumes_dataset(op: &Op) -> bool {
    !matches!(op, Op::Laplace { .. } | Op::RandomizedResponse { .. })
}

fn build_transformation(op: &Op, dom: &DatasetDomain, metric: Metric) -> Result<Transformation> {
    match op {
        Op::Filter { predicate } => transforms::filter_where(dom, metric, predicate),
        Op::Clamp { column, lower, upper } => transforms::clamp(dom, metric, column, *lower, *upper),
        Op::Count {} => transforms::count(dom, metric),
        Op::SumClamped { column, lower, upper } => transforms::sum_clamped(dom, metric, column, *lower, *upper),
        Op::AnyMatch { predicate } => transforms::any_match(dom, metric, predicate),
        other if is_measurement(other) => Err(Error::PlanInvalid(format!("{} must close the pipeline", other.tag()))),
        other => Err(Error::PlanInvalid(format!("{} cannot appear inside a pipeline", other.tag()))),
    }
}

/// The closing measurement. Dataset measurements are built on the output of
/// the preceding stages; `laplace` and `randomized_response` are built on
/// their scalar or bit output and already include the stages.
fn build_measurement(
    op: &Op,
    t: Option<&Transformation>,
    base: &DatasetDomain,
    base_metric: Metric,
) -> Result<Measurement> {
    let (dom, metric) = match t {
        Some(t) => match t.output_domain() {
            Domain::Dataset(d) => (Some(d.clone()), t.output_metric()),
            _ => (None, t.output_metric()),
        },
        None => (Some(base.clone()), base_metric),
    };
    let need_dataset = || dom.clone().ok_or_else(|| Error::PlanInvalid(format!("{} needs dataset input", op.tag())));
    match op {
        Op::NoisyCount { epsilon, .. } => mechanisms::noisy_count(&need_dataset()?, metric, *epsilon),
        Op::NoisySum { column, lower, upper, epsilon, .. } => {
            mechanisms::noisy_sum(&need_dataset()?, metric, column, *lower, *upper, *epsilon)
        }
        Op::NoisyAverage { column, epsilon, .. } => {
            mechanisms::noisy_average_column(&need_dataset()?, metric, column, *epsilon)
        }
        Op::SampleAggregate { estimator, column, blocks, range, epsilon, seed, timeout_ms, .. } => {
            let d = need_dataset()?;
            let f = sampagg::estimator(estimator, d.schema(), column)?;
            let mut sa = SampleAggregate::from_arc(f, *blocks, *seed, range[0], range[1])?;
            if let Some(ms) = timeout_ms {
                sa = sa.with_timeout(Duration::from_millis(*ms));
            }
            sa.measurement(&d, metric, *epsilon)
        }
        Op::Laplace { scale, epsilon } => {
            let t =
                t.ok_or_else(|| Error::PlanInvalid("laplace needs a preceding count or sum_clamped stage".into()))?;
            let scale = match (scale, epsilon) {
                (Some(b), None) => LaplaceScale::new(*b)?,
                (None, Some(e)) => {
                    if !(e.is_finite() && *e > 0.0) {
                        return Err(Error::NonpositiveEpsilon(*e));
                    }
                    let c =
                        t.stability().linear_constant().cloned().ok_or_else(|| {
                            Error::PlanInvalid("laplace calibration needs a linear stability map".into())
                        })?;
                    let c = if c == exact::zero() { exact::one() } else { c };
                    LaplaceScale::calibrated_exact(&c, &exact::from_decimal(*e)?)?
                }
                _ => return Err(Error::PlanInvalid("laplace takes exactly one of scale or epsilon".into())),
            };
            let noise = match t.output_domain() {
                Domain::Scalar => laplace_noise(&scale)?,
                Domain::Vector => laplace_vector(&scale)?,
                other => {
                    return Err(Error::PlanInvalid(format!("laplace needs scalar input, got {:?}", other.carrier())))
                }
            };
            chain_mt(&noise, t)
        }
        Op::RandomizedResponse { p } => {
            let t =
                t.ok_or_else(|| Error::PlanInvalid("randomized_response needs a preceding any_match stage".into()))?;
            chain_mt(&randomized_response(*p)?, t)
        }
        other => Err(Error::PlanInvalid(format!("{} is not a measurement", other.tag()))),
    }
}

#[derive(Debug, Clone)]
pub struct CompiledQuery {
    pub name: String,
    pub measurement: Measurement,
    pub loss: ExactLoss,
}

#[derive(Debug, Clone)]
pub struct CompiledPlan {
    metric: Metric,
    budget: ExactLoss,
    declared: PrivacyLoss,
    total: ExactLoss,
    queries: Vec<CompiledQuery>,
}

impl CompiledPlan {
    pub fn queries(&self) -> &[CompiledQuery] {
        &self.queries
    }

    pub fn total_loss(&self) -> &ExactLoss {
        &self.total
    }

    pub fn budget(&self) -> &ExactLoss {
        &self.budget
    }

    pub fn check_budget(&self) -> Result<()> {
        if self.total.dominated_by(&self.budget)? {
            Ok(())
        } else {
            Err(Error::BudgetViolation { loss: self.total.render(), budget: self.budget.render() })
        }
    }

    /// Runs every query in order from one seeded stream.
    pub fn execute(&self, data: &Dataset, seed: u64) -> Result<RunResults> {
        let mut rng = seeded_rng(seed);
        let x = Value::Dataset(data.clone());
        let mut results = Vec::with_capacity(self.queries.len());
        for q in &self.queries {
            let value = q.measurement.invoke(&x, &mut rng)?;
            results.push(QueryResult {
                name: q.name.clone(),
                mechanism: q.measurement.name().to_string(),
                loss: q.loss.to_loss(),
                value,
            });
        }
        Ok(RunResults {
            version: PLAN_VERSION,
            seed,
            metric: self.metric,
            budget: self.declared,
            total_loss: self.total.to_loss(),
            results,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryResult {
    pub name: String,
    pub mechanism: String,
    pub loss: PrivacyLoss,
    pub value: Value,
}

/// The released answers and the loss report. No raw data or exact sizes.
#[derive(Debug, Clone, Serialize)]
pub struct RunResults {
    pub version: u32,
    pub seed: u64,
    pub metric: Metric,
    pub budget: PrivacyLoss,
    pub total_loss: PrivacyLoss,
    pub results: Vec<QueryResult>,
}

impl RunResults {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }
}

/// Validates and compiles `plan_text`, checks the budget, and only then
/// calls `load` for the data and runs the queries.
pub fn run_plan(plan_text: &str, load: impl FnOnce(&Plan) -> Result<Dataset>, seed: u64) -> Result<RunResults> {
    let plan = Plan::from_json(plan_text)?;
    let compiled = plan.compile()?;
    compiled.check_budget()?;
    let data = load(&plan)?;
    if data.schema() != &plan.schema {
        return Err(Error::DataSchemaMismatch("dataset schema differs from the plan schema".into()));
    }
    compiled.execute(&data, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell as Counter;

    const SCHEMA: &str = r#"{"columns": [{"name": "age", "kind": "int64"}, {"name": "score", "kind": "float64"}]}"#;

    fn plan(budget: f64, queries: &str) -> String {
        format!(r#"{{"version": 1, "schema": {SCHEMA}, "budget": {{"epsilon": {budget}}}, "queries": [{queries}]}}"#)
    }

    fn data() -> Dataset {
        let csv = "age,score\n20,0.5\n35,0.25\n41,0.75\n17,1.0\n";
        Dataset::from_csv_reader(Schema::from_json(SCHEMA).unwrap(), csv.as_bytes()).unwrap()
    }

    const TWO_COUNTS: &str = r#"{"op": "noisy_count", "epsilon": 0.4}, {"op": "noisy_count", "epsilon": 0.6}"#;

    #[test]
    fn two_counts_fit_the_budget() {
        let r = run_plan(&plan(1.0, TWO_COUNTS), |_| Ok(data()), 7).unwrap();
        assert_eq!(r.total_loss, PrivacyLoss::Pure(1.0));
        assert_eq!(r.results.len(), 2);
        assert_eq!(r.results[0].name, "q0");
    }

    #[test]
    fn budget_violation_reads_no_data() {
        let reads = Counter::new(0);
        let err = run_plan(
            &plan(0.9, TWO_COUNTS),
            |_| {
                reads.set(reads.get() + 1);
                Ok(data())
            },
            7,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetViolation { .. }));
        assert_eq!(reads.get(), 0);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let text = plan(1.0, TWO_COUNTS);
        let a = run_plan(&text, |_| Ok(data()), 11).unwrap().to_json();
        let b = run_plan(&text, |_| Ok(data()), 11).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, run_plan(&text, |_| Ok(data()), 12).unwrap().to_json());
    }

    #[test]
    fn exact_accounting_of_decimal_losses() {
        let q = r#"{"op": "noisy_count", "epsilon": 0.1}, {"op": "noisy_count", "epsilon": 0.2}"#;
        assert!(Plan::from_json(&plan(0.3, q)).unwrap().compile().unwrap().check_budget().is_ok());
    }

    #[test]
    fn pipelines_chain_stages() {
        let q = r#"{"op": "pipeline", "name": "adult_score", "stages": [
            {"op": "filter", "where": "age >= 18"},
            {"op": "clamp", "column": "score", "lower": 0, "upper": 1},
            {"op": "sum_clamped", "column": "score", "lower": 0, "upper": 1},
            {"op": "laplace", "epsilon": 0.5}
        ]}"#;
        let c = Plan::from_json(&plan(1.0, q)).unwrap().compile().unwrap();
        assert_eq!(c.total_loss(), &ExactLoss::pure(exact::from_decimal(0.5).unwrap()));
        let r = c.execute(&data(), 1).unwrap();
        assert_eq!(r.results[0].name, "adult_score");
    }

    #[test]
    fn compose_and_parallel() {
        let q = r#"{"op": "compose", "children": [
            {"op": "noisy_count", "epsilon": 0.25},
            {"op": "noisy_average", "column": "score", "epsilon": 0.25}
        ]},
        {"op": "parallel", "partition": {"by": ["age < 18", "age >= 18"]}, "children": [
            {"op": "noisy_count", "epsilon": 0.5},
            {"op": "noisy_count", "epsilon": 0.3}
        ]}"#;
        let c = Plan::from_json(&plan(1.0, q)).unwrap().compile().unwrap();
        assert_eq!(c.total_loss(), &ExactLoss::pure(exact::from_decimal(1.0).unwrap()));
        let r = c.execute(&data(), 3).unwrap();
        assert!(matches!(r.results[1].value, Value::Tuple(ref v) if v.len() == 2));
    }

    #[test]
    fn overlapping_partition_is_invalid() {
        let q = r#"{"op": "parallel", "partition": {"by": ["age < 30", "age > 20"]}, "children": [
            {"op": "noisy_count", "epsilon": 0.5}, {"op": "noisy_count", "epsilon": 0.5}]}"#;
        assert!(matches!(Plan::from_json(&plan(1.0, q)).unwrap().compile(), Err(Error::PlanInvalid(_))));
    }

    #[test]
    fn randomized_response_and_sample_aggregate() {
        let q = r#"{"op": "pipeline", "stages": [
            {"op": "any_match", "where": "age > 40"}, {"op": "randomized_response", "p": 0.75}]},
            {"op": "sample_aggregate", "estimator": "mean", "column": "score", "blocks": 2,
             "range": [0, 1], "epsilon": 0.5, "seed": 4}"#;
        let c = Plan::from_json(&plan(2.0, q)).unwrap().compile().unwrap();
        let l = exact::to_f64(&c.total_loss().epsilon);
        assert!((l - (3f64.ln() + 0.5)).abs() < 1e-12);
        c.execute(&data(), 0).unwrap();
    }

    #[test]
    fn invalid_plans() {
        let cases = [
            r#"{"version": 2, "schema": {"columns": []}, "budget": {"epsilon": 1}, "queries": []}"#.to_string(),
            r#"{"version": 1}"#.to_string(),
            plan(1.0, r#"{"op": "noisy_count", "epsilon": 0.5, "extra": 1}"#),
            plan(1.0, r#"{"op": "filter", "where": "age > 3"}"#),
            plan(1.0, r#"{"op": "pipeline", "stages": [{"op": "noisy_count", "epsilon": 0.5}, {"op": "count"}]}"#),
            plan(1.0, r#"{"op": "noisy_count", "epsilon": -1}"#),
            plan(1.0, r#"{"op": "noisy_sum", "column": "nope", "lower": 0, "upper": 1, "epsilon": 1}"#),
            plan(
                1.0,
                r#"{"op": "pipeline", "stages": [{"op": "filter", "where": "age >"}, {"op": "noisy_count", "epsilon": 1}]}"#,
            ),
            plan(1.0, r#"{"op": "teleport"}"#),
            plan(-1.0, TWO_COUNTS),
            plan(1.0, ""),
        ];
        for text in &cases {
            let r = Plan::from_json(text).and_then(|p| p.compile());
            assert!(matches!(r, Err(Error::PlanInvalid(_))), "{text}: {r:?}");
        }
    }

    #[test]
    fn data_must_match_schema() {
        let err = run_plan(&plan(1.0, TWO_COUNTS), |_| Dataset::from_ints(&[1]), 0).unwrap_err();
        assert!(matches!(err, Error::DataSchemaMismatch(_)));
    }

    #[test]
    fn published_schema_lists_every_op() {
        let schema: serde_json::Value = serde_json::from_str(PLAN_JSON_SCHEMA).unwrap();
        let text = schema.to_string();
        for op in [
            "pipeline",
            "compose",
            "parallel",
            "filter",
            "clamp",
            "count",
            "sum_clamped",
            "any_match",
            "laplace",
            "randomized_response",
            "noisy_count",
            "noisy_sum",
            "noisy_average",
            "sample_aggregate",
        ] {
            assert!(text.contains(&format!("\"const\":\"{op}\"")), "{op} missing from schema");
        }
    }
}
