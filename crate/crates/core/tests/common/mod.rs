//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls the library's metric, loss or accounting code.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use privcalc::calculus::{Cell, CellKind, Dataset, DatasetDomain, Metric, Record, Schema, Transformation, Value};
use privcalc::combinators::chain_tt;
use privcalc::interactive::{AgentKind, BudgetMode, QueryableId, Session, ROOT};
use privcalc::sampagg::{estimator, SampleAggregate};
use privcalc::transforms::{self, PartitionSpec, RecordFn};
use privcalc::{mechanisms, Error, PrivacyLoss};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

// ---------------------------------------------------------------------------
// multisets and distances

/// All multisets of size at most `max_len` over `0..alphabet`, as sorted vectors.
pub fn multisets(alphabet: i64, max_len: usize) -> Vec<Vec<i64>> {
    fn extend(prefix: &mut Vec<i64>, from: i64, alphabet: i64, left: usize, out: &mut Vec<Vec<i64>>) {
        out.push(prefix.clone());
        if left == 0 {
            return;
        }
        for s in from..alphabet {
            prefix.push(s);
            extend(prefix, s, alphabet, left - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), 0, alphabet, max_len, &mut out);
    out
}

pub fn schema_v() -> Schema {
    Schema::of(&[("v", CellKind::Int64)]).unwrap()
}

pub fn ints(v: &[i64]) -> Dataset {
    Dataset::new(schema_v(), v.iter().map(|x| Record::new(vec![Cell::Int(*x)])).collect()).unwrap()
}

fn key(r: &Record) -> String {
    format!("{:?}", r.cells())
}

fn counts(d: &Dataset) -> BTreeMap<String, i64> {
    let mut m = BTreeMap::new();
    for r in d.records() {
        *m.entry(key(r)).or_insert(0) += 1;
    }
    m
}

/// `|A \ B| + |B \ A|` on multisets.
pub fn sym_distance(a: &Dataset, b: &Dataset) -> f64 {
    let (ca, cb) = (counts(a), counts(b));
    let keys: std::collections::BTreeSet<&String> = ca.keys().chain(cb.keys()).collect();
    keys.into_iter().map(|k| (ca.get(k).unwrap_or(&0) - cb.get(k).unwrap_or(&0)).abs()).sum::<i64>() as f64
}

/// Number of records to change to turn `a` into `b`; infinite for different sizes.
pub fn change_one_distance(a: &Dataset, b: &Dataset) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    sym_distance(a, b) / 2.0
}

fn scalar_of(v: &Value) -> f64 {
    match v {
        Value::Scalar(x) => *x,
        Value::Bit(b) => f64::from(u8::from(*b)),
        other => panic!("not a scalar: {other:?}"),
    }
}

/// The output distance, computed without the library's metric code.
pub fn oracle_distance(metric: Metric, a: &Value, b: &Value) -> f64 {
    match (metric, a, b) {
        (Metric::SymmetricDistance, Value::Dataset(x), Value::Dataset(y)) => sym_distance(x, y),
        (Metric::ChangeOneDistance, Value::Dataset(x), Value::Dataset(y)) => change_one_distance(x, y),
        (Metric::PerPieceDistance, Value::Datasets(x), Value::Datasets(y)) => {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| sym_distance(p, q)).sum()
        }
        (Metric::AbsoluteDistance, _, _) => (scalar_of(a) - scalar_of(b)).abs(),
        (Metric::L1Distance, Value::Vector(x), Value::Vector(y)) => x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum(),
        (m, a, b) => panic!("no oracle for {m:?} on {a:?} / {b:?}"),
    }
}

// ---------------------------------------------------------------------------
// exhaustive stability

pub struct StabilityReport {
    pub pairs: usize,
    pub violations: Vec<String>,
}

/// Checks `d_out <= stability(d_in)` for every pair of inputs comparable under
/// the transformation's input metric.
pub fn exhaustive_stability(name: &str, t: &Transformation, inputs: &[Dataset]) -> StabilityReport {
    let in_metric = t.input_metric();
    let outputs: Vec<Value> = inputs.iter().map(|x| t.invoke(&Value::Dataset(x.clone())).unwrap()).collect();
    let mut report = StabilityReport { pairs: 0, violations: Vec::new() };
    for (i, x) in inputs.iter().enumerate() {
        for (j, y) in inputs.iter().enumerate() {
            let d_in = match in_metric {
                Metric::SymmetricDistance => sym_distance(x, y),
                Metric::ChangeOneDistance => change_one_distance(x, y),
                m => panic!("unexpected input metric {m:?}"),
            };
            if !d_in.is_finite() {
                continue;
            }
            report.pairs += 1;
            let d_out = oracle_distance(t.output_metric(), &outputs[i], &outputs[j]);
            let bound = t.stability().eval(d_in);
            if d_out > bound + 1e-9 {
                report.violations.push(format!(
                    "{name}: d_in {d_in} d_out {d_out} > {bound} for {:?} vs {:?}",
                    ints_of(x),
                    ints_of(y)
                ));
            }
        }
    }
    report
}

fn ints_of(d: &Dataset) -> Vec<String> {
    d.records().iter().map(key).collect()
}

/// Every shipped dataset transformation, instantiated over the one-column
/// integer schema under `metric`.
pub fn shipped_transformations(metric: Metric) -> Vec<(String, Transformation)> {
    let dom = DatasetDomain::new(schema_v());
    let s = schema_v();
    let square = |r: &Record| match r.cells()[0] {
        Cell::Int(v) => Ok(Record::new(vec![Cell::Int(v * v)])),
        _ => Err(Error::RecordFunction("int expected".into())),
    };
    let succ: RecordFn = Arc::new(|r: &Record| match r.cells()[0] {
        Cell::Int(v) => Ok(Record::new(vec![Cell::Int(v + 1)])),
        _ => Err(Error::RecordFunction("int expected".into())),
    });
    let ident: RecordFn = Arc::new(|r: &Record| Ok(r.clone()));
    let clamp = transforms::clamp(&dom, metric, "v", 0.0, 1.0).unwrap();
    let clamped = clamp.output_domain().as_dataset().unwrap().clone();
    let sum = chain_tt(&transforms::sum_clamped(&clamped, metric, "v", 0.0, 1.0).unwrap(), &clamp).unwrap();
    let spec = PartitionSpec::from_predicates(&s, &["v < 1", "v = 1"], true).unwrap();
    let sa = SampleAggregate::from_arc(estimator("mean", &s, "v").unwrap(), 2, 11, 0.0, 2.0).unwrap();
    let filter = transforms::filter_where(&dom, metric, "v >= 1").unwrap();
    let filtered_count = chain_tt(&transforms::count(&dom, filter.output_metric()).unwrap(), &filter).unwrap();
    vec![
        ("map_rows".into(), transforms::map_rows(&dom, metric, s.clone(), square).unwrap()),
        ("multi_map".into(), transforms::multi_map(&dom, metric, s.clone(), vec![ident, succ]).unwrap()),
        ("filter".into(), transforms::filter_where(&dom, metric, "v > 0").unwrap()),
        ("clamp".into(), transforms::clamp(&dom, metric, "v", 0.0, 1.0).unwrap()),
        ("clamp+sum".into(), sum),
        ("count".into(), transforms::count(&dom, metric).unwrap()),
        ("filter+count".into(), filtered_count),
        ("any_match".into(), transforms::any_match(&dom, metric, "v = 2").unwrap()),
        ("partition".into(), transforms::partition(&dom, metric, spec).unwrap()),
        ("sample_aggregate".into(), sa.transformation(&dom, metric).unwrap()),
    ]
}

pub fn small_inputs() -> Vec<Dataset> {
    multisets(3, 3).iter().map(|m| ints(m)).collect()
}

// ---------------------------------------------------------------------------
// session replay oracle

pub type Q = Ratio<i64>;

pub fn big(q: &Q) -> BigRational {
    BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

#[derive(Debug, Clone)]
enum OKind {
    Root { cap: Option<Q> },
    Partition { parent: usize },
    Sequential { parent: usize, cap: Q },
}

/// Recomputes every agent's cumulative loss from the transcript, the logged
/// spawns and the tree shape, using the parallel-composition rule directly:
/// a node owes its own queries, the full budget of every sequential child,
/// and for each partition group the largest cost among the group's children.
#[derive(Debug, Clone, Default)]
pub struct ReplayOracle {
    nodes: Vec<OKind>,
    groups: Vec<(usize, Vec<usize>)>,
    direct: Vec<Q>,
    spawned: Vec<Q>,
}

impl ReplayOracle {
    pub fn new(cap: Option<Q>) -> Self {
        ReplayOracle {
            nodes: vec![OKind::Root { cap }],
            groups: vec![],
            direct: vec![Q::from(0)],
            spawned: vec![Q::from(0)],
        }
    }

    fn push(&mut self, k: OKind) -> usize {
        self.nodes.push(k);
        self.direct.push(Q::from(0));
        self.spawned.push(Q::from(0));
        self.nodes.len() - 1
    }

    pub fn partition(&mut self, parent: usize, pieces: usize) -> Vec<usize> {
        let kids: Vec<usize> = (0..pieces).map(|_| self.push(OKind::Partition { parent })).collect();
        self.groups.push((parent, kids.clone()));
        kids
    }

    pub fn cost(&self, n: usize) -> Q {
        let mut c = self.direct[n] + self.spawned[n];
        for (p, kids) in &self.groups {
            if *p == n {
                c += kids.iter().map(|k| self.cost(*k)).max().unwrap_or(Q::from(0));
            }
        }
        c
    }

    /// The agent that bounds a request at `n`: the nearest sequential
    /// ancestor (or `n` itself), else the root.
    fn gate(&self, mut n: usize) -> usize {
        loop {
            match self.nodes[n] {
                OKind::Root { .. } | OKind::Sequential { .. } => return n,
                OKind::Partition { parent } => n = parent,
            }
        }
    }

    fn within_caps(&self, n: usize) -> bool {
        let g = self.gate(n);
        match &self.nodes[g] {
            OKind::Root { cap: None } => true,
            OKind::Root { cap: Some(c) } | OKind::Sequential { cap: c, .. } => self.cost(g) <= *c,
            OKind::Partition { .. } => unreachable!(),
        }
    }

    pub fn would_grant_query(&self, n: usize, eps: Q) -> bool {
        let mut next = self.clone();
        next.direct[n] += eps;
        next.within_caps(n)
    }

    pub fn would_grant_spawn(&self, n: usize, budget: Q) -> bool {
        let mut next = self.clone();
        next.spawned[n] += budget;
        next.within_caps(n)
    }

    pub fn record_query(&mut self, n: usize, eps: Q) {
        self.direct[n] += eps;
    }

    pub fn spawn(&mut self, n: usize, budget: Q) -> usize {
        self.spawned[n] += budget;
        self.push(OKind::Sequential { parent: n, cap: budget })
    }

    pub fn caps(&self) -> Vec<(usize, Q)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, k)| match k {
                OKind::Root { cap: Some(c) } | OKind::Sequential { cap: c, .. } => Some((i, *c)),
                _ => None,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
}

/// Losses are drawn as `k / 100`; recovers `k` from a transcript float.
fn hundredths(x: f64) -> Q {
    let k = (x * 100.0).round();
    assert_eq!(k / 100.0, x, "transcript loss {x} is not a whole number of hundredths");
    Q::new(k as i64, 100)
}

#[derive(Debug, Default)]
pub struct SessionStats {
    pub steps: usize,
    pub granted: usize,
    pub rejected: usize,
    pub partitions: usize,
    pub spawns: usize,
}

/// Drives one random adaptive session and checks it step by step against
/// the replay oracle. Returns the first discrepancy as an error.
pub fn random_session(seed: u64, steps: usize) -> Result<SessionStats, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let metric = if rng.gen_bool(0.8) { Metric::SymmetricDistance } else { Metric::ChangeOneDistance };
    let odometer = rng.gen_bool(0.25);
    let cap_k: i64 = rng.gen_range(10..=150);
    let len = rng.gen_range(0..12);
    let data: Vec<i64> = (0..len).map(|_| rng.gen_range(0..6)).collect();
    let mode = if odometer { BudgetMode::Odometer } else { BudgetMode::Filter };
    let mut session = Session::new(ints(&data), metric, PrivacyLoss::Pure(cap_k as f64 / 100.0), mode, seed)
        .map_err(|e| e.to_string())?;
    let mut oracle = ReplayOracle::new(if odometer { None } else { Some(Q::new(cap_k, 100)) });
    let mut stats = SessionStats::default();
    let mut transcript_seen = 0;

    for step in 0..steps {
        stats.steps += 1;
        let n = rng.gen_range(0..oracle.len());
        let id = QueryableId(n);
        let k: i64 = rng.gen_range(1..=40);
        let eps = Q::new(k, 100);
        let roll: f64 = rng.gen();
        let before_root = session.spent(ROOT).unwrap().epsilon.clone();
        if roll < 0.6 {
            let (dom, m) = session.domain(id).map(|(d, m)| (d.clone(), m)).unwrap();
            // a count is free under change-one distance, where the size is public
            let mech = if m == Metric::SymmetricDistance && rng.gen_bool(0.5) {
                mechanisms::noisy_count(&dom, m, k as f64 / 100.0).unwrap()
            } else {
                mechanisms::noisy_sum(&dom, m, "v", 0.0, 5.0, k as f64 / 100.0).unwrap()
            };
            let expect = oracle.would_grant_query(n, eps);
            match session.query(id, &mech) {
                Ok(_) if expect => {
                    stats.granted += 1;
                    let entries = &session.transcript()[transcript_seen..];
                    if entries.len() != 1 || entries[0].queryable != id {
                        return Err(format!("step {step}: transcript did not record the answer at {id}"));
                    }
                    let charged = hundredths(entries[0].loss.epsilon());
                    if charged != eps {
                        return Err(format!("step {step}: charged {charged}, requested {eps}"));
                    }
                    oracle.record_query(n, charged);
                    transcript_seen += 1;
                }
                Err(Error::BudgetExceeded { .. }) if !expect => {
                    stats.rejected += 1;
                    if session.spent(ROOT).unwrap().epsilon != before_root
                        || session.transcript().len() != transcript_seen
                    {
                        return Err(format!("step {step}: rejected query changed state"));
                    }
                }
                other => return Err(format!("step {step}: query at {id} expected grant={expect}, got {other:?}")),
            }
        } else if roll < 0.8 {
            let expect = oracle.would_grant_spawn(n, eps);
            match session.spawn_sequential(id, &PrivacyLoss::Pure(k as f64 / 100.0)) {
                Ok(child) if expect => {
                    stats.granted += 1;
                    stats.spawns += 1;
                    let mine = oracle.spawn(n, eps);
                    if child.0 != mine {
                        return Err(format!("step {step}: spawn id {child} vs oracle {mine}"));
                    }
                }
                Err(Error::BudgetExceeded { .. }) if !expect => stats.rejected += 1,
                other => return Err(format!("step {step}: spawn at {id} expected grant={expect}, got {other:?}")),
            }
        } else if oracle.len() < 24 {
            let t = rng.gen_range(0..6);
            let spec = PartitionSpec::from_predicates(&schema_v(), &[&format!("v < {t}")], true).unwrap();
            match (metric, session.partition(id, &spec)) {
                (Metric::SymmetricDistance, Ok(kids)) => {
                    stats.partitions += 1;
                    let mine = oracle.partition(n, kids.len());
                    if kids.iter().map(|q| q.0).collect::<Vec<_>>() != mine {
                        return Err(format!("step {step}: partition ids {kids:?} vs oracle {mine:?}"));
                    }
                }
                (Metric::ChangeOneDistance, Err(Error::Unsupported(_))) => {}
                (_, other) => return Err(format!("step {step}: partition at {id}: {other:?}")),
            }
        }

        let root = session.spent(ROOT).unwrap();
        let ledger_sum: BigRational = session.ledger(ROOT).unwrap().iter().map(|l| l.epsilon.clone()).sum();
        if root.epsilon != big(&oracle.cost(0)) {
            return Err(format!("step {step}: root spent {} vs replay {}", root.epsilon, oracle.cost(0)));
        }
        if ledger_sum != root.epsilon {
            return Err(format!("step {step}: root reading {} vs granted sum {ledger_sum}", root.epsilon));
        }
        for node in 0..oracle.len() {
            if session
                .ledger(QueryableId(node))
                .unwrap()
                .iter()
                .any(|l| l.epsilon < BigRational::from_integer(0.into()))
            {
                return Err(format!("step {step}: negative charge at {node}"));
            }
        }
        for (node, cap) in oracle.caps() {
            let spent = &session.spent(QueryableId(node)).unwrap().epsilon;
            if *spent > big(&cap) {
                return Err(format!("step {step}: {node} spent {spent} over its budget {cap}"));
            }
            if *spent != big(&oracle.cost(node)) {
                return Err(format!("step {step}: {node} spent {spent} vs replay {}", oracle.cost(node)));
            }
        }
        if let AgentKind::Root { budget: Some(b), .. } = session.kind(ROOT).unwrap() {
            if root.epsilon > b.epsilon {
                return Err(format!("step {step}: filter exceeded"));
            }
        }
    }
    Ok(stats)
}
