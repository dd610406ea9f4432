//! Interactive queryables under hierarchical budget agents.
//!
//! A [`Session`] owns a tree of queryables over one private dataset. Every
//! query is approved by the agent of the queryable it targets, which may
//! forward a (possibly smaller) request to its parent:
//!
//! * a root agent is a privacy filter (fixed budget) or an odometer (no cap);
//! * a partition child charges its parent only the amount by which the
//!   request raises the maximum cumulative loss among its siblings;
//! * a sequential child was paid for in full when spawned and answers from
//!   its own sub-budget without consulting the parent.
//!
//! Requests are all-or-nothing. The whole chain is checked before anything
//! is recorded, and a rejected request reads no data and draws no noise.
//! Accounting is in exact rationals.

use std::fmt;
use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::calculus::{
    Dataset, DatasetDomain, Domain, ExactLoss, MeasureKind, Measurement, Metric, PrivacyLoss, Value,
};
use crate::combinators::domain_feeds;
use crate::error::{Error, Result};
use crate::transforms::PartitionSpec;
use crate::{seeded_rng, NoiseRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct QueryableId(pub usize);

impl fmt::Display for QueryableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    Filter,
    Odometer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentKind {
    Root { mode: BudgetMode, budget: Option<ExactLoss> },
    PartitionChild { parent: QueryableId, group: usize, index: usize },
    SequentialChild { parent: QueryableId, budget: ExactLoss },
}

#[derive(Debug, Clone)]
struct Node {
    kind: AgentKind,
    label: String,
    data: Dataset,
    domain: DatasetDomain,
    metric: Metric,
    spent: ExactLoss,
    ledger: Vec<ExactLoss>,
}

#[derive(Debug, Clone)]
struct Group {
    children: Vec<QueryableId>,
}

/// One answered query, as exported to JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptEntry {
    pub queryable: QueryableId,
    pub query: String,
    pub loss: PrivacyLoss,
    pub answer_digest: String,
}

#[derive(Debug, Clone)]
pub struct Answer {
    pub value: Value,
    pub loss: ExactLoss,
}

/// A queryable tree with its randomness source and transcript.
#[derive(Debug, Clone)]
pub struct Session {
    nodes: Vec<Node>,
    groups: Vec<Group>,
    measure: MeasureKind,
    rng: NoiseRng,
    transcript: Vec<TranscriptEntry>,
}

pub const ROOT: QueryableId = QueryableId(0);

impl Session {
    /// A session whose root is a filter (`mode = Filter`, enforcing `budget`)
    /// or an odometer (the budget only fixes the privacy measure).
    pub fn new(data: Dataset, metric: Metric, budget: PrivacyLoss, mode: BudgetMode, seed: u64) -> Result<Self> {
        if !metric.is_dataset_metric() {
            return Err(Error::IncompatibleMetric { metric, carrier: crate::calculus::Carrier::Dataset });
        }
        let measure = budget.measure();
        let budget = match mode {
            BudgetMode::Filter => {
                if budget.epsilon() < 0.0 || budget.delta() < 0.0 {
                    return Err(Error::NegativeBudget);
                }
                Some(ExactLoss::from_decimal(&budget)?)
            }
            BudgetMode::Odometer => None,
        };
        let domain = DatasetDomain::from_arc(data.schema_arc().clone());
        Ok(Session {
            nodes: vec![Node {
                kind: AgentKind::Root { mode, budget },
                label: "root".into(),
                data,
                domain,
                metric,
                spent: ExactLoss::zero(measure),
                ledger: Vec::new(),
            }],
            groups: Vec::new(),
            measure,
            rng: seeded_rng(seed),
            transcript: Vec::new(),
        })
    }

    pub fn root(&self) -> QueryableId {
        ROOT
    }

    pub fn measure(&self) -> MeasureKind {
        self.measure
    }

    fn node(&self, id: QueryableId) -> Result<&Node> {
        self.nodes.get(id.0).ok_or(Error::UnknownQueryable(id.0))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kind(&self, id: QueryableId) -> Result<&AgentKind> {
        Ok(&self.node(id)?.kind)
    }

    pub fn label(&self, id: QueryableId) -> Result<&str> {
        Ok(&self.node(id)?.label)
    }

    pub fn parent(&self, id: QueryableId) -> Result<Option<QueryableId>> {
        Ok(match self.node(id)?.kind {
            AgentKind::Root { .. } => None,
            AgentKind::PartitionChild { parent, .. } | AgentKind::SequentialChild { parent, .. } => Some(parent),
        })
    }

    /// The domain and metric measurements against `id` must accept.
    pub fn domain(&self, id: QueryableId) -> Result<(&DatasetDomain, Metric)> {
        let n = self.node(id)?;
        Ok((&n.domain, n.metric))
    }

    /// Cumulative loss granted at `id` (for the root: the odometer reading).
    pub fn spent(&self, id: QueryableId) -> Result<&ExactLoss> {
        Ok(&self.node(id)?.spent)
    }

    /// Charges granted at `id`, in order, including forwarded ones.
    pub fn ledger(&self, id: QueryableId) -> Result<&[ExactLoss]> {
        Ok(&self.node(id)?.ledger)
    }

    /// The largest request `id` could still have approved; `None` when no
    /// agent on the chain enforces a cap.
    pub fn remaining(&self, id: QueryableId) -> Result<Option<ExactLoss>> {
        let n = self.node(id)?;
        match &n.kind {
            AgentKind::Root { budget, .. } => budget.as_ref().map(|b| b.saturating_sub(&n.spent)).transpose(),
            AgentKind::SequentialChild { budget, .. } => Ok(Some(budget.saturating_sub(&n.spent)?)),
            AgentKind::PartitionChild { parent, group, .. } => {
                let headroom = self.group_max(*group)?.saturating_sub(&n.spent)?;
                self.remaining(*parent)?.map(|r| r.add(&headroom)).transpose()
            }
        }
    }

    fn group_max(&self, group: usize) -> Result<ExactLoss> {
        let mut max = ExactLoss::zero(self.measure);
        for c in &self.groups[group].children {
            max = max.max(&self.nodes[c.0].spent)?;
        }
        Ok(max)
    }

    /// Walks the agent chain for a request of `loss` at `id`, returning the
    /// charge each agent would record. Nothing is modified.
    fn plan_charges(&self, id: QueryableId, loss: &ExactLoss) -> Result<Vec<(QueryableId, ExactLoss)>> {
        let mut charges = Vec::new();
        let (mut at, mut amount) = (id, loss.clone());
        loop {
            let n = self.node(at)?;
            charges.push((at, amount.clone()));
            let after = n.spent.add(&amount)?;
            match &n.kind {
                AgentKind::Root { budget, .. } => {
                    if let Some(b) = budget {
                        if !after.dominated_by(b)? {
                            return Err(self.exceeded(id, loss));
                        }
                    }
                    return Ok(charges);
                }
                AgentKind::SequentialChild { budget, .. } => {
                    if !after.dominated_by(budget)? {
                        return Err(self.exceeded(id, loss));
                    }
                    return Ok(charges);
                }
                AgentKind::PartitionChild { parent, group, .. } => {
                    let current = self.group_max(*group)?;
                    let raised = current.max(&after)?;
                    amount = raised.saturating_sub(&current)?;
                    at = *parent;
                }
            }
        }
    }

    fn exceeded(&self, id: QueryableId, loss: &ExactLoss) -> Error {
        let remaining = match self.remaining(id) {
            Ok(Some(r)) => r.render(),
            _ => "unbounded".into(),
        };
        Error::BudgetExceeded { requested: loss.render(), remaining }
    }

    fn commit(&mut self, charges: Vec<(QueryableId, ExactLoss)>) -> Result<()> {
        for (at, amount) in charges {
            let n = &mut self.nodes[at.0];
            n.spent = n.spent.add(&amount)?;
            n.ledger.push(amount);
        }
        Ok(())
    }

    fn coerce(&self, loss: ExactLoss) -> Result<ExactLoss> {
        match (self.measure, loss.measure) {
            (a, b) if a == b => Ok(loss),
            (MeasureKind::ApproxDp, MeasureKind::PureDp) => Ok(ExactLoss { measure: MeasureKind::ApproxDp, ..loss }),
            _ => Err(Error::HeterogeneousMeasures),
        }
    }

    /// Approves `loss` at `id` without running anything; used for external
    /// spending and by [`Session::query`].
    pub fn request(&mut self, id: QueryableId, loss: &PrivacyLoss) -> Result<ExactLoss> {
        loss.validate()?;
        let exact = self.coerce(ExactLoss::from_decimal(loss)?)?;
        let charges = self.plan_charges(id, &exact)?;
        self.commit(charges)?;
        Ok(exact)
    }

    /// Runs `m` on the data behind `id` once the agent chain grants
    /// `m.loss_at(1)`. A rejection leaves every piece of state untouched.
    pub fn query(&mut self, id: QueryableId, m: &Measurement) -> Result<Answer> {
        let node = self.node(id)?;
        if m.input_metric() != node.metric || !domain_feeds(&Domain::Dataset(node.domain.clone()), m.input_domain()) {
            return Err(Error::DomainMismatch(format!("{} does not accept the data of {id}", m.name())));
        }
        let loss = match m.exact_loss_at(1.0)? {
            Some(l) => l,
            None => ExactLoss::from_binary(&m.loss_at(1.0)?)
                .map_err(|_| Error::InvalidLoss(format!("{} has no finite loss", m.name())))?,
        };
        let loss = self.coerce(loss)?;
        let charges = self.plan_charges(id, &loss)?;
        self.commit(charges)?;
        let value = m.invoke(&Value::Dataset(self.nodes[id.0].data.clone()), &mut self.rng)?;
        self.transcript.push(TranscriptEntry {
            queryable: id,
            query: m.name().to_string(),
            loss: loss.to_loss(),
            answer_digest: digest(&value),
        });
        Ok(Answer { value, loss })
    }

    /// Splits the data behind `id` into disjoint children. Needs symmetric
    /// distance, where one record touches exactly one piece.
    pub fn partition(&mut self, id: QueryableId, spec: &PartitionSpec) -> Result<Vec<QueryableId>> {
        let node = self.node(id)?;
        if node.metric != Metric::SymmetricDistance {
            return Err(Error::Unsupported("partitioning a queryable requires symmetric distance".into()));
        }
        let pieces = spec.split(&node.data)?;
        let (domain, metric, base) = (node.domain.clone(), node.metric, node.label.clone());
        let group = self.groups.len();
        let mut children = Vec::with_capacity(pieces.len());
        for (index, (data, label)) in pieces.into_iter().zip(spec.labels()).enumerate() {
            let child = QueryableId(self.nodes.len());
            self.nodes.push(Node {
                kind: AgentKind::PartitionChild { parent: id, group, index },
                label: format!("{base}/[{label}]"),
                data,
                domain: domain.clone(),
                metric,
                spent: ExactLoss::zero(self.measure),
                ledger: Vec::new(),
            });
            children.push(child);
        }
        self.groups.push(Group { children: children.clone() });
        Ok(children)
    }

    /// A child filter whose whole `budget` is charged to `id` up front.
    pub fn spawn_sequential(&mut self, id: QueryableId, budget: &PrivacyLoss) -> Result<QueryableId> {
        if budget.epsilon() < 0.0 || budget.delta() < 0.0 {
            return Err(Error::NegativeBudget);
        }
        let exact = self.request(id, budget)?;
        let parent = &self.nodes[id.0];
        let child = QueryableId(self.nodes.len());
        let node = Node {
            kind: AgentKind::SequentialChild { parent: id, budget: exact },
            label: format!("{}/seq{}", parent.label, child.0),
            data: parent.data.clone(),
            domain: parent.domain.clone(),
            metric: parent.metric,
            spent: ExactLoss::zero(self.measure),
            ledger: Vec::new(),
        };
        self.nodes.push(node);
        Ok(child)
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn write_transcript(&self, mut out: impl Write) -> Result<()> {
        for e in &self.transcript {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Children of `id` created by partitioning or spawning, in creation order.
    pub fn children(&self, id: QueryableId) -> Vec<QueryableId> {
        (0..self.nodes.len()).map(QueryableId).filter(|c| self.parent(*c).ok().flatten() == Some(id)).collect()
    }

    /// Remaining budget at `id` as a float loss, for display.
    pub fn remaining_loss(&self, id: QueryableId) -> Result<Option<PrivacyLoss>> {
        Ok(self.remaining(id)?.map(|r| r.to_loss()))
    }
}

/// SHA-256 of the answer's JSON rendering.
pub fn digest(value: &Value) -> String {
    let json = serde_json::to_vec(value).unwrap_or_default();
    hex::encode(Sha256::digest(&json))
}
