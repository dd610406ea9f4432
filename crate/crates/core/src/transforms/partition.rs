use std::fmt;
use std::sync::Arc;

use crate::calculus::{Dataset, Record, Schema};
use crate::error::{Error, Result};
use crate::predicate::Predicate;

pub type RecordPredicate = Arc<dyn Fn(&Record) -> bool + Send + Sync>;
pub type RecordAssignment = Arc<dyn Fn(&Record) -> usize + Send + Sync>;

#[derive(Clone)]
enum Piece {
    Expr(Predicate),
    Custom(RecordPredicate),
    /// Records matching no other piece.
    Rest,
}

#[derive(Clone)]
enum Rule {
    Pieces { pieces: Vec<Piece>, proven_disjoint: bool },
    Assignment { pieces: usize, assign: RecordAssignment },
}

/// A partition of records into `m` pieces. Every record must land in
/// exactly one piece; predicate-based specs are proven disjoint up front
/// when their predicates come from the comparison grammar, and checked
/// record by record otherwise.
#[derive(Clone)]
pub struct PartitionSpec {
    rule: Rule,
    labels: Vec<String>,
}

impl PartitionSpec {
    /// Pieces from predicate expressions, optionally followed by a final
    /// piece holding every record that matches none of them.
    pub fn from_predicates(schema: &Schema, sources: &[&str], include_rest: bool) -> Result<Self> {
        let preds = sources.iter().map(|s| Predicate::parse(s, schema)).collect::<Result<Vec<_>>>()?;
        Self::from_compiled(preds, include_rest)
    }

    pub fn from_compiled(preds: Vec<Predicate>, include_rest: bool) -> Result<Self> {
        if preds.is_empty() && !include_rest {
            return Err(Error::InvalidArity("a partition needs at least one piece".into()));
        }
        let mut proven_disjoint = true;
        for (i, a) in preds.iter().enumerate() {
            for b in &preds[i + 1..] {
                match a.overlaps(b) {
                    Some(true) => return Err(Error::OverlappingPieces),
                    Some(false) => {}
                    None => proven_disjoint = false,
                }
            }
        }
        let mut labels: Vec<String> = preds.iter().map(|p| p.source().to_string()).collect();
        let mut pieces: Vec<Piece> = preds.into_iter().map(Piece::Expr).collect();
        if include_rest {
            pieces.push(Piece::Rest);
            labels.push("otherwise".into());
        }
        Ok(PartitionSpec { rule: Rule::Pieces { pieces, proven_disjoint }, labels })
    }

    /// Pieces from opaque predicates; disjointness and totality are checked
    /// per record.
    pub fn from_fns(preds: Vec<RecordPredicate>) -> Result<Self> {
        if preds.is_empty() {
            return Err(Error::InvalidArity("a partition needs at least one piece".into()));
        }
        let labels = (0..preds.len()).map(|i| format!("piece {i}")).collect();
        Ok(PartitionSpec {
            rule: Rule::Pieces { pieces: preds.into_iter().map(Piece::Custom).collect(), proven_disjoint: false },
            labels,
        })
    }

    /// Pieces from an assignment function; total and disjoint by construction.
    /// Out-of-range indices are an error at run time.
    pub fn by_assignment(pieces: usize, assign: impl Fn(&Record) -> usize + Send + Sync + 'static) -> Result<Self> {
        if pieces == 0 {
            return Err(Error::InvalidArity("a partition needs at least one piece".into()));
        }
        let labels = (0..pieces).map(|i| format!("piece {i}")).collect();
        Ok(PartitionSpec { rule: Rule::Assignment { pieces, assign: Arc::new(assign) }, labels })
    }

    pub fn len(&self) -> usize {
        match &self.rule {
            Rule::Pieces { pieces, .. } => pieces.len(),
            Rule::Assignment { pieces, .. } => *pieces,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn proven_disjoint(&self) -> bool {
        matches!(self.rule, Rule::Pieces { proven_disjoint: true, .. } | Rule::Assignment { .. })
    }

    pub fn assign(&self, r: &Record) -> Result<usize> {
        match &self.rule {
            Rule::Assignment { pieces, assign } => {
                let i = assign(r);
                if i < *pieces {
                    Ok(i)
                } else {
                    Err(Error::NoMatchingPiece)
                }
            }
            Rule::Pieces { pieces, proven_disjoint } => {
                let mut found = None;
                for (i, p) in pieces.iter().enumerate() {
                    let hit = match p {
                        Piece::Expr(e) => e.eval(r),
                        Piece::Custom(f) => f(r),
                        Piece::Rest => found.is_none(),
                    };
                    if hit {
                        if found.is_some() {
                            return Err(Error::OverlappingPieces);
                        }
                        found = Some(i);
                        if *proven_disjoint {
                            break;
                        }
                    }
                }
                found.ok_or(Error::NoMatchingPiece)
            }
        }
    }

    pub fn split(&self, d: &Dataset) -> Result<Vec<Dataset>> {
        let mut buckets: Vec<Vec<Record>> = vec![Vec::new(); self.len()];
        for r in d.records() {
            buckets[self.assign(r)?].push(r.clone());
        }
        buckets.into_iter().map(|b| Dataset::with_schema(d.schema_arc().clone(), b)).collect()
    }
}

impl fmt::Debug for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartitionSpec")
            .field("pieces", &self.labels)
            .field("proven_disjoint", &self.proven_disjoint())
            .finish()
    }
}
