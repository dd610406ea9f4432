//! Line-oriented command engine for interactive sessions.
//!
//! ```text
//! budget                                   spent and remaining at the current queryable
//! count --epsilon E
//! sum --col C --lower L --upper U --epsilon E
//! avg --col C --epsilon E                  values clamped to [-1, 1]
//! partition --by "P1; P2; ..."             disjoint children, plus one for the rest
//! children                                 list children of the current queryable
//! use <id>                                 move to a queryable (q3 or 3)
//! up                                       move to the parent
//! spawn --budget B                         sequential child with a prepaid budget
//! transcript <file>                        write answered queries as JSON lines
//! help | quit
//! ```

use std::fmt;
use std::path::PathBuf;

use crate::calculus::{Dataset, ExactLoss, Metric, PrivacyLoss, Value};
use crate::error::{Error, Result};
use crate::interactive::{AgentKind, BudgetMode, QueryableId, Session, ROOT};
use crate::mechanisms;
use crate::transforms::PartitionSpec;

pub const HELP: &str = "\
commands:
  budget
  count --epsilon E
  sum --col C --lower L --upper U --epsilon E
  avg --col C --epsilon E
  partition --by \"P1; P2; ...\"
  children
  use <id>
  up
  spawn --budget B
  transcript <file>
  help
  quit";

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Budget,
    Count { epsilon: f64 },
    Sum { column: String, lower: f64, upper: f64, epsilon: f64 },
    Avg { column: String, epsilon: f64 },
    Partition { by: Vec<String> },
    Children,
    Use(QueryableId),
    Up,
    Spawn { budget: f64 },
    Transcript(PathBuf),
    Help,
    Quit,
    Empty,
}

struct Flags {
    pairs: Vec<(String, String)>,
}

impl Flags {
    fn parse(args: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut it = args.iter();
        while let Some(a) = it.next() {
            let key = a.strip_prefix("--").ok_or_else(|| Error::BadCommand(format!("unexpected argument {a:?}")))?;
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| Error::BadCommand(format!("--{key} needs a value")))?;
                    (key.to_string(), v.clone())
                }
            };
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(Error::BadCommand(format!("--{key} given twice")));
            }
            pairs.push((key, value));
        }
        Ok(Flags { pairs })
    }

    fn take(&mut self, key: &str) -> Result<String> {
        let i = self
            .pairs
            .iter()
            .position(|(k, _)| k == key)
            .ok_or_else(|| Error::BadCommand(format!("missing --{key}")))?;
        Ok(self.pairs.remove(i).1)
    }

    fn number(&mut self, key: &str) -> Result<f64> {
        let v = self.take(key)?;
        let x: f64 = v.parse().map_err(|_| Error::BadCommand(format!("--{key} expects a number, got {v:?}")))?;
        if !x.is_finite() {
            return Err(Error::BadCommand(format!("--{key} must be finite")));
        }
        Ok(x)
    }

    fn done(self) -> Result<()> {
        match self.pairs.first() {
            Some((k, _)) => Err(Error::BadCommand(format!("unknown flag --{k}"))),
            None => Ok(()),
        }
    }
}

/// Parses one command line. Arguments are split shell-style, so predicates
/// with spaces go in quotes.
pub fn parse_command(line: &str) -> Result<Command> {
    let words = shlex::split(line).ok_or_else(|| Error::BadCommand("unbalanced quotes".into()))?;
    let Some((head, rest)) = words.split_first() else {
        return Ok(Command::Empty);
    };
    let positional = |n: usize| -> Result<()> {
        if rest.len() == n {
            Ok(())
        } else {
            Err(Error::BadCommand(format!("{head} takes {n} argument(s)")))
        }
    };
    let cmd = match head.as_str() {
        "budget" => {
            positional(0)?;
            Command::Budget
        }
        "children" | "ls" => {
            positional(0)?;
            Command::Children
        }
        "up" => {
            positional(0)?;
            Command::Up
        }
        "help" => {
            positional(0)?;
            Command::Help
        }
        "quit" | "exit" => {
            positional(0)?;
            Command::Quit
        }
        "use" => {
            positional(1)?;
            let raw = rest[0].strip_prefix('q').unwrap_or(&rest[0]);
            let id = raw.parse().map_err(|_| Error::BadCommand(format!("not a queryable id: {:?}", rest[0])))?;
            Command::Use(QueryableId(id))
        }
        "transcript" => {
            positional(1)?;
            Command::Transcript(PathBuf::from(&rest[0]))
        }
        "count" => {
            let mut f = Flags::parse(rest)?;
            let epsilon = f.number("epsilon")?;
            f.done()?;
            Command::Count { epsilon }
        }
        "sum" => {
            let mut f = Flags::parse(rest)?;
            let cmd = Command::Sum {
                column: f.take("col")?,
                lower: f.number("lower")?,
                upper: f.number("upper")?,
                epsilon: f.number("epsilon")?,
            };
            f.done()?;
            cmd
        }
        "avg" => {
            let mut f = Flags::parse(rest)?;
            let cmd = Command::Avg { column: f.take("col")?, epsilon: f.number("epsilon")? };
            f.done()?;
            cmd
        }
        "partition" => {
            let mut f = Flags::parse(rest)?;
            let by: Vec<String> =
                f.take("by")?.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
            f.done()?;
            if by.is_empty() {
                return Err(Error::BadCommand("--by needs at least one predicate".into()));
            }
            Command::Partition { by }
        }
        "spawn" => {
            let mut f = Flags::parse(rest)?;
            let budget = f.number("budget")?;
            f.done()?;
            Command::Spawn { budget }
        }
        other => return Err(Error::BadCommand(format!("unknown command {other:?}; try help"))),
    };
    Ok(cmd)
}

/// The result of one command, rendered by its `Display` impl.
#[derive(Debug, Clone)]
pub enum Outcome {
    Answer { at: QueryableId, value: Value, charged: ExactLoss, remaining: Option<ExactLoss> },
    Budget { at: QueryableId, label: String, spent: ExactLoss, remaining: Option<ExactLoss> },
    Children(Vec<(QueryableId, String)>),
    Moved { to: QueryableId, label: String },
    Spawned { id: QueryableId, budget: ExactLoss, remaining: Option<ExactLoss> },
    TranscriptWritten { path: PathBuf, entries: usize },
    Help,
    Quit,
    Nothing,
}

fn remaining_text(r: &Option<ExactLoss>) -> String {
    r.as_ref().map_or_else(|| "unbounded".to_string(), ExactLoss::render)
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Scalar(x) => format!("{x:.6}"),
        Value::Bit(b) => b.to_string(),
        other => serde_json::to_string(other).unwrap_or_default(),
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Answer { at, value, charged, remaining } => write!(
                f,
                "{at}: answer {} | charged {} | remaining {}",
                value_text(value),
                charged.render(),
                remaining_text(remaining)
            ),
            Outcome::Budget { at, label, spent, remaining } => {
                write!(f, "{at} ({label}): spent {} | remaining {}", spent.render(), remaining_text(remaining))
            }
            Outcome::Children(kids) if kids.is_empty() => f.write_str("no children"),
            Outcome::Children(kids) => {
                let lines: Vec<String> = kids.iter().map(|(id, label)| format!("{id}  {label}")).collect();
                f.write_str(&lines.join("\n"))
            }
            Outcome::Moved { to, label } => write!(f, "now at {to} ({label})"),
            Outcome::Spawned { id, budget, remaining } => {
                write!(f, "spawned {id} with budget {} | remaining {}", budget.render(), remaining_text(remaining))
            }
            Outcome::TranscriptWritten { path, entries } => {
                write!(f, "wrote {entries} entries to {}", path.display())
            }
            Outcome::Help => f.write_str(HELP),
            Outcome::Quit => f.write_str("bye"),
            Outcome::Nothing => Ok(()),
        }
    }
}

/// An interactive session plus a cursor into its queryable tree.
#[derive(Debug, Clone)]
pub struct Repl {
    session: Session,
    current: QueryableId,
}

impl Repl {
    pub fn new(data: Dataset, metric: Metric, budget: f64, mode: BudgetMode, seed: u64) -> Result<Self> {
        Ok(Repl { session: Session::new(data, metric, PrivacyLoss::Pure(budget), mode, seed)?, current: ROOT })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn current(&self) -> QueryableId {
        self.current
    }

    /// Runs one line. Errors (including rejected budget requests) leave the
    /// session usable.
    pub fn execute(&mut self, line: &str) -> Result<Outcome> {
        let cmd = parse_command(line)?;
        self.run(cmd)
    }

    pub fn run(&mut self, cmd: Command) -> Result<Outcome> {
        let at = self.current;
        let (domain, metric) = {
            let (d, m) = self.session.domain(at)?;
            (d.clone(), m)
        };
        let m = match cmd {
            Command::Count { epsilon } => mechanisms::noisy_count(&domain, metric, epsilon)?,
            Command::Sum { column, lower, upper, epsilon } => {
                mechanisms::noisy_sum(&domain, metric, &column, lower, upper, epsilon)?
            }
            Command::Avg { column, epsilon } => mechanisms::noisy_average_column(&domain, metric, &column, epsilon)?,
            Command::Budget => {
                return Ok(Outcome::Budget {
                    at,
                    label: self.session.label(at)?.to_string(),
                    spent: self.session.spent(at)?.clone(),
                    remaining: self.session.remaining(at)?,
                })
            }
            Command::Partition { by } => {
                let sources: Vec<&str> = by.iter().map(String::as_str).collect();
                let spec = PartitionSpec::from_predicates(domain.schema(), &sources, true)?;
                self.session.partition(at, &spec)?;
                return Ok(self.children());
            }
            Command::Children => return Ok(self.children()),
            Command::Use(id) => {
                let label = self.session.label(id)?.to_string();
                self.current = id;
                return Ok(Outcome::Moved { to: id, label });
            }
            Command::Up => {
                let to = self.session.parent(at)?.ok_or_else(|| Error::BadCommand("already at the root".into()))?;
                self.current = to;
                return Ok(Outcome::Moved { to, label: self.session.label(to)?.to_string() });
            }
            Command::Spawn { budget } => {
                let id = self.session.spawn_sequential(at, &PrivacyLoss::Pure(budget))?;
                let budget = match self.session.kind(id)? {
                    AgentKind::SequentialChild { budget, .. } => budget.clone(),
                    _ => unreachable!("spawn creates sequential children"),
                };
                return Ok(Outcome::Spawned { id, budget, remaining: self.session.remaining(at)? });
            }
            Command::Transcript(path) => {
                let file = std::fs::File::create(&path)?;
                self.session.write_transcript(std::io::BufWriter::new(file))?;
                return Ok(Outcome::TranscriptWritten { path, entries: self.session.transcript().len() });
            }
            Command::Help => return Ok(Outcome::Help),
            Command::Quit => return Ok(Outcome::Quit),
            Command::Empty => return Ok(Outcome::Nothing),
        };
        let answer = self.session.query(at, &m)?;
        Ok(Outcome::Answer { at, value: answer.value, charged: answer.loss, remaining: self.session.remaining(at)? })
    }

    fn children(&self) -> Outcome {
        let kids = self
            .session
            .children(self.current)
            .into_iter()
            .map(|id| (id, self.session.label(id).unwrap_or_default().to_string()))
            .collect();
        Outcome::Children(kids)
    }
}
