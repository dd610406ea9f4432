use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Int64,
    Float64,
    Bool,
    String,
}

impl CellKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, CellKind::Int64 | CellKind::Float64)
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CellKind::Int64 => "int64",
            CellKind::Float64 => "float64",
            CellKind::Bool => "bool",
            CellKind::String => "string",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    pub kind: CellKind,
}

/// Ordered, uniquely named columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Schema {
    columns: Vec<Column>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaRepr {
    columns: Vec<Column>,
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SchemaRepr::deserialize(d)?;
        Schema::new(repr.columns).map_err(serde::de::Error::custom)
    }
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        for (i, c) in columns.iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::EmptyColumnName);
            }
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(Schema { columns })
    }

    /// Shorthand for tests and examples: `Schema::of(&[("age", CellKind::Int64)])`.
    pub fn of(columns: &[(&str, CellKind)]) -> Result<Self> {
        Schema::new(columns.iter().map(|(n, k)| Column { name: (*n).to_string(), kind: *k }).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schema serializes")
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c.name == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn kind_of(&self, name: &str) -> Result<CellKind> {
        Ok(self.columns[self.index_of(name)?].kind)
    }

    /// Index of `name`, which must be a numeric column.
    pub fn numeric_index(&self, name: &str) -> Result<usize> {
        let i = self.index_of(name)?;
        let kind = self.columns[i].kind;
        if !kind.is_numeric() {
            return Err(Error::ColumnKind {
                column: name.to_string(),
                expected: "numeric".into(),
                actual: kind.to_string(),
            });
        }
        Ok(i)
    }

    pub fn check(&self, record: &Record) -> Result<()> {
        if record.0.len() != self.columns.len() {
            return Err(Error::RecordSchemaMismatch(format!(
                "{} cells for {} columns",
                record.0.len(),
                self.columns.len()
            )));
        }
        for (cell, col) in record.0.iter().zip(&self.columns) {
            if cell.kind() != col.kind {
                return Err(Error::RecordSchemaMismatch(format!(
                    "column {:?} expects {}, got {}",
                    col.name,
                    col.kind,
                    cell.kind()
                )));
            }
            if let Cell::Float(x) = cell {
                if !x.is_finite() {
                    return Err(Error::RecordSchemaMismatch(format!("column {:?} holds non-finite {x}", col.name)));
                }
            }
        }
        Ok(())
    }
}

/// A single cell. Floats compare by total order so records can be sorted
/// into a canonical multiset order.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Cell {
    pub fn kind(&self) -> CellKind {
        match self {
            Cell::Int(_) => CellKind::Int64,
            Cell::Float(_) => CellKind::Float64,
            Cell::Bool(_) => CellKind::Bool,
            Cell::Str(_) => CellKind::String,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Cell::Int(_) => 0,
            Cell::Float(_) => 1,
            Cell::Bool(_) => 2,
            Cell::Str(_) => 3,
        }
    }

    pub fn parse(kind: CellKind, text: &str) -> Result<Cell> {
        let bad = || Error::DataSchemaMismatch(format!("cannot read {text:?} as {kind}"));
        match kind {
            CellKind::Int64 => text.trim().parse().map(Cell::Int).map_err(|_| bad()),
            CellKind::Float64 => {
                let v: f64 = text.trim().parse().map_err(|_| bad())?;
                if v.is_finite() {
                    Ok(Cell::Float(v))
                } else {
                    Err(bad())
                }
            }
            CellKind::Bool => match text.trim().to_ascii_lowercase().as_str() {
                "true" | "1" => Ok(Cell::Bool(true)),
                "false" | "0" => Ok(Cell::Bool(false)),
                _ => Err(bad()),
            },
            CellKind::String => Ok(Cell::Str(text.to_string())),
        }
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            (Cell::Float(a), Cell::Float(b)) => a.total_cmp(b),
            (Cell::Bool(a), Cell::Bool(b)) => a.cmp(b),
            (Cell::Str(a), Cell::Str(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Cell {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Cell::Int(v) => v.hash(state),
            Cell::Float(v) => v.to_bits().hash(state),
            Cell::Bool(v) => v.hash(state),
            Cell::Str(v) => v.hash(state),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Str(v) => write!(f, "{v:?}"),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Float(v) => s.serialize_f64(*v),
            Cell::Bool(v) => s.serialize_bool(*v),
            Cell::Str(v) => s.serialize_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Record(pub Vec<Cell>);

impl Record {
    pub fn new(cells: Vec<Cell>) -> Self {
        Record(cells)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.0
    }

    pub fn get(&self, index: usize) -> Option<&Cell> {
        self.0.get(index)
    }
}

impl From<Vec<Cell>> for Record {
    fn from(cells: Vec<Cell>) -> Self {
        Record(cells)
    }
}

/// A multiset of records. Records are kept in canonical (sorted) order, so
/// two datasets holding the same multiset are equal no matter how they were
/// built.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dataset {
    schema: Arc<Schema>,
    records: Arc<Vec<Record>>,
}

impl Dataset {
    pub fn new(schema: Schema, records: Vec<Record>) -> Result<Self> {
        Self::with_schema(Arc::new(schema), records)
    }

    pub fn with_schema(schema: Arc<Schema>, mut records: Vec<Record>) -> Result<Self> {
        for r in &records {
            schema.check(r)?;
        }
        records.sort_unstable();
        Ok(Dataset { schema, records: Arc::new(records) })
    }

    pub fn empty(schema: Schema) -> Self {
        Dataset { schema: Arc::new(schema), records: Arc::new(Vec::new()) }
    }

    /// One float column named `value`; handy for numeric examples.
    pub fn from_floats(values: &[f64]) -> Result<Self> {
        let schema = Schema::of(&[("value", CellKind::Float64)])?;
        Dataset::new(schema, values.iter().map(|v| Record(vec![Cell::Float(*v)])).collect())
    }

    /// One int column named `value`.
    pub fn from_ints(values: &[i64]) -> Result<Self> {
        let schema = Schema::of(&[("value", CellKind::Int64)])?;
        Dataset::new(schema, values.iter().map(|v| Record(vec![Cell::Int(*v)])).collect())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Records in canonical order.
    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.schema.numeric_index(name)?;
        Ok(self.records.iter().map(|r| r.0[i].as_f64().expect("numeric column")).collect())
    }

    /// Loads RFC 4180 CSV with a header row. Every schema column must appear
    /// in the header exactly once and no other columns may appear.
    pub fn from_csv_reader<R: Read>(schema: Schema, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != schema.len() {
            return Err(Error::DataSchemaMismatch(format!(
                "header has {} columns, schema has {}",
                headers.len(),
                schema.len()
            )));
        }
        // position in the csv row for each schema column
        let mut positions = Vec::with_capacity(schema.len());
        for col in schema.columns() {
            let found: Vec<usize> =
                headers.iter().enumerate().filter(|(_, h)| *h == col.name).map(|(i, _)| i).collect();
            match found.as_slice() {
                [i] => positions.push(*i),
                [] => return Err(Error::DataSchemaMismatch(format!("missing column {:?}", col.name))),
                _ => return Err(Error::DataSchemaMismatch(format!("duplicate column {:?}", col.name))),
            }
        }
        let mut records = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            if row.len() != schema.len() {
                return Err(Error::DataSchemaMismatch(format!("row {} has {} fields", line + 1, row.len())));
            }
            let cells = schema
                .columns()
                .iter()
                .zip(&positions)
                .map(|(col, &p)| {
                    Cell::parse(col.kind, &row[p])
                        .map_err(|e| Error::DataSchemaMismatch(format!("row {}, column {:?}: {e}", line + 1, col.name)))
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(Record(cells));
        }
        Dataset::new(schema, records)
    }

    pub fn from_csv_path(schema: Schema, path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(schema, std::io::BufReader::new(file))
    }
}
