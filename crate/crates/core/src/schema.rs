//! Relational dataset description and delimited-file ingestion.
//!
//! A dataset is a star schema: one root table with a unique key (the
//! customer), plus secondary tables that each carry a foreign key back to
//! the root. Table content is read from header-first delimited text files.
//! Ingestion is tolerant of warehouse noise: unparseable cells become
//! missing values and are counted, undeclared columns are ignored, and
//! secondary rows whose foreign key matches no root row are kept in the
//! table but reported and never joined.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::month::DateValue;

/// Declared type of a field.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FieldKind {
    /// Continuous or integer measurements.
    Numeric,
    /// Free-form labels with a finite domain.
    Categorical,
    /// Calendar dates, at day or month precision.
    Date,
    /// Keys and other fields whose values name entities.
    Identifier,
    /// Booleans.
    Flag,
}

impl FieldKind {
    fn parse(s: &str) -> Option<FieldKind> {
        Some(match s {
            "numeric" => FieldKind::Numeric,
            "categorical" => FieldKind::Categorical,
            "date" => FieldKind::Date,
            "identifier" => FieldKind::Identifier,
            "flag" => FieldKind::Flag,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Numeric => "numeric",
            FieldKind::Categorical => "categorical",
            FieldKind::Date => "date",
            FieldKind::Identifier => "identifier",
            FieldKind::Flag => "flag",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FieldSchema {
    pub name: String,
    pub kind: FieldKind,
}

/// Schema of one table.
#[derive(Clone, Debug)]
pub struct TableSchema {
    pub name: String,
    /// Root tables: the unique key field. Secondary tables: the foreign key
    /// referencing the root key.
    pub key_field: String,
    /// `None` for the root table.
    pub is_secondary: bool,
    /// Field used for temporal windowing, when the table has dates.
    pub date_field: Option<String>,
    pub fields: Vec<FieldSchema>,
}

impl TableSchema {
    /// Position and schema of a field, by name.
    pub fn field(&self, name: &str) -> Option<(usize, &FieldSchema)> {
        self.fields.iter().enumerate().find(|(_, f)| f.name == name)
    }

    pub fn key_index(&self) -> usize {
        self.field(&self.key_field).expect("key field present").0
    }
}

/// Schema of a whole dataset: the root table plus secondary tables.
#[derive(Clone, Debug)]
pub struct DatasetSchema {
    pub root: TableSchema,
    pub secondaries: Vec<TableSchema>,
}

impl DatasetSchema {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        if self.root.name == name {
            return Some(&self.root);
        }
        self.secondaries.iter().find(|t| t.name == name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &TableSchema> {
        std::iter::once(&self.root).chain(self.secondaries.iter())
    }
}

#[derive(Error, Debug)]
pub enum SchemaError {
    #[error("schema descriptor is not valid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("schema declares no root table")]
    NoRoot,
    #[error("schema declares more than one root table ({0} and {1})")]
    MultipleRoots(String, String),
    #[error("duplicate table name {0:?}")]
    DuplicateTable(String),
    #[error("table {table:?} declares field {field:?} twice")]
    DuplicateField { table: String, field: String },
    #[error("table {table:?} field {field:?} has unknown kind {kind:?}")]
    UnknownKind { table: String, field: String, kind: String },
    #[error("table {table:?} has unknown role {role:?} (expected \"root\" or \"secondary\")")]
    UnknownRole { table: String, role: String },
    #[error("root table {0:?} declares no key")]
    MissingKey(String),
    #[error("secondary table {0:?} declares no foreign key")]
    MissingForeignKey(String),
    #[error("table {table:?} foreign key {fk:?} does not match the root key {root_key:?}")]
    ForeignKeyMismatch { table: String, fk: String, root_key: String },
    #[error("table {table:?} date field {field:?} is not declared with kind \"date\"")]
    BadDateField { table: String, field: String },
}

#[derive(Deserialize)]
struct RawDescriptor {
    tables: Vec<RawTable>,
}

#[derive(Deserialize)]
struct RawTable {
    name: String,
    role: String,
    #[serde(default)]
    key: Option<String>,
    #[serde(default)]
    foreign_key: Option<String>,
    #[serde(default)]
    date_field: Option<String>,
    fields: Vec<RawField>,
}

#[derive(Deserialize)]
struct RawField {
    name: String,
    kind: String,
}

/// Parses a JSON schema descriptor.
///
/// The descriptor lists tables with a role (`root` or `secondary`), a `key`
/// (root) or `foreign_key` (secondary), typed fields, and optionally a
/// `date_field` naming the field used for windowing; by default the first
/// date field is used. Key fields not listed under `fields` are injected as
/// identifiers.
pub fn parse_schema(text: &str) -> Result<DatasetSchema, SchemaError> {
    let raw: RawDescriptor = serde_json::from_str(text)?;
    let mut root: Option<TableSchema> = None;
    let mut secondaries = Vec::new();
    let mut seen = BTreeSet::new();

    for table in &raw.tables {
        if !seen.insert(table.name.clone()) {
            return Err(SchemaError::DuplicateTable(table.name.clone()));
        }
        let is_secondary = match table.role.as_str() {
            "root" => false,
            "secondary" => true,
            other => {
                return Err(SchemaError::UnknownRole {
                    table: table.name.clone(),
                    role: other.to_string(),
                })
            }
        };

        let mut fields = Vec::new();
        let mut names = BTreeSet::new();
        for f in &table.fields {
            if !names.insert(f.name.clone()) {
                return Err(SchemaError::DuplicateField {
                    table: table.name.clone(),
                    field: f.name.clone(),
                });
            }
            let kind = FieldKind::parse(&f.kind).ok_or_else(|| SchemaError::UnknownKind {
                table: table.name.clone(),
                field: f.name.clone(),
                kind: f.kind.clone(),
            })?;
            fields.push(FieldSchema { name: f.name.clone(), kind });
        }

        let key_field = if is_secondary {
            table
                .foreign_key
                .clone()
                .ok_or_else(|| SchemaError::MissingForeignKey(table.name.clone()))?
        } else {
            table.key.clone().ok_or_else(|| SchemaError::MissingKey(table.name.clone()))?
        };
        if !names.contains(&key_field) {
            fields.insert(0, FieldSchema { name: key_field.clone(), kind: FieldKind::Identifier });
        }

        let date_field = match &table.date_field {
            Some(name) => {
                let ok = fields.iter().any(|f| f.name == *name && f.kind == FieldKind::Date);
                if !ok {
                    return Err(SchemaError::BadDateField {
                        table: table.name.clone(),
                        field: name.clone(),
                    });
                }
                Some(name.clone())
            }
            None => fields.iter().find(|f| f.kind == FieldKind::Date).map(|f| f.name.clone()),
        };

        let schema = TableSchema { name: table.name.clone(), key_field, is_secondary, date_field, fields };
        if is_secondary {
            secondaries.push(schema);
        } else if let Some(prev) = &root {
            return Err(SchemaError::MultipleRoots(prev.name.clone(), schema.name));
        } else {
            root = Some(schema);
        }
    }

    let root = root.ok_or(SchemaError::NoRoot)?;
    for sec in &secondaries {
        if sec.key_field != root.key_field {
            return Err(SchemaError::ForeignKeyMismatch {
                table: sec.name.clone(),
                fk: sec.key_field.clone(),
                root_key: root.key_field.clone(),
            });
        }
    }
    Ok(DatasetSchema { root, secondaries })
}

/// One cell of a table.
#[derive(Clone, PartialEq, Debug)]
pub enum Cell {
    Missing,
    Number(f64),
    Text(String),
    Date(DateValue),
    Flag(bool),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Text content of identifier and categorical cells.
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_date(&self) -> Option<&DateValue> {
        match self {
            Cell::Date(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_flag(&self) -> Option<bool> {
        match self {
            Cell::Flag(b) => Some(*b),
            _ => None,
        }
    }
}

/// Loaded content of one table. Row arity always equals the schema arity.
#[derive(Clone, Debug)]
pub struct TableData {
    pub schema: TableSchema,
    pub rows: Vec<Vec<Cell>>,
}

impl TableData {
    pub fn column_index(&self, field: &str) -> Option<usize> {
        self.schema.field(field).map(|(i, _)| i)
    }
}

/// Ingestion report for one table.
#[derive(Clone, Debug, Default)]
pub struct LoadWarnings {
    pub table: String,
    /// Cells that failed to parse under the declared kind and were read as missing.
    pub coerced_cells: usize,
    pub coerced_by_field: BTreeMap<String, usize>,
    /// File columns not present in the schema.
    pub ignored_columns: Vec<String>,
    /// Rows with fewer cells than the header; absent cells were read as missing.
    pub ragged_rows: usize,
}

impl LoadWarnings {
    pub fn is_clean(&self) -> bool {
        self.coerced_cells == 0 && self.ignored_columns.is_empty() && self.ragged_rows == 0
    }
}

#[derive(Error, Debug)]
pub enum LoadError {
    #[error("table {table:?}: file has no header line")]
    EmptyFile { table: String },
    #[error("table {table:?}: declared column {column:?} not found in file")]
    MissingColumn { table: String, column: String },
    #[error("table {table:?}: duplicate key {key:?}")]
    DuplicateKey { table: String, key: String },
    #[error("table {table:?}, line {line}: key cell is empty")]
    MissingKeyCell { table: String, line: usize },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

fn parse_cell(raw: &str, kind: FieldKind) -> Result<Cell, ()> {
    if raw.is_empty() {
        return Ok(Cell::Missing);
    }
    match kind {
        FieldKind::Numeric => raw.parse::<f64>().map(Cell::Number).map_err(|_| ()),
        FieldKind::Categorical | FieldKind::Identifier => Ok(Cell::Text(raw.to_string())),
        FieldKind::Date => DateValue::parse(raw).map(Cell::Date).ok_or(()),
        FieldKind::Flag => match raw {
            "true" | "True" | "TRUE" | "1" | "yes" => Ok(Cell::Flag(true)),
            "false" | "False" | "FALSE" | "0" | "no" => Ok(Cell::Flag(false)),
            _ => Err(()),
        },
    }
}

fn render_cell(cell: &Cell) -> String {
    match cell {
        Cell::Missing => String::new(),
        Cell::Number(x) => format!("{x}"),
        Cell::Text(s) => s.clone(),
        Cell::Date(d) => d.to_string(),
        Cell::Flag(b) => b.to_string(),
    }
}

/// Reads one delimited file against a table schema.
///
/// The first line is a header naming the columns; declared columns may
/// appear in any order. Root tables (those without a foreign key) must have
/// unique, non-empty keys. All other irregularities degrade to warnings.
pub fn load_table(
    schema: &TableSchema,
    text: &str,
    delimiter: char,
) -> Result<(TableData, LoadWarnings), LoadError> {
    let mut warnings = LoadWarnings { table: schema.name.clone(), ..LoadWarnings::default() };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| LoadError::EmptyFile { table: schema.name.clone() })?;
    let header: Vec<&str> = header.split(delimiter).collect();

    // Map each schema field to its column position in the file.
    let mut positions = Vec::with_capacity(schema.fields.len());
    for field in &schema.fields {
        let pos = header.iter().position(|h| *h == field.name).ok_or_else(|| {
            LoadError::MissingColumn { table: schema.name.clone(), column: field.name.clone() }
        })?;
        positions.push(pos);
    }
    for h in &header {
        if !schema.fields.iter().any(|f| f.name == *h) {
            warnings.ignored_columns.push(h.to_string());
        }
    }

    let key_idx = schema.key_index();
    let check_keys = !schema.is_secondary;
    let mut seen_keys = BTreeSet::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(delimiter).collect();
        if cells.len() < header.len() {
            warnings.ragged_rows += 1;
        }
        let mut row = Vec::with_capacity(schema.fields.len());
        for (field, &pos) in schema.fields.iter().zip(&positions) {
            let raw = cells.get(pos).copied().unwrap_or("");
            match parse_cell(raw, field.kind) {
                Ok(cell) => row.push(cell),
                Err(()) => {
                    warnings.coerced_cells += 1;
                    *warnings.coerced_by_field.entry(field.name.clone()).or_insert(0) += 1;
                    row.push(Cell::Missing);
                }
            }
        }
        if check_keys {
            match row[key_idx].as_text() {
                None => {
                    return Err(LoadError::MissingKeyCell {
                        table: schema.name.clone(),
                        line: lineno + 2,
                    })
                }
                Some(key) => {
                    if !seen_keys.insert(key.to_string()) {
                        return Err(LoadError::DuplicateKey {
                            table: schema.name.clone(),
                            key: key.to_string(),
                        });
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok((TableData { schema: schema.clone(), rows }, warnings))
}

/// Serializes a table back to delimited text, inverse of [`load_table`].
///
/// Numbers render in shortest round-trip form, so a load/write/load cycle
/// reproduces cell values exactly. Text cells must not contain the
/// delimiter or newlines.
pub fn write_table(data: &TableData, delimiter: char) -> String {
    let mut out = String::new();
    let names: Vec<&str> = data.schema.fields.iter().map(|f| f.name.as_str()).collect();
    out.push_str(&names.join(&delimiter.to_string()));
    out.push('\n');
    for row in &data.rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push(delimiter);
            }
            let _ = write!(out, "{}", render_cell(cell));
        }
        out.push('\n');
    }
    out
}

/// A fully loaded dataset: root table, secondary tables, and the join index.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub root: TableData,
    pub secondaries: Vec<TableData>,
    root_index: BTreeMap<String, usize>,
    orphan_counts: BTreeMap<String, usize>,
}

impl Dataset {
    /// Assembles a dataset from loaded tables, indexing the root keys and
    /// counting secondary rows whose foreign key matches no root row.
    pub fn new(
        schema: DatasetSchema,
        root: TableData,
        secondaries: Vec<TableData>,
    ) -> Result<Dataset, LoadError> {
        let key_idx = root.schema.key_index();
        let mut root_index = BTreeMap::new();
        for (i, row) in root.rows.iter().enumerate() {
            let key = row[key_idx].as_text().expect("root keys validated at load");
            root_index.insert(key.to_string(), i);
        }
        let mut orphan_counts = BTreeMap::new();
        for table in &secondaries {
            let fk = table.schema.key_index();
            let orphans = table
                .rows
                .iter()
                .filter(|row| match row[fk].as_text() {
                    Some(key) => !root_index.contains_key(key),
                    None => true,
                })
                .count();
            orphan_counts.insert(table.schema.name.clone(), orphans);
        }
        Ok(Dataset { schema, root, secondaries, root_index, orphan_counts })
    }

    /// Loads a dataset directory: a schema descriptor plus one `<table>.tsv`
    /// file per declared table.
    pub fn load_dir(
        schema_path: &Path,
        data_dir: &Path,
        delimiter: char,
    ) -> Result<(Dataset, Vec<LoadWarnings>), LoadError> {
        let read = |path: &Path| {
            fs::read_to_string(path)
                .map_err(|source| LoadError::Io { path: path.display().to_string(), source })
        };
        let schema = parse_schema(&read(schema_path)?)?;
        let mut warnings = Vec::new();
        let mut load = |table: &TableSchema| -> Result<TableData, LoadError> {
            let path = data_dir.join(format!("{}.tsv", table.name));
            let (data, warn) = load_table(table, &read(&path)?, delimiter)?;
            warnings.push(warn);
            Ok(data)
        };
        let root = load(&schema.root)?;
        let mut secondaries = Vec::new();
        for table in &schema.secondaries {
            secondaries.push(load(table)?);
        }
        let dataset = Dataset::new(schema, root, secondaries)?;
        Ok((dataset, warnings))
    }

    pub fn root_ids(&self) -> impl Iterator<Item = &str> {
        let key_idx = self.root.schema.key_index();
        self.root.rows.iter().map(move |row| row[key_idx].as_text().expect("validated"))
    }

    /// Root row for a key.
    pub fn root_row(&self, id: &str) -> Option<&[Cell]> {
        self.root_index.get(id).map(|&i| self.root.rows[i].as_slice())
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.root_index.contains_key(id)
    }

    pub fn secondary(&self, name: &str) -> Option<&TableData> {
        self.secondaries.iter().find(|t| t.schema.name == name)
    }

    /// Per-table counts of secondary rows excluded from joins because their
    /// foreign key matches no root row.
    pub fn orphan_counts(&self) -> &BTreeMap<String, usize> {
        &self.orphan_counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const DESCRIPTOR: &str = r#"{
      "tables": [
        {
          "name": "customer",
          "role": "root",
          "key": "customer_id",
          "fields": [
            {"name": "customer_id", "kind": "identifier"},
            {"name": "segment", "kind": "categorical"},
            {"name": "activation_date", "kind": "date"},
            {"name": "bad_debt", "kind": "flag"}
          ]
        },
        {
          "name": "usage",
          "role": "secondary",
          "foreign_key": "customer_id",
          "fields": [
            {"name": "event_date", "kind": "date"},
            {"name": "service", "kind": "categorical"},
            {"name": "charge", "kind": "numeric"}
          ]
        }
      ]
    }"#;

    #[test]
    fn descriptor_parses_and_injects_keys() {
        let schema = parse_schema(DESCRIPTOR).unwrap();
        assert_eq!(schema.root.name, "customer");
        assert_eq!(schema.root.key_field, "customer_id");
        assert!(!schema.root.is_secondary);
        assert_eq!(schema.root.date_field.as_deref(), Some("activation_date"));

        // The usage table does not list its foreign key; it is injected first.
        let usage = schema.table("usage").unwrap();
        assert_eq!(usage.fields[0].name, "customer_id");
        assert_eq!(usage.fields[0].kind, FieldKind::Identifier);
        assert_eq!(usage.date_field.as_deref(), Some("event_date"));
    }

    #[test]
    fn descriptor_errors() {
        let no_root = r#"{"tables": [{"name": "t", "role": "secondary", "foreign_key": "id", "fields": []}]}"#;
        assert!(matches!(parse_schema(no_root), Err(SchemaError::NoRoot)));

        let bad_kind = r#"{"tables": [{"name": "t", "role": "root", "key": "id",
            "fields": [{"name": "x", "kind": "float"}]}]}"#;
        assert!(matches!(parse_schema(bad_kind), Err(SchemaError::UnknownKind { .. })));

        let fk_mismatch = r#"{"tables": [
            {"name": "r", "role": "root", "key": "id", "fields": []},
            {"name": "s", "role": "secondary", "foreign_key": "rid", "fields": []}]}"#;
        assert!(matches!(parse_schema(fk_mismatch), Err(SchemaError::ForeignKeyMismatch { .. })));
    }

    fn customer_schema() -> TableSchema {
        parse_schema(DESCRIPTOR).unwrap().root.clone()
    }

    #[test]
    fn loads_cells_by_declared_kind() {
        let text = "customer_id\tsegment\tactivation_date\tbad_debt\n\
                    C1\tSoHo\t2013-05-12\tfalse\n\
                    C2\tSME\t2013-06\ttrue\n";
        let (data, warn) = load_table(&customer_schema(), text, '\t').unwrap();
        assert!(warn.is_clean());
        assert_eq!(data.rows.len(), 2);
        assert_eq!(data.rows[0][1], Cell::Text("SoHo".into()));
        assert_eq!(data.rows[1][2].as_date().unwrap().month().to_string(), "2013-06");
        assert_eq!(data.rows[1][3], Cell::Flag(true));
    }

    #[test]
    fn bad_cells_become_missing_and_are_counted() {
        let text = "customer_id\tsegment\tactivation_date\tbad_debt\textra\n\
                    C1\tSoHo\tnot-a-date\tmaybe\tzzz\n\
                    C2\t\t2013-06-01\t\n";
        let (data, warn) = load_table(&customer_schema(), text, '\t').unwrap();
        assert_eq!(warn.coerced_cells, 2);
        assert_eq!(warn.coerced_by_field["activation_date"], 1);
        assert_eq!(warn.coerced_by_field["bad_debt"], 1);
        assert_eq!(warn.ignored_columns, vec!["extra".to_string()]);
        assert_eq!(warn.ragged_rows, 1);
        assert!(data.rows[0][2].is_missing());
        assert!(data.rows[1][1].is_missing()); // empty cell, not a coercion
        assert!(data.rows[1][3].is_missing());
    }

    #[test]
    fn shuffled_columns_are_accepted() {
        let text = "bad_debt\tcustomer_id\tactivation_date\tsegment\n\
                    false\tC1\t2013-05-12\tSoHo\n";
        let (data, _) = load_table(&customer_schema(), text, '\t').unwrap();
        assert_eq!(data.rows[0][0], Cell::Text("C1".into()));
        assert_eq!(data.rows[0][1], Cell::Text("SoHo".into()));
    }

    #[test]
    fn root_key_violations_are_errors() {
        let dup = "customer_id\tsegment\tactivation_date\tbad_debt\nC1\ta\t\t\nC1\tb\t\t\n";
        assert!(matches!(
            load_table(&customer_schema(), dup, '\t'),
            Err(LoadError::DuplicateKey { .. })
        ));
        let empty = "customer_id\tsegment\tactivation_date\tbad_debt\n\ta\t\t\n";
        assert!(matches!(
            load_table(&customer_schema(), empty, '\t'),
            Err(LoadError::MissingKeyCell { line: 2, .. })
        ));
    }

    #[test]
    fn write_then_load_round_trips() {
        let text = "customer_id\tsegment\tactivation_date\tbad_debt\n\
                    C1\tSoHo\t2013-05-12\tfalse\n\
                    C2\t\t2013-06\ttrue\n";
        let schema = customer_schema();
        let (data, _) = load_table(&schema, text, '\t').unwrap();
        let written = write_table(&data, '\t');
        let (again, warn) = load_table(&schema, &written, '\t').unwrap();
        assert!(warn.is_clean());
        assert_eq!(data.rows, again.rows);
    }

    #[test]
    fn numbers_round_trip_exactly() {
        let schema = parse_schema(
            r#"{"tables": [{"name": "t", "role": "root", "key": "id",
                "fields": [{"name": "x", "kind": "numeric"}]}]}"#,
        )
        .unwrap();
        let values = [0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -0.0, 2.5];
        let rows: Vec<Vec<Cell>> = values
            .iter()
            .enumerate()
            .map(|(i, &x)| vec![Cell::Text(format!("r{i}")), Cell::Number(x)])
            .collect();
        let data = TableData { schema: schema.root.clone(), rows };
        let written = write_table(&data, '\t');
        let (again, _) = load_table(&schema.root, &written, '\t').unwrap();
        for (row, &x) in again.rows.iter().zip(&values) {
            assert_eq!(row[1].as_number().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn orphans_are_counted_but_kept() {
        let schema = parse_schema(DESCRIPTOR).unwrap();
        let root_text = "customer_id\tsegment\tactivation_date\tbad_debt\nC1\tSoHo\t\tfalse\n";
        let usage_text = "customer_id\tevent_date\tservice\tcharge\n\
                          C1\t2014-01-03\tvoice\t1.5\n\
                          C9\t2014-01-04\tdata\t2.0\n";
        let (root, _) = load_table(&schema.root, root_text, '\t').unwrap();
        let (usage, _) = load_table(schema.table("usage").unwrap(), usage_text, '\t').unwrap();
        let dataset = Dataset::new(schema, root, vec![usage]).unwrap();
        assert_eq!(dataset.orphan_counts()["usage"], 1);
        assert_eq!(dataset.secondary("usage").unwrap().rows.len(), 2);
        assert!(dataset.contains_id("C1"));
        assert!(!dataset.contains_id("C9"));
    }
}
