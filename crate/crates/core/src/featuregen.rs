//! Feature construction: from relational tables to a flat matrix.
//!
//! Explanatory variables come from three origins: native root-table fields,
//! expert-written aggregate formulas, and automatically sampled aggregates
//! over the secondary tables. Aggregate formulas carry partition operands
//! (by weekday, by month, by label) that expand into one column per
//! operand value, and every aggregate is evaluated only over the secondary
//! rows dated inside each instance's observation window.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::month::{weekday_name, Month, MONTH_NAMES, WEEKDAY_NAMES};
use crate::preprocess::Value;
use crate::schema::{Cell, Dataset, DatasetSchema, FieldKind, TableSchema};
use crate::windowing::{Label, LabeledFrame, WindowPlan};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Count,
    CountDistinct,
    Sum,
    Mean,
    Min,
    Max,
    Mode,
}

pub(crate) const AGGREGATORS: [Aggregator; 7] = [
    Aggregator::Count,
    Aggregator::CountDistinct,
    Aggregator::Sum,
    Aggregator::Mean,
    Aggregator::Min,
    Aggregator::Max,
    Aggregator::Mode,
];

impl Aggregator {
    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Count => "Count",
            Aggregator::CountDistinct => "CountDistinct",
            Aggregator::Sum => "Sum",
            Aggregator::Mean => "Mean",
            Aggregator::Min => "Min",
            Aggregator::Max => "Max",
            Aggregator::Mode => "Mode",
        }
    }

    fn parse(s: &str) -> Option<Aggregator> {
        AGGREGATORS.into_iter().find(|a| a.name() == s)
    }

    /// Aggregates over a numeric value operand.
    fn is_numeric_agg(self) -> bool {
        matches!(self, Aggregator::Sum | Aggregator::Mean | Aggregator::Min | Aggregator::Max)
    }
}

/// An operand over secondary-table rows: a field read directly or a derived
/// recoding of one.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "op", content = "field", rename_all = "snake_case")]
pub enum Operand {
    /// The field's own value.
    Field(String),
    /// Weekday of a date field ("Mon".."Sun"; dates without day precision
    /// yield no value).
    WeekDay(String),
    /// Calendar month of a date field ("Jan".."Dec").
    MonthOfYear(String),
    /// The value of an identifier field, treated as a label.
    LabelOf(String),
}

impl Operand {
    pub fn field(&self) -> &str {
        match self {
            Operand::Field(f) | Operand::WeekDay(f) | Operand::MonthOfYear(f) | Operand::LabelOf(f) => f,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Operand::Field(f) => f.clone(),
            Operand::WeekDay(f) => format!("WeekDay({f})"),
            Operand::MonthOfYear(f) => format!("Month({f})"),
            Operand::LabelOf(f) => format!("Label({f})"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Native,
    Expert,
    Auto,
}

/// An unexpanded feature description.
#[derive(Clone, PartialEq, Debug)]
pub struct FeatureSpec {
    pub name: String,
    pub origin: Origin,
    pub body: SpecBody,
}

#[derive(Clone, PartialEq, Debug)]
pub enum SpecBody {
    /// A root-table field; date fields are recoded as whole months elapsed
    /// at the anchor.
    Native { field: String, date_age: bool },
    /// An aggregate over one secondary table. Partition operands multiply
    /// the spec into one column per operand-value combination.
    Aggregate {
        table: String,
        aggregator: Aggregator,
        value: Option<Operand>,
        partitions: Vec<Operand>,
        selector: Option<(String, String)>,
    },
}

/// Renders an aggregate body in the expert formula grammar.
fn render_aggregate(
    table: &str,
    aggregator: Aggregator,
    value: &Option<Operand>,
    partitions: &[Operand],
    selector: &Option<(String, String)>,
) -> String {
    let mut out = format!("{}({table}", aggregator.name());
    if let Some(v) = value {
        let _ = write!(out, ", {}", v.render());
    }
    if !partitions.is_empty() {
        let ops: Vec<String> = partitions.iter().map(Operand::render).collect();
        let _ = write!(out, " by {}", ops.join(", "));
    }
    if let Some((field, constant)) = selector {
        let _ = write!(out, " where {field}={constant}");
    }
    out.push(')');
    out
}

#[derive(Error, Debug)]
pub enum FeatureError {
    #[error("cannot parse formula {formula:?}: {reason}")]
    Parse { formula: String, reason: String },
    #[error("formula {formula:?}: unknown secondary table {table:?}")]
    UnknownTable { formula: String, table: String },
    #[error("formula {formula:?}: table {table:?} has no field {field:?}")]
    UnknownField { formula: String, table: String, field: String },
    #[error("formula {formula:?}: {reason}")]
    TypeMismatch { formula: String, reason: String },
    #[error("construction budget must be positive")]
    ZeroBudget,
    #[error("matrix has no column named {0:?}")]
    UnknownColumn(String),
}

// ---------------------------------------------------------------------------
// Expert formula parsing

#[derive(Clone, PartialEq, Debug)]
enum Token {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Eq,
}

fn tokenize(text: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '(' => {
                chars.next();
                tokens.push(Token::LParen);
            }
            ')' => {
                chars.next();
                tokens.push(Token::RParen);
            }
            ',' => {
                chars.next();
                tokens.push(Token::Comma);
            }
            '=' => {
                chars.next();
                tokens.push(Token::Eq);
            }
            '\'' | '"' => {
                let quote = c;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some(c) if c == quote => break,
                        Some(c) => s.push(c),
                        None => return Err("unterminated quote".into()),
                    }
                }
                tokens.push(Token::Ident(s));
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Ident(s));
            }
            c => return Err(format!("unexpected character {c:?}")),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Token) -> Result<(), String> {
        match self.next() {
            Some(got) if *got == t => Ok(()),
            got => Err(format!("expected {t:?}, found {got:?}")),
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Token::Ident(s)) => Ok(s.clone()),
            got => Err(format!("expected a name, found {got:?}")),
        }
    }

    fn operand(&mut self) -> Result<Operand, String> {
        let head = self.ident()?;
        let derived = matches!(head.as_str(), "WeekDay" | "Month" | "Label")
            && self.peek() == Some(&Token::LParen);
        if !derived {
            return Ok(Operand::Field(head));
        }
        self.expect(Token::LParen)?;
        let field = self.ident()?;
        self.expect(Token::RParen)?;
        Ok(match head.as_str() {
            "WeekDay" => Operand::WeekDay(field),
            "Month" => Operand::MonthOfYear(field),
            _ => Operand::LabelOf(field),
        })
    }
}

/// Parses and validates an expert aggregate formula.
///
/// Grammar (whitespace-insensitive):
/// ```text
/// formula  = aggregator "(" table ["," operand] ["by" operand {"," operand}]
///            ["where" field "=" constant] ")"
/// operand  = field | "WeekDay" "(" field ")" | "Month" "(" field ")"
///          | "Label" "(" field ")"
/// ```
/// Aggregators: Count, CountDistinct, Sum, Mean, Min, Max, Mode. Sum, Mean,
/// Min and Max need a numeric value operand; CountDistinct and Mode need a
/// categorical, identifier, flag or derived one; Count takes none.
pub fn parse_expert(schema: &DatasetSchema, text: &str) -> Result<FeatureSpec, FeatureError> {
    let fail = |reason: String| FeatureError::Parse { formula: text.to_string(), reason };
    let tokens = tokenize(text).map_err(&fail)?;
    let mut p = Parser { tokens: &tokens, pos: 0 };

    let agg_name = p.ident().map_err(&fail)?;
    let aggregator = Aggregator::parse(&agg_name)
        .ok_or_else(|| fail(format!("unknown aggregator {agg_name:?}")))?;
    p.expect(Token::LParen).map_err(&fail)?;
    let table = p.ident().map_err(&fail)?;

    let mut value = None;
    if p.peek() == Some(&Token::Comma) {
        p.next();
        value = Some(p.operand().map_err(&fail)?);
    }
    let mut partitions = Vec::new();
    if matches!(p.peek(), Some(Token::Ident(s)) if s == "by") {
        p.next();
        loop {
            partitions.push(p.operand().map_err(&fail)?);
            if p.peek() == Some(&Token::Comma) {
                p.next();
            } else {
                break;
            }
        }
    }
    let mut selector = None;
    if matches!(p.peek(), Some(Token::Ident(s)) if s == "where") {
        p.next();
        let field = p.ident().map_err(&fail)?;
        p.expect(Token::Eq).map_err(&fail)?;
        let constant = p.ident().map_err(&fail)?;
        selector = Some((field, constant));
    }
    p.expect(Token::RParen).map_err(&fail)?;
    if p.peek().is_some() {
        return Err(fail("unexpected trailing input".into()));
    }

    let spec = FeatureSpec {
        name: render_aggregate(&table, aggregator, &value, &partitions, &selector),
        origin: Origin::Expert,
        body: SpecBody::Aggregate { table, aggregator, value, partitions, selector },
    };
    validate_aggregate(schema, &spec, text)?;
    Ok(spec)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum OperandRole {
    NumericValue,
    LabelValue,
    Partition,
}

fn check_operand(
    table: &TableSchema,
    operand: &Operand,
    role: OperandRole,
    formula: &str,
) -> Result<(), FeatureError> {
    let field = operand.field();
    let Some((_, fs)) = table.field(field) else {
        return Err(FeatureError::UnknownField {
            formula: formula.to_string(),
            table: table.name.clone(),
            field: field.to_string(),
        });
    };
    let mismatch = |reason: String| FeatureError::TypeMismatch { formula: formula.to_string(), reason };
    match operand {
        Operand::WeekDay(_) | Operand::MonthOfYear(_) => {
            if fs.kind != FieldKind::Date {
                return Err(mismatch(format!("{} needs a date field", operand.render())));
            }
            if role == OperandRole::NumericValue {
                return Err(mismatch(format!("{} is not numeric", operand.render())));
            }
        }
        Operand::LabelOf(_) => {
            if !matches!(fs.kind, FieldKind::Identifier | FieldKind::Categorical) {
                return Err(mismatch(format!("{} needs an identifier field", operand.render())));
            }
            if role == OperandRole::NumericValue {
                return Err(mismatch(format!("{} is not numeric", operand.render())));
            }
        }
        Operand::Field(_) => match role {
            OperandRole::NumericValue => {
                if fs.kind != FieldKind::Numeric {
                    return Err(mismatch(format!("{field:?} is not numeric")));
                }
            }
            OperandRole::LabelValue | OperandRole::Partition => {
                if !matches!(
                    fs.kind,
                    FieldKind::Categorical | FieldKind::Identifier | FieldKind::Flag
                ) {
                    return Err(mismatch(format!(
                        "{field:?} cannot be used as a label (kind {})",
                        fs.kind.name()
                    )));
                }
            }
        },
    }
    Ok(())
}

fn validate_aggregate(
    schema: &DatasetSchema,
    spec: &FeatureSpec,
    formula: &str,
) -> Result<(), FeatureError> {
    let SpecBody::Aggregate { table, aggregator, value, partitions, selector } = &spec.body else {
        return Ok(());
    };
    let table_schema = schema
        .secondaries
        .iter()
        .find(|t| t.name == *table)
        .ok_or_else(|| FeatureError::UnknownTable {
            formula: formula.to_string(),
            table: table.clone(),
        })?;
    let mismatch = |reason: String| FeatureError::TypeMismatch { formula: formula.to_string(), reason };

    match (aggregator, value) {
        (Aggregator::Count, Some(_)) => {
            return Err(mismatch("Count takes no value operand".into()));
        }
        (Aggregator::Count, None) => {}
        (a, Some(v)) if a.is_numeric_agg() => {
            check_operand(table_schema, v, OperandRole::NumericValue, formula)?;
        }
        (a, None) if a.is_numeric_agg() => {
            return Err(mismatch(format!("{} needs a numeric value operand", a.name())));
        }
        (_, Some(v)) => check_operand(table_schema, v, OperandRole::LabelValue, formula)?,
        (a, None) => {
            return Err(mismatch(format!("{} needs a value operand", a.name())));
        }
    }
    for op in partitions {
        check_operand(table_schema, op, OperandRole::Partition, formula)?;
    }
    if let Some((field, _)) = selector {
        check_operand(table_schema, &Operand::Field(field.clone()), OperandRole::Partition, formula)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Native features and automatic construction

/// One spec per root-table field other than the key: the field read
/// directly, with date fields recoded as whole months elapsed at the anchor.
pub fn native_features(dataset: &Dataset) -> Vec<FeatureSpec> {
    let root = &dataset.root.schema;
    root.fields
        .iter()
        .filter(|f| f.name != root.key_field)
        .map(|f| {
            let date_age = f.kind == FieldKind::Date;
            let name = if date_age {
                format!("months_since({})", f.name)
            } else {
                f.name.clone()
            };
            FeatureSpec {
                name,
                origin: Origin::Native,
                body: SpecBody::Native { field: f.name.clone(), date_age },
            }
        })
        .collect()
}

/// Distinct values of a categorical or flag field, ascending, with counts.
fn field_domain(dataset: &Dataset, table: &str, field: &str) -> Vec<(String, usize)> {
    let Some(data) = dataset.secondary(table) else { return Vec::new() };
    let Some(col) = data.column_index(field) else { return Vec::new() };
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for row in &data.rows {
        let label = match &row[col] {
            Cell::Text(s) => Some(s.as_str()),
            Cell::Flag(b) => Some(if *b { "true" } else { "false" }),
            _ => None,
        };
        if let Some(l) = label {
            *counts.entry(l).or_insert(0) += 1;
        }
    }
    counts.into_iter().map(|(v, c)| (v.to_string(), c)).collect()
}

/// Samples up to `budget` distinct aggregate specs from the construction
/// rule space, deterministically under `seed`.
///
/// The space enumerates, per secondary table: every aggregator with every
/// type-compatible value operand, every partition-operand subset of size at
/// most 2, and every selector `field=value` over categorical or flagfields
/// with at most 8 distinct values. Sampling weight halves with each step of
/// formula depth (number of partition operands plus selector), so simple
/// aggregates dominate small budgets; a budget at least the size of the
/// space returns the full enumeration.
pub fn auto_construct(
    dataset: &Dataset,
    budget: usize,
    seed: u64,
) -> Result<Vec<FeatureSpec>, FeatureError> {
    use rand::{Rng, SeedableRng};

    if budget == 0 {
        return Err(FeatureError::ZeroBudget);
    }

    let mut space: Vec<(FeatureSpec, u32)> = Vec::new(); // (spec, depth)
    for table in &dataset.schema.secondaries {
        // Partition candidates, in field order.
        let mut partition_ops: Vec<Operand> = Vec::new();
        for f in &table.fields {
            if f.name == table.key_field {
                continue;
            }
            match f.kind {
                FieldKind::Categorical | FieldKind::Flag => {
                    partition_ops.push(Operand::Field(f.name.clone()))
                }
                FieldKind::Identifier => partition_ops.push(Operand::LabelOf(f.name.clone())),
                FieldKind::Date => {
                    partition_ops.push(Operand::WeekDay(f.name.clone()));
                    partition_ops.push(Operand::MonthOfYear(f.name.clone()));
                }
                FieldKind::Numeric => {}
            }
        }
        let mut partition_sets: Vec<Vec<Operand>> = vec![Vec::new()];
        for op in &partition_ops {
            partition_sets.push(vec![op.clone()]);
        }
        for i in 0..partition_ops.len() {
            for j in (i + 1)..partition_ops.len() {
                partition_sets.push(vec![partition_ops[i].clone(), partition_ops[j].clone()]);
            }
        }

        // Selector candidates: low-cardinality categorical/flag fields.
        let mut selectors: Vec<(String, String)> = Vec::new();
        for f in &table.fields {
            if !matches!(f.kind, FieldKind::Categorical | FieldKind::Flag) {
                continue;
            }
            let domain = field_domain(dataset, &table.name, &f.name);
            if domain.len() <= 8 {
                for (value, _) in domain {
                    selectors.push((f.name.clone(), value));
                }
            }
        }

        // Value-operand choices per aggregator.
        let numeric_fields: Vec<&str> = table
            .fields
            .iter()
            .filter(|f| f.kind == FieldKind::Numeric)
            .map(|f| f.name.as_str())
            .collect();
        let label_ops: Vec<Operand> = partition_ops.clone();

        for aggregator in AGGREGATORS {
            let values: Vec<Option<Operand>> = match aggregator {
                Aggregator::Count => vec![None],
                a if a.is_numeric_agg() => {
                    numeric_fields.iter().map(|f| Some(Operand::Field(f.to_string()))).collect()
                }
                _ => label_ops.iter().map(|op| Some(op.clone())).collect(),
            };
            for value in &values {
                for partitions in &partition_sets {
                    // Skip partitioning by the aggregated operand itself.
                    if let Some(v) = value {
                        if partitions.contains(v) {
                            continue;
                        }
                    }
                    let mut selector_choices: Vec<Option<(String, String)>> = vec![None];
                    for (field, constant) in &selectors {
                        let used_by_partition = partitions.iter().any(|op| op.field() == *field);
                        let used_by_value =
                            value.as_ref().is_some_and(|v| v.field() == *field);
                        if !used_by_partition && !used_by_value {
                            selector_choices.push(Some((field.clone(), constant.clone())));
                        }
                    }
                    for selector in selector_choices {
                        let depth =
                            1 + partitions.len() as u32 + u32::from(selector.is_some());
                        let name = render_aggregate(
                            &table.name,
                            aggregator,
                            value,
                            partitions,
                            &selector,
                        );
                        space.push((
                            FeatureSpec {
                                name,
                                origin: Origin::Auto,
                                body: SpecBody::Aggregate {
                                    table: table.name.clone(),
                                    aggregator,
                                    value: value.clone(),
                                    partitions: partitions.clone(),
                                    selector,
                                },
                            },
                            depth,
                        ));
                    }
                }
            }
        }
    }

    if budget >= space.len() {
        return Ok(space.into_iter().map(|(spec, _)| spec).collect());
    }

    // Weighted sampling without replacement: each spec draws a key
    // u^(1/w) with weight w = 2^(1-depth); the `budget` largest keys win.
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize)> = space
        .iter()
        .enumerate()
        .map(|(i, (_, depth))| {
            let weight = (2.0f64).powi(1 - *depth as i32);
            let u: f64 = rng.random();
            (u.powf(1.0 / weight), i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = keyed[..budget].iter().map(|&(_, i)| i).collect();
    chosen.sort_unstable();
    let mut picked = 0;
    Ok(space
        .into_iter()
        .enumerate()
        .filter_map(|(i, (spec, _))| {
            if picked < chosen.len() && chosen[picked] == i {
                picked += 1;
                Some(spec)
            } else {
                None
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Expansion to bound columns

/// A condition a secondary row must satisfy to count toward a column.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum Condition {
    Equals { operand: Operand, value: String },
    /// The catch-all bucket of a capped partition operand: any value not in
    /// the listed ones (rows without a value never match).
    NotIn { operand: Operand, values: Vec<String> },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// How a single materialized column is computed. Bound features freeze
/// everything data-dependent (partition values, conditions), so a stored
/// model rebuilds identical columns at deployment time.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum BoundSource {
    /// Root-table field read directly.
    RootField { field: String },
    /// Root date field as whole months elapsed at the anchor.
    RootDateAge { field: String },
    /// Windowed aggregate over a secondary table.
    Aggregate {
        table: String,
        aggregator: Aggregator,
        value: Option<Operand>,
        conditions: Vec<Condition>,
        /// When set, restrict the window to the single observation month
        /// `anchor - lag`.
        lag: Option<u32>,
    },
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct BoundFeature {
    pub name: String,
    pub kind: FeatureKind,
    pub source: BoundSource,
}

/// Expansion settings.
#[derive(Clone, Copy, Debug)]
pub struct ExpandOptions {
    /// Also emit per-observation-month variants of each aggregate column.
    pub monthly_lag: bool,
    /// Cap on values per partition operand; larger domains keep the most
    /// frequent values and pool the rest into an "other" bucket.
    pub partition_value_cap: usize,
}

impl Default for ExpandOptions {
    fn default() -> ExpandOptions {
        ExpandOptions { monthly_lag: false, partition_value_cap: 20 }
    }
}

/// Values a partition operand expands over, most frequent first (ties by
/// value), capped; `None` marks the "other" bucket.
fn operand_values(
    dataset: &Dataset,
    table: &str,
    operand: &Operand,
    cap: usize,
) -> Vec<Option<String>> {
    match operand {
        Operand::WeekDay(_) => WEEKDAY_NAMES.iter().map(|d| Some(d.to_string())).collect(),
        Operand::MonthOfYear(_) => MONTH_NAMES.iter().map(|m| Some(m.to_string())).collect(),
        Operand::Field(f) | Operand::LabelOf(f) => {
            let mut domain = field_domain(dataset, table, f);
            domain.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let capped = domain.len() > cap;
            domain.truncate(cap);
            let mut values: Vec<Option<String>> =
                domain.into_iter().map(|(v, _)| Some(v)).collect();
            if capped {
                values.push(None);
            }
            values
        }
    }
}

/// Expands specs into concrete columns: one per partition-operand value
/// combination, plus per-month lag variants when enabled. Duplicate column
/// names (e.g. an expert formula repeating an automatic one) keep the first
/// occurrence.
pub fn expand(
    dataset: &Dataset,
    plan: &WindowPlan,
    specs: &[FeatureSpec],
    opts: &ExpandOptions,
) -> Vec<BoundFeature> {
    let mut out: Vec<BoundFeature> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let root = &dataset.root.schema;

    for spec in specs {
        match &spec.body {
            SpecBody::Native { field, date_age } => {
                let Some((_, fs)) = root.field(field) else { continue };
                let (kind, source) = if *date_age {
                    (FeatureKind::Numeric, BoundSource::RootDateAge { field: field.clone() })
                } else {
                    let kind = match fs.kind {
                        FieldKind::Numeric => FeatureKind::Numeric,
                        _ => FeatureKind::Categorical,
                    };
                    (kind, BoundSource::RootField { field: field.clone() })
                };
                if seen.insert(spec.name.clone()) {
                    out.push(BoundFeature { name: spec.name.clone(), kind, source });
                }
            }
            SpecBody::Aggregate { table, aggregator, value, partitions, selector } => {
                let kind = match aggregator {
                    Aggregator::Mode => FeatureKind::Categorical,
                    _ => FeatureKind::Numeric,
                };
                let base_conditions: Vec<Condition> = selector
                    .iter()
                    .map(|(field, constant)| Condition::Equals {
                        operand: Operand::Field(field.clone()),
                        value: constant.clone(),
                    })
                    .collect();

                // Cartesian product over the partition operands' values.
                let value_lists: Vec<Vec<Option<String>>> = partitions
                    .iter()
                    .map(|op| operand_values(dataset, table, op, opts.partition_value_cap))
                    .collect();
                let mut combos: Vec<(String, Vec<Condition>)> =
                    vec![(String::new(), base_conditions)];
                for (op, values) in partitions.iter().zip(&value_lists) {
                    let mut next = Vec::with_capacity(combos.len() * values.len());
                    for (suffix, conditions) in &combos {
                        for v in values {
                            let mut conditions = conditions.clone();
                            let tag = match v {
                                Some(v) => {
                                    conditions.push(Condition::Equals {
                                        operand: op.clone(),
                                        value: v.clone(),
                                    });
                                    v.clone()
                                }
                                None => {
                                    let named: Vec<String> = values
                                        .iter()
                                        .flatten()
                                        .cloned()
                                        .collect();
                                    conditions.push(Condition::NotIn {
                                        operand: op.clone(),
                                        values: named,
                                    });
                                    "other".to_string()
                                }
                            };
                            let suffix = format!("{suffix}[{}={}]", op.render(), tag);
                            next.push((suffix, conditions));
                        }
                    }
                    combos = next;
                }

                let has_dates = dataset
                    .schema
                    .table(table)
                    .and_then(|t| t.date_field.as_ref())
                    .is_some();
                let mut lags: Vec<Option<u32>> = vec![None];
                if opts.monthly_lag && has_dates {
                    lags.extend((0..plan.obs_months).map(Some));
                }
                for (suffix, conditions) in combos {
                    for &lag in &lags {
                        let lag_tag = match lag {
                            None => String::new(),
                            Some(l) => format!("@m{l}"),
                        };
                        let name = format!("{}{suffix}{lag_tag}", spec.name);
                        if seen.insert(name.clone()) {
                            out.push(BoundFeature {
                                name,
                                kind,
                                source: BoundSource::Aggregate {
                                    table: table.clone(),
                                    aggregator: *aggregator,
                                    value: value.clone(),
                                    conditions: conditions.clone(),
                                    lag,
                                },
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// The feature matrix and materialization

#[derive(Clone, Debug)]
pub enum ColumnData {
    /// Missing encoded as NaN.
    Numeric(Vec<f64>),
    Categorical(Vec<Option<String>>),
}

#[derive(Clone, Debug)]
pub struct MatrixColumn {
    pub feature: BoundFeature,
    pub data: ColumnData,
}

/// The flat instance-by-feature matrix.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    /// Present for training frames, absent for deployment scoring.
    pub labels: Option<Vec<Label>>,
    pub columns: Vec<MatrixColumn>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn column(&self, name: &str) -> Option<&MatrixColumn> {
        self.columns.iter().find(|c| c.feature.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.feature.name == name)
    }

    /// Cell as a partition-ready value.
    pub fn value(&self, row: usize, col: usize) -> Value<'_> {
        match &self.columns[col].data {
            ColumnData::Numeric(v) => {
                if v[row].is_nan() {
                    Value::Missing
                } else {
                    Value::Number(v[row])
                }
            }
            ColumnData::Categorical(v) => match &v[row] {
                Some(s) => Value::Text(s),
                None => Value::Missing,
            },
        }
    }

    /// Copies the selected rows into a new matrix (same columns).
    pub fn subset(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|labels| rows.iter().map(|&r| labels[r]).collect()),
            columns: self
                .columns
                .iter()
                .map(|c| MatrixColumn {
                    feature: c.feature.clone(),
                    data: match &c.data {
                        ColumnData::Numeric(v) => {
                            ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect())
                        }
                        ColumnData::Categorical(v) => {
                            ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
                        }
                    },
                })
                .collect(),
        }
    }

    /// Delimited export with header; missing cells are empty.
    pub fn export(&self, delimiter: char) -> String {
        let mut out = String::from("id");
        if self.labels.is_some() {
            out.push(delimiter);
            out.push_str("label");
        }
        for c in &self.columns {
            out.push(delimiter);
            out.push_str(&c.feature.name);
        }
        out.push('\n');
        for row in 0..self.n_rows() {
            out.push_str(&self.ids[row]);
            if let Some(labels) = &self.labels {
                out.push(delimiter);
                out.push_str(labels[row].name());
            }
            for c in &self.columns {
                out.push(delimiter);
                match &c.data {
                    ColumnData::Numeric(v) => {
                        if !v[row].is_nan() {
                            let _ = write!(out, "{}", v[row]);
                        }
                    }
                    ColumnData::Categorical(v) => {
                        if let Some(s) = &v[row] {
                            out.push_str(s);
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Secondary-table rows indexed for materialization.
struct PreparedTable<'a> {
    data: &'a crate::schema::TableData,
    /// Row indices per instance, in instance order.
    rows_by_instance: Vec<Vec<u32>>,
    /// Month of each row (None: undated row of a dated table, excluded).
    months: Vec<Option<Month>>,
    /// Whether the table has a date field at all; undated tables are
    /// timeless and their rows count toward every window.
    dated: bool,
}

fn operand_label<'a>(cell: &'a Cell, operand: &Operand) -> Option<&'a str> {
    match operand {
        Operand::Field(_) | Operand::LabelOf(_) => match cell {
            Cell::Text(s) => Some(s),
            Cell::Flag(b) => Some(if *b { "true" } else { "false" }),
            _ => None,
        },
        Operand::WeekDay(_) => cell.as_date().and_then(|d| d.weekday()).map(weekday_name),
        Operand::MonthOfYear(_) => cell.as_date().map(|d| d.month().name()),
    }
}

/// Builds the feature matrix for `ids` under a window plan.
///
/// Aggregates see only the secondary rows of the instance whose date falls
/// in the observation window (the single month `anchor - lag` for lagged
/// columns). Count and Sum of an empty selection are 0; Mean, Min, Max and
/// Mode of an empty selection are missing.
pub fn materialize(
    dataset: &Dataset,
    ids: &[String],
    plan: &WindowPlan,
    features: &[BoundFeature],
) -> Result<FeatureMatrix, FeatureError> {
    let n = ids.len();
    let index_of: HashMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    // Index each referenced secondary table once.
    let mut tables: BTreeMap<&str, PreparedTable<'_>> = BTreeMap::new();
    for feature in features {
        let BoundSource::Aggregate { table, .. } = &feature.source else { continue };
        if tables.contains_key(table.as_str()) {
            continue;
        }
        let Some(data) = dataset.secondary(table) else {
            return Err(FeatureError::UnknownTable {
                formula: feature.name.clone(),
                table: table.clone(),
            });
        };
        let fk = data.schema.key_index();
        let date_col = data.schema.date_field.as_ref().and_then(|f| data.column_index(f));
        let mut rows_by_instance = vec![Vec::new(); n];
        let mut months = Vec::with_capacity(data.rows.len());
        for (r, row) in data.rows.iter().enumerate() {
            months.push(match date_col {
                Some(c) => row[c].as_date().map(|d| d.month()),
                None => None,
            });
            if let Some(&i) = row[fk].as_text().and_then(|id| index_of.get(id)) {
                rows_by_instance[i].push(r as u32);
            }
        }
        tables.insert(
            table.as_str(),
            PreparedTable { data, rows_by_instance, months, dated: date_col.is_some() },
        );
    }

    let observation = plan.observation();
    let mut columns = Vec::with_capacity(features.len());
    for feature in features {
        let data = match &feature.source {
            BoundSource::RootField { field } => {
                let col = dataset.root.column_index(field).ok_or_else(|| {
                    FeatureError::UnknownField {
                        formula: feature.name.clone(),
                        table: dataset.root.schema.name.clone(),
                        field: field.clone(),
                    }
                })?;
                materialize_root(dataset, ids, col, feature.kind)
            }
            BoundSource::RootDateAge { field } => {
                let col = dataset.root.column_index(field).ok_or_else(|| {
                    FeatureError::UnknownField {
                        formula: feature.name.clone(),
                        table: dataset.root.schema.name.clone(),
                        field: field.clone(),
                    }
                })?;
                let values = ids
                    .iter()
                    .map(|id| {
                        dataset.root_row(id).and_then(|row| row[col].as_date()).map_or(
                            f64::NAN,
                            |d| d.month().until(plan.anchor) as f64,
                        )
                    })
                    .collect();
                ColumnData::Numeric(values)
            }
            BoundSource::Aggregate { table, aggregator, value, conditions, lag } => {
                let prepared = &tables[table.as_str()];
                let window = match lag {
                    None => observation,
                    Some(l) => {
                        let m = plan.anchor.plus(-(*l as i32));
                        crate::month::MonthSpan::new(m, m)
                    }
                };
                materialize_aggregate(
                    prepared,
                    &feature.name,
                    *aggregator,
                    value,
                    conditions,
                    window,
                )?
            }
        };
        columns.push(MatrixColumn { feature: feature.clone(), data });
    }

    Ok(FeatureMatrix { ids: ids.to_vec(), labels: None, columns })
}

/// Materializes for a labeled frame and attaches its labels.
pub fn materialize_frame(
    dataset: &Dataset,
    frame: &LabeledFrame,
    features: &[BoundFeature],
) -> Result<FeatureMatrix, FeatureError> {
    let mut matrix = materialize(dataset, &frame.ids, &frame.plan, features)?;
    matrix.labels = Some(frame.labels.clone());
    Ok(matrix)
}

fn materialize_root(
    dataset: &Dataset,
    ids: &[String],
    col: usize,
    kind: FeatureKind,
) -> ColumnData {
    match kind {
        FeatureKind::Numeric => ColumnData::Numeric(
            ids.iter()
                .map(|id| {
                    dataset.root_row(id).and_then(|row| row[col].as_number()).unwrap_or(f64::NAN)
                })
                .collect(),
        ),
        FeatureKind::Categorical => ColumnData::Categorical(
            ids.iter()
                .map(|id| {
                    dataset.root_row(id).and_then(|row| match &row[col] {
                        Cell::Text(s) => Some(s.clone()),
                        Cell::Flag(b) => Some(b.to_string()),
                        _ => None,
                    })
                })
                .collect(),
        ),
    }
}

fn materialize_aggregate(
    prepared: &PreparedTable<'_>,
    name: &str,
    aggregator: Aggregator,
    value: &Option<Operand>,
    conditions: &[Condition],
    window: crate::month::MonthSpan,
) -> Result<ColumnData, FeatureError> {
    let schema = &prepared.data.schema;
    let col_of = |operand: &Operand| {
        schema.field(operand.field()).map(|(i, _)| i).ok_or_else(|| FeatureError::UnknownField {
            formula: name.to_string(),
            table: schema.name.clone(),
            field: operand.field().to_string(),
        })
    };
    let condition_cols: Vec<usize> = conditions
        .iter()
        .map(|c| match c {
            Condition::Equals { operand, .. } | Condition::NotIn { operand, .. } => col_of(operand),
        })
        .collect::<Result<_, _>>()?;
    let value_col = value.as_ref().map(&col_of).transpose()?;

    let n = prepared.rows_by_instance.len();
    let numeric_out = aggregator != Aggregator::Mode;
    let mut numbers = if numeric_out { vec![f64::NAN; n] } else { Vec::new() };
    let mut texts = if numeric_out { Vec::new() } else { vec![None; n] };

    let mut distinct: BTreeMap<&str, u32> = BTreeMap::new();
    for (i, rows) in prepared.rows_by_instance.iter().enumerate() {
        let mut count = 0u32;
        let mut sum = 0.0f64;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut seen_numeric = false;
        distinct.clear();

        'rows: for &r in rows {
            let row = &prepared.data.rows[r as usize];
            if prepared.dated {
                match prepared.months[r as usize] {
                    Some(m) if window.contains(m) => {}
                    _ => continue,
                }
            }
            for (cond, &c) in conditions.iter().zip(&condition_cols) {
                let label = match cond {
                    Condition::Equals { operand, .. } | Condition::NotIn { operand, .. } => {
                        operand_label(&row[c], operand)
                    }
                };
                let pass = match (cond, label) {
                    (Condition::Equals { value, .. }, Some(l)) => l == value,
                    (Condition::NotIn { values, .. }, Some(l)) => {
                        !values.iter().any(|v| v == l)
                    }
                    _ => false,
                };
                if !pass {
                    continue 'rows;
                }
            }
            match aggregator {
                Aggregator::Count => count += 1,
                Aggregator::CountDistinct | Aggregator::Mode => {
                    let op = value.as_ref().unwrap();
                    if let Some(l) = operand_label(&row[value_col.unwrap()], op) {
                        *distinct.entry(l).or_insert(0) += 1;
                    }
                }
                _ => {
                    if let Some(x) = row[value_col.unwrap()].as_number() {
                        seen_numeric = true;
                        count += 1;
                        sum += x;
                        min = min.min(x);
                        max = max.max(x);
                    }
                }
            }
        }

        match aggregator {
            Aggregator::Count => numbers[i] = count as f64,
            Aggregator::CountDistinct => numbers[i] = distinct.len() as f64,
            Aggregator::Sum => numbers[i] = if seen_numeric { sum } else { 0.0 },
            Aggregator::Mean => {
                if seen_numeric {
                    numbers[i] = sum / count as f64;
                }
            }
            Aggregator::Min => {
                if seen_numeric {
                    numbers[i] = min;
                }
            }
            Aggregator::Max => {
                if seen_numeric {
                    numbers[i] = max;
                }
            }
            Aggregator::Mode => {
                // Most frequent label; ties prefer the lexicographically
                // smallest (BTreeMap iteration order with a strict compare).
                let mut best: Option<(&str, u32)> = None;
                for (&label, &c) in &distinct {
                    if best.is_none_or(|(_, bc)| c > bc) {
                        best = Some((label, c));
                    }
                }
                texts[i] = best.map(|(l, _)| l.to_string());
            }
        }
    }

    Ok(if numeric_out { ColumnData::Numeric(numbers) } else { ColumnData::Categorical(texts) })
}
