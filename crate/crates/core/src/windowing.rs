//! Temporal windowing and churn labeling.
//!
//! A window plan splits the timeline around an anchor month into an
//! observation window (inputs), an optional latency gap (time to act on a
//! score), and a target window (where churn is measured). Labeling applies
//! the plan to per-customer presence histories: customers active throughout
//! observation and latency are labeled churn or stay depending on whether
//! they disappear within the target window; everyone else is excluded with
//! a reason.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::month::{Month, MonthSpan};
use crate::schema::{Dataset, FieldKind};

/// Window layout around an anchor month.
///
/// With anchor `a`, observation depth `O`, latency `L` and target depth `P`:
/// observation covers `[a-O+1, a]`, latency covers `(a, a+L]`, and the
/// target covers `[a+L+1, a+L+P]`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct WindowPlan {
    pub anchor: Month,
    pub obs_months: u32,
    pub latency_months: u32,
    pub target_months: u32,
}

impl WindowPlan {
    pub fn new(
        anchor: Month,
        obs_months: u32,
        latency_months: u32,
        target_months: u32,
    ) -> Result<WindowPlan, WindowError> {
        if obs_months < 1 {
            return Err(WindowError::BadPlan("observation window must cover at least one month".into()));
        }
        if target_months < 1 {
            return Err(WindowError::BadPlan("target window must cover at least one month".into()));
        }
        Ok(WindowPlan { anchor, obs_months, latency_months, target_months })
    }

    pub fn observation(&self) -> MonthSpan {
        MonthSpan::new(self.anchor.plus(-(self.obs_months as i32) + 1), self.anchor)
    }

    /// `None` when the plan has no latency gap.
    pub fn latency(&self) -> Option<MonthSpan> {
        if self.latency_months == 0 {
            return None;
        }
        Some(MonthSpan::new(self.anchor.plus(1), self.anchor.plus(self.latency_months as i32)))
    }

    pub fn target(&self) -> MonthSpan {
        let first = self.anchor.plus(self.latency_months as i32 + 1);
        MonthSpan::new(first, first.plus(self.target_months as i32 - 1))
    }

    /// Full span the plan touches, observation through target.
    pub fn extent(&self) -> MonthSpan {
        MonthSpan::new(self.observation().first, self.target().last)
    }

    /// The same layout moved `months` forward (negative: backward).
    pub fn shifted(&self, months: i32) -> WindowPlan {
        WindowPlan { anchor: self.anchor.plus(months), ..*self }
    }
}

/// Where per-customer monthly presence comes from.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PresenceSource {
    /// A status table with one row per customer per active month.
    Subscription { table: String, month_field: String },
    /// Refill events: a refill makes the customer present in the refill
    /// month and the following month, so presence lapses after two months
    /// without a refill.
    Refills { table: String, date_field: String },
}

/// Configuration of the labeling rules.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelRules {
    pub presence: PresenceSource,
    /// Flag field on the root table; customers with the flag set are
    /// excluded from training frames entirely.
    pub bad_debt_field: Option<String>,
    /// Identifier field on the root table grouping customers into accounts.
    pub account_field: Option<String>,
    /// An account churns in a month when its active-customer count drops by
    /// at least this fraction relative to the previous month.
    pub account_drop_threshold: f64,
}

impl Default for LabelRules {
    fn default() -> LabelRules {
        LabelRules {
            presence: PresenceSource::Subscription {
                table: "presence".into(),
                month_field: "month".into(),
            },
            bad_debt_field: None,
            account_field: None,
            account_drop_threshold: 0.25,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Stay,
    Churn,
}

impl Label {
    pub fn is_churn(self) -> bool {
        matches!(self, Label::Churn)
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Stay => "stay",
            Label::Churn => "churn",
        }
    }
}

/// Why a customer was left out of a labeled frame.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Not present in every observation month.
    NotPresent,
    /// Present through observation but gone during the latency gap.
    LeftInLatency,
    /// Bad-debt flag set; these leave for non-churn reasons.
    BadDebt,
}

/// A labeled training frame: one instance per eligible customer.
#[derive(Clone, Debug)]
pub struct LabeledFrame {
    pub plan: WindowPlan,
    /// Customer ids in root-table order.
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub exclusions: Vec<(String, Exclusion)>,
}

impl LabeledFrame {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn churn_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_churn()).count()
    }

    pub fn churn_rate(&self) -> f64 {
        self.churn_count() as f64 / self.len() as f64
    }
}

#[derive(Error, Debug)]
pub enum WindowError {
    #[error("invalid window plan: {0}")]
    BadPlan(String),
    #[error("labeling rules refer to unknown table {0:?}")]
    UnknownTable(String),
    #[error("labeling rules refer to field {field:?} missing from table {table:?} or of the wrong kind")]
    UnknownField { table: String, field: String },
    #[error("dataset has no presence rows to derive activity from")]
    NoPresence,
    #[error("plan needs months {needed} but the dataset covers {available}")]
    InsufficientCoverage { needed: MonthSpan, available: MonthSpan },
    #[error("labeling rules use accounts but no account field is configured")]
    NoAccountField,
}

/// Per-customer months of activity, derived from the configured presence source.
pub fn presence_map(
    dataset: &Dataset,
    rules: &LabelRules,
) -> Result<BTreeMap<String, BTreeSet<Month>>, WindowError> {
    let (table_name, field_name, spread) = match &rules.presence {
        PresenceSource::Subscription { table, month_field } => (table, month_field, false),
        PresenceSource::Refills { table, date_field } => (table, date_field, true),
    };
    let table = dataset
        .secondary(table_name)
        .ok_or_else(|| WindowError::UnknownTable(table_name.clone()))?;
    let field = table
        .schema
        .field(field_name)
        .filter(|(_, f)| f.kind == FieldKind::Date)
        .ok_or_else(|| WindowError::UnknownField {
            table: table_name.clone(),
            field: field_name.clone(),
        })?
        .0;
    let fk = table.schema.key_index();

    let mut map: BTreeMap<String, BTreeSet<Month>> = BTreeMap::new();
    for row in &table.rows {
        let Some(id) = row[fk].as_text() else { continue };
        if !dataset.contains_id(id) {
            continue; // orphan row
        }
        let Some(date) = row[field].as_date() else { continue };
        let m = date.month();
        let entry = map.entry(id.to_string()).or_default();
        entry.insert(m);
        if spread {
            entry.insert(m.plus(1));
        }
    }
    Ok(map)
}

/// Months spanned by presence data, the usable extent of the dataset.
pub fn coverage(dataset: &Dataset, rules: &LabelRules) -> Result<MonthSpan, WindowError> {
    let map = presence_map(dataset, rules)?;
    let first = map.values().flatten().min().copied().ok_or(WindowError::NoPresence)?;
    let last = map.values().flatten().max().copied().unwrap();
    Ok(MonthSpan::new(first, last))
}

/// Checks that a plan's full extent lies within dataset coverage.
pub fn check_plan(dataset: &Dataset, rules: &LabelRules, plan: &WindowPlan) -> Result<(), WindowError> {
    let available = coverage(dataset, rules)?;
    let needed = plan.extent();
    if needed.first < available.first || needed.last > available.last {
        return Err(WindowError::InsufficientCoverage { needed, available });
    }
    Ok(())
}

fn bad_debt_column(dataset: &Dataset, rules: &LabelRules) -> Result<Option<usize>, WindowError> {
    match &rules.bad_debt_field {
        None => Ok(None),
        Some(name) => {
            let idx = dataset
                .root
                .schema
                .field(name)
                .filter(|(_, f)| f.kind == FieldKind::Flag)
                .ok_or_else(|| WindowError::UnknownField {
                    table: dataset.root.schema.name.clone(),
                    field: name.clone(),
                })?
                .0;
            Ok(Some(idx))
        }
    }
}

/// Labels every root customer under a plan.
///
/// A customer is eligible when present in every observation and latency
/// month and not flagged as bad debt. An eligible customer is a churner
/// when their presence ends before the target window closes; rejoining
/// after the target window still counts as staying, so widening the target
/// can only move labels from stay to churn.
pub fn label_frame(
    dataset: &Dataset,
    rules: &LabelRules,
    plan: &WindowPlan,
) -> Result<LabeledFrame, WindowError> {
    check_plan(dataset, rules, plan)?;
    let presence = presence_map(dataset, rules)?;
    let bad_debt = bad_debt_column(dataset, rules)?;
    let target_last = plan.target().last;

    let mut frame = LabeledFrame {
        plan: *plan,
        ids: Vec::new(),
        labels: Vec::new(),
        exclusions: Vec::new(),
    };
    for id in dataset.root_ids() {
        if let Some(col) = bad_debt {
            if dataset.root_row(id).unwrap()[col].as_flag() == Some(true) {
                frame.exclusions.push((id.to_string(), Exclusion::BadDebt));
                continue;
            }
        }
        let months = presence.get(id);
        let has = |m: Month| months.is_some_and(|set| set.contains(&m));
        let obs_ok = plan.observation().iter().all(has);
        if !obs_ok {
            frame.exclusions.push((id.to_string(), Exclusion::NotPresent));
            continue;
        }
        let latency_ok = plan.latency().map_or(true, |span| span.iter().all(has));
        if !latency_ok {
            frame.exclusions.push((id.to_string(), Exclusion::LeftInLatency));
            continue;
        }
        let last_active = *months.unwrap().iter().next_back().unwrap();
        let label = if last_active < target_last { Label::Churn } else { Label::Stay };
        frame.ids.push(id.to_string());
        frame.labels.push(label);
    }
    Ok(frame)
}

/// Customers eligible for scoring at deployment time: present through the
/// plan's observation and latency months and not bad debt. No target data
/// is needed, so this works at anchors where labels do not exist yet.
pub fn scoring_population(
    dataset: &Dataset,
    rules: &LabelRules,
    plan: &WindowPlan,
) -> Result<Vec<String>, WindowError> {
    let available = coverage(dataset, rules)?;
    let needed = plan.observation();
    let latency_last = plan.latency().map_or(needed.last, |s| s.last);
    if needed.first < available.first || latency_last > available.last {
        return Err(WindowError::InsufficientCoverage {
            needed: MonthSpan::new(needed.first, latency_last),
            available,
        });
    }
    let presence = presence_map(dataset, rules)?;
    let bad_debt = bad_debt_column(dataset, rules)?;

    let mut required: Vec<Month> = plan.observation().iter().collect();
    if let Some(latency) = plan.latency() {
        required.extend(latency.iter());
    }
    let mut out = Vec::new();
    for id in dataset.root_ids() {
        if let Some(col) = bad_debt {
            if dataset.root_row(id).unwrap()[col].as_flag() == Some(true) {
                continue;
            }
        }
        let ok = presence
            .get(id)
            .is_some_and(|set| required.iter().all(|m| set.contains(m)));
        if ok {
            out.push(id.to_string());
        }
    }
    Ok(out)
}

/// Account-level churn for one month: an account churns when its count of
/// active customers drops by at least the configured fraction relative to
/// the previous month. Returns `(account, churned)` pairs sorted by
/// account, covering accounts active in the previous month.
pub fn account_churn(
    dataset: &Dataset,
    rules: &LabelRules,
    month: Month,
) -> Result<Vec<(String, bool)>, WindowError> {
    let account_field = rules.account_field.as_ref().ok_or(WindowError::NoAccountField)?;
    let col = dataset
        .root
        .schema
        .field(account_field)
        .filter(|(_, f)| matches!(f.kind, FieldKind::Identifier | FieldKind::Categorical))
        .ok_or_else(|| WindowError::UnknownField {
            table: dataset.root.schema.name.clone(),
            field: account_field.clone(),
        })?
        .0;
    let presence = presence_map(dataset, rules)?;

    let mut counts: BTreeMap<String, (u32, u32)> = BTreeMap::new(); // (previous, current)
    for id in dataset.root_ids() {
        let Some(account) = dataset.root_row(id).unwrap()[col].as_text() else { continue };
        let Some(months) = presence.get(id) else { continue };
        let entry = counts.entry(account.to_string()).or_insert((0, 0));
        if months.contains(&month.plus(-1)) {
            entry.0 += 1;
        }
        if months.contains(&month) {
            entry.1 += 1;
        }
    }
    let threshold = rules.account_drop_threshold;
    Ok(counts
        .into_iter()
        .filter(|(_, (prev, _))| *prev > 0)
        .map(|(account, (prev, cur))| {
            let churned = (cur as f64) <= (1.0 - threshold) * (prev as f64);
            (account, churned)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{load_table, parse_schema};
    use proptest::prelude::*;

    fn month(s: &str) -> Month {
        s.parse().unwrap()
    }

    #[test]
    fn plan_windows_line_up() {
        let plan = WindowPlan::new(month("2014-04"), 2, 0, 2).unwrap();
        assert_eq!(plan.observation(), MonthSpan::new(month("2014-03"), month("2014-04")));
        assert_eq!(plan.latency(), None);
        assert_eq!(plan.target(), MonthSpan::new(month("2014-05"), month("2014-06")));
        assert_eq!(plan.extent(), MonthSpan::new(month("2014-03"), month("2014-06")));

        let gap = WindowPlan::new(month("2014-04"), 3, 1, 2).unwrap();
        assert_eq!(gap.observation(), MonthSpan::new(month("2014-02"), month("2014-04")));
        assert_eq!(gap.latency(), Some(MonthSpan::new(month("2014-05"), month("2014-05"))));
        assert_eq!(gap.target(), MonthSpan::new(month("2014-06"), month("2014-07")));

        assert!(WindowPlan::new(month("2014-04"), 0, 0, 2).is_err());
        assert!(WindowPlan::new(month("2014-04"), 2, 0, 0).is_err());
    }

    #[test]
    fn shift_moves_every_window() {
        let plan = WindowPlan::new(month("2014-04"), 2, 1, 2).unwrap();
        let moved = plan.shifted(2);
        assert_eq!(moved.anchor, month("2014-06"));
        assert_eq!(moved.observation(), MonthSpan::new(month("2014-05"), month("2014-06")));
        assert_eq!(moved.target(), MonthSpan::new(month("2014-08"), month("2014-09")));
        assert_eq!(moved.shifted(-2), plan);
    }

    /// Builds a dataset with explicit presence months per customer.
    fn dataset_with_presence(customers: &[(&str, &[&str], bool)]) -> Dataset {
        let descriptor = r#"{
          "tables": [
            {"name": "customer", "role": "root", "key": "id",
             "fields": [{"name": "id", "kind": "identifier"},
                        {"name": "account", "kind": "identifier"},
                        {"name": "bad_debt", "kind": "flag"}]},
            {"name": "presence", "role": "secondary", "foreign_key": "id",
             "fields": [{"name": "month", "kind": "date"}]}
          ]
        }"#;
        let schema = parse_schema(descriptor).unwrap();
        let mut root_text = String::from("id\taccount\tbad_debt\n");
        let mut presence_text = String::from("id\tmonth\n");
        for (id, months, bad) in customers {
            root_text.push_str(&format!("{id}\tA1\t{bad}\n"));
            for m in *months {
                presence_text.push_str(&format!("{id}\t{m}\n"));
            }
        }
        let (root, _) = load_table(&schema.root, &root_text, '\t').unwrap();
        let (presence, _) =
            load_table(schema.table("presence").unwrap(), &presence_text, '\t').unwrap();
        Dataset::new(schema, root, vec![presence]).unwrap()
    }

    fn rules() -> LabelRules {
        LabelRules { bad_debt_field: Some("bad_debt".into()), ..LabelRules::default() }
    }

    #[test]
    fn labels_follow_presence_histories() {
        let dataset = dataset_with_presence(&[
            // Present throughout: stays.
            ("C1", &["2014-01", "2014-02", "2014-03", "2014-04", "2014-05", "2014-06"], false),
            // Leaves during the target window: churns.
            ("C2", &["2014-01", "2014-02", "2014-03", "2014-04", "2014-05"], false),
            // Gone right after the anchor: churns.
            ("C3", &["2014-02", "2014-03", "2014-04"], false),
            // Not active in the full observation window: excluded.
            ("C4", &["2014-04", "2014-05", "2014-06"], false),
            // Bad debt: excluded even though present.
            ("C5", &["2014-01", "2014-02", "2014-03", "2014-04", "2014-05", "2014-06"], true),
            // Dips out during the target but comes back: stays.
            ("C6", &["2014-03", "2014-04", "2014-06"], false),
        ]);
        let plan = WindowPlan::new(month("2014-04"), 2, 0, 2).unwrap();
        let frame = label_frame(&dataset, &rules(), &plan).unwrap();
        assert_eq!(frame.ids, ["C1", "C2", "C3", "C6"]);
        assert_eq!(frame.labels, [Label::Stay, Label::Churn, Label::Churn, Label::Stay]);
        assert_eq!(
            frame.exclusions,
            [("C4".to_string(), Exclusion::NotPresent), ("C5".to_string(), Exclusion::BadDebt)]
        );
        assert_eq!(frame.churn_count(), 2);
    }

    #[test]
    fn latency_gap_shifts_eligibility_and_target() {
        let dataset = dataset_with_presence(&[
            ("C1", &["2014-03", "2014-04", "2014-05", "2014-06", "2014-07"], false),
            // Gone in the latency month: excluded, not a churner.
            ("C2", &["2014-03", "2014-04"], false),
            // Survives latency, leaves inside the target window: churns.
            ("C3", &["2014-03", "2014-04", "2014-05", "2014-06"], false),
        ]);
        let plan = WindowPlan::new(month("2014-04"), 2, 1, 2).unwrap();
        let frame = label_frame(&dataset, &rules(), &plan).unwrap();
        assert_eq!(frame.ids, ["C1", "C3"]);
        // Target is [2014-06, 2014-07]: C1 is active through the end, C3 is not.
        assert_eq!(frame.labels, [Label::Stay, Label::Churn]);
        assert_eq!(frame.exclusions, [("C2".to_string(), Exclusion::LeftInLatency)]);
    }

    #[test]
    fn plans_outside_coverage_are_rejected() {
        let dataset = dataset_with_presence(&[(
            "C1",
            &["2014-01", "2014-02", "2014-03", "2014-04"],
            false,
        )]);
        let plan = WindowPlan::new(month("2014-04"), 2, 0, 2).unwrap();
        assert!(matches!(
            label_frame(&dataset, &rules(), &plan),
            Err(WindowError::InsufficientCoverage { .. })
        ));
        // Scoring only needs observation months, so the same plan scores fine.
        let pop = scoring_population(&dataset, &rules(), &plan).unwrap();
        assert_eq!(pop, ["C1"]);
    }

    #[test]
    fn refills_keep_customers_present_for_two_months() {
        let descriptor = r#"{
          "tables": [
            {"name": "customer", "role": "root", "key": "id",
             "fields": [{"name": "id", "kind": "identifier"}]},
            {"name": "refill", "role": "secondary", "foreign_key": "id",
             "fields": [{"name": "paid_at", "kind": "date"}]}
          ]
        }"#;
        let schema = parse_schema(descriptor).unwrap();
        let (root, _) = load_table(&schema.root, "id\nC1\n", '\t').unwrap();
        let (refill, _) = load_table(
            schema.table("refill").unwrap(),
            "id\tpaid_at\nC1\t2014-01-15\nC1\t2014-04-02\n",
            '\t',
        )
        .unwrap();
        let dataset = Dataset::new(schema, root, vec![refill]).unwrap();
        let rules = LabelRules {
            presence: PresenceSource::Refills { table: "refill".into(), date_field: "paid_at".into() },
            ..LabelRules::default()
        };
        let months = presence_map(&dataset, &rules).unwrap();
        let got: Vec<String> = months["C1"].iter().map(|m| m.to_string()).collect();
        assert_eq!(got, ["2014-01", "2014-02", "2014-04", "2014-05"]);
        assert_eq!(
            coverage(&dataset, &rules).unwrap(),
            MonthSpan::new(month("2014-01"), month("2014-05"))
        );
    }

    #[test]
    fn account_churn_uses_relative_drop() {
        let descriptor = r#"{
          "tables": [
            {"name": "customer", "role": "root", "key": "id",
             "fields": [{"name": "id", "kind": "identifier"},
                        {"name": "account", "kind": "identifier"}]},
            {"name": "presence", "role": "secondary", "foreign_key": "id",
             "fields": [{"name": "month", "kind": "date"}]}
          ]
        }"#;
        let schema = parse_schema(descriptor).unwrap();
        // Account A: 4 -> 3 (exactly a 25% drop, churns).
        // Account B: 4 -> 4 (stays).  Account C: 2 -> 0 (churns).
        let mut root_text = String::from("id\taccount\n");
        let mut presence_text = String::from("id\tmonth\n");
        let mut add = |id: &str, account: &str, months: &[&str]| {
            root_text.push_str(&format!("{id}\t{account}\n"));
            for m in months {
                presence_text.push_str(&format!("{id}\t{m}\n"));
            }
        };
        for i in 0..4 {
            let keep = i < 3;
            add(
                &format!("A{i}"),
                "A",
                if keep { &["2014-01", "2014-02"] } else { &["2014-01"] },
            );
        }
        for i in 0..4 {
            add(&format!("B{i}"), "B", &["2014-01", "2014-02"]);
        }
        for i in 0..2 {
            add(&format!("X{i}"), "C", &["2014-01"]);
        }
        let (root, _) = load_table(&schema.root, &root_text, '\t').unwrap();
        let (presence, _) =
            load_table(schema.table("presence").unwrap(), &presence_text, '\t').unwrap();
        let dataset = Dataset::new(schema, root, vec![presence]).unwrap();
        let rules = LabelRules { account_field: Some("account".into()), ..LabelRules::default() };
        let churn = account_churn(&dataset, &rules, month("2014-02")).unwrap();
        assert_eq!(
            churn,
            [("A".to_string(), true), ("B".to_string(), false), ("C".to_string(), true)]
        );
    }

    proptest! {
        /// Every root customer lands in exactly one bucket, and widening the
        /// target window never flips a churner back to staying.
        #[test]
        fn labeling_partitions_and_widening_is_monotone(
            histories in proptest::collection::vec(
                proptest::collection::btree_set(0u32..10, 0..8), 1..20)
        ) {
            let customers: Vec<(String, Vec<String>)> = histories
                .iter()
                .enumerate()
                .map(|(i, months)| {
                    let id = format!("C{i}");
                    let months = months
                        .iter()
                        .map(|&m| Month::new(2014, 1).plus(m as i32).to_string())
                        .collect();
                    (id, months)
                })
                .collect();
            let borrowed: Vec<(&str, Vec<&str>)> = customers
                .iter()
                .map(|(id, ms)| (id.as_str(), ms.iter().map(|m| m.as_str()).collect()))
                .collect();
            let as_slices: Vec<(&str, &[&str], bool)> = borrowed
                .iter()
                .map(|(id, ms)| (*id, ms.as_slice(), false))
                .collect();
            let dataset = dataset_with_presence(&as_slices);

            let rules = rules();
            let Ok(cov) = coverage(&dataset, &rules) else { return Ok(()) };
            prop_assume!(cov.len() >= 4);
            let anchor = cov.first.plus(1);
            let narrow = WindowPlan::new(anchor, 2, 0, 1).unwrap();
            let wide = WindowPlan::new(anchor, 2, 0, (cov.len() - 2) as u32).unwrap();
            let narrow_frame = label_frame(&dataset, &rules, &narrow).unwrap();
            let wide_frame = label_frame(&dataset, &rules, &wide).unwrap();

            // Partition: ids + exclusions cover the roster exactly once.
            let mut seen: Vec<&str> = narrow_frame.ids.iter().map(|s| s.as_str()).collect();
            seen.extend(narrow_frame.exclusions.iter().map(|(id, _)| id.as_str()));
            seen.sort_unstable();
            let mut all: Vec<&str> = dataset.root_ids().collect();
            all.sort_unstable();
            prop_assert_eq!(seen, all);

            // Eligibility only depends on observation and latency months.
            prop_assert_eq!(&narrow_frame.ids, &wide_frame.ids);
            for (i, label) in narrow_frame.labels.iter().enumerate() {
                if label.is_churn() {
                    prop_assert!(wide_frame.labels[i].is_churn());
                }
            }
        }
    }
}
