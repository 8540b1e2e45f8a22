//! Synthetic subscriber-base generator with known churn drivers.
//!
//! Produces a relational dataset (customers, presence, usage, tickets,
//! revenue, handsets) whose monthly disconnections are sampled from a
//! logistic hazard with planted, exactly-known effects. The emitted ground
//! truth makes end-to-end recovery testable: behavior is generated first
//! and independently of churn, so the true target-window churn probability
//! of every customer is computable in closed form.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use thiserror::Error;

use crate::month::{DateValue, Month, MonthSpan};
use crate::schema::{parse_schema, Cell, Dataset, TableData};
use crate::windowing::WindowPlan;

/// Schema descriptor for every generated dataset.
pub const SCHEMA_DESCRIPTOR: &str = r#"{
  "tables": [
    {"name": "customer", "role": "root", "key": "id",
     "fields": [
       {"name": "id", "kind": "identifier"},
       {"name": "account", "kind": "identifier"},
       {"name": "segment", "kind": "categorical"},
       {"name": "offer", "kind": "categorical"},
       {"name": "activation_date", "kind": "date"},
       {"name": "bad_debt", "kind": "flag"}
     ]},
    {"name": "presence", "role": "secondary", "foreign_key": "id",
     "fields": [{"name": "month", "kind": "date"}]},
    {"name": "usage", "role": "secondary", "foreign_key": "id",
     "fields": [
       {"name": "event_date", "kind": "date"},
       {"name": "service", "kind": "categorical"},
       {"name": "destination", "kind": "identifier"},
       {"name": "charge", "kind": "numeric"}
     ]},
    {"name": "tickets", "role": "secondary", "foreign_key": "id",
     "fields": [
       {"name": "open_date", "kind": "date"},
       {"name": "category", "kind": "categorical"},
       {"name": "resolved", "kind": "flag"}
     ]},
    {"name": "revenue", "role": "secondary", "foreign_key": "id",
     "fields": [
       {"name": "month", "kind": "date"},
       {"name": "amount", "kind": "numeric"}
     ]},
    {"name": "handset", "role": "secondary", "foreign_key": "id",
     "fields": [
       {"name": "model", "kind": "categorical"},
       {"name": "os", "kind": "categorical"}
     ]}
  ]
}"#;

const SEGMENTS: [&str; 3] = ["SoHo", "SME", "LA"];
const OFFERS: [&str; 4] = ["standard", "flex", "bundle", "premier"];
const SERVICES: [&str; 3] = ["voice", "sms", "data"];
const TICKET_CATEGORIES: [&str; 3] = ["billing", "network", "device"];
const HANDSET_MODELS: [&str; 8] =
    ["aster", "briar", "cedar", "dahlia", "elm", "fern", "garnet", "hazel"];
const OS_NAMES: [&str; 3] = ["android", "ios", "feature"];

/// A hazard shifter with an exactly known log-odds effect.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DriverRule {
    /// No usage events in the decision month.
    ZeroUsage,
    /// Fewer than this many usage events in the decision month (also fires
    /// on zero, stacking with `ZeroUsage`).
    LowUsage { under: u32 },
    /// At least one trouble ticket opened in the decision month.
    OpenTicket,
    /// Fewer than this many months since activation.
    ShortTenure { months: u32 },
}

impl DriverRule {
    pub fn describe(self) -> String {
        match self {
            DriverRule::ZeroUsage => "zero_usage_month".into(),
            DriverRule::LowUsage { under } => format!("usage_under_{under}_events"),
            DriverRule::OpenTicket => "open_ticket_month".into(),
            DriverRule::ShortTenure { months } => format!("tenure_under_{months}_months"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct PlantedDriver {
    pub rule: DriverRule,
    /// Additive log-odds shift when the rule fires.
    pub effect: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Preset {
    /// Planted drivers: recoverable signal.
    Planted,
    /// No drivers: churn is a coin with the base hazard.
    Noise,
    /// Planted drivers that switch off partway through coverage.
    Drift,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "planted" => Some(Preset::Planted),
            "b" | "noise" => Some(Preset::Noise),
            "c" | "drift" => Some(Preset::Drift),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Planted => "planted",
            Preset::Noise => "noise",
            Preset::Drift => "drift",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_customers: usize,
    pub n_accounts: usize,
    /// First coverage month.
    pub start: Month,
    /// Coverage length in months.
    pub months: u32,
    /// Baseline monthly disconnection probability.
    pub base_hazard: f64,
    pub drivers: Vec<PlantedDriver>,
    /// Drivers stop shifting the hazard from this month on.
    pub drift_from: Option<Month>,
    /// Monthly probability of a customer going quiet for good, so fresh
    /// dormancy keeps flowing in at every anchor.
    pub dormancy_onset: f64,
    /// Share of customers that keep raising tickets.
    pub trouble_rate: f64,
    pub segment_weights: [f64; 3],
    /// Anchor the ground-truth churn probability is computed for, under the
    /// default window plan.
    pub eval_anchor: Month,
}

impl GeneratorConfig {
    /// Standard configuration for a preset: 14 months of coverage starting
    /// 2014-01, ground truth anchored at 2014-10.
    pub fn preset(preset: Preset, n_customers: usize, seed: u64) -> GeneratorConfig {
        let start = Month::new(2014, 1);
        let drivers = match preset {
            Preset::Noise => Vec::new(),
            Preset::Planted | Preset::Drift => vec![
                PlantedDriver { rule: DriverRule::ZeroUsage, effect: 2.0 },
                PlantedDriver { rule: DriverRule::LowUsage { under: 2 }, effect: 1.4 },
                PlantedDriver { rule: DriverRule::OpenTicket, effect: 1.0 },
                PlantedDriver { rule: DriverRule::ShortTenure { months: 6 }, effect: 0.7 },
            ],
        };
        GeneratorConfig {
            seed,
            n_customers,
            n_accounts: (n_customers / 8).max(1),
            start,
            months: 14,
            base_hazard: match preset {
                Preset::Noise => 0.065,
                _ => 0.018,
            },
            drivers,
            drift_from: match preset {
                Preset::Drift => Some(start.plus(12)),
                _ => None,
            },
            dormancy_onset: 0.035,
            trouble_rate: 0.15,
            segment_weights: [0.55, 0.33, 0.12],
            eval_anchor: start.plus(9),
        }
    }

    pub fn coverage(&self) -> MonthSpan {
        MonthSpan::new(self.start, self.start.plus(self.months as i32 - 1))
    }

    /// Window plan the ground truth is computed under.
    pub fn eval_plan(&self) -> WindowPlan {
        WindowPlan::new(self.eval_anchor, 2, 0, 2).expect("default plan is valid")
    }
}

#[derive(Error, Debug)]
pub enum DatagenError {
    #[error("coverage of {0} months is too short; the default window plan needs at least 5")]
    CoverageTooShort(u32),
    #[error("base hazard must lie strictly between 0 and 1, got {0}")]
    BadHazard(f64),
    #[error("need at least one customer and one account")]
    EmptyPopulation,
    #[error("cannot read ground truth: {0}")]
    BadTruth(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-customer ground truth.
#[derive(Clone, PartialEq, Debug)]
pub struct TruthRow {
    pub id: String,
    pub activation: Month,
    /// Last month the customer was present, when they disconnect inside
    /// coverage.
    pub churn_month: Option<Month>,
    /// True probability that the customer's presence ends inside the
    /// evaluation target window (a disconnection in one of the months
    /// whose departure lands in the target), from the hazards the
    /// simulation actually used.
    pub target_churn_prob: f64,
}

/// A generated dataset plus its ground truth.
#[derive(Clone, Debug)]
pub struct Generated {
    pub dataset: Dataset,
    pub truth: Vec<TruthRow>,
    pub config: GeneratorConfig,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn pick_weighted(rng: &mut ChaCha20Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut roll = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        roll -= w;
        if roll < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

struct MonthBehavior {
    usage: Vec<(u32, usize, u32, f64)>, // (day, service, destination, charge)
    tickets: Vec<(u32, usize, bool)>,   // (day, category, resolved)
    revenue: f64,
}

struct CustomerSim {
    id: String,
    account: String,
    segment: usize,
    offer: usize,
    activation: Month,
    bad_debt: bool,
    handset: Option<(usize, usize)>,
    /// Behavior for every coverage month, generated before churn is
    /// sampled and independent of it.
    behavior: Vec<MonthBehavior>,
    hazards: Vec<f64>,
    churn_month: Option<Month>,
}

fn simulate_customer(config: &GeneratorConfig, index: usize) -> CustomerSim {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);

    let segment = pick_weighted(&mut rng, &config.segment_weights);
    let offer = pick_weighted(&mut rng, &[0.4, 0.3, 0.2, 0.1]);
    let account = format!("A{:05}", rng.random_range(0..config.n_accounts));
    // Activation spread over the 30 months ending just before coverage ends,
    // so tenures range from brand-new to years.
    let end = config.start.plus(config.months as i32 - 1);
    let activation = end.plus(-(rng.random_range(1..=30)));
    let bad_debt = rng.random::<f64>() < 0.02;
    let handset = if rng.random::<f64>() < 0.85 {
        let model = rng.random_range(0..HANDSET_MODELS.len());
        Some((model, model % OS_NAMES.len()))
    } else {
        None
    };

    // Disengagement can set in any month (a little before coverage too),
    // and never reverses.
    let mut dormant_from = None;
    for offset in -6..config.months as i32 {
        if rng.random::<f64>() < config.dormancy_onset {
            dormant_from = Some(config.start.plus(offset));
            break;
        }
    }
    let troubled = rng.random::<f64>() < config.trouble_rate;

    // Mean monthly usage, scaled by segment size.
    let seg_scale = [0.7, 1.3, 3.0][segment];
    let gamma = Gamma::new(2.0, 2.0).expect("valid gamma");
    let mu = (1.5 + gamma.sample(&mut rng)) * seg_scale;
    let seg_revenue = [30.0, 80.0, 300.0][segment];

    let mut behavior = Vec::with_capacity(config.months as usize);
    for offset in 0..config.months as i32 {
        let m = config.start.plus(offset);
        if m < activation {
            behavior.push(MonthBehavior { usage: Vec::new(), tickets: Vec::new(), revenue: 0.0 });
            continue;
        }
        let dormant = dormant_from.is_some_and(|d| m >= d);
        let count = if dormant {
            u32::from(rng.random::<f64>() < 0.1)
        } else {
            (Poisson::new(mu).expect("positive mean").sample(&mut rng) as u32).min(120)
        };
        let mut usage = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let day = rng.random_range(1..=28);
            let service = pick_weighted(&mut rng, &[0.6, 0.25, 0.15]);
            let spread: f64 = rng.random();
            let destination = 1 + (spread * spread * 399.0) as u32;
            let base = [0.8, 0.12, 2.4][service];
            let charge = round2(base * (0.2 + rng.random::<f64>() * 1.8));
            usage.push((day, service, destination, charge));
        }
        usage.sort_unstable_by(|a, b| a.0.cmp(&b.0));

        let ticket_mean = if troubled { 1.0 } else { 0.06 };
        let ticket_count =
            (Poisson::new(ticket_mean).expect("positive mean").sample(&mut rng) as u32).min(6);
        let mut tickets = Vec::with_capacity(ticket_count as usize);
        for _ in 0..ticket_count {
            let day = rng.random_range(1..=28);
            let category = pick_weighted(&mut rng, &[0.5, 0.3, 0.2]);
            tickets.push((day, category, rng.random::<f64>() < 0.7));
        }
        tickets.sort_unstable_by(|a, b| a.0.cmp(&b.0));

        let revenue = round2(seg_revenue * (0.7 + 0.6 * rng.random::<f64>()));
        behavior.push(MonthBehavior { usage, tickets, revenue });
    }

    // Hazard per coverage month, from the planted drivers over the
    // already-fixed behavior.
    let base_logit = logit(config.base_hazard);
    let mut hazards = Vec::with_capacity(config.months as usize);
    for offset in 0..config.months as i32 {
        let m = config.start.plus(offset);
        if m < activation {
            hazards.push(0.0);
            continue;
        }
        let drifted = config.drift_from.is_some_and(|d| m >= d);
        let mut z = base_logit;
        if !drifted {
            for driver in &config.drivers {
                let fires = match driver.rule {
                    DriverRule::ZeroUsage => behavior[offset as usize].usage.is_empty(),
                    DriverRule::LowUsage { under } => {
                        (behavior[offset as usize].usage.len() as u32) < under
                    }
                    DriverRule::OpenTicket => !behavior[offset as usize].tickets.is_empty(),
                    DriverRule::ShortTenure { months } => activation.until(m) < months as i32,
                };
                if fires {
                    z += driver.effect;
                }
            }
        }
        hazards.push(sigmoid(z));
    }

    // Walk the months and sample the disconnection.
    let mut churn_month = None;
    for offset in 0..config.months as usize {
        let m = config.start.plus(offset as i32);
        if m < activation {
            continue;
        }
        if rng.random::<f64>() < hazards[offset] {
            churn_month = Some(m);
            break;
        }
    }

    CustomerSim {
        id: format!("C{:06}", index),
        account,
        segment,
        offer,
        activation,
        bad_debt,
        handset,
        behavior,
        hazards,
        churn_month,
    }
}

fn day_date(m: Month, day: u32) -> Cell {
    let date = chrono::NaiveDate::from_ymd_opt(m.year(), m.month_of_year(), day)
        .expect("generated days stay within 1..=28");
    Cell::Date(DateValue::Day(date))
}

/// Generates the dataset and its ground truth.
///
/// Customers are simulated on independent RNG streams derived from the
/// master seed, so output is identical regardless of evaluation order.
pub fn generate(config: &GeneratorConfig) -> Result<Generated, DatagenError> {
    if config.months < 5 {
        return Err(DatagenError::CoverageTooShort(config.months));
    }
    if !(config.base_hazard > 0.0 && config.base_hazard < 1.0) {
        return Err(DatagenError::BadHazard(config.base_hazard));
    }
    if config.n_customers == 0 || config.n_accounts == 0 {
        return Err(DatagenError::EmptyPopulation);
    }

    let schema = parse_schema(SCHEMA_DESCRIPTOR).expect("embedded descriptor is valid");
    let mut customer_rows = Vec::with_capacity(config.n_customers);
    let mut presence_rows = Vec::new();
    let mut usage_rows = Vec::new();
    let mut ticket_rows = Vec::new();
    let mut revenue_rows = Vec::new();
    let mut handset_rows = Vec::new();
    let mut truth = Vec::with_capacity(config.n_customers);

    // A customer is absent within the target window exactly when a
    // disconnection fires in one of these months (presence ends the month
    // before the first absent month).
    let plan = config.eval_plan();
    let decisions = MonthSpan::new(
        plan.anchor.plus(plan.latency_months as i32),
        plan.anchor.plus((plan.latency_months + plan.target_months) as i32 - 1),
    );
    for index in 0..config.n_customers {
        let sim = simulate_customer(config, index);
        let id = || Cell::Text(sim.id.clone());

        customer_rows.push(vec![
            id(),
            Cell::Text(sim.account.clone()),
            Cell::Text(SEGMENTS[sim.segment].into()),
            Cell::Text(OFFERS[sim.offer].into()),
            Cell::Date(DateValue::Month(sim.activation)),
            Cell::Flag(sim.bad_debt),
        ]);
        if let Some((model, os)) = sim.handset {
            handset_rows.push(vec![
                id(),
                Cell::Text(HANDSET_MODELS[model].into()),
                Cell::Text(OS_NAMES[os].into()),
            ]);
        }

        for offset in 0..config.months as usize {
            let m = config.start.plus(offset as i32);
            if m < sim.activation {
                continue;
            }
            if sim.churn_month.is_some_and(|c| m > c) {
                break;
            }
            presence_rows.push(vec![id(), Cell::Date(DateValue::Month(m))]);
            let behavior = &sim.behavior[offset];
            for &(day, service, destination, charge) in &behavior.usage {
                usage_rows.push(vec![
                    id(),
                    day_date(m, day),
                    Cell::Text(SERVICES[service].into()),
                    Cell::Text(format!("D{destination:03}")),
                    Cell::Number(charge),
                ]);
            }
            for &(day, category, resolved) in &behavior.tickets {
                ticket_rows.push(vec![
                    id(),
                    day_date(m, day),
                    Cell::Text(TICKET_CATEGORIES[category].into()),
                    Cell::Flag(resolved),
                ]);
            }
            revenue_rows.push(vec![
                id(),
                Cell::Date(DateValue::Month(m)),
                Cell::Number(behavior.revenue),
            ]);
        }

        let mut survival = 1.0;
        for m in decisions.iter() {
            if m < sim.activation {
                continue;
            }
            let offset = config.start.until(m);
            if (0..config.months as i32).contains(&offset) {
                survival *= 1.0 - sim.hazards[offset as usize];
            }
        }
        truth.push(TruthRow {
            id: sim.id,
            activation: sim.activation,
            churn_month: sim.churn_month,
            target_churn_prob: 1.0 - survival,
        });
    }

    let table = |name: &str, rows: Vec<Vec<Cell>>| TableData {
        schema: schema.table(name).expect("declared table").clone(),
        rows,
    };
    let dataset = Dataset::new(
        schema.clone(),
        table("customer", customer_rows),
        vec![
            table("presence", presence_rows),
            table("usage", usage_rows),
            table("tickets", ticket_rows),
            table("revenue", revenue_rows),
            table("handset", handset_rows),
        ],
    )
    .expect("generated keys are unique");

    Ok(Generated { dataset, truth, config: config.clone() })
}

impl Generated {
    /// Writes the dataset directory: schema descriptor, one delimited file
    /// per table, the ground truth, and the planted driver list.
    pub fn write(&self, dir: &Path) -> Result<(), DatagenError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("schema.json"), SCHEMA_DESCRIPTOR)?;
        let root = &self.dataset.root;
        std::fs::write(
            dir.join(format!("{}.tsv", root.schema.name)),
            crate::schema::write_table(root, '\t'),
        )?;
        for table in &self.dataset.secondaries {
            std::fs::write(
                dir.join(format!("{}.tsv", table.schema.name)),
                crate::schema::write_table(table, '\t'),
            )?;
        }

        let mut truth = String::from("id\tactivation\tchurn_month\ttarget_churn_prob\n");
        for row in &self.truth {
            let churn = row.churn_month.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                truth,
                "{}\t{}\t{churn}\t{}",
                row.id, row.activation, row.target_churn_prob
            );
        }
        std::fs::write(dir.join("truth.tsv"), truth)?;

        let mut drivers = String::from("rule\teffect\n");
        for d in &self.config.drivers {
            let _ = writeln!(drivers, "{}\t{}", d.rule.describe(), d.effect);
        }
        std::fs::write(dir.join("drivers.tsv"), drivers)?;
        Ok(())
    }
}

/// Reads `truth.tsv` back from a generated directory.
pub fn load_truth(dir: &Path) -> Result<Vec<TruthRow>, DatagenError> {
    let text = std::fs::read_to_string(dir.join("truth.tsv"))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| DatagenError::BadTruth("empty file".into()))?;
    if header != "id\tactivation\tchurn_month\ttarget_churn_prob" {
        return Err(DatagenError::BadTruth(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split('\t').collect();
        let [id, activation, churn, prob] = parts[..] else {
            return Err(DatagenError::BadTruth(format!("line {}: wrong column count", i + 2)));
        };
        let bad = |what: &str| DatagenError::BadTruth(format!("line {}: bad {what}", i + 2));
        rows.push(TruthRow {
            id: id.to_string(),
            activation: activation.parse().map_err(|_| bad("activation"))?,
            churn_month: if churn.is_empty() {
                None
            } else {
                Some(churn.parse().map_err(|_| bad("churn month"))?)
            },
            target_churn_prob: prob.parse().map_err(|_| bad("probability"))?,
        });
    }
    Ok(rows)
}
