//! Supervised univariate preprocessing.
//!
//! Numeric features are discretized into intervals and categorical features
//! are grouped into value sets, both by minimizing one MDL cost: the code
//! length of the partition structure plus the code length of the class
//! labels given the partition. Splits survive only when they pay for
//! themselves, so label-independent features collapse to a single part.
//! Each feature's `level` (how much of the null cost the partition saves)
//! doubles as its univariate importance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cumulative table of ln(k!), shared by all cost evaluations.
struct LnFact {
    table: Vec<f64>,
}

impl LnFact {
    fn up_to(n: usize) -> LnFact {
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        for k in 1..=n {
            let prev = table[k - 1];
            table.push(prev + (k as f64).ln());
        }
        LnFact { table }
    }

    fn get(&self, k: u32) -> f64 {
        self.table[k as usize]
    }

    fn ln_binom(&self, a: u32, b: u32) -> f64 {
        self.get(a) - self.get(b) - self.get(a - b)
    }
}

/// Code length of one part: its class composition plus its label sequence.
fn part_term(counts: &[u32], lf: &LnFact) -> f64 {
    let j = counts.len() as u32;
    let n: u32 = counts.iter().sum();
    let mut t = lf.ln_binom(n + j - 1, j - 1);
    t += lf.get(n);
    for &c in counts {
        t -= lf.get(c);
    }
    t
}

fn cost_with(counts: &[Vec<u32>], lf: &LnFact) -> f64 {
    let n: u32 = counts.iter().flatten().sum();
    let i = counts.len() as u32;
    let mut cost = 0.0;
    for part in counts {
        cost += part_term(part, lf);
    }
    cost += f64::ln(n as f64);
    cost += lf.ln_binom(n + i - 1, i - 1);
    cost
}

/// MDL cost of a partition given as per-part class counts (part-major).
///
/// For `n` instances, `J` classes and `I` parts with part sizes `n_i` and
/// per-class counts `n_ij`, the cost is
/// `ln(n) + ln C(n+I-1, I-1) + sum_i ln C(n_i+J-1, J-1) + sum_i ln(n_i!/prod_j n_ij!)`.
/// Terms are accumulated part by part in part order, so any two callers
/// evaluating the same counts get bit-identical results; the search in this
/// module and any external re-evaluation of its output agree exactly.
pub fn partition_cost(counts: &[Vec<u32>]) -> f64 {
    assert!(!counts.is_empty(), "cost of an empty partition");
    let j = counts[0].len();
    assert!(counts.iter().all(|c| c.len() == j), "ragged class counts");
    let n: u32 = counts.iter().flatten().sum();
    let lf = LnFact::up_to(2 * n as usize + counts.len() + j + 2);
    cost_with(counts, &lf)
}

/// Importance of a partition relative to doing nothing: the fraction of the
/// null (single-part) cost it saves, clamped at 0.
pub fn level(cost: f64, null_cost: f64) -> f64 {
    (1.0 - cost / null_cost).max(0.0)
}

/// Structure of a fitted partition.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionParts {
    /// Half-open intervals over the number line. `bounds` holds the finite
    /// cut points in increasing order; part `i` covers `[bounds[i-1],
    /// bounds[i])`, with the first part open below and the last open above.
    Intervals { bounds: Vec<f64> },
    /// Value groups. Unseen values fall into the `garbage` group, the one
    /// holding the most training values.
    Groups { assignment: BTreeMap<String, usize>, groups: usize, garbage: usize },
}

/// A supervised univariate partition of one feature.
///
/// Parts are indexed `0..part_count()`; when the training data had missing
/// values, the dedicated missing part is the last index. `counts` holds the
/// training class counts per part and always sums to the instance count.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct UnivariatePartition {
    pub feature: String,
    pub parts: PartitionParts,
    pub counts: Vec<Vec<u32>>,
    pub has_missing_part: bool,
    pub n_classes: usize,
    pub cost: f64,
    pub null_cost: f64,
    pub level: f64,
}

/// A feature value to route through a partition.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Value<'a> {
    Missing,
    Number(f64),
    Text(&'a str),
}

impl UnivariatePartition {
    pub fn part_count(&self) -> usize {
        self.counts.len()
    }

    /// Parts that carry actual values (excludes the missing part).
    pub fn value_part_count(&self) -> usize {
        self.counts.len() - usize::from(self.has_missing_part)
    }

    pub fn missing_part(&self) -> Option<usize> {
        self.has_missing_part.then(|| self.counts.len() - 1)
    }

    /// Part index for a value. Total: missing values go to the missing part
    /// when one exists and otherwise to the largest training part; unseen
    /// categorical values go to the garbage group.
    pub fn part_of(&self, value: Value<'_>) -> usize {
        match (value, &self.parts) {
            (Value::Number(x), PartitionParts::Intervals { bounds }) if !x.is_nan() => {
                bounds.partition_point(|&b| b <= x)
            }
            (Value::Text(s), PartitionParts::Groups { assignment, garbage, .. }) => {
                assignment.get(s).copied().unwrap_or(*garbage)
            }
            // Missing, NaN, or a value of the wrong kind.
            _ => self.missing_part().unwrap_or_else(|| self.largest_part()),
        }
    }

    fn largest_part(&self) -> usize {
        let mut best = 0;
        let mut best_total: u32 = self.counts[0].iter().sum();
        for (i, part) in self.counts.iter().enumerate().skip(1) {
            let total = part.iter().sum();
            if total > best_total {
                best = i;
                best_total = total;
            }
        }
        best
    }

    /// Human-readable label for a part, used in explanations.
    pub fn part_label(&self, part: usize) -> String {
        if self.missing_part() == Some(part) {
            return "missing".to_string();
        }
        match &self.parts {
            PartitionParts::Intervals { bounds } => {
                if bounds.is_empty() {
                    "any value".to_string()
                } else if part == 0 {
                    format!("<{}", bounds[0])
                } else if part == bounds.len() {
                    format!(">={}", bounds[part - 1])
                } else {
                    format!("[{}, {})", bounds[part - 1], bounds[part])
                }
            }
            PartitionParts::Groups { assignment, garbage, .. } => {
                let members: Vec<&str> = assignment
                    .iter()
                    .filter(|(_, &g)| g == part)
                    .map(|(v, _)| v.as_str())
                    .collect();
                let mut shown: Vec<&str> = members.iter().take(4).copied().collect();
                let extra = members.len().saturating_sub(4);
                let mut tail = String::new();
                if extra > 0 {
                    tail = format!(", +{extra} more");
                }
                if part == *garbage {
                    shown.push("+unseen");
                }
                format!("{{{}{tail}}}", shown.join(", "))
            }
        }
    }
}

#[derive(Error, Debug)]
pub enum PreprocessError {
    #[error("no values to partition")]
    Empty,
    #[error("{values} values but {labels} labels")]
    LengthMismatch { values: usize, labels: usize },
    #[error("need at least two classes, got {0}")]
    BadClassCount(usize),
    #[error("label {label} at position {index} exceeds class count {n_classes}")]
    BadLabel { index: usize, label: usize, n_classes: usize },
}

/// Search configuration. The defaults are exact for small value domains and
/// switch to bounded approximations on large ones.
#[derive(Clone, Copy, Debug)]
pub struct PreprocessOptions {
    /// Cap on the number of value parts (the missing part is extra).
    pub max_parts: Option<usize>,
    /// Numeric search runs exact dynamic programming over at most this many
    /// elementary bins; above it, values are pre-binned by equal frequency.
    pub elementary_limit: usize,
    /// Categorical search is exhaustive up to this many distinct values and
    /// greedy bottom-up above.
    pub exact_group_limit: usize,
    /// Categorical domains larger than this are first capped by frequency,
    /// with the tail sharing one seed group.
    pub group_value_limit: usize,
}

impl Default for PreprocessOptions {
    fn default() -> PreprocessOptions {
        PreprocessOptions {
            max_parts: None,
            elementary_limit: 256,
            exact_group_limit: 8,
            group_value_limit: 64,
        }
    }
}

fn validate(
    n_values: usize,
    labels: &[usize],
    n_classes: usize,
) -> Result<(), PreprocessError> {
    if n_values == 0 {
        return Err(PreprocessError::Empty);
    }
    if n_values != labels.len() {
        return Err(PreprocessError::LengthMismatch { values: n_values, labels: labels.len() });
    }
    if n_classes < 2 {
        return Err(PreprocessError::BadClassCount(n_classes));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
        return Err(PreprocessError::BadLabel { index, label, n_classes });
    }
    Ok(())
}

fn finish(
    feature: &str,
    parts: PartitionParts,
    counts: Vec<Vec<u32>>,
    missing_counts: Vec<u32>,
    n_classes: usize,
    lf: &LnFact,
) -> UnivariatePartition {
    let has_missing = missing_counts.iter().any(|&c| c > 0);
    let mut full = counts;
    let mut totals = vec![0u32; n_classes];
    for part in &full {
        for (t, &c) in totals.iter_mut().zip(part) {
            *t += c;
        }
    }
    let mut null_counts = vec![totals];
    if has_missing {
        full.push(missing_counts.clone());
        null_counts.push(missing_counts);
    }
    let cost = cost_with(&full, lf);
    let null_cost = cost_with(&null_counts, lf);
    UnivariatePartition {
        feature: feature.to_string(),
        parts,
        counts: full,
        has_missing_part: has_missing,
        n_classes,
        cost,
        null_cost,
        level: level(cost, null_cost),
    }
}

/// Discretizes a numeric feature against class labels. Missing values are
/// passed as NaN and always form their own part.
///
/// The search runs exact dynamic programming over distinct-value boundaries
/// (pre-binned by equal frequency above `elementary_limit` distinct values)
/// and returns the cost-minimal interval partition; when no split pays, the
/// result is the single-interval null partition with level 0.
pub fn discretize(
    feature: &str,
    values: &[f64],
    labels: &[usize],
    n_classes: usize,
    opts: &PreprocessOptions,
) -> Result<UnivariatePartition, PreprocessError> {
    validate(values.len(), labels, n_classes)?;
    let n_total = values.len();
    let lf = LnFact::up_to(2 * n_total + n_classes + 4);

    let mut missing_counts = vec![0u32; n_classes];
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n_total);
    for (&v, &l) in values.iter().zip(labels) {
        if v.is_nan() {
            missing_counts[l] += 1;
        } else {
            pairs.push((v, l));
        }
    }
    pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Elementary bins: one per distinct value, merged to an equal-frequency
    // quantization when the domain is too large for exact search.
    let mut bins: Vec<(f64, Vec<u32>)> = Vec::new();
    for &(v, l) in &pairs {
        if bins.last().is_none_or(|(bv, _)| *bv != v) {
            bins.push((v, vec![0; n_classes]));
        }
        bins.last_mut().unwrap().1[l] += 1;
    }
    if bins.len() > opts.elementary_limit {
        let target = pairs.len().div_ceil(opts.elementary_limit);
        let mut merged: Vec<(f64, Vec<u32>)> = Vec::new();
        let mut filled = target; // forces a fresh bin first
        for (v, counts) in bins {
            let size: u32 = counts.iter().sum();
            if filled >= target {
                merged.push((v, counts));
                filled = size as usize;
            } else {
                let last = merged.last_mut().unwrap();
                for (t, c) in last.1.iter_mut().zip(&counts) {
                    *t += c;
                }
                filled += size as usize;
            }
        }
        bins = merged;
    }

    let b = bins.len();
    if b <= 1 {
        // All missing, or a single distinct value: nothing to split.
        let counts = vec![bins.pop().map(|(_, c)| c).unwrap_or_else(|| vec![0; n_classes])];
        return Ok(finish(
            feature,
            PartitionParts::Intervals { bounds: vec![] },
            counts,
            missing_counts,
            n_classes,
            &lf,
        ));
    }

    // prefix[c][i] = count of class c in bins 0..i
    let mut prefix = vec![vec![0u32; b + 1]; n_classes];
    for (i, (_, counts)) in bins.iter().enumerate() {
        for c in 0..n_classes {
            prefix[c][i + 1] = prefix[c][i] + counts[c];
        }
    }
    let mut seg = vec![0u32; n_classes];
    let seg_term = |from: usize, to: usize, lf: &LnFact, seg: &mut Vec<u32>| {
        for c in 0..n_classes {
            seg[c] = prefix[c][to] - prefix[c][from];
        }
        part_term(seg, lf)
    };

    let k_max = opts.max_parts.unwrap_or(b).clamp(1, b);
    // dp[k-1][i] = left-to-right accumulated cost of the best split of bins
    // 0..i into k intervals; back[k-1][i] = start bin of the last interval.
    let mut dp = vec![vec![f64::INFINITY; b + 1]; k_max];
    let mut back = vec![vec![0u32; b + 1]; k_max];
    for i in 1..=b {
        dp[0][i] = seg_term(0, i, &lf, &mut seg);
    }
    for k in 2..=k_max {
        for i in k..=b {
            let mut best = f64::INFINITY;
            let mut best_j = 0;
            for j in (k - 1)..i {
                let cand = dp[k - 2][j] + seg_term(j, i, &lf, &mut seg);
                if cand < best {
                    best = cand;
                    best_j = j;
                }
            }
            dp[k - 1][i] = best;
            back[k - 1][i] = best_j as u32;
        }
    }

    let has_missing = missing_counts.iter().any(|&c| c > 0);
    let missing_term = has_missing.then(|| part_term(&missing_counts, &lf));
    let n = n_total as u32;
    let mut best_k = 1;
    let mut best_total = f64::INFINITY;
    for k in 1..=k_max {
        let mut total = dp[k - 1][b];
        if let Some(m) = missing_term {
            total += m;
        }
        total += f64::ln(n as f64);
        let i = k as u32 + u32::from(has_missing);
        total += lf.ln_binom(n + i - 1, i - 1);
        if total < best_total {
            best_total = total;
            best_k = k;
        }
    }

    // Reconstruct the chosen cut positions.
    let mut cuts = Vec::with_capacity(best_k - 1);
    let mut i = b;
    for k in (2..=best_k).rev() {
        let j = back[k - 1][i] as usize;
        cuts.push(j);
        i = j;
    }
    cuts.reverse();

    let mut bounds = Vec::with_capacity(cuts.len());
    let mut counts = Vec::with_capacity(best_k);
    let mut start = 0;
    for &cut in cuts.iter().chain(std::iter::once(&b)) {
        if cut < b {
            bounds.push(bins[cut].0);
        }
        let mut part = vec![0u32; n_classes];
        for c in 0..n_classes {
            part[c] = prefix[c][cut] - prefix[c][start];
        }
        counts.push(part);
        start = cut;
    }

    Ok(finish(feature, PartitionParts::Intervals { bounds }, counts, missing_counts, n_classes, &lf))
}

/// Groups the values of a categorical feature against class labels.
/// Missing values are `None` and always form their own part.
///
/// The search is exhaustive over set partitions up to `exact_group_limit`
/// distinct values and greedy bottom-up (merge while the cost drops) above;
/// very large domains are first capped to the `group_value_limit` most
/// frequent values with the tail sharing one seed group. The group holding
/// the most training values becomes the garbage group for unseen values.
pub fn group(
    feature: &str,
    values: &[Option<&str>],
    labels: &[usize],
    n_classes: usize,
    opts: &PreprocessOptions,
) -> Result<UnivariatePartition, PreprocessError> {
    validate(values.len(), labels, n_classes)?;
    let lf = LnFact::up_to(2 * values.len() + n_classes + 4);

    let mut missing_counts = vec![0u32; n_classes];
    let mut by_value: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (v, &l) in values.iter().zip(labels) {
        match v {
            None => missing_counts[l] += 1,
            Some(s) => by_value.entry(s).or_insert_with(|| vec![0; n_classes])[l] += 1,
        }
    }
    let vals: Vec<(&str, Vec<u32>)> = by_value.into_iter().collect();

    if vals.is_empty() {
        return Ok(finish(
            feature,
            PartitionParts::Groups { assignment: BTreeMap::new(), groups: 1, garbage: 0 },
            vec![vec![0; n_classes]],
            missing_counts,
            n_classes,
            &lf,
        ));
    }

    // Search units: one per value, except that oversized domains keep their
    // most frequent values as units and pool the rest into one unit.
    let mut units: Vec<Vec<usize>> = Vec::new(); // indices into vals
    if vals.len() > opts.group_value_limit {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(vals[i].1.iter().sum::<u32>()), i));
        let keep = opts.group_value_limit.saturating_sub(1).max(1);
        let mut head: Vec<usize> = order[..keep].to_vec();
        let mut tail: Vec<usize> = order[keep..].to_vec();
        head.sort_unstable();
        tail.sort_unstable();
        units.extend(head.into_iter().map(|i| vec![i]));
        units.push(tail);
        units.sort_by_key(|u| u[0]);
    } else {
        units.extend((0..vals.len()).map(|i| vec![i]));
    }
    let unit_counts: Vec<Vec<u32>> = units
        .iter()
        .map(|members| {
            let mut c = vec![0u32; n_classes];
            for &m in members {
                for (t, &x) in c.iter_mut().zip(&vals[m].1) {
                    *t += x;
                }
            }
            c
        })
        .collect();
    let v = units.len();

    let has_missing = missing_counts.iter().any(|&c| c > 0);
    // Unit-to-group assignment minimizing the full partition cost.
    let best_assignment: Vec<usize> = if v <= opts.exact_group_limit {
        let mut best: (f64, Vec<usize>) = (f64::INFINITY, vec![0; v]);
        let mut assignment = vec![0usize; v];
        exhaustive_partitions(&mut assignment, 1, 1, &mut |a| {
            let groups = a.iter().max().unwrap() + 1;
            let mut counts = vec![vec![0u32; n_classes]; groups];
            for (unit, &g) in a.iter().enumerate() {
                for (t, &x) in counts[g].iter_mut().zip(&unit_counts[unit]) {
                    *t += x;
                }
            }
            if has_missing {
                counts.push(missing_counts.clone());
            }
            let cost = cost_with(&counts, &lf);
            if cost < best.0 {
                best = (cost, a.to_vec());
            }
        });
        best.1
    } else {
        greedy_merge(&unit_counts, &missing_counts, has_missing, &lf)
    };

    // Canonical group order: by smallest member unit.
    let n_groups = best_assignment.iter().max().unwrap() + 1;
    let mut first_unit = vec![usize::MAX; n_groups];
    for (unit, &g) in best_assignment.iter().enumerate() {
        first_unit[g] = first_unit[g].min(unit);
    }
    let mut order: Vec<usize> = (0..n_groups).collect();
    order.sort_by_key(|&g| first_unit[g]);
    let mut rank = vec![0usize; n_groups];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }

    let mut assignment = BTreeMap::new();
    let mut value_tally = vec![0usize; n_groups];
    let mut counts = vec![vec![0u32; n_classes]; n_groups];
    for (unit, members) in units.iter().enumerate() {
        let g = rank[best_assignment[unit]];
        for &m in members {
            assignment.insert(vals[m].0.to_string(), g);
            value_tally[g] += 1;
            for (t, &x) in counts[g].iter_mut().zip(&vals[m].1) {
                *t += x;
            }
        }
    }
    let garbage = (0..n_groups).max_by_key(|&g| (value_tally[g], std::cmp::Reverse(g))).unwrap();

    Ok(finish(
        feature,
        PartitionParts::Groups { assignment, groups: n_groups, garbage },
        counts,
        missing_counts,
        n_classes,
        &lf,
    ))
}

/// Enumerates set partitions as restricted growth strings, smallest first,
/// so the all-in-one-group partition is visited before any split.
fn exhaustive_partitions(
    assignment: &mut Vec<usize>,
    pos: usize,
    used: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if pos == assignment.len() {
        visit(assignment);
        return;
    }
    for g in 0..=used {
        assignment[pos] = g;
        exhaustive_partitions(assignment, pos + 1, used.max(g + 1), visit);
    }
}

/// Bottom-up merging: repeatedly merge the pair of groups with the best
/// (most negative) cost delta until no merge keeps the cost from rising.
fn greedy_merge(
    unit_counts: &[Vec<u32>],
    missing_counts: &[u32],
    has_missing: bool,
    lf: &LnFact,
) -> Vec<usize> {
    let n: u32 =
        unit_counts.iter().flatten().sum::<u32>() + missing_counts.iter().sum::<u32>();
    let header = |groups: usize| {
        let i = groups as u32 + u32::from(has_missing);
        lf.ln_binom(n + i - 1, i - 1)
    };

    let mut members: Vec<Vec<usize>> = (0..unit_counts.len()).map(|u| vec![u]).collect();
    let mut counts: Vec<Vec<u32>> = unit_counts.to_vec();
    let mut terms: Vec<f64> = counts.iter().map(|c| part_term(c, lf)).collect();

    while counts.len() > 1 {
        let header_delta = header(counts.len() - 1) - header(counts.len());
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..counts.len() {
            for b in (a + 1)..counts.len() {
                let merged: Vec<u32> =
                    counts[a].iter().zip(&counts[b]).map(|(x, y)| x + y).collect();
                let delta = part_term(&merged, lf) - terms[a] - terms[b] + header_delta;
                if best.is_none_or(|(d, _, _)| delta < d) {
                    best = Some((delta, a, b));
                }
            }
        }
        let (delta, a, b) = best.unwrap();
        if delta > 0.0 {
            break;
        }
        let (removed_members, removed_counts) = (members.remove(b), counts.remove(b));
        terms.remove(b);
        members[a].extend(removed_members);
        members[a].sort_unstable();
        for (t, x) in counts[a].iter_mut().zip(removed_counts) {
            *t += x;
        }
        terms[a] = part_term(&counts[a], lf);
    }

    let mut assignment = vec![0usize; unit_counts.len()];
    for (g, group) in members.iter().enumerate() {
        for &u in group {
            assignment[u] = g;
        }
    }
    assignment
}
