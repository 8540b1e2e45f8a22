//! Selective naive Bayes over partitioned features.
//!
//! Every feature enters as a supervised partition; the scorer combines
//! per-part conditional log-probabilities with a weight per feature.
//! Weights are learned by averaging many greedy forward-selection passes,
//! then optionally pruned by backward elimination on a holdout.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::auc;
use crate::featuregen::{ColumnData, FeatureMatrix};
use crate::preprocess::{discretize, group, PreprocessError, PreprocessOptions, UnivariatePartition};
use crate::windowing::{Label, WindowPlan};

pub const MODEL_VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum ClassifierError {
    #[error("degenerate target: training data holds a single class")]
    DegenerateTarget,
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("matrix carries no labels")]
    NoLabels,
    #[error("matrix lacks columns required by the model: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("model version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One scoring feature: its partition, smoothed conditional
/// log-probabilities per part and class, and its averaged selection weight.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FeatureModel {
    pub name: String,
    pub partition: UnivariatePartition,
    /// `ln p(part | class)`, indexed `[part][class]` with class 0 = stay,
    /// class 1 = churn.
    pub conditionals: Vec<[f64; 2]>,
    /// Fraction of selection passes that picked this feature, in [0, 1].
    pub weight: f64,
}

impl FeatureModel {
    pub fn level(&self) -> f64 {
        self.partition.level
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub version: u32,
    /// Window the training matrix was materialized under, when known.
    pub plan: Option<WindowPlan>,
    pub n: usize,
    /// Training instances per class, [stay, churn].
    pub class_counts: [usize; 2],
    pub seed: u64,
    pub passes: usize,
}

/// A trained selective naive Bayes scorer.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SnbModel {
    pub meta: ModelMeta,
    /// Laplace-smoothed class priors, [stay, churn]; sums to 1.
    pub priors: [f64; 2],
    /// Features with positive weight, in training-matrix column order.
    pub features: Vec<FeatureModel>,
}

/// Posterior churn probabilities, one entry per scored instance.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ScoreVector {
    pub entries: Vec<(String, f64)>,
}

impl ScoreVector {
    pub fn posteriors(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, p)| p).collect()
    }

    /// Entries by decreasing churn probability; ties keep input order.
    pub fn sorted_descending(&self) -> Vec<(String, f64)> {
        let mut out = self.entries.clone();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub seed: u64,
    /// Number of greedy selection passes to average.
    pub passes: usize,
    /// Share of training rows each pass holds out for its selection AUC.
    pub holdout_fraction: f64,
    /// Recorded in the model so deployment can rebuild the same window.
    pub plan: Option<WindowPlan>,
    pub preprocess: PreprocessOptions,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            seed: 0,
            passes: 31,
            holdout_fraction: 0.3,
            plan: None,
            preprocess: PreprocessOptions::default(),
        }
    }
}

fn labels_of(matrix: &FeatureMatrix) -> Result<&[Label], ClassifierError> {
    if matrix.n_rows() == 0 {
        return Err(ClassifierError::EmptyMatrix);
    }
    matrix.labels.as_deref().ok_or(ClassifierError::NoLabels)
}

/// Builds the supervised partition of every column and keeps those with
/// positive level, with the per-row part code of each.
fn partition_columns(
    matrix: &FeatureMatrix,
    labels: &[usize],
    opts: &PreprocessOptions,
) -> Result<Vec<(UnivariatePartition, Vec<usize>)>, ClassifierError> {
    let mut kept = Vec::new();
    for column in &matrix.columns {
        let partition = match &column.data {
            ColumnData::Numeric(values) => {
                discretize(&column.feature.name, values, labels, 2, opts)?
            }
            ColumnData::Categorical(values) => {
                let refs: Vec<Option<&str>> = values.iter().map(|v| v.as_deref()).collect();
                group(&column.feature.name, &refs, labels, 2, opts)?
            }
        };
        if partition.level > 0.0 {
            let col = matrix.column_index(&column.feature.name).unwrap();
            let codes: Vec<usize> =
                (0..matrix.n_rows()).map(|r| partition.part_of(matrix.value(r, col))).collect();
            kept.push((partition, codes));
        }
    }
    Ok(kept)
}

/// `ln p(part | class)` with pseudo-count 1/parts, so each class's
/// conditionals sum to one.
fn conditionals(partition: &UnivariatePartition, codes: &[usize], labels: &[usize]) -> Vec<[f64; 2]> {
    let parts = partition.part_count();
    let mut counts = vec![[0usize; 2]; parts];
    let mut class_totals = [0usize; 2];
    for (&code, &label) in codes.iter().zip(labels) {
        counts[code][label] += 1;
        class_totals[label] += 1;
    }
    let pseudo = 1.0 / parts as f64;
    counts
        .iter()
        .map(|c| {
            [0, 1].map(|k| ((c[k] as f64 + pseudo) / (class_totals[k] as f64 + 1.0)).ln())
        })
        .collect()
}

fn smoothed_priors(class_counts: [usize; 2]) -> [f64; 2] {
    let n = (class_counts[0] + class_counts[1]) as f64;
    [0, 1].map(|k| (class_counts[k] as f64 + 1.0) / (n + 2.0))
}

fn class_counts_of(labels: &[usize]) -> Result<[usize; 2], ClassifierError> {
    let mut counts = [0usize; 2];
    for &l in labels {
        counts[l] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(ClassifierError::DegenerateTarget);
    }
    Ok(counts)
}

/// Trains by averaged greedy selection.
///
/// Each of the configured passes draws its own stratified holdout fold and
/// walks the features in its own random order, adding a feature exactly
/// when it strictly improves the fold's ranking AUC. A feature's weight is
/// the fraction of passes that kept it; zero-weight features are dropped
/// from the model. Conditional probabilities come from the full training
/// matrix.
pub fn train(matrix: &FeatureMatrix, config: &TrainConfig) -> Result<SnbModel, ClassifierError> {
    let label_slice = labels_of(matrix)?;
    let labels: Vec<usize> = label_slice.iter().map(|l| l.is_churn() as usize).collect();
    let class_counts = class_counts_of(&labels)?;
    let candidates = partition_columns(matrix, &labels, &config.preprocess)?;

    let mut votes = vec![0usize; candidates.len()];
    for pass in 0..config.passes {
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        rng.set_stream(pass as u64 + 1);

        // Stratified holdout fold, at least one instance per class.
        let mut holdout: Vec<usize> = Vec::new();
        for class in 0..2 {
            let mut rows: Vec<usize> =
                (0..labels.len()).filter(|&r| labels[r] == class).collect();
            rows.shuffle(&mut rng);
            let take = ((rows.len() as f64 * config.holdout_fraction).round() as usize)
                .clamp(1, rows.len());
            holdout.extend(rows.into_iter().take(take));
        }
        holdout.sort_unstable();
        let fold_labels: Vec<Label> =
            holdout.iter().map(|&r| label_slice[r]).collect();

        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.shuffle(&mut rng);

        // Class priors shift every score equally, so the fold AUC needs
        // only the per-feature log-likelihood ratios.
        let mut scores = vec![0.0f64; holdout.len()];
        let mut best = auc(&scores, &fold_labels).expect("fold is stratified");
        for &v in &order {
            let (partition, codes) = &candidates[v];
            let cond = conditionals(partition, codes, &labels);
            let trial: Vec<f64> = holdout
                .iter()
                .zip(&scores)
                .map(|(&r, s)| s + cond[codes[r]][1] - cond[codes[r]][0])
                .collect();
            let trial_auc = auc(&trial, &fold_labels).expect("fold is stratified");
            if trial_auc > best + 1e-12 {
                best = trial_auc;
                scores = trial;
                votes[v] += 1;
            }
        }
    }

    let features = candidates
        .iter()
        .zip(&votes)
        .filter(|(_, &v)| v > 0)
        .map(|((partition, codes), &v)| FeatureModel {
            name: partition.feature.clone(),
            conditionals: conditionals(partition, codes, &labels),
            partition: partition.clone(),
            weight: v as f64 / config.passes as f64,
        })
        .collect();

    Ok(SnbModel {
        meta: ModelMeta {
            version: MODEL_VERSION,
            plan: config.plan,
            n: labels.len(),
            class_counts,
            seed: config.seed,
            passes: config.passes,
        },
        priors: smoothed_priors(class_counts),
        features,
    })
}

/// Plain naive Bayes over the same partitions: every positive-level feature
/// enters with weight 1 and no selection runs.
pub fn with_unit_weights(
    matrix: &FeatureMatrix,
    config: &TrainConfig,
) -> Result<SnbModel, ClassifierError> {
    let label_slice = labels_of(matrix)?;
    let labels: Vec<usize> = label_slice.iter().map(|l| l.is_churn() as usize).collect();
    let class_counts = class_counts_of(&labels)?;
    let candidates = partition_columns(matrix, &labels, &config.preprocess)?;
    let features = candidates
        .iter()
        .map(|(partition, codes)| FeatureModel {
            name: partition.feature.clone(),
            conditionals: conditionals(partition, codes, &labels),
            partition: partition.clone(),
            weight: 1.0,
        })
        .collect();
    Ok(SnbModel {
        meta: ModelMeta {
            version: MODEL_VERSION,
            plan: config.plan,
            n: labels.len(),
            class_counts,
            seed: config.seed,
            passes: 0,
        },
        priors: smoothed_priors(class_counts),
        features,
    })
}

/// Column index of each model feature in `matrix`; reports every absent
/// feature at once.
fn resolve_columns(model: &SnbModel, matrix: &FeatureMatrix) -> Result<Vec<usize>, ClassifierError> {
    let mut cols = Vec::with_capacity(model.features.len());
    let mut missing = Vec::new();
    for f in &model.features {
        match matrix.column_index(&f.name) {
            Some(c) => cols.push(c),
            None => missing.push(f.name.clone()),
        }
    }
    if missing.is_empty() {
        Ok(cols)
    } else {
        Err(ClassifierError::MissingColumns(missing))
    }
}

/// Per-class log-scores `ln p(c) + Σ_v w_v ln p(part_v(x) | c)`,
/// `[stay, churn]` per row.
pub fn log_scores(model: &SnbModel, matrix: &FeatureMatrix) -> Result<Vec<[f64; 2]>, ClassifierError> {
    let cols = resolve_columns(model, matrix)?;
    let mut out = Vec::with_capacity(matrix.n_rows());
    for row in 0..matrix.n_rows() {
        let mut s = [model.priors[0].ln(), model.priors[1].ln()];
        for (f, &c) in model.features.iter().zip(&cols) {
            let part = f.partition.part_of(matrix.value(row, c));
            s[0] += f.weight * f.conditionals[part][0];
            s[1] += f.weight * f.conditionals[part][1];
        }
        out.push(s);
    }
    Ok(out)
}

/// Posterior churn probability per instance, by softmax over the two
/// class log-scores.
pub fn score(model: &SnbModel, matrix: &FeatureMatrix) -> Result<ScoreVector, ClassifierError> {
    let scores = log_scores(model, matrix)?;
    let entries = matrix
        .ids
        .iter()
        .zip(&scores)
        .map(|(id, &[s0, s1])| {
            let m = s0.max(s1);
            let (e0, e1) = ((s0 - m).exp(), (s1 - m).exp());
            (id.clone(), e1 / (e0 + e1))
        })
        .collect();
    Ok(ScoreVector { entries })
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct EliminationStep {
    pub feature: String,
    pub weight: f64,
    pub level: f64,
    pub auc_before: f64,
    pub auc_after: f64,
    pub dropped: bool,
}

#[derive(Clone, Debug)]
pub struct Elimination {
    pub model: SnbModel,
    pub trace: Vec<EliminationStep>,
}

/// Prunes the model against a labeled holdout matrix.
///
/// Repeatedly tries to drop the feature with the smallest
/// (weight, level, name) key; a drop sticks when the holdout AUC falls by
/// at most `epsilon`, and the first rejected drop stops the loop.
pub fn backward_eliminate(
    model: &SnbModel,
    holdout: &FeatureMatrix,
    epsilon: f64,
) -> Result<Elimination, ClassifierError> {
    let labels = labels_of(holdout)?;
    let mut current = model.clone();
    let mut trace = Vec::new();
    let mut auc_before = auc(&score(&current, holdout)?.posteriors(), labels)
        .map_err(|_| ClassifierError::DegenerateTarget)?;

    while !current.features.is_empty() {
        let victim = (0..current.features.len())
            .min_by(|&a, &b| {
                let fa = &current.features[a];
                let fb = &current.features[b];
                fa.weight
                    .partial_cmp(&fb.weight)
                    .unwrap()
                    .then(fa.level().partial_cmp(&fb.level()).unwrap())
                    .then(fa.name.cmp(&fb.name))
            })
            .unwrap();
        let mut reduced = current.clone();
        let removed = reduced.features.remove(victim);
        let auc_after = auc(&score(&reduced, holdout)?.posteriors(), labels)
            .map_err(|_| ClassifierError::DegenerateTarget)?;
        let dropped = auc_before - auc_after <= epsilon;
        trace.push(EliminationStep {
            feature: removed.name.clone(),
            weight: removed.weight,
            level: removed.level(),
            auc_before,
            auc_after,
            dropped,
        });
        if !dropped {
            break;
        }
        current = reduced;
        auc_before = auc_after;
    }
    Ok(Elimination { model: current, trace })
}

/// Serializes the model; a fixed field order keeps equal models
/// byte-identical.
pub fn to_json(model: &SnbModel) -> String {
    serde_json::to_string_pretty(model).expect("model serializes")
}

pub fn from_json(text: &str) -> Result<SnbModel, ClassifierError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ClassifierError::CorruptModel(e.to_string()))?;
    let found = value
        .get("meta")
        .and_then(|m| m.get("version"))
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ClassifierError::CorruptModel("missing version field".into()))?
        as u32;
    if found != MODEL_VERSION {
        return Err(ClassifierError::VersionMismatch { found, expected: MODEL_VERSION });
    }
    serde_json::from_value(value).map_err(|e| ClassifierError::CorruptModel(e.to_string()))
}

pub fn save(model: &SnbModel, path: &Path) -> Result<(), ClassifierError> {
    Ok(std::fs::write(path, to_json(model))?)
}

pub fn load(path: &Path) -> Result<SnbModel, ClassifierError> {
    from_json(&std::fs::read_to_string(path)?)
}

/// Features by descending level, the order used for reporting.
pub fn features_by_level(model: &SnbModel) -> Vec<&FeatureModel> {
    let mut out: Vec<&FeatureModel> = model.features.iter().collect();
    out.sort_by(|a, b| b.level().partial_cmp(&a.level()).unwrap().then(a.name.cmp(&b.name)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featuregen::{BoundFeature, BoundSource, FeatureKind, MatrixColumn};
    use crate::preprocess::PartitionParts;
    use rand::Rng;

    fn numeric_column(name: &str, values: Vec<f64>) -> MatrixColumn {
        MatrixColumn {
            feature: BoundFeature {
                name: name.into(),
                kind: FeatureKind::Numeric,
                source: BoundSource::RootField { field: name.into() },
            },
            data: ColumnData::Numeric(values),
        }
    }

    fn matrix(labels: Vec<Label>, columns: Vec<MatrixColumn>) -> FeatureMatrix {
        let n = labels.len();
        FeatureMatrix {
            ids: (0..n).map(|i| format!("C{i}")).collect(),
            labels: Some(labels),
            columns,
        }
    }

    fn half_labels(n: usize) -> Vec<Label> {
        (0..n).map(|i| if i % 2 == 0 { Label::Stay } else { Label::Churn }).collect()
    }

    /// A two-part interval feature with hand-picked conditionals.
    fn manual_feature(name: &str, cut: f64, p0: [f64; 2], weight: f64, level: f64) -> FeatureModel {
        FeatureModel {
            name: name.into(),
            partition: UnivariatePartition {
                feature: name.into(),
                parts: PartitionParts::Intervals { bounds: vec![cut] },
                counts: vec![vec![1, 1], vec![1, 1]],
                has_missing_part: false,
                n_classes: 2,
                cost: 1.0,
                null_cost: 2.0,
                level,
            },
            conditionals: vec![
                [p0[0].ln(), p0[1].ln()],
                [(1.0 - p0[0]).ln(), (1.0 - p0[1]).ln()],
            ],
            weight,
        }
    }

    fn manual_model(features: Vec<FeatureModel>) -> SnbModel {
        SnbModel {
            meta: ModelMeta {
                version: MODEL_VERSION,
                plan: None,
                n: 4,
                class_counts: [2, 2],
                seed: 0,
                passes: 0,
            },
            priors: [0.5, 0.5],
            features,
        }
    }

    #[test]
    fn separating_feature_earns_full_weight() {
        let n = 60;
        let labels = half_labels(n);
        let values: Vec<f64> =
            labels.iter().map(|l| if l.is_churn() { 20.0 } else { 5.0 }).collect();
        let m = matrix(labels.clone(), vec![numeric_column("x", values)]);
        let model =
            train(&m, &TrainConfig { passes: 9, ..TrainConfig::default() }).unwrap();
        assert_eq!(model.features.len(), 1);
        assert_eq!(model.features[0].weight, 1.0);
        let posteriors = score(&model, &m).unwrap().posteriors();
        assert_eq!(auc(&posteriors, &labels).unwrap(), 1.0);
    }

    #[test]
    fn single_class_training_is_degenerate() {
        let m = matrix(vec![Label::Stay; 8], vec![numeric_column("x", vec![1.0; 8])]);
        assert!(matches!(train(&m, &TrainConfig::default()), Err(ClassifierError::DegenerateTarget)));
    }

    #[test]
    fn uninformative_features_leave_a_prior_model() {
        // Alternating labels against a constant feature: level 0.
        let n = 40;
        let m = matrix(half_labels(n), vec![numeric_column("flat", vec![3.0; n])]);
        let model = train(&m, &TrainConfig::default()).unwrap();
        assert!(model.features.is_empty());
        let posteriors = score(&model, &m).unwrap().posteriors();
        let churn_rate = 0.5;
        assert!(posteriors.iter().all(|&p| p == posteriors[0]));
        assert!((posteriors[0] - churn_rate).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn posterior_matches_bayes_arithmetic() {
        // p(part0|stay)=0.2, p(part0|churn)=0.8, equal priors: an instance
        // in part 0 scores 0.8.
        let model = manual_model(vec![manual_feature("x", 0.0, [0.2, 0.8], 1.0, 0.5)]);
        let m = matrix(half_labels(2), vec![numeric_column("x", vec![-1.0, 1.0])]);
        let posteriors = score(&model, &m).unwrap().posteriors();
        assert!((posteriors[0] - 0.8).abs() < 1e-12);
        assert!((posteriors[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_feature_scores_the_prior() {
        let model = manual_model(vec![manual_feature("x", 0.0, [0.2, 0.8], 0.0, 0.5)]);
        let m = matrix(half_labels(2), vec![numeric_column("x", vec![-1.0, 1.0])]);
        let posteriors = score(&model, &m).unwrap().posteriors();
        assert!((posteriors[0] - 0.5).abs() < 1e-12);
        assert!((posteriors[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_missing_rows_score_without_error() {
        let model = manual_model(vec![manual_feature("x", 0.0, [0.2, 0.8], 1.0, 0.5)]);
        let m = matrix(half_labels(2), vec![numeric_column("x", vec![f64::NAN, f64::NAN])]);
        let posteriors = score(&model, &m).unwrap().posteriors();
        for p in posteriors {
            assert!((0.0..=1.0).contains(&p) && p.is_finite());
        }
    }

    #[test]
    fn missing_columns_are_all_reported() {
        let model = manual_model(vec![
            manual_feature("a", 0.0, [0.2, 0.8], 1.0, 0.5),
            manual_feature("b", 0.0, [0.3, 0.7], 1.0, 0.4),
        ]);
        let m = matrix(half_labels(2), vec![numeric_column("c", vec![0.0, 1.0])]);
        match score(&model, &m) {
            Err(ClassifierError::MissingColumns(names)) => assert_eq!(names, ["a", "b"]),
            other => panic!("expected missing columns, got {other:?}"),
        }
    }

    #[test]
    fn unit_weight_model_agrees_with_textbook_bayes() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let n = 120;
        let labels: Vec<Label> =
            (0..n).map(|_| if rng.random::<f64>() < 0.4 { Label::Churn } else { Label::Stay }).collect();
        let x: Vec<f64> = labels
            .iter()
            .map(|l| rng.random::<f64>() * 10.0 + if l.is_churn() { 4.0 } else { 0.0 })
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let m = matrix(labels.clone(), vec![numeric_column("x", x), numeric_column("y", y)]);
        let model = with_unit_weights(&m, &TrainConfig::default()).unwrap();
        let posteriors = score(&model, &m).unwrap().posteriors();

        // Recount everything and fold the product in probability space.
        let n_churn = labels.iter().filter(|l| l.is_churn()).count();
        let prior = [
            (n - n_churn) as f64 + 1.0,
            n_churn as f64 + 1.0,
        ]
        .map(|c| c / (n as f64 + 2.0));
        for row in 0..n {
            let mut joint = prior;
            for f in &model.features {
                let col = m.column_index(&f.name).unwrap();
                let part = f.partition.part_of(m.value(row, col));
                let parts = f.partition.part_count();
                let mut part_count = [0.0f64; 2];
                let mut class_count = [0.0f64; 2];
                for r in 0..n {
                    let k = labels[r].is_churn() as usize;
                    class_count[k] += 1.0;
                    if f.partition.part_of(m.value(r, col)) == part {
                        part_count[k] += 1.0;
                    }
                }
                for k in 0..2 {
                    joint[k] *= (part_count[k] + 1.0 / parts as f64) / (class_count[k] + 1.0);
                }
            }
            let expected = joint[1] / (joint[0] + joint[1]);
            let got = posteriors[row];
            assert!(
                (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "row {row}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn same_seed_gives_identical_model_bytes() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let n = 80;
        let labels = half_labels(n);
        let x: Vec<f64> = labels
            .iter()
            .map(|l| rng.random::<f64>() + if l.is_churn() { 0.8 } else { 0.0 })
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let m = matrix(labels, vec![numeric_column("x", x), numeric_column("y", y)]);
        let config = TrainConfig { seed: 42, ..TrainConfig::default() };
        let a = to_json(&train(&m, &config).unwrap());
        let b = to_json(&train(&m, &config).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn duplicated_feature_shares_its_weight() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let n = 400;
        let labels: Vec<Label> =
            (0..n).map(|_| if rng.random::<f64>() < 0.5 { Label::Churn } else { Label::Stay }).collect();
        let x: Vec<f64> = labels
            .iter()
            .map(|l| rng.random::<f64>() * 3.0 + if l.is_churn() { 2.0 } else { 0.0 })
            .collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();

        let single = matrix(
            labels.clone(),
            vec![numeric_column("x", x.clone()), numeric_column("noise", noise.clone())],
        );
        let doubled = matrix(
            labels.clone(),
            vec![
                numeric_column("x", x.clone()),
                numeric_column("x_copy", x),
                numeric_column("noise", noise),
            ],
        );
        let config = TrainConfig { seed: 5, ..TrainConfig::default() };
        let lone = train(&single, &config).unwrap();
        let pair = train(&doubled, &config).unwrap();

        let weight_of = |m: &SnbModel, name: &str| {
            m.features.iter().find(|f| f.name == name).map_or(0.0, |f| f.weight)
        };
        let lone_w = weight_of(&lone, "x");
        let pair_w = weight_of(&pair, "x") + weight_of(&pair, "x_copy");
        assert!((lone_w - pair_w).abs() <= 0.2, "weights {lone_w} vs {pair_w}");

        let auc_of = |model: &SnbModel, m: &FeatureMatrix| {
            auc(&score(model, m).unwrap().posteriors(), &labels).unwrap()
        };
        assert!((auc_of(&lone, &single) - auc_of(&pair, &doubled)).abs() <= 0.01);
    }

    #[test]
    fn elimination_drops_noise_and_keeps_the_driver() {
        // The driver's parts track the label; the noise feature has equal
        // conditionals in both classes.
        let model = manual_model(vec![
            manual_feature("driver", 0.0, [0.1, 0.9], 0.9, 0.6),
            manual_feature("noise", 0.0, [0.5, 0.5], 0.05, 0.001),
        ]);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let n = 200;
        let labels: Vec<Label> =
            (0..n).map(|_| if rng.random::<f64>() < 0.5 { Label::Churn } else { Label::Stay }).collect();
        let driver: Vec<f64> = labels
            .iter()
            .map(|l| {
                let in_part1 = rng.random::<f64>() < if l.is_churn() { 0.2 } else { 0.8 };
                if in_part1 { 1.0 } else { -1.0 }
            })
            .collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let holdout = matrix(
            labels,
            vec![numeric_column("driver", driver), numeric_column("noise", noise)],
        );

        let outcome = backward_eliminate(&model, &holdout, 0.0).unwrap();
        assert_eq!(outcome.trace.len(), 2);
        assert_eq!(outcome.trace[0].feature, "noise");
        assert!(outcome.trace[0].dropped);
        assert_eq!(outcome.trace[0].auc_before, outcome.trace[0].auc_after);
        assert_eq!(outcome.trace[1].feature, "driver");
        assert!(!outcome.trace[1].dropped);
        assert_eq!(outcome.model.features.len(), 1);
        assert_eq!(outcome.model.features[0].name, "driver");
    }

    #[test]
    fn single_feature_model_attempts_one_elimination() {
        let model = manual_model(vec![manual_feature("driver", 0.0, [0.1, 0.9], 1.0, 0.6)]);
        let labels = vec![Label::Churn, Label::Churn, Label::Stay, Label::Stay];
        let holdout =
            matrix(labels, vec![numeric_column("driver", vec![-1.0, -1.0, 1.0, 1.0])]);
        let outcome = backward_eliminate(&model, &holdout, 0.0).unwrap();
        assert_eq!(outcome.trace.len(), 1);
        assert!(!outcome.trace[0].dropped);
        assert_eq!(outcome.model, model);
    }

    #[test]
    fn saved_models_round_trip_bit_identically() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let n = 90;
        let labels = half_labels(n);
        let x: Vec<f64> = labels
            .iter()
            .map(|l| rng.random::<f64>() * 2.0 + if l.is_churn() { 1.0 } else { 0.0 })
            .collect();
        let m = matrix(labels, vec![numeric_column("x", x)]);
        let model = train(&m, &TrainConfig::default()).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save(&model, &path).unwrap();
        let loaded = load(&path).unwrap();
        let a = score(&model, &m).unwrap();
        let b = score(&loaded, &m).unwrap();
        for ((_, pa), (_, pb)) in a.entries.iter().zip(&b.entries) {
            assert_eq!(pa.to_bits(), pb.to_bits());
        }

        let text = to_json(&model);
        let truncated = &text[..text.len() / 2];
        assert!(matches!(from_json(truncated), Err(ClassifierError::CorruptModel(_))));

        let bumped = text.replacen("\"version\": 1", "\"version\": 99", 1);
        match from_json(&bumped) {
            Err(ClassifierError::VersionMismatch { found, expected }) => {
                assert_eq!((found, expected), (99, 1));
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn posterior_pairs_sum_to_one() {
        let model = manual_model(vec![manual_feature("x", 0.0, [0.3, 0.6], 0.7, 0.2)]);
        let m = matrix(half_labels(4), vec![numeric_column("x", vec![-2.0, -0.5, 0.5, 2.0])]);
        for &[s0, s1] in &log_scores(&model, &m).unwrap() {
            let mx = s0.max(s1);
            let p1 = (s1 - mx).exp() / ((s0 - mx).exp() + (s1 - mx).exp());
            let p0 = (s0 - mx).exp() / ((s0 - mx).exp() + (s1 - mx).exp());
            assert!((p0 + p1 - 1.0).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        /// With equal priors, scaling every weight by k > 0 scales the
        /// class log-score gap uniformly, so the ranking is unchanged.
        #[test]
        fn weight_scaling_preserves_ranking(
            k in 0.05f64..20.0,
            cut_probs in proptest::collection::vec((0.05f64..0.95, 0.05f64..0.95), 1..4),
            values in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 3), 2..12),
        ) {
            let features: Vec<FeatureModel> = cut_probs
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| manual_feature(&format!("f{i}"), 0.0, [a, b], 0.5, 0.3))
                .collect();
            let n_features = features.len();
            let model = manual_model(features.clone());
            let mut scaled_features = features;
            for f in &mut scaled_features {
                f.weight *= k;
            }
            let scaled = manual_model(scaled_features);

            let n = values.len();
            let columns: Vec<MatrixColumn> = (0..n_features)
                .map(|j| numeric_column(
                    &format!("f{j}"),
                    values.iter().map(|row| row[j]).collect(),
                ))
                .collect();
            let m = matrix(half_labels(n), columns);
            let p = score(&model, &m).unwrap().posteriors();
            let q = score(&scaled, &m).unwrap().posteriors();
            for i in 0..n {
                for j in 0..n {
                    let a = p[i] - p[j];
                    let b = q[i] - q[j];
                    if a.abs() > 1e-9 {
                        proptest::prop_assert!(a.signum() == b.signum(),
                            "pair ({i},{j}): {a} vs {b}");
                    } else {
                        proptest::prop_assert!(b.abs() < 1e-6);
                    }
                }
            }
        }

        /// With any priors the class log-scores shift affinely in k:
        /// s'_c - ln p(c) = k (s_c - ln p(c)).
        #[test]
        fn weight_scaling_is_affine_per_class(
            k in 0.05f64..20.0,
            prior_churn in 0.1f64..0.9,
            x in proptest::collection::vec(-5.0f64..5.0, 2..10),
        ) {
            let base = manual_feature("x", 0.0, [0.2, 0.7], 0.6, 0.3);
            let mut scaled_f = base.clone();
            scaled_f.weight *= k;
            let mut model = manual_model(vec![base]);
            model.priors = [1.0 - prior_churn, prior_churn];
            let mut scaled = manual_model(vec![scaled_f]);
            scaled.priors = model.priors;

            let m = matrix(half_labels(x.len()), vec![numeric_column("x", x)]);
            let s = log_scores(&model, &m).unwrap();
            let t = log_scores(&scaled, &m).unwrap();
            for (a, b) in s.iter().zip(&t) {
                for c in 0..2 {
                    let lp = model.priors[c].ln();
                    proptest::prop_assert!(
                        ((b[c] - lp) - k * (a[c] - lp)).abs() < 1e-9);
                }
            }
        }

        /// Trained models keep their structural promises regardless of data.
        #[test]
        fn trained_model_invariants_hold(
            seed in 0u64..1000,
            n in 12usize..40,
        ) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let labels: Vec<Label> = (0..n)
                .map(|i| if i < 2 { [Label::Stay, Label::Churn][i] } else if rng.random::<f64>() < 0.4 { Label::Churn } else { Label::Stay })
                .collect();
            let x: Vec<f64> = labels
                .iter()
                .map(|l| rng.random::<f64>() + if l.is_churn() { 0.5 } else { 0.0 })
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let m = matrix(labels.clone(), vec![numeric_column("x", x), numeric_column("y", y)]);
            let model = train(&m, &TrainConfig { passes: 7, seed, ..TrainConfig::default() }).unwrap();

            proptest::prop_assert!((model.priors[0] + model.priors[1] - 1.0).abs() < 1e-12);
            for f in &model.features {
                proptest::prop_assert!(f.weight > 0.0 && f.weight <= 1.0);
                proptest::prop_assert!(f.level() > 0.0);
                for c in 0..2 {
                    let total: f64 = f.conditionals.iter().map(|p| p[c].exp()).sum();
                    proptest::prop_assert!((total - 1.0).abs() < 1e-9);
                }
            }
            let posteriors = score(&model, &m).unwrap().posteriors();
            proptest::prop_assert!(posteriors.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
