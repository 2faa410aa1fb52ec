//! From-scratch CART decision trees and random forests, with stratified
//! k-fold cross-validation and grid/random hyperparameter search.
//!
//! Everything is deterministic given (data, params, seed): per-tree RNG
//! streams are derived from the master seed, so results do not depend on
//! thread count or training order. Trained models are immutable, and
//! serialize to a versioned JSON file embedding their feature schema.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{self, FeatureSchema, FeatureVector};
use crate::report::{Label, ScanSnapshot};
use crate::strategies::LabelingStrategy;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("class counts are empty")]
    EmptyNode,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature vectors and labels disagree in length ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("feature vector does not match the model schema")]
    SchemaMismatch,
    #[error("{n} samples are too few for {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("model I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format version {0}")]
    BadFormatVersion(u32),
}

/// Split quality criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Gini => write!(f, "gini"),
            Criterion::Entropy => write!(f, "entropy"),
        }
    }
}

impl Criterion {
    fn impurity(self, counts: ClassCounts) -> f64 {
        match self {
            Criterion::Gini => gini_impurity(counts),
            Criterion::Entropy => entropy_impurity(counts),
        }
    }
}

/// Benign/malicious sample counts at a tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub benign: u64,
    pub malicious: u64,
}

impl ClassCounts {
    pub fn total(self) -> u64 {
        self.benign + self.malicious
    }

    fn add(&mut self, label: Label) {
        match label {
            Label::Benign => self.benign += 1,
            Label::Malicious => self.malicious += 1,
        }
    }

    fn remove(&mut self, label: Label) {
        match label {
            Label::Benign => self.benign -= 1,
            Label::Malicious => self.malicious -= 1,
        }
    }

    /// Majority class; ties go to benign, the majority class of real corpora.
    pub fn majority(self) -> Label {
        if self.malicious > self.benign {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    fn is_pure(self) -> bool {
        self.benign == 0 || self.malicious == 0
    }
}

/// Gini impurity `1 - sum(p_i^2)`, in [0, 0.5] for two classes.
pub fn gini(counts: ClassCounts) -> Result<f64, ForestError> {
    if counts.total() == 0 {
        return Err(ForestError::EmptyNode);
    }
    Ok(gini_impurity(counts))
}

/// Shannon entropy `-sum(p_i log2 p_i)`, in [0, 1] for two classes.
pub fn entropy(counts: ClassCounts) -> Result<f64, ForestError> {
    if counts.total() == 0 {
        return Err(ForestError::EmptyNode);
    }
    Ok(entropy_impurity(counts))
}

fn gini_impurity(counts: ClassCounts) -> f64 {
    let n = counts.total();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let (b, m) = (counts.benign as f64, counts.malicious as f64);
    1.0 - (b * b + m * m) / (n * n)
}

fn entropy_impurity(counts: ClassCounts) -> f64 {
    let n = counts.total();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let mut out = 0.0;
    for c in [counts.benign, counts.malicious] {
        if c > 0 {
            let p = c as f64 / n;
            out -= p * p.log2();
        }
    }
    out
}

/// Binary CART node. Splits send `value <= threshold` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        class_counts: ClassCounts,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: ClassCounts,
        prediction: Label,
    },
}

impl TreeNode {
    pub fn predict(&self, values: &[f64]) -> Label {
        match self {
            TreeNode::Leaf { prediction, .. } => *prediction,
            TreeNode::Split { feature_index, threshold, left, right, .. } => {
                if values[*feature_index] <= *threshold {
                    left.predict(values)
                } else {
                    right.predict(values)
                }
            }
        }
    }

    pub fn depth(&self) -> u32 {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn class_counts(&self) -> ClassCounts {
        match self {
            TreeNode::Leaf { class_counts, .. } => *class_counts,
            TreeNode::Split { class_counts, .. } => *class_counts,
        }
    }

    fn for_each(&self, f: &mut impl FnMut(&TreeNode)) {
        f(self);
        if let TreeNode::Split { left, right, .. } = self {
            left.for_each(f);
            right.for_each(f);
        }
    }
}

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperParams {
    pub criterion: Criterion,
    /// Maximum tree depth; `None` grows until pure or unsplittable.
    pub max_depth: Option<u32>,
    /// Features examined per split, re-sampled at every node; `None` means
    /// all features.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    /// `false` trains every tree on the entire dataset.
    pub bootstrap: bool,
    pub n_trees: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            criterion: Criterion::Gini,
            max_depth: None,
            max_features: None,
            min_samples_split: 2,
            bootstrap: true,
            n_trees: 100,
        }
    }
}

/// Provenance recorded inside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub dataset: String,
    /// Snapshot date the training reports were taken at.
    pub as_of: Option<chrono::NaiveDate>,
    pub cv_accuracy: Option<f64>,
}

impl Default for TrainingMeta {
    fn default() -> Self {
        TrainingMeta { dataset: "unnamed".to_owned(), as_of: None, cv_accuracy: None }
    }
}

/// Trained random forest plus the schema its vectors came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub schema: FeatureSchema,
    pub params: HyperParams,
    pub seed: u64,
    pub training_meta: TrainingMeta,
    pub trees: Vec<TreeNode>,
}

impl ForestModel {
    /// Majority vote of the trees; ties go to benign.
    pub fn predict(&self, x: &FeatureVector) -> Result<Label, ForestError> {
        if x.schema_id != self.schema.fingerprint() || x.values.len() != self.schema.vector_len()
        {
            return Err(ForestError::SchemaMismatch);
        }
        Ok(self.vote(&x.values))
    }

    fn vote(&self, values: &[f64]) -> Label {
        let malicious = self
            .trees
            .iter()
            .filter(|t| t.predict(values) == Label::Malicious)
            .count();
        if malicious * 2 > self.trees.len() {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ForestError> {
        let model: ForestModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ForestError::BadFormatVersion(model.format_version));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ForestError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ForestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A trained model acting as a labeling strategy: extract features per the
/// embedded schema, then vote.
pub struct ForestStrategy {
    model: ForestModel,
    name: String,
}

impl ForestStrategy {
    pub fn new(model: ForestModel) -> Self {
        let name = format!("forest:{}:{}", model.schema.kind, model.training_meta.dataset);
        ForestStrategy { model, name }
    }

    pub fn model(&self) -> &ForestModel {
        &self.model
    }
}

impl LabelingStrategy for ForestStrategy {
    fn label(&self, snapshot: &ScanSnapshot) -> Label {
        let vector = features::extract(snapshot, &self.model.schema)
            .expect("extraction by schema kind is total");
        self.model.vote(&vector.values)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

fn validate_training_set(x: &[FeatureVector], y: &[Label]) -> Result<(), ForestError> {
    if x.is_empty() {
        return Err(ForestError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(ForestError::LengthMismatch { x: x.len(), y: y.len() });
    }
    let schema_id = x[0].schema_id;
    let len = x[0].values.len();
    if x.iter().any(|v| v.schema_id != schema_id || v.values.len() != len) {
        return Err(ForestError::SchemaMismatch);
    }
    Ok(())
}

/// Derives independent per-tree seeds from the master seed (splitmix64).
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains a single CART tree on the full sample set.
pub fn train_tree(
    x: &[FeatureVector],
    y: &[Label],
    params: &HyperParams,
    rng_seed: u64,
) -> Result<TreeNode, ForestError> {
    validate_training_set(x, y)?;
    let indices: Vec<usize> = (0..x.len()).collect();
    let mut builder = TreeBuilder {
        x,
        y,
        params,
        n_features: x[0].values.len(),
        rng: ChaCha12Rng::seed_from_u64(rng_seed),
    };
    Ok(builder.build(indices, 0))
}

struct TreeBuilder<'a> {
    x: &'a [FeatureVector],
    y: &'a [Label],
    params: &'a HyperParams,
    n_features: usize,
    rng: ChaCha12Rng,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl TreeBuilder<'_> {
    fn build(&mut self, indices: Vec<usize>, depth: u32) -> TreeNode {
        let mut counts = ClassCounts::default();
        for &i in &indices {
            counts.add(self.y[i]);
        }
        let at_max_depth = self.params.max_depth.is_some_and(|d| depth >= d);
        if at_max_depth || counts.is_pure() || indices.len() < self.params.min_samples_split {
            return self.leaf(counts);
        }
        let candidates = self.candidate_features();
        let Some(best) = self.best_split(&indices, counts, &candidates) else {
            return self.leaf(counts);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.x[i].values[best.feature] <= best.threshold);
        // Left is built before right so the per-node feature sampling
        // consumes randomness in a fixed DFS order.
        let left = self.build(left, depth + 1);
        let right = self.build(right, depth + 1);
        TreeNode::Split {
            feature_index: best.feature,
            threshold: best.threshold,
            class_counts: counts,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn leaf(&self, counts: ClassCounts) -> TreeNode {
        TreeNode::Leaf { class_counts: counts, prediction: counts.majority() }
    }

    /// Per-node random feature subset, re-sampled at every node; ascending
    /// order keeps the tie-break on the lowest feature index.
    fn candidate_features(&mut self) -> Vec<usize> {
        match self.params.max_features {
            Some(m) if m < self.n_features => {
                let mut sampled =
                    rand::seq::index::sample(&mut self.rng, self.n_features, m).into_vec();
                sampled.sort_unstable();
                sampled
            }
            _ => (0..self.n_features).collect(),
        }
    }

    /// Best split over candidate features with thresholds at midpoints of
    /// adjacent distinct values. Splits only on a strict impurity decrease;
    /// ties resolve to the lowest (feature, threshold).
    fn best_split(
        &self,
        indices: &[usize],
        counts: ClassCounts,
        candidates: &[usize],
    ) -> Option<BestSplit> {
        let criterion = self.params.criterion;
        let parent_impurity = criterion.impurity(counts);
        let n = indices.len() as f64;
        let mut best: Option<BestSplit> = None;
        let mut column: Vec<(f64, Label)> = Vec::with_capacity(indices.len());
        for &feature in candidates {
            column.clear();
            column.extend(indices.iter().map(|&i| (self.x[i].values[feature], self.y[i])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut left = ClassCounts::default();
            let mut right = counts;
            for (pos, window) in column.windows(2).enumerate() {
                let (value, label) = window[0];
                let next_value = window[1].0;
                left.add(label);
                right.remove(label);
                if value == next_value {
                    continue;
                }
                let mut threshold = value / 2.0 + next_value / 2.0;
                if threshold >= next_value {
                    // Adjacent floats can collapse the midpoint upward; fall
                    // back to the lower value so the partition stays exact.
                    threshold = value;
                }
                let n_left = (pos + 1) as f64;
                let n_right = n - n_left;
                let weighted = (n_left / n) * criterion.impurity(left)
                    + (n_right / n) * criterion.impurity(right);
                let decrease = parent_impurity - weighted;
                if decrease > 0.0 && best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    best = Some(BestSplit { feature, threshold, decrease });
                }
            }
        }
        best
    }
}

/// Trains the trees of a forest over `base` sample indices; tree `i` uses
/// the RNG stream derived from (seed, i) for bootstrap and feature sampling.
fn train_trees(
    x: &[FeatureVector],
    y: &[Label],
    base: &[usize],
    params: &HyperParams,
    seed: u64,
) -> Result<Vec<TreeNode>, ForestError> {
    if base.is_empty() {
        return Err(ForestError::EmptyTrainingSet);
    }
    let trees: Vec<TreeNode> = (0..params.n_trees)
        .into_par_iter()
        .map(|tree_index| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, tree_index as u64));
            let sample: Vec<usize> = if params.bootstrap {
                (0..base.len()).map(|_| base[rng.random_range(0..base.len())]).collect()
            } else {
                base.to_vec()
            };
            let mut builder = TreeBuilder { x, y, params, n_features: x[0].values.len(), rng };
            builder.build(sample, 0)
        })
        .collect();
    Ok(trees)
}

/// Trains a random forest; deterministic in (x, y, params, seed).
pub fn train_forest(
    x: &[FeatureVector],
    y: &[Label],
    schema: &FeatureSchema,
    params: &HyperParams,
    seed: u64,
) -> Result<ForestModel, ForestError> {
    validate_training_set(x, y)?;
    if x[0].schema_id != schema.fingerprint() {
        return Err(ForestError::SchemaMismatch);
    }
    let base: Vec<usize> = (0..x.len()).collect();
    let trees = train_trees(x, y, &base, params, seed)?;
    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        schema: schema.clone(),
        params: params.clone(),
        seed,
        training_meta: TrainingMeta::default(),
        trees,
    })
}

/// Mean-decrease-in-impurity feature importances, normalized to sum to one
/// (all zeros when no tree ever splits).
pub fn feature_importances(model: &ForestModel) -> Vec<f64> {
    let n_features = model.schema.vector_len();
    let mut total = vec![0.0; n_features];
    for tree in &model.trees {
        let root_n = tree.class_counts().total() as f64;
        if root_n == 0.0 {
            continue;
        }
        let mut per_tree = vec![0.0; n_features];
        tree.for_each(&mut |node| {
            if let TreeNode::Split { feature_index, class_counts, left, right, .. } = node {
                let n = class_counts.total() as f64;
                let nl = left.class_counts().total() as f64;
                let nr = right.class_counts().total() as f64;
                let criterion = model.params.criterion;
                let decrease = criterion.impurity(*class_counts)
                    - (nl / n) * criterion.impurity(left.class_counts())
                    - (nr / n) * criterion.impurity(right.class_counts());
                per_tree[*feature_index] += (n / root_n) * decrease;
            }
        });
        let sum: f64 = per_tree.iter().sum();
        if sum > 0.0 {
            for (t, p) in total.iter_mut().zip(&per_tree) {
                *t += p / sum;
            }
        }
    }
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        for t in &mut total {
            *t /= sum;
        }
    }
    total
}

/// Seeded stratified fold assignment: per class, indices are shuffled and
/// dealt round-robin, so fold sizes differ by at most one per class.
pub fn stratified_folds(y: &[Label], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0xF01D));
    let mut folds = vec![Vec::new(); k];
    for class in [Label::Benign, Label::Malicious] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut rng);
        for (j, i) in members.into_iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    folds
}

/// Mean held-out validation accuracy ((TP+TN)/(P+N)) over seeded stratified
/// k-fold cross-validation.
pub fn cross_validate(
    x: &[FeatureVector],
    y: &[Label],
    params: &HyperParams,
    k: usize,
    seed: u64,
) -> Result<f64, ForestError> {
    validate_training_set(x, y)?;
    if k < 2 || x.len() < k {
        return Err(ForestError::TooFewSamples { n: x.len(), k });
    }
    let folds = stratified_folds(y, k, seed);
    let mut fold_accuracies = Vec::with_capacity(k);
    for (fold_index, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            return Err(ForestError::TooFewSamples { n: x.len(), k });
        }
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != fold_index)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let trees = train_trees(x, y, &train, params, derive_seed(seed, fold_index as u64))?;
        let correct = fold
            .iter()
            .filter(|&&i| {
                let malicious =
                    trees.iter().filter(|t| t.predict(&x[i].values) == Label::Malicious).count();
                let predicted =
                    if malicious * 2 > trees.len() { Label::Malicious } else { Label::Benign };
                predicted == y[i]
            })
            .count();
        fold_accuracies.push(correct as f64 / fold.len() as f64);
    }
    Ok(fold_accuracies.iter().sum::<f64>() / k as f64)
}

/// Hyperparameter lattice. Enumeration order is criterion, max_depth,
/// max_features, min_samples_split, bootstrap, each in declared list order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub criteria: Vec<Criterion>,
    pub max_depths: Vec<Option<u32>>,
    pub max_features: Vec<Option<usize>>,
    pub min_samples_splits: Vec<usize>,
    pub bootstraps: Vec<bool>,
    pub n_trees: usize,
}

impl ParamGrid {
    /// Default search lattice: forests of 100 trees over both criteria,
    /// depths {1, 3, 4, 5, 10, unbounded}, feature caps {3, 5, 10, all},
    /// split minimums {2, 3, 10}, and both bootstrap settings.
    pub fn default_grid() -> Self {
        ParamGrid {
            criteria: vec![Criterion::Gini, Criterion::Entropy],
            max_depths: vec![Some(1), Some(3), Some(4), Some(5), Some(10), None],
            max_features: vec![Some(3), Some(5), Some(10), None],
            min_samples_splits: vec![2, 3, 10],
            bootstraps: vec![true, false],
            n_trees: 100,
        }
    }

    pub fn len(&self) -> usize {
        self.criteria.len()
            * self.max_depths.len()
            * self.max_features.len()
            * self.min_samples_splits.len()
            * self.bootstraps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn enumerate(&self) -> Vec<HyperParams> {
        let mut points = Vec::with_capacity(self.len());
        for &criterion in &self.criteria {
            for &max_depth in &self.max_depths {
                for &max_features in &self.max_features {
                    for &min_samples_split in &self.min_samples_splits {
                        for &bootstrap in &self.bootstraps {
                            points.push(HyperParams {
                                criterion,
                                max_depth,
                                max_features,
                                min_samples_split,
                                bootstrap,
                                n_trees: self.n_trees,
                            });
                        }
                    }
                }
            }
        }
        points
    }

    pub fn from_json(text: &str) -> Result<Self, ForestError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ForestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Index of the best score; ties go to the first candidate in enumeration
/// order. Comparison is exact — arbitrarily small gaps still decide.
pub fn best_candidate_index(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &score) in scores.iter().enumerate() {
        if best.is_none_or(|b| score > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Outcome of a hyperparameter search.
#[derive(Debug)]
pub struct SearchOutcome {
    pub best_params: HyperParams,
    pub best_cv_accuracy: f64,
    /// Final model retrained on the full dataset with the best parameters.
    pub model: ForestModel,
    /// Every evaluated point with its CV accuracy, in enumeration order.
    pub evaluated: Vec<(HyperParams, f64)>,
}

/// Evaluates every lattice point by cross-validation, then retrains the best
/// point on the full dataset. All points share the master seed, hence the
/// same folds.
pub fn grid_search(
    x: &[FeatureVector],
    y: &[Label],
    schema: &FeatureSchema,
    grid: &ParamGrid,
    k: usize,
    seed: u64,
) -> Result<SearchOutcome, ForestError> {
    search_points(x, y, schema, grid.enumerate(), k, seed)
}

/// Grid search over a seeded uniform sample (without replacement) of the
/// lattice. Sampling `n_samples >= |lattice|` degenerates to grid search.
pub fn random_search(
    x: &[FeatureVector],
    y: &[Label],
    schema: &FeatureSchema,
    grid: &ParamGrid,
    n_samples: usize,
    k: usize,
    seed: u64,
) -> Result<SearchOutcome, ForestError> {
    let points = grid.enumerate();
    if points.is_empty() {
        return Err(ForestError::EmptyGrid);
    }
    let take = n_samples.clamp(1, points.len());
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0x5A3D));
    let mut chosen = rand::seq::index::sample(&mut rng, points.len(), take).into_vec();
    chosen.sort_unstable();
    let sampled: Vec<HyperParams> = chosen.into_iter().map(|i| points[i].clone()).collect();
    search_points(x, y, schema, sampled, k, seed)
}

fn search_points(
    x: &[FeatureVector],
    y: &[Label],
    schema: &FeatureSchema,
    points: Vec<HyperParams>,
    k: usize,
    seed: u64,
) -> Result<SearchOutcome, ForestError> {
    if points.is_empty() {
        return Err(ForestError::EmptyGrid);
    }
    let scores: Vec<f64> = points
        .iter()
        .map(|params| cross_validate(x, y, params, k, seed))
        .collect::<Result<_, _>>()?;
    let best = best_candidate_index(&scores).expect("points are non-empty");
    let best_params = points[best].clone();
    let best_cv_accuracy = scores[best];
    let mut model = train_forest(x, y, schema, &best_params, seed)?;
    model.training_meta.cv_accuracy = Some(best_cv_accuracy);
    Ok(SearchOutcome {
        best_params,
        best_cv_accuracy,
        model,
        evaluated: points.into_iter().zip(scores).collect(),
    })
}

/// Renders a tree with feature names, thresholds, class counts, and gini
/// impurity per node, indented by depth.
pub fn export_tree(tree: &TreeNode, schema: &FeatureSchema) -> String {
    let names = schema.feature_names();
    let mut out = String::new();
    render_node(tree, &names, 0, &mut out);
    out
}

fn render_node(node: &TreeNode, names: &[String], depth: u32, out: &mut String) {
    let indent = "  ".repeat(depth as usize);
    let counts = node.class_counts();
    let impurity = format_impurity(gini_impurity(counts));
    match node {
        TreeNode::Leaf { prediction, .. } => {
            out.push_str(&format!(
                "{indent}depth={depth} leaf -> {prediction} [gini={impurity}, counts=[benign={}, malicious={}]]\n",
                counts.benign, counts.malicious
            ));
        }
        TreeNode::Split { feature_index, threshold, left, right, .. } => {
            let name =
                names.get(*feature_index).map(String::as_str).unwrap_or("<unknown feature>");
            out.push_str(&format!(
                "{indent}depth={depth} split [{name}] <= {threshold} [gini={impurity}, counts=[benign={}, malicious={}]]\n",
                counts.benign, counts.malicious
            ));
            render_node(left, names, depth + 1, out);
            render_node(right, names, depth + 1, out);
        }
    }
}

/// Three decimals with trailing zeros trimmed down to one ("0.495", "0.0").
fn format_impurity(v: f64) -> String {
    let mut s = format!("{v:.3}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}
