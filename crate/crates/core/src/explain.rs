//! Permutation importance over (center category, neighbor multiset) feature blocks.
//!
//! Each sample is summarized by one block per relationship: the mean hidden
//! embedding of nodes whose category is the center and whose neighbor
//! categories contain the multiset. A logistic probe is fit on these vectors and
//! each block is scored by the accuracy lost when it is shuffled across samples.

use std::cmp::Ordering;
use std::ops::Range;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CategoryId, MultiCategoryPointSet, PlaceTypeId};
use crate::error::{Error, Result};
use crate::graph::KnnGraph;
use crate::network::{argmax, model_forward, softmax, ModelParams, ParamKey};
use crate::rng::rng_for;
use crate::training::TrainedEnsemble;

pub const DEFAULT_MAX_SUBSET: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipFeature {
    pub center: CategoryId,
    /// Sorted ascending, length 1..=max_subset.
    pub neighbors: Vec<CategoryId>,
    pub block: Range<usize>,
}

impl RelationshipFeature {
    fn key_cmp(&self, other: &Self) -> Ordering {
        (self.center, self.neighbors.len(), &self.neighbors).cmp(&(
            other.center,
            other.neighbors.len(),
            &other.neighbors,
        ))
    }

    pub fn label(&self, category_names: &[String]) -> (String, String) {
        let name = |c: CategoryId| category_names.get(c.0).cloned().unwrap_or_else(|| c.0.to_string());
        let neighbors: Vec<String> = self.neighbors.iter().map(|&c| name(c)).collect();
        (name(self.center), neighbors.join("+"))
    }
}

/// Multisets over `0..num_categories` of size 1..=max_subset, by size then lexicographically.
fn multisets(num_categories: usize, max_subset: usize) -> Vec<Vec<CategoryId>> {
    fn extend(start: usize, n: usize, size: usize, cur: &mut Vec<CategoryId>, out: &mut Vec<Vec<CategoryId>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for c in start..n {
            cur.push(CategoryId(c));
            extend(c, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for size in 1..=max_subset {
        extend(0, num_categories, size, &mut Vec::new(), &mut out);
    }
    out
}

/// Block layout for a vocabulary: centers in category order, then multisets by size and value.
pub fn feature_layout(num_categories: usize, max_subset: usize, block_dim: usize) -> Vec<RelationshipFeature> {
    let sets = multisets(num_categories, max_subset);
    let mut out = Vec::with_capacity(num_categories * sets.len());
    for c in 0..num_categories {
        for m in &sets {
            let start = out.len() * block_dim;
            out.push(RelationshipFeature {
                center: CategoryId(c),
                neighbors: m.clone(),
                block: start..start + block_dim,
            });
        }
    }
    out
}

fn contains_multiset(counts: &[usize], m: &[CategoryId]) -> bool {
    let mut need = vec![0usize; counts.len()];
    for c in m {
        need[c.0] += 1;
    }
    need.iter().zip(counts).all(|(n, have)| n <= have)
}

/// Concatenated block means of the layer-`layer_index` embeddings (0 = embedded input).
pub fn relationship_features(
    set: &MultiCategoryPointSet,
    graph: &KnnGraph,
    params: &ModelParams,
    key: impl Into<ParamKey>,
    layer_index: usize,
    max_subset: usize,
) -> Result<(Vec<f64>, Vec<RelationshipFeature>)> {
    if layer_index > params.num_layers() {
        return Err(Error::Config(format!(
            "layer {layer_index} out of range 0..={}",
            params.num_layers()
        )));
    }
    if max_subset == 0 {
        return Err(Error::Config("max_subset must be at least 1".into()));
    }
    let trace = model_forward(set, graph, params, key)?;
    let h = &trace.hidden[layer_index];
    let ncat = params.num_categories();
    let dim = h.cols();
    let layout = feature_layout(ncat, max_subset, dim);
    let per_center = layout.len() / ncat;
    let mut sums = vec![0.0; layout.len() * dim];
    let mut counts = vec![0usize; layout.len()];
    for s in 0..set.len() {
        let nbrs = graph.neighbors(s);
        if nbrs.is_empty() {
            continue;
        }
        let mut cat_counts = vec![0usize; ncat];
        for &u in nbrs {
            cat_counts[trace.categories[u].0] += 1;
        }
        let center = trace.categories[s].0;
        for (i, f) in layout[center * per_center..(center + 1) * per_center].iter().enumerate() {
            if contains_multiset(&cat_counts, &f.neighbors) {
                let b = center * per_center + i;
                counts[b] += 1;
                for (acc, v) in sums[f.block.clone()].iter_mut().zip(h.row(s)) {
                    *acc += v;
                }
            }
        }
    }
    for (f, &n) in layout.iter().zip(&counts) {
        if n > 0 {
            sums[f.block.clone()].iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    Ok((sums, layout))
}

/// Multinomial logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticProbe {
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 0.5,
            l2: 1e-3,
        }
    }
}

impl LogisticProbe {
    /// Full-batch gradient descent from zero weights; deterministic.
    pub fn fit(x: &[Vec<f64>], y: &[usize], num_classes: usize, cfg: &ProbeConfig) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Config("probe needs at least one training sample".into()));
        }
        if x.len() != y.len() {
            return Err(Error::Shape("probe features and labels differ in length".into()));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("probe feature rows differ in length".into()));
        }
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in x {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        // zero-variance columns standardize to 0 rather than dividing by zero
        scale.iter_mut().for_each(|s| *s = if *s > 1e-24 { 1.0 / s.sqrt() } else { 0.0 });
        let mut probe = Self {
            mean,
            scale,
            weights: vec![vec![0.0; d]; num_classes],
            bias: vec![0.0; num_classes],
        };
        let z: Vec<Vec<f64>> = x.iter().map(|r| probe.standardize(r)).collect();
        for _ in 0..cfg.iterations {
            let mut gw = vec![vec![0.0; d]; num_classes];
            let mut gb = vec![0.0; num_classes];
            for (zi, &yi) in z.iter().zip(y) {
                let mut p = softmax(&probe.logits_std(zi));
                p[yi] -= 1.0;
                for (k, pk) in p.iter().enumerate() {
                    gb[k] += pk / n;
                    for (g, v) in gw[k].iter_mut().zip(zi) {
                        *g += pk * v / n;
                    }
                }
            }
            for k in 0..num_classes {
                probe.bias[k] -= cfg.learning_rate * gb[k];
                for (w, g) in probe.weights[k].iter_mut().zip(&gw[k]) {
                    *w -= cfg.learning_rate * (g + cfg.l2 * *w);
                }
            }
        }
        Ok(probe)
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }

    fn logits_std(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(z).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits_std(&self.standardize(x)))
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let correct = x.iter().zip(y).filter(|(r, &t)| self.predict(r) == t).count();
        correct as f64 / x.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: RelationshipFeature,
    /// Baseline accuracy minus mean shuffled accuracy.
    pub importance: f64,
    /// Population standard deviation of the shuffled accuracies.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_accuracy: f64,
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceReport {
    pub fn top(&self) -> Option<&ImportanceEntry> {
        self.entries.first()
    }

    pub fn to_csv(&self, category_names: &[String]) -> String {
        let mut out = String::from("rank,center,neighbors,importance,std\n");
        for (i, e) in self.entries.iter().enumerate() {
            let (center, neighbors) = e.feature.label(category_names);
            out.push_str(&format!("{},{center},{neighbors},{},{}\n", i + 1, e.importance, e.std));
        }
        out
    }
}

/// Shuffles each block across the evaluation rows `repeats` times and records
/// the probe's accuracy drop. Entries are sorted by importance, descending, then
/// by feature key.
pub fn permutation_importance(
    probe: &LogisticProbe,
    features: &[RelationshipFeature],
    x: &[Vec<f64>],
    y: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    if x.is_empty() {
        return Err(Error::Config("cannot explain an empty split".into()));
    }
    let baseline = probe.accuracy(x, y);
    let mut entries = Vec::with_capacity(features.len());
    for (fi, f) in features.iter().enumerate() {
        let mut accs = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let mut rng = rng_for(seed, &[fi as u64, r as u64]);
            let mut perm: Vec<usize> = (0..x.len()).collect();
            perm.shuffle(&mut rng);
            let shuffled: Vec<Vec<f64>> = x
                .iter()
                .zip(&perm)
                .map(|(row, &src)| {
                    let mut row = row.clone();
                    row[f.block.clone()].copy_from_slice(&x[src][f.block.clone()]);
                    row
                })
                .collect();
            accs.push(probe.accuracy(&shuffled, y));
        }
        let mean = accs.iter().sum::<f64>() / repeats as f64;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / repeats as f64;
        entries.push(ImportanceEntry {
            feature: f.clone(),
            importance: baseline - mean,
            std: var.sqrt(),
        });
    }
    entries.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then_with(|| a.feature.key_cmp(&b.feature))
    });
    Ok(ImportanceReport {
        baseline_accuracy: baseline,
        entries,
    })
}

/// Which samples and members an explanation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    PlaceType(PlaceTypeId),
    /// Every sample, each through its routed member.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    /// Hidden layer to read (0 = embedded input); `None` means the last layer.
    pub layer: Option<usize>,
    pub max_subset: usize,
    pub repeats: usize,
    pub seed: u64,
    pub probe: ProbeConfig,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            layer: None,
            max_subset: DEFAULT_MAX_SUBSET,
            repeats: 10,
            seed: 0,
            probe: ProbeConfig::default(),
        }
    }
}

fn in_scope(scope: Scope, samples: &[MultiCategoryPointSet]) -> Vec<&MultiCategoryPointSet> {
    samples
        .iter()
        .filter(|s| match scope {
            Scope::PlaceType(pt) => s.place_type == pt,
            Scope::Global => true,
        })
        .collect()
}

fn extract(
    ensemble: &TrainedEnsemble,
    samples: &[&MultiCategoryPointSet],
    layer: usize,
    max_subset: usize,
) -> Result<(Vec<Vec<f64>>, Vec<usize>, Vec<RelationshipFeature>)> {
    let rows: Vec<(Vec<f64>, Vec<RelationshipFeature>)> = samples
        .par_iter()
        .map(|s| {
            let (key, member) = ensemble.route(s.place_type).ok_or_else(|| {
                Error::UnknownKey(format!("no member for place-type {}", s.place_type.0))
            })?;
            let graph = ensemble.config.build_graph(s)?;
            relationship_features(s, &graph, member, key, layer, max_subset)
        })
        .collect::<Result<_>>()?;
    let layout = rows.first().map(|r| r.1.clone()).unwrap_or_default();
    let labels = samples.iter().map(|s| s.label.0).collect();
    Ok((rows.into_iter().map(|r| r.0).collect(), labels, layout))
}

/// Fits the probe on `train` and scores blocks on `eval`, both restricted to `scope`.
pub fn explain_ensemble(
    ensemble: &TrainedEnsemble,
    train: &[MultiCategoryPointSet],
    eval: &[MultiCategoryPointSet],
    scope: Scope,
    config: &ExplainConfig,
) -> Result<ImportanceReport> {
    if config.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let layer = config.layer.unwrap_or(ensemble.model_config.num_layers);
    let train = in_scope(scope, train);
    let eval = in_scope(scope, eval);
    if train.is_empty() || eval.is_empty() {
        return Err(Error::Config("explanation scope selects no samples".into()));
    }
    let (xt, yt, layout) = extract(ensemble, &train, layer, config.max_subset)?;
    let (xe, ye, _) = extract(ensemble, &eval, layer, config.max_subset)?;
    let probe = LogisticProbe::fit(&xt, &yt, ensemble.model_config.num_classes, &config.probe)?;
    permutation_importance(&probe, &layout, &xe, &ye, config.repeats, config.seed)
}
