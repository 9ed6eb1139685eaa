//! Training strategies over place-types, ensemble routing, and evaluation.
//!
//! * `Osfa` trains one model with a single shared weight entry on every sample.
//! * `PlaceType` trains one member per place-type on that place-type only.
//! * `Wdlr` trains one member per place-type on every sample within the
//!   distance threshold, scaling each sample's step by `1 / distance`.
//! * `Sda` pre-trains a shared model, then per place-type freezes the first
//!   `k` message-passing layers and fine-tunes the rest with a representation
//!   alignment penalty.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClassId, Dataset, MultiCategoryPointSet, PlaceTypeDistanceMatrix, PlaceTypeId};
use crate::datagen::{augment, AugmentConfig};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, KnnGraph};
use crate::metrics::EvalReport;
use crate::network::{
    apply_sgd, loss_and_gradients_from_trace, model_forward, ModelConfig, ModelParams, ParamKey,
    DEFAULT_LEAKY_SLOPE,
};
use crate::rng::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Osfa,
    PlaceType,
    Wdlr,
    Sda,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::Osfa => "osfa",
            StrategyKind::PlaceType => "place-type",
            StrategyKind::Wdlr => "wdlr",
            StrategyKind::Sda => "sda",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "osfa" => Ok(StrategyKind::Osfa),
            "place-type" | "place_type" => Ok(StrategyKind::PlaceType),
            "wdlr" => Ok(StrategyKind::Wdlr),
            "sda" => Ok(StrategyKind::Sda),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    WeightedAverage,
    MajorityVote,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted_average" => Ok(Aggregation::WeightedAverage),
            "majority_vote" => Ok(Aggregation::MajorityVote),
            other => Err(Error::Config(format!("unknown aggregation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub base_lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub k_neighbors: usize,
    pub cutoff: Option<f64>,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub leaky_slope: f64,
    /// Overrides the dataset's distance threshold for sample selection.
    pub alpha_threshold: Option<f64>,
    pub sda_frozen_layers: usize,
    pub sda_lambda: f64,
    /// Source samples drawn per epoch for the alignment penalty.
    pub sda_source_batch: usize,
    /// Diagnostic: also freeze the classifier head during fine-tuning.
    pub sda_freeze_classifier: bool,
    /// Train only this member instead of one per place-type.
    pub target_place_type: Option<PlaceTypeId>,
    pub aggregation: Aggregation,
    /// Keep the epoch with the best validation accuracy.
    pub select_on_validation: bool,
    pub augment: Option<AugmentConfig>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::PlaceType,
            base_lr: 1e-3,
            epochs: 50,
            seed: 0,
            k_neighbors: 10,
            cutoff: None,
            num_layers: 4,
            hidden_dim: 32,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            alpha_threshold: None,
            sda_frozen_layers: 0,
            sda_lambda: 1.0,
            sda_source_batch: 8,
            sda_freeze_classifier: false,
            target_place_type: None,
            aggregation: Aggregation::WeightedAverage,
            select_on_validation: true,
            augment: None,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::Config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        if self.sda_frozen_layers > self.num_layers {
            return Err(Error::Config(format!(
                "{} frozen layers exceed the {} message-passing layers",
                self.sda_frozen_layers, self.num_layers
            )));
        }
        if !(self.sda_lambda >= 0.0) {
            return Err(Error::Config("sda_lambda must be non-negative".into()));
        }
        if let Some(t) = self.alpha_threshold {
            if !(t > 0.0) {
                return Err(Error::Config("alpha threshold must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn model_config(&self, dataset: &Dataset) -> ModelConfig {
        ModelConfig {
            num_categories: dataset.num_categories(),
            num_classes: dataset.num_classes().max(2),
            hidden_dim: self.hidden_dim,
            num_layers: self.num_layers,
            leaky_slope: self.leaky_slope,
        }
    }

    pub fn build_graph(&self, set: &MultiCategoryPointSet) -> Result<KnnGraph> {
        build_knn_graph(&set.points, self.k_neighbors, self.cutoff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub member: String,
    pub mean_loss: f64,
    pub val_accuracy: Option<f64>,
    /// Distinct per-sample learning rates used in this epoch, descending.
    pub learning_rates: Vec<f64>,
}

impl EpochLog {
    pub fn csv_header() -> &'static str {
        "epoch,member,mean_loss,val_accuracy,learning_rates"
    }

    pub fn csv_row(&self) -> String {
        let rates: Vec<String> = self.learning_rates.iter().map(f64::to_string).collect();
        format!(
            "{},{},{},{},{}",
            self.epoch,
            self.member,
            self.mean_loss,
            self.val_accuracy.map(|v| v.to_string()).unwrap_or_default(),
            rates.join(";")
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEnsemble {
    pub members: BTreeMap<ParamKey, ModelParams>,
    pub config: StrategyConfig,
    pub model_config: ModelConfig,
    pub training_log: Vec<EpochLog>,
}

impl TrainedEnsemble {
    /// The member responsible for `place_type`, with the key its weights live under.
    pub fn route(&self, place_type: PlaceTypeId) -> Option<(ParamKey, &ModelParams)> {
        if let Some(m) = self.members.get(&ParamKey::Shared) {
            return Some((ParamKey::Shared, m));
        }
        let key = ParamKey::PlaceType(place_type);
        self.members.get(&key).map(|m| (key, m))
    }

    pub fn predict(&self, set: &MultiCategoryPointSet) -> Result<(ClassId, Vec<f64>)> {
        let graph = self.config.build_graph(set)?;
        aggregate_predictions(self, set, &graph)
    }
}

/// Train / validation / test partition of a dataset's samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSplit {
    pub train: Vec<MultiCategoryPointSet>,
    pub val: Vec<MultiCategoryPointSet>,
    pub test: Vec<MultiCategoryPointSet>,
}

fn largest_remainder(n: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    let mut counts: Vec<usize> = weights.iter().map(|w| n * w / total).collect();
    let mut rema: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (n * w % total, i))
        .collect();
    // larger remainder first, earlier split on ties
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = n - counts.iter().sum::<usize>();
    for (_, i) in rema {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Stratified 60/20/20 split per (place-type, label) stratum.
pub fn split_dataset(dataset: &Dataset, seed: u64) -> DataSplit {
    let mut strata: BTreeMap<(PlaceTypeId, ClassId), Vec<&MultiCategoryPointSet>> = BTreeMap::new();
    for s in &dataset.samples {
        strata.entry((s.place_type, s.label)).or_default().push(s);
    }
    let mut split = DataSplit::default();
    for ((pt, label), mut members) in strata {
        members.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        let mut rng = rng_for(seed, &[pt.0 as u64, label.0 as u64]);
        members.shuffle(&mut rng);
        let counts = largest_remainder(members.len(), &[3, 1, 1]);
        if counts.contains(&0) {
            warn!(
                "stratum ({}, class {}) has {} samples; split sizes {:?}",
                dataset.place_type_names[pt.0],
                label.0,
                members.len(),
                counts
            );
        }
        let mut it = members.into_iter().cloned();
        split.train.extend(it.by_ref().take(counts[0]));
        split.val.extend(it.by_ref().take(counts[1]));
        split.test.extend(it);
    }
    split
}

/// `base_lr / distance`.
pub fn effective_learning_rate(base_lr: f64, distance: f64) -> Result<f64> {
    if !(distance >= 1.0) {
        return Err(Error::Config(format!("place-type distance must be ≥ 1, got {distance}")));
    }
    if !(base_lr > 0.0) {
        return Err(Error::Config(format!("base learning rate must be positive, got {base_lr}")));
    }
    Ok(base_lr / distance)
}

/// Every sample whose place-type lies within the matrix threshold of `target`,
/// with that distance.
pub fn select_training_samples<'a>(
    samples: &'a [MultiCategoryPointSet],
    target: PlaceTypeId,
    matrix: &PlaceTypeDistanceMatrix,
) -> Vec<(&'a MultiCategoryPointSet, f64)> {
    samples
        .iter()
        .filter_map(|s| {
            let d = matrix.distance(target, s.place_type);
            (d <= matrix.threshold()).then_some((s, d))
        })
        .collect()
}

struct Prepared {
    set: MultiCategoryPointSet,
    graph: KnnGraph,
}

fn prepare(samples: &[MultiCategoryPointSet], config: &StrategyConfig) -> Result<Vec<Prepared>> {
    samples
        .par_iter()
        .map(|s| {
            Ok(Prepared {
                graph: config.build_graph(s)?,
                set: s.clone(),
            })
        })
        .collect()
}

fn prepare_train(samples: &[MultiCategoryPointSet], config: &StrategyConfig) -> Result<Vec<Prepared>> {
    match &config.augment {
        None => prepare(samples, config),
        Some(aug) => {
            let mut expanded = Vec::new();
            for s in samples {
                let seed = derive_seed(config.seed, &[0xA6, fnv(&s.sample_id)]);
                expanded.extend(augment(s, aug, seed)?);
            }
            prepare(&expanded, config)
        }
    }
}

fn fnv(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// RNG stream for a member. The shared key draws from place-type 0's stream so a
/// single-place-type dataset trains identically under OSFA and per-place-type.
fn member_stream(key: ParamKey) -> u64 {
    match key {
        ParamKey::Shared => 0,
        ParamKey::PlaceType(p) => p.0 as u64,
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Freeze {
    layers: usize,
    classifier: bool,
}

struct Alignment<'a> {
    lambda: f64,
    frozen_layers: usize,
    batch: usize,
    reference: &'a ModelParams,
    sources: Vec<&'a Prepared>,
}

struct MemberJob<'a> {
    name: String,
    key: ParamKey,
    init: ModelParams,
    train: Vec<(&'a Prepared, f64)>,
    val: Vec<&'a Prepared>,
    freeze: Freeze,
    alignment: Option<Alignment<'a>>,
    rng_seed: u64,
}

fn accuracy(params: &ModelParams, key: ParamKey, samples: &[&Prepared]) -> Result<f64> {
    let mut correct = 0;
    for p in samples {
        let t = model_forward(&p.set, &p.graph, params, key)?;
        if t.predicted_class() == p.set.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

fn mean_pooled(reference: &ModelParams, layer: usize, batch: &[&Prepared]) -> Result<Vec<f64>> {
    let mut mean = vec![0.0; reference.hidden_dim()];
    for p in batch {
        let t = model_forward(&p.set, &p.graph, reference, ParamKey::Shared)?;
        for (m, v) in mean.iter_mut().zip(t.pooled_at(layer)) {
            *m += v;
        }
    }
    let n = batch.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

fn run_member(mut job: MemberJob<'_>, epochs: usize, select_on_validation: bool) -> Result<(ModelParams, Vec<EpochLog>)> {
    if job.train.is_empty() {
        return Err(Error::Config(format!("member {} has no training samples", job.name)));
    }
    // canonical order so dataset ordering never leaks into the result
    job.train.sort_by(|a, b| a.0.set.sample_id.cmp(&b.0.set.sample_id));
    let mut rng = rng_for(job.rng_seed, &[1]);
    let mut source_rng = rng_for(job.rng_seed, &[2]);
    let mut params = job.init;
    let mut best: Option<(f64, ModelParams)> = None;
    let mut log = Vec::with_capacity(epochs);
    let mut rates: Vec<f64> = job.train.iter().map(|&(_, lr)| lr).collect();
    rates.sort_by(|a, b| b.total_cmp(a));
    rates.dedup();
    let mut order: Vec<usize> = (0..job.train.len()).collect();

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let source_mean = match &job.alignment {
            Some(a) if a.lambda != 0.0 && !a.sources.is_empty() => {
                let batch: Vec<&Prepared> = a
                    .sources
                    .choose_multiple(&mut source_rng, a.batch.min(a.sources.len()))
                    .copied()
                    .collect();
                Some(mean_pooled(a.reference, a.frozen_layers, &batch)?)
            }
            _ => None,
        };
        let mut total = 0.0;
        for &i in &order {
            let (sample, lr) = job.train[i];
            let diverged = |loss: f64| Error::Diverged {
                member: job.name.clone(),
                epoch,
                loss,
            };
            let trace = model_forward(&sample.set, &sample.graph, &params, job.key)?;
            let (extra, penalty) = match (&source_mean, &job.alignment) {
                (Some(mu), Some(a)) => {
                    let diff: Vec<f64> = trace.pooled.iter().zip(mu).map(|(r, m)| r - m).collect();
                    let penalty = a.lambda * diff.iter().map(|d| d * d).sum::<f64>();
                    let grad: Vec<f64> = diff.iter().map(|d| 2.0 * a.lambda * d).collect();
                    (Some(grad), penalty)
                }
                _ => (None, 0.0),
            };
            let (loss, mut grads) =
                match loss_and_gradients_from_trace(&trace, &sample.graph, &params, sample.set.label, extra.as_deref()) {
                    Ok(v) => v,
                    Err(Error::Numerical(_)) => return Err(diverged(f64::NAN)),
                    Err(e) => return Err(e),
                };
            grads.freeze_layers(job.freeze.layers);
            if job.freeze.classifier {
                grads.freeze_classifier();
            }
            if !grads.is_finite() {
                return Err(diverged(loss));
            }
            apply_sgd(&mut params, &grads, lr)?;
            total += loss + penalty;
        }
        let mean_loss = total / order.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Diverged {
                member: job.name.clone(),
                epoch,
                loss: mean_loss,
            });
        }
        let val_accuracy = if job.val.is_empty() {
            None
        } else {
            Some(accuracy(&params, job.key, &job.val)?)
        };
        if select_on_validation {
            if let Some(acc) = val_accuracy {
                if best.as_ref().map_or(true, |(b, _)| acc > *b) {
                    best = Some((acc, params.clone()));
                }
            }
        }
        info!("member {} epoch {epoch}: loss {mean_loss:.6} val {val_accuracy:?}", job.name);
        log.push(EpochLog {
            epoch,
            member: job.name.clone(),
            mean_loss,
            val_accuracy,
            learning_rates: rates.clone(),
        });
    }
    Ok((best.map_or(params, |(_, p)| p), log))
}

fn run_jobs(jobs: Vec<MemberJob<'_>>, config: &StrategyConfig) -> Result<(BTreeMap<ParamKey, ModelParams>, Vec<EpochLog>)> {
    let keys: Vec<ParamKey> = jobs.iter().map(|j| j.key).collect();
    let results: Vec<Result<(ModelParams, Vec<EpochLog>)>> = jobs
        .into_par_iter()
        .map(|j| run_member(j, config.epochs, config.select_on_validation))
        .collect();
    let mut members = BTreeMap::new();
    let mut log = Vec::new();
    for (key, r) in keys.into_iter().zip(results) {
        let (params, l) = r?;
        members.insert(key, params);
        log.extend(l);
    }
    Ok((members, log))
}

fn member_name(dataset: &Dataset, key: ParamKey) -> String {
    match key {
        ParamKey::Shared => "all".into(),
        ParamKey::PlaceType(p) => dataset
            .place_type_names
            .get(p.0)
            .cloned()
            .unwrap_or_else(|| key.to_string()),
    }
}

fn init_member(config: &StrategyConfig, model: &ModelConfig, key: ParamKey) -> (ModelParams, u64) {
    let seed = derive_seed(config.seed, &[member_stream(key)]);
    let mut rng = rng_for(seed, &[0]);
    (ModelParams::init(model, &[key], &mut rng), seed)
}

/// Place-types that need a member: those present in the dataset, or the configured target.
fn target_place_types(dataset: &Dataset, config: &StrategyConfig) -> Vec<PlaceTypeId> {
    if let Some(t) = config.target_place_type {
        return vec![t];
    }
    let mut pts: Vec<PlaceTypeId> = dataset.samples.iter().map(|s| s.place_type).collect();
    pts.sort();
    pts.dedup();
    pts
}

fn check_split(split: &DataSplit) -> Result<()> {
    if split.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    Ok(())
}

pub fn train_osfa(dataset: &Dataset, split: &DataSplit, config: &StrategyConfig) -> Result<TrainedEnsemble> {
    config.validate()?;
    check_split(split)?;
    let model = config.model_config(dataset);
    let train = prepare_train(&split.train, config)?;
    let val = prepare(&split.val, config)?;
    let (init, rng_seed) = init_member(config, &model, ParamKey::Shared);
    let job = MemberJob {
        name: member_name(dataset, ParamKey::Shared),
        key: ParamKey::Shared,
        init,
        train: train.iter().map(|p| (p, config.base_lr)).collect(),
        val: val.iter().collect(),
        freeze: Freeze::default(),
        alignment: None,
        rng_seed,
    };
    let (members, training_log) = run_jobs(vec![job], config)?;
    Ok(TrainedEnsemble {
        members,
        config: config.clone(),
        model_config: model,
        training_log,
    })
}

fn train_by_distance(
    dataset: &Dataset,
    split: &DataSplit,
    config: &StrategyConfig,
    matrix: &PlaceTypeDistanceMatrix,
) -> Result<TrainedEnsemble> {
    config.validate()?;
    check_split(split)?;
    let model = config.model_config(dataset);
    let train = prepare_train(&split.train, config)?;
    let val = prepare(&split.val, config)?;
    let mut jobs = Vec::new();
    for pt in target_place_types(dataset, config) {
        let key = ParamKey::PlaceType(pt);
        let selected: Vec<(&Prepared, f64)> = train
            .iter()
            .filter_map(|p| {
                let d = matrix.distance(pt, p.set.place_type);
                (d <= matrix.threshold()).then_some((p, d))
            })
            .map(|(p, d)| effective_learning_rate(config.base_lr, d).map(|lr| (p, lr)))
            .collect::<Result<_>>()?;
        if selected.is_empty() {
            return Err(Error::Config(format!(
                "place-type `{}` has no training samples",
                member_name(dataset, key)
            )));
        }
        let (init, rng_seed) = init_member(config, &model, key);
        jobs.push(MemberJob {
            name: member_name(dataset, key),
            key,
            init,
            train: selected,
            val: val.iter().filter(|p| p.set.place_type == pt).collect(),
            freeze: Freeze::default(),
            alignment: None,
            rng_seed,
        });
    }
    let (members, training_log) = run_jobs(jobs, config)?;
    Ok(TrainedEnsemble {
        members,
        config: config.clone(),
        model_config: model,
        training_log,
    })
}

pub fn train_place_type(dataset: &Dataset, split: &DataSplit, config: &StrategyConfig) -> Result<TrainedEnsemble> {
    let own_only = PlaceTypeDistanceMatrix::uniform(dataset.num_place_types(), 2.0, 1.0)?;
    train_by_distance(dataset, split, config, &own_only)
}

pub fn train_wdlr(dataset: &Dataset, split: &DataSplit, config: &StrategyConfig) -> Result<TrainedEnsemble> {
    let matrix = match config.alpha_threshold {
        Some(t) => dataset.distance_matrix.with_threshold(t)?,
        None => dataset.distance_matrix.clone(),
    };
    train_by_distance(dataset, split, config, &matrix)
}

/// Shared model pre-trained on every place-type (phase one of SDA).
#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
}

pub fn pretrain_shared(dataset: &Dataset, split: &DataSplit, config: &StrategyConfig) -> Result<Pretrained> {
    let mut cfg = config.clone();
    cfg.kind = StrategyKind::Osfa;
    let osfa = train_osfa(dataset, split, &cfg)?;
    let params = osfa.members.into_values().next().expect("one member");
    Ok(Pretrained {
        params,
        log: osfa
            .training_log
            .into_iter()
            .map(|mut l| {
                l.member = format!("pretrain:{}", l.member);
                l
            })
            .collect(),
    })
}

/// Phase two of SDA: per place-type fine-tuning of a copy of `pretrained`.
pub fn fine_tune_sda(
    pretrained: &Pretrained,
    dataset: &Dataset,
    split: &DataSplit,
    config: &StrategyConfig,
) -> Result<TrainedEnsemble> {
    config.validate()?;
    check_split(split)?;
    let model = config.model_config(dataset);
    let train = prepare_train(&split.train, config)?;
    let val = prepare(&split.val, config)?;
    let mut jobs = Vec::new();
    for pt in target_place_types(dataset, config) {
        let key = ParamKey::PlaceType(pt);
        let target: Vec<(&Prepared, f64)> = train
            .iter()
            .filter(|p| p.set.place_type == pt)
            .map(|p| (p, config.base_lr))
            .collect();
        if target.is_empty() {
            return Err(Error::Config(format!(
                "place-type `{}` has no training samples",
                member_name(dataset, key)
            )));
        }
        let mut init = pretrained.params.clone();
        init.rekey(ParamKey::Shared, key)?;
        let sources: Vec<&Prepared> = train.iter().filter(|p| p.set.place_type != pt).collect();
        jobs.push(MemberJob {
            name: member_name(dataset, key),
            key,
            init,
            train: target,
            val: val.iter().filter(|p| p.set.place_type == pt).collect(),
            freeze: Freeze {
                layers: config.sda_frozen_layers,
                classifier: config.sda_freeze_classifier,
            },
            alignment: Some(Alignment {
                lambda: config.sda_lambda,
                frozen_layers: config.sda_frozen_layers,
                batch: config.sda_source_batch.max(1),
                reference: &pretrained.params,
                sources,
            }),
            rng_seed: derive_seed(config.seed, &[0x5DA, member_stream(key)]),
        });
    }
    let (members, log) = run_jobs(jobs, config)?;
    let mut training_log = pretrained.log.clone();
    training_log.extend(log);
    Ok(TrainedEnsemble {
        members,
        config: config.clone(),
        model_config: model,
        training_log,
    })
}

pub fn train_sda(dataset: &Dataset, split: &DataSplit, config: &StrategyConfig) -> Result<TrainedEnsemble> {
    config.validate()?;
    let pretrained = pretrain_shared(dataset, split, config)?;
    fine_tune_sda(&pretrained, dataset, split, config)
}

/// Dispatches on `config.kind`.
pub fn train(dataset: &Dataset, split: &DataSplit, config: &StrategyConfig) -> Result<TrainedEnsemble> {
    match config.kind {
        StrategyKind::Osfa => train_osfa(dataset, split, config),
        StrategyKind::PlaceType => train_place_type(dataset, split, config),
        StrategyKind::Wdlr => train_wdlr(dataset, split, config),
        StrategyKind::Sda => train_sda(dataset, split, config),
    }
}

/// Routed prediction for one sample: only the member matching its place-type is read.
pub fn aggregate_predictions(
    ensemble: &TrainedEnsemble,
    sample: &MultiCategoryPointSet,
    graph: &KnnGraph,
) -> Result<(ClassId, Vec<f64>)> {
    let (key, member) = ensemble.route(sample.place_type).ok_or_else(|| {
        Error::UnknownKey(format!("no member for place-type {}", sample.place_type.0))
    })?;
    let t = model_forward(sample, graph, member, key)?;
    Ok((t.predicted_class(), t.probabilities))
}

/// Combines per-sample class probabilities into one decision.
pub fn aggregate_group(probabilities: &[Vec<f64>], mode: Aggregation) -> Result<ClassId> {
    let k = probabilities
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Config("nothing to aggregate".into()))?;
    match mode {
        Aggregation::WeightedAverage => {
            let mut mean = vec![0.0; k];
            for p in probabilities {
                for (m, v) in mean.iter_mut().zip(p) {
                    *m += v;
                }
            }
            let n = probabilities.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            Ok(ClassId(crate::network::argmax(&mean)))
        }
        Aggregation::MajorityVote => {
            let mut votes = vec![0usize; k];
            for p in probabilities {
                votes[crate::network::argmax(p)] += 1;
            }
            let best = votes.iter().copied().max().unwrap_or(0);
            Ok(ClassId(votes.iter().position(|&v| v == best).unwrap_or(0)))
        }
    }
}

/// Support-weighted metrics over routed per-sample predictions.
pub fn evaluate(ensemble: &TrainedEnsemble, samples: &[MultiCategoryPointSet]) -> Result<EvalReport> {
    evaluate_grouped(ensemble, samples, None)
}

/// Group key for dataset-level aggregation: the sample id up to its first `:`.
pub fn group_key(sample_id: &str) -> &str {
    sample_id.split(':').next().unwrap_or(sample_id)
}

/// Like [`evaluate`], but when `aggregation` is given, samples sharing a
/// [`group_key`] are combined into one prediction first.
pub fn evaluate_grouped(
    ensemble: &TrainedEnsemble,
    samples: &[MultiCategoryPointSet],
    aggregation: Option<Aggregation>,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Config("cannot evaluate an empty split".into()));
    }
    let predictions: Vec<(ClassId, Vec<f64>)> = samples
        .par_iter()
        .map(|s| ensemble.predict(s))
        .collect::<Result<_>>()?;
    let num_classes = ensemble.model_config.num_classes;
    let (truth, predicted): (Vec<usize>, Vec<usize>) = match aggregation {
        None => samples
            .iter()
            .zip(&predictions)
            .map(|(s, (c, _))| (s.label.0, c.0))
            .unzip(),
        Some(mode) => {
            let mut groups: BTreeMap<&str, (ClassId, Vec<Vec<f64>>)> = BTreeMap::new();
            for (s, (_, p)) in samples.iter().zip(&predictions) {
                let entry = groups
                    .entry(group_key(&s.sample_id))
                    .or_insert_with(|| (s.label, Vec::new()));
                if entry.0 != s.label {
                    return Err(Error::data(Some(&s.sample_id), "group mixes class labels"));
                }
                entry.1.push(p.clone());
            }
            let mut truth = Vec::new();
            let mut pred = Vec::new();
            for (_, (label, probs)) in groups {
                truth.push(label.0);
                pred.push(aggregate_group(&probs, mode)?.0);
            }
            (truth, pred)
        }
    };
    EvalReport::from_predictions(&truth, &predicted, num_classes)
}

/// Per-epoch log as delimiter-separated text.
pub fn format_training_log(log: &[EpochLog]) -> String {
    let mut out = String::from(EpochLog::csv_header());
    out.push('\n');
    for l in log {
        out.push_str(&l.csv_row());
        out.push('\n');
    }
    out
}
