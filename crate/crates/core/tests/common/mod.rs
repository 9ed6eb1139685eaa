#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spatial_lucid::datagen::{generate_benchmark, BenchmarkConfig};
use spatial_lucid::graph::{build_knn_graph, KnnGraph};
use spatial_lucid::network::{
    apply_sgd, backward, cross_entropy, loss_and_gradients, model_forward, Gradients, ModelConfig, ModelParams,
    ParamKey,
};
use spatial_lucid::rng::{derive_seed, rng_for};
use spatial_lucid::training::{split_dataset, DataSplit, Pretrained, StrategyConfig, StrategyKind};
use spatial_lucid::{ClassId, Dataset, MultiCategoryPointSet, PlaceTypeId, SpatialPoint};

/// Training setup under which the fig1 benchmark is learnable.
pub fn fig1_config(kind: StrategyKind, seed: u64) -> StrategyConfig {
    StrategyConfig {
        kind,
        base_lr: 5e-3,
        epochs: 50,
        seed,
        k_neighbors: 10,
        cutoff: Some(2.0),
        num_layers: 2,
        hidden_dim: 32,
        ..StrategyConfig::default()
    }
}

pub fn fig1(samples_per_cell: usize, seed: u64) -> (Dataset, DataSplit) {
    let ds = generate_benchmark(&BenchmarkConfig::fig1(samples_per_cell), seed).unwrap();
    let split = split_dataset(&ds, seed);
    (ds, split)
}

pub fn random_set(rng: &mut ChaCha8Rng, n: usize, ncat: usize, pt: usize, label: usize) -> MultiCategoryPointSet {
    let points = (0..n)
        .map(|_| SpatialPoint::new(rng.gen_range(0..ncat), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
        .collect();
    MultiCategoryPointSet::new(format!("r{}", rng.gen::<u32>()), PlaceTypeId(pt), ClassId(label), points).unwrap()
}

/// One gradient-check problem: cross-entropy plus an optional
/// `lambda * |pooled - mu|^2` alignment penalty.
pub struct Instance {
    pub set: MultiCategoryPointSet,
    pub graph: KnnGraph,
    pub params: ModelParams,
    pub key: ParamKey,
    pub label: ClassId,
    pub penalty: Option<(f64, Vec<f64>)>,
}

impl Instance {
    pub fn objective(&self, params: &ModelParams) -> f64 {
        let t = model_forward(&self.set, &self.graph, params, self.key).unwrap();
        let mut loss = cross_entropy(&t.logits, self.label);
        if let Some((lambda, mu)) = &self.penalty {
            loss += lambda * t.pooled.iter().zip(mu).map(|(p, m)| (p - m) * (p - m)).sum::<f64>();
        }
        loss
    }

    pub fn gradients(&self) -> Gradients {
        let t = model_forward(&self.set, &self.graph, &self.params, self.key).unwrap();
        let mut d_logits = t.probabilities.clone();
        d_logits[self.label.0] -= 1.0;
        let extra: Option<Vec<f64>> = self
            .penalty
            .as_ref()
            .map(|(lambda, mu)| t.pooled.iter().zip(mu).map(|(p, m)| 2.0 * lambda * (p - m)).collect());
        backward(&t, &self.graph, &self.params, &d_logits, extra.as_deref()).unwrap()
    }

    /// Distance of the current point from any activation or max-pool kink.
    pub fn kink_margin(&self) -> f64 {
        let t = model_forward(&self.set, &self.graph, &self.params, self.key).unwrap();
        let mut margin = f64::INFINITY;
        for pre in &t.preacts {
            for v in pre.as_slice() {
                margin = margin.min(v.abs());
            }
        }
        let last = t.hidden.last().unwrap();
        for c in 0..last.cols() {
            let mut col: Vec<f64> = (0..last.rows()).map(|r| last[(r, c)]).collect();
            col.sort_by(|a, b| b.total_cmp(a));
            if col.len() > 1 {
                margin = margin.min(col[0] - col[1]);
            }
        }
        margin
    }
}

/// Named flat views of every parameter tensor, in a fixed order.
pub fn param_slices(p: &mut ModelParams) -> Vec<(String, &mut [f64])> {
    let mut out: Vec<(String, &mut [f64])> = vec![("embedding".into(), p.embedding.as_mut_slice())];
    for (l, layer) in p.layers.iter_mut().enumerate() {
        for (k, m) in layer.w.iter_mut() {
            out.push((format!("layer{l}.W.{k}"), m.as_mut_slice()));
        }
        for (k, m) in layer.b.iter_mut() {
            out.push((format!("layer{l}.B.{k}"), m.as_mut_slice()));
        }
        out.push((format!("layer{l}.alpha"), layer.alpha.as_mut_slice()));
    }
    out.push(("classifier.W".into(), p.classifier_w.as_mut_slice()));
    out.push(("classifier.b".into(), p.classifier_b.as_mut_slice()));
    out
}

/// Gradient entries keyed like [`param_slices`]; absent tensors are omitted.
pub fn grad_slices(g: &Gradients) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    if let Some(e) = &g.embedding {
        out.push(("embedding".to_string(), e.as_slice().to_vec()));
    }
    for (l, layer) in g.layers.iter().enumerate() {
        for (k, m) in &layer.w {
            out.push((format!("layer{l}.W.{k}"), m.as_slice().to_vec()));
        }
        for (k, m) in &layer.b {
            out.push((format!("layer{l}.B.{k}"), m.as_slice().to_vec()));
        }
        if let Some(a) = &layer.alpha {
            out.push((format!("layer{l}.alpha"), a.as_slice().to_vec()));
        }
    }
    if let Some(w) = &g.classifier_w {
        out.push(("classifier.W".into(), w.as_slice().to_vec()));
    }
    if let Some(b) = &g.classifier_b {
        out.push(("classifier.b".into(), b.clone()));
    }
    out
}

/// Random small instance: n <= 12 nodes, <= 2 layers, dims <= 4. Two parameter
/// keys are present; only one is used, so the other must get zero gradient.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ncat = rng.gen_range(1..=3);
    let n = rng.gen_range(2..=12);
    let cfg = ModelConfig {
        num_categories: ncat,
        num_classes: rng.gen_range(2..=3),
        hidden_dim: rng.gen_range(1..=4),
        num_layers: rng.gen_range(1..=2),
        leaky_slope: if rng.gen_bool(0.5) { 0.01 } else { 0.2 },
    };
    let keys = [ParamKey::PlaceType(PlaceTypeId(0)), ParamKey::PlaceType(PlaceTypeId(1))];
    let key = if rng.gen_bool(0.5) { ParamKey::Shared } else { keys[rng.gen_range(0..2)] };
    let all_keys: Vec<ParamKey> = if key == ParamKey::Shared { vec![ParamKey::Shared] } else { keys.to_vec() };
    let mut params = ModelParams::init(&cfg, &all_keys, &mut rng);
    for (_, s) in param_slices(&mut params) {
        for v in s.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let set = random_set(&mut rng, n, ncat, 0, 0);
    let k = rng.gen_range(1..n.min(5));
    let cutoff = if rng.gen_bool(0.3) { Some(rng.gen_range(2.0..6.0)) } else { None };
    let graph = build_knn_graph(&set.points, k, cutoff).unwrap();
    let label = ClassId(rng.gen_range(0..cfg.num_classes));
    let penalty = rng
        .gen_bool(0.5)
        .then(|| (rng.gen_range(0.1..2.0), (0..cfg.hidden_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()));
    Instance {
        set,
        graph,
        params,
        key,
        label,
        penalty,
    }
}

#[derive(Debug, Default)]
pub struct GradReport {
    pub configs: usize,
    pub skipped_near_kink: usize,
    pub entries: usize,
    pub max_rel_error: f64,
    pub worst: String,
}

pub const FD_EPS: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central-difference check of every parameter entry over `configs` instances
/// whose activations and pooling winners sit at least `min_margin` from a kink.
pub fn gradient_check(configs: usize, min_margin: f64) -> GradReport {
    let mut report = GradReport::default();
    let mut seed = 0u64;
    while report.configs < configs {
        let inst = random_instance(seed);
        seed += 1;
        if inst.kink_margin() < min_margin {
            report.skipped_near_kink += 1;
            continue;
        }
        report.configs += 1;
        let analytic: std::collections::BTreeMap<String, Vec<f64>> = grad_slices(&inst.gradients()).into_iter().collect();
        let mut probe = inst.params.clone();
        let names: Vec<(String, usize)> = param_slices(&mut probe).iter().map(|(n, s)| (n.clone(), s.len())).collect();
        for (ti, (name, len)) in names.iter().enumerate() {
            for i in 0..*len {
                let mut plus = inst.params.clone();
                param_slices(&mut plus)[ti].1[i] += FD_EPS;
                let mut minus = inst.params.clone();
                param_slices(&mut minus)[ti].1[i] -= FD_EPS;
                let numeric = (inst.objective(&plus) - inst.objective(&minus)) / (2.0 * FD_EPS);
                let a = analytic.get(name).map_or(0.0, |v| v[i]);
                let rel = relative_error(a, numeric);
                report.entries += 1;
                if rel > report.max_rel_error {
                    report.max_rel_error = rel;
                    report.worst = format!("seed {} {name}[{i}]: analytic {a:e} numeric {numeric:e}", seed - 1);
                }
            }
        }
    }
    report
}

/// Plain cross-entropy fine-tuning written out step by step, following the
/// trainer's seeding contract.
pub fn reference_fine_tune(pre: &Pretrained, split: &DataSplit, cfg: &StrategyConfig, pt: PlaceTypeId) -> ModelParams {
    let key = ParamKey::PlaceType(pt);
    let mut params = pre.params.clone();
    params.rekey(ParamKey::Shared, key).unwrap();
    let mut train: Vec<&MultiCategoryPointSet> = split.train.iter().filter(|s| s.place_type == pt).collect();
    train.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let graphs: Vec<_> = train.iter().map(|s| cfg.build_graph(s).unwrap()).collect();
    let mut rng = rng_for(derive_seed(cfg.seed, &[0x5DA, pt.0 as u64]), &[1]);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, g) = loss_and_gradients(train[i], &graphs[i], &params, key, train[i].label).unwrap();
            apply_sgd(&mut params, &g, cfg.base_lr).unwrap();
        }
    }
    params
}
