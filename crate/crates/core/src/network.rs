//! Place-type parameterized message-passing network with a hand-written
//! reverse pass.
//!
//! Each layer computes, for every node `s`,
//!
//! ```text
//! h'[s] = LeakyReLU( W[p] · Σ_{u ∈ N(s)} alpha[cat s][cat u] · h[u]  +  B[p] · h[s] )
//! ```
//!
//! where `p` selects the place-type specific weights and `alpha` is a
//! category-pair association matrix shared by all place-types. Node features are
//! embedded linearly before the first layer, the last layer is max-pooled over
//! nodes and a linear head produces class logits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CategoryId, ClassId, MultiCategoryPointSet, PlaceTypeId};
use crate::error::{Error, Result};
use crate::graph::KnnGraph;
use crate::matrix::{dot, Matrix};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Selects a weight map entry: either one place-type or the single shared entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamKey {
    Shared,
    PlaceType(PlaceTypeId),
}

impl From<PlaceTypeId> for ParamKey {
    fn from(p: PlaceTypeId) -> Self {
        ParamKey::PlaceType(p)
    }
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKey::Shared => f.write_str("shared"),
            ParamKey::PlaceType(p) => write!(f, "pt{}", p.0),
        }
    }
}

impl FromStr for ParamKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "shared" {
            return Ok(ParamKey::Shared);
        }
        s.strip_prefix("pt")
            .and_then(|n| n.parse().ok())
            .map(|n| ParamKey::PlaceType(PlaceTypeId(n)))
            .ok_or_else(|| Error::UnknownKey(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_categories: usize,
    pub num_classes: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub leaky_slope: f64,
}

impl ModelConfig {
    pub fn input_dim(&self) -> usize {
        self.num_categories + 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub w: BTreeMap<ParamKey, Matrix>,
    pub b: BTreeMap<ParamKey, Matrix>,
    pub alpha: Matrix,
    pub leaky_slope: f64,
}

impl LayerParams {
    fn weights(&self, key: ParamKey) -> Result<(&Matrix, &Matrix)> {
        match (self.w.get(&key), self.b.get(&key)) {
            (Some(w), Some(b)) => Ok((w, b)),
            _ => Err(Error::UnknownKey(key.to_string())),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = ParamKey> + '_ {
        self.w.keys().copied()
    }

    pub fn in_dim(&self) -> usize {
        self.w.values().next().map_or(0, Matrix::cols)
    }

    pub fn out_dim(&self) -> usize {
        self.w.values().next().map_or(0, Matrix::rows)
    }

    fn check(&self) -> Result<()> {
        if self.w.len() != self.b.len() || self.w.keys().ne(self.b.keys()) {
            return Err(Error::Shape("W and B key sets differ".into()));
        }
        let shape = self.w.values().next().map(Matrix::shape);
        for (k, m) in self.w.iter().chain(self.b.iter()) {
            if Some(m.shape()) != shape {
                return Err(Error::Shape(format!("weight for {k} has shape {:?}", m.shape())));
            }
        }
        if self.alpha.rows() != self.alpha.cols() {
            return Err(Error::Shape("alpha must be square".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `hidden × (num_categories + 2)` map from raw node features to the first hidden state.
    pub embedding: Matrix,
    pub layers: Vec<LayerParams>,
    pub classifier_w: Matrix,
    pub classifier_b: Vec<f64>,
}

impl ModelParams {
    /// Seeded initialization: every matrix uniform in ±sqrt(1/fan_in), alpha all ones,
    /// classifier bias zero. Draw order is embedding, then per layer the W/B pair of
    /// each key in key order, then the classifier.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, keys: &[ParamKey], rng: &mut R) -> Self {
        let mut keys = keys.to_vec();
        keys.sort();
        keys.dedup();
        let h = config.hidden_dim;
        let embedding = Matrix::uniform_fan_in(h, config.input_dim(), rng);
        let layers = (0..config.num_layers)
            .map(|_| {
                let mut w = BTreeMap::new();
                let mut b = BTreeMap::new();
                for &k in &keys {
                    w.insert(k, Matrix::uniform_fan_in(h, h, rng));
                    b.insert(k, Matrix::uniform_fan_in(h, h, rng));
                }
                LayerParams {
                    w,
                    b,
                    alpha: Matrix::filled(config.num_categories, config.num_categories, 1.0),
                    leaky_slope: config.leaky_slope,
                }
            })
            .collect();
        let classifier_w = Matrix::uniform_fan_in(config.num_classes, h, rng);
        Self {
            embedding,
            layers,
            classifier_w,
            classifier_b: vec![0.0; config.num_classes],
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier_b.len()
    }

    pub fn num_categories(&self) -> usize {
        self.embedding.cols().saturating_sub(2)
    }

    pub fn hidden_dim(&self) -> usize {
        self.embedding.rows()
    }

    pub fn keys(&self) -> Vec<ParamKey> {
        self.layers
            .first()
            .map(|l| l.keys().collect())
            .unwrap_or_default()
    }

    /// Moves the weights stored under `from` to `to` in every layer.
    pub fn rekey(&mut self, from: ParamKey, to: ParamKey) -> Result<()> {
        for layer in &mut self.layers {
            let w = layer.w.remove(&from).ok_or_else(|| Error::UnknownKey(from.to_string()))?;
            let b = layer.b.remove(&from).ok_or_else(|| Error::UnknownKey(from.to_string()))?;
            layer.w.insert(to, w);
            layer.b.insert(to, b);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut dim = self.embedding.rows();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check()?;
            if layer.in_dim() != dim {
                return Err(Error::Shape(format!(
                    "layer {i} expects input dim {}, previous dim is {dim}",
                    layer.in_dim()
                )));
            }
            if layer.alpha.rows() != self.num_categories() {
                return Err(Error::Shape(format!("layer {i} alpha has wrong size")));
            }
            dim = layer.out_dim();
        }
        if self.classifier_w.cols() != dim || self.classifier_w.rows() != self.classifier_b.len() {
            return Err(Error::Shape("classifier does not match final layer".into()));
        }
        let finite = self.embedding.is_finite()
            && self.classifier_w.is_finite()
            && self.classifier_b.iter().all(|v| v.is_finite())
            && self.layers.iter().all(|l| {
                l.alpha.is_finite()
                    && l.w.values().all(Matrix::is_finite)
                    && l.b.values().all(Matrix::is_finite)
            });
        if !finite {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Per-node input: one-hot category followed by MBR-normalized (x, y).
pub fn node_input_features(set: &MultiCategoryPointSet, num_categories: usize) -> Result<Matrix> {
    let mbr = set.mbr();
    let (w, h) = (mbr.width(), mbr.height());
    let mut out = Matrix::zeros(set.len(), num_categories + 2);
    for (i, p) in set.points.iter().enumerate() {
        if p.category.0 >= num_categories {
            return Err(Error::data(
                Some(&set.sample_id),
                format!("category {} outside vocabulary", p.category.0),
            ));
        }
        let row = out.row_mut(i);
        row[p.category.0] = 1.0;
        row[num_categories] = if w > 0.0 { (p.x - mbr.min_x) / w } else { 0.0 };
        row[num_categories + 1] = if h > 0.0 { (p.y - mbr.min_y) / h } else { 0.0 };
    }
    Ok(out)
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

struct LayerOutput {
    messages: Matrix,
    preacts: Matrix,
    out: Matrix,
}

fn layer_forward_full(
    h_in: &Matrix,
    graph: &KnnGraph,
    categories: &[CategoryId],
    params: &LayerParams,
    key: ParamKey,
) -> Result<LayerOutput> {
    let (w, b) = params.weights(key)?;
    let n = h_in.rows();
    if graph.num_nodes() != n || categories.len() != n {
        return Err(Error::Shape(format!(
            "{n} embedding rows, {} graph nodes, {} categories",
            graph.num_nodes(),
            categories.len()
        )));
    }
    if w.cols() != h_in.cols() || b.cols() != h_in.cols() {
        return Err(Error::Shape(format!(
            "layer expects input dim {}, got {}",
            w.cols(),
            h_in.cols()
        )));
    }
    let ncat = params.alpha.rows();
    if let Some(c) = categories.iter().find(|c| c.0 >= ncat) {
        return Err(Error::Shape(format!("category {} outside alpha", c.0)));
    }
    let d_in = h_in.cols();
    let d_out = w.rows();
    let mut messages = Matrix::zeros(n, d_in);
    let mut preacts = Matrix::zeros(n, d_out);
    let mut out = Matrix::zeros(n, d_out);
    let mut self_term = vec![0.0; d_out];
    for s in 0..n {
        let cs = categories[s].0;
        let msg = messages.row_mut(s);
        for &u in graph.neighbors(s) {
            let a = params.alpha[(cs, categories[u].0)];
            for (m, &hv) in msg.iter_mut().zip(h_in.row(u)) {
                *m += a * hv;
            }
        }
        w.mul_vec_into(messages.row(s), preacts.row_mut(s));
        b.mul_vec_into(h_in.row(s), &mut self_term);
        for ((p, o), &t) in preacts
            .row_mut(s)
            .iter_mut()
            .zip(out.row_mut(s).iter_mut())
            .zip(&self_term)
        {
            *p += t;
            *o = leaky(*p, params.leaky_slope);
        }
    }
    Ok(LayerOutput {
        messages,
        preacts,
        out,
    })
}

/// One message-passing layer for the weights stored under `key`.
pub fn layer_forward(
    h_in: &Matrix,
    graph: &KnnGraph,
    categories: &[CategoryId],
    params: &LayerParams,
    key: impl Into<ParamKey>,
) -> Result<Matrix> {
    layer_forward_full(h_in, graph, categories, params, key.into()).map(|o| o.out)
}

/// Coordinate-wise max over rows; ties go to the lowest row index.
pub fn max_pool(h: &Matrix) -> (Vec<f64>, Vec<usize>) {
    let mut pooled = vec![f64::NEG_INFINITY; h.cols()];
    let mut argmax = vec![0; h.cols()];
    for r in 0..h.rows() {
        for (j, &v) in h.row(r).iter().enumerate() {
            if v > pooled[j] {
                pooled[j] = v;
                argmax[j] = r;
            }
        }
    }
    (pooled, argmax)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[label]`, computed stably.
pub fn cross_entropy(logits: &[f64], label: ClassId) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label.0]
}

/// Everything the reverse pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub key: ParamKey,
    pub categories: Vec<CategoryId>,
    pub inputs: Matrix,
    /// `hidden[0]` is the embedded input, `hidden[k]` the output of layer k.
    pub hidden: Vec<Matrix>,
    pub messages: Vec<Matrix>,
    pub preacts: Vec<Matrix>,
    pub pooled: Vec<f64>,
    pub pool_argmax: Vec<usize>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ForwardTrace {
    pub fn predicted_class(&self) -> ClassId {
        ClassId(argmax(&self.probabilities))
    }

    /// Max-pooled embedding after `layer` message-passing layers (0 = embedded input).
    pub fn pooled_at(&self, layer: usize) -> Vec<f64> {
        max_pool(&self.hidden[layer]).0
    }
}

/// Index of the largest entry, lowest index on ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn model_forward(
    set: &MultiCategoryPointSet,
    graph: &KnnGraph,
    params: &ModelParams,
    key: impl Into<ParamKey>,
) -> Result<ForwardTrace> {
    let key = key.into();
    let inputs = node_input_features(set, params.num_categories())?;
    if graph.num_nodes() != set.len() {
        return Err(Error::Shape(format!(
            "graph has {} nodes, sample `{}` has {} points",
            graph.num_nodes(),
            set.sample_id,
            set.len()
        )));
    }
    let categories = set.categories();
    let n = set.len();
    let mut h0 = Matrix::zeros(n, params.embedding.rows());
    for s in 0..n {
        params.embedding.mul_vec_into(inputs.row(s), h0.row_mut(s));
    }
    let mut hidden = vec![h0];
    let mut messages = Vec::with_capacity(params.layers.len());
    let mut preacts = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let o = layer_forward_full(hidden.last().unwrap(), graph, &categories, layer, key)?;
        messages.push(o.messages);
        preacts.push(o.preacts);
        hidden.push(o.out);
    }
    let (pooled, pool_argmax) = max_pool(hidden.last().unwrap());
    if pooled.len() != params.classifier_w.cols() {
        return Err(Error::Shape("classifier input dim mismatch".into()));
    }
    let mut logits = params.classifier_b.clone();
    for (l, r) in logits.iter_mut().zip(0..) {
        *l += dot(params.classifier_w.row(r), &pooled);
    }
    let probabilities = softmax(&logits);
    Ok(ForwardTrace {
        key,
        categories,
        inputs,
        hidden,
        messages,
        preacts,
        pooled,
        pool_argmax,
        logits,
        probabilities,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub w: BTreeMap<ParamKey, Matrix>,
    pub b: BTreeMap<ParamKey, Matrix>,
    pub alpha: Option<Matrix>,
}

impl LayerGradients {
    pub fn empty() -> Self {
        Self {
            w: BTreeMap::new(),
            b: BTreeMap::new(),
            alpha: None,
        }
    }
}

/// Gradient tree mirroring [`ModelParams`]. A missing entry means "do not update".
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: Option<Matrix>,
    pub layers: Vec<LayerGradients>,
    pub classifier_w: Option<Matrix>,
    pub classifier_b: Option<Vec<f64>>,
}

impl Gradients {
    /// Drops the embedding and the first `k` layers' entries.
    pub fn freeze_layers(&mut self, k: usize) {
        if k > 0 {
            self.embedding = None;
        }
        for layer in self.layers.iter_mut().take(k) {
            *layer = LayerGradients::empty();
        }
    }

    pub fn freeze_classifier(&mut self) {
        self.classifier_w = None;
        self.classifier_b = None;
    }

    pub fn squared_norm(&self) -> f64 {
        let mut total = self.embedding.as_ref().map_or(0.0, Matrix::squared_norm);
        for l in &self.layers {
            total += l.w.values().chain(l.b.values()).map(Matrix::squared_norm).sum::<f64>();
            total += l.alpha.as_ref().map_or(0.0, Matrix::squared_norm);
        }
        total += self.classifier_w.as_ref().map_or(0.0, Matrix::squared_norm);
        total += self
            .classifier_b
            .as_ref()
            .map_or(0.0, |b| b.iter().map(|v| v * v).sum());
        total
    }

    pub fn is_finite(&self) -> bool {
        self.squared_norm().is_finite()
    }
}

/// Reverse pass from an upstream logit gradient. `d_pooled_extra`, when given, is
/// added to the gradient arriving at the pooled vector (for auxiliary objectives
/// on the pooled representation).
pub fn backward(
    trace: &ForwardTrace,
    graph: &KnnGraph,
    params: &ModelParams,
    d_logits: &[f64],
    d_pooled_extra: Option<&[f64]>,
) -> Result<Gradients> {
    let key = trace.key;
    let n = trace.inputs.rows();

    let mut classifier_w = Matrix::zeros(params.classifier_w.rows(), params.classifier_w.cols());
    classifier_w.add_outer(d_logits, &trace.pooled);
    let classifier_b = d_logits.to_vec();

    let mut d_pooled = vec![0.0; trace.pooled.len()];
    params.classifier_w.add_mul_t_vec(d_logits, &mut d_pooled);
    if let Some(extra) = d_pooled_extra {
        if extra.len() != d_pooled.len() {
            return Err(Error::Shape("pooled gradient length mismatch".into()));
        }
        for (d, e) in d_pooled.iter_mut().zip(extra) {
            *d += e;
        }
    }

    let last = trace.hidden.last().unwrap();
    let mut d_h = Matrix::zeros(n, last.cols());
    for (j, (&node, &g)) in trace.pool_argmax.iter().zip(&d_pooled).enumerate() {
        d_h[(node, j)] += g;
    }

    let mut layers = vec![LayerGradients::empty(); params.layers.len()];
    for (l, layer) in params.layers.iter().enumerate().rev() {
        let (w, b) = layer.weights(key)?;
        let h_in = &trace.hidden[l];
        let msgs = &trace.messages[l];
        let pre = &trace.preacts[l];
        let mut gw = Matrix::zeros(w.rows(), w.cols());
        let mut gb = Matrix::zeros(b.rows(), b.cols());
        let mut galpha = Matrix::zeros(layer.alpha.rows(), layer.alpha.cols());
        let mut d_in = Matrix::zeros(n, h_in.cols());
        let mut d_pre = vec![0.0; w.rows()];
        let mut d_msg = vec![0.0; w.cols()];
        for s in 0..n {
            for ((dp, &dh), &z) in d_pre.iter_mut().zip(d_h.row(s)).zip(pre.row(s)) {
                *dp = dh * leaky_grad(z, layer.leaky_slope);
            }
            if d_pre.iter().all(|&v| v == 0.0) {
                continue;
            }
            gw.add_outer(&d_pre, msgs.row(s));
            gb.add_outer(&d_pre, h_in.row(s));
            b.add_mul_t_vec(&d_pre, d_in.row_mut(s));
            d_msg.iter_mut().for_each(|v| *v = 0.0);
            w.add_mul_t_vec(&d_pre, &mut d_msg);
            let cs = trace.categories[s].0;
            for &u in graph.neighbors(s) {
                let cu = trace.categories[u].0;
                let a = layer.alpha[(cs, cu)];
                galpha[(cs, cu)] += dot(&d_msg, h_in.row(u));
                for (di, &dm) in d_in.row_mut(u).iter_mut().zip(&d_msg) {
                    *di += a * dm;
                }
            }
        }
        layers[l].w.insert(key, gw);
        layers[l].b.insert(key, gb);
        layers[l].alpha = Some(galpha);
        d_h = d_in;
    }

    let mut embedding = Matrix::zeros(params.embedding.rows(), params.embedding.cols());
    for s in 0..n {
        embedding.add_outer(d_h.row(s), trace.inputs.row(s));
    }

    Ok(Gradients {
        embedding: Some(embedding),
        layers,
        classifier_w: Some(classifier_w),
        classifier_b: Some(classifier_b),
    })
}

/// Cross-entropy loss of one labeled sample and its full gradient.
pub fn loss_and_gradients(
    set: &MultiCategoryPointSet,
    graph: &KnnGraph,
    params: &ModelParams,
    key: impl Into<ParamKey>,
    label: ClassId,
) -> Result<(f64, Gradients)> {
    let trace = model_forward(set, graph, params, key)?;
    loss_and_gradients_from_trace(&trace, graph, params, label, None)
}

pub(crate) fn loss_and_gradients_from_trace(
    trace: &ForwardTrace,
    graph: &KnnGraph,
    params: &ModelParams,
    label: ClassId,
    d_pooled_extra: Option<&[f64]>,
) -> Result<(f64, Gradients)> {
    if label.0 >= trace.logits.len() {
        return Err(Error::Shape(format!("label {} outside classifier", label.0)));
    }
    let loss = cross_entropy(&trace.logits, label);
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("loss is {loss}")));
    }
    let mut d_logits = trace.probabilities.clone();
    d_logits[label.0] -= 1.0;
    let grads = backward(trace, graph, params, &d_logits, d_pooled_extra)?;
    Ok((loss, grads))
}

/// In-place `p ← p − lr·g` for every entry present in `grads`.
pub fn apply_sgd(params: &mut ModelParams, grads: &Gradients, lr: f64) -> Result<()> {
    if grads.layers.len() != params.layers.len() {
        return Err(Error::Shape(format!(
            "{} gradient layers for {} parameter layers",
            grads.layers.len(),
            params.layers.len()
        )));
    }
    fn upd(p: &mut Matrix, g: &Matrix, lr: f64, what: &str) -> Result<()> {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "{what}: parameter {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
        p.sub_scaled(g, lr);
        Ok(())
    }
    // validate everything before mutating
    for (l, (lp, lg)) in params.layers.iter().zip(&grads.layers).enumerate() {
        for (k, g) in lg.w.iter().chain(lg.b.iter()) {
            let p = lp.w.get(k).ok_or_else(|| Error::UnknownKey(k.to_string()))?;
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!("layer {l} key {k}")));
            }
        }
        if lg.alpha.as_ref().is_some_and(|a| a.shape() != lp.alpha.shape()) {
            return Err(Error::Shape(format!("layer {l} alpha")));
        }
    }
    if let Some(g) = &grads.embedding {
        upd(&mut params.embedding, g, lr, "embedding")?;
    }
    for (lp, lg) in params.layers.iter_mut().zip(&grads.layers) {
        for (k, g) in &lg.w {
            upd(lp.w.get_mut(k).unwrap(), g, lr, "W")?;
        }
        for (k, g) in &lg.b {
            upd(lp.b.get_mut(k).unwrap(), g, lr, "B")?;
        }
        if let Some(g) = &lg.alpha {
            upd(&mut lp.alpha, g, lr, "alpha")?;
        }
    }
    if let Some(g) = &grads.classifier_w {
        upd(&mut params.classifier_w, g, lr, "classifier")?;
    }
    if let Some(g) = &grads.classifier_b {
        if g.len() != params.classifier_b.len() {
            return Err(Error::Shape("classifier bias".into()));
        }
        for (p, d) in params.classifier_b.iter_mut().zip(g) {
            *p -= lr * d;
        }
    }
    Ok(())
}

/// Functional form of [`apply_sgd`].
pub fn sgd_step(mut params: ModelParams, grads: &Gradients, lr: f64) -> Result<ModelParams> {
    if !(lr >= 0.0) {
        return Err(Error::Config(format!("learning rate must be non-negative, got {lr}")));
    }
    apply_sgd(&mut params, grads, lr)?;
    Ok(params)
}
