//! JSON checkpoints. Every tensor is stored row-major with its declared shape;
//! floats are written in shortest round-trip form so reloads are bit-exact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::{read_to_string, write_atomic};
use crate::matrix::Matrix;
use crate::network::{LayerParams, ModelConfig, ModelParams, ParamKey};
use crate::training::{EpochLog, StrategyConfig, TrainedEnsemble};

const MODEL_FORMAT: &str = "spatial-lucid/model";
const INDEX_FORMAT: &str = "spatial-lucid/ensemble";
const VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub strategy: StrategyConfig,
    pub layer_count: usize,
    pub hidden_dim: usize,
    pub num_categories: usize,
    pub num_classes: usize,
    pub keys: Vec<String>,
    pub leaky_slopes: Vec<f64>,
    pub tensors: Vec<Tensor>,
}

fn mat(name: String, m: &Matrix) -> Tensor {
    Tensor {
        name,
        shape: vec![m.rows(), m.cols()],
        data: m.as_slice().to_vec(),
    }
}

impl ModelCheckpoint {
    pub fn from_params(params: &ModelParams, strategy: &StrategyConfig) -> Self {
        let keys = params.keys();
        let mut tensors = vec![mat("embedding".into(), &params.embedding)];
        for (l, layer) in params.layers.iter().enumerate() {
            for k in &keys {
                tensors.push(mat(format!("layer{l}.W.{k}"), &layer.w[k]));
                tensors.push(mat(format!("layer{l}.B.{k}"), &layer.b[k]));
            }
            tensors.push(mat(format!("layer{l}.alpha"), &layer.alpha));
        }
        tensors.push(mat("classifier.W".into(), &params.classifier_w));
        tensors.push(Tensor {
            name: "classifier.b".into(),
            shape: vec![params.classifier_b.len()],
            data: params.classifier_b.clone(),
        });
        Self {
            format: MODEL_FORMAT.into(),
            version: VERSION,
            seed: strategy.seed,
            strategy: strategy.clone(),
            layer_count: params.num_layers(),
            hidden_dim: params.hidden_dim(),
            num_categories: params.num_categories(),
            num_classes: params.num_classes(),
            keys: keys.iter().map(ToString::to_string).collect(),
            leaky_slopes: params.layers.iter().map(|l| l.leaky_slope).collect(),
            tensors,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        if self.format != MODEL_FORMAT || self.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported model format {} v{}",
                self.format, self.version
            )));
        }
        if self.leaky_slopes.len() != self.layer_count {
            return Err(Error::Checkpoint("slope count differs from layer count".into()));
        }
        let mut by_name: BTreeMap<&str, &Tensor> = BTreeMap::new();
        for t in &self.tensors {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::Checkpoint(format!("tensor {} data/shape mismatch", t.name)));
            }
            by_name.insert(&t.name, t);
        }
        let get = |name: &str| -> Result<Matrix> {
            let t = by_name
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            match t.shape[..] {
                [r, c] => Ok(Matrix::from_vec(r, c, t.data.clone())),
                _ => Err(Error::Checkpoint(format!("tensor {name} is not 2-D"))),
            }
        };
        let keys = self
            .keys
            .iter()
            .map(|k| k.parse::<ParamKey>())
            .collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::with_capacity(self.layer_count);
        for l in 0..self.layer_count {
            let mut w = BTreeMap::new();
            let mut b = BTreeMap::new();
            for k in &keys {
                w.insert(*k, get(&format!("layer{l}.W.{k}"))?);
                b.insert(*k, get(&format!("layer{l}.B.{k}"))?);
            }
            layers.push(LayerParams {
                w,
                b,
                alpha: get(&format!("layer{l}.alpha"))?,
                leaky_slope: self.leaky_slopes[l],
            });
        }
        let bias = by_name
            .get("classifier.b")
            .ok_or_else(|| Error::Checkpoint("missing tensor classifier.b".into()))?;
        let params = ModelParams {
            embedding: get("embedding")?,
            layers,
            classifier_w: get("classifier.W")?,
            classifier_b: bias.data.clone(),
        };
        params.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(params)
    }
}

pub fn save_model(path: &Path, params: &ModelParams, strategy: &StrategyConfig) -> Result<()> {
    let ck = ModelCheckpoint::from_params(params, strategy);
    let text = serde_json::to_string_pretty(&ck).map_err(|e| Error::Checkpoint(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelCheckpoint> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MemberEntry {
    key: String,
    file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EnsembleIndex {
    format: String,
    version: u32,
    strategy: StrategyConfig,
    model: ModelConfig,
    members: Vec<MemberEntry>,
    training_log: Vec<EpochLog>,
}

/// One model file per member plus `index.json`.
pub fn save_ensemble(dir: &Path, ensemble: &TrainedEnsemble) -> Result<PathBuf> {
    let mut members = Vec::new();
    for (key, params) in &ensemble.members {
        let file = format!("member_{key}.json");
        save_model(&dir.join(&file), params, &ensemble.config)?;
        members.push(MemberEntry {
            key: key.to_string(),
            file,
        });
    }
    let index = EnsembleIndex {
        format: INDEX_FORMAT.into(),
        version: VERSION,
        strategy: ensemble.config.clone(),
        model: ensemble.model_config,
        members,
        training_log: ensemble.training_log.clone(),
    };
    let text = serde_json::to_string_pretty(&index).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let path = dir.join(INDEX_FILE);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

pub fn load_ensemble(dir: &Path) -> Result<TrainedEnsemble> {
    let (dir, index_path) = if dir.is_dir() {
        (dir.to_path_buf(), dir.join(INDEX_FILE))
    } else {
        (
            dir.parent().map(Path::to_path_buf).unwrap_or_default(),
            dir.to_path_buf(),
        )
    };
    if !index_path.exists() {
        return Err(Error::Checkpoint(format!(
            "no ensemble index at {}",
            index_path.display()
        )));
    }
    let text = read_to_string(&index_path)?;
    let index: EnsembleIndex =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if index.format != INDEX_FORMAT || index.version != VERSION {
        return Err(Error::Checkpoint("unsupported ensemble index".into()));
    }
    let mut members = BTreeMap::new();
    for m in &index.members {
        let key: ParamKey = m.key.parse()?;
        members.insert(key, load_model(&dir.join(&m.file))?.to_params()?);
    }
    Ok(TrainedEnsemble {
        members,
        config: index.strategy,
        model_config: index.model,
        training_log: index.training_log,
    })
}
