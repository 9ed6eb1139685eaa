//! Python bindings: datasets, training, evaluation and explanation.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spatial_lucid::checkpoint::{load_ensemble, save_ensemble};
use spatial_lucid::datagen::{generate_benchmark, BenchmarkConfig};
use spatial_lucid::explain::{explain_ensemble, ExplainConfig, Scope};
use spatial_lucid::training::{self, split_dataset, DataSplit};
use spatial_lucid::{
    ClassId, Dataset, Error, MultiCategoryPointSet, PlaceTypeId, SpatialPoint, StrategyConfig, StrategyKind,
    TrainedEnsemble,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// One labeled multi-category point set.
#[pyclass(name = "PointSet", module = "spatial_lucid_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPointSet {
    inner: MultiCategoryPointSet,
}

#[pymethods]
impl PyPointSet {
    /// `points` is a list of `(category_index, x, y)`.
    #[new]
    fn new(sample_id: String, place_type: usize, label: usize, points: Vec<(usize, f64, f64)>) -> PyResult<Self> {
        let points = points.into_iter().map(|(c, x, y)| SpatialPoint::new(c, x, y)).collect();
        MultiCategoryPointSet::new(sample_id, PlaceTypeId(place_type), ClassId(label), points)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn sample_id(&self) -> &str {
        &self.inner.sample_id
    }

    #[getter]
    fn place_type(&self) -> usize {
        self.inner.place_type.0
    }

    #[getter]
    fn label(&self) -> usize {
        self.inner.label.0
    }

    #[getter]
    fn points(&self) -> Vec<(usize, f64, f64)> {
        self.inner.points.iter().map(|p| (p.category.0, p.x, p.y)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointSet(id={:?}, place_type={}, label={}, points={})",
            self.inner.sample_id,
            self.inner.place_type.0,
            self.inner.label.0,
            self.inner.len()
        )
    }
}

fn wrap(samples: &[MultiCategoryPointSet]) -> Vec<PyPointSet> {
    samples.iter().cloned().map(|inner| PyPointSet { inner }).collect()
}

fn unwrap(samples: Vec<PyRef<'_, PyPointSet>>) -> Vec<MultiCategoryPointSet> {
    samples.iter().map(|s| s.inner.clone()).collect()
}

#[pyclass(name = "Dataset", module = "spatial_lucid_py", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Loads a dataset directory or manifest file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let manifest = spatial_lucid::data::manifest_path(&path);
        spatial_lucid::load_dataset(&manifest).map(|inner| Self { inner }).map_err(py_err)
    }

    /// The two-place-type planted benchmark.
    #[staticmethod]
    #[pyo3(signature = (samples_per_cell=40, seed=0))]
    fn fig1(samples_per_cell: usize, seed: u64) -> PyResult<Self> {
        generate_benchmark(&BenchmarkConfig::fig1(samples_per_cell), seed)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// Writes the dataset directory; returns the manifest path.
    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        spatial_lucid::save_dataset(&self.inner, &dir).map_err(py_err)
    }

    /// Deterministic stratified `(train, val, test)` lists.
    fn split(&self, seed: u64) -> (Vec<PyPointSet>, Vec<PyPointSet>, Vec<PyPointSet>) {
        let s = split_dataset(&self.inner, seed);
        (wrap(&s.train), wrap(&s.val), wrap(&s.test))
    }

    #[getter]
    fn samples(&self) -> Vec<PyPointSet> {
        wrap(&self.inner.samples)
    }

    #[getter]
    fn category_names(&self) -> Vec<String> {
        self.inner.category_names.clone()
    }

    #[getter]
    fn place_type_names(&self) -> Vec<String> {
        self.inner.place_type_names.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }
}

fn report_dict<'py>(py: Python<'py>, r: &spatial_lucid::EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("f1", r.f1)?;
    d.set_item("confusion", r.confusion.clone())?;
    Ok(d)
}

/// A trained set of members, one per place-type (or a single shared one).
#[pyclass(name = "Ensemble", module = "spatial_lucid_py", frozen)]
struct PyEnsemble {
    inner: TrainedEnsemble,
}

#[pymethods]
impl PyEnsemble {
    /// Trains on the dataset's seeded split.
    #[staticmethod]
    #[pyo3(signature = (
        dataset, strategy, *, lr=1e-3, epochs=50, seed=0, k_neighbors=10, cutoff=None,
        layers=4, hidden=32, alpha_threshold=None, frozen_layers=None, sda_lambda=None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        dataset: &PyDataset,
        strategy: &str,
        lr: f64,
        epochs: usize,
        seed: u64,
        k_neighbors: usize,
        cutoff: Option<f64>,
        layers: usize,
        hidden: usize,
        alpha_threshold: Option<f64>,
        frozen_layers: Option<usize>,
        sda_lambda: Option<f64>,
    ) -> PyResult<Self> {
        let kind: StrategyKind = strategy.parse().map_err(py_err)?;
        let mut cfg = StrategyConfig {
            kind,
            base_lr: lr,
            epochs,
            seed,
            k_neighbors,
            cutoff,
            num_layers: layers,
            hidden_dim: hidden,
            alpha_threshold,
            ..StrategyConfig::default()
        };
        if let Some(k) = frozen_layers {
            cfg.sda_frozen_layers = k;
        }
        if let Some(l) = sda_lambda {
            cfg.sda_lambda = l;
        }
        let ds = &dataset.inner;
        let inner = py
            .detach(|| {
                let split = split_dataset(ds, seed);
                training::train(ds, &split, &cfg)
            })
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_ensemble(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        save_ensemble(&dir, &self.inner).map_err(py_err)
    }

    /// `(class, probabilities)` from the member routed by place-type.
    fn predict(&self, sample: &PyPointSet) -> PyResult<(usize, Vec<f64>)> {
        self.inner
            .predict(&sample.inner)
            .map(|(c, p)| (c.0, p))
            .map_err(py_err)
    }

    fn evaluate<'py>(&self, py: Python<'py>, samples: Vec<PyRef<'py, PyPointSet>>) -> PyResult<Bound<'py, PyDict>> {
        let samples = unwrap(samples);
        let r = training::evaluate(&self.inner, &samples).map_err(py_err)?;
        report_dict(py, &r)
    }

    /// Ranked `(center, neighbors, importance, std)` rows. `place_type=None`
    /// explains every sample through its routed member.
    #[pyo3(signature = (dataset, train, eval, place_type=None, repeats=10, seed=0, layer=None))]
    #[allow(clippy::too_many_arguments)]
    fn explain(
        &self,
        dataset: &PyDataset,
        train: Vec<PyRef<'_, PyPointSet>>,
        eval: Vec<PyRef<'_, PyPointSet>>,
        place_type: Option<usize>,
        repeats: usize,
        seed: u64,
        layer: Option<usize>,
    ) -> PyResult<Vec<(String, String, f64, f64)>> {
        let scope = place_type.map_or(Scope::Global, |p| Scope::PlaceType(PlaceTypeId(p)));
        let cfg = ExplainConfig {
            layer,
            repeats,
            seed,
            ..ExplainConfig::default()
        };
        let report = explain_ensemble(&self.inner, &unwrap(train), &unwrap(eval), scope, &cfg).map_err(py_err)?;
        Ok(report
            .entries
            .iter()
            .map(|e| {
                let (c, n) = e.feature.label(&dataset.inner.category_names);
                (c, n, e.importance, e.std)
            })
            .collect())
    }

    #[getter]
    fn strategy(&self) -> String {
        self.inner.config.kind.to_string()
    }

    /// Member keys, e.g. `["pt0", "pt1"]` or `["shared"]`.
    #[getter]
    fn members(&self) -> Vec<String> {
        self.inner.members.keys().map(|k| k.to_string()).collect()
    }

    /// The training log as CSV text.
    #[getter]
    fn training_log(&self) -> String {
        training::format_training_log(&self.inner.training_log)
    }
}

/// Base rate scaled by the inverse place-type distance.
#[pyfunction]
fn effective_learning_rate(base_lr: f64, distance: f64) -> PyResult<f64> {
    training::effective_learning_rate(base_lr, distance).map_err(py_err)
}

/// Sizes of the seeded train/val/test split.
#[pyfunction]
fn split_counts(dataset: &PyDataset, seed: u64) -> (usize, usize, usize) {
    let DataSplit { train, val, test } = split_dataset(&dataset.inner, seed);
    (train.len(), val.len(), test.len())
}

#[pymodule]
fn spatial_lucid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointSet>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(effective_learning_rate, m)?)?;
    m.add_function(wrap_pyfunction!(split_counts, m)?)?;
    Ok(())
}
