//! Logits frozen from the independent script `oracles/forward_oracle.py`.

use std::collections::BTreeMap;

use spatial_lucid::graph::build_knn_graph;
use spatial_lucid::matrix::Matrix;
use spatial_lucid::network::{model_forward, LayerParams, ModelParams, ParamKey};
use spatial_lucid::{ClassId, MultiCategoryPointSet, PlaceTypeId, SpatialPoint};

const EXPECTED_LOGITS: [f64; 2] = [0.47090806085403003, -0.494708796259307];

fn build(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Matrix {
    let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
    Matrix::from_vec(rows, cols, data)
}

fn oracle_params() -> ModelParams {
    let (ncat, hidden) = (2, 3);
    let layers = (0..2)
        .map(|l| {
            let lf = l as f64;
            let mut w = BTreeMap::new();
            let mut b = BTreeMap::new();
            for key in 0..2usize {
                let kf = key as f64;
                w.insert(
                    ParamKey::PlaceType(PlaceTypeId(key)),
                    build(hidden, hidden, |i, j| 0.6 * (17.0 * lf + 3.0 * i as f64 + j as f64 + 5.0 * kf).cos()),
                );
                b.insert(
                    ParamKey::PlaceType(PlaceTypeId(key)),
                    build(hidden, hidden, |i, j| 0.5 * (11.0 * lf + 2.0 * i as f64 - j as f64 + 7.0 * kf).sin()),
                );
            }
            LayerParams {
                w,
                b,
                alpha: build(ncat, ncat, |a, c| 0.5 + 0.25 * a as f64 - 0.1 * c as f64 + 0.05 * lf),
                leaky_slope: 0.1,
            }
        })
        .collect();
    ModelParams {
        embedding: build(hidden, ncat + 2, |r, c| 0.8 * (1.0 + 4.0 * r as f64 + c as f64).sin()),
        layers,
        classifier_w: build(2, hidden, |r, c| (2.0 * r as f64 + c as f64).cos()),
        classifier_b: vec![0.1, 0.2],
    }
}

fn oracle_set() -> MultiCategoryPointSet {
    let pts = [(0, 0.0, 0.0), (1, 1.0, 0.5), (0, 2.0, 2.5), (1, 0.3, 1.7), (0, 3.0, 1.0), (1, 2.2, 0.4)];
    let points = pts.iter().map(|&(c, x, y)| SpatialPoint::new(c, x, y)).collect();
    MultiCategoryPointSet::new("oracle", PlaceTypeId(1), ClassId(0), points).unwrap()
}

#[test]
fn logits_match_independent_script() {
    let set = oracle_set();
    let graph = build_knn_graph(&set.points, 2, None).unwrap();
    let params = oracle_params();
    params.validate().unwrap();
    let t = model_forward(&set, &graph, &params, PlaceTypeId(1)).unwrap();
    for (got, want) in t.logits.iter().zip(EXPECTED_LOGITS) {
        assert!((got - want).abs() <= 1e-10, "logit {got} vs oracle {want}");
    }
}

#[test]
fn other_key_gives_different_logits() {
    let set = oracle_set();
    let graph = build_knn_graph(&set.points, 2, None).unwrap();
    let t = model_forward(&set, &graph, &oracle_params(), PlaceTypeId(0)).unwrap();
    assert!((t.logits[0] - EXPECTED_LOGITS[0]).abs() > 1e-6);
}
