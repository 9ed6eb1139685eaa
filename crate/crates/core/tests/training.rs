mod common;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spatial_lucid::network::{apply_sgd, loss_and_gradients, ModelParams, ParamKey};
use spatial_lucid::training::*;
use spatial_lucid::{ClassId, Dataset, MultiCategoryPointSet, PlaceTypeDistanceMatrix, PlaceTypeId, SpatialPoint};

use common::{fig1, fig1_config};

fn quick(kind: StrategyKind, seed: u64) -> StrategyConfig {
    StrategyConfig {
        epochs: 5,
        ..fig1_config(kind, seed)
    }
}

fn single_place_type(ds: &Dataset, split: &DataSplit) -> (Dataset, DataSplit) {
    let keep = |v: &[MultiCategoryPointSet]| v.iter().filter(|s| s.place_type == PlaceTypeId(0)).cloned().collect::<Vec<_>>();
    let ds1 = Dataset::new(
        ds.category_names.clone(),
        vec![ds.place_type_names[0].clone()],
        keep(&ds.samples),
        PlaceTypeDistanceMatrix::uniform(1, 1.0, 1.0).unwrap(),
    )
    .unwrap();
    let split1 = DataSplit {
        train: keep(&split.train),
        val: keep(&split.val),
        test: keep(&split.test),
    };
    (ds1, split1)
}

#[test]
fn osfa_equals_place_type_on_one_place_type() {
    let (ds, split) = fig1(10, 3);
    let (ds1, split1) = single_place_type(&ds, &split);
    let osfa = train(&ds1, &split1, &quick(StrategyKind::Osfa, 9)).unwrap();
    let pt = train(&ds1, &split1, &quick(StrategyKind::PlaceType, 9)).unwrap();
    let mut shared = osfa.members[&ParamKey::Shared].clone();
    shared.rekey(ParamKey::Shared, PlaceTypeId(0).into()).unwrap();
    assert_eq!(shared, pt.members[&PlaceTypeId(0).into()]);
}

#[test]
fn sample_order_does_not_matter() {
    let (ds, split) = fig1(8, 1);
    let cfg = quick(StrategyKind::PlaceType, 4);
    let a = train(&ds, &split, &cfg).unwrap();
    let mut shuffled = split.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    shuffled.train.shuffle(&mut rng);
    let b = train(&ds, &shuffled, &cfg).unwrap();
    assert_eq!(a.members, b.members);
}

#[test]
fn result_is_independent_of_thread_count() {
    let (ds, split) = fig1(8, 2);
    let cfg = quick(StrategyKind::Wdlr, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&ds, &split, &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn one_member_per_place_type() {
    let (ds, split) = fig1(6, 0);
    for kind in [StrategyKind::PlaceType, StrategyKind::Wdlr, StrategyKind::Sda] {
        let e = train(&ds, &split, &quick(kind, 0)).unwrap();
        let keys: Vec<ParamKey> = e.members.keys().copied().collect();
        assert_eq!(keys, vec![PlaceTypeId(0).into(), PlaceTypeId(1).into()], "{kind}");
    }
    let e = train(&ds, &split, &quick(StrategyKind::Osfa, 0)).unwrap();
    assert_eq!(e.members.keys().copied().collect::<Vec<_>>(), vec![ParamKey::Shared]);
}

fn three_type_dataset() -> (Dataset, DataSplit) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples = Vec::new();
    for pt in 0..3 {
        for i in 0..10 {
            samples.push(common::random_set(&mut rng, 12, 2, pt, i % 2));
        }
    }
    for (i, s) in samples.iter_mut().enumerate() {
        s.sample_id = format!("s{i:03}");
    }
    let matrix = PlaceTypeDistanceMatrix::new(
        vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 2.0], vec![3.0, 2.0, 1.0]],
        3.0,
    )
    .unwrap();
    let ds = Dataset::new(vec!["A".into(), "B".into()], vec!["T1".into(), "T2".into(), "T3".into()], samples, matrix).unwrap();
    let split = split_dataset(&ds, 0);
    (ds, split)
}

#[test]
fn wdlr_logs_inverse_distance_rates() {
    let (ds, split) = three_type_dataset();
    let cfg = StrategyConfig {
        kind: StrategyKind::Wdlr,
        base_lr: 1e-3,
        epochs: 1,
        num_layers: 1,
        hidden_dim: 4,
        k_neighbors: 3,
        ..StrategyConfig::default()
    };
    let e = train(&ds, &split, &cfg).unwrap();
    let t1 = e.training_log.iter().find(|l| l.member == "T1").unwrap();
    assert_eq!(t1.learning_rates, vec![1e-3, 5e-4, 1e-3 / 3.0]);
    let t2 = e.training_log.iter().find(|l| l.member == "T2").unwrap();
    assert_eq!(t2.learning_rates, vec![1e-3, 5e-4]);
}

#[test]
fn wdlr_threshold_one_equals_place_type() {
    let (ds, split) = three_type_dataset();
    let base = StrategyConfig {
        epochs: 3,
        num_layers: 2,
        hidden_dim: 4,
        k_neighbors: 3,
        ..StrategyConfig::default()
    };
    let wdlr = train(&ds, &split, &StrategyConfig { kind: StrategyKind::Wdlr, alpha_threshold: Some(1.0), ..base.clone() }).unwrap();
    let pt = train(&ds, &split, &StrategyConfig { kind: StrategyKind::PlaceType, ..base }).unwrap();
    assert_eq!(wdlr.members, pt.members);
}

#[test]
fn halved_rate_moves_parameters_half_as_far() {
    let (ds, _) = fig1(2, 0);
    let s = &ds.samples[0];
    let cfg = quick(StrategyKind::Osfa, 0);
    let graph = cfg.build_graph(s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p0 = ModelParams::init(&cfg.model_config(&ds), &[ParamKey::Shared], &mut rng);
    let (_, g) = loss_and_gradients(s, &graph, &p0, ParamKey::Shared, s.label).unwrap();
    let mut full = p0.clone();
    apply_sgd(&mut full, &g, 1e-3).unwrap();
    let mut half = p0.clone();
    apply_sgd(&mut half, &g, 5e-4).unwrap();
    let a = full.classifier_w.as_slice();
    let b = half.classifier_w.as_slice();
    for ((x0, x1), x2) in p0.classifier_w.as_slice().iter().zip(a).zip(b) {
        let d1 = x0 - x1;
        let d2 = x0 - x2;
        assert!((d1 - 2.0 * d2).abs() <= 1e-15 * x0.abs().max(1.0), "{d1} vs 2*{d2}");
    }
}

#[test]
fn routing_reads_only_the_matching_member() {
    let (ds, split) = fig1(6, 2);
    let mut e = train(&ds, &split, &quick(StrategyKind::PlaceType, 1)).unwrap();
    let s = split.test.iter().find(|s| s.place_type == PlaceTypeId(0)).unwrap();
    let before = e.predict(s).unwrap();
    let other = e.members.get_mut(&PlaceTypeId(1).into()).unwrap();
    other.classifier_b = vec![1e6, -1e6];
    for m in other.embedding.as_mut_slice() {
        *m = f64::NAN;
    }
    assert_eq!(e.predict(s).unwrap(), before);
}

#[test]
fn separable_toy_set_loss_does_not_increase() {
    // class 1 samples contain category B, class 0 samples do not
    let mut samples = Vec::new();
    for i in 0..8 {
        let label = i % 2;
        let points = (0..6)
            .map(|j| SpatialPoint::new(if label == 1 && j % 2 == 0 { 1 } else { 0 }, j as f64, (j * i % 5) as f64))
            .collect();
        samples.push(MultiCategoryPointSet::new(format!("t{i}"), PlaceTypeId(0), ClassId(label), points).unwrap());
    }
    let ds = Dataset::new(vec!["A".into(), "B".into()], vec!["P".into()], samples.clone(), PlaceTypeDistanceMatrix::uniform(1, 1.0, 1.0).unwrap()).unwrap();
    let split = DataSplit {
        train: samples,
        ..DataSplit::default()
    };
    let cfg = StrategyConfig {
        kind: StrategyKind::Osfa,
        epochs: 2,
        base_lr: 1e-2,
        num_layers: 1,
        hidden_dim: 4,
        k_neighbors: 2,
        ..StrategyConfig::default()
    };
    let e = train(&ds, &split, &cfg).unwrap();
    assert_eq!(e.training_log.len(), 2);
    assert!(e.training_log[1].mean_loss <= e.training_log[0].mean_loss);
}

#[test]
fn empty_split_and_missing_place_type_are_errors() {
    let (ds, split) = fig1(4, 0);
    let empty = DataSplit::default();
    assert!(train(&ds, &empty, &quick(StrategyKind::Osfa, 0)).is_err());
    let only_pt0 = DataSplit {
        train: split.train.iter().filter(|s| s.place_type == PlaceTypeId(0)).cloned().collect(),
        ..split.clone()
    };
    let err = train(&ds, &only_pt0, &quick(StrategyKind::PlaceType, 0)).unwrap_err();
    assert!(err.to_string().contains("PT-II"), "{err}");
}

#[test]
fn huge_learning_rate_reports_divergence() {
    let (ds, split) = fig1(4, 0);
    let cfg = StrategyConfig {
        base_lr: 1e200,
        ..quick(StrategyKind::Osfa, 0)
    };
    let err = train(&ds, &split, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn split_proportions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let samples: Vec<_> = (0..100)
        .map(|i| {
            let mut s = common::random_set(&mut rng, 3, 1, 0, 0);
            s.sample_id = format!("x{i}");
            s
        })
        .collect();
    let ds = Dataset::new(vec!["A".into()], vec!["P".into()], samples, PlaceTypeDistanceMatrix::uniform(1, 1.0, 1.0).unwrap()).unwrap();
    let s = split_dataset(&ds, 3);
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
    assert_eq!(s, split_dataset(&ds, 3));
    assert_ne!(s, split_dataset(&ds, 4));

    let small = Dataset::new(vec!["A".into()], vec!["P".into()], ds.samples[..5].to_vec(), ds.distance_matrix.clone()).unwrap();
    let s = split_dataset(&small, 0);
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (3, 1, 1));
}

#[test]
fn sda_without_penalty_or_freezing_is_plain_fine_tuning() {
    let (ds, split) = fig1(8, 6);
    let cfg = StrategyConfig {
        sda_lambda: 0.0,
        sda_frozen_layers: 0,
        select_on_validation: false,
        ..quick(StrategyKind::Sda, 2)
    };
    let pre = pretrain_shared(&ds, &split, &cfg).unwrap();
    let e = fine_tune_sda(&pre, &ds, &split, &cfg).unwrap();
    for pt in [PlaceTypeId(0), PlaceTypeId(1)] {
        assert_eq!(e.members[&pt.into()], common::reference_fine_tune(&pre, &split, &cfg, pt));
    }
}

#[test]
fn full_freeze_with_frozen_classifier_returns_pretrained_model() {
    let (ds, split) = fig1(6, 1);
    let cfg = StrategyConfig {
        sda_frozen_layers: 2,
        sda_freeze_classifier: true,
        ..quick(StrategyKind::Sda, 3)
    };
    let pre = pretrain_shared(&ds, &split, &cfg).unwrap();
    let e = fine_tune_sda(&pre, &ds, &split, &cfg).unwrap();
    for (key, member) in &e.members {
        let mut expected = pre.params.clone();
        expected.rekey(ParamKey::Shared, *key).unwrap();
        assert_eq!(member, &expected);
    }
}
