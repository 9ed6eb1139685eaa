//! Brute-force check of what the fig1 benchmark plants.

use spatial_lucid::datagen::{generate_benchmark, BenchmarkConfig, FIG1_RADIUS};
use spatial_lucid::{CategoryId, MultiCategoryPointSet, PlaceTypeId};

/// A-B pairs closer than the motif diameter.
fn ab_pairs(s: &MultiCategoryPointSet) -> usize {
    let reach = (2.0 * FIG1_RADIUS).powi(2);
    let mut n = 0;
    for p in s.points.iter().filter(|p| p.category == CategoryId(0)) {
        for q in s.points.iter().filter(|q| q.category == CategoryId(1)) {
            if p.distance_squared(q) <= reach {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn ab_rule_is_local_not_global() {
    let ds = generate_benchmark(&BenchmarkConfig::fig1(40), 11).unwrap();
    assert_eq!(ds.samples.len(), 160);
    let present = |s: &MultiCategoryPointSet| ab_pairs(s) >= 3;

    let mut global_hits = 0;
    for pt in [PlaceTypeId(0), PlaceTypeId(1)] {
        let cell: Vec<_> = ds.samples.iter().filter(|s| s.place_type == pt).collect();
        // PT-I: pairs mark class 1; PT-II: pairs mark class 0
        let local = cell
            .iter()
            .filter(|s| present(s) == ((s.label.0 == 1) == (pt == PlaceTypeId(0))))
            .count();
        assert!(local as f64 / cell.len() as f64 >= 0.95, "{pt:?}: {local}/{}", cell.len());
        global_hits += cell.iter().filter(|s| present(s) == (s.label.0 == 1)).count();
    }
    let global = global_hits as f64 / ds.samples.len() as f64;
    assert!((0.4..=0.6).contains(&global), "global rule accuracy {global}");
}

#[test]
fn generation_is_deterministic_per_seed() {
    let cfg = BenchmarkConfig::fig1(5);
    assert_eq!(generate_benchmark(&cfg, 3).unwrap(), generate_benchmark(&cfg, 3).unwrap());
    assert_ne!(generate_benchmark(&cfg, 3).unwrap(), generate_benchmark(&cfg, 4).unwrap());
}
