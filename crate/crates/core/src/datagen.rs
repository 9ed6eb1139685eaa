//! Seeded synthetic benchmarks with planted co-location motifs, and the
//! partition / rotation / resampling augmentation pipeline.

use log::warn;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    CategoryId, ClassId, Dataset, Mbr, MultiCategoryPointSet, PlaceTypeDistanceMatrix,
    PlaceTypeId, SpatialPoint,
};
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Recipe for one (place-type, class) cell of a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub place_type: PlaceTypeId,
    pub class_label: ClassId,
    /// Categories co-located in each motif instance.
    pub arrangement: Vec<CategoryId>,
    pub radius: f64,
    pub num_motifs: usize,
    pub background_points: usize,
    pub width: f64,
    pub height: f64,
    pub num_categories: usize,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("plant spec: {m}")));
        if self.arrangement.len() < 2 {
            return bad("arrangement needs at least 2 categories".into());
        }
        if let Some(c) = self.arrangement.iter().find(|c| c.0 >= self.num_categories) {
            return bad(format!("category {} outside vocabulary", c.0));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad("box must have positive size".into());
        }
        if !(self.radius > 0.0 && self.radius < self.width.min(self.height) / 4.0) {
            return bad(format!(
                "radius {} must be positive and below a quarter of the box",
                self.radius
            ));
        }
        if self.num_motifs * self.arrangement.len() + self.background_points < 2 {
            return bad("spec produces fewer than 2 points".into());
        }
        Ok(())
    }
}

/// Motif points come first (one block of `arrangement.len()` per instance),
/// followed by background points.
pub fn generate_sample(spec: &PlantSpec, seed: u64, sample_id: &str) -> Result<MultiCategoryPointSet> {
    spec.validate()?;
    let mut rng = rng_for(seed, &[]);
    let r = spec.radius;
    let mut points = Vec::with_capacity(spec.num_motifs * spec.arrangement.len() + spec.background_points);
    for _ in 0..spec.num_motifs {
        let cx = rng.gen_range(r..=spec.width - r);
        let cy = rng.gen_range(r..=spec.height - r);
        for &cat in &spec.arrangement {
            let rho = r * rng.gen::<f64>().sqrt();
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            points.push(SpatialPoint {
                category: cat,
                x: cx + rho * theta.cos(),
                y: cy + rho * theta.sin(),
            });
        }
    }
    for _ in 0..spec.background_points {
        points.push(SpatialPoint::new(
            rng.gen_range(0..spec.num_categories),
            rng.gen_range(0.0..spec.width),
            rng.gen_range(0.0..spec.height),
        ));
    }
    MultiCategoryPointSet::new(sample_id, spec.place_type, spec.class_label, points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub category_names: Vec<String>,
    pub place_type_names: Vec<String>,
    pub distance_matrix: Vec<Vec<f64>>,
    pub threshold: f64,
    pub cells: Vec<PlantSpec>,
    pub samples_per_cell: usize,
}

impl BenchmarkConfig {
    /// Two place-types sharing one planted arrangement, ⟨A,B⟩ pairs, with
    /// opposite meaning: in PT-I it marks class 1, in PT-II class 0. The other
    /// cells hold background points only, so "AB present" is perfect within a
    /// place-type and at chance globally.
    pub fn fig1(samples_per_cell: usize) -> Self {
        let cell = |pt: usize, label: usize, motifs: usize| PlantSpec {
            place_type: PlaceTypeId(pt),
            class_label: ClassId(label),
            arrangement: vec![CategoryId(0), CategoryId(1)],
            radius: FIG1_RADIUS,
            num_motifs: motifs,
            background_points: FIG1_BACKGROUND,
            width: FIG1_BOX,
            height: FIG1_BOX,
            num_categories: 4,
        };
        Self {
            category_names: ["A", "B", "C", "D"].map(String::from).to_vec(),
            place_type_names: vec!["PT-I".into(), "PT-II".into()],
            distance_matrix: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            threshold: 2.0,
            cells: vec![
                cell(0, 0, 0),
                cell(0, 1, FIG1_MOTIFS),
                cell(1, 0, FIG1_MOTIFS),
                cell(1, 1, 0),
            ],
            samples_per_cell,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Config("benchmark has no cells".into()));
        }
        for c in &self.cells {
            c.validate()?;
            if c.place_type.0 >= self.place_type_names.len() {
                return Err(Error::Config(format!("cell place-type {} unknown", c.place_type.0)));
            }
            if c.num_categories != self.category_names.len() {
                return Err(Error::Config("cell category count differs from vocabulary".into()));
            }
        }
        Ok(())
    }
}

pub const FIG1_BOX: f64 = 100.0;
pub const FIG1_RADIUS: f64 = 1.0;
pub const FIG1_MOTIFS: usize = 12;
pub const FIG1_BACKGROUND: usize = 24;

pub fn generate_benchmark(config: &BenchmarkConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut samples = Vec::with_capacity(config.cells.len() * config.samples_per_cell);
    for (ci, cell) in config.cells.iter().enumerate() {
        let pt_name = &config.place_type_names[cell.place_type.0];
        for i in 0..config.samples_per_cell {
            let id = format!("{pt_name}_c{}_{ci}_{i:04}", cell.class_label.0);
            samples.push(generate_sample(cell, crate::rng::derive_seed(seed, &[ci as u64, i as u64]), &id)?);
        }
    }
    let matrix = PlaceTypeDistanceMatrix::new(config.distance_matrix.clone(), config.threshold)?;
    Dataset::new(
        config.category_names.clone(),
        config.place_type_names.clone(),
        samples,
        matrix,
    )
}

/// Raw halves of a vertical cut at `min_x + fraction * width`: `x < cut` goes left.
pub fn split_points(points: &[SpatialPoint], fraction: f64) -> (Vec<SpatialPoint>, Vec<SpatialPoint>) {
    let Some(mbr) = Mbr::of(points) else {
        return (Vec::new(), Vec::new());
    };
    let cut = mbr.min_x + fraction * mbr.width();
    points.iter().partition(|p| p.x < cut)
}

/// Cuts the MBR vertically at `fraction` of its width. Each side is re-normalized
/// to its own origin; a side with fewer than 2 points comes back as `None`.
pub fn partition_mbr(
    set: &MultiCategoryPointSet,
    fraction: f64,
) -> Result<(Option<MultiCategoryPointSet>, Option<MultiCategoryPointSet>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("partition fraction {fraction} outside (0,1)")));
    }
    if set.is_empty() {
        return Err(Error::data(Some(&set.sample_id), "empty point set"));
    }
    let (left, right) = split_points(&set.points, fraction);
    let side = |pts: Vec<SpatialPoint>, name: &str| {
        if pts.len() < 2 {
            warn!(
                "sample `{}`: {name} side of cut at {fraction} has {} point(s), dropped",
                set.sample_id,
                pts.len()
            );
            None
        } else {
            Some(set.with_points(pts).expect("validated points"))
        }
    };
    Ok((side(left, "left"), side(right, "right")))
}

/// Rotates clockwise about the MBR center, then re-normalizes the origin.
pub fn rotate_sample(set: &MultiCategoryPointSet, degrees_clockwise: f64) -> Result<MultiCategoryPointSet> {
    if set.is_empty() {
        return Err(Error::data(Some(&set.sample_id), "empty point set"));
    }
    let (cx, cy) = set.mbr().center();
    let (s, c) = degrees_clockwise.to_radians().sin_cos();
    let points = set
        .points
        .iter()
        .map(|p| {
            let (dx, dy) = (p.x - cx, p.y - cy);
            SpatialPoint {
                category: p.category,
                x: cx + dx * c + dy * s,
                y: cy - dx * s + dy * c,
            }
        })
        .collect();
    set.with_points(points)
}

/// Uniform subsample of `n` points; without replacement when enough points
/// exist, with replacement otherwise.
pub fn sample_points(set: &MultiCategoryPointSet, n: usize, seed: u64) -> Result<MultiCategoryPointSet> {
    if n < 2 {
        return Err(Error::Config(format!("sample size must be at least 2, got {n}")));
    }
    if set.is_empty() {
        return Err(Error::data(Some(&set.sample_id), "empty point set"));
    }
    let mut rng = rng_for(seed, &[]);
    let m = set.len();
    let points = if m >= n {
        index::sample(&mut rng, m, n)
            .into_iter()
            .map(|i| set.points[i])
            .collect()
    } else {
        (0..n).map(|_| set.points[rng.gen_range(0..m)]).collect()
    };
    set.with_points(points)
}

/// Clockwise angles `step, 2·step, …` for `count` rotated copies.
pub fn rotation_schedule(step_degrees: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| step_degrees * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub cut_fractions: Vec<f64>,
    pub rotation_step_degrees: f64,
    pub rotations: usize,
    pub sample_size: Option<usize>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            cut_fractions: vec![0.2, 0.8],
            rotation_step_degrees: 16.0,
            rotations: 3,
            sample_size: Some(1024),
        }
    }
}

/// The original plus every usable MBR half, each in its unrotated and rotated
/// variants, each resampled to `sample_size` points when set.
pub fn augment(set: &MultiCategoryPointSet, config: &AugmentConfig, seed: u64) -> Result<Vec<MultiCategoryPointSet>> {
    let mut bases = vec![set.clone()];
    for &f in &config.cut_fractions {
        let (l, r) = partition_mbr(set, f)?;
        bases.extend(l);
        bases.extend(r);
    }
    let mut angles = vec![0.0];
    angles.extend(rotation_schedule(config.rotation_step_degrees, config.rotations));
    let mut out = Vec::with_capacity(bases.len() * angles.len());
    for (bi, base) in bases.iter().enumerate() {
        for (ri, &angle) in angles.iter().enumerate() {
            let mut s = if angle == 0.0 {
                base.clone()
            } else {
                rotate_sample(base, angle)?
            };
            if let Some(n) = config.sample_size {
                s = sample_points(&s, n, crate::rng::derive_seed(seed, &[bi as u64, ri as u64]))?;
            }
            s.sample_id = format!("{}#b{bi}r{ri}", set.sample_id);
            out.push(s);
        }
    }
    Ok(out)
}
