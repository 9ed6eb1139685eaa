//! Point-set domain types, the expert place-type distance matrix, and the
//! on-disk dataset format.
//!
//! A dataset directory holds a manifest:
//!
//! ```text
//! categories: A,B,C
//! place_types: PT1,PT2
//! distance_matrix: distance_matrix.txt
//! threshold: 2
//! s0001,PT1,1,samples/s0001.csv
//! ```
//!
//! one `category,x,y` table per sample, and a distance-matrix file with the
//! size on the first line followed by one row of reals per line.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::{read_to_string, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoryId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlaceTypeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub usize);

impl fmt::Display for PlaceTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PT#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialPoint {
    pub category: CategoryId,
    pub x: f64,
    pub y: f64,
}

impl SpatialPoint {
    pub fn new(category: usize, x: f64, y: f64) -> Self {
        Self {
            category: CategoryId(category),
            x,
            y,
        }
    }

    pub fn distance_squared(&self, other: &SpatialPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned minimum bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mbr {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Mbr {
    pub fn of(points: &[SpatialPoint]) -> Option<Self> {
        let first = points.first()?;
        let mut mbr = Mbr {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in &points[1..] {
            mbr.min_x = mbr.min_x.min(p.x);
            mbr.min_y = mbr.min_y.min(p.y);
            mbr.max_x = mbr.max_x.max(p.x);
            mbr.max_y = mbr.max_y.max(p.y);
        }
        Some(mbr)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }
}

/// One labeled sample: a multi-category point pattern from a single place-type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCategoryPointSet {
    pub sample_id: String,
    pub place_type: PlaceTypeId,
    pub label: ClassId,
    pub points: Vec<SpatialPoint>,
}

impl MultiCategoryPointSet {
    /// Validates point count and coordinates and shifts the MBR min corner to the origin.
    pub fn new(
        sample_id: impl Into<String>,
        place_type: PlaceTypeId,
        label: ClassId,
        points: Vec<SpatialPoint>,
    ) -> Result<Self> {
        let mut set = Self {
            sample_id: sample_id.into(),
            place_type,
            label,
            points,
        };
        set.check_points()?;
        set.normalize();
        Ok(set)
    }

    fn check_points(&self) -> Result<()> {
        let ctx = Some(self.sample_id.as_str());
        if self.points.len() < 2 {
            return Err(Error::data(
                ctx,
                format!("need at least 2 points, got {}", self.points.len()),
            ));
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(Error::data(ctx, format!("non-finite coordinate at point {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mbr(&self) -> Mbr {
        Mbr::of(&self.points).expect("point set is non-empty")
    }

    pub fn categories(&self) -> Vec<CategoryId> {
        self.points.iter().map(|p| p.category).collect()
    }

    /// Translates so the MBR min corner sits at the origin. Idempotent.
    pub fn normalize(&mut self) {
        let Some(mbr) = Mbr::of(&self.points) else {
            return;
        };
        for p in &mut self.points {
            p.x -= mbr.min_x;
            p.y -= mbr.min_y;
        }
    }

    /// Same sample metadata with a new point list (normalized).
    pub fn with_points(&self, points: Vec<SpatialPoint>) -> Result<Self> {
        Self::new(self.sample_id.clone(), self.place_type, self.label, points)
    }

    pub fn validate(&self, num_categories: usize, num_place_types: usize) -> Result<()> {
        self.check_points()?;
        let ctx = Some(self.sample_id.as_str());
        if self.place_type.0 >= num_place_types {
            return Err(Error::data(
                ctx,
                format!("place-type index {} out of range", self.place_type.0),
            ));
        }
        if let Some(p) = self.points.iter().find(|p| p.category.0 >= num_categories) {
            return Err(Error::data(
                ctx,
                format!("category index {} out of range", p.category.0),
            ));
        }
        Ok(())
    }
}

/// Expert-defined relative distances between place-types plus the selection threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceTypeDistanceMatrix {
    entries: Vec<Vec<f64>>,
    threshold: f64,
}

impl PlaceTypeDistanceMatrix {
    pub fn new(entries: Vec<Vec<f64>>, threshold: f64) -> Result<Self> {
        validate_distance_matrix(entries, threshold)
    }

    /// Identity-like matrix: 1 on the diagonal, `off` elsewhere.
    pub fn uniform(size: usize, off: f64, threshold: f64) -> Result<Self> {
        let entries = (0..size)
            .map(|i| (0..size).map(|j| if i == j { 1.0 } else { off }).collect())
            .collect();
        Self::new(entries, threshold)
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn distance(&self, a: PlaceTypeId, b: PlaceTypeId) -> f64 {
        self.entries[a.0][b.0]
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(self.entries.clone(), threshold)
    }
}

/// Accepts exactly the square, symmetric matrices with unit diagonal and all entries ≥ 1.
pub fn validate_distance_matrix(
    entries: Vec<Vec<f64>>,
    threshold: f64,
) -> Result<PlaceTypeDistanceMatrix> {
    let n = entries.len();
    if n == 0 {
        return Err(Error::DistanceMatrix("empty matrix".into()));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::DistanceMatrix(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    for (i, row) in entries.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DistanceMatrix(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    for i in 0..n {
        if entries[i][i] != 1.0 {
            return Err(Error::DistanceMatrix(format!(
                "diagonal entry ({i},{i}) is {}, expected 1",
                entries[i][i]
            )));
        }
        for j in 0..n {
            let v = entries[i][j];
            if !v.is_finite() || v < 1.0 {
                return Err(Error::DistanceMatrix(format!(
                    "entry ({i},{j}) = {v} is below 1"
                )));
            }
            if v != entries[j][i] {
                return Err(Error::DistanceMatrix(format!(
                    "asymmetric entries ({i},{j}) = {v} vs ({j},{i}) = {}",
                    entries[j][i]
                )));
            }
        }
    }
    Ok(PlaceTypeDistanceMatrix { entries, threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub category_names: Vec<String>,
    pub place_type_names: Vec<String>,
    pub samples: Vec<MultiCategoryPointSet>,
    pub distance_matrix: PlaceTypeDistanceMatrix,
}

impl Dataset {
    pub fn new(
        category_names: Vec<String>,
        place_type_names: Vec<String>,
        samples: Vec<MultiCategoryPointSet>,
        distance_matrix: PlaceTypeDistanceMatrix,
    ) -> Result<Self> {
        let ds = Self {
            category_names,
            place_type_names,
            samples,
            distance_matrix,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.category_names.is_empty() {
            return Err(Error::data(None, "empty category vocabulary"));
        }
        if self.place_type_names.is_empty() {
            return Err(Error::data(None, "empty place-type vocabulary"));
        }
        if self.distance_matrix.size() != self.place_type_names.len() {
            return Err(Error::DistanceMatrix(format!(
                "matrix size {} does not match {} place-types",
                self.distance_matrix.size(),
                self.place_type_names.len()
            )));
        }
        let mut ids = HashSet::new();
        for s in &self.samples {
            s.validate(self.num_categories(), self.num_place_types())?;
            if !ids.insert(s.sample_id.as_str()) {
                return Err(Error::data(Some(&s.sample_id), "duplicate sample id"));
            }
        }
        let n_classes = self.num_classes();
        for c in 0..n_classes {
            if !self.samples.iter().any(|s| s.label.0 == c) {
                return Err(Error::data(None, format!("no sample carries class label {c}")));
            }
        }
        Ok(())
    }

    pub fn num_categories(&self) -> usize {
        self.category_names.len()
    }

    pub fn num_place_types(&self) -> usize {
        self.place_type_names.len()
    }

    /// One more than the largest label present (labels are dense from 0).
    pub fn num_classes(&self) -> usize {
        self.samples
            .iter()
            .map(|s| s.label.0 + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn category_by_name(&self, name: &str) -> Option<CategoryId> {
        self.category_names
            .iter()
            .position(|c| c == name)
            .map(CategoryId)
    }

    pub fn place_type_by_name(&self, name: &str) -> Option<PlaceTypeId> {
        self.place_type_names
            .iter()
            .position(|c| c == name)
            .map(PlaceTypeId)
    }

    pub fn place_types(&self) -> impl Iterator<Item = PlaceTypeId> {
        (0..self.num_place_types()).map(PlaceTypeId)
    }
}

const MANIFEST_FILE: &str = "manifest.txt";
const MATRIX_FILE: &str = "distance_matrix.txt";

/// Resolves a dataset argument that may be either the manifest or its directory.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn load_dataset(manifest: &Path) -> Result<Dataset> {
    let manifest = manifest_path(manifest);
    let base = manifest.parent().unwrap_or(Path::new("."));
    let text = read_to_string(&manifest)?;

    let mut categories = None;
    let mut place_types = None;
    let mut matrix_path = None;
    let mut threshold = None;
    let mut rows = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once(':') {
            let value = value.trim();
            match key.trim() {
                "categories" => categories = Some(split_list(value)),
                "place_types" => place_types = Some(split_list(value)),
                "distance_matrix" => matrix_path = Some(base.join(value)),
                "threshold" => {
                    threshold = Some(value.parse::<f64>().map_err(|e| {
                        parse_err(&manifest, lineno, format!("bad threshold: {e}"))
                    })?)
                }
                other => {
                    return Err(parse_err(
                        &manifest,
                        lineno,
                        format!("unknown header key `{other}`"),
                    ))
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(
                &manifest,
                lineno,
                "sample line needs `id,place_type,label,path`",
            ));
        }
        rows.push((lineno, fields.iter().map(|s| s.to_string()).collect::<Vec<_>>()));
    }

    let categories =
        categories.ok_or_else(|| parse_err(&manifest, 0, "missing `categories` header"))?;
    let place_types =
        place_types.ok_or_else(|| parse_err(&manifest, 0, "missing `place_types` header"))?;
    let matrix_path =
        matrix_path.ok_or_else(|| parse_err(&manifest, 0, "missing `distance_matrix` header"))?;
    let threshold =
        threshold.ok_or_else(|| parse_err(&manifest, 0, "missing `threshold` header"))?;

    let entries = load_matrix_file(&matrix_path)?;
    let distance_matrix = validate_distance_matrix(entries, threshold)?;

    let mut samples = Vec::with_capacity(rows.len());
    for (lineno, f) in rows {
        let id = f[0].clone();
        let pt = place_types
            .iter()
            .position(|p| *p == f[1])
            .ok_or_else(|| Error::data(Some(&id), format!("unknown place-type `{}`", f[1])))?;
        let label: usize = f[2].parse().map_err(|e| {
            parse_err(&manifest, lineno, format!("bad class label `{}`: {e}", f[2]))
        })?;
        let points = load_sample_file(&base.join(&f[3]), &id, &categories)?;
        samples.push(MultiCategoryPointSet::new(
            id,
            PlaceTypeId(pt),
            ClassId(label),
            points,
        )?);
    }

    Dataset::new(categories, place_types, samples, distance_matrix)
}

fn load_matrix_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty distance-matrix file"))?;
    let size: usize = first
        .trim()
        .parse()
        .map_err(|e| parse_err(path, 1, format!("bad size: {e}")))?;
    let mut rows = Vec::with_capacity(size);
    for (idx, line) in lines {
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(path, idx + 1, format!("bad entry `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != size {
        return Err(parse_err(
            path,
            0,
            format!("declared size {size} but found {} rows", rows.len()),
        ));
    }
    Ok(rows)
}

fn load_sample_file(path: &Path, sample_id: &str, categories: &[String]) -> Result<Vec<SpatialPoint>> {
    let text = read_to_string(path).map_err(|e| match e {
        Error::Io { source, .. } => Error::data(
            Some(sample_id),
            format!("cannot read {}: {source}", path.display()),
        ),
        other => other,
    })?;
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("category")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(path, idx + 1, "expected `category,x,y`"));
        }
        let cat = categories.iter().position(|c| c == fields[0]).ok_or_else(|| {
            Error::data(Some(sample_id), format!("unknown category `{}`", fields[0]))
        })?;
        let x: f64 = fields[1]
            .parse()
            .map_err(|e| parse_err(path, idx + 1, format!("bad x: {e}")))?;
        let y: f64 = fields[2]
            .parse()
            .map_err(|e| parse_err(path, idx + 1, format!("bad y: {e}")))?;
        points.push(SpatialPoint::new(cat, x, y));
    }
    Ok(points)
}

/// Writes `dataset` under `dir` in the manifest format. Coordinates use the
/// shortest representation that round-trips exactly.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let mut manifest = String::new();
    manifest.push_str(&format!("categories: {}\n", dataset.category_names.join(",")));
    manifest.push_str(&format!("place_types: {}\n", dataset.place_type_names.join(",")));
    manifest.push_str(&format!("distance_matrix: {MATRIX_FILE}\n"));
    manifest.push_str(&format!("threshold: {}\n", dataset.distance_matrix.threshold()));

    let mut matrix = format!("{}\n", dataset.distance_matrix.size());
    for row in dataset.distance_matrix.entries() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        matrix.push_str(&cells.join(" "));
        matrix.push('\n');
    }
    write_atomic(&dir.join(MATRIX_FILE), matrix.as_bytes())?;

    for s in &dataset.samples {
        let rel = format!("samples/{}.csv", s.sample_id);
        let mut table = String::from("category,x,y\n");
        for p in &s.points {
            table.push_str(&format!(
                "{},{},{}\n",
                dataset.category_names[p.category.0], p.x, p.y
            ));
        }
        write_atomic(&dir.join(&rel), table.as_bytes())?;
        manifest.push_str(&format!(
            "{},{},{},{}\n",
            s.sample_id, dataset.place_type_names[s.place_type.0], s.label.0, rel
        ));
    }
    let path = dir.join(MANIFEST_FILE);
    write_atomic(&path, manifest.as_bytes())?;
    Ok(path)
}
