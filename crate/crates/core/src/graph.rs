//! Directed k-nearest-neighbor graphs over a point set's locations.

use serde::{Deserialize, Serialize};

use crate::data::SpatialPoint;
use crate::error::{Error, Result};

/// Above this many points the grid-bucket search is used instead of the exhaustive scan.
pub const EXHAUSTIVE_LIMIT: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnGraph {
    k: usize,
    cutoff: Option<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl KnnGraph {
    /// Wraps explicit neighbor lists. Used for hand-built graphs in tests and bindings.
    pub fn from_neighbors(neighbors: Vec<Vec<usize>>, k: usize) -> Result<Self> {
        let n = neighbors.len();
        for (s, list) in neighbors.iter().enumerate() {
            if list.iter().any(|&u| u >= n || u == s) {
                return Err(Error::Graph(format!("invalid neighbor list for node {s}")));
            }
        }
        Ok(Self {
            k,
            cutoff: None,
            neighbors,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn neighbor_lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }
}

/// For every node, its `k` nearest other nodes ordered by (distance, index),
/// with anything farther than `cutoff` dropped.
pub fn build_knn_graph(points: &[SpatialPoint], k: usize, cutoff: Option<f64>) -> Result<KnnGraph> {
    if k == 0 {
        return Err(Error::Graph("k must be at least 1".into()));
    }
    if points.len() < 2 {
        return Err(Error::Graph(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(c) = cutoff {
        if !(c > 0.0) {
            return Err(Error::Graph(format!("cutoff must be positive, got {c}")));
        }
    }
    let cutoff_sq = cutoff.map(|c| c * c);
    let neighbors = if points.len() <= EXHAUSTIVE_LIMIT {
        exhaustive(points, k, cutoff_sq)
    } else {
        GridIndex::new(points, k).query_all(points, k, cutoff_sq)
    };
    Ok(KnnGraph {
        k,
        cutoff,
        neighbors,
    })
}

fn select(mut cand: Vec<(f64, usize)>, k: usize, cutoff_sq: Option<f64>) -> Vec<usize> {
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.into_iter()
        .take(k)
        .take_while(|&(d, _)| cutoff_sq.is_none_or(|c| d <= c))
        .map(|(_, i)| i)
        .collect()
}

fn exhaustive(points: &[SpatialPoint], k: usize, cutoff_sq: Option<f64>) -> Vec<Vec<usize>> {
    (0..points.len())
        .map(|s| {
            let cand = points
                .iter()
                .enumerate()
                .filter(|&(u, _)| u != s)
                .map(|(u, p)| (points[s].distance_squared(p), u))
                .collect();
            select(cand, k, cutoff_sq)
        })
        .collect()
}

struct GridIndex {
    min_x: f64,
    min_y: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl GridIndex {
    fn new(points: &[SpatialPoint], k: usize) -> Self {
        let mbr = crate::data::Mbr::of(points).expect("non-empty");
        let area = (mbr.width() * mbr.height()).max(f64::MIN_POSITIVE);
        // about k points per cell
        let mut cell = (area * k as f64 / points.len() as f64).sqrt();
        if !(cell > 0.0 && cell.is_finite()) {
            cell = mbr.width().max(mbr.height()).max(1.0);
        }
        let nx = ((mbr.width() / cell).floor() as usize + 1).min(1 << 12);
        let ny = ((mbr.height() / cell).floor() as usize + 1).min(1 << 12);
        let cell = cell
            .max(mbr.width() / nx as f64)
            .max(mbr.height() / ny as f64);
        let mut idx = Self {
            min_x: mbr.min_x,
            min_y: mbr.min_y,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = idx.cell_of(p);
            idx.buckets[cy * nx + cx].push(i);
        }
        idx
    }

    fn cell_of(&self, p: &SpatialPoint) -> (usize, usize) {
        let cx = (((p.x - self.min_x) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = (((p.y - self.min_y) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    fn query_all(&self, points: &[SpatialPoint], k: usize, cutoff_sq: Option<f64>) -> Vec<Vec<usize>> {
        let max_ring = self.nx.max(self.ny);
        (0..points.len())
            .map(|s| {
                let q = &points[s];
                let (cx, cy) = self.cell_of(q);
                let mut cand: Vec<(f64, usize)> = Vec::new();
                for ring in 0..=max_ring {
                    self.visit_ring(cx, cy, ring, |u| {
                        if u != s {
                            cand.push((q.distance_squared(&points[u]), u));
                        }
                    });
                    // Unvisited points lie at least `ring * cell` away.
                    let bound = ring as f64 * self.cell;
                    let bound_sq = bound * bound;
                    if cutoff_sq.is_some_and(|c| bound_sq > c) {
                        break;
                    }
                    if cand.len() >= k {
                        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                        cand.truncate(k);
                        if cand[k - 1].0 < bound_sq {
                            break;
                        }
                    }
                }
                select(cand, k, cutoff_sq)
            })
            .collect()
    }

    fn visit_ring(&self, cx: usize, cy: usize, ring: usize, mut f: impl FnMut(usize)) {
        let (cx, cy, r) = (cx as isize, cy as isize, ring as isize);
        for y in (cy - r)..=(cy + r) {
            if y < 0 || y >= self.ny as isize {
                continue;
            }
            let on_edge_row = y == cy - r || y == cy + r;
            let step = if on_edge_row || r == 0 { 1 } else { (2 * r) as usize };
            let mut x = cx - r;
            while x <= cx + r {
                if x >= 0 && x < self.nx as isize {
                    for &u in &self.buckets[y as usize * self.nx + x as usize] {
                        f(u);
                    }
                }
                x += step as isize;
            }
        }
    }
}
