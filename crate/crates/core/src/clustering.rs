//! DBSCAN over accumulated detections and periodic map snapshots.

use crate::exec::Execution;
use crate::geometry::DetectedPoint;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Neighbourhood radius, cm.
    pub eps: f64,
    /// Neighbours (the point itself included) needed for a core point.
    pub min_samples: usize,
    /// New points required before the buffer is re-clustered.
    pub min_peaks: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            eps: 20.0,
            min_samples: 20,
            min_peaks: 50,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(format!("eps must be positive (got {})", self.eps));
        }
        if self.min_samples < 1 {
            return Err("min_samples must be >= 1".into());
        }
        if self.min_peaks < self.min_samples {
            return Err(format!(
                "min_peaks ({}) must be >= min_samples ({})",
                self.min_peaks, self.min_samples
            ));
        }
        Ok(())
    }
}

/// Canonical point order: timestamp, then x, then y. Remaining fields only
/// break exact ties so that the order is total.
pub fn point_order(a: &DetectedPoint, b: &DetectedPoint) -> Ordering {
    a.timestamp_ms
        .cmp(&b.timestamp_ms)
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
        .then(a.snr_score.total_cmp(&b.snr_score))
        .then_with(|| a.receiver_id.cmp(&b.receiver_id))
        .then(a.aoa.total_cmp(&b.aoa))
        .then(a.range_rx.total_cmp(&b.range_rx))
}

/// Per-point DBSCAN labels, indexed like the input slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    /// Cluster id, or `None` for noise.
    pub cluster: Vec<Option<usize>>,
    pub core: Vec<bool>,
    pub n_clusters: usize,
}

/// Square cells of side just under `eps / sqrt(2)`, so any two points that
/// share a cell are neighbours. Cells at most two steps apart in each axis
/// can hold neighbours; cells further apart cannot.
struct Grid {
    cells: Vec<Vec<usize>>,
    /// Per cell, the occupied cells within two steps, itself included.
    neighbours: Vec<Vec<usize>>,
    /// Per cell, the bounding box of its points: (min x, min y, max x, max y).
    bounds: Vec<(f64, f64, f64, f64)>,
    point_cell: Vec<usize>,
}

impl Grid {
    fn new(xy: &[(f64, f64)], eps: f64) -> Self {
        let side = eps / std::f64::consts::SQRT_2 * (1.0 - 1e-9);
        let mut index: HashMap<(i64, i64), usize> = HashMap::new();
        let mut cells: Vec<Vec<usize>> = Vec::new();
        let mut keys = Vec::new();
        let mut point_cell = Vec::with_capacity(xy.len());
        for (i, &(x, y)) in xy.iter().enumerate() {
            let key = ((x / side).floor() as i64, (y / side).floor() as i64);
            let c = *index.entry(key).or_insert_with(|| {
                cells.push(Vec::new());
                keys.push(key);
                cells.len() - 1
            });
            cells[c].push(i);
            point_cell.push(c);
        }
        let neighbours = keys
            .iter()
            .map(|&(kx, ky)| {
                (-2..=2)
                    .flat_map(|dx| (-2..=2).map(move |dy| (kx + dx, ky + dy)))
                    .filter_map(|k| index.get(&k).copied())
                    .collect()
            })
            .collect();
        let bounds = cells
            .iter()
            .map(|pts| {
                pts.iter().fold(
                    (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                    |(x0, y0, x1, y1), &i| {
                        let (x, y) = xy[i];
                        (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
                    },
                )
            })
            .collect();
        Self {
            cells,
            neighbours,
            bounds,
            point_cell,
        }
    }

    /// True when every point of cell `c` is within range of `p`.
    fn covers(&self, c: usize, p: (f64, f64), eps2: f64) -> bool {
        let (x0, y0, x1, y1) = self.bounds[c];
        let dx = (p.0 - x0).abs().max((p.0 - x1).abs());
        let dy = (p.1 - y0).abs().max((p.1 - y1).abs());
        dx * dx + dy * dy <= eps2
    }
}

fn within(a: (f64, f64), b: (f64, f64), eps2: f64) -> bool {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    dx * dx + dy * dy <= eps2
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// DBSCAN on coordinates already in canonical order.
///
/// Clusters are numbered by their lowest-index core point; a border point
/// joins the lowest-numbered cluster with a core point in range.
pub fn dbscan_labels(xy: &[(f64, f64)], eps: f64, min_samples: usize, exec: Execution) -> Labels {
    let n = xy.len();
    let eps2 = eps * eps;
    let grid = Grid::new(xy, eps);

    let core: Vec<bool> = exec.map_range(n, |i| {
        let own = grid.point_cell[i];
        if grid.cells[own].len() >= min_samples {
            return true;
        }
        let mut count = 0usize;
        for &c in &grid.neighbours[own] {
            if grid.covers(c, xy[i], eps2) {
                count += grid.cells[c].len();
                if count >= min_samples {
                    return true;
                }
                continue;
            }
            for &j in &grid.cells[c] {
                if within(xy[i], xy[j], eps2) {
                    count += 1;
                    if count >= min_samples {
                        return true;
                    }
                }
            }
        }
        false
    });

    // core points of one cell are mutually in range, so connectivity can be
    // resolved between cells
    let cores: Vec<Vec<usize>> = grid
        .cells
        .iter()
        .map(|pts| pts.iter().copied().filter(|&i| core[i]).collect())
        .collect();
    let pairs: Vec<(usize, usize)> = (0..grid.cells.len())
        .filter(|&a| !cores[a].is_empty())
        .flat_map(|a| {
            grid.neighbours[a]
                .iter()
                .copied()
                .filter(move |&b| b > a)
                .map(move |b| (a, b))
        })
        .filter(|&(_, b)| !cores[b].is_empty())
        .collect();
    let linked = exec.map(&pairs, |&(a, b)| {
        cores[a]
            .iter()
            .any(|&p| cores[b].iter().any(|&q| within(xy[p], xy[q], eps2)))
    });
    let mut parent: Vec<usize> = (0..grid.cells.len()).collect();
    for (&(a, b), _) in pairs.iter().zip(&linked).filter(|(_, l)| **l) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }

    // number components by their lowest core index
    let mut first_core: HashMap<usize, usize> = HashMap::new();
    for (c, members) in cores.iter().enumerate() {
        if let Some(&lowest) = members.first() {
            let root = find(&mut parent, c);
            let e = first_core.entry(root).or_insert(lowest);
            *e = (*e).min(lowest);
        }
    }
    let mut order: Vec<(usize, usize)> = first_core.into_iter().map(|(r, i)| (i, r)).collect();
    order.sort_unstable();
    let mut root_id: HashMap<usize, usize> = HashMap::new();
    for (id, &(_, root)) in order.iter().enumerate() {
        root_id.insert(root, id);
    }
    let cell_id: Vec<Option<usize>> = (0..grid.cells.len())
        .map(|c| {
            if cores[c].is_empty() {
                None
            } else {
                root_id.get(&find(&mut parent, c)).copied()
            }
        })
        .collect();

    let cluster: Vec<Option<usize>> = exec.map_range(n, |i| {
        let own = grid.point_cell[i];
        if core[i] {
            return cell_id[own];
        }
        let mut best: Option<usize> = None;
        for &c in &grid.neighbours[own] {
            if let Some(id) = cell_id[c] {
                if best.is_none_or(|b| id < b) && cores[c].iter().any(|&q| within(xy[i], xy[q], eps2)) {
                    best = Some(id);
                }
            }
        }
        best
    });
    Labels {
        cluster,
        core,
        n_clusters: order.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: usize,
    /// Members in canonical order.
    pub members: Vec<DetectedPoint>,
    pub centroid: (f64, f64),
    pub mean_snr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    pub noise: Vec<DetectedPoint>,
}

/// Arithmetic mean of member coordinates; `None` for an empty slice.
pub fn cluster_centroid(members: &[DetectedPoint]) -> Option<(f64, f64)> {
    if members.is_empty() {
        return None;
    }
    let n = members.len() as f64;
    let (sx, sy) = members
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Some((sx / n, sy / n))
}

pub fn dbscan(points: &[DetectedPoint], params: &ClusterParams, exec: Execution) -> Clustering {
    let mut sorted: Vec<&DetectedPoint> = points.iter().collect();
    sorted.sort_by(|a, b| point_order(a, b));
    let xy: Vec<(f64, f64)> = sorted.iter().map(|p| (p.x, p.y)).collect();
    let labels = dbscan_labels(&xy, params.eps, params.min_samples, exec);

    let mut groups: Vec<Vec<DetectedPoint>> = vec![Vec::new(); labels.n_clusters];
    let mut noise = Vec::new();
    for (p, label) in sorted.into_iter().zip(&labels.cluster) {
        match label {
            Some(id) => groups[*id].push(p.clone()),
            None => noise.push(p.clone()),
        }
    }
    let clusters = groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let centroid = cluster_centroid(&members).expect("clusters contain a core point");
            let mean_snr = members.iter().map(|p| p.snr_score).sum::<f64>() / members.len() as f64;
            Cluster {
                id,
                members,
                centroid,
                mean_snr,
            }
        })
        .collect();
    Clustering { clusters, noise }
}

/// Member point as written to snapshots: `[x, y, snr_score]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPoint(
    pub f64,
    pub f64,
    #[serde(with = "crate::json_f64")] pub f64,
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotCluster {
    pub id: usize,
    pub centroid: [f64; 2],
    pub n: usize,
    #[serde(with = "crate::json_f64")]
    pub mean_snr: f64,
    pub points: Vec<SnapshotPoint>,
}

/// Immutable map state after one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub t_ms: i64,
    pub clusters: Vec<SnapshotCluster>,
    pub noise_count: usize,
}

impl MapSnapshot {
    pub fn from_clustering(t_ms: i64, c: &Clustering) -> Self {
        Self {
            t_ms,
            clusters: c
                .clusters
                .iter()
                .map(|cl| SnapshotCluster {
                    id: cl.id,
                    centroid: [cl.centroid.0, cl.centroid.1],
                    n: cl.members.len(),
                    mean_snr: cl.mean_snr,
                    points: cl
                        .members
                        .iter()
                        .map(|p| SnapshotPoint(p.x, p.y, p.snr_score))
                        .collect(),
                })
                .collect(),
            noise_count: c.noise.len(),
        }
    }
}

/// Buffers detections and re-clusters the whole buffer every `min_peaks`
/// new points. Noise points stay buffered and are re-tested on later runs.
#[derive(Debug, Clone)]
pub struct MapAccumulator {
    params: ClusterParams,
    exec: Execution,
    buffer: Vec<DetectedPoint>,
    pending: usize,
}

impl MapAccumulator {
    pub fn new(params: ClusterParams, exec: Execution) -> Self {
        Self {
            params,
            exec,
            buffer: Vec::new(),
            pending: 0,
        }
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn pending(&self) -> usize {
        self.pending
    }

    pub fn push(&mut self, point: DetectedPoint) -> Option<MapSnapshot> {
        self.buffer.push(point);
        self.pending += 1;
        if self.pending >= self.params.min_peaks {
            Some(self.run())
        } else {
            None
        }
    }

    /// Clusters any points that arrived since the last run.
    pub fn finish(&mut self) -> Option<MapSnapshot> {
        (self.pending > 0).then(|| self.run())
    }

    /// Clusters the current buffer without resetting the pending count.
    pub fn current(&self) -> Clustering {
        dbscan(&self.buffer, &self.params, self.exec)
    }

    fn run(&mut self) -> MapSnapshot {
        self.pending = 0;
        let t_ms = self.buffer.iter().map(|p| p.timestamp_ms).max().unwrap_or(0);
        MapSnapshot::from_clustering(t_ms, &self.current())
    }
}
