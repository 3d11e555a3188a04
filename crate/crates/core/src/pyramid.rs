//! Multi-level point hierarchy built by grid pooling, plus analytic local
//! geometry features (oriented normals and neighborhood statistics).

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::curves::{CurveKind, CurveParams};
use crate::error::{Error, Result};
use crate::geom::{self, Point3};
use crate::spatial::{KdTree, SerializedIndex};

/// Row-major per-point feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidParams(format!(
                "feature buffer of length {} is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(Features { dim, data })
    }

    pub fn zeros(dim: usize, n: usize) -> Self {
        Features {
            dim,
            data: vec![0.0; dim * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Point3>,
    pub normals: Option<Vec<Point3>>,
    pub features: Option<Features>,
}

impl PointCloud {
    pub fn new(positions: Vec<Point3>) -> Self {
        PointCloud {
            positions,
            normals: None,
            features: None,
        }
    }

    pub fn with_normals(positions: Vec<Point3>, normals: Vec<Point3>) -> Self {
        PointCloud {
            positions,
            normals: Some(normals),
            features: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, Features::dim)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.positions.iter().position(|p| !geom::is_finite(*p)) {
            return Err(Error::InvalidParams(format!("position {i} is not finite")));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.len() {
                return Err(Error::InvalidParams("normal count mismatch".into()));
            }
            if let Some(i) = normals
                .iter()
                .position(|n| (geom::norm(*n) - 1.0).abs() > 1e-6)
            {
                return Err(Error::InvalidParams(format!("normal {i} is not unit length")));
            }
        }
        if let Some(f) = &self.features {
            if f.len() != self.len() {
                return Err(Error::InvalidParams("feature row count mismatch".into()));
            }
        }
        Ok(())
    }

    /// Sub-cloud of the given point indices, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            features: self.features.as_ref().map(|f| Features {
                dim: f.dim,
                data: indices.iter().flat_map(|&i| f.row(i).iter().copied()).collect(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PyramidLevel {
    pub cloud: PointCloud,
    pub index: SerializedIndex,
    /// Nominal spacing of this level in meters.
    pub pool_size: f64,
    /// For every level-0 point, the index of the point of this level that
    /// absorbed it.
    pub assignment: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct FeaturePyramid {
    levels: Vec<PyramidLevel>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PyramidConfig {
    pub levels: usize,
    /// Pooling cell of level 1 in meters; level `s` pools at
    /// `base_pool * 2^(s-1)`.
    pub base_pool: f64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        PyramidConfig {
            levels: 4,
            base_pool: 0.02,
        }
    }
}

impl PyramidConfig {
    /// Nominal spacing of level `s`. Level 0 is the raw cloud and is assigned
    /// half the level-1 cell so spacing doubles at every level.
    pub fn pool_size(&self, level: usize) -> f64 {
        self.base_pool * 2f64.powi(level as i32 - 1)
    }
}

impl FeaturePyramid {
    /// Level 0 is `cloud`; every coarser level pools level 0 on its own grid,
    /// keeping member centroids and averaged features. All levels share the
    /// same fine serialization grid.
    pub fn build(
        cloud: &PointCloud,
        cfg: &PyramidConfig,
        curve: CurveParams,
        kind: CurveKind,
    ) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if cfg.levels == 0 {
            return Err(Error::InvalidParams("pyramid needs at least one level".into()));
        }
        if !(cfg.base_pool > 0.0) {
            return Err(Error::InvalidParams("base pool size must be positive".into()));
        }
        cloud.validate()?;
        let mut levels = Vec::with_capacity(cfg.levels);
        levels.push(PyramidLevel {
            cloud: cloud.clone(),
            index: SerializedIndex::build(&cloud.positions, curve, kind)?,
            pool_size: cfg.pool_size(0),
            assignment: (0..cloud.len() as u32).collect(),
        });
        for s in 1..cfg.levels {
            let pool = cfg.pool_size(s);
            let (pooled, assignment) = grid_pool(cloud, pool, curve.origin);
            let index = SerializedIndex::build(&pooled.positions, curve, kind)?;
            levels.push(PyramidLevel {
                cloud: pooled,
                index,
                pool_size: pool,
                assignment,
            });
        }
        Ok(FeaturePyramid { levels })
    }

    pub fn levels(&self) -> &[PyramidLevel] {
        &self.levels
    }

    pub fn level(&self, s: usize) -> &PyramidLevel {
        &self.levels[s]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.levels[0].cloud.feature_dim()
    }

    pub fn base(&self) -> &PointCloud {
        &self.levels[0].cloud
    }
}

/// Cell of `p` on a grid of spacing `pool` anchored at `origin`.
pub fn pool_cell(p: Point3, pool: f64, origin: Point3) -> [i64; 3] {
    [0, 1, 2].map(|a| ((p[a] - origin[a]) / pool).floor() as i64)
}

/// Centroid pooling. Cells are numbered in order of first occupancy.
fn grid_pool(cloud: &PointCloud, pool: f64, origin: Point3) -> (PointCloud, Vec<u32>) {
    let mut slot: HashMap<[i64; 3], u32> = HashMap::new();
    let mut assignment = Vec::with_capacity(cloud.len());
    let mut counts: Vec<u32> = Vec::new();
    for &p in &cloud.positions {
        let next = counts.len() as u32;
        let id = *slot.entry(pool_cell(p, pool, origin)).or_insert(next);
        if id == next {
            counts.push(0);
        }
        counts[id as usize] += 1;
        assignment.push(id);
    }
    let m = counts.len();
    let mut pos = vec![[0.0; 3]; m];
    for (&p, &id) in cloud.positions.iter().zip(&assignment) {
        pos[id as usize] = geom::add(pos[id as usize], p);
    }
    for (p, &c) in pos.iter_mut().zip(&counts) {
        *p = geom::scale(*p, 1.0 / c as f64);
    }
    let features = cloud.features.as_ref().map(|f| {
        let mut out = Features::zeros(f.dim(), m);
        for (i, &id) in assignment.iter().enumerate() {
            for (o, v) in out.row_mut(id as usize).iter_mut().zip(f.row(i)) {
                *o += v;
            }
        }
        for (id, &c) in counts.iter().enumerate() {
            for o in out.row_mut(id) {
                *o /= c as f64;
            }
        }
        out
    });
    let normals = cloud.normals.as_ref().map(|normals| {
        let mut sum = vec![[0.0; 3]; m];
        let mut first = vec![None; m];
        for (n, &id) in normals.iter().zip(&assignment) {
            sum[id as usize] = geom::add(sum[id as usize], *n);
            first[id as usize].get_or_insert(*n);
        }
        sum.into_iter()
            .zip(first)
            .map(|(s, f)| geom::normalize(s).unwrap_or_else(|| f.unwrap_or([0.0, 0.0, 1.0])))
            .collect()
    });
    (
        PointCloud {
            positions: pos,
            normals,
            features,
        },
        assignment,
    )
}

/// Width of the analytic feature vector: normal (3), centroid offset (3),
/// mean neighbor distance (1), planarity residual (1).
pub const GEOMETRY_FEATURE_DIM: usize = 8;

#[derive(Debug, Clone)]
pub struct LocalGeometry {
    /// Input positions with estimated normals and features attached.
    pub cloud: PointCloud,
    /// Points whose neighborhood was rank deficient. Their normal (and the
    /// normal part of their feature) is zero.
    pub degenerate: Vec<bool>,
}

impl LocalGeometry {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

struct PointFit {
    normal: Option<Point3>,
    feature: [f64; GEOMETRY_FEATURE_DIM],
    neighbors: Vec<usize>,
}

/// Best-fit plane per point over its `k` nearest other points, with normals
/// oriented consistently by propagation along a minimum spanning tree of the
/// neighbor graph.
pub fn estimate_local_geometry(cloud: &PointCloud, k: usize) -> Result<LocalGeometry> {
    let n = cloud.len();
    if k < 3 || n <= k {
        return Err(Error::InvalidParams(format!(
            "local geometry needs N > k >= 3, got N = {n}, k = {k}"
        )));
    }
    let tree = KdTree::build(&cloud.positions);
    let fits: Vec<PointFit> = (0..n)
        .into_par_iter()
        .map(|i| fit_point(&tree, i, k))
        .collect();

    let mut normals: Vec<Option<Point3>> = fits.iter().map(|f| f.normal).collect();
    let adjacency = symmetric_adjacency(&fits);
    orient_normals(&cloud.positions, &mut normals, &adjacency);

    let mut features = Features::zeros(GEOMETRY_FEATURE_DIM, n);
    let mut degenerate = vec![false; n];
    let mut out_normals = Vec::with_capacity(n);
    for (i, fit) in fits.iter().enumerate() {
        let row = features.row_mut(i);
        row.copy_from_slice(&fit.feature);
        match normals[i] {
            Some(nrm) => {
                row[..3].copy_from_slice(&nrm);
                out_normals.push(nrm);
            }
            None => {
                degenerate[i] = true;
                out_normals.push([0.0; 3]);
            }
        }
    }
    Ok(LocalGeometry {
        cloud: PointCloud {
            positions: cloud.positions.clone(),
            normals: Some(out_normals),
            features: Some(features),
        },
        degenerate,
    })
}

fn fit_point(tree: &KdTree, i: usize, k: usize) -> PointFit {
    let points = tree.points();
    let p = points[i];
    let mut found = tree.knn(p, k + 1).entries;
    match found.iter().position(|e| e.0 == i) {
        Some(at) => {
            found.remove(at);
        }
        None => {
            found.truncate(k);
        }
    }
    let neighbors: Vec<usize> = found.iter().map(|e| e.0).collect();
    let mean_dist = found.iter().map(|e| e.1).sum::<f64>() / found.len() as f64;

    let mut centroid = p;
    for &j in &neighbors {
        centroid = geom::add(centroid, points[j]);
    }
    centroid = geom::scale(centroid, 1.0 / (neighbors.len() + 1) as f64);
    let mut cov = Matrix3::<f64>::zeros();
    for q in std::iter::once(p).chain(neighbors.iter().map(|&j| points[j])) {
        let d = Vector3::from(geom::sub(q, centroid));
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l0, l1, l2) = (
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
        eig.eigenvalues[order[2]].max(0.0),
    );
    let trace = l0 + l1 + l2;
    // Rank below two: no plane is determined.
    let degenerate = !(l2 > 0.0) || l1 <= 1e-10 * l2;
    let normal = if degenerate {
        None
    } else {
        let v = eig.eigenvectors.column(order[0]);
        geom::normalize([v[0], v[1], v[2]])
    };
    let offset = geom::sub(centroid, p);
    let residual = if trace > 0.0 { l0 / trace } else { 0.0 };
    let nrm = normal.unwrap_or([0.0; 3]);
    PointFit {
        normal,
        feature: [
            nrm[0], nrm[1], nrm[2], offset[0], offset[1], offset[2], mean_dist, residual,
        ],
        neighbors,
    }
}

fn symmetric_adjacency(fits: &[PointFit]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = fits.iter().map(|f| f.neighbors.clone()).collect();
    for (i, f) in fits.iter().enumerate() {
        for &j in &f.neighbors {
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

struct EdgeKey(f64, usize, usize);

impl PartialEq for EdgeKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for EdgeKey {}

impl PartialOrd for EdgeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EdgeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .total_cmp(&other.0)
            .then(self.1.cmp(&other.1))
            .then(self.2.cmp(&other.2))
    }
}

/// Prim's traversal over edges weighted `1 - |n_i . n_j|`. Each component is
/// seeded at its largest-x point, whose outward normal has non-negative x.
/// Degenerate points pass on the reference normal of their parent.
fn orient_normals(positions: &[Point3], normals: &mut [Option<Point3>], adj: &[Vec<usize>]) {
    let n = positions.len();
    let mut by_x: Vec<usize> = (0..n).collect();
    by_x.sort_by(|&a, &b| positions[b][0].total_cmp(&positions[a][0]).then(a.cmp(&b)));
    let mut visited = vec![false; n];
    let mut reference: Vec<Point3> = vec![[0.0; 3]; n];
    let weight = |a: &Option<Point3>, b: &Option<Point3>| match (a, b) {
        (Some(x), Some(y)) => 1.0 - geom::dot(*x, *y).abs(),
        _ => 1.0,
    };
    for &seed in &by_x {
        if visited[seed] {
            continue;
        }
        if let Some(nrm) = normals[seed].as_mut() {
            if nrm[0] < 0.0 {
                *nrm = geom::scale(*nrm, -1.0);
            }
        }
        visited[seed] = true;
        reference[seed] = normals[seed].unwrap_or([0.0; 3]);
        let mut heap = BinaryHeap::new();
        for &j in &adj[seed] {
            heap.push(Reverse(EdgeKey(weight(&normals[seed], &normals[j]), seed, j)));
        }
        while let Some(Reverse(EdgeKey(_, from, to))) = heap.pop() {
            if visited[to] {
                continue;
            }
            visited[to] = true;
            let parent_ref = reference[from];
            match normals[to].as_mut() {
                Some(nrm) => {
                    if geom::dot(*nrm, parent_ref) < 0.0 {
                        *nrm = geom::scale(*nrm, -1.0);
                    }
                    reference[to] = *nrm;
                }
                None => reference[to] = parent_ref,
            }
            for &j in &adj[to] {
                if !visited[j] {
                    heap.push(Reverse(EdgeKey(weight(&normals[to], &normals[j]), to, j)));
                }
            }
        }
    }
}
