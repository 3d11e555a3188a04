//! Serialized spatial index and neighbor queries.
//!
//! Points are sorted by curve code. An approximate neighborhood of a query is
//! read off the sorted list around the query's own code, filtered by a
//! distance cutoff, and truncated to the `k` nearest survivors. A brute-force
//! exact search serves as ground truth, and a kd-tree provides the same exact
//! answers quickly for preprocessing and metrics.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::curves::{quantize_clamped, serialize_points, CurveKind, CurveParams};
use crate::error::{Error, Result};
use crate::geom::{dist2, Point3};

/// Neighbors ordered by `(squared distance, point index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    /// `(point index, distance in meters)`, ascending.
    pub entries: Vec<(usize, f64)>,
    pub k_requested: usize,
}

impl NeighborSet {
    pub fn empty(k: usize) -> Self {
        NeighborSet {
            entries: Vec::new(),
            k_requested: k,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NeighborQueryConfig {
    pub k: usize,
    /// Half-width of the 1D search, in sorted positions.
    pub window: usize,
    /// Candidates farther than this are dropped.
    pub r_max: f64,
}

impl NeighborQueryConfig {
    pub fn new(k: usize, window: usize, r_max: f64) -> Result<Self> {
        let cfg = NeighborQueryConfig { k, window, r_max };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults for a level pooled at `pool_size`: window `2k`, cutoff
    /// `8 * pool_size`.
    pub fn for_level(k: usize, pool_size: f64) -> Self {
        NeighborQueryConfig {
            k,
            window: 2 * k,
            r_max: 8.0 * pool_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if self.window < self.k {
            return Err(Error::InvalidParams(format!(
                "window {} must be at least k = {}",
                self.window, self.k
            )));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::InvalidParams("r_max must be positive".into()));
        }
        Ok(())
    }
}

/// Points sorted along a space-filling curve.
#[derive(Debug, Clone)]
pub struct SerializedIndex {
    codes: Vec<u64>,
    perm: Vec<u32>,
    points: Vec<Point3>,
    params: CurveParams,
    kind: CurveKind,
}

impl SerializedIndex {
    /// Serialize and sort `points`. Equal codes keep ascending point index.
    pub fn build(points: &[Point3], params: CurveParams, kind: CurveKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::InvalidParams("too many points for u32 indices".into()));
        }
        let raw = serialize_points(points, &params, kind)?;
        let mut order: Vec<(u64, u32)> = raw
            .iter()
            .enumerate()
            .map(|(i, c)| (c.value, i as u32))
            .collect();
        order.sort_unstable();
        let (codes, perm) = order.into_iter().unzip();
        Ok(SerializedIndex {
            codes,
            perm,
            points: points.to_vec(),
            params,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Sorted codes.
    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    /// Sorted position to original point index.
    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    /// Indexed positions in original order.
    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn params(&self) -> &CurveParams {
        &self.params
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    /// Code of an arbitrary position, clamped into the grid.
    pub fn query_code(&self, q: Point3) -> u64 {
        let c = quantize_clamped(q, &self.params);
        self.kind.encode(c, self.params.bits)
    }

    /// Leftmost sorted position whose code is not below `code`.
    pub fn insertion_point(&self, code: u64) -> usize {
        self.codes.partition_point(|&c| c < code)
    }

    /// Approximate `k` nearest neighbors read from the sorted order.
    ///
    /// Candidates are the sorted positions `[pos - window, pos + window)`
    /// around the query's insertion position. Deterministic for fixed input.
    pub fn approx_neighbors(&self, q: Point3, cfg: &NeighborQueryConfig) -> NeighborSet {
        let mut out = NeighborSet::empty(cfg.k);
        if !crate::geom::is_finite(q) {
            return out;
        }
        let pos = self.insertion_point(self.query_code(q));
        let lo = pos.saturating_sub(cfg.window);
        let hi = pos.saturating_add(cfg.window).min(self.len());
        let r2 = cfg.r_max * cfg.r_max;
        let mut best = KBest::new(cfg.k);
        for &idx in &self.perm[lo..hi] {
            let d2 = dist2(self.points[idx as usize], q);
            if d2 <= r2 {
                best.offer(d2, idx as usize);
            }
        }
        out.entries = best.into_entries();
        out
    }

    /// Split the curve order into `n` contiguous runs whose sizes differ by at
    /// most one. Returns original point indices per run.
    pub fn partition_segments(&self, n_segments: usize) -> Vec<Vec<usize>> {
        let n_segments = n_segments.max(1);
        let n = self.len();
        let base = n / n_segments;
        let extra = n % n_segments;
        let mut out = Vec::with_capacity(n_segments);
        let mut start = 0;
        for s in 0..n_segments {
            let len = base + usize::from(s < extra);
            out.push(
                self.perm[start..start + len]
                    .iter()
                    .map(|&i| i as usize)
                    .collect(),
            );
            start += len;
        }
        out
    }
}

/// Bounded buffer of the best `k` `(d2, index)` pairs.
struct KBest {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl KBest {
    fn new(k: usize) -> Self {
        KBest {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn worst(&self) -> Option<(f64, usize)> {
        if self.items.len() < self.k {
            None
        } else {
            self.items.last().copied()
        }
    }

    #[inline]
    fn offer(&mut self, d2: f64, idx: usize) {
        if self.k == 0 {
            return;
        }
        if let Some(w) = self.worst() {
            if cmp_pair((d2, idx), w) != Ordering::Less {
                return;
            }
        }
        let pos = self
            .items
            .partition_point(|&e| cmp_pair(e, (d2, idx)) == Ordering::Less);
        self.items.insert(pos, (d2, idx));
        self.items.truncate(self.k);
    }

    fn into_entries(self) -> Vec<(usize, f64)> {
        self.items.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }
}

#[inline]
fn cmp_pair(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Exact `k` nearest neighbors by brute force, ties broken by lower index.
pub fn exact_knn(points: &[Point3], q: Point3, k: usize) -> NeighborSet {
    let mut best = KBest::new(k);
    for (i, &p) in points.iter().enumerate() {
        best.offer(dist2(p, q), i);
    }
    NeighborSet {
        entries: best.into_entries(),
        k_requested: k,
    }
}

/// `|approx ∩ exact| / |exact|` over point indices.
pub fn recall_rate(approx: &NeighborSet, exact: &NeighborSet) -> Result<f64> {
    if exact.is_empty() {
        return Err(Error::ZeroDenominator("exact neighbor set is empty"));
    }
    let truth: HashSet<usize> = exact.indices().collect();
    let hits = approx
        .indices()
        .collect::<HashSet<_>>()
        .intersection(&truth)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

const LEAF_SIZE: usize = 16;

/// Static 3D kd-tree returning the same neighbors as [`exact_knn`].
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    order: Vec<u32>,
    nodes: Vec<KdNode>,
}

#[derive(Debug, Clone)]
struct KdNode {
    lo: Point3,
    hi: Point3,
    start: u32,
    end: u32,
    /// Child node indices; `None` for leaves.
    children: Option<(u32, u32)>,
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(KdNode {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            children: None,
        });
        if end - start > LEAF_SIZE {
            let axis = (0..3)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = (start + end) / 2;
            let pts = &self.points;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                pts[a as usize][axis].total_cmp(&pts[b as usize][axis])
            });
            let left = self.build_node(start, mid);
            let right = self.build_node(mid, end);
            self.nodes[id as usize].children = Some((left, right));
        }
        id
    }

    /// Lower bound on the squared distance from `q` to anything in the box.
    /// Each gap term is no larger than the matching term of any contained
    /// point, so the bound never exceeds [`dist2`] under rounding.
    #[inline]
    fn box_dist2(node: &KdNode, q: Point3) -> f64 {
        let mut g = [0.0; 3];
        for a in 0..3 {
            if q[a] < node.lo[a] {
                g[a] = node.lo[a] - q[a];
            } else if q[a] > node.hi[a] {
                g[a] = q[a] - node.hi[a];
            }
        }
        g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
    }

    pub fn knn(&self, q: Point3, k: usize) -> NeighborSet {
        let mut best = KBest::new(k);
        if !self.nodes.is_empty() && k > 0 {
            self.search(0, q, &mut best);
        }
        NeighborSet {
            entries: best.into_entries(),
            k_requested: k,
        }
    }

    /// Nearest point and its distance.
    pub fn nearest(&self, q: Point3) -> Option<(usize, f64)> {
        self.knn(q, 1).entries.first().copied()
    }

    fn search(&self, node_id: u32, q: Point3, best: &mut KBest) {
        let node = &self.nodes[node_id as usize];
        if let Some((w, _)) = best.worst() {
            if Self::box_dist2(node, q) > w {
                return;
            }
        }
        match node.children {
            None => {
                for &i in &self.order[node.start as usize..node.end as usize] {
                    best.offer(dist2(self.points[i as usize], q), i as usize);
                }
            }
            Some((l, r)) => {
                let dl = Self::box_dist2(&self.nodes[l as usize], q);
                let dr = Self::box_dist2(&self.nodes[r as usize], q);
                let (first, second) = if dl <= dr { (l, r) } else { (r, l) };
                self.search(first, q, best);
                self.search(second, q, best);
            }
        }
    }
}
