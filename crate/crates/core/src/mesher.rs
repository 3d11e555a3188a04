//! Zero-level-set extraction on a regular grid, and mesh surface sampling.
//!
//! Extraction is dual: every cell whose corners change sign gets one vertex
//! at the mean of its edge zero-crossings, and every sign-changing grid edge
//! becomes a quad joining the four cells around it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DistanceField, FieldValue};
use crate::geom::{self, Aabb, Point3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidParams(format!("triangle {i} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidParams(format!("triangle {i} repeats a vertex")));
            }
        }
        if self.vertices.iter().any(|v| !geom::is_finite(*v)) {
            return Err(Error::InvalidParams("mesh has non-finite vertices".into()));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Point3; 3] {
        self.triangles[t].map(|v| self.vertices[v as usize])
    }

    /// Unnormalized normal; its length is twice the triangle area.
    pub fn cross(&self, t: usize) -> Point3 {
        let [a, b, c] = self.corners(t);
        geom::cross(geom::sub(b, a), geom::sub(c, a))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| 0.5 * geom::norm(self.cross(t))).sum()
    }

    /// Appends `other`, renumbering its vertices.
    /// Keeps the triangles for which `keep` holds and drops vertices no
    /// longer referenced, preserving order.
    pub fn retain_triangles<F: FnMut(usize) -> bool>(&mut self, mut keep: F) {
        let kept: Vec<[u32; 3]> = (0..self.triangles.len())
            .filter(|&t| keep(t))
            .map(|t| self.triangles[t])
            .collect();
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let triangles = kept
            .into_iter()
            .map(|t| {
                t.map(|v| {
                    let slot = &mut remap[v as usize];
                    if *slot == u32::MAX {
                        *slot = vertices.len() as u32;
                        vertices.push(self.vertices[v as usize]);
                    }
                    *slot
                })
            })
            .collect();
        self.vertices = vertices;
        self.triangles = triangles;
    }

    pub fn append(&mut self, other: &Mesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|v| v + base)));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub bounds: Aabb,
    /// Grid cell edge in meters.
    pub cell: f64,
    /// Skip cells whose corners the classifier calls far from the surface.
    pub mask_gate: bool,
    pub mask_threshold: f64,
    /// Minimum number of corner queries per parallel work unit.
    pub batch_size: usize,
}

impl ExtractionConfig {
    pub fn new(bounds: Aabb, cell: f64) -> Result<Self> {
        let cfg = ExtractionConfig {
            bounds,
            cell,
            mask_gate: true,
            mask_threshold: 0.5,
            batch_size: 4096,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell > 0.0 && self.cell.is_finite()) {
            return Err(Error::InvalidParams("cell size must be positive".into()));
        }
        let e = self.bounds.extent();
        if !(geom::is_finite(self.bounds.min) && geom::is_finite(self.bounds.max)) || e.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParams("extraction bounds are degenerate".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParams("batch size must be positive".into()));
        }
        Ok(())
    }

    /// Cells per axis.
    pub fn dims(&self) -> [usize; 3] {
        self.bounds.extent().map(|e| ((e / self.cell).ceil() as usize).max(1))
    }
}

struct Grid {
    /// Corners per axis.
    n: [usize; 3],
    origin: Point3,
    cell: f64,
}

impl Grid {
    fn corner_id(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n[1] + j) * self.n[0] + i
    }

    fn corner_pos(&self, c: [usize; 3]) -> Point3 {
        std::array::from_fn(|a| self.origin[a] + c[a] as f64 * self.cell)
    }

    fn cell_id(&self, c: [usize; 3]) -> usize {
        (c[2] * (self.n[1] - 1) + c[1]) * (self.n[0] - 1) + c[0]
    }
}

const CUBE_EDGES: [([usize; 3], usize); 12] = [
    ([0, 0, 0], 0),
    ([0, 1, 0], 0),
    ([0, 0, 1], 0),
    ([0, 1, 1], 0),
    ([0, 0, 0], 1),
    ([1, 0, 0], 1),
    ([0, 0, 1], 1),
    ([1, 0, 1], 1),
    ([0, 0, 0], 2),
    ([1, 0, 0], 2),
    ([0, 1, 0], 2),
    ([1, 1, 0], 2),
];

fn is_inside(v: f64) -> bool {
    v < 0.0
}

pub fn extract_mesh<F: DistanceField + ?Sized>(field: &F, cfg: &ExtractionConfig) -> Result<Mesh> {
    cfg.validate()?;
    let dims = cfg.dims();
    let grid = Grid {
        n: dims.map(|d| d + 1),
        origin: cfg.bounds.min,
        cell: cfg.cell,
    };
    let total = grid.n[0] * grid.n[1] * grid.n[2];
    let values: Vec<Option<FieldValue>> = (0..total)
        .into_par_iter()
        .with_min_len(cfg.batch_size)
        .map(|id| {
            let i = id % grid.n[0];
            let j = (id / grid.n[0]) % grid.n[1];
            let k = id / (grid.n[0] * grid.n[1]);
            match field.evaluate(grid.corner_pos([i, j, k])) {
                Ok(v) if v.sdf.is_finite() => Ok(Some(v)),
                Ok(_) | Err(Error::NoSupport) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let value = |c: [usize; 3]| values[grid.corner_id(c[0], c[1], c[2])];

    let far = |v: &FieldValue| {
        v.mask_logit
            .is_some_and(|x| crate::field::sigmoid(x) < cfg.mask_threshold)
    };

    // Vertices, in cell order.
    let mut vertex_of = vec![u32::MAX; dims[0] * dims[1] * dims[2]];
    let mut vertices = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let mut corners = [FieldValue::sdf(0.0); 8];
                let mut supported = true;
                for (b, c) in corners.iter_mut().enumerate() {
                    match value([i + (b & 1), j + (b >> 1 & 1), k + (b >> 2)]) {
                        Some(v) => *c = v,
                        None => {
                            supported = false;
                            break;
                        }
                    }
                }
                if !supported {
                    continue;
                }
                let inside = corners.iter().filter(|v| is_inside(v.sdf)).count();
                if inside == 0 || inside == 8 {
                    continue;
                }
                if cfg.mask_gate && corners.iter().all(far) {
                    continue;
                }
                let mut sum = [0.0; 3];
                let mut count = 0.0;
                for (off, axis) in CUBE_EDGES {
                    let a = [i + off[0], j + off[1], k + off[2]];
                    let mut b = a;
                    b[axis] += 1;
                    let (fa, fb) = (value(a).unwrap().sdf, value(b).unwrap().sdf);
                    if is_inside(fa) == is_inside(fb) {
                        continue;
                    }
                    let t = fa / (fa - fb);
                    let (pa, pb) = (grid.corner_pos(a), grid.corner_pos(b));
                    sum = geom::add(sum, geom::add(pa, geom::scale(geom::sub(pb, pa), t)));
                    count += 1.0;
                }
                vertex_of[grid.cell_id([i, j, k])] = vertices.len() as u32;
                vertices.push(geom::scale(sum, 1.0 / count));
            }
        }
    }

    // One quad per sign-changing edge whose four cells all have vertices.
    let mut triangles = Vec::new();
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                for i in 0..grid.n[0] {
                    let start = [i, j, k];
                    // The four cells around the edge must exist.
                    if start[axis] + 1 >= grid.n[axis]
                        || start[b] == 0
                        || start[c] == 0
                        || start[b] >= dims[b]
                        || start[c] >= dims[c]
                    {
                        continue;
                    }
                    let mut end = start;
                    end[axis] += 1;
                    let (Some(fa), Some(fb)) = (value(start), value(end)) else {
                        continue;
                    };
                    if is_inside(fa.sdf) == is_inside(fb.sdf) {
                        continue;
                    }
                    let mut quad = [0u32; 4];
                    let mut complete = true;
                    for (q, (db, dc)) in quad.iter_mut().zip([(1, 1), (0, 1), (0, 0), (1, 0)]) {
                        let mut cell = start;
                        cell[b] -= db;
                        cell[c] -= dc;
                        let v = vertex_of[grid.cell_id(cell)];
                        if v == u32::MAX {
                            complete = false;
                            break;
                        }
                        *q = v;
                    }
                    if !complete {
                        continue;
                    }
                    // Counter-clockwise about +axis; flip when the outside
                    // lies toward -axis.
                    if !is_inside(fa.sdf) {
                        quad.reverse();
                    }
                    triangles.push([quad[0], quad[1], quad[2]]);
                    triangles.push([quad[0], quad[2], quad[3]]);
                }
            }
        }
    }
    Mesh::new(vertices, triangles)
}

/// `n` points drawn uniformly by area from the mesh surface.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<Point3>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles.len() {
        acc += 0.5 * geom::norm(mesh.cross(t));
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::EmptyMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let x = rng.random::<f64>() * acc;
            let t = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
            let [a, b, c] = mesh.corners(t);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
            std::array::from_fn(|i| wa * a[i] + wb * b[i] + wc * c[i])
        })
        .collect())
}
