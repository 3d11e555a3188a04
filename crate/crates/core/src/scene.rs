//! Synthetic scenes built from analytic primitives, with exact signed
//! distance oracles.
//!
//! A scene is a union of spheres, boxes and tori. Its distance is the
//! minimum of the member distances, which is exact outside the primitives
//! and only a bound inside regions where two primitives overlap; such probes
//! are flagged by [`SceneOracle::probe`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DistanceField, FieldValue};
use crate::geom::{self, Aabb, Point3};
use crate::pyramid::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    Sphere {
        center: Point3,
        radius: f64,
    },
    Box {
        center: Point3,
        half_extents: Point3,
    },
    /// Ring around the z axis through `center`.
    Torus {
        center: Point3,
        major: f64,
        minor: f64,
    },
}

impl Primitive {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Primitive::Sphere { center, radius } => geom::is_finite(center) && radius > 0.0 && radius.is_finite(),
            Primitive::Box {
                center,
                half_extents,
            } => geom::is_finite(center) && half_extents.iter().all(|h| *h > 0.0 && h.is_finite()),
            Primitive::Torus {
                center,
                major,
                minor,
            } => geom::is_finite(center) && minor > 0.0 && major > minor && major.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("bad primitive {self:?}")))
        }
    }

    pub fn sdf(&self, p: Point3) -> f64 {
        match *self {
            Primitive::Sphere { center, radius } => geom::dist(p, center) - radius,
            Primitive::Box {
                center,
                half_extents,
            } => {
                let d: Point3 = std::array::from_fn(|a| (p[a] - center[a]).abs() - half_extents[a]);
                let outside = geom::norm(d.map(|v| v.max(0.0)));
                outside + d[0].max(d[1]).max(d[2]).min(0.0)
            }
            Primitive::Torus {
                center,
                major,
                minor,
            } => {
                let q = geom::sub(p, center);
                let ring = q[0].hypot(q[1]) - major;
                ring.hypot(q[2]) - minor
            }
        }
    }

    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Primitive::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Primitive::Box { half_extents: h, .. } => 8.0 * (h[0] * h[1] + h[1] * h[2] + h[0] * h[2]),
            Primitive::Torus { major, minor, .. } => 4.0 * PI * PI * major * minor,
        }
    }

    pub fn bounds(&self) -> Aabb {
        let (c, h) = match *self {
            Primitive::Sphere { center, radius } => (center, [radius; 3]),
            Primitive::Box {
                center,
                half_extents,
            } => (center, half_extents),
            Primitive::Torus {
                center,
                major,
                minor,
            } => (center, [major + minor, major + minor, minor]),
        };
        Aabb {
            min: geom::sub(c, h),
            max: geom::add(c, h),
        }
    }

    /// Maps the unit square onto the surface so that uniform `(u, v)` gives
    /// uniform area density. Returns the point and its outward normal.
    pub fn surface_point(&self, u: f64, v: f64) -> (Point3, Point3) {
        use std::f64::consts::TAU;
        match *self {
            Primitive::Sphere { center, radius } => {
                let z = 1.0 - 2.0 * u;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = TAU * v;
                let n = [r * phi.cos(), r * phi.sin(), z];
                (geom::add(center, geom::scale(n, radius)), n)
            }
            Primitive::Box {
                center,
                half_extents: h,
            } => {
                let faces = [h[1] * h[2], h[1] * h[2], h[0] * h[2], h[0] * h[2], h[0] * h[1], h[0] * h[1]];
                let total: f64 = faces.iter().sum();
                let mut t = u * total;
                let mut face = 5;
                for (i, &a) in faces.iter().enumerate() {
                    if t < a {
                        face = i;
                        break;
                    }
                    t -= a;
                }
                let local = (t / faces[face]).clamp(0.0, 1.0);
                let axis = face / 2;
                let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
                let mut p = center;
                p[axis] += sign * h[axis];
                p[b] += h[b] * (2.0 * local - 1.0);
                p[c] += h[c] * (2.0 * v - 1.0);
                let mut n = [0.0; 3];
                n[axis] = sign;
                (p, n)
            }
            Primitive::Torus {
                center,
                major,
                minor,
            } => {
                // Invert the cumulative area along the tube angle,
                // (major * t + minor * sin t) / (2 pi major), by bisection.
                let target = u * TAU * major;
                let (mut lo, mut hi) = (0.0, TAU);
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if major * mid + minor * mid.sin() < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let theta = 0.5 * (lo + hi);
                let phi = TAU * v;
                let n = [theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin()];
                let ring = [major * phi.cos(), major * phi.sin(), 0.0];
                (geom::add(center, geom::add(ring, geom::scale(n, minor))), n)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockLayout {
    /// The eight octants of the bounding box.
    #[default]
    Octants,
    /// Eight equal slabs along x.
    Slabs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SamplingMode {
    Uniform,
    /// Per-block counts in arithmetic progression.
    Nonuniform {
        difference: usize,
        #[serde(default)]
        layout: BlockLayout,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub count: usize,
    /// Standard deviation of the displacement along the normal, in meters.
    pub noise: f64,
    pub mode: SamplingMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub sampling: SamplingSpec,
}

impl SceneSpec {
    pub fn sphere(radius: f64, count: usize, noise: f64, seed: u64) -> Self {
        SceneSpec {
            primitives: vec![Primitive::Sphere {
                center: [0.0; 3],
                radius,
            }],
            sampling: SamplingSpec {
                count,
                noise,
                mode: SamplingMode::Uniform,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::InvalidSpec("scene has no primitives".into()));
        }
        for p in &self.primitives {
            p.validate()?;
        }
        let noise = self.sampling.noise;
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::InvalidSpec(format!("noise must be non-negative, got {noise}")));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Aabb {
        let mut bb = self.primitives[0].bounds();
        for p in &self.primitives[1..] {
            let b = p.bounds();
            bb.include(b.min);
            bb.include(b.max);
        }
        bb
    }

    pub fn oracle(&self) -> SceneOracle {
        SceneOracle {
            primitives: self.primitives.clone(),
        }
    }
}

/// Signed distance of a union of primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneOracle {
    primitives: Vec<Primitive>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleProbe {
    pub sdf: f64,
    /// Inside two or more primitives, where the union distance is only a
    /// bound.
    pub in_overlap: bool,
}

impl SceneOracle {
    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn probe(&self, p: Point3) -> OracleProbe {
        let mut sdf = f64::INFINITY;
        let mut inside = 0;
        for prim in &self.primitives {
            let d = prim.sdf(p);
            sdf = sdf.min(d);
            inside += usize::from(d < 0.0);
        }
        OracleProbe {
            sdf,
            in_overlap: inside >= 2,
        }
    }

    pub fn sdf_at(&self, p: Point3) -> f64 {
        self.probe(p).sdf
    }

    /// On the union's boundary: not strictly inside any other primitive.
    fn exposed(&self, owner: usize, p: Point3) -> bool {
        self.primitives
            .iter()
            .enumerate()
            .all(|(i, prim)| i == owner || prim.sdf(p) >= 0.0)
    }
}

impl DistanceField for SceneOracle {
    fn evaluate(&self, q: Point3) -> Result<FieldValue> {
        Ok(FieldValue::sdf(self.sdf_at(q)))
    }
}

/// A sampled scene.
#[derive(Debug, Clone)]
pub struct Scene {
    /// Noisy samples with the true normal of their source surface point.
    pub cloud: PointCloud,
    pub oracle: SceneOracle,
    /// Per-block counts in non-uniform mode.
    pub block_counts: Option<Vec<usize>>,
}

/// Point-set sampling strategy for [`surface_samples`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceSampling {
    /// Independent uniform draws.
    Random,
    /// A randomly shifted low-discrepancy lattice, which covers the surface
    /// more evenly than independent draws.
    Stratified,
}

const MAX_ATTEMPT_FACTOR: usize = 1000;

/// Counts `a, a + d, ..., a + 7d` with `a = floor((total - 28 d) / 8)`; the
/// last block absorbs the remainder so the counts sum to `total`.
pub fn nonuniform_block_counts(total: usize, difference: usize) -> Result<Vec<usize>> {
    let ramp = 28 * difference;
    if total < ramp {
        return Err(Error::InvalidSpec(format!(
            "{total} points cannot hold eight blocks with common difference {difference}"
        )));
    }
    let a = (total - ramp) / 8;
    let mut counts: Vec<usize> = (0..8).map(|b| a + b * difference).collect();
    let sum: usize = counts.iter().sum();
    counts[7] += total - sum;
    Ok(counts)
}

fn block_of(p: Point3, bb: &Aabb, layout: BlockLayout) -> usize {
    let c = bb.center();
    match layout {
        BlockLayout::Octants => {
            usize::from(p[0] >= c[0]) | usize::from(p[1] >= c[1]) << 1 | usize::from(p[2] >= c[2]) << 2
        }
        BlockLayout::Slabs => {
            let t = (p[0] - bb.min[0]) / (bb.max[0] - bb.min[0]);
            ((t * 8.0).floor().max(0.0) as usize).min(7)
        }
    }
}

fn area_cdf(primitives: &[Primitive]) -> Vec<f64> {
    let mut acc = 0.0;
    primitives
        .iter()
        .map(|p| {
            acc += p.area();
            acc
        })
        .collect()
}

/// One area-weighted surface point of the union, with its outward normal.
fn draw_surface<R: Rng>(oracle: &SceneOracle, cdf: &[f64], rng: &mut R) -> Result<(Point3, Point3)> {
    let total = *cdf.last().expect("non-empty scene");
    for _ in 0..MAX_ATTEMPT_FACTOR {
        let t = rng.random::<f64>() * total;
        let owner = cdf.partition_point(|&c| c <= t).min(cdf.len() - 1);
        let (p, n) = oracle.primitives[owner].surface_point(rng.random(), rng.random());
        if oracle.exposed(owner, p) {
            return Ok((p, n));
        }
    }
    Err(Error::InvalidSpec("union surface is (almost) entirely hidden".into()))
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let oracle = spec.oracle();
    let cdf = area_cdf(&spec.primitives);
    let s = &spec.sampling;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut positions = Vec::with_capacity(s.count);
    let mut normals = Vec::with_capacity(s.count);
    let mut push = |p: Point3, n: Point3, rng: &mut ChaCha8Rng| {
        let e: f64 = StandardNormal.sample(rng);
        positions.push(geom::add(p, geom::scale(n, s.noise * e)));
        normals.push(n);
    };
    let block_counts = match s.mode {
        SamplingMode::Uniform => {
            for _ in 0..s.count {
                let (p, n) = draw_surface(&oracle, &cdf, &mut rng)?;
                push(p, n, &mut rng);
            }
            None
        }
        SamplingMode::Nonuniform { difference, layout } => {
            let counts = nonuniform_block_counts(s.count, difference)?;
            let bb = spec.bounds();
            let mut filled = [0usize; 8];
            let cap = MAX_ATTEMPT_FACTOR * s.count.max(1);
            let mut attempts = 0;
            let mut placed = 0;
            while placed < s.count {
                attempts += 1;
                if attempts > cap {
                    return Err(Error::InvalidSpec(format!(
                        "could not fill blocks {counts:?} (got {filled:?})"
                    )));
                }
                let (p, n) = draw_surface(&oracle, &cdf, &mut rng)?;
                let b = block_of(p, &bb, layout);
                if filled[b] < counts[b] {
                    filled[b] += 1;
                    placed += 1;
                    push(p, n, &mut rng);
                }
            }
            Some(counts)
        }
    };
    Ok(Scene {
        cloud: PointCloud::with_normals(positions, normals),
        oracle,
        block_counts,
    })
}

/// `n` noiseless points on the union surface.
pub fn surface_samples(
    oracle: &SceneOracle,
    n: usize,
    mode: SurfaceSampling,
    seed: u64,
) -> Result<Vec<Point3>> {
    let prims = &oracle.primitives;
    if prims.is_empty() {
        return Err(Error::InvalidSpec("scene has no primitives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        SurfaceSampling::Random => {
            let cdf = area_cdf(prims);
            (0..n)
                .map(|_| draw_surface(oracle, &cdf, &mut rng).map(|(p, _)| p))
                .collect()
        }
        SurfaceSampling::Stratified => {
            // Quota per primitive by largest remainder over area.
            let total: f64 = prims.iter().map(|p| p.area()).sum();
            let exact: Vec<f64> = prims.iter().map(|p| n as f64 * p.area() / total).collect();
            let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
            let mut order: Vec<usize> = (0..prims.len()).collect();
            order.sort_by(|&a, &b| {
                let fa = exact[a] - exact[a].floor();
                let fb = exact[b] - exact[b].floor();
                fb.total_cmp(&fa).then(a.cmp(&b))
            });
            let missing = n - quota.iter().sum::<usize>();
            for &i in order.iter().take(missing) {
                quota[i] += 1;
            }
            // Plastic-ratio sequence, shifted by the seed.
            let g = 1.324_717_957_244_746_f64;
            let (a1, a2) = (1.0 / g, 1.0 / (g * g));
            let mut out = Vec::with_capacity(n);
            for (owner, &want) in quota.iter().enumerate() {
                let shift: (f64, f64) = (rng.random(), rng.random());
                let mut got = 0;
                let mut i = 0u64;
                while got < want {
                    if i as usize > MAX_ATTEMPT_FACTOR * want.max(1) {
                        return Err(Error::InvalidSpec("union surface is (almost) entirely hidden".into()));
                    }
                    let u = (shift.0 + a1 * i as f64).fract();
                    let v = (shift.1 + a2 * i as f64).fract();
                    i += 1;
                    let (p, _) = prims[owner].surface_point(u, v);
                    if oracle.exposed(owner, p) {
                        out.push(p);
                        got += 1;
                    }
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::KdTree;

    fn sphere() -> Primitive {
        Primitive::Sphere {
            center: [0.1, -0.2, 0.3],
            radius: 0.7,
        }
    }

    fn cube() -> Primitive {
        Primitive::Box {
            center: [0.5, 0.0, -0.25],
            half_extents: [0.3, 0.2, 0.4],
        }
    }

    fn torus() -> Primitive {
        Primitive::Torus {
            center: [-0.3, 0.2, 0.0],
            major: 0.6,
            minor: 0.15,
        }
    }

    /// Box distance by clamping to the box and, inside, the nearest face.
    fn box_oracle(c: Point3, h: Point3, p: Point3) -> f64 {
        let q: Point3 = std::array::from_fn(|a| p[a] - c[a]);
        let clamped: Point3 = std::array::from_fn(|a| q[a].clamp(-h[a], h[a]));
        let inside = (0..3).all(|a| q[a].abs() <= h[a]);
        if inside {
            -(0..3).map(|a| h[a] - q[a].abs()).fold(f64::INFINITY, f64::min)
        } else {
            geom::dist(q, clamped)
        }
    }

    /// Torus distance via the nearest point of the core circle.
    fn torus_oracle(c: Point3, big: f64, small: f64, p: Point3) -> f64 {
        let q = geom::sub(p, c);
        let rho = (q[0] * q[0] + q[1] * q[1]).sqrt();
        let core = if rho > 0.0 {
            [q[0] / rho * big, q[1] / rho * big, 0.0]
        } else {
            [big, 0.0, 0.0]
        };
        geom::dist(q, core) - small
    }

    #[test]
    fn single_primitive_oracles_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for prim in [sphere(), cube(), torus()] {
            let oracle = SceneOracle {
                primitives: vec![prim],
            };
            for _ in 0..100_000 {
                let p: Point3 = [0, 1, 2].map(|_| rng.random_range(-1.5..1.5));
                let expect = match prim {
                    Primitive::Sphere { center, radius } => {
                        let d = geom::sub(p, center);
                        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - radius
                    }
                    Primitive::Box {
                        center,
                        half_extents,
                    } => box_oracle(center, half_extents, p),
                    Primitive::Torus {
                        center,
                        major,
                        minor,
                    } => torus_oracle(center, major, minor, p),
                };
                let got = oracle.sdf_at(p);
                assert!((got - expect).abs() < 1e-12, "{prim:?} at {p:?}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn sphere_oracle_example() {
        let r = 0.4;
        let oracle = SceneSpec::sphere(r, 1, 0.0, 0).oracle();
        assert!((oracle.sdf_at([2.0 * r, 0.0, 0.0]) - r).abs() < 1e-15);
    }

    #[test]
    fn noiseless_sphere_samples_are_on_the_sphere() {
        let scene = generate_scene(&SceneSpec::sphere(1.0, 5000, 0.0, 3)).unwrap();
        assert_eq!(scene.cloud.len(), 5000);
        for p in &scene.cloud.positions {
            assert!((geom::norm(*p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_points_lie_on_their_primitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for prim in [sphere(), cube(), torus()] {
            for _ in 0..2000 {
                let (p, n) = prim.surface_point(rng.random(), rng.random());
                assert!(prim.sdf(p).abs() < 1e-12, "{prim:?}");
                assert!((geom::norm(n) - 1.0).abs() < 1e-12);
                // Moving along the normal leaves the surface outward.
                assert!(prim.sdf(geom::add(p, geom::scale(n, 1e-3))) > 0.0);
            }
        }
    }

    #[test]
    fn torus_sampling_is_area_uniform() {
        // The outer half of the tube (cos t > 0) carries more area:
        // (pi R + 2 r) / (2 pi R).
        let (big, small) = (0.6, 0.3);
        let prim = Primitive::Torus {
            center: [0.0; 3],
            major: big,
            minor: small,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 200_000;
        let outer = (0..n)
            .filter(|_| {
                let (p, _) = prim.surface_point(rng.random(), rng.random());
                p[0].hypot(p[1]) > big
            })
            .count();
        let expect = (std::f64::consts::PI * big + 2.0 * small) / (2.0 * std::f64::consts::PI * big);
        let frac = outer as f64 / n as f64;
        assert!((frac - expect).abs() < 0.005, "{frac} vs {expect}");
    }

    #[test]
    fn union_samples_avoid_hidden_surface() {
        let spec = SceneSpec {
            primitives: vec![
                Primitive::Sphere {
                    center: [0.0; 3],
                    radius: 0.5,
                },
                Primitive::Sphere {
                    center: [0.6, 0.0, 0.0],
                    radius: 0.5,
                },
            ],
            sampling: SamplingSpec {
                count: 3000,
                noise: 0.0,
                mode: SamplingMode::Uniform,
                seed: 1,
            },
        };
        let scene = generate_scene(&spec).unwrap();
        for p in &scene.cloud.positions {
            assert!(scene.oracle.sdf_at(*p).abs() < 1e-12);
        }
        let mid = scene.oracle.probe([0.3, 0.0, 0.0]);
        assert!(mid.in_overlap);
        assert!(!scene.oracle.probe([-0.3, 0.0, 0.0]).in_overlap);
    }

    #[test]
    fn noise_is_along_the_normal() {
        let scene = generate_scene(&SceneSpec::sphere(1.0, 20_000, 0.005, 4)).unwrap();
        let offsets: Vec<f64> = scene.cloud.positions.iter().map(|p| geom::norm(*p) - 1.0).collect();
        let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
        let var = offsets.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / offsets.len() as f64;
        assert!(mean.abs() < 2e-4);
        assert!((var.sqrt() - 0.005).abs() < 2e-4);
    }

    #[test]
    fn block_counts_form_arithmetic_sequence() {
        let counts = nonuniform_block_counts(10_000, 200).unwrap();
        assert_eq!(counts, vec![550, 750, 950, 1150, 1350, 1550, 1750, 1950]);
        assert_eq!(counts.iter().sum::<usize>(), 10_000);
        let padded = nonuniform_block_counts(10_003, 200).unwrap();
        assert_eq!(padded[..7], counts[..7]);
        assert_eq!(padded[7], 1953);
        assert_eq!(nonuniform_block_counts(5600, 200).unwrap()[0], 0);
        assert!(nonuniform_block_counts(5599, 200).is_err());
        assert!(nonuniform_block_counts(5000, 1000).is_err());
    }

    #[test]
    fn nonuniform_scene_fills_blocks() {
        for layout in [BlockLayout::Octants, BlockLayout::Slabs] {
            let mut spec = SceneSpec::sphere(1.0, 10_000, 0.0, 9);
            spec.sampling.mode = SamplingMode::Nonuniform {
                difference: 200,
                layout,
            };
            let scene = generate_scene(&spec).unwrap();
            let counts = scene.block_counts.clone().unwrap();
            let bb = spec.bounds();
            let mut seen = [0usize; 8];
            for p in &scene.cloud.positions {
                seen[block_of(*p, &bb, layout)] += 1;
            }
            assert_eq!(seen.to_vec(), counts);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SceneSpec::sphere(1.0, 500, 0.01, 42);
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a.cloud.positions, b.cloud.positions);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = SceneSpec::sphere(-1.0, 10, 0.0, 0);
        assert!(matches!(generate_scene(&spec), Err(Error::InvalidSpec(_))));
        spec.primitives.clear();
        assert!(generate_scene(&spec).is_err());
        let torus = Primitive::Torus {
            center: [0.0; 3],
            major: 0.1,
            minor: 0.2,
        };
        assert!(torus.validate().is_err());
    }

    #[test]
    fn stratified_samples_cover_more_evenly() {
        let oracle = SceneSpec::sphere(1.0, 1, 0.0, 0).oracle();
        let n = 20_000;
        let strat = surface_samples(&oracle, n, SurfaceSampling::Stratified, 1).unwrap();
        let rand = surface_samples(&oracle, n, SurfaceSampling::Random, 1).unwrap();
        assert_eq!(strat.len(), n);
        for p in &strat {
            assert!((geom::norm(*p) - 1.0).abs() < 1e-12);
        }
        // Largest gap seen from a set of probe points on the sphere.
        let probes = surface_samples(&oracle, 5000, SurfaceSampling::Random, 99).unwrap();
        let gap = |pts: &[Point3]| {
            let tree = KdTree::build(pts);
            probes
                .iter()
                .map(|q| tree.nearest(*q).unwrap().1)
                .fold(0.0, f64::max)
        };
        assert!(gap(&strat) < gap(&rand));
        // Uniformity: each hemisphere gets about half.
        let upper = strat.iter().filter(|p| p[2] > 0.0).count();
        assert!((upper as f64 / n as f64 - 0.5).abs() < 0.01);
    }
}
