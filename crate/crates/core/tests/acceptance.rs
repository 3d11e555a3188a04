//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any fails.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use serialsdf::curves::{CurveKind, CurveParams, GridCoord, MAX_BITS};
use serialsdf::field::{
    evaluate_loss, loss_and_gradient, numerical_gradient, sample_loss, train_decoder,
    DecoderParams, DecoderShape, LossWeights, NeuralField, QueryCounts, QuerySample, SphereSdf,
    TrainConfig, TrainingScene,
};
use serialsdf::geom::{self, Point3};
use serialsdf::mesher::sample_surface;
use serialsdf::metrics::{chamfer_l1, fscore, fscore_detail, recall_benchmark, RecallConfig};
use serialsdf::pyramid::{PointCloud, PyramidConfig};
use serialsdf::reconstruct::{reconstruct_imls, reconstruct_neural, reconstruct_segmented, ImlsConfig};
use serialsdf::scene::{
    generate_scene, nonuniform_block_counts, surface_samples, Primitive, SamplingMode, SamplingSpec, SceneSpec,
    SurfaceSampling,
};
use serialsdf::spatial::{exact_knn, NeighborQueryConfig, SerializedIndex};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<Point3> {
    (0..n).map(|_| [0, 1, 2].map(|_| rng.random_range(lo..hi))).collect()
}

fn within(limit: Duration, t: Duration) -> bool {
    t < limit
}

fn c1_curves() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for kind in CurveKind::ALL {
        for bits in 1..=4u32 {
            let side = 1u32 << bits;
            let mut seen = HashSet::new();
            for x in 0..side {
                for y in 0..side {
                    for z in 0..side {
                        let c = GridCoord::new(x, y, z);
                        let code = kind.encode(c, bits);
                        if code >= 1u64 << (3 * bits) || !seen.insert(code) || kind.decode(code, bits).ok() != Some(c) {
                            failures.push(format!("{kind} bits={bits} {c:?}"));
                        }
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bits = MAX_BITS;
    for kind in CurveKind::ALL {
        for _ in 0..1_000_000 {
            let c = GridCoord::new(
                rng.random_range(0..1 << bits),
                rng.random_range(0..1 << bits),
                rng.random_range(0..1 << bits),
            );
            if kind.decode(kind.encode(c, bits), bits).ok() != Some(c) {
                failures.push(format!("{kind} bits=21 {c:?}"));
            }
        }
    }
    let mut prev = CurveKind::Hilbert.decode(0, 4).unwrap();
    for code in 1..4096u64 {
        let c = CurveKind::Hilbert.decode(code, 4).unwrap();
        if prev.l1_distance(&c) != 1 {
            failures.push(format!("hilbert step {code} not adjacent"));
        }
        prev = c;
    }
    let t = start.elapsed();
    outcome(
        failures.is_empty() && within(Duration::from_secs(10), t),
        format!("{} failures, {:.2} s", failures.len(), t.as_secs_f64()),
    )
}

fn octant_cloud(seed: u64, total: usize) -> Vec<Point3> {
    let counts = nonuniform_block_counts(total, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    for (b, &n) in counts.iter().enumerate() {
        let lo = [b & 1, (b >> 1) & 1, (b >> 2) & 1].map(|v| v as f64 * 0.5);
        for _ in 0..n {
            out.push([0, 1, 2].map(|a| lo[a] + rng.random_range(0.0..0.5)));
        }
    }
    out
}

fn c2_recall_trend() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clouds = [
        ("uniform", random_points(&mut rng, 50_000, 0.0, 1.0)),
        ("nonuniform", octant_cloud(3, 50_000)),
    ];
    let queries = random_points(&mut rng, 2000, 0.0, 1.0);
    let pcfg = PyramidConfig::default();
    let cfg = RecallConfig::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, pts) in &clouds {
        let cloud = PointCloud::new(pts.clone());
        let params = CurveParams::for_points(pts, 0.01, MAX_BITS).unwrap();
        let table = recall_benchmark(&cloud, &pcfg, params, &CurveKind::ALL, &queries, &cfg).unwrap();
        let mut cells = Vec::new();
        for m in 0..table.rows.len() {
            let h = table.get(m, CurveKind::Hilbert).unwrap();
            let z = table.get(m, CurveKind::Morton).unwrap();
            ok &= h >= z;
            if m > 0 {
                ok &= h >= table.get(m - 1, CurveKind::Hilbert).unwrap();
                ok &= z >= table.get(m - 1, CurveKind::Morton).unwrap();
            }
            cells.push(format!("{m}:{h:.3}/{z:.3}"));
        }
        detail.push(format!("{name} [{}]", cells.join(" ")));
    }
    let t = start.elapsed();
    ok &= within(Duration::from_secs(60), t);
    outcome(ok, format!("hilbert/morton {}; {:.1} s", detail.join("; "), t.as_secs_f64()))
}

fn c3_exhaustive_window() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts = random_points(&mut rng, 10_000, -1.0, 1.0);
    let queries = random_points(&mut rng, 10_000, -1.2, 1.2);
    let params = CurveParams::for_points(&pts, 0.01, MAX_BITS).unwrap();
    let mut mismatches = 0;
    for kind in CurveKind::ALL {
        let index = SerializedIndex::build(&pts, params, kind).unwrap();
        let cfg = NeighborQueryConfig::new(8, pts.len(), f64::INFINITY).unwrap();
        for &q in &queries {
            if index.approx_neighbors(q, &cfg) != exact_knn(&pts, q, 8) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 2 x 10^4 queries"))
}

fn gradient_scene(seed: u64) -> TrainingScene {
    let spec = SceneSpec::sphere(0.3, 1500, 0.002, seed);
    let pyr = PyramidConfig {
        levels: 2,
        base_pool: 0.02,
    };
    let counts = QueryCounts {
        near: 40,
        uniform: 10,
    };
    TrainingScene::build(&spec, &pyr, 0.01, CurveKind::Hilbert, counts, 0.015, seed + 100).unwrap()
}

fn c4_gradient_check() -> Outcome {
    let start = Instant::now();
    let weights = LossWeights::default();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let scene = gradient_scene(i);
        let shape = DecoderShape::new(2, scene.pyramid.feature_dim(), 4).unwrap();
        let params = DecoderParams::init(shape, 1000 + i);
        let field = NeuralField::new(&scene.pyramid, &params, Default::default(), 0.5).unwrap();
        let batch = &scene.queries[..10];
        let (_, grad) = loss_and_gradient(batch, &field, &weights, 1e-3).unwrap();
        let fd = numerical_gradient(batch, &field, &weights, 1e-3, 1e-4).unwrap();
        for (a, n) in grad.iter().zip(&fd) {
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-4 && within(Duration::from_secs(30), t),
        format!("max relative error {worst:.2e}, {:.1} s", t.as_secs_f64()),
    )
}

fn c5_eikonal_laplacian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sphere = SphereSdf {
        center: [0.0; 3],
        radius: 1.0,
    };
    let mut eik = 0.0;
    let mut lap = 0.0;
    let mut analytic = 0.0;
    let n = 10_000;
    for _ in 0..n {
        let dir = loop {
            let v = random_points(&mut rng, 1, -1.0, 1.0)[0];
            let len = geom::norm(v);
            if len > 1e-3 && len <= 1.0 {
                break geom::scale(v, 1.0 / len);
            }
        };
        let r = rng.random_range(0.5..=2.0);
        let q = geom::scale(dir, r);
        let s = sample_loss(&sphere, &QuerySample::new(q, r - 1.0, 0.015), 1e-3).unwrap();
        eik += s.eikonal;
        lap += s.laplacian;
        analytic += 2.0 / r;
    }
    let (eik, lap, analytic) = (eik / n as f64, lap / n as f64, analytic / n as f64);
    let rel = (lap - analytic).abs() / analytic;
    outcome(
        eik < 1e-4 && rel < 0.05,
        format!("l_eikonal {eik:.2e}, l_laplacian {lap:.5} vs {analytic:.5} (rel {rel:.2e})"),
    )
}

fn c6_desk_reconstruction() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let spec = SceneSpec::sphere(1.0, 10_000, 0.005, 6);
        let scene = generate_scene(&spec).unwrap();
        let mesh = reconstruct_imls(&scene.cloud, &ImlsConfig::default()).unwrap();
        let gt = surface_samples(&scene.oracle, 100_000, SurfaceSampling::Stratified, 60).unwrap();
        let pred = sample_surface(&mesh, 1_000_000, 61).unwrap();
        let cd = chamfer_l1(&pred, &gt).unwrap();
        let f = fscore_detail(&pred, &gt, 0.01).unwrap();
        let t = start.elapsed();
        let pass = cd.cd < 0.01
            && f.f > 0.95
            && cd.completeness < 0.015
            && cd.accuracy < 0.015
            && within(Duration::from_secs(120), t);
        outcome(
            pass,
            format!(
                "cd {:.5} (comp {:.5}, acc {:.5}), F {:.4} (P {:.4}, R {:.4}), {:.1} s",
                cd.cd,
                cd.completeness,
                cd.accuracy,
                f.f,
                f.precision,
                f.recall,
                t.as_secs_f64()
            ),
        )
    })
}

fn box_spec(count: usize, seed: u64) -> SceneSpec {
    SceneSpec {
        primitives: vec![Primitive::Box {
            center: [0.0; 3],
            half_extents: [0.4, 0.3, 0.25],
        }],
        sampling: SamplingSpec {
            count,
            noise: 0.0,
            mode: SamplingMode::Uniform,
            seed,
        },
    }
}

fn mesh_cd(mesh: &serialsdf::mesher::Mesh, gt: &[Point3]) -> f64 {
    match sample_surface(mesh, 20_000, 7) {
        Ok(p) if !p.is_empty() => chamfer_l1(&p, gt).unwrap().cd,
        _ => f64::INFINITY,
    }
}

fn c7_training() -> Outcome {
    let start = Instant::now();
    let pcfg = PyramidConfig::default();
    let specs = [SceneSpec::sphere(0.4, 5000, 0.0, 71), box_spec(5000, 72)];
    let train_counts = QueryCounts {
        near: 2000,
        uniform: 500,
    };
    let held_counts = QueryCounts {
        near: 400,
        uniform: 100,
    };
    let cfg = TrainConfig::default();
    let build = |counts, seed| -> Vec<TrainingScene> {
        specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                TrainingScene::build(s, &pcfg, 0.01, CurveKind::Hilbert, counts, cfg.mask_band, seed + i as u64)
                    .unwrap()
            })
            .collect()
    };
    let train = build(train_counts, 700);
    let held = build(held_counts, 800);
    let shape = DecoderShape::new(pcfg.levels, train[0].pyramid.feature_dim(), DecoderShape::DEFAULT_HIDDEN).unwrap();
    let init = DecoderParams::init(shape, 7);
    let before = evaluate_loss(&held, &init, &cfg).unwrap();
    let (trained, report) = train_decoder(&train, init.clone(), &cfg).unwrap();
    let after = evaluate_loss(&held, &trained, &cfg).unwrap();

    let oracle = specs[0].oracle();
    let gt = surface_samples(&oracle, 20_000, SurfaceSampling::Stratified, 9).unwrap();
    let cd_of = |p: &DecoderParams| {
        reconstruct_neural(&train[0].pyramid, p, cfg.policy, cfg.sdf_scale, 0.02, 0.05, true)
            .map(|m| mesh_cd(&m, &gt))
            .unwrap_or(f64::INFINITY)
    };
    let (cd_init, cd_trained) = (cd_of(&init), cd_of(&trained));
    let t = start.elapsed();
    let ratio = after.total / before.total;
    outcome(
        ratio < 0.5 && cd_trained < cd_init && within(Duration::from_secs(600), t),
        format!(
            "held-out loss {:.3} -> {:.3} (x{ratio:.3}), last batch {:.3}, CD init {cd_init:.4} trained {cd_trained:.4}, {:.0} s",
            before.total,
            after.total,
            report.losses.last().copied().unwrap_or(f64::NAN),
            t.as_secs_f64()
        ),
    )
}

fn brute_nearest(p: Point3, set: &[Point3]) -> f64 {
    let mut best = f64::INFINITY;
    for q in set {
        best = best.min(geom::dist(p, *q));
    }
    best
}

fn c8_metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..1000 {
        let (na, nb) = (rng.random_range(1..=100), rng.random_range(1..=100));
        let a = random_points(&mut rng, na, -1.0, 1.0);
        let b = random_points(&mut rng, nb, -1.0, 1.0);
        let delta = rng.random_range(0.01..0.5);
        let da: Vec<f64> = a.iter().map(|p| brute_nearest(*p, &b)).collect();
        let db: Vec<f64> = b.iter().map(|p| brute_nearest(*p, &a)).collect();
        let acc = da.iter().sum::<f64>() / da.len() as f64;
        let comp = db.iter().sum::<f64>() / db.len() as f64;
        let p = da.iter().filter(|&&d| d <= delta).count() as f64 / da.len() as f64;
        let r = db.iter().filter(|&&d| d <= delta).count() as f64 / db.len() as f64;
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        let c = chamfer_l1(&a, &b).unwrap();
        if c.accuracy != acc || c.completeness != comp || c.cd != 0.5 * (acc + comp) || fscore(&a, &b, delta).unwrap() != f {
            bad += 1;
        }
    }
    let pred = [[0.0, 0.0, 0.0]];
    let gt = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
    let c = chamfer_l1(&pred, &gt).unwrap();
    let f = fscore(&pred, &gt, 1.0).unwrap();
    let example = c.accuracy == 1.0 && c.completeness == 1.5 && c.cd == 1.25 && (f - 2.0 / 3.0).abs() < 1e-15;
    outcome(
        bad == 0 && example,
        format!("{bad}/1000 mismatches, worked example cd {} F {f:.6}", c.cd),
    )
}

fn c9_throughput() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = random_points(&mut rng, 100_000, 0.0, 1.0);
        let queries = random_points(&mut rng, 10_000, 0.0, 1.0);
        let start = Instant::now();
        let params = CurveParams::for_points(&pts, 0.01, MAX_BITS).unwrap();
        let index = SerializedIndex::build(&pts, params, CurveKind::Hilbert).unwrap();
        let cfg = NeighborQueryConfig::for_level(8, 0.01);
        let mut sink = 0usize;
        for &q in &queries {
            sink += index.approx_neighbors(q, &cfg).len();
        }
        let approx = start.elapsed();
        let start = Instant::now();
        for &q in &queries {
            sink += exact_knn(&pts, q, 8).len();
        }
        let exact = start.elapsed();
        outcome(
            approx < exact && sink > 0,
            format!(
                "approx {:.3} s (including index build) vs exact {:.3} s",
                approx.as_secs_f64(),
                exact.as_secs_f64()
            ),
        )
    })
}

fn desk_scene() -> SceneSpec {
    SceneSpec {
        primitives: vec![
            Primitive::Box {
                center: [0.0, 0.0, -0.1],
                half_extents: [0.6, 0.4, 0.05],
            },
            Primitive::Sphere {
                center: [0.3, 0.1, 0.2],
                radius: 0.15,
            },
            Primitive::Torus {
                center: [-0.3, -0.1, 0.05],
                major: 0.15,
                minor: 0.05,
            },
        ],
        sampling: SamplingSpec {
            count: 20_000,
            noise: 0.002,
            mode: SamplingMode::Uniform,
            seed: 10,
        },
    }
}

fn c10_segmentation() -> Outcome {
    let start = Instant::now();
    let spec = desk_scene();
    let scene = generate_scene(&spec).unwrap();
    let gt = surface_samples(&scene.oracle, 50_000, SurfaceSampling::Stratified, 11).unwrap();
    let cfg = ImlsConfig::default();
    let cd_of = |m: &serialsdf::mesher::Mesh| chamfer_l1(&sample_surface(m, 50_000, 12).unwrap(), &gt).unwrap().cd;
    let whole = cd_of(&reconstruct_imls(&scene.cloud, &cfg).unwrap());
    let parts = cd_of(&reconstruct_segmented(&scene.cloud, &cfg, 10).unwrap());
    let rel = (parts - whole).abs() / whole;
    outcome(
        rel <= 0.15,
        format!(
            "cd whole {whole:.5}, 10 segments {parts:.5} ({:+.1}%), {:.1} s",
            100.0 * (parts - whole) / whole,
            start.elapsed().as_secs_f64()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("curve correctness", c1_curves),
        ("recall trend hilbert >= morton", c2_recall_trend),
        ("exhaustive window equals exact knn", c3_exhaustive_window),
        ("decoder gradient check", c4_gradient_check),
        ("eikonal and laplacian fidelity", c5_eikonal_laplacian),
        ("desk-scale sphere reconstruction", c6_desk_reconstruction),
        ("training progress", c7_training),
        ("metric oracle equivalence", c8_metric_oracle),
        ("serialized search faster than brute force", c9_throughput),
        ("segmented reconstruction fidelity", c10_segmentation),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let o = run();
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
