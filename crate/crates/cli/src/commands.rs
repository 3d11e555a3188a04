use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use serialsdf::curves::{CurveKind, CurveParams, MAX_BITS};
use serialsdf::field::{
    build_feature_pyramid, read_params, train_decoder, write_params, DecoderParams, DecoderShape, ParamsExport,
    TrainingScene,
};
use serialsdf::geom::{Aabb, Point3};
use serialsdf::io::{self, write_atomic};
use serialsdf::mesher::{sample_surface, Mesh};
use serialsdf::metrics::{chamfer_l1, fscore_detail, recall_benchmark, RecallConfig};
use serialsdf::pyramid::PointCloud;
use serialsdf::reconstruct::{reconstruct_imls, reconstruct_neural, reconstruct_segmented};
use serialsdf::scene::{
    generate_scene, surface_samples, Primitive, SamplingMode, SamplingSpec, SceneSpec, SurfaceSampling,
};
use serialsdf::spatial::SerializedIndex;
use serialsdf::{Error, Result};

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::{BenchArgs, EvalArgs, GenArgs, IndexArgs, ReconstructArgs, SegmentArgs, TrainArgs};

fn prepare(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    Ok(())
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    let loaded = io::load_cloud(path)?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    if loaded.cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(loaded.cloud)
}

fn write_csv<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut csv::Writer<&mut dyn std::io::Write>) -> csv::Result<()>,
{
    write_atomic(path, |w| {
        let mut writer = csv::Writer::from_writer(w);
        fill(&mut writer).map_err(std::io::Error::other)?;
        writer.flush()?;
        Ok(())
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn read_scene(path: &Path) -> Result<SceneSpec> {
    let text = fs::read_to_string(path)?;
    let spec: SceneSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn preset(name: &str, seed: u64) -> Result<SceneSpec> {
    let sampling = |count, noise| SamplingSpec {
        count,
        noise,
        mode: SamplingMode::Uniform,
        seed,
    };
    Ok(match name {
        "sphere" => SceneSpec::sphere(1.0, 10_000, 0.005, seed),
        "box" => SceneSpec {
            primitives: vec![Primitive::Box {
                center: [0.0; 3],
                half_extents: [0.4, 0.3, 0.25],
            }],
            sampling: sampling(5000, 0.0),
        },
        "desk" => SceneSpec {
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
            sampling: sampling(20_000, 0.002),
        },
        other => return Err(Error::InvalidParams(format!("unknown scene preset '{other}'"))),
    })
}

pub fn gen(cfg: RunConfig, a: &GenArgs) -> Result<()> {
    prepare(&cfg, &a.out)?;
    let spec = match &a.scene {
        Some(p) => read_scene(p)?,
        None => preset(&a.preset, cfg.seed)?,
    };
    let scene = generate_scene(&spec)?;
    let gt = surface_samples(&scene.oracle, a.gt_samples, SurfaceSampling::Stratified, spec.sampling.seed ^ 0x9e37)?;
    let cloud_path = a.out.join("cloud.ply");
    let gt_path = a.out.join("gt.ply");
    let scene_path = a.out.join("scene.json");
    io::write_cloud_ply(&cloud_path, &scene.cloud)?;
    io::write_cloud_ply(&gt_path, &PointCloud::new(gt))?;
    write_json(
        &scene_path,
        &json!({ "spec": spec, "block_counts": scene.block_counts, "bounds": spec.bounds() }),
    )?;
    let mut m = Manifest::new(
        "gen",
        &cfg,
        json!({ "scene": a.scene, "preset": a.preset, "gt_samples": a.gt_samples }),
    );
    m.inputs.extend(a.scene.clone());
    m.outputs = vec![cloud_path, gt_path, scene_path];
    m.write(&a.out)?;
    Ok(())
}

pub fn index(cfg: RunConfig, a: &IndexArgs) -> Result<()> {
    prepare(&cfg, &a.out)?;
    let cloud = load_cloud(&a.input)?;
    let params = CurveParams::for_points(&cloud.positions, cfg.grid_size, MAX_BITS)?;
    let index = SerializedIndex::build(&cloud.positions, params, cfg.curve)?;
    let path = a.out.join("codes.csv");
    write_csv(&path, |w| {
        w.write_record(["order", "point", "code"])?;
        for (order, (&p, &code)) in index.perm().iter().zip(index.codes()).enumerate() {
            w.serialize((order, p, code))?;
        }
        Ok(())
    })?;
    let mut m = Manifest::new("index", &cfg, json!({ "curve_params": params }));
    m.inputs.push(a.input.clone());
    m.outputs.push(path);
    m.write(&a.out)?;
    Ok(())
}

pub fn neighbors_bench(cfg: RunConfig, a: &BenchArgs) -> Result<()> {
    prepare(&cfg, &a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cloud = match &a.input {
        Some(p) => load_cloud(p)?,
        None => PointCloud::new((0..a.points).map(|_| [0, 1, 2].map(|_| rng.random_range(0.0..1.0))).collect()),
    };
    let bb = Aabb::from_points(&cloud.positions).ok_or(Error::EmptyCloud)?;
    let queries: Vec<Point3> = (0..a.queries)
        .map(|_| std::array::from_fn(|i| rng.random_range(bb.min[i]..=bb.max[i])))
        .collect();
    let rc = RecallConfig {
        k: a.k,
        window: a.window.unwrap_or(2 * a.k),
        ..RecallConfig::default()
    };
    let params = CurveParams::for_points(&cloud.positions, cfg.grid_size, MAX_BITS)?;
    let table = recall_benchmark(&cloud, &cfg.pyramid, params, &CurveKind::ALL, &queries, &rc)?;
    let path = a.out.join("recall.csv");
    write_csv(&path, |w| {
        w.write_record(["scales", "curve", "recall", "k", "window", "seed"])?;
        for (c, kind) in table.curves.iter().enumerate() {
            for (m, row) in table.rows.iter().enumerate() {
                w.serialize((m, kind.name(), row[c], table.k, table.window, cfg.seed))?;
            }
        }
        Ok(())
    })?;
    for (m, row) in table.rows.iter().enumerate() {
        let cells: Vec<String> = table
            .curves
            .iter()
            .zip(row)
            .map(|(k, r)| format!("{k} {:.2}%", 100.0 * r))
            .collect();
        println!("scales {m}: {}", cells.join(", "));
    }
    let mut m = Manifest::new(
        "neighbors-bench",
        &cfg,
        json!({ "points": cloud.len(), "queries": a.queries, "recall": rc }),
    );
    m.inputs.extend(a.input.clone());
    m.outputs.push(path);
    m.write(&a.out)?;
    Ok(())
}

fn write_mesh(dir: &Path, format: &str, mesh: &Mesh) -> Result<PathBuf> {
    let path = dir.join(format!("mesh.{format}"));
    match format {
        "ply" => io::write_mesh_ply(&path, mesh)?,
        "obj" => io::write_mesh_obj(&path, mesh)?,
        other => return Err(Error::UnsupportedFormat(format!("mesh format '{other}'"))),
    }
    Ok(path)
}

pub fn reconstruct(mut cfg: RunConfig, a: &ReconstructArgs) -> Result<()> {
    if let Some(d) = &a.decoder {
        cfg.decoder = d.clone();
    }
    if let Some(c) = a.cell {
        cfg.extraction.cell = c;
    }
    prepare(&cfg, &a.out)?;
    let cloud = load_cloud(&a.input)?;
    let mut m = Manifest::new("reconstruct", &cfg, json!({ "format": a.format }));
    m.inputs.push(a.input.clone());
    let mesh = if cfg.decoder == "imls" {
        reconstruct_imls(&cloud, &cfg.imls())?
    } else {
        let params = read_params(fs::File::open(&cfg.decoder)?)?;
        m.inputs.push(PathBuf::from(&cfg.decoder));
        let pyramid = build_feature_pyramid(&cloud.positions, &cfg.pyramid, cfg.grid_size, cfg.curve, cfg.normal_k)?;
        reconstruct_neural(
            &pyramid,
            &params,
            cfg.train.policy,
            cfg.train.sdf_scale,
            cfg.extraction.cell,
            cfg.extraction.margin,
            cfg.extraction.mask_gate,
        )?
    };
    println!("{} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());
    m.outputs.push(write_mesh(&a.out, &a.format, &mesh)?);
    m.write(&a.out)?;
    Ok(())
}

pub fn train(mut cfg: RunConfig, a: &TrainArgs) -> Result<()> {
    if let Some(s) = a.steps {
        cfg.train.steps = s;
    }
    cfg.train.seed = cfg.seed;
    prepare(&cfg, &a.out)?;
    let specs = if a.scene.is_empty() {
        vec![preset("sphere", cfg.seed)?, preset("box", cfg.seed + 1)?]
    } else {
        a.scene.iter().map(|p| read_scene(p)).collect::<Result<_>>()?
    };
    let scenes = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            TrainingScene::build(
                s,
                &cfg.pyramid,
                cfg.grid_size,
                cfg.curve,
                cfg.train_queries,
                cfg.train.mask_band,
                cfg.seed.wrapping_add(1000 + i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let shape = DecoderShape::new(
        cfg.pyramid.levels,
        scenes[0].pyramid.feature_dim(),
        DecoderShape::DEFAULT_HIDDEN,
    )?;
    let init = DecoderParams::init(shape, cfg.seed);
    let (params, report) = train_decoder(&scenes, init, &cfg.train)?;

    let weights = a.out.join("decoder.nksf");
    let export = a.out.join("decoder.json");
    let trace = a.out.join("loss.csv");
    write_atomic(&weights, |w| write_params(&params, w))?;
    write_json(&export, &ParamsExport::new(&params))?;
    write_csv(&trace, |w| {
        w.write_record(["step", "loss"])?;
        for (step, loss) in report.losses.iter().enumerate() {
            w.serialize((step, loss))?;
        }
        Ok(())
    })?;
    if let (Some(first), Some(last)) = (report.losses.first(), report.losses.last()) {
        println!("batch loss {first:.4} -> {last:.4} over {} steps", report.losses.len());
    }
    if report.skipped > 0 {
        eprintln!("warning: {} batch samples had no neighborhood support", report.skipped);
    }
    let mut m = Manifest::new("train", &cfg, json!({ "scenes": specs }));
    m.inputs.extend(a.scene.iter().cloned());
    m.outputs = vec![weights, export, trace];
    m.write(&a.out)?;
    Ok(())
}

/// Points of a ground-truth file. Meshes are sampled like predictions.
fn reference_points(path: &Path, samples: usize, seed: u64) -> Result<Vec<Point3>> {
    let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    if is_obj {
        return sample_surface(&io::load_mesh(path)?, samples, seed);
    }
    match io::load_mesh(path) {
        Ok(mesh) if !mesh.is_empty() => sample_surface(&mesh, samples, seed),
        _ => Ok(load_cloud(path)?.positions),
    }
}

pub fn eval(mut cfg: RunConfig, a: &EvalArgs) -> Result<()> {
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
    if let Some(s) = a.samples {
        cfg.eval_samples = s;
    }
    prepare(&cfg, &a.out)?;
    let mesh = io::load_mesh(&a.mesh)?;
    let pred = sample_surface(&mesh, cfg.eval_samples, cfg.seed)?;
    let gt = reference_points(&a.gt, cfg.eval_samples, cfg.seed)?;
    let cd = chamfer_l1(&pred, &gt)?;
    let f = fscore_detail(&pred, &gt, cfg.delta)?;
    let path = a.out.join("metrics.csv");
    write_csv(&path, |w| {
        w.write_record([
            "cd",
            "completeness",
            "accuracy",
            "fscore",
            "precision",
            "recall",
            "delta",
            "samples",
            "seed",
        ])?;
        w.serialize((
            cd.cd,
            cd.completeness,
            cd.accuracy,
            f.f,
            f.precision,
            f.recall,
            cfg.delta,
            cfg.eval_samples,
            cfg.seed,
        ))
    })?;
    println!(
        "CD {:.4} (comp {:.4}, acc {:.4}) x10^-2 m, F-score {:.4} at {} cm",
        100.0 * cd.cd,
        100.0 * cd.completeness,
        100.0 * cd.accuracy,
        f.f,
        100.0 * cfg.delta
    );
    let mut m = Manifest::new("eval", &cfg, json!({}));
    m.inputs = vec![a.mesh.clone(), a.gt.clone()];
    m.outputs.push(path);
    m.write(&a.out)?;
    Ok(())
}

pub fn segment(cfg: RunConfig, a: &SegmentArgs) -> Result<()> {
    if a.segments == 0 {
        return Err(Error::InvalidParams("need at least one segment".into()));
    }
    prepare(&cfg, &a.out)?;
    let cloud = load_cloud(&a.input)?;
    let params = CurveParams::for_points(&cloud.positions, cfg.grid_size, MAX_BITS)?;
    let index = SerializedIndex::build(&cloud.positions, params, cfg.curve)?;
    let mut m = Manifest::new("segment", &cfg, json!({ "segments": a.segments, "mesh": a.mesh }));
    m.inputs.push(a.input.clone());
    let width = a.segments.saturating_sub(1).to_string().len().max(2);
    for (s, members) in index.partition_segments(a.segments).iter().enumerate() {
        let path = a.out.join(format!("segment_{s:0width$}.ply"));
        io::write_cloud_ply(&path, &cloud.select(members))?;
        m.outputs.push(path);
    }
    if a.mesh {
        let mesh = reconstruct_segmented(&cloud, &cfg.imls(), a.segments)?;
        m.outputs.push(write_mesh(&a.out, "ply", &mesh)?);
    }
    m.write(&a.out)?;
    Ok(())
}
