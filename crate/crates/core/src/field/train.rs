//! Query sampling and the optimizer loop for the decoder.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curves::{CurveKind, CurveParams};
use crate::error::{Error, Result};
use crate::field::loss::{loss_and_gradient, LossWeights, QuerySample};
use crate::field::network::{DecoderParams, NeuralField, QueryPolicy};
use crate::field::{compute_losses, LossBreakdown};
use crate::geom::{self, Point3};
use crate::pyramid::{estimate_local_geometry, FeaturePyramid, PyramidConfig};
use crate::scene::{generate_scene, surface_samples, SceneSpec, SurfaceSampling};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub weights: LossWeights,
    /// Half-width of the near-surface band, in meters.
    pub mask_band: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub fd_step: f64,
    pub sdf_scale: f64,
    pub policy: QueryPolicy,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            weights: LossWeights::default(),
            mask_band: 0.015,
            learning_rate: 1e-3,
            steps: 500,
            batch_size: 64,
            fd_step: 1e-3,
            sdf_scale: NeuralField::DEFAULT_SDF_SCALE,
            policy: QueryPolicy::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.fd_step > 0.0) || !(self.mask_band > 0.0) || !(self.sdf_scale > 0.0) {
            return Err(Error::InvalidParams(
                "fd step, mask band and sdf scale must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::InvalidParams(
                "learning rate and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Adam with the usual moment constants.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub near: usize,
    pub uniform: usize,
}

/// Margin added around the scene bounds for uniform queries, in meters.
const UNIFORM_MARGIN: f64 = 0.05;

/// Near-surface queries (surface points plus isotropic Gaussian noise of
/// standard deviation `mask_band`) followed by uniform queries over the
/// scene bounds, labelled by the scene's exact distance.
pub fn sample_training_queries(
    spec: &SceneSpec,
    counts: QueryCounts,
    mask_band: f64,
    seed: u64,
) -> Result<Vec<QuerySample>> {
    spec.validate()?;
    if !(mask_band > 0.0) {
        return Err(Error::InvalidParams("mask band must be positive".into()));
    }
    let oracle = spec.oracle();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let surface = surface_samples(&oracle, counts.near, SurfaceSampling::Random, rng.random())?;
    let mut out = Vec::with_capacity(counts.near + counts.uniform);
    for p in surface {
        let q: Point3 = std::array::from_fn(|a| {
            let e: f64 = StandardNormal.sample(&mut rng);
            p[a] + mask_band * e
        });
        out.push(QuerySample::new(q, oracle.sdf_at(q), mask_band));
    }
    let bb = spec.bounds().expanded(UNIFORM_MARGIN);
    for _ in 0..counts.uniform {
        let q: Point3 = std::array::from_fn(|a| rng.random_range(bb.min[a]..bb.max[a]));
        out.push(QuerySample::new(q, oracle.sdf_at(q), mask_band));
    }
    Ok(out)
}

/// A sampled scene with its feature pyramid and a pool of labelled queries.
#[derive(Debug, Clone)]
pub struct TrainingScene {
    pub spec: SceneSpec,
    pub pyramid: FeaturePyramid,
    pub queries: Vec<QuerySample>,
}

impl TrainingScene {
    /// Samples the scene, estimates per-point geometry features with `k`
    /// neighbors, and builds the pyramid.
    pub fn build(
        spec: &SceneSpec,
        pyramid: &PyramidConfig,
        grid_size: f64,
        kind: CurveKind,
        counts: QueryCounts,
        mask_band: f64,
        query_seed: u64,
    ) -> Result<Self> {
        let scene = generate_scene(spec)?;
        let pyramid = build_feature_pyramid(&scene.cloud.positions, pyramid, grid_size, kind, 8)?;
        let queries = sample_training_queries(spec, counts, mask_band, query_seed)?;
        Ok(TrainingScene {
            spec: spec.clone(),
            pyramid,
            queries,
        })
    }
}

/// Geometry features plus pyramid over raw positions.
pub fn build_feature_pyramid(
    positions: &[Point3],
    cfg: &PyramidConfig,
    grid_size: f64,
    kind: CurveKind,
    k: usize,
) -> Result<FeaturePyramid> {
    let raw = crate::pyramid::PointCloud::new(positions.to_vec());
    let geo = estimate_local_geometry(&raw, k)?;
    // Queries may fall slightly outside the cloud; the grid starts one cell
    // below its minimum corner so clamping stays rare.
    let mut params = CurveParams::for_points(positions, grid_size, crate::curves::MAX_BITS)?;
    params.origin = geom::sub(params.origin, [grid_size; 3]);
    FeaturePyramid::build(&geo.cloud, cfg, params, kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Total batch loss before each update.
    pub losses: Vec<f64>,
    /// Batch samples skipped for lack of support, summed over steps.
    pub skipped: usize,
}

/// Runs `cfg.steps` Adam updates, cycling through `scenes`. Each step draws
/// a batch without replacement from the current scene's query pool.
pub fn train_decoder(
    scenes: &[TrainingScene],
    init: DecoderParams,
    cfg: &TrainConfig,
) -> Result<(DecoderParams, TrainReport)> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::InvalidParams("training needs at least one scene".into()));
    }
    for s in scenes {
        NeuralField::new(&s.pyramid, &init, cfg.policy, cfg.sdf_scale)?;
        if s.queries.is_empty() {
            return Err(Error::InvalidParams("scene has no training queries".into()));
        }
    }
    let mut params = init;
    let mut adam = Adam::new(params.values.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport {
        losses: Vec::with_capacity(cfg.steps),
        skipped: 0,
    };
    for step in 0..cfg.steps {
        let scene = &scenes[step % scenes.len()];
        let n = scene.queries.len();
        let picked = sample_indices(&mut rng, n, cfg.batch_size.min(n));
        let batch: Vec<QuerySample> = picked.iter().map(|i| scene.queries[i]).collect();
        let field = NeuralField::new(&scene.pyramid, &params, cfg.policy, cfg.sdf_scale)?;
        let (loss, grad) = match loss_and_gradient(&batch, &field, &cfg.weights, cfg.fd_step) {
            Ok(v) => v,
            Err(Error::AllUnsupported { count }) => {
                report.skipped += count;
                report.losses.push(f64::NAN);
                continue;
            }
            Err(e) => return Err(e),
        };
        if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step });
        }
        report.skipped += loss.skipped;
        report.losses.push(loss.total);
        adam.step(&mut params.values, &grad);
    }
    Ok((params, report))
}

/// Mean loss of `params` over every query of every scene.
pub fn evaluate_loss(
    scenes: &[TrainingScene],
    params: &DecoderParams,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let mut acc = LossBreakdown::default();
    for s in scenes {
        let field = NeuralField::new(&s.pyramid, params, cfg.policy, cfg.sdf_scale)?;
        let b = compute_losses(&s.queries, &field, &cfg.weights, cfg.fd_step)?;
        let w = b.used as f64;
        acc.l_sdf += w * b.l_sdf;
        acc.l_eikonal += w * b.l_eikonal;
        acc.l_mask += w * b.l_mask;
        acc.l_laplacian += w * b.l_laplacian;
        acc.used += b.used;
        acc.skipped += b.skipped;
    }
    let n = acc.used as f64;
    let mut out = LossBreakdown::from_components(
        acc.l_sdf / n,
        acc.l_eikonal / n,
        acc.l_mask / n,
        acc.l_laplacian / n,
        &cfg.weights,
    );
    out.used = acc.used;
    out.skipped = acc.skipped;
    Ok(out)
}
