//! The trainable decoder: one residual encoder per pyramid level, summed
//! across levels, followed by a signed-distance head and a near/far head.
//!
//! All weights live in one flat vector so the optimizer and the binary
//! format can treat them uniformly. Per level `s` the layout is
//! `W0 (H x (D+3)), b0 (H), W1 (H x H), b1 (H), W2 (H x H), b2 (H)`, then
//! the SDF head `W1 (H x H), b1 (H), w2 (H), b2 (1)`, then the mask head with
//! the same shape. Matrices are row-major with one row per output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::aggregate::{aggregate_level, inverse_distance_weight, AGGREGATE_EPS};
use crate::field::{DistanceField, FieldValue};
use crate::geom::{self, Point3};
use crate::pyramid::FeaturePyramid;
use crate::spatial::{NeighborQueryConfig, NeighborSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderShape {
    pub levels: usize,
    pub feature_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EncoderOffsets {
    w0: usize,
    b0: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HeadOffsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl DecoderShape {
    pub const DEFAULT_HIDDEN: usize = 32;

    pub fn new(levels: usize, feature_dim: usize, hidden: usize) -> Result<Self> {
        if levels == 0 || hidden == 0 {
            return Err(Error::InvalidParams(
                "decoder needs at least one level and a positive hidden width".into(),
            ));
        }
        Ok(DecoderShape {
            levels,
            feature_dim,
            hidden,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + 3
    }

    fn encoder_len(&self) -> usize {
        let h = self.hidden;
        h * self.input_dim() + h + 2 * (h * h + h)
    }

    fn head_len(&self) -> usize {
        let h = self.hidden;
        h * h + 2 * h + 1
    }

    pub fn param_count(&self) -> usize {
        self.levels * self.encoder_len() + 2 * self.head_len()
    }

    pub(crate) fn encoder(&self, s: usize) -> EncoderOffsets {
        let h = self.hidden;
        let w0 = s * self.encoder_len();
        let b0 = w0 + h * self.input_dim();
        let w1 = b0 + h;
        let b1 = w1 + h * h;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        EncoderOffsets {
            w0,
            b0,
            w1,
            b1,
            w2,
            b2,
        }
    }

    fn head(&self, which: usize) -> HeadOffsets {
        let h = self.hidden;
        let w1 = self.levels * self.encoder_len() + which * self.head_len();
        let b1 = w1 + h * h;
        let w2 = b1 + h;
        let b2 = w2 + h;
        HeadOffsets { w1, b1, w2, b2 }
    }

    pub(crate) fn sdf_head(&self) -> HeadOffsets {
        self.head(0)
    }

    pub(crate) fn mask_head(&self) -> HeadOffsets {
        self.head(1)
    }

    /// `(name, rows, cols)` of every tensor in storage order.
    pub fn tensors(&self) -> Vec<(String, usize, usize)> {
        let (h, i) = (self.hidden, self.input_dim());
        let mut out = Vec::new();
        for s in 0..self.levels {
            for (name, r, c) in [
                ("w0", h, i),
                ("b0", h, 1),
                ("w1", h, h),
                ("b1", h, 1),
                ("w2", h, h),
                ("b2", h, 1),
            ] {
                out.push((format!("encoder{s}.{name}"), r, c));
            }
        }
        for head in ["sdf", "mask"] {
            for (name, r, c) in [("w1", h, h), ("b1", h, 1), ("w2", 1, h), ("b2", 1, 1)] {
                out.push((format!("{head}.{name}"), r, c));
            }
        }
        out
    }
}

/// Factor applied to the Glorot-initialized SDF output weights.
pub const SDF_OUTPUT_INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub shape: DecoderShape,
    pub values: Vec<f64>,
}

impl DecoderParams {
    /// Glorot-uniform weights from a seeded generator, zero biases, with the
    /// SDF output row scaled by [`SDF_OUTPUT_INIT_SCALE`].
    pub fn init(shape: DecoderShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; shape.param_count()];
        let mut fill = |values: &mut [f64], off: usize, rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            for v in &mut values[off..off + rows * cols] {
                *v = rng.random_range(-limit..limit);
            }
        };
        let (h, i) = (shape.hidden, shape.input_dim());
        for s in 0..shape.levels {
            let e = shape.encoder(s);
            fill(&mut values, e.w0, h, i);
            fill(&mut values, e.w1, h, h);
            fill(&mut values, e.w2, h, h);
        }
        for head in [shape.sdf_head(), shape.mask_head()] {
            fill(&mut values, head.w1, h, h);
            fill(&mut values, head.w2, 1, h);
        }
        // A full-size output layer starts the bounded SDF head deep in
        // saturation, where it receives no gradient.
        let w2 = shape.sdf_head().w2;
        for v in &mut values[w2..w2 + h] {
            *v *= SDF_OUTPUT_INIT_SCALE;
        }
        DecoderParams { shape, values }
    }

    pub fn from_values(shape: DecoderShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.param_count() {
            return Err(Error::InvalidParams(format!(
                "expected {} decoder values, got {}",
                shape.param_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("decoder values must be finite".into()));
        }
        Ok(DecoderParams { shape, values })
    }
}

/// How neighborhoods are gathered at every level: `k` neighbors from a
/// window of `window_factor * k` sorted positions, within
/// `r_max_factor * pool_size` of the query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryPolicy {
    pub k: usize,
    pub window_factor: usize,
    pub r_max_factor: f64,
}

impl Default for QueryPolicy {
    fn default() -> Self {
        QueryPolicy {
            k: 8,
            window_factor: 2,
            r_max_factor: 8.0,
        }
    }
}

impl QueryPolicy {
    pub fn level_config(&self, pool_size: f64) -> NeighborQueryConfig {
        NeighborQueryConfig {
            k: self.k,
            window: self.window_factor * self.k,
            r_max: self.r_max_factor * pool_size,
        }
    }
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out = W x + b` for row-major `W` with `out.len()` rows.
#[inline]
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = b[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Intermediate values of one encoder application.
struct EncoderTrace {
    x: Vec<f64>,
    pre0: Vec<f64>,
    a: Vec<f64>,
    pre1: Vec<f64>,
    h: Vec<f64>,
}

impl EncoderTrace {
    fn new(shape: &DecoderShape) -> Self {
        let hid = shape.hidden;
        EncoderTrace {
            x: vec![0.0; shape.input_dim()],
            pre0: vec![0.0; hid],
            a: vec![0.0; hid],
            pre1: vec![0.0; hid],
            h: vec![0.0; hid],
        }
    }
}

fn encoder_input(offset: Point3, pool: f64, feature: &[f64], x: &mut [f64]) {
    for a in 0..3 {
        x[a] = offset[a] / pool;
    }
    x[3..].copy_from_slice(feature);
}

fn encoder_forward(p: &[f64], shape: &DecoderShape, s: usize, t: &mut EncoderTrace, out: &mut [f64]) {
    let hid = shape.hidden;
    let e = shape.encoder(s);
    let i = shape.input_dim();
    affine(&p[e.w0..e.w0 + hid * i], &p[e.b0..e.b0 + hid], &t.x, &mut t.pre0);
    for (a, &z) in t.a.iter_mut().zip(&t.pre0) {
        *a = softplus(z);
    }
    affine(&p[e.w1..e.w1 + hid * hid], &p[e.b1..e.b1 + hid], &t.a, &mut t.pre1);
    for j in 0..hid {
        t.h[j] = t.a[j] + softplus(t.pre1[j]);
    }
    affine(&p[e.w2..e.w2 + hid * hid], &p[e.b2..e.b2 + hid], &t.h, out);
}

/// Accumulates parameter gradients of one encoder output given `de`,
/// using the trace left by `encoder_forward`.
fn encoder_backward(
    p: &[f64],
    shape: &DecoderShape,
    s: usize,
    t: &EncoderTrace,
    de: &[f64],
    grad: &mut [f64],
) {
    let hid = shape.hidden;
    let i = shape.input_dim();
    let e = shape.encoder(s);
    let mut dh = vec![0.0; hid];
    for r in 0..hid {
        let g = de[r];
        if g == 0.0 {
            continue;
        }
        grad[e.b2 + r] += g;
        let row = e.w2 + r * hid;
        for c in 0..hid {
            grad[row + c] += g * t.h[c];
            dh[c] += g * p[row + c];
        }
    }
    // h = a + softplus(pre1)
    let mut da = dh.clone();
    for r in 0..hid {
        let g = dh[r] * sigmoid(t.pre1[r]);
        grad[e.b1 + r] += g;
        let row = e.w1 + r * hid;
        for c in 0..hid {
            grad[row + c] += g * t.a[c];
            da[c] += g * p[row + c];
        }
    }
    for r in 0..hid {
        let g = da[r] * sigmoid(t.pre0[r]);
        grad[e.b0 + r] += g;
        let row = e.w0 + r * i;
        for c in 0..i {
            grad[row + c] += g * t.x[c];
        }
    }
}

fn head_forward(p: &[f64], hid: usize, o: HeadOffsets, z: &[f64], pre: &mut [f64]) -> f64 {
    affine(&p[o.w1..o.w1 + hid * hid], &p[o.b1..o.b1 + hid], z, pre);
    p[o.b2] + (0..hid).map(|j| p[o.w2 + j] * softplus(pre[j])).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
fn head_backward(
    p: &[f64],
    hid: usize,
    o: HeadOffsets,
    z: &[f64],
    pre: &[f64],
    dout: f64,
    grad: &mut [f64],
    dz: &mut [f64],
) {
    grad[o.b2] += dout;
    for r in 0..hid {
        grad[o.w2 + r] += dout * softplus(pre[r]);
        let g = dout * p[o.w2 + r] * sigmoid(pre[r]);
        grad[o.b1 + r] += g;
        let row = o.w1 + r * hid;
        for c in 0..hid {
            grad[row + c] += g * z[c];
            dz[c] += g * p[row + c];
        }
    }
}

/// Everything needed to backpropagate one field evaluation.
pub(crate) struct Evaluation {
    pub neighbors: Vec<NeighborSet>,
    pub fused: Vec<f64>,
    pub sdf_pre: Vec<f64>,
    pub sdf_raw: f64,
    pub mask_pre: Vec<f64>,
    pub value: FieldValue,
}

/// The learned field over one pyramid.
#[derive(Debug, Clone, Copy)]
pub struct NeuralField<'a> {
    pub pyramid: &'a FeaturePyramid,
    pub params: &'a DecoderParams,
    pub policy: QueryPolicy,
    /// The SDF head's `tanh` output is multiplied by this, in meters.
    pub sdf_scale: f64,
}

impl<'a> NeuralField<'a> {
    pub const DEFAULT_SDF_SCALE: f64 = 0.5;

    pub fn new(
        pyramid: &'a FeaturePyramid,
        params: &'a DecoderParams,
        policy: QueryPolicy,
        sdf_scale: f64,
    ) -> Result<Self> {
        let shape = &params.shape;
        if shape.levels != pyramid.num_levels() || shape.feature_dim != pyramid.feature_dim() {
            return Err(Error::InvalidParams(format!(
                "decoder expects {} levels with {} features, pyramid has {} with {}",
                shape.levels,
                shape.feature_dim,
                pyramid.num_levels(),
                pyramid.feature_dim()
            )));
        }
        if !(sdf_scale > 0.0) {
            return Err(Error::InvalidParams("sdf scale must be positive".into()));
        }
        Ok(NeuralField {
            pyramid,
            params,
            policy,
            sdf_scale,
        })
    }

    pub(crate) fn neighbors(&self, q: Point3) -> Vec<NeighborSet> {
        self.pyramid
            .levels()
            .iter()
            .map(|l| l.index.approx_neighbors(q, &self.policy.level_config(l.pool_size)))
            .collect()
    }

    pub(crate) fn forward(&self, q: Point3) -> Result<Evaluation> {
        let shape = &self.params.shape;
        let p = &self.params.values;
        let hid = shape.hidden;
        let neighbors = self.neighbors(q);
        if neighbors.iter().all(|n| n.is_empty()) {
            return Err(Error::NoSupport);
        }
        let mut fused = vec![0.0; hid];
        let mut trace = EncoderTrace::new(shape);
        for (s, (level, nb)) in self.pyramid.levels().iter().zip(&neighbors).enumerate() {
            let agg = aggregate_level(q, &level.cloud, nb, hid, |offset, feature, out| {
                encoder_input(offset, level.pool_size, feature, &mut trace.x);
                encoder_forward(p, shape, s, &mut trace, out);
            });
            for (f, v) in fused.iter_mut().zip(&agg.value) {
                *f += v;
            }
        }
        let mut sdf_pre = vec![0.0; hid];
        let sdf_raw = head_forward(p, hid, shape.sdf_head(), &fused, &mut sdf_pre);
        let mut mask_pre = vec![0.0; hid];
        let logit = head_forward(p, hid, shape.mask_head(), &fused, &mut mask_pre);
        Ok(Evaluation {
            neighbors,
            value: FieldValue {
                sdf: sdf_raw.tanh() * self.sdf_scale,
                mask_logit: Some(logit),
            },
            fused,
            sdf_pre,
            sdf_raw,
            mask_pre,
        })
    }

    /// Adds `dsdf * d(sdf)/dθ + dlogit * d(logit)/dθ` into `grad`.
    pub(crate) fn backward(
        &self,
        q: Point3,
        ev: &Evaluation,
        dsdf: f64,
        dlogit: f64,
        grad: &mut [f64],
    ) {
        let shape = &self.params.shape;
        let p = &self.params.values;
        let hid = shape.hidden;
        let mut dz = vec![0.0; hid];
        let th = ev.sdf_raw.tanh();
        let draw = dsdf * self.sdf_scale * (1.0 - th * th);
        if draw != 0.0 {
            head_backward(p, hid, shape.sdf_head(), &ev.fused, &ev.sdf_pre, draw, grad, &mut dz);
        }
        if dlogit != 0.0 {
            head_backward(p, hid, shape.mask_head(), &ev.fused, &ev.mask_pre, dlogit, grad, &mut dz);
        }
        if dz.iter().all(|&g| g == 0.0) {
            return;
        }
        let mut trace = EncoderTrace::new(shape);
        let mut enc = vec![0.0; hid];
        let mut de = vec![0.0; hid];
        for (s, (level, nb)) in self.pyramid.levels().iter().zip(&ev.neighbors).enumerate() {
            if nb.is_empty() {
                continue;
            }
            let wsum: f64 = nb.entries.iter().map(|&(_, d)| inverse_distance_weight(d)).sum();
            let norm = 1.0 / (AGGREGATE_EPS + wsum);
            for &(i, d) in &nb.entries {
                let w = inverse_distance_weight(d) * norm;
                let feature = level.cloud.features.as_ref().map_or(&[][..], |f| f.row(i));
                encoder_input(geom::sub(level.cloud.positions[i], q), level.pool_size, feature, &mut trace.x);
                encoder_forward(p, shape, s, &mut trace, &mut enc);
                for (g, z) in de.iter_mut().zip(&dz) {
                    *g = w * z;
                }
                encoder_backward(p, shape, s, &trace, &de, grad);
            }
        }
    }
}

impl DistanceField for NeuralField<'_> {
    fn evaluate(&self, q: Point3) -> Result<FieldValue> {
        self.forward(q).map(|e| e.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{CurveKind, CurveParams};
    use crate::pyramid::{Features, PointCloud, PyramidConfig};

    fn five_point_pyramid(levels: usize) -> FeaturePyramid {
        let pos = vec![
            [0.00, 0.00, 0.00],
            [0.03, 0.01, 0.00],
            [0.01, 0.04, 0.02],
            [0.05, 0.05, 0.01],
            [0.02, 0.02, 0.05],
        ];
        let feats: Vec<f64> = (0..10).map(|i| 0.1 * i as f64 - 0.4).collect();
        let mut cloud = PointCloud::new(pos.clone());
        cloud.features = Some(Features::new(2, feats).unwrap());
        let params = CurveParams::for_points(&pos, 0.01, 21).unwrap();
        let cfg = PyramidConfig {
            levels,
            base_pool: 0.02,
        };
        FeaturePyramid::build(&cloud, &cfg, params, CurveKind::Hilbert).unwrap()
    }

    /// Straight-line evaluation written from the formulas, with explicit
    /// loops and no shared helpers.
    fn reference_eval(
        pyr: &FeaturePyramid,
        params: &DecoderParams,
        policy: QueryPolicy,
        scale: f64,
        q: Point3,
    ) -> (f64, f64) {
        let sp = |x: f64| (1.0 + x.exp()).ln();
        let shape = params.shape;
        let (hd, d) = (shape.hidden, shape.feature_dim);
        let ni = d + 3;
        let v = &params.values;
        let mut cursor = 0usize;
        let mut take = |n: usize| {
            let s = &v[cursor..cursor + n];
            cursor += n;
            s.to_vec()
        };
        let mut encoders = Vec::new();
        for _ in 0..shape.levels {
            encoders.push([take(hd * ni), take(hd), take(hd * hd), take(hd), take(hd * hd), take(hd)]);
        }
        let sdf = [take(hd * hd), take(hd), take(hd), take(1)];
        let mask = [take(hd * hd), take(hd), take(hd), take(1)];

        let mut fused = vec![0.0; hd];
        for (s, level) in pyr.levels().iter().enumerate() {
            let cfg = policy.level_config(level.pool_size);
            let nb = level.index.approx_neighbors(q, &cfg);
            let [w0, b0, w1, b1, w2, b2] = &encoders[s];
            let mut num = vec![0.0; hd];
            let mut den = 1e-8;
            for &(i, _) in &nb.entries {
                let p = level.cloud.positions[i];
                let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                let w = 1.0 / dist.max(1e-8);
                let mut x = vec![
                    (p[0] - q[0]) / level.pool_size,
                    (p[1] - q[1]) / level.pool_size,
                    (p[2] - q[2]) / level.pool_size,
                ];
                x.extend_from_slice(level.cloud.features.as_ref().unwrap().row(i));
                let mut a = vec![0.0; hd];
                for r in 0..hd {
                    let mut acc = b0[r];
                    for c in 0..ni {
                        acc += w0[r * ni + c] * x[c];
                    }
                    a[r] = sp(acc);
                }
                let mut h = vec![0.0; hd];
                for r in 0..hd {
                    let mut acc = b1[r];
                    for c in 0..hd {
                        acc += w1[r * hd + c] * a[c];
                    }
                    h[r] = a[r] + sp(acc);
                }
                for r in 0..hd {
                    let mut acc = b2[r];
                    for c in 0..hd {
                        acc += w2[r * hd + c] * h[c];
                    }
                    num[r] += w * acc;
                }
                den += w;
            }
            for r in 0..hd {
                fused[r] += num[r] / den;
            }
        }
        let head = |hp: &[Vec<f64>; 4]| {
            let mut out = hp[3][0];
            for r in 0..hd {
                let mut acc = hp[1][r];
                for c in 0..hd {
                    acc += hp[0][r * hd + c] * fused[c];
                }
                out += hp[2][r] * sp(acc);
            }
            out
        };
        (head(&sdf).tanh() * scale, head(&mask))
    }

    #[test]
    fn matches_reference_reimplementation() {
        for levels in [1, 3] {
            let pyr = five_point_pyramid(levels);
            let shape = DecoderShape::new(levels, 2, 6).unwrap();
            let params = DecoderParams::init(shape, 11);
            let policy = QueryPolicy::default();
            let field = NeuralField::new(&pyr, &params, policy, 0.5).unwrap();
            for q in [[0.02, 0.02, 0.02], [0.0, 0.0, 0.0], [0.06, 0.01, 0.03]] {
                let v = field.evaluate(q).unwrap();
                let (sdf, logit) = reference_eval(&pyr, &params, policy, 0.5, q);
                assert!((v.sdf - sdf).abs() < 1e-12, "{} vs {sdf}", v.sdf);
                assert!((v.mask_logit.unwrap() - logit).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_level_fuses_to_its_aggregate() {
        let pyr = five_point_pyramid(1);
        let shape = DecoderShape::new(1, 2, 5).unwrap();
        let params = DecoderParams::init(shape, 2);
        let field = NeuralField::new(&pyr, &params, QueryPolicy::default(), 0.5).unwrap();
        let q = [0.01, 0.03, 0.01];
        let ev = field.forward(q).unwrap();
        let level = pyr.level(0);
        let mut trace = EncoderTrace::new(&shape);
        let agg = aggregate_level(q, &level.cloud, &ev.neighbors[0], 5, |offset, f, out| {
            encoder_input(offset, level.pool_size, f, &mut trace.x);
            encoder_forward(&params.values, &shape, 0, &mut trace, out);
        });
        assert_eq!(ev.fused, agg.value);
    }

    #[test]
    fn far_query_has_no_support() {
        let pyr = five_point_pyramid(2);
        let params = DecoderParams::init(DecoderShape::new(2, 2, 4).unwrap(), 0);
        let field = NeuralField::new(&pyr, &params, QueryPolicy::default(), 0.5).unwrap();
        assert!(matches!(field.evaluate([5.0, 5.0, 5.0]), Err(Error::NoSupport)));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let pyr = five_point_pyramid(2);
        let params = DecoderParams::init(DecoderShape::new(3, 2, 4).unwrap(), 0);
        assert!(NeuralField::new(&pyr, &params, QueryPolicy::default(), 0.5).is_err());
    }

    #[test]
    fn parameter_count_and_layout() {
        let shape = DecoderShape::new(4, 8, 32).unwrap();
        let per_level = 32 * 11 + 32 + 2 * (32 * 32 + 32);
        let head = 32 * 32 + 32 + 32 + 1;
        assert_eq!(shape.param_count(), 4 * per_level + 2 * head);
        let total: usize = shape.tensors().iter().map(|(_, r, c)| r * c).sum();
        assert_eq!(total, shape.param_count());
        assert_eq!(shape.mask_head().b2, shape.param_count() - 1);
    }

    #[test]
    fn init_is_seeded() {
        let shape = DecoderShape::new(2, 8, 8).unwrap();
        assert_eq!(DecoderParams::init(shape, 5), DecoderParams::init(shape, 5));
        assert_ne!(DecoderParams::init(shape, 5), DecoderParams::init(shape, 6));
    }

    #[test]
    fn activations_are_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
