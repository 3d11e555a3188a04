//! Training objective: L1 distance error, Eikonal and Laplacian penalties
//! from a seven-point finite-difference stencil, and near/far cross entropy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::network::{sigmoid, NeuralField};
use crate::field::{stencil, DistanceField, FieldValue};
use crate::geom::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuerySample {
    pub position: Point3,
    pub sdf: f64,
    /// Near-surface label: `|sdf| < mask_band`.
    pub near: bool,
}

impl QuerySample {
    pub fn new(position: Point3, sdf: f64, mask_band: f64) -> Self {
        QuerySample {
            position,
            sdf,
            near: sdf.abs() < mask_band,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub sdf: f64,
    pub eikonal: f64,
    pub mask: f64,
    pub laplacian: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            sdf: 300.0,
            eikonal: 10.0,
            mask: 150.0,
            laplacian: 0.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.sdf, self.eikonal, self.mask, self.laplacian];
        if all.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParams("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Loss terms of a single sample, before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleLoss {
    pub sdf: f64,
    pub eikonal: f64,
    /// Zero for fields without a classifier.
    pub mask: f64,
    pub laplacian: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_sdf: f64,
    pub l_eikonal: f64,
    pub l_mask: f64,
    pub l_laplacian: f64,
    pub total: f64,
    pub used: usize,
    /// Samples dropped because some stencil point had no support.
    pub skipped: usize,
}

impl LossBreakdown {
    pub fn from_components(
        l_sdf: f64,
        l_eikonal: f64,
        l_mask: f64,
        l_laplacian: f64,
        weights: &LossWeights,
    ) -> Self {
        LossBreakdown {
            l_sdf,
            l_eikonal,
            l_mask,
            l_laplacian,
            total: weights.sdf * l_sdf
                + weights.eikonal * l_eikonal
                + weights.mask * l_mask
                + weights.laplacian * l_laplacian,
            used: 0,
            skipped: 0,
        }
    }

    fn from_sums(sum: SampleLoss, used: usize, skipped: usize, weights: &LossWeights) -> Self {
        let n = used as f64;
        let mut out = Self::from_components(
            sum.sdf / n,
            sum.eikonal / n,
            sum.mask / n,
            sum.laplacian / n,
            weights,
        );
        out.used = used;
        out.skipped = skipped;
        out
    }
}

/// `max(x, 0) - x c + ln(1 + e^-|x|)`.
pub(crate) fn bce_with_logit(logit: f64, near: bool) -> f64 {
    let c = if near { 1.0 } else { 0.0 };
    logit.max(0.0) - logit * c + (-logit.abs()).exp().ln_1p()
}

fn terms(values: &[FieldValue; 7], sample: &QuerySample, h: f64) -> SampleLoss {
    let f = values.map(|v| v.sdf);
    let mut g2 = 0.0;
    let mut second = 0.0;
    for a in 0..3 {
        let (plus, minus) = (f[1 + 2 * a], f[2 + 2 * a]);
        let g = (plus - minus) / (2.0 * h);
        g2 += g * g;
        second += plus - 2.0 * f[0] + minus;
    }
    let gn = g2.sqrt();
    SampleLoss {
        sdf: (sample.sdf - f[0]).abs(),
        eikonal: (gn - 1.0) * (gn - 1.0),
        mask: values[0]
            .mask_logit
            .map_or(0.0, |x| bce_with_logit(x, sample.near)),
        laplacian: (second / (h * h)).abs(),
    }
}

/// Loss terms of one sample from the seven stencil evaluations at `h`.
pub fn sample_loss<F: DistanceField + ?Sized>(
    field: &F,
    sample: &QuerySample,
    h: f64,
) -> Result<SampleLoss> {
    let pts = stencil(sample.position, h);
    let mut values = [FieldValue::sdf(0.0); 7];
    for (v, p) in values.iter_mut().zip(pts) {
        *v = field.evaluate(p)?;
    }
    Ok(terms(&values, sample, h))
}

fn check_inputs(samples: &[QuerySample], weights: &LossWeights, h: f64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidParams("loss needs at least one sample".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParams("finite-difference step must be positive".into()));
    }
    weights.validate()
}

fn add(a: SampleLoss, b: SampleLoss) -> SampleLoss {
    SampleLoss {
        sdf: a.sdf + b.sdf,
        eikonal: a.eikonal + b.eikonal,
        mask: a.mask + b.mask,
        laplacian: a.laplacian + b.laplacian,
    }
}

/// Mean losses over the supported samples.
pub fn compute_losses<F: DistanceField + ?Sized>(
    samples: &[QuerySample],
    field: &F,
    weights: &LossWeights,
    h: f64,
) -> Result<LossBreakdown> {
    check_inputs(samples, weights, h)?;
    let results: Vec<Result<SampleLoss>> = samples
        .par_iter()
        .map(|s| sample_loss(field, s, h))
        .collect();
    let mut sum = SampleLoss::default();
    let mut used = 0;
    for r in results {
        match r {
            Ok(l) => {
                sum = add(sum, l);
                used += 1;
            }
            Err(Error::NoSupport) => {}
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::AllUnsupported {
            count: samples.len(),
        });
    }
    Ok(LossBreakdown::from_sums(sum, used, samples.len() - used, weights))
}

/// Samples per parallel work unit. Chunk partials are summed in chunk order,
/// so results do not depend on the thread count.
const CHUNK: usize = 8;

/// Loss and its exact gradient with respect to every decoder parameter.
///
/// Neighborhoods are treated as fixed selections: they depend on the query
/// position only, not on the weights.
pub fn loss_and_gradient(
    samples: &[QuerySample],
    field: &NeuralField<'_>,
    weights: &LossWeights,
    h: f64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    check_inputs(samples, weights, h)?;
    let n_params = field.params.values.len();
    let partials: Vec<Result<(SampleLoss, usize, Vec<f64>)>> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; n_params];
            let mut sum = SampleLoss::default();
            let mut used = 0;
            for s in chunk {
                match sample_gradient(field, s, weights, h, &mut grad) {
                    Ok(l) => {
                        sum = add(sum, l);
                        used += 1;
                    }
                    Err(Error::NoSupport) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok((sum, used, grad))
        })
        .collect();
    let mut grad = vec![0.0; n_params];
    let mut sum = SampleLoss::default();
    let mut used = 0;
    for part in partials {
        let (s, u, g) = part?;
        sum = add(sum, s);
        used += u;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    if used == 0 {
        return Err(Error::AllUnsupported {
            count: samples.len(),
        });
    }
    let inv = 1.0 / used as f64;
    for g in &mut grad {
        *g *= inv;
    }
    Ok((
        LossBreakdown::from_sums(sum, used, samples.len() - used, weights),
        grad,
    ))
}

/// Fourth-order central finite differences of the total loss with respect
/// to every decoder parameter, holding neighborhoods fixed. Slow; meant for
/// checking [`loss_and_gradient`].
pub fn numerical_gradient(
    samples: &[QuerySample],
    field: &NeuralField<'_>,
    weights: &LossWeights,
    h: f64,
    step: f64,
) -> Result<Vec<f64>> {
    let mut params = field.params.clone();
    let mut out = Vec::with_capacity(params.values.len());
    for i in 0..params.values.len() {
        let orig = params.values[i];
        let total_at = |v: f64, params: &mut crate::field::DecoderParams| {
            params.values[i] = v;
            let f = NeuralField { params, ..*field };
            compute_losses(samples, &f, weights, h).map(|b| b.total)
        };
        let p1 = total_at(orig + step, &mut params)?;
        let m1 = total_at(orig - step, &mut params)?;
        let p2 = total_at(orig + 2.0 * step, &mut params)?;
        let m2 = total_at(orig - 2.0 * step, &mut params)?;
        params.values[i] = orig;
        out.push((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step));
    }
    Ok(out)
}

/// Adds the gradient of this sample's weighted loss into `grad`. Nothing is
/// added when the sample is unsupported.
fn sample_gradient(
    field: &NeuralField<'_>,
    sample: &QuerySample,
    weights: &LossWeights,
    h: f64,
    grad: &mut [f64],
) -> Result<SampleLoss> {
    let pts = stencil(sample.position, h);
    let mut evals = Vec::with_capacity(7);
    for &p in &pts {
        evals.push(field.forward(p)?);
    }
    let values: [FieldValue; 7] = std::array::from_fn(|i| evals[i].value);
    let loss = terms(&values, sample, h);

    let f: [f64; 7] = values.map(|v| v.sdf);
    let mut df = [0.0; 7];
    let diff = f[0] - sample.sdf;
    if diff != 0.0 {
        df[0] += weights.sdf * diff.signum();
    }
    let g: [f64; 3] = std::array::from_fn(|a| (f[1 + 2 * a] - f[2 + 2 * a]) / (2.0 * h));
    let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if gn > 0.0 {
        for a in 0..3 {
            let dg = weights.eikonal * 2.0 * (gn - 1.0) * g[a] / gn / (2.0 * h);
            df[1 + 2 * a] += dg;
            df[2 + 2 * a] -= dg;
        }
    }
    let second: f64 = (0..3).map(|a| f[1 + 2 * a] - 2.0 * f[0] + f[2 + 2 * a]).sum();
    if second != 0.0 && weights.laplacian > 0.0 {
        let dl = weights.laplacian * second.signum() / (h * h);
        for v in df.iter_mut().skip(1) {
            *v += dl;
        }
        df[0] -= 6.0 * dl;
    }
    let dlogit = match values[0].mask_logit {
        Some(x) => weights.mask * (sigmoid(x) - if sample.near { 1.0 } else { 0.0 }),
        None => 0.0,
    };
    for (i, ev) in evals.iter().enumerate() {
        let dl = if i == 0 { dlogit } else { 0.0 };
        field.backward(pts[i], ev, df[i], dl, grad);
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FnField, SphereSdf};
    use crate::geom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Constant(FieldValue);

    impl DistanceField for Constant {
        fn evaluate(&self, _: Point3) -> Result<FieldValue> {
            Ok(self.0)
        }
    }

    #[test]
    fn weighted_total_example() {
        let b = LossBreakdown::from_components(0.1, 0.2, 0.3, 0.0, &LossWeights::default());
        assert!((b.total - 77.0).abs() < 1e-12);
    }

    #[test]
    fn exact_predictions_give_zero_sdf_loss() {
        let sphere = SphereSdf {
            center: [0.0; 3],
            radius: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<QuerySample> = (0..100)
            .map(|_| {
                let q: Point3 = [0, 1, 2].map(|_| rng.random_range(-2.0..2.0));
                QuerySample::new(q, sphere.sdf(q).unwrap(), 0.015)
            })
            .collect();
        let b = compute_losses(&samples, &sphere, &LossWeights::default(), 1e-3).unwrap();
        assert_eq!(b.l_sdf, 0.0);
        assert_eq!(b.l_mask, 0.0);
        assert_eq!(b.used, 100);
    }

    #[test]
    fn sphere_is_eikonal() {
        let sphere = SphereSdf {
            center: [0.0; 3],
            radius: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<QuerySample> = (0..1000)
            .map(|_| {
                let dir = geom::normalize([0, 1, 2].map(|_| rng.random_range(-1.0..1.0))).unwrap();
                let q = geom::scale(dir, rng.random_range(0.5..2.0));
                QuerySample::new(q, sphere.sdf(q).unwrap(), 0.015)
            })
            .collect();
        let b = compute_losses(&samples, &sphere, &LossWeights::default(), 1e-3).unwrap();
        assert!(b.l_eikonal < 1e-4, "{}", b.l_eikonal);
    }

    #[test]
    fn mask_loss_prefers_correct_labels() {
        let near = QuerySample::new([0.0; 3], 0.001, 0.015);
        let confident = |logit: f64| Constant(FieldValue {
            sdf: 0.001,
            mask_logit: Some(logit),
        });
        let right = sample_loss(&confident(40.0), &near, 1e-3).unwrap().mask;
        let wrong = sample_loss(&confident(-40.0), &near, 1e-3).unwrap().mask;
        assert!(right < 1e-15);
        assert!(wrong > right);
        assert!((wrong - 40.0).abs() < 1e-9);
    }

    #[test]
    fn mask_label_threshold() {
        assert!(!QuerySample::new([0.0; 3], 0.02, 0.015).near);
        assert!(QuerySample::new([0.0; 3], -0.01, 0.015).near);
    }

    #[test]
    fn unsupported_samples_are_skipped() {
        let half = FnField(|q: Point3| q[0]);
        struct Partial<F>(F);
        impl<F: DistanceField> DistanceField for Partial<F> {
            fn evaluate(&self, q: Point3) -> Result<FieldValue> {
                if q[1] > 1.0 {
                    Err(Error::NoSupport)
                } else {
                    self.0.evaluate(q)
                }
            }
        }
        let field = Partial(half);
        let samples = vec![
            QuerySample::new([0.0, 0.0, 0.0], 0.0, 0.015),
            QuerySample::new([0.0, 5.0, 0.0], 0.0, 0.015),
        ];
        let b = compute_losses(&samples, &field, &LossWeights::default(), 1e-3).unwrap();
        assert_eq!((b.used, b.skipped), (1, 1));
        let err = compute_losses(&samples[1..], &field, &LossWeights::default(), 1e-3).unwrap_err();
        assert!(matches!(err, Error::AllUnsupported { count: 1 }));
    }

    #[test]
    fn empty_batch_rejected() {
        let f = FnField(|q: Point3| q[0]);
        assert!(compute_losses(&[], &f, &LossWeights::default(), 1e-3).is_err());
    }
}
