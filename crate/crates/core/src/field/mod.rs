//! Distance fields over a feature pyramid.
//!
//! A field maps a query position to a signed distance and, optionally, a
//! near/far classifier logit. Fields may be undefined where no input point
//! supports the query; such queries return [`Error::NoSupport`].

mod aggregate;
mod loss;
mod network;
mod params_io;
mod train;

pub use aggregate::{aggregate_level, imls_distance, Aggregate, ImlsField, AGGREGATE_EPS, WEIGHT_EPS};
pub use loss::{
    compute_losses, loss_and_gradient, numerical_gradient, sample_loss, LossBreakdown, LossWeights,
    QuerySample, SampleLoss,
};
pub use network::{DecoderParams, DecoderShape, NeuralField, QueryPolicy, SDF_OUTPUT_INIT_SCALE};
pub(crate) use network::sigmoid;
pub use params_io::{read_params, write_params, ParamsExport, PARAMS_MAGIC, PARAMS_VERSION};
pub use train::{
    build_feature_pyramid, evaluate_loss, sample_training_queries, train_decoder, Adam,
    QueryCounts, TrainConfig, TrainReport, TrainingScene,
};

use crate::error::{Error, Result};
use crate::geom::Point3;

/// Value of a field at one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub sdf: f64,
    /// Near-surface classifier logit; `None` for fields without a classifier.
    pub mask_logit: Option<f64>,
}

impl FieldValue {
    pub fn sdf(sdf: f64) -> Self {
        FieldValue {
            sdf,
            mask_logit: None,
        }
    }
}

pub trait DistanceField: Sync {
    fn evaluate(&self, q: Point3) -> Result<FieldValue>;

    fn sdf(&self, q: Point3) -> Result<f64> {
        self.evaluate(q).map(|v| v.sdf)
    }
}

impl<F: DistanceField + ?Sized> DistanceField for &F {
    fn evaluate(&self, q: Point3) -> Result<FieldValue> {
        (**self).evaluate(q)
    }
}

/// Adapts a closure returning the signed distance.
pub struct FnField<F>(pub F);

impl<F: Fn(Point3) -> f64 + Sync> DistanceField for FnField<F> {
    fn evaluate(&self, q: Point3) -> Result<FieldValue> {
        Ok(FieldValue::sdf((self.0)(q)))
    }
}

/// Analytic sphere, handy as an exact oracle.
#[derive(Debug, Clone, Copy)]
pub struct SphereSdf {
    pub center: Point3,
    pub radius: f64,
}

impl DistanceField for SphereSdf {
    fn evaluate(&self, q: Point3) -> Result<FieldValue> {
        Ok(FieldValue::sdf(
            crate::geom::dist(q, self.center) - self.radius,
        ))
    }
}

/// The seven evaluation points of the central-difference stencil: the
/// center, then `+h` and `-h` along x, y, z.
pub fn stencil(q: Point3, h: f64) -> [Point3; 7] {
    let mut out = [q; 7];
    for a in 0..3 {
        out[1 + 2 * a][a] += h;
        out[2 + 2 * a][a] -= h;
    }
    out
}

/// Central-difference gradient `(f(q + h e_i) - f(q - h e_i)) / 2h`.
pub fn field_gradient<F: DistanceField + ?Sized>(field: &F, q: Point3, h: f64) -> Result<Point3> {
    if !(h > 0.0) {
        return Err(Error::InvalidParams("finite-difference step must be positive".into()));
    }
    let mut g = [0.0; 3];
    for (a, ga) in g.iter_mut().enumerate() {
        let mut plus = q;
        let mut minus = q;
        plus[a] += h;
        minus[a] -= h;
        *ga = (field.sdf(plus)? - field.sdf(minus)?) / (2.0 * h);
    }
    Ok(g)
}

/// Second-order central-difference Laplacian.
pub fn field_laplacian<F: DistanceField + ?Sized>(field: &F, q: Point3, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParams("finite-difference step must be positive".into()));
    }
    let center = field.sdf(q)?;
    let mut sum = 0.0;
    for a in 0..3 {
        let mut plus = q;
        let mut minus = q;
        plus[a] += h;
        minus[a] -= h;
        sum += field.sdf(plus)? - 2.0 * center + field.sdf(minus)?;
    }
    Ok(sum / (h * h))
}
