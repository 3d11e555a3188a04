//! Inverse-distance aggregation over a neighborhood, and the training-free
//! IMLS decoder built on the same weights.

use crate::error::{Error, Result};
use crate::field::{DistanceField, FieldValue};
use crate::geom::{self, Point3};
use crate::pyramid::PointCloud;
use crate::spatial::{NeighborQueryConfig, NeighborSet, SerializedIndex};

/// Added to the weight sum in the normalizer.
pub const AGGREGATE_EPS: f64 = 1e-8;
/// Distances are clamped to at least this before inversion.
pub const WEIGHT_EPS: f64 = 1e-8;

#[inline]
pub(crate) fn inverse_distance_weight(d: f64) -> f64 {
    1.0 / d.max(WEIGHT_EPS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub value: Vec<f64>,
    /// Set when the neighborhood was empty; `value` is then all zeros.
    pub empty: bool,
}

/// `sum_p w(p, q) * E(p - q, f_p) / (eps + sum_p w(p, q))` with
/// `w = 1 / max(|p - q|, eps_w)`.
///
/// `encoder(offset, feature, out)` writes a `width`-vector into `out`.
pub fn aggregate_level<E>(
    q: Point3,
    cloud: &PointCloud,
    neighbors: &NeighborSet,
    width: usize,
    mut encoder: E,
) -> Aggregate
where
    E: FnMut(Point3, &[f64], &mut [f64]),
{
    let mut value = vec![0.0; width];
    if neighbors.is_empty() {
        return Aggregate { value, empty: true };
    }
    let mut enc = vec![0.0; width];
    let mut wsum = 0.0;
    for &(i, d) in &neighbors.entries {
        let w = inverse_distance_weight(d);
        let feature = cloud.features.as_ref().map_or(&[][..], |f| f.row(i));
        encoder(geom::sub(cloud.positions[i], q), feature, &mut enc);
        for (v, e) in value.iter_mut().zip(&enc) {
            *v += w * e;
        }
        wsum += w;
    }
    let norm = 1.0 / (AGGREGATE_EPS + wsum);
    for v in &mut value {
        *v *= norm;
    }
    Aggregate { value, empty: false }
}

/// Weighted average of point-plane distances `n_p . (q - p)`.
pub fn imls_distance(q: Point3, cloud: &PointCloud, neighbors: &NeighborSet) -> Result<f64> {
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("IMLS needs oriented normals".into()))?;
    if neighbors.is_empty() {
        return Err(Error::NoSupport);
    }
    let mut num = 0.0;
    let mut wsum = 0.0;
    for &(i, d) in &neighbors.entries {
        let w = inverse_distance_weight(d);
        num += w * geom::dot(normals[i], geom::sub(q, cloud.positions[i]));
        wsum += w;
    }
    Ok(num / (AGGREGATE_EPS + wsum))
}

/// IMLS surface over an oriented cloud, with approximate serialized
/// neighborhoods.
#[derive(Debug, Clone)]
pub struct ImlsField {
    cloud: PointCloud,
    index: SerializedIndex,
    query: NeighborQueryConfig,
}

impl ImlsField {
    pub fn new(cloud: PointCloud, index: SerializedIndex, query: NeighborQueryConfig) -> Result<Self> {
        if cloud.normals.is_none() {
            return Err(Error::InvalidParams("IMLS needs oriented normals".into()));
        }
        if index.len() != cloud.len() {
            return Err(Error::InvalidParams("index does not match cloud".into()));
        }
        query.validate()?;
        Ok(ImlsField {
            cloud,
            index,
            query,
        })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn index(&self) -> &SerializedIndex {
        &self.index
    }
}

impl DistanceField for ImlsField {
    fn evaluate(&self, q: Point3) -> Result<FieldValue> {
        let nb = self.index.approx_neighbors(q, &self.query);
        imls_distance(q, &self.cloud, &nb).map(FieldValue::sdf)
    }
}
