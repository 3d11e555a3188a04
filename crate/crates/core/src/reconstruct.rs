//! End-to-end cloud to mesh reconstruction.

use serde::{Deserialize, Serialize};

use crate::curves::{CurveKind, CurveParams, MAX_BITS};
use crate::error::{Error, Result};
use crate::field::{DecoderParams, ImlsField, NeuralField, QueryPolicy};
use crate::geom::{self, Aabb, Point3};
use crate::mesher::{extract_mesh, ExtractionConfig, Mesh};
use crate::pyramid::{estimate_local_geometry, FeaturePyramid, PointCloud};
use crate::spatial::{KdTree, NeighborQueryConfig, SerializedIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalSource {
    /// Use the normals stored in the cloud.
    Given,
    /// Fit planes to `normal_k` nearest neighbors and orient them.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImlsConfig {
    pub curve: CurveKind,
    pub grid_size: f64,
    pub query: NeighborQueryConfig,
    pub normals: NormalSource,
    pub normal_k: usize,
    /// Extraction cell edge in meters.
    pub cell: f64,
    /// Padding around the cloud's bounding box for extraction.
    pub margin: f64,
}

impl Default for ImlsConfig {
    fn default() -> Self {
        ImlsConfig {
            curve: CurveKind::Hilbert,
            grid_size: 0.01,
            query: NeighborQueryConfig {
                k: 8,
                window: 16,
                r_max: 0.1,
            },
            normals: NormalSource::Estimated,
            normal_k: 8,
            cell: 0.02,
            margin: 0.05,
        }
    }
}

/// Returns the cloud with normals attached according to `cfg.normals`.
pub fn oriented_cloud(cloud: &PointCloud, cfg: &ImlsConfig) -> Result<PointCloud> {
    match cfg.normals {
        NormalSource::Given => {
            if cloud.normals.is_none() {
                return Err(Error::InvalidParams("cloud has no normals".into()));
            }
            Ok(PointCloud::with_normals(
                cloud.positions.clone(),
                cloud.normals.clone().unwrap(),
            ))
        }
        NormalSource::Estimated => {
            let geo = estimate_local_geometry(&PointCloud::new(cloud.positions.clone()), cfg.normal_k)?;
            Ok(PointCloud::with_normals(geo.cloud.positions, geo.cloud.normals.unwrap()))
        }
    }
}

/// Curve grid anchored one cell below the cloud so nearby queries need no
/// clamping.
fn curve_params(positions: &[Point3], grid_size: f64) -> Result<CurveParams> {
    let mut params = CurveParams::for_points(positions, grid_size, MAX_BITS)?;
    params.origin = geom::sub(params.origin, [grid_size; 3]);
    Ok(params)
}

/// IMLS field over an already oriented cloud.
pub fn imls_field(oriented: PointCloud, cfg: &ImlsConfig) -> Result<ImlsField> {
    let params = curve_params(&oriented.positions, cfg.grid_size)?;
    let index = SerializedIndex::build(&oriented.positions, params, cfg.curve)?;
    ImlsField::new(oriented, index, cfg.query)
}

fn padded_bounds(points: &[Point3], margin: f64) -> Result<Aabb> {
    Ok(Aabb::from_points(points).ok_or(Error::EmptyCloud)?.expanded(margin))
}

pub fn reconstruct_imls(cloud: &PointCloud, cfg: &ImlsConfig) -> Result<Mesh> {
    let oriented = oriented_cloud(cloud, cfg)?;
    let bounds = padded_bounds(&oriented.positions, cfg.margin)?;
    let field = imls_field(oriented, cfg)?;
    extract_mesh(&field, &ExtractionConfig::new(bounds, cfg.cell)?)
}

/// Splits the curve order of the whole cloud into `segments` contiguous code
/// ranges, reconstructs each from its own points only and concatenates the
/// pieces. Each piece is extracted over its padded bounding box snapped to
/// the global grid, so neighboring pieces sample identical corners, and is
/// cropped to the triangles whose nearest input point lies in the segment.
pub fn reconstruct_segmented(cloud: &PointCloud, cfg: &ImlsConfig, segments: usize) -> Result<Mesh> {
    if segments == 0 {
        return Err(Error::InvalidParams("need at least one segment".into()));
    }
    let oriented = oriented_cloud(cloud, cfg)?;
    let global = padded_bounds(&oriented.positions, cfg.margin)?;
    let params = curve_params(&oriented.positions, cfg.grid_size)?;
    let index = SerializedIndex::build(&oriented.positions, params, cfg.curve)?;
    let parts = index.partition_segments(segments);
    let mut owner = vec![0usize; oriented.len()];
    for (s, members) in parts.iter().enumerate() {
        for &i in members {
            owner[i] = s;
        }
    }
    let tree = KdTree::build(&oriented.positions);
    let mut mesh = Mesh::default();
    for (s, members) in parts.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let part = oriented.select(members);
        let local = padded_bounds(&part.positions, cfg.margin)?;
        let snap = |v: f64, o: f64, up: bool| {
            let t = (v - o) / cfg.cell;
            o + cfg.cell * if up { t.ceil() } else { t.floor() }
        };
        let bounds = Aabb {
            min: [0, 1, 2].map(|a| snap(local.min[a], global.min[a], false).max(global.min[a])),
            max: [0, 1, 2].map(|a| snap(local.max[a], global.min[a], true).min(global.max[a])),
        };
        let field = imls_field(part, cfg)?;
        let mut piece = extract_mesh(&field, &ExtractionConfig::new(bounds, cfg.cell)?)?;
        if parts.len() > 1 {
            // Each piece keeps only the triangles nearest its own points,
            // which trims the sheets it extrapolates past the segment edge.
            let centroids: Vec<Point3> = (0..piece.triangles.len())
                .map(|t| {
                    let c = piece.corners(t);
                    geom::scale(geom::add(geom::add(c[0], c[1]), c[2]), 1.0 / 3.0)
                })
                .collect();
            piece.retain_triangles(|t| tree.nearest(centroids[t]).is_some_and(|(i, _)| owner[i] == s));
        }
        mesh.append(&piece);
    }
    Ok(mesh)
}

/// Mesh of a trained decoder's zero level set over the pyramid's base cloud.
pub fn reconstruct_neural(
    pyramid: &FeaturePyramid,
    params: &DecoderParams,
    policy: QueryPolicy,
    sdf_scale: f64,
    cell: f64,
    margin: f64,
    mask_gate: bool,
) -> Result<Mesh> {
    let field = NeuralField::new(pyramid, params, policy, sdf_scale)?;
    let bounds = padded_bounds(&pyramid.base().positions, margin)?;
    let cfg = ExtractionConfig {
        mask_gate,
        ..ExtractionConfig::new(bounds, cell)?
    };
    extract_mesh(&field, &cfg)
}
