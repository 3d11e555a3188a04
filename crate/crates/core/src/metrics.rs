//! Reconstruction metrics and the neighborhood recall benchmark.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{CurveKind, CurveParams};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::pyramid::{FeaturePyramid, PointCloud, PyramidConfig};
use crate::spatial::{KdTree, NeighborQueryConfig};

/// Chamfer-L1 terms, all in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChamferReport {
    /// Mean of `accuracy` and `completeness`.
    pub cd: f64,
    /// Mean distance from each ground-truth point to the prediction.
    pub completeness: f64,
    /// Mean distance from each predicted point to the ground truth.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Distance from every point of `from` to its nearest point of `to`, in
/// the order of `from`.
pub fn nearest_distances(from: &[Point3], to: &[Point3]) -> Result<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptySet);
    }
    let tree = KdTree::build(to);
    Ok(from
        .par_iter()
        .map(|&p| tree.nearest(p).expect("non-empty tree").1)
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn chamfer_l1(pred: &[Point3], gt: &[Point3]) -> Result<ChamferReport> {
    let accuracy = mean(&nearest_distances(pred, gt)?);
    let completeness = mean(&nearest_distances(gt, pred)?);
    Ok(ChamferReport {
        cd: 0.5 * (accuracy + completeness),
        completeness,
        accuracy,
    })
}

/// Precision and recall of matches within `delta` (inclusive).
pub fn fscore_detail(pred: &[Point3], gt: &[Point3], delta: f64) -> Result<FScore> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParams("F-score threshold must be positive".into()));
    }
    let within = |d: &Vec<f64>| d.iter().filter(|&&x| x <= delta).count() as f64 / d.len() as f64;
    let precision = within(&nearest_distances(pred, gt)?);
    let recall = within(&nearest_distances(gt, pred)?);
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FScore {
        precision,
        recall,
        f,
    })
}

pub fn fscore(pred: &[Point3], gt: &[Point3], delta: f64) -> Result<f64> {
    fscore_detail(pred, gt, delta).map(|s| s.f)
}

/// Settings for [`recall_benchmark`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallConfig {
    pub k: usize,
    /// Half-width of the serialized search at every level, in sorted
    /// positions.
    pub window: usize,
    /// Distance cutoff at level `s` is this times the level's pool size.
    pub r_max_factor: f64,
}

impl Default for RecallConfig {
    fn default() -> Self {
        RecallConfig {
            k: 8,
            window: 16,
            r_max_factor: 8.0,
        }
    }
}

/// `rows[m][c]` is the mean recall of curve `curves[c]` when levels `0..=m`
/// contribute neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallTable {
    pub curves: Vec<CurveKind>,
    pub rows: Vec<Vec<f64>>,
    pub k: usize,
    pub window: usize,
}

impl RecallTable {
    pub fn get(&self, extra_scales: usize, kind: CurveKind) -> Option<f64> {
        let c = self.curves.iter().position(|&k| k == kind)?;
        self.rows.get(extra_scales).map(|r| r[c])
    }
}

/// Per query and per scale count, the level-0 point indices retrieved by
/// the serialized neighborhoods of levels `0..=m`. A pooled point stands
/// for every level-0 point it absorbed.
pub fn multiscale_neighborhoods(
    pyramid: &FeaturePyramid,
    q: Point3,
    cfg: &RecallConfig,
    members: &[Vec<Vec<u32>>],
) -> Vec<HashSet<usize>> {
    let mut acc = HashSet::new();
    let mut out = Vec::with_capacity(pyramid.num_levels());
    for (s, level) in pyramid.levels().iter().enumerate() {
        let qcfg = NeighborQueryConfig {
            k: cfg.k,
            window: cfg.window,
            r_max: cfg.r_max_factor * level.pool_size,
        };
        for i in level.index.approx_neighbors(q, &qcfg).indices() {
            acc.extend(members[s][i].iter().map(|&m| m as usize));
        }
        out.push(acc.clone());
    }
    out
}

/// Level-0 members of every pooled point, per level.
pub fn level_members(pyramid: &FeaturePyramid) -> Vec<Vec<Vec<u32>>> {
    pyramid
        .levels()
        .iter()
        .map(|level| {
            let mut m = vec![Vec::new(); level.cloud.len()];
            for (p, &a) in level.assignment.iter().enumerate() {
                m[a as usize].push(p as u32);
            }
            m
        })
        .collect()
}

/// Recall of multi-scale serialized neighborhoods against exact level-0
/// k-nearest neighbors, for each curve kind and each number of extra scales.
pub fn recall_benchmark(
    cloud: &PointCloud,
    pyramid_cfg: &PyramidConfig,
    curve: CurveParams,
    curves: &[CurveKind],
    queries: &[Point3],
    cfg: &RecallConfig,
) -> Result<RecallTable> {
    if queries.is_empty() {
        return Err(Error::EmptySet);
    }
    NeighborQueryConfig::new(cfg.k, cfg.window, cfg.r_max_factor)?;
    let tree = KdTree::build(&cloud.positions);
    let truth: Vec<HashSet<usize>> = queries
        .par_iter()
        .map(|&q| tree.knn(q, cfg.k).indices().collect())
        .collect();
    let mut rows = vec![vec![0.0; curves.len()]; pyramid_cfg.levels];
    for (c, &kind) in curves.iter().enumerate() {
        let pyramid = FeaturePyramid::build(cloud, pyramid_cfg, curve, kind)?;
        let members = level_members(&pyramid);
        let per_query: Vec<Vec<f64>> = queries
            .par_iter()
            .zip(&truth)
            .map(|(&q, gt)| {
                multiscale_neighborhoods(&pyramid, q, cfg, &members)
                    .iter()
                    .map(|found| gt.intersection(found).count() as f64 / gt.len() as f64)
                    .collect()
            })
            .collect();
        for (m, row) in rows.iter_mut().enumerate() {
            row[c] = per_query.iter().map(|r| r[m]).sum::<f64>() / queries.len() as f64;
        }
    }
    Ok(RecallTable {
        curves: curves.to_vec(),
        rows,
        k: cfg.k,
        window: cfg.window,
    })
}
