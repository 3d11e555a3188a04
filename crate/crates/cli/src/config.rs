//! Run configuration, loaded from JSON and echoed into every manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serialsdf::curves::CurveKind;
use serialsdf::field::{QueryCounts, TrainConfig};
use serialsdf::pyramid::PyramidConfig;
use serialsdf::reconstruct::{ImlsConfig, NormalSource};
use serialsdf::spatial::NeighborQueryConfig;
use serialsdf::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Extraction {
    /// Cell edge in meters.
    pub cell: f64,
    /// Padding around the cloud's bounding box, in meters.
    pub margin: f64,
    pub mask_gate: bool,
}

impl Default for Extraction {
    fn default() -> Self {
        Extraction {
            cell: 0.02,
            margin: 0.05,
            mask_gate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub curve: CurveKind,
    /// Quantization cell of the curve grid, in meters.
    pub grid_size: f64,
    /// Neighborhood used by the IMLS decoder.
    pub query: NeighborQueryConfig,
    pub pyramid: PyramidConfig,
    /// `imls` or the path of a trained decoder weight file.
    pub decoder: String,
    pub normals: NormalSource,
    pub normal_k: usize,
    pub extraction: Extraction,
    pub train: TrainConfig,
    pub train_queries: QueryCounts,
    /// F-score threshold in meters.
    pub delta: f64,
    /// Points drawn from a mesh when it is scored.
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let imls = ImlsConfig::default();
        RunConfig {
            curve: CurveKind::Hilbert,
            grid_size: 0.01,
            query: imls.query,
            pyramid: PyramidConfig::default(),
            decoder: "imls".into(),
            normals: NormalSource::Estimated,
            normal_k: 8,
            extraction: Extraction::default(),
            train: TrainConfig::default(),
            train_queries: QueryCounts {
                near: 2000,
                uniform: 500,
            },
            delta: 0.01,
            eval_samples: 1_000_000,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("grid_size", self.grid_size)?;
        positive("pyramid.base_pool", self.pyramid.base_pool)?;
        positive("extraction.cell", self.extraction.cell)?;
        positive("delta", self.delta)?;
        if !(self.extraction.margin >= 0.0) {
            return Err(Error::InvalidParams("extraction.margin must be non-negative".into()));
        }
        if self.pyramid.levels == 0 {
            return Err(Error::InvalidParams("pyramid.levels must be at least 1".into()));
        }
        if self.eval_samples == 0 {
            return Err(Error::InvalidParams("eval_samples must be positive".into()));
        }
        self.query.validate()?;
        self.train.validate()?;
        if self.decoder != "imls" && !Path::new(&self.decoder).is_file() {
            return Err(Error::InvalidParams(format!("decoder file '{}' does not exist", self.decoder)));
        }
        Ok(())
    }

    pub fn imls(&self) -> ImlsConfig {
        ImlsConfig {
            curve: self.curve,
            grid_size: self.grid_size,
            query: self.query,
            normals: self.normals,
            normal_k: self.normal_k,
            cell: self.extraction.cell,
            margin: self.extraction.margin,
        }
    }
}
