//! Signed-distance reconstruction from raw point clouds using
//! space-filling-curve serialization for approximate neighborhoods.
//!
//! The pipeline: [`curves`] maps points to Hilbert or Morton codes,
//! [`spatial`] sorts them into a searchable index, [`pyramid`] builds a
//! multi-level pooled hierarchy with local geometry features, [`field`]
//! aggregates neighborhoods into a distance field (analytic or learned),
//! [`mesher`] extracts the zero level set, and [`metrics`] scores the result.
//! [`reconstruct`] wires these stages together, [`scene`] generates synthetic
//! test scenes, and [`io`] reads and writes clouds and meshes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod error;
pub mod field;
pub mod geom;
pub mod io;
pub mod mesher;
pub mod metrics;
pub mod pyramid;
pub mod reconstruct;
pub mod scene;
pub mod spatial;

pub use error::{Error, Result};
