//! Space-filling-curve codecs over a quantized 3D grid.
//!
//! A point is quantized to an integer cell `floor((p - origin) / g)` and the
//! cell is mapped to a single integer by either a Morton (Z-order) bit
//! interleave or a Hilbert curve. Both codecs are bijections between the
//! `2^bits` cube and `0..2^(3 * bits)`.
//!
//! The Hilbert curve follows Skilling's transpose formulation: index 0 is
//! the origin cell, the base pattern is the 3-bit reflected Gray code, and
//! consecutive indices always decode to face-adjacent cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point3;

/// Largest per-axis bit depth whose codes still fit in 63 bits.
pub const MAX_BITS: u32 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Hilbert,
    Morton,
}

impl CurveKind {
    pub const ALL: [CurveKind; 2] = [CurveKind::Hilbert, CurveKind::Morton];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Hilbert => "hilbert",
            CurveKind::Morton => "morton",
        }
    }

    #[inline]
    pub fn encode(self, c: GridCoord, bits: u32) -> u64 {
        match self {
            CurveKind::Hilbert => hilbert_encode(c, bits).value,
            CurveKind::Morton => morton_encode(c, bits).value,
        }
    }

    pub fn decode(self, code: u64, bits: u32) -> Result<GridCoord> {
        let code = CurveCode { value: code, kind: self };
        match self {
            CurveKind::Hilbert => hilbert_decode(code, bits),
            CurveKind::Morton => morton_decode(code, bits),
        }
    }
}

impl std::str::FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hilbert" => Ok(CurveKind::Hilbert),
            "morton" | "z-order" | "zorder" | "z" => Ok(CurveKind::Morton),
            other => Err(Error::InvalidParams(format!("unknown curve kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for CurveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Integer cell coordinates; each component is below `2^bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GridCoord {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl GridCoord {
    pub const fn new(x: u32, y: u32, z: u32) -> Self {
        GridCoord { x, y, z }
    }

    pub fn fits(&self, bits: u32) -> bool {
        let limit = 1u64 << bits;
        (self.x as u64) < limit && (self.y as u64) < limit && (self.z as u64) < limit
    }

    pub fn l1_distance(&self, other: &GridCoord) -> u64 {
        (self.x as i64 - other.x as i64).unsigned_abs()
            + (self.y as i64 - other.y as i64).unsigned_abs()
            + (self.z as i64 - other.z as i64).unsigned_abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CurveCode {
    pub value: u64,
    pub kind: CurveKind,
}

/// Quantization grid shared by every level of a pyramid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    /// Cell edge in meters.
    pub grid_size: f64,
    /// Per-axis bit depth.
    pub bits: u32,
    /// World position of cell (0, 0, 0)'s minimum corner.
    pub origin: Point3,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            grid_size: 0.01,
            bits: MAX_BITS,
            origin: [0.0; 3],
        }
    }
}

impl CurveParams {
    pub fn new(grid_size: f64, bits: u32, origin: Point3) -> Result<Self> {
        let params = CurveParams {
            grid_size,
            bits,
            origin,
        };
        params.validate()?;
        Ok(params)
    }

    /// Grid anchored at the axis-aligned minimum corner of `points`.
    pub fn for_points(points: &[Point3], grid_size: f64, bits: u32) -> Result<Self> {
        let bb = crate::geom::Aabb::from_points(points).ok_or(Error::EmptyCloud)?;
        Self::new(grid_size, bits, bb.min)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_size > 0.0 && self.grid_size.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "grid size must be positive, got {}",
                self.grid_size
            )));
        }
        if self.bits == 0 || self.bits > MAX_BITS {
            return Err(Error::InvalidParams(format!(
                "bits must be in 1..={MAX_BITS}, got {}",
                self.bits
            )));
        }
        if !crate::geom::is_finite(self.origin) {
            return Err(Error::InvalidParams("origin must be finite".into()));
        }
        Ok(())
    }

    /// Number of cells per axis.
    pub fn cells_per_axis(&self) -> u64 {
        1u64 << self.bits
    }
}

/// Componentwise `floor((p - origin) / g)`.
pub fn quantize(p: Point3, params: &CurveParams) -> Result<GridCoord> {
    let limit = params.cells_per_axis() as f64;
    let mut out = [0u32; 3];
    for a in 0..3 {
        let t = ((p[a] - params.origin[a]) / params.grid_size).floor();
        if !(t >= 0.0 && t < limit) {
            return Err(Error::OutOfRange {
                index: None,
                bits: params.bits,
                detail: format!("axis {a} cell {t} for coordinate {}", p[a]),
            });
        }
        out[a] = t as u32;
    }
    Ok(GridCoord::new(out[0], out[1], out[2]))
}

/// Like [`quantize`] but clamps each axis into the grid cube instead of
/// failing. Used for query points, which may fall outside the indexed cloud.
pub fn quantize_clamped(p: Point3, params: &CurveParams) -> GridCoord {
    let max = (params.cells_per_axis() - 1) as f64;
    let mut out = [0u32; 3];
    for a in 0..3 {
        let t = ((p[a] - params.origin[a]) / params.grid_size).floor();
        // NaN maps to 0.
        out[a] = if t > 0.0 { t.min(max) as u32 } else { 0 };
    }
    GridCoord::new(out[0], out[1], out[2])
}

#[inline]
fn spread_bits(v: u32) -> u64 {
    let mut x = v as u64 & 0x1f_ffff;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact_bits(code: u64) -> u32 {
    let mut x = code & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x | (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x as u32
}

#[inline]
fn interleave(x: u32, y: u32, z: u32) -> u64 {
    spread_bits(x) | (spread_bits(y) << 1) | (spread_bits(z) << 2)
}

/// Z-order code: bit `i` of x lands at output bit `3i`, y at `3i + 1`,
/// z at `3i + 2`.
///
/// `c` must fit in `bits`; higher bits are not checked in release builds.
#[inline]
pub fn morton_encode(c: GridCoord, bits: u32) -> CurveCode {
    debug_assert!(c.fits(bits), "{c:?} does not fit in {bits} bits");
    CurveCode {
        value: interleave(c.x, c.y, c.z),
        kind: CurveKind::Morton,
    }
}

pub fn morton_decode(code: CurveCode, bits: u32) -> Result<GridCoord> {
    check_code(code.value, bits)?;
    let v = code.value;
    Ok(GridCoord::new(
        compact_bits(v),
        compact_bits(v >> 1),
        compact_bits(v >> 2),
    ))
}

fn check_code(value: u64, bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS || value >> (3 * bits) != 0 {
        return Err(Error::OutOfRange {
            index: None,
            bits,
            detail: format!("code {value} exceeds 2^{}", 3 * bits),
        });
    }
    Ok(())
}

/// Hilbert index of a cell.
#[inline]
pub fn hilbert_encode(c: GridCoord, bits: u32) -> CurveCode {
    debug_assert!(c.fits(bits), "{c:?} does not fit in {bits} bits");
    let mut x = [c.x, c.y, c.z];
    axes_to_transpose(&mut x, bits);
    // The transposed form holds the index bits column-wise, most significant
    // axis first; interleaving reverses the axis order relative to Morton.
    CurveCode {
        value: interleave(x[2], x[1], x[0]),
        kind: CurveKind::Hilbert,
    }
}

pub fn hilbert_decode(code: CurveCode, bits: u32) -> Result<GridCoord> {
    check_code(code.value, bits)?;
    let v = code.value;
    let mut x = [compact_bits(v >> 2), compact_bits(v >> 1), compact_bits(v)];
    transpose_to_axes(&mut x, bits);
    Ok(GridCoord::new(x[0], x[1], x[2]))
}

fn axes_to_transpose(x: &mut [u32; 3], bits: u32) {
    let m = 1u32 << (bits - 1);
    // Inverse undo.
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    // Gray encode.
    x[1] ^= x[0];
    x[2] ^= x[1];
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in x.iter_mut() {
        *v ^= t;
    }
}

fn transpose_to_axes(x: &mut [u32; 3], bits: u32) {
    let n = 2u32 << (bits - 1);
    // Gray decode.
    let t = x[2] >> 1;
    x[2] ^= x[1];
    x[1] ^= x[0];
    x[0] ^= t;
    // Undo excess work.
    let mut q = 2u32;
    while q != n {
        let p = q - 1;
        for i in (0..3).rev() {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q <<= 1;
    }
}

/// Curve code for every point, in input order.
pub fn serialize_points(
    points: &[Point3],
    params: &CurveParams,
    kind: CurveKind,
) -> Result<Vec<CurveCode>> {
    params.validate()?;
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let c = quantize(p, params).map_err(|e| match e {
                Error::OutOfRange { bits, detail, .. } => Error::OutOfRange {
                    index: Some(i),
                    bits,
                    detail,
                },
                other => other,
            })?;
            Ok(CurveCode {
                value: kind.encode(c, params.bits),
                kind,
            })
        })
        .collect()
}
