//! Binary cache of a solved surface.
//!
//! Layout, all little-endian: magic `SCL1`; `nt` and `ny` as u64; `T`,
//! `band_lo`, `band_hi` as f64; one byte, 1 for the envelope terminal mode;
//! then `V` and the stencil residual as `nt * ny` f64 each in row-major
//! `(time, space)` order; then `nt * ny` region codes (0 lower contact,
//! 1 continuation, 2 upper contact).

use super::{Region, SolverParams, ValueSurface};
use crate::grid::Grid;
use crate::model::{ProblemSpec, TerminalMode};
use crate::scalar::Real;
use std::io::{self, Read, Write};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"SCL1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a surface cache (bad magic)")]
    Magic,
    #[error("corrupt cache: {0}")]
    Corrupt(String),
    #[error("cache does not match the problem: {0}")]
    Mismatch(String),
}

/// Decoded cache contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Cache {
    pub nt: usize,
    pub ny: usize,
    pub horizon: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub mode: TerminalMode,
    pub v: Vec<f64>,
    pub residual: Vec<f64>,
    pub region: Vec<Region>,
}

pub fn write_cache<T: Real, W: Write>(surface: &ValueSurface<T>, mut w: W) -> io::Result<()> {
    let g = &surface.grid;
    w.write_all(MAGIC)?;
    w.write_all(&(g.nt as u64).to_le_bytes())?;
    w.write_all(&(g.ny as u64).to_le_bytes())?;
    for x in [g.horizon, g.band_lo, g.band_hi] {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&[u8::from(surface.mode == TerminalMode::Envelope)])?;
    let mut buf = Vec::with_capacity(8 * surface.v.len());
    for x in surface.v.iter().chain(&surface.residual) {
        buf.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
    }
    w.write_all(&buf)?;
    let codes: Vec<u8> = surface.region.iter().map(|r| r.code()).collect();
    w.write_all(&codes)?;
    w.flush()
}

fn read_u64(r: &mut impl Read) -> Result<u64, CacheError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, CacheError> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_cache<R: Read>(mut r: R) -> Result<Cache, CacheError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CacheError::Magic);
    }
    let nt = read_u64(&mut r)? as usize;
    let ny = read_u64(&mut r)? as usize;
    let n = nt
        .checked_mul(ny)
        .filter(|&n| n > 0 && n < (1 << 32))
        .ok_or_else(|| CacheError::Corrupt(format!("grid {nt} x {ny}")))?;
    let horizon = read_f64(&mut r)?;
    let band_lo = read_f64(&mut r)?;
    let band_hi = read_f64(&mut r)?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let mode = match flag[0] {
        0 => TerminalMode::Given,
        1 => TerminalMode::Envelope,
        f => return Err(CacheError::Corrupt(format!("terminal flag {f}"))),
    };
    let mut bytes = vec![0u8; 16 * n];
    r.read_exact(&mut bytes)?;
    let mut floats = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let v: Vec<f64> = floats.by_ref().take(n).collect();
    let residual: Vec<f64> = floats.collect();
    let mut codes = vec![0u8; n];
    r.read_exact(&mut codes)?;
    let region = codes
        .iter()
        .map(|&c| Region::from_code(c).ok_or_else(|| CacheError::Corrupt(format!("region code {c}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(CacheError::Corrupt(format!("{} trailing bytes", rest.len())));
    }
    Ok(Cache {
        nt,
        ny,
        horizon,
        band_lo,
        band_hi,
        mode,
        v,
        residual,
        region,
    })
}

impl Cache {
    /// Rebuilds a surface; the obstacles are re-sampled from `spec`, which
    /// must describe the same horizon and band.
    pub fn into_surface(self, spec: &ProblemSpec, params: SolverParams) -> Result<ValueSurface<f64>, CacheError> {
        let grid = Grid::new(self.horizon, self.band_lo, self.band_hi, self.nt, self.ny)
            .map_err(|e| CacheError::Corrupt(e.to_string()))?;
        if spec.horizon != self.horizon || spec.band_lo != self.band_lo || spec.band_hi != self.band_hi {
            return Err(CacheError::Mismatch(format!(
                "cache has T = {}, band [{}, {}]; problem has T = {}, band [{}, {}]",
                self.horizon, self.band_lo, self.band_hi, spec.horizon, spec.band_lo, spec.band_hi
            )));
        }
        let s = spec
            .sample(&grid)
            .map_err(|e| CacheError::Mismatch(e.to_string()))?;
        let sweeps = vec![0; self.nt];
        Ok(ValueSurface {
            grid,
            mode: self.mode,
            params,
            v: self.v,
            lower: s.f1.iter().map(|v| -v).collect(),
            upper: s.f2,
            region: self.region,
            residual: self.residual,
            sweeps,
        })
    }
}
