//! Binary snapshot of a [`LowRankState`].
//!
//! Layout, all little-endian: `n`, `s`, `r` as `u64`, `t` as `f64`, then `U`
//! (n×r), `σ` (r), `Y` (s×r) as `f64`, matrices in row-major order.

use std::fs;
use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

use super::LowRankState;

const HEADER_BYTES: usize = 32;

pub fn encode(state: &LowRankState) -> Vec<u8> {
    let (n, s, r) = (state.nrows(), state.ncols(), state.rank());
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * (n * r + r + s * r));
    for v in [n as u64, s as u64, r as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&state.t().to_le_bytes());
    put_rows(&mut out, state.u());
    for v in state.sigma() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_rows(&mut out, state.y());
    out
}

fn put_rows(out: &mut Vec<u8>, m: &DenseMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<LowRankState> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Checkpoint(format!("truncated header ({} bytes)", bytes.len())));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().expect("8 bytes") };
    let dim = |k: usize| -> Result<usize> {
        usize::try_from(u64::from_le_bytes(word(k)))
            .map_err(|_| Error::Checkpoint("dimension overflows usize".into()))
    };
    let (n, s, r) = (dim(0)?, dim(1)?, dim(2)?);
    let t = f64::from_le_bytes(word(3));
    let count = n
        .checked_mul(r)
        .and_then(|a| s.checked_mul(r).and_then(|b| a.checked_add(b)))
        .and_then(|a| a.checked_add(r))
        .ok_or_else(|| Error::Checkpoint("dimensions overflow".into()))?;
    if bytes.len() != HEADER_BYTES + 8 * count {
        return Err(Error::Checkpoint(format!(
            "expected {} bytes for n={n}, s={s}, r={r}, found {}",
            HEADER_BYTES + 8 * count,
            bytes.len()
        )));
    }
    let mut values = bytes[HEADER_BYTES..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let u = DenseMatrix::from_row_iterator(n, r, values.by_ref().take(n * r));
    let sigma: Vec<f64> = values.by_ref().take(r).collect();
    let y = DenseMatrix::from_row_iterator(s, r, values.take(s * r));
    LowRankState::new(u, sigma, y, t)
}

pub fn write(path: &Path, state: &LowRankState) -> Result<()> {
    fs::write(path, encode(state)).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn read(path: &Path) -> Result<LowRankState> {
    let bytes = fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}
