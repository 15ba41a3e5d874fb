//! Finite-horizon Gittins indices for Bernoulli arms with `Beta(1, 1)` priors.
//!
//! The index of a posterior `Beta(a, b)` with `r` rounds remaining is the
//! per-round retirement reward `lambda` at which pulling the arm once more
//! and retiring immediately are equally good. For a fixed `lambda`, the value
//! of continuing is a backward recursion over the `(a, b)` lattice reachable
//! in `r` rounds; `lambda` is then found by bisection.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-6;
const MAGIC: u32 = 0x4754_4958;

/// Value of playing an arm in state `(a, b)` for `r` rounds with the option
/// to retire at `lambda` per remaining round, when the first pull is forced.
/// `buf` is scratch space of length at least `r + 1`.
fn continue_value(a: usize, b: usize, r: usize, lambda: f64, buf: &mut Vec<f64>) -> f64 {
    // buf[i] holds V(a + i, b + depth - i) for the current depth; at depth r
    // no rounds remain and every value is 0.
    buf.clear();
    buf.resize(r + 1, 0.0);
    for depth in (0..r).rev() {
        let rem = (r - depth) as f64;
        let retire = lambda * rem;
        for i in 0..=depth {
            let (aa, bb) = ((a + i) as f64, (b + depth - i) as f64);
            let p = aa / (aa + bb);
            let play = p * (1.0 + buf[i + 1]) + (1.0 - p) * buf[i];
            buf[i] = if depth == 0 { play } else { play.max(retire) };
        }
    }
    buf[0]
}

/// Gittins index of `Beta(a, b)` with `remaining` rounds left.
pub fn gittins_index(a: usize, b: usize, remaining: usize) -> f64 {
    let mut buf = Vec::new();
    index_with_buffer(a, b, remaining, &mut buf)
}

fn index_with_buffer(a: usize, b: usize, remaining: usize, buf: &mut Vec<f64>) -> f64 {
    assert!(a >= 1 && b >= 1, "beta parameters start at 1");
    let mean = a as f64 / (a + b) as f64;
    if remaining <= 1 {
        return mean;
    }
    let r = remaining as f64;
    let (mut lo, mut hi) = (mean, 1.0);
    while hi - lo > TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if continue_value(a, b, remaining, mid, buf) > mid * r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All indices `(a, b, r)` with `a + b - 2 + r <= n`, stored densely as an
/// `n x n x n` array in row-major `(a - 1, b - 1, r - 1)` order. Cells off the
/// lattice hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct GittinsTable {
    n: usize,
    values: Vec<f64>,
}

impl GittinsTable {
    pub fn build(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("Gittins horizon must be at least 1".into()));
        }
        let cells: Vec<(usize, usize, usize)> = (1..=n)
            .flat_map(|a| (1..=n + 1 - a).flat_map(move |b| (1..=n + 2 - a - b).map(move |r| (a, b, r))))
            .collect();
        let indices: Vec<f64> = cells
            .par_iter()
            .map_init(Vec::new, |buf, &(a, b, r)| index_with_buffer(a, b, r, buf))
            .collect();
        let mut values = vec![f64::NAN; n * n * n];
        for (&(a, b, r), v) in cells.iter().zip(indices) {
            values[((a - 1) * n + (b - 1)) * n + (r - 1)] = v;
        }
        Ok(Self { n, values })
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    /// Number of lattice cells with a stored index.
    pub fn lattice_size(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    /// Index of `Beta(a, b)` with `remaining` rounds left; the posterior mean
    /// when no rounds remain.
    pub fn index(&self, a: usize, b: usize, remaining: usize) -> f64 {
        if remaining == 0 {
            return a as f64 / (a + b) as f64;
        }
        assert!(a + b - 2 + remaining <= self.n, "state ({a}, {b}, {remaining}) outside the lattice");
        self.values[((a - 1) * self.n + (b - 1)) * self.n + (remaining - 1)]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(&MAGIC.to_le_bytes())?;
        out.write_all(&(self.n as u32).to_le_bytes())?;
        out.write_all(&TOLERANCE.to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let mut header = [0u8; 16];
        input.read_exact(&mut header)?;
        let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
        let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let tol = f64::from_le_bytes(header[8..16].try_into().unwrap());
        if magic != MAGIC || tol != TOLERANCE || n == 0 {
            return Err(Error::Input(format!("{}: not a Gittins cache for tolerance {TOLERANCE}", path.display())));
        }
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n * n * n {
            return Err(Error::Input(format!("{}: truncated Gittins cache", path.display())));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { n, values })
    }

    /// Load a cache covering `horizon` or build one and write it to `path`.
    pub fn load_or_build(path: &Path, horizon: usize) -> Result<Self> {
        if path.exists() {
            if let Ok(table) = Self::load(path) {
                if table.n >= horizon {
                    return Ok(table);
                }
            }
        }
        let table = Self::build(horizon)?;
        table.save(path)?;
        Ok(table)
    }
}
