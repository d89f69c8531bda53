//! Replicate ensembles `y = B⁻¹ e` with `e ~ N(0, I)`.
//!
//! One LU of `B` serves every replicate. Replicates are solved in fixed
//! blocks of [`SOLVE_BLOCK`] columns; block boundaries depend only on the
//! replicate index, so output bits do not depend on the thread count.

use faer::Mat;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridGeometry};
use crate::rng::stream_rng;
use crate::sar::{assemble_sar, ParamFields, SarSystem};

/// Replicates per right-hand-side block.
pub const SOLVE_BLOCK: usize = 32;

const RESIDUAL_TOL: f64 = 1e-8;

/// White-noise source: standard normal, unit variance, one ChaCha8 stream
/// per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
}

impl NoiseSpec {
    pub const VARIANCE: f64 = 1.0;

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Noise vector for replicate `m`.
    pub fn draw(&self, replicate: u64, n: usize) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, replicate);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

/// How a stored ensemble was normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Standardization {
    #[default]
    None,
    /// Per pixel across replicates.
    Pixelwise,
    /// Single replicate: spatial mean and sd of the one field.
    SpatialFallback,
}

/// `M` replicate fields sharing one grid, stored replicate-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsemble {
    replicates: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    pub seed: u64,
    pub standardization: Standardization,
}

impl FieldEnsemble {
    pub fn from_vec(
        replicates: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if replicates == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "ensemble must be non-empty, got {replicates}x{height}x{width}"
            )));
        }
        if data.len() != replicates * height * width {
            return Err(Error::Dimension(format!(
                "ensemble of {replicates}x{height}x{width} needs {} values, got {}",
                replicates * height * width,
                data.len()
            )));
        }
        Ok(Self {
            replicates,
            height,
            width,
            data,
            seed: 0,
            standardization: Standardization::None,
        })
    }

    pub fn from_fields(fields: &[Field]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::Dimension("ensemble needs at least one field".into()))?;
        let (h, w) = first.shape();
        let mut data = Vec::with_capacity(fields.len() * h * w);
        for (m, f) in fields.iter().enumerate() {
            f.check_shape(h, w, &format!("replicate {m}"))?;
            data.extend_from_slice(f.as_slice());
        }
        Self::from_vec(fields.len(), h, w, data)
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization != Standardization::None
    }

    pub fn replicate(&self, m: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[m * n..(m + 1) * n]
    }

    pub fn field(&self, m: usize) -> Field {
        Field::from_vec(self.height, self.width, self.replicate(m).to_vec()).expect("shape")
    }

    #[inline]
    pub fn value(&self, m: usize, i: usize, j: usize) -> f64 {
        self.data[(m * self.height + i) * self.width + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Values of pixel `r` across replicates.
    pub fn pixel_series(&self, r: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.pixels();
        (0..self.replicates).map(move |m| self.data[m * n + r])
    }

    /// Ensemble with replicates reordered (or subset) by `order`.
    pub fn select(&self, order: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(order.len() * self.pixels());
        for &m in order {
            if m >= self.replicates {
                return Err(Error::Dimension(format!("replicate {m} out of range")));
            }
            data.extend_from_slice(self.replicate(m));
        }
        let mut out = Self::from_vec(order.len(), self.height, self.width, data)?;
        out.seed = self.seed;
        out.standardization = self.standardization;
        Ok(out)
    }
}

fn residual_ratio(sys: &SarSystem, y: &[f64], e: &[f64]) -> Result<(f64, Vec<f64>)> {
    let by = sys.matrix().mul_vec(y)?;
    let r: Vec<f64> = e.iter().zip(&by).map(|(a, b)| a - b).collect();
    let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let emax = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((rmax / emax.max(1.0), r))
}

/// Solves one block of right-hand sides into `out` (replicate-major), then
/// applies one step of iterative refinement to any column whose backward
/// residual exceeds the bound.
fn solve_block(sys: &SarSystem, rhs: &[Vec<f64>], out: &mut [f64]) -> Result<()> {
    let lu = sys.factorization()?;
    let n = sys.len();
    debug_assert_eq!(out.len(), rhs.len() * n);
    for e in rhs {
        if e.len() != n {
            return Err(Error::Dimension(format!(
                "noise vector of length {} for {n} cells",
                e.len()
            )));
        }
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("noise vector is not finite".into()));
        }
    }
    let mut block = Mat::<f64>::from_fn(n, rhs.len(), |i, k| rhs[k][i]);
    lu.solve_in_place(block.as_mut());
    for (k, (y, e)) in out.chunks_mut(n).zip(rhs).enumerate() {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = block[(i, k)];
        }
        let (ratio, r) = residual_ratio(sys, y, e)?;
        if ratio >= RESIDUAL_TOL {
            let mut corr = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
            lu.solve_in_place(corr.as_mut());
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += corr[(i, 0)];
            }
            let (ratio, _) = residual_ratio(sys, y, e)?;
            if ratio.is_nan() || ratio >= RESIDUAL_TOL {
                return Err(Error::Factorization(format!(
                    "backward residual {ratio:.3e} exceeds {RESIDUAL_TOL:e} after refinement"
                )));
            }
        }
    }
    Ok(())
}

/// Solves `B y = e` with the system's cached factorization.
pub fn solve_sar(sys: &SarSystem, e: &[f64]) -> Result<Vec<f64>> {
    let mut y = vec![0.0; sys.len()];
    if e.len() != y.len() {
        return Err(Error::Dimension(format!(
            "noise vector of length {} for {} cells",
            e.len(),
            y.len()
        )));
    }
    solve_block(sys, std::slice::from_ref(&e.to_vec()), &mut y)?;
    Ok(y)
}

/// Draws `replicates` fields from an already assembled system.
pub fn simulate_with_system(
    sys: &SarSystem,
    replicates: usize,
    seed: u64,
) -> Result<FieldEnsemble> {
    if replicates == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replicate".into(),
        ));
    }
    let n = sys.len();
    let noise = NoiseSpec::new(seed);
    sys.factorization()?;
    let mut data = vec![0.0; replicates * n];
    data.par_chunks_mut(SOLVE_BLOCK * n)
        .enumerate()
        .try_for_each(|(b, out)| {
            let start = b * SOLVE_BLOCK;
            let end = start + out.len() / n;
            let rhs: Vec<Vec<f64>> = (start..end).map(|m| noise.draw(m as u64, n)).collect();
            solve_block(sys, &rhs, out)
        })?;
    let g = sys.geometry();
    let mut ens = FieldEnsemble::from_vec(replicates, g.height, g.width, data)?;
    ens.seed = seed;
    Ok(ens)
}

/// Assembles `B` for `params` and draws `replicates` independent fields.
pub fn simulate_ensemble(
    params: &ParamFields,
    geometry: &GridGeometry,
    replicates: usize,
    seed: u64,
) -> Result<FieldEnsemble> {
    let sys = assemble_sar(params, geometry)?;
    simulate_with_system(&sys, replicates, seed)
}

/// Per-pixel zero mean and unit sample sd (divisor `M - 1`) across
/// replicates. A single replicate is standardized by its own spatial mean
/// and sd instead.
pub fn standardize_pixelwise(ens: &FieldEnsemble) -> Result<FieldEnsemble> {
    let (m, n) = (ens.replicates, ens.pixels());
    let mut out = ens.clone();
    if m == 1 {
        let mean = ens.data.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            ens.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        if var.is_nan() || var <= 0.0 {
            return Err(Error::DegeneratePixel { row: 0, col: 0 });
        }
        let sd = var.sqrt();
        out.data.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        out.standardization = Standardization::SpatialFallback;
        return Ok(out);
    }
    for r in 0..n {
        let mean = ens.pixel_series(r).sum::<f64>() / m as f64;
        let var = ens.pixel_series(r).map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        if var.is_nan() || var <= 0.0 {
            return Err(Error::DegeneratePixel {
                row: r / ens.width,
                col: r % ens.width,
            });
        }
        let sd = var.sqrt();
        for k in 0..m {
            let v = &mut out.data[k * n + r];
            *v = (*v - mean) / sd;
        }
    }
    out.standardization = Standardization::Pixelwise;
    Ok(out)
}
