//! Anisotropic SAR operator on a regular lattice.
//!
//! Each cell carries `kappa2 > 0`, an aspect ratio `rho >= 1` and an angle
//! `theta`. The dispersion tensor is `D = Rᵀ diag(rho, 1/rho) R` with `R`
//! the rotation by `theta`, so `det D = 1`. The discretized operator
//! `kappa2 - div(D grad)` gives a 9-point stencil per cell; stacking those
//! rows yields the SAR matrix `B` with `B y = e` and precision `Q = BᵀB`.

use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{self, SparseLu};
use crate::grid::{Field, GridGeometry};
use crate::sparse::CsrMatrix;

/// Bounds of the parameter supports used throughout the crate.
pub mod support {
    use std::f64::consts::FRAC_PI_2;

    pub const KAPPA2_MIN: f64 = 1e-4;
    pub const KAPPA2_MAX: f64 = 2.0;
    pub const RHO_MIN: f64 = 1.0;
    pub const RHO_MAX: f64 = 7.0;
    pub const THETA_MIN: f64 = -FRAC_PI_2;
    pub const THETA_MAX: f64 = FRAC_PI_2;

    /// Maps an angle into `[-pi/2, pi/2)` modulo pi.
    pub fn wrap_theta(theta: f64) -> f64 {
        if (-FRAC_PI_2..FRAC_PI_2).contains(&theta) {
            return theta;
        }
        let pi = std::f64::consts::PI;
        let w = (theta + FRAC_PI_2).rem_euclid(pi) - FRAC_PI_2;
        // rem_euclid can round up to exactly pi
        if w >= FRAC_PI_2 {
            w - pi
        } else {
            w
        }
    }
}

/// Which of the three parameter images a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Kappa2,
    Rho,
    Theta,
}

impl ParamKind {
    pub const ALL: [ParamKind; 3] = [ParamKind::Kappa2, ParamKind::Rho, ParamKind::Theta];

    /// `(low, high)` of the prior support.
    pub fn support(self) -> (f64, f64) {
        use support::*;
        match self {
            ParamKind::Kappa2 => (KAPPA2_MIN, KAPPA2_MAX),
            ParamKind::Rho => (RHO_MIN, RHO_MAX),
            ParamKind::Theta => (THETA_MIN, THETA_MAX),
        }
    }

    pub fn range(self) -> f64 {
        let (lo, hi) = self.support();
        hi - lo
    }

    pub fn channel(self) -> usize {
        match self {
            ParamKind::Kappa2 => 0,
            ParamKind::Rho => 1,
            ParamKind::Theta => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Kappa2 => "kappa2",
            ParamKind::Rho => "rho",
            ParamKind::Theta => "theta",
        }
    }
}

/// The three parameter images `[kappa2, rho, theta]` on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFields {
    pub kappa2: Field,
    pub rho: Field,
    pub theta: Field,
}

impl ParamFields {
    pub fn new(kappa2: Field, rho: Field, theta: Field) -> Result<Self> {
        let (h, w) = kappa2.shape();
        rho.check_shape(h, w, "rho")?;
        theta.check_shape(h, w, "theta")?;
        Ok(Self { kappa2, rho, theta })
    }

    pub fn constant(height: usize, width: usize, kappa2: f64, rho: f64, theta: f64) -> Self {
        Self {
            kappa2: Field::filled(height, width, kappa2),
            rho: Field::filled(height, width, rho),
            theta: Field::filled(height, width, theta),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.kappa2.shape()
    }

    pub fn channel(&self, kind: ParamKind) -> &Field {
        match kind {
            ParamKind::Kappa2 => &self.kappa2,
            ParamKind::Rho => &self.rho,
            ParamKind::Theta => &self.theta,
        }
    }

    pub fn channel_mut(&mut self, kind: ParamKind) -> &mut Field {
        match kind {
            ParamKind::Kappa2 => &mut self.kappa2,
            ParamKind::Rho => &mut self.rho,
            ParamKind::Theta => &mut self.theta,
        }
    }

    /// Channel-major `3 x H x W` buffer in `[kappa2, rho, theta]` order.
    pub fn to_channels(&self) -> Vec<f64> {
        ParamKind::ALL
            .iter()
            .flat_map(|&k| self.channel(k).as_slice().iter().copied())
            .collect()
    }

    pub fn from_channels(height: usize, width: usize, data: &[f64]) -> Result<Self> {
        let n = height * width;
        if data.len() != 3 * n {
            return Err(Error::Dimension(format!(
                "parameter buffer needs 3x{height}x{width} values, got {}",
                data.len()
            )));
        }
        Self::new(
            Field::from_vec(height, width, data[..n].to_vec())?,
            Field::from_vec(height, width, data[n..2 * n].to_vec())?,
            Field::from_vec(height, width, data[2 * n..].to_vec())?,
        )
    }

    /// Checks every cell lies in the domain the operator accepts.
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.shape();
        for i in 0..h {
            for j in 0..w {
                let (k, r, t) = (
                    self.kappa2.get(i, j),
                    self.rho.get(i, j),
                    self.theta.get(i, j),
                );
                check_cell(k, r, t)
                    .map_err(|msg| Error::InvalidParameter(format!("cell ({i}, {j}): {msg}")))?;
            }
        }
        Ok(())
    }
}

fn check_cell(kappa2: f64, rho: f64, theta: f64) -> std::result::Result<(), String> {
    if !(kappa2.is_finite() && kappa2 > 0.0) {
        return Err(format!("kappa2 must be finite and > 0, got {kappa2}"));
    }
    if !(rho.is_finite() && rho >= 1.0) {
        return Err(format!("rho must be finite and >= 1, got {rho}"));
    }
    if !theta.is_finite() {
        return Err(format!("theta must be finite, got {theta}"));
    }
    Ok(())
}

/// Entries of one symmetric 2x2 dispersion tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

impl Dispersion {
    pub const IDENTITY: Dispersion = Dispersion {
        d11: 1.0,
        d12: 0.0,
        d22: 1.0,
    };

    pub fn det(&self) -> f64 {
        self.d11 * self.d22 - self.d12 * self.d12
    }
}

/// `D = Rᵀ diag(rho, 1/rho) R` for the rotation `R` by `theta`.
pub fn dispersion_at(rho: f64, theta: f64) -> Result<Dispersion> {
    if !rho.is_finite() || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "non-finite dispersion input (rho={rho}, theta={theta})"
        )));
    }
    if rho < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "rho must be >= 1, got {rho}"
        )));
    }
    if rho == 1.0 {
        // c² + s² need not round to 1
        return Ok(Dispersion::IDENTITY);
    }
    let (s, c) = theta.sin_cos();
    let inv = 1.0 / rho;
    Ok(Dispersion {
        d11: rho * c * c + inv * s * s,
        d12: c * s * (inv - rho),
        d22: rho * s * s + inv * c * c,
    })
}

/// Per-cell dispersion entries over a whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTensor {
    pub d11: Field,
    pub d12: Field,
    pub d22: Field,
}

impl DispersionTensor {
    pub fn from_params(params: &ParamFields) -> Result<Self> {
        let (h, w) = params.shape();
        let mut d11 = Field::filled(h, w, 0.0);
        let mut d12 = d11.clone();
        let mut d22 = d11.clone();
        for i in 0..h {
            for j in 0..w {
                let d = dispersion_at(params.rho.get(i, j), params.theta.get(i, j))
                    .map_err(|e| Error::InvalidParameter(format!("cell ({i}, {j}): {e}")))?;
                d11.set(i, j, d.d11);
                d12.set(i, j, d.d12);
                d22.set(i, j, d.d22);
            }
        }
        Ok(Self { d11, d12, d22 })
    }

    pub fn at(&self, i: usize, j: usize) -> Dispersion {
        Dispersion {
            d11: self.d11.get(i, j),
            d12: self.d12.get(i, j),
            d22: self.d22.get(i, j),
        }
    }
}

/// 3x3 stencil addressed by offsets `(di, dj)` in `{-1, 0, 1}²`, where `di`
/// steps along y (rows) and `dj` along x (columns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil9 {
    weights: [[f64; 3]; 3],
}

impl Stencil9 {
    #[inline]
    pub fn weight(&self, di: i64, dj: i64) -> f64 {
        self.weights[(di + 1) as usize][(dj + 1) as usize]
    }

    pub fn center(&self) -> f64 {
        self.weight(0, 0)
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }

    /// Non-center taps in a fixed order, paired with their offsets.
    pub fn taps(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        OFFSETS
            .iter()
            .map(move |&(di, dj)| (di, dj, self.weight(di, dj)))
    }
}

/// Offsets in the order taps are emitted, center first.
pub const OFFSETS: [(i64, i64); 9] = [
    (0, 0),
    (0, -1),
    (0, 1),
    (-1, 0),
    (1, 0),
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
];

/// Stencil of `kappa2 - div(D grad)` with second-order central differences:
///
/// ```text
///          dj=-1      dj=0             dj=+1
/// di=+1    d12/2     -d22             -d12/2
/// di= 0   -d11        k2+2d11+2d22    -d11
/// di=-1   -d12/2     -d22              d12/2
/// ```
pub fn stencil_at(kappa2: f64, d: &Dispersion) -> Result<Stencil9> {
    if !(kappa2.is_finite() && kappa2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa2 must be finite and > 0, got {kappa2}"
        )));
    }
    if !(d.d11 > 0.0 && d.d22 > 0.0 && d.d12.is_finite() && d.d11.is_finite() && d.d22.is_finite())
    {
        return Err(Error::InvalidParameter(format!("invalid dispersion {d:?}")));
    }
    let half = 0.5 * d.d12;
    Ok(Stencil9 {
        weights: [
            // di = -1
            [-half, -d.d22, half],
            // di = 0
            [-d.d11, kappa2 + 2.0 * d.d11 + 2.0 * d.d22, -d.d11],
            // di = +1
            [half, -d.d22, -half],
        ],
    })
}

/// The assembled SAR system: sparse `B`, its grid, and a lazily built LU.
pub struct SarSystem {
    b: CsrMatrix,
    geometry: GridGeometry,
    factor: OnceLock<SparseLu>,
    factor_guard: Mutex<()>,
}

impl std::fmt::Debug for SarSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SarSystem")
            .field("geometry", &self.geometry)
            .field("nnz", &self.b.nnz())
            .field("factorized", &self.factor.get().is_some())
            .finish()
    }
}

impl SarSystem {
    pub fn from_matrix(b: CsrMatrix, geometry: GridGeometry) -> Result<Self> {
        if b.n_rows() != geometry.len() || b.n_cols() != geometry.len() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, grid has {} cells",
                b.n_rows(),
                b.n_cols(),
                geometry.len()
            )));
        }
        Ok(Self {
            b,
            geometry,
            factor: OnceLock::new(),
            factor_guard: Mutex::new(()),
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.geometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_factorized(&self) -> bool {
        self.factor.get().is_some()
    }

    /// The LU of `B`, computed on first use and shared afterwards.
    pub fn factorization(&self) -> Result<&SparseLu> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let _guard = self.factor_guard.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let lu = SparseLu::new(&self.b)?;
        Ok(self.factor.get_or_init(|| lu))
    }

    /// `log |det B|`.
    pub fn log_abs_det(&self) -> Result<f64> {
        factor::log_abs_det(&self.b)
    }
}

/// Assembles `B`, one stencil row per cell evaluated at that cell's own
/// parameters.
pub fn assemble_sar(params: &ParamFields, geometry: &GridGeometry) -> Result<SarSystem> {
    let (h, w) = params.shape();
    if (h, w) != (geometry.height, geometry.width) {
        return Err(Error::Dimension(format!(
            "parameters are {h}x{w}, grid is {}x{}",
            geometry.height, geometry.width
        )));
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..geometry.len())
        .into_par_iter()
        .map(|r| {
            let (i, j) = (r / w, r % w);
            let (k, rho, theta) = (
                params.kappa2.get(i, j),
                params.rho.get(i, j),
                params.theta.get(i, j),
            );
            check_cell(k, rho, theta)
                .map_err(|msg| Error::InvalidParameter(format!("cell ({i}, {j}): {msg}")))?;
            let stencil = stencil_at(k, &dispersion_at(rho, theta)?)?;
            Ok(stencil_row(&stencil, geometry, i, j))
        })
        .collect::<Result<_>>()?;
    SarSystem::from_matrix(CsrMatrix::from_rows(geometry.len(), rows), *geometry)
}

fn stencil_row(
    stencil: &Stencil9,
    geometry: &GridGeometry,
    i: usize,
    j: usize,
) -> Vec<(usize, f64)> {
    stencil
        .taps()
        .filter(|&(_, _, v)| v != 0.0)
        .filter_map(|(di, dj, v)| geometry.neighbor(i, j, di, dj).map(|c| (c, v)))
        .collect()
}

/// `Q = BᵀB`.
pub fn precision(sys: &SarSystem) -> CsrMatrix {
    sys.matrix().gram()
}
