//! Windowed maximum-likelihood estimation of `(kappa2, rho, theta)`.
//!
//! Inside a window the field is modelled as a stationary SAR field on an
//! `h x w` grid with truncated boundaries. Because the window stencil is
//! constant, `|| B y ||²` summed over replicates is a quadratic form in the
//! nine stencil weights, `wᵀ S w`, where `S` holds the 9x9 shifted
//! cross-products of the data. `S` is computed once per window, so each
//! likelihood evaluation costs one banded Cholesky of `B` (which is symmetric
//! positive definite for a stationary stencil) plus 81 multiply-adds.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::sar::support::{self, wrap_theta};
use crate::sar::{dispersion_at, stencil_at, ParamFields, Stencil9, OFFSETS};
use crate::simulator::FieldEnsemble;

/// Offset inside the `log(rho - 1 + delta)` transform.
pub const RHO_DELTA: f64 = 1e-3;

/// `rho` below this leaves `theta` weakly identified.
pub const WEAK_RHO: f64 = 1.05;

const KAPPA2_STARTS: [f64; 3] = [0.01, 0.1, 1.0];
const RHO_STARTS: [f64; 3] = [1.2, 2.5, 5.0];
const THETA_STARTS: [f64; 3] = [-PI / 3.0, 0.0, PI / 3.0];
const REFINED_STARTS: usize = 3;
const MAX_ITERS: u64 = 2000;
const SD_TOLERANCE: f64 = 1e-10;
const PENALTY: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub size: usize,
    pub stride: usize,
    /// Maximize over an unknown marginal scale `sigma²` as well. Useful for
    /// standardized ensembles, whose scale carries no information.
    pub profile_scale: bool,
}

impl WindowSpec {
    pub const SIZES: [usize; 3] = [9, 17, 25];

    pub fn new(size: usize) -> Result<Self> {
        let spec = Self {
            size,
            stride: 1,
            profile_scale: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        self.stride = stride;
        self.validate()?;
        Ok(self)
    }

    pub fn with_profiled_scale(mut self, on: bool) -> Self {
        self.profile_scale = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "window size must be odd and positive, got {}",
                self.size
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter(
                "window stride must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn half(&self) -> usize {
        self.size / 2
    }
}

/// Shifted cross-products of one window, enough to evaluate the likelihood
/// at any stationary parameter triple.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    height: usize,
    width: usize,
    replicates: usize,
    /// `s[a][b] = Σ_m Σ_r y_m(r + o_a) y_m(r + o_b)` over cells `r` whose
    /// both neighbors exist, with `o` running over [`OFFSETS`].
    s: [[f64; 9]; 9],
}

impl WindowStats {
    pub fn new(window: &FieldEnsemble) -> Result<Self> {
        let (m, h, w) = (window.replicates(), window.height(), window.width());
        if window.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Likelihood(
                "window contains non-finite values".into(),
            ));
        }
        // Per-replicate partial sums are added in sorted order so the
        // statistics, and every fit built on them, ignore replicate order.
        let mut parts = vec![[[0.0; 9]; 9]; m];
        for (rep, part) in parts.iter_mut().enumerate() {
            let y = window.replicate(rep);
            for a in 0..9 {
                for b in a..9 {
                    let (ia, ja) = OFFSETS[a];
                    let (ib, jb) = OFFSETS[b];
                    let mut acc = 0.0;
                    for i in 0..h as i64 {
                        let (ya, yb) = (i + ia, i + ib);
                        if ya < 0 || yb < 0 || ya >= h as i64 || yb >= h as i64 {
                            continue;
                        }
                        for j in 0..w as i64 {
                            let (xa, xb) = (j + ja, j + jb);
                            if xa < 0 || xb < 0 || xa >= w as i64 || xb >= w as i64 {
                                continue;
                            }
                            acc +=
                                y[ya as usize * w + xa as usize] * y[yb as usize * w + xb as usize];
                        }
                    }
                    part[a][b] = acc;
                }
            }
        }
        let mut s = [[0.0; 9]; 9];
        let mut column = vec![0.0; m];
        for a in 0..9 {
            for b in a..9 {
                for (c, part) in column.iter_mut().zip(&parts) {
                    *c = part[a][b];
                }
                column.sort_unstable_by(f64::total_cmp);
                let acc = column.iter().sum();
                s[a][b] = acc;
                s[b][a] = acc;
            }
        }
        Ok(Self {
            height: h,
            width: w,
            replicates: m,
            s,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.replicates, self.height, self.width)
    }

    /// `Σ_m y_mᵀ Q y_m` for the stencil.
    pub fn quadratic_form(&self, stencil: &Stencil9) -> f64 {
        let w: [f64; 9] = OFFSETS.map(|(di, dj)| stencil.weight(di, dj));
        let mut q = 0.0;
        for a in 0..9 {
            let row: f64 = self.s[a].iter().zip(&w).map(|(s, wb)| s * wb).sum();
            q += w[a] * row;
        }
        q
    }

    fn parts(&self, kappa2: f64, rho: f64, theta: f64) -> Result<(f64, f64)> {
        let stencil = stencil_at(kappa2, &dispersion_at(rho, theta)?)?;
        let logdet = window_log_det(&stencil, self.height, self.width)?;
        Ok((logdet, self.quadratic_form(&stencil)))
    }

    /// The windowed log-likelihood.
    pub fn loglik(&self, kappa2: f64, rho: f64, theta: f64) -> Result<f64> {
        let (logdet, quad) = self.parts(kappa2, rho, theta)?;
        let n = (self.height * self.width) as f64;
        let m = self.replicates as f64;
        Ok(m * logdet - 0.5 * quad - 0.5 * m * n * (2.0 * PI).ln())
    }

    /// Log-likelihood with `sigma²` replaced by its maximizer
    /// `quad / (n M)`.
    pub fn profile_loglik(&self, kappa2: f64, rho: f64, theta: f64) -> Result<f64> {
        let (logdet, quad) = self.parts(kappa2, rho, theta)?;
        let nm = (self.height * self.width * self.replicates) as f64;
        if quad <= 0.0 {
            return Err(Error::Likelihood("window has zero energy".into()));
        }
        let sigma2 = quad / nm;
        Ok(self.replicates as f64 * logdet - 0.5 * nm * (sigma2.ln() + 1.0 + (2.0 * PI).ln()))
    }

    fn objective(&self, profile: bool, kappa2: f64, rho: f64, theta: f64) -> Result<f64> {
        if profile {
            self.profile_loglik(kappa2, rho, theta)
        } else {
            self.loglik(kappa2, rho, theta)
        }
    }
}

/// `log det B` for a stationary stencil on an `h x w` truncated grid, from a
/// banded Cholesky factor (half bandwidth `w + 1` in row-major order).
pub fn window_log_det(stencil: &Stencil9, height: usize, width: usize) -> Result<f64> {
    let n = height * width;
    let p = width + 1;
    // l[i * (p + 1) + (j + p - i)] holds L[i][j] for i - p <= j <= i.
    let stride = p + 1;
    let mut l = vec![0.0; n * stride];
    let entry = |i: usize, j: usize| -> f64 {
        let (yi, xi) = ((i / width) as i64, (i % width) as i64);
        let (yj, xj) = ((j / width) as i64, (j % width) as i64);
        let (di, dj) = (yj - yi, xj - xi);
        if di.abs() <= 1 && dj.abs() <= 1 {
            stencil.weight(di, dj)
        } else {
            0.0
        }
    };
    let mut logdet = 0.0;
    for i in 0..n {
        let lo = i.saturating_sub(p);
        for j in lo..=i {
            let mut s = entry(i, j);
            let klo = lo.max(j.saturating_sub(p));
            for k in klo..j {
                s -= l[i * stride + (k + p - i)] * l[j * stride + (k + p - j)];
            }
            if i == j {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::Likelihood(format!(
                        "window operator not positive definite at row {i}"
                    )));
                }
                let d = s.sqrt();
                l[i * stride + p] = d;
                logdet += d.ln();
            } else {
                l[i * stride + (j + p - i)] = s / l[j * stride + p];
            }
        }
    }
    Ok(2.0 * logdet)
}

/// `Σ_m [ log|det B| − ½ y_mᵀ Q y_m − (hw/2) log 2π ]` for a stationary
/// model on the window.
pub fn gmrf_loglik(window: &FieldEnsemble, kappa2: f64, rho: f64, theta: f64) -> Result<f64> {
    WindowStats::new(window)?.loglik(kappa2, rho, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub kappa2: f64,
    pub rho: f64,
    pub theta: f64,
    pub loglik: f64,
    pub status: FitStatus,
    pub evaluations: u64,
    pub weakly_identified: bool,
}

impl MleFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub init: Option<(f64, f64, f64)>,
    pub profile_scale: bool,
}

fn to_free(kappa2: f64, rho: f64, theta: f64) -> Vec<f64> {
    vec![kappa2.ln(), (rho - 1.0 + RHO_DELTA).ln(), theta]
}

fn from_free(x: &[f64]) -> (f64, f64, f64) {
    let kappa2 = x[0].exp().clamp(support::KAPPA2_MIN, support::KAPPA2_MAX);
    let rho = (x[1].exp() + 1.0 - RHO_DELTA).clamp(support::RHO_MIN, support::RHO_MAX);
    (kappa2, rho, x[2])
}

struct NegLoglik<'a> {
    stats: &'a WindowStats,
    profile: bool,
}

impl CostFunction for NegLoglik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        if x.iter().any(|v| !v.is_finite()) {
            return Ok(PENALTY);
        }
        let (k, r, t) = from_free(x);
        Ok(
            match self.stats.objective(self.profile, k, r, wrap_theta(t)) {
                Ok(v) if v.is_finite() => -v,
                _ => PENALTY,
            },
        )
    }
}

struct Run {
    x: Vec<f64>,
    loglik: f64,
    status: FitStatus,
    evaluations: u64,
}

fn nelder_mead(stats: &WindowStats, profile: bool, start: Vec<f64>) -> Option<Run> {
    let steps = [0.5, 0.4, 0.3];
    let mut simplex = vec![start.clone()];
    for (d, step) in steps.iter().enumerate() {
        let mut v = start.clone();
        v[d] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(SD_TOLERANCE)
        .ok()?;
    let res = Executor::new(NegLoglik { stats, profile }, solver)
        .configure(|s| s.max_iters(MAX_ITERS))
        .run()
        .ok()?;
    let state = res.state();
    let cost = state.get_best_cost();
    if !(cost.is_finite() && cost < PENALTY) {
        return None;
    }
    let x = state.get_best_param()?.clone();
    let status = match state.get_termination_status() {
        TerminationStatus::Terminated(TerminationReason::MaxItersReached) => {
            FitStatus::MaxIterations
        }
        TerminationStatus::Terminated(_) => FitStatus::Converged,
        TerminationStatus::NotTerminated => FitStatus::MaxIterations,
    };
    let evaluations = state
        .get_func_counts()
        .get("cost_count")
        .copied()
        .unwrap_or(0);
    Some(Run {
        x,
        loglik: -cost,
        status,
        evaluations,
    })
}

/// Multistart Nelder–Mead over `(log kappa2, log(rho − 1 + δ), theta)`.
///
/// All 27 coarse starts are scored; the best [`REFINED_STARTS`] of them,
/// plus `init` when given, are refined. The best refined run wins, ties
/// going to fewer evaluations. Never fails: if no start yields a finite
/// likelihood the result carries [`FitStatus::Failed`].
pub fn fit_stats(stats: &WindowStats, options: &FitOptions) -> MleFit {
    let profile = options.profile_scale;
    let mut evaluations = 0u64;
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(27);
    for &k in &KAPPA2_STARTS {
        for &r in &RHO_STARTS {
            for &t in &THETA_STARTS {
                evaluations += 1;
                if let Ok(v) = stats.objective(profile, k, r, t) {
                    if v.is_finite() {
                        scored.push((v, to_free(k, r, t)));
                    }
                }
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut starts: Vec<Vec<f64>> = scored
        .iter()
        .take(REFINED_STARTS)
        .map(|s| s.1.clone())
        .collect();
    if let Some((k, r, t)) = options.init {
        let k = k.clamp(support::KAPPA2_MIN, support::KAPPA2_MAX);
        let r = r.clamp(support::RHO_MIN, support::RHO_MAX);
        starts.push(to_free(k, r, wrap_theta(t)));
    }

    let mut best: Option<Run> = None;
    for start in starts {
        let Some(run) = nelder_mead(stats, profile, start) else {
            continue;
        };
        evaluations += run.evaluations;
        let better = match &best {
            None => true,
            Some(b) => {
                run.loglik > b.loglik || (run.loglik == b.loglik && run.evaluations < b.evaluations)
            }
        };
        if better {
            best = Some(run);
        }
    }

    match best {
        Some(run) => {
            let (kappa2, rho, theta) = from_free(&run.x);
            let theta = wrap_theta(theta);
            // Clamping in `from_free` can only move the point onto the
            // boundary; rescore there so the reported value is exact.
            let loglik = stats
                .objective(profile, kappa2, rho, theta)
                .unwrap_or(run.loglik);
            MleFit {
                kappa2,
                rho,
                theta,
                loglik,
                status: run.status,
                evaluations,
                weakly_identified: rho < WEAK_RHO,
            }
        }
        None => {
            let (kappa2, rho, theta) = options.init.unwrap_or((
                (support::KAPPA2_MIN * support::KAPPA2_MAX).sqrt(),
                support::RHO_MIN,
                0.0,
            ));
            MleFit {
                kappa2,
                rho,
                theta: wrap_theta(theta),
                loglik: f64::NEG_INFINITY,
                status: FitStatus::Failed,
                evaluations,
                weakly_identified: true,
            }
        }
    }
}

pub fn fit_window(window: &FieldEnsemble, options: &FitOptions) -> Result<MleFit> {
    Ok(fit_stats(&WindowStats::new(window)?, options))
}

/// Reflection index for padding: mirrors about the edge cells without
/// repeating them, folding as often as needed.
pub fn reflect_index(k: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let r = k.rem_euclid(period);
    if r < n as i64 {
        r as usize
    } else {
        (period - r) as usize
    }
}

/// The `size x size` window centered on `(i, j)` of the reflection-padded
/// ensemble.
pub fn extract_window(ens: &FieldEnsemble, i: usize, j: usize, size: usize) -> FieldEnsemble {
    let half = (size / 2) as i64;
    let (h, w) = (ens.height(), ens.width());
    let mut data = Vec::with_capacity(ens.replicates() * size * size);
    for m in 0..ens.replicates() {
        let y = ens.replicate(m);
        for a in 0..size as i64 {
            let si = reflect_index(i as i64 + a - half, h);
            for b in 0..size as i64 {
                let sj = reflect_index(j as i64 + b - half, w);
                data.push(y[si * w + sj]);
            }
        }
    }
    FieldEnsemble::from_vec(ens.replicates(), size, size, data).expect("window shape is consistent")
}

/// Sliding-window estimates with per-pixel diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingEstimate {
    pub params: ParamFields,
    /// 1 where the pixel's value comes from a converged fit.
    pub converged: Vec<u8>,
    /// 1 where `rho < WEAK_RHO`, so `theta` carries little information.
    pub weak_theta: Vec<u8>,
    pub loglik: Field,
    pub spec: WindowSpec,
}

impl SlidingEstimate {
    pub fn n_failed(&self) -> usize {
        self.converged.iter().filter(|&&c| c == 0).count()
    }
}

/// Fits a window centered on every `stride`-th pixel of the reflection-padded
/// ensemble. With `stride > 1` every other pixel copies the nearest fitted
/// pixel; pixels whose fit did not converge take the value of the nearest
/// converged pixel and are marked in the mask.
pub fn sliding_window_estimate(ens: &FieldEnsemble, spec: &WindowSpec) -> Result<SlidingEstimate> {
    spec.validate()?;
    let (h, w) = (ens.height(), ens.width());
    let rows: Vec<usize> = (0..h).step_by(spec.stride).collect();
    let cols: Vec<usize> = (0..w).step_by(spec.stride).collect();
    let centers: Vec<(usize, usize)> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .collect();
    let options = FitOptions {
        init: None,
        profile_scale: spec.profile_scale,
    };
    let fits: Vec<MleFit> = centers
        .par_iter()
        .map(|&(i, j)| fit_window(&extract_window(ens, i, j, spec.size), &options))
        .collect::<Result<_>>()?;

    let (fh, fw) = (rows.len(), cols.len());
    let ok: Vec<bool> = fits.iter().map(MleFit::converged).collect();
    let source = nearest_ok(&ok, fh, fw);

    let mut kappa2 = Field::filled(h, w, 0.0);
    let mut rho = Field::filled(h, w, 0.0);
    let mut theta = Field::filled(h, w, 0.0);
    let mut loglik = Field::filled(h, w, f64::NAN);
    let mut converged = vec![0u8; h * w];
    let mut weak_theta = vec![0u8; h * w];
    for i in 0..h {
        let fi = ((i + spec.stride / 2) / spec.stride).min(fh - 1);
        for j in 0..w {
            let fj = ((j + spec.stride / 2) / spec.stride).min(fw - 1);
            let own = fi * fw + fj;
            let fit = &fits[source[own].unwrap_or(own)];
            kappa2.set(i, j, fit.kappa2);
            rho.set(i, j, fit.rho);
            theta.set(i, j, fit.theta);
            loglik.set(i, j, fits[own].loglik);
            converged[i * w + j] = ok[own] as u8;
            weak_theta[i * w + j] = fit.weakly_identified as u8;
        }
    }
    Ok(SlidingEstimate {
        params: ParamFields::new(kappa2, rho, theta)?,
        converged,
        weak_theta,
        loglik,
        spec: *spec,
    })
}

/// For each cell, the index of the nearest `ok` cell (squared Euclidean
/// distance, ties to the lower index); `None` when nothing is `ok`.
fn nearest_ok(ok: &[bool], h: usize, w: usize) -> Vec<Option<usize>> {
    let good: Vec<usize> = (0..h * w).filter(|&k| ok[k]).collect();
    (0..h * w)
        .map(|k| {
            if ok[k] {
                return Some(k);
            }
            let (i, j) = ((k / w) as i64, (k % w) as i64);
            good.iter().copied().min_by_key(|&g| {
                let (gi, gj) = ((g / w) as i64, (g % w) as i64);
                ((gi - i).pow(2) + (gj - j).pow(2), g)
            })
        })
        .collect()
}
