//! Image metrics between estimated and true parameter fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::sar::{ParamFields, ParamKind};

pub const PSNR_CAP: f64 = 100.0;

/// Constants of the structural similarity index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConstants {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConstants {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub param: ParamKind,
    pub rmse: f64,
    pub mae: f64,
    pub nrmse: f64,
    pub ssim: f64,
    pub psnr: f64,
    /// Prior range used as the dynamic range.
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub channels: Vec<ChannelMetrics>,
    pub ssim: SsimConstants,
    /// Whether `theta` differences were wrapped to `[−π/2, π/2)`.
    pub theta_wrapped: bool,
    /// Number of field pairs averaged into this report.
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsOptions {
    pub ssim: Option<SsimConstants>,
    pub wrap_theta: bool,
}

pub fn param_metrics(est: &ParamFields, truth: &ParamFields) -> Result<MetricsReport> {
    param_metrics_with(est, truth, &MetricsOptions::default())
}

pub fn param_metrics_with(
    est: &ParamFields,
    truth: &ParamFields,
    options: &MetricsOptions,
) -> Result<MetricsReport> {
    if est.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, truth is {:?}",
            est.shape(),
            truth.shape()
        )));
    }
    let constants = options.ssim.unwrap_or_default();
    let channels = ParamKind::ALL
        .iter()
        .map(|&kind| {
            let (e, t) = (est.channel(kind), truth.channel(kind));
            let wrap = options.wrap_theta && kind == ParamKind::Theta;
            channel_metrics(kind, e, t, wrap, &constants)
        })
        .collect();
    Ok(MetricsReport {
        channels,
        ssim: constants,
        theta_wrapped: options.wrap_theta,
        samples: 1,
    })
}

fn wrapped(d: f64) -> f64 {
    (d + 0.5 * PI).rem_euclid(PI) - 0.5 * PI
}

fn channel_metrics(
    kind: ParamKind,
    est: &Field,
    truth: &Field,
    wrap: bool,
    constants: &SsimConstants,
) -> ChannelMetrics {
    let n = est.as_slice().len() as f64;
    let diffs = est.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| {
        let d = a - b;
        if wrap {
            wrapped(d)
        } else {
            d
        }
    });
    let (mut se, mut ae) = (0.0, 0.0);
    for d in diffs {
        se += d * d;
        ae += d.abs();
    }
    let mse = se / n;
    let rmse = mse.sqrt();
    let range = kind.range();
    ChannelMetrics {
        param: kind,
        rmse,
        mae: ae / n,
        nrmse: rmse / range,
        ssim: ssim(est, truth, range, constants),
        psnr: psnr(mse, range),
        range,
    }
}

pub fn psnr(mse: f64, range: f64) -> f64 {
    if mse == 0.0 {
        return PSNR_CAP;
    }
    (20.0 * range.log10() - 10.0 * mse.log10()).min(PSNR_CAP)
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|k| (-((k as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM over all fully contained windows. Images smaller than the
/// window use the largest odd window that fits.
pub fn ssim(x: &Field, y: &Field, range: f64, constants: &SsimConstants) -> f64 {
    let (h, w) = x.shape();
    let mut size = constants.window.min(h).min(w);
    if size % 2 == 0 {
        size -= 1;
    }
    let g = gaussian_kernel(size, constants.sigma);
    let c1 = (constants.k1 * range).powi(2);
    let c2 = (constants.k2 * range).powi(2);
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..=h - size {
        for j in 0..=w - size {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for a in 0..size {
                for b in 0..size {
                    let wt = g[a] * g[b];
                    let k = (i + a) * w + j + b;
                    mx += wt * xs[k];
                    my += wt * ys[k];
                    sxx += wt * xs[k] * xs[k];
                    syy += wt * ys[k] * ys[k];
                    sxy += wt * xs[k] * ys[k];
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cxy = sxy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

impl MetricsReport {
    pub fn channel(&self, kind: ParamKind) -> &ChannelMetrics {
        &self.channels[kind.channel()]
    }

    /// Sample-weighted average of several reports.
    pub fn average(reports: &[MetricsReport]) -> Result<MetricsReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Dimension("no reports to average".into()))?;
        let total: usize = reports.iter().map(|r| r.samples).sum();
        let channels = ParamKind::ALL
            .iter()
            .map(|&kind| {
                let mean = |f: fn(&ChannelMetrics) -> f64| {
                    reports
                        .iter()
                        .map(|r| f(r.channel(kind)) * r.samples as f64)
                        .sum::<f64>()
                        / total as f64
                };
                ChannelMetrics {
                    param: kind,
                    rmse: mean(|c| c.rmse),
                    mae: mean(|c| c.mae),
                    nrmse: mean(|c| c.nrmse),
                    ssim: mean(|c| c.ssim),
                    psnr: mean(|c| c.psnr),
                    range: kind.range(),
                }
            })
            .collect();
        Ok(MetricsReport {
            channels,
            ssim: first.ssim,
            theta_wrapped: first.theta_wrapped,
            samples: total,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8} {:>12} {:>12} {:>12} {:>10} {:>10}\n",
            "param", "RMSE", "MAE", "NRMSE", "SSIM", "PSNR(dB)"
        );
        for c in &self.channels {
            out += &format!(
                "{:<8} {:>12.6} {:>12.6} {:>12.6} {:>10.4} {:>10.3}\n",
                c.param.name(),
                c.rmse,
                c.mae,
                c.nrmse,
                c.ssim,
                c.psnr
            );
        }
        out += &format!(
            "samples={} ssim_window={} sigma={} K1={} K2={} theta_wrapped={}\n",
            self.samples,
            self.ssim.window,
            self.ssim.sigma,
            self.ssim.k1,
            self.ssim.k2,
            self.theta_wrapped
        );
        out
    }
}
