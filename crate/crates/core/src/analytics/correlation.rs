//! Anchor correlation rows of replicate ensembles.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::simulator::FieldEnsemble;

use super::ttest::{paired_ttest, TTestResult};

pub const DEFAULT_ANCHORS: usize = 50;

/// `n` distinct pixels drawn uniformly without replacement.
pub fn sample_anchors(
    height: usize,
    width: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let total = height * width;
    if n > total {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {n} anchors from {total} pixels"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    Ok(index::sample(&mut rng, total, n)
        .into_iter()
        .map(|k| (k / width, k % width))
        .collect())
}

/// Pearson correlations between each anchor and every pixel. Entries that
/// involve a zero-variance pixel are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRows {
    pub anchors: Vec<(usize, usize)>,
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl CorrelationRows {
    /// Rows given directly, one `height * width` block per anchor.
    pub fn from_rows(
        anchors: Vec<(usize, usize)>,
        height: usize,
        width: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != anchors.len() * height * width {
            return Err(Error::Dimension(format!(
                "{} anchors on {height}x{width} need {} values, got {}",
                anchors.len(),
                anchors.len() * height * width,
                data.len()
            )));
        }
        Ok(Self {
            anchors,
            height,
            width,
            data,
        })
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[a * n..(a + 1) * n]
    }

    pub fn get(&self, a: usize, i: usize, j: usize) -> f64 {
        self.row(a)[i * self.width + j]
    }
}

struct Centered {
    dev: Vec<f64>, // pixel-major: dev[r * m + k]
    norm: Vec<f64>,
    m: usize,
}

fn center(ens: &FieldEnsemble) -> Centered {
    let (m, n) = (ens.replicates(), ens.pixels());
    let mut dev = vec![0.0; n * m];
    let mut norm = vec![0.0; n];
    for r in 0..n {
        let mean = ens.pixel_series(r).sum::<f64>() / m as f64;
        let mut ss = 0.0;
        for (k, v) in ens.pixel_series(r).enumerate() {
            let d = v - mean;
            dev[r * m + k] = d;
            ss += d * d;
        }
        norm[r] = ss.sqrt();
    }
    Centered { dev, norm, m }
}

impl Centered {
    fn corr(&self, a: usize, r: usize) -> f64 {
        let (na, nr) = (self.norm[a], self.norm[r]);
        if na == 0.0 || nr == 0.0 {
            return f64::NAN;
        }
        if a == r {
            return 1.0;
        }
        let (x, y) = (
            &self.dev[a * self.m..(a + 1) * self.m],
            &self.dev[r * self.m..(r + 1) * self.m],
        );
        let s: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        (s / (na * nr)).clamp(-1.0, 1.0)
    }
}

pub fn correlation_rows(
    ens: &FieldEnsemble,
    anchors: &[(usize, usize)],
) -> Result<CorrelationRows> {
    if ens.replicates() < 3 {
        return Err(Error::InvalidParameter(format!(
            "correlation rows need at least 3 replicates, got {}",
            ens.replicates()
        )));
    }
    let (h, w) = (ens.height(), ens.width());
    if let Some(&(i, j)) = anchors.iter().find(|&&(i, j)| i >= h || j >= w) {
        return Err(Error::Dimension(format!(
            "anchor ({i}, {j}) outside {h}x{w} grid"
        )));
    }
    let c = center(ens);
    let n = h * w;
    let mut data = vec![0.0; anchors.len() * n];
    data.par_chunks_mut(n.max(1))
        .zip(anchors)
        .for_each(|(row, &(i, j))| {
            let a = i * w + j;
            for (r, v) in row.iter_mut().enumerate() {
                *v = c.corr(a, r);
            }
        });
    Ok(CorrelationRows {
        anchors: anchors.to_vec(),
        height: h,
        width: w,
        data,
    })
}

/// Per-anchor root-mean-square difference over entries defined in both.
pub fn cov_rmse(truth: &CorrelationRows, sim: &CorrelationRows) -> Result<Vec<f64>> {
    if truth.anchors != sim.anchors || (truth.height, truth.width) != (sim.height, sim.width) {
        return Err(Error::Dimension(
            "correlation rows use different anchors or grids".into(),
        ));
    }
    (0..truth.anchors.len())
        .map(|a| {
            let (mut ss, mut n) = (0.0, 0usize);
            for (x, y) in truth.row(a).iter().zip(sim.row(a)) {
                if x.is_finite() && y.is_finite() {
                    ss += (x - y).powi(2);
                    n += 1;
                }
            }
            if n == 0 {
                Err(Error::DegeneratePixel {
                    row: truth.anchors[a].0,
                    col: truth.anchors[a].1,
                })
            } else {
                Ok((ss / n as f64).sqrt())
            }
        })
        .collect()
}

/// Mean correlation between pixels `lag` apart along rows and columns,
/// over pixels at least `margin` away from every edge.
pub fn mean_lag_correlation(ens: &FieldEnsemble, lag: usize, margin: usize) -> Result<f64> {
    let (h, w) = (ens.height(), ens.width());
    if 2 * margin + lag >= h.min(w) {
        return Err(Error::Dimension(format!(
            "lag {lag} with margin {margin} does not fit a {h}x{w} grid"
        )));
    }
    let c = center(ens);
    let (mut sum, mut count) = (0.0, 0usize);
    for i in margin..h - margin {
        for j in margin..w - margin {
            let a = i * w + j;
            if j + lag < w - margin {
                sum += c.corr(a, a + lag);
                count += 1;
            }
            if i + lag < h - margin {
                sum += c.corr(a, a + lag * w);
                count += 1;
            }
        }
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovAnalysisReport {
    pub seed: u64,
    pub anchors: Vec<(usize, usize)>,
    pub rmse: Vec<f64>,
    pub mean_rmse: f64,
    /// Per-anchor RMSE of a competing ensemble, when one was scored.
    pub baseline_rmse: Option<Vec<f64>>,
    /// Paired test on `rmse − baseline_rmse`.
    pub ttest: Option<TTestResult>,
}

/// Compares correlation rows of a simulated ensemble with the true one at
/// `n_anchors` seeded anchors. With a baseline ensemble the per-anchor RMSE
/// differences (sim minus baseline) are tested for a negative mean.
pub fn covariance_analysis(
    truth: &FieldEnsemble,
    sim: &FieldEnsemble,
    baseline: Option<&FieldEnsemble>,
    n_anchors: usize,
    seed: u64,
) -> Result<CovAnalysisReport> {
    let shape = |e: &FieldEnsemble| (e.height(), e.width());
    if shape(truth) != shape(sim) || baseline.is_some_and(|b| shape(b) != shape(truth)) {
        return Err(Error::Dimension("ensembles are on different grids".into()));
    }
    let anchors = sample_anchors(truth.height(), truth.width(), n_anchors, seed)?;
    let rows_true = correlation_rows(truth, &anchors)?;
    let rmse = cov_rmse(&rows_true, &correlation_rows(sim, &anchors)?)?;
    let mean_rmse = rmse.iter().sum::<f64>() / rmse.len().max(1) as f64;
    let (baseline_rmse, ttest) = match baseline {
        Some(b) => {
            let base = cov_rmse(&rows_true, &correlation_rows(b, &anchors)?)?;
            let d: Vec<f64> = rmse.iter().zip(&base).map(|(s, b)| s - b).collect();
            (Some(base), Some(paired_ttest(&d)?))
        }
        None => (None, None),
    };
    Ok(CovAnalysisReport {
        seed,
        anchors,
        rmse,
        mean_rmse,
        baseline_rmse,
        ttest,
    })
}

impl CovAnalysisReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("{:>6} {:>6} {:>6} {:>12}", "anchor", "row", "col", "RMSE");
        if self.baseline_rmse.is_some() {
            out += &format!(" {:>12} {:>12}", "baseline", "diff");
        }
        out.push('\n');
        for (k, (&(i, j), r)) in self.anchors.iter().zip(&self.rmse).enumerate() {
            out += &format!("{k:>6} {i:>6} {j:>6} {r:>12.6}");
            if let Some(b) = &self.baseline_rmse {
                out += &format!(" {:>12.6} {:>12.6}", b[k], r - b[k]);
            }
            out.push('\n');
        }
        out += &format!(
            "mean RMSE {:.6} over {} anchors (seed {})\n",
            self.mean_rmse,
            self.anchors.len(),
            self.seed
        );
        if let Some(t) = &self.ttest {
            out += &format!(
                "{:>12} {:>10} {:>5} {:>12} {:>24}\n{:>12.6} {:>10.4} {:>5} {:>12.4e} {:>24}\n",
                "mean diff",
                "t",
                "df",
                "p (H1: <0)",
                "99% CI",
                t.mean,
                t.t,
                t.df,
                t.p_value,
                format!("(-inf, {:.6}]", t.upper_bound)
            );
        }
        out
    }
}
