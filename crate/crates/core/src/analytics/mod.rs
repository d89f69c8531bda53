//! Evaluation: parameter-field metrics, anchor correlation rows, paired
//! t-tests and the Whittle correlation.

pub mod correlation;
pub mod metrics;
pub mod ttest;
pub mod whittle;

pub use correlation::{
    correlation_rows, cov_rmse, covariance_analysis, mean_lag_correlation, sample_anchors,
    CorrelationRows, CovAnalysisReport, DEFAULT_ANCHORS,
};
pub use metrics::{
    param_metrics, param_metrics_with, psnr, ssim, ChannelMetrics, MetricsOptions, MetricsReport,
    SsimConstants, PSNR_CAP,
};
pub use ttest::{paired_ttest, TTestResult, ALPHA};
pub use whittle::{bessel_k1, whittle_correlation, x_bessel_k1};
