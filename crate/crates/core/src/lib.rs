//! Sequential wind power curve estimation and directional degradation monitoring.
//!
//! The library fits monotone power curves to rolling segments of SCADA
//! telemetry with a copula-coupled log-normal coefficient posterior over an
//! I-spline basis, chains each segment's posterior into the next segment's
//! prior, and raises directional degradation alarms from a ratio of
//! KL divergences against an in-control reference distribution.
//!
//! Module map:
//! - [`spline`]: M-spline / I-spline basis and design matrices
//! - [`copula`]: Gaussian copula densities, KL utilities, reparameterized ELBO
//! - [`cvi`]: the coordinate-ascent estimator and sequential updating loop
//! - [`mgr`]: multivariate-Gaussian variational baseline with closed forms
//! - [`detect`]: KL-divergence-factor control chart and threshold calibration
//! - [`pipeline`]: SCADA ingestion, outlier removal, rolling-window segmentation
//! - [`synth`]: synthetic SCADA generation with controlled degradation
//! - [`charts`]: WCDF+T², GPR-T² and LLR-GLR baseline monitors
//! - [`metrics`]: fit-error and detection-quality scores

pub mod charts;
pub mod copula;
pub mod cvi;
pub mod detect;
pub mod error;
pub mod metrics;
pub mod mgr;
pub mod par;
pub mod pipeline;
pub mod rootfind;
pub mod special;
pub mod spline;
pub mod synth;

pub use error::{Error, Result};
