//! Expected-cost model, Monte Carlo simulator and experiment harness for
//! threshold-gated re-scan loops in AI-guided image acquisition.
//!
//! A quality predictor with precision `p` and recall `r` flags scans whose
//! segmentation is likely to fail; flagged scans are re-acquired (cost `c_s`)
//! instead of being corrected by hand later (cost `c_c`). The crate provides
//!
//! - [`cost_model`]: closed-form expected costs at a fixed failure rate α,
//! - [`alpha_distributions`]: population averages over a density of α,
//! - [`predictor`]: synthetic predictors with prescribed operating points,
//! - [`kinematics`]: 6-DOF probe poses, pose-dependent quality and guidance,
//! - [`acquisition`]: per-subject and cohort simulation of the loop,
//! - [`config`], [`commands`], [`report`]: the experiment front end.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod alpha_distributions;
pub mod commands;
pub mod config;
pub mod cost_model;
pub mod error;
pub mod kinematics;
pub mod predictor;
pub mod quadrature;
pub mod report;
pub mod streams;

pub use error::{Error, Result};
