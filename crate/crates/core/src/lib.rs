//! Zero-trust risk toolkit for power-grid supply chains.
//!
//! The crate is organised along the attack/defense pipeline:
//!
//! - [`grid`]: delayed coupled-oscillator dynamics and the per-DER stability index.
//! - [`message`]: the two attack-surface schemas, CSV ingestion, normalization,
//!   stratified splitting and synthetic fallback datasets.
//! - [`nn`]: dense layers, binary cross-entropy and Adam with analytic gradients.
//! - [`gan`]: adversarial training of attack-vector generators and fidelity checks.
//! - [`risk`]: VaR/CVaR estimation and the Rockafellar–Uryasev objective.
//! - [`detector`]: bagged random forest plus KNN, logistic and linear-SVM baselines.
//! - [`constraints`]: cross-module checks of the risk-realization problem.

pub mod constraints;
pub mod detector;
mod error;
pub mod fmt;
pub mod gan;
pub mod grid;
pub mod message;
pub mod nn;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
