//! Streaming one-class novelty detection.
//!
//! Raw points are embedded with random Fourier features into the unit sphere
//! and fed to a strongly convex SGD learner ([`sonar`]). A changepoint-adaptive
//! ensemble ([`sonarc`]) restarts the learner when the stream moves. Exact
//! batch solvers in [`oracle`] serve as ground truth.

pub mod error;
pub mod experiment;
pub mod kernel_features;
pub mod learner;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod sgd_ocsvm;
pub mod sonar;
pub mod sonarc;
pub mod streams;

pub use error::{Error, Result};
pub use kernel_features::{sample_rff, FeatureVector, RffConfig, RffMap};
pub use learner::{Decision, ModelState, ScheduleKind, SonarParams, StepSchedule};
