//! Gradient descent and stochastic gradient descent with Bernoulli dropout in
//! linear regression, Ruppert–Polyak averaging, an online batch-means
//! estimator of the long-run covariance, and the confidence intervals and
//! regions built on top of it.
//!
//! ```
//! use dropout_sgd::{BlockSchedule, CovState, RngStream, SgdConfig, SgdState, Vector};
//! use dropout_sgd::randgen::{sample_dropout, stream_sample};
//!
//! let beta_star = Vector::new(vec![0.0, 0.5, 1.0]).unwrap();
//! let config = SgdConfig::new(0.9, 0.05, beta_star.clone()).unwrap();
//! let mut rng = RngStream::new(7, 0);
//! let mut sgd = SgdState::zeros(3);
//! let mut cov = CovState::new(3, BlockSchedule::squares());
//! for _ in 0..5000 {
//!     let sample = stream_sample(&beta_star, &mut rng);
//!     let mask = sample_dropout(3, config.p, &mut rng).unwrap();
//!     sgd.step(config.alpha, &sample, &mask).unwrap();
//!     cov.update(&sgd.beta).unwrap();
//! }
//! let sigma = cov.finalize().unwrap();
//! assert!(sigma.is_symmetric(1e-12));
//! ```

pub mod error;
pub mod experiments;
pub mod gd;
pub mod inference;
pub mod linalg;
pub mod longrun;
pub mod moments;
pub mod randgen;
pub mod sgd;

pub use error::{Error, Result};
pub use gd::{asymptotic_cov_xi, exact_contraction_sq, AsymptoticCov, GdProblem, GdState};
pub use inference::{ci_coordinate, ci_projection, ConfidenceInterval, JointRegion, JointThreshold};
pub use linalg::{Matrix, Vector};
pub use longrun::{offline_nbm, BlockSchedule, CovState};
pub use moments::{e_dad, e_dadbd, e_dadbdcd};
pub use randgen::{DropoutMask, RngStream};
pub use sgd::{AsgdState, SgdConfig, SgdState};
