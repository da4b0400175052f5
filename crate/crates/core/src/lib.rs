//! Closed-form KL divergence between zero-mean Gaussians, the diagonal lower
//! bound for a diagonal reference covariance, and Monte Carlo machinery that
//! checks the surrounding inequalities on non-Gaussian witnesses.
//!
//! ```
//! use klmin::{kl_gaussian, diagonal_lower_bound, validate_spd, DiagSpectrum, SpdMatrix};
//!
//! let sx = SpdMatrix::identity(2).unwrap();
//! let sy = validate_spd(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
//! let kl = kl_gaussian(&sx, &sy).unwrap();
//! assert!((kl.0 + 0.5 * 0.75f64.ln()).abs() < 1e-12);
//!
//! let lx = DiagSpectrum::new(vec![1.0, 1.0]).unwrap();
//! assert_eq!(diagonal_lower_bound(&lx, &sy).unwrap().0, 0.0);
//! ```

pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod kl;
pub mod linalg;
pub mod matrix_io;
pub mod rng;

pub use error::{Error, Result};
pub use estimators::{build_matched_mixture, mc_entropy, mc_kl, DensityModel, McEstimate, ModelKind};
pub use harness::{check_c1, check_prop1, check_prop2, check_prop2_random, check_prop3, PropertyReport, Proposition};
pub use kl::{
    diagonal_lower_bound, gaussian_entropy, kl_diagonal, kl_gap_diagonal, kl_gaussian, kl_scalar, GapReport, Nats,
};
pub use linalg::{cholesky, random_diag, random_spd, trace_ratio, trace_ratio_factored, validate_spd, CholFactor, DiagSpectrum, SpdMatrix};
