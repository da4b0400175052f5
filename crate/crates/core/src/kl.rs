//! Closed-form divergences and entropies for zero-mean Gaussians.
//!
//! Everything is in nats. Means never appear: every distribution here is
//! centered at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, trace_ratio_factored, CholFactor, DiagSpectrum, SpdMatrix};

/// Negative gaps down to this magnitude are treated as floating-point noise.
pub const ROUNDOFF_TOL: f64 = 1e-10;

/// ½ ln(2πe), the entropy of a standard normal coordinate.
pub const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

/// A quantity of information measured with the natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nats(pub f64);

impl Nats {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Nats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} nats", self.0)
    }
}

/// Exact divergence against a diagonal reference, its lower bound and the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub kl_exact: Nats,
    pub bound: Nats,
    /// `kl_exact − bound`, clamped to zero when it lies in `[−ROUNDOFF_TOL, 0)`.
    pub gap: f64,
    /// The unclamped difference.
    pub raw_gap: f64,
    /// Whether `gap` was clamped from a small negative value.
    pub clamped: bool,
}

impl GapReport {
    fn new(kl_exact: Nats, bound: Nats) -> Self {
        let raw_gap = kl_exact.0 - bound.0;
        let clamped = (-ROUNDOFF_TOL..0.0).contains(&raw_gap);
        GapReport { kl_exact, bound, gap: if clamped { 0.0 } else { raw_gap }, raw_gap, clamped }
    }
}

fn check_variance(index: usize, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::NonPositiveVariance { index, value });
    }
    Ok(())
}

/// KL(p_y ‖ p_x) from the factors of `Σx` and `Σy`.
pub fn kl_gaussian_factored(fx: &CholFactor, fy: &CholFactor) -> Result<Nats> {
    let m = fx.dim() as f64;
    let trace = trace_ratio_factored(fy, fx)?;
    // ln det(Σy Σx⁻¹) as a difference of log-determinants; the product is never formed.
    let log_det_ratio = fy.log_det() - fx.log_det();
    Ok(Nats(0.5 * (trace - log_det_ratio - m)))
}

/// `½[tr(Σy Σx⁻¹) − ln det(Σy Σx⁻¹) − m]`, the divergence of `N(0, Σy)` from `N(0, Σx)`.
pub fn kl_gaussian(sx: &SpdMatrix, sy: &SpdMatrix) -> Result<Nats> {
    if sx.dim() != sy.dim() {
        return Err(Error::DimensionMismatch { expected: sx.dim(), found: sy.dim() });
    }
    kl_gaussian_factored(&cholesky(sx)?, &cholesky(sy)?)
}

/// `½[r − ln r − 1]` with `r = var_y / var_x`.
pub fn kl_scalar(var_x: f64, var_y: f64) -> Result<Nats> {
    check_variance(0, var_x)?;
    check_variance(1, var_y)?;
    let r = var_y / var_x;
    Ok(Nats(0.5 * (r - r.ln() - 1.0)))
}

/// Sum of per-coordinate scalar divergences between two diagonal Gaussians.
pub fn kl_diagonal(lx: &DiagSpectrum, ly: &DiagSpectrum) -> Result<Nats> {
    if lx.dim() != ly.dim() {
        return Err(Error::DimensionMismatch { expected: lx.dim(), found: ly.dim() });
    }
    let mut ratio_sum = 0.0;
    let mut log_sum = 0.0;
    for (vx, vy) in lx.variances().iter().zip(ly.variances()) {
        let r = vy / vx;
        ratio_sum += r;
        log_sum += r.ln();
    }
    Ok(Nats(0.5 * (ratio_sum - log_sum - lx.dim() as f64)))
}

/// Lower bound on KL(p_y ‖ p_x) for `x ~ N(0, diag(lx))` and any `y` with
/// covariance `sy`: the diagonal divergence built from the diagonal of `sy`.
pub fn diagonal_lower_bound(lx: &DiagSpectrum, sy: &SpdMatrix) -> Result<Nats> {
    if lx.dim() != sy.dim() {
        return Err(Error::DimensionMismatch { expected: lx.dim(), found: sy.dim() });
    }
    kl_diagonal(lx, &sy.diagonal()?)
}

/// Exact Gaussian divergence from `N(0, diag(lx))`, its diagonal bound and the gap.
pub fn kl_gap_diagonal(lx: &DiagSpectrum, sy: &SpdMatrix) -> Result<GapReport> {
    let bound = diagonal_lower_bound(lx, sy)?;
    let kl_exact = kl_gaussian(&lx.to_matrix(), sy)?;
    Ok(GapReport::new(kl_exact, bound))
}

/// Differential entropy of `N(0, Σ)` given the factor of `Σ`.
pub fn gaussian_entropy(f: &CholFactor) -> Nats {
    Nats(f.dim() as f64 * HALF_LN_2PI_E + 0.5 * f.log_det())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_diag, random_spd, validate_spd};

    fn corr() -> SpdMatrix {
        validate_spd(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()
    }

    fn diag(v: &[f64]) -> DiagSpectrum {
        DiagSpectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn half_ln_2pi_e_constant() {
        let expect = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((HALF_LN_2PI_E - expect).abs() < 1e-15);
    }

    #[test]
    fn kl_of_identical_is_zero() {
        for seed in 0..20 {
            let a = random_spd(1 + seed as usize % 6, seed, 1e3).unwrap();
            assert_eq!(kl_gaussian(&a, &a).unwrap().0, 0.0);
        }
    }

    #[test]
    fn kl_identity_vs_correlated() {
        let kl = kl_gaussian(&SpdMatrix::identity(2).unwrap(), &corr()).unwrap().0;
        assert!((kl - (-0.5 * 0.75f64.ln())).abs() < 1e-15);
        assert!((kl - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn kl_diagonal_pair_matches_scalar_sum() {
        let sx = diag(&[1.0, 4.0]).to_matrix();
        let sy = diag(&[2.0, 8.0]).to_matrix();
        let kl = kl_gaussian(&sx, &sy).unwrap().0;
        let scalar = kl_scalar(1.0, 2.0).unwrap().0 + kl_scalar(4.0, 8.0).unwrap().0;
        assert!((kl - scalar).abs() < 1e-15);
        assert!((kl - 0.306853).abs() < 1e-6);
    }

    #[test]
    fn kl_dimension_mismatch() {
        let err = kl_gaussian(&SpdMatrix::identity(2).unwrap(), &SpdMatrix::identity(3).unwrap()).unwrap_err();
        assert_eq!(err.kind(), "DimensionMismatch");
    }

    #[test]
    fn kl_scalar_examples() {
        assert_eq!(kl_scalar(2.5, 2.5).unwrap().0, 0.0);
        assert!((kl_scalar(1.0, 4.0).unwrap().0 - 0.806853).abs() < 1e-6);
        assert!((kl_scalar(4.0, 1.0).unwrap().0 - 0.318147).abs() < 1e-6);
        assert_eq!(kl_scalar(0.0, 1.0).unwrap_err().kind(), "NonPositiveVariance");
        assert_eq!(kl_scalar(1.0, -1.0).unwrap_err().kind(), "NonPositiveVariance");
    }

    #[test]
    fn kl_diagonal_examples() {
        assert_eq!(kl_diagonal(&diag(&[3.0, 0.2]), &diag(&[3.0, 0.2])).unwrap().0, 0.0);
        let v = kl_diagonal(&diag(&[1.0, 1.0]), &diag(&[1.0, 4.0])).unwrap().0;
        assert!((v - kl_scalar(1.0, 4.0).unwrap().0).abs() < 1e-15);
        let v = kl_diagonal(&diag(&[1.0, 4.0]), &diag(&[2.0, 8.0])).unwrap().0;
        let g = kl_gaussian(&diag(&[1.0, 4.0]).to_matrix(), &diag(&[2.0, 8.0]).to_matrix()).unwrap().0;
        assert!((v - 0.306853).abs() < 1e-6);
        assert!((v - g).abs() < 1e-15);
        assert!(kl_diagonal(&diag(&[1.0]), &diag(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let lx = diag(&[1.0, 1.0]);
        assert_eq!(diagonal_lower_bound(&lx, &corr()).unwrap().0, 0.0);
        let sy = validate_spd(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let b = diagonal_lower_bound(&lx, &sy).unwrap().0;
        assert!((b - 0.5 * (2.0 - 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((b - 0.153426).abs() < 1e-6);
        let b2 = diagonal_lower_bound(&lx, &diag(&[2.0, 1.0]).to_matrix()).unwrap().0;
        assert_eq!(b, b2);
    }

    #[test]
    fn gap_examples() {
        let lx = diag(&[1.0, 1.0]);
        let g = kl_gap_diagonal(&lx, &diag(&[3.0, 0.5]).to_matrix()).unwrap();
        assert!(g.gap.abs() <= 1e-10);

        let g = kl_gap_diagonal(&lx, &corr()).unwrap();
        assert!((g.gap - 0.143841).abs() < 1e-6);
        assert_eq!(g.bound.0, 0.0);

        let sy = validate_spd(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let g = kl_gap_diagonal(&lx, &sy).unwrap();
        let direct = kl_gaussian(&SpdMatrix::identity(2).unwrap(), &sy).unwrap().0;
        assert_eq!(g.kl_exact.0, direct);
        assert!(g.gap > 0.0);
        // Gap equals ½ ln(Πσ²ᵢ / det Σy) = ½ ln(2 / 1.91).
        assert!((g.gap - 0.5 * (2.0f64 / 1.91).ln()).abs() < 1e-14);
    }

    #[test]
    fn gap_clamping() {
        let kl = Nats(1.0);
        let r = GapReport::new(kl, Nats(1.0 + 5e-11));
        assert!(r.clamped);
        assert_eq!(r.gap, 0.0);
        assert!(r.raw_gap < 0.0);
        let r = GapReport::new(kl, Nats(1.0 + 1e-6));
        assert!(!r.clamped);
        assert!(r.gap < -ROUNDOFF_TOL);
    }

    #[test]
    fn entropy_examples() {
        let f1 = cholesky(&SpdMatrix::identity(1).unwrap()).unwrap();
        assert!((gaussian_entropy(&f1).0 - 1.418939).abs() < 1e-6);
        let f2 = cholesky(&SpdMatrix::identity(2).unwrap()).unwrap();
        assert!((gaussian_entropy(&f2).0 - 2.837877).abs() < 1e-6);
        let e2 = std::f64::consts::E.powi(2);
        let f3 = cholesky(&diag(&[e2]).to_matrix()).unwrap();
        assert!((gaussian_entropy(&f3).0 - (HALF_LN_2PI_E + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn diagonal_equality_is_tight_at_extreme_scales() {
        for seed in 0..500 {
            let m = 1 + seed as usize % 8;
            let lx = random_diag(m, seed, 1e-3, 1e3).unwrap();
            let ly = random_diag(m, seed + 10_000, 1e-3, 1e3).unwrap();
            let g = kl_gap_diagonal(&lx, &ly.to_matrix()).unwrap();
            assert!(g.raw_gap.abs() <= 1e-10, "seed {seed}: {:?}", g);
        }
    }
}
