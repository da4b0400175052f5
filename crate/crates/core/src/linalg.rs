//! Dense symmetric positive-definite kernels.
//!
//! Matrices are stored row-major in a flat `Vec<f64>`. Positive definiteness is
//! certified by a square-root-free `L D Lᵀ` factorization; the conventional
//! Cholesky factor `L·diag(√d)` is derived from it. Keeping the pivots `d`
//! around means a diagonal covariance factors without any rounding at all,
//! which lets the matrix and per-coordinate divergence paths agree bit for
//! bit on diagonal inputs.
//!
//! No routine here forms an explicit inverse. Everything that needs `Σ⁻¹`
//! goes through unit-triangular solves and pivot divisions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 512;

/// Relative asymmetry accepted (and averaged away) by [`validate_spd`].
pub const SYMMETRY_TOL: f64 = 1e-8;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::UnsupportedDimension(dim));
    }
    Ok(())
}

fn ensure_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A symmetric positive-definite matrix.
///
/// Construction always goes through a factorization attempt, so holding an
/// `SpdMatrix` means the entries are exactly symmetric and the factorization
/// succeeded once.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SpdMatrix {
    /// Builds from row-major entries, applying the same checks as [`validate_spd`].
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        let mut entries = entries;
        for i in 0..dim {
            for j in 0..dim {
                let v = entries[i * dim + j];
                if !v.is_finite() {
                    return Err(Error::NonFinite { i, j, value: v });
                }
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                let scale = 1f64.max(a.abs()).max(b.abs());
                let relative = (a - b).abs() / scale;
                if relative > SYMMETRY_TOL {
                    return Err(Error::AsymmetryExceedsTolerance { i, j, relative });
                }
                if a != b {
                    let avg = 0.5 * (a + b);
                    entries[i * dim + j] = avg;
                    entries[j * dim + i] = avg;
                }
            }
        }
        let m = SpdMatrix { dim, entries };
        cholesky(&m)?;
        Ok(m)
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Ok(SpdMatrix { dim, entries })
    }

    /// Diagonal matrix carrying the given variances.
    pub fn from_diag(diag: &DiagSpectrum) -> Self {
        let dim = diag.dim();
        let mut entries = vec![0.0; dim * dim];
        for (i, v) in diag.variances().iter().enumerate() {
            entries[i * dim + i] = *v;
        }
        SpdMatrix { dim, entries }
    }

    /// Block-diagonal matrix assembled from SPD blocks.
    pub fn block_diagonal(blocks: &[SpdMatrix]) -> Result<Self> {
        let dim: usize = blocks.iter().map(|b| b.dim).sum();
        check_dim(dim)?;
        let mut entries = vec![0.0; dim * dim];
        let mut offset = 0;
        for b in blocks {
            for i in 0..b.dim {
                for j in 0..b.dim {
                    entries[(offset + i) * dim + offset + j] = b.get(i, j);
                }
            }
            offset += b.dim;
        }
        Ok(SpdMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// The diagonal terms as a spectrum of variances.
    pub fn diagonal(&self) -> Result<DiagSpectrum> {
        DiagSpectrum::new((0..self.dim).map(|i| self.get(i, i)).collect())
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j) == 0.0))
    }

    /// Principal submatrix on the contiguous index range `start..start + len`.
    pub fn principal_block(&self, start: usize, len: usize) -> Result<SpdMatrix> {
        if len == 0 || start + len > self.dim {
            return Err(Error::InvalidArgument(format!(
                "block {start}..{} outside dimension {}",
                start + len,
                self.dim
            )));
        }
        let mut entries = Vec::with_capacity(len * len);
        for i in start..start + len {
            entries.extend_from_slice(&self.entries[i * self.dim + start..i * self.dim + start + len]);
        }
        // A principal submatrix of an SPD matrix is SPD; re-certify anyway.
        SpdMatrix::from_row_major(len, entries)
    }

    /// Restriction to the block-diagonal pattern given by `block_dims`.
    pub fn block_diagonal_part(&self, block_dims: &[usize]) -> Result<SpdMatrix> {
        let blocks = self.split_blocks(block_dims)?;
        SpdMatrix::block_diagonal(&blocks)
    }

    /// Principal diagonal blocks for the partition `block_dims`.
    pub fn split_blocks(&self, block_dims: &[usize]) -> Result<Vec<SpdMatrix>> {
        let total: usize = block_dims.iter().sum();
        ensure_same_dim(self.dim, total)?;
        let mut start = 0;
        let mut out = Vec::with_capacity(block_dims.len());
        for &len in block_dims {
            out.push(self.principal_block(start, len)?);
            start += len;
        }
        Ok(out)
    }

    /// `c · Σ` for a scalar `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<SpdMatrix> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {c} must be positive")));
        }
        SpdMatrix::from_row_major(self.dim, self.entries.iter().map(|v| v * c).collect())
    }

    /// Congruence `A Σ Aᵀ` with a row-major square `A`.
    pub fn congruence(&self, a: &[f64]) -> Result<SpdMatrix> {
        let n = self.dim;
        ensure_same_dim(n * n, a.len())?;
        // t = A Σ
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    t[i * n + j] += aik * self.get(k, j);
                }
            }
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| t[i * n + k] * a[j * n + k]).sum();
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        SpdMatrix::from_row_major(n, out)
    }
}

/// Checks a raw square array for symmetry and positive definiteness.
///
/// Entries within [`SYMMETRY_TOL`] relative asymmetry are replaced by the
/// average `(a + aᵀ)/2`; anything larger is rejected rather than repaired.
pub fn validate_spd(raw: &[Vec<f64>]) -> Result<SpdMatrix> {
    let dim = raw.len();
    if dim == 0 {
        return Err(Error::EmptyMatrix);
    }
    for (row, r) in raw.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::NotSquare { rows: dim, row, cols: r.len() });
        }
    }
    SpdMatrix::from_row_major(dim, raw.iter().flatten().copied().collect())
}

/// Strictly positive variances `σ²(1), …, σ²(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagSpectrum {
    variances: Vec<f64>,
}

impl DiagSpectrum {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        check_dim(variances.len())?;
        for (index, &value) in variances.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveVariance { index, value });
            }
        }
        Ok(DiagSpectrum { variances })
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn to_matrix(&self) -> SpdMatrix {
        SpdMatrix::from_diag(self)
    }
}

/// Factorization `Σ = L Lᵀ` of an [`SpdMatrix`].
///
/// Internally stored as `Σ = U D Uᵀ` with `U` unit lower triangular and `D`
/// the pivots, so `L = U·diag(√d)` and `log det Σ = Σ ln dᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    dim: usize,
    unit_lower: Vec<f64>,
    pivots: Vec<f64>,
    lower: Vec<f64>,
    log_det: f64,
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)` of the lower-triangular factor `L`.
    #[inline]
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// Row-major `L`.
    pub fn lower_slice(&self) -> &[f64] {
        &self.lower
    }

    pub fn lower_rows(&self) -> Vec<Vec<f64>> {
        self.lower.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Pivots `d` of the `U D Uᵀ` form (equal to `Lᵢᵢ²`).
    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    /// Natural log of `det Σ`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// In place `b ← U⁻¹ b` (unit lower solve).
    fn solve_unit_lower(&self, b: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let row = &self.unit_lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] -= s;
        }
    }

    /// `uᵀ Σ⁻¹ u = ‖L⁻¹ u‖²`.
    pub fn mahalanobis_sq(&self, u: &[f64]) -> Result<f64> {
        ensure_same_dim(self.dim, u.len())?;
        let mut w = u.to_vec();
        Ok(self.mahalanobis_sq_in_place(&mut w))
    }

    /// Same as [`Self::mahalanobis_sq`], overwriting `buf` (length `dim`).
    pub fn mahalanobis_sq_in_place(&self, buf: &mut [f64]) -> f64 {
        self.solve_unit_lower(buf);
        buf.iter().zip(&self.pivots).map(|(x, d)| x * x / d).sum()
    }

    /// `L⁻¹ u`.
    pub fn solve_lower(&self, u: &[f64]) -> Result<Vec<f64>> {
        ensure_same_dim(self.dim, u.len())?;
        let mut w = u.to_vec();
        self.solve_unit_lower(&mut w);
        for (x, d) in w.iter_mut().zip(&self.pivots) {
            *x /= d.sqrt();
        }
        Ok(w)
    }

    /// Writes `L z` into `out`.
    pub fn mul_lower_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = self.lower[i * n..i * n + i + 1].iter().zip(z).map(|(l, x)| l * x).sum();
        }
    }

    /// `L Lᵀ`, the matrix this factor was built from (up to roundoff).
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| self.lower(i, k) * self.lower(j, k)).sum();
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }
}

/// Factors `a` as `L Lᵀ`.
///
/// Fails with `NotPositiveDefinite` as soon as a pivot is not strictly
/// positive, which is how positive definiteness is decided everywhere.
pub fn cholesky(a: &SpdMatrix) -> Result<CholFactor> {
    let n = a.dim;
    let mut unit_lower = vec![0.0; n * n];
    let mut pivots = vec![0.0; n];
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            let l = unit_lower[j * n + k];
            d -= l * l * pivots[k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        pivots[j] = d;
        unit_lower[j * n + j] = 1.0;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= unit_lower[i * n + k] * unit_lower[j * n + k] * pivots[k];
            }
            unit_lower[i * n + j] = s / d;
        }
    }
    let roots: Vec<f64> = pivots.iter().map(|d| d.sqrt()).collect();
    let mut lower = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            lower[i * n + j] = unit_lower[i * n + j] * roots[j];
        }
    }
    let log_det = pivots.iter().map(|d| d.ln()).sum();
    Ok(CholFactor { dim: n, unit_lower, pivots, lower, log_det })
}

/// `tr(Σy Σx⁻¹)` by triangular solves against the factor of `Σx`.
pub fn trace_ratio(sy: &SpdMatrix, fx: &CholFactor) -> Result<f64> {
    ensure_same_dim(fx.dim, sy.dim)?;
    trace_ratio_factored(&cholesky(sy)?, fx)
}

/// `tr(Σy Σx⁻¹)` from both factors.
///
/// With `Σ = U D Uᵀ`, `tr(Σy Σx⁻¹) = Σᵢ [W Dy Wᵀ]ᵢᵢ / dxᵢ` where `W = Ux⁻¹ Uy`.
/// Unit-triangular solves produce exact zeros and ones where the factors
/// coincide, so identical inputs give exactly `m`, and a diagonal pair (or
/// m = 1) reduces to the plain ratios `Σy[i][i] / Σx[i][i]`.
pub fn trace_ratio_factored(fy: &CholFactor, fx: &CholFactor) -> Result<f64> {
    let n = fx.dim;
    ensure_same_dim(n, fy.dim)?;
    // W = Ux⁻¹ Uy, row-major; lower triangular.
    let mut w = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = 0.0);
        for i in j..n {
            col[i] = fy.unit_lower[i * n + j];
        }
        fx.solve_unit_lower(&mut col);
        for i in 0..n {
            w[i * n + j] = col[i];
        }
    }
    let mut trace = 0.0;
    for i in 0..n {
        let row = &w[i * n..i * n + i + 1];
        let m_ii: f64 = row.iter().zip(&fy.pivots).map(|(x, d)| x * x * d).sum();
        trace += m_ii / fx.pivots[i];
    }
    Ok(trace)
}

/// Haar-distributed random orthogonal matrix (row-major) via Gram-Schmidt
/// with reorthogonalization on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    // Columns stored contiguously while orthogonalizing.
    let mut cols: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for j in 0..dim {
        for _pass in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let q = &done[k];
                let v = &mut rest[0];
                let p: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    let mut q = vec![0.0; dim * dim];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..dim {
            q[i * dim + j] = c[i];
        }
    }
    q
}

/// Random SPD matrix drawn from an existing generator.
///
/// Eigenvalues are log-uniform on `[1/√κ, √κ]` with both endpoints pinned
/// when `dim ≥ 2`, then conjugated by a random orthogonal matrix.
pub fn random_spd_with(rng: &mut ChaCha8Rng, dim: usize, condition_target: f64) -> Result<SpdMatrix> {
    check_dim(dim)?;
    if !(condition_target >= 1.0 && condition_target.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "condition target {condition_target} must be a finite value >= 1"
        )));
    }
    let half_log = 0.5 * condition_target.ln();
    let mut eig: Vec<f64> = (0..dim).map(|_| (rng.random_range(-1.0..=1.0) * half_log).exp()).collect();
    if dim >= 2 {
        eig[0] = (-half_log).exp();
        eig[1] = half_log.exp();
    }
    let q = random_orthogonal(rng, dim);
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = (0..dim).map(|k| q[i * dim + k] * eig[k] * q[j * dim + k]).sum();
            entries[i * dim + j] = v;
            entries[j * dim + i] = v;
        }
    }
    SpdMatrix::from_row_major(dim, entries)
}

/// Deterministic random SPD matrix for `(dim, seed, condition_target)`.
pub fn random_spd(dim: usize, seed: u64, condition_target: f64) -> Result<SpdMatrix> {
    random_spd_with(&mut rng::from_seed(seed), dim, condition_target)
}

/// Variances drawn log-uniformly from `[min_var, max_var]`.
pub fn random_diag_with(rng: &mut ChaCha8Rng, dim: usize, min_var: f64, max_var: f64) -> Result<DiagSpectrum> {
    if !(min_var > 0.0 && max_var >= min_var && max_var.is_finite()) {
        return Err(Error::InvalidArgument(format!("variance range [{min_var}, {max_var}]")));
    }
    let (lo, hi) = (min_var.ln(), max_var.ln());
    DiagSpectrum::new((0..dim).map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp()).collect())
}

/// Deterministic log-uniform [`DiagSpectrum`].
pub fn random_diag(dim: usize, seed: u64, min_var: f64, max_var: f64) -> Result<DiagSpectrum> {
    random_diag_with(&mut rng::from_seed(seed), dim, min_var, max_var)
}
