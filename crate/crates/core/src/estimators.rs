//! Exact-density models, samplers and a Monte Carlo divergence estimator.
//!
//! Two families are provided: zero-mean Gaussians and zero-mean two-component
//! Gaussian mixtures. Both have closed-form log-densities, which lets
//! [`mc_kl`] evaluate the divergence integral directly as a sample average of
//! `ln p_y(u) − ln p_x(u)` under `u ~ p_y`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kl::Nats;
use crate::linalg::{cholesky, CholFactor, SpdMatrix};
use crate::rng;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Smallest sample count accepted by [`mc_kl`].
pub const MIN_MC_SAMPLES: usize = 100;

/// Tolerance of the m = 1 normalization check performed at construction.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gaussian,
    TwoComponentMixture,
}

#[derive(Debug, Clone)]
struct Component {
    covariance: SpdMatrix,
    factor: CholFactor,
}

impl Component {
    fn new(covariance: SpdMatrix) -> Result<Self> {
        let factor = cholesky(&covariance)?;
        Ok(Component { covariance, factor })
    }

    fn log_density(&self, u: &[f64], scratch: &mut [f64]) -> f64 {
        scratch.copy_from_slice(u);
        let q = self.factor.mahalanobis_sq_in_place(scratch);
        -(self.factor.dim() as f64) * HALF_LN_2PI - 0.5 * self.factor.log_det() - 0.5 * q
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, z: &mut [f64], out: &mut [f64]) {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        self.factor.mul_lower_into(z, out);
    }
}

/// A zero-mean distribution with an exact log-density and a sampler.
#[derive(Debug, Clone)]
pub struct DensityModel {
    inner: Model,
}

#[derive(Debug, Clone)]
enum Model {
    Gaussian(Component),
    Mixture {
        weight: f64,
        first: Component,
        second: Component,
        covariance: SpdMatrix,
    },
}

impl DensityModel {
    /// `N(0, covariance)`.
    pub fn gaussian(covariance: &SpdMatrix) -> Result<Self> {
        let model = DensityModel { inner: Model::Gaussian(Component::new(covariance.clone())?) };
        model.check_normalization()?;
        Ok(model)
    }

    /// `w·N(0, Σ₁) + (1−w)·N(0, Σ₂)`, with overall covariance `wΣ₁ + (1−w)Σ₂`.
    pub fn mixture(weight: f64, first: &SpdMatrix, second: &SpdMatrix) -> Result<Self> {
        if !(weight > 0.0 && weight < 1.0) {
            return Err(Error::InvalidWeight(weight));
        }
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch { expected: first.dim(), found: second.dim() });
        }
        let entries = first
            .as_slice()
            .iter()
            .zip(second.as_slice())
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        let covariance = SpdMatrix::from_row_major(first.dim(), entries)?;
        let model = DensityModel {
            inner: Model::Mixture {
                weight,
                first: Component::new(first.clone())?,
                second: Component::new(second.clone())?,
                covariance,
            },
        };
        model.check_normalization()?;
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        match self.inner {
            Model::Gaussian(_) => ModelKind::Gaussian,
            Model::Mixture { .. } => ModelKind::TwoComponentMixture,
        }
    }

    pub fn dim(&self) -> usize {
        self.covariance().dim()
    }

    /// Overall covariance `E[u uᵀ]`.
    pub fn covariance(&self) -> &SpdMatrix {
        match &self.inner {
            Model::Gaussian(c) => &c.covariance,
            Model::Mixture { covariance, .. } => covariance,
        }
    }

    /// Mixture weight of the first component; `None` for a Gaussian.
    pub fn weight(&self) -> Option<f64> {
        match &self.inner {
            Model::Gaussian(_) => None,
            Model::Mixture { weight, .. } => Some(*weight),
        }
    }

    /// Component covariances; a Gaussian has exactly one.
    pub fn component_covariances(&self) -> Vec<&SpdMatrix> {
        match &self.inner {
            Model::Gaussian(c) => vec![&c.covariance],
            Model::Mixture { first, second, .. } => vec![&first.covariance, &second.covariance],
        }
    }

    /// Exact `ln p(point)`.
    pub fn log_density(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: point.len() });
        }
        let mut scratch = vec![0.0; point.len()];
        Ok(self.log_density_unchecked(point, &mut scratch))
    }

    fn log_density_unchecked(&self, u: &[f64], scratch: &mut [f64]) -> f64 {
        match &self.inner {
            Model::Gaussian(c) => c.log_density(u, scratch),
            Model::Mixture { weight, first, second, .. } => {
                let a = weight.ln() + first.log_density(u, scratch);
                let b = (1.0 - weight).ln() + second.log_density(u, scratch);
                log_add_exp(a, b)
            }
        }
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, z: &mut [f64], out: &mut [f64]) {
        match &self.inner {
            Model::Gaussian(c) => c.draw_into(rng, z, out),
            Model::Mixture { weight, first, second, .. } => {
                let pick_first = rng.random::<f64>() < *weight;
                if pick_first {
                    first.draw_into(rng, z, out)
                } else {
                    second.draw_into(rng, z, out)
                }
            }
        }
    }

    /// `n` independent draws, one row per draw.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let m = self.dim();
        let mut rng = rng::from_seed(seed);
        let mut z = vec![0.0; m];
        (0..n)
            .map(|_| {
                let mut row = vec![0.0; m];
                self.draw_into(&mut rng, &mut z, &mut row);
                row
            })
            .collect()
    }

    /// For m = 1, integrates the density numerically and rejects the model
    /// if the mass differs from 1 by more than [`NORMALIZATION_TOL`].
    fn check_normalization(&self) -> Result<()> {
        if self.dim() != 1 {
            return Ok(());
        }
        let sigma = self
            .component_covariances()
            .iter()
            .map(|c| c.get(0, 0))
            .fold(0.0f64, f64::max)
            .sqrt();
        let mass = simpson(|u| self.log_density_unchecked(&[u], &mut [0.0]).exp(), -40.0 * sigma, 40.0 * sigma, 40_000);
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidArgument(format!("density integrates to {mass}, not 1")));
        }
        Ok(())
    }
}

/// Composite Simpson rule with `intervals` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `ln(eᵃ + eᵇ)` with the larger exponent factored out.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Zero-mean mixture whose overall covariance is exactly `target`.
///
/// Components are `(1 − spread)·target` with weight `w` and
/// `(1 + spread·w/(1−w))·target` with weight `1 − w`.
pub fn build_matched_mixture(target: &SpdMatrix, w: f64, spread: f64) -> Result<DensityModel> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::InvalidWeight(w));
    }
    if !(spread > 0.0) {
        return Err(Error::InvalidSpread(spread));
    }
    let shrink = 1.0 - spread;
    let grow = 1.0 + spread * w / (1.0 - w);
    for factor in [shrink, grow] {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::SpreadTooLarge { spread, factor });
        }
    }
    DensityModel::mixture(w, &target.scaled(shrink)?, &target.scaled(grow)?)
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: Nats,
    /// Sample standard deviation of the summand over `√n_samples`.
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Whether `target` lies within `k` standard errors of the estimate.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.value.0 - target).abs() <= k * self.std_error
    }
}

/// Mean and sample standard error of a stream, via Welford's update.
#[derive(Default)]
struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
    }
}

/// Sample-average estimate of KL(p_y ‖ p_x) from `n` draws of `py`.
pub fn mc_kl(py: &DensityModel, px: &DensityModel, n: usize, seed: u64) -> Result<McEstimate> {
    if py.dim() != px.dim() {
        return Err(Error::DimensionMismatch { expected: py.dim(), found: px.dim() });
    }
    if n < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!("mc_kl needs at least {MIN_MC_SAMPLES} samples, got {n}")));
    }
    let m = py.dim();
    let mut rng = rng::from_seed(seed);
    let (mut z, mut u, mut scratch) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut acc = Running::default();
    for _ in 0..n {
        py.draw_into(&mut rng, &mut z, &mut u);
        let ratio = py.log_density_unchecked(&u, &mut scratch) - px.log_density_unchecked(&u, &mut scratch);
        acc.push(ratio);
    }
    Ok(McEstimate { value: Nats(acc.mean), std_error: acc.std_error(), n_samples: n, seed })
}

/// Sample-average estimate of the differential entropy `−E ln p(u)`.
pub fn mc_entropy(model: &DensityModel, n: usize, seed: u64) -> Result<McEstimate> {
    if n < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!("mc_entropy needs at least {MIN_MC_SAMPLES} samples, got {n}")));
    }
    let m = model.dim();
    let mut rng = rng::from_seed(seed);
    let (mut z, mut u, mut scratch) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut acc = Running::default();
    for _ in 0..n {
        model.draw_into(&mut rng, &mut z, &mut u);
        acc.push(-model.log_density_unchecked(&u, &mut scratch));
    }
    Ok(McEstimate { value: Nats(acc.mean), std_error: acc.std_error(), n_samples: n, seed })
}

/// `(1/n) Σ uᵢ uᵢᵀ`, row-major; the covariance estimate for zero-mean draws.
pub fn second_moment(samples: &[Vec<f64>]) -> Vec<f64> {
    let m = samples.first().map_or(0, Vec::len);
    let mut out = vec![0.0; m * m];
    for s in samples {
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] += s[i] * s[j];
            }
        }
    }
    let n = samples.len().max(1) as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}
