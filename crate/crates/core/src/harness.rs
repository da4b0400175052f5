//! Randomized property campaigns.
//!
//! Each check draws independent instances, evaluates the slack of one
//! inequality (and its equality case), and aggregates a [`PropertyReport`].
//! Trial `i` seeds its generator with `rng::derive(master_seed, i)`; trials run
//! in parallel and are reduced in index order, so reports do not depend on
//! thread scheduling.
//!
//! Closed-form checks (`p2`, `p3`) use an absolute tolerance of
//! [`CLOSED_FORM_TOL`] nats. Monte Carlo checks (`p1`, `c1`) fold a
//! [`MC_BAND`]-standard-error band into the slack and use tolerance zero.

use std::ops::RangeInclusive;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{build_matched_mixture, mc_kl, DensityModel};
use crate::kl::{diagonal_lower_bound, kl_gap_diagonal, kl_gaussian};
use crate::linalg::{random_diag_with, random_spd_with, DiagSpectrum, SpdMatrix};
use crate::rng;

pub const CLOSED_FORM_TOL: f64 = 1e-10;
pub const MC_BAND: f64 = 4.0;

/// Log-uniform range for randomly drawn variances.
pub const VARIANCE_RANGE: (f64, f64) = (1e-3, 1e3);
/// Largest condition target used by the Monte Carlo generators.
pub const MC_CONDITION_MAX: f64 = 1e4;
pub const MIN_MC_TRIAL_SAMPLES: usize = 10_000;

const WEIGHT_RANGE: (f64, f64) = (0.2, 0.8);
const SPREAD_RANGE: (f64, f64) = (0.05, 0.95);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proposition {
    P1,
    P2,
    P3,
    C1,
}

impl Proposition {
    pub const ALL: [Proposition; 4] = [Proposition::P1, Proposition::P2, Proposition::P3, Proposition::C1];

    pub fn as_str(self) -> &'static str {
        match self {
            Proposition::P1 => "p1",
            Proposition::P2 => "p2",
            Proposition::P3 => "p3",
            Proposition::C1 => "c1",
        }
    }
}

impl std::str::FromStr for Proposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(Proposition::P1),
            "p2" => Ok(Proposition::P2),
            "p3" => Ok(Proposition::P3),
            "c1" => Ok(Proposition::C1),
            other => Err(Error::InvalidArgument(format!("unknown proposition {other:?}"))),
        }
    }
}

/// Outcome of a property campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub proposition: Proposition,
    pub trials: usize,
    /// Trials where the inequality slack fell below the tolerance, or the
    /// equality case failed.
    pub violations: usize,
    /// Subset of `violations` caused by the equality case.
    pub equality_violations: usize,
    /// Smallest inequality slack observed, in nats.
    pub worst_margin: f64,
    /// Slacks in `[−tolerance, 0)`: floating-point noise, counted but not violations.
    pub roundoff_negatives: usize,
    pub config_digest: String,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    slack: f64,
    equality_ok: bool,
}

fn aggregate(
    proposition: Proposition,
    tolerance: f64,
    outcomes: Vec<TrialOutcome>,
    config_digest: String,
) -> PropertyReport {
    let mut violations = 0;
    let mut equality_violations = 0;
    let mut roundoff_negatives = 0;
    let mut worst_margin = f64::INFINITY;
    for o in &outcomes {
        let inequality_ok = o.slack >= -tolerance;
        if o.slack < 0.0 && inequality_ok {
            roundoff_negatives += 1;
        }
        if !o.equality_ok {
            equality_violations += 1;
        }
        if !inequality_ok || !o.equality_ok {
            violations += 1;
        }
        worst_margin = worst_margin.min(o.slack);
    }
    PropertyReport {
        proposition,
        trials: outcomes.len(),
        violations,
        equality_violations,
        worst_margin,
        roundoff_negatives,
        config_digest,
    }
}

fn run_trials<F>(trials: usize, master_seed: u64, trial: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(u64) -> Result<TrialOutcome> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    (0..trials as u64).into_par_iter().map(|i| trial(rng::derive(master_seed, i))).collect()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..hi)
}

fn random_variances(rng: &mut ChaCha8Rng, dim: usize) -> Result<DiagSpectrum> {
    random_diag_with(rng, dim, VARIANCE_RANGE.0, VARIANCE_RANGE.1)
}

/// Diagonal bound gap: `KL(N(0,Σy) ‖ N(0,Λx)) − bound ≥ 0`, with equality when
/// `Σy` is diagonal.
pub fn check_prop3(trials: usize, dim: usize, master_seed: u64, condition_target: f64) -> Result<PropertyReport> {
    let outcomes = run_trials(trials, master_seed, |seed| {
        let mut rng = rng::from_seed(seed);
        let lx = random_variances(&mut rng, dim)?;
        let sy = random_spd_with(&mut rng, dim, condition_target)?;
        let slack = kl_gap_diagonal(&lx, &sy)?.raw_gap;
        let diag_only = sy.diagonal()?.to_matrix();
        let eq_gap = kl_gap_diagonal(&lx, &diag_only)?.raw_gap;
        Ok(TrialOutcome { slack, equality_ok: eq_gap.abs() <= CLOSED_FORM_TOL })
    })?;
    let digest = format!(
        "p3 dim={dim} cond={condition_target:e} variances=log-uniform[{:e},{:e}] master_seed={master_seed}",
        VARIANCE_RANGE.0, VARIANCE_RANGE.1
    );
    Ok(aggregate(Proposition::P3, CLOSED_FORM_TOL, outcomes, digest))
}

/// Joint Gaussian divergence minus the sum of per-block divergences, where
/// `sx_blocks` are the independent blocks of `Σx` and each block of `Σy` is
/// its principal submatrix.
pub fn block_slack(sx_blocks: &[SpdMatrix], sy: &SpdMatrix) -> Result<f64> {
    let dims: Vec<usize> = sx_blocks.iter().map(SpdMatrix::dim).collect();
    let sx = SpdMatrix::block_diagonal(sx_blocks)?;
    let joint = kl_gaussian(&sx, sy)?.0;
    let marginals = sy.split_blocks(&dims)?;
    let mut sum = 0.0;
    for (bx, by) in sx_blocks.iter().zip(&marginals) {
        sum += kl_gaussian(bx, by)?.0;
    }
    Ok(joint - sum)
}

fn prop2_trial(rng: &mut ChaCha8Rng, block_dims: &[usize], condition_target: f64) -> Result<TrialOutcome> {
    let total: usize = block_dims.iter().sum();
    let sx_blocks = block_dims
        .iter()
        .map(|&d| random_spd_with(rng, d, condition_target))
        .collect::<Result<Vec<_>>>()?;
    let sy = random_spd_with(rng, total, condition_target)?;
    let slack = block_slack(&sx_blocks, &sy)?;
    let independent = sy.block_diagonal_part(block_dims)?;
    let eq = block_slack(&sx_blocks, &independent)?;
    Ok(TrialOutcome { slack, equality_ok: eq.abs() <= CLOSED_FORM_TOL })
}

fn check_block_dims(block_dims: &[usize]) -> Result<()> {
    if block_dims.len() < 2 || block_dims.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "need at least two non-empty blocks, got {block_dims:?}"
        )));
    }
    Ok(())
}

/// Block independence: the joint divergence from a block-independent `x`
/// dominates the sum of block divergences, with equality for block-independent `y`.
pub fn check_prop2(
    block_dims: &[usize],
    trials: usize,
    master_seed: u64,
    condition_target: f64,
) -> Result<PropertyReport> {
    check_block_dims(block_dims)?;
    let outcomes = run_trials(trials, master_seed, |seed| {
        prop2_trial(&mut rng::from_seed(seed), block_dims, condition_target)
    })?;
    let digest = format!("p2 blocks={block_dims:?} cond={condition_target:e} master_seed={master_seed}");
    Ok(aggregate(Proposition::P2, CLOSED_FORM_TOL, outcomes, digest))
}

/// Random composition of a total drawn from `total_dims` into 2–4 blocks.
pub fn random_block_dims(rng: &mut ChaCha8Rng, total_dims: &RangeInclusive<usize>) -> Vec<usize> {
    let total = rng.random_range(total_dims.clone());
    let blocks = rng.random_range(2..=total.min(4));
    // Choose `blocks - 1` distinct cut points in 1..total.
    let mut cuts: Vec<usize> = (1..total).collect();
    for i in 0..blocks - 1 {
        let j = rng.random_range(i..cuts.len());
        cuts.swap(i, j);
    }
    let mut chosen = cuts[..blocks - 1].to_vec();
    chosen.sort_unstable();
    let mut dims = Vec::with_capacity(blocks);
    let mut prev = 0;
    for c in chosen.into_iter().chain(std::iter::once(total)) {
        dims.push(c - prev);
        prev = c;
    }
    dims
}

/// [`check_prop2`] with a fresh random block structure (2–4 blocks, total
/// dimension drawn from `total_dims`) on every trial.
pub fn check_prop2_random(
    trials: usize,
    total_dims: RangeInclusive<usize>,
    master_seed: u64,
    condition_target: f64,
) -> Result<PropertyReport> {
    if *total_dims.start() < 2 || total_dims.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "block structures need total dimension at least 2, got {total_dims:?}"
        )));
    }
    let outcomes = run_trials(trials, master_seed, |seed| {
        let mut rng = rng::from_seed(seed);
        let dims = random_block_dims(&mut rng, &total_dims);
        prop2_trial(&mut rng, &dims, condition_target)
    })?;
    let digest = format!(
        "p2 blocks=random(2-4) total={}..={} cond={condition_target:e} master_seed={master_seed}",
        total_dims.start(),
        total_dims.end()
    );
    Ok(aggregate(Proposition::P2, CLOSED_FORM_TOL, outcomes, digest))
}

fn check_mc_args(trials: usize, dim: usize, n_samples: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if dim == 0 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if n_samples < MIN_MC_TRIAL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo checks need at least {MIN_MC_TRIAL_SAMPLES} samples, got {n_samples}"
        )));
    }
    Ok(())
}

/// Draws a non-Gaussian matched mixture with the given target covariance.
fn random_mixture(rng: &mut ChaCha8Rng, target: &SpdMatrix) -> Result<DensityModel> {
    let w = uniform(rng, WEIGHT_RANGE);
    let spread = uniform(rng, SPREAD_RANGE);
    build_matched_mixture(target, w, spread)
}

fn random_covariance(rng: &mut ChaCha8Rng, dim: usize) -> Result<SpdMatrix> {
    let cond = log_uniform(rng, 1.0, MC_CONDITION_MAX);
    random_spd_with(rng, dim, cond)
}

/// Gaussian-minimizer property: `KL(p_y ‖ p_x) ≥ KL(p_{y^G} ‖ p_x)` for a
/// non-Gaussian `y` and its Gaussian `y^G` with the same covariance.
pub fn check_prop1(trials: usize, dim: usize, master_seed: u64, n_samples: usize) -> Result<PropertyReport> {
    check_mc_args(trials, dim, n_samples)?;
    let outcomes = run_trials(trials, master_seed, |seed| {
        let mut rng = rng::from_seed(seed);
        let sx = random_covariance(&mut rng, dim)?;
        let target = random_covariance(&mut rng, dim)?;
        let y = random_mixture(&mut rng, &target)?;
        let x = DensityModel::gaussian(&sx)?;
        let gaussian_floor = kl_gaussian(&sx, &target)?.0;

        let est = mc_kl(&y, &x, n_samples, rng::derive(seed, 1))?;
        let slack = est.value.0 - gaussian_floor + MC_BAND * est.std_error;

        // Equality case: y Gaussian.
        let y_gauss = DensityModel::gaussian(&target)?;
        let eq = mc_kl(&y_gauss, &x, n_samples, rng::derive(seed, 2))?;
        Ok(TrialOutcome { slack, equality_ok: eq.agrees_with(gaussian_floor, MC_BAND) })
    })?;
    let digest = format!(
        "p1 dim={dim} n_samples={n_samples} cond=log-uniform[1,{MC_CONDITION_MAX:e}] w=[{},{}] spread=[{},{}] master_seed={master_seed}",
        WEIGHT_RANGE.0, WEIGHT_RANGE.1, SPREAD_RANGE.0, SPREAD_RANGE.1
    );
    Ok(aggregate(Proposition::P1, 0.0, outcomes, digest))
}

/// Main bound: for diagonal Gaussian `x` and non-Gaussian `y`, the divergence
/// dominates the diagonal lower bound; equality for Gaussian `y` with diagonal covariance.
pub fn check_c1(trials: usize, dim: usize, master_seed: u64, n_samples: usize) -> Result<PropertyReport> {
    check_mc_args(trials, dim, n_samples)?;
    let outcomes = run_trials(trials, master_seed, |seed| {
        let mut rng = rng::from_seed(seed);
        let lx = random_variances(&mut rng, dim)?;
        let target = random_covariance(&mut rng, dim)?;
        let y = random_mixture(&mut rng, &target)?;
        let x = DensityModel::gaussian(&lx.to_matrix())?;
        let bound = diagonal_lower_bound(&lx, &target)?.0;

        let est = mc_kl(&y, &x, n_samples, rng::derive(seed, 1))?;
        let slack = est.value.0 - bound + MC_BAND * est.std_error;

        let ly = random_variances(&mut rng, dim)?.to_matrix();
        let eq_bound = diagonal_lower_bound(&lx, &ly)?.0;
        let eq = mc_kl(&DensityModel::gaussian(&ly)?, &x, n_samples, rng::derive(seed, 2))?;
        Ok(TrialOutcome { slack, equality_ok: eq.agrees_with(eq_bound, MC_BAND) })
    })?;
    let digest = format!(
        "c1 dim={dim} n_samples={n_samples} variances=log-uniform[{:e},{:e}] cond=log-uniform[1,{MC_CONDITION_MAX:e}] master_seed={master_seed}",
        VARIANCE_RANGE.0, VARIANCE_RANGE.1
    );
    Ok(aggregate(Proposition::C1, 0.0, outcomes, digest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kl::{kl_gap_diagonal, kl_gaussian};
    use crate::linalg::{random_diag, random_spd, validate_spd};

    #[test]
    fn prop3_small_run() {
        let r = check_prop3(500, 4, 1, 100.0).unwrap();
        assert_eq!(r.trials, 500);
        assert_eq!(r.violations, 0, "{r:?}");
        assert!(r.worst_margin >= -CLOSED_FORM_TOL);
    }

    #[test]
    fn prop3_dim_one_has_zero_gap() {
        for i in 0..200 {
            let mut rng = rng::from_seed(rng::derive(5, i));
            let lx = random_variances(&mut rng, 1).unwrap();
            let sy = random_spd_with(&mut rng, 1, 1e4).unwrap();
            let g = kl_gap_diagonal(&lx, &sy).unwrap();
            assert!(g.raw_gap.abs() <= 1e-12, "{g:?}");
        }
        let r = check_prop3(200, 1, 5, 1e4).unwrap();
        assert!(r.worst_margin.abs() <= 1e-12);
    }

    #[test]
    fn prop3_rejects_zero_trials() {
        assert!(check_prop3(0, 4, 1, 100.0).is_err());
    }

    #[test]
    fn reports_are_reproducible() {
        assert_eq!(check_prop3(300, 5, 9, 1e3).unwrap(), check_prop3(300, 5, 9, 1e3).unwrap());
        assert_eq!(check_prop2(&[2, 3], 50, 3, 1e2).unwrap(), check_prop2(&[2, 3], 50, 3, 1e2).unwrap());
    }

    #[test]
    fn block_slack_worked_example() {
        let sy = validate_spd(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let one = SpdMatrix::identity(1).unwrap();
        let s = block_slack(&[one.clone(), one], &sy).unwrap();
        assert!((s - (-0.5 * 0.75f64.ln())).abs() < 1e-15);
        assert!(s > 0.0);
    }

    #[test]
    fn block_slack_equality_case() {
        let blocks = [random_spd(2, 1, 10.0).unwrap(), random_spd(3, 2, 10.0).unwrap()];
        let sy = random_spd(5, 3, 10.0).unwrap().block_diagonal_part(&[2, 3]).unwrap();
        assert!(block_slack(&blocks, &sy).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn prop2_fixed_blocks() {
        let r = check_prop2(&[2, 3], 1000, 7, 1e4).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
        assert!(check_prop2(&[4], 10, 1, 10.0).is_err());
    }

    #[test]
    fn random_block_dims_are_valid() {
        let mut rng = rng::from_seed(1);
        for _ in 0..1000 {
            let dims = random_block_dims(&mut rng, &(2..=8));
            let total: usize = dims.iter().sum();
            assert!((2..=4).contains(&dims.len()), "{dims:?}");
            assert!((2..=8).contains(&total));
            assert!(dims.iter().all(|&d| d >= 1));
        }
        assert_eq!(random_block_dims(&mut rng, &(2..=2)), vec![1, 1]);
    }

    #[test]
    fn prop1_small_run() {
        let r = check_prop1(8, 2, 3, 20_000).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
        assert!(check_prop1(8, 2, 3, 9_999).is_err());
    }

    #[test]
    fn c1_small_run() {
        let r = check_c1(8, 2, 9, 20_000).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
    }

    #[test]
    fn c1_mixture_on_reference_covariance_is_strictly_positive() {
        let lx = random_diag(2, 4, 0.5, 2.0).unwrap();
        let sx = lx.to_matrix();
        assert_eq!(diagonal_lower_bound(&lx, &sx).unwrap().0, 0.0);
        let y = build_matched_mixture(&sx, 0.5, 0.6).unwrap();
        let est = mc_kl(&y, &DensityModel::gaussian(&sx).unwrap(), 200_000, 1).unwrap();
        assert!(est.value.0 >= -MC_BAND * est.std_error);
        assert!(est.value.0 - MC_BAND * est.std_error > 0.0, "{est:?}");
    }

    #[test]
    fn c1_slack_decomposes_for_gaussian_y() {
        // With y Gaussian, the Monte Carlo term is replaced by its closed form:
        // slack = (KL(y‖x) − KL(y^G‖x)) + gap = 0 + gap.
        for seed in 0..100 {
            let dim = 1 + seed as usize % 6;
            let lx = random_diag(dim, seed, 1e-3, 1e3).unwrap();
            let sy = random_spd(dim, seed + 1000, 1e3).unwrap();
            let kl_y = kl_gaussian(&lx.to_matrix(), &sy).unwrap().0;
            let kl_yg = kl_y;
            let slack_c1 = kl_y - diagonal_lower_bound(&lx, &sy).unwrap().0;
            let prop1_slack = kl_y - kl_yg;
            let gap = kl_gap_diagonal(&lx, &sy).unwrap().raw_gap;
            assert!((slack_c1 - (prop1_slack + gap)).abs() <= 1e-9);
        }
    }

    #[test]
    fn report_json_fields() {
        let r = check_prop3(10, 2, 1, 10.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["proposition", "trials", "violations", "worst_margin", "config_digest"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["proposition"], "p3");
    }
}
