//! Independent oracles: numerical quadrature and Monte Carlo, written
//! against the density formulas directly rather than the library kernels.

use klmin::{
    build_matched_mixture, cholesky, gaussian_entropy, kl_diagonal, kl_gaussian, kl_scalar, mc_entropy, mc_kl,
    random_spd, validate_spd, DensityModel, DiagSpectrum, SpdMatrix,
};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn normal_log_pdf(u: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - u * u / (2.0 * var)
}

/// ∫ p_y ln(p_y / p_x) over [−40σ, 40σ], σ the larger standard deviation.
fn quadrature_kl(var_x: f64, var_y: f64) -> f64 {
    let s = var_x.max(var_y).sqrt();
    simpson(
        |u| {
            let ly = normal_log_pdf(u, var_y);
            ly.exp() * (ly - normal_log_pdf(u, var_x))
        },
        -40.0 * s,
        40.0 * s,
        200_000,
    )
}

fn quadrature_entropy(var: f64) -> f64 {
    let s = var.sqrt();
    simpson(
        |u| {
            let l = normal_log_pdf(u, var);
            -l.exp() * l
        },
        -40.0 * s,
        40.0 * s,
        200_000,
    )
}

#[test]
fn scalar_kl_matches_quadrature() {
    for (vx, vy) in [(1.0, 4.0), (4.0, 1.0), (1.0, 2.0), (0.3, 7.0), (2.0, 2.0)] {
        let q = quadrature_kl(vx, vy);
        let k = kl_scalar(vx, vy).unwrap().0;
        assert!((q - k).abs() < 1e-8, "({vx},{vy}): quadrature {q} vs {k}");
    }
    assert!((quadrature_kl(1.0, 4.0) - 0.806853).abs() < 1e-6);
    assert!((quadrature_kl(4.0, 1.0) - 0.318147).abs() < 1e-6);
}

#[test]
fn lower_bound_value_matches_quadrature() {
    // diag(Σy) = (2, 1) against unit variances: only the first coordinate contributes.
    let q = quadrature_kl(1.0, 2.0) + quadrature_kl(1.0, 1.0);
    let sy = validate_spd(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
    let lx = DiagSpectrum::new(vec![1.0, 1.0]).unwrap();
    let b = klmin::diagonal_lower_bound(&lx, &sy).unwrap().0;
    assert!((q - b).abs() < 1e-8);
    assert!((q - 0.153426).abs() < 1e-6);
}

#[test]
fn entropy_matches_quadrature() {
    let f = cholesky(&SpdMatrix::identity(1).unwrap()).unwrap();
    let q = quadrature_entropy(1.0);
    assert!((gaussian_entropy(&f).0 - q).abs() < 1e-9);
    assert!((q - 1.418939).abs() < 1e-6);

    let e2 = std::f64::consts::E.powi(2);
    let f = cholesky(&DiagSpectrum::new(vec![e2]).unwrap().to_matrix()).unwrap();
    let q = quadrature_entropy(e2);
    assert!((gaussian_entropy(&f).0 - q).abs() < 1e-9);
    assert!((q - (1.418939 + 1.0)).abs() < 1e-6);
}

#[test]
fn entropy_matches_monte_carlo_in_two_dims() {
    let i2 = SpdMatrix::identity(2).unwrap();
    let est = mc_entropy(&DensityModel::gaussian(&i2).unwrap(), 1_000_000, 17).unwrap();
    let exact = gaussian_entropy(&cholesky(&i2).unwrap()).0;
    assert!((exact - 2.837877).abs() < 1e-6);
    assert!(est.agrees_with(exact, 4.0), "{est:?} vs {exact}");
}

#[test]
fn worked_gaussian_pair_matches_monte_carlo() {
    let sy = validate_spd(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let i2 = SpdMatrix::identity(2).unwrap();
    let est = mc_kl(&DensityModel::gaussian(&sy).unwrap(), &DensityModel::gaussian(&i2).unwrap(), 1_000_000, 5).unwrap();
    assert!(est.agrees_with(0.143841, 4.0), "{est:?}");
    assert!(est.agrees_with(kl_gaussian(&i2, &sy).unwrap().0, 4.0));
}

#[test]
fn diagonal_divergence_is_sum_of_quadratures() {
    let lx = DiagSpectrum::new(vec![1.0, 4.0]).unwrap();
    let ly = DiagSpectrum::new(vec![2.0, 8.0]).unwrap();
    let q = quadrature_kl(1.0, 2.0) + quadrature_kl(4.0, 8.0);
    assert!((kl_diagonal(&lx, &ly).unwrap().0 - q).abs() < 1e-8);
}

#[test]
fn mc_agrees_with_closed_form_in_99_of_100_runs() {
    for dim in 1..=4 {
        let mut agree = 0;
        for run in 0..100u64 {
            let sx = random_spd(dim, 1_000 + run, 10.0).unwrap();
            let sy = random_spd(dim, 2_000 + run, 10.0).unwrap();
            let exact = kl_gaussian(&sx, &sy).unwrap().0;
            let est = mc_kl(&DensityModel::gaussian(&sy).unwrap(), &DensityModel::gaussian(&sx).unwrap(), 100_000, run)
                .unwrap();
            if est.agrees_with(exact, 4.0) {
                agree += 1;
            }
        }
        assert!(agree >= 99, "dim {dim}: {agree}/100");
    }
}

#[test]
fn identical_models_estimate_zero() {
    let p = DensityModel::gaussian(&random_spd(3, 8, 10.0).unwrap()).unwrap();
    let est = mc_kl(&p, &p, 10_000, 2).unwrap();
    assert!(est.agrees_with(0.0, 4.0));
}

#[test]
fn mixture_against_standard_normal_is_positive() {
    let i1 = SpdMatrix::identity(1).unwrap();
    let mix = build_matched_mixture(&i1, 0.5, 0.5).unwrap();
    let est = mc_kl(&mix, &DensityModel::gaussian(&i1).unwrap(), 1_000_000, 23).unwrap();
    assert!(est.value.0 >= -4.0 * est.std_error);
    assert!(est.value.0 > 4.0 * est.std_error, "{est:?}");

    // Quadrature of the same divergence, written from the mixture density formula.
    let q = simpson(
        |u| {
            let p = 0.5 * normal_log_pdf(u, 0.5).exp() + 0.5 * normal_log_pdf(u, 1.5).exp();
            if p == 0.0 {
                0.0
            } else {
                p * (p.ln() - normal_log_pdf(u, 1.0))
            }
        },
        -50.0,
        50.0,
        200_000,
    );
    assert!(est.agrees_with(q, 4.0), "{est:?} vs quadrature {q}");
}

#[test]
fn mixture_sample_covariance_matches_target() {
    let target = random_spd(3, 31, 20.0).unwrap();
    let mix = build_matched_mixture(&target, 0.3, 0.7).unwrap();
    let n = 1_000_000;
    let draws = mix.sample(n, 99);
    for i in 0..3 {
        for j in 0..3 {
            let prods: Vec<f64> = draws.iter().map(|u| u[i] * u[j]).collect();
            let mean = prods.iter().sum::<f64>() / n as f64;
            let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - target.get(i, j)).abs() <= 4.0 * se, "({i},{j}): {mean} vs {}", target.get(i, j));
        }
    }
}

#[test]
fn log_density_normalizes_at_dim_one() {
    let t = validate_spd(&[vec![0.37]]).unwrap();
    for model in [
        DensityModel::gaussian(&t).unwrap(),
        build_matched_mixture(&t, 0.25, 0.8).unwrap(),
        build_matched_mixture(&t, 0.75, 0.3).unwrap(),
    ] {
        let sigma = model.component_covariances().iter().map(|c| c.get(0, 0)).fold(0.0, f64::max).sqrt();
        let mass = simpson(|u| model.log_density(&[u]).unwrap().exp(), -40.0 * sigma, 40.0 * sigma, 100_000);
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }
}

#[test]
fn prop1_holds_on_random_mixtures() {
    // KL(mixture ‖ x) ≥ KL(y^G ‖ x) − 4·SE over 100 random configurations.
    for cfg in 0..100u64 {
        let dim = 1 + (cfg % 3) as usize;
        let lx = klmin::random_diag(dim, cfg, 0.1, 10.0).unwrap();
        let target = random_spd(dim, 500 + cfg, 50.0).unwrap();
        let w = 0.2 + 0.6 * ((cfg * 37 % 100) as f64 / 100.0);
        let spread = 0.1 + 0.8 * ((cfg * 53 % 100) as f64 / 100.0);
        let y = build_matched_mixture(&target, w, spread).unwrap();
        let x = DensityModel::gaussian(&lx.to_matrix()).unwrap();
        let est = mc_kl(&y, &x, 20_000, cfg).unwrap();
        let floor = kl_gaussian(&lx.to_matrix(), &target).unwrap().0;
        assert!(est.value.0 >= floor - 4.0 * est.std_error, "cfg {cfg}: {est:?} vs {floor}");
    }
}
