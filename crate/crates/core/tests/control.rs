use std::f64::consts::PI;

use tankstab::control::{
    controllability_report, dual_exponentials, exponential_gram_entry, moment_b, steering_grid,
    synthesize_open_loop, DualBasis,
};
use tankstab::model::{control_profile, inner_product, Grid};
use tankstab::simulate::integrate_open_loop;
use tankstab::spectral::build_basis;
use tankstab::{BcKind, Error, Params, C64};

fn params(gamma: f64) -> Params {
    Params {
        gamma,
        ..Params::default()
    }
}

#[test]
fn gamma_zero_moments_follow_the_parity_pattern() {
    let p = params(0.0);
    let b = build_basis(&p, BcKind::Conservative, 10).unwrap();
    for n in 1..=10i64 {
        let bn = moment_b(&p, &b, n).unwrap();
        if n % 2 == 0 {
            assert!(bn.norm() < 1e-8, "b_{n} = {bn}");
        } else {
            let expect = C64::new(0.0, -4.0 * p.length / (PI * n as f64));
            assert!((bn - expect).norm() < 1e-6, "b_{n} = {bn}");
        }
    }
    let r = controllability_report(&p, &b).unwrap();
    assert!(r.is_gamma_zero_pattern());
    assert!(!r.all_pass());
    assert_eq!(r.uncontrollable, vec![-10, -8, -6, -4, -2, 2, 4, 6, 8, 10]);
}

#[test]
fn perturbed_report_passes_with_stable_lower_constant() {
    let p = params(0.05);
    let mut lows = Vec::new();
    for n in [10usize, 15, 20] {
        let b = build_basis(&p, BcKind::Conservative, n).unwrap();
        let r = controllability_report(&p, &b).unwrap();
        assert!(r.all_pass(), "N = {n}: {r:?}");
        assert!(r.c_lower > 0.0 && r.c_upper.is_finite());
        lows.push(r.c_lower);
    }
    for c in &lows {
        assert!((c / lows[0] - 1.0).abs() < 0.2, "{lows:?}");
    }
}

#[test]
fn control_profile_misses_the_mass_mode() {
    for gamma in [0.0, 0.05, 0.1] {
        let p = params(gamma);
        let b = build_basis(&p, BcKind::Conservative, 1).unwrap();
        let prof = control_profile(&p, b.grid()).unwrap();
        assert!(inner_product(&prof, &b.pair(0).func).unwrap().norm() < 1e-8);
    }
}

fn exact_residual(d: &DualBasis) -> f64 {
    let horizon = d.quadrature.length();
    let k = d.exponents.len();
    let mut worst = 0.0f64;
    for m in 0..k {
        for n in 0..k {
            let v: C64 = (0..k)
                .map(|j| d.coeffs[(m, j)].conj() * exponential_gram_entry(d.exponents[n], d.exponents[j], horizon))
                .sum();
            let t = if m == n { 1.0 } else { 0.0 };
            worst = worst.max((v - t).norm());
        }
    }
    worst
}

#[test]
fn fourier_exponentials_have_diagonal_duals() {
    let p = params(0.0);
    let ex: Vec<C64> = (-6..=6).map(|n| C64::new(0.0, PI * n as f64)).collect();
    let d = dual_exponentials(&ex, &steering_grid(&p).unwrap()).unwrap();
    assert!((d.condition - 1.0).abs() < 1e-8);
    for i in 0..ex.len() {
        for j in 0..ex.len() {
            let t = if i == j { 0.5 } else { 0.0 };
            assert!((d.coeffs[(i, j)] - t).norm() < 1e-9);
        }
    }
}

#[test]
fn duals_are_biorthogonal() {
    let p = Params {
        n_modes: 12,
        ..params(0.05)
    };
    let b = build_basis(&p, BcKind::Conservative, 12).unwrap();
    let d = dual_exponentials(&b.eigenvalues(), &steering_grid(&p).unwrap()).unwrap();
    assert!(d.biorthogonality_residual() < 1e-6);
    assert!(exact_residual(&d) < 1e-6);
}

#[test]
fn quadrature_refinement_order() {
    let ex: Vec<C64> = (-3..=3).map(|n| C64::new(0.0, 3.3 * n as f64 + 0.2)).collect();
    let r: Vec<f64> = [65usize, 129, 257]
        .iter()
        .map(|&m| exact_residual(&dual_exponentials(&ex, &Grid::uniform(2.0, m).unwrap()).unwrap()))
        .collect();
    for w in r.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 2.0, "{r:?}");
    }
}

#[test]
fn coincident_exponents_are_rejected() {
    let ex = [C64::new(0.0, 1.0), C64::new(0.0, 1.0 + 1e-10)];
    let g = Grid::uniform(2.0, 101).unwrap();
    assert!(matches!(dual_exponentials(&ex, &g), Err(Error::Numerical(_))));
}

#[test]
fn steering_reaches_single_mode_targets() {
    let p = Params {
        n_modes: 12,
        ..params(0.05)
    };
    let b = build_basis(&p, BcKind::Conservative, 12).unwrap();
    let d = dual_exponentials(&b.eigenvalues(), &steering_grid(&p).unwrap()).unwrap();
    let rest = vec![C64::new(0.0, 0.0); b.len()];

    let zero = synthesize_open_loop(&p, &b, &d, &rest).unwrap();
    assert!(zero.values.iter().all(|v| v.norm() == 0.0));

    for n in 1..=3i64 {
        let mut target = rest.clone();
        target[b.slot(n)] = C64::new(1.0, 0.0);
        target[b.slot(-n)] = C64::new(1.0, 0.0);
        let u = synthesize_open_loop(&p, &b, &d, &target).unwrap();
        assert!(u.values.iter().all(|v| v.im.abs() < 1e-9), "real target needs a real control");
        let tr = integrate_open_loop(&p, &b, &rest, &u).unwrap();
        let last = tr.coeffs.last().unwrap();
        let err: f64 = last.iter().zip(&target).map(|(a, t)| (a - t).norm_sqr()).sum::<f64>().sqrt();
        assert!(err / 2f64.sqrt() < 5e-2, "n = {n}: {err:e}");
        assert!(tr.mass_drift() < 1e-6);
        assert!((tr.times.last().unwrap() - 2.0 * p.length).abs() < 1e-12);
    }
}

#[test]
fn steering_rejects_mass_and_invisible_targets() {
    let p = Params {
        n_modes: 4,
        ..params(0.05)
    };
    let b = build_basis(&p, BcKind::Conservative, 4).unwrap();
    let d = dual_exponentials(&b.eigenvalues(), &steering_grid(&p).unwrap()).unwrap();
    let mut target = vec![C64::new(0.0, 0.0); b.len()];
    target[b.slot(0)] = C64::new(1.0, 0.0);
    assert!(matches!(synthesize_open_loop(&p, &b, &d, &target), Err(Error::Regime(_))));

    let p0 = Params { gamma: 0.0, ..p };
    let b0 = build_basis(&p0, BcKind::Conservative, 4).unwrap();
    let d0 = dual_exponentials(&b0.eigenvalues(), &steering_grid(&p0).unwrap()).unwrap();
    let mut target = vec![C64::new(0.0, 0.0); b0.len()];
    target[b0.slot(2)] = C64::new(1.0, 0.0);
    assert!(matches!(
        synthesize_open_loop(&p0, &b0, &d0, &target),
        Err(Error::Uncontrollable { mode: 2, .. })
    ));
}
