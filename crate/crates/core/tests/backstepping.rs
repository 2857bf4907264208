use nalgebra::DVector;
use tankstab::backstepping::{
    build_transform, closed_loop_spectrum, dirichlet_driver, kn_relation_check, nearest_distances,
    operator_equality_residual, tb_residual, TransformMatrix,
};
use tankstab::feedback::{feedback_coefficients, virtual_profile, FeedbackLaw};
use tankstab::model::{inner_product, GridFunction2};
use tankstab::spectral::{build_basis, Basis};
use tankstab::{BcKind, Error, Params, C64};

struct Setup {
    target: Basis,
    law: FeedbackLaw,
    transform: TransformMatrix,
}

fn setup(gamma: f64, n: usize) -> Setup {
    let p = Params {
        gamma,
        n_modes: n,
        ..Params::default()
    };
    let source = build_basis(&p, BcKind::Conservative, n).unwrap();
    let target = build_basis(&p, BcKind::Damped(p.mu), n).unwrap();
    let prof = virtual_profile(&p, &source).unwrap();
    let law = feedback_coefficients(&p, &source, &prof).unwrap();
    let transform = build_transform(&p, &source, &target, &law, &prof).unwrap();
    Setup {
        target,
        law,
        transform,
    }
}

#[test]
fn transform_is_conjugate_symmetric_and_well_conditioned() {
    let mut conds = Vec::new();
    for n in [20usize, 30, 40] {
        let s = setup(0.05, n);
        let t = &s.transform;
        let k = t.entries.nrows();
        for i in 0..k {
            for j in 0..k {
                let d = t.entries[(i, j)] - t.entries[(k - 1 - i, k - 1 - j)].conj();
                assert!(d.norm() < 1e-10 * (1.0 + t.entries[(i, j)].norm()));
            }
        }
        assert!(t.condition < 1e4, "N = {n}: {}", t.condition);
        assert!(t.min_gap > 2.0 * 0.5);
        conds.push(t.condition);
        if n == 20 {
            let cols: Vec<f64> = (0..k).map(|j| t.entries.column(j).norm() / s.law.coeffs[j].norm()).collect();
            let spread = cols.iter().copied().fold(0.0, f64::max) / cols.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(spread < 50.0, "{spread}");
        }
    }
    for c in &conds {
        assert!((c / conds[0] - 1.0).abs() < 0.5, "{conds:?}");
    }
}

#[test]
fn coincident_spectra_are_a_regime_error() {
    let p = Params {
        gamma: 0.05,
        n_modes: 3,
        ..Params::default()
    };
    let a = build_basis(&p, BcKind::Conservative, 3).unwrap();
    let t = build_basis(&p, BcKind::Damped(0.0), 3).unwrap();
    let prof = virtual_profile(&p, &a).unwrap();
    let law = feedback_coefficients(&p, &a, &prof).unwrap();
    assert!(matches!(build_transform(&p, &a, &t, &law, &prof), Err(Error::Regime(_))));
}

#[test]
fn expansion_coefficients_match_unperturbed_closed_form() {
    // γ = 0, n = 1: f₁ = (e^{iπx}, −e^{−iπx}), φ̃ₚ = (e^{−λ̄x}, −e^{−2μ}e^{λ̄x}).
    let p = Params {
        gamma: 0.0,
        ..Params::default()
    };
    let g = p.grid();
    let mu = p.mu;
    let f1 = GridFunction2::from_fn(&g, |x| {
        [C64::new(0.0, std::f64::consts::PI * x).exp(), -C64::new(0.0, -std::f64::consts::PI * x).exp()]
    });
    let target = build_basis(&p, BcKind::Damped(mu), 6).unwrap();
    let damp = 1.0 - (-2.0 * mu).exp();
    for q in -6..=6i64 {
        let lam = C64::new(mu, std::f64::consts::PI * q as f64);
        let phi = GridFunction2::from_fn(&g, |x| {
            [(-lam.conj() * x).exp(), -(-2.0 * mu).exp() * (lam.conj() * x).exp()]
        });
        let quad = inner_product(&f1, &phi).unwrap();
        let formula = damp / (2.0 * (lam - C64::new(0.0, std::f64::consts::PI)));
        assert!((quad - formula).norm() < 1e-9, "p = {q}");
        let dual = target.dual(q).unwrap();
        assert!((inner_product(&f1, &dual.func).unwrap() - formula).norm() < 1e-8);
    }
}

#[test]
fn kn_residual_decays_like_a_square_root() {
    let p = Params {
        gamma: 0.05,
        ..Params::default()
    };
    let source = build_basis(&p, BcKind::Conservative, 2).unwrap();
    let r: Vec<f64> = [20usize, 40, 80]
        .iter()
        .map(|&m| {
            let target = build_basis(&p, BcKind::Damped(p.mu), m).unwrap();
            kn_relation_check(&p, &source, &target, &[0, 1, 2]).unwrap().max()
        })
        .collect();
    for w in r.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.6..0.8).contains(&ratio), "{r:?}");
    }
}

#[test]
fn dirichlet_driver_converges() {
    for gamma in [0.0, 0.05] {
        let p = Params {
            gamma,
            ..Params::default()
        };
        let source = build_basis(&p, BcKind::Conservative, 40).unwrap();
        let target = build_basis(&p, BcKind::Damped(p.mu), 5).unwrap();
        for m in -5..=5i64 {
            let (sum, limit) = dirichlet_driver(&source, &target, m).unwrap();
            assert!((sum - limit).norm() < 5e-2, "gamma {gamma} m {m}: {sum} vs {limit}");
            if gamma == 0.0 {
                assert!((limit - (1.0 + (-2.0 * p.mu).exp()) / 2.0).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn tb_residual_shrinks_with_truncation() {
    let a = setup(0.05, 20);
    let b = setup(0.05, 40);
    for m in -5..=5i64 {
        assert!(tb_residual(&b.transform, m).norm() < tb_residual(&a.transform, m).norm());
    }
}

#[test]
fn operator_residual_is_the_weighted_tb_defect() {
    let s = setup(0.05, 20);
    let t = &s.transform;
    let k = t.entries.nrows();
    let weighted_tb: f64 = (0..k)
        .map(|p| {
            let m = p as i64 - 20;
            ((1.0 + t.target_eigenvalues[p].norm()) * tb_residual(t, m).norm()).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    for q in [0i64, 1, 3] {
        let mut rhs = DVector::from_element(k, C64::new(0.0, 0.0));
        rhs[t.slot(q)] = C64::new(1.0, 0.0) / s.target.pair(q).eigenvalue;
        let alpha: Vec<C64> = t.entries.clone().lu().solve(&rhs).unwrap().iter().copied().collect();
        let f_alpha: C64 = alpha.iter().zip(&s.law.coeffs).map(|(a, g)| a * g).sum();
        let r = operator_equality_residual(t, &s.law, &alpha).unwrap();
        assert!((r - f_alpha.norm() * weighted_tb).abs() < 1e-8 * r.max(1.0));
        let perturbed = operator_equality_residual(t, &s.law.scaled(1.1), &alpha).unwrap();
        assert!(perturbed > r);
    }
    let mut only_zero = vec![C64::new(0.0, 0.0); k];
    only_zero[t.slot(0)] = C64::new(1.0, 0.0);
    let r = operator_equality_residual(t, &s.law, &only_zero).unwrap();
    assert!((r - s.law.coeff(0).norm() * weighted_tb).abs() < 1e-8 * r);
}

#[test]
fn closed_loop_spectrum_approaches_target_with_truncation() {
    let run = |n: usize| {
        let p = Params {
            gamma: 0.03,
            n_modes: n,
            ..Params::default()
        };
        let source = build_basis(&p, BcKind::Conservative, n).unwrap();
        let target = build_basis(&p, BcKind::Damped(p.mu), 10).unwrap();
        let prof = virtual_profile(&p, &source).unwrap();
        let law = feedback_coefficients(&p, &source, &prof).unwrap();
        let spec = closed_loop_spectrum(&source, &law).unwrap();
        assert_eq!(spec.len(), source.len());
        let targets: Vec<C64> = target.eigenvalues().iter().map(|m| -m).collect();
        nearest_distances(&spec, &targets)
    };
    let coarse = run(20);
    let fine = run(41);
    for (c, f) in coarse.iter().zip(&fine) {
        assert!(f < c, "{coarse:?} vs {fine:?}");
    }
    assert!(fine[10] < 0.15, "{}", fine[10]);
}
