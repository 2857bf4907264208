use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tankstab::feedback::{feedback_coefficients, virtual_profile, FeedbackLaw};
use tankstab::model::GridFunction2;
use tankstab::simulate::{
    decay_rate_estimate, fit_decay, gamma_s, integrate_closed_loop, integrate_target, lyapunov_certificate,
    NormKind, Upwind,
};
use tankstab::spectral::{build_basis, Basis};
use tankstab::{BcKind, Error, Params, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

fn closed_loop(gamma: f64, n: usize) -> (Params, Basis, FeedbackLaw) {
    let p = Params {
        gamma,
        n_modes: n,
        ..Params::default()
    };
    let b = build_basis(&p, BcKind::Conservative, n).unwrap();
    let law = feedback_coefficients(&p, &b, &virtual_profile(&p, &b).unwrap()).unwrap();
    (p, b, law)
}

fn real_init(b: &Basis, seed: u64, with_mass_mode: bool) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (b.len() / 2) as i64;
    let mut c = vec![ZERO; b.len()];
    for k in 1..=n {
        let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (k * k) as f64;
        c[b.slot(k)] = v;
        c[b.slot(-k)] = v.conj();
    }
    if with_mass_mode {
        c[b.slot(0)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
    }
    c
}

#[test]
fn free_modes_keep_their_modulus() {
    let (p, b, law) = closed_loop(0.05, 20);
    let init = real_init(&b, 1, false);
    let tr = integrate_closed_loop(&p, &b, &law.scaled(0.0), &init, ZERO).unwrap();
    assert!((tr.times.last().unwrap() - p.t_final).abs() < 1e-9);
    for c in &tr.coeffs {
        for (a, z) in c.iter().zip(&init) {
            assert!((a.norm() - z.norm()).abs() < 1e-8);
        }
    }
    assert!(tr.mass_drift() < 1e-8);
}

#[test]
fn closed_loop_never_excites_the_mass_mode() {
    let (p, b, law) = closed_loop(0.05, 10);
    let tr = integrate_closed_loop(&p, &b, &law, &real_init(&b, 2, false), ZERO).unwrap();
    for c in &tr.coeffs {
        assert!(c[b.slot(0)].norm() < 1e-8);
    }
    assert!(tr.norm_l2.last().unwrap() < &tr.norm_l2[0]);
    assert!(tr.control.iter().all(|u| u.im.abs() < 1e-10));

    let bad = real_init(&b, 2, true);
    assert!(matches!(
        integrate_closed_loop(&p, &b, &law, &bad, ZERO),
        Err(Error::Usage(_))
    ));
}

#[test]
fn pure_target_mode_decays_at_its_rate() {
    for gamma in [0.0, 0.05] {
        let p = Params {
            gamma,
            ..Params::default()
        };
        let b = build_basis(&p, BcKind::Damped(p.mu), 4).unwrap();
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.05).collect();
        for q in [0i64, 3] {
            let mut c = vec![ZERO; b.len()];
            c[b.slot(q)] = C64::new(1.0, 0.0);
            let tr = integrate_target(&p, &b, &c, &times).unwrap();
            let fit = decay_rate_estimate(&tr, NormKind::L2, (0.0, 2.5)).unwrap();
            assert!((fit.rate - b.pair(q).eigenvalue.re).abs() < 1e-3);
            if gamma == 0.0 {
                assert!((fit.rate - p.mu).abs() < 1e-3);
            }
        }
    }
}

fn fd_error(points: usize, t_end: f64, cfl: f64) -> f64 {
    let p = Params {
        gamma: 0.05,
        grid_points: points,
        ..Params::default()
    };
    let b = build_basis(&p, BcKind::Damped(p.mu), 2).unwrap();
    let mut c = vec![ZERO; b.len()];
    for q in -2..=2i64 {
        c[b.slot(q)] = C64::new(1.0 / (1.0 + (q * q) as f64), 0.03 * q as f64);
    }
    let mut z = b.synthesize(&c).unwrap();
    let steps = (t_end / (cfl * p.grid().step())).round() as usize;
    let up = Upwind::new(&p, BcKind::Damped(p.mu), t_end / steps as f64).unwrap();
    for _ in 0..steps {
        z = up.step(&z, ZERO).unwrap();
    }
    let exact = b.synthesize(&integrate_target(&p, &b, &c, &[t_end]).unwrap().coeffs[0]).unwrap();
    z.sub(&exact).unwrap().norm() / exact.norm()
}

#[test]
fn upwind_agrees_with_modal_solution() {
    assert!(fd_error(2001, 2.0, 0.5) < 5e-2);
    let e: Vec<f64> = [201usize, 401, 801].iter().map(|&m| fd_error(m, 0.5, 0.5)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 1.0).abs() < 0.2, "{e:?}");
    }
}

#[test]
fn reflective_upwind_dissipates() {
    let p = Params {
        gamma: 0.0,
        grid_points: 401,
        ..Params::default()
    };
    let g = p.grid();
    let up = Upwind::new(&p, BcKind::Conservative, 0.7 * g.step()).unwrap();
    let mut z = GridFunction2::from_fn(&g, |x| {
        let s = (-40.0 * (x - 0.4) * (x - 0.4)).exp();
        [C64::new(s, 0.0), C64::new(-0.5 * s, 0.0)]
    });
    let mut prev = z.norm();
    for _ in 0..1000 {
        z = up.step(&z, ZERO).unwrap();
        let now = z.norm();
        assert!(now <= prev * (1.0 + 1e-14));
        prev = now;
    }
    assert!(matches!(Upwind::new(&p, BcKind::Conservative, 1.5 * g.step()), Err(Error::Config(_))));
}

#[test]
fn feasibility_threshold_is_nonincreasing() {
    let p = Params::default();
    let gs: Vec<f64> = (1..20).map(|i| gamma_s(&p, i as f64 * 0.1)).collect();
    assert!(gs.windows(2).all(|w| w[1] <= w[0]));
    assert!(gs[18] < gs[14] && gs[14] < gs[0]);
    assert!(gs.iter().all(|g| *g > 0.0 && *g <= 7.0 / 16.0));
}

#[test]
fn certificate_comparison_and_value_decay() {
    let p = Params {
        gamma: 0.05,
        ..Params::default()
    };
    let lam = p.mu / 2.0;
    let cert = lyapunov_certificate(&p, lam).unwrap();
    assert!(p.gamma < cert.gamma_s);
    assert!(cert.feasible && cert.blow_up_at.is_none());
    assert!(*cert.eta.last().unwrap() <= 1.0);
    assert!(cert.eta.iter().zip(&cert.xi).all(|(e, x)| e <= &(x + 1e-12)));
    assert!(cert.comparison_gap() >= -1e-12);

    let b = build_basis(&p, BcKind::Damped(p.mu), 20).unwrap();
    let mut init = real_init(&b, 5, false);
    init[b.slot(0)] = C64::new(0.4, 0.0);
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
    let tr = integrate_target(&p, &b, &init, &times).unwrap();
    let v0 = cert.value_graph(&b, &tr.coeffs[0]).unwrap();
    assert!(v0 > 0.0);
    for (t, c) in tr.times.iter().zip(&tr.coeffs) {
        let v = cert.value_graph(&b, c).unwrap() * (2.0 * lam * t).exp();
        assert!(v <= v0 * (1.0 + 1e-3), "t = {t}");
    }
    assert!(matches!(lyapunov_certificate(&p, 3.0), Err(Error::Usage(_))));
}

#[test]
fn decay_fit_recovers_exponentials() {
    let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
    let v: Vec<f64> = t.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect();
    let fit = fit_decay(&t, &v).unwrap();
    assert!((fit.rate - 1.7).abs() < 1e-12 && (fit.r2 - 1.0).abs() < 1e-12);
    let bad = vec![0.0; t.len()];
    assert!(fit_decay(&t, &bad).is_err());
}

#[test]
fn closed_loop_decays_at_truncated_rate() {
    // At moderate truncation the log-norm is not yet linear: later windows see
    // the slow edge modes of the truncated loop.
    let (p, b, law) = closed_loop(0.03, 31);
    let p = Params { t_final: 7.5, ..p };
    let tr = integrate_closed_loop(&p, &b, &law, &real_init(&b, 3, false), ZERO).unwrap();
    let early = decay_rate_estimate(&tr, NormKind::Domain, (2.5, 5.0)).unwrap();
    let late = decay_rate_estimate(&tr, NormKind::Domain, (5.0, 7.5)).unwrap();
    assert!(early.rate > 0.3 && late.rate > 0.2);
    let ratio = tr.norm_domain.last().unwrap() / tr.norm_domain[0];
    assert!(ratio < 0.2, "{ratio}");
}
