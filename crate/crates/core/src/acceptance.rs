//! End-to-end checks with fixed tolerances.
//!
//! Each check recomputes its quantity from scratch and compares it with a
//! closed form or a structural property. Used by the `acceptance` test target
//! and by the command-line `report`.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backstepping::{closed_loop_spectrum, dirichlet_driver, nearest_distances};
use crate::control::{
    controllability_report, dual_exponentials, moment_b, steering_grid, synthesize_open_loop, target_moments,
    unperturbed_target_moment,
};
use crate::error::Result;
use crate::feedback::{feedback_coefficients, virtual_profile, FeedbackLaw};
use crate::finite_dim::{backstep_pair, residuals, LinearPair};
use crate::simulate::{
    decay_rate_estimate, integrate_closed_loop, integrate_open_loop, integrate_target, lyapunov_certificate,
    NormKind,
};
use crate::spectral::{build_basis, find_eigenvalues, first_order_perturbation, kato_psi, unperturbed_mode, Basis, Shooter};
use crate::{BcKind, Params, C64};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    /// Measured values and thresholds, human readable.
    pub detail: String,
    /// Wall-clock budget, for the checks that have one.
    pub budget_seconds: Option<f64>,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        let budget = self.budget_seconds.map(|b| format!(", budget {b} s")).unwrap_or_default();
        format!(
            "{} {:>2} {:<24} {} [{:.2} s{budget}]",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

const ZERO: C64 = C64::new(0.0, 0.0);

/// Names, in order.
pub const NAMES: [&str; 12] = [
    "unperturbed-spectrum",
    "perturbed-localization",
    "first-order-series",
    "moment-structure",
    "target-moments",
    "open-loop-steering",
    "tb-partial-sums",
    "closed-loop-spectrum",
    "closed-loop-decay",
    "lyapunov-certificate",
    "finite-dim-oracle",
    "symmetry-reality",
];

/// Runs check `id` (1-based). Errors from the library count as failures.
pub fn run(id: u32) -> Outcome {
    let start = Instant::now();
    let res = match id {
        1 => unperturbed_spectrum(),
        2 => perturbed_localization(),
        3 => first_order_series(),
        4 => moment_structure(),
        5 => target_moment_check(),
        6 => open_loop_steering(),
        7 => tb_partial_sums(),
        8 => closed_loop_eigenvalues(),
        9 => closed_loop_decay(),
        10 => lyapunov(),
        11 => finite_dim_oracle(),
        12 => symmetry_reality(),
        _ => Ok((false, format!("no check {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut pass, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    let budget_seconds = match id {
        1 => Some(5.0),
        8 => Some(30.0),
        _ => None,
    };
    if let Some(b) = budget_seconds {
        pass &= seconds < b;
    }
    Outcome {
        id,
        name: NAMES.get((id as usize).wrapping_sub(1)).copied().unwrap_or("unknown"),
        pass,
        detail,
        budget_seconds,
        seconds,
    }
}

pub fn run_all() -> Vec<Outcome> {
    (1..=12).map(run).collect()
}

type Check = Result<(bool, String)>;

fn with_gamma(gamma: f64) -> Params {
    Params {
        gamma,
        ..Params::default()
    }
}

fn unperturbed_spectrum() -> Check {
    let p = with_gamma(0.0);
    let cons = find_eigenvalues(&p, BcKind::Conservative, -20..=20)?;
    let damp = find_eigenvalues(&p, BcKind::Damped(p.mu), -20..=20)?;
    let (mut ec, mut ed) = (0.0f64, 0.0f64);
    for (k, n) in (-20..=20).enumerate() {
        let w = PI * n as f64 / p.length;
        ec = ec.max((cons[k] - C64::new(0.0, w)).norm());
        ed = ed.max((damp[k] - C64::new(p.mu, w)).norm());
    }
    Ok((
        ec < 1e-9 && ed < 1e-9,
        format!("conservative err {ec:.2e}, damped err {ed:.2e} (tol 1e-9)"),
    ))
}

fn perturbed_localization() -> Check {
    let p = with_gamma(0.05);
    let ev = find_eigenvalues(&p, BcKind::Conservative, -20..=20)?;
    let (mut drift, mut re) = (0.0f64, 0.0f64);
    for (k, n) in (-20..=20).enumerate() {
        drift = drift.max((ev[k] - C64::new(0.0, PI * n as f64 / p.length)).norm());
        re = re.max(ev[k].re.abs());
    }
    let bound = 1.0 / (4.0 * p.length);
    Ok((
        drift < bound && re < 1e-8,
        format!("max drift {drift:.4e} (< {bound}), max |Re| {re:.2e} (tol 1e-8)"),
    ))
}

fn first_order_series() -> Check {
    let gammas = [0.01, 0.02, 0.04];
    let mut slopes = Vec::new();
    for n in [1i64, 2, 4, 8] {
        let mut errs = Vec::new();
        for &g in &gammas {
            let p = with_gamma(g);
            let sh = Shooter::new(&p)?;
            let lam = sh.refine(BcKind::Conservative, C64::new(0.0, PI * n as f64 / p.length))?;
            let pair = sh.eigenpair(BcKind::Conservative, lam)?;
            let psi = kato_psi(&p, &pair)?;
            let mut approx = unperturbed_mode(psi.grid(), n);
            approx.axpy(C64::new(g, 0.0), &first_order_perturbation(&p, n, 4000)?)?;
            errs.push(psi.sub(&approx)?.max_norm());
        }
        slopes.push((errs[2].ln() - errs[0].ln()) / (gammas[2].ln() - gammas[0].ln()));
    }
    let pass = slopes.iter().all(|s| (s - 2.0).abs() <= 0.2);
    Ok((pass, format!("slopes n=1,2,4,8: {} (2 ± 0.2)", fmt_list(&slopes, 3))))
}

fn moment_structure() -> Check {
    let p0 = with_gamma(0.0);
    let b0 = build_basis(&p0, BcKind::Conservative, 20)?;
    let (mut even, mut odd) = (0.0f64, 0.0f64);
    for n in 1..=20i64 {
        let b = moment_b(&p0, &b0, n)?;
        if n % 2 == 0 {
            even = even.max(b.norm());
        } else {
            let expect = C64::new(0.0, -4.0 * p0.length / (PI * n as f64));
            odd = odd.max((b - expect).norm());
        }
    }
    let p = with_gamma(0.05);
    let b = build_basis(&p, BcKind::Conservative, 20)?;
    let r = controllability_report(&p, &b)?;
    let pass = even < 1e-8 && odd < 1e-6 && r.c_lower > 0.0 && r.c_upper.is_finite() && r.moments_ok;
    Ok((
        pass,
        format!(
            "gamma=0: max|b_even| {even:.2e} (1e-8), odd err {odd:.2e} (1e-6); gamma=0.05: c {:.4e}, C {:.4e}",
            r.c_lower, r.c_upper
        ),
    ))
}

/// max over |n| ≤ N of the distance of the target moments to their γ = 0 values.
fn target_moment_defect(gamma: f64, n_max: usize) -> Result<f64> {
    let p = with_gamma(gamma);
    let b = build_basis(&p, BcKind::Damped(p.mu), n_max)?;
    let m = target_moments(&p, &b)?;
    Ok(b
        .indices()
        .zip(&m)
        .map(|(n, v)| (v - unperturbed_target_moment(&p, n)).norm())
        .fold(0.0, f64::max))
}

fn target_moment_check() -> Check {
    let d0 = target_moment_defect(0.0, 10)?;
    let c1 = target_moment_defect(0.01, 10)? / 0.01;
    let c2 = target_moment_defect(0.02, 10)? / 0.02;
    let stable = (c2 / c1 - 1.0).abs() < 0.25;
    Ok((
        d0 < 1e-8 && stable,
        format!("gamma=0 defect {d0:.2e}; C(0.01) {c1:.4}, C(0.02) {c2:.4} (ratio within 25%)"),
    ))
}

fn open_loop_steering() -> Check {
    let p = Params {
        n_modes: 12,
        ..with_gamma(0.05)
    };
    let b = build_basis(&p, BcKind::Conservative, 12)?;
    let d = dual_exponentials(&b.eigenvalues(), &steering_grid(&p)?)?;
    let rest = vec![ZERO; b.len()];
    let (mut err, mut drift) = (0.0f64, 0.0f64);
    for n in 1..=3i64 {
        let mut target = rest.clone();
        target[b.slot(n)] = C64::new(1.0, 0.0);
        target[b.slot(-n)] = C64::new(1.0, 0.0);
        let u = synthesize_open_loop(&p, &b, &d, &target)?;
        let tr = integrate_open_loop(&p, &b, &rest, &u)?;
        let last = tr.coeffs.last().expect("nonempty trajectory");
        err = err.max(l2(last, &target) / l2(&target, &rest));
        drift = drift.max(tr.mass_drift());
    }
    Ok((
        err < 5e-2 && drift < 1e-6,
        format!("max relative error {err:.3e} (5e-2), mass drift {drift:.2e} (1e-6)"),
    ))
}

fn tb_partial_sums() -> Check {
    let p = with_gamma(0.05);
    let source = build_basis(&p, BcKind::Conservative, 40)?;
    let target = build_basis(&p, BcKind::Damped(p.mu), 5)?;
    let mut worst = 0.0f64;
    for m in -5..=5i64 {
        let (sum, limit) = dirichlet_driver(&source, &target, m)?;
        worst = worst.max((sum - limit).norm());
    }
    Ok((worst < 5e-2, format!("max error {worst:.3e} (5e-2)")))
}

fn regime_law(n: usize) -> Result<(Params, Basis, FeedbackLaw)> {
    let p = Params {
        gamma: 0.03,
        mu: 2.0,
        nu: 0.5,
        length: 1.0,
        n_modes: n,
        ..Params::default()
    };
    let b = build_basis(&p, BcKind::Conservative, n)?;
    let law = feedback_coefficients(&p, &b, &virtual_profile(&p, &b)?)?;
    Ok((p, b, law))
}

fn closed_loop_eigenvalues() -> Check {
    let (p, b, law) = regime_law(41)?;
    let target = build_basis(&p, BcKind::Damped(p.mu), 10)?;
    let spec = closed_loop_spectrum(&b, &law)?;
    let targets: Vec<C64> = target.eigenvalues().iter().map(|m| -m).collect();
    let dist = nearest_distances(&spec, &targets);
    let worst = dist.iter().copied().fold(0.0, f64::max);
    let tol = 0.1 * p.mu;
    Ok((
        worst < tol,
        format!("distance at p=0 {:.3e}, max over |p|<=10 {worst:.3e} (tol {tol})", dist[10]),
    ))
}

fn real_state(b: &Basis, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut c = vec![ZERO; b.len()];
    for k in 1..=b.n_max as i64 {
        let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (k * k) as f64;
        c[b.slot(k)] = v;
        c[b.slot(-k)] = v.conj();
    }
    c
}

fn closed_loop_decay() -> Check {
    let (p, b, law) = regime_law(41)?;
    let p = Params {
        t_final: 15.0 / p.mu,
        ..p
    };
    let window = (5.0 / p.mu, 15.0 / p.mu);
    let need = 0.7 * 0.75 * p.mu;
    let mut rates = Vec::new();
    let mut r2s = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let init = real_state(&b, &mut rng);
        let tr = integrate_closed_loop(&p, &b, &law, &init, ZERO)?;
        let fit = decay_rate_estimate(&tr, NormKind::Domain, window)?;
        rates.push(fit.rate);
        r2s.push(fit.r2);
    }
    let pass = rates.iter().zip(&r2s).all(|(r, q)| *r >= need && *q > 0.98);
    let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let min_r2 = r2s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        pass,
        format!("min rate {min_rate:.4} (>= {need:.4}), min R^2 {min_r2:.4} (> 0.98)"),
    ))
}

fn lyapunov() -> Check {
    let p = with_gamma(0.05);
    let lam = p.mu / 2.0;
    let cert = lyapunov_certificate(&p, lam)?;
    let eta_end = *cert.eta.last().expect("nonempty");
    let gap = cert.comparison_gap();
    let b = build_basis(&p, BcKind::Damped(p.mu), 20)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut init = real_state(&b, &mut rng);
    init[b.slot(0)] = C64::new(0.5, 0.0);
    let steps = 200;
    let t_end = 10.0 / p.mu;
    let times: Vec<f64> = (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect();
    let tr = integrate_target(&p, &b, &init, &times)?;
    let v0 = cert.value_graph(&b, &tr.coeffs[0])?;
    let mut drift = 0.0f64;
    for (t, c) in tr.times.iter().zip(&tr.coeffs) {
        drift = drift.max(cert.value_graph(&b, c)? * (2.0 * lam * t).exp() / v0 - 1.0);
    }
    let pass = p.gamma < cert.gamma_s && cert.feasible && eta_end <= 1.0 && gap >= -1e-12 && drift < 1e-3;
    Ok((
        pass,
        format!(
            "gamma_s {:.4}, eta(L) {eta_end:.4} (<= 1), min xi-eta {gap:.2e}, V drift {drift:.2e} (1e-3)",
            cert.gamma_s
        ),
    ))
}

fn finite_dim_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_res, mut worst_eig) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < 100 {
        let n = rng.gen_range(1..=6usize);
        let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let at = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let pair = LinearPair::new(a, b.clone())?;
        let target = LinearPair::new(at, b)?;
        if !pair.is_controllable() || !target.is_controllable() {
            continue;
        }
        let (t, k) = backstep_pair(&pair, &target)?;
        let (op, tb) = residuals(&pair, &target, &t, &k);
        worst_res = worst_res.max(op.max(tb));
        let closed = &pair.a + &pair.b * &k;
        worst_eig = worst_eig.max(spectrum_distance(&closed, &target.a));
        done += 1;
    }
    Ok((
        worst_res < 1e-10 && worst_eig < 1e-8,
        format!("max residual {worst_res:.2e} (1e-10), max eigenvalue mismatch {worst_eig:.2e} (1e-8)"),
    ))
}

/// Largest distance from an eigenvalue of `a` to the nearest unused eigenvalue of `b`.
fn spectrum_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let ea: Vec<C64> = a.complex_eigenvalues().iter().copied().collect();
    let mut eb: Vec<C64> = b.complex_eigenvalues().iter().copied().collect();
    let mut worst = 0.0f64;
    for z in ea {
        let (k, d) = eb
            .iter()
            .enumerate()
            .map(|(k, w)| (k, (z - w).norm()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        eb.swap_remove(k);
        worst = worst.max(d);
    }
    worst
}

fn symmetry_reality() -> Check {
    let (p, b, law) = regime_law(20)?;
    let mut sym = 0.0f64;
    for n in 1..=20i64 {
        for (a, c) in b.pair(n).func.samples().iter().zip(b.pair(-n).func.samples()) {
            sym = sym.max((c[0] - a[0].conj()).norm()).max((c[1] - a[1].conj()).norm());
            sym = sym.max((a[0].conj() + a[1]).norm());
        }
    }
    let mut table = 0.0f64;
    for n in 1..=20i64 {
        table = table.max((law.coeff(-n) - law.coeff(n).conj()).norm() / law.coeff(n).norm());
    }
    table = table.max(law.coeff(0).im.abs());
    let p = Params { t_final: 2.0, ..p };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let init = real_state(&b, &mut rng);
    let tr = integrate_closed_loop(&p, &b, &law, &init, ZERO)?;
    let mut imag = 0.0f64;
    for (i, c) in tr.coeffs.iter().enumerate().step_by(250) {
        let z = b.synthesize(c)?;
        for s in z.samples() {
            imag = imag.max(s[0].im.abs()).max(s[1].im.abs());
        }
        imag = imag.max(tr.control[i].im.abs()).max(tr.zeta0[i].im.abs());
    }
    Ok((
        sym < 1e-9 && table < 1e-10 && imag < 1e-10,
        format!("eigenfunction symmetry {sym:.2e} (1e-9), gain table {table:.2e} (1e-10), trajectory imaginary part {imag:.2e} (1e-10)"),
    ))
}

fn l2(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn fmt_list(v: &[f64], digits: usize) -> String {
    v.iter().map(|x| format!("{x:.digits$}")).collect::<Vec<_>>().join(", ")
}
