//! Subcommand implementations. Each returns the verdict used for the exit code.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tankstab::acceptance;
use tankstab::control::{
    controllability_report, dual_exponentials, steering_grid, synthesize_open_loop, target_moments,
    unperturbed_target_moment, MOMENT_FLOOR,
};
use tankstab::feedback::{feedback_coefficients, physical_feedback, singular_split, virtual_profile, FeedbackLaw};
use tankstab::finite_dim::{backstep_pair, companion, residuals, to_canonical, LinearPair, MAX_DIM};
use tankstab::simulate::{
    check_synthesis_regime, decay_rate_estimate, gamma_s, integrate_closed_loop, integrate_open_loop,
    integrate_target, lyapunov_certificate, NormKind,
};
use tankstab::spectral::{build_basis, Basis};
use tankstab::{BcKind, Params, C64};

use crate::config::{RunConfig, System};
use crate::output::{Cell, Checks, Table, Writer};
use crate::CliError;

const ZERO: C64 = C64::new(0.0, 0.0);

pub fn run(name: &str, cfg: &RunConfig) -> Result<bool, CliError> {
    let p = cfg.params();
    p.validate()?;
    match name {
        "spectrum" => spectrum(cfg, &p),
        "controllability" => controllability(cfg, &p),
        "feedback" => feedback(cfg, &p),
        "simulate" => simulate(cfg, &p),
        "lyapunov" => lyapunov(cfg, &p),
        "steer" => steer(cfg, &p),
        "finite-demo" => finite_demo(cfg),
        "report" => report(cfg),
        _ => Err(CliError::config(format!("unknown command {name}"))),
    }
}

fn f(v: f64) -> Cell {
    Cell::Float(v)
}

fn i(v: i64) -> Cell {
    Cell::Int(v)
}

/// γ > 0, γ < γₛ(μ/2) and 0 < |ν| < 1.
fn synthesis_regime(p: &Params) -> Result<(), CliError> {
    check_synthesis_regime(p)?;
    if !(p.nu != 0.0 && p.nu.abs() < 1.0) {
        return Err(CliError::regime(format!("need 0 < |nu| < 1, got nu = {}", p.nu)));
    }
    Ok(())
}

/// Real state Σ cₙfₙ with zero mass: c₋ₙ = conj cₙ, |cₙ| ≲ 1/n².
fn seeded_state(basis: &Basis, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = vec![ZERO; basis.len()];
    for k in 1..=basis.n_max as i64 {
        let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (k * k) as f64;
        c[basis.slot(k)] = v;
        c[basis.slot(-k)] = v.conj();
    }
    c
}

#[derive(Serialize)]
struct SpectrumData {
    max_drift_conservative: f64,
    max_drift_damped: f64,
    max_abs_re_conservative: f64,
}

fn spectrum(cfg: &RunConfig, p: &Params) -> Result<bool, CliError> {
    let mut w = Writer::new(cfg)?;
    let mut checks = Checks::default();
    let n = p.n_modes;
    let mut data = SpectrumData {
        max_drift_conservative: 0.0,
        max_drift_damped: 0.0,
        max_abs_re_conservative: 0.0,
    };
    for (label, bc) in [("conservative", BcKind::Conservative), ("damped", BcKind::Damped(p.mu))] {
        let b = build_basis(p, bc, n)?;
        let mut t = Table::new(&format!("spectrum_{label}"), &["n", "re", "im", "drift", "ode_error"]);
        let mut worst = 0.0f64;
        for e in &b.pairs {
            let drift = (e.eigenvalue - bc.unperturbed_eigenvalue(p.length, e.mode_index)).norm();
            worst = worst.max(drift);
            if label == "conservative" {
                data.max_abs_re_conservative = data.max_abs_re_conservative.max(e.eigenvalue.re.abs());
            }
            t.push(vec![i(e.mode_index), f(e.eigenvalue.re), f(e.eigenvalue.im), f(drift), f(e.ode_error)]);
        }
        w.table(&t)?;
        if cfg.eigenfunctions {
            let mut ef = Table::new(&format!("eigenfunctions_{label}"), &["n", "x", "re_f1", "im_f1", "re_f2", "im_f2"]);
            for e in &b.pairs {
                for (x, s) in b.grid().nodes().zip(e.func.samples()) {
                    ef.push(vec![i(e.mode_index), f(x), f(s[0].re), f(s[0].im), f(s[1].re), f(s[1].im)]);
                }
            }
            w.table(&ef)?;
        }
        if label == "conservative" {
            data.max_drift_conservative = worst;
        } else {
            data.max_drift_damped = worst;
        }
    }
    if p.gamma == 0.0 {
        checks.tol("unperturbed_match", 1e-9);
        checks.below("conservative drift", data.max_drift_conservative, 1e-9);
        checks.below("damped drift", data.max_drift_damped, 1e-9);
    } else {
        let bound = 1.0 / (4.0 * p.length);
        checks.tol("localization_radius", bound);
        checks.tol("imaginary_axis", 1e-8);
        checks.below("conservative drift", data.max_drift_conservative, bound);
        checks.below("conservative |Re|", data.max_abs_re_conservative, 1e-8);
    }
    w.finish("spectrum", &checks, &data)?;
    Ok(true)
}

#[derive(Serialize)]
struct SourceMoments {
    gamma: f64,
    uncontrollable: Vec<i64>,
    riesz_lower: f64,
    riesz_upper: f64,
    max_drift: f64,
    c_lower: f64,
    c_upper: f64,
    control_lower: f64,
    control_upper: f64,
    missing_direction: f64,
    riesz_ok: bool,
    psi_chi_ok: bool,
    drift_ok: bool,
    moments_ok: bool,
    missing_direction_ok: bool,
    gamma_zero_pattern: bool,
}

#[derive(Serialize)]
struct TargetMoments {
    gamma: f64,
    min_modulus: f64,
    max_defect: f64,
}

fn controllability(cfg: &RunConfig, p: &Params) -> Result<bool, CliError> {
    if p.gamma < 0.0 {
        return Err(CliError::regime(format!("need gamma >= 0, got gamma = {}", p.gamma)));
    }
    let mut w = Writer::new(cfg)?;
    let mut checks = Checks::default();
    match cfg.system {
        System::Source => {
            let b = build_basis(p, BcKind::Conservative, p.n_modes)?;
            let r = controllability_report(p, &b)?;
            let mut t = Table::new(
                "moments",
                &[
                    "n", "re_mu", "im_mu", "re_b", "im_b", "abs_b", "re_a", "im_a", "re_control", "im_control",
                    "re_psi_chi", "im_psi_chi",
                ],
            );
            for row in &r.rows {
                t.push(vec![
                    i(row.n),
                    f(row.eigenvalue.re),
                    f(row.eigenvalue.im),
                    f(row.b.re),
                    f(row.b.im),
                    f(row.b.norm()),
                    f(row.a.re),
                    f(row.a.im),
                    f(row.control_moment.re),
                    f(row.control_moment.im),
                    f(row.psi_chi.re),
                    f(row.psi_chi.im),
                ]);
            }
            w.table(&t)?;
            checks.tol("moment_floor", MOMENT_FLOOR);
            let pattern = r.is_gamma_zero_pattern();
            let verdict = if p.gamma == 0.0 { pattern } else { r.all_pass() };
            let flag = |ok: bool| if ok { 1.0 } else { 0.0 };
            if p.gamma == 0.0 {
                checks.above("gamma=0 pattern (even modes only)", flag(pattern), 0.5);
            } else {
                checks.above("riesz bounds", flag(r.riesz_ok), 0.5);
                checks.above("psi-chi pairing", flag(r.psi_chi_ok), 0.5);
                checks.above("eigenvalue drift", flag(r.drift_ok), 0.5);
                checks.above("moment bounds", flag(r.moments_ok), 0.5);
                checks.above("c_lower", r.c_lower, 0.0);
            }
            checks.above("missing direction", flag(r.missing_direction_ok), 0.5);
            let data = SourceMoments {
                gamma: r.gamma,
                uncontrollable: r.uncontrollable.clone(),
                riesz_lower: r.riesz_bounds.0,
                riesz_upper: r.riesz_bounds.1,
                max_drift: r.max_drift,
                c_lower: r.c_lower,
                c_upper: r.c_upper,
                control_lower: r.control_bounds.0,
                control_upper: r.control_bounds.1,
                missing_direction: r.missing_direction,
                riesz_ok: r.riesz_ok,
                psi_chi_ok: r.psi_chi_ok,
                drift_ok: r.drift_ok,
                moments_ok: r.moments_ok,
                missing_direction_ok: r.missing_direction_ok,
                gamma_zero_pattern: pattern,
            };
            w.finish("controllability", &checks, &data)?;
            if !verdict {
                return Err(CliError::regime(format!(
                    "moment conditions fail at gamma = {} (uncontrollable modes {:?})",
                    p.gamma, r.uncontrollable
                )));
            }
            Ok(true)
        }
        System::Target => {
            if !(p.mu * p.length > 3.0) {
                return Err(CliError::regime(format!(
                    "target moments need mu > 3/L: mu = {}, 3/L = {}",
                    p.mu,
                    3.0 / p.length
                )));
            }
            let b = build_basis(p, BcKind::Damped(p.mu), p.n_modes)?;
            let m = target_moments(p, &b)?;
            let mut t = Table::new("target_moments", &["n", "re_mu", "im_mu", "re_moment", "im_moment", "unperturbed", "defect"]);
            let (mut min_mod, mut defect) = (f64::INFINITY, 0.0f64);
            for (e, v) in b.pairs.iter().zip(&m) {
                let u = unperturbed_target_moment(p, e.mode_index);
                let d = (v - u).norm();
                min_mod = min_mod.min(v.norm());
                defect = defect.max(d);
                t.push(vec![i(e.mode_index), f(e.eigenvalue.re), f(e.eigenvalue.im), f(v.re), f(v.im), f(u), f(d)]);
            }
            w.table(&t)?;
            checks.tol("moment_floor", MOMENT_FLOOR);
            let ok = checks.above("min |moment|", min_mod, MOMENT_FLOOR);
            let data = TargetMoments {
                gamma: p.gamma,
                min_modulus: min_mod,
                max_defect: defect,
            };
            w.finish("controllability", &checks, &data)?;
            if !ok {
                return Err(CliError::regime("a target moment vanishes".into()));
            }
            Ok(true)
        }
    }
}

fn law_for(p: &Params) -> Result<(Basis, FeedbackLaw), CliError> {
    let b = build_basis(p, BcKind::Conservative, p.n_modes)?;
    let law = feedback_coefficients(p, &b, &virtual_profile(p, &b)?)?;
    Ok((b, law))
}

#[derive(Serialize)]
struct FeedbackData {
    mass_gain_re: f64,
    mass_gain_im: f64,
    tail: f64,
    tail_ok: bool,
    max_conjugate_gap: f64,
    physical_mu_internal: f64,
    physical_output_scale: f64,
    physical_u2_re: f64,
    physical_u2_im: f64,
    physical_consistency: f64,
}

fn feedback(cfg: &RunConfig, p: &Params) -> Result<bool, CliError> {
    synthesis_regime(p)?;
    let mut w = Writer::new(cfg)?;
    let mut checks = Checks::default();
    let (b, law) = law_for(p)?;
    let split = singular_split(p, &law, &b)?;
    let mut t = Table::new(
        "feedback",
        &["n", "re_mu", "im_mu", "re_gain", "im_gain", "re_tau", "im_tau", "re_singular", "im_singular"],
    );
    for (k, e) in b.pairs.iter().enumerate() {
        t.push(vec![
            i(e.mode_index),
            f(e.eigenvalue.re),
            f(e.eigenvalue.im),
            f(law.coeffs[k].re),
            f(law.coeffs[k].im),
            f(law.tau[k].re),
            f(law.tau[k].im),
            f(split.singular[k].re),
            f(split.singular[k].im),
        ]);
    }
    w.table(&t)?;
    let gap = (1..=p.n_modes as i64)
        .map(|n| (law.coeff(-n) - law.coeff(n).conj()).norm() / law.coeff(n).norm())
        .fold(law.coeff(0).im.abs(), f64::max);
    let phys = physical_feedback(p)?;
    let mut pt = Table::new("feedback_physical", &["n", "re_gain", "im_gain"]);
    for (k, c) in phys.coeffs.iter().enumerate() {
        pt.push(vec![i(k as i64 - p.n_modes as i64), f(c.re), f(c.im)]);
    }
    w.table(&pt)?;
    checks.tol("reality", 1e-10);
    checks.tol("physical_consistency", 1e-6);
    checks.below("conjugate symmetry", gap, 1e-10);
    checks.above("square-summable tail", if split.tail_ok { 1.0 } else { 0.0 }, 0.5);
    checks.below("physical consistency", phys.consistency(), 1e-6);
    let g0 = law.coeff(0);
    let data = FeedbackData {
        mass_gain_re: g0.re,
        mass_gain_im: g0.im,
        tail: split.tail,
        tail_ok: split.tail_ok,
        max_conjugate_gap: gap,
        physical_mu_internal: phys.mu_internal,
        physical_output_scale: phys.output_scale,
        physical_u2_re: phys.u2_coefficient.re,
        physical_u2_im: phys.u2_coefficient.im,
        physical_consistency: phys.consistency(),
    };
    w.finish("feedback", &checks, &data)?;
    Ok(true)
}

/// Reads `n, re_gain, im_gain` from a table written by `feedback`.
fn read_gains(path: &Path, law: &FeedbackLaw) -> Result<Vec<C64>, CliError> {
    let bad = |m: String| CliError::config(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (cn, cr, ci) = (col("n")?, col("re_gain")?, col("im_gain")?);
    let mut gains = vec![None; law.coeffs.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |c: usize| rec.get(c).unwrap_or("").trim().to_string();
        let n: i64 = num(cn).parse().map_err(|_| bad(format!("bad mode index `{}`", num(cn))))?;
        let re: f64 = num(cr).parse().map_err(|_| bad(format!("bad value `{}`", num(cr))))?;
        let im: f64 = num(ci).parse().map_err(|_| bad(format!("bad value `{}`", num(ci))))?;
        if n.unsigned_abs() as usize > law.n_max {
            return Err(bad(format!("mode {n} outside n_modes = {}", law.n_max)));
        }
        gains[law.slot(n)] = Some(C64::new(re, im));
    }
    gains
        .into_iter()
        .enumerate()
        .map(|(k, g)| g.ok_or_else(|| bad(format!("no gain for mode {}", k as i64 - law.n_max as i64))))
        .collect()
}

#[derive(Serialize)]
struct SimulateData {
    gains: &'static str,
    window_start: f64,
    window_end: f64,
    rate: f64,
    r2: f64,
    required_rate: f64,
    max_mass_mode: f64,
    max_imaginary: f64,
    mass_drift: f64,
    final_norm_ratio: f64,
}

fn simulate(cfg: &RunConfig, p: &Params) -> Result<bool, CliError> {
    synthesis_regime(p)?;
    let (b, mut law) = law_for(p)?;
    let gains = match &cfg.feedback_table {
        Some(path) => {
            law.coeffs = read_gains(Path::new(path), &law)?;
            "table"
        }
        None => "inline",
    };
    let mut w = Writer::new(cfg)?;
    let mut checks = Checks::default();
    let init = seeded_state(&b, cfg.seed);
    let tr = integrate_closed_loop(p, &b, &law, &init, ZERO)?;
    let mut t = Table::new(
        "trajectory",
        &["t", "norm_l2", "norm_domain", "re_mass", "im_mass", "re_u", "im_u", "re_zeta0", "im_zeta0"],
    );
    for k in 0..tr.len() {
        t.push(vec![
            f(tr.times[k]),
            f(tr.norm_l2[k]),
            f(tr.norm_domain[k]),
            f(tr.mass[k].re),
            f(tr.mass[k].im),
            f(tr.control[k].re),
            f(tr.control[k].im),
            f(tr.zeta0[k].re),
            f(tr.zeta0[k].im),
        ]);
    }
    w.table(&t)?;
    let t_end = *tr.times.last().unwrap_or(&0.0);
    let start = (5.0 / p.mu).min(t_end / 2.0);
    let end = (15.0 / p.mu).min(t_end);
    let fit = decay_rate_estimate(&tr, NormKind::Domain, (start, end))?;
    let need = 0.7 * 0.75 * p.mu;
    let zero = b.slot(0);
    let max_mass_mode = tr.coeffs.iter().map(|c| c[zero].norm()).fold(0.0, f64::max);
    let max_imag = tr
        .control
        .iter()
        .chain(&tr.zeta0)
        .map(|v| v.im.abs())
        .chain(tr.coeffs.iter().flat_map(|c| (1..=b.n_max as i64).map(|n| (c[b.slot(-n)] - c[b.slot(n)].conj()).norm())))
        .fold(0.0, f64::max);
    checks.tol("min_r2", 0.98);
    checks.tol("reality", 1e-10);
    checks.tol("mass_mode", 1e-8);
    checks.above("decay rate", fit.rate, need);
    checks.above("fit R^2", fit.r2, 0.98);
    checks.below("mass mode", max_mass_mode, 1e-8);
    checks.below("reality", max_imag, 1e-10);
    let data = SimulateData {
        gains,
        window_start: start,
        window_end: end,
        rate: fit.rate,
        r2: fit.r2,
        required_rate: need,
        max_mass_mode,
        max_imaginary: max_imag,
        mass_drift: tr.mass_drift(),
        final_norm_ratio: tr.norm_domain.last().copied().unwrap_or(0.0) / tr.norm_domain[0],
    };
    w.finish("simulate", &checks, &data)?;
    Ok(true)
}

#[derive(Serialize)]
struct LyapunovData {
    lambda: f64,
    gamma_s: f64,
    feasible: bool,
    eta_at_l: f64,
    min_xi_minus_eta: f64,
    v_drift: f64,
}

fn lyapunov(cfg: &RunConfig, p: &Params) -> Result<bool, CliError> {
    let lam = cfg.lambda.unwrap_or(p.mu / 2.0);
    let gs = gamma_s(p, lam);
    if !(p.gamma > 0.0 && p.gamma < gs) {
        return Err(CliError::regime(format!(
            "need 0 < gamma < gamma_s(lambda): gamma = {}, gamma_s({lam}) = {gs:.6}",
            p.gamma
        )));
    }
    let cert = lyapunov_certificate(p, lam)?;
    let mut w = Writer::new(cfg)?;
    let mut checks = Checks::default();
    let mut t = Table::new("certificate", &["x", "eta", "xi", "theta1", "theta2"]);
    for k in 0..cert.nodes.len() {
        t.push(vec![f(cert.nodes[k]), f(cert.eta[k]), f(cert.xi[k]), f(cert.theta1[k]), f(cert.theta2[k])]);
    }
    w.table(&t)?;
    let mut g = Table::new("gamma_s", &["lambda", "gamma_s"]);
    for k in 1..=cfg.lambda_steps {
        let l = p.mu * k as f64 / (cfg.lambda_steps + 1) as f64;
        g.push(vec![f(l), f(gamma_s(p, l))]);
    }
    w.table(&g)?;

    let b = build_basis(p, BcKind::Damped(p.mu), p.n_modes)?;
    let mut init = seeded_state(&b, cfg.seed);
    init[b.slot(0)] = C64::new(0.5, 0.0);
    let steps = 200;
    let horizon = 10.0 / p.mu;
    let times: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    let tr = integrate_target(p, &b, &init, &times)?;
    let v0 = cert.value_graph(&b, &tr.coeffs[0])?;
    let mut v = Table::new("value", &["t", "v", "v_scaled"]);
    let mut drift = 0.0f64;
    for (s, c) in tr.times.iter().zip(&tr.coeffs) {
        let val = cert.value_graph(&b, c)?;
        let scaled = val * (2.0 * lam * s).exp() / v0;
        drift = drift.max(scaled - 1.0);
        v.push(vec![f(*s), f(val), f(scaled)]);
    }
    w.table(&v)?;
    let eta_l = *cert.eta.last().unwrap_or(&f64::INFINITY);
    checks.tol("v_drift", 1e-3);
    checks.above("feasible", if cert.feasible { 1.0 } else { 0.0 }, 0.5);
    checks.below("eta(L) - 1", eta_l - 1.0, 1e-15);
    checks.above("min (xi - eta)", cert.comparison_gap(), -1e-12);
    checks.below("V drift", drift, 1e-3);
    let data = LyapunovData {
        lambda: lam,
        gamma_s: gs,
        feasible: cert.feasible,
        eta_at_l: eta_l,
        min_xi_minus_eta: cert.comparison_gap(),
        v_drift: drift,
    };
    w.finish("lyapunov", &checks, &data)?;
    Ok(true)
}

#[derive(Serialize)]
struct SteerData {
    target_mode: i64,
    horizon: f64,
    control_l2: f64,
    relative_error: f64,
    mass_drift: f64,
    dual_condition: f64,
}

fn steer(cfg: &RunConfig, p: &Params) -> Result<bool, CliError> {
    let m = cfg.target_mode;
    if m < 1 || m as usize > p.n_modes {
        return Err(CliError::config(format!("target_mode = {m} must lie in 1..={}", p.n_modes)));
    }
    let b = build_basis(p, BcKind::Conservative, p.n_modes)?;
    let d = dual_exponentials(&b.eigenvalues(), &steering_grid(p)?)?;
    let rest = vec![ZERO; b.len()];
    let mut target = rest.clone();
    target[b.slot(m)] = C64::new(cfg.target_amplitude, 0.0);
    target[b.slot(-m)] = C64::new(cfg.target_amplitude, 0.0);
    let u = synthesize_open_loop(p, &b, &d, &target)?;
    let tr = integrate_open_loop(p, &b, &rest, &u)?;
    let mut w = Writer::new(cfg)?;
    let mut checks = Checks::default();
    let mut ct = Table::new("control", &["t", "re_u", "im_u"]);
    for (s, v) in u.times.iter().zip(&u.values) {
        ct.push(vec![f(*s), f(v.re), f(v.im)]);
    }
    w.table(&ct)?;
    let last = tr.coeffs.last().cloned().unwrap_or_else(|| rest.clone());
    let mut tt = Table::new("terminal", &["n", "re_target", "im_target", "re_reached", "im_reached"]);
    for (k, e) in b.pairs.iter().enumerate() {
        tt.push(vec![i(e.mode_index), f(target[k].re), f(target[k].im), f(last[k].re), f(last[k].im)]);
    }
    w.table(&tt)?;
    let err: f64 = last.iter().zip(&target).map(|(a, t)| (a - t).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = target.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
    let rel = if scale > 0.0 { err / scale } else { err };
    checks.tol("terminal_error", 5e-2);
    checks.tol("mass_drift", 1e-6);
    checks.below("terminal relative error", rel, 5e-2);
    checks.below("mass drift", tr.mass_drift(), 1e-6);
    let data = SteerData {
        target_mode: m,
        horizon: u.horizon(),
        control_l2: u.l2_norm(),
        relative_error: rel,
        mass_drift: tr.mass_drift(),
        dual_condition: d.condition,
    };
    w.finish("steer", &checks, &data)?;
    Ok(true)
}

#[derive(Serialize)]
struct FiniteData {
    dim: usize,
    poles: Vec<f64>,
    operator_residual: f64,
    tb_residual: f64,
    max_pole_error: f64,
}

fn finite_demo(cfg: &RunConfig) -> Result<bool, CliError> {
    let n = cfg.fd_dim;
    if n == 0 || n > MAX_DIM {
        return Err(CliError::config(format!("fd_dim = {n} must lie in 1..={MAX_DIM}")));
    }
    let poles = cfg
        .fd_poles
        .clone()
        .unwrap_or_else(|| (1..=n).map(|k| -(k as f64)).collect());
    if poles.len() != n {
        return Err(CliError::config(format!("fd_poles has {} entries, fd_dim = {n}", poles.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let pair = LinearPair::new(a, b)?;
    // Target with the requested poles and the same B: Tc⁻¹ companion(p) Tc.
    let mut coeffs = vec![1.0];
    for r in &poles {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= r * c;
        }
        coeffs = next;
    }
    coeffs.pop();
    let (tc, _) = to_canonical(&pair)?;
    let tinv = tc
        .clone()
        .try_inverse()
        .ok_or_else(|| CliError::from(tankstab::Error::Numerical("canonical transform is singular".into())))?;
    let target = LinearPair::new(&tinv * companion(&coeffs) * &tc, pair.b.clone())?;
    let (t, k) = backstep_pair(&pair, &target)?;
    let (op, tb) = residuals(&pair, &target, &t, &k);
    let closed = &pair.a + &pair.b * &k;
    let mut eig: Vec<C64> = closed.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut want = poles.clone();
    want.sort_by(f64::total_cmp);
    let pole_err = eig.iter().zip(&want).map(|(e, w)| (e - w).norm()).fold(0.0, f64::max);

    let mut w = Writer::new(cfg)?;
    let mut checks = Checks::default();
    let mut tt = Table::new("transform", &["row", "col", "value"]);
    for r in 0..n {
        for c in 0..n {
            tt.push(vec![i(r as i64), i(c as i64), f(t[(r, c)])]);
        }
    }
    w.table(&tt)?;
    let mut kt = Table::new("gain", &["col", "value"]);
    for c in 0..n {
        kt.push(vec![i(c as i64), f(k[c])]);
    }
    w.table(&kt)?;
    let mut et = Table::new("closed_loop_eigenvalues", &["re", "im"]);
    for e in &eig {
        et.push(vec![f(e.re), f(e.im)]);
    }
    w.table(&et)?;
    checks.tol("residual", 1e-10);
    checks.tol("pole_match", 1e-8);
    checks.below("operator residual", op, 1e-10);
    checks.below("TB = B residual", tb, 1e-10);
    checks.below("pole error", pole_err, 1e-8);
    let data = FiniteData {
        dim: n,
        poles,
        operator_residual: op,
        tb_residual: tb,
        max_pole_error: pole_err,
    };
    w.finish("finite-demo", &checks, &data)?;
    Ok(true)
}

#[derive(Serialize)]
struct Criterion {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    budget_seconds: Option<f64>,
}

#[derive(Serialize)]
struct ReportData {
    passed: usize,
    total: usize,
    criteria: Vec<Criterion>,
}

fn report(cfg: &RunConfig) -> Result<bool, CliError> {
    let outcomes = acceptance::run_all();
    let w = Writer::new(cfg)?;
    let mut checks = Checks::default();
    for o in &outcomes {
        println!("{}", o.line());
        checks.above(format!("{} {}", o.id, o.name), if o.pass { 1.0 } else { 0.0 }, 0.5);
    }
    let data = ReportData {
        passed: outcomes.iter().filter(|o| o.pass).count(),
        total: outcomes.len(),
        criteria: outcomes
            .into_iter()
            .map(|o| Criterion {
                id: o.id,
                name: o.name,
                pass: o.pass,
                detail: o.detail,
                budget_seconds: o.budget_seconds,
            })
            .collect(),
    };
    w.finish("report", &checks, &data)
}
