//! Time integration (modal and finite-difference), Lyapunov certificate and
//! decay-rate fits.

use nalgebra::DMatrix;

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::model::{control_profile, delta, inner_product, mass_of_zeta, Grid, GridFunction2, Params};
use crate::spectral::{Basis, BcKind};
use crate::C64;

/// Which norm of a trajectory to look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    /// Graph norm of the generator: (∥z∥² + ∥𝒜z∥²)^{1/2}.
    Domain,
}

/// Sampled solution in modal coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<C64>>,
    pub zeta0: Vec<C64>,
    pub control: Vec<C64>,
    pub norm_l2: Vec<f64>,
    pub norm_domain: Vec<f64>,
    pub mass: Vec<C64>,
    /// Number of rejected steps that were retried with half the step.
    pub halvings: usize,
}

impl Trajectory {
    pub fn norm(&self, kind: NormKind) -> &[f64] {
        match kind {
            NormKind::L2 => &self.norm_l2,
            NormKind::Domain => &self.norm_domain,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest |m(t) − m(0)|.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or_default();
        self.mass.iter().map(|m| (m - m0).norm()).fold(0.0, f64::max)
    }
}

/// Mass weights mₙ = mass(fₙ) of the basis functions.
pub fn mass_weights(params: &Params, basis: &Basis) -> Result<Vec<C64>> {
    basis.pairs.iter().map(|p| mass_of_zeta(params, &p.func)).collect()
}

fn check_len(basis: &Basis, v: &[C64]) -> Result<()> {
    if v.len() != basis.len() {
        return Err(Error::Usage(format!(
            "{} coefficients for a basis of {} modes",
            v.len(),
            basis.len()
        )));
    }
    Ok(())
}

/// Integrating-factor (Lawson) RK4 for y' = d∘y + g(t, y) with diagonal d.
///
/// The diagonal part is propagated exactly, so free modes keep their modulus.
fn lawson_step<G>(d: &[C64], g: &G, y: &[C64], t: f64, h: f64) -> Vec<C64>
where
    G: Fn(f64, &[C64]) -> Vec<C64>,
{
    let e: Vec<C64> = d.iter().map(|v| (v * (h / 2.0)).exp()).collect();
    let n = y.len();
    let k1 = g(t, y);
    let a: Vec<C64> = (0..n).map(|i| e[i] * (y[i] + k1[i] * (h / 2.0))).collect();
    let k2 = g(t + h / 2.0, &a);
    let b: Vec<C64> = (0..n).map(|i| e[i] * y[i] + k2[i] * (h / 2.0)).collect();
    let k3 = g(t + h / 2.0, &b);
    let c: Vec<C64> = (0..n).map(|i| e[i] * e[i] * y[i] + e[i] * k3[i] * h).collect();
    let k4 = g(t + h, &c);
    (0..n)
        .map(|i| {
            let e2 = e[i] * e[i];
            e2 * y[i] + (e2 * k1[i] + e[i] * (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0)
        })
        .collect()
}

fn finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Closed loop with the dynamic extension ζ̇₀ = ν u.
///
/// ċₙ = −μₙcₙ + u⟨ℐ, fₙ⟩ and u = Σ Zₙ Gₙ with Z = c + ζ₀ e₀. Norms are those
/// of the extended state Z.
pub fn integrate_closed_loop(
    params: &Params,
    basis: &Basis,
    law: &FeedbackLaw,
    init: &[C64],
    zeta0_init: C64,
) -> Result<Trajectory> {
    check_len(basis, init)?;
    if law.coeffs.len() != basis.len() {
        return Err(Error::Usage("law and basis must share the truncation".into()));
    }
    let zero = basis.slot(0);
    if init[zero].norm() > 1e-12 {
        return Err(Error::Usage("initial data must have zero mass (mode-0 component)".into()));
    }
    let mu = basis.eigenvalues();
    let profile = control_profile(params, basis.grid())?;
    let moments = basis
        .pairs
        .iter()
        .map(|p| inner_product(&profile, &p.func))
        .collect::<Result<Vec<_>>>()?;
    let masses = mass_weights(params, basis)?;
    let k = basis.len();
    let nu = law.nu;
    let gains = law.coeffs.clone();
    let control = |y: &[C64]| -> C64 {
        let mut u: C64 = y[..k].iter().zip(&gains).map(|(c, g)| c * g).sum();
        u += y[k] * gains[zero];
        u
    };
    let mut diag: Vec<C64> = mu.iter().map(|m| -m).collect();
    diag.push(C64::new(0.0, 0.0));
    let forcing = |_t: f64, y: &[C64]| -> Vec<C64> {
        let u = control(y);
        let mut out: Vec<C64> = moments.iter().map(|m| u * m).collect();
        out.push(u * nu);
        out
    };
    let mut y: Vec<C64> = init.to_vec();
    y.push(zeta0_init);
    let record = |traj: &mut Trajectory, t: f64, y: &[C64]| {
        let mut ext = y[..k].to_vec();
        ext[zero] += y[k];
        let (l2, dom) = modal_norms(&mu, &ext);
        traj.times.push(t);
        traj.mass.push(y[..k].iter().zip(&masses).map(|(c, m)| c * m).sum());
        traj.control.push(control(y));
        traj.zeta0.push(y[k]);
        traj.coeffs.push(y[..k].to_vec());
        traj.norm_l2.push(l2);
        traj.norm_domain.push(dom);
    };
    march(params, &mu, &diag, y, forcing, record)
}

fn modal_norms(mu: &[C64], c: &[C64]) -> (f64, f64) {
    let l2: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    let d: f64 = c.iter().zip(mu).map(|(v, m)| v.norm_sqr() * m.norm_sqr()).sum();
    (l2.sqrt(), (l2 + d).sqrt())
}

fn march<F, R>(
    params: &Params,
    mu: &[C64],
    diag: &[C64],
    mut y: Vec<C64>,
    forcing: F,
    mut record: R,
) -> Result<Trajectory>
where
    F: Fn(f64, &[C64]) -> Vec<C64>,
    R: FnMut(&mut Trajectory, f64, &[C64]),
{
    let stiff = mu.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let cap = if stiff > 0.0 { 0.5 / stiff } else { f64::INFINITY };
    let dt_max = params.dt.min(cap);
    let steps = (params.t_final / dt_max).ceil().max(1.0) as usize;
    let dt = params.t_final / steps as f64;
    let mut traj = Trajectory::default();
    record(&mut traj, 0.0, &y);
    for s in 0..steps {
        let t = s as f64 * dt;
        let mut next = lawson_step(diag, &forcing, &y, t, dt);
        let mut h = dt;
        let mut tries = 0;
        while !finite(&next) {
            tries += 1;
            traj.halvings += 1;
            if tries > 10 {
                return Err(Error::Numerical(format!("integration blew up at t = {t}")));
            }
            h /= 2.0;
            let mut z = y.clone();
            for j in 0..(1 << tries) {
                z = lawson_step(diag, &forcing, &z, t + j as f64 * h, h);
            }
            next = z;
        }
        y = next;
        record(&mut traj, (s + 1) as f64 * dt, &y);
    }
    Ok(traj)
}

/// Open-loop run driven by a sampled control (zero past its horizon).
///
/// The step is twice the sampling step so that the RK4 stages fall on samples.
pub fn integrate_open_loop(
    params: &Params,
    basis: &Basis,
    init: &[C64],
    control: &ControlSignal,
) -> Result<Trajectory> {
    check_len(basis, init)?;
    if control.times.len() < 3 {
        return Err(Error::Usage("control needs at least three samples".into()));
    }
    let mu = basis.eigenvalues();
    let profile = control_profile(params, basis.grid())?;
    let moments = basis
        .pairs
        .iter()
        .map(|p| inner_product(&profile, &p.func))
        .collect::<Result<Vec<_>>>()?;
    let masses = mass_weights(params, basis)?;
    let h = control.times[1] - control.times[0];
    let steps = (control.times.len() - 1) / 2;
    let diag: Vec<C64> = mu.iter().map(|m| -m).collect();
    let mut traj = Trajectory::default();
    let mut y = init.to_vec();
    let push = |traj: &mut Trajectory, t: f64, y: &[C64], u: C64| {
        let (l2, dom) = modal_norms(&mu, y);
        traj.times.push(t);
        traj.coeffs.push(y.to_vec());
        traj.zeta0.push(C64::new(0.0, 0.0));
        traj.control.push(u);
        traj.norm_l2.push(l2);
        traj.norm_domain.push(dom);
        traj.mass.push(y.iter().zip(&masses).map(|(c, m)| c * m).sum());
    };
    push(&mut traj, 0.0, &y, control.value_at_index(0));
    for s in 0..steps {
        let i = 2 * s;
        let u = [control.value_at_index(i), control.value_at_index(i + 1), control.value_at_index(i + 2)];
        let t0 = control.times[i];
        // Stage times t, t + h, t + h, t + 2h fall on samples i, i+1, i+1, i+2.
        let forcing = |t: f64, _y: &[C64]| -> Vec<C64> {
            let j = ((t - t0) / h).round() as usize;
            moments.iter().map(|b| u[j] * b).collect()
        };
        y = lawson_step(&diag, &forcing, &y, t0, 2.0 * h);
        if !finite(&y) {
            return Err(Error::Numerical(format!("open-loop run blew up at step {s}")));
        }
        push(&mut traj, control.times[i + 2], &y, u[2]);
    }
    Ok(traj)
}

/// Exact modal solution cₚ(t) = e^{−μ̃ₚ t} cₚ(0) of the target system.
///
/// Norms use the Gram matrix of the (non-orthogonal) damped basis.
pub fn integrate_target(params: &Params, basis: &Basis, init: &[C64], times: &[f64]) -> Result<Trajectory> {
    check_len(basis, init)?;
    let mu = basis.eigenvalues();
    let gram = crate::spectral::gram_between(&basis.pairs, &basis.pairs)?;
    let masses = mass_weights(params, basis)?;
    let quad = |c: &[C64]| -> f64 {
        let v = nalgebra::DVector::from_column_slice(c);
        // ∥Σ cₚ f̃ₚ∥² = Σ cₚ c̄_q ⟨f̃ₚ, f̃_q⟩.
        let g: &DMatrix<C64> = &gram;
        (v.transpose() * g * v.conjugate())[(0, 0)].re.max(0.0)
    };
    let mut traj = Trajectory::default();
    for &t in times {
        let c: Vec<C64> = init.iter().zip(&mu).map(|(c, m)| c * (-m * t).exp()).collect();
        let ac: Vec<C64> = c.iter().zip(&mu).map(|(c, m)| c * m).collect();
        let l2 = quad(&c);
        traj.times.push(t);
        traj.norm_l2.push(l2.sqrt());
        traj.norm_domain.push((l2 + quad(&ac)).sqrt());
        traj.mass.push(c.iter().zip(&masses).map(|(c, m)| c * m).sum());
        traj.zeta0.push(C64::new(0.0, 0.0));
        traj.control.push(C64::new(0.0, 0.0));
        traj.coeffs.push(c);
    }
    Ok(traj)
}

/// First-order upwind scheme for ζ_t = −𝒜ζ + u ℐ on a fixed grid.
#[derive(Debug, Clone)]
pub struct Upwind {
    grid: Grid,
    bc: BcKind,
    dt: f64,
    /// δ/3 at the nodes.
    coupling: Vec<f64>,
    profile: Vec<f64>,
}

impl Upwind {
    pub fn new(params: &Params, bc: BcKind, dt: f64) -> Result<Self> {
        params.validate()?;
        let grid = params.grid();
        let cfl = dt / grid.step();
        if !(dt > 0.0) || cfl > 1.0 + 1e-12 {
            return Err(Error::Config(format!("CFL number {cfl:.4} must lie in (0, 1]")));
        }
        let coupling = grid.nodes().map(|z| delta(params, z).map(|d| d / 3.0)).collect::<Result<_>>()?;
        let profile = control_profile(params, &grid)?.samples().iter().map(|s| s[0].re).collect();
        Ok(Upwind {
            grid,
            bc,
            dt,
            coupling,
            profile,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, state: &GridFunction2, u: C64) -> Result<GridFunction2> {
        if state.grid() != &self.grid {
            return Err(Error::Usage("state lives on a different grid".into()));
        }
        let r = self.dt / self.grid.step();
        let s = state.samples();
        let n = s.len();
        let mut out = s.to_vec();
        for i in 0..n {
            let src1 = -s[i][1] * self.coupling[i] + u * self.profile[i];
            let src2 = s[i][0] * self.coupling[i] + u * self.profile[i];
            if i > 0 {
                out[i][0] = s[i][0] - (s[i][0] - s[i - 1][0]) * r + src1 * self.dt;
            }
            if i + 1 < n {
                out[i][1] = s[i][1] + (s[i + 1][1] - s[i][1]) * r + src2 * self.dt;
            }
        }
        out[n - 1][1] = -out[n - 1][0];
        out[0][0] = -out[0][1] * self.bc.left_coefficient(self.grid.length());
        GridFunction2::new(self.grid.clone(), out)
    }
}

/// One upwind step; see [`Upwind`].
pub fn fd_upwind_step(params: &Params, state: &GridFunction2, bc: BcKind, u: C64, dt: f64) -> Result<GridFunction2> {
    Upwind::new(params, bc, dt)?.step(state, u)
}

/// Data of the weighted quadratic Lyapunov function of the target system.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub lambda: f64,
    pub nodes: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub gamma_s: f64,
    pub feasible: bool,
    pub blow_up_at: Option<f64>,
    /// Weights θ₁, θ₂ (empty when infeasible).
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
}

impl LyapunovCertificate {
    /// max (η − ξ) over the grid; ≤ 0 when the comparison holds.
    pub fn comparison_gap(&self) -> f64 {
        self.eta.iter().zip(&self.xi).map(|(e, x)| e - x).fold(f64::NEG_INFINITY, f64::max)
    }

    /// V(z) = ∫ θ₁|z₁|² + θ₂|z₂|².
    pub fn value(&self, z: &GridFunction2) -> Result<f64> {
        if !self.feasible {
            return Err(Error::Regime("certificate is infeasible".into()));
        }
        if z.grid().len() != self.nodes.len() {
            return Err(Error::Usage("state grid differs from certificate grid".into()));
        }
        let v: Vec<f64> = z
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| self.theta1[i] * s[0].norm_sqr() + self.theta2[i] * s[1].norm_sqr())
            .collect();
        Ok(z.grid().integrate(&v))
    }

    /// V(z) + V(𝒜̃z) for z = Σ cₚ f̃ₚ, with 𝒜̃z formed from the modal derivative.
    pub fn value_graph(&self, basis: &Basis, coeffs: &[C64]) -> Result<f64> {
        check_len(basis, coeffs)?;
        let z = basis.synthesize(coeffs)?;
        let az: Vec<C64> = coeffs.iter().zip(&basis.pairs).map(|(c, p)| c * p.eigenvalue).collect();
        Ok(self.value(&z)? + self.value(&basis.synthesize(&az)?)?)
    }
}

/// min(7/(16L), 6λ(1 − e^{−2(μ−λ)L})/(e^{2λL} − 1)).
pub fn gamma_s(params: &Params, lambda: f64) -> f64 {
    let l = params.length;
    let b = 6.0 * lambda * (1.0 - (-2.0 * (params.mu - lambda) * l).exp()) / ((2.0 * lambda * l).exp() - 1.0);
    (7.0 / (16.0 * l)).min(b)
}

/// Checks 0 < γ < γₛ(μ/2), the regime the synthesis is built for.
pub fn check_synthesis_regime(params: &Params) -> Result<()> {
    let gs = gamma_s(params, params.mu / 2.0);
    if !(params.gamma > 0.0 && params.gamma < gs) {
        return Err(Error::Regime(format!(
            "need 0 < gamma < gamma_s(mu/2): gamma = {}, gamma_s = {gs:.6}",
            params.gamma
        )));
    }
    Ok(())
}

/// Integrates η' = |δ/3|(e^{−2λ(x−L)} − η² e^{2λ(x−L)}), η(0) = e^{−2(μ−λ)L}.
pub fn lyapunov_certificate(params: &Params, lambda: f64) -> Result<LyapunovCertificate> {
    params.validate()?;
    if !(lambda > 0.0 && lambda < params.mu) {
        return Err(Error::Usage(format!("need 0 < lambda < mu, got {lambda}")));
    }
    let grid = params.grid();
    let l = params.length;
    let h = grid.step();
    let c = |x: f64| delta(params, x.clamp(0.0, l)).map(|d| d.abs() / 3.0);
    let rhs = |x: f64, eta: f64| -> Result<f64> {
        let e = (2.0 * lambda * (x - l)).exp();
        Ok(c(x)? * (1.0 / e - eta * eta * e))
    };
    let nodes: Vec<f64> = grid.nodes().collect();
    let mut eta = vec![(-2.0 * (params.mu - lambda) * l).exp()];
    let mut blow_up_at = None;
    for i in 0..nodes.len() - 1 {
        let (x, y) = (nodes[i], eta[i]);
        let k1 = rhs(x, y)?;
        let k2 = rhs(x + h / 2.0, y + k1 * h / 2.0)?;
        let k3 = rhs(x + h / 2.0, y + k2 * h / 2.0)?;
        let k4 = rhs(x + h, y + k3 * h)?;
        let next = y + (k1 + 2.0 * (k2 + k3) + k4) * h / 6.0;
        if !next.is_finite() || next > 1e12 {
            blow_up_at = Some(nodes[i + 1]);
            break;
        }
        eta.push(next);
    }
    let dmax = nodes.iter().map(|&x| delta(params, x).map(f64::abs)).collect::<Result<Vec<_>>>()?;
    let dmax = dmax.into_iter().fold(0.0, f64::max);
    let xi: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            (-2.0 * (params.mu - lambda) * l).exp()
                + dmax / (6.0 * lambda) * ((2.0 * lambda * l).exp() - (2.0 * lambda * (l - x)).exp())
        })
        .collect();
    let complete = blow_up_at.is_none();
    let feasible = complete && eta.iter().all(|&e| e > 0.0) && *eta.last().unwrap() <= 1.0 + 1e-12;
    let (theta1, theta2) = if feasible {
        nodes
            .iter()
            .zip(&eta)
            .map(|(&x, &e)| {
                let w = (2.0 * lambda * (x - l)).exp();
                (1.0 / (w * e), e * w)
            })
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(LyapunovCertificate {
        lambda,
        nodes,
        eta,
        xi,
        gamma_s: gamma_s(params, lambda),
        feasible,
        blow_up_at,
        theta1,
        theta2,
    })
}

/// Least-squares line through (t, log y): rate = −slope, with R².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub r2: f64,
}

pub fn fit_decay(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Usage("decay fit needs at least three aligned samples".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Numerical(format!("non-positive norm {v} in decay window")));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let syy: f64 = logs.iter().map(|l| (l - lm).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit { rate: -slope, r2 })
}

/// Decay fit of one norm of a trajectory over the window [t0, t1].
pub fn decay_rate_estimate(traj: &Trajectory, kind: NormKind, window: (f64, f64)) -> Result<DecayFit> {
    let norms = traj.norm(kind);
    let (t, v): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t >= window.0 - 1e-12 && **t <= window.1 + 1e-12)
        .map(|(t, v)| (*t, *v))
        .unzip();
    fit_decay(&t, &v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_exponential_is_fitted_exactly() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect();
        let fit = fit_decay(&t, &v).unwrap();
        assert!((fit.rate - 1.7).abs() < 1e-6 && fit.r2 > 0.999999);
    }

    #[test]
    fn nonpositive_norms_are_rejected() {
        assert!(matches!(fit_decay(&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0]), Err(Error::Numerical(_))));
    }

    #[test]
    fn gamma_zero_certificate_is_constant() {
        let p = Params {
            gamma: 0.0,
            ..Params::default()
        };
        let c = lyapunov_certificate(&p, 1.0).unwrap();
        assert!(c.feasible);
        let e0 = (-2.0f64).exp();
        assert!(c.eta.iter().all(|e| (e - e0).abs() < 1e-15));
    }

    #[test]
    fn cfl_violation_is_a_config_error() {
        let p = Params::default();
        let dt = 1.5 * p.grid().step();
        assert!(matches!(Upwind::new(&p, BcKind::Conservative, dt), Err(Error::Config(_))));
    }
}
