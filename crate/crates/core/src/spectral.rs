//! Eigenstructure of the conservative operator 𝒜, the damped target
//! operator 𝒜̃ and their adjoints, computed by shooting.
//!
//! All four operators share the eigen-ODE
//!
//! ```text
//! f₁' =  λ f₁ − (δ/3) f₂
//! f₂' = −λ f₂ − (δ/3) f₁
//! ```
//!
//! (the adjoints use −λ) and differ only in the left boundary condition
//! f₁(0) + k f₂(0) = 0. The right condition is always f₁(L) + f₂(L) = 0.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{delta, exp_weight, inner_product, Grid, GridFunction2, Params};
use crate::C64;

/// Which operator's boundary conditions to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcKind {
    /// 𝒜: f₁(0) + f₂(0) = 0.
    Conservative,
    /// 𝒜* = −𝒜 on the same domain.
    ConservativeAdjoint,
    /// 𝒜̃: f₁(0) + e^{−2μL} f₂(0) = 0.
    Damped(f64),
    /// 𝒜̃*: f₁(0) + e^{2μL} f₂(0) = 0.
    DampedAdjoint(f64),
}

impl BcKind {
    /// Coefficient k in f₁(0) + k f₂(0) = 0.
    pub fn left_coefficient(self, length: f64) -> f64 {
        match self {
            BcKind::Conservative | BcKind::ConservativeAdjoint => 1.0,
            BcKind::Damped(mu) => (-2.0 * mu * length).exp(),
            BcKind::DampedAdjoint(mu) => (2.0 * mu * length).exp(),
        }
    }

    fn is_adjoint(self) -> bool {
        matches!(self, BcKind::ConservativeAdjoint | BcKind::DampedAdjoint(_))
    }

    fn seed(self, length: f64) -> [C64; 2] {
        match self {
            BcKind::Conservative | BcKind::ConservativeAdjoint => {
                [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]
            }
            _ => [C64::new(-self.left_coefficient(length), 0.0), C64::new(1.0, 0.0)],
        }
    }

    /// Eigenvalue of mode `n` when γ = 0.
    pub fn unperturbed_eigenvalue(self, length: f64, n: i64) -> C64 {
        let w = PI * n as f64 / length;
        match self {
            BcKind::Conservative => C64::new(0.0, w),
            BcKind::ConservativeAdjoint => C64::new(0.0, -w),
            BcKind::Damped(mu) => C64::new(mu, w),
            BcKind::DampedAdjoint(mu) => C64::new(mu, -w),
        }
    }

    fn mode_of(self, length: f64, lambda: C64) -> i64 {
        let k = (lambda.im * length / PI).round() as i64;
        if self.is_adjoint() {
            -k
        } else {
            k
        }
    }
}

/// Normalization convention attached to a [`Basis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Orthonormal,
    KatoNormalized,
    Biorthonormal,
}

/// An eigenvalue with its sampled eigenfunction.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub eigenvalue: C64,
    pub mode_index: i64,
    pub func: GridFunction2,
    /// (f₁(0), f₂(0), f₁(L), f₂(L)).
    pub boundary: [C64; 4],
    /// Richardson estimate of the integration error (max norm).
    pub ode_error: f64,
}

impl EigenPair {
    fn from_func(eigenvalue: C64, mode_index: i64, func: GridFunction2, ode_error: f64) -> Self {
        let (l, r) = (func.left(), func.right());
        EigenPair {
            eigenvalue,
            mode_index,
            boundary: [l[0], l[1], r[0], r[1]],
            func,
            ode_error,
        }
    }

    fn rescale(&mut self, c: C64) {
        self.func = self.func.scaled(c);
        for b in &mut self.boundary {
            *b *= c;
        }
        self.ode_error *= c.norm();
    }
}

/// The shared coefficient −δ/3 sampled at nodes and half nodes.
#[derive(Debug, Clone)]
pub struct Shooter {
    params: Params,
    grid: Grid,
    c_node: Vec<f64>,
    c_mid: Vec<f64>,
}

impl Shooter {
    pub fn new(params: &Params) -> Result<Self> {
        params.validate()?;
        let grid = params.grid();
        let h = grid.step();
        let c = |z: f64| delta(params, z.min(params.length)).map(|d| -d / 3.0);
        let c_node = grid.nodes().map(c).collect::<Result<Vec<_>>>()?;
        let c_mid = (0..grid.len() - 1)
            .map(|i| c(grid.node(i) + h / 2.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Shooter {
            params: *params,
            grid,
            c_node,
            c_mid,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Integrates the eigen-ODE of `bc` at `lambda`; returns the right-wall
    /// residual f₁(L) + f₂(L).
    pub fn residual(&self, bc: BcKind, lambda: C64) -> Result<C64> {
        Ok(self.integrate(bc, lambda, 1, false)?.0)
    }

    /// RK4 in the frame g₁ = e^{−λx} f₁, g₂ = e^{λx} f₂, where the system is
    /// g₁' = c e^{−2λx} g₂, g₂' = c e^{2λx} g₁ and is solved exactly when δ = 0.
    fn integrate(
        &self,
        bc: BcKind,
        lambda: C64,
        stride: usize,
        store: bool,
    ) -> Result<(C64, Vec<[C64; 2]>)> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite shooting parameter {lambda}")));
        }
        let lam = if bc.is_adjoint() { -lambda } else { lambda };
        let n_int = (self.grid.len() - 1) / stride;
        let h = self.grid.step() * stride as f64;
        let half = (lam * h).exp();
        let half_inv = (-lam * h).exp();
        let mut g = bc.seed(self.params.length);
        let mut out = Vec::new();
        if store {
            out.reserve(n_int + 1);
            out.push(g);
        }
        // e^{2λx} and e^{−2λx}, advanced multiplicatively and re-anchored periodically.
        let mut ep = C64::new(1.0, 0.0);
        let mut em = C64::new(1.0, 0.0);
        for k in 0..n_int {
            let i = k * stride;
            let x = i as f64 * self.grid.step();
            if k % 64 == 0 {
                ep = (lam * (2.0 * x)).exp();
                em = (-lam * (2.0 * x)).exp();
            }
            let c0 = self.c_node[i];
            let cm = if stride == 1 { self.c_mid[i] } else { self.c_node[i + stride / 2] };
            let c1 = self.c_node[i + stride];
            let (epm, emm) = (ep * half, em * half_inv);
            let (ep1, em1) = (epm * half, emm * half_inv);
            let rhs = |c: f64, ep: C64, em: C64, g: [C64; 2]| [em * g[1] * c, ep * g[0] * c];
            let k1 = rhs(c0, ep, em, g);
            let k2 = rhs(cm, epm, emm, [g[0] + k1[0] * (h / 2.0), g[1] + k1[1] * (h / 2.0)]);
            let k3 = rhs(cm, epm, emm, [g[0] + k2[0] * (h / 2.0), g[1] + k2[1] * (h / 2.0)]);
            let k4 = rhs(c1, ep1, em1, [g[0] + k3[0] * h, g[1] + k3[1] * h]);
            for j in 0..2 {
                g[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
            }
            ep = ep1;
            em = em1;
            if store {
                out.push(g);
            }
        }
        if !(g[0].norm().is_finite() && g[1].norm().is_finite()) {
            return Err(Error::Numerical(format!("shooting overflow at lambda = {lambda}")));
        }
        let xl = n_int as f64 * h;
        let f1 = (lam * xl).exp() * g[0];
        let f2 = (-lam * xl).exp() * g[1];
        if store {
            for (k, s) in out.iter_mut().enumerate() {
                let x = (k * stride) as f64 * self.grid.step();
                let e = (lam * x).exp();
                *s = [e * s[0], s[1] / e];
            }
        }
        Ok((f1 + f2, out))
    }

    /// Derivative of the residual along the real and imaginary directions.
    ///
    /// For a holomorphic residual both agree.
    pub fn residual_derivatives(&self, bc: BcKind, lambda: C64, h: f64) -> Result<(C64, C64)> {
        let d_re = (self.residual(bc, lambda + h)? - self.residual(bc, lambda - h)?) / (2.0 * h);
        let ih = C64::new(0.0, h);
        let d_im = (self.residual(bc, lambda + ih)? - self.residual(bc, lambda - ih)?) / (2.0 * ih);
        Ok((d_re, d_im))
    }

    /// Refines a root of the residual starting from `seed`.
    pub fn refine(&self, bc: BcKind, seed: C64) -> Result<C64> {
        let tol = (self.params.ode_tol * 1e-3).max(1e-14);
        let done = |step: C64, at: C64| step.norm() <= tol * (1.0 + at.norm());
        // Secant.
        let mut a = seed;
        let mut fa = self.residual(bc, a)?;
        let mut b = seed + C64::new(1e-4, 1e-4);
        let mut fb = self.residual(bc, b)?;
        for _ in 0..60 {
            if fb == C64::new(0.0, 0.0) {
                return Ok(b);
            }
            let denom = fb - fa;
            if denom.norm() == 0.0 {
                break;
            }
            let step = fb * (b - a) / denom;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            a = b;
            fa = fb;
            b -= step;
            fb = self.residual(bc, b)?;
            if done(step, b) {
                return Ok(b);
            }
        }
        // Newton with a derivative taken along the imaginary direction.
        let mut x = seed;
        for _ in 0..40 {
            let f = self.residual(bc, x)?;
            let (_, d) = self.residual_derivatives(bc, x, 1e-6)?;
            if d.norm() == 0.0 {
                break;
            }
            let step = f / d;
            x -= step;
            if done(step, x) {
                return Ok(x);
            }
        }
        Err(Error::Numerical(format!("root search from {seed} did not converge")))
    }

    /// Eigenfunction at a converged root, normalized for its kind.
    pub fn eigenpair(&self, bc: BcKind, lambda: C64) -> Result<EigenPair> {
        let (_, fine) = self.integrate(bc, lambda, 1, true)?;
        let (_, coarse) = self.integrate(bc, lambda, 2, true)?;
        let mut err = 0.0f64;
        for (k, c) in coarse.iter().enumerate() {
            let f = fine[2 * k];
            err = err.max((f[0] - c[0]).norm()).max((f[1] - c[1]).norm());
        }
        let func = GridFunction2::new(self.grid.clone(), fine)?;
        let mode = bc.mode_of(self.params.length, lambda);
        let mut pair = EigenPair::from_func(lambda, mode, func, err / 15.0);
        let scale = match bc {
            BcKind::Conservative | BcKind::ConservativeAdjoint => {
                let norm = pair.func.norm();
                if !(norm > 0.0) {
                    return Err(Error::Numerical(format!("zero eigenfunction for mode {mode}")));
                }
                // Real positive f₁(0), unit norm.
                let ph = pair.boundary[0];
                if ph.norm() == 0.0 {
                    return Err(Error::Numerical(format!("f1(0) vanishes for mode {mode}")));
                }
                ph.conj() / (ph.norm() * norm)
            }
            BcKind::Damped(_) | BcKind::DampedAdjoint(_) => {
                let f0 = pair.boundary[0];
                if f0.norm() == 0.0 {
                    return Err(Error::Numerical(format!("f1(0) vanishes for mode {mode}")));
                }
                1.0 / f0
            }
        };
        pair.rescale(scale);
        Ok(pair)
    }
}

/// Right-wall residual of the eigen-ODE for `bc` at `lambda`.
pub fn shoot(params: &Params, bc: BcKind, lambda: C64) -> Result<C64> {
    Shooter::new(params)?.residual(bc, lambda)
}

/// Roots of [`shoot`] for every mode in `modes`, seeded at the γ = 0 values.
pub fn find_eigenvalues(
    params: &Params,
    bc: BcKind,
    modes: std::ops::RangeInclusive<i64>,
) -> Result<Vec<C64>> {
    let shooter = Shooter::new(params)?;
    find_with(&shooter, bc, modes)
}

fn find_with(shooter: &Shooter, bc: BcKind, modes: std::ops::RangeInclusive<i64>) -> Result<Vec<C64>> {
    let length = shooter.params.length;
    let results: Vec<(i64, Result<C64>)> = modes
        .clone()
        .into_par_iter()
        .map(|n| (n, shooter.refine(bc, bc.unperturbed_eigenvalue(length, n))))
        .collect();
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("n = {n}: {e}")))
        .collect();
    if !failed.is_empty() {
        return Err(Error::Numerical(format!(
            "eigenvalue search failed for {}",
            failed.join("; ")
        )));
    }
    let roots: Vec<(i64, C64)> = results.into_iter().map(|(n, r)| (n, r.unwrap())).collect();
    for (i, (n, a)) in roots.iter().enumerate() {
        let drift = (a - bc.unperturbed_eigenvalue(length, *n)).norm();
        if drift >= 0.5 / length {
            return Err(Error::Regime(format!(
                "mode {n} drifted by {drift:.3e} >= 1/(2L); gamma too large for this basis"
            )));
        }
        for (m, b) in &roots[i + 1..] {
            if (a - b).norm() < 1e-8 {
                return Err(Error::Numerical(format!(
                    "root collision between modes {n} and {m} at {a}"
                )));
            }
        }
    }
    Ok(roots.into_iter().map(|(_, r)| r).collect())
}

/// Eigenpair at a converged root of [`shoot`].
pub fn eigenfunction(params: &Params, bc: BcKind, lambda: C64) -> Result<EigenPair> {
    Shooter::new(params)?.eigenpair(bc, lambda)
}

/// An indexed family of eigenpairs over −N..=N, optionally with biorthogonal duals.
#[derive(Debug, Clone)]
pub struct Basis {
    pub kind: BcKind,
    pub n_max: usize,
    pub normalization: Normalization,
    pub pairs: Vec<EigenPair>,
    pub duals: Option<Vec<EigenPair>>,
}

impl Basis {
    pub fn indices(&self) -> std::ops::RangeInclusive<i64> {
        -(self.n_max as i64)..=self.n_max as i64
    }

    /// Position of mode `n` in `pairs`.
    pub fn slot(&self, n: i64) -> usize {
        debug_assert!(n.unsigned_abs() as usize <= self.n_max);
        (n + self.n_max as i64) as usize
    }

    pub fn pair(&self, n: i64) -> &EigenPair {
        &self.pairs[self.slot(n)]
    }

    pub fn dual(&self, n: i64) -> Option<&EigenPair> {
        self.duals.as_ref().map(|d| &d[self.slot(n)])
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.pairs.iter().map(|p| p.eigenvalue).collect()
    }

    pub fn grid(&self) -> &Grid {
        self.pairs[0].func.grid()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Matrix ⟨fₙ, gₘ⟩ where g is the dual family if present, else the family itself.
    pub fn gram(&self) -> Result<DMatrix<C64>> {
        let other = self.duals.as_ref().unwrap_or(&self.pairs);
        gram_between(&self.pairs, other)
    }

    /// Coefficients of `f` in this basis (projection onto the dual family).
    pub fn expand(&self, f: &GridFunction2) -> Result<Vec<C64>> {
        let other = self.duals.as_ref().unwrap_or(&self.pairs);
        other.iter().map(|d| inner_product(f, &d.func)).collect()
    }

    /// Σ cₙ fₙ.
    pub fn synthesize(&self, coeffs: &[C64]) -> Result<GridFunction2> {
        if coeffs.len() != self.len() {
            return Err(Error::Usage(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                self.len()
            )));
        }
        let mut out = GridFunction2::zeros(self.grid());
        for (c, p) in coeffs.iter().zip(&self.pairs) {
            out.axpy(*c, &p.func)?;
        }
        Ok(out)
    }
}

/// G_{ij} = ⟨aᵢ, bⱼ⟩.
pub fn gram_between(a: &[EigenPair], b: &[EigenPair]) -> Result<DMatrix<C64>> {
    let rows: Vec<Vec<C64>> = a
        .par_iter()
        .map(|p| b.iter().map(|q| inner_product(&p.func, &q.func)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

fn family(shooter: &Shooter, bc: BcKind, n_max: usize) -> Result<Vec<EigenPair>> {
    let n = n_max as i64;
    let roots = find_with(shooter, bc, -n..=n)?;
    roots
        .par_iter()
        .map(|&r| shooter.eigenpair(bc, r))
        .collect::<Result<Vec<_>>>()
}

fn worst_offdiag(g: &DMatrix<C64>, n_max: usize) -> (f64, i64, i64) {
    let mut worst = (0.0, 0, 0);
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = (g[(i, j)] - target).norm();
            if d > worst.0 {
                worst = (d, i as i64 - n_max as i64, j as i64 - n_max as i64);
            }
        }
    }
    worst
}

/// Eigenbasis of `bc` over −N..=N with its invariants checked.
pub fn build_basis(params: &Params, bc: BcKind, n_max: usize) -> Result<Basis> {
    let shooter = Shooter::new(params)?;
    build_basis_with(&shooter, bc, n_max)
}

/// [`build_basis`] reusing a prepared [`Shooter`].
pub fn build_basis_with(shooter: &Shooter, bc: BcKind, n_max: usize) -> Result<Basis> {
    let pairs = family(shooter, bc, n_max)?;
    let (normalization, duals) = match bc {
        BcKind::Conservative | BcKind::ConservativeAdjoint => (Normalization::Orthonormal, None),
        BcKind::Damped(mu) | BcKind::DampedAdjoint(mu) => {
            let dual_kind = match bc {
                BcKind::Damped(_) => BcKind::DampedAdjoint(mu),
                _ => BcKind::Damped(mu),
            };
            let mut duals = family(shooter, dual_kind, n_max)?;
            for (p, d) in pairs.iter().zip(duals.iter_mut()) {
                let s = inner_product(&p.func, &d.func)?;
                if s.norm() < 1e-12 {
                    return Err(Error::Numerical(format!(
                        "mode {} is orthogonal to its dual",
                        p.mode_index
                    )));
                }
                d.rescale(1.0 / s.conj());
            }
            (Normalization::Biorthonormal, Some(duals))
        }
    };
    let basis = Basis {
        kind: bc,
        n_max,
        normalization,
        pairs,
        duals,
    };
    let (dev, i, j) = worst_offdiag(&basis.gram()?, n_max);
    if dev > 1e-6 {
        return Err(Error::Numerical(format!(
            "Gram deviation {dev:.3e} at modes ({i}, {j}); refine grid_points"
        )));
    }
    Ok(basis)
}

/// ψₙ⁽⁰⁾ = (e^{iπnx/L}, −e^{−iπnx/L}).
pub fn unperturbed_mode(grid: &Grid, n: i64) -> GridFunction2 {
    let k = PI * n as f64 / grid.length();
    GridFunction2::from_fn(grid, |x| [C64::from_polar(1.0, k * x), -C64::from_polar(1.0, -k * x)])
}

/// ⟨J₀ψₙ⁽⁰⁾, ψₖ⁽⁰⁾⟩ for the unperturbed coupling.
pub fn kato_coupling(n: i64, k: i64) -> C64 {
    if n.abs() == k.abs() {
        return C64::new(0.0, 0.0);
    }
    let sign = if (n + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let (n, k) = (n as f64, k as f64);
    let value = (sign - 1.0) * (1.0 / (n - k) + 1.0 / (3.0 * (n + k)));
    C64::new(0.0, -value / PI)
}

/// First-order Kato correction ψₙ⁽¹⁾, truncated to |k − n| ≤ K.
pub fn first_order_perturbation(params: &Params, n: i64, truncation: usize) -> Result<GridFunction2> {
    params.validate()?;
    if truncation < 1 {
        return Err(Error::Usage("truncation K must be >= 1".into()));
    }
    let grid = params.grid();
    let len = params.length;
    let kk = truncation as i64;
    let terms: Vec<(i64, C64)> = (n - kk..=n + kk)
        .filter(|&k| k != n)
        .map(|k| {
            let a = kato_coupling(n, k) / C64::new(0.0, PI * (k - n) as f64);
            (k, a * (0.75 * len))
        })
        .filter(|(_, a)| a.norm() != 0.0)
        .collect();
    let samples: Vec<[C64; 2]> = grid
        .nodes()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&x| {
            let th = PI * x / len;
            let step = C64::from_polar(1.0, th);
            let mut acc = [C64::new(0.0, 0.0); 2];
            let mut k_prev = i64::MIN;
            let mut ph = C64::new(0.0, 0.0);
            for &(k, a) in &terms {
                if k_prev == i64::MIN || k - k_prev > 1 {
                    ph = C64::from_polar(1.0, th * k as f64);
                } else {
                    ph *= step;
                }
                k_prev = k;
                acc[0] += a * ph;
                acc[1] -= a * ph.conj();
            }
            acc
        })
        .collect();
    GridFunction2::new(grid, samples)
}

/// Boundary combination l⁽¹⁾ₙ = (3L/2iπ) Σₖ ⟨J₀ψₙ⁽⁰⁾,ψₖ⁽⁰⁾⟩ ((−1)ᵏ − 1)/(k − n).
pub fn first_order_boundary_term(length: f64, n: i64, truncation: usize) -> C64 {
    let kk = truncation as i64;
    let sum: C64 = (n - kk..=n + kk)
        .filter(|&k| k != n && k.rem_euclid(2) == 1)
        .map(|k| kato_coupling(n, k) * (-2.0 / (k - n) as f64))
        .sum();
    sum * (1.5 * length) / C64::new(0.0, PI)
}

/// ψₙ(γ) = W^{−3/2} fₙ, scaled so that ⟨ψₙ, ψₙ⁽⁰⁾⟩ = 1.
pub fn kato_psi(params: &Params, pair: &EigenPair) -> Result<GridFunction2> {
    kato_weighted(params, pair, -1.5)
}

/// χₙ(γ) = W^{3/2} fₙ, scaled so that ⟨χₙ, ψₙ⁽⁰⁾⟩ = 1.
pub fn kato_chi(params: &Params, pair: &EigenPair) -> Result<GridFunction2> {
    kato_weighted(params, pair, 1.5)
}

fn kato_weighted(params: &Params, pair: &EigenPair, power: f64) -> Result<GridFunction2> {
    let grid = pair.func.grid();
    let samples = grid
        .nodes()
        .zip(pair.func.samples())
        .map(|(z, s)| {
            let w = exp_weight(params, z)?.powf(power / 1.5);
            Ok([s[0] * w, s[1] * w])
        })
        .collect::<Result<Vec<_>>>()?;
    let f = GridFunction2::new(grid.clone(), samples)?;
    let r = inner_product(&f, &unperturbed_mode(grid, pair.mode_index))?;
    if r.norm() < 1e-12 {
        return Err(Error::Numerical(format!(
            "mode {} has no component along its unperturbed profile",
            pair.mode_index
        )));
    }
    Ok(f.scaled(1.0 / r))
}

/// Range of |f_{n,1}(0)| over a family: the pair (m, M).
pub fn boundary_bounds(pairs: &[EigenPair]) -> (f64, f64) {
    pairs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
        let v = p.boundary[0].norm();
        (lo.min(v), hi.max(v))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64) -> Params {
        Params {
            gamma,
            ..Params::default()
        }
    }

    #[test]
    fn residual_vanishes_at_unperturbed_roots() {
        let s = Shooter::new(&params(0.0)).unwrap();
        for n in [-3, 0, 1, 7] {
            for bc in [BcKind::Conservative, BcKind::Damped(2.0), BcKind::DampedAdjoint(2.0)] {
                let r = s.residual(bc, bc.unperturbed_eigenvalue(1.0, n)).unwrap();
                assert!(r.norm() < 1e-10, "{bc:?} n = {n}: {r}");
            }
        }
    }

    #[test]
    fn residual_is_holomorphic() {
        let s = Shooter::new(&params(0.05)).unwrap();
        let (a, b) = s
            .residual_derivatives(BcKind::Conservative, C64::new(0.1, 2.9), 1e-5)
            .unwrap();
        assert!((a - b).norm() < 1e-6 * a.norm().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn zero_mode_is_constant_at_gamma_zero() {
        let p = eigenfunction(&params(0.0), BcKind::Conservative, C64::new(0.0, 0.0)).unwrap();
        for s in p.func.samples() {
            assert!((s[0] - 1.0).norm() < 1e-12 && (s[1] + 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn kato_coupling_vanishes_on_the_diagonal() {
        for n in -5..=5 {
            assert_eq!(kato_coupling(n, n), C64::new(0.0, 0.0));
            assert_eq!(kato_coupling(n, -n), C64::new(0.0, 0.0));
        }
        // Same parity couples to nothing.
        assert_eq!(kato_coupling(1, 3), C64::new(0.0, 0.0));
    }
}
