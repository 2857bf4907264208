//! The stabilizing feedback law in modal form and in physical coordinates.
//!
//! The control direction ℐ has no component on the mass mode f₀, so the state
//! is extended by a scalar ζ₀ ("virtual mass") that feeds the direction
//! ℐ_ν = ℐ + ν f₀. The feedback is a linear functional F on the extended
//! state, stored through its values Gₙ = ⟨fₙ, F⟩ on the eigenbasis.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    control_profile, exp_weight, inner_product, l_gamma, steady_state_height, zeta_to_physical,
    GridFunction2, Params,
};
use crate::spectral::{build_basis_with, Basis, BcKind, Shooter};
use crate::C64;

/// ℐ_ν = ℐ + ν f₀.
pub fn virtual_profile(params: &Params, basis: &Basis) -> Result<GridFunction2> {
    if params.nu == 0.0 {
        return Err(Error::Usage("nu must be nonzero".into()));
    }
    let mut out = control_profile(params, basis.grid())?;
    out.axpy(C64::new(params.nu, 0.0), &basis.pair(0).func)?;
    Ok(out)
}

/// Modal feedback table over −N..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLaw {
    pub n_max: usize,
    /// Gₙ = ⟨fₙ, F⟩.
    pub coeffs: Vec<C64>,
    pub nu: f64,
    /// τₙ = e^{∫δ} f_{n,1}(L)/f_{n,1}(0) − 1.
    pub tau: Vec<C64>,
    /// ⟨ℐ_ν, fₙ⟩.
    pub profile_moments: Vec<C64>,
    /// μ in tanh(μL).
    pub mu_internal: f64,
}

impl FeedbackLaw {
    pub fn slot(&self, n: i64) -> usize {
        (n + self.n_max as i64) as usize
    }

    pub fn coeff(&self, n: i64) -> C64 {
        self.coeffs[self.slot(n)]
    }

    /// Same law with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> FeedbackLaw {
        FeedbackLaw {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }
}

/// τₙ = e^{∫δ} f_{n,1}(L)/f_{n,1}(0) − 1 over the basis.
pub fn boundary_tau(params: &Params, basis: &Basis) -> Result<Vec<C64>> {
    let growth = exp_weight(params, params.length)? / exp_weight(params, 0.0)?;
    basis
        .pairs
        .iter()
        .map(|p| {
            let f0 = p.boundary[0];
            if f0.norm() == 0.0 {
                return Err(Error::Numerical(format!("f_{},1(0) vanishes", p.mode_index)));
            }
            Ok(p.boundary[2] / f0 * growth - 1.0)
        })
        .collect()
}

/// Gₙ = −(tanh(μL)/L) f_{n,1}(0)² / ⟨ℐ_ν, fₙ⟩.
pub fn feedback_coefficients(params: &Params, basis: &Basis, profile: &GridFunction2) -> Result<FeedbackLaw> {
    if basis.kind != BcKind::Conservative {
        return Err(Error::Usage("feedback needs the conservative basis".into()));
    }
    let k = (params.mu * params.length).tanh() / params.length;
    let moments = basis
        .pairs
        .par_iter()
        .map(|p| inner_product(profile, &p.func))
        .collect::<Result<Vec<_>>>()?;
    let tau = boundary_tau(params, basis)?;
    let mut coeffs = Vec::with_capacity(basis.len());
    for (p, m) in basis.pairs.iter().zip(&moments) {
        if m.norm() < 1e-10 {
            return Err(Error::Uncontrollable {
                mode: p.mode_index,
                detail: format!("|<I_nu, f_n>| = {:.3e}", m.norm()),
            });
        }
        let f0 = p.boundary[0];
        coeffs.push(-(f0 * f0) * k / m);
    }
    Ok(FeedbackLaw {
        n_max: basis.n_max,
        coeffs,
        nu: params.nu,
        tau,
        profile_moments: moments,
        mu_internal: params.mu,
    })
}

/// Singular part hₙ and the regular remainder (Gₙ − hₙ)/μₙ.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSplit {
    pub singular: Vec<C64>,
    /// (Gₙ − hₙ)/μₙ; zero at n = 0.
    pub regular: Vec<C64>,
    /// Σ_{10<|n|≤N} |(Gₙ − hₙ)/μₙ|².
    pub tail: f64,
    pub tail_ok: bool,
}

/// hₙ = tanh(μL) f_{n,1}(0) μₙ / (ℐ(0) τₙ).
pub fn singular_split(params: &Params, law: &FeedbackLaw, basis: &Basis) -> Result<SingularSplit> {
    let th = (law.mu_internal * params.length).tanh();
    let i0 = exp_weight(params, 0.0)?;
    let mut singular = Vec::with_capacity(basis.len());
    let mut regular = Vec::with_capacity(basis.len());
    let mut tail = 0.0;
    for (i, p) in basis.pairs.iter().enumerate() {
        let tau = law.tau[i];
        if tau.norm() < 1e-6 {
            return Err(Error::Regime(format!(
                "|tau_{}| = {:.3e} below 1e-6",
                p.mode_index,
                tau.norm()
            )));
        }
        let h = p.boundary[0] * p.eigenvalue * th / (tau * i0);
        singular.push(h);
        let r = if p.mode_index == 0 {
            C64::new(0.0, 0.0)
        } else {
            (law.coeffs[i] - h) / p.eigenvalue
        };
        if p.mode_index.abs() > 10 {
            tail += r.norm_sqr();
        }
        regular.push(r);
    }
    Ok(SingularSplit {
        singular,
        regular,
        tail,
        tail_ok: tail < 1e-3,
    })
}

/// Σₙ cₙ Gₙ.
pub fn apply_feedback(law: &FeedbackLaw, coeffs: &[C64]) -> Result<C64> {
    if coeffs.len() != law.coeffs.len() {
        return Err(Error::Usage(format!(
            "{} coefficients for a law over {} modes",
            coeffs.len(),
            law.coeffs.len()
        )));
    }
    Ok(coeffs.iter().zip(&law.coeffs).map(|(c, g)| c * g).sum())
}

/// Feedback expressed on physical modes (hₙ, vₙ).
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalFeedback {
    pub mu_phys: f64,
    pub mu_internal: f64,
    pub l_gamma: f64,
    /// Coefficients on the physical modes.
    pub coeffs: Vec<C64>,
    /// Coefficient multiplying the running mass in the integral part u₂.
    pub u2_coefficient: C64,
    /// Physical control = `output_scale` × internal control.
    pub output_scale: f64,
    /// The internal law the table is checked against.
    pub internal: FeedbackLaw,
}

impl PhysicalFeedback {
    /// Largest relative gap between the physical table and the internal law.
    pub fn consistency(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.internal.coeffs)
            .map(|(a, b)| (a - b).norm() / b.norm())
            .fold(0.0, f64::max)
    }
}

/// Builds the feedback for physical decay rate `params.mu`.
///
/// The internal construction runs with μ = 4 μ_phys; the table is then
/// recomputed from the physical mode shapes (hₙ, vₙ) with physical
/// quadratures only: Pₙ = −(tanh(4μL)/L) H(0)^{1/2} hₙ(0)² L_γ / ∫₀ᴸ H v̄ₙ dx.
pub fn physical_feedback(params: &Params) -> Result<PhysicalFeedback> {
    if !(params.gamma > 0.0) {
        return Err(Error::Regime(format!("gamma = {} must be > 0", params.gamma)));
    }
    let internal_params = Params {
        mu: 4.0 * params.mu,
        ..*params
    };
    let shooter = Shooter::new(&internal_params)?;
    let basis = build_basis_with(&shooter, BcKind::Conservative, params.n_modes)?;
    let profile = virtual_profile(&internal_params, &basis)?;
    let internal = feedback_coefficients(&internal_params, &basis, &profile)?;

    let lg = l_gamma(params)?;
    let th = (4.0 * params.mu * params.length).tanh();
    let grid = basis.grid().clone();
    let heights: Vec<f64> = grid
        .nodes()
        .map(|x| steady_state_height(params, x))
        .collect::<Result<_>>()?;
    let h0 = heights[0];
    let coeffs = basis
        .pairs
        .par_iter()
        .map(|p| {
            let (h, v) = zeta_to_physical(params, &p.func)?;
            let hv0 = h[0];
            if p.mode_index == 0 {
                return Ok(-(hv0 * hv0) * h0.sqrt() * th / (params.length * params.nu));
            }
            let w: Vec<C64> = v.iter().zip(&heights).map(|(v, hh)| v.conj() * *hh).collect();
            let m = grid.integrate_complex(&w);
            Ok(-(hv0 * hv0) * h0.sqrt() * th * lg / (params.length * m))
        })
        .collect::<Result<Vec<_>>>()?;
    let c0 = coeffs[basis.slot(0)];
    Ok(PhysicalFeedback {
        mu_phys: params.mu,
        mu_internal: internal_params.mu,
        l_gamma: lg,
        u2_coefficient: c0 * (params.nu * params.length / lg),
        output_scale: params.length / lg,
        coeffs,
        internal,
    })
}
