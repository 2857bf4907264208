//! Truncated Fredholm transform T in modal coordinates.
//!
//! T maps the eigenbasis of 𝒜 to functions gₙ whose coordinates on the
//! damped basis are T_{pn} = ⟨gₙ, φ̃ₚ⟩ = −Gₙ⟨ℐ_ν, φ̃ₚ⟩/(μ̃ₚ − μₙ). Every
//! operator identity is then checked on coefficient vectors.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::model::{inner_product, GridFunction2, Params};
use crate::spectral::Basis;
use crate::C64;

#[derive(Debug, Clone)]
pub struct TransformMatrix {
    pub n_max: usize,
    /// Rows p (target modes), columns n (source modes).
    pub entries: DMatrix<C64>,
    /// Condition number of diag(1+|μ̃|) T diag(1+|μ|)⁻¹.
    pub condition: f64,
    pub min_gap: f64,
    pub source_eigenvalues: Vec<C64>,
    pub target_eigenvalues: Vec<C64>,
    /// ⟨ℐ_ν, fₙ⟩.
    pub source_moments: Vec<C64>,
    /// ⟨ℐ_ν, φ̃ₚ⟩.
    pub target_moments: Vec<C64>,
}

impl TransformMatrix {
    pub fn slot(&self, n: i64) -> usize {
        (n + self.n_max as i64) as usize
    }

    /// T α for a coefficient vector α.
    pub fn apply(&self, alpha: &[C64]) -> Vec<C64> {
        let v = nalgebra::DVector::from_column_slice(alpha);
        (&self.entries * v).iter().copied().collect()
    }
}

/// Assembles T from the two bases and the feedback law.
pub fn build_transform(
    params: &Params,
    source: &Basis,
    target: &Basis,
    law: &FeedbackLaw,
    profile: &GridFunction2,
) -> Result<TransformMatrix> {
    if source.n_max != target.n_max || law.n_max != source.n_max {
        return Err(Error::Usage("bases and law must share the truncation".into()));
    }
    let duals = target
        .duals
        .as_ref()
        .ok_or_else(|| Error::Usage("target basis has no dual family".into()))?;
    let mu = source.eigenvalues();
    let mu_t = target.eigenvalues();
    let mut min_gap = f64::INFINITY;
    for a in &mu_t {
        for b in &mu {
            min_gap = min_gap.min((a - b).norm());
        }
    }
    if !(min_gap > params.mu / 2.0) {
        return Err(Error::Regime(format!(
            "min |mu~_p - mu_n| = {min_gap:.3e} not above mu/2 = {}",
            params.mu / 2.0
        )));
    }
    let target_moments = duals
        .iter()
        .map(|d| inner_product(profile, &d.func))
        .collect::<Result<Vec<_>>>()?;
    let k = mu.len();
    let entries = DMatrix::from_fn(k, k, |p, n| -law.coeffs[n] * target_moments[p] / (mu_t[p] - mu[n]));
    let weighted = DMatrix::from_fn(k, k, |p, n| {
        entries[(p, n)] * ((1.0 + mu_t[p].norm()) / (1.0 + mu[n].norm()))
    });
    let sv = weighted.svd(false, false).singular_values;
    Ok(TransformMatrix {
        n_max: source.n_max,
        condition: sv.max() / sv.min(),
        min_gap,
        entries,
        source_eigenvalues: mu,
        target_eigenvalues: mu_t,
        source_moments: law.profile_moments.clone(),
        target_moments,
    })
}

/// Per-mode residuals of fₙ ≈ (f_{n,1}(0)/2L) τ̃ kₙ.
#[derive(Debug, Clone, PartialEq)]
pub struct KnReport {
    pub window: usize,
    pub residuals: Vec<(i64, f64)>,
}

impl KnReport {
    pub fn max(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn get(&self, n: i64) -> Option<f64> {
        self.residuals.iter().find(|r| r.0 == n).map(|r| r.1)
    }
}

/// kₙ = Σₚ f̃ₚ/(μ̃ₚ − μₙ) over the target window, with τ̃ f̃ₚ = φ̃̄_{p,1}(0)(1 − e^{−2μL}) f̃ₚ.
pub fn kn_relation_check(params: &Params, source: &Basis, target: &Basis, modes: &[i64]) -> Result<KnReport> {
    let duals = target
        .duals
        .as_ref()
        .ok_or_else(|| Error::Usage("target basis has no dual family".into()))?;
    let damp = 1.0 - (-2.0 * params.mu * params.length).exp();
    let mut residuals = Vec::with_capacity(modes.len());
    for &n in modes {
        if n.unsigned_abs() as usize > source.n_max {
            return Err(Error::Usage(format!("mode {n} outside the source basis")));
        }
        let f = source.pair(n);
        let scale = f.boundary[0] / (2.0 * params.length);
        let mut acc = GridFunction2::zeros(source.grid());
        for (p, d) in target.pairs.iter().zip(duals) {
            let c = d.boundary[0].conj() * damp / (p.eigenvalue - f.eigenvalue) * scale;
            acc.axpy(c, &p.func)?;
        }
        residuals.push((n, f.func.sub(&acc)?.norm()));
    }
    Ok(KnReport {
        window: target.n_max,
        residuals,
    })
}

/// ⟨T ℐ_ν^{(N)}, φ̃ₘ⟩ − ⟨ℐ_ν, φ̃ₘ⟩.
pub fn tb_residual(transform: &TransformMatrix, m: i64) -> C64 {
    let row = transform.slot(m);
    let tb: C64 = (0..transform.entries.ncols())
        .map(|n| transform.entries[(row, n)] * transform.source_moments[n])
        .sum();
    tb - transform.target_moments[row]
}

/// Σₙ f_{n,1}(0)⟨fₙ, φ̃ₘ⟩ and its limit (φ̃̄_{m,1}(0) − φ̃̄_{m,2}(0))/2.
pub fn dirichlet_driver(source: &Basis, target: &Basis, m: i64) -> Result<(C64, C64)> {
    let d = target
        .dual(m)
        .ok_or_else(|| Error::Usage("target basis has no dual family".into()))?;
    let mut sum = C64::new(0.0, 0.0);
    for p in &source.pairs {
        sum += p.boundary[0] * inner_product(&p.func, &d.func)?;
    }
    Ok((sum, (d.boundary[0] - d.boundary[1]).conj() / 2.0))
}

/// ∥T(−𝒜α + ⟨α,F⟩ℐ_ν) + 𝒜̃Tα∥ with target weights 1 + |μ̃ₚ|.
pub fn operator_equality_residual(transform: &TransformMatrix, law: &FeedbackLaw, alpha: &[C64]) -> Result<f64> {
    if alpha.len() != transform.entries.ncols() || law.coeffs.len() != alpha.len() {
        return Err(Error::Usage("alpha, law and transform must share the truncation".into()));
    }
    let f_alpha: C64 = alpha.iter().zip(&law.coeffs).map(|(a, g)| a * g).sum();
    let k = alpha.len();
    let mut acc = 0.0;
    for p in 0..k {
        let mut r = C64::new(0.0, 0.0);
        for n in 0..k {
            let t = transform.entries[(p, n)];
            let drive = -transform.source_eigenvalues[n] * alpha[n] + f_alpha * transform.source_moments[n];
            r += t * drive + transform.target_eigenvalues[p] * t * alpha[n];
        }
        acc += ((1.0 + transform.target_eigenvalues[p].norm()) * r.norm()).powi(2);
    }
    Ok(acc.sqrt())
}

/// M = −diag(μ) + ⟨ℐ_ν, f⟩ Gᵀ, the truncated closed-loop generator.
pub fn closed_loop_matrix(source: &Basis, law: &FeedbackLaw) -> DMatrix<C64> {
    let mu = source.eigenvalues();
    let k = mu.len();
    DMatrix::from_fn(k, k, |m, n| {
        let d = if m == n { -mu[m] } else { C64::new(0.0, 0.0) };
        d + law.profile_moments[m] * law.coeffs[n]
    })
}

/// Eigenvalues of [`closed_loop_matrix`].
pub fn closed_loop_spectrum(source: &Basis, law: &FeedbackLaw) -> Result<Vec<C64>> {
    let m = closed_loop_matrix(source, law);
    let schur = nalgebra::Schur::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("closed-loop eigensolve did not converge".into()))?;
    Ok(schur.eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default())
}

/// For each target value, the distance to the nearest computed eigenvalue.
pub fn nearest_distances(computed: &[C64], targets: &[C64]) -> Vec<f64> {
    targets
        .iter()
        .map(|t| computed.iter().map(|c| (c - t).norm()).fold(f64::INFINITY, f64::min))
        .collect()
}
