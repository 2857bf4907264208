//! Backstepping for finite-dimensional single-input pairs.
//!
//! For controllable (A, B) and (Ã, B) there is exactly one pair (T, K) with
//! T A + B K = Ã T and T B = B; then A + B K = T⁻¹ Ã T. It is built through
//! the controllable canonical forms of both pairs.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearPair {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearPair {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || n == 0 {
            return Err(Error::Usage(format!(
                "A is {}x{} and B has {} rows",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if n > MAX_DIM {
            return Err(Error::Usage(format!("dimension {n} exceeds {MAX_DIM}")));
        }
        Ok(LinearPair { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// [B, AB, …, Aⁿ⁻¹B].
    pub fn controllability_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut c = DMatrix::zeros(n, n);
        let mut v = self.b.clone();
        for j in 0..n {
            c.set_column(j, &v);
            v = &self.a * v;
        }
        c
    }

    /// Numerical rank test on the controllability matrix.
    pub fn is_controllable(&self) -> bool {
        let sv = self.controllability_matrix().svd(false, false).singular_values;
        let max = sv.max();
        max > 0.0 && sv.min() > max * 1e-12 * self.dim() as f64
    }
}

/// Companion matrix with ones on the superdiagonal and last row −(a₀, …, aₙ₋₁).
pub fn companion(coeffs: &[f64]) -> DMatrix<f64> {
    let n = coeffs.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == n {
            -coeffs[j]
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Returns T_c with T_c A T_c⁻¹ in companion form and T_c B = eₙ.
pub fn to_canonical(pair: &LinearPair) -> Result<(DMatrix<f64>, LinearPair)> {
    if !pair.is_controllable() {
        return Err(Error::Uncontrollable {
            mode: pair.dim() as i64,
            detail: "controllability matrix is rank deficient".into(),
        });
    }
    let n = pair.dim();
    let c = pair.controllability_matrix();
    // q = eₙᵀ C⁻¹, i.e. solve Cᵀ qᵀ = eₙ.
    let mut en = DVector::zeros(n);
    en[n - 1] = 1.0;
    let q = c
        .transpose()
        .lu()
        .solve(&en)
        .ok_or_else(|| Error::Numerical("controllability matrix is singular".into()))?;
    let mut tc = DMatrix::zeros(n, n);
    let mut row = q.transpose();
    for i in 0..n {
        tc.set_row(i, &row);
        row = &row * &pair.a;
    }
    let tinv = tc
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("canonical transform is singular".into()))?;
    let a_c = &tc * &pair.a * &tinv;
    // Clean the structural entries; the last row carries the characteristic polynomial.
    let coeffs: Vec<f64> = (0..n).map(|j| -a_c[(n - 1, j)]).collect();
    Ok((tc, LinearPair { a: companion(&coeffs), b: en }))
}

/// The unique (T, K) with T A + B K = Ã T and T B = B.
pub fn backstep_pair(pair: &LinearPair, target: &LinearPair) -> Result<(DMatrix<f64>, RowDVector<f64>)> {
    if pair.dim() != target.dim() || (&pair.b - &target.b).amax() > 0.0 {
        return Err(Error::Usage("pairs must share the same B".into()));
    }
    let n = pair.dim();
    let (ta, ca) = to_canonical(pair)?;
    let (tt, ct) = to_canonical(target)?;
    let k_c = RowDVector::from_fn(n, |_, j| ct.a[(n - 1, j)] - ca.a[(n - 1, j)]);
    let tt_inv = tt
        .try_inverse()
        .ok_or_else(|| Error::Numerical("canonical transform is singular".into()))?;
    let t = &tt_inv * &ta;
    let k = &k_c * &ta;
    refine(pair, target, t, k)
}

/// Iterative refinement on the linear system; the canonical route loses
/// accuracy when the controllability matrices are poorly conditioned.
fn refine(
    pair: &LinearPair,
    target: &LinearPair,
    t: DMatrix<f64>,
    k: RowDVector<f64>,
) -> Result<(DMatrix<f64>, RowDVector<f64>)> {
    let (m, rhs) = linear_system(pair, target);
    let lu = m.clone().lu();
    let mut x = pack(&t, &k);
    for _ in 0..3 {
        let r = &m * &x - &rhs;
        if r.amax() == 0.0 {
            break;
        }
        let dx = lu
            .solve(&r)
            .ok_or_else(|| Error::Numerical("backstepping system is singular".into()))?;
        x -= dx;
    }
    Ok(unpack(&x, pair.dim()))
}

/// The equations T A − Ã T + B K = 0, T B = B as M x = r with x = (vec T, K).
fn linear_system(pair: &LinearPair, target: &LinearPair) -> (DMatrix<f64>, DVector<f64>) {
    let n = pair.dim();
    let mut m = DMatrix::<f64>::zeros(n * n + n, n * n + n);
    let mut rhs = DVector::<f64>::zeros(n * n + n);
    let t_idx = |i: usize, j: usize| i * n + j;
    let k_idx = |j: usize| n * n + j;
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            for l in 0..n {
                m[(r, t_idx(i, l))] += pair.a[(l, j)];
                m[(r, t_idx(l, j))] -= target.a[(i, l)];
            }
            m[(r, k_idx(j))] += pair.b[i];
        }
    }
    for i in 0..n {
        let r = n * n + i;
        for l in 0..n {
            m[(r, t_idx(i, l))] = pair.b[l];
        }
        rhs[r] = pair.b[i];
    }
    (m, rhs)
}

fn pack(t: &DMatrix<f64>, k: &RowDVector<f64>) -> DVector<f64> {
    let n = k.len();
    DVector::from_fn(n * n + n, |r, _| if r < n * n { t[(r / n, r % n)] } else { k[r - n * n] })
}

fn unpack(x: &DVector<f64>, n: usize) -> (DMatrix<f64>, RowDVector<f64>) {
    (
        DMatrix::from_fn(n, n, |i, j| x[i * n + j]),
        RowDVector::from_fn(n, |_, j| x[n * n + j]),
    )
}

/// Solves the same equations as one linear least-squares problem in (T, K).
pub fn backstep_pair_lstsq(pair: &LinearPair, target: &LinearPair) -> Result<(DMatrix<f64>, RowDVector<f64>)> {
    let (m, rhs) = linear_system(pair, target);
    let sol = m
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    Ok(unpack(&sol, pair.dim()))
}

/// max-norm residuals of T A + B K − Ã T and T B − B.
pub fn residuals(pair: &LinearPair, target: &LinearPair, t: &DMatrix<f64>, k: &RowDVector<f64>) -> (f64, f64) {
    let op = t * &pair.a + &pair.b * k - &target.a * t;
    let tb = t * &pair.b - &pair.b;
    (op.amax(), tb.amax())
}
