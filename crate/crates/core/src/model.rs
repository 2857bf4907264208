//! Tank model: steady states, coordinate changes, inner product and mass.
//!
//! Two spatial variables appear throughout. `x` is the physical position in
//! the tank; `z` is the working coordinate obtained after straightening the
//! characteristics and rescaling back to `[0, L]`. Both live on `[0, L]` and
//! share the same uniform [`Grid`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::C64;

/// Physical and numerical configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Tank length L.
    pub length: f64,
    /// Steady acceleration γ.
    pub gamma: f64,
    /// Damping parameter μ of the target system.
    pub mu: f64,
    /// Weight ν of the virtual control direction.
    pub nu: f64,
    /// Truncation N; modes run over −N..=N.
    pub n_modes: usize,
    /// Number of uniform grid nodes on [0, L], endpoints included.
    pub grid_points: usize,
    /// Tolerance for root finding and ODE self-checks.
    pub ode_tol: f64,
    /// Simulation horizon.
    pub t_final: f64,
    /// Requested time step (capped by the stiffness of the retained modes).
    pub dt: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            length: 1.0,
            gamma: 0.05,
            mu: 2.0,
            nu: 0.5,
            n_modes: 20,
            grid_points: 2001,
            ode_tol: 1e-10,
            t_final: 10.0,
            dt: 1e-3,
        }
    }
}

impl Params {
    /// Checks the structural invariants shared by every code path.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.length,
            self.gamma,
            self.mu,
            self.nu,
            self.ode_tol,
            self.t_final,
            self.dt,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("parameters must be finite".into()));
        }
        if self.length <= 0.0 {
            return Err(Error::Config(format!("L = {} must be > 0", self.length)));
        }
        if self.grid_points < 16 {
            return Err(Error::Config(format!(
                "grid_points = {} must be >= 16",
                self.grid_points
            )));
        }
        if self.n_modes < 1 {
            return Err(Error::Config("n_modes must be >= 1".into()));
        }
        if self.ode_tol <= 0.0 {
            return Err(Error::Config("ode_tol must be > 0".into()));
        }
        if self.dt <= 0.0 || self.t_final < 0.0 {
            return Err(Error::Config("dt must be > 0 and t_final >= 0".into()));
        }
        if self.gamma.abs() * self.length / 2.0 >= 1.0 {
            return Err(Error::Domain(format!(
                "|gamma| L / 2 = {} must be < 1",
                self.gamma.abs() * self.length / 2.0
            )));
        }
        Ok(())
    }

    /// The shared uniform grid on [0, L].
    pub fn grid(&self) -> Grid {
        Grid::uniform(self.length, self.grid_points.max(2))
            .expect("validated length and point count")
    }

    /// √(1 + γL/2) and √(1 − γL/2): wave speeds at the two walls.
    pub(crate) fn wall_speeds(&self) -> Result<(f64, f64)> {
        let a = self.gamma * self.length / 2.0;
        if a.abs() >= 1.0 {
            return Err(Error::Domain(format!("|gamma| L / 2 = {} must be < 1", a.abs())));
        }
        Ok(((1.0 + a).sqrt(), (1.0 - a).sqrt()))
    }
}

/// Uniform nodes on [0, L] with composite Simpson weights.
#[derive(Debug, Clone)]
pub struct Grid {
    length: f64,
    weights: Arc<[f64]>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.weights.len() == other.weights.len()
    }
}

impl Grid {
    pub fn uniform(length: f64, points: usize) -> Result<Grid> {
        if !(length > 0.0) || points < 2 {
            return Err(Error::Usage(format!(
                "grid needs L > 0 and at least 2 points (L = {length}, points = {points})"
            )));
        }
        Ok(Grid {
            length,
            weights: simpson_weights(points, length / (points - 1) as f64).into(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn step(&self) -> f64 {
        self.length / (self.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.len() {
            self.length
        } else {
            self.length * i as f64 / (self.len() - 1) as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(self.weights.iter()).map(|(v, w)| v * w).sum()
    }

    pub fn integrate_complex(&self, values: &[C64]) -> C64 {
        debug_assert_eq!(values.len(), self.len());
        values
            .iter()
            .zip(self.weights.iter())
            .fold(C64::new(0.0, 0.0), |acc, (v, w)| acc + v * *w)
    }
}

/// Composite Simpson weights; an odd interval count closes with the 3/8 rule.
pub fn simpson_weights(points: usize, h: f64) -> Vec<f64> {
    let m = points - 1;
    let mut w = vec![0.0; points];
    if m == 1 {
        w[0] = h / 2.0;
        w[1] = h / 2.0;
        return w;
    }
    if m == 2 {
        return vec![h / 3.0, 4.0 * h / 3.0, h / 3.0];
    }
    let simpson_end = if m % 2 == 0 { m } else { m - 3 };
    for k in (0..simpson_end).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if m % 2 == 1 {
        let s = simpson_end;
        for (j, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[s + j] += 3.0 * h / 8.0 * c;
        }
    }
    w
}

/// A pair of complex fields sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction2 {
    grid: Grid,
    samples: Vec<[C64; 2]>,
}

impl GridFunction2 {
    pub fn new(grid: Grid, samples: Vec<[C64; 2]>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Usage(format!(
                "{} samples on a grid of {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        Ok(GridFunction2 { grid, samples })
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64) -> [C64; 2]) -> Self {
        let samples = grid.nodes().map(&mut f).collect();
        GridFunction2 {
            grid: grid.clone(),
            samples,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_fn(grid, |_| [C64::new(0.0, 0.0); 2])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[[C64; 2]] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [[C64; 2]] {
        &mut self.samples
    }

    pub fn component(&self, k: usize) -> Vec<C64> {
        self.samples.iter().map(|s| s[k]).collect()
    }

    /// (f₁(0), f₂(0)), read from the first node.
    pub fn left(&self) -> [C64; 2] {
        self.samples[0]
    }

    /// (f₁(L), f₂(L)), read from the last node.
    pub fn right(&self) -> [C64; 2] {
        self.samples[self.samples.len() - 1]
    }

    pub fn scaled(&self, c: C64) -> Self {
        self.map(|s| [s[0] * c, s[1] * c])
    }

    pub fn conj(&self) -> Self {
        self.map(|s| [s[0].conj(), s[1].conj()])
    }

    pub fn map(&self, f: impl Fn([C64; 2]) -> [C64; 2]) -> Self {
        GridFunction2 {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|&s| f(s)).collect(),
        }
    }

    /// self += c · other.
    pub fn axpy(&mut self, c: C64, other: &GridFunction2) -> Result<()> {
        check_grids(&self.grid, &other.grid)?;
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            a[0] += c * b[0];
            a[1] += c * b[1];
        }
        Ok(())
    }

    pub fn sub(&self, other: &GridFunction2) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn max_norm(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s[0].norm().max(s[1].norm()))
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        inner_product(self, self).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0)
    }
}

fn check_grids(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::Usage(format!(
            "grid mismatch: {} nodes on [0, {}] vs {} nodes on [0, {}]",
            a.len(),
            a.length(),
            b.len(),
            b.length()
        )));
    }
    Ok(())
}

/// ⟨f, g⟩ = (1/2L) ∫₀ᴸ (f₁ ḡ₁ + f₂ ḡ₂) dx.
pub fn inner_product(f: &GridFunction2, g: &GridFunction2) -> Result<C64> {
    check_grids(&f.grid, &g.grid)?;
    let w = f.grid.weights();
    let mut acc = C64::new(0.0, 0.0);
    for ((a, b), wi) in f.samples.iter().zip(&g.samples).zip(w) {
        acc += (a[0] * b[0].conj() + a[1] * b[1].conj()) * *wi;
    }
    Ok(acc / (2.0 * f.grid.length()))
}

fn check_position(params: &Params, x: f64) -> Result<()> {
    if !(0.0..=params.length).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, {}]", params.length)));
    }
    Ok(())
}

/// H^γ(x) = 1 − γ(x − L/2).
pub fn steady_state_height(params: &Params, x: f64) -> Result<f64> {
    check_position(params, x)?;
    Ok(1.0 - params.gamma * (x - params.length / 2.0))
}

/// L_γ = (2/γ)(√(1+γL/2) − √(1−γL/2)), evaluated as 2L/(√(1+γL/2) + √(1−γL/2)).
///
/// The rationalized form is exact algebra and has no 0/0 at γ = 0.
pub fn l_gamma(params: &Params) -> Result<f64> {
    let (s1, s2) = params.wall_speeds()?;
    if params.gamma == 0.0 {
        return Ok(params.length);
    }
    Ok(2.0 * params.length / (s1 + s2))
}

/// Local wave speed in working coordinates, W(z) = √(1+γL/2) − (γL_γ/2L) z.
///
/// Equals √H^γ at the physical point corresponding to `z`.
pub fn wave_speed(params: &Params, z: f64) -> Result<f64> {
    check_position(params, z)?;
    let (s1, s2) = params.wall_speeds()?;
    let w = s1 - (s1 - s2) * z / params.length;
    if w <= 0.0 {
        return Err(Error::Domain(format!("non-positive wave speed at z = {z}")));
    }
    Ok(w)
}

/// δ(z) = −(3L_γ/4L) γ / W(z).
pub fn delta(params: &Params, z: f64) -> Result<f64> {
    let w = wave_speed(params, z)?;
    let (s1, s2) = params.wall_speeds()?;
    // γL_γ/2 = s1 − s2 keeps the γ → 0 limit exact.
    Ok(-1.5 * (s1 - s2) / (params.length * w))
}

/// W(z)^{3/2}: the weight removing the diagonal coupling.
///
/// Normalized so that the value at z = 0 is (1+γL/2)^{3/4}; it differs from
/// exp(∫₀ᶻ δ) by that constant factor.
pub fn exp_weight(params: &Params, z: f64) -> Result<f64> {
    Ok(wave_speed(params, z)?.powf(1.5))
}

/// Physical position → straightened coordinate y(x) = ∫₀ˣ H^{−1/2} ∈ [0, L_γ].
fn straighten(params: &Params, s1: f64, x: f64) -> f64 {
    let h = 1.0 - params.gamma * (x - params.length / 2.0);
    2.0 * x / (s1 + h.sqrt())
}

/// Inverse of [`straighten`].
fn unstraighten(params: &Params, s1: f64, y: f64) -> f64 {
    y * s1 - params.gamma * y * y / 4.0
}

/// Maps a physical position to the working coordinate.
pub fn physical_to_working(params: &Params, x: f64) -> Result<f64> {
    check_position(params, x)?;
    let (s1, _) = params.wall_speeds()?;
    let z = straighten(params, s1, x) * params.length / l_gamma(params)?;
    Ok(z.clamp(0.0, params.length))
}

/// Maps a working coordinate back to the physical position.
pub fn working_to_physical(params: &Params, z: f64) -> Result<f64> {
    check_position(params, z)?;
    let (s1, _) = params.wall_speeds()?;
    let x = unstraighten(params, s1, z * l_gamma(params)? / params.length);
    Ok(x.clamp(0.0, params.length))
}

/// Cubic Hermite interpolation of grid samples with fourth-order nodal slopes.
pub fn resample(grid: &Grid, values: &[C64], at: &[f64]) -> Result<Vec<C64>> {
    let n = grid.len();
    if values.len() != n {
        return Err(Error::Usage("resample: sample count does not match grid".into()));
    }
    if n < 5 {
        return Err(Error::Usage("resample needs at least 5 nodes".into()));
    }
    let h = grid.step();
    let slopes = hermite_slopes(values, h);
    let tol = 1e-12 * grid.length();
    at.iter()
        .map(|&x| {
            if !(x >= -tol && x <= grid.length() + tol) {
                return Err(Error::Domain(format!(
                    "resampling at {x} outside [0, {}]",
                    grid.length()
                )));
            }
            let s = (x / h).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            let t = s - i as f64;
            let (t2, t3) = (t * t, t * t * t);
            let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
            let h10 = t3 - 2.0 * t2 + t;
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h11 = t3 - t2;
            Ok(values[i] * h00 + slopes[i] * (h10 * h) + values[i + 1] * h01 + slopes[i + 1] * (h11 * h))
        })
        .collect()
}

fn hermite_slopes(f: &[C64], h: f64) -> Vec<C64> {
    let n = f.len();
    let d = 12.0 * h;
    (0..n)
        .map(|i| match i {
            0 => (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) / d,
            1 => (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) / d,
            _ if i == n - 1 => {
                (f[n - 1] * 25.0 - f[n - 2] * 48.0 + f[n - 3] * 36.0 - f[n - 4] * 16.0
                    + f[n - 5] * 3.0)
                    / d
            }
            _ if i == n - 2 => {
                (f[n - 1] * 3.0 + f[n - 2] * 10.0 - f[n - 3] * 18.0 + f[n - 4] * 6.0 - f[n - 5])
                    / d
            }
            _ => (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) / d,
        })
        .collect()
}

/// (h, v) on the physical grid → ζ on the working grid.
///
/// Riemann variables ξ = S(x)(h, v), then the characteristic-straightening
/// change of variable, then multiplication by [`exp_weight`].
pub fn physical_to_zeta(params: &Params, grid: &Grid, h: &[C64], v: &[C64]) -> Result<GridFunction2> {
    if h.len() != grid.len() || v.len() != grid.len() {
        return Err(Error::Usage("physical_to_zeta: component lengths differ from grid".into()));
    }
    let xi: Vec<[C64; 2]> = grid
        .nodes()
        .zip(h.iter().zip(v))
        .map(|(x, (&h, &v))| {
            let r = 1.0 / steady_state_height(params, x)?.sqrt();
            Ok([h * r + v, -h * r + v])
        })
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = grid.nodes().map(|z| exp_weight(params, z)).collect::<Result<_>>()?;
    let xi = if params.gamma == 0.0 {
        xi
    } else {
        let xs: Vec<f64> = grid
            .nodes()
            .map(|z| working_to_physical(params, z))
            .collect::<Result<_>>()?;
        let a = resample(grid, &xi.iter().map(|s| s[0]).collect::<Vec<_>>(), &xs)?;
        let b = resample(grid, &xi.iter().map(|s| s[1]).collect::<Vec<_>>(), &xs)?;
        a.into_iter().zip(b).map(|(a, b)| [a, b]).collect()
    };
    let samples = xi
        .into_iter()
        .zip(weights)
        .map(|(s, w)| [s[0] * w, s[1] * w])
        .collect();
    GridFunction2::new(grid.clone(), samples)
}

/// Inverse of [`physical_to_zeta`]: returns (h, v) on the physical grid.
pub fn zeta_to_physical(params: &Params, zeta: &GridFunction2) -> Result<(Vec<C64>, Vec<C64>)> {
    let grid = zeta.grid();
    let xi: Vec<[C64; 2]> = grid
        .nodes()
        .zip(zeta.samples())
        .map(|(z, s)| {
            let w = exp_weight(params, z)?;
            Ok([s[0] / w, s[1] / w])
        })
        .collect::<Result<_>>()?;
    let xi = if params.gamma == 0.0 {
        xi
    } else {
        let zs: Vec<f64> = grid
            .nodes()
            .map(|x| physical_to_working(params, x))
            .collect::<Result<_>>()?;
        let a = resample(grid, &xi.iter().map(|s| s[0]).collect::<Vec<_>>(), &zs)?;
        let b = resample(grid, &xi.iter().map(|s| s[1]).collect::<Vec<_>>(), &zs)?;
        a.into_iter().zip(b).map(|(a, b)| [a, b]).collect()
    };
    let mut h = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for (x, s) in grid.nodes().zip(xi) {
        let r = steady_state_height(params, x)?.sqrt();
        v.push((s[0] + s[1]) / 2.0);
        h.push((s[0] - s[1]) * (r / 2.0));
    }
    Ok((h, v))
}

/// ∫₀ᴸ W(z)² (w₁ − w₂) dz for a state in w-coordinates (ζ = W^{3/2} w).
pub fn mass_functional(params: &Params, w: &GridFunction2) -> Result<C64> {
    let grid = w.grid();
    let integrand: Vec<C64> = grid
        .nodes()
        .zip(w.samples())
        .map(|(z, s)| Ok((s[0] - s[1]) * wave_speed(params, z)?.powi(2)))
        .collect::<Result<_>>()?;
    Ok(grid.integrate_complex(&integrand))
}

/// The mass functional written directly on ζ: ∫₀ᴸ W^{1/2} (ζ₁ − ζ₂).
pub fn mass_of_zeta(params: &Params, zeta: &GridFunction2) -> Result<C64> {
    let w = zeta_to_w(params, zeta)?;
    mass_functional(params, &w)
}

/// w = ζ / W^{3/2}.
pub fn zeta_to_w(params: &Params, zeta: &GridFunction2) -> Result<GridFunction2> {
    let grid = zeta.grid();
    let samples = grid
        .nodes()
        .zip(zeta.samples())
        .map(|(z, s)| {
            let e = exp_weight(params, z)?;
            Ok([s[0] / e, s[1] / e])
        })
        .collect::<Result<_>>()?;
    GridFunction2::new(grid.clone(), samples)
}

/// Control profile ℐ = W^{3/2} (1, 1) of the interior acceleration control.
pub fn control_profile(params: &Params, grid: &Grid) -> Result<GridFunction2> {
    let samples = grid
        .nodes()
        .map(|z| {
            let e = C64::new(exp_weight(params, z)?, 0.0);
            Ok([e, e])
        })
        .collect::<Result<_>>()?;
    GridFunction2::new(grid.clone(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(gamma: f64) -> Params {
        Params {
            gamma,
            ..Params::default()
        }
    }

    #[test]
    fn height_examples() {
        assert_eq!(steady_state_height(&p(0.0), 0.3).unwrap(), 1.0);
        assert!((steady_state_height(&p(0.1), 0.0).unwrap() - 1.05).abs() < 1e-15);
        assert!((steady_state_height(&p(0.1), 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(steady_state_height(&p(0.1), 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn l_gamma_even_and_limit() {
        assert_eq!(l_gamma(&p(0.0)).unwrap(), 1.0);
        assert_eq!(l_gamma(&p(0.1)).unwrap(), l_gamma(&p(-0.1)).unwrap());
        let d = l_gamma(&p(0.1)).unwrap() - 1.0;
        assert!(d > 0.0 && d <= 0.01 / 8.0);
        assert!(matches!(l_gamma(&p(2.5)), Err(Error::Domain(_))));
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        for n in [17, 18, 101] {
            let g = Grid::uniform(2.0, n).unwrap();
            let v: Vec<f64> = g.nodes().map(|x| x * x * x - x).collect();
            assert!((g.integrate(&v) - 2.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn fourier_pairs() {
        let g = p(0.0).grid();
        let e = |k: f64| {
            GridFunction2::from_fn(&g, move |x| {
                let t = std::f64::consts::PI * k * x;
                [C64::from_polar(1.0, t), -C64::from_polar(1.0, -t)]
            })
        };
        assert!((inner_product(&e(1.0), &e(1.0)).unwrap() - 1.0).norm() < 1e-12);
        assert!(inner_product(&e(1.0), &e(2.0)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = GridFunction2::zeros(&Grid::uniform(1.0, 20).unwrap());
        let b = GridFunction2::zeros(&Grid::uniform(1.0, 21).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::Usage(_))));
    }

    #[test]
    fn gamma_zero_zeta_is_riemann() {
        let par = p(0.0);
        let g = par.grid();
        let h: Vec<C64> = g.nodes().map(|x| C64::new(x.cos(), 0.0)).collect();
        let v: Vec<C64> = g.nodes().map(|x| C64::new(x * (1.0 - x), 0.0)).collect();
        let z = physical_to_zeta(&par, &g, &h, &v).unwrap();
        for i in 0..g.len() {
            assert!((z.samples()[i][0] - (h[i] + v[i])).norm() < 1e-15);
            assert!((z.samples()[i][1] - (v[i] - h[i])).norm() < 1e-15);
        }
    }

    #[test]
    fn coordinate_maps_invert() {
        let par = p(0.15);
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            let z = physical_to_working(&par, x).unwrap();
            assert!((working_to_physical(&par, z).unwrap() - x).abs() < 1e-14);
            let hx = steady_state_height(&par, x).unwrap().sqrt();
            assert!((wave_speed(&par, z).unwrap() - hx).abs() < 1e-14);
        }
    }
}
