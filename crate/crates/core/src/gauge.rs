//! Coulomb gauge preprocessing.
//!
//! For periodic `A`, the gauge function solves `ε Δλ = -∇·A` on the torus
//! (zero-mean `λ`), and the problem is rewritten with
//! `ũ = u e^{iλ}`, `Ã = A + ε∇λ`, `Ṽ = V` (λ is time-independent here).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{contract, Error, Result};
use crate::grid::{fft_wavenumber, Grid};
use crate::spectral::{spectral_derivative, FftNd, WaveField};

pub type ScalarFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Component-major samples of a vector field on a grid: `samples[axis][point]`.
pub type VectorSamples = Vec<Vec<f64>>;

/// Scalar potential `V(t, x)` and vector potential `A(t, x)`.
#[derive(Clone)]
pub struct PotentialSet {
    dim: usize,
    scalar: ScalarFn,
    vector: VectorFn,
    time_dependent: bool,
}

impl fmt::Debug for PotentialSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSet")
            .field("dim", &self.dim)
            .field("time_dependent", &self.time_dependent)
            .finish_non_exhaustive()
    }
}

impl PotentialSet {
    pub fn new(dim: usize, scalar: ScalarFn, vector: VectorFn, time_dependent: bool) -> Self {
        Self { dim, scalar, vector, time_dependent }
    }

    pub fn time_independent(
        dim: usize,
        scalar: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        vector: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            dim,
            Arc::new(move |_, x| scalar(x)),
            Arc::new(move |_, x, out| vector(x, out)),
            false,
        )
    }

    /// `V ≡ 0`, `A ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self::time_independent(dim, |_| 0.0, |_, out| out.fill(0.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn scalar(&self, t: f64, x: &[f64]) -> f64 {
        (self.scalar)(t, x)
    }

    pub fn vector(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.vector)(t, x, out)
    }

    pub fn scalar_fn(&self) -> &ScalarFn {
        &self.scalar
    }

    pub fn vector_fn(&self) -> &VectorFn {
        &self.vector
    }

    pub fn sample_scalar(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        self.check_dim(grid)?;
        let v = grid.sample(|x| self.scalar(t, x));
        if let Some(i) = v.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("V at grid point {i}")));
        }
        Ok(v)
    }

    pub fn sample_vector(&self, grid: &Grid, t: f64) -> Result<VectorSamples> {
        self.check_dim(grid)?;
        let d = self.dim;
        let mut out = vec![Vec::with_capacity(grid.len()); d];
        let mut buf = vec![0.0; d];
        for (j, x) in grid.points().chunks_exact(d).enumerate() {
            self.vector(t, x, &mut buf);
            for i in 0..d {
                if !buf[i].is_finite() {
                    return Err(Error::NonFinite(format!("A_{i} at grid point {j} ({x:?})")));
                }
                out[i].push(buf[i]);
            }
        }
        Ok(out)
    }

    fn check_dim(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(contract(format!(
                "{}-dimensional potentials on a {}-dimensional grid",
                self.dim,
                grid.dim()
            )));
        }
        Ok(())
    }
}

/// One Fourier mode of the gauge function, kept for off-grid evaluation.
#[derive(Debug, Clone)]
struct Mode {
    /// `2π k_i / L_i` per axis.
    omega: Vec<f64>,
    /// Modes with a Nyquist component are dropped from the gradient, as on the grid.
    nyquist: Vec<bool>,
    coeff: Complex64,
}

/// The gauge function `λ` on the grid plus its spectral gradient.
#[derive(Debug, Clone)]
pub struct GaugeField {
    grid: Grid,
    lambda: Vec<f64>,
    grad_lambda: VectorSamples,
    epsilon: f64,
    modes: Vec<Mode>,
}

impl GaugeField {
    /// `λ ≡ 0` on `grid`.
    pub fn trivial(grid: &Grid, epsilon: f64) -> Self {
        Self {
            lambda: vec![0.0; grid.len()],
            grad_lambda: vec![vec![0.0; grid.len()]; grid.dim()],
            grid: grid.clone(),
            epsilon,
            modes: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn grad_lambda(&self) -> &VectorSamples {
        &self.grad_lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// True when no mode of `λ` survived round-off pruning.
    pub fn is_trivial(&self) -> bool {
        self.modes.is_empty()
    }

    fn phase(&self, mode: &Mode, x: &[f64]) -> Complex64 {
        let lo = self.grid.domain().lo();
        let angle: f64 = (0..x.len()).map(|i| mode.omega[i] * (x[i] - lo[i])).sum();
        Complex64::from_polar(1.0, angle)
    }

    /// `λ(x)` at an arbitrary point.
    pub fn lambda_at(&self, x: &[f64]) -> f64 {
        self.modes.iter().map(|m| (m.coeff * self.phase(m, x)).re).sum()
    }

    /// `∇λ(x)` at an arbitrary point.
    pub fn grad_lambda_at(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for m in &self.modes {
            let e = m.coeff * self.phase(m, x);
            for i in 0..out.len() {
                if !m.nyquist[i] {
                    // Re(i ω c e) = -ω Im(c e)
                    out[i] -= m.omega[i] * e.im;
                }
            }
        }
    }
}

fn check_samples(grid: &Grid, a: &[Vec<f64>]) -> Result<()> {
    if a.len() != grid.dim() {
        return Err(contract(format!(
            "vector field has {} components, grid has dimension {}",
            a.len(),
            grid.dim()
        )));
    }
    for (i, c) in a.iter().enumerate() {
        if c.len() != grid.len() {
            return Err(contract(format!(
                "component {i} has {} samples, grid has {}",
                c.len(),
                grid.len()
            )));
        }
        if let Some(j) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("component {i} at grid point {j}")));
        }
    }
    Ok(())
}

/// `∇·A` from grid samples, exact for resolvable trigonometric polynomials.
pub fn spectral_divergence(grid: &Grid, a: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_samples(grid, a)?;
    let mut div = vec![0.0; grid.len()];
    for (i, comp) in a.iter().enumerate() {
        let d = spectral_derivative(grid, comp, i)?;
        for (acc, v) in div.iter_mut().zip(d) {
            *acc += v;
        }
    }
    Ok(div)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `ε Δλ = -∇·A` spectrally with `λ̂_0 = 0`.
pub fn coulomb_gauge(grid: &Grid, a: &[Vec<f64>], eps: f64) -> Result<GaugeField> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(contract(format!("epsilon must be positive, got {eps}")));
    }
    let div = spectral_divergence(grid, a)?;
    let d = grid.dim();
    let total = grid.len();
    let fft = FftNd::new(grid.sizes());

    let mut hat: Vec<Complex64> = div.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut hat);

    let scale_a = a.iter().map(|c| max_abs(c)).fold(0.0, f64::max);
    let mut modes = Vec::new();
    let mut raw = hat.clone();
    for (lin, h) in raw.iter_mut().enumerate() {
        let mut rest = lin;
        let mut omega = vec![0.0; d];
        let mut nyquist = vec![false; d];
        for i in (0..d).rev() {
            let n = grid.sizes()[i];
            let k = fft_wavenumber(rest % n, n);
            rest /= n;
            omega[i] = 2.0 * PI * k as f64 / grid.domain().length(i);
            nyquist[i] = 2 * k == -(n as i64);
        }
        let kappa2: f64 = omega.iter().map(|w| w * w).sum();
        if kappa2 == 0.0 {
            *h = Complex64::new(0.0, 0.0);
            continue;
        }
        // ε(-κ²) λ̂ = -div̂
        *h /= eps * kappa2;
        let coeff = *h / total as f64;
        // amplitude of this mode in ε∇λ; round-off modes are dropped
        let weight = eps * coeff.norm() * kappa2.sqrt();
        if weight > 1e-14 * (1.0 + scale_a) {
            modes.push(Mode { omega, nyquist, coeff });
        }
    }
    let mut lam = raw;
    fft.inverse(&mut lam);
    let lambda: Vec<f64> = lam.iter().map(|v| v.re / total as f64).collect();

    let mut grad_lambda = Vec::with_capacity(d);
    for i in 0..d {
        grad_lambda.push(spectral_derivative(grid, &lambda, i)?);
    }

    // Poisson residual: div(A + ε∇λ) must vanish
    let gauged: VectorSamples = (0..d)
        .map(|i| a[i].iter().zip(&grad_lambda[i]).map(|(ai, gi)| ai + eps * gi).collect())
        .collect();
    let residual = max_abs(&spectral_divergence(grid, &gauged)?);
    let tol = 1e-8 * (1.0 + max_abs(&div));
    if residual > tol {
        return Err(Error::GaugeInfeasible(format!(
            "divergence of the gauged potential is {residual:e} (tolerance {tol:e})"
        )));
    }

    Ok(GaugeField { grid: grid.clone(), lambda, grad_lambda, epsilon: eps, modes })
}

/// `Ã = A + ε∇λ`, `Ṽ = V`.
pub fn transform_potentials(p: &PotentialSet, g: &GaugeField) -> Result<PotentialSet> {
    if p.dim() != g.grid().dim() {
        return Err(contract(format!(
            "{}-dimensional potentials with a {}-dimensional gauge",
            p.dim(),
            g.grid().dim()
        )));
    }
    if g.is_trivial() {
        return Ok(p.clone());
    }
    let inner = p.vector_fn().clone();
    let gauge = g.clone();
    let d = p.dim();
    let vector: VectorFn = Arc::new(move |t, x, out| {
        inner(t, x, out);
        let mut grad = [0.0; 3];
        gauge.grad_lambda_at(x, &mut grad[..d]);
        for i in 0..d {
            out[i] += gauge.epsilon * grad[i];
        }
    });
    Ok(PotentialSet::new(d, p.scalar_fn().clone(), vector, p.is_time_dependent()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeDirection {
    /// `u ↦ u e^{iλ}`
    Forward,
    /// `ũ ↦ ũ e^{-iλ}`
    Inverse,
}

pub fn transform_wavefunction(
    u: &WaveField,
    g: &GaugeField,
    direction: GaugeDirection,
) -> Result<WaveField> {
    u.grid().check_same(g.grid(), "gauge transform")?;
    let sign = match direction {
        GaugeDirection::Forward => 1.0,
        GaugeDirection::Inverse => -1.0,
    };
    let mut out = u.clone();
    for (v, l) in out.values_mut().iter_mut().zip(g.lambda()) {
        let (s, c) = (sign * l).sin_cos();
        *v *= Complex64::new(c, s);
    }
    Ok(out)
}
