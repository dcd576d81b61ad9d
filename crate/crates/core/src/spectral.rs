//! Grid ↔ Fourier coefficients in the normalized basis
//! `E_k(x) = Π_i exp(2πi k_i (x_i - a_i)/L_i) / √L_i`, and the exact kinetic flow.
//!
//! With grid storage position `s_i` (so `(x_i - a_i)/L_i = s_i/N_i`):
//!
//! ```text
//! v(x_s)  = (1/√ΠL) Σ_k v̂_k exp(+2πi k·s/N)        (unnormalized inverse DFT)
//! v̂_k    = (h̄/√ΠL) Σ_s v(x_s) exp(-2πi k·s/N)      (forward DFT, h̄ = cell volume)
//! ```
//!
//! so that `h̄ Σ_s |v(x_s)|² = Σ_k |v̂_k|²`. Coefficients are stored row-major in
//! FFT order per axis: position `q` holds `k = q` for `q < N/2` and `k = q - N` otherwise.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{contract, Error, Result};
use crate::grid::{fft_position, fft_wavenumber, Grid, MultiIndex};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex values at the grid points, storage order of [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(contract(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("wave field entry {i} = {}", values[i])));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![ZERO; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let values = grid.sample(f);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }
}

/// Fourier coefficients `v̂_k`, `k ∈ I_N`, in FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(contract(format!(
                "{} coefficients for a grid of {} points",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        let coeffs = vec![ZERO; grid.len()];
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Storage position of wavenumber `k`.
    pub fn position(&self, k: &MultiIndex) -> Result<usize> {
        // validates the range
        self.grid.linear_index(k)?;
        let mut idx = 0;
        for (i, &n) in self.grid.sizes().iter().enumerate() {
            idx = idx * n + fft_position(k.0[i], n);
        }
        Ok(idx)
    }

    pub fn coeff(&self, k: &MultiIndex) -> Result<Complex64> {
        Ok(self.coeffs[self.position(k)?])
    }

    pub fn set_coeff(&mut self, k: &MultiIndex, value: Complex64) -> Result<()> {
        let p = self.position(k)?;
        self.coeffs[p] = value;
        Ok(())
    }

    /// Signed wavenumber stored at a linear position.
    pub fn wavenumber_at(&self, linear: usize) -> MultiIndex {
        wavenumber_at(&self.grid, linear)
    }

    /// Zeroes every coefficient with a component `k_i = -N_i/2`.
    pub fn remove_nyquist(&mut self) {
        let sizes = self.grid.sizes().to_vec();
        let mut stride = 1;
        for &n in sizes.iter().rev() {
            // k = -n/2 sits at storage position n/2 along the axis
            let outer = self.coeffs.len() / (n * stride);
            for o in 0..outer {
                let base = o * n * stride + (n / 2) * stride;
                self.coeffs[base..base + stride].fill(ZERO);
            }
            stride *= n;
        }
    }
}

pub(crate) fn wavenumber_at(grid: &Grid, linear: usize) -> MultiIndex {
    let mut rest = linear;
    let mut k = vec![0i64; grid.dim()];
    for i in (0..grid.dim()).rev() {
        let n = grid.sizes()[i];
        k[i] = fft_wavenumber(rest % n, n);
        rest /= n;
    }
    MultiIndex(k)
}

/// Axis-by-axis complex FFT over a row-major array.
pub(crate) struct FftNd {
    sizes: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftNd {
    pub(crate) fn new(sizes: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { sizes: sizes.to_vec(), forward, inverse }
    }

    /// Unnormalized `Σ x exp(-2πi k·s/N)`.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// Unnormalized `Σ x exp(+2πi k·s/N)`.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
    }

    fn run(&self, plans: &[Arc<dyn Fft<f64>>], data: &mut [Complex64]) {
        let total: usize = self.sizes.iter().product();
        assert_eq!(data.len(), total);
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.sizes[axis];
            let stride: usize = self.sizes[axis + 1..].iter().product();
            let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let outer = total / (n * stride);
            let mut line = vec![ZERO; n];
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for (q, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + q * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (q, v) in line.iter().enumerate() {
                        data[base + q * stride] = *v;
                    }
                }
            }
        }
    }
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("sizes", &self.sizes).finish()
    }
}

/// Reusable transform between [`WaveField`] and [`SpectralField`] on one grid.
#[derive(Debug)]
pub struct SpectralTransform {
    grid: Grid,
    fft: FftNd,
    forward_scale: f64,
    inverse_scale: f64,
}

impl SpectralTransform {
    pub fn new(grid: &Grid) -> Self {
        let root_volume = grid.domain().volume().sqrt();
        Self {
            fft: FftNd::new(grid.sizes()),
            forward_scale: grid.cell_volume() / root_volume,
            inverse_scale: 1.0 / root_volume,
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn to_spectral(&self, field: &WaveField) -> Result<SpectralField> {
        self.grid.check_same(field.grid(), "to_spectral")?;
        let mut coeffs = field.values().to_vec();
        self.forward_in_place(&mut coeffs);
        Ok(SpectralField { grid: self.grid.clone(), coeffs })
    }

    pub fn to_physical(&self, spec: &SpectralField) -> Result<WaveField> {
        self.grid.check_same(spec.grid(), "to_physical")?;
        let mut values = spec.coeffs().to_vec();
        self.inverse_in_place(&mut values);
        Ok(WaveField::from_parts_unchecked(self.grid.clone(), values))
    }

    pub fn into_spectral(&self, field: WaveField) -> Result<SpectralField> {
        self.grid.check_same(field.grid(), "to_spectral")?;
        let mut coeffs = field.into_values();
        self.forward_in_place(&mut coeffs);
        Ok(SpectralField { grid: self.grid.clone(), coeffs })
    }

    pub fn into_physical(&self, spec: SpectralField) -> Result<WaveField> {
        self.grid.check_same(spec.grid(), "to_physical")?;
        let mut values = spec.into_coeffs();
        self.inverse_in_place(&mut values);
        Ok(WaveField::from_parts_unchecked(self.grid.clone(), values))
    }

    pub(crate) fn forward_in_place(&self, data: &mut [Complex64]) {
        self.fft.forward(data);
        for v in data.iter_mut() {
            *v *= self.forward_scale;
        }
    }

    pub(crate) fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.fft.inverse(data);
        for v in data.iter_mut() {
            *v *= self.inverse_scale;
        }
    }
}

pub fn to_spectral(field: &WaveField) -> SpectralField {
    SpectralTransform::new(field.grid())
        .to_spectral(field)
        .expect("transform built from the field's own grid")
}

pub fn to_physical(spec: &SpectralField) -> WaveField {
    SpectralTransform::new(spec.grid())
        .to_physical(spec)
        .expect("transform built from the field's own grid")
}

pub(crate) fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(contract(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// The multipliers `exp(τλ_k)` of the kinetic flow for a fixed step.
#[derive(Debug, Clone)]
pub struct KineticPropagator {
    grid: Grid,
    multipliers: Vec<Complex64>,
}

impl KineticPropagator {
    pub fn new(grid: &Grid, tau: f64, eps: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(contract(format!("kinetic step needs a finite tau >= 0, got {tau}")));
        }
        check_epsilon(eps)?;
        // per-axis factors; exp of a sum = product of exps is not bit-exact, so sum first
        let d = grid.dim();
        let kappa2: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let n = grid.sizes()[i];
                let len = grid.domain().length(i);
                (0..n)
                    .map(|q| {
                        let w = 2.0 * PI * fft_wavenumber(q, n) as f64 / len;
                        w * w
                    })
                    .collect()
            })
            .collect();
        let mut multipliers = Vec::with_capacity(grid.len());
        let mut idx = vec![0usize; d];
        for _ in 0..grid.len() {
            let k2: f64 = (0..d).map(|i| kappa2[i][idx[i]]).sum();
            let phase = -0.5 * eps * k2 * tau;
            let (s, c) = phase.sin_cos();
            multipliers.push(Complex64::new(c, s));
            for i in (0..d).rev() {
                idx[i] += 1;
                if idx[i] < grid.sizes()[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        Ok(Self { grid: grid.clone(), multipliers })
    }

    pub fn apply(&self, spec: &mut SpectralField) -> Result<()> {
        self.grid.check_same(spec.grid(), "kinetic step")?;
        for (c, m) in spec.coeffs.iter_mut().zip(&self.multipliers) {
            *c *= m;
        }
        Ok(())
    }
}

/// Exact kinetic flow `e^{τ(iε/2)Δ}` on the trigonometric space.
pub fn kinetic_step(spec: &SpectralField, tau: f64, eps: f64) -> Result<SpectralField> {
    let prop = KineticPropagator::new(spec.grid(), tau, eps)?;
    let mut out = spec.clone();
    prop.apply(&mut out)?;
    Ok(out)
}

/// Spectral derivative of real samples along `axis`.
///
/// The Nyquist mode `k = -N/2` is dropped so that real input gives real output;
/// exact for trigonometric polynomials of degree `< N/2`.
pub fn spectral_derivative(grid: &Grid, samples: &[f64], axis: usize) -> Result<Vec<f64>> {
    let fft = FftNd::new(grid.sizes());
    derivative_with(&fft, grid, samples, axis)
}

fn derivative_with(fft: &FftNd, grid: &Grid, samples: &[f64], axis: usize) -> Result<Vec<f64>> {
    if samples.len() != grid.len() {
        return Err(contract(format!("{} samples for {} grid points", samples.len(), grid.len())));
    }
    if axis >= grid.dim() {
        return Err(contract(format!("axis {axis} out of range")));
    }
    let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft.forward(&mut data);
    let n = grid.sizes()[axis];
    let len = grid.domain().length(axis);
    let stride: usize = grid.sizes()[axis + 1..].iter().product();
    for (lin, v) in data.iter_mut().enumerate() {
        let q = (lin / stride) % n;
        let k = fft_wavenumber(q, n);
        if 2 * k == -(n as i64) {
            *v = ZERO;
        } else {
            *v *= Complex64::new(0.0, 2.0 * PI * k as f64 / len);
        }
    }
    fft.inverse(&mut data);
    let scale = 1.0 / grid.len() as f64;
    Ok(data.iter().map(|v| v.re * scale).collect())
}

/// Spectral gradient of real samples, one field per axis.
pub fn spectral_gradient(grid: &Grid, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
    let fft = FftNd::new(grid.sizes());
    (0..grid.dim()).map(|i| derivative_with(&fft, grid, samples, i)).collect()
}
