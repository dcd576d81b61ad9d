//! Advection step `∂_t v = A·∇v` by backward characteristics.
//!
//! For each grid point the characteristic `ẋ(s) = -A(t₀ + s, x(s))`,
//! `x(τ) = x^j` is integrated back to `s = 0`; then `v(τ, x^j) = v₀(x^j(0))`.
//! The value at the foot is recovered by one of three backends: direct Fourier
//! summation, tensor Lagrange interpolation of the grid values, or the NFFT.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{contract, Error, Result};
use crate::gauge::PotentialSet;
use crate::grid::Grid;
#[cfg(test)]
use crate::grid::fft_wavenumber;
use crate::nfft::{NfftConfig, NfftPlan};
use crate::spectral::{SpectralField, SpectralTransform, WaveField};

pub const DEFAULT_SUBSTEPS: usize = 16;

/// Feet `x^j(0)` of the backward characteristics through every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct DeparturePoints {
    grid: Grid,
    feet: Vec<f64>,
    raw_feet: Vec<f64>,
    t0: f64,
    tau: f64,
    substeps: usize,
    max_defect: Option<f64>,
}

impl DeparturePoints {
    /// Feet equal to the grid points (`A ≡ 0`).
    pub fn at_grid(grid: &Grid) -> Self {
        let pts = grid.points();
        Self {
            grid: grid.clone(),
            feet: pts.clone(),
            raw_feet: pts,
            t0: 0.0,
            tau: 0.0,
            substeps: 0,
            max_defect: Some(0.0),
        }
    }

    /// Wraps arbitrary feet (flattened `point * d + axis`) into the domain.
    pub fn from_feet(grid: &Grid, raw_feet: Vec<f64>, tau: f64) -> Result<Self> {
        if raw_feet.len() != grid.len() * grid.dim() {
            return Err(contract(format!(
                "{} foot coordinates for {} grid points in {} dimensions",
                raw_feet.len(),
                grid.len(),
                grid.dim()
            )));
        }
        let mut feet = raw_feet.clone();
        for (j, p) in feet.chunks_exact_mut(grid.dim()).enumerate() {
            grid.domain()
                .wrap_in_place(p)
                .map_err(|_| Error::NonFinite(format!("foot of grid point {j}")))?;
        }
        Ok(Self {
            grid: grid.clone(),
            feet,
            raw_feet,
            t0: 0.0,
            tau,
            substeps: 0,
            max_defect: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Wrapped feet, flattened `point * d + axis`.
    pub fn feet(&self) -> &[f64] {
        &self.feet
    }

    /// Feet before wrapping into the domain.
    pub fn raw_feet(&self) -> &[f64] {
        &self.raw_feet
    }

    pub fn foot(&self, j: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.feet[j * d..(j + 1) * d]
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Richardson estimate of the integration error (max over points and axes).
    pub fn max_defect(&self) -> Option<f64> {
        self.max_defect
    }
}

/// Integrates `dy/dσ = A(t₀ + τ - σ, y)` from `y(0) = x^j` over `[0, τ]` with RK4.
fn integrate_back(
    a: &PotentialSet,
    x: &[f64],
    t0: f64,
    tau: f64,
    substeps: usize,
    out: &mut [f64],
) -> Result<()> {
    let d = x.len();
    let h = tau / substeps as f64;
    let mut y = [0.0; 3];
    let mut k1 = [0.0; 3];
    let mut k2 = [0.0; 3];
    let mut k3 = [0.0; 3];
    let mut k4 = [0.0; 3];
    let mut tmp = [0.0; 3];
    y[..d].copy_from_slice(x);
    let eval = |t: f64, p: &[f64], k: &mut [f64]| -> Result<()> {
        a.vector(t, p, k);
        if k.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("A(t = {t}, x = {p:?}) = {k:?}")))
        }
    };
    for s in 0..substeps {
        let t = t0 + tau - s as f64 * h;
        eval(t, &y[..d], &mut k1[..d])?;
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        eval(t - 0.5 * h, &tmp[..d], &mut k2[..d])?;
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        eval(t - 0.5 * h, &tmp[..d], &mut k3[..d])?;
        for i in 0..d {
            tmp[i] = y[i] + h * k3[i];
        }
        eval(t - h, &tmp[..d], &mut k4[..d])?;
        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    out.copy_from_slice(&y[..d]);
    Ok(())
}

/// Feet over `[t₀, t₀ + τ]` with `substeps` RK4 steps.
pub fn compute_departure_points(
    grid: &Grid,
    a: &PotentialSet,
    t0: f64,
    tau: f64,
    substeps: usize,
) -> Result<DeparturePoints> {
    if a.dim() != grid.dim() {
        return Err(contract(format!(
            "{}-dimensional vector potential on a {}-dimensional grid",
            a.dim(),
            grid.dim()
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(contract(format!("time step must be positive, got {tau}")));
    }
    if substeps < 1 {
        return Err(contract("at least one characteristics substep is required"));
    }
    let d = grid.dim();
    let pts = grid.points();
    let mut raw = vec![0.0; pts.len()];
    let mut coarse = [0.0; 3];
    let mut defect: Option<f64> = (substeps >= 2).then_some(0.0);
    for (x, out) in pts.chunks_exact(d).zip(raw.chunks_exact_mut(d)) {
        integrate_back(a, x, t0, tau, substeps, out)?;
        if let Some(max) = defect.as_mut() {
            integrate_back(a, x, t0, tau, substeps / 2, &mut coarse[..d])?;
            // error of the fine solution ≈ |fine - coarse| / (2⁴ - 1)
            let ratio = substeps as f64 / (substeps / 2) as f64;
            let denom = ratio.powi(4) - 1.0;
            for i in 0..d {
                *max = max.max((out[i] - coarse[i]).abs() / denom);
            }
        }
    }
    let mut feet = raw.clone();
    for (j, p) in feet.chunks_exact_mut(d).enumerate() {
        grid.domain()
            .wrap_in_place(p)
            .map_err(|_| Error::NonFinite(format!("foot of grid point {j}")))?;
    }
    Ok(DeparturePoints {
        grid: grid.clone(),
        feet,
        raw_feet: raw,
        t0,
        tau,
        substeps,
        max_defect: defect,
    })
}

/// How values at the feet are recovered.
#[derive(Debug, Clone, PartialEq)]
pub enum AdvectionBackend {
    DirectFourier,
    /// Tensor Lagrange interpolation on `p` nodes per axis (`p` even).
    LocalInterp { p: usize },
    Nfft(NfftConfig),
}

impl AdvectionBackend {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DirectFourier => "direct",
            Self::LocalInterp { .. } => "interp",
            Self::Nfft(_) => "nfft",
        }
    }

    /// True if the backend evaluates the Fourier series (consumes coefficients).
    pub fn is_spectral(&self) -> bool {
        !matches!(self, Self::LocalInterp { .. })
    }
}

/// Phases `exp(2πi k θ)` for `k` in FFT order over `I_N`.
///
/// A recurrence `e_{k+1} = e_k·e^{2πiθ}` with an exact restart every block keeps
/// the error near round-off.
fn axis_phases(theta: f64, n: usize, out: &mut [Complex64]) {
    const BLOCK: usize = 32;
    let half = n / 2;
    let step = Complex64::from_polar(1.0, 2.0 * PI * theta);
    let mut e = Complex64::new(0.0, 0.0);
    for s in 0..n {
        let k = s as i64 - half as i64;
        if s % BLOCK == 0 {
            e = Complex64::from_polar(1.0, 2.0 * PI * reduced_cycles(k, theta));
        } else {
            e *= step;
        }
        // storage for k: k ≥ 0 at q = k, k < 0 at q = k + N
        let q = if s < half { s + half } else { s - half };
        out[q] = e;
    }
}

/// `kθ` modulo 1, with the rounding error of the product recovered by an FMA.
pub(crate) fn reduced_cycles(k: i64, theta: f64) -> f64 {
    let k = k as f64;
    let r = k * theta;
    let err = k.mul_add(theta, -r);
    (r - r.round()) + err
}

/// `Σ_k v̂_k E_k(foot)` at every foot; `O(ΠN²)` in total.
pub fn evaluate_direct(spec: &SpectralField, pts: &DeparturePoints) -> Result<Vec<Complex64>> {
    let grid = spec.grid();
    grid.check_same(&pts.grid, "direct evaluation")?;
    let d = grid.dim();
    let sizes = grid.sizes();
    let lo = grid.domain().lo();
    let scale = 1.0 / grid.domain().volume().sqrt();
    let coeffs = spec.coeffs();
    let mut phases: Vec<Vec<Complex64>> = sizes.iter().map(|&n| vec![Complex64::new(0.0, 0.0); n]).collect();
    let mut inner = vec![Complex64::new(0.0, 0.0); if d == 3 { sizes[1] } else { 0 }];
    let mut out = Vec::with_capacity(grid.len());
    for foot in pts.feet.chunks_exact(d) {
        for i in 0..d {
            let theta = (foot[i] - lo[i]) / grid.domain().length(i);
            axis_phases(theta, sizes[i], &mut phases[i]);
        }
        let value = match d {
            1 => dot(coeffs, &phases[0]),
            2 => {
                let n1 = sizes[1];
                let mut acc = Complex64::new(0.0, 0.0);
                for (q0, e0) in phases[0].iter().enumerate() {
                    acc += e0 * dot(&coeffs[q0 * n1..(q0 + 1) * n1], &phases[1]);
                }
                acc
            }
            _ => {
                let (n1, n2) = (sizes[1], sizes[2]);
                let mut acc = Complex64::new(0.0, 0.0);
                for (q0, e0) in phases[0].iter().enumerate() {
                    let plane = &coeffs[q0 * n1 * n2..(q0 + 1) * n1 * n2];
                    for q1 in 0..n1 {
                        inner[q1] = dot(&plane[q1 * n2..(q1 + 1) * n2], &phases[2]);
                    }
                    acc += e0 * dot(&inner, &phases[1]);
                }
                acc
            }
        };
        out.push(value * scale);
    }
    Ok(out)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    Complex64::new(re, im)
}

/// Precomputed stencils and Lagrange weights for one set of feet.
#[derive(Debug, Clone)]
pub struct InterpPlan {
    grid: Grid,
    p: usize,
    /// First stencil node per point and axis (storage position, wrapped).
    starts: Vec<usize>,
    /// `p` weights per point and axis.
    weights: Vec<f64>,
}

/// Values closer than this (in grid units) to a node are treated as on the node.
const SNAP: f64 = 1e-12;

impl InterpPlan {
    pub fn new(pts: &DeparturePoints, p: usize) -> Result<Self> {
        let grid = &pts.grid;
        let min_n = *grid.sizes().iter().min().expect("grid has at least one axis");
        if p < 2 || p % 2 != 0 {
            return Err(contract(format!("interpolation order p = {p} must be even and at least 2")));
        }
        if p > min_n {
            return Err(contract(format!(
                "interpolation order p = {p} exceeds the smallest grid size {min_n}"
            )));
        }
        let d = grid.dim();
        let lo = grid.domain().lo();
        let mut starts = Vec::with_capacity(pts.feet.len());
        let mut weights = Vec::with_capacity(pts.feet.len() * p);
        let half = (p / 2) as i64;
        for foot in pts.feet.chunks_exact(d) {
            for i in 0..d {
                let n = grid.sizes()[i];
                let mut s = (foot[i] - lo[i]) / grid.spacing(i);
                let near = s.round();
                if (s - near).abs() < SNAP * near.abs().max(1.0) {
                    s = near;
                }
                let q = s.floor();
                let theta = s - q;
                // nodes q + r, r ∈ [1 - p/2, p/2]: the foot sits in [q, q + 1)
                let first = (q as i64 + 1 - half).rem_euclid(n as i64) as usize;
                starts.push(first);
                for r in (1 - half)..=half {
                    let mut w = 1.0;
                    for r2 in (1 - half)..=half {
                        if r2 != r {
                            w *= (theta - r2 as f64) / (r - r2) as f64;
                        }
                    }
                    weights.push(w);
                }
            }
        }
        Ok(Self { grid: grid.clone(), p, starts, weights })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn evaluate(&self, field: &WaveField) -> Result<Vec<Complex64>> {
        self.grid.check_same(field.grid(), "interpolation")?;
        let d = self.grid.dim();
        let p = self.p;
        let n = self.grid.sizes();
        let v = field.values();
        let mut out = Vec::with_capacity(self.grid.len());
        let mut idx = [[0usize; 64]; 3];
        for j in 0..self.grid.len() {
            for i in 0..d {
                let start = self.starts[j * d + i];
                for r in 0..p {
                    let q = start + r;
                    idx[i][r] = if q >= n[i] { q - n[i] } else { q };
                }
            }
            let w = &self.weights[j * d * p..(j + 1) * d * p];
            let mut acc = Complex64::new(0.0, 0.0);
            match d {
                1 => {
                    for r in 0..p {
                        acc += v[idx[0][r]] * w[r];
                    }
                }
                2 => {
                    for a in 0..p {
                        let row = idx[0][a] * n[1];
                        let mut line = Complex64::new(0.0, 0.0);
                        for b in 0..p {
                            line += v[row + idx[1][b]] * w[p + b];
                        }
                        acc += line * w[a];
                    }
                }
                _ => {
                    for a in 0..p {
                        let mut plane = Complex64::new(0.0, 0.0);
                        for b in 0..p {
                            let base = (idx[0][a] * n[1] + idx[1][b]) * n[2];
                            let mut line = Complex64::new(0.0, 0.0);
                            for c in 0..p {
                                line += v[base + idx[2][c]] * w[2 * p + c];
                            }
                            plane += line * w[p + b];
                        }
                        acc += plane * w[a];
                    }
                }
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Tensor Lagrange interpolation of grid values at the feet.
pub fn evaluate_local_interp(field: &WaveField, pts: &DeparturePoints, p: usize) -> Result<Vec<Complex64>> {
    field.grid().check_same(&pts.grid, "interpolation")?;
    if p > 64 {
        return Err(contract(format!("interpolation order p = {p} is above the supported 64")));
    }
    InterpPlan::new(pts, p)?.evaluate(field)
}

/// Fourier series at the feet through a plan built for exactly these feet.
pub fn evaluate_nfft(spec: &SpectralField, pts: &DeparturePoints, plan: &NfftPlan) -> Result<Vec<Complex64>> {
    if !plan.matches_points(&pts.grid, &pts.feet) {
        return Err(contract("NFFT plan was built for different points or a different grid"));
    }
    plan.evaluate(spec)
}

/// Input state of the advection step.
#[derive(Debug, Clone, Copy)]
pub enum AdvectionInput<'a> {
    Physical(&'a WaveField),
    Spectral(&'a SpectralField),
}

#[derive(Debug)]
enum Prepared {
    Direct,
    Interp(InterpPlan),
    Nfft(Box<NfftPlan>),
}

/// Departure points plus backend precomputation, reused while `τ` and `A` are fixed.
#[derive(Debug)]
pub struct Advection {
    points: DeparturePoints,
    backend: AdvectionBackend,
    prepared: Prepared,
}

impl Advection {
    pub fn new(points: DeparturePoints, backend: AdvectionBackend) -> Result<Self> {
        let prepared = match &backend {
            AdvectionBackend::DirectFourier => Prepared::Direct,
            AdvectionBackend::LocalInterp { p } => {
                if *p > 64 {
                    return Err(contract(format!("interpolation order p = {p} is above the supported 64")));
                }
                Prepared::Interp(InterpPlan::new(&points, *p)?)
            }
            AdvectionBackend::Nfft(cfg) => {
                Prepared::Nfft(Box::new(NfftPlan::for_grid(&points.grid, &points.feet, cfg)?))
            }
        };
        Ok(Self { points, backend, prepared })
    }

    pub fn points(&self) -> &DeparturePoints {
        &self.points
    }

    pub fn backend(&self) -> &AdvectionBackend {
        &self.backend
    }

    pub fn nfft_plan(&self) -> Option<&NfftPlan> {
        match &self.prepared {
            Prepared::Nfft(p) => Some(p),
            _ => None,
        }
    }

    /// `v(τ, x^j) = v₀(x^j(0))`; at most one transform is performed internally.
    pub fn apply(&self, input: AdvectionInput<'_>, transform: &SpectralTransform) -> Result<WaveField> {
        let grid = &self.points.grid;
        grid.check_same(transform.grid(), "advection transform")?;
        let values = match (&self.prepared, input) {
            (Prepared::Interp(plan), AdvectionInput::Physical(u)) => plan.evaluate(u)?,
            (Prepared::Interp(plan), AdvectionInput::Spectral(s)) => plan.evaluate(&transform.to_physical(s)?)?,
            (prepared, input) => {
                let owned;
                let spec = match input {
                    AdvectionInput::Spectral(s) => s,
                    AdvectionInput::Physical(u) => {
                        owned = transform.to_spectral(u)?;
                        &owned
                    }
                };
                match prepared {
                    Prepared::Nfft(plan) => plan.evaluate(spec)?,
                    _ => evaluate_direct(spec, &self.points)?,
                }
            }
        };
        Ok(WaveField::from_parts_unchecked(grid.clone(), values))
    }
}

/// One advection step, building the backend plan on the spot.
pub fn advection_step(
    input: AdvectionInput<'_>,
    pts: &DeparturePoints,
    backend: &AdvectionBackend,
) -> Result<WaveField> {
    let transform = SpectralTransform::new(&pts.grid);
    Advection::new(pts.clone(), backend.clone())?.apply(input, &transform)
}

/// Plain double loop over modes and feet, used as a reference in tests.
#[cfg(test)]
pub(crate) fn naive_series(spec: &SpectralField, feet: &[f64]) -> Vec<Complex64> {
    let grid = spec.grid();
    let d = grid.dim();
    let lo = grid.domain().lo();
    let scale = 1.0 / grid.domain().volume().sqrt();
    feet.chunks_exact(d)
        .map(|y| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (lin, c) in spec.coeffs().iter().enumerate() {
                let mut rest = lin;
                let mut cycles = 0.0;
                for i in (0..d).rev() {
                    let n = grid.sizes()[i];
                    let k = fft_wavenumber(rest % n, n);
                    rest /= n;
                    cycles += reduced_cycles(k, (y[i] - lo[i]) / grid.domain().length(i));
                }
                let (s, co) = (2.0 * PI * cycles).sin_cos();
                acc += c * Complex64::new(co, s);
            }
            acc * scale
        })
        .collect()
}
