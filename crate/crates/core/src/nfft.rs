//! Nonequispaced FFT: fast evaluation of
//!
//! ```text
//! f(x) = Σ_{k ∈ I_N} f̂_k exp(-2πi k·x),    x ∈ [-1/2, 1/2)^d
//! ```
//!
//! at arbitrary points. The coefficients are deconvolved by the Fourier
//! coefficients `c_k` of a Kaiser–Bessel window, zero-padded to an oversampled
//! length `n = σN` (smallest power of two with `2 ≤ σ < 4`), transformed by one
//! FFT, and the result is convolved with the window truncated to `|x| ≤ m/n`
//! (at most `2m+1` terms per axis). The d-dimensional window is the tensor
//! product of 1D windows.
//!
//! Solver convention: the basis `E_k(y) = Π exp(2πi k_i (y_i - a_i)/L_i)/√L_i`
//! is mapped onto the torus by `x_i = -(y_i - a_i)/L_i` (wrapped into
//! `[-1/2, 1/2)`) with a constant factor `Π 1/√L_i`. [`NfftPlan::for_grid`]
//! owns that map; [`NfftPlan::new`] works directly on torus points.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{contract, Error, Result};
use crate::grid::{fft_position, fft_wavenumber, Grid};
use crate::quadrature::gauss_legendre_on;
use crate::spectral::{FftNd, SpectralField};

pub const DEFAULT_CUTOFF: usize = 8;
pub const DEFAULT_MEMORY_BUDGET: u128 = 2 << 30;

/// Window precomputation, trading memory for per-execution work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precompute {
    /// Window values are evaluated inside every execution.
    OnTheFly,
    /// `d·(2m+1)` window values per point.
    PrePsi,
    /// The full tensor of `(2m+1)^d` window values per point.
    PreFullPsi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NfftConfig {
    pub m: usize,
    pub precompute: Precompute,
    /// Upper bound in bytes for `PreFullPsi` window storage.
    pub memory_budget: u128,
}

impl Default for NfftConfig {
    fn default() -> Self {
        Self { m: DEFAULT_CUTOFF, precompute: Precompute::PrePsi, memory_budget: DEFAULT_MEMORY_BUDGET }
    }
}

impl NfftConfig {
    pub fn with_cutoff(m: usize) -> Self {
        Self { m, ..Self::default() }
    }
}

/// Smallest power of two `n` with `n ≥ 2N`.
pub fn oversampled_length(n: usize) -> usize {
    (2 * n).next_power_of_two()
}

/// Kaiser–Bessel window `φ(x)` for oversampled length `n`, cutoff `m` and shape `β`.
pub fn kb_window(x: f64, n: usize, m: usize, beta: f64) -> f64 {
    kb_offset(n as f64 * x, m as f64, beta)
}

/// `φ` as a function of `t = n·x`.
fn kb_offset(t: f64, m: f64, beta: f64) -> f64 {
    let s2 = m * m - t * t;
    if s2 > 0.0 {
        let s = s2.sqrt();
        if beta * s < 1e-6 {
            beta * (1.0 + beta * beta * s2 / 6.0) / PI
        } else {
            (beta * s).sinh() / (s * PI)
        }
    } else if s2 < 0.0 {
        let s = (-s2).sqrt();
        if beta * s < 1e-6 {
            beta * (1.0 - beta * beta * s * s / 6.0) / PI
        } else {
            (beta * s).sin() / (s * PI)
        }
    } else {
        beta / PI
    }
}

/// `ψ = φ·χ_{[-m/n, m/n]}` in grid units.
fn psi_offset(t: f64, m: f64, beta: f64) -> f64 {
    if t.abs() > m {
        0.0
    } else {
        kb_offset(t, m, beta)
    }
}

/// Fourier coefficients `c_k = ∫ ψ(x) e^{2πikx} dx` of the periodized truncated
/// window for `k ∈ I_n`, stored at position `k + n/2`.
///
/// `ψ` is even and analytic on its support, so a Gauss–Legendre rule on
/// `[0, m/n]` is accurate to round-off.
pub fn window_fourier_coeffs(n: usize, m: usize, beta: f64) -> Vec<f64> {
    let nodes = 64 + 8 * m;
    let (t, w) = gauss_legendre_on(nodes, 0.0, m as f64);
    let phi: Vec<f64> = t.iter().map(|&t| kb_offset(t, m as f64, beta)).collect();
    let half = (n / 2) as i64;
    (-half..half)
        .map(|k| {
            let omega = 2.0 * PI * k as f64 / n as f64;
            let s: f64 = t
                .iter()
                .zip(&w)
                .zip(&phi)
                .map(|((t, w), p)| w * p * (omega * t).cos())
                .sum();
            2.0 * s / n as f64
        })
        .collect()
}

#[derive(Debug, Clone)]
enum WindowTable {
    None,
    PerAxis(Vec<f64>),
    Full(Vec<f64>),
}

#[derive(Debug, Clone)]
struct GridMap {
    scale: f64,
    source: Vec<f64>,
    grid: Grid,
}

#[derive(Debug)]
pub struct NfftPlan {
    bandwidths: Vec<usize>,
    oversampled: Vec<usize>,
    sigma: Vec<f64>,
    beta: Vec<f64>,
    m: usize,
    window_coeffs: Vec<Vec<f64>>,
    /// `1/(n_i c_k)` per axis, FFT order over `N_i`.
    deconvolve: Vec<Vec<f64>>,
    /// Oversampled FFT-order position of each FFT-order position of `N_i`.
    target: Vec<Vec<usize>>,
    points: Vec<f64>,
    /// `floor(n_i x_i) - m`, per point and axis.
    starts: Vec<i64>,
    precompute: Precompute,
    table: WindowTable,
    fft: FftNd,
    map: Option<GridMap>,
}

impl NfftPlan {
    /// Plan for torus points `points` (flattened, `point * d + axis`) in `[-1/2, 1/2)^d`.
    pub fn new(bandwidths: &[usize], points: Vec<f64>, config: &NfftConfig) -> Result<Self> {
        let d = bandwidths.len();
        if d == 0 || d > 3 {
            return Err(contract(format!("NFFT dimension must be 1, 2 or 3, got {d}")));
        }
        if let Some(n) = bandwidths.iter().find(|&&n| n < 2 || n % 2 != 0) {
            return Err(contract(format!("bandwidth {n} must be even and at least 2")));
        }
        if config.m < 1 {
            return Err(contract("NFFT cutoff m must be at least 1"));
        }
        if points.len() % d != 0 {
            return Err(contract("point coordinates are not a multiple of the dimension"));
        }
        if let Some(i) = points.iter().position(|x| !(x.is_finite() && (-0.5..0.5).contains(x))) {
            return Err(contract(format!(
                "point coordinate {} = {} outside [-1/2, 1/2)",
                i, points[i]
            )));
        }
        let m = config.m;
        let oversampled: Vec<usize> = bandwidths.iter().map(|&n| oversampled_length(n)).collect();
        let sigma: Vec<f64> = bandwidths
            .iter()
            .zip(&oversampled)
            .map(|(&big, &small)| small as f64 / big as f64)
            .collect();
        let beta: Vec<f64> = sigma.iter().map(|s| PI * (2.0 - 1.0 / s)).collect();
        let window_coeffs: Vec<Vec<f64>> = (0..d)
            .map(|i| window_fourier_coeffs(oversampled[i], m, beta[i]))
            .collect();

        let mut deconvolve = Vec::with_capacity(d);
        let mut target = Vec::with_capacity(d);
        for i in 0..d {
            let (big, small) = (bandwidths[i], oversampled[i]);
            let mut inv = Vec::with_capacity(big);
            let mut pos = Vec::with_capacity(big);
            for q in 0..big {
                let k = fft_wavenumber(q, big);
                let c = window_coeffs[i][(k + (small / 2) as i64) as usize];
                if !(c.abs() >= 1e-300) {
                    return Err(Error::WindowUnderflow { k, value: c, n: small, m });
                }
                inv.push(1.0 / (small as f64 * c));
                pos.push(fft_position(k, small));
            }
            deconvolve.push(inv);
            target.push(pos);
        }

        let npts = points.len() / d;
        let width = 2 * m + 1;
        if config.precompute == Precompute::PreFullPsi {
            let required = npts as u128 * (width as u128).pow(d as u32) * 8;
            if required > config.memory_budget {
                return Err(Error::MemoryBudget { required, budget: config.memory_budget });
            }
        }

        let starts: Vec<i64> = points
            .chunks_exact(d)
            .flat_map(|x| {
                x.iter()
                    .zip(&oversampled)
                    .map(|(xi, &n)| (n as f64 * xi).floor() as i64 - m as i64)
                    .collect::<Vec<_>>()
            })
            .collect();

        let mut plan = Self {
            bandwidths: bandwidths.to_vec(),
            fft: FftNd::new(&oversampled),
            oversampled,
            sigma,
            beta,
            m,
            window_coeffs,
            deconvolve,
            target,
            points,
            starts,
            precompute: config.precompute,
            table: WindowTable::None,
            map: None,
        };
        plan.table = plan.build_table();
        Ok(plan)
    }

    /// Plan for points of the solver domain of `grid`, evaluated in the basis `E_k`.
    pub fn for_grid(grid: &Grid, points: &[f64], config: &NfftConfig) -> Result<Self> {
        let d = grid.dim();
        if points.len() % d != 0 {
            return Err(contract("point coordinates are not a multiple of the dimension"));
        }
        let lo = grid.domain().lo();
        let mut torus = Vec::with_capacity(points.len());
        for p in points.chunks_exact(d) {
            for i in 0..d {
                let x = -(p[i] - lo[i]) / grid.domain().length(i);
                let mut w = x - (x + 0.5).floor();
                if w >= 0.5 {
                    w -= 1.0;
                }
                torus.push(w);
            }
        }
        let mut plan = Self::new(grid.sizes(), torus, config)?;
        plan.map = Some(GridMap {
            scale: 1.0 / grid.domain().volume().sqrt(),
            source: points.to_vec(),
            grid: grid.clone(),
        });
        Ok(plan)
    }

    fn point_window(&self, j: usize, axis: usize, out: &mut [f64]) {
        let d = self.dim();
        let n = self.oversampled[axis] as f64;
        let x = self.points[j * d + axis];
        let start = self.starts[j * d + axis];
        let nx = n * x;
        let m = self.m as f64;
        for (r, w) in out.iter_mut().enumerate() {
            *w = psi_offset(nx - (start + r as i64) as f64, m, self.beta[axis]);
        }
    }

    fn build_table(&self) -> WindowTable {
        let d = self.dim();
        let width = 2 * self.m + 1;
        let npts = self.num_points();
        match self.precompute {
            Precompute::OnTheFly => WindowTable::None,
            Precompute::PrePsi => {
                let mut t = vec![0.0; npts * d * width];
                for j in 0..npts {
                    for i in 0..d {
                        let off = (j * d + i) * width;
                        self.point_window(j, i, &mut t[off..off + width]);
                    }
                }
                WindowTable::PerAxis(t)
            }
            Precompute::PreFullPsi => {
                let per = width.pow(d as u32);
                let mut t = Vec::with_capacity(npts * per);
                let mut w = vec![0.0; d * width];
                for j in 0..npts {
                    for i in 0..d {
                        self.point_window(j, i, &mut w[i * width..(i + 1) * width]);
                    }
                    let (w0, rest) = w.split_at(width);
                    match d {
                        1 => t.extend_from_slice(w0),
                        2 => {
                            for &a in w0 {
                                for &b in &rest[..width] {
                                    t.push(a * b);
                                }
                            }
                        }
                        _ => {
                            let (w1, w2) = rest.split_at(width);
                            for &a in w0 {
                                for &b in w1 {
                                    let ab = a * b;
                                    for &c in w2 {
                                        t.push(ab * c);
                                    }
                                }
                            }
                        }
                    }
                }
                WindowTable::Full(t)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn num_points(&self) -> usize {
        self.points.len() / self.dim()
    }

    pub fn bandwidths(&self) -> &[usize] {
        &self.bandwidths
    }

    pub fn oversampled(&self) -> &[usize] {
        &self.oversampled
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn cutoff(&self) -> usize {
        self.m
    }

    pub fn precompute(&self) -> Precompute {
        self.precompute
    }

    /// `c_k` for `k ∈ I_n` on one axis, position `k + n/2`.
    pub fn window_coeffs(&self, axis: usize) -> &[f64] {
        &self.window_coeffs[axis]
    }

    /// Torus points, flattened.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of stored window values.
    pub fn window_storage(&self) -> usize {
        match &self.table {
            WindowTable::None => 0,
            WindowTable::PerAxis(t) | WindowTable::Full(t) => t.len(),
        }
    }

    /// Evaluates `Σ f̂_k exp(-2πi k·x)` at the plan points; `coeffs` in FFT order over `I_N`.
    pub fn execute(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        let total: usize = self.bandwidths.iter().product();
        if coeffs.len() != total {
            return Err(contract(format!(
                "{} coefficients for NFFT bandwidth {:?}",
                coeffs.len(),
                self.bandwidths
            )));
        }
        let g = self.oversampled_values(coeffs);
        Ok(self.convolve(&g))
    }

    /// Evaluates `Σ v̂_k E_k(y)` at the source points of a [`NfftPlan::for_grid`] plan.
    pub fn evaluate(&self, spec: &SpectralField) -> Result<Vec<Complex64>> {
        let map = self
            .map
            .as_ref()
            .ok_or_else(|| contract("plan was not built for a solver grid"))?;
        map.grid.check_same(spec.grid(), "NFFT evaluation")?;
        let mut out = self.execute(spec.coeffs())?;
        for v in &mut out {
            *v *= map.scale;
        }
        Ok(out)
    }

    /// True when this plan was built by [`NfftPlan::for_grid`] for exactly these points.
    pub fn matches_points(&self, grid: &Grid, points: &[f64]) -> bool {
        self.map.as_ref().is_some_and(|m| &m.grid == grid && m.source == points)
    }

    /// `g_ℓ`: deconvolved, zero-padded coefficients after one oversampled FFT.
    fn oversampled_values(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        let n = &self.oversampled;
        let mut g = vec![Complex64::new(0.0, 0.0); n.iter().product()];
        let mut idx = [0usize; 3];
        for c in coeffs {
            let mut factor = 1.0;
            let mut pos = 0;
            for i in 0..d {
                factor *= self.deconvolve[i][idx[i]];
                pos = pos * n[i] + self.target[i][idx[i]];
            }
            g[pos] = c * factor;
            for i in (0..d).rev() {
                idx[i] += 1;
                if idx[i] < self.bandwidths[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        // g_ℓ = (1/n) Σ_k ĝ_k exp(-2πi kℓ/n); the 1/n is folded into `deconvolve`
        self.fft.forward(&mut g);
        g
    }

    fn convolve(&self, g: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        let width = 2 * self.m + 1;
        let npts = self.num_points();
        let n = &self.oversampled;
        let mut out = Vec::with_capacity(npts);
        let mut scratch = vec![0.0; d * width];
        let mut idx = vec![0usize; d * width];
        for j in 0..npts {
            for i in 0..d {
                let base = self.starts[j * d + i].rem_euclid(n[i] as i64) as usize;
                for r in 0..width {
                    idx[i * width + r] = (base + r) % n[i];
                }
            }
            let value = match &self.table {
                WindowTable::Full(t) => {
                    let per = width.pow(d as u32);
                    sum_full(g, n, &idx, width, d, &t[j * per..(j + 1) * per])
                }
                WindowTable::PerAxis(t) => {
                    let off = j * d * width;
                    sum_tensor(g, n, &idx, width, d, &t[off..off + d * width])
                }
                WindowTable::None => {
                    for i in 0..d {
                        self.point_window(j, i, &mut scratch[i * width..(i + 1) * width]);
                    }
                    sum_tensor(g, n, &idx, width, d, &scratch)
                }
            };
            out.push(value);
        }
        out
    }
}

/// Tensor-product window sum; the weight products match [`NfftPlan::build_table`] bit for bit.
fn sum_tensor(g: &[Complex64], n: &[usize], idx: &[usize], width: usize, d: usize, w: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    match d {
        1 => {
            for r in 0..width {
                acc += g[idx[r]] * w[r];
            }
        }
        2 => {
            let (i0, i1) = idx.split_at(width);
            let (w0, w1) = w.split_at(width);
            for a in 0..width {
                let row = i0[a] * n[1];
                let wa = w0[a];
                for b in 0..width {
                    acc += g[row + i1[b]] * (wa * w1[b]);
                }
            }
        }
        _ => {
            let (i0, rest) = idx.split_at(width);
            let (i1, i2) = rest.split_at(width);
            let (w0, rest) = w.split_at(width);
            let (w1, w2) = rest.split_at(width);
            for a in 0..width {
                for b in 0..width {
                    let plane = (i0[a] * n[1] + i1[b]) * n[2];
                    let ab = w0[a] * w1[b];
                    for c in 0..width {
                        acc += g[plane + i2[c]] * (ab * w2[c]);
                    }
                }
            }
        }
    }
    acc
}

fn sum_full(g: &[Complex64], n: &[usize], idx: &[usize], width: usize, d: usize, w: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    match d {
        1 => {
            for r in 0..width {
                acc += g[idx[r]] * w[r];
            }
        }
        2 => {
            let (i0, i1) = idx.split_at(width);
            for a in 0..width {
                let row = i0[a] * n[1];
                let wr = &w[a * width..(a + 1) * width];
                for b in 0..width {
                    acc += g[row + i1[b]] * wr[b];
                }
            }
        }
        _ => {
            let (i0, rest) = idx.split_at(width);
            let (i1, i2) = rest.split_at(width);
            for a in 0..width {
                for b in 0..width {
                    let plane = (i0[a] * n[1] + i1[b]) * n[2];
                    let off = (a * width + b) * width;
                    let wr = &w[off..off + width];
                    for c in 0..width {
                        acc += g[plane + i2[c]] * wr[c];
                    }
                }
            }
        }
    }
    acc
}

/// Builds a plan with the given cutoff (default 8) and precomputation mode.
pub fn plan_nfft(
    bandwidths: &[usize],
    points: Vec<f64>,
    m: Option<usize>,
    precompute: Precompute,
) -> Result<NfftPlan> {
    let config = NfftConfig { m: m.unwrap_or(DEFAULT_CUTOFF), precompute, ..NfftConfig::default() };
    NfftPlan::new(bandwidths, points, &config)
}

pub fn nfft_execute(plan: &NfftPlan, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    plan.execute(coeffs)
}
