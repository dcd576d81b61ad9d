//! Regular periodic discretization of a hyperrectangle `Π [a_i, b_i)`.
//!
//! Grid values are stored row-major over the axes in declaration order (last
//! axis fastest). Along axis `i` the signed index `j_i ∈ [-N_i/2, N_i/2)` is
//! stored at position `j_i + N_i/2`, so storage position `s` holds the point
//! `a_i + s·h_i`.

use num_complex::Complex64;

use crate::error::{contract, Error, Result};

/// The periodic box `Π [lo_i, hi_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() > 3 {
            return Err(contract(format!("dimension must be 1, 2 or 3, got {}", lo.len())));
        }
        if lo.len() != hi.len() {
            return Err(contract("lo and hi have different lengths"));
        }
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(contract(format!("axis {i}: need finite lo < hi, got [{a}, {b})")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.length(i)).product()
    }

    /// Maps `x` back into the box by integer multiples of the period per axis.
    pub fn wrap(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        self.wrap_in_place(&mut out)?;
        Ok(out)
    }

    pub fn wrap_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(contract(format!(
                "point has {} coordinates, domain has {}",
                x.len(),
                self.dim()
            )));
        }
        for (i, xi) in x.iter_mut().enumerate() {
            if !xi.is_finite() {
                return Err(Error::NonFinite(format!("coordinate {i} = {xi}")));
            }
            *xi = wrap_coordinate(*xi, self.lo[i], self.length(i));
        }
        Ok(())
    }
}

pub(crate) fn wrap_coordinate(x: f64, lo: f64, len: f64) -> f64 {
    if x >= lo && x < lo + len {
        return x;
    }
    let mut r = (x - lo).rem_euclid(len);
    // rem_euclid can round up to exactly `len` for tiny negative offsets
    if r >= len {
        r = 0.0;
    }
    lo + r
}

/// Signed multi-index `j ∈ I_N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn new(components: impl Into<Vec<i64>>) -> Self {
        Self(components.into())
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|j| -j).collect())
    }
}

impl From<i64> for MultiIndex {
    fn from(j: i64) -> Self {
        Self(vec![j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    sizes: Vec<usize>,
    cell_volume: f64,
}

impl Grid {
    pub fn new(domain: Domain, sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() != domain.dim() {
            return Err(contract(format!(
                "{} grid sizes for a {}-dimensional domain",
                sizes.len(),
                domain.dim()
            )));
        }
        for (i, &n) in sizes.iter().enumerate() {
            if n < 2 || n % 2 != 0 {
                return Err(contract(format!("axis {i}: N = {n} must be even and at least 2")));
            }
        }
        let cell_volume = (0..domain.dim())
            .map(|i| domain.length(i) / sizes[i] as f64)
            .product();
        Ok(Self { domain, sizes, cell_volume })
    }

    /// `N` points on every axis.
    pub fn uniform(domain: Domain, n: usize) -> Result<Self> {
        let d = domain.dim();
        Self::new(domain, vec![n; d])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Total number of grid points `Π N_i`.
    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.length(axis) / self.sizes[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    fn check_index(&self, j: &MultiIndex) -> Result<()> {
        if j.0.len() != self.dim() {
            return Err(contract(format!(
                "index has {} components, grid has {}",
                j.0.len(),
                self.dim()
            )));
        }
        for (i, (&ji, &n)) in j.0.iter().zip(&self.sizes).enumerate() {
            let half = (n / 2) as i64;
            if ji < -half || ji >= half {
                return Err(contract(format!("axis {i}: index {ji} outside [-{half}, {half})")));
            }
        }
        Ok(())
    }

    /// `x^j_i = (a_i + b_i)/2 + (j_i/N_i)(b_i - a_i)`.
    pub fn grid_point(&self, j: &MultiIndex) -> Result<Vec<f64>> {
        self.check_index(j)?;
        Ok((0..self.dim())
            .map(|i| {
                let (a, b) = (self.domain.lo[i], self.domain.hi[i]);
                0.5 * (a + b) + (j.0[i] as f64 / self.sizes[i] as f64) * (b - a)
            })
            .collect())
    }

    pub fn linear_index(&self, j: &MultiIndex) -> Result<usize> {
        self.check_index(j)?;
        let mut idx = 0usize;
        for (i, &n) in self.sizes.iter().enumerate() {
            idx = idx * n + (j.0[i] + (n / 2) as i64) as usize;
        }
        Ok(idx)
    }

    pub fn multi_index(&self, linear: usize) -> Result<MultiIndex> {
        if linear >= self.len() {
            return Err(contract(format!("linear index {linear} >= {}", self.len())));
        }
        let mut rest = linear;
        let mut comps = vec![0i64; self.dim()];
        for i in (0..self.dim()).rev() {
            let n = self.sizes[i];
            comps[i] = (rest % n) as i64 - (n / 2) as i64;
            rest /= n;
        }
        Ok(MultiIndex(comps))
    }

    /// Grid coordinates along one axis in storage order.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        let n = self.sizes[axis];
        let half = (n / 2) as i64;
        let (a, b) = (self.domain.lo[axis], self.domain.hi[axis]);
        (0..n as i64)
            .map(|s| 0.5 * (a + b) + ((s - half) as f64 / n as f64) * (b - a))
            .collect()
    }

    /// All grid points, flattened `point * dim + axis`, in storage order.
    pub fn points(&self) -> Vec<f64> {
        let d = self.dim();
        let coords: Vec<Vec<f64>> = (0..d).map(|i| self.axis_coords(i)).collect();
        let mut out = Vec::with_capacity(self.len() * d);
        let mut idx = vec![0usize; d];
        for _ in 0..self.len() {
            for i in 0..d {
                out.push(coords[i][idx[i]]);
            }
            for i in (0..d).rev() {
                idx[i] += 1;
                if idx[i] < self.sizes[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        out
    }

    /// Samples `f` at every grid point in storage order.
    pub fn sample<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        let d = self.dim();
        self.points().chunks_exact(d).map(&mut f).collect()
    }

    /// Eigenvalue of the kinetic generator `(iε/2)Δ` on the basis function `E_k`.
    ///
    /// `ΔE_k = -Σ (2πk_i/L_i)² E_k`, so the value is `-(iε/2) Σ (2πk_i/L_i)²`:
    /// purely imaginary and `|exp(τλ)| = 1`.
    pub fn wavenumber_eigenvalue(&self, k: &MultiIndex, eps: f64) -> Result<Complex64> {
        self.check_index(k)?;
        let kappa2: f64 = (0..self.dim())
            .map(|i| {
                let w = 2.0 * std::f64::consts::PI * k.0[i] as f64 / self.domain.length(i);
                w * w
            })
            .sum();
        Ok(Complex64::new(0.0, -0.5 * eps * kappa2))
    }

    pub(crate) fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(contract(format!("{what}: grid mismatch")));
        }
        Ok(())
    }
}

/// Signed wavenumber stored at FFT-order position `q` of an axis of length `n`.
pub(crate) fn fft_wavenumber(q: usize, n: usize) -> i64 {
    if q < n / 2 {
        q as i64
    } else {
        q as i64 - n as i64
    }
}

/// FFT-order position of signed wavenumber `k` on an axis of length `n`.
pub(crate) fn fft_position(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}
