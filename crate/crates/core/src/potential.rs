//! Potential step: at every grid point, `∂_t u = -(i/ε)(|A|²/2 + V) u`, plus
//! `(½∇·A) u` when the vector potential is not divergence-free.

use num_complex::Complex64;

use crate::error::{contract, Result};
use crate::gauge::PotentialSet;
use crate::grid::Grid;
use crate::quadrature::gauss_legendre;
use crate::spectral::{check_epsilon, WaveField};

pub const DEFAULT_QUADRATURE_NODES: usize = 8;
const MAX_QUADRATURE_NODES: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialStepConfig {
    pub epsilon: f64,
    pub divergence_free: bool,
    /// Starting node count for time-dependent potentials; doubled until converged.
    pub quadrature_nodes: usize,
    /// `½∇·A` on the grid, required when `divergence_free` is false.
    pub half_div_a: Option<Vec<f64>>,
}

impl PotentialStepConfig {
    pub fn divergence_free(epsilon: f64) -> Self {
        Self { epsilon, divergence_free: true, quadrature_nodes: DEFAULT_QUADRATURE_NODES, half_div_a: None }
    }

    pub fn corrected(epsilon: f64, half_div_a: Vec<f64>) -> Self {
        Self {
            epsilon,
            divergence_free: false,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            half_div_a: Some(half_div_a),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    /// `exp(τ B)` per grid point.
    Static(Vec<Complex64>),
    /// Gauss–Legendre nodes and weights on `[0, 1]`.
    Dynamic { nodes: Vec<f64>, weights: Vec<f64> },
}

/// `exp(τB)` for a fixed `τ`, prepared once.
#[derive(Debug, Clone)]
pub struct PotentialStep {
    grid: Grid,
    tau: f64,
    epsilon: f64,
    half_div_a: Option<Vec<f64>>,
    potentials: PotentialSet,
    kind: Kind,
}

/// `|A|²/2 + V` at the grid points for time `t`.
fn energy_density(grid: &Grid, p: &PotentialSet, t: f64) -> Result<Vec<f64>> {
    let v = p.sample_scalar(grid, t)?;
    let a = p.sample_vector(grid, t)?;
    Ok((0..grid.len())
        .map(|j| {
            let a2: f64 = a.iter().map(|c| c[j] * c[j]).sum();
            0.5 * a2 + v[j]
        })
        .collect())
}

impl PotentialStep {
    pub fn new(grid: &Grid, potentials: &PotentialSet, tau: f64, cfg: &PotentialStepConfig) -> Result<Self> {
        check_epsilon(cfg.epsilon)?;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(contract(format!("time step must be non-negative, got {tau}")));
        }
        if cfg.quadrature_nodes < 1 {
            return Err(contract("at least one quadrature node is required"));
        }
        if potentials.dim() != grid.dim() {
            return Err(contract(format!(
                "{}-dimensional potentials on a {}-dimensional grid",
                potentials.dim(),
                grid.dim()
            )));
        }
        let half_div_a = if cfg.divergence_free {
            None
        } else {
            let h = cfg
                .half_div_a
                .clone()
                .ok_or_else(|| contract("half divergence of A is required when A is not divergence-free"))?;
            if h.len() != grid.len() {
                return Err(contract(format!("{} divergence samples for {} grid points", h.len(), grid.len())));
            }
            Some(h)
        };
        let mut step = Self {
            grid: grid.clone(),
            tau,
            epsilon: cfg.epsilon,
            half_div_a,
            potentials: potentials.clone(),
            kind: Kind::Dynamic { nodes: Vec::new(), weights: Vec::new() },
        };
        step.kind = if potentials.is_time_dependent() {
            step.choose_rule(cfg.quadrature_nodes)?
        } else {
            let w = energy_density(grid, potentials, 0.0)?;
            let phases: Vec<f64> = w.iter().map(|w| -tau * w / cfg.epsilon).collect();
            Kind::Static(step.factors(&phases))
        };
        Ok(step)
    }

    fn factors(&self, phases: &[f64]) -> Vec<Complex64> {
        phases
            .iter()
            .enumerate()
            .map(|(j, theta)| {
                let r = match &self.half_div_a {
                    Some(h) => (self.tau * h[j]).exp(),
                    None => 1.0,
                };
                let (s, c) = theta.sin_cos();
                Complex64::new(r * c, r * s)
            })
            .collect()
    }

    /// `-(1/ε) ∫_{t_n}^{t_n+τ} (|A|²/2 + V) ds` at every grid point.
    fn phases(&self, nodes: &[f64], weights: &[f64], t_n: f64) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.grid.len()];
        for (x, w) in nodes.iter().zip(weights) {
            let e = energy_density(&self.grid, &self.potentials, t_n + self.tau * x)?;
            for (a, e) in acc.iter_mut().zip(&e) {
                *a += w * e;
            }
        }
        Ok(acc.into_iter().map(|a| -self.tau * a / self.epsilon).collect())
    }

    fn choose_rule(&self, start: usize) -> Result<Kind> {
        let rule = |n: usize| {
            let (x, w) = gauss_legendre(n);
            (x.iter().map(|x| 0.5 * (x + 1.0)).collect::<Vec<_>>(), w.iter().map(|w| 0.5 * w).collect::<Vec<_>>())
        };
        let mut n = start;
        let (mut x, mut w) = rule(n);
        let mut prev = self.phases(&x, &w, 0.0)?;
        while n < MAX_QUADRATURE_NODES {
            let (x2, w2) = rule(2 * n);
            let next = self.phases(&x2, &w2, 0.0)?;
            let diff = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = next.iter().map(|v| v.abs()).fold(1.0, f64::max);
            if diff <= 1e-14 * scale {
                break;
            }
            n *= 2;
            (x, w, prev) = (x2, w2, next);
        }
        Ok(Kind::Dynamic { nodes: x, weights: w })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Node count of the time quadrature, if the potentials depend on time.
    pub fn quadrature_nodes(&self) -> Option<usize> {
        match &self.kind {
            Kind::Static(_) => None,
            Kind::Dynamic { nodes, .. } => Some(nodes.len()),
        }
    }

    /// Applies the step over `[t_n, t_n + τ]` in place.
    pub fn apply(&self, u: &mut WaveField, t_n: f64) -> Result<()> {
        self.grid.check_same(u.grid(), "potential step")?;
        match &self.kind {
            Kind::Static(f) => {
                for (v, f) in u.values_mut().iter_mut().zip(f) {
                    *v *= f;
                }
            }
            Kind::Dynamic { nodes, weights } => {
                let f = self.factors(&self.phases(nodes, weights, t_n)?);
                for (v, f) in u.values_mut().iter_mut().zip(&f) {
                    *v *= f;
                }
            }
        }
        Ok(())
    }
}

pub fn potential_step(
    u: &WaveField,
    tau: f64,
    t_n: f64,
    potentials: &PotentialSet,
    cfg: &PotentialStepConfig,
) -> Result<WaveField> {
    let step = PotentialStep::new(u.grid(), potentials, tau, cfg)?;
    let mut out = u.clone();
    step.apply(&mut out, t_n)?;
    Ok(out)
}
