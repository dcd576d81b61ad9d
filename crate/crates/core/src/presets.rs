//! The 1D, 2D and 3D experiments, and their gauged or corrected formulations.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use crate::advection::{AdvectionBackend, DEFAULT_SUBSTEPS};
use crate::diagnostics::{Stage, Timings};
use crate::error::{contract, Error, Result};
use crate::gauge::{coulomb_gauge, spectral_divergence, transform_potentials, transform_wavefunction, GaugeDirection, GaugeField, PotentialSet};
use crate::grid::{Domain, Grid};
use crate::nfft::{NfftConfig, Precompute};
use crate::spectral::WaveField;
use crate::splitting::{SimulationProblem, SplittingScheme};

pub type InitialFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// How a non-divergence-free `A` is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Coulomb gauge: `ũ = u e^{iλ}`, `Ã = A + ε∇λ`.
    #[default]
    Gauged,
    /// Original variables with `½∇·A` added to the potential step.
    Corrected,
}

/// An experiment in original (ungauged) variables.
#[derive(Clone)]
pub struct Experiment {
    pub name: String,
    pub domain: Domain,
    pub sizes: Vec<usize>,
    pub epsilon: f64,
    pub final_time: f64,
    pub steps: usize,
    pub potentials: PotentialSet,
    pub initial: InitialFn,
    pub backend: AdvectionBackend,
    pub scheme: SplittingScheme,
    pub substeps: usize,
}

impl fmt::Debug for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Experiment")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("sizes", &self.sizes)
            .field("epsilon", &self.epsilon)
            .field("final_time", &self.final_time)
            .field("steps", &self.steps)
            .field("backend", &self.backend)
            .field("scheme", &self.scheme)
            .finish_non_exhaustive()
    }
}

/// A ready-to-run problem plus what is needed to map results back.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub problem: SimulationProblem,
    pub gauge: GaugeField,
    pub formulation: Formulation,
    pub timings: Timings,
}

impl PreparedExperiment {
    /// Solver state in original variables (`u = ũ e^{-iλ}`).
    pub fn to_original(&self, u: &WaveField) -> Result<WaveField> {
        match self.formulation {
            Formulation::Corrected => Ok(u.clone()),
            Formulation::Gauged => transform_wavefunction(u, &self.gauge, GaugeDirection::Inverse),
        }
    }
}

impl Experiment {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain.clone(), self.sizes.clone())
    }

    /// Sets every axis to `n` points.
    pub fn with_points(mut self, n: usize) -> Self {
        self.sizes = vec![n; self.domain.dim()];
        self
    }

    pub fn initial_field(&self, grid: &Grid) -> Result<WaveField> {
        let f = self.initial.clone();
        WaveField::from_fn(grid.clone(), move |x| f(x))
    }

    pub fn prepare(&self, formulation: Formulation) -> Result<PreparedExperiment> {
        let grid = self.grid()?;
        let u0 = self.initial_field(&grid)?;
        let mut timings = Timings::default();
        let (potentials, initial, gauge, divergence_free) = match formulation {
            Formulation::Corrected => {
                (self.potentials.clone(), u0, GaugeField::trivial(&grid, self.epsilon), false)
            }
            Formulation::Gauged => {
                let start = Instant::now();
                let a = self.potentials.sample_vector(&grid, 0.0)?;
                if self.potentials.is_time_dependent() {
                    let div = spectral_divergence(&grid, &a)?;
                    let worst = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if worst > 1e-8 {
                        return Err(Error::GaugeInfeasible(
                            "time-dependent vector potentials must already be divergence-free".into(),
                        ));
                    }
                }
                let gauge = coulomb_gauge(&grid, &a, self.epsilon)?;
                let potentials = transform_potentials(&self.potentials, &gauge)?;
                let initial = transform_wavefunction(&u0, &gauge, GaugeDirection::Forward)?;
                timings.add(Stage::Gauge, start.elapsed());
                (potentials, initial, gauge, true)
            }
        };
        let mut problem = SimulationProblem::new(
            initial,
            self.epsilon,
            potentials,
            self.final_time,
            self.steps,
            self.backend.clone(),
            self.scheme,
        );
        problem.divergence_free = divergence_free;
        problem.substeps = self.substeps;
        problem.validate()?;
        Ok(PreparedExperiment { problem, gauge, formulation, timings })
    }
}

fn nfft_backend(precompute: Precompute) -> AdvectionBackend {
    AdvectionBackend::Nfft(NfftConfig { precompute, ..NfftConfig::default() })
}

/// `√ρ₀ exp(iS₀/ε)` with `ρ₀ = e^{-50(x-½)²}`, `S₀ = -log(e^{5(x-½)} + e^{-5(x-½)})/5`.
pub fn ex1d_initial(x: f64, epsilon: f64) -> Complex64 {
    let z = 5.0 * (x - 0.5);
    // log(e^z + e^{-z}) = |z| + log(1 + e^{-2|z|})
    let s0 = -(z.abs() + (-2.0 * z.abs()).exp().ln_1p()) / 5.0;
    let amp = (-25.0 * (x - 0.5) * (x - 0.5)).exp();
    Complex64::from_polar(amp, s0 / epsilon)
}

/// Gauge function of the 1D example, `cos(2πx)/(10πε)`.
pub fn ex1d_gauge(x: f64, epsilon: f64) -> f64 {
    (2.0 * PI * x).cos() / (10.0 * PI * epsilon)
}

/// 1D example on `[0, 1)`: `A = sin(2πx)/5 + 1/5`, `V = cos(2πx)/5 + 4/5`, `ε = 1/128`.
pub fn ex1d() -> Experiment {
    let epsilon = 1.0 / 128.0;
    Experiment {
        name: "ex1d".into(),
        domain: Domain::cube(1, 0.0, 1.0).expect("valid box"),
        sizes: vec![2048],
        epsilon,
        final_time: 0.42,
        steps: 128,
        potentials: PotentialSet::time_independent(
            1,
            |x| (2.0 * PI * x[0]).cos() / 5.0 + 0.8,
            |x, out| out[0] = (2.0 * PI * x[0]).sin() / 5.0 + 0.2,
        ),
        initial: Arc::new(move |x| ex1d_initial(x[0], epsilon)),
        backend: nfft_backend(Precompute::PrePsi),
        scheme: SplittingScheme::Lie,
        substeps: DEFAULT_SUBSTEPS,
    }
}

fn angle(x: f64) -> f64 {
    2.0 * PI * (x + 5.0) / 10.0
}

/// 2D example on `[-5, 5]²` with `ε = 1`, `T = 50`, 1000 steps.
pub fn ex2d() -> Experiment {
    let c = (10.0f64).sqrt();
    let norm = (c / PI).sqrt();
    Experiment {
        name: "ex2d".into(),
        domain: Domain::cube(2, -5.0, 5.0).expect("valid box"),
        sizes: vec![128, 128],
        epsilon: 1.0,
        final_time: 50.0,
        steps: 1000,
        potentials: PotentialSet::time_independent(
            2,
            |x| 20.0 * angle(x[0]).cos() + 20.0 * angle(x[1]).cos() + 40.0,
            |x, out| {
                out[0] = -3.0 * angle(x[1]).sin();
                out[1] = 3.0 * angle(x[0]).sin();
            },
        ),
        initial: Arc::new(move |x| {
            let r2 = (x[0] - 1.0).powi(2) + x[1] * x[1];
            Complex64::new(norm * (-0.5 * c * r2).exp(), 0.0)
        }),
        backend: nfft_backend(Precompute::PrePsi),
        scheme: SplittingScheme::Lie,
        substeps: DEFAULT_SUBSTEPS,
    }
}

/// 3D example on `[-5, 5]³` with `ε = 1`, `T = 5`, 100 steps.
pub fn ex3d() -> Experiment {
    let c = 2.0f64.sqrt();
    let norm = 2.0f64.powf(0.375) / PI.powf(1.5);
    Experiment {
        name: "ex3d".into(),
        domain: Domain::cube(3, -5.0, 5.0).expect("valid box"),
        sizes: vec![32, 32, 32],
        epsilon: 1.0,
        final_time: 5.0,
        steps: 100,
        potentials: PotentialSet::time_independent(
            3,
            |x| 20.0 * (angle(x[0]).cos() + angle(x[1]).cos() + angle(x[2]).cos()) + 60.0,
            |x, out| {
                let (sx, sy, sz) = (angle(x[0]).sin(), angle(x[1]).sin(), angle(x[2]).sin());
                out[0] = sy + sz;
                out[1] = sx + sz;
                out[2] = sx + sy;
            },
        ),
        initial: Arc::new(move |x| {
            let r2 = (x[0] - 1.0).powi(2) + x[1] * x[1] + x[2] * x[2];
            Complex64::new(norm * (-0.5 * c * r2).exp(), 0.0)
        }),
        backend: nfft_backend(Precompute::PrePsi),
        scheme: SplittingScheme::Lie,
        substeps: DEFAULT_SUBSTEPS,
    }
}

pub fn by_name(name: &str) -> Result<Experiment> {
    match name {
        "ex1d" => Ok(ex1d()),
        "ex2d" => Ok(ex2d()),
        "ex3d" => Ok(ex3d()),
        _ => Err(contract(format!("unknown preset '{name}' (expected ex1d, ex2d or ex3d)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::mass;

    #[test]
    fn ex1d_defaults() {
        let e = ex1d();
        assert_eq!(e.epsilon, 1.0 / 128.0);
        assert_eq!(e.final_time, 0.42);
        assert_eq!(e.sizes, vec![2048]);
        assert_eq!(e.steps, 128);
    }

    #[test]
    fn ex1d_initial_is_stable_and_matches_naive_formula() {
        let eps = 1.0 / 128.0;
        for x in [0.0, 0.13, 0.5, 0.71, 0.999] {
            let z: f64 = 5.0 * (x - 0.5);
            let s0 = -(z.exp() + (-z).exp()).ln() / 5.0;
            let naive = Complex64::from_polar((-50.0f64 * (x - 0.5) * (x - 0.5)).exp().sqrt(), s0 / eps);
            assert!((ex1d_initial(x, eps) - naive).norm() < 1e-12);
        }
        assert!(ex1d_initial(1e6, eps).is_finite());
    }

    #[test]
    fn ex1d_gauge_matches_analytic_form() {
        let e = ex1d().with_points(256);
        let p = e.prepare(Formulation::Gauged).unwrap();
        let grid = e.grid().unwrap();
        for (l, x) in p.gauge.lambda().iter().zip(grid.points()) {
            assert!((l - ex1d_gauge(x, e.epsilon)).abs() <= 1e-10);
        }
        let mut a = [0.0];
        for x in [0.1, 0.377, 0.9] {
            p.problem.potentials.vector(0.0, &[x], &mut a);
            assert!((a[0] - 0.2).abs() <= 1e-12);
        }
    }

    #[test]
    fn divergence_free_presets_have_trivial_gauge() {
        for e in [ex2d().with_points(16), ex3d().with_points(8)] {
            let p = e.prepare(Formulation::Gauged).unwrap();
            assert!(p.gauge.is_trivial(), "{}", e.name);
        }
    }

    #[test]
    fn ex2d_initial_mass_is_one() {
        let e = ex2d();
        let u = e.initial_field(&e.grid().unwrap()).unwrap();
        assert!((mass(&u) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn corrected_formulation_keeps_original_variables() {
        let e = ex1d().with_points(64);
        let p = e.prepare(Formulation::Corrected).unwrap();
        assert!(!p.problem.divergence_free);
        let u = p.problem.initial.clone();
        assert_eq!(p.to_original(&u).unwrap(), u);
        let g = e.prepare(Formulation::Gauged).unwrap();
        let back = g.to_original(&g.problem.initial).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(by_name("ex4d").is_err());
        assert_eq!(by_name("ex3d").unwrap().sizes, vec![32; 3]);
    }
}
