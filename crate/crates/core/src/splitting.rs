//! Lie and Strang compositions of the potential (B), kinetic (A) and
//! advection (C) flows, and the time loop.
//!
//! ```text
//! Lie:     u_{n+1} = e^{τC} e^{τA} e^{τB} u_n
//! Strang:  u_{n+1} = e^{τ/2 B} e^{τ/2 A} e^{τC} e^{τ/2 A} e^{τ/2 B} u_n
//! ```
//!
//! Strang evaluates the advection once per step, with feet for the full `τ`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::advection::{compute_departure_points, Advection, AdvectionBackend, AdvectionInput, DeparturePoints, DEFAULT_SUBSTEPS};
use crate::diagnostics::{mass, ExperimentReport, Stage, Timings};
use crate::error::{contract, Error, Result};
use crate::gauge::{spectral_divergence, PotentialSet};
use crate::grid::Grid;
use crate::potential::{PotentialStep, PotentialStepConfig};
use crate::spectral::{check_epsilon, KineticPropagator, SpectralTransform, WaveField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SplittingScheme {
    #[default]
    Lie,
    Strang,
}

impl SplittingScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lie => "lie",
            Self::Strang => "strang",
        }
    }
}

impl fmt::Display for SplittingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplittingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lie" => Ok(Self::Lie),
            "strang" => Ok(Self::Strang),
            _ => Err(contract(format!("unknown scheme '{s}' (expected lie or strang)"))),
        }
    }
}

/// A complete discretized problem on `[0, T]` with `steps` uniform steps.
#[derive(Debug, Clone)]
pub struct SimulationProblem {
    pub grid: Grid,
    pub epsilon: f64,
    /// Potentials of the formulation being solved (gauged, unless `divergence_free` is off).
    pub potentials: PotentialSet,
    pub initial: WaveField,
    pub final_time: f64,
    pub steps: usize,
    pub backend: AdvectionBackend,
    pub scheme: SplittingScheme,
    /// When false, B carries the `½∇·A` correction and `A` may have divergence.
    pub divergence_free: bool,
    /// RK4 substeps for the characteristics.
    pub substeps: usize,
}

impl SimulationProblem {
    pub fn new(
        initial: WaveField,
        epsilon: f64,
        potentials: PotentialSet,
        final_time: f64,
        steps: usize,
        backend: AdvectionBackend,
        scheme: SplittingScheme,
    ) -> Self {
        Self {
            grid: initial.grid().clone(),
            epsilon,
            potentials,
            initial,
            final_time,
            steps,
            backend,
            scheme,
            divergence_free: true,
            substeps: DEFAULT_SUBSTEPS,
        }
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if self.steps < 1 {
            return Err(contract("at least one time step is required"));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(contract(format!("final time must be positive, got {}", self.final_time)));
        }
        if self.substeps < 1 {
            return Err(contract("at least one characteristics substep is required"));
        }
        self.grid.check_same(self.initial.grid(), "initial value")?;
        if self.potentials.dim() != self.grid.dim() {
            return Err(contract(format!(
                "{}-dimensional potentials on a {}-dimensional grid",
                self.potentials.dim(),
                self.grid.dim()
            )));
        }
        if !self.initial.is_finite() {
            return Err(Error::NonFinite("initial value".into()));
        }
        if self.divergence_free {
            let a = self.potentials.sample_vector(&self.grid, 0.0)?;
            let div = spectral_divergence(&self.grid, &a)?;
            let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let worst = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > 1e-8 * (1.0 + scale) {
                return Err(contract(format!(
                    "vector potential has divergence up to {worst:e}; apply the Coulomb gauge \
                     or enable the divergence correction"
                )));
            }
        } else if self.potentials.is_time_dependent() {
            return Err(contract(
                "the divergence correction is only supported for time-independent potentials",
            ));
        }
        Ok(())
    }

    fn potential_config(&self) -> Result<PotentialStepConfig> {
        if self.divergence_free {
            return Ok(PotentialStepConfig::divergence_free(self.epsilon));
        }
        let a = self.potentials.sample_vector(&self.grid, 0.0)?;
        let half: Vec<f64> = spectral_divergence(&self.grid, &a)?.into_iter().map(|d| 0.5 * d).collect();
        Ok(PotentialStepConfig::corrected(self.epsilon, half))
    }
}

/// Prebuilt sub-flows for one `τ`.
#[derive(Debug)]
pub struct Stepper {
    grid: Grid,
    tau: f64,
    scheme: SplittingScheme,
    transform: SpectralTransform,
    kinetic_full: KineticPropagator,
    kinetic_half: KineticPropagator,
    potential_full: PotentialStep,
    potential_half: PotentialStep,
    potentials: PotentialSet,
    backend: AdvectionBackend,
    substeps: usize,
    advection: Advection,
    advection_t0: f64,
    /// Drop the unpaired `-N/2` modes before advecting (non-divergence-free `A`).
    filter_nyquist: bool,
    timings: Timings,
}

impl Stepper {
    pub fn new(problem: &SimulationProblem) -> Result<Self> {
        Self::with_tau(problem, problem.tau())
    }

    /// A stepper for an arbitrary `τ ≥ 0` (`τ = 0` gives the identity).
    pub fn with_tau(problem: &SimulationProblem, tau: f64) -> Result<Self> {
        problem.validate()?;
        let grid = problem.grid.clone();
        let eps = problem.epsilon;
        let mut timings = Timings::default();
        let cfg = problem.potential_config()?;
        let (kinetic_full, kinetic_half, potential_full, potential_half) = (
            KineticPropagator::new(&grid, tau, eps)?,
            KineticPropagator::new(&grid, 0.5 * tau, eps)?,
            PotentialStep::new(&grid, &problem.potentials, tau, &cfg)?,
            PotentialStep::new(&grid, &problem.potentials, 0.5 * tau, &cfg)?,
        );
        let advection = build_advection(
            &grid,
            &problem.potentials,
            0.0,
            tau,
            problem.substeps,
            &problem.backend,
            &mut timings,
        )?;
        Ok(Self {
            transform: SpectralTransform::new(&grid),
            grid,
            tau,
            scheme: problem.scheme,
            kinetic_full,
            kinetic_half,
            potential_full,
            potential_half,
            potentials: problem.potentials.clone(),
            backend: problem.backend.clone(),
            substeps: problem.substeps,
            advection,
            advection_t0: 0.0,
            filter_nyquist: !problem.divergence_free,
            timings,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn scheme(&self) -> SplittingScheme {
        self.scheme
    }

    pub fn timings(&self) -> &Timings {
        &self.timings
    }

    pub fn advection(&self) -> &Advection {
        &self.advection
    }

    /// Feet for `[t_n, t_n + τ]`; only time-dependent `A` needs a rebuild.
    fn prepare_advection(&mut self, t_n: f64) -> Result<()> {
        if self.potentials.is_time_dependent() && self.advection_t0 != t_n {
            self.advection = build_advection(
                &self.grid,
                &self.potentials,
                t_n,
                self.tau,
                self.substeps,
                &self.backend,
                &mut self.timings,
            )?;
            self.advection_t0 = t_n;
        }
        Ok(())
    }

    /// One step of the configured scheme from time `t_n`.
    pub fn step(&mut self, u: WaveField, t_n: f64) -> Result<WaveField> {
        match self.scheme {
            SplittingScheme::Lie => self.lie_step(u, t_n),
            SplittingScheme::Strang => self.strang_step(u, t_n),
        }
    }

    pub fn lie_step(&mut self, mut u: WaveField, t_n: f64) -> Result<WaveField> {
        self.grid.check_same(u.grid(), "Lie step")?;
        self.prepare_advection(t_n)?;
        let t = &mut self.timings;
        t.time(Stage::Potential, || self.potential_full.apply(&mut u, t_n))?;
        let mut s = t.time(Stage::Transform, || self.transform.into_spectral(u))?;
        t.time(Stage::Kinetic, || self.kinetic_full.apply(&mut s))?;
        if self.filter_nyquist {
            s.remove_nyquist();
        }
        let adv = &self.advection;
        let tr = &self.transform;
        t.time(Stage::Advection, || adv.apply(AdvectionInput::Spectral(&s), tr))
    }

    pub fn strang_step(&mut self, mut u: WaveField, t_n: f64) -> Result<WaveField> {
        self.grid.check_same(u.grid(), "Strang step")?;
        self.prepare_advection(t_n)?;
        let half = 0.5 * self.tau;
        let t = &mut self.timings;
        t.time(Stage::Potential, || self.potential_half.apply(&mut u, t_n))?;
        let mut s = t.time(Stage::Transform, || self.transform.into_spectral(u))?;
        t.time(Stage::Kinetic, || self.kinetic_half.apply(&mut s))?;
        if self.filter_nyquist {
            s.remove_nyquist();
        }
        let adv = &self.advection;
        let tr = &self.transform;
        let v = t.time(Stage::Advection, || adv.apply(AdvectionInput::Spectral(&s), tr))?;
        let mut s = t.time(Stage::Transform, || self.transform.into_spectral(v))?;
        t.time(Stage::Kinetic, || self.kinetic_half.apply(&mut s))?;
        let mut u = t.time(Stage::Transform, || self.transform.into_physical(s))?;
        t.time(Stage::Potential, || self.potential_half.apply(&mut u, t_n + half))?;
        Ok(u)
    }
}

fn build_advection(
    grid: &Grid,
    potentials: &PotentialSet,
    t0: f64,
    tau: f64,
    substeps: usize,
    backend: &AdvectionBackend,
    timings: &mut Timings,
) -> Result<Advection> {
    let pts = if tau == 0.0 {
        DeparturePoints::at_grid(grid)
    } else {
        timings.time(Stage::Departure, || compute_departure_points(grid, potentials, t0, tau, substeps))?
    };
    timings.time(Stage::Plan, || Advection::new(pts, backend.clone()))
}

/// Called with the state after every step (and once with the initial state, step 0).
pub trait Observer {
    fn observe(&mut self, step: usize, time: f64, u: &WaveField) -> Result<()>;
}

/// Keeps every `every`-th state.
#[derive(Debug, Clone)]
pub struct Snapshots {
    pub every: usize,
    pub frames: Vec<(usize, f64, WaveField)>,
}

impl Snapshots {
    pub fn new(every: usize) -> Self {
        Self { every: every.max(1), frames: Vec::new() }
    }
}

impl Observer for Snapshots {
    fn observe(&mut self, step: usize, time: f64, u: &WaveField) -> Result<()> {
        if step % self.every == 0 {
            self.frames.push((step, time, u.clone()));
        }
        Ok(())
    }
}

/// Final state plus the run summary.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: WaveField,
    pub report: ExperimentReport,
}

/// Runs the time loop, recording the mass after every step.
pub fn propagate(problem: &SimulationProblem, observers: &mut [&mut dyn Observer]) -> Result<Propagation> {
    let start = Instant::now();
    let mut stepper = Stepper::new(problem)?;
    let tau = stepper.tau();
    let mut u = problem.initial.clone();
    let mut series = Vec::with_capacity(problem.steps + 1);
    series.push(mass(&u));
    for o in observers.iter_mut() {
        o.observe(0, 0.0, &u)?;
    }
    for n in 0..problem.steps {
        u = stepper.step(u, n as f64 * tau)?;
        if !u.is_finite() {
            return Err(Error::BlowUp { step: n + 1 });
        }
        series.push(mass(&u));
        for o in observers.iter_mut() {
            o.observe(n + 1, (n + 1) as f64 * tau, &u)?;
        }
    }
    let mut timings = stepper.timings().clone();
    timings.set_total(start.elapsed());
    let mut report = ExperimentReport::from_mass_series(series, timings);
    report.config = vec![
        ("dim".into(), problem.grid.dim().to_string()),
        ("N".into(), format!("{:?}", problem.grid.sizes())),
        ("epsilon".into(), format!("{:e}", problem.epsilon)),
        ("T".into(), format!("{:e}", problem.final_time)),
        ("steps".into(), problem.steps.to_string()),
        ("scheme".into(), problem.scheme.to_string()),
        ("backend".into(), problem.backend.name().to_string()),
        ("divergence_free".into(), problem.divergence_free.to_string()),
        ("substeps".into(), problem.substeps.to_string()),
    ];
    Ok(Propagation { state: u, report })
}
