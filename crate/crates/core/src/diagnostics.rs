//! Mass, error norms, convergence-order fits and per-stage timings.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::spectral::WaveField;

/// Discrete mass `h̄ Σ_j |u(x^j)|²`.
pub fn mass(u: &WaveField) -> f64 {
    u.grid().cell_volume() * u.values().iter().map(|v| v.norm_sqr()).sum::<f64>()
}

/// `√(h̄ Σ_j |u - ref|²)`.
pub fn l2_error(u: &WaveField, reference: &WaveField) -> Result<f64> {
    u.grid().check_same(reference.grid(), "l2 error")?;
    let s: f64 = u
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok((u.grid().cell_volume() * s).sqrt())
}

/// `max_j | |u|² - |ref|² |`.
pub fn max_density_difference(u: &WaveField, reference: &WaveField) -> Result<f64> {
    u.grid().check_same(reference.grid(), "density difference")?;
    Ok(u.values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
        .fold(0.0, f64::max))
}

/// Least-squares slope of `log(error)` against `log(τ)`.
pub fn fit_order(errors: &[(f64, f64)]) -> Result<f64> {
    if errors.len() < 3 {
        return Err(Error::Undefined(format!(
            "order fit needs at least 3 points, got {}",
            errors.len()
        )));
    }
    if let Some((tau, e)) = errors.iter().find(|(t, e)| !(*t > 0.0 && *e > 0.0 && e.is_finite())) {
        return Err(Error::Undefined(format!("non-positive entry τ = {tau}, error = {e}")));
    }
    let n = errors.len() as f64;
    let xs: Vec<f64> = errors.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Undefined("all time steps are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// `max_n |m_n - m_0|`.
pub fn max_deviation(series: &[f64]) -> f64 {
    let Some(&m0) = series.first() else { return 0.0 };
    series.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
}

/// Named solver stages with accumulated wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Gauge,
    Departure,
    Plan,
    Potential,
    Kinetic,
    Transform,
    Advection,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Gauge,
        Stage::Departure,
        Stage::Plan,
        Stage::Potential,
        Stage::Kinetic,
        Stage::Transform,
        Stage::Advection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gauge => "gauge",
            Stage::Departure => "departure_points",
            Stage::Plan => "backend_plan",
            Stage::Potential => "potential",
            Stage::Kinetic => "kinetic",
            Stage::Transform => "transform",
            Stage::Advection => "advection",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    stages: [Duration; 7],
    calls: [u64; 7],
    total: Duration,
}

impl Timings {
    pub fn add(&mut self, stage: Stage, elapsed: Duration) {
        self.stages[stage as usize] += elapsed;
        self.calls[stage as usize] += 1;
    }

    /// Runs `f`, charging its wall-clock time to `stage`.
    pub fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(stage, start.elapsed());
        out
    }

    pub fn set_total(&mut self, total: Duration) {
        self.total = total;
    }

    pub fn seconds(&self, stage: Stage) -> f64 {
        self.stages[stage as usize].as_secs_f64()
    }

    pub fn calls(&self, stage: Stage) -> u64 {
        self.calls[stage as usize]
    }

    pub fn total_seconds(&self) -> f64 {
        self.total.as_secs_f64()
    }

    pub fn merge(&mut self, other: &Timings) {
        for i in 0..self.stages.len() {
            self.stages[i] += other.stages[i];
            self.calls[i] += other.calls[i];
        }
        self.total += other.total;
    }

    /// `(name, seconds)` for every stage, then the total.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut v: Vec<_> = Stage::ALL.iter().map(|&s| (s.name(), self.seconds(s))).collect();
        v.push(("total", self.total_seconds()));
        v
    }
}

/// Summary of one simulation or sweep.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    /// Mass after each step, starting with the initial mass.
    pub mass_series: Vec<f64>,
    pub max_mass_deviation: f64,
    /// `(τ, error)` pairs of an order sweep.
    pub errors: Vec<(f64, f64)>,
    pub fitted_order: Option<f64>,
    pub timings: Timings,
    /// Configuration echo as ordered key/value pairs.
    pub config: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn from_mass_series(mass_series: Vec<f64>, timings: Timings) -> Self {
        Self {
            max_mass_deviation: max_deviation(&mass_series),
            mass_series,
            timings,
            ..Self::default()
        }
    }

    pub fn set_errors(&mut self, errors: Vec<(f64, f64)>) -> Result<()> {
        self.fitted_order = Some(fit_order(&errors)?);
        self.errors = errors;
        Ok(())
    }
}
