//! Exponential splitting for the magnetic Schrödinger equation
//!
//! ```text
//! ∂_t u = -(i/ε)(|A|²/2 + V) u  +  (iε/2) Δu  +  A·∇u
//!               B                     A           C
//! ```
//!
//! on periodic boxes in one to three dimensions. The kinetic part is solved
//! exactly in Fourier space, the potential part pointwise, and the advection
//! part by backward characteristics with one of three evaluation backends:
//! direct Fourier summation, local Lagrange interpolation or a nonequispaced
//! FFT. A non-divergence-free `A` is either moved into Coulomb gauge or handled
//! by a `½∇·A` term in the potential step.
//!
//! ```no_run
//! use magsplit::presets::{ex1d, Formulation};
//! use magsplit::splitting::propagate;
//!
//! let run = ex1d().with_points(512).prepare(Formulation::Gauged)?;
//! let out = propagate(&run.problem, &mut [])?;
//! println!("mass deviation {:e}", out.report.max_mass_deviation);
//! # Ok::<(), magsplit::Error>(())
//! ```

pub mod advection;
pub mod diagnostics;
pub mod error;
pub mod gauge;
pub mod grid;
pub mod nfft;
pub mod potential;
pub mod presets;
pub mod quadrature;
pub mod spectral;
pub mod splitting;

pub use advection::{AdvectionBackend, DeparturePoints};
pub use diagnostics::{fit_order, l2_error, mass, ExperimentReport, Timings};
pub use error::{Error, Result};
pub use gauge::{GaugeField, PotentialSet};
pub use grid::{Domain, Grid, MultiIndex};
pub use nfft::{NfftConfig, NfftPlan, Precompute};
pub use spectral::{SpectralField, SpectralTransform, WaveField};
pub use splitting::{propagate, SimulationProblem, SplittingScheme, Stepper};
