//! Method-of-characteristics construction of Koopman eigenfunctions, unit-velocity
//! measurements, invariants and flowbox coordinates for smooth vector fields.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] parses and evaluates arithmetic expressions used for user systems.
//! * [`dynsys`] holds [`VectorField`] and the built-in registry.
//! * [`odeint`] integrates orbits and locates crossings with a [`odeint::Section`].
//! * [`chart`] builds a [`Chart`] from a non-recurrent [`Surface`] and evaluates
//!   the unit measurement `m`, the invariants `h` and the flowbox map.
//! * [`kef`] composes eigenfunctions `f(h) e^{λ m}`, minimal sets and residual checks.
//! * [`varfit`] minimises the unit-velocity / orthogonality functional on a grid.
//! * [`refsol`] provides closed-form oracles for every built-in example.
//! * [`io`] writes the CSV artifacts.

pub mod chart;
pub mod dynsys;
pub mod error;
pub mod expr;
pub mod io;
pub mod kef;
pub mod numeric;
pub mod odeint;
pub mod refsol;
pub mod varfit;
pub mod verify;

pub use chart::{Chart, ChartPoint, NonRecurrenceReport, Surface, SurfaceSpec};
pub use dynsys::{DomainBox, Point, SystemSpec, VectorField};
pub use error::{Error, Result};
pub use kef::{KoopmanEigenfunction, MinimalSet};
pub use num_complex::Complex64;
pub use odeint::{CrossingEvent, IntegratorConfig, Method, Orbit};
pub use refsol::ReferenceSolution;
pub use varfit::{FitConfig, FitResult, GridField};
