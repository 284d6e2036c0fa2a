//! Neural time stepping for one-dimensional conservation laws.
//!
//! A small dense network is trained at every time step to map the discrete
//! solution at `t_n` to the solution at `t_{n+1}`. No training data is used:
//! the network is fitted against a residual of the conservation law, either
//! in differential form (finite differences of the flux) or in integral form
//! (trapezoidal quadrature over every grid cell), plus a Dirichlet boundary
//! penalty.
//!
//! The crate also carries the classical solvers used to judge those runs:
//! the analytic solution of the one-way wave problem, a first-order upwind
//! scheme and a MUSCL finite-volume solver for the Euler system.
//!
//! Module map:
//!
//! - [`mesh`]: uniform grid and multi-component state snapshots
//! - [`models`]: wave and Euler flux functions, initial and boundary data
//! - [`nn`]: dense layers, reverse-mode gradients, identity initialization
//! - [`losses`]: differential and integral residual losses
//! - [`optim`]: gradient descent and Adam
//! - [`trainer`]: the per-step training loop and the outer time loop
//! - [`reference`]: analytic, upwind and MUSCL oracles
//! - [`io`]: run configuration, CSV trajectories, comparisons and plots

pub mod error;
pub mod io;
pub mod losses;
pub mod mesh;
pub mod models;
pub mod nn;
pub mod optim;
pub mod reference;
pub mod trainer;

pub use error::{Error, Result};
pub use mesh::{Grid1D, StateField};
pub use models::{ConservationLaw, ModelKind, ModelSpec, Side};
pub use trainer::{LossReport, TrainConfig, Trajectory};

