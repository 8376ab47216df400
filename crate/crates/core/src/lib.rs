//! Deep Uzawa solvers for linear and semilinear elliptic optimal control.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`]: Cartesian collocation grids, trapezoidal quadrature and the
//!   boundary cutoff used to impose zero Dirichlet data.
//! * [`net`]: the two-output network `(u, f)` with forward jets carrying the
//!   value, gradient and Laplacian, plus exact reverse-mode parameter gradients.
//! * [`optim`]: Adam and plain gradient descent on flat parameter vectors.
//! * [`lagrangian`]: constraint residuals, cost densities, the discrete
//!   Lagrangian and multiplier updates.
//! * [`oracle`]: closed-form solutions and finite-difference realisations of the
//!   Uzawa, projected Uzawa and adjoint iterations.
//! * [`driver`]: the outer Uzawa / inner optimiser loop and run records.

pub mod domain;
pub mod driver;
mod error;
pub mod lagrangian;
pub mod net;
pub mod optim;
pub mod oracle;

pub use domain::{build_grid, CollocationSet, Domain, GridField};
pub use driver::{rho_alpha_sweep, run_deep_uzawa, RhoRule, RunRecord, UzawaConfig};
pub use error::{Error, Result};
pub use lagrangian::{ConstraintKind, MultiplierField, ProblemSpec, TargetSpec, Variant};
pub use net::{Activation, Jet, NetworkParameters, NetworkSpec};
pub use oracle::ExactSolution;
