//! Reference solutions: closed forms and finite-difference iterations.

pub mod exact;
pub mod fd;

pub use exact::{exact_eval, residual_check_boundary_layer, BoundaryLayerCheck, ExactSolution};
pub use fd::{
    fd_direct_kkt_solve, fd_operators, fd_projected_uzawa_run, fd_uzawa_run, gauss_seidel_adjoint_run,
    FdFields, FdHistory, FdOperators, Grid1D,
};
