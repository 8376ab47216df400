//! Finite-difference realisations of the PDE-level iterations on `[0, 1]`.
//!
//! Unknowns live on the `m = n − 2` interior nodes. `Δ_h` is the three-point
//! stencil with homogeneous Dirichlet data and the biharmonic is `Δ_h Δ_h`,
//! which imposes `u = Δu = 0` at both ends. Every field returned here is a
//! full-length grid vector with zeros at the two boundary nodes.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};

/// Uniform grid on `[0, 1]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n: usize,
}

impl Grid1D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 5 {
            return Err(Error::InvalidGrid(format!(
                "the biharmonic stencil needs at least 5 nodes, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn interior_len(&self) -> usize {
        self.n - 2
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            1.0
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| g(self.x(i))).collect()
    }

    /// Discrete `L²` norm `sqrt(h Σ v_i²)`; boundary nodes carry half weight.
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        let h = self.spacing();
        let last = v.len() - 1;
        v.iter()
            .enumerate()
            .map(|(i, x)| if i == 0 || i == last { 0.5 * x * x } else { x * x })
            .sum::<f64>()
            .sqrt()
            * h.sqrt()
    }

    pub fn l2_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.l2_norm(&d)
    }

    fn interior(&self, full: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&full[1..self.n - 1])
    }

    fn full(&self, interior: &DVector<f64>) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n);
        v.push(0.0);
        v.extend(interior.iter());
        v.push(0.0);
        v
    }
}

/// Interior matrices of `Δ_h` and `Δ_h²`.
#[derive(Debug, Clone)]
pub struct FdOperators {
    pub laplacian: DMatrix<f64>,
    pub biharmonic: DMatrix<f64>,
}

pub fn fd_operators(grid: &Grid1D) -> FdOperators {
    let m = grid.interior_len();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let laplacian = DMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
        0 => -2.0 * inv_h2,
        1 => inv_h2,
        _ => 0.0,
    });
    let biharmonic = &laplacian * &laplacian;
    FdOperators {
        laplacian,
        biharmonic,
    }
}

/// A discrete state, control and multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct FdFields {
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub z: Vec<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be positive, got {alpha}"),
        })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("must be positive, got {rho}"),
        })
    }
}

fn factor(matrix: DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(matrix).ok_or(Error::Singular(what))
}

/// `‖Ax − b‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)`, zero when both sides vanish.
fn backward_error(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let a_norm = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let scale = a_norm * x.amax() + b.amax();
    if scale == 0.0 {
        0.0
    } else {
        (a * x - b).amax() / scale
    }
}

/// Solves the eliminated optimality system `(αΔ_h² + I)u = 𝒟`, then sets
/// `f = −Δ_h u` and `z = −(α/2) f`.
pub fn fd_direct_kkt_solve(grid: &Grid1D, alpha: f64, target: &[f64]) -> Result<FdFields> {
    check_alpha(alpha)?;
    check_len("target", grid.n(), target.len())?;
    let ops = fd_operators(grid);
    let m = grid.interior_len();
    let system = &ops.biharmonic * alpha + DMatrix::identity(m, m);
    let d = grid.interior(target);
    let chol = factor(system.clone(), "direct optimality system")?;
    let u = chol.solve(&d);
    if backward_error(&system, &u, &d) > 1e-10 {
        return Err(Error::Singular("direct optimality system"));
    }
    let f = -(&ops.laplacian * &u);
    let z = &f * (-0.5 * alpha);
    Ok(FdFields {
        u: grid.full(&u),
        f: grid.full(&f),
        z: grid.full(&z),
    })
}

/// Iterate history of a finite-difference run.
#[derive(Debug, Clone, PartialEq)]
pub struct FdHistory {
    /// `‖u^k − u*_h‖` for `k = 0, 1, …`.
    pub state_error: Vec<f64>,
    pub control_error: Vec<f64>,
    pub multiplier_error: Vec<f64>,
    /// Smallest multiplier value at each step.
    pub min_multiplier: Vec<f64>,
    /// Every iterate, starting from `k = 0`.
    pub iterates: Vec<FdFields>,
    /// Last computed iterate.
    pub last: FdFields,
    /// Reference fixed point the errors are measured against.
    pub reference: FdFields,
    /// Step at which the error exceeded the divergence threshold.
    pub diverged_at: Option<usize>,
}

impl FdHistory {
    fn new(reference: FdFields, n: usize) -> Self {
        Self {
            state_error: Vec::new(),
            control_error: Vec::new(),
            multiplier_error: Vec::new(),
            min_multiplier: Vec::new(),
            iterates: Vec::new(),
            last: FdFields {
                u: vec![0.0; n],
                f: vec![0.0; n],
                z: vec![0.0; n],
            },
            reference,
            diverged_at: None,
        }
    }

    fn push(&mut self, grid: &Grid1D, fields: FdFields) {
        let r = &self.reference;
        self.state_error.push(grid.l2_distance(&fields.u, &r.u));
        self.control_error.push(grid.l2_distance(&fields.f, &r.f));
        self.multiplier_error.push(grid.l2_distance(&fields.z, &r.z));
        self.min_multiplier
            .push(fields.z[1..fields.z.len() - 1].iter().copied().fold(f64::INFINITY, f64::min));
        self.iterates.push(fields.clone());
        self.last = fields;
    }

    pub fn len(&self) -> usize {
        self.state_error.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state_error.is_empty()
    }
}

/// Classical Uzawa iteration with exact inner solves.
///
/// For `k = 0 ..= iters` the inner problem at `z^k` gives
/// `(α/2 Δ_h² + I)u^k = 𝒟 − Δ_h z^k` and `f^k = −(2/α) z^k`; then
/// `z^{k+1} = z^k + ρ(Δ_h u^k + f^k)`. The history has `iters + 1` entries.
pub fn fd_uzawa_run(grid: &Grid1D, alpha: f64, rho: f64, target: &[f64], iters: usize) -> Result<FdHistory> {
    check_rho(rho)?;
    let reference = fd_direct_kkt_solve(grid, alpha, target)?;
    let ops = fd_operators(grid);
    let m = grid.interior_len();
    let chol = factor(
        &ops.biharmonic * (0.5 * alpha) + DMatrix::identity(m, m),
        "Uzawa inner system",
    )?;
    let d = grid.interior(target);
    let mut z = DVector::zeros(m);
    let mut history = FdHistory::new(reference, grid.n());
    for k in 0..=iters {
        let u = chol.solve(&(&d - &ops.laplacian * &z));
        let f = &z * (-2.0 / alpha);
        let residual = &ops.laplacian * &u + &f;
        let fields = FdFields {
            u: grid.full(&u),
            f: grid.full(&f),
            z: grid.full(&z),
        };
        history.push(grid, fields);
        if k < iters {
            z += residual * rho;
        }
    }
    Ok(history)
}

/// Minimises `½uᵀHu − gᵀu` over `u ≥ 0` by a primal-dual active set method.
fn nonnegative_qp(h: &DMatrix<f64>, full: &Cholesky<f64, Dyn>, g: &DVector<f64>) -> Result<DVector<f64>> {
    const MAX_ITERS: usize = 200;
    const TOL: f64 = 1e-10;
    let m = g.len();
    let h_norm = h.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut active = vec![false; m];
    for _ in 0..MAX_ITERS {
        let free: Vec<usize> = (0..m).filter(|&i| !active[i]).collect();
        let mut u = DVector::zeros(m);
        if free.len() == m {
            u = full.solve(g);
        } else if !free.is_empty() {
            let sub = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
            let sol = factor(sub, "active-set subsystem")?.solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                u[i] = sol[a];
            }
        }
        let lambda = h * &u - g;
        let u_scale = u.amax().max(g.amax() / h_norm).max(f64::MIN_POSITIVE);
        let l_scale = (h_norm * u.amax() + g.amax()).max(f64::MIN_POSITIVE);
        let next: Vec<bool> = (0..m)
            .map(|i| lambda[i] / l_scale - u[i] / u_scale > TOL)
            .collect();
        if next == active {
            let kkt_ok = (0..m).all(|i| u[i] >= -TOL * u_scale && lambda[i] >= -TOL * l_scale);
            if kkt_ok {
                return Ok(u.map(|v| v.max(0.0)));
            }
        }
        active = next;
    }
    Err(Error::IterationLimit {
        what: "nonnegative inner solve",
        iterations: MAX_ITERS,
    })
}

/// Uzawa iteration for the problem with `u ≥ 0`, `f ≥ 0` and constraint
/// written as `−Δu = f`, with projected multiplier step
/// `z^{k+1} = max(z^k + ρ(−Δ_h u^k − f^k), 0)`.
///
/// With this sign convention the multiplier of a nonnegative saddle point is
/// `z* = (α/2) f* ≥ 0`, the negative of the multiplier in [`fd_uzawa_run`].
/// The history's `reference` and `last.z` follow the same convention.
pub fn fd_projected_uzawa_run(
    grid: &Grid1D,
    alpha: f64,
    rho: f64,
    target: &[f64],
    iters: usize,
) -> Result<FdHistory> {
    check_rho(rho)?;
    let mut reference = fd_direct_kkt_solve(grid, alpha, target)?;
    reference.z.iter_mut().for_each(|v| *v = -*v);
    let ops = fd_operators(grid);
    let m = grid.interior_len();
    let h = &ops.biharmonic * (0.5 * alpha) + DMatrix::identity(m, m);
    let chol = factor(h.clone(), "projected Uzawa inner system")?;
    let d = grid.interior(target);
    let mut z: DVector<f64> = DVector::zeros(m);
    let mut history = FdHistory::new(reference, grid.n());
    for k in 0..=iters {
        let g = &d + &ops.laplacian * &z;
        let u = nonnegative_qp(&h, &chol, &g)?;
        let f = z.map(|v| (2.0 / alpha * v).max(0.0));
        let residual = -(&ops.laplacian * &u) - &f;
        history.push(
            grid,
            FdFields {
                u: grid.full(&u),
                f: grid.full(&f),
                z: grid.full(&z),
            },
        );
        if k < iters {
            z.zip_apply(&residual, |zi, ri| *zi = (*zi + rho * ri).max(0.0));
        }
    }
    Ok(history)
}

/// Error level at which [`gauss_seidel_adjoint_run`] reports divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Alternating state / adjoint sweep
/// `−Δ_h u^{k+1} = f^k`, `−Δ_h z^{k+1} = 𝒟 − u^{k+1}`, `f^{k+1} = z^{k+1}/α`,
/// starting from `f⁰ = 0`.
///
/// Entry `k` of the history holds `(u^k, f^k, z^k)` with `u⁰ = z⁰ = 0`. Its fixed
/// point solves `(αΔ_h² + I)u = 𝒟` with `z = αf`.
pub fn gauss_seidel_adjoint_run(grid: &Grid1D, alpha: f64, target: &[f64], iters: usize) -> Result<FdHistory> {
    let mut reference = fd_direct_kkt_solve(grid, alpha, target)?;
    reference.z = reference.f.iter().map(|f| alpha * f).collect();
    let ops = fd_operators(grid);
    let m = grid.interior_len();
    let neg_lap = factor(-&ops.laplacian, "discrete Laplacian")?;
    let d = grid.interior(target);
    let mut f = DVector::zeros(m);
    let mut history = FdHistory::new(reference, grid.n());
    history.push(
        grid,
        FdFields {
            u: vec![0.0; grid.n()],
            f: vec![0.0; grid.n()],
            z: vec![0.0; grid.n()],
        },
    );
    for k in 1..=iters {
        let u = neg_lap.solve(&f);
        let z = neg_lap.solve(&(&d - &u));
        f = &z / alpha;
        history.push(
            grid,
            FdFields {
                u: grid.full(&u),
                f: grid.full(&f),
                z: grid.full(&z),
            },
        );
        let worst = history.state_error[k].max(history.control_error[k]);
        if !worst.is_finite() || worst > DIVERGENCE_THRESHOLD {
            history.diverged_at = Some(k);
            break;
        }
    }
    Ok(history)
}
