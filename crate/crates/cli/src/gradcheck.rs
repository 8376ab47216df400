//! Self-test of the network derivatives against finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uzawa_core::domain::{boundary_cutoff, cutoff_jet};
use uzawa_core::driver::unit_domain;
use uzawa_core::net::{finite_difference_gradient, forward_jet, init_network, loss_and_gradient};
use uzawa_core::{build_grid, Activation, MultiplierField, NetworkSpec, ProblemSpec, TargetSpec, Variant};

use crate::error::Result;

/// Largest relative error allowed for parameter gradients.
pub const GRADIENT_TOL: f64 = 1e-5;
/// Largest relative error allowed for Laplacians.
pub const LAPLACIAN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

fn relative_max(exact: &[f64], approx: &[f64], floor_fraction: f64) -> f64 {
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    exact
        .iter()
        .zip(approx)
        .map(|(e, a)| (e - a).abs() / e.abs().max(floor_fraction * scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn gradient_case(dim: usize, problem: ProblemSpec, variant: Variant, seed: u64) -> Result<f64> {
    let set = build_grid(&unit_domain(dim), if dim == 1 { 12 } else { 5 })?;
    let params = init_network(&NetworkSpec {
        input_dim: dim,
        hidden: vec![8, 8],
        activation: Activation::Tanh,
        seed,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = MultiplierField {
        values: (0..set.interior_count()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        rho: 1.0,
    };
    let (_, grad) = loss_and_gradient(&params, &set, &problem, &z, variant)?;
    let fd = finite_difference_gradient(&params, &set, &problem, &z, variant, 1e-6)?;
    Ok(relative_max(&fd, &grad, 1e-6))
}

fn second_difference(u: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..p.len() {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[i] += h;
        minus[i] -= h;
        sum += (u(&plus) - 2.0 * u(p) + u(&minus)) / (h * h);
    }
    sum
}

fn laplacian_case(dim: usize, seed: u64) -> Result<f64> {
    let domain = unit_domain(dim);
    let params = init_network(&NetworkSpec {
        seed,
        ..NetworkSpec::default_for(dim)
    })?;
    let u = |p: &[f64]| boundary_cutoff(&domain, p) * params.evaluate_raw(p)[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-3;
    let mut exact = Vec::new();
    let mut approx = Vec::new();
    for _ in 0..20 {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(0.02..0.98)).collect();
        exact.push(forward_jet(&params, &p, &cutoff_jet(&domain, &p))?.lap_u);
        approx.push((4.0 * second_difference(&u, &p, h) - second_difference(&u, &p, 2.0 * h)) / 3.0);
    }
    Ok(relative_max(&exact, &approx, 1e-2))
}

/// Runs every check and returns one line per case.
pub fn run_grad_check() -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    let problems = [
        ("poisson", ProblemSpec::poisson(1e-2, TargetSpec::Sine1D)),
        ("allen_cahn", ProblemSpec::allen_cahn(1e-2, 0.5, TargetSpec::Constant(0.5))),
    ];
    for dim in [1usize, 2] {
        for (label, problem) in &problems {
            let mut problem = problem.clone();
            if dim == 2 && problem.target == TargetSpec::Sine1D {
                problem.target = TargetSpec::Sine2D;
            }
            for (variant_name, variant) in [("plain", Variant::Plain), ("augmented", Variant::Augmented { beta: 0.3 })] {
                let error = (0..2)
                    .map(|seed| gradient_case(dim, problem.clone(), variant, seed))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                lines.push(CheckLine {
                    name: format!("gradient {dim}d {label} {variant_name}"),
                    error,
                    tolerance: GRADIENT_TOL,
                });
            }
        }
        let error = (0..3)
            .map(|seed| laplacian_case(dim, seed))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        lines.push(CheckLine {
            name: format!("laplacian {dim}d"),
            error,
            tolerance: LAPLACIAN_TOL,
        });
    }
    Ok(lines)
}
