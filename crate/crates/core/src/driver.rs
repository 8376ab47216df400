//! The Deep Uzawa loop: inner optimiser steps on the discrete Lagrangian with
//! the multiplier frozen, followed by an explicit multiplier ascent step.

use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{build_grid, cutoff_jet, l2_norm_slice, CollocationSet, CutoffJet, Domain};
use crate::error::{Error, Result};
use crate::lagrangian::{multiplier_update, LossBreakdown, MultiplierField, ProblemSpec, Variant};
use crate::net::{forward_jets, init_network, NetworkParameters, NetworkSpec, Objective};
use crate::optim::AdamState;
use crate::oracle::ExactSolution;

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct UzawaConfig {
    /// Number of multiplier updates.
    pub n_uz: usize,
    /// Optimiser steps between multiplier updates.
    pub n_sgd: usize,
    pub lr: f64,
    /// Multiplier step for the plain variant. The augmented variant steps by `β`.
    pub rho: f64,
    pub variant: Variant,
    /// Seeds the network initialisation and mini-batch sampling.
    pub seed: u64,
    /// Nodes per axis of the collocation grid.
    pub grid_n: usize,
    pub domain: Domain,
    pub problem: ProblemSpec,
    pub network: NetworkSpec,
    pub exact: Option<ExactSolution>,
    /// Points per optimiser step; `None` means the full grid.
    pub batch_size: Option<usize>,
    /// Also record errors on a grid four times finer.
    pub refined_eval: bool,
}

impl UzawaConfig {
    /// Defaults: 500 updates of 40 Adam steps at rate `10⁻³`, 201 nodes per
    /// axis, `ρ = α/4`, plain variant, full batch.
    pub fn new(domain: Domain, problem: ProblemSpec, exact: Option<ExactSolution>) -> Self {
        let dim = domain.dim();
        Self {
            n_uz: 500,
            n_sgd: 40,
            lr: 1e-3,
            rho: problem.alpha / 4.0,
            variant: Variant::Plain,
            seed: 0,
            grid_n: 201,
            domain,
            problem,
            network: NetworkSpec::default_for(dim),
            exact,
            batch_size: None,
            refined_eval: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        if self.n_uz == 0 {
            return Err(Error::InvalidParameter {
                name: "n_uz",
                reason: "must be at least 1".into(),
            });
        }
        if self.n_sgd == 0 {
            return Err(Error::InvalidParameter {
                name: "n_sgd",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lr",
                reason: format!("must be nonnegative, got {}", self.lr),
            });
        }
        match self.variant {
            Variant::Plain => positive("rho", self.rho)?,
            Variant::Augmented { beta } => positive("beta", beta)?,
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: "must be at least 1".into(),
            });
        }
        if self.network.input_dim != self.domain.dim() {
            return Err(Error::Precondition(format!(
                "network takes {} inputs but the domain is {}-dimensional",
                self.network.input_dim,
                self.domain.dim()
            )));
        }
        if let Some(exact) = &self.exact {
            if exact.dim() != self.domain.dim() {
                return Err(Error::Precondition("exact solution dimension differs from the domain".into()));
            }
        }
        self.network.validate()?;
        self.problem.validate()
    }

    /// Step used for the multiplier update.
    pub fn multiplier_step(&self) -> f64 {
        match self.variant {
            Variant::Plain => self.rho,
            Variant::Augmented { beta } => beta,
        }
    }

    fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            seed: self.seed,
            ..self.network.clone()
        }
    }
}

/// History and final state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// `‖u_θ − u*‖` after each update's inner loop; empty without an exact solution.
    pub state_error: Vec<f64>,
    pub control_error: Vec<f64>,
    /// Same errors on the refined grid, when requested.
    pub refined_state_error: Vec<f64>,
    pub refined_control_error: Vec<f64>,
    /// `(‖u*‖, ‖f*‖)` on the training grid.
    pub exact_norms: Option<(f64, f64)>,
    /// Loss components at the end of each inner loop, before the multiplier step.
    pub losses: Vec<LossBreakdown>,
    /// Seconds spent on each update.
    pub wall_clock: Vec<f64>,
    /// Update index at which a non-finite value stopped the run.
    pub diverged_at: Option<usize>,
    pub params: NetworkParameters,
    pub multiplier: MultiplierField,
    /// Final `u_θ` and `f_θ` on the training grid.
    pub state: Vec<f64>,
    pub control: Vec<f64>,
}

impl RunRecord {
    pub fn updates(&self) -> usize {
        self.losses.len()
    }

    pub fn relative_state_error(&self) -> Vec<f64> {
        match self.exact_norms {
            Some((u, _)) => self.state_error.iter().map(|e| e / u).collect(),
            None => Vec::new(),
        }
    }

    pub fn relative_control_error(&self) -> Vec<f64> {
        match self.exact_norms {
            Some((_, f)) => self.control_error.iter().map(|e| e / f).collect(),
            None => Vec::new(),
        }
    }
}

fn cutoffs(set: &CollocationSet) -> Vec<CutoffJet> {
    set.points().map(|p| cutoff_jet(set.domain(), p)).collect()
}

/// Discrete `L²` norms of `u_θ − u*` and `f_θ − f*` over `set`.
pub fn record_errors(params: &NetworkParameters, set: &CollocationSet, exact: &ExactSolution) -> Result<(f64, f64)> {
    let jets = forward_jets(params, set.coords(), &cutoffs(set))?;
    let (u_star, f_star) = exact.sample(set)?;
    let du: Vec<f64> = jets.iter().zip(&u_star).map(|(j, u)| j.u - u).collect();
    let df: Vec<f64> = jets.iter().zip(&f_star).map(|(j, f)| j.f - f).collect();
    Ok((l2_norm_slice(set, &du)?, l2_norm_slice(set, &df)?))
}

fn multiplier_at(z_grid: &[f64], set: &CollocationSet, indices: &[usize], rho: f64) -> MultiplierField {
    MultiplierField {
        values: indices
            .iter()
            .filter(|&&i| set.is_interior(i))
            .map(|&i| z_grid[i])
            .collect(),
        rho,
    }
}

/// Runs `n_uz` multiplier updates, each preceded by `n_sgd` Adam steps.
///
/// Adam's moment estimates carry over from one update to the next. A
/// non-finite loss or gradient ends the run early with `diverged_at` set.
pub fn run_deep_uzawa(config: &UzawaConfig) -> Result<RunRecord> {
    config.validate()?;
    let set = build_grid(&config.domain, config.grid_n)?;
    let objective = Objective::new(set.clone(), config.problem.clone(), config.variant)?;
    let refined = if config.refined_eval {
        Some(build_grid(&config.domain, 4 * (config.grid_n - 1) + 1)?)
    } else {
        None
    };
    let step = config.multiplier_step();
    let mut params = init_network(&config.network_spec())?;
    let mut adam = AdamState::new(params.len(), config.lr);
    let mut z = MultiplierField::zeros(set.interior_count(), step);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let batch = config.batch_size.filter(|&b| b < set.len());

    let exact_norms = match &config.exact {
        Some(exact) => {
            let (u, f) = exact.sample(&set)?;
            Some((l2_norm_slice(&set, &u)?, l2_norm_slice(&set, &f)?))
        }
        None => None,
    };

    let mut record = RunRecord {
        state_error: Vec::new(),
        control_error: Vec::new(),
        refined_state_error: Vec::new(),
        refined_control_error: Vec::new(),
        exact_norms,
        losses: Vec::new(),
        wall_clock: Vec::new(),
        diverged_at: None,
        params: params.clone(),
        multiplier: z.clone(),
        state: Vec::new(),
        control: Vec::new(),
    };

    'outer: for k in 0..config.n_uz {
        let started = Instant::now();
        let z_grid = match batch {
            Some(_) => z.on_grid(&set)?,
            None => Vec::new(),
        };
        for _ in 0..config.n_sgd {
            let result = match batch {
                None => objective.loss_and_gradient(&params, &z),
                Some(b) => {
                    let mut idx = sample(&mut rng, set.len(), b).into_vec();
                    idx.sort_unstable();
                    let sub = objective.subset(&idx, set.len() as f64 / b as f64);
                    sub.loss_and_gradient(&params, &multiplier_at(&z_grid, &set, &idx, step))
                }
            };
            let grad = match result {
                Ok((_, grad)) => grad,
                Err(Error::NonFinite(_)) => {
                    record.diverged_at = Some(k);
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            adam.step(params.as_mut_slice(), &grad)?;
            if params.as_slice().iter().any(|v| !v.is_finite()) {
                record.diverged_at = Some(k);
                break 'outer;
            }
        }

        let breakdown = match objective.breakdown(&params, &z) {
            Ok(b) if b.is_finite() => b,
            Ok(_) | Err(Error::NonFinite(_)) => {
                record.diverged_at = Some(k);
                break;
            }
            Err(e) => return Err(e),
        };
        let residuals = objective.residuals(&params)?;
        if let Some(exact) = &config.exact {
            let (se, ce) = record_errors(&params, &set, exact)?;
            record.state_error.push(se);
            record.control_error.push(ce);
            if let Some(fine) = &refined {
                let (se, ce) = record_errors(&params, fine, exact)?;
                record.refined_state_error.push(se);
                record.refined_control_error.push(ce);
            }
        }
        record.losses.push(breakdown);
        z = multiplier_update(&z, &residuals, step)?;
        record.wall_clock.push(started.elapsed().as_secs_f64());
    }

    if let Ok(jets) = objective.jets(&params) {
        record.state = jets.iter().map(|j| j.u).collect();
        record.control = jets.iter().map(|j| j.f).collect();
    }
    record.params = params;
    record.multiplier = z;
    Ok(record)
}

/// How the multiplier step is chosen for each `α` in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoRule {
    /// `ρ = c · α`.
    AlphaFraction(f64),
    Fixed(f64),
}

impl Default for RhoRule {
    fn default() -> Self {
        RhoRule::AlphaFraction(0.25)
    }
}

impl RhoRule {
    pub fn rho(self, alpha: f64) -> f64 {
        match self {
            RhoRule::AlphaFraction(c) => c * alpha,
            RhoRule::Fixed(rho) => rho,
        }
    }
}

/// `base` with the regularisation set to `alpha` and `ρ` chosen by `rule`.
pub fn config_for_alpha(base: &UzawaConfig, alpha: f64, rule: RhoRule) -> UzawaConfig {
    let mut config = base.clone();
    config.problem.alpha = alpha;
    config.rho = rule.rho(alpha);
    if let Some(ExactSolution::BoundaryLayer { .. }) = config.exact {
        config.exact = Some(ExactSolution::BoundaryLayer { alpha });
    }
    config
}

/// One run per `α`.
pub fn rho_alpha_sweep(base: &UzawaConfig, alphas: &[f64], rule: RhoRule) -> Result<Vec<RunRecord>> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter {
            name: "alphas",
            reason: "need at least one value".into(),
        });
    }
    alphas
        .iter()
        .map(|&alpha| run_deep_uzawa(&config_for_alpha(base, alpha, rule)))
        .collect()
}

/// Grid used by [`run_deep_uzawa`] for `config`.
pub fn training_grid(config: &UzawaConfig) -> Result<CollocationSet> {
    build_grid(&config.domain, config.grid_n)
}

/// The unit interval or square matching `dim`.
pub fn unit_domain(dim: usize) -> Domain {
    if dim == 2 {
        Domain::unit_square()
    } else {
        Domain::unit_interval()
    }
}
