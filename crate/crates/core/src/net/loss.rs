//! The discrete Lagrangian as a function of the network parameters.

use super::jet::{Jet, Tape};
use super::NetworkParameters;
use crate::domain::{cutoff_jet, CollocationSet, CutoffJet};
use crate::error::{check_len, Error, Result};
use crate::lagrangian::{
    discrete_lagrangian_with_targets, interior_residuals, loss_breakdown, point_partials,
    LossBreakdown, MultiplierField, ProblemSpec, Variant,
};

/// Everything about `θ ↦ L_Q(u_θ, f_θ, z)` that does not change between
/// optimiser steps: nodes, weights, targets and cutoff jets.
#[derive(Debug, Clone)]
pub struct Objective {
    problem: ProblemSpec,
    variant: Variant,
    set: CollocationSet,
    targets: Vec<f64>,
    cutoffs: Vec<CutoffJet>,
}

impl Objective {
    pub fn new(set: CollocationSet, problem: ProblemSpec, variant: Variant) -> Result<Self> {
        problem.validate()?;
        if let Variant::Augmented { beta } = variant {
            if !(beta >= 0.0 && beta.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "beta",
                    reason: format!("must be nonnegative, got {beta}"),
                });
            }
        }
        let targets = problem.target_values(&set)?;
        let cutoffs = set.points().map(|p| cutoff_jet(set.domain(), p)).collect();
        Ok(Self {
            problem,
            variant,
            set,
            targets,
            cutoffs,
        })
    }

    pub fn set(&self) -> &CollocationSet {
        &self.set
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Restriction to some nodes, weights scaled by `weight_scale`.
    pub fn subset(&self, indices: &[usize], weight_scale: f64) -> Self {
        Self {
            problem: self.problem.clone(),
            variant: self.variant,
            set: self.set.subset(indices, weight_scale),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            cutoffs: indices.iter().map(|&i| self.cutoffs[i].clone()).collect(),
        }
    }

    fn check_params(&self, params: &NetworkParameters) -> Result<()> {
        check_len("network input dimension", self.set.dim(), params.spec().input_dim)
    }

    fn record(&self, params: &NetworkParameters) -> Result<(Tape, Vec<Jet>)> {
        self.check_params(params)?;
        let tape = Tape::record(params, self.set.coords());
        let jets: Vec<Jet> = (0..tape.points())
            .map(|j| tape.jet(j, &self.cutoffs[j]))
            .collect();
        if jets.iter().all(Jet::is_finite) {
            Ok((tape, jets))
        } else {
            Err(Error::NonFinite("forward jet"))
        }
    }

    pub fn jets(&self, params: &NetworkParameters) -> Result<Vec<Jet>> {
        self.record(params).map(|(_, jets)| jets)
    }

    pub fn loss(&self, params: &NetworkParameters, z: &MultiplierField) -> Result<f64> {
        let jets = self.jets(params)?;
        self.loss_from_jets(&jets, z)
    }

    fn loss_from_jets(&self, jets: &[Jet], z: &MultiplierField) -> Result<f64> {
        let loss = discrete_lagrangian_with_targets(
            &self.problem,
            &self.set,
            jets,
            &self.targets,
            z,
            self.variant,
        )?;
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::NonFinite("loss"))
        }
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn loss_and_gradient(
        &self,
        params: &NetworkParameters,
        z: &MultiplierField,
    ) -> Result<(f64, Vec<f64>)> {
        let (tape, jets) = self.record(params)?;
        let loss = self.loss_from_jets(&jets, z)?;
        let beta = match self.variant {
            Variant::Plain => 0.0,
            Variant::Augmented { beta } => beta,
        };
        let mut zs = z.values.iter();
        let seeds: Vec<[f64; 3]> = jets
            .iter()
            .enumerate()
            .map(|(i, jet)| {
                let zi = if self.set.is_interior(i) { zs.next().copied() } else { None };
                point_partials(&self.problem, jet, self.targets[i], self.set.weights()[i], zi, beta)
            })
            .collect();
        let grad = tape.backward(params, &self.cutoffs, &seeds);
        if grad.iter().all(|g| g.is_finite()) {
            Ok((loss, grad))
        } else {
            Err(Error::NonFinite("gradient"))
        }
    }

    pub fn breakdown(&self, params: &NetworkParameters, z: &MultiplierField) -> Result<LossBreakdown> {
        let jets = self.jets(params)?;
        loss_breakdown(&self.problem, &self.set, &jets, &self.targets, z, self.variant)
    }

    /// `K(u_θ, f_θ)` on the interior nodes.
    pub fn residuals(&self, params: &NetworkParameters) -> Result<Vec<f64>> {
        let jets = self.jets(params)?;
        interior_residuals(&self.problem, &self.set, &jets)
    }
}

/// Discrete Lagrangian at `(u_θ, f_θ, z)` and its gradient in `θ`.
pub fn loss_and_gradient(
    params: &NetworkParameters,
    batch: &CollocationSet,
    problem: &ProblemSpec,
    z: &MultiplierField,
    variant: Variant,
) -> Result<(f64, Vec<f64>)> {
    Objective::new(batch.clone(), problem.clone(), variant)?.loss_and_gradient(params, z)
}

/// Central differences of the loss, one parameter at a time.
pub fn finite_difference_gradient(
    params: &NetworkParameters,
    batch: &CollocationSet,
    problem: &ProblemSpec,
    z: &MultiplierField,
    variant: Variant,
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("must be positive, got {h}"),
        });
    }
    let objective = Objective::new(batch.clone(), problem.clone(), variant)?;
    let mut probe = params.clone();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let plus = objective.loss(&probe, z)?;
        probe.as_mut_slice()[i] = orig - h;
        let minus = objective.loss(&probe, z)?;
        probe.as_mut_slice()[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
