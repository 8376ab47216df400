//! Constraint residuals, cost densities, the discrete Lagrangian and
//! multiplier updates.
//!
//! The Lagrangian is `L = J + ⟨K, z⟩` with the coercive cost
//!
//! ```text
//! J(u, f) = ½‖u − 𝒟‖² + (α/4)‖f‖² + (α/4)‖R u‖²
//! ```
//!
//! where `R u = Δu` for the Poisson constraint `K = Δu + f` and `R u = A u` for
//! the Allen-Cahn constraint `K = A u − f`, `A u = −Δu − ε⁻² u (1 − u²)`.
//! Multiplier terms only live on interior collocation points.

use std::f64::consts::PI;

use crate::domain::{CollocationSet, GridField};
use crate::error::{check_len, Error, Result};
use crate::net::Jet;
use crate::oracle::exact;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind {
    Poisson,
    AllenCahn { epsilon: f64 },
}

/// Desired state `𝒟`.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// `(1 + απ⁴) sin πx` on `(0, 1)`.
    Sine1D,
    Constant(f64),
    /// `(1 + 4απ⁴) sin πx sin πy` on `(0, 1)²`.
    Sine2D,
    /// Target whose Allen-Cahn optimum is `u* = sin πx`.
    AcSine,
    /// `−1` on `(0, ⅓) ∪ (⅔, 1)`, `1` on `(⅓, ⅔)`, `0` elsewhere.
    Step,
    /// Values given per collocation point.
    SampledGrid(GridField),
}

/// Tolerance for snapping step-target samples onto a jump.
const JUMP_TOL: f64 = 1e-12;

fn step_value(x: f64) -> f64 {
    let (a, b) = (1.0 / 3.0, 2.0 / 3.0);
    if (x - a).abs() <= JUMP_TOL || (x - b).abs() <= JUMP_TOL {
        0.0
    } else if x > a && x < b {
        1.0
    } else if (x > 0.0 && x < a) || (x > b && x < 1.0) {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ConstraintKind,
    pub alpha: f64,
    pub target: TargetSpec,
}

impl ProblemSpec {
    pub fn poisson(alpha: f64, target: TargetSpec) -> Self {
        Self {
            kind: ConstraintKind::Poisson,
            alpha,
            target,
        }
    }

    pub fn allen_cahn(alpha: f64, epsilon: f64, target: TargetSpec) -> Self {
        Self {
            kind: ConstraintKind::AllenCahn { epsilon },
            alpha,
            target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be positive, got {}", self.alpha),
            });
        }
        if let ConstraintKind::AllenCahn { epsilon } = self.kind {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("must be positive, got {epsilon}"),
                });
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self.kind {
            ConstraintKind::AllenCahn { epsilon } => Some(epsilon),
            ConstraintKind::Poisson => None,
        }
    }

    /// `𝒟` at every node of `set`.
    pub fn target_values(&self, set: &CollocationSet) -> Result<Vec<f64>> {
        let alpha = self.alpha;
        let values = match &self.target {
            TargetSpec::Sine1D => set
                .points()
                .map(|p| (1.0 + alpha * PI.powi(4)) * (PI * p[0]).sin())
                .collect(),
            TargetSpec::Constant(c) => vec![*c; set.len()],
            TargetSpec::Sine2D => {
                if set.dim() != 2 {
                    return Err(Error::Precondition("Sine2D target needs a 2D domain".into()));
                }
                set.points()
                    .map(|p| (1.0 + 4.0 * alpha * PI.powi(4)) * (PI * p[0]).sin() * (PI * p[1]).sin())
                    .collect()
            }
            TargetSpec::AcSine => {
                let eps = self.epsilon().ok_or_else(|| {
                    Error::Precondition("AcSine target needs an Allen-Cahn constraint".into())
                })?;
                set.points()
                    .map(|p| exact::ac_sine_target(p[0], alpha, eps))
                    .collect()
            }
            TargetSpec::Step => set.points().map(|p| step_value(p[0])).collect(),
            TargetSpec::SampledGrid(field) => {
                check_len("sampled target", set.len(), field.len())?;
                if field.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("sampled target"));
                }
                field.values.clone()
            }
        };
        Ok(values)
    }
}

/// Plain Lagrangian or augmented with `(β/2)‖K‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Variant {
    #[default]
    Plain,
    Augmented { beta: f64 },
}

impl Variant {
    fn beta(self) -> f64 {
        match self {
            Variant::Plain => 0.0,
            Variant::Augmented { beta } => beta,
        }
    }
}

/// Lagrange multiplier on the interior nodes, with its ascent step `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierField {
    pub values: Vec<f64>,
    pub rho: f64,
}

impl MultiplierField {
    pub fn zeros(interior_points: usize, rho: f64) -> Self {
        Self {
            values: vec![0.0; interior_points],
            rho,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spreads the interior values over all nodes of `set`, zero on `∂Ω`.
    pub fn on_grid(&self, set: &CollocationSet) -> Result<Vec<f64>> {
        check_len("multiplier on interior", set.interior_count(), self.len())?;
        let mut it = self.values.iter();
        Ok(set
            .interior_mask()
            .iter()
            .map(|&inside| if inside { *it.next().unwrap() } else { 0.0 })
            .collect())
    }
}

/// `R u`: `Δu` for Poisson, `A u` for Allen-Cahn.
fn regularised_operator(kind: ConstraintKind, jet: &Jet) -> f64 {
    match kind {
        ConstraintKind::Poisson => jet.lap_u,
        ConstraintKind::AllenCahn { epsilon } => {
            -jet.lap_u - jet.u * (1.0 - jet.u * jet.u) / (epsilon * epsilon)
        }
    }
}

/// Pointwise residual `K(u, f)`.
pub fn constraint_residual(problem: &ProblemSpec, jet: &Jet) -> f64 {
    match problem.kind {
        ConstraintKind::Poisson => jet.lap_u + jet.f,
        ConstraintKind::AllenCahn { .. } => regularised_operator(problem.kind, jet) - jet.f,
    }
}

/// `½(u − 𝒟)² + (α/4) f² + (α/4)(R u)²`.
pub fn cost_density(problem: &ProblemSpec, jet: &Jet, target: f64) -> f64 {
    let q = problem.alpha / 4.0;
    let r = regularised_operator(problem.kind, jet);
    0.5 * (jet.u - target).powi(2) + q * jet.f * jet.f + q * r * r
}

/// Contribution of one node to the discrete Lagrangian.
fn point_lagrangian(
    problem: &ProblemSpec,
    jet: &Jet,
    target: f64,
    weight: f64,
    multiplier: Option<f64>,
    beta: f64,
) -> f64 {
    let mut density = cost_density(problem, jet, target);
    if let Some(z) = multiplier {
        let k = constraint_residual(problem, jet);
        density += z * k + 0.5 * beta * k * k;
    }
    weight * density
}

/// `∂ℓ/∂u`, `∂ℓ/∂f`, `∂ℓ/∂Δu` of one node's contribution.
pub(crate) fn point_partials(
    problem: &ProblemSpec,
    jet: &Jet,
    target: f64,
    weight: f64,
    multiplier: Option<f64>,
    beta: f64,
) -> [f64; 3] {
    let half_alpha = 0.5 * problem.alpha;
    let r = regularised_operator(problem.kind, jet);
    // c = ∂ℓ/∂K per unit weight
    let c = match multiplier {
        Some(z) => z + beta * constraint_residual(problem, jet),
        None => 0.0,
    };
    match problem.kind {
        ConstraintKind::Poisson => [
            weight * (jet.u - target),
            weight * (half_alpha * jet.f + c),
            weight * (half_alpha * r + c),
        ],
        ConstraintKind::AllenCahn { epsilon } => {
            let dr_du = -(1.0 - 3.0 * jet.u * jet.u) / (epsilon * epsilon);
            let s = half_alpha * r + c;
            [
                weight * (jet.u - target + s * dr_du),
                weight * (half_alpha * jet.f - c),
                -weight * s,
            ]
        }
    }
}

/// The discrete Lagrangian split into the quantities reported per update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// `½ Σ w (u − 𝒟)²`
    pub misfit: f64,
    /// `Σ w z K`, plus `(β/2) Σ w K²` for the augmented variant.
    pub multiplier_term: f64,
    /// `(α/4) Σ w f²`
    pub control_norm_term: f64,
    /// `(α/4) Σ w (R u)²`
    pub regulariser_term: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.misfit + self.multiplier_term + self.control_norm_term + self.regulariser_term
    }

    pub fn is_finite(&self) -> bool {
        self.total().is_finite()
    }
}

fn check_inputs(set: &CollocationSet, jets: &[Jet], targets: &[f64], z: &MultiplierField) -> Result<()> {
    check_len("jets", set.len(), jets.len())?;
    check_len("targets", set.len(), targets.len())?;
    check_len("multiplier on interior", set.interior_count(), z.len())
}

/// `Σ_y w_y [cost density] + Σ_{y interior} w_y (z K + (β/2) K²)`, accumulated
/// node by node in index order.
pub fn discrete_lagrangian(
    problem: &ProblemSpec,
    set: &CollocationSet,
    jets: &[Jet],
    z: &MultiplierField,
    variant: Variant,
) -> Result<f64> {
    let targets = problem.target_values(set)?;
    discrete_lagrangian_with_targets(problem, set, jets, &targets, z, variant)
}

pub(crate) fn discrete_lagrangian_with_targets(
    problem: &ProblemSpec,
    set: &CollocationSet,
    jets: &[Jet],
    targets: &[f64],
    z: &MultiplierField,
    variant: Variant,
) -> Result<f64> {
    check_inputs(set, jets, targets, z)?;
    let beta = variant.beta();
    let mut zs = z.values.iter();
    let mut total = 0.0;
    for (i, jet) in jets.iter().enumerate() {
        let zi = if set.is_interior(i) { zs.next().copied() } else { None };
        total += point_lagrangian(problem, jet, targets[i], set.weights()[i], zi, beta);
    }
    Ok(total)
}

/// The four reported components of the discrete Lagrangian.
pub fn loss_breakdown(
    problem: &ProblemSpec,
    set: &CollocationSet,
    jets: &[Jet],
    targets: &[f64],
    z: &MultiplierField,
    variant: Variant,
) -> Result<LossBreakdown> {
    check_inputs(set, jets, targets, z)?;
    let beta = variant.beta();
    let q = problem.alpha / 4.0;
    let mut zs = z.values.iter();
    let mut out = LossBreakdown::default();
    for (i, jet) in jets.iter().enumerate() {
        let w = set.weights()[i];
        let r = regularised_operator(problem.kind, jet);
        out.misfit += w * 0.5 * (jet.u - targets[i]).powi(2);
        out.control_norm_term += w * q * jet.f * jet.f;
        out.regulariser_term += w * q * r * r;
        if set.is_interior(i) {
            let zi = *zs.next().unwrap();
            let k = constraint_residual(problem, jet);
            out.multiplier_term += w * (zi * k + 0.5 * beta * k * k);
        }
    }
    Ok(out)
}

/// `K` at the interior nodes, in interior order.
pub fn interior_residuals(problem: &ProblemSpec, set: &CollocationSet, jets: &[Jet]) -> Result<Vec<f64>> {
    check_len("jets", set.len(), jets.len())?;
    Ok(jets
        .iter()
        .enumerate()
        .filter(|(i, _)| set.is_interior(*i))
        .map(|(_, jet)| constraint_residual(problem, jet))
        .collect())
}

fn check_step(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("step must be positive, got {rho}"),
        })
    }
}

/// `z' = z + ρ K`.
pub fn multiplier_update(z: &MultiplierField, residuals: &[f64], rho: f64) -> Result<MultiplierField> {
    check_len("residuals", z.len(), residuals.len())?;
    check_step(rho)?;
    Ok(MultiplierField {
        values: z.values.iter().zip(residuals).map(|(zi, k)| zi + rho * k).collect(),
        rho: z.rho,
    })
}

/// `z' = P⁺(z + ρ K) = max(z + ρ K, 0)`.
pub fn projected_multiplier_update(
    z: &MultiplierField,
    residuals: &[f64],
    rho: f64,
) -> Result<MultiplierField> {
    if let Some(v) = z.values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Precondition(format!(
            "projected update needs a nonnegative multiplier, found {v}"
        )));
    }
    let mut out = multiplier_update(z, residuals, rho)?;
    out.values.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(out)
}
