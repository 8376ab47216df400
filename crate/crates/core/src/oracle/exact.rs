//! Closed-form saddle points.

use std::f64::consts::PI;

use nalgebra::Complex;

use crate::domain::CollocationSet;
use crate::error::{Error, Result};

/// A problem with a known optimal state `u*` and control `f*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactSolution {
    /// `u* = sin πx`, `f* = π² sin πx`.
    Sine1D,
    /// `α u'''' + u = 1` with `u = u'' = 0` at both ends.
    BoundaryLayer { alpha: f64 },
    /// `u* = sin πx sin πy`, `f* = 2π² u*`.
    Sine2D,
    /// `u* = sin πx` under the Allen-Cahn constraint.
    AcSine { epsilon: f64 },
}

impl ExactSolution {
    pub fn dim(&self) -> usize {
        match self {
            ExactSolution::Sine2D => 2,
            _ => 1,
        }
    }

    /// `(u*(x), f*(x))`.
    pub fn eval(&self, point: &[f64]) -> (f64, f64) {
        let x = point[0];
        match *self {
            ExactSolution::Sine1D => {
                let s = (PI * x).sin();
                (s, PI * PI * s)
            }
            ExactSolution::BoundaryLayer { alpha } => {
                let layer = BoundaryLayer::new(alpha);
                let [v, _, v2, _, _] = layer.layer_derivatives(x);
                (1.0 - v, v2)
            }
            ExactSolution::Sine2D => {
                let s = (PI * x).sin() * (PI * point[1]).sin();
                (s, 2.0 * PI * PI * s)
            }
            ExactSolution::AcSine { epsilon } => {
                let (s, c) = (PI * x).sin_cos();
                (s, s * (PI * PI - c * c / (epsilon * epsilon)))
            }
        }
    }

    /// `u*` and `f*` at every node of `set`.
    pub fn sample(&self, set: &CollocationSet) -> Result<(Vec<f64>, Vec<f64>)> {
        if set.dim() != self.dim() {
            return Err(Error::Precondition(format!(
                "exact solution is {}-dimensional but the grid is {}-dimensional",
                self.dim(),
                set.dim()
            )));
        }
        Ok(set.points().map(|p| self.eval(p)).unzip())
    }
}

/// `(u*, f*)` for `sol` at `point`.
pub fn exact_eval(sol: &ExactSolution, point: &[f64]) -> (f64, f64) {
    sol.eval(point)
}

/// Target `𝒟` whose Allen-Cahn saddle point is `u* = sin πx`.
pub fn ac_sine_target(x: f64, alpha: f64, epsilon: f64) -> f64 {
    let (s, c) = (PI * x).sin_cos();
    let inv = 1.0 / (epsilon * epsilon);
    let pi2 = PI * PI;
    let control = s * (pi2 - inv * c * c);
    let control_dd = -pi2 * pi2 * s - inv * (-pi2 * s + 3.0 * pi2 * s * s * s - 6.0 * pi2 * s * c * c);
    s + alpha * (-control_dd - inv * (1.0 - 3.0 * s * s) * control)
}

/// `v = 1 − u*` written as `P(x) + P(1 − x)` with
/// `P(x) = Re[(a − ib) e^{μx}]`, `μ = ω(−1 + i)`.
///
/// Only decaying exponentials appear, so this stays accurate for very thin
/// layers where the hyperbolic form overflows or cancels.
#[derive(Debug, Clone, Copy)]
struct BoundaryLayer {
    mu: Complex<f64>,
    coeff: Complex<f64>,
}

impl BoundaryLayer {
    fn new(alpha: f64) -> Self {
        let omega = (4.0 * alpha).powf(-0.25);
        let e = (-omega).exp();
        let (s, c) = omega.sin_cos();
        let denom = 1.0 + 2.0 * e * c + e * e;
        let a = (1.0 + e * c) / denom;
        let b = e * s / denom;
        Self {
            mu: Complex::new(-omega, omega),
            coeff: Complex::new(a, -b),
        }
    }

    /// `v, v', v'', v''', v''''` at `x`.
    fn layer_derivatives(&self, x: f64) -> [f64; 5] {
        let left = self.coeff * (self.mu * x).exp();
        let right = self.coeff * (self.mu * (1.0 - x)).exp();
        let mut out = [0.0; 5];
        let mut l = left;
        let mut r = right;
        for (k, o) in out.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *o = l.re + sign * r.re;
            l *= self.mu;
            r *= self.mu;
        }
        out
    }
}

/// `u*` of the boundary-layer problem written with `cosh`, `sinh`, `cos`, `sin`,
/// together with its derivatives up to fourth order in `x`.
///
/// The coefficient vector is over the basis `(Cc, Sc, Cs, Ss)` of products of
/// hyperbolic and circular functions of `y = ωx`; differentiation in `y` is a
/// fixed linear map on that basis.
pub fn boundary_layer_hyperbolic(alpha: f64, x: f64) -> [f64; 5] {
    let omega = (4.0 * alpha).powf(-0.25);
    let denom = omega.cosh() + omega.cos();
    let a = omega.sinh() / denom;
    let b = omega.sin() / denom;
    let y = omega * x;
    let (ch, sh) = (y.cosh(), y.sinh());
    let (c, s) = (y.cos(), y.sin());
    let basis = [ch * c, sh * c, ch * s, sh * s];

    let mut coeffs = [-1.0, a, -b, 0.0];
    let mut out = [0.0; 5];
    let mut scale = 1.0;
    for (k, o) in out.iter_mut().enumerate() {
        let v: f64 = coeffs.iter().zip(&basis).map(|(c, g)| c * g).sum();
        *o = scale * v + if k == 0 { 1.0 } else { 0.0 };
        let [c1, c2, c3, c4] = coeffs;
        coeffs = [c2 + c3, c1 + c4, c4 - c1, c3 - c2];
        scale *= omega;
    }
    out
}

/// The control of the boundary-layer problem in the hyperbolic form,
/// `f* = −2ω² (Ss − A·Cs − B·Sc)`.
pub fn boundary_layer_control_hyperbolic(alpha: f64, x: f64) -> f64 {
    let omega = (4.0 * alpha).powf(-0.25);
    let denom = omega.cosh() + omega.cos();
    let a = omega.sinh() / denom;
    let b = omega.sin() / denom;
    let y = omega * x;
    -2.0 * omega * omega
        * (y.sinh() * y.sin() - a * y.cosh() * y.sin() - b * y.sinh() * y.cos())
}

/// Summary of [`residual_check_boundary_layer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLayerCheck {
    /// `max |α u'''' + u − 1|` over the samples.
    pub residual: f64,
    /// `max(|u*(0)|, |u*(1)|)`.
    pub boundary: f64,
    /// `max |f* + u*''|` over the samples.
    pub control_identity: f64,
}

/// Checks the hyperbolic closed form at `n_samples` equispaced interior points.
pub fn residual_check_boundary_layer(alpha: f64, n_samples: usize) -> Result<BoundaryLayerCheck> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be positive, got {alpha}"),
        });
    }
    let mut residual = 0.0f64;
    let mut control_identity = 0.0f64;
    for i in 1..=n_samples {
        let x = i as f64 / (n_samples + 1) as f64;
        let d = boundary_layer_hyperbolic(alpha, x);
        residual = residual.max((alpha * d[4] + d[0] - 1.0).abs());
        control_identity = control_identity.max((boundary_layer_control_hyperbolic(alpha, x) + d[2]).abs());
    }
    let boundary = boundary_layer_hyperbolic(alpha, 0.0)[0]
        .abs()
        .max(boundary_layer_hyperbolic(alpha, 1.0)[0].abs());
    Ok(BoundaryLayerCheck {
        residual,
        boundary,
        control_identity,
    })
}
