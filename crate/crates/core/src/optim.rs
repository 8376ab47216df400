//! First-order optimisers acting on flat parameter vectors.

use crate::error::{check_len, Error, Result};
use crate::net::NetworkParameters;

/// Moment estimates and hyperparameters for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    /// Zero moments with the usual defaults `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_len("adam parameters", self.len(), params.len())?;
        check_len("adam gradient", self.len(), grad.len())?;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    params: &NetworkParameters,
    grad: &[f64],
) -> Result<(AdamState, NetworkParameters)> {
    let mut s = state.clone();
    let mut p = params.clone();
    s.step(p.as_mut_slice(), grad)?;
    if p.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("adam update"));
    }
    Ok((s, p))
}

/// `params − lr · grad`.
pub fn gd_step(params: &NetworkParameters, grad: &[f64], lr: f64) -> Result<NetworkParameters> {
    check_len("gradient", params.len(), grad.len())?;
    let data = params
        .as_slice()
        .iter()
        .zip(grad)
        .map(|(p, g)| p - lr * g)
        .collect();
    params.with_values(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, NetworkSpec};
    use proptest::prelude::*;

    fn params(values: Vec<f64>) -> NetworkParameters {
        let spec = NetworkSpec {
            input_dim: 1,
            hidden: vec![],
            activation: Activation::Identity,
            seed: 0,
        };
        NetworkParameters::from_flat(spec, values).unwrap()
    }

    #[test]
    fn first_adam_step_is_nearly_sign() {
        let p = params(vec![1.0, 2.0, 3.0, 4.0]);
        let g = [0.5, -3.0, 1e-3, 0.0];
        let s = AdamState::new(4, 1e-3);
        let (s1, p1) = adam_step(&s, &p, &g).unwrap();
        assert_eq!(s1.t, 1);
        for i in 0..4 {
            let expected = if g[i] == 0.0 { 0.0 } else { -1e-3 * g[i] / (g[i].abs() + 1e-8) };
            let step = p1.as_slice()[i] - p.as_slice()[i];
            assert!((step - expected).abs() < 1e-15, "{i}: {step} vs {expected}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params_alone() {
        let p = params(vec![0.3, -0.1, 2.0, 1.0]);
        let (_, q) = adam_step(&AdamState::new(4, 0.1), &p, &[0.0; 4]).unwrap();
        assert_eq!(p, q);
        assert_eq!(gd_step(&p, &[0.0; 4], 0.5).unwrap(), p);
    }

    #[test]
    fn repeated_calls_are_identical() {
        let p = params(vec![0.3, -0.1, 2.0, 1.0]);
        let s = AdamState::new(4, 0.01);
        let g = [1.0, -2.0, 0.25, 7.0];
        assert_eq!(adam_step(&s, &p, &g).unwrap(), adam_step(&s, &p, &g).unwrap());
    }

    #[test]
    fn gd_with_unit_rate_and_gradient_equal_params_vanishes() {
        let p = params(vec![0.3, -0.1, 2.0, 1.0]);
        let q = gd_step(&p, p.as_slice(), 1.0).unwrap();
        assert!(q.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let p = params(vec![0.0; 4]);
        assert!(adam_step(&AdamState::new(3, 0.1), &p, &[0.0; 4]).is_err());
        assert!(adam_step(&AdamState::new(4, 0.1), &p, &[0.0; 3]).is_err());
        assert!(gd_step(&p, &[0.0; 5], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn adam_step_with_steady_gradient_is_at_most_lr(
            g in prop::collection::vec(-1e3f64..1e3, 4),
            steps in 1usize..50,
            lr in 1e-5f64..1e-1,
        ) {
            let mut s = AdamState::new(4, lr);
            let mut p = vec![0.0; 4];
            for _ in 0..steps {
                let before = p.clone();
                s.step(&mut p, &g).unwrap();
                for (a, b) in p.iter().zip(&before) {
                    prop_assert!((a - b).abs() <= lr * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn adam_step_is_bounded(
            g in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 1..30),
            lr in 1e-5f64..1e-1,
        ) {
            let mut s = AdamState::new(4, lr);
            let mut p = vec![0.0; 4];
            for grad in &g {
                let before = p.clone();
                s.step(&mut p, grad).unwrap();
                prop_assert!(s.v.iter().all(|&v| v >= 0.0));
                for (a, b) in p.iter().zip(&before) {
                    // |m̂|/√v̂ ≤ (1−β₁)/√(1−β₂) in the worst case; for t = 1 it is 1
                    prop_assert!((a - b).abs() <= lr * 3.2);
                }
            }
        }

        #[test]
        fn gd_is_linear_in_gradient(
            p in prop::collection::vec(-10.0f64..10.0, 4),
            g1 in prop::collection::vec(-10.0f64..10.0, 4),
            g2 in prop::collection::vec(-10.0f64..10.0, 4),
            lr in 0.0f64..1.0,
        ) {
            let base = params(p);
            let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
            let once = gd_step(&base, &sum, lr).unwrap();
            let twice = gd_step(&gd_step(&base, &g1, lr).unwrap(), &g2, lr).unwrap();
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
            }
        }
    }
}
