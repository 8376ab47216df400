//! The two-output network ansatz `x ↦ (u_θ(x), f_θ(x))`.
//!
//! A fully connected network `C_L ∘ σ ∘ … ∘ σ ∘ C_1` produces raw outputs
//! `(n_u, n_f)`. The state is `u = b · n_u` with `b` the boundary cutoff, so
//! zero Dirichlet data holds exactly; the control is `f = n_f`.
//!
//! Parameters are stored as one flat vector. Each layer contributes its weight
//! matrix `W_k` (`d_{k+1} × d_k`, column-major) followed by its bias `b_k`.

mod checkpoint;
mod jet;
mod loss;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use jet::{forward_jet, forward_jets, Jet};
pub use loss::{finite_difference_gradient, loss_and_gradient, Objective};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of network outputs: the state channel and the control channel.
pub const OUTPUTS: usize = 2;

/// Smooth pointwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Sin,
    /// Mostly useful for tests: makes the network affine.
    Identity,
}

impl Activation {
    /// `(σ, σ', σ'', σ''')` at `z`.
    #[inline]
    pub fn derivatives(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let s = 1.0 - t * t;
                [t, s, -2.0 * t * s, -2.0 * s * (1.0 - 3.0 * t * t)]
            }
            Activation::Sin => {
                let (s, c) = z.sin_cos();
                [s, c, -s, -c]
            }
            Activation::Identity => [z, 1.0, 0.0, 0.0],
        }
    }

    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sin => z.sin(),
            Activation::Identity => z,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "sin" => Some(Activation::Sin),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Tanh => 0,
            Activation::Sin => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Sin),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Architecture of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkSpec {
    /// Three hidden layers of 64 tanh units.
    pub fn default_for(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![64, 64, 64],
            activation: Activation::Tanh,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.input_dim) {
            return Err(Error::InvalidParameter {
                name: "input_dim",
                reason: format!("must be 1 or 2, got {}", self.input_dim),
            });
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidParameter {
                name: "hidden",
                reason: "every layer width must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Layer widths `d_1 … d_{L+1}`, input first, output last.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(OUTPUTS);
        dims
    }

    /// `dim 𝒩 = Σ_k d_{k+1} (d_k + 1)`.
    pub fn parameter_count(&self) -> usize {
        self.layer_dims()
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }
}

/// Location of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerLayout {
    pub inputs: usize,
    pub outputs: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

/// All weights and biases `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    spec: NetworkSpec,
    layers: Vec<LayerLayout>,
    data: Vec<f64>,
}

fn layouts(spec: &NetworkSpec) -> Vec<LayerLayout> {
    let mut offset = 0;
    spec.layer_dims()
        .windows(2)
        .map(|w| {
            let l = LayerLayout {
                inputs: w[0],
                outputs: w[1],
                weight_offset: offset,
                bias_offset: offset + w[0] * w[1],
            };
            offset += w[1] * (w[0] + 1);
            l
        })
        .collect()
}

impl NetworkParameters {
    /// Wraps a flat parameter vector laid out as described in the module docs.
    pub fn from_flat(spec: NetworkSpec, data: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        crate::error::check_len("flat parameters", spec.parameter_count(), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        let layers = layouts(&spec);
        Ok(Self { spec, layers, data })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn layers(&self) -> &[LayerLayout] {
        &self.layers
    }

    /// Same architecture, different values.
    pub fn with_values(&self, data: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.spec.clone(), data)
    }

    /// Weight `W_k[row, col]` of layer `k` (0-based).
    pub fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        let l = &self.layers[layer];
        self.data[l.weight_offset + col * l.outputs + row]
    }

    pub fn weight_mut(&mut self, layer: usize, row: usize, col: usize) -> &mut f64 {
        let l = self.layers[layer];
        &mut self.data[l.weight_offset + col * l.outputs + row]
    }

    pub fn bias_mut(&mut self, layer: usize, row: usize) -> &mut f64 {
        let l = self.layers[layer];
        &mut self.data[l.bias_offset + row]
    }

    /// Raw outputs `(n_u, n_f)` by a plain layer-by-layer evaluation, without
    /// any derivative bookkeeping.
    pub fn evaluate_raw(&self, point: &[f64]) -> [f64; OUTPUTS] {
        let act = self.spec.activation;
        let last = self.layers.len() - 1;
        let mut current = point.to_vec();
        for (k, l) in self.layers.iter().enumerate() {
            let mut next = self.data[l.bias_offset..l.bias_offset + l.outputs].to_vec();
            for (col, &a) in current.iter().enumerate() {
                let w = &self.data[l.weight_offset + col * l.outputs..][..l.outputs];
                for (n, wv) in next.iter_mut().zip(w) {
                    *n += wv * a;
                }
            }
            if k != last {
                next.iter_mut().for_each(|v| *v = act.value(*v));
            }
            current = next;
        }
        [current[0], current[1]]
    }
}

/// Draws weights from `U(−r, r)` with `r = sqrt(3 / fan_in)`; biases start at zero.
pub fn init_network(spec: &NetworkSpec) -> Result<NetworkParameters> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = vec![0.0; spec.parameter_count()];
    for l in layouts(spec) {
        let r = (3.0 / l.inputs as f64).sqrt();
        let dist = Uniform::new_inclusive(-r, r).expect("finite bounds");
        for w in &mut data[l.weight_offset..l.bias_offset] {
            *w = dist.sample(&mut rng);
        }
    }
    NetworkParameters::from_flat(spec.clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(input_dim: usize, hidden: Vec<usize>, seed: u64) -> NetworkSpec {
        NetworkSpec {
            input_dim,
            hidden,
            activation: Activation::Tanh,
            seed,
        }
    }

    #[test]
    fn parameter_counts() {
        // (1·8 + 8) + (8·8 + 8) + (8·2 + 2)
        assert_eq!(init_network(&spec(1, vec![8, 8], 0)).unwrap().len(), 106);
        // (2·4 + 4) + (4·4 + 4) + (4·4 + 4) + (4·2 + 2)
        assert_eq!(init_network(&spec(2, vec![4, 4, 4], 0)).unwrap().len(), 62);
        assert_eq!(spec(1, vec![64, 64, 64], 0).parameter_count(), 8578);
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let a = init_network(&spec(2, vec![5, 7], 42)).unwrap();
        let b = init_network(&spec(2, vec![5, 7], 42)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = init_network(&spec(2, vec![5, 7], 43)).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
        for l in a.layers() {
            assert!(a.as_slice()[l.bias_offset..l.bias_offset + l.outputs]
                .iter()
                .all(|&v| v == 0.0));
            let r = (3.0 / l.inputs as f64).sqrt();
            assert!(a.as_slice()[l.weight_offset..l.bias_offset]
                .iter()
                .all(|w| w.abs() <= r));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(init_network(&spec(3, vec![4], 0)).is_err());
        assert!(init_network(&spec(1, vec![4, 0], 0)).is_err());
        let s = spec(1, vec![2], 0);
        assert!(NetworkParameters::from_flat(s.clone(), vec![0.0; 3]).is_err());
        let mut bad = vec![0.0; s.parameter_count()];
        bad[0] = f64::NAN;
        assert!(NetworkParameters::from_flat(s, bad).is_err());
    }

    #[test]
    fn affine_network_evaluates_linear_map() {
        let s = NetworkSpec {
            input_dim: 1,
            hidden: vec![],
            activation: Activation::Identity,
            seed: 0,
        };
        let mut p = NetworkParameters::from_flat(s, vec![0.0; 4]).unwrap();
        *p.weight_mut(0, 0, 0) = 3.0;
        *p.weight_mut(0, 1, 0) = -1.0;
        *p.bias_mut(0, 1) = 0.5;
        assert_eq!(p.evaluate_raw(&[2.0]), [6.0, -1.5]);
    }

    #[test]
    fn tanh_derivatives_match_differences() {
        let h = 1e-5;
        for &z in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
            let d = Activation::Tanh.derivatives(z);
            let dp = Activation::Tanh.derivatives(z + h);
            let dm = Activation::Tanh.derivatives(z - h);
            for k in 0..3 {
                let fd = (dp[k] - dm[k]) / (2.0 * h);
                assert!((fd - d[k + 1]).abs() < 1e-8, "order {k} at {z}");
            }
        }
    }
}
