//! Forward jet propagation and the matching reverse sweep.
//!
//! Every point is carried through the network as `1 + 2d` columns: the value,
//! then for each axis `i` the pair `(∂_i, ∂_ii)`. Affine maps act on all
//! columns at once (the bias only touches the value column); the activation
//! applies the chain rule
//!
//! ```text
//! a    = σ(z)
//! a_i  = σ'(z) z_i
//! a_ii = σ''(z) z_i² + σ'(z) z_ii
//! ```
//!
//! Columns are grouped by block, so a whole batch of points turns each layer
//! into a single matrix product.

use nalgebra::DMatrix;

use super::{NetworkParameters, OUTPUTS};
use crate::domain::CutoffJet;
use crate::error::{check_len, Error, Result};

/// State and control at a point, with the state's gradient and Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub f: f64,
    pub grad_u: Vec<f64>,
    pub lap_u: f64,
}

impl Jet {
    pub fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.f.is_finite()
            && self.lap_u.is_finite()
            && self.grad_u.iter().all(|g| g.is_finite())
    }
}

/// Column-major operand with explicit strides.
#[derive(Clone, Copy)]
struct Operand<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: usize,
    col_stride: usize,
}

impl<'a> Operand<'a> {
    fn of(m: &'a DMatrix<f64>) -> Self {
        Self {
            data: m.as_slice(),
            rows: m.nrows(),
            cols: m.ncols(),
            row_stride: 1,
            col_stride: m.nrows(),
        }
    }

    fn transposed(self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
            ..self
        }
    }

    fn weights(params: &'a NetworkParameters, layer: usize) -> Self {
        let l = params.layers()[layer];
        Self {
            data: &params.as_slice()[l.weight_offset..l.bias_offset],
            rows: l.outputs,
            cols: l.inputs,
            row_stride: 1,
            col_stride: l.outputs,
        }
    }
}

/// `a · b` into a fresh column-major matrix.
fn product(a: Operand<'_>, b: Operand<'_>) -> DMatrix<f64> {
    assert_eq!(a.cols, b.rows, "inner dimensions");
    assert_eq!(a.data.len(), a.rows * a.cols);
    assert_eq!(b.data.len(), b.rows * b.cols);
    let mut c = DMatrix::zeros(a.rows, b.cols);
    if a.rows == 0 || b.cols == 0 || a.cols == 0 {
        return c;
    }
    let c_rows = c.nrows();
    // SAFETY: the asserts above guarantee every strided index stays inside
    // the operand slices, and `c` is an `a.rows × b.cols` column-major buffer.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            0.0,
            c.as_mut_slice().as_mut_ptr(),
            1,
            c_rows as isize,
        );
    }
    c
}

/// Recorded forward pass over a batch of points.
pub(crate) struct Tape {
    points: usize,
    dim: usize,
    /// Layer inputs: `inputs[k]` feeds affine layer `k`.
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<DMatrix<f64>>,
    out: DMatrix<f64>,
}

impl Tape {
    pub(crate) fn record(params: &NetworkParameters, coords: &[f64]) -> Self {
        let dim = params.spec().input_dim;
        let points = coords.len() / dim;
        let blocks = 1 + 2 * dim;
        let cols = blocks * points;
        let act = params.spec().activation;

        let mut input = DMatrix::zeros(dim, cols);
        for j in 0..points {
            for i in 0..dim {
                input[(i, j)] = coords[j * dim + i];
                input[(i, (1 + 2 * i) * points + j)] = 1.0;
            }
        }

        let n_layers = params.layers().len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers - 1);
        inputs.push(input);
        let mut out = DMatrix::zeros(OUTPUTS, cols);

        for (k, layer) in params.layers().iter().enumerate() {
            let mut z = product(Operand::weights(params, k), Operand::of(&inputs[k]));
            let bias = &params.as_slice()[layer.bias_offset..layer.bias_offset + layer.outputs];
            {
                let zs = z.as_mut_slice();
                for j in 0..points {
                    let col = &mut zs[j * layer.outputs..(j + 1) * layer.outputs];
                    col.iter_mut().zip(bias).for_each(|(v, b)| *v += b);
                }
            }
            if k + 1 == n_layers {
                out = z;
                break;
            }
            let rows = layer.outputs;
            let mut a = DMatrix::zeros(rows, cols);
            {
                let zs = z.as_slice();
                let asl = a.as_mut_slice();
                for j in 0..points {
                    for r in 0..rows {
                        let [s0, s1, s2, _] = act.derivatives(zs[j * rows + r]);
                        asl[j * rows + r] = s0;
                        for i in 0..dim {
                            let c1 = ((1 + 2 * i) * points + j) * rows + r;
                            let c2 = ((2 + 2 * i) * points + j) * rows + r;
                            let zp = zs[c1];
                            let zpp = zs[c2];
                            asl[c1] = s1 * zp;
                            asl[c2] = s2 * zp * zp + s1 * zpp;
                        }
                    }
                }
            }
            pre.push(z);
            inputs.push(a);
        }

        Self {
            points,
            dim,
            inputs,
            pre,
            out,
        }
    }

    pub(crate) fn points(&self) -> usize {
        self.points
    }

    /// Raw output `channel` at point `j`: value, first and second derivatives per axis.
    fn raw(&self, channel: usize, j: usize) -> (f64, [f64; 2], [f64; 2]) {
        let mut first = [0.0; 2];
        let mut second = [0.0; 2];
        for i in 0..self.dim {
            first[i] = self.out[(channel, (1 + 2 * i) * self.points + j)];
            second[i] = self.out[(channel, (2 + 2 * i) * self.points + j)];
        }
        (self.out[(channel, j)], first, second)
    }

    /// Applies the cutoff product rule to the state channel.
    pub(crate) fn jet(&self, j: usize, cutoff: &CutoffJet) -> Jet {
        let (n, dn, ddn) = self.raw(0, j);
        let b = cutoff.value;
        let mut grad_u = vec![0.0; self.dim];
        let mut lap_n = 0.0;
        let mut cross = 0.0;
        for i in 0..self.dim {
            grad_u[i] = cutoff.grad[i] * n + b * dn[i];
            lap_n += ddn[i];
            cross += cutoff.grad[i] * dn[i];
        }
        Jet {
            u: b * n,
            f: self.out[(1, j)],
            grad_u,
            lap_u: b * lap_n + 2.0 * cross + n * cutoff.lap,
        }
    }

    /// Reverse sweep. `seeds[j] = (∂ℓ/∂u, ∂ℓ/∂f, ∂ℓ/∂Δu)` at point `j`;
    /// returns `∂ℓ/∂θ` in the flat parameter layout.
    pub(crate) fn backward(
        &self,
        params: &NetworkParameters,
        cutoffs: &[CutoffJet],
        seeds: &[[f64; 3]],
    ) -> Vec<f64> {
        let p = self.points;
        let dim = self.dim;
        let cols = (1 + 2 * dim) * p;
        let act = params.spec().activation;

        let mut adj = DMatrix::zeros(OUTPUTS, cols);
        for (j, (c, &[du, df, dlap])) in cutoffs.iter().zip(seeds).enumerate() {
            adj[(0, j)] = du * c.value + dlap * c.lap;
            adj[(1, j)] = df;
            for i in 0..dim {
                adj[(0, (1 + 2 * i) * p + j)] = 2.0 * dlap * c.grad[i];
                adj[(0, (2 + 2 * i) * p + j)] = dlap * c.value;
            }
        }

        let mut grad = vec![0.0; params.len()];
        let n_layers = params.layers().len();
        for k in (0..n_layers).rev() {
            let layer = params.layers()[k];
            // adj holds ∂ℓ/∂z_k for the affine output of layer k.
            let gw = product(Operand::of(&adj), Operand::of(&self.inputs[k]).transposed());
            grad[layer.weight_offset..layer.bias_offset].copy_from_slice(gw.as_slice());
            let gb = &mut grad[layer.bias_offset..layer.bias_offset + layer.outputs];
            let asl = adj.as_slice();
            for j in 0..p {
                let col = &asl[j * layer.outputs..(j + 1) * layer.outputs];
                gb.iter_mut().zip(col).for_each(|(g, a)| *g += a);
            }
            if k == 0 {
                break;
            }

            let rows = layer.inputs;
            let a_bar = product(Operand::weights(params, k).transposed(), Operand::of(&adj));

            let z = &self.pre[k - 1];
            let zs = z.as_slice();
            let ab = a_bar.as_slice();
            let mut z_bar = DMatrix::zeros(rows, cols);
            let zb = z_bar.as_mut_slice();
            for j in 0..p {
                for r in 0..rows {
                    let v = j * rows + r;
                    let [_, s1, s2, s3] = act.derivatives(zs[v]);
                    let mut acc = ab[v] * s1;
                    for i in 0..dim {
                        let c1 = ((1 + 2 * i) * p + j) * rows + r;
                        let c2 = ((2 + 2 * i) * p + j) * rows + r;
                        let (zp, zpp) = (zs[c1], zs[c2]);
                        let (ap, app) = (ab[c1], ab[c2]);
                        zb[c2] = app * s1;
                        zb[c1] = ap * s1 + 2.0 * app * s2 * zp;
                        acc += ap * s2 * zp + app * (s3 * zp * zp + s2 * zpp);
                    }
                    zb[v] = acc;
                }
            }
            adj = z_bar;
        }
        grad
    }
}

/// Jets at a batch of points; `coords` is flat with stride `d`.
pub fn forward_jets(
    params: &NetworkParameters,
    coords: &[f64],
    cutoffs: &[CutoffJet],
) -> Result<Vec<Jet>> {
    let dim = params.spec().input_dim;
    if coords.len() % dim != 0 {
        return Err(Error::Shape {
            what: "point coordinates",
            expected: dim,
            actual: coords.len() % dim,
        });
    }
    check_len("cutoff jets", coords.len() / dim, cutoffs.len())?;
    let tape = Tape::record(params, coords);
    let jets: Vec<Jet> = (0..tape.points())
        .map(|j| tape.jet(j, &cutoffs[j]))
        .collect();
    if jets.iter().all(Jet::is_finite) {
        Ok(jets)
    } else {
        Err(Error::NonFinite("forward jet"))
    }
}

/// Value, gradient and Laplacian of `u = b · n_u` and the control `f = n_f` at one point.
pub fn forward_jet(params: &NetworkParameters, point: &[f64], cutoff: &CutoffJet) -> Result<Jet> {
    check_len("point dimension", params.spec().input_dim, point.len())?;
    check_len("cutoff gradient", point.len(), cutoff.grad.len())?;
    let mut jets = forward_jets(params, point, std::slice::from_ref(cutoff))?;
    Ok(jets.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{boundary_cutoff, cutoff_jet, Domain};
    use crate::net::{init_network, Activation, NetworkSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_net(dim: usize, hidden: Vec<usize>, seed: u64) -> NetworkParameters {
        init_network(&NetworkSpec {
            input_dim: dim,
            hidden,
            activation: Activation::Tanh,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn boundary_points_have_zero_state() {
        let dom = Domain::unit_square();
        let net = random_net(2, vec![6, 6], 3);
        for p in [[0.0, 0.3], [1.0, 0.9], [0.25, 0.0], [0.5, 1.0]] {
            let jet = forward_jet(&net, &p, &cutoff_jet(&dom, &p)).unwrap();
            assert_eq!(jet.u, 0.0);
        }
    }

    #[test]
    fn affine_network_jet() {
        let spec = NetworkSpec {
            input_dim: 1,
            hidden: vec![],
            activation: Activation::Identity,
            seed: 0,
        };
        let c = 2.5;
        let mut net = NetworkParameters::from_flat(spec, vec![0.0; 4]).unwrap();
        *net.weight_mut(0, 0, 0) = c;
        let x = 0.3;
        let jet = forward_jet(&net, &[x], &CutoffJet::none(1)).unwrap();
        assert_eq!(jet.u, c * x);
        assert_eq!(jet.grad_u, vec![c]);
        assert_eq!(jet.lap_u, 0.0);
    }

    #[test]
    fn jet_values_match_plain_evaluation() {
        let dom = Domain::unit_square();
        let net = random_net(2, vec![7, 5], 11);
        let p = [0.31, 0.72];
        let jet = forward_jet(&net, &p, &cutoff_jet(&dom, &p)).unwrap();
        let raw = net.evaluate_raw(&p);
        assert!((jet.u - boundary_cutoff(&dom, &p) * raw[0]).abs() < 1e-14);
        assert!((jet.f - raw[1]).abs() < 1e-14);
    }

    #[test]
    fn laplacian_matches_second_differences() {
        // Oracle: central second differences of the plain evaluation
        // u(x) = b(x) · n_u(x), axis by axis.
        let h = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (dim, dom) in [(1, Domain::unit_interval()), (2, Domain::unit_square())] {
            let net = random_net(dim, vec![8, 8], 17);
            for _ in 0..10 {
                let p: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05..0.95)).collect();
                let u = |q: &[f64]| boundary_cutoff(&dom, q) * net.evaluate_raw(q)[0];
                let jet = forward_jet(&net, &p, &cutoff_jet(&dom, &p)).unwrap();
                let mut lap = 0.0;
                for i in 0..dim {
                    let mut plus = p.clone();
                    let mut minus = p.clone();
                    plus[i] += h;
                    minus[i] -= h;
                    lap += (u(&plus) - 2.0 * u(&p) + u(&minus)) / (h * h);
                    let slope = (u(&plus) - u(&minus)) / (2.0 * h);
                    assert!((slope - jet.grad_u[i]).abs() <= 1e-5 * (1.0 + slope.abs()));
                }
                let rel = (lap - jet.lap_u).abs() / jet.lap_u.abs().max(1.0);
                assert!(rel <= 1e-5, "dim {dim}: jet {} vs fd {lap}", jet.lap_u);
            }
        }
    }

    #[test]
    fn batched_and_single_point_agree() {
        let dom = Domain::unit_interval();
        let net = random_net(1, vec![9, 4], 1);
        let coords = [0.1, 0.4, 0.77];
        let cut: Vec<_> = coords.iter().map(|x| cutoff_jet(&dom, &[*x])).collect();
        let batch = forward_jets(&net, &coords, &cut).unwrap();
        for (k, x) in coords.iter().enumerate() {
            let single = forward_jet(&net, &[*x], &cut[k]).unwrap();
            assert!((single.lap_u - batch[k].lap_u).abs() < 1e-13);
            assert!((single.u - batch[k].u).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        let net = random_net(2, vec![3], 0);
        assert!(forward_jet(&net, &[0.5], &CutoffJet::none(1)).is_err());
        assert!(forward_jets(&net, &[0.5, 0.5], &[]).is_err());
    }
}
