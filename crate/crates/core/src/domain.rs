//! Domains, collocation grids, quadrature and the boundary cutoff.

use crate::error::{check_len, Error, Result};

/// An axis-aligned box `Π (a_i, b_i)` in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1 or 2, got {}",
                bounds.len()
            )));
        }
        for &(a, b) in &bounds {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidDomain(format!("empty or non-finite axis ({a}, {b})")));
            }
        }
        Ok(Self { bounds })
    }

    /// `(0, 1)`.
    pub fn unit_interval() -> Self {
        Self {
            bounds: vec![(0.0, 1.0)],
        }
    }

    /// `(0, 1)²`.
    pub fn unit_square() -> Self {
        Self {
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Lebesgue measure `|Ω|`.
    pub fn measure(&self) -> f64 {
        self.bounds.iter().map(|(a, b)| b - a).product()
    }

    fn cutoff_normalizer(&self) -> f64 {
        self.bounds
            .iter()
            .map(|(a, b)| {
                let half = 0.5 * (b - a);
                half * half
            })
            .product()
    }
}

/// Value, gradient and Laplacian of the boundary cutoff at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub lap: f64,
}

impl CutoffJet {
    /// The constant function 1: no boundary condition is imposed.
    pub fn none(dim: usize) -> Self {
        Self {
            value: 1.0,
            grad: vec![0.0; dim],
            lap: 0.0,
        }
    }
}

/// `b(x) = Π (x_i − a_i)(b_i − x_i)`, normalised so that `max_Ω b = 1`.
///
/// A coordinate equal to a bound makes one factor exactly zero, so `b`
/// vanishes bitwise on boundary grid points.
pub fn boundary_cutoff(domain: &Domain, point: &[f64]) -> f64 {
    let raw: f64 = domain
        .bounds
        .iter()
        .zip(point)
        .map(|(&(a, b), &x)| (x - a) * (b - x))
        .product();
    raw / domain.cutoff_normalizer()
}

/// The cutoff together with its gradient and Laplacian.
pub fn cutoff_jet(domain: &Domain, point: &[f64]) -> CutoffJet {
    let dim = domain.dim();
    let norm = domain.cutoff_normalizer();
    let factors: Vec<f64> = domain
        .bounds
        .iter()
        .zip(point)
        .map(|(&(a, b), &x)| (x - a) * (b - x))
        .collect();
    let slopes: Vec<f64> = domain
        .bounds
        .iter()
        .zip(point)
        .map(|(&(a, b), &x)| a + b - 2.0 * x)
        .collect();
    let others = |skip: usize| -> f64 {
        factors
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, q)| q)
            .product()
    };
    let mut grad = vec![0.0; dim];
    let mut lap = 0.0;
    for i in 0..dim {
        let rest = others(i);
        grad[i] = slopes[i] * rest / norm;
        lap += -2.0 * rest / norm;
    }
    CutoffJet {
        value: factors.iter().product::<f64>() / norm,
        grad,
        lap,
    }
}

/// Quadrature nodes and nonnegative weights on a uniform Cartesian grid.
///
/// In two dimensions points are stored row by row with the first coordinate
/// varying fastest: index `j * n_x + i` holds `(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    domain: Domain,
    shape: Vec<usize>,
    coords: Vec<f64>,
    weights: Vec<f64>,
    interior: Vec<bool>,
}

impl CollocationSet {
    /// Assembles a set from explicit nodes. `coords` is flat with stride `dim`.
    pub fn from_parts(
        domain: Domain,
        coords: Vec<f64>,
        weights: Vec<f64>,
        interior: Vec<bool>,
    ) -> Result<Self> {
        let dim = domain.dim();
        if coords.len() % dim != 0 {
            return Err(Error::InvalidGrid("coordinate buffer not a multiple of the dimension".into()));
        }
        let n = coords.len() / dim;
        check_len("collocation weights", n, weights.len())?;
        check_len("interior mask", n, interior.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidGrid("weights must be finite and nonnegative".into()));
        }
        Ok(Self {
            domain,
            shape: vec![n],
            coords,
            weights,
            interior,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Points per axis for grids built by [`build_grid`].
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    /// Indices of points off `∂Ω`, ascending.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.interior[i]).collect()
    }

    pub fn interior_count(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }

    /// `Σ_y w_y g(y)`, summed in index order.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        check_len("quadrature integrand", self.len(), values.len())?;
        Ok(self.weights.iter().zip(values).map(|(w, g)| w * g).sum())
    }

    /// Samples `g` at every node.
    pub fn sample(&self, g: impl Fn(&[f64]) -> f64) -> GridField {
        GridField::from_vec(self.points().map(g).collect())
    }

    /// The same nodes with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= c);
        out
    }

    /// A sub-collection of nodes; weights are multiplied by `weight_scale`.
    pub fn subset(&self, indices: &[usize], weight_scale: f64) -> Self {
        let d = self.dim();
        let mut coords = Vec::with_capacity(indices.len() * d);
        let mut weights = Vec::with_capacity(indices.len());
        let mut interior = Vec::with_capacity(indices.len());
        for &i in indices {
            coords.extend_from_slice(self.point(i));
            weights.push(self.weights[i] * weight_scale);
            interior.push(self.interior[i]);
        }
        Self {
            domain: self.domain.clone(),
            shape: vec![indices.len()],
            coords,
            weights,
            interior,
        }
    }
}

/// One scalar per collocation point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
}

impl GridField {
    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    /// Checks the field is defined on `set`.
    pub fn on(set: &CollocationSet, values: Vec<f64>) -> Result<Self> {
        check_len("grid field", set.len(), values.len())?;
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn axis_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => a,
            i if i == n - 1 => b,
            i => a + (b - a) * (i as f64 / last),
        })
        .collect()
}

fn axis_weights(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .collect()
}

/// Uniform Cartesian grid with `n_per_axis` nodes per axis, boundary
/// included, carrying tensor-product trapezoidal weights.
pub fn build_grid(domain: &Domain, n_per_axis: usize) -> Result<CollocationSet> {
    if n_per_axis < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 points per axis, got {n_per_axis}"
        )));
    }
    let n = n_per_axis;
    let nodes: Vec<Vec<f64>> = domain
        .bounds
        .iter()
        .map(|&(a, b)| axis_nodes(a, b, n))
        .collect();
    let wts: Vec<Vec<f64>> = domain
        .bounds
        .iter()
        .map(|&(a, b)| axis_weights(a, b, n))
        .collect();
    let on_edge = |i: usize| i == 0 || i == n - 1;

    let (coords, weights, interior) = match domain.dim() {
        1 => (
            nodes[0].clone(),
            wts[0].clone(),
            (0..n).map(|i| !on_edge(i)).collect(),
        ),
        _ => {
            let mut coords = Vec::with_capacity(2 * n * n);
            let mut weights = Vec::with_capacity(n * n);
            let mut interior = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    coords.push(nodes[0][i]);
                    coords.push(nodes[1][j]);
                    weights.push(wts[0][i] * wts[1][j]);
                    interior.push(!on_edge(i) && !on_edge(j));
                }
            }
            (coords, weights, interior)
        }
    };
    Ok(CollocationSet {
        domain: domain.clone(),
        shape: vec![n; domain.dim()],
        coords,
        weights,
        interior,
    })
}

/// `Σ_y w_y g(y)`.
pub fn quadrature_sum(set: &CollocationSet, integrand: &GridField) -> Result<f64> {
    set.quadrature(&integrand.values)
}

/// Discrete `L²(Ω)` norm `sqrt(Σ_y w_y v(y)²)`.
pub fn l2_norm(set: &CollocationSet, field: &GridField) -> Result<f64> {
    l2_norm_slice(set, &field.values)
}

pub(crate) fn l2_norm_slice(set: &CollocationSet, values: &[f64]) -> Result<f64> {
    check_len("l2 norm field", set.len(), values.len())?;
    Ok(set
        .weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v * v)
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn default_grid_has_201_points() {
        let set = build_grid(&Domain::unit_interval(), 201).unwrap();
        assert_eq!(set.len(), 201);
        assert_abs_diff_eq!(set.point(1)[0], 1.0 / 200.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(set.interior_count(), 199);
    }

    #[test]
    fn three_point_trapezoid() {
        let set = build_grid(&Domain::unit_interval(), 3).unwrap();
        assert_eq!(set.coords(), &[0.0, 0.5, 1.0]);
        assert_eq!(set.weights(), &[0.25, 0.5, 0.25]);
        assert_eq!(set.interior_mask(), &[false, true, false]);
    }

    #[test]
    fn square_grid_weights_sum_to_area() {
        let set = build_grid(&Domain::unit_square(), 30).unwrap();
        assert_eq!(set.len(), 900);
        assert_abs_diff_eq!(set.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(set.interior_count(), 28 * 28);
        // endpoints are exact
        assert_eq!(set.point(899), &[1.0, 1.0]);
    }

    #[test]
    fn too_small_grid_is_rejected() {
        assert!(matches!(
            build_grid(&Domain::unit_interval(), 2),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn quadrature_examples() {
        let set = build_grid(&Domain::unit_interval(), 201).unwrap();
        let one = set.sample(|_| 1.0);
        assert_abs_diff_eq!(quadrature_sum(&set, &one).unwrap(), 1.0, epsilon = 1e-12);
        let lin = set.sample(|x| x[0]);
        assert_abs_diff_eq!(quadrature_sum(&set, &lin).unwrap(), 0.5, epsilon = 1e-14);
        let s2 = set.sample(|x| (PI * x[0]).sin().powi(2));
        assert_abs_diff_eq!(quadrature_sum(&set, &s2).unwrap(), 0.5, epsilon = 1e-4);
        assert!(quadrature_sum(&set, &GridField::zeros(3)).is_err());
    }

    #[test]
    fn trapezoid_is_second_order() {
        // Oracle: ∫₀¹ x² e^x dx = e − 2.
        let exact = std::f64::consts::E - 2.0;
        let err = |n| {
            let set = build_grid(&Domain::unit_interval(), n).unwrap();
            let g = set.sample(|x| x[0] * x[0] * x[0].exp());
            (quadrature_sum(&set, &g).unwrap() - exact).abs()
        };
        let ratio = err(101) / err(201);
        assert!((3.9..4.1).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn cutoff_examples() {
        let line = Domain::unit_interval();
        assert_eq!(boundary_cutoff(&line, &[0.0]), 0.0);
        assert_abs_diff_eq!(boundary_cutoff(&line, &[0.5]), 1.0, epsilon = 1e-15);
        let sq = Domain::unit_square();
        assert_eq!(boundary_cutoff(&sq, &[0.5, 0.0]), 0.0);
        assert_abs_diff_eq!(boundary_cutoff(&sq, &[0.5, 0.5]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cutoff_vanishes_on_every_boundary_node() {
        let set = build_grid(&Domain::unit_square(), 17).unwrap();
        for (i, p) in set.points().enumerate() {
            let b = boundary_cutoff(set.domain(), p);
            if set.is_interior(i) {
                assert!(b > 0.0);
            } else {
                assert_eq!(b, 0.0);
            }
        }
    }

    #[test]
    fn cutoff_jet_matches_finite_differences() {
        let dom = Domain::new(vec![(-1.0, 2.0), (0.5, 1.5)]).unwrap();
        let p = [0.3, 0.8];
        let jet = cutoff_jet(&dom, &p);
        assert_abs_diff_eq!(jet.value, boundary_cutoff(&dom, &p), epsilon = 1e-15);
        let h = 1e-4;
        let mut lap = 0.0;
        for i in 0..2 {
            let mut plus = p;
            let mut minus = p;
            plus[i] += h;
            minus[i] -= h;
            let fp = boundary_cutoff(&dom, &plus);
            let fm = boundary_cutoff(&dom, &minus);
            assert_abs_diff_eq!(jet.grad[i], (fp - fm) / (2.0 * h), epsilon = 1e-8);
            lap += (fp - 2.0 * jet.value + fm) / (h * h);
        }
        assert_abs_diff_eq!(jet.lap, lap, epsilon = 1e-6);
    }

    #[test]
    fn l2_norm_examples() {
        let set = build_grid(&Domain::unit_interval(), 201).unwrap();
        assert_eq!(l2_norm(&set, &GridField::zeros(201)).unwrap(), 0.0);
        let s = set.sample(|x| (PI * x[0]).sin());
        assert_abs_diff_eq!(l2_norm(&set, &s).unwrap(), 0.5f64.sqrt(), epsilon = 1e-4);
        let two = set.sample(|_| 2.0);
        assert_abs_diff_eq!(l2_norm(&set, &two).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_domains() {
        assert!(Domain::new(vec![]).is_err());
        assert!(Domain::new(vec![(1.0, 0.0)]).is_err());
        assert!(Domain::new(vec![(0.0, 1.0); 3]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quadrature_is_linear(
                c in -10.0f64..10.0,
                g in proptest::collection::vec(-5.0f64..5.0, 41),
                h in proptest::collection::vec(-5.0f64..5.0, 41),
            ) {
                let set = build_grid(&Domain::unit_interval(), 41).unwrap();
                let combo: Vec<f64> = g.iter().zip(&h).map(|(a, b)| c * a + b).collect();
                let lhs = set.quadrature(&combo).unwrap();
                let rhs = c * set.quadrature(&g).unwrap() + set.quadrature(&h).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + lhs.abs().max(rhs.abs())) * 10.0);
            }

            #[test]
            fn weights_sum_to_measure(a in -3.0f64..3.0, len in 0.1f64..5.0, n in 3usize..300) {
                let dom = Domain::new(vec![(a, a + len)]).unwrap();
                let set = build_grid(&dom, n).unwrap();
                let total: f64 = set.weights().iter().sum();
                prop_assert!(((total - len) / len).abs() <= 1e-12);
                prop_assert!(set.weights().iter().all(|w| *w >= 0.0));
            }
        }
    }
}
