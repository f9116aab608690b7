//! Quadrature grids on `[-L/2, L/2]` and node-sampled functions.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Quadrature rule used to place nodes and weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Composite trapezoid rule on a uniform mesh.
    #[default]
    Trapezoid,
}

/// Nodes and weights on the symmetric interval `[-L/2, L/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    length: f64,
    subintervals: usize,
    rule: QuadratureRule,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(length: f64, subintervals: usize, rule: QuadratureRule) -> Result<Arc<Self>> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!("domain length must be positive, got {length}")));
        }
        if subintervals == 0 {
            return Err(Error::invalid("grid needs at least one subinterval"));
        }
        let (nodes, weights) = match rule {
            QuadratureRule::Trapezoid => trapezoid(length, subintervals),
        };
        Ok(Arc::new(Grid {
            length,
            subintervals,
            rule,
            nodes,
            weights,
        }))
    }

    pub fn trapezoid(length: f64, subintervals: usize) -> Result<Arc<Self>> {
        Self::new(length, subintervals, QuadratureRule::Trapezoid)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of subintervals `n`; there are `n + 1` nodes.
    pub fn subintervals(&self) -> usize {
        self.subintervals
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }
}

fn trapezoid(length: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = length / n as f64;
    let half = 0.5 * length;
    let mut nodes: Vec<f64> = (0..=n).map(|i| -half + i as f64 * h).collect();
    // pin the right endpoint; -L/2 + n*h can be off by an ulp
    nodes[n] = half;
    let weights = (0..=n)
        .map(|i| if i == 0 || i == n { 0.5 * h } else { h })
        .collect();
    (nodes, weights)
}

/// Values of a function at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl GridFunction {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "grid function needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridFunction {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        GridFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids)
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &GridFunction, beta: f64) -> Result<GridFunction> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(GridFunction::from_raw(&self.grid, values))
    }

    /// Quadrature sum `sum_i w_i f(x_i)`.
    pub fn integrate(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Total population: the quadrature approximation of the integral of a density.
    pub fn total_population(&self) -> f64 {
        self.integrate()
    }

    /// Node maximum of `|f|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// `sup_{a in A} inf_{b in B} |a - b|`, with the sup-norm on nodes.
pub fn hausdorff_semidistance(a: &[GridFunction], b: &[GridFunction]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Hausdorff semidistance needs nonempty sets"));
    }
    let mut worst: f64 = 0.0;
    for fa in a {
        let mut best = f64::INFINITY;
        for fb in b {
            best = best.min(fa.sup_distance(fb)?);
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trapezoid_nodes_and_weights() {
        let g = Grid::trapezoid(6.0, 3).unwrap();
        assert_eq!(g.nodes(), &[-3.0, -1.0, 1.0, 3.0]);
        assert_eq!(g.weights(), &[1.0, 2.0, 2.0, 1.0]);

        let g = Grid::trapezoid(6.0, 1).unwrap();
        assert_eq!(g.nodes(), &[-3.0, 3.0]);
        assert_eq!(g.weights(), &[3.0, 3.0]);

        let g = Grid::trapezoid(2.0, 4).unwrap();
        assert_eq!(g.weights().iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(Grid::trapezoid(0.0, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(Grid::trapezoid(-1.0, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(Grid::trapezoid(1.0, 0), Err(Error::InvalidArgument(_))));
        let g = Grid::trapezoid(1.0, 2).unwrap();
        assert!(GridFunction::new(&g, vec![0.0; 2]).is_err());
    }

    #[test]
    fn integrals() {
        let g = Grid::trapezoid(6.0, 7).unwrap();
        assert!((GridFunction::constant(&g, 1.0).integrate() - 6.0).abs() < 1e-14);
        assert!(GridFunction::from_fn(&g, |x| x).integrate().abs() < 1e-14);

        let g = Grid::trapezoid(2.0, 2).unwrap();
        assert_eq!(GridFunction::from_fn(&g, |x| x * x).integrate(), 1.0);
    }

    #[test]
    fn total_population() {
        let g = Grid::trapezoid(6.0, 10).unwrap();
        assert!((GridFunction::constant(&g, 2.0).total_population() - 12.0).abs() < 1e-13);
        assert_eq!(GridFunction::zeros(&g).total_population(), 0.0);

        let g = Grid::trapezoid(6.0, 1000).unwrap();
        let u = GridFunction::from_fn(&g, |x| (std::f64::consts::PI * x / 6.0).cos());
        let exact = 12.0 / std::f64::consts::PI;
        // trapezoid error for cos on this mesh is O(h^2) ~ 1e-5
        assert!((u.total_population() - exact).abs() < 1e-4);
    }

    #[test]
    fn norms_and_distances() {
        let g = Grid::trapezoid(6.0, 6).unwrap();
        let f = GridFunction::from_fn(&g, |x| x);
        assert_eq!(f.sup_norm(), 3.0);
        assert_eq!(f.sup_distance(&f).unwrap(), 0.0);

        let g3 = Grid::trapezoid(2.0, 2).unwrap();
        let f = GridFunction::new(&g3, vec![1.0, -4.0, 2.0]).unwrap();
        let z = GridFunction::zeros(&g3);
        assert_eq!(f.sup_distance(&z).unwrap(), 4.0);
        assert!(matches!(f.sup_distance(&GridFunction::zeros(&g)), Err(Error::IncompatibleGrids)));
    }

    #[test]
    fn equal_grids_built_twice_are_compatible() {
        let a = Grid::trapezoid(3.0, 5).unwrap();
        let b = Grid::trapezoid(3.0, 5).unwrap();
        let fa = GridFunction::constant(&a, 1.0);
        let fb = GridFunction::constant(&b, 1.5);
        assert_eq!(fa.sup_distance(&fb).unwrap(), 0.5);
    }

    #[test]
    fn hausdorff_cases() {
        let g = Grid::trapezoid(2.0, 4).unwrap();
        let f = GridFunction::from_fn(&g, |x| x * x);
        let h = GridFunction::constant(&g, 3.0);
        assert_eq!(hausdorff_semidistance(std::slice::from_ref(&f), std::slice::from_ref(&f)).unwrap(), 0.0);
        assert_eq!(hausdorff_semidistance(std::slice::from_ref(&f), &[f.clone(), h]).unwrap(), 0.0);

        let zero = GridFunction::zeros(&g);
        let two = GridFunction::constant(&g, 2.0);
        let one = GridFunction::constant(&g, 1.0);
        // brute force over all pairs
        let a = [zero, two];
        let b = [one];
        let brute = a
            .iter()
            .map(|x| b.iter().map(|y| x.sup_distance(y).unwrap()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        assert_eq!(brute, 1.0);
        assert_eq!(hausdorff_semidistance(&a, &b).unwrap(), brute);
        assert!(hausdorff_semidistance(&[], &b).is_err());
    }

    fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1e3f64..1e3, len)
    }

    proptest! {
        #[test]
        fn weights_positive_and_exact_on_constants(length in 1e-3f64..1e3, n in 1usize..500) {
            let g = Grid::trapezoid(length, n).unwrap();
            prop_assert!(g.weights().iter().all(|&w| w > 0.0));
            let total: f64 = g.weights().iter().sum();
            prop_assert!((total - length).abs() <= 1e-12 * length);
            prop_assert_eq!(g.nodes()[0], -0.5 * length);
            prop_assert_eq!(g.nodes()[n], 0.5 * length);
            prop_assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn exact_on_affine(a in -1e3f64..1e3, b in -1e3f64..1e3, length in 0.1f64..20.0, n in 1usize..200) {
            let g = Grid::trapezoid(length, n).unwrap();
            let f = GridFunction::from_fn(&g, |x| a * x + b);
            let tol = 1e-12 * (a.abs() * length * length + b.abs() * length);
            prop_assert!((f.integrate() - b * length).abs() <= tol.max(1e-300));
        }

        #[test]
        fn integrate_is_linear(fv in values(21), gv in values(21), alpha in -10.0f64..10.0, beta in -10.0f64..10.0) {
            let grid = Grid::trapezoid(4.0, 20).unwrap();
            let f = GridFunction::new(&grid, fv).unwrap();
            let g = GridFunction::new(&grid, gv).unwrap();
            let lhs = f.combine(alpha, &g, beta).unwrap().integrate();
            let rhs = alpha * f.integrate() + beta * g.integrate();
            let scale = alpha.abs() * f.sup_norm() * 4.0 + beta.abs() * g.sup_norm() * 4.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn sup_distance_is_metric(a in values(9), b in values(9), c in values(9)) {
            let grid = Grid::trapezoid(1.0, 8).unwrap();
            let (fa, fb, fc) = (
                GridFunction::new(&grid, a).unwrap(),
                GridFunction::new(&grid, b).unwrap(),
                GridFunction::new(&grid, c).unwrap(),
            );
            let dab = fa.sup_distance(&fb).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert_eq!(dab, fb.sup_distance(&fa).unwrap());
            prop_assert_eq!(fa.sup_distance(&fa).unwrap(), 0.0);
            let dac = fa.sup_distance(&fc).unwrap();
            let dcb = fc.sup_distance(&fb).unwrap();
            prop_assert!(dab <= dac + dcb + 1e-12 * (dac + dcb));
        }

        #[test]
        fn subset_has_zero_semidistance(a in values(5), b in values(5), take_first in any::<bool>()) {
            let grid = Grid::trapezoid(1.0, 4).unwrap();
            let fa = GridFunction::new(&grid, a).unwrap();
            let fb = GridFunction::new(&grid, b).unwrap();
            let sub = if take_first { vec![fa.clone()] } else { vec![fb.clone()] };
            prop_assert_eq!(hausdorff_semidistance(&sub, &[fa, fb]).unwrap(), 0.0);
        }
    }
}
