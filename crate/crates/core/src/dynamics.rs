//! Discrete right-hand sides: the Nyström-collocated Hammerstein operator,
//! the pointwise Beverton-Holt operator, and the general solution they
//! generate.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::{dot, Execution};
use crate::grid::{Grid, GridFunction};
use crate::model::{GrowthSpec, KernelSpec, Profile, Schedule, SeasonalForcing};

/// A time-dependent map `u_{t+1} = H_t(u_t)` on grid functions.
pub trait Process: Sync {
    fn grid(&self) -> &Arc<Grid>;

    /// Period `theta` with `H_{t + theta} = H_t`.
    fn period(&self) -> usize;

    fn step(&self, t: i64, u: &GridFunction) -> Result<GridFunction>;

    /// Sup-norm Lipschitz constant of `H_t` on the grid.
    fn step_lipschitz(&self, t: i64) -> f64;
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    fn gcd(mut a: usize, mut b: usize) -> usize {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    a / gcd(a, b) * b
}

/// Where kernel integral bounds come from.
///
/// `ClosedForm` bounds the continuous operator; `Discrete` uses the
/// quadrature row sums, which bound the Nyström operator that is actually
/// iterated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoundSource {
    ClosedForm,
    #[default]
    Discrete,
}

/// Nyström discretisation of
/// `H_t(u)(x) = int k_t(x, y) g_t(y, u(y)) dy + h_t(x)`.
///
/// Weighted kernel matrices `K[i][j] = w_j k_t(x_i, x_j)` are built once
/// per distinct kernel scale in a period and reused by every step.
#[derive(Clone, Debug)]
pub struct HammersteinOperator {
    kernel: KernelSpec,
    growth: GrowthSpec,
    forcing: SeasonalForcing,
    grid: Arc<Grid>,
    matrices: Vec<Vec<f64>>,
    row_sums: Vec<f64>,
    profile_values: Vec<f64>,
    shape: Vec<f64>,
    period: usize,
    exec: Execution,
}

impl HammersteinOperator {
    pub fn new(
        kernel: KernelSpec,
        growth: GrowthSpec,
        forcing: SeasonalForcing,
        grid: Arc<Grid>,
    ) -> Self {
        Self::with_execution(kernel, growth, forcing, grid, Execution::default())
    }

    pub fn with_execution(
        kernel: KernelSpec,
        growth: GrowthSpec,
        forcing: SeasonalForcing,
        grid: Arc<Grid>,
        exec: Execution,
    ) -> Self {
        let m = grid.len();
        let nodes = grid.nodes();
        let weights = grid.weights();
        let classes = kernel.scale().period();
        let mut matrices = Vec::with_capacity(classes);
        let mut row_sums = Vec::with_capacity(classes);
        for class in 0..classes {
            let a = kernel.scale_at(class as i64);
            let mut mat = vec![0.0; m * m];
            for (i, row) in mat.chunks_exact_mut(m).enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    *entry = weights[j] * kernel.family.eval(a, nodes[i], nodes[j]);
                }
            }
            let max_row = mat
                .chunks_exact(m)
                .map(|row| row.iter().map(|k| k.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            matrices.push(mat);
            row_sums.push(max_row);
        }
        let profile_values = nodes.iter().map(|&x| growth.profile().eval(x)).collect();
        let shape = nodes
            .iter()
            .map(|&x| SeasonalForcing::shape(x, grid.length()))
            .collect();
        let period = lcm(lcm(classes, growth.alpha().period()), forcing.period());
        HammersteinOperator {
            kernel,
            growth,
            forcing,
            grid,
            matrices,
            row_sums,
            profile_values,
            shape,
            period,
            exec,
        }
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn set_execution(&mut self, exec: Execution) {
        self.exec = exec;
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn growth(&self) -> &GrowthSpec {
        &self.growth
    }

    pub fn forcing(&self) -> &SeasonalForcing {
        &self.forcing
    }

    /// Bytes held by the cached kernel matrices.
    pub fn cache_bytes(&self) -> usize {
        self.matrices.iter().map(|m| m.len() * std::mem::size_of::<f64>()).sum()
    }

    fn class(&self, t: i64) -> usize {
        t.rem_euclid(self.matrices.len() as i64) as usize
    }

    /// Weighted kernel matrix in effect at time `t`, row-major.
    pub fn matrix(&self, t: i64) -> &[f64] {
        &self.matrices[self.class(t)]
    }

    /// `max_i sum_j |K_t[i][j]|`, the discrete analogue of the kernel bound.
    pub fn kernel_row_sum(&self, t: i64) -> f64 {
        self.row_sums[self.class(t)]
    }

    /// Lipschitz constant of the continuous operator from closed forms.
    pub fn lipschitz_closed_form(&self, t: i64) -> Result<f64> {
        crate::model::hammerstein_lipschitz(&self.kernel, &self.growth, t, self.grid.length())
    }

    /// Lipschitz constant of the discretised operator.
    pub fn lipschitz_numeric(&self, t: i64) -> f64 {
        self.growth.lipschitz(t) * self.kernel_row_sum(t)
    }

    /// Kernel integral bound at time `t` from the requested source.
    pub fn kernel_bound(&self, t: i64, source: BoundSource) -> Result<f64> {
        match source {
            BoundSource::ClosedForm => self.kernel.bound(t, self.grid.length()),
            BoundSource::Discrete => Ok(self.kernel_row_sum(t)),
        }
    }

    /// Lipschitz constant `lambda_t` from the requested source.
    pub fn lipschitz(&self, t: i64, source: BoundSource) -> Result<f64> {
        Ok(self.growth.lipschitz(t) * self.kernel_bound(t, source)?)
    }

    /// `lambda_t` for one full period, `t = 0..theta`.
    pub fn lipschitz_period(&self, source: BoundSource) -> Result<Vec<f64>> {
        (0..self.period as i64).map(|t| self.lipschitz(t, source)).collect()
    }

    /// Inhomogeneity at time `t` sampled on the grid.
    pub fn forcing_on_grid(&self, t: i64) -> GridFunction {
        let amp = self.forcing.amplitude(t);
        GridFunction::from_raw(&self.grid, self.shape.iter().map(|s| amp * s).collect())
    }

    /// Growth term `g_t(x_j, u(x_j))` at every node.
    pub fn growth_on_grid(&self, t: i64, u: &GridFunction) -> Vec<f64> {
        let alpha = self.growth.alpha().at(t);
        let family = self.growth.family;
        self.profile_values
            .iter()
            .zip(u.values())
            .map(|(&b, &z)| family.eval(alpha * b, z))
            .collect()
    }

    pub fn apply(&self, t: i64, u: &GridFunction) -> Result<GridFunction> {
        if !crate::grid::same_grid(&self.grid, u.grid()) {
            return Err(Error::IncompatibleGrids);
        }
        let g = self.growth_on_grid(t, u);
        let mat = self.matrix(t);
        let m = self.grid.len();
        let amp = self.forcing.amplitude(t);
        let shape = &self.shape;
        let mut out = vec![0.0; m];
        self.exec.fill_rows(&mut out, |i| {
            dot(&mat[i * m..(i + 1) * m], &g) + amp * shape[i]
        });
        Ok(GridFunction::from_raw(&self.grid, out))
    }
}

impl Process for HammersteinOperator {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn period(&self) -> usize {
        self.period
    }

    fn step(&self, t: i64, u: &GridFunction) -> Result<GridFunction> {
        self.apply(t, u)
    }

    fn step_lipschitz(&self, t: i64) -> f64 {
        self.lipschitz_numeric(t)
    }
}

/// `H_t(u)(x) = b_t(x) u(x) / (1 + |u(x)|)` with `b_t = alpha_t * profile`.
#[derive(Clone, Debug)]
pub struct PointwiseOperator {
    alpha: Schedule,
    grid: Arc<Grid>,
    profile_values: Vec<f64>,
    profile_max: f64,
}

impl PointwiseOperator {
    pub fn new(alpha: Schedule, profile: &Profile, grid: Arc<Grid>) -> Result<Self> {
        let profile_values: Vec<f64> = grid.nodes().iter().map(|&x| profile.eval(x)).collect();
        if profile_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("profile must be finite on the grid"));
        }
        let profile_max = profile_values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        Ok(PointwiseOperator {
            alpha,
            grid,
            profile_values,
            profile_max,
        })
    }

    /// `sup_x |b_t(x)|` over the nodes.
    pub fn rate_sup(&self, t: i64) -> f64 {
        self.alpha.at(t).abs() * self.profile_max
    }

    pub fn apply(&self, t: i64, u: &GridFunction) -> Result<GridFunction> {
        if !crate::grid::same_grid(&self.grid, u.grid()) {
            return Err(Error::IncompatibleGrids);
        }
        let alpha = self.alpha.at(t);
        let values = self
            .profile_values
            .iter()
            .zip(u.values())
            .map(|(&b, &z)| alpha * b * z / (1.0 + z.abs()))
            .collect();
        Ok(GridFunction::from_raw(&self.grid, values))
    }
}

impl Process for PointwiseOperator {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn period(&self) -> usize {
        self.alpha.period()
    }

    fn step(&self, t: i64, u: &GridFunction) -> Result<GridFunction> {
        self.apply(t, u)
    }

    fn step_lipschitz(&self, t: i64) -> f64 {
        self.rate_sup(t)
    }
}

/// `phi(t, tau, u) = H_{t-1} o ... o H_tau (u)`.
pub fn general_solution<P: Process + ?Sized>(
    op: &P,
    t: i64,
    tau: i64,
    u: &GridFunction,
) -> Result<GridFunction> {
    if t < tau {
        return Err(Error::InvalidTimeOrder { t, tau });
    }
    u.ensure_same_grid(&GridFunction::zeros(op.grid()))?;
    let mut state = u.clone();
    for s in tau..t {
        state = op.step(s, &state)?;
    }
    Ok(state)
}

/// States `u_tau, ..., u_{tau + steps}` of one forward solution.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    pub start: i64,
    pub states: Vec<GridFunction>,
}

impl TrajectorySegment {
    pub fn end(&self) -> i64 {
        self.start + self.states.len() as i64 - 1
    }

    pub fn state(&self, t: i64) -> Option<&GridFunction> {
        usize::try_from(t - self.start).ok().and_then(|i| self.states.get(i))
    }

    /// True when every consecutive pair satisfies `u_{s+1} = H_s(u_s)` exactly.
    pub fn replays<P: Process + ?Sized>(&self, op: &P) -> Result<bool> {
        for (k, pair) in self.states.windows(2).enumerate() {
            if op.step(self.start + k as i64, &pair[0])? != pair[1] {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn trajectory<P: Process + ?Sized>(
    op: &P,
    tau: i64,
    steps: usize,
    u0: &GridFunction,
) -> Result<TrajectorySegment> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(u0.clone());
    for k in 0..steps {
        let next = op.step(tau + k as i64, &states[k])?;
        states.push(next);
    }
    Ok(TrajectorySegment { start: tau, states })
}
