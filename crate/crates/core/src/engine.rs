//! Contraction certificates, iteration budgets, pullback approximation of
//! attractor fibers, and the generic iterate-contraction solver.

use crate::dynamics::{general_solution, BoundSource, HammersteinOperator, Process};
use crate::error::{Error, Result};
use crate::grid::{hausdorff_semidistance, GridFunction};

/// Product bound of the per-step Lipschitz constants over windows of
/// length `window`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionCertificate {
    pub window: usize,
    /// One period of `lambda_r`, indexed by `r mod len`.
    pub lambdas: Vec<f64>,
    /// `sup_tau prod_{r = tau}^{tau + window - 1} lambda_r`.
    pub ell: f64,
}

impl ContractionCertificate {
    pub fn is_valid(&self) -> bool {
        self.ell < 1.0
    }

    /// `prod_{r = from}^{to - 1} lambda_r`.
    pub fn product(&self, from: i64, to: i64) -> f64 {
        let len = self.lambdas.len() as i64;
        (from..to)
            .map(|r| self.lambdas[r.rem_euclid(len) as usize])
            .product()
    }
}

pub fn certify_contraction(lambdas: &[f64], window: usize) -> Result<ContractionCertificate> {
    if lambdas.is_empty() || window == 0 {
        return Err(Error::invalid("need at least one lambda and a window of length >= 1"));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::invalid("Lipschitz constants must be nonnegative"));
    }
    let len = lambdas.len();
    let ell = (0..len)
        .map(|tau| (0..window).map(|k| lambdas[(tau + k) % len]).product::<f64>())
        .fold(0.0, f64::max);
    Ok(ContractionCertificate {
        window,
        lambdas: lambdas.to_vec(),
        ell,
    })
}

/// Certificate for a periodic process from its own step constants.
pub fn certify_process<P: Process + ?Sized>(op: &P, window: usize) -> Result<ContractionCertificate> {
    let lambdas: Vec<f64> = (0..op.period() as i64).map(|t| op.step_lipschitz(t)).collect();
    certify_contraction(&lambdas, window)
}

/// Number of contraction windows needed to reach a tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBudget {
    /// A-priori bound on `sup_s d(u, phi(s, s - T, u))`.
    pub l2: f64,
    pub tol: f64,
    pub window: usize,
    /// Window count `t`.
    pub windows: u64,
    /// Total steps `S = T t`.
    pub steps: u64,
}

impl ErrorBudget {
    /// `ell^t / (1 - ell) * l2`.
    pub fn error_bound(&self, ell: f64) -> f64 {
        error_estimate(ell, self.windows, self.l2)
    }
}

fn error_estimate(ell: f64, windows: u64, l2: f64) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let pow = if windows == 0 {
        1.0
    } else {
        ell.powi(windows.min(i32::MAX as u64) as i32)
    };
    pow / (1.0 - ell) * l2
}

/// Smallest `t` with `ell^t / (1 - ell) * l2 <= tol`, and `S = T t`.
pub fn required_iterations(ell: f64, l2: f64, tol: f64, window: usize) -> Result<ErrorBudget> {
    if !(ell < 1.0) {
        return Err(Error::NoContraction { ell });
    }
    if ell < 0.0 || !(l2 >= 0.0) || !(tol > 0.0) || window == 0 {
        return Err(Error::invalid(
            "need 0 <= ell < 1, l2 >= 0, tol > 0 and a positive window",
        ));
    }
    if !l2.is_finite() {
        return Err(Error::DivergentInput(format!("a-priori bound l2 = {l2}")));
    }
    let windows = if error_estimate(ell, 0, l2) <= tol {
        0
    } else if ell == 0.0 {
        1
    } else {
        let guess = ((tol * (1.0 - ell) / l2).ln() / ell.ln()).ceil().max(0.0) as u64;
        // settle rounding in the logarithms against the defining inequality
        let mut t = guess.saturating_sub(1);
        while error_estimate(ell, t, l2) > tol {
            t += 1;
        }
        while t > 0 && error_estimate(ell, t - 1, l2) <= tol {
            t -= 1;
        }
        t
    };
    Ok(ErrorBudget {
        l2,
        tol,
        window,
        windows,
        steps: windows * window as u64,
    })
}

/// How the growth term enters the a-priori bound `l2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum L2Mode {
    /// Evaluate `sup_x |g(x, u(x))|` along the actual windows from `u0`.
    StateDependent,
    /// Replace it by the state-independent growth bound.
    #[default]
    UpperBound,
}

/// `l2 = ||u0|| + sup_s l1(s - 1, phi(s - 1, s - T, u0)) + ||h||_inf`, the
/// supremum over `s` taken over one period.
pub fn compute_l2(
    op: &HammersteinOperator,
    u0: &GridFunction,
    window: usize,
    mode: L2Mode,
    source: BoundSource,
) -> Result<f64> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    let theta = op.period() as i64;
    let w = window as i64;
    let mut l1_max: f64 = 0.0;
    for s in 0..theta {
        let kb = op.kernel_bound(s - 1, source)?;
        let growth = match mode {
            L2Mode::UpperBound => op.growth().sup_bound(s - 1),
            L2Mode::StateDependent => {
                let state = general_solution(op, s - 1, s - w, u0)?;
                op.growth_on_grid(s - 1, &state)
                    .iter()
                    .fold(0.0, |m: f64, g| m.max(g.abs()))
            }
        };
        // a vanishing kernel bound kills an infinite growth bound
        let l1 = if kb == 0.0 { 0.0 } else { kb * growth };
        l1_max = l1_max.max(l1);
    }
    Ok(u0.sup_norm() + l1_max + op.forcing().sup_norm())
}

/// A-priori bound valid for the single forward sweep used by
/// [`pullback_fibers`].
///
/// Fibers harvested at times `0..theta` from one sweep started at `-S` are
/// the `tT`-fold iterate of the sequence that equals `u0` before `-S` and the
/// sweep's own states afterwards. Its one-window defect is bounded by
/// `max(||u0||, l1 + ||h||) + l1 + ||h||` with the state-independent `l1`.
pub fn sweep_l2(op: &HammersteinOperator, u0: &GridFunction, source: BoundSource) -> Result<f64> {
    let theta = op.period() as i64;
    let mut l1_max: f64 = 0.0;
    for s in 0..theta {
        let kb = op.kernel_bound(s, source)?;
        let l1 = if kb == 0.0 { 0.0 } else { kb * op.growth().sup_bound(s) };
        l1_max = l1_max.max(l1);
    }
    let image = l1_max + op.forcing().sup_norm();
    Ok(u0.sup_norm().max(image) + image)
}

/// One period of approximate attractor fibers with their certified error.
#[derive(Clone, Debug)]
pub struct AttractorFibers {
    pub theta: usize,
    /// Fibers at times `0..theta`.
    pub fibers: Vec<GridFunction>,
    pub certified_error: f64,
    pub budget: ErrorBudget,
    pub ell: f64,
}

impl AttractorFibers {
    pub fn fiber(&self, t: i64) -> &GridFunction {
        &self.fibers[t.rem_euclid(self.theta as i64) as usize]
    }

    /// Total populations of the fibers at `t = 0..theta`.
    pub fn totals(&self) -> Vec<f64> {
        self.fibers.iter().map(GridFunction::total_population).collect()
    }

    /// `(1/theta) sum_{t < theta} total(u*_t)`.
    pub fn mean_total_population(&self) -> f64 {
        self.totals().iter().sum::<f64>() / self.theta as f64
    }

    /// `max_t ||H_t(u*_t) - u*_{t+1}||` over one period.
    pub fn invariance_defect<P: Process + ?Sized>(&self, op: &P) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for t in 0..self.theta as i64 {
            let image = op.step(t, self.fiber(t))?;
            worst = worst.max(image.sup_distance(self.fiber(t + 1))?);
        }
        Ok(worst)
    }

    /// States at `t = 0..=horizon` continuing forward from the first fiber;
    /// entries past one period are computed, not copied.
    pub fn forward_states<P: Process + ?Sized>(&self, op: &P, horizon: usize) -> Result<Vec<GridFunction>> {
        let mut out: Vec<GridFunction> = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            if t < self.theta {
                out.push(self.fibers[t].clone());
            } else {
                let next = op.step(t as i64 - 1, &out[t - 1])?;
                out.push(next);
            }
        }
        Ok(out)
    }
}

/// Default guard on the pullback depth.
pub const DEFAULT_MAX_STEPS: u64 = 50_000_000;

/// Pullback approximation of the periodic attractor.
///
/// Starts from `u0` at time `-S` and sweeps forward; the states at times
/// `0..theta` are the fibers. `certified_error = ell^t / (1 - ell) * l2`
/// with `t` and `l2` taken from `budget`.
pub fn pullback_fibers<P: Process + ?Sized>(
    op: &P,
    cert: &ContractionCertificate,
    budget: &ErrorBudget,
    u0: &GridFunction,
    max_steps: u64,
) -> Result<AttractorFibers> {
    if !cert.is_valid() {
        return Err(Error::NoContraction { ell: cert.ell });
    }
    if budget.steps > max_steps {
        return Err(Error::BudgetExceeded {
            steps: budget.steps,
            limit: max_steps,
        });
    }
    let theta = op.period();
    let start = -(budget.steps as i64);
    let mut state = general_solution(op, 0, start, u0)?;
    let mut fibers = Vec::with_capacity(theta);
    for t in 0..theta as i64 {
        let next = op.step(t, &state)?;
        fibers.push(std::mem::replace(&mut state, next));
    }
    Ok(AttractorFibers {
        theta,
        fibers,
        certified_error: budget.error_bound(cert.ell),
        budget: *budget,
        ell: cert.ell,
    })
}

/// Distances `d_t = dist(phi(t, tau, B), {u*_t})` for `t = tau..=tau + horizon`.
pub fn attraction_rate<P: Process + ?Sized>(
    op: &P,
    fibers: &AttractorFibers,
    set: &[GridFunction],
    tau: i64,
    horizon: usize,
) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::invalid("attraction rate needs a nonempty set"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let mut states = set.to_vec();
    let mut series = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon as i64 {
        let t = tau + k;
        series.push(hausdorff_semidistance(&states, std::slice::from_ref(fibers.fiber(t)))?);
        if k < horizon as i64 {
            states = states
                .iter()
                .map(|u| op.step(t, u))
                .collect::<Result<Vec<_>>>()?;
        }
    }
    Ok(series)
}

/// Upper bound for `attraction_rate` at time `t`: the step product applied to
/// the initial distance, with the fiber error on both ends.
pub fn attraction_bound(
    cert: &ContractionCertificate,
    tau: i64,
    t: i64,
    initial_distance: f64,
    certified_error: f64,
) -> f64 {
    cert.product(tau, t) * (initial_distance + certified_error) + certified_error
}

/// A map `F` on a metric space whose `T`-th iterate contracts by `ell`.
pub trait IterateContraction {
    type State: Clone;

    fn apply(&self, x: &Self::State) -> Result<Self::State>;

    fn distance(&self, a: &Self::State, b: &Self::State) -> Result<f64>;

    /// Iterate order `T`.
    fn order(&self) -> usize;

    /// Contraction factor of `F^T`.
    fn ell(&self) -> f64;

    fn apply_window(&self, x: &Self::State) -> Result<Self::State> {
        let mut y = x.clone();
        for _ in 0..self.order() {
            y = self.apply(&y)?;
        }
        Ok(y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint<S> {
    pub state: S,
    pub error_bound: f64,
    /// Windows of `F^T` applied.
    pub windows: u64,
}

/// Iterates `F^T` from `x0` until the a-priori estimate
/// `ell^t / (1 - ell) d(x0, F^T x0)` drops to `tol`.
pub fn fixed_point_iterate<P: IterateContraction>(
    problem: &P,
    x0: &P::State,
    tol: f64,
) -> Result<FixedPoint<P::State>> {
    let ell = problem.ell();
    if !(ell < 1.0) {
        return Err(Error::NoContraction { ell });
    }
    let first = problem.apply_window(x0)?;
    let d0 = problem.distance(x0, &first)?;
    if !d0.is_finite() {
        return Err(Error::DivergentInput(format!("initial defect d(x0, F^T x0) = {d0}")));
    }
    if d0 == 0.0 {
        return Ok(FixedPoint {
            state: x0.clone(),
            error_bound: 0.0,
            windows: 0,
        });
    }
    let budget = required_iterations(ell, d0, tol, problem.order())?;
    if budget.windows == 0 {
        return Ok(FixedPoint {
            state: x0.clone(),
            error_bound: budget.error_bound(ell),
            windows: 0,
        });
    }
    let mut x = first;
    for _ in 1..budget.windows {
        x = problem.apply_window(&x)?;
    }
    Ok(FixedPoint {
        state: x,
        error_bound: budget.error_bound(ell),
        windows: budget.windows,
    })
}

/// Closure-backed [`IterateContraction`].
pub struct FnContraction<S, F, D> {
    pub map: F,
    pub metric: D,
    pub order: usize,
    pub ell: f64,
    _state: std::marker::PhantomData<fn() -> S>,
}

impl<S, F, D> FnContraction<S, F, D>
where
    S: Clone,
    F: Fn(&S) -> S,
    D: Fn(&S, &S) -> f64,
{
    pub fn new(map: F, metric: D, order: usize, ell: f64) -> Self {
        FnContraction {
            map,
            metric,
            order,
            ell,
            _state: std::marker::PhantomData,
        }
    }
}

impl<S, F, D> IterateContraction for FnContraction<S, F, D>
where
    S: Clone,
    F: Fn(&S) -> S,
    D: Fn(&S, &S) -> f64,
{
    type State = S;

    fn apply(&self, x: &S) -> Result<S> {
        Ok((self.map)(x))
    }

    fn distance(&self, a: &S, b: &S) -> Result<f64> {
        Ok((self.metric)(a, b))
    }

    fn order(&self) -> usize {
        self.order
    }

    fn ell(&self) -> f64 {
        self.ell
    }
}

/// The sequence-space lift of a periodic process: a `theta`-periodic
/// sequence `(u_s)` maps to `(H_{s-1}(u_{s-1}))`. Its fixed point is the
/// periodic entire solution, and `F^T` contracts by the certificate's `ell`
/// in the sup-over-`s` metric.
pub struct PeriodicLift<'a, P: Process + ?Sized> {
    pub op: &'a P,
    pub cert: &'a ContractionCertificate,
}

impl<P: Process + ?Sized> IterateContraction for PeriodicLift<'_, P> {
    type State = Vec<GridFunction>;

    fn apply(&self, x: &Self::State) -> Result<Self::State> {
        let theta = x.len();
        (0..theta)
            .map(|s| {
                let prev = (s + theta - 1) % theta;
                self.op.step(s as i64 - 1, &x[prev])
            })
            .collect()
    }

    fn distance(&self, a: &Self::State, b: &Self::State) -> Result<f64> {
        a.iter()
            .zip(b)
            .try_fold(0.0, |m: f64, (u, v)| Ok(m.max(u.sup_distance(v)?)))
    }

    fn order(&self) -> usize {
        self.cert.window
    }

    fn ell(&self) -> f64 {
        self.cert.ell
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::{GrowthFamily, GrowthSpec, KernelFamily, KernelSpec, Profile, Schedule, SeasonalForcing, Variant};

    #[test]
    fn certificates() {
        let c = certify_contraction(&[0.9], 7).unwrap();
        assert!((c.ell - 0.4782969).abs() < 1e-12);
        assert!(c.is_valid());
        let c = certify_contraction(&[1.0, 1.0, 1.0], 4).unwrap();
        assert_eq!(c.ell, 1.0);
        assert!(!c.is_valid());
        // sup over window starts
        let c = certify_contraction(&[2.0, 0.1, 0.3], 2).unwrap();
        assert!((c.ell - 0.6).abs() < 1e-15);
        assert!(certify_contraction(&[], 1).is_err());
        assert!(certify_contraction(&[0.5], 0).is_err());
        assert!(certify_contraction(&[-0.5], 1).is_err());
    }

    #[test]
    fn budgets() {
        let b = required_iterations(0.5, 1.0, 0.5, 3).unwrap();
        assert_eq!((b.windows, b.steps), (2, 6));
        let b = required_iterations(0.5, 0.0, 1e-6, 365).unwrap();
        assert_eq!((b.windows, b.steps), (0, 0));
        assert!(matches!(required_iterations(1.0, 1.0, 0.1, 1), Err(Error::NoContraction { .. })));
        assert!(required_iterations(0.5, 1.0, 0.0, 1).is_err());
        let b = required_iterations(0.0, 3.0, 1e-9, 5).unwrap();
        assert_eq!(b.windows, 1);
    }

    #[test]
    fn budget_matches_log2_formula_at_half() {
        for &l2 in &[0.3, 1.0, 4.2, 6.1046, 8.3, 1234.5] {
            for &tol in &[1e-3, 1e-6, 1e-9] {
                let b = required_iterations(0.5, l2, tol, 1).unwrap();
                let expect = (2.0 * l2 / tol).log2().ceil().max(0.0) as u64;
                assert_eq!(b.windows, expect, "l2={l2} tol={tol}");
            }
        }
    }

    #[test]
    fn affine_fixed_point() {
        let p = FnContraction::new(|x: &f64| 0.5 * x + 1.0, |a: &f64, b: &f64| (a - b).abs(), 1, 0.5);
        let fp = fixed_point_iterate(&p, &0.0, 1e-12).unwrap();
        assert!((fp.state - 2.0).abs() <= 1e-12);
        assert!((fp.state - 2.0).abs() <= fp.error_bound);
    }

    #[test]
    fn already_fixed() {
        let p = FnContraction::new(|x: &f64| 0.5 * x + 1.0, |a: &f64, b: &f64| (a - b).abs(), 1, 0.5);
        let fp = fixed_point_iterate(&p, &2.0, 1e-12).unwrap();
        assert_eq!(fp, FixedPoint { state: 2.0, error_bound: 0.0, windows: 0 });
    }

    #[test]
    fn non_contractive_and_divergent_inputs() {
        let p = FnContraction::new(|x: &f64| 2.0 * x, |a: &f64, b: &f64| (a - b).abs(), 1, 2.0);
        assert!(matches!(fixed_point_iterate(&p, &1.0, 1e-6), Err(Error::NoContraction { .. })));
        let p = FnContraction::new(|x: &f64| 0.5 * x, |a: &f64, b: &f64| (a - b).abs(), 1, 0.5);
        assert!(matches!(fixed_point_iterate(&p, &f64::INFINITY, 1e-6), Err(Error::DivergentInput(_))));
    }

    #[test]
    fn second_iterate_contraction() {
        let max_dist = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
        let p = FnContraction::new(|v: &[f64; 2]| [1.2 * v[1], 0.4 * v[0]], max_dist, 2, 0.48);
        let fp = fixed_point_iterate(&p, &[3.0, -1.0], 1e-10).unwrap();
        assert!(max_dist(&fp.state, &[0.0, 0.0]) <= fp.error_bound * (1.0 + 1e-12));
        assert!(fp.error_bound <= 1e-10);
    }

    fn small_operator(beta: f64, theta: usize) -> HammersteinOperator {
        let grid = Grid::trapezoid(4.0, 40).unwrap();
        let kernel = KernelSpec::new(KernelFamily::Laplace, Schedule::constant(2.0)).unwrap();
        let growth = GrowthSpec::new(
            GrowthFamily::BevertonHolt,
            Schedule::sinusoidal(beta, 0.5, theta).unwrap(),
            Profile::Constant(1.0),
            4.0,
            None,
        )
        .unwrap();
        HammersteinOperator::new(kernel, growth, SeasonalForcing::variant(Variant::H1, theta).unwrap(), grid)
    }

    #[test]
    fn zero_growth_fibers_are_forcing_profiles() {
        let op = small_operator(0.0, 8);
        let cert = certify_process(&op, 8).unwrap();
        assert_eq!(cert.ell, 0.0);
        let u0 = GridFunction::constant(op.grid(), 2.5);
        let l2 = compute_l2(&op, &u0, 8, L2Mode::UpperBound, BoundSource::Discrete).unwrap();
        let budget = required_iterations(cert.ell, l2, 1e-6, 8).unwrap();
        let fibers = pullback_fibers(&op, &cert, &budget, &u0, DEFAULT_MAX_STEPS).unwrap();
        for t in 0..8 {
            assert_eq!(fibers.fiber(t), &op.forcing_on_grid(t - 1));
        }
    }

    #[test]
    fn l2_cases() {
        let op = small_operator(0.0, 4);
        let grid = op.grid().clone();
        let zero_forcing = HammersteinOperator::new(
            op.kernel().clone(),
            op.growth().clone(),
            SeasonalForcing::new(vec![0.0], 1).unwrap(),
            grid.clone(),
        );
        let u0 = GridFunction::zeros(&grid);
        for mode in [L2Mode::UpperBound, L2Mode::StateDependent] {
            assert_eq!(compute_l2(&zero_forcing, &u0, 3, mode, BoundSource::Discrete).unwrap(), 0.0);
        }

        let op = small_operator(0.7, 6);
        let u0 = GridFunction::from_fn(op.grid(), |x| 1.0 + x * x);
        let upper = compute_l2(&op, &u0, 6, L2Mode::UpperBound, BoundSource::ClosedForm).unwrap();
        let sup_beta = (0..6).map(|t| op.growth().beta(t)).fold(0.0, f64::max);
        let expect = u0.sup_norm() + (1.0 - (-4.0f64).exp()) * sup_beta + 2.0;
        assert!((upper - expect).abs() < 1e-12);
        let state = compute_l2(&op, &u0, 6, L2Mode::StateDependent, BoundSource::ClosedForm).unwrap();
        assert!(state <= upper);
        assert!(sweep_l2(&op, &u0, BoundSource::ClosedForm).unwrap() >= upper);
    }

    #[test]
    fn sweep_and_lift_agree() {
        let op = small_operator(0.8, 5);
        let cert = certify_process(&op, 5).unwrap();
        assert!(cert.is_valid());
        let u0 = GridFunction::constant(op.grid(), 1.0);
        let l2 = sweep_l2(&op, &u0, BoundSource::Discrete).unwrap();
        let budget = required_iterations(cert.ell, l2, 1e-10, 5).unwrap();
        let fibers = pullback_fibers(&op, &cert, &budget, &u0, DEFAULT_MAX_STEPS).unwrap();
        let lift = PeriodicLift { op: &op, cert: &cert };
        let fp = fixed_point_iterate(&lift, &vec![u0.clone(); 5], 1e-10).unwrap();
        for t in 0..5 {
            let d = fibers.fibers[t].sup_distance(&fp.state[t]).unwrap();
            assert!(d <= fibers.certified_error + fp.error_bound);
        }
        assert!(fibers.invariance_defect(&op).unwrap() <= 2.0 * fibers.certified_error);
    }

    #[test]
    fn pullback_errors() {
        let op = small_operator(5.0, 3);
        let cert = certify_process(&op, 3).unwrap();
        assert!(!cert.is_valid());
        let budget = ErrorBudget { l2: 1.0, tol: 1e-3, window: 3, windows: 1, steps: 3 };
        let u0 = GridFunction::zeros(op.grid());
        assert!(matches!(pullback_fibers(&op, &cert, &budget, &u0, 100), Err(Error::NoContraction { .. })));

        let op = small_operator(0.5, 3);
        let cert = certify_process(&op, 3).unwrap();
        let budget = required_iterations(cert.ell, 10.0, 1e-12, 3).unwrap();
        assert!(matches!(
            pullback_fibers(&op, &cert, &budget, &u0, 6),
            Err(Error::BudgetExceeded { limit: 6, .. })
        ));
    }

    #[test]
    fn attraction_from_the_attractor() {
        let op = small_operator(0.6, 4);
        let cert = certify_process(&op, 4).unwrap();
        let u0 = GridFunction::zeros(op.grid());
        let l2 = sweep_l2(&op, &u0, BoundSource::Discrete).unwrap();
        let budget = required_iterations(cert.ell, l2, 1e-9, 4).unwrap();
        let fibers = pullback_fibers(&op, &cert, &budget, &u0, DEFAULT_MAX_STEPS).unwrap();
        let series = attraction_rate(&op, &fibers, &[fibers.fiber(2).clone()], 2, 12).unwrap();
        assert_eq!(series.len(), 13);
        assert!(series.iter().all(|&d| d <= 2.0 * fibers.certified_error));

        let far = [GridFunction::constant(op.grid(), 10.0), GridFunction::constant(op.grid(), -3.0)];
        let series = attraction_rate(&op, &fibers, &far, 2, 12).unwrap();
        let d0 = series[0];
        for (k, &d) in series.iter().enumerate() {
            let bound = attraction_bound(&cert, 2, 2 + k as i64, d0, fibers.certified_error);
            assert!(d <= bound, "k={k}: {d} > {bound}");
        }
        assert!(attraction_rate(&op, &fibers, &[], 0, 3).is_err());
    }
}
