//! Finite-dimensional semilinear difference equations
//! `u_{t+1} = L_t u_t + K_t(u_t)` with periodic coefficients.
//!
//! All norms are the max-norm on vectors and the induced row-sum norm on
//! matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Induced max-norm of a matrix: the largest absolute row sum.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Nonlinear parts available from configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum Nonlinearity {
    Zero,
    Constant(DVector<f64>),
    /// `offset + tanh(weights * u)` componentwise.
    BoundedSigmoid {
        weights: DMatrix<f64>,
        offset: DVector<f64>,
    },
}

impl Nonlinearity {
    pub fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Nonlinearity::Zero => DVector::zeros(u.len()),
            Nonlinearity::Constant(c) => c.clone(),
            Nonlinearity::BoundedSigmoid { weights, offset } => {
                offset + (weights * u).map(f64::tanh)
            }
        }
    }

    /// Declared Lipschitz constant; `tanh` is 1-Lipschitz so the sigmoid
    /// inherits the norm of its weights.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Nonlinearity::Zero | Nonlinearity::Constant(_) => 0.0,
            Nonlinearity::BoundedSigmoid { weights, .. } => operator_norm(weights),
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Nonlinearity::Zero => None,
            Nonlinearity::Constant(c) => Some(c.len()),
            Nonlinearity::BoundedSigmoid { weights, offset } => {
                if weights.nrows() == weights.ncols() && weights.nrows() == offset.len() {
                    Some(offset.len())
                } else {
                    Some(usize::MAX)
                }
            }
        }
    }
}

/// Largest difference quotient `|K(u) - K(v)| / |u - v|` over random pairs
/// drawn from `[-radius, radius]^d`. A lower estimate of the true constant.
pub fn estimate_lipschitz(nl: &Nonlinearity, dim: usize, samples: usize, radius: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let u = DVector::from_fn(dim, |_, _| rng.random_range(-radius..=radius));
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-radius..=radius));
        let d = max_norm(&(&u - &v));
        if d > 0.0 {
            best = best.max(max_norm(&(nl.eval(&u) - nl.eval(&v))) / d);
        }
    }
    best
}

/// Where the growth constants `gamma`, `alpha_t` came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstantsOrigin {
    /// `alpha_r = ||L_r||`, `gamma = 1`; valid by submultiplicativity.
    NormProduct,
    UserDeclared,
    /// Sampled estimate; not a certificate.
    Estimated,
}

#[derive(Clone, Debug)]
pub struct SemilinearSystem {
    dim: usize,
    linear: Vec<DMatrix<f64>>,
    nonlinear: Vec<Nonlinearity>,
    kappas: Vec<f64>,
    gamma: f64,
    alphas: Vec<f64>,
    origin: ConstantsOrigin,
    period: usize,
}

impl SemilinearSystem {
    /// Builds a system with `L_t = linear[t mod len]`, `K_t = nonlinear[t mod len]`.
    pub fn new(linear: Vec<DMatrix<f64>>, nonlinear: Vec<Nonlinearity>) -> Result<Self> {
        let first = linear
            .first()
            .ok_or_else(|| Error::invalid("need at least one linear part"))?;
        if nonlinear.is_empty() {
            return Err(Error::invalid("need at least one nonlinear part"));
        }
        let dim = first.nrows();
        if dim == 0 || linear.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::invalid("linear parts must be square with a common dimension"));
        }
        if nonlinear.iter().any(|k| k.dim().is_some_and(|d| d != dim)) {
            return Err(Error::invalid("nonlinear parts must match the state dimension"));
        }
        let period = crate::dynamics::lcm(linear.len(), nonlinear.len());
        let kappas = (0..period).map(|t| nonlinear[t % nonlinear.len()].lipschitz()).collect();
        let alphas = (0..period).map(|t| operator_norm(&linear[t % linear.len()])).collect();
        Ok(SemilinearSystem {
            dim,
            linear,
            nonlinear,
            kappas,
            gamma: 1.0,
            alphas,
            origin: ConstantsOrigin::NormProduct,
            period,
        })
    }

    /// Replaces `gamma` and `alpha_t` by user-certified values.
    pub fn with_constants(mut self, gamma: f64, alphas: Vec<f64>) -> Result<Self> {
        if !(gamma >= 1.0) || alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::invalid("need gamma >= 1 and positive alphas"));
        }
        self.gamma = gamma;
        self.alphas = (0..self.period).map(|t| alphas[t % alphas.len()]).collect();
        self.origin = ConstantsOrigin::UserDeclared;
        Ok(self)
    }

    /// Replaces `gamma` by `max ||Phi(t, tau)|| / prod alpha_r` over all pairs
    /// within `horizon` steps, keeping the current alphas.
    pub fn with_estimated_gamma(mut self, horizon: usize) -> Self {
        let mut gamma: f64 = 1.0;
        for tau in 0..self.period as i64 {
            let mut phi = DMatrix::identity(self.dim, self.dim);
            let mut prod = 1.0;
            for t in tau..tau + horizon as i64 {
                phi = self.linear_at(t) * phi;
                prod *= self.alpha(t);
                if prod > 0.0 {
                    gamma = gamma.max(operator_norm(&phi) / prod);
                }
            }
        }
        self.gamma = gamma;
        self.origin = ConstantsOrigin::Estimated;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn origin(&self) -> ConstantsOrigin {
        self.origin
    }

    fn idx(&self, t: i64, len: usize) -> usize {
        t.rem_euclid(len as i64) as usize
    }

    pub fn linear_at(&self, t: i64) -> &DMatrix<f64> {
        &self.linear[self.idx(t, self.linear.len())]
    }

    pub fn nonlinear_at(&self, t: i64) -> &Nonlinearity {
        &self.nonlinear[self.idx(t, self.nonlinear.len())]
    }

    pub fn alpha(&self, t: i64) -> f64 {
        self.alphas[self.idx(t, self.period)]
    }

    pub fn kappa(&self, t: i64) -> f64 {
        self.kappas[self.idx(t, self.period)]
    }

    /// `prod_{r < theta} (alpha_r + gamma kappa_r)`.
    pub fn period_contraction(&self) -> f64 {
        (0..self.period as i64)
            .map(|r| self.alpha(r) + self.gamma * self.kappa(r))
            .product()
    }

    pub fn step(&self, t: i64, u: &DVector<f64>) -> DVector<f64> {
        self.linear_at(t) * u + self.nonlinear_at(t).eval(u)
    }

    /// Stepwise composition `phi(t, tau, u)`.
    pub fn solution(&self, t: i64, tau: i64, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_order(t, tau)?;
        let mut x = u.clone();
        for s in tau..t {
            x = self.step(s, &x);
        }
        Ok(x)
    }

    /// `Phi(t, tau) = L_{t-1} ... L_tau`, identity when `t = tau`.
    pub fn transition(&self, t: i64, tau: i64) -> Result<DMatrix<f64>> {
        check_order(t, tau)?;
        let mut phi = DMatrix::identity(self.dim, self.dim);
        for s in tau..t {
            phi = self.linear_at(s) * phi;
        }
        Ok(phi)
    }

    /// Variation of constants:
    /// `Phi(t, tau) u + sum_{s = tau}^{t-1} Phi(t, s+1) K_s(phi(s, tau, u))`.
    pub fn voc_solution(&self, t: i64, tau: i64, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_order(t, tau)?;
        let mut states = Vec::with_capacity((t - tau) as usize);
        let mut x = u.clone();
        for s in tau..t {
            states.push(x.clone());
            x = self.step(s, &x);
        }
        // accumulate from the right so each Phi(t, s+1) costs one product
        let mut phi = DMatrix::identity(self.dim, self.dim);
        let mut sum = DVector::zeros(self.dim);
        for s in (tau..t).rev() {
            sum += &phi * self.nonlinear_at(s).eval(&states[(s - tau) as usize]);
            phi = &phi * self.linear_at(s);
        }
        Ok(phi * u + sum)
    }

    /// `gamma * delta0 * prod_{r = tau}^{t-1} (alpha_r + gamma kappa_r)`.
    pub fn gronwall_bound(&self, t: i64, tau: i64, delta0: f64) -> Result<f64> {
        check_order(t, tau)?;
        let prod: f64 = (tau..t)
            .map(|r| self.alpha(r) + self.gamma * self.kappa(r))
            .product();
        Ok(self.gamma * delta0 * prod)
    }

    /// Periodic entire solution by pullback: fibers at `t..t + theta` from
    /// starts `t - m theta` with `m` doubling until two estimates differ by at
    /// most `tol (1 - q)`, `q` the period contraction.
    pub fn pullback_limit(&self, t: i64, tol: f64, u0: &DVector<f64>) -> Result<PullbackLimit> {
        if u0.len() != self.dim {
            return Err(Error::invalid("initial state has the wrong dimension"));
        }
        if !(tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        let q = self.period_contraction();
        if !(q < 1.0) {
            return Err(Error::NoContraction { ell: q });
        }
        let theta = self.period as i64;
        let harvest = |m: i64| -> Result<Vec<DVector<f64>>> {
            let mut x = self.solution(t, t - m * theta, u0)?;
            let mut fibers = Vec::with_capacity(self.period);
            for s in t..t + theta {
                let next = self.step(s, &x);
                fibers.push(std::mem::replace(&mut x, next));
            }
            Ok(fibers)
        };
        let mut m = 1i64;
        let mut prev = harvest(m)?;
        const MAX_PERIODS: i64 = 1 << 24;
        loop {
            let next_m = 2 * m;
            let next = harvest(next_m)?;
            let change = prev
                .iter()
                .zip(&next)
                .map(|(a, b)| max_norm(&(a - b)))
                .fold(0.0, f64::max);
            if !change.is_finite() {
                return Err(Error::DivergentInput("pullback iterates blew up".into()));
            }
            if change <= tol * (1.0 - q) {
                return Ok(PullbackLimit {
                    start: t,
                    fibers: next,
                    periods: next_m as u64,
                    last_change: change,
                    contraction: q,
                });
            }
            if next_m >= MAX_PERIODS {
                return Err(Error::BudgetExceeded {
                    steps: (next_m * theta) as u64,
                    limit: (MAX_PERIODS * theta) as u64,
                });
            }
            m = next_m;
            prev = next;
        }
    }
}

fn check_order(t: i64, tau: i64) -> Result<()> {
    if t < tau {
        Err(Error::InvalidTimeOrder { t, tau })
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PullbackLimit {
    pub start: i64,
    /// Fibers at times `start..start + theta`.
    pub fibers: Vec<DVector<f64>>,
    /// Pullback depth in periods.
    pub periods: u64,
    /// Sup distance between the last two estimates.
    pub last_change: f64,
    pub contraction: f64,
}

impl PullbackLimit {
    pub fn fiber(&self, t: i64) -> &DVector<f64> {
        let theta = self.fibers.len() as i64;
        &self.fibers[(t - self.start).rem_euclid(theta) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(l: f64, c: f64) -> SemilinearSystem {
        SemilinearSystem::new(
            vec![DMatrix::from_element(1, 1, l)],
            vec![Nonlinearity::Constant(DVector::from_element(1, c))],
        )
        .unwrap()
    }

    fn random_system(rng: &mut ChaCha8Rng, dim: usize, period: usize) -> SemilinearSystem {
        let linear = (0..period)
            .map(|_| DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.6..0.6) / dim as f64))
            .collect();
        let nonlinear = (0..period)
            .map(|_| Nonlinearity::BoundedSigmoid {
                weights: DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.3..0.3) / dim as f64),
                offset: DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
            })
            .collect();
        SemilinearSystem::new(linear, nonlinear).unwrap()
    }

    #[test]
    fn transitions() {
        let sys = SemilinearSystem::new(vec![DMatrix::identity(2, 2) * 0.5], vec![Nonlinearity::Zero]).unwrap();
        assert_eq!(sys.transition(4, 4).unwrap(), DMatrix::identity(2, 2));
        let phi = sys.transition(3, 0).unwrap();
        assert!((phi - DMatrix::identity(2, 2) * 0.125).amax() < 1e-15);
        assert!(matches!(sys.transition(0, 1), Err(Error::InvalidTimeOrder { .. })));
    }

    #[test]
    fn cocycle_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let dim = rng.random_range(1..6);
            let sys = random_system(&mut rng, dim, 3);
            let tau = rng.random_range(-10..10);
            let s = tau + rng.random_range(0..8);
            let t = s + rng.random_range(0..8);
            let lhs = sys.transition(t, s).unwrap() * sys.transition(s, tau).unwrap();
            let rhs = sys.transition(t, tau).unwrap();
            assert!((lhs - &rhs).amax() <= 1e-12 * rhs.amax().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn voc_cases() {
        let sys = SemilinearSystem::new(
            vec![DMatrix::from_row_slice(2, 2, &[0.3, 0.1, -0.2, 0.4])],
            vec![Nonlinearity::Zero],
        )
        .unwrap();
        let u = DVector::from_vec(vec![1.0, -2.0]);
        let lin = sys.transition(6, 1).unwrap() * &u;
        assert!((sys.voc_solution(6, 1, &u).unwrap() - lin).amax() < 1e-15);
        assert_eq!(sys.voc_solution(2, 2, &u).unwrap(), u);
    }

    #[test]
    fn voc_matches_stepwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dim in 1..=8 {
            let sys = random_system(&mut rng, dim, 2);
            let u = DVector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0));
            let tau = rng.random_range(-5..5);
            let t = tau + rng.random_range(0..50);
            let a = sys.voc_solution(t, tau, &u).unwrap();
            let b = sys.solution(t, tau, &u).unwrap();
            assert!(max_norm(&(&a - &b)) <= 1e-10 * max_norm(&b).max(1.0));
        }
    }

    #[test]
    fn gronwall_cases() {
        let sys = SemilinearSystem::new(vec![DMatrix::identity(1, 1) * 0.7], vec![Nonlinearity::Zero]).unwrap();
        assert!((sys.gronwall_bound(3, 0, 2.0).unwrap() - 2.0 * 0.7f64.powi(3)).abs() < 1e-15);
        assert_eq!(sys.gronwall_bound(5, 5, 1.5).unwrap(), 1.5);
    }

    #[test]
    fn scalar_pullback() {
        let sys = scalar(0.5, 1.0);
        let lim = sys.pullback_limit(0, 1e-12, &DVector::from_element(1, 0.0)).unwrap();
        assert!((lim.fibers[0][0] - 2.0).abs() < 1e-11);

        let sys = SemilinearSystem::new(vec![DMatrix::identity(3, 3) * 0.9], vec![Nonlinearity::Zero]).unwrap();
        let lim = sys.pullback_limit(4, 1e-10, &DVector::from_element(3, 5.0)).unwrap();
        assert!(lim.fibers[0].amax() < 1e-9);
    }

    #[test]
    fn pullback_requires_contraction() {
        let sys = scalar(1.1, 1.0);
        assert!(matches!(
            sys.pullback_limit(0, 1e-6, &DVector::zeros(1)),
            Err(Error::NoContraction { .. })
        ));
    }

    #[test]
    fn declared_kappa_dominates_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = random_system(&mut rng, 4, 1);
        let nl = sys.nonlinear_at(0);
        let sampled = estimate_lipschitz(nl, 4, 10_000, 3.0, 1);
        assert!(sampled <= nl.lipschitz() * (1.0 + 1e-12));
        assert!(sampled > 0.0);
    }

    #[test]
    fn estimated_gamma_is_flagged() {
        let l = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.01, 0.0]);
        let sys = SemilinearSystem::new(vec![l], vec![Nonlinearity::Zero])
            .unwrap()
            .with_constants(1.0, vec![0.2])
            .unwrap()
            .with_estimated_gamma(10);
        assert_eq!(sys.origin(), ConstantsOrigin::Estimated);
        // Phi(1, 0) has norm 2 while alpha = 0.2
        assert!(sys.gamma() >= 10.0);
        for tau in 0..3 {
            for t in tau..tau + 10 {
                let phi = sys.transition(t, tau).unwrap();
                let bound = sys.gamma() * 0.2f64.powi((t - tau) as i32);
                assert!(operator_norm(&phi) <= bound * (1.0 + 1e-12));
            }
        }
    }
}
