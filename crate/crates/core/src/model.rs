//! Catalog of dispersal kernels, growth maps and seasonal forcing terms,
//! together with their closed-form bounds and Lipschitz data.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use libm::erf;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Subintervals of the fine grid used to sample profile extrema.
pub const PROFILE_SAMPLE_SUBINTERVALS: usize = 2000;

/// A periodic sequence indexed by integer time; period 1 is a constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    values: Vec<f64>,
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule { values: vec![value] }
    }

    pub fn periodic(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("periodic schedule needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("schedule values must be finite"));
        }
        Ok(Schedule { values })
    }

    /// `amplitude * (1 + modulation * sin(2 pi r / theta))` for `r = 0..theta`.
    pub fn sinusoidal(amplitude: f64, modulation: f64, theta: usize) -> Result<Self> {
        if theta == 0 {
            return Err(Error::invalid("period must be at least 1"));
        }
        Self::periodic(
            (0..theta)
                .map(|r| amplitude * (1.0 + modulation * (2.0 * PI * r as f64 / theta as f64).sin()))
                .collect(),
        )
    }

    pub fn at(&self, t: i64) -> f64 {
        self.values[t.rem_euclid(self.values.len() as i64) as usize]
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Laplace,
    Gauss,
    Tent,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Laplace => "laplace",
            KernelFamily::Gauss => "gauss",
            KernelFamily::Tent => "tent",
        }
    }

    /// Kernel value for dispersal scale `a` and offset `x - y`.
    #[inline]
    pub fn eval(self, a: f64, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        match self {
            KernelFamily::Laplace => 0.5 * a * (-a * d).exp(),
            KernelFamily::Gauss => a / PI.sqrt() * (-(a * d) * (a * d)).exp(),
            KernelFamily::Tent => (a - a * a * d).max(0.0),
        }
    }

    /// Closed form of `sup_x int |k(x, y)| dy` over `[-L/2, L/2]`.
    ///
    /// The tent formula `aL - a^2 L^2 / 4` is the mass seen from the centre
    /// only while the tent support `2/a` covers the whole domain (`aL <= 2`);
    /// outside that window it stops being an upper bound.
    pub fn bound(self, a: f64, length: f64) -> Result<f64> {
        match self {
            KernelFamily::Laplace => Ok(-(-0.5 * a * length).exp_m1()),
            KernelFamily::Gauss => Ok(erf(0.5 * a * length)),
            KernelFamily::Tent => {
                let value = a * length - 0.25 * a * a * length * length;
                if a * length > 2.0 || !(0.0..=1.0).contains(&value) {
                    Err(Error::BoundOutOfRange {
                        family: self.name(),
                        a,
                        length,
                        value,
                    })
                } else {
                    Ok(value)
                }
            }
        }
    }
}

/// Dispersal kernel with a (possibly periodic) scale parameter `a_t > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    scale: Schedule,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, scale: Schedule) -> Result<Self> {
        if scale.values().iter().any(|&a| a <= 0.0) {
            return Err(Error::invalid("kernel scale a_t must be positive"));
        }
        Ok(KernelSpec { family, scale })
    }

    pub fn scale(&self) -> &Schedule {
        &self.scale
    }

    pub fn scale_at(&self, t: i64) -> f64 {
        self.scale.at(t)
    }

    pub fn eval(&self, t: i64, x: f64, y: f64) -> f64 {
        self.family.eval(self.scale.at(t), x, y)
    }

    pub fn bound(&self, t: i64, length: f64) -> Result<f64> {
        self.family.bound(self.scale.at(t), length)
    }

    /// Node maximum of the quadrature row sums `sum_j w_j |k_t(x_i, y_j)|`.
    ///
    /// This is exactly the sup-norm operator bound of the discretised
    /// integral operator on `grid`.
    pub fn bound_numeric(&self, t: i64, grid: &Grid) -> f64 {
        let a = self.scale.at(t);
        grid.nodes()
            .iter()
            .map(|&x| {
                grid.nodes()
                    .iter()
                    .zip(grid.weights())
                    .map(|(&y, &w)| w * self.family.eval(a, x, y).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Closed form when it is valid, quadrature row sums otherwise.
    pub fn bound_or_numeric(&self, t: i64, grid: &Grid) -> f64 {
        self.bound(t, grid.length())
            .unwrap_or_else(|_| self.bound_numeric(t, grid))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthFamily {
    Logistic,
    BevertonHolt,
    Ricker,
}

impl GrowthFamily {
    pub fn name(self) -> &'static str {
        match self {
            GrowthFamily::Logistic => "logistic",
            GrowthFamily::BevertonHolt => "beverton-holt",
            GrowthFamily::Ricker => "ricker",
        }
    }

    /// Growth of population `z` under local rate `b`.
    #[inline]
    pub fn eval(self, b: f64, z: f64) -> f64 {
        match self {
            GrowthFamily::Logistic => (b * z * (1.0 - z)).max(0.0),
            GrowthFamily::BevertonHolt => b * z / (1.0 + z.abs()),
            GrowthFamily::Ricker => z * (-b * z.abs()).exp(),
        }
    }
}

/// Spatial profile `b(x)` of the growth rate.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `slope * |x| + offset`
    AbsLinear { slope: f64, offset: f64 },
    /// Coefficients in increasing degree.
    Polynomial(Vec<f64>),
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::AbsLinear { slope, offset } => slope * x.abs() + offset,
            Profile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &k| acc * x + k),
        }
    }

    /// Node min and max over a fine trapezoid grid of `[-L/2, L/2]`.
    pub fn sampled_range(&self, length: f64) -> Result<(f64, f64)> {
        let grid = Grid::trapezoid(length, PROFILE_SAMPLE_SUBINTERVALS)?;
        Ok(grid
            .nodes()
            .iter()
            .map(|&x| self.eval(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            }))
    }
}

/// Growth map `g_t(x, z)` with rate `b_t(x) = alpha_t * profile(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthSpec {
    pub family: GrowthFamily,
    alpha: Schedule,
    profile: Profile,
    profile_sup: f64,
    profile_inf: f64,
}

impl GrowthSpec {
    /// `exact_sup` overrides the sampled supremum of the profile.
    pub fn new(
        family: GrowthFamily,
        alpha: Schedule,
        profile: Profile,
        length: f64,
        exact_sup: Option<f64>,
    ) -> Result<Self> {
        if alpha.values().iter().any(|&a| a < 0.0) {
            return Err(Error::invalid("growth modulation alpha_t must be nonnegative"));
        }
        let (lo, hi) = profile.sampled_range(length)?;
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 {
            return Err(Error::invalid("growth profile must be finite and nonnegative"));
        }
        let profile_sup = match exact_sup {
            Some(s) if s < hi => {
                return Err(Error::invalid(format!(
                    "declared profile supremum {s} is below the sampled maximum {hi}"
                )))
            }
            Some(s) => s,
            None => hi,
        };
        Ok(GrowthSpec {
            family,
            alpha,
            profile,
            profile_sup,
            profile_inf: lo,
        })
    }

    pub fn alpha(&self) -> &Schedule {
        &self.alpha
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn profile_sup(&self) -> f64 {
        self.profile_sup
    }

    /// Local rate `b_t(x)`.
    pub fn rate(&self, t: i64, x: f64) -> f64 {
        self.alpha.at(t) * self.profile.eval(x)
    }

    pub fn eval(&self, t: i64, x: f64, z: f64) -> f64 {
        self.family.eval(self.rate(t, x), z)
    }

    /// `beta_t = alpha_t * sup |b|`.
    pub fn beta(&self, t: i64) -> f64 {
        self.alpha.at(t) * self.profile_sup
    }

    /// Bound on `sup_{x, z} |g_t(x, z)|`.
    ///
    /// Ricker growth `z exp(-b|z|)` peaks at `1/(e b)`, so its bound is set by
    /// the smallest local rate and is infinite when the rate vanishes somewhere.
    pub fn sup_bound(&self, t: i64) -> f64 {
        match self.family {
            GrowthFamily::Logistic => 0.25 * self.beta(t),
            GrowthFamily::BevertonHolt => self.beta(t),
            GrowthFamily::Ricker => {
                let b_min = self.alpha.at(t) * self.profile_inf;
                if b_min > 0.0 {
                    1.0 / (E * b_min)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Global Lipschitz constant of `z -> g_t(x, z)`, uniform in `x`.
    ///
    /// Ricker growth has slope 1 at the origin regardless of the rate.
    pub fn lipschitz(&self, t: i64) -> f64 {
        match self.family {
            GrowthFamily::Logistic | GrowthFamily::BevertonHolt => self.beta(t),
            GrowthFamily::Ricker => 1.0,
        }
    }
}

/// The four tabulated seasonal support patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    H1,
    H2,
    H3,
    H4,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::H1, Variant::H2, Variant::H3, Variant::H4];

    /// Amplitudes for spring, summer, fall and winter.
    pub fn amplitudes(self) -> [f64; 4] {
        match self {
            Variant::H1 => [1.0, 1.0, 2.0, 2.0],
            Variant::H2 => [1.0, 2.0, 1.0, 2.0],
            Variant::H3 => [2.0, 2.0, 1.0, 1.0],
            Variant::H4 => [2.0, 1.0, 2.0, 1.0],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::H1 => "h1",
            Variant::H2 => "h2",
            Variant::H3 => "h3",
            Variant::H4 => "h4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.label() == s)
    }
}

/// Season boundaries of a period `theta`, split into equal real-valued parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodicSchedule {
    pub theta: usize,
    pub seasons: usize,
}

impl PeriodicSchedule {
    pub fn new(theta: usize, seasons: usize) -> Result<Self> {
        if theta == 0 || seasons == 0 {
            return Err(Error::invalid("period and season count must be at least 1"));
        }
        Ok(PeriodicSchedule { theta, seasons })
    }

    /// Right endpoints `k theta / m` of the half-open seasons.
    pub fn boundaries(&self) -> Vec<f64> {
        (1..=self.seasons)
            .map(|k| k as f64 * self.theta as f64 / self.seasons as f64)
            .collect()
    }

    /// Season index (0-based) of integer time `t`.
    ///
    /// The day `s = ((t - 1) mod theta) + 1` lies in `(0, theta]`; it belongs
    /// to season `k` iff `k theta/m < s <= (k+1) theta/m`, evaluated in exact
    /// integer arithmetic.
    pub fn season(&self, t: i64) -> usize {
        let theta = self.theta as i64;
        let s = (t - 1).rem_euclid(theta) + 1;
        let m = self.seasons as i64;
        // smallest k with m*s <= (k+1)*theta
        ((m * s + theta - 1) / theta - 1) as usize
    }
}

/// Seasonal inhomogeneity `h_t(x) = amplitude(season(t)) * cos(pi x / L)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeasonalForcing {
    amplitudes: Vec<f64>,
    schedule: PeriodicSchedule,
}

impl SeasonalForcing {
    pub fn new(amplitudes: Vec<f64>, theta: usize) -> Result<Self> {
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("forcing amplitudes must be finite"));
        }
        let schedule = PeriodicSchedule::new(theta, amplitudes.len())?;
        Ok(SeasonalForcing {
            amplitudes,
            schedule,
        })
    }

    pub fn variant(variant: Variant, theta: usize) -> Result<Self> {
        Self::new(variant.amplitudes().to_vec(), theta)
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn schedule(&self) -> PeriodicSchedule {
        self.schedule
    }

    pub fn period(&self) -> usize {
        self.schedule.theta
    }

    pub fn amplitude(&self, t: i64) -> f64 {
        self.amplitudes[self.schedule.season(t)]
    }

    /// Spatial shape shared by all seasons.
    pub fn shape(x: f64, length: f64) -> f64 {
        (PI * x / length).cos()
    }

    pub fn eval(&self, t: i64, x: f64, length: f64) -> f64 {
        self.amplitude(t) * Self::shape(x, length)
    }

    /// `sup_t ||h_t||`; the shape peaks at 1 in the middle of the domain.
    pub fn sup_norm(&self) -> f64 {
        self.amplitudes.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// Lipschitz constant of the Hammerstein operator at time `t`:
/// growth Lipschitz constant times the kernel's integral bound.
pub fn hammerstein_lipschitz(
    kernel: &KernelSpec,
    growth: &GrowthSpec,
    t: i64,
    length: f64,
) -> Result<f64> {
    Ok(growth.lipschitz(t) * kernel.bound(t, length)?)
}

/// Same as [`hammerstein_lipschitz`] with the quadrature row-sum bound of
/// `grid`, i.e. the Lipschitz constant of the discretised operator.
pub fn hammerstein_lipschitz_numeric(
    kernel: &KernelSpec,
    growth: &GrowthSpec,
    t: i64,
    grid: &Arc<Grid>,
) -> f64 {
    growth.lipschitz(t) * kernel.bound_numeric(t, grid)
}

/// Amplitude `C` of a sinusoidally modulated rate
/// `alpha_r = C (1 + modulation sin(2 pi r / theta))` such that the period
/// product of `lambda_r = alpha_r * profile_sup * kernel_bounds[r]` equals
/// `target`. `kernel_bounds` is indexed by `r mod len`.
pub fn seasonal_amplitude(
    theta: usize,
    kernel_bounds: &[f64],
    profile_sup: f64,
    modulation: f64,
    target: f64,
) -> Result<f64> {
    if theta == 0 || kernel_bounds.is_empty() {
        return Err(Error::invalid("period must be at least 1"));
    }
    if !(profile_sup > 0.0) || !(target > 0.0) || modulation.abs() >= 1.0 {
        return Err(Error::invalid(
            "need positive profile supremum and target, and |modulation| < 1",
        ));
    }
    if kernel_bounds.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::invalid("kernel bounds must be positive"));
    }
    // work in logs: the raw product over a year under/overflows easily
    let log_sum: f64 = (0..theta)
        .map(|r| {
            let m = 1.0 + modulation * (2.0 * PI * r as f64 / theta as f64).sin();
            (profile_sup * m * kernel_bounds[r % kernel_bounds.len()]).ln()
        })
        .sum();
    Ok(((target.ln() - log_sum) / theta as f64).exp())
}

/// Seasonal amplitude for a Laplace kernel with scale `a` on a domain of
/// length `length`, modulation `1/2` and period product exactly `1/2`.
pub fn example_c(theta: usize, a: f64, length: f64, b_hat_sup: f64) -> Result<f64> {
    if !(a > 0.0 && length > 0.0) {
        return Err(Error::invalid("kernel scale and domain length must be positive"));
    }
    let kb = KernelFamily::Laplace.bound(a, length)?;
    seasonal_amplitude(theta, &[kb], b_hat_sup, 0.5, 0.5)
}
