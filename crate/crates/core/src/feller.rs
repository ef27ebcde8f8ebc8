//! Limit objects for the rescaled measure: the exponential spatial profile
//! and the Feller diffusion `dY = sigma sqrt(Y) dW` for the total mass.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{Error, Result};

/// The law with `P((a, b)) = exp(-4 beta a) - exp(-4 beta b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialProfile {
    beta: f64,
}

impl ExponentialProfile {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("profile needs beta > 0, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rate(&self) -> f64 {
        4.0 * self.beta
    }

    pub fn cdf(&self, a: f64) -> f64 {
        if a <= 0.0 { 0.0 } else { -(-self.rate() * a).exp_m1() }
    }

    pub fn density(&self, a: f64) -> f64 {
        if a < 0.0 { 0.0 } else { self.rate() * (-self.rate() * a).exp() }
    }

    /// `exp(-4 beta a) - exp(-4 beta b)`; `b` may be infinite.
    pub fn mass(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0) || !(a < b) {
            return Err(Error::InvalidArgument(format!("need 0 <= a < b, got a = {a}, b = {b}")));
        }
        Ok((-self.rate() * a).exp() - (-self.rate() * b).exp())
    }
}

pub fn profile_mass(profile: &ExponentialProfile, a: f64, b: f64) -> Result<f64> {
    profile.mass(a, b)
}

/// `X_t((a, b)) = Y_t * pi((a, b))`.
pub fn limit_measure_mass(y_t: f64, profile: &ExponentialProfile, a: f64, b: f64) -> Result<f64> {
    Ok(y_t * profile.mass(a, b)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FellerState {
    pub t: f64,
    pub mass: f64,
    pub sigma2: f64,
    pub y0: f64,
}

fn check_feller(y0: f64, sigma2: f64) -> Result<()> {
    if !(y0 >= 0.0 && y0.is_finite()) {
        return Err(Error::InvalidArgument(format!("initial mass must be >= 0, got {y0}")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma^2 must be > 0, got {sigma2}")));
    }
    Ok(())
}

fn euler_grid(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and t >= 0, got dt = {dt}, t = {t_end}")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    Ok((steps, h))
}

/// Euler-Maruyama path `Y_{k+1} = max(0, Y_k + sigma sqrt(Y_k) sqrt(h) N)`,
/// absorbed at 0. The step is `t_end / ceil(t_end / dt)`.
pub fn feller_euler_path<R: Rng + ?Sized>(
    y0: f64,
    sigma2: f64,
    t_end: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<FellerState>> {
    check_feller(y0, sigma2)?;
    let (steps, h) = euler_grid(t_end, dt)?;
    let sigma_sqrt_h = (sigma2 * h).sqrt();
    let mut path = Vec::with_capacity(steps + 1);
    let mut y = y0;
    path.push(FellerState { t: 0.0, mass: y, sigma2, y0 });
    for k in 1..=steps {
        if y > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            y = (y + sigma_sqrt_h * y.sqrt() * z).max(0.0);
        }
        path.push(FellerState { t: k as f64 * h, mass: y, sigma2, y0 });
    }
    Ok(path)
}

/// Terminal value of [`feller_euler_path`] without storing the path; stops
/// drawing once absorbed.
pub fn feller_euler_terminal<R: Rng + ?Sized>(
    y0: f64,
    sigma2: f64,
    t_end: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    check_feller(y0, sigma2)?;
    let (steps, h) = euler_grid(t_end, dt)?;
    let sigma_sqrt_h = (sigma2 * h).sqrt();
    let mut y = y0;
    for _ in 0..steps {
        if y <= 0.0 {
            return Ok(0.0);
        }
        let z: f64 = rng.sample(StandardNormal);
        y = (y + sigma_sqrt_h * y.sqrt() * z).max(0.0);
    }
    Ok(y)
}

/// Exact draw of `Y_t`: a Poisson(`2 y0 / (sigma^2 t)`) number of
/// exponentials of mean `sigma^2 t / 2`. Its Laplace transform is
/// `exp(-y0 l / (1 + sigma^2 l t / 2))`, the Feller transition law.
pub fn feller_exact_marginal<R: Rng + ?Sized>(y0: f64, sigma2: f64, t: f64, rng: &mut R) -> Result<f64> {
    check_feller(y0, sigma2)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    if y0 == 0.0 {
        return Ok(0.0);
    }
    let scale = sigma2 * t / 2.0;
    let clusters = Poisson::new(y0 / scale).unwrap().sample(rng);
    if clusters == 0.0 {
        return Ok(0.0);
    }
    Ok(Gamma::new(clusters, scale).unwrap().sample(rng))
}

/// `P(Y_t = 0) = exp(-2 y0 / (sigma^2 t))`.
pub fn feller_extinction_probability(y0: f64, sigma2: f64, t: f64) -> f64 {
    (-2.0 * y0 / (sigma2 * t)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn profile_examples() {
        let p = ExponentialProfile::new(0.5).unwrap();
        assert_eq!(p.mass(0.0, f64::INFINITY).unwrap(), 1.0);
        assert!((p.mass(0.0, 0.5).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(p.mass(1.0, 1.0).is_err());
        assert!(p.mass(2.0, 1.0).is_err());
        assert!(ExponentialProfile::new(0.0).is_err());
    }

    #[test]
    fn limit_measure_examples() {
        let p = ExponentialProfile::new(0.5).unwrap();
        assert_eq!(limit_measure_mass(0.0, &p, 0.3, 0.9).unwrap(), 0.0);
        assert_eq!(limit_measure_mass(2.0, &p, 0.0, f64::INFINITY).unwrap(), 2.0);
        let q = ExponentialProfile::new(0.25).unwrap();
        let v = limit_measure_mass(1.0, &q, 1.0, 2.0).unwrap();
        assert!((v - ((-1.0f64).exp() - (-2.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.23254).abs() < 1e-5);
    }

    #[test]
    fn zero_mass_is_absorbing() {
        let path = feller_euler_path(0.0, 2.0, 1.0, 0.01, &mut seeded(1)).unwrap();
        assert_eq!(path.len(), 101);
        assert!(path.iter().all(|s| s.mass == 0.0));
        assert_eq!(feller_exact_marginal(0.0, 2.0, 1.0, &mut seeded(1)).unwrap(), 0.0);
    }

    #[test]
    fn path_time_grid() {
        let path = feller_euler_path(1.0, 2.0, 1.0, 0.3, &mut seeded(2)).unwrap();
        assert_eq!(path.len(), 5);
        assert!((path.last().unwrap().t - 1.0).abs() < 1e-15);
        assert!(path.windows(2).all(|w| w[0].mass > 0.0 || w[1].mass == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = seeded(3);
        assert!(feller_euler_path(1.0, 2.0, 1.0, 0.0, &mut rng).is_err());
        assert!(feller_euler_path(-1.0, 2.0, 1.0, 0.1, &mut rng).is_err());
        assert!(feller_exact_marginal(1.0, 2.0, 0.0, &mut rng).is_err());
    }
}
