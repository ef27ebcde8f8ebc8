//! Critical Galton-Watson processes: survival probabilities by pgf
//! iteration, simulation, and conditional-law diagnostics.

use rand::Rng;

use crate::error::{Error, Result};
use crate::offspring::OffspringLaw;
use crate::rng::StreamFamily;
use crate::stats::{ks_one_sample, MeanVar};

/// Counts stay exact in f64 and in JSON numbers up to here.
pub const POPULATION_CEILING: u64 = 1 << 53;

pub const DEFAULT_MIN_SURVIVORS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GwSnapshot {
    pub generation: u64,
    pub population: u64,
}

/// `rho_m = P(Z_m > 0 | Z_0 = 1) = 1 - f^{om}(0)`, iterated on the
/// complement `r -> 1 - f(1 - r)` from `r = 1`.
pub fn survival_probability(law: &OffspringLaw, m: u64) -> f64 {
    let mut r = 1.0;
    for _ in 0..m {
        r = law.complementary_pgf(r);
    }
    r
}

/// `rho_0, ..., rho_m_max`.
pub fn survival_curve(law: &OffspringLaw, m_max: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m_max as usize + 1);
    let mut r = 1.0;
    out.push(r);
    for _ in 0..m_max {
        r = law.complementary_pgf(r);
        out.push(r);
    }
    out
}

/// Survival of `z0` independent ancestors: `1 - (1 - rho_m)^z0`.
pub fn survival_probability_from(law: &OffspringLaw, z0: u64, m: u64) -> f64 {
    let rho = survival_probability(law, m);
    -(z0 as f64 * (-rho).ln_1p()).exp_m1()
}

/// `E(Z_m | Z_m > 0) = 1 / rho_m`, exact because `E Z_m = 1`.
pub fn conditional_mean_given_survival(law: &OffspringLaw, m: u64) -> f64 {
    1.0 / survival_probability(law, m)
}

/// One generation of offspring with the ceiling check.
pub fn next_generation<R: Rng + ?Sized>(
    law: &OffspringLaw,
    population: u64,
    generation: u64,
    ceiling: u64,
    rng: &mut R,
) -> Result<u64> {
    let next = law.sample_sum(population, rng);
    if next > ceiling {
        return Err(Error::PopulationOverflow { population: next, ceiling, generation: generation + 1 });
    }
    Ok(next)
}

/// The trajectory `Z_0 = z0, ..., Z_horizon`, stopping early at extinction.
pub fn simulate_gw<R: Rng + ?Sized>(
    law: &OffspringLaw,
    z0: u64,
    horizon: u64,
    rng: &mut R,
) -> Result<Vec<GwSnapshot>> {
    simulate_gw_with_ceiling(law, z0, horizon, POPULATION_CEILING, rng)
}

pub fn simulate_gw_with_ceiling<R: Rng + ?Sized>(
    law: &OffspringLaw,
    z0: u64,
    horizon: u64,
    ceiling: u64,
    rng: &mut R,
) -> Result<Vec<GwSnapshot>> {
    let mut out = vec![GwSnapshot { generation: 0, population: z0 }];
    let mut z = z0;
    for g in 0..horizon {
        if z == 0 {
            break;
        }
        z = next_generation(law, z, g, ceiling, rng)?;
        out.push(GwSnapshot { generation: g + 1, population: z });
    }
    Ok(out)
}

/// `Z_m` only.
pub fn population_at<R: Rng + ?Sized>(law: &OffspringLaw, z0: u64, m: u64, rng: &mut R) -> Result<u64> {
    let mut z = z0;
    for g in 0..m {
        if z == 0 {
            return Ok(0);
        }
        z = next_generation(law, z, g, POPULATION_CEILING, rng)?;
    }
    Ok(z)
}

/// Distance of the conditional law of `Z_m / m` to its exponential limit.
#[derive(Clone, Debug, PartialEq)]
pub struct YaglomDiagnostic {
    pub m: u64,
    pub replicates: u64,
    pub survivors: usize,
    /// KS distance to `Exp` with mean `sigma^2 / 2`.
    pub ks_distance: f64,
    pub conditional_mean: f64,
    pub conditional_mean_stderr: f64,
    /// `sigma^2 m / 2`.
    pub limit_mean: f64,
}

pub fn yaglom_diagnostic(
    law: &OffspringLaw,
    m: u64,
    replicates: u64,
    streams: &StreamFamily,
) -> Result<YaglomDiagnostic> {
    yaglom_diagnostic_with_min(law, m, replicates, DEFAULT_MIN_SURVIVORS, streams)
}

pub fn yaglom_diagnostic_with_min(
    law: &OffspringLaw,
    m: u64,
    replicates: u64,
    min_survivors: usize,
    streams: &StreamFamily,
) -> Result<YaglomDiagnostic> {
    if m == 0 || replicates == 0 {
        return Err(Error::InvalidArgument("m and replicates must be at least 1".into()));
    }
    let finals = streams.run(replicates, |_, rng| population_at(law, 1, m, rng));
    let mut survivors = Vec::new();
    for z in finals {
        let z = z?;
        if z > 0 {
            survivors.push(z as f64);
        }
    }
    if survivors.len() < min_survivors {
        return Err(Error::InsufficientSurvivors {
            survivors: survivors.len(),
            replicates,
            required: min_survivors,
            context: format!("Galton-Watson to generation {m}"),
        });
    }
    let mut acc = MeanVar::default();
    for &z in &survivors {
        acc.push(z);
    }
    let mean_limit = law.variance() / 2.0;
    let scaled: Vec<f64> = survivors.iter().map(|z| z / m as f64).collect();
    let ks = ks_one_sample(&scaled, |x| -(-x / mean_limit).exp_m1());
    let est = acc.estimate();
    Ok(YaglomDiagnostic {
        m,
        replicates,
        survivors: survivors.len(),
        ks_distance: ks,
        conditional_mean: est.value,
        conditional_mean_stderr: est.stderr,
        limit_mean: mean_limit * m as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn binary_survives_one_generation_half_the_time() {
        assert_eq!(survival_probability(&OffspringLaw::binary(), 1), 0.5);
        assert_eq!(conditional_mean_given_survival(&OffspringLaw::binary(), 1), 2.0);
    }

    #[test]
    fn geometric_closed_form() {
        let law = OffspringLaw::geometric_half();
        for m in [0u64, 1, 2, 10, 99, 1000] {
            let rho = survival_probability(&law, m);
            assert!((rho * (m + 1) as f64 - 1.0).abs() < 1e-13, "m={m}");
        }
        assert!((conditional_mean_given_survival(&law, 99) - 100.0).abs() < 1e-10);
        assert_eq!(conditional_mean_given_survival(&law, 0), 1.0);
    }

    #[test]
    fn curve_matches_pointwise() {
        let law = OffspringLaw::poisson1();
        let curve = survival_curve(&law, 50);
        assert_eq!(curve[37], survival_probability(&law, 37));
        assert!(curve.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn empty_population_stays_empty() {
        let traj = simulate_gw(&OffspringLaw::binary(), 0, 10, &mut seeded(1)).unwrap();
        assert_eq!(traj, vec![GwSnapshot { generation: 0, population: 0 }]);
    }

    #[test]
    fn ceiling_overflow_is_reported() {
        let law = OffspringLaw::geometric_half();
        let err = simulate_gw_with_ceiling(&law, 1000, 5, 10, &mut seeded(2));
        assert!(matches!(err, Err(Error::PopulationOverflow { .. })));
    }

    #[test]
    fn too_few_survivors_is_an_error() {
        let law = OffspringLaw::geometric_half();
        let streams = StreamFamily::new(3, "yaglom-test", 0);
        let err = yaglom_diagnostic(&law, 500, 1000, &streams);
        assert!(matches!(err, Err(Error::InsufficientSurvivors { .. })));
    }
}
