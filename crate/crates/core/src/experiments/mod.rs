//! Monte Carlo reproductions of the scaling limits, each producing an
//! [`ExperimentReport`] with estimates, standard errors, closed-form theory
//! values and pass/fail verdicts.
//!
//! Every replicate draws from a stream keyed by `(seed, experiment, n,
//! replicate)` and results are reduced in replicate order, so a report does
//! not depend on the number of worker threads.

mod config;
mod max_displacement;
mod profile;
mod report;
mod survival_curve;
mod tolerances;
mod total_mass;

pub use config::{fmt_float, ExperimentConfig, ExperimentKind, KeyValues, KNOWN_KEYS};
pub use max_displacement::run_max_displacement;
pub use profile::{run_profile, SmoothedProfile};
pub use report::{canonical_json, write_curve, Cell, Curve, ExperimentReport, RawRow, Verdict};
pub use survival_curve::run_survival_curve;
pub use tolerances::Tolerances;
pub use total_mass::run_total_mass;

use crate::error::Result;

/// `ceil(y n^alpha)`, snapping near-integers like [`generation_horizon`] does.
///
/// [`generation_horizon`]: crate::brw::generation_horizon
pub fn initial_mass(n: u64, alpha: f64, y: f64) -> u64 {
    let x = (n as f64).powf(alpha) * y;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) { r as u64 } else { x.ceil() as u64 }
}

/// Replicates needed to expect `target` survivors, with 20% headroom, or
/// `fallback` when no target is set.
pub fn survivor_budget(target: u64, p_survive: f64, fallback: u64) -> u64 {
    if target == 0 {
        return fallback;
    }
    ((1.2 * target as f64 / p_survive).ceil() as u64).max(target)
}

/// Runs the experiment named in `config`.
pub fn run(config: &ExperimentConfig, tolerances: &Tolerances) -> Result<ExperimentReport> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::MaxDisplacement => run_max_displacement(config, tolerances),
        ExperimentKind::Profile => run_profile(config, tolerances),
        ExperimentKind::TotalMass => run_total_mass(config, tolerances),
        ExperimentKind::SurvivalCurve => run_survival_curve(config, tolerances),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_mass_examples() {
        assert_eq!(initial_mass(100, 1.2, 1.0), 252);
        assert_eq!(initial_mass(100, 1.5, 1.0), 1000);
        assert_eq!(initial_mass(100, 1.5, 0.5), 500);
    }

    #[test]
    fn budget_examples() {
        assert_eq!(survivor_budget(0, 0.1, 77), 77);
        assert_eq!(survivor_budget(100, 0.5, 1), 240);
        assert_eq!(survivor_budget(10, 1.0, 1), 12);
    }
}
