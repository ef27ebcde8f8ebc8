//! Survival above `delta n^alpha` at generation `[n^alpha t]` against the
//! Feller diffusion.

use crate::brw::{generation_horizon, run_to_horizon_with, SiteConfiguration, Stepper};
use crate::error::Result;
use crate::feller::{feller_exact_marginal, feller_extinction_probability};
use crate::gw::survival_probability_from;
use crate::rng::StreamFamily;
use crate::stats::McEstimate;

use super::config::{fmt_float, ExperimentConfig};
use super::report::{Cell, Curve, ExperimentReport, RawRow, Verdict};
use super::tolerances::Tolerances;
use super::initial_mass;

const CURVE_POINTS: usize = 41;
const CURVE_STEP: f64 = 0.1;

fn exceed_fraction(samples: &[f64], threshold: f64) -> McEstimate {
    let hits = samples.iter().filter(|&&x| x > threshold).count() as u64;
    McEstimate::proportion(hits, samples.len() as u64)
}

pub fn run_total_mass(config: &ExperimentConfig, tolerances: &Tolerances) -> Result<ExperimentReport> {
    let law = config.offspring();
    let sigma2 = law.variance();
    let k_sigma: f64 = tolerances.get("total_mass_k_sigma")?;
    let slack: f64 = tolerances.get("total_mass_slack")?;
    let mut report = ExperimentReport::new(config);
    let mut curve = Curve::new("total_mass_tail", &["n", "delta", "empirical", "feller"]);
    let needs_feller = config.delta.iter().any(|&d| d > 0.0);
    for &n in &config.n_grid {
        let params = config.params(n)?;
        let horizon = generation_horizon(n, config.alpha, config.t);
        let z0 = initial_mass(n, config.alpha, config.y);
        let mass_scale = (n as f64).powf(config.alpha);
        let streams = StreamFamily::new(config.master_seed, "total_mass", n);
        let initial = SiteConfiguration::point(0, z0);
        let runs = streams.run_with(config.replicates, Stepper::new, |stepper, _, rng| {
            run_to_horizon_with(stepper, &initial, &params, &law, horizon, &[], rng)
                .map(|r| (r.final_total, r.particle_generations))
        });
        let mut masses = Vec::with_capacity(runs.len());
        let mut work = 0;
        for (i, run) in runs.into_iter().enumerate() {
            let (total, w) = run?;
            work += w;
            report.raw.push(RawRow {
                replicate: i as u64,
                n,
                survived: total > 0,
                statistic: "final_total",
                value: total as f64,
            });
            masses.push(total as f64 / mass_scale);
        }
        let feller: Vec<f64> = if needs_feller {
            let fs = streams.derive("feller");
            fs.run(config.feller_samples, |_, rng| feller_exact_marginal(config.y, sigma2, config.t, rng))
                .into_iter()
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };

        let mut cell = Cell::new(n);
        cell.estimate("rescaled_mass_mean", McEstimate::from_samples(&masses));
        cell.theory("rescaled_mass_mean", config.y);
        cell.count("horizon", horizon);
        cell.count("initial_particles", z0);
        cell.count("replicates", config.replicates);
        for &delta in &config.delta {
            let tag = fmt_float(delta);
            let emp = exceed_fraction(&masses, delta);
            cell.estimate(&format!("exceed_delta_{tag}"), emp);
            if delta == 0.0 {
                let limit = 1.0 - feller_extinction_probability(config.y, sigma2, config.t);
                cell.theory("exceed_delta_0", limit);
                cell.theory("exceed_delta_0_finite_n", survival_probability_from(&law, z0, horizon));
                let tol = k_sigma * emp.stderr + slack;
                cell.verdict(
                    "exceed_delta_0",
                    Verdict::at_most(
                        (emp.value - limit).abs(),
                        tol,
                        format!("|P(Z > 0) - (1 - exp(-2y/(t sigma^2)))| <= {k_sigma} se + {slack}"),
                    ),
                );
            } else {
                let theory = exceed_fraction(&feller, delta);
                cell.estimate(&format!("feller_exceed_delta_{tag}"), theory);
                let tol = k_sigma * emp.stderr.hypot(theory.stderr) + slack;
                cell.verdict(
                    &format!("exceed_delta_{tag}"),
                    Verdict::at_most(
                        (emp.value - theory.value).abs(),
                        tol,
                        format!("|P(Z > {tag} n^alpha) - P(Y_t > {tag})| <= {k_sigma} combined se + {slack}"),
                    ),
                );
            }
        }
        if needs_feller {
            for i in 0..CURVE_POINTS {
                let d = i as f64 * CURVE_STEP;
                curve.push(vec![
                    n as f64,
                    d,
                    exceed_fraction(&masses, d).value,
                    exceed_fraction(&feller, d).value,
                ]);
            }
        }
        report.add_event("replicates", config.replicates);
        report.add_event("survivors", masses.iter().filter(|&&m| m > 0.0).count() as u64);
        report.add_event("feller_samples", feller.len() as u64);
        report.add_event("particle_generations", work);
        report.cells.push(cell);
    }
    if !curve.rows.is_empty() {
        report.curves.push(curve);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exceedance_counts_strictly() {
        let e = exceed_fraction(&[0.0, 0.5, 1.0, 2.0], 0.5);
        assert_eq!(e.value, 0.5);
        assert_eq!(exceed_fraction(&[0.0, 0.5], 10.0).value, 0.0);
    }
}
