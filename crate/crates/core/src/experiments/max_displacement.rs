//! Rightmost particle at generation `[n^alpha]` given survival, on the scale
//! `sqrt(n) log n`.

use crate::brw::sample_conditioned_rightmost;
use crate::error::Result;
use crate::gw::survival_probability;
use crate::rng::StreamFamily;
use crate::stats::{quantile_estimate, sectioned_quantile, McEstimate};

use super::config::ExperimentConfig;
use super::report::{Cell, Curve, ExperimentReport, RawRow, Verdict};
use super::tolerances::Tolerances;
use super::survivor_budget;

/// Batches for the median's standard error; `R` lives on a lattice, so
/// order-statistic intervals collapse onto a single atom.
const SECTIONS: usize = 20;

/// `(alpha - 1) / (4 beta)`; infinite at `beta = 0`.
pub fn max_displacement_constant(alpha: f64, beta: f64) -> f64 {
    (alpha - 1.0) / (4.0 * beta)
}

pub fn run_max_displacement(config: &ExperimentConfig, tolerances: &Tolerances) -> Result<ExperimentReport> {
    let law = config.offspring();
    let theory = max_displacement_constant(config.alpha, config.beta);
    let mut report = ExperimentReport::new(config);
    let mut quantiles = Curve::new("rightmost_quantiles", &["n", "q", "scaled_rightmost"]);
    let mut previous_distance: Option<f64> = None;
    for &n in &config.n_grid {
        let params = config.params(n)?;
        let horizon = crate::brw::generation_horizon(n, config.alpha, 1.0);
        let p_survive = survival_probability(&law, horizon);
        let budget = survivor_budget(config.target_survivors, p_survive, config.replicates);
        let streams = StreamFamily::new(config.master_seed, "max_displacement", n);
        let sample =
            sample_conditioned_rightmost(&params, &law, config.alpha, budget, config.min_survivors, &streams)?;
        let scale = params.sqrt_n() * (n as f64).ln();
        let mut scaled: Vec<f64> = sample.values.iter().map(|&r| r as f64 / scale).collect();
        for (&id, &r) in sample.replicate_ids.iter().zip(&sample.values) {
            report.raw.push(RawRow { replicate: id, n, survived: true, statistic: "rightmost", value: r as f64 });
        }
        let mean = McEstimate::from_samples(&scaled);
        let sectioned = (scaled.len() >= 2 * SECTIONS).then(|| sectioned_quantile(&scaled, 0.5, SECTIONS));
        scaled.sort_unstable_by(f64::total_cmp);
        let median = sectioned.unwrap_or_else(|| quantile_estimate(&scaled, 0.5));
        let q1 = quantile_estimate(&scaled, 0.25);
        let q3 = quantile_estimate(&scaled, 0.75);
        let iqr = McEstimate { value: q3.value - q1.value, stderr: q1.stderr.hypot(q3.stderr), count: median.count };
        let distance = median.value - theory;

        let mut cell = Cell::new(n);
        cell.estimate("median_scaled_rightmost", median);
        cell.estimate("iqr_scaled_rightmost", iqr);
        cell.estimate("mean_scaled_rightmost", mean);
        cell.estimate("signed_distance_to_theory", McEstimate { value: distance, ..median });
        cell.estimate("survival", McEstimate::proportion(sample.survivors() as u64, budget));
        cell.theory("limit_constant", theory);
        cell.theory("survival", p_survive);
        cell.count("horizon", horizon);
        cell.count("replicates", budget);
        cell.count("survivors", sample.survivors() as u64);
        if let Some((lo, hi)) = tolerances.band(&format!("max_displacement_band_n{n}"))? {
            let centre = 0.5 * (lo + hi);
            cell.verdict(
                "median_in_band",
                Verdict::at_most(
                    (median.value - centre).abs(),
                    0.5 * (hi - lo),
                    format!("median of R/(sqrt(n) ln n) in [{lo}, {hi}]"),
                ),
            );
        }
        if let Some(prev) = previous_distance {
            cell.verdict(
                "distance_nonincreasing",
                Verdict::at_most(distance.abs(), prev, "|median - limit| no larger than at the previous n"),
            );
        }
        previous_distance = Some(distance.abs());

        for i in 1..20 {
            let q = i as f64 / 20.0;
            quantiles.push(vec![n as f64, q, crate::stats::quantile_sorted(&scaled, q)]);
        }
        report.add_event("replicates", budget);
        report.add_event("survivors", sample.survivors() as u64);
        report.add_event("particle_generations", sample.particle_generations);
        report.cells.push(cell);
    }
    report.curves.push(quantiles);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_examples() {
        assert_eq!(max_displacement_constant(1.5, 0.5), 0.25);
        assert!((max_displacement_constant(1.2, 1.0) - 0.05).abs() < 1e-15);
        assert_eq!(max_displacement_constant(1.5, 1.0), 0.5 * max_displacement_constant(1.5, 0.5));
    }
}
