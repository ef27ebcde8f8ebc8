//! Exact survival curve of the Galton-Watson process against the
//! Kolmogorov asymptotics and against simulated BRW survival.

use crate::brw::{run_to_horizon_with, SiteConfiguration, Stepper};
use crate::error::Result;
use crate::gw::survival_curve;
use crate::offspring::LawName;
use crate::rng::StreamFamily;
use crate::stats::McEstimate;

use super::config::ExperimentConfig;
use super::report::{Cell, Curve, ExperimentReport, RawRow, Verdict};
use super::tolerances::Tolerances;

/// About 20 points per decade from 1 to `m_max`, always including `m_max`.
fn log_grid(m_max: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (0..)
        .map(|i| 10f64.powf(i as f64 / 20.0).round() as u64)
        .take_while(|&m| m < m_max)
        .collect();
    out.push(m_max);
    out.dedup();
    out
}

pub fn run_survival_curve(config: &ExperimentConfig, tolerances: &Tolerances) -> Result<ExperimentReport> {
    let law = config.offspring();
    let sigma2 = law.variance();
    let m_max = config.m_max.max(config.survival_m);
    let rho = survival_curve(&law, m_max);
    let mut report = ExperimentReport::new(config);

    let mut curve = Curve::new("survival_curve", &["m", "rho", "m_rho_sigma2_half"]);
    for m in log_grid(config.m_max) {
        let r = rho[m as usize];
        curve.push(vec![m as f64, r, m as f64 * r * sigma2 / 2.0]);
    }
    report.curves.push(curve);

    let kolmogorov = config.m_max as f64 * rho[config.m_max as usize] * sigma2 / 2.0;
    let kolmogorov_tol: f64 = if law.name() == LawName::GeometricHalf {
        tolerances.get("kolmogorov_tol_geom")?
    } else {
        tolerances.get("kolmogorov_tol")?
    };
    let closed_form_error = (law.name() == LawName::GeometricHalf).then(|| {
        rho.iter()
            .enumerate()
            .map(|(m, r)| (r * (m as f64 + 1.0) - 1.0).abs())
            .fold(0.0, f64::max)
    });
    let k_sigma: f64 = tolerances.get("survival_k_sigma")?;

    let m = config.survival_m;
    for &n in &config.n_grid {
        let params = config.params(n)?;
        let streams = StreamFamily::new(config.master_seed, "survival_curve", n);
        let origin = SiteConfiguration::point(0, 1);
        let runs = streams.run_with(config.replicates, Stepper::new, |stepper, _, rng| {
            run_to_horizon_with(stepper, &origin, &params, &law, m, &[], rng)
                .map(|r| (r.survived, r.particle_generations))
        });
        let mut survivors = 0u64;
        let mut work = 0;
        for (i, run) in runs.into_iter().enumerate() {
            let (alive, w) = run?;
            work += w;
            if alive {
                survivors += 1;
                report.raw.push(RawRow { replicate: i as u64, n, survived: true, statistic: "survived", value: 1.0 });
            }
        }
        let emp = McEstimate::proportion(survivors, config.replicates);
        let exact = rho[m as usize];

        let mut cell = Cell::new(n);
        cell.estimate("brw_survival", emp);
        cell.theory("brw_survival", exact);
        cell.theory("m_rho_sigma2_half_at_m_max", kolmogorov);
        cell.count("survival_m", m);
        cell.count("m_max", config.m_max);
        cell.count("replicates", config.replicates);
        cell.count("survivors", survivors);
        // exact binomial sd under the null, so a zero count is not a free pass
        let se = (exact * (1.0 - exact) / config.replicates as f64).sqrt();
        cell.verdict(
            "brw_survival_matches_pgf",
            Verdict::at_most((emp.value - exact).abs(), k_sigma * se, format!("|empirical - rho_m| <= {k_sigma} se")),
        );
        cell.verdict(
            "kolmogorov_estimate",
            Verdict::at_most(
                (kolmogorov - 1.0).abs(),
                kolmogorov_tol,
                format!("|m rho_m sigma^2/2 - 1| <= {kolmogorov_tol} at m = {}", config.m_max),
            ),
        );
        if let Some(err) = closed_form_error {
            let tol: f64 = tolerances.get("geometric_closed_form_rel")?;
            cell.verdict(
                "geometric_closed_form",
                Verdict::at_most(err, tol, format!("max_m |(m+1) rho_m - 1| <= {tol}")),
            );
        }
        report.add_event("replicates", config.replicates);
        report.add_event("survivors", survivors);
        report.add_event("particle_generations", work);
        report.cells.push(cell);
    }
    Ok(report)
}
