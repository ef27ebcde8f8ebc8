//! Shape of the rescaled, mass-normalized particle cloud against the
//! exponential profile.

use crate::brw::{generation_horizon, run_to_horizon_with, SiteConfiguration, Stepper};
use crate::error::{Error, Result};
use crate::feller::ExponentialProfile;
use crate::gw::survival_probability_from;
use crate::rng::StreamFamily;
use crate::stats::{quantile_estimate, McEstimate};

use super::config::ExperimentConfig;
use super::report::{Cell, Curve, ExperimentReport, RawRow, Verdict};
use super::tolerances::Tolerances;
use super::{initial_mass, survivor_budget};

/// Normalized empirical distribution of `site / scale` with every particle
/// spread uniformly over its lattice cell.
///
/// At a fixed generation all particles share a parity, so occupied sites are
/// two apart. A particle at `x >= 1` covers `[(x-1), (x+1))` and one at `0`
/// covers `[0, 1)`, in lattice units. The cells tile the half line, and the
/// CDF is piecewise linear. Without the smoothing the KS distance to a
/// continuous law keeps a lattice error of order `beta / sqrt(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedProfile {
    /// `(position, cdf)` knots, increasing in both.
    knots: Vec<(f64, f64)>,
}

impl SmoothedProfile {
    pub fn new(config: &SiteConfiguration, scale: f64) -> Result<Self> {
        if config.is_empty() {
            return Err(Error::InvalidArgument("profile of an empty configuration".into()));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        let total = config.total() as f64;
        // density change events (position, delta density)
        let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * config.occupied_sites());
        for (x, c) in config.iter() {
            let (lo, hi) = if x == 0 { (0.0, 1.0) } else { (x as f64 - 1.0, x as f64 + 1.0) };
            let density = c as f64 / total / (hi - lo) * scale;
            events.push((lo / scale, density));
            events.push((hi / scale, -density));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut knots = vec![(0.0, 0.0)];
        let mut density = 0.0;
        let mut cdf = 0.0;
        let mut at = 0.0;
        for (pos, delta) in events {
            if pos > at {
                cdf += density * (pos - at);
                knots.push((pos, cdf));
                at = pos;
            }
            density += delta;
        }
        // remove accumulated rounding so the last knot is exactly 1
        let end = knots.last().unwrap().1;
        for k in &mut knots {
            k.1 = (k.1 / end).min(1.0);
        }
        Ok(Self { knots })
    }

    pub fn cdf(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        let i = self.knots.partition_point(|k| k.0 <= a);
        if i == self.knots.len() {
            return 1.0;
        }
        let (x0, y0) = self.knots[i - 1];
        let (x1, y1) = self.knots[i];
        y0 + (y1 - y0) * (a - x0) / (x1 - x0)
    }

    /// `sup_a |G(a) - (1 - exp(-rate a))|`. On each linear piece the
    /// difference is convex, so the sup is at a knot or at the interior point
    /// where the exponential density equals the slope.
    pub fn ks_to_exponential(&self, profile: &ExponentialProfile) -> f64 {
        let rate = profile.rate();
        let mut sup: f64 = 0.0;
        for w in self.knots.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            sup = sup.max((y0 - profile.cdf(x0)).abs());
            let slope = (y1 - y0) / (x1 - x0);
            if slope > 0.0 && slope < rate {
                let a = (rate / slope).ln() / rate;
                if a > x0 && a < x1 {
                    let g = y0 + slope * (a - x0);
                    sup = sup.max((g - profile.cdf(a)).abs());
                }
            }
        }
        let &(x_end, _) = self.knots.last().unwrap();
        sup.max(1.0 - profile.cdf(x_end))
    }
}

const CURVE_POINTS: usize = 61;
const CURVE_STEP: f64 = 0.05;

pub fn run_profile(config: &ExperimentConfig, tolerances: &Tolerances) -> Result<ExperimentReport> {
    let law = config.offspring();
    let profile = ExponentialProfile::new(config.beta)?;
    let mut report = ExperimentReport::new(config);
    let mut curve = Curve::new("profile_cdf", &["n", "a", "mean_empirical_cdf", "limit_cdf"]);
    let mut first_ks: Option<(u64, f64)> = None;
    for &n in &config.n_grid {
        let params = config.params(n)?;
        let horizon = generation_horizon(n, config.alpha, config.t);
        let z0 = initial_mass(n, config.alpha, config.y);
        let p_survive = survival_probability_from(&law, z0, horizon);
        let budget = survivor_budget(config.target_survivors, p_survive, config.replicates);
        let streams = StreamFamily::new(config.master_seed, "profile", n);
        let initial = SiteConfiguration::point(0, z0);
        let scale = params.sqrt_n();
        let runs = streams.run_with(budget, Stepper::new, |stepper, _, rng| -> Result<_> {
            let run = run_to_horizon_with(stepper, &initial, &params, &law, horizon, &[], rng)?;
            if !run.survived {
                return Ok((run.particle_generations, None));
            }
            let smooth = SmoothedProfile::new(&run.last, scale)?;
            let cdf: Vec<f64> = (0..CURVE_POINTS).map(|i| smooth.cdf(i as f64 * CURVE_STEP)).collect();
            Ok((run.particle_generations, Some((smooth.ks_to_exponential(&profile), cdf))))
        });
        let mut ks = Vec::new();
        let mut cdf_sum = vec![0.0; CURVE_POINTS];
        let mut work = 0;
        for (i, run) in runs.into_iter().enumerate() {
            let (w, outcome) = run?;
            work += w;
            match outcome {
                Some((d, cdf)) => {
                    report.raw.push(RawRow { replicate: i as u64, n, survived: true, statistic: "ks", value: d });
                    ks.push(d);
                    for (s, c) in cdf_sum.iter_mut().zip(cdf) {
                        *s += c;
                    }
                }
                None => {
                    report.raw.push(RawRow { replicate: i as u64, n, survived: false, statistic: "ks", value: f64::NAN })
                }
            }
        }
        if ks.len() < config.min_survivors {
            return Err(Error::InsufficientSurvivors {
                survivors: ks.len(),
                replicates: budget,
                required: config.min_survivors,
                context: format!("profile at n = {n}, horizon = {horizon}"),
            });
        }
        let ks_mean = McEstimate::from_samples(&ks);
        let mut cell = Cell::new(n);
        cell.estimate("ks_mean", ks_mean);
        cell.estimate("survival", McEstimate::proportion(ks.len() as u64, budget));
        cell.theory("survival", p_survive);
        let mut sorted = ks.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        cell.estimate("ks_median", quantile_estimate(&sorted, 0.5));
        cell.count("horizon", horizon);
        cell.count("initial_particles", z0);
        cell.count("replicates", budget);
        cell.count("survivors", ks.len() as u64);
        if let Some(max) = tolerances.get_opt::<f64>(&format!("profile_ks_max_n{n}"))? {
            let mut v = Verdict::at_most(ks_mean.value, max, format!("mean KS distance < {max}"));
            v.pass = ks_mean.value < max;
            cell.verdict("ks_mean_below", v);
        }
        match first_ks {
            Some((n0, ks0)) => {
                let mut v = Verdict::at_most(ks_mean.value, ks0, format!("mean KS distance below its value at n = {n0}"));
                v.pass = ks_mean.value < ks0;
                cell.verdict("ks_below_first_n", v);
            }
            None => first_ks = Some((n, ks_mean.value)),
        }
        for (i, s) in cdf_sum.iter().enumerate() {
            let a = i as f64 * CURVE_STEP;
            curve.push(vec![n as f64, a, s / ks.len() as f64, profile.cdf(a)]);
        }
        report.add_event("replicates", budget);
        report.add_event("survivors", ks.len() as u64);
        report.add_event("particle_generations", work);
        report.cells.push(cell);
    }
    report.curves.push(curve);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_cdf_is_piecewise_linear() {
        let config = SiteConfiguration::from_counts([(0, 1), (2, 1)]);
        let p = SmoothedProfile::new(&config, 1.0).unwrap();
        assert_eq!(p.cdf(0.5), 0.25);
        assert_eq!(p.cdf(1.0), 0.5);
        assert_eq!(p.cdf(2.0), 0.75);
        assert_eq!(p.cdf(3.0), 1.0);
        assert_eq!(p.cdf(10.0), 1.0);
    }

    #[test]
    fn ks_matches_brute_force() {
        let config = SiteConfiguration::from_counts([(1, 5), (3, 3), (5, 1), (9, 2)]);
        let p = SmoothedProfile::new(&config, 4.0).unwrap();
        let law = ExponentialProfile::new(0.5).unwrap();
        let brute = (0..=200_000)
            .map(|i| i as f64 * 1e-5)
            .map(|a| (p.cdf(a) - law.cdf(a)).abs())
            .fold(0.0, f64::max);
        let ks = p.ks_to_exponential(&law);
        assert!(ks >= brute - 1e-12 && ks - brute < 1e-6, "{ks} vs {brute}");
    }

    #[test]
    fn empty_configuration_is_rejected() {
        assert!(SmoothedProfile::new(&SiteConfiguration::empty(), 1.0).is_err());
    }
}
