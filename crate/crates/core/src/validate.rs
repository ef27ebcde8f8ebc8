//! A quick self-check of the exact and Monte Carlo layers: couplings, the
//! DP against the spectral formula, pgf identities and a few small
//! simulations against their closed forms. Runs in a few seconds.

use crate::brw::{run_to_horizon_with, SiteConfiguration, Stepper};
use crate::error::Result;
use crate::exact::{geometric_main_term_tail, kac_transition_prob, rw_dp_transition_prob, Parity};
use crate::feller::{feller_exact_marginal, feller_extinction_probability};
use crate::gw::survival_curve;
use crate::offspring::OffspringLaw;
use crate::rng::StreamFamily;
use crate::stats::McEstimate;
use crate::walk::{coupled_biased_vs_reflected, coupled_monotone_pair, WalkParams};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn dp_matches_kac() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for beta in [0.0, 0.5, 1.0] {
        let params = WalkParams::new(beta, 16)?;
        for start in 0..=4 {
            for m in 1..=30 {
                let row = rw_dp_transition_prob(&params, start, m);
                for k in 1..=(start + m) {
                    let kac = kac_transition_prob(&params, start, m, k, 1e-13)?.total();
                    worst = worst.max((kac - row.prob(k)).abs());
                }
            }
        }
    }
    Ok(check("dp_matches_spectral_formula", worst < 1e-10, format!("max |diff| = {worst:.3e}")))
}

fn main_term_mass() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n in [16, 100] {
        let params = WalkParams::new(0.5, n)?;
        for parity in [Parity::Even, Parity::Odd] {
            worst = worst.max((geometric_main_term_tail(&params, parity, 0) - 1.0).abs());
        }
    }
    Ok(check("main_term_is_a_probability", worst < 1e-12, format!("max |mass - 1| = {worst:.3e}")))
}

fn couplings(streams: &StreamFamily) -> Result<Check> {
    let params = WalkParams::new(0.5, 16)?;
    let runs = streams.derive("coupling").run(2000, |i, rng| -> Result<u64> {
        let (biased, simple) = coupled_biased_vs_reflected(&params, i % 5, 40, rng);
        let mut bad =
            biased.positions().iter().zip(simple.positions()).filter(|(b, s)| b > s).count() as u64;
        let (low, high) = coupled_monotone_pair(&params, i % 3, i % 3 + 4, 40, rng)?;
        bad += low.positions().iter().zip(high.positions()).filter(|(l, h)| l > h).count() as u64;
        Ok(bad)
    });
    let violations: u64 = runs.into_iter().sum::<Result<u64>>()?;
    Ok(check("couplings_are_ordered", violations == 0, format!("{violations} violations in 2000 pairs")))
}

fn pgf_identities() -> Check {
    let rho = survival_curve(&OffspringLaw::geometric_half(), 1000);
    let worst = rho.iter().enumerate().map(|(m, r)| (r * (m as f64 + 1.0) - 1.0).abs()).fold(0.0, f64::max);
    let mut consistent = true;
    for law in [OffspringLaw::binary(), OffspringLaw::geometric_half(), OffspringLaw::poisson1()] {
        for r in [1e-9, 0.1, 0.5, 1.0] {
            consistent &= (law.complementary_pgf(r) - (1.0 - law.pgf(1.0 - r))).abs() < 1e-12;
        }
    }
    check(
        "pgf_identities",
        worst < 1e-12 && consistent,
        format!("geometric max |(m+1) rho_m - 1| = {worst:.3e}, complement consistent = {consistent}"),
    )
}

fn first_moment(streams: &StreamFamily) -> Result<Check> {
    let params = WalkParams::new(0.5, 16)?;
    let law = OffspringLaw::geometric_half();
    let m = 6;
    let reps = 20_000;
    let origin = SiteConfiguration::point(0, 1);
    let finals = streams.derive("first-moment").run_with(reps, Stepper::new, |stepper, _, rng| {
        run_to_horizon_with(stepper, &origin, &params, &law, m, &[], rng).map(|r| r.last)
    });
    let row = rw_dp_transition_prob(&params, 0, m);
    let mut counts = vec![Vec::with_capacity(reps as usize); (m + 1) as usize];
    for last in finals {
        let last = last?;
        for (site, c) in counts.iter_mut().enumerate() {
            c.push(last.count_at(site as u64) as f64);
        }
    }
    let mut worst: f64 = 0.0;
    for (site, c) in counts.iter().enumerate() {
        let est = McEstimate::from_samples(c);
        let expected = row.prob(site as u64);
        if est.stderr > 0.0 {
            worst = worst.max((est.value - expected).abs() / est.stderr);
        } else if est.value != expected {
            worst = f64::INFINITY;
        }
    }
    Ok(check("first_moment_matches_dp", worst < 4.5, format!("max standardized deviation {worst:.2}")))
}

fn feller_extinction(streams: &StreamFamily) -> Result<Check> {
    let (y, sigma2, t) = (1.0, 2.0, 1.0);
    let draws: Vec<f64> = streams
        .derive("feller")
        .run(20_000, |_, rng| feller_exact_marginal(y, sigma2, t, rng))
        .into_iter()
        .collect::<Result<_>>()?;
    let zeros = draws.iter().filter(|&&x| x == 0.0).count() as u64;
    let est = McEstimate::proportion(zeros, draws.len() as u64);
    let mean = McEstimate::from_samples(&draws);
    let p0 = feller_extinction_probability(y, sigma2, t);
    Ok(check(
        "feller_marginal_moments",
        est.within(p0, 4.0, 0.0) && mean.within(y, 4.0, 0.0),
        format!("P(Y=0) {:.4} vs {p0:.4}, mean {:.4} vs {y}", est.value, mean.value),
    ))
}

fn streams_reproducible(streams: &StreamFamily) -> Check {
    let draw = || streams.derive("repro").run(64, |_, rng| rand::Rng::random::<u64>(rng));
    check("streams_are_reproducible", draw() == draw(), "two passes over 64 streams".into())
}

/// Runs every check; errors inside a check are reported as failures.
pub fn run_suite(seed: u64) -> Vec<Check> {
    let streams = StreamFamily::new(seed, "validate", 0);
    let fallible: Vec<(&'static str, Result<Check>)> = vec![
        ("dp_matches_spectral_formula", dp_matches_kac()),
        ("main_term_is_a_probability", main_term_mass()),
        ("couplings_are_ordered", couplings(&streams)),
        ("first_moment_matches_dp", first_moment(&streams)),
        ("feller_marginal_moments", feller_extinction(&streams)),
    ];
    let mut out: Vec<Check> = fallible
        .into_iter()
        .map(|(name, r)| r.unwrap_or_else(|e| check(name, false, format!("error: {e}"))))
        .collect();
    out.push(pgf_identities());
    out.push(streams_reproducible(&streams));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_suite(7) {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }
}
