//! Acceptance gate: eleven end-to-end criteria at their stated tolerances
//! and runtime budgets. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p brwlab --test acceptance`.

use std::time::{Duration, Instant};

use brwlab::brw::{run_to_horizon_with, SiteConfiguration, Stepper};
use brwlab::exact::{tail_probability, KacSweep, TailMethod, TransitionDp};
use brwlab::experiments::{self, ExperimentConfig, ExperimentKind, ExperimentReport, Tolerances};
use brwlab::feller::{feller_euler_terminal, feller_exact_marginal, feller_extinction_probability};
use brwlab::gw::{survival_curve, yaglom_diagnostic};
use brwlab::rng::StreamFamily;
use brwlab::stats::{chi_square_gof, ks_two_sample, McEstimate};
use brwlab::walk::{coupled_biased_vs_reflected, coupled_monotone_pair, WalkParams};
use brwlab::{OffspringLaw, Result};

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// Spectral formula against the DP over the full grid.
fn oracle_equivalence() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut evaluations = 0u64;
    for beta in [0.0, 0.25, 0.5, 1.0] {
        for n in [16, 100] {
            let params = WalkParams::new(beta, n)?;
            for start in 0..=20u64 {
                let mut sweep = KacSweep::new(params, start, start + 200, 1 << 12);
                let mut dp = TransitionDp::new(params, start);
                for m in 1..=200u64 {
                    dp.advance();
                    let row = dp.probs();
                    for k in 1..=(start + m) {
                        let kac = sweep.eval(m, k, 1e-12)?.total();
                        let exact = row.get(k as usize).copied().unwrap_or(0.0);
                        worst = worst.max((kac - exact).abs());
                        evaluations += 1;
                    }
                }
            }
        }
    }
    outcome(worst < 1e-10, format!("max |kac - dp| = {worst:.2e} over {evaluations} (beta, n, s, m, k)"))
}

/// Exact tail at sqrt(n) and the fast path at 0.25 sqrt(n) ln n.
fn tail_limits() -> Result<Outcome> {
    let n: u64 = 10_000;
    let ln_n = (n as f64).ln();
    let m = n * (ln_n * ln_n).ceil() as u64;
    let params = WalkParams::new(0.5, n)?;
    let normal = tail_probability(&params, 0, m, 100, TailMethod::Exact)?;
    let target = (-2.0f64).exp();
    let rel = (normal.value - target).abs() / target;
    let threshold = (0.25 * params.sqrt_n() * ln_n).ceil() as u64;
    let outer = tail_probability(&params, 0, m, threshold, TailMethod::Fast)?;
    let ratio = outer.value / (n as f64).powf(-0.5);
    let ratio_lo = outer.lower / (n as f64).powf(-0.5);
    let ratio_hi = outer.upper / (n as f64).powf(-0.5);
    outcome(
        rel < 0.05 && ratio_lo >= 0.8 && ratio_hi <= 1.25,
        format!(
            "m = {m}: P(S_m >= 100) = {:.5} ({:.2}% from e^-2); P(S_m >= {threshold}) / n^-0.5 = {ratio:.4} in [{ratio_lo:.4}, {ratio_hi:.4}]",
            normal.value,
            100.0 * rel
        ),
    )
}

fn kolmogorov_estimate() -> Result<Outcome> {
    let m = 100_000u64;
    let mut parts = Vec::new();
    let mut pass = true;
    for law in [OffspringLaw::binary(), OffspringLaw::geometric_half(), OffspringLaw::poisson1()] {
        let rho = survival_curve(&law, m);
        let dev = (m as f64 * rho[m as usize] * law.variance() / 2.0 - 1.0).abs();
        pass &= dev < 0.01;
        parts.push(format!("{}: {dev:.2e}", law.name()));
        if law.name() == brwlab::LawName::GeometricHalf {
            let worst = rho.iter().enumerate().map(|(i, r)| (r * (i as f64 + 1.0) - 1.0).abs()).fold(0.0, f64::max);
            pass &= worst <= 1e-12;
            parts.push(format!("geom max |(m+1) rho_m - 1| = {worst:.1e}"));
        }
    }
    outcome(pass, format!("|m rho_m sigma^2/2 - 1| at 1e5: {}", parts.join(", ")))
}

fn yaglom() -> Result<Outcome> {
    let streams = StreamFamily::new(SEED, "acceptance-yaglom", 0);
    let d = yaglom_diagnostic(&OffspringLaw::geometric_half(), 500, 1_000_000, &streams)?;
    let rel = (d.conditional_mean - d.limit_mean).abs() / d.limit_mean;
    outcome(
        d.ks_distance < 0.08 && rel < 0.1,
        format!(
            "{} survivors: KS = {:.4}, E(Z | Z > 0) = {:.1} vs {:.0} ({:.1}%)",
            d.survivors,
            d.ks_distance,
            d.conditional_mean,
            d.limit_mean,
            100.0 * rel
        ),
    )
}

/// Mean occupation of a single-ancestor BRW against the DP row.
fn first_moment() -> Result<Outcome> {
    let params = WalkParams::new(0.5, 100)?;
    let law = OffspringLaw::geometric_half();
    let m = 20u64;
    let reps = 1_000_000u64;
    let streams = StreamFamily::new(SEED, "acceptance-first-moment", 100);
    let origin = SiteConfiguration::point(0, 1);
    let sites = (m + 1) as usize;
    let mut sum = vec![0.0f64; sites];
    let mut sum_sq = vec![0.0f64; sites];
    let chunk = 50_000u64;
    for lo in (0..reps).step_by(chunk as usize) {
        let finals = streams.run_range(lo..(lo + chunk).min(reps), |_, rng| {
            let mut stepper = Stepper::new();
            run_to_horizon_with(&mut stepper, &origin, &params, &law, m, &[], rng).map(|r| r.last)
        });
        for last in finals {
            for (site, c) in last?.iter() {
                let c = c as f64;
                sum[site as usize] += c;
                sum_sq[site as usize] += c * c;
            }
        }
    }
    let mut dp = TransitionDp::new(params, 0);
    for _ in 0..m {
        dp.advance();
    }
    let row = dp.probs();
    let r = reps as f64;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for site in 0..sites {
        let expected = row.get(site).copied().unwrap_or(0.0);
        if expected < 1e-3 {
            continue;
        }
        let mean = sum[site] / r;
        let var = (sum_sq[site] / r - mean * mean) * r / (r - 1.0);
        let se = (var / r).sqrt();
        worst = worst.max((mean - expected).abs() / se);
        checked += 1;
    }
    outcome(worst <= 3.0, format!("{checked} sites with mean >= 1e-3, max |mean - dp| / se = {worst:.2}"))
}

/// Pathwise dominance and chi-square marginals of both couplings.
fn couplings() -> Result<Outcome> {
    let reps = 10_000u64;
    let m = 50u64;
    let mut violations = 0u64;
    let mut min_p: f64 = 1.0;
    let mut tests = 0;
    for beta in [0.25, 0.5, 1.0] {
        for n in [16, 100] {
            let params = WalkParams::new(beta, n)?;
            let simple = WalkParams::reflected_simple(n)?;
            let (s, lo, hi) = (3u64, 2u64, 8u64);
            let streams = StreamFamily::new(SEED, &format!("acceptance-coupling-{beta}"), n);
            let runs = streams.run(reps, |_, rng| -> Result<_> {
                let (b, r) = coupled_biased_vs_reflected(&params, s, m as usize, rng);
                let mut bad = b.positions().iter().zip(r.positions()).filter(|(x, y)| x > y).count() as u64;
                let (a, c) = coupled_monotone_pair(&params, lo, hi, m as usize, rng)?;
                bad += a.positions().iter().zip(c.positions()).filter(|(x, y)| x > y).count() as u64;
                Ok((bad, b.last(), r.last(), a.last(), c.last()))
            });
            let width = (hi + m + 1) as usize;
            let mut hist = vec![vec![0u64; width]; 4];
            for run in runs {
                let (bad, e0, e1, e2, e3) = run?;
                violations += bad;
                for (h, e) in hist.iter_mut().zip([e0, e1, e2, e3]) {
                    h[e as usize] += 1;
                }
            }
            let rows = [(params, s), (simple, s), (params, lo), (params, hi)];
            for (h, (p, start)) in hist.iter().zip(rows) {
                let mut dp = TransitionDp::new(p, start);
                for _ in 0..m {
                    dp.advance();
                }
                let mut probs = dp.probs().to_vec();
                probs.resize(width, 0.0);
                min_p = min_p.min(chi_square_gof(h, &probs, 5.0).p_value);
                tests += 1;
            }
        }
    }
    outcome(
        violations == 0 && min_p >= 1e-3,
        format!("{violations} dominance violations; smallest chi-square p-value {min_p:.4} over {tests} marginals"),
    )
}

fn run_experiment(kind: ExperimentKind) -> Result<ExperimentReport> {
    experiments::run(&ExperimentConfig::defaults(kind), &Tolerances::builtin())
}

fn verdict(report: &ExperimentReport, n: u64, name: &str) -> (bool, String) {
    match report.cell(n).and_then(|c| c.verdicts.get(name)) {
        Some(v) => (v.pass, format!("{:.4} vs {:.4}", v.observed, v.tolerance)),
        None => (false, "missing".into()),
    }
}

fn survivors(report: &ExperimentReport) -> Vec<u64> {
    report.cells.iter().map(|c| c.counts["survivors"]).collect()
}

fn max_displacement() -> Result<Outcome> {
    let report = run_experiment(ExperimentKind::MaxDisplacement)?;
    let mut pass = survivors(&report).iter().all(|&s| s >= 200);
    let mut parts = Vec::new();
    for cell in &report.cells {
        let med = cell.estimates["median_scaled_rightmost"];
        let (in_band, _) = verdict(&report, cell.n, "median_in_band");
        pass &= in_band;
        let mut line = format!("n={}: median {:.4} +- {:.4} in band {in_band}", cell.n, med.value, med.stderr);
        if cell.n != report.cells[0].n {
            let (shrinks, _) = verdict(&report, cell.n, "distance_nonincreasing");
            pass &= shrinks;
            line.push_str(&format!(", distance shrinks {shrinks}"));
        }
        parts.push(line);
    }
    outcome(pass, format!("{}; survivors {:?}", parts.join("; "), survivors(&report)))
}

fn profile() -> Result<Outcome> {
    let report = run_experiment(ExperimentKind::Profile)?;
    let ks: Vec<String> = report
        .cells
        .iter()
        .map(|c| format!("n={}: {:.4} +- {:.4}", c.n, c.estimates["ks_mean"].value, c.estimates["ks_mean"].stderr))
        .collect();
    let (below, _) = verdict(&report, 100, "ks_mean_below");
    let (decreasing, _) = verdict(&report, 200, "ks_below_first_n");
    let enough = survivors(&report).iter().all(|&s| s >= 200);
    outcome(
        below && decreasing && enough,
        format!(
            "mean KS {}; < 0.1 at n=100: {below}; n=200 below n=50: {decreasing}; survivors {:?}",
            ks.join(", "),
            survivors(&report)
        ),
    )
}

fn total_mass() -> Result<Outcome> {
    let report = run_experiment(ExperimentKind::TotalMass)?;
    let cell = &report.cells[0];
    let parts: Vec<String> = ["exceed_delta_0", "exceed_delta_0.5", "exceed_delta_1"]
        .iter()
        .map(|name| {
            let (ok, detail) = verdict(&report, cell.n, name);
            format!("{name}: {detail} ({})", if ok { "ok" } else { "off" })
        })
        .collect();
    outcome(
        report.all_pass() && cell.verdicts.len() == 3,
        format!("P(Z > 0) = {:.4} vs 0.63212; {}", cell.estimates["exceed_delta_0"].value, parts.join("; ")),
    )
}

fn feller_samplers() -> Result<Outcome> {
    let (y, sigma2, dt, samples) = (1.0, 2.0, 1e-4, 100_000u64);
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let streams = StreamFamily::new(SEED, "acceptance-feller", (t * 10.0) as u64);
        let exact: Vec<f64> = streams
            .derive("exact")
            .run(samples, |_, rng| feller_exact_marginal(y, sigma2, t, rng))
            .into_iter()
            .collect::<Result<_>>()?;
        let euler: Vec<f64> = streams
            .derive("euler")
            .run(samples, |_, rng| feller_euler_terminal(y, sigma2, t, dt, rng))
            .into_iter()
            .collect::<Result<_>>()?;
        let ks = ks_two_sample(&exact, &euler);
        let p0 = feller_extinction_probability(y, sigma2, t);
        let mut ok = ks < 0.01;
        for draws in [&exact, &euler] {
            let zeros = draws.iter().filter(|&&x| x == 0.0).count() as u64;
            ok &= McEstimate::proportion(zeros, samples).within(p0, 3.0, 0.0);
            ok &= McEstimate::from_samples(draws).within(y, 3.0, 0.0);
        }
        let zeros = |d: &[f64]| d.iter().filter(|&&x| x == 0.0).count() as f64 / samples as f64;
        parts.push(format!(
            "t={t}: KS {ks:.4}, P0 exact {:.4} euler {:.4} vs {p0:.4}",
            zeros(&exact),
            zeros(&euler)
        ));
        pass &= ok;
    }
    outcome(pass, parts.join("; "))
}

fn determinism() -> Result<Outcome> {
    let mut config = ExperimentConfig::defaults(ExperimentKind::Profile);
    config.n_grid = vec![50, 100];
    config.target_survivors = 300;
    let tolerances = Tolerances::builtin();
    let mut outputs = Vec::new();
    for workers in [1, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("pool");
        let report = pool.install(|| experiments::run(&config, &tolerances))?;
        let mut raw = Vec::new();
        report.write_raw_csv(&mut raw)?;
        outputs.push((report.to_canonical_json(), raw));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("report.json and raw.csv identical across 1, 2 and 4 workers: {same}"))
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>, Duration);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "oracle equivalence", oracle_equivalence, Duration::from_secs(60)),
        (2, "tail limits", tail_limits, Duration::from_secs(300)),
        (3, "Kolmogorov estimate", kolmogorov_estimate, Duration::from_secs(60)),
        (4, "Yaglom limit", yaglom, Duration::from_secs(600)),
        (5, "first-moment identity", first_moment, Duration::from_secs(300)),
        (6, "coupling properties", couplings, Duration::from_secs(120)),
        (7, "maximal displacement", max_displacement, Duration::from_secs(1800)),
        (8, "exponential profile", profile, Duration::from_secs(1200)),
        (9, "total mass survival", total_mass, Duration::from_secs(900)),
        (10, "Feller samplers", feller_samplers, Duration::from_secs(600)),
        (11, "determinism", determinism, Duration::from_secs(300)),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let started = Instant::now();
        let result = run();
        let elapsed = started.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} ({name}): {detail} [{:.1}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
