//! The branching random walk on the nonnegative integers.
//!
//! State is kept per site rather than per particle. One generation draws
//! the offspring total of each occupied site, then splits it binomially
//! between the two neighbours (everything goes to 1 from the origin). This
//! has the same law as moving every child independently, at a cost of
//! O(occupied sites) per generation.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::gw::POPULATION_CEILING;
use crate::offspring::OffspringLaw;
use crate::rng::StreamFamily;
use crate::walk::WalkParams;

/// Occupied sites in increasing order, with positive counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SiteConfiguration {
    sites: Vec<(u64, u64)>,
    generation: u64,
    total: u64,
}

impl SiteConfiguration {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `count` particles at `site`.
    pub fn point(site: u64, count: u64) -> Self {
        Self::from_counts([(site, count)])
    }

    /// Builds from `(site, count)` pairs in any order; duplicates add up and
    /// zero counts are dropped.
    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(counts: I) -> Self {
        let mut sites: Vec<(u64, u64)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        sites.sort_unstable();
        sites.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        let total = sites.iter().map(|&(_, c)| c).sum();
        Self { sites, generation: 0, total }
    }

    pub fn with_generation(mut self, generation: u64) -> Self {
        self.generation = generation;
        self
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// `Z_k`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// `R_k`, the rightmost occupied site.
    pub fn rightmost(&self) -> Option<u64> {
        self.sites.last().map(|&(s, _)| s)
    }

    pub fn count_at(&self, site: u64) -> u64 {
        self.sites
            .binary_search_by_key(&site, |&(s, _)| s)
            .map_or(0, |i| self.sites[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.sites.iter().copied()
    }

    pub fn occupied_sites(&self) -> usize {
        self.sites.len()
    }

    /// The common parity of all occupied sites, if there is one.
    pub fn parity(&self) -> Option<u64> {
        let first = self.sites.first()?.0 % 2;
        self.sites.iter().all(|&(s, _)| s % 2 == first).then_some(first)
    }

    /// `X_k(I)` for the integer interval `[lo, hi)`.
    pub fn mass_in(&self, lo: u64, hi: u64) -> u64 {
        self.sites.iter().filter(|&&(s, _)| s >= lo && s < hi).map(|&(_, c)| c).sum()
    }

    fn debug_check(&self) {
        debug_assert!(self.sites.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(self.sites.iter().all(|&(_, c)| c > 0));
        debug_assert_eq!(self.total, self.sites.iter().map(|&(_, c)| c).sum::<u64>());
    }

    /// CSV rows `generation,site,count`, without a header.
    pub fn write_csv_rows<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for &(s, c) in &self.sites {
            writeln!(out, "{},{},{}", self.generation, s, c)?;
        }
        Ok(())
    }
}

/// Binomial draw; short inversion by comparisons for small counts.
#[inline]
pub(crate) fn binomial<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> u64 {
    match trials {
        0 => 0,
        t if t < 16 => (0..t).filter(|_| rng.random::<f64>() < p).count() as u64,
        t => Binomial::new(t, p).unwrap().sample(rng),
    }
}

/// Reusable scratch for generation steps.
#[derive(Clone, Debug, Default)]
pub struct Stepper {
    dense: Vec<u64>,
}

impl Stepper {
    pub fn new() -> Self {
        Self::default()
    }

    /// One generation: branch per rule (A), move per rule (B).
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        config: &SiteConfiguration,
        params: &WalkParams,
        law: &OffspringLaw,
        rng: &mut R,
    ) -> Result<SiteConfiguration> {
        self.step_with_ceiling(config, params, law, POPULATION_CEILING, rng)
    }

    pub fn step_with_ceiling<R: Rng + ?Sized>(
        &mut self,
        config: &SiteConfiguration,
        params: &WalkParams,
        law: &OffspringLaw,
        ceiling: u64,
        rng: &mut R,
    ) -> Result<SiteConfiguration> {
        let generation = config.generation + 1;
        let Some(top) = config.rightmost() else {
            return Ok(SiteConfiguration::empty().with_generation(generation));
        };
        let len = top as usize + 2;
        self.dense.clear();
        self.dense.resize(len, 0);
        let p_down = params.p_down();
        let mut total: u64 = 0;
        for &(x, c) in &config.sites {
            let children = law.sample_sum(c, rng);
            if children == 0 {
                continue;
            }
            total = total.saturating_add(children);
            if x == 0 {
                self.dense[1] += children;
            } else {
                let down = binomial(children, p_down, rng);
                self.dense[x as usize - 1] += down;
                self.dense[x as usize + 1] += children - down;
            }
        }
        if total > ceiling {
            return Err(Error::PopulationOverflow { population: total, ceiling, generation });
        }
        let sites: Vec<(u64, u64)> = self
            .dense
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(s, &c)| (s as u64, c))
            .collect();
        let next = SiteConfiguration { sites, generation, total };
        next.debug_check();
        Ok(next)
    }
}

pub fn step_configuration<R: Rng + ?Sized>(
    config: &SiteConfiguration,
    params: &WalkParams,
    law: &OffspringLaw,
    rng: &mut R,
) -> Result<SiteConfiguration> {
    Stepper::new().step(config, params, law, rng)
}

/// Reference stepper that moves every child on its own. Used to check the
/// aggregated stepper.
pub fn step_configuration_per_particle<R: Rng + ?Sized>(
    config: &SiteConfiguration,
    params: &WalkParams,
    law: &OffspringLaw,
    rng: &mut R,
) -> SiteConfiguration {
    let mut counts: Vec<(u64, u64)> = Vec::new();
    for &(x, c) in &config.sites {
        for _ in 0..c {
            for _ in 0..law.sample(rng) {
                let y = if x == 0 || rng.random::<f64>() >= params.p_down() { x + 1 } else { x - 1 };
                counts.push((y, 1));
            }
        }
    }
    SiteConfiguration::from_counts(counts).with_generation(config.generation + 1)
}

/// Outcome of [`run_to_horizon`].
#[derive(Clone, Debug, PartialEq)]
pub struct BrwRunRecord {
    pub params: WalkParams,
    pub law: OffspringLaw,
    pub initial: SiteConfiguration,
    pub horizon: u64,
    pub survived: bool,
    /// `R_horizon`, present iff the run survived.
    pub rightmost_at_horizon: Option<u64>,
    pub final_total: u64,
    /// Deep copies at the requested generations the run reached alive.
    pub snapshots: Vec<SiteConfiguration>,
    /// Sum of the population over the generations that were stepped.
    pub particle_generations: u64,
    /// Configuration at the horizon (empty if extinct).
    pub last: SiteConfiguration,
}

pub fn run_to_horizon<R: Rng + ?Sized>(
    initial: &SiteConfiguration,
    params: &WalkParams,
    law: &OffspringLaw,
    horizon: u64,
    snapshot_times: &[u64],
    rng: &mut R,
) -> Result<BrwRunRecord> {
    run_to_horizon_with(&mut Stepper::new(), initial, params, law, horizon, snapshot_times, rng)
}

pub fn run_to_horizon_with<R: Rng + ?Sized>(
    stepper: &mut Stepper,
    initial: &SiteConfiguration,
    params: &WalkParams,
    law: &OffspringLaw,
    horizon: u64,
    snapshot_times: &[u64],
    rng: &mut R,
) -> Result<BrwRunRecord> {
    if let Some(&t) = snapshot_times.iter().find(|&&t| t > horizon) {
        return Err(Error::InvalidArgument(format!("snapshot time {t} beyond horizon {horizon}")));
    }
    let start_gen = initial.generation;
    let mut config = initial.clone();
    let mut snapshots = Vec::new();
    let mut work = 0u64;
    if snapshot_times.contains(&0) {
        snapshots.push(config.clone());
    }
    for k in 1..=horizon {
        if config.is_empty() {
            config.generation = start_gen + horizon;
            break;
        }
        work += config.total;
        config = stepper.step(&config, params, law, rng)?;
        if snapshot_times.contains(&k) {
            snapshots.push(config.clone());
        }
    }
    let survived = !config.is_empty();
    Ok(BrwRunRecord {
        params: *params,
        law: law.clone(),
        initial: initial.clone(),
        horizon,
        survived,
        rightmost_at_horizon: config.rightmost(),
        final_total: config.total,
        snapshots,
        particle_generations: work,
        last: config,
    })
}

/// Particle counts per bin of `site / scale`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupationMeasure {
    /// `masses[i]` counts particles with `site/scale` in `[bins[i], bins[i+1])`.
    pub masses: Vec<u64>,
    /// Particles at or beyond the last boundary.
    pub overflow: u64,
}

pub fn occupation_measure(config: &SiteConfiguration, scale: f64, bins: &[f64]) -> Result<OccupationMeasure> {
    if bins.len() < 2 || bins[0] != 0.0 || bins.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("bins must start at 0 and increase strictly".into()));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    let mut masses = vec![0u64; bins.len() - 1];
    let mut overflow = 0;
    for (s, c) in config.iter() {
        let x = s as f64 / scale;
        // first boundary strictly above x
        let idx = bins.partition_point(|&b| b <= x);
        if idx >= bins.len() {
            overflow += c;
        } else {
            masses[idx - 1] += c;
        }
    }
    Ok(OccupationMeasure { masses, overflow })
}

/// `[n^alpha t]`, snapping values within 1e-9 relative of an integer onto it
/// so floating-point powers like `100^1.5` do not floor to 999.
pub fn generation_horizon(n: u64, alpha: f64, t: f64) -> u64 {
    let x = (n as f64).powf(alpha) * t;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) { r as u64 } else { x.floor() as u64 }
}

/// Rightmost positions of surviving single-ancestor runs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionedRightmost {
    pub horizon: u64,
    pub budget: u64,
    /// `R` for every surviving run, in replicate order.
    pub values: Vec<u64>,
    /// Replicate index of every surviving run.
    pub replicate_ids: Vec<u64>,
    pub particle_generations: u64,
}

impl ConditionedRightmost {
    pub fn survivors(&self) -> usize {
        self.values.len()
    }
}

/// Runs `budget` BRWs from one particle at the origin to `[n^alpha]` and
/// keeps the rightmost site of those that survive (rejection on survival).
pub fn sample_conditioned_rightmost(
    params: &WalkParams,
    law: &OffspringLaw,
    alpha: f64,
    budget: u64,
    min_survivors: usize,
    streams: &StreamFamily,
) -> Result<ConditionedRightmost> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must exceed 1, got {alpha}")));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let horizon = generation_horizon(params.n(), alpha, 1.0);
    let origin = SiteConfiguration::point(0, 1);
    let runs = streams.run_with(budget, Stepper::new, |stepper, _, rng| {
        run_to_horizon_with(stepper, &origin, params, law, horizon, &[], rng)
            .map(|r| (r.rightmost_at_horizon, r.particle_generations))
    });
    let mut out = ConditionedRightmost {
        horizon,
        budget,
        values: Vec::new(),
        replicate_ids: Vec::new(),
        particle_generations: 0,
    };
    for (i, run) in runs.into_iter().enumerate() {
        let (rightmost, work) = run?;
        out.particle_generations += work;
        if let Some(r) = rightmost {
            out.values.push(r);
            out.replicate_ids.push(i as u64);
        }
    }
    if out.survivors() < min_survivors {
        return Err(Error::InsufficientSurvivors {
            survivors: out.survivors(),
            replicates: budget,
            required: min_survivors,
            context: format!("n = {}, horizon = {horizon}", params.n()),
        });
    }
    Ok(out)
}
