//! Single walkers on the nonnegative integers and their couplings.
//!
//! The biased walk steps down with probability `1/2 + beta/sqrt(n)` and up
//! with the complement from every `x >= 1`; the origin reflects to 1 with
//! probability one. With `beta = 0` this is the reflected simple walk.

use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::McEstimate;

/// The kernel parameters `(beta, n)` and the derived step probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkParams {
    beta: f64,
    n: u64,
    p_down: f64,
    p_up: f64,
}

impl WalkParams {
    pub fn new(beta: f64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParams(format!("beta must be finite and >= 0, got {beta}")));
        }
        let root = (n as f64).sqrt();
        if beta >= root / 2.0 {
            return Err(Error::InvalidParams(format!(
                "beta = {beta} leaves no upward mass at n = {n} (need beta < {})",
                root / 2.0
            )));
        }
        let p_down = 0.5 + beta / root;
        Ok(Self { beta, n, p_down, p_up: 1.0 - p_down })
    }

    /// The reflected simple walk at scale `n`.
    pub fn reflected_simple(n: u64) -> Result<Self> {
        Self::new(0.0, n)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    pub fn p_down(&self) -> f64 {
        self.p_down
    }

    pub fn p_up(&self) -> f64 {
        self.p_up
    }

    /// `p_down - p_up = 2 beta / sqrt(n)`.
    pub fn drift(&self) -> f64 {
        2.0 * self.beta / self.sqrt_n()
    }

    /// Same scale, zero drift.
    pub fn without_drift(&self) -> Self {
        Self::new(0.0, self.n).expect("beta = 0 is always valid")
    }
}

/// One-step law from a site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDistribution {
    pub from: u64,
    pub down: f64,
    pub up: f64,
}

impl StepDistribution {
    /// `(site, probability)` pairs with positive probability.
    pub fn support(&self) -> Vec<(u64, f64)> {
        let mut out = Vec::with_capacity(2);
        if self.from > 0 && self.down > 0.0 {
            out.push((self.from - 1, self.down));
        }
        if self.up > 0.0 {
            out.push((self.from + 1, self.up));
        }
        out
    }

    pub fn prob(&self, site: u64) -> f64 {
        self.support()
            .into_iter()
            .find(|&(s, _)| s == site)
            .map_or(0.0, |(_, p)| p)
    }
}

pub fn step_distribution(params: &WalkParams, x: u64) -> StepDistribution {
    if x == 0 {
        StepDistribution { from: 0, down: 0.0, up: 1.0 }
    } else {
        StepDistribution { from: x, down: params.p_down, up: params.p_up }
    }
}

/// A path `positions[0] = start, ..., positions[m]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkPath {
    positions: Vec<u64>,
}

impl WalkPath {
    pub fn new(positions: Vec<u64>) -> Result<Self> {
        let path = Self { positions };
        path.check()?;
        Ok(path)
    }

    fn check(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidArgument("a path has at least its start".into()));
        }
        for (k, w) in self.positions.windows(2).enumerate() {
            if w[0].abs_diff(w[1]) != 1 {
                return Err(Error::InvalidArgument(format!("step {k} is not a unit move")));
            }
            if w[0] == 0 && w[1] != 1 {
                return Err(Error::InvalidArgument(format!("step {k} leaves 0 without reflecting")));
            }
        }
        Ok(())
    }

    pub fn start(&self) -> u64 {
        self.positions[0]
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn last(&self) -> u64 {
        *self.positions.last().unwrap()
    }
}

/// Moves from `x` given a uniform draw; `u <= p_down` goes down, so a
/// draw exactly on the threshold resolves downward.
#[inline]
fn step_with(x: u64, u: f64, p_down: f64) -> u64 {
    if x == 0 {
        1
    } else if u <= p_down {
        x - 1
    } else {
        debug_assert!(x < u64::MAX);
        x + 1
    }
}

pub fn simulate_walk<R: Rng + ?Sized>(params: &WalkParams, start: u64, m: usize, rng: &mut R) -> WalkPath {
    let mut positions = Vec::with_capacity(m + 1);
    let mut x = start;
    positions.push(x);
    for _ in 0..m {
        x = step_with(x, rng.random::<f64>(), params.p_down);
        positions.push(x);
    }
    WalkPath { positions }
}

/// Final position only, without storing the path.
pub fn walk_endpoint<R: Rng + ?Sized>(params: &WalkParams, start: u64, m: usize, rng: &mut R) -> u64 {
    let mut x = start;
    for _ in 0..m {
        x = step_with(x, rng.random::<f64>(), params.p_down);
    }
    x
}

/// Biased walk and reflected simple walk driven by one shared uniform per
/// step (down thresholds `1/2 + beta/sqrt(n)` and `1/2`). The biased path
/// never exceeds the simple one.
pub fn coupled_biased_vs_reflected<R: Rng + ?Sized>(
    params: &WalkParams,
    start: u64,
    m: usize,
    rng: &mut R,
) -> (WalkPath, WalkPath) {
    let mut biased = Vec::with_capacity(m + 1);
    let mut simple = Vec::with_capacity(m + 1);
    let (mut s, mut t) = (start, start);
    biased.push(s);
    simple.push(t);
    for _ in 0..m {
        let u = rng.random::<f64>();
        s = step_with(s, u, params.p_down);
        t = step_with(t, u, 0.5);
        biased.push(s);
        simple.push(t);
    }
    (WalkPath { positions: biased }, WalkPath { positions: simple })
}

/// Two biased walks from starts of equal parity. While the lower walker is
/// positive the upper one copies its jump; when the lower walker sits at 0
/// the upper one draws a fresh, independent step. They never cross and
/// coincide after their first meeting.
pub fn coupled_monotone_pair<R: Rng + ?Sized>(
    params: &WalkParams,
    start_low: u64,
    start_high: u64,
    m: usize,
    rng: &mut R,
) -> Result<(WalkPath, WalkPath)> {
    if start_low > start_high {
        return Err(Error::InvalidArgument(format!(
            "start_low = {start_low} exceeds start_high = {start_high}"
        )));
    }
    if (start_high - start_low) % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "starts {start_low} and {start_high} differ in parity"
        )));
    }
    let mut low = Vec::with_capacity(m + 1);
    let mut high = Vec::with_capacity(m + 1);
    let (mut a, mut b) = (start_low, start_high);
    low.push(a);
    high.push(b);
    for _ in 0..m {
        if a > 0 {
            let next = step_with(a, rng.random::<f64>(), params.p_down);
            b = if next < a { b - 1 } else { b + 1 };
            a = next;
        } else {
            a = 1;
            b = step_with(b, rng.random::<f64>(), params.p_down);
        }
        debug_assert!(a <= b);
        low.push(a);
        high.push(b);
    }
    Ok((WalkPath { positions: low }, WalkPath { positions: high }))
}

/// Monte Carlo estimate of `P(max_{i<=m} |S_i| >= k)` for the simple walk on
/// the integers started at 0.
pub fn max_abs_simple_walk_tail<R: Rng + ?Sized>(
    m: usize,
    k: u64,
    samples: u64,
    rng: &mut R,
) -> Result<McEstimate> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    if k > m as u64 {
        return Ok(McEstimate { value: 0.0, stderr: 0.0, count: samples });
    }
    let k = k as i64;
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut x: i64 = 0;
        let mut remaining = m;
        // Draw 64 steps per word.
        'walk: while remaining > 0 {
            let bits = rng.next_u64();
            let take = remaining.min(64);
            for j in 0..take {
                x += if (bits >> j) & 1 == 1 { 1 } else { -1 };
                if x.abs() >= k {
                    hits += 1;
                    break 'walk;
                }
            }
            remaining -= take;
        }
    }
    Ok(McEstimate::proportion(hits, samples))
}
