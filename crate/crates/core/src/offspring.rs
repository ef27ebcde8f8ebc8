//! Critical offspring laws and exact samplers for sums of offspring counts.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};

/// Below this many parents the offspring total is drawn parent by parent;
/// above it a law-specific aggregate sampler is used.
pub const AGGREGATION_THRESHOLD: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LawName {
    /// 0 or 2 children with probability 1/2 each.
    Binary,
    /// `P(k) = 2^-(k+1)`.
    GeometricHalf,
    /// Poisson with mean 1.
    Poisson1,
    Custom,
}

impl LawName {
    pub fn as_str(&self) -> &'static str {
        match self {
            LawName::Binary => "binary",
            LawName::GeometricHalf => "geom",
            LawName::Poisson1 => "poisson1",
            LawName::Custom => "custom",
        }
    }
}

impl fmt::Display for LawName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LawName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(LawName::Binary),
            "geom" | "geometric" | "geometric_half" => Ok(LawName::GeometricHalf),
            "poisson1" | "poisson" => Ok(LawName::Poisson1),
            other => Err(Error::Config(format!("unknown law '{other}' (binary|geom|poisson1)"))),
        }
    }
}

/// A mean-one offspring distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct OffspringLaw {
    name: LawName,
    /// Only populated for custom laws.
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    variance: f64,
}

impl OffspringLaw {
    pub fn binary() -> Self {
        Self { name: LawName::Binary, pmf: Vec::new(), cdf: Vec::new(), variance: 1.0 }
    }

    pub fn geometric_half() -> Self {
        Self { name: LawName::GeometricHalf, pmf: Vec::new(), cdf: Vec::new(), variance: 2.0 }
    }

    pub fn poisson1() -> Self {
        Self { name: LawName::Poisson1, pmf: Vec::new(), cdf: Vec::new(), variance: 1.0 }
    }

    pub fn by_name(name: LawName) -> Result<Self> {
        match name {
            LawName::Binary => Ok(Self::binary()),
            LawName::GeometricHalf => Ok(Self::geometric_half()),
            LawName::Poisson1 => Ok(Self::poisson1()),
            LawName::Custom => Err(Error::Config("custom laws need a pmf".into())),
        }
    }

    /// A finitely supported law; must have mean 1 (within 1e-12) and positive
    /// variance.
    pub fn custom(pmf: Vec<f64>) -> Result<Self> {
        let law = Self::custom_unchecked(pmf)?;
        if law.variance <= 0.0 {
            return Err(Error::InvalidArgument("offspring variance must be positive".into()));
        }
        Ok(law)
    }

    /// Exactly one child per parent. Not a critical law with positive
    /// variance; only useful for driving the spatial motion in tests.
    pub fn degenerate_one() -> Self {
        Self::custom_unchecked(vec![0.0, 1.0]).expect("valid pmf")
    }

    fn custom_unchecked(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument("pmf entries must be finite and nonnegative".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("pmf sums to {total}")));
        }
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if (mean - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("offspring mean is {mean}, not 1")));
        }
        let variance = pmf.iter().enumerate().map(|(k, p)| (k as f64 - 1.0).powi(2) * p).sum();
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { name: LawName::Custom, pmf, cdf, variance })
    }

    pub fn name(&self) -> LawName {
        self.name
    }

    pub fn mean(&self) -> f64 {
        1.0
    }

    /// `sigma^2`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// True for the zero-variance fixture.
    pub fn is_degenerate(&self) -> bool {
        self.variance == 0.0
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match self.name {
            LawName::Binary => match k {
                0 | 2 => 0.5,
                _ => 0.0,
            },
            LawName::GeometricHalf => 0.5f64.powi((k + 1).min(2000) as i32),
            LawName::Poisson1 => {
                let log = -1.0 - statrs::function::gamma::ln_gamma(k as f64 + 1.0);
                log.exp()
            }
            LawName::Custom => self.pmf.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// Probability generating function `f(s) = E s^Q` on `[0, 1]`.
    pub fn pgf(&self, s: f64) -> f64 {
        match self.name {
            LawName::Binary => 0.5 * (1.0 + s * s),
            LawName::GeometricHalf => 1.0 / (2.0 - s),
            LawName::Poisson1 => (s - 1.0).exp(),
            LawName::Custom => self.pmf.iter().rev().fold(0.0, |acc, p| acc * s + p),
        }
    }

    /// `1 - f(1 - r)`, evaluated without cancellation for small `r`. Iterating
    /// this from `r = 1` gives the survival probabilities.
    pub fn complementary_pgf(&self, r: f64) -> f64 {
        match self.name {
            LawName::Binary => r * (1.0 - 0.5 * r),
            LawName::GeometricHalf => r / (1.0 + r),
            LawName::Poisson1 => -(-r).exp_m1(),
            LawName::Custom => {
                let log_s = (-r).ln_1p();
                self.pmf
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, p)| p * -(k as f64 * log_s).exp_m1())
                    .sum()
            }
        }
    }

    /// One offspring count.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_sum(1, rng)
    }

    /// Total offspring of `parents` independent individuals.
    pub fn sample_sum<R: Rng + ?Sized>(&self, parents: u64, rng: &mut R) -> u64 {
        if parents == 0 {
            return 0;
        }
        if parents < AGGREGATION_THRESHOLD {
            self.sample_sum_individually(parents, rng)
        } else {
            self.sample_sum_aggregated(parents, rng)
        }
    }

    /// Parent-by-parent draws. Binary and geometric parents are read off a
    /// stream of fair bits: a binary parent is one bit, and a geometric parent
    /// is the run of zeros before its next one-bit.
    pub fn sample_sum_individually<R: Rng + ?Sized>(&self, parents: u64, rng: &mut R) -> u64 {
        match self.name {
            LawName::Binary => 2 * fair_bit_count(parents, rng),
            LawName::GeometricHalf => zeros_before_ones(parents, rng),
            LawName::Poisson1 => (0..parents).map(|_| poisson_one(rng)).sum(),
            LawName::Custom => (0..parents).map(|_| self.sample_custom(rng)).sum(),
        }
    }

    /// Exact law of the total: `2 Bin(c, 1/2)`, `NegBin(c, 1/2)` as a
    /// Gamma-mixed Poisson, and `Poisson(c)`. Custom laws have no closed form
    /// and stay individual.
    pub fn sample_sum_aggregated<R: Rng + ?Sized>(&self, parents: u64, rng: &mut R) -> u64 {
        match self.name {
            LawName::Binary => 2 * Binomial::new(parents, 0.5).unwrap().sample(rng),
            LawName::GeometricHalf => {
                let rate = Gamma::new(parents as f64, 1.0).unwrap().sample(rng);
                poisson(rate, rng)
            }
            LawName::Poisson1 => poisson(parents as f64, rng),
            LawName::Custom => self.sample_sum_individually(parents, rng),
        }
    }

    fn sample_custom<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = rng.random::<f64>();
        self.cdf.partition_point(|&c| c <= u) as u64
    }
}

fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).unwrap().sample(rng) as u64
}

/// Poisson(1) by multiplying uniforms.
fn poisson_one<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    const LIMIT: f64 = 0.367_879_441_171_442_33; // e^-1
    let mut prod = rng.random::<f64>();
    let mut k = 0;
    while prod > LIMIT {
        prod *= rng.random::<f64>();
        k += 1;
    }
    k
}

/// Number of ones among `count` fair bits, i.e. `Bin(count, 1/2)`.
pub(crate) fn fair_bit_count<R: Rng + ?Sized>(count: u64, rng: &mut R) -> u64 {
    let mut ones = 0;
    let mut left = count;
    while left >= 64 {
        ones += u64::from(rng.next_u64().count_ones());
        left -= 64;
    }
    if left > 0 {
        let mask = (1u64 << left) - 1;
        ones += u64::from((rng.next_u64() & mask).count_ones());
    }
    ones
}

/// Zeros seen in a fair bit stream before the `ones`-th one-bit: a sum of
/// `ones` independent `Geometric(1/2)` counts.
fn zeros_before_ones<R: Rng + ?Sized>(ones: u64, rng: &mut R) -> u64 {
    let mut need = ones;
    let mut zeros = 0;
    loop {
        let mut word = rng.next_u64();
        let found = u64::from(word.count_ones());
        if found < need {
            need -= found;
            zeros += 64 - found;
            continue;
        }
        for _ in 1..need {
            word &= word - 1;
        }
        let position = u64::from(word.trailing_zeros());
        return zeros + position + 1 - need;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::stats::MeanVar;

    fn laws() -> Vec<OffspringLaw> {
        vec![
            OffspringLaw::binary(),
            OffspringLaw::geometric_half(),
            OffspringLaw::poisson1(),
            OffspringLaw::custom(vec![0.3, 0.5, 0.1, 0.1]).unwrap(),
        ]
    }

    #[test]
    fn pgf_matches_pmf_sum() {
        for law in laws() {
            for &s in &[0.0f64, 0.5, 1.0] {
                let series: f64 = (0..200).map(|k| law.pmf(k) * s.powi(k as i32)).sum();
                assert!((law.pgf(s) - series).abs() < 1e-10, "{} at {s}", law.name());
            }
            assert!((law.pgf(1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn moments_from_pmf() {
        for law in laws() {
            let mean: f64 = (0..200).map(|k| k as f64 * law.pmf(k)).sum();
            let var: f64 = (0..200).map(|k| (k as f64 - 1.0).powi(2) * law.pmf(k)).sum();
            assert!((mean - 1.0).abs() < 1e-12);
            assert!((var - law.variance()).abs() < 1e-10, "{}", law.name());
        }
    }

    #[test]
    fn complementary_pgf_is_consistent() {
        for law in laws() {
            for &r in &[1.0, 0.5, 0.1, 1e-3] {
                assert!((law.complementary_pgf(r) - (1.0 - law.pgf(1.0 - r))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn custom_rejects_noncritical() {
        assert!(OffspringLaw::custom(vec![0.5, 0.5]).is_err());
        assert!(OffspringLaw::custom(vec![0.0, 1.0]).is_err());
        assert!(OffspringLaw::degenerate_one().is_degenerate());
    }

    #[test]
    fn individual_and_aggregate_sums_agree_in_moments() {
        let mut rng = seeded(11);
        let parents = 20_000;
        for law in laws().into_iter().take(3) {
            let (mut ind, mut agg) = (MeanVar::default(), MeanVar::default());
            for _ in 0..400 {
                ind.push(law.sample_sum_individually(parents, &mut rng) as f64);
                agg.push(law.sample_sum_aggregated(parents, &mut rng) as f64);
            }
            let target_sd = (law.variance() * parents as f64).sqrt();
            for acc in [ind, agg] {
                let est = acc.estimate();
                assert!(est.within(parents as f64, 4.0, 0.0), "{} {est:?}", law.name());
                assert!((acc.variance().sqrt() / target_sd - 1.0).abs() < 0.15);
            }
        }
    }

    #[test]
    fn geometric_bit_stream_matches_pmf() {
        let mut rng = seeded(12);
        let law = OffspringLaw::geometric_half();
        let mut counts = [0u64; 6];
        let reps = 200_000;
        for _ in 0..reps {
            let k = law.sample(&mut rng) as usize;
            if k < 6 {
                counts[k] += 1;
            }
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = law.pmf(k as u64);
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((c as f64 / reps as f64 - p).abs() < 4.0 * se, "k={k}");
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("geom".parse::<LawName>().unwrap(), LawName::GeometricHalf);
        assert!("cauchy".parse::<LawName>().is_err());
    }
}
