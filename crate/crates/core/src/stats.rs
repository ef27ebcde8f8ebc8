//! Monte Carlo summaries and goodness-of-fit statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = MeanVar::default();
        for &x in samples {
            acc.push(x);
        }
        acc.estimate()
    }

    pub fn proportion(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self { value: f64::NAN, stderr: f64::NAN, count: 0 };
        }
        let p = successes as f64 / trials as f64;
        Self {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            count: trials,
        }
    }

    /// `|value - target| <= k * stderr + slack`.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr + slack
    }
}

/// Welford accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanVar {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            value: if self.count == 0 { f64::NAN } else { self.mean },
            stderr: (self.variance() / self.count as f64).sqrt(),
            count: self.count,
        }
    }
}

/// Standard error of a sample variance, from the fourth central moment.
pub fn variance_estimate(samples: &[f64]) -> McEstimate {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in samples {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    McEstimate {
        value: m2 * n / (n - 1.0),
        stderr: ((m4 - m2 * m2) / n).sqrt(),
        count: samples.len() as u64,
    }
}

fn sort_floats(xs: &mut [f64]) {
    xs.sort_unstable_by(|a, b| a.total_cmp(b));
}

/// Linear-interpolated quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Quantile of a sorted sample with a distribution-free standard error: half
/// the distance between the order statistics one binomial standard deviation
/// either side of `N q`.
pub fn quantile_estimate(sorted: &[f64], q: f64) -> McEstimate {
    let n = sorted.len();
    let value = quantile_sorted(sorted, q);
    let centre = q * (n - 1) as f64;
    let spread = (n as f64 * q * (1.0 - q)).sqrt();
    let lo = (centre - spread).floor().max(0.0) as usize;
    let hi = ((centre + spread).ceil() as usize).min(n - 1);
    McEstimate { value, stderr: 0.5 * (sorted[hi] - sorted[lo]), count: n as u64 }
}

/// Full-sample quantile with a batch-means standard error: the sample, in
/// its given order, is cut into `sections` equal batches and the spread of
/// the batch quantiles is scaled by `1/sqrt(sections)`. Unlike
/// [`quantile_estimate`] this stays informative for lattice-valued data,
/// where order statistics tie.
pub fn sectioned_quantile(samples: &[f64], q: f64, sections: usize) -> McEstimate {
    assert!(sections >= 2 && samples.len() >= sections, "need at least one sample per section");
    let mut sorted = samples.to_vec();
    sort_floats(&mut sorted);
    let value = quantile_sorted(&sorted, q);
    let size = samples.len() / sections;
    let mut acc = MeanVar::default();
    for chunk in samples.chunks_exact(size).take(sections) {
        let mut c = chunk.to_vec();
        sort_floats(&mut c);
        acc.push(quantile_sorted(&c, q));
    }
    McEstimate { value, stderr: (acc.variance() / sections as f64).sqrt(), count: samples.len() as u64 }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    sort_floats(&mut v);
    quantile_sorted(&v, 0.5)
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|` for a continuous `cdf`.
/// Ties in the sample are handled by jumping the empirical CDF once per
/// distinct value.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    sort_floats(&mut xs);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance; atoms shared by both samples
/// (e.g. mass at zero) are compared after the full jump.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    sort_floats(&mut xs);
    sort_floats(&mut ys);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() || j < ys.len() {
        let x = match (xs.get(i), ys.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Clone, Copy, Debug)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of `observed` counts against the
/// probabilities `expected`. Adjacent cells are pooled left to right until
/// each pooled cell expects at least `min_expected` observations; a short
/// trailing remainder is merged into the last pooled cell.
pub fn chi_square_gof(observed: &[u64], expected: &[f64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(observed.len(), expected.len());
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&obs, &p) in observed.iter().zip(expected) {
        o += obs as f64;
        e += p * total;
        if e >= min_expected {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if o > 0.0 || e > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(statistic);
    ChiSquareResult { statistic, dof, p_value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let est = McEstimate::from_samples(&xs);
        assert!((est.value - 5.0).abs() < 1e-12);
        let var = xs.iter().map(|x| (x - 5.0) * (x - 5.0)).sum::<f64>() / 4.0;
        assert!((est.stderr - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quantile_stderr_scales_like_sqrt_n() {
        let xs: Vec<f64> = (0..=1000).map(f64::from).collect();
        let est = quantile_estimate(&xs, 0.5);
        assert_eq!(est.value, 500.0);
        // one binomial sd is sqrt(1001)/2 ~ 15.8 positions
        assert!((est.stderr - 16.0).abs() <= 1.0, "{}", est.stderr);
        let single = quantile_estimate(&[3.0], 0.5);
        assert_eq!((single.value, single.stderr), (3.0, 0.0));
    }

    #[test]
    fn sectioned_quantile_sees_lattice_noise() {
        let xs: Vec<f64> = (0..400).map(|i| f64::from((i * 7919) % 5)).collect();
        let est = sectioned_quantile(&xs, 0.5, 20);
        assert_eq!(est.value, 2.0);
        assert_eq!(est.count, 400);
        assert!(est.stderr.is_finite() && est.stderr >= 0.0);
        let noisy: Vec<f64> = (0..400).map(|i| f64::from((i * 37) % 11)).collect();
        assert!(sectioned_quantile(&noisy, 0.5, 20).stderr > 0.0);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert!((ks_one_sample(&xs, |x| x) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn ks_two_sample_handles_shared_atoms() {
        let a = [0.0, 0.0, 1.0, 2.0];
        let b = [0.0, 0.0, 1.5, 2.5];
        assert!((ks_two_sample(&a, &b) - 0.25).abs() < 1e-12);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let r = chi_square_gof(&[25, 50, 25], &[0.25, 0.5, 0.25], 5.0);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
