//! Exact and semi-analytic m-step transition probabilities of the biased
//! reflected walk.
//!
//! Three routes are provided:
//!
//! * forward dynamic programming over the kernel (the exact oracle);
//! * Kac's spectral representation `P(S_m = k) = p*_m(k) + R_m(k)` for
//!   `k >= 1`, with the geometric main term in closed form and the remainder
//!   an integral over `[0, pi]` evaluated by dyadic Simpson quadrature;
//! * tail sums, either exact (DP, optionally truncated with a certified
//!   escape bound) or from the closed-form geometric tail of the main term
//!   plus a summed remainder envelope.
//!
//! With `d = p - q` the remainder integrand is
//! `cos^m t * sin^2 t / (d^2 cos^2 t + sin^2 t) * f_s(t) * f_k(t)` where
//! `f_i(t) = cos(i t) - d cos(t) sin(i t) / sin(t)`. These are the generalized
//! eigenfunctions of the kernel: the boundary condition at the reflecting
//! origin forces the `cos t` factor.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{dyadic_simpson, dyadic_simpson_indexed};
use crate::walk::WalkParams;

/// `P(S_m = site | S_0 = start)` for every site in `0..=start + m`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRow {
    pub params: WalkParams,
    pub start: u64,
    pub m: u64,
    probs: Vec<f64>,
}

impl TransitionRow {
    pub fn prob(&self, site: u64) -> f64 {
        self.probs.get(site as usize).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `P(S_m >= threshold)`.
    pub fn tail(&self, threshold: u64) -> f64 {
        self.probs.iter().skip(threshold as usize).sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum()
    }

    /// `(site, probability)` for every site in the support range.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().enumerate().map(|(k, &p)| (k as u64, p))
    }
}

/// Forward iteration of the kernel, one step at a time. Uses two dense
/// buffers; after `m` steps the state covers sites `0..=start + m`, or
/// `0..=cap` when truncated.
#[derive(Clone, Debug)]
pub struct TransitionDp {
    params: WalkParams,
    start: u64,
    m: u64,
    cap: Option<usize>,
    cur: Vec<f64>,
    next: Vec<f64>,
    escaped: f64,
}

impl TransitionDp {
    pub fn new(params: WalkParams, start: u64) -> Self {
        let mut cur = vec![0.0; start as usize + 2];
        cur[start as usize] = 1.0;
        Self { params, start, m: 0, cap: None, next: cur.clone(), cur, escaped: 0.0 }
    }

    /// Kills paths that step above `cap`; their mass accumulates in
    /// [`TransitionDp::escaped`], which bounds the total-variation error of
    /// the truncated row.
    pub fn truncated(params: WalkParams, start: u64, cap: u64) -> Result<Self> {
        if cap < start.max(1) {
            return Err(Error::InvalidArgument(format!("cap {cap} below start {start}")));
        }
        let mut dp = Self::new(params, start);
        dp.cap = Some(cap as usize);
        Ok(dp)
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn escaped(&self) -> f64 {
        self.escaped
    }

    /// Highest site that can hold mass at the current step.
    fn top(&self) -> usize {
        let free = (self.start + self.m) as usize;
        self.cap.map_or(free, |c| free.min(c))
    }

    pub fn advance(&mut self) {
        let p = self.params.p_down();
        let q = self.params.p_up();
        let old_top = self.top();
        self.m += 1;
        let top = self.top();
        if self.cur.len() < top + 2 {
            self.cur.resize(top + 2, 0.0);
            self.next.resize(top + 2, 0.0);
        }
        let cur = &self.cur;
        let next = &mut self.next;
        next[0] = p * cur[1];
        if top >= 1 {
            next[1] = cur[0] + if top >= 2 { p * cur[2] } else { 0.0 };
        }
        if top >= 2 {
            let below = &cur[1..top];
            let above = &cur[3..top + 2];
            for ((out, &lo), &hi) in next[2..=top].iter_mut().zip(below).zip(above) {
                *out = q * lo + p * hi;
            }
        }
        if let Some(cap) = self.cap {
            if old_top == cap {
                self.escaped += if cap == 0 { cur[0] } else { q * cur[cap] };
            }
        }
        next[top + 1] = 0.0;
        std::mem::swap(&mut self.cur, &mut self.next);
    }

    pub fn probs(&self) -> &[f64] {
        &self.cur[..=self.top()]
    }

    pub fn row(&self) -> TransitionRow {
        TransitionRow { params: self.params, start: self.start, m: self.m, probs: self.probs().to_vec() }
    }
}

/// Exact `P(S_m = . | S_0 = start)` by forward DP, cost `O(m (start + m))`.
pub fn rw_dp_transition_prob(params: &WalkParams, start: u64, m: u64) -> TransitionRow {
    let mut dp = TransitionDp::new(*params, start);
    for _ in 0..m {
        dp.advance();
    }
    dp.row()
}

/// `P^0(max_{i <= m} |S_i| >= k)` for the simple walk on the integers, by DP
/// on `(-k, k)` with absorbing exits.
pub fn max_abs_simple_walk_tail_exact(m: u64, k: u64) -> Result<f64> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidArgument("m and k must be at least 1".into()));
    }
    if k > m {
        return Ok(0.0);
    }
    // index i <-> position i - (k - 1)
    let width = 2 * k as usize - 1;
    let mut cur = vec![0.0; width];
    let mut next = vec![0.0; width];
    cur[k as usize - 1] = 1.0;
    let mut absorbed = 0.0;
    for _ in 0..m {
        absorbed += 0.5 * (cur[0] + cur[width - 1]);
        for i in 0..width {
            let left = if i > 0 { cur[i - 1] } else { 0.0 };
            let right = if i + 1 < width { cur[i + 1] } else { 0.0 };
            next[i] = 0.5 * (left + right);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(absorbed)
}

/// The split `P(S_m = k | S_0 = start) = main_term + remainder`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KacDecomposition {
    pub start: u64,
    pub m: u64,
    pub k: u64,
    /// `p*_m(k) = (p - q)/(2pq) (q/p)^k (1 + (-1)^(start + k + m))`.
    pub main_term: f64,
    /// `R_m(k)`.
    pub remainder: f64,
    /// The quadrature value of the integral in `R_m(k)`.
    pub integral: f64,
    /// `log` of the factor multiplying the integral.
    pub log_prefactor: f64,
    /// Quadrature error estimate carried to probability scale.
    pub error_estimate: f64,
}

impl KacDecomposition {
    pub fn total(&self) -> f64 {
        self.main_term + self.remainder
    }

    fn vanishing(start: u64, m: u64, k: u64) -> Self {
        Self {
            start,
            m,
            k,
            main_term: 0.0,
            remainder: 0.0,
            integral: 0.0,
            log_prefactor: f64::NEG_INFINITY,
            error_estimate: 0.0,
        }
    }
}

/// `ln(q/p)`; zero without drift.
fn ln_ratio(params: &WalkParams) -> f64 {
    let d = params.drift();
    (-d).ln_1p() - d.ln_1p()
}

/// `ln(2 sqrt(pq)) = ln(1 - d^2) / 2`.
fn ln_contraction(params: &WalkParams) -> f64 {
    let d = params.drift();
    0.5 * (-d * d).ln_1p()
}

fn main_term(params: &WalkParams, start: u64, m: u64, k: u64) -> f64 {
    if (start + m + k) % 2 == 1 || params.beta() == 0.0 {
        return 0.0;
    }
    let (p, q) = (params.p_down(), params.p_up());
    2.0 * (p - q) / (2.0 * p * q) * (k as f64 * ln_ratio(params)).exp()
}

/// `ln[(2/pi) (p/q)^(s/2) (q/p)^(k/2) (2 sqrt(pq))^m]`.
fn log_prefactor(params: &WalkParams, start: u64, m: u64, k: u64) -> f64 {
    (2.0 / PI).ln() + 0.5 * (k as f64 - start as f64) * ln_ratio(params) + m as f64 * ln_contraction(params)
}

/// `sin^2 t / (d^2 cos^2 t + sin^2 t)`, i.e. `tan^2 / (d^2 + tan^2)`.
#[inline]
fn spectral_weight(d: f64, sin: f64, cos: f64) -> f64 {
    if d == 0.0 {
        return 1.0;
    }
    let s2 = sin * sin;
    s2 / (d * d * cos * cos + s2)
}

/// `f_i(t)` with its limits at the endpoints.
fn eigenfunction(i: u64, d: f64, theta: f64) -> f64 {
    if i == 0 {
        return 1.0;
    }
    let i_f = i as f64;
    if theta <= 0.0 {
        return 1.0 - d * i_f;
    }
    if theta >= PI {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        return sign * (1.0 - d * i_f);
    }
    let (sin, cos) = theta.sin_cos();
    (i_f * theta).cos() - d * cos * (i_f * theta).sin() / sin
}

fn initial_panels(start: u64, m: u64, k: u64) -> usize {
    ((start + m + k) as usize).clamp(32, 1 << 14).next_power_of_two()
}

/// Evaluates the Kac decomposition at one `(start, m, k)`, `k >= 1`.
/// The quadrature runs until its change between dyadic levels, carried to
/// probability scale, is below `quadrature_tol`.
pub fn kac_transition_prob(
    params: &WalkParams,
    start: u64,
    m: u64,
    k: u64,
    quadrature_tol: f64,
) -> Result<KacDecomposition> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidArgument("the spectral formula needs m >= 1 and k >= 1".into()));
    }
    if (start + m + k) % 2 == 1 {
        return Ok(KacDecomposition::vanishing(start, m, k));
    }
    let d = params.drift();
    let log_pre = log_prefactor(params, start, m, k);
    let scale = log_pre.exp();
    let integrand = |theta: f64| {
        let (sin, cos) = theta.sin_cos();
        let (sin, cos) = if theta <= 0.0 {
            (0.0, 1.0)
        } else if theta >= PI {
            (0.0, -1.0)
        } else {
            (sin, cos)
        };
        cos.powi(m as i32)
            * spectral_weight(d, sin, cos)
            * eigenfunction(start, d, theta)
            * eigenfunction(k, d, theta)
    };
    let tol = if scale > 0.0 { quadrature_tol / scale } else { f64::INFINITY };
    let quad = dyadic_simpson(integrand, 0.0, PI, tol, initial_panels(start, m, k))?;
    Ok(KacDecomposition {
        start,
        m,
        k,
        main_term: main_term(params, start, m, k),
        remainder: scale * quad.value,
        integral: quad.value,
        log_prefactor: log_pre,
        error_estimate: scale * quad.error_estimate,
    })
}

/// Kac decompositions for many `(m, k)` at fixed `(params, start)`.
///
/// Node factors (spectral weight times `f_start`, and `f_k` for every `k` up
/// to `max_k`) are tabulated once on `finest + 1` nodes; each evaluation then
/// reuses them under the same dyadic refinement as [`kac_transition_prob`].
/// `f_k` comes from the Chebyshev recurrences for `cos(k t)` and
/// `sin(k t)/sin t`, which also give the endpoint limits exactly.
pub struct KacSweep {
    params: WalkParams,
    start: u64,
    finest: usize,
    cos: Vec<f64>,
    base: Vec<f64>,
    eig: Vec<Vec<f64>>,
    powered: Vec<f64>,
    powered_m: Option<u64>,
}

impl KacSweep {
    pub fn new(params: WalkParams, start: u64, max_k: u64, finest: usize) -> Self {
        let finest = finest.max(4).next_power_of_two();
        let d = params.drift();
        let thetas: Vec<f64> = (0..=finest).map(|j| PI * j as f64 / finest as f64).collect();
        let mut cos: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
        let mut sin: Vec<f64> = thetas.iter().map(|t| t.sin()).collect();
        cos[0] = 1.0;
        cos[finest] = -1.0;
        sin[0] = 0.0;
        sin[finest] = 0.0;

        let top = max_k.max(start) as usize;
        let mut eig = vec![vec![1.0; finest + 1]];
        // cos(i t) = T_i(c), sin(i t)/sin t = U_{i-1}(c)
        let mut t_prev = vec![1.0; finest + 1];
        let mut t_cur = cos.clone();
        let mut u_prev = vec![0.0; finest + 1];
        let mut u_cur = vec![1.0; finest + 1];
        for _ in 1..=top {
            let row: Vec<f64> = (0..=finest).map(|j| t_cur[j] - d * cos[j] * u_cur[j]).collect();
            eig.push(row);
            for j in 0..=finest {
                let c2 = 2.0 * cos[j];
                let t_next = c2 * t_cur[j] - t_prev[j];
                let u_next = c2 * u_cur[j] - u_prev[j];
                t_prev[j] = t_cur[j];
                t_cur[j] = t_next;
                u_prev[j] = u_cur[j];
                u_cur[j] = u_next;
            }
        }
        let base = (0..=finest)
            .map(|j| spectral_weight(d, sin[j], cos[j]) * eig[start as usize][j])
            .collect();
        Self { params, start, finest, cos, base, eig, powered: vec![0.0; finest + 1], powered_m: None }
    }

    pub fn max_k(&self) -> u64 {
        self.eig.len() as u64 - 1
    }

    pub fn eval(&mut self, m: u64, k: u64, quadrature_tol: f64) -> Result<KacDecomposition> {
        if m == 0 || k == 0 {
            return Err(Error::InvalidArgument("the spectral formula needs m >= 1 and k >= 1".into()));
        }
        if k > self.max_k() {
            return Err(Error::InvalidArgument(format!("k = {k} beyond tabulated {}", self.max_k())));
        }
        let start = self.start;
        if (start + m + k) % 2 == 1 {
            return Ok(KacDecomposition::vanishing(start, m, k));
        }
        if self.powered_m != Some(m) {
            for j in 0..=self.finest {
                self.powered[j] = self.cos[j].powi(m as i32) * self.base[j];
            }
            self.powered_m = Some(m);
        }
        let log_pre = log_prefactor(&self.params, start, m, k);
        let scale = log_pre.exp();
        let tol = if scale > 0.0 { quadrature_tol / scale } else { f64::INFINITY };
        let eig = &self.eig[k as usize];
        let powered = &self.powered;
        let quad = dyadic_simpson_indexed(
            self.finest,
            |j| powered[j] * eig[j],
            0.0,
            PI,
            tol,
            initial_panels(start, m, k),
        )?;
        Ok(KacDecomposition {
            start,
            m,
            k,
            main_term: main_term(&self.params, start, m, k),
            remainder: scale * quad.value,
            integral: quad.value,
            log_prefactor: log_pre,
            error_estimate: scale * quad.error_estimate,
        })
    }
}

/// `int_0^pi |cos t|^m dt = sqrt(pi) Gamma((m+1)/2) / Gamma(m/2 + 1)`.
pub fn wallis_integral(m: u64) -> f64 {
    let m = m as f64;
    (0.5 * PI.ln() + ln_gamma((m + 1.0) / 2.0) - ln_gamma(m / 2.0 + 1.0)).exp()
}

/// An explicit bound on `|R_m(k)|` from `|f_i| <= 1 + d i`, weight `<= 1`:
/// `(2/pi) W_m (p/q)^(s/2) (q/p)^(k/2) (2 sqrt(pq))^m (1 + d s)(1 + d k)`.
pub fn remainder_envelope(params: &WalkParams, start: u64, m: u64, k: u64) -> f64 {
    let d = params.drift();
    let log = log_prefactor(params, start, m, k) + wallis_integral(m).ln();
    log.exp() * (1.0 + d * start as f64) * (1.0 + d * k as f64)
}

/// `(2 sqrt(pq))^m (q/p)^(k/2) (1 + 2 k beta)`: the shape of the remainder
/// envelope with its start-dependent constant left out.
pub fn remainder_envelope_shape(params: &WalkParams, m: u64, k: u64) -> f64 {
    let log = m as f64 * ln_contraction(params) + 0.5 * k as f64 * ln_ratio(params);
    log.exp() * (1.0 + 2.0 * k as f64 * params.beta())
}

/// Parity class of the walk after `m` steps from `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(x: u64) -> Self {
        if x % 2 == 0 { Parity::Even } else { Parity::Odd }
    }

    fn bit(self) -> u64 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

/// Smallest `k >= max(threshold, 1)` with the given parity.
fn first_admissible(parity: Parity, threshold: u64) -> u64 {
    let k = threshold.max(1);
    if k % 2 == parity.bit() { k } else { k + 1 }
}

/// Closed-form sum of the main term over `k >= threshold` of the given
/// parity: `2 (p-q)/(2pq) (q/p)^k0 / (1 - (q/p)^2)` over `k >= 1`. When the
/// threshold admits the origin (threshold 0, even parity) the origin's atom
/// `(p - q)/p` of the period-two stationary law is added, so the full sum is
/// exactly one for either parity. Zero when there is no drift.
pub fn geometric_main_term_tail(params: &WalkParams, parity: Parity, threshold: u64) -> f64 {
    if params.beta() == 0.0 {
        return 0.0;
    }
    let (p, q) = (params.p_down(), params.p_up());
    let k0 = first_admissible(parity, threshold);
    let lr = ln_ratio(params);
    let geometric = (k0 as f64 * lr).exp() / -(2.0 * lr).exp_m1();
    let mut tail = (p - q) / (p * q) * geometric;
    if threshold == 0 && parity == Parity::Even {
        tail += (p - q) / p;
    }
    tail
}

/// Sum over `k >= threshold` (given parity, `k >= 1`) of
/// [`remainder_envelope`].
pub fn remainder_tail_bound(params: &WalkParams, start: u64, m: u64, threshold: u64) -> f64 {
    let parity = Parity::of(start + m);
    let k0 = first_admissible(parity, threshold) as f64;
    let d = params.drift();
    // sum_{j>=0} r^(k0+2j) (1 + d(k0+2j)), r = sqrt(q/p), rho = r^2
    let lr = ln_ratio(params);
    let log_scale = (2.0 / PI).ln() + wallis_integral(m).ln() - 0.5 * start as f64 * lr
        + m as f64 * ln_contraction(params)
        + 0.5 * k0 * lr;
    let series = if d == 0.0 {
        f64::INFINITY
    } else {
        let rho = lr.exp();
        let one_minus = -lr.exp_m1();
        (1.0 + d * k0) / one_minus + 2.0 * d * rho / (one_minus * one_minus)
    };
    log_scale.exp() * (1.0 + d * start as f64) * series
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailMethod {
    /// DP, truncated with a certified escape bound when the walk has drift
    /// and the untruncated grid would be large.
    Exact,
    /// Geometric main-term tail plus the summed remainder envelope. Requires
    /// `m >= n`.
    Fast,
    /// Fast when `m >= n`, exact otherwise.
    Auto,
}

/// A tail probability with a guaranteed enclosing interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: TailMethod,
}

/// Above this many sites the exact route truncates.
const FULL_DP_SITES: u64 = 20_000;

/// Escape mass targeted by the automatic truncation cap.
const TRUNCATION_TARGET: f64 = 1e-20;

/// `P(S_m >= threshold | S_0 = start)`.
pub fn tail_probability(
    params: &WalkParams,
    start: u64,
    m: u64,
    threshold: u64,
    method: TailMethod,
) -> Result<TailEstimate> {
    if threshold == 0 {
        return Ok(TailEstimate { value: 1.0, lower: 1.0, upper: 1.0, method });
    }
    match method {
        TailMethod::Fast => tail_fast(params, start, m, threshold),
        TailMethod::Exact => Ok(tail_exact(params, start, m, threshold)),
        TailMethod::Auto => match tail_fast(params, start, m, threshold) {
            Err(Error::OutsideFastPathRegime { .. }) => Ok(tail_exact(params, start, m, threshold)),
            other => other,
        },
    }
}

fn tail_fast(params: &WalkParams, start: u64, m: u64, threshold: u64) -> Result<TailEstimate> {
    if m < params.n() || params.beta() == 0.0 {
        return Err(Error::OutsideFastPathRegime { m, n: params.n() });
    }
    let main = geometric_main_term_tail(params, Parity::of(start + m), threshold);
    let bound = remainder_tail_bound(params, start, m, threshold);
    Ok(TailEstimate {
        value: main,
        lower: (main - bound).max(0.0),
        upper: (main + bound).min(1.0),
        method: TailMethod::Fast,
    })
}

fn tail_exact(params: &WalkParams, start: u64, m: u64, threshold: u64) -> TailEstimate {
    let full = start + m;
    let cap = if params.beta() == 0.0 || full <= FULL_DP_SITES {
        full
    } else {
        // A path reaching `start + L` must cross L sites against the drift;
        // each attempt succeeds with probability about (q/p)^L and there are
        // at most m + 1 attempts.
        let per_site = -ln_ratio(params);
        let lift = ((m as f64 + 1.0).ln() - TRUNCATION_TARGET.ln()) / per_site;
        (start + lift.ceil() as u64).max(threshold + 2).min(full)
    };
    if threshold > full {
        return TailEstimate { value: 0.0, lower: 0.0, upper: 0.0, method: TailMethod::Exact };
    }
    let mut dp = if cap == full {
        TransitionDp::new(*params, start)
    } else {
        TransitionDp::truncated(*params, start, cap).expect("cap >= start")
    };
    for _ in 0..m {
        dp.advance();
    }
    let tail: f64 = dp.probs().iter().skip(threshold as usize).sum();
    TailEstimate { value: tail, lower: tail, upper: (tail + dp.escaped()).min(1.0), method: TailMethod::Exact }
}
