//! Composite Simpson quadrature with dyadic refinement.
//!
//! Panels are halved globally until two consecutive Simpson estimates agree.
//! Every level reuses the nodes of the previous one. For smooth periodic
//! integrands over a full period the composite rule converges geometrically,
//! which is the regime the transition-probability integrals live in.

use crate::error::{Error, Result};

/// Levels of halving allowed beyond the initial panel count.
pub const MAX_REFINEMENTS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// `|S_{2N} - S_N|` at the accepted level.
    pub error_estimate: f64,
    pub panels: usize,
}

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Running trapezoid sums for nested grids; Simpson is `(4 T_2N - T_N) / 3`.
struct NestedSums {
    ends: f64,
    interior: CompensatedSum,
    abs_total: f64,
}

impl NestedSums {
    fn trapezoid(&self, h: f64) -> f64 {
        h * (self.ends + self.interior.value())
    }
}

/// Integrates `f` over `[a, b]`, starting from `initial_panels` (rounded up to
/// a power of two, at least 2) and halving until the change between levels
/// is within `tol` twice in a row. A roundoff floor proportional to the
/// integral of `|f|` stops refinement that cannot make progress in double
/// precision.
pub fn dyadic_simpson<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    initial_panels: usize,
) -> Result<QuadratureResult> {
    if !(b > a) {
        return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    let width = b - a;
    let mut panels = initial_panels.max(2).next_power_of_two();

    let fa = f(a);
    let fb = f(b);
    let mut sums = NestedSums {
        ends: 0.5 * (fa + fb),
        interior: CompensatedSum::default(),
        abs_total: 0.5 * (fa.abs() + fb.abs()),
    };
    let mut add_nodes = |sums: &mut NestedSums, count: usize, step: f64, offset: f64| {
        for i in 0..count {
            let v = f(a + offset + i as f64 * step);
            sums.interior.add(v);
            sums.abs_total += v.abs();
        }
    };

    // Trapezoid at `panels / 2`, then at `panels`.
    let coarse = panels / 2;
    add_nodes(&mut sums, coarse - 1, width / coarse as f64, width / coarse as f64);
    let mut t_prev = sums.trapezoid(width / coarse as f64);
    add_nodes(&mut sums, coarse, width / panels as f64 * 2.0, width / panels as f64);
    let mut t_cur = sums.trapezoid(width / panels as f64);
    let mut s_prev = (4.0 * t_cur - t_prev) / 3.0;

    let mut agreed = 0;
    let mut last_change = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        let h_new = width / (2 * panels) as f64;
        add_nodes(&mut sums, panels, 2.0 * h_new, h_new);
        panels *= 2;
        t_prev = t_cur;
        t_cur = sums.trapezoid(h_new);
        let s_cur = (4.0 * t_cur - t_prev) / 3.0;
        last_change = (s_cur - s_prev).abs();
        let floor = 64.0 * f64::EPSILON * h_new * sums.abs_total;
        if last_change <= tol.max(floor) {
            agreed += 1;
            if agreed == 2 {
                return Ok(QuadratureResult { value: s_cur, error_estimate: last_change, panels });
            }
        } else {
            agreed = 0;
        }
        s_prev = s_cur;
    }
    Err(Error::QuadratureNonConvergence { levels: MAX_REFINEMENTS, last_change })
}

/// The same refinement over a fixed dyadic node set: `value(j)` returns the
/// integrand at `a + j (b - a) / finest`, where `finest` is a power of two.
/// Coarser levels only touch every `finest / panels`-th node, so callers can
/// build integrand values lazily from cached per-node factors.
pub fn dyadic_simpson_indexed<F: Fn(usize) -> f64>(
    finest: usize,
    value: F,
    a: f64,
    b: f64,
    tol: f64,
    initial_panels: usize,
) -> Result<QuadratureResult> {
    assert!(finest.is_power_of_two() && finest >= 4, "finest level must be 2^k >= 4");
    let width = b - a;
    let mut panels = initial_panels.max(2).next_power_of_two().min(finest / 2);

    let simpson = |panels: usize| -> (f64, f64) {
        let stride = finest / panels;
        let h = width / panels as f64;
        let mut acc = CompensatedSum::default();
        let mut abs = 0.0;
        for i in 0..=panels {
            let v = value(i * stride);
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc.add(w * v);
            abs += w * v.abs();
        }
        (acc.value() * h / 3.0, abs * h / 3.0)
    };

    let (mut s_prev, _) = simpson(panels);
    let mut agreed = 0;
    let mut last_change = f64::INFINITY;
    while panels < finest {
        panels *= 2;
        let (s_cur, abs) = simpson(panels);
        last_change = (s_cur - s_prev).abs();
        let floor = 64.0 * f64::EPSILON * abs;
        if last_change <= tol.max(floor) {
            agreed += 1;
            if agreed == 2 {
                return Ok(QuadratureResult { value: s_cur, error_estimate: last_change, panels });
            }
        } else {
            agreed = 0;
        }
        s_prev = s_cur;
    }
    Err(Error::QuadratureNonConvergence { levels: finest.trailing_zeros(), last_change })
}
