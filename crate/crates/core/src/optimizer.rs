//! Stable interval range and the delay-minimizing packetization interval.
//!
//! All searches run in `ln T`. The delay curve is treated as unimodal, but a
//! coarse scan checks that before golden-section search is trusted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expected_delay, stability_report, DelayBreakdown, Mode, SystemParams};
use crate::scalar::Scalar;

/// Smallest interval probed, in units of `1/λ`.
pub const SEARCH_FLOOR: f64 = 1e-6;
/// Largest interval probed when scanning for stability, in units of `1/λ`.
pub const SEARCH_CEILING: f64 = 1e4;
/// Golden-section stopping width in `ln T`.
pub const LOG_TOL: f64 = 1e-4;

const RANGE_SCAN_POINTS: usize = 200;
const COARSE_POINTS: usize = 64;
const DENSE_POINTS: usize = 2048;
const RISING_PROBES: usize = 8;
const MAX_EXPANSIONS: usize = 400;

/// Interval of stable `T`. `lower == 0` and `upper == ∞` mean unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableRange<S = f64> {
    pub lower: S,
    pub upper: S,
}

impl<S: Scalar> StableRange<S> {
    pub fn contains(&self, t: S) -> bool {
        t > self.lower && t < self.upper
    }

    pub fn bounded_below(&self) -> bool {
        self.lower > S::zero()
    }

    pub fn bounded_above(&self) -> bool {
        self.upper.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    UnimodalSearch,
    GridFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult<S = f64> {
    pub t_star: S,
    pub delay_at_t_star: DelayBreakdown<S>,
    pub stable_range: StableRange<S>,
    pub method: SearchMethod,
    /// Number of delay evaluations spent.
    pub evaluations: usize,
}

/// Utilization at interval `t`; overflow counts as infinite.
fn rho_at<S: Scalar>(params: &SystemParams<S>, t: S) -> Result<S> {
    Ok(stability_report(&params.with_interval(t))?.utilization)
}

/// Mean total delay at `t`, or `+∞` when the queue is unstable there.
pub fn delay_at<S: Scalar>(params: &SystemParams<S>, t: S) -> Result<S> {
    match expected_delay(&params.with_interval(t)) {
        Ok(d) => Ok(d.total),
        Err(Error::Unstable { .. }) | Err(Error::Overflow { .. }) => Ok(S::infinity()),
        Err(e) => Err(e),
    }
}

pub(crate) fn log_grid<S: Scalar>(lo: S, hi: S, n: usize) -> Vec<S> {
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / S::from_count(n as u64 - 1);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + step * S::from_count(i as u64)).exp()
            }
        })
        .collect()
}

/// Golden-section search for a minimum of `f` over `[lo, hi]` in log space.
pub(crate) fn golden_log<S: Scalar, F>(lo: S, hi: S, mut f: F) -> Result<(S, S, usize)>
where
    F: FnMut(S) -> Result<S>,
{
    let inv_phi = S::lit((5f64.sqrt() - 1.0) / 2.0);
    let tol = S::lit(LOG_TOL);
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c.exp())?;
    let mut fd = f(d.exp())?;
    let mut evals = 2;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d.exp())?;
        }
        evals += 1;
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    Ok((x.exp(), fx, evals))
}

/// Bisection in `ln T` for the boundary between `inside` (predicate true)
/// and `outside`. Returns the last point known to satisfy the predicate.
pub(crate) fn bisect_log<S: Scalar, F>(inside: S, outside: S, rel_tol: S, mut pred: F) -> Result<S>
where
    F: FnMut(S) -> Result<bool>,
{
    let (mut a, mut b) = (inside.ln(), outside.ln());
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol {
            break;
        }
        let m = (a + b) / S::lit(2.0);
        if pred(m.exp())? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a.exp())
}

/// Indices of the discrete local minima of `values`, plateaus collapsed.
pub(crate) fn local_minima<S: Scalar>(values: &[S]) -> Vec<usize> {
    let mut minima = Vec::new();
    let mut falling = true;
    let mut last_drop = 0;
    for i in 1..values.len() {
        let (prev, cur) = (values[i - 1], values[i]);
        if cur < prev || (prev.is_infinite() && cur.is_finite()) {
            falling = true;
            last_drop = i;
        } else if cur > prev {
            if falling {
                minima.push(last_drop);
            }
            falling = false;
        }
    }
    if falling {
        minima.push(last_drop);
    }
    minima
}

/// Limits of the utilization as `T → 0⁺` and `T → ∞`, when they are below one.
fn asymptotically_stable<S: Scalar>(params: &SystemParams<S>) -> (bool, bool) {
    let link = params.link();
    let (lambda, rate) = (params.arrival_rate, params.channel_rate);
    let b = link.header_inv_success();
    let at_zero = match params.mode {
        // k → 1 and E[τ] → 1/λ
        Mode::Efficient => lambda * (link.symbol_len + link.header_len) * b / link.symbol_success() <= rate,
        // headers keep coming every T
        Mode::Slotted => false,
    };
    let error_free_symbols = link.ln_symbol_success == S::zero();
    let at_infinity = error_free_symbols && lambda * link.symbol_len * b < rate;
    (at_zero, at_infinity)
}

/// The set of intervals `T` with `ρ(T) < 1`, assumed to be a single interval.
pub fn stable_interval_range<S: Scalar>(params: &SystemParams<S>) -> Result<StableRange<S>> {
    params.validate()?;
    let scale = params.arrival_rate.recip();
    let floor = S::lit(SEARCH_FLOOR) * scale;
    let ceiling = S::lit(SEARCH_CEILING) * scale;
    let grid = log_grid(floor, ceiling, RANGE_SCAN_POINTS);
    let rho = grid.iter().map(|&t| rho_at(params, t)).collect::<Result<Vec<S>>>()?;
    let stable = |r: S| r < S::one();

    let (first, last) = match rho.iter().position(|&r| stable(r)) {
        Some(i) => (i, rho.iter().rposition(|&r| stable(r)).unwrap_or(i)),
        None => {
            // a narrow stable window can fall between grid points
            let (t, r, _) = golden_log(floor, ceiling, |t| rho_at(params, t))?;
            if !stable(r) {
                return Err(Error::EmptyRange);
            }
            let lower = bisect_log(t, floor, S::lit(1e-12), |x| Ok(stable(rho_at(params, x)?)))?;
            let upper = bisect_log(t, ceiling, S::lit(1e-12), |x| Ok(stable(rho_at(params, x)?)))?;
            return Ok(StableRange { lower, upper });
        }
    };
    let (at_zero, at_infinity) = asymptotically_stable(params);
    let tol = S::lit(1e-12);
    let lower = if first == 0 {
        if at_zero {
            S::zero()
        } else {
            floor
        }
    } else {
        bisect_log(grid[first], grid[first - 1], tol, |x| Ok(stable(rho_at(params, x)?)))?
    };
    let upper = if last == grid.len() - 1 {
        if at_infinity {
            S::infinity()
        } else {
            ceiling
        }
    } else {
        bisect_log(grid[last], grid[last + 1], tol, |x| Ok(stable(rho_at(params, x)?)))?
    };
    Ok(StableRange { lower, upper })
}

/// Finite search bracket inside the stable range.
pub(crate) fn search_bracket<S: Scalar>(params: &SystemParams<S>, range: &StableRange<S>) -> Result<(S, S, usize)> {
    let scale = params.arrival_rate.recip();
    let nudge = S::lit(1e-9);
    let lo = if range.bounded_below() {
        range.lower * (S::one() + nudge)
    } else {
        S::lit(SEARCH_FLOOR) * scale
    };
    if range.bounded_above() {
        return Ok((lo, range.upper * (S::one() - nudge), 0));
    }
    // expand until the delay has risen for several probes in a row
    let mut t = scale.max(lo * S::lit(2.0));
    let mut prev = delay_at(params, t)?;
    let mut rising = 0;
    let mut evals = 1;
    for _ in 0..MAX_EXPANSIONS {
        t = t * S::lit(2.0);
        let d = delay_at(params, t)?;
        evals += 1;
        rising = if d > prev { rising + 1 } else { 0 };
        prev = d;
        if rising >= RISING_PROBES {
            break;
        }
    }
    Ok((lo, t, evals))
}

/// Minimizes the delay over a dense log grid on `[lo, hi]`.
pub fn grid_search_interval<S: Scalar>(params: &SystemParams<S>, lo: S, hi: S, points: usize) -> Result<(S, S)> {
    if points < 2 || !(lo > S::zero() && hi > lo) {
        return Err(Error::InvalidParam {
            field: "interval",
            reason: "grid needs at least two points on 0 < lo < hi".into(),
        });
    }
    let mut best = (lo, S::infinity());
    for t in log_grid(lo, hi, points) {
        let d = delay_at(params, t)?;
        if d < best.1 {
            best = (t, d);
        }
    }
    Ok(best)
}

/// Refines a grid minimum at index `i` with golden-section search on its neighbors.
fn refine<S: Scalar>(params: &SystemParams<S>, grid: &[S], values: &[S], i: usize) -> Result<(S, S, usize)> {
    let a = grid[i.saturating_sub(1)];
    let b = grid[(i + 1).min(grid.len() - 1)];
    let (t, d, evals) = golden_log(a, b, |t| delay_at(params, t))?;
    // golden-section never evaluates the bracket ends
    if values[i] < d {
        Ok((grid[i], values[i], evals))
    } else {
        Ok((t, d, evals))
    }
}

fn dense_minimum<S: Scalar>(params: &SystemParams<S>, lo: S, hi: S) -> Result<(S, usize)> {
    let dense = log_grid(lo, hi, DENSE_POINTS);
    let values = dense.iter().map(|&t| delay_at(params, t)).collect::<Result<Vec<S>>>()?;
    let best = (0..dense.len())
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or(Error::EmptyRange)?;
    let (t, _, evals) = refine(params, &dense, &values, best)?;
    Ok((t, dense.len() + evals))
}

fn finish<S: Scalar>(
    params: &SystemParams<S>,
    t_star: S,
    stable_range: StableRange<S>,
    method: SearchMethod,
    evaluations: usize,
) -> Result<OptimizationResult<S>> {
    Ok(OptimizationResult {
        t_star,
        delay_at_t_star: expected_delay(&params.with_interval(t_star))?,
        stable_range,
        method,
        evaluations,
    })
}

/// The delay-minimizing interval `T*` (the configured interval is ignored).
///
/// A 64-point log scan brackets the minimum for golden-section search; if the
/// scan shows more than one local minimum the dense-grid search of
/// [`optimal_interval_by_grid`] is used instead.
pub fn optimal_interval<S: Scalar>(params: &SystemParams<S>) -> Result<OptimizationResult<S>> {
    let range = stable_interval_range(params)?;
    let (lo, hi, mut evaluations) = search_bracket(params, &range)?;

    let grid = log_grid(lo, hi, COARSE_POINTS);
    let values = grid.iter().map(|&t| delay_at(params, t)).collect::<Result<Vec<S>>>()?;
    evaluations += grid.len();
    let minima = local_minima(&values);
    if minima.len() == 1 {
        let (t, _, evals) = refine(params, &grid, &values, minima[0])?;
        return finish(params, t, range, SearchMethod::UnimodalSearch, evaluations + evals);
    }
    let (t, evals) = dense_minimum(params, lo, hi)?;
    finish(params, t, range, SearchMethod::GridFallback, evaluations + evals)
}

/// `T*` from a 2048-point log grid over the stable range plus local refinement,
/// without the unimodality shortcut.
pub fn optimal_interval_by_grid<S: Scalar>(params: &SystemParams<S>) -> Result<OptimizationResult<S>> {
    let range = stable_interval_range(params)?;
    let (lo, hi, evaluations) = search_bracket(params, &range)?;
    let (t, evals) = dense_minimum(params, lo, hi)?;
    finish(params, t, range, SearchMethod::GridFallback, evaluations + evals)
}
