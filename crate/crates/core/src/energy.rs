//! Energy consumption rating (transmit energy per delivered information bit)
//! and its minimization under a mean-delay budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::optimizer::{
    bisect_log, delay_at, golden_log, local_minima, log_grid, optimal_interval, SEARCH_FLOOR,
};
use crate::scalar::Scalar;
use crate::special::{zero_deleted_step_expectation, zero_truncated_inverse_moment};

const SCAN_POINTS: usize = 64;
const ENDPOINT_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Interior,
    LeftCorner,
    RightCorner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult<S = f64> {
    /// Minimizer of the ECR over all `T`; infinite when the ECR keeps falling.
    pub t_star_unconstrained: S,
    /// ECR at `t_star_constrained`, in joule per information bit.
    pub ecr_at_star: S,
    pub t_star_constrained: S,
    pub binding: Binding,
    /// Ends of the feasible window.
    pub corner_points: Vec<S>,
}

/// Expected transmit energy per information bit, `E[r·l(k)/(kN)]·P_t/R`,
/// with `k` zero-truncated Poisson as in efficient mode.
pub fn ecr<S: Scalar>(params: &SystemParams<S>) -> Result<S> {
    params.validate()?;
    let link = params.link();
    let mu = params.mu();
    let n = S::from_count(params.symbol_bits as u64);
    let zeta = link.symbol_success();
    let q = -(-mu).exp_m1();
    let per_symbol = zero_deleted_step_expectation(mu, zeta)? / q;
    let per_header = zero_truncated_inverse_moment(mu, zeta)?;
    let factor = link.header_inv_success() * (link.symbol_len * per_symbol + link.header_len * per_header) / n;
    let out = factor * params.transmit_power / params.channel_rate;
    if !out.is_finite() {
        return Err(Error::Overflow {
            what: "ecr",
            exponent: (mu / zeta).to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(out)
}

fn ecr_or_inf<S: Scalar>(params: &SystemParams<S>, t: S) -> Result<S> {
    match ecr(&params.with_interval(t)) {
        Err(Error::Overflow { .. }) => Ok(S::infinity()),
        other => other,
    }
}

/// Unconstrained ECR minimizer over `T`.
///
/// Without symbol errors the ECR decreases toward its `T → ∞` limit and the
/// result is `∞`. Otherwise the ECR blows up as `e^{μ(1/ζ−1)}` and a log scan
/// followed by golden-section search locates the minimum.
pub fn ecr_minimizer<S: Scalar>(params: &SystemParams<S>) -> Result<S> {
    params.validate()?;
    let link = params.link();
    if link.ln_symbol_success == S::zero() {
        return Ok(S::infinity());
    }
    let scale = params.arrival_rate.recip();
    let lo = S::lit(SEARCH_FLOOR) * scale;
    // past μ(1/ζ − 1) ≈ 50 the exponential growth dominates everything else
    let growth = (-link.ln_symbol_success).exp_m1();
    let hi = (S::lit(50.0) / growth).max(S::lit(10.0)) * scale;
    let grid = log_grid(lo, hi, SCAN_POINTS);
    let values = grid.iter().map(|&t| ecr_or_inf(params, t)).collect::<Result<Vec<S>>>()?;
    let mut best: Option<(S, S)> = None;
    for i in local_minima(&values) {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        let (t, v, _) = golden_log(a, b, |t| ecr_or_inf(params, t))?;
        let cand = if values[i] < v { (grid[i], values[i]) } else { (t, v) };
        if best.is_none_or(|(_, bv)| cand.1 < bv) {
            best = Some(cand);
        }
    }
    best.map(|(t, _)| t).ok_or(Error::EmptyRange)
}

/// Minimizes the ECR over the window `[lo, hi]`: the unconstrained minimizer
/// when it lies inside, else the corner with the lower ECR.
pub fn optimize_energy_in_window<S: Scalar>(params: &SystemParams<S>, lo: S, hi: S) -> Result<EnergyResult<S>> {
    if !(lo > S::zero() && hi >= lo) {
        return Err(Error::InvalidParam {
            field: "interval",
            reason: "window needs 0 < lo <= hi".into(),
        });
    }
    let t_u = ecr_minimizer(params)?;
    let (t, binding) = if t_u >= lo && t_u <= hi {
        (t_u, Binding::Interior)
    } else if ecr_or_inf(params, lo)? <= ecr_or_inf(params, hi)? {
        (lo, Binding::LeftCorner)
    } else {
        (hi, Binding::RightCorner)
    };
    Ok(EnergyResult {
        t_star_unconstrained: t_u,
        ecr_at_star: ecr(&params.with_interval(t))?,
        t_star_constrained: t,
        binding,
        corner_points: vec![lo, hi],
    })
}

/// Minimizes the ECR subject to `E[d](T) ≤ d_max`.
///
/// The feasible set is the interval around the delay-optimal `T*` where the
/// delay stays within budget; its ends are found by bisection outward from
/// `T*`. When the set reaches down to the search floor the left end is the
/// floor itself rather than a solution of `E[d] = d_max`.
pub fn optimize_energy_under_delay<S: Scalar>(params: &SystemParams<S>, d_max: S) -> Result<EnergyResult<S>> {
    let opt = optimal_interval(params)?;
    let d_min = opt.delay_at_t_star.total;
    if !(d_max > d_min) {
        return Err(Error::Infeasible {
            d_max: d_max.to_f64().unwrap_or(f64::NAN),
            d_min: d_min.to_f64().unwrap_or(f64::NAN),
        });
    }
    let feasible = |t: S| -> Result<bool> { Ok(delay_at(params, t)? <= d_max) };
    let tol = S::lit(ENDPOINT_REL_TOL);
    let t_star = opt.t_star;
    let floor = if opt.stable_range.bounded_below() {
        opt.stable_range.lower
    } else {
        S::lit(SEARCH_FLOOR) / params.arrival_rate
    };
    let lo = if feasible(floor)? {
        floor
    } else {
        bisect_log(t_star, floor, tol, feasible)?
    };
    let mut outside = t_star * S::lit(2.0);
    while feasible(outside)? {
        outside = outside * S::lit(2.0);
    }
    let hi = bisect_log(t_star, outside, tol, feasible)?;
    optimize_energy_in_window(params, lo, hi)
}
