//! Special functions and Poisson identities behind the closed-form model.
//!
//! Everything here is evaluated with exponents assembled in log-space so that
//! arguments such as `μ·α^{-2N}` close to the overflow threshold still produce
//! finite ratios.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

/// Relative size of the last series term at which summation stops.
const SERIES_REL_TOL: f64 = 1e-16;

/// Triangular table of Stirling numbers of the second kind `S₂(n, i)`, `0 ≤ i ≤ n ≤ max_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StirlingTable {
    rows: Vec<Vec<u128>>,
}

impl StirlingTable {
    /// Builds rows `0..=max_n` with `S₂(n,i) = i·S₂(n−1,i) + S₂(n−1,i−1)`.
    ///
    /// Panics if an entry exceeds `u128` (first happens past `n ≈ 45`).
    pub fn new(max_n: usize) -> Self {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(max_n + 1);
        rows.push(vec![1]);
        for n in 1..=max_n {
            let prev = &rows[n - 1];
            let mut row = vec![0u128; n + 1];
            for i in 1..=n {
                let carried = if i < n { prev[i] } else { 0 };
                row[i] = (i as u128)
                    .checked_mul(carried)
                    .and_then(|v| v.checked_add(prev[i - 1]))
                    .expect("Stirling number exceeds u128");
            }
            rows.push(row);
        }
        Self { rows }
    }

    pub fn max_n(&self) -> usize {
        self.rows.len() - 1
    }

    /// `S₂(n, i)`, or `None` when `n` is beyond the table.
    pub fn get(&self, n: usize, i: usize) -> Option<u128> {
        let row = self.rows.get(n)?;
        Some(row.get(i).copied().unwrap_or(0))
    }

    pub fn row(&self, n: usize) -> &[u128] {
        &self.rows[n]
    }
}

/// Stirling number of the second kind: partitions of an `n`-set into `i` nonempty blocks.
pub fn stirling2(n: u32, i: u32) -> u128 {
    if i > n {
        return 0;
    }
    StirlingTable::new(n as usize).row(n as usize)[i as usize]
}

fn check_positive<S: Scalar>(what: &'static str, name: &str, v: S) -> Result<()> {
    if v > S::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            detail: format!("{name} must be positive and finite, got {v}"),
        })
    }
}

fn checked_exp<S: Scalar>(what: &'static str, exponent: S) -> Result<S> {
    if exponent > S::max_exp_arg() {
        return Err(Error::Overflow {
            what,
            exponent: exponent.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(exponent.exp())
}

/// `ln k!` by direct summation.
pub fn ln_factorial<S: Scalar>(k: u64) -> S {
    (2..=k).fold(S::zero(), |acc, j| acc + S::from_count(j).ln())
}

/// `E[kⁿ / ζᵏ]` for `k ~ Poisson(μ)`, via `e^{−μ(1−1/ζ)} Σᵢ S₂(n,i)(μ/ζ)ⁱ`.
pub fn poisson_power_moment<S: Scalar>(mu: S, zeta: S, n: u32) -> Result<S> {
    const WHAT: &str = "poisson_power_moment";
    check_positive(WHAT, "mu", mu)?;
    check_positive(WHAT, "zeta", zeta)?;
    if n == 0 {
        return Err(Error::Domain {
            what: WHAT,
            detail: "moment order must be at least 1".into(),
        });
    }
    let x = mu / zeta;
    let scale = checked_exp(WHAT, x - mu)?;
    let table = StirlingTable::new(n as usize);
    // Horner over x: Σ_{i=1..n} S₂(n,i) xⁱ
    let row = table.row(n as usize);
    let poly = row[1..]
        .iter()
        .rev()
        .fold(S::zero(), |acc, &c| acc * x + S::lit(c as f64))
        * x;
    let value = scale * poly;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow {
            what: WHAT,
            exponent: (x - mu).to_f64().unwrap_or(f64::INFINITY),
        })
    }
}

/// `E[h(k) / ζᵏ] = e^{−μ}(e^{μ/ζ} − 1)` for `k ~ Poisson(μ)` and `h` the unit step on `k > 0`.
pub fn zero_deleted_step_expectation<S: Scalar>(mu: S, zeta: S) -> Result<S> {
    const WHAT: &str = "zero_deleted_step_expectation";
    check_positive(WHAT, "mu", mu)?;
    check_positive(WHAT, "zeta", zeta)?;
    let x = mu / zeta;
    Ok(checked_exp(WHAT, x - mu)? * -(-x).exp_m1())
}

/// Exponential integral `Ei(x) = γ + ln x + Σ_{k≥1} xᵏ/(k·k!)` for `x > 0`.
///
/// Terms and partial sums are carried as unevaluated pairs `hi + lo`, so the
/// result stays within about one ulp even where the series has many large terms.
pub fn exponential_integral<S: Scalar>(x: S) -> Result<S> {
    const WHAT: &str = "exponential_integral";
    check_positive(WHAT, "x", x)?;
    let tol = S::lit(SERIES_REL_TOL);
    let mut term = Pair::new(S::one());
    let mut sum = Pair::new(S::zero());
    let mut k = 0u64;
    loop {
        k += 1;
        let kk = S::from_count(k);
        term = term.mul(x).div(kk);
        let contrib = term.div(kk);
        sum = sum.add(contrib);
        if !sum.hi.is_finite() {
            return Err(Error::Overflow {
                what: WHAT,
                exponent: x.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        if kk > x && contrib.hi <= tol * sum.hi {
            break;
        }
    }
    let gamma_hi = S::lit(EULER_GAMMA);
    let gamma_lo = S::lit(EULER_GAMMA - gamma_hi.to_f64().unwrap_or(EULER_GAMMA));
    let total = sum
        .add(Pair::new(x.ln()))
        .add(Pair { hi: gamma_hi, lo: gamma_lo });
    Ok(total.hi + total.lo)
}

/// Double-word number `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
struct Pair<S> {
    hi: S,
    lo: S,
}

impl<S: Scalar> Pair<S> {
    fn new(hi: S) -> Self {
        Self { hi, lo: S::zero() }
    }

    fn two_sum(a: S, b: S) -> Self {
        let s = a + b;
        let bb = s - a;
        Self { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn quick(a: S, b: S) -> Self {
        let s = a + b;
        Self { hi: s, lo: b - (s - a) }
    }

    fn add(self, other: Self) -> Self {
        let s = Self::two_sum(self.hi, other.hi);
        let t = Self::two_sum(self.lo, other.lo);
        let u = Self::quick(s.hi, s.lo + t.hi);
        Self::quick(u.hi, u.lo + t.lo)
    }

    fn mul(self, b: S) -> Self {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p) + self.lo * b;
        Self::quick(p, e)
    }

    fn div(self, b: S) -> Self {
        let q1 = self.hi / b;
        let p = Self::new(q1).mul(b);
        let r = Self::two_sum(self.hi, -p.hi);
        let q2 = (r.hi + (r.lo - p.lo + self.lo)) / b;
        Self::quick(q1, q2)
    }
}

/// `e^{−x}(Ei(x) − ln x − γ) = Σ_{k≥1} e^{−x}xᵏ/(k·k!)`, summed with log-space terms
/// so it stays finite for any `x ≥ 0`.
pub fn ein_scaled<S: Scalar>(x: S) -> S {
    if x <= S::zero() {
        return S::zero();
    }
    let tol = S::lit(SERIES_REL_TOL);
    let ln_x = x.ln();
    let mut ln_fact = S::zero();
    let mut sum = S::zero();
    let mut k = 0u64;
    loop {
        k += 1;
        let kk = S::from_count(k);
        ln_fact = ln_fact + kk.ln();
        let contrib = (kk * ln_x - x - ln_fact).exp() / kk;
        sum = sum + contrib;
        if kk > x && contrib <= tol * sum {
            break sum;
        }
    }
}

/// `E[1/(k·ξᵏ)]` for zero-truncated Poisson `k` with parent mean `μ`:
/// `(Ei(μ/ξ) − ln(μ/ξ) − γ)/(e^{μ} − 1)`.
pub fn zero_truncated_inverse_moment<S: Scalar>(mu: S, xi: S) -> Result<S> {
    const WHAT: &str = "zero_truncated_inverse_moment";
    check_positive(WHAT, "mu", mu)?;
    check_positive(WHAT, "xi", xi)?;
    let x = mu / xi;
    // (Ei − ln − γ)(x) / (e^μ − 1) = ein_scaled(x)·e^{x−μ} / (1 − e^{−μ})
    let scale = checked_exp(WHAT, x - mu)?;
    Ok(ein_scaled(x) * scale / -(-mu).exp_m1())
}
