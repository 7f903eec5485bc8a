//! Independent oracles shared by the integration tests. None of them call the
//! closed forms they are used to check.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use packetize::model::{packet_length_pmf, Mode, SystemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};

pub type P = SystemParams<f64>;

pub const GAMMA: f64 = 0.577_215_664_901_532_9;

/// Upper summation index that leaves a negligible Poisson(`x`) tail.
fn tail_end(x: f64) -> u64 {
    (x + 15.0 * x.sqrt() + 60.0).ceil() as u64
}

/// `Σ_{k≥k0} e^{−μ} μᵏ/k! · ζ^{−k} · w(k)` by direct summation in log space.
pub fn poisson_sum(mu: f64, zeta: f64, k0: u64, w: impl Fn(u64) -> f64) -> f64 {
    let x = mu / zeta;
    let end = tail_end(x);
    let mut logs = Vec::with_capacity(end as usize + 1);
    let mut ln_fact = 0.0;
    for k in 0..=end {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        if k >= k0 {
            let wk = w(k);
            if wk > 0.0 {
                logs.push(-mu + k as f64 * x.ln() - ln_fact + wk.ln());
            }
        }
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top.exp() * logs.iter().map(|l| (l - top).exp()).sum::<f64>()
}

/// `E[kⁿ ζ^{−k}]`, `k ~ Poisson(μ)`.
pub fn power_moment(mu: f64, zeta: f64, n: u32) -> f64 {
    poisson_sum(mu, zeta, 0, |k| (k as f64).powi(n as i32))
}

/// `E[ζ^{−k}; k ≥ 1]`, `k ~ Poisson(μ)`.
pub fn zero_deleted_step(mu: f64, zeta: f64) -> f64 {
    poisson_sum(mu, zeta, 1, |_| 1.0)
}

/// `E[ξ^{−k}/k]` for zero-truncated Poisson `k`.
pub fn zt_inverse_moment(mu: f64, xi: f64) -> f64 {
    poisson_sum(mu, xi, 1, |k| 1.0 / k as f64) / -(-mu).exp_m1()
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// `Ei(x) = γ + ln x + Σ xᵏ/(k·k!)` with the series summed exactly in rationals.
pub fn ei_exact_series(x: f64) -> f64 {
    let xr = rational(x);
    let end = tail_end(x) + 40;
    let mut power = BigRational::one();
    let mut fact = BigInt::one();
    let mut sum = BigRational::zero();
    for k in 1..=end {
        power *= &xr;
        fact *= BigInt::from(k);
        sum += &power / BigRational::from_integer(&fact * BigInt::from(k));
    }
    // γ to 50 digits, so the only inexact inputs are x and the f64 ln x
    let gamma = BigRational::new(
        "57721566490153286060651209008240243104215933593992".parse().unwrap(),
        BigInt::from(10).pow(50),
    );
    (sum + rational(x.ln()) + gamma).to_f64().expect("representable")
}

/// Service moments `E[s]`, `E[s²]` by summing the joint pmf of
/// `(k, r)`: `P(k)·(1−p_k)^{r−1}p_k` with `s = r·l_k/R`.
pub fn service_moments_by_pmf(p: &P) -> (f64, f64) {
    let n = p.symbol_bits as f64;
    let h = p.header_bits as f64;
    let alpha = 1.0 - p.bit_error_prob;
    let mu = p.mu();
    let zeta2 = alpha.powf(2.0 * n);
    let first = match p.mode {
        Mode::Efficient => 1,
        Mode::Slotted => 0,
    };
    let (mut m1, mut m2) = (0.0, 0.0);
    for k in first..=tail_end(mu / zeta2) {
        let pk = packet_length_pmf(p, k).unwrap();
        let len = h + n * k as f64;
        let success = alpha.powf(len);
        // rough size of this k's share of E[s²], used only to stop the k sum
        let share = pk * 2.0 * (len / p.channel_rate / success).powi(2);
        if k as f64 > mu / zeta2 && share < 1e-16 * m2 {
            break;
        }
        if pk == 0.0 {
            continue;
        }
        let fail = 1.0 - success;
        let s1 = len / p.channel_rate;
        let mut geom = success;
        let (mut a1, mut a2) = (0.0, 0.0);
        let mut r = 1u64;
        loop {
            let s = r as f64 * s1;
            a1 += geom * s;
            a2 += geom * s * s;
            geom *= fail;
            r += 1;
            if geom == 0.0 || (geom * (r as f64).powi(2) < 1e-16 * success && r > 2) {
                break;
            }
        }
        m1 += pk * a1;
        m2 += pk * a2;
    }
    (m1, m2)
}

/// Monte-Carlo estimate of `E[r·(kN+H)/(kN)]·P_t/R` with `k` zero-truncated
/// Poisson and `r` geometric. Returns the mean and its standard error.
pub fn ecr_monte_carlo(p: &P, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(p.mu()).unwrap();
    let n = p.symbol_bits as f64;
    let h = p.header_bits as f64;
    let alpha = 1.0 - p.bit_error_prob;
    let scale = p.transmit_power / p.channel_rate;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let k = loop {
            let k: f64 = poisson.sample(&mut rng);
            if k >= 1.0 {
                break k;
            }
        };
        let len = k * n + h;
        let success = alpha.powf(len);
        let r = if success >= 1.0 {
            1.0
        } else {
            1.0 + Geometric::new(success).unwrap().sample(&mut rng) as f64
        };
        let x = r * len / (k * n) * scale;
        sum += x;
        sum_sq += x * x;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean) * m / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Upper `1 − 10⁻³` quantile of χ² with `df` degrees of freedom (Wilson–Hilferty).
pub fn chi2_critical_999(df: usize) -> f64 {
    let d = df as f64;
    let z = 3.090_232;
    let c = 2.0 / (9.0 * d);
    d * (1.0 - c + z * c.sqrt()).powi(3)
}

/// Number of sign changes in the nonzero successive differences.
pub fn sign_changes(values: &[f64]) -> usize {
    let signs: Vec<f64> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d != 0.0)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

pub fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Symbols needed for roughly `packets` packets after a 10% warmup.
pub fn symbols_for_packets(p: &P, packets: f64) -> u64 {
    let mu = p.mu();
    let per_packet = match p.mode {
        Mode::Efficient => mu / -(-mu).exp_m1(),
        Mode::Slotted => mu,
    };
    (packets * per_packet / 0.9).ceil().max(1000.0) as u64
}
