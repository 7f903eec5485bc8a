//! Closed-form queueing model of a time-based packetizer feeding an ARQ link.
//!
//! Symbols of `N` bits arrive as a Poisson process of rate `λ`. Every interval
//! of length `T` the accumulated symbols are bundled with an `H`-bit header into
//! one packet, which is queued FCFS and retransmitted until it crosses the
//! channel without a bit error. Two packetization modes differ in how empty
//! intervals are handled:
//!
//! * [`Mode::Efficient`]: no packet is formed, so packet inter-arrival times
//!   are geometric multiples of `T` and packet sizes are zero-truncated Poisson.
//! * [`Mode::Slotted`]: a header-only dummy packet is sent, so packets arrive
//!   exactly every `T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{ln_factorial, poisson_power_moment, zero_deleted_step_expectation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Empty intervals are skipped (M1).
    Efficient,
    /// Empty intervals emit a header-only packet (M1's slotted counterpart, M2).
    Slotted,
}

/// Separate channel codes for header and payload.
///
/// Code rates stretch the on-air length (`kN/R_D + H/R_H`) and the bit error
/// probabilities are the post-decoding ones. `R_D = R_H = 1`, `β_D = β_H = β`
/// is the uncoded link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingProfile<S = f64> {
    pub data_rate: S,
    pub header_rate: S,
    pub data_ber: S,
    pub header_ber: S,
}

/// Physical, traffic and protocol parameters of one link.
///
/// Derived quantities (`μ`, `α`, `η`, `P₀`) are always recomputed from the
/// stored fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<S = f64> {
    /// Bits per input symbol, `N`.
    pub symbol_bits: u32,
    /// Header bits per packet, `H`.
    pub header_bits: u32,
    /// Symbol arrival rate `λ` in symbols/s.
    pub arrival_rate: S,
    /// Channel rate `R` in bit/s.
    pub channel_rate: S,
    /// Bit error probability `β` of the uncoded channel.
    pub bit_error_prob: S,
    /// Packetization interval `T` in seconds.
    pub interval: S,
    pub mode: Mode,
    /// Transmit power `P_t` in watts; only the energy model reads it.
    pub transmit_power: S,
    #[serde(default)]
    pub coding: Option<CodingProfile<S>>,
}

/// Per-symbol and per-header on-air lengths and inverse success probabilities.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinkTerms<S> {
    /// On-air bits contributed by one symbol.
    pub symbol_len: S,
    /// On-air bits of the header.
    pub header_len: S,
    /// `ln` of the probability that one symbol's bits all survive.
    pub ln_symbol_success: S,
    /// `ln` of the probability that the header survives.
    pub ln_header_success: S,
}

impl<S: Scalar> LinkTerms<S> {
    /// `(1−β_D)^N`, the `ζ` that turns `α^{-kN}` into `ζ^{-k}`.
    pub fn symbol_success(&self) -> S {
        self.ln_symbol_success.exp()
    }

    /// `α^{-H}` in the uncoded case.
    pub fn header_inv_success(&self) -> S {
        (-self.ln_header_success).exp()
    }

    pub fn length(&self, k: u64) -> S {
        self.header_len + S::from_count(k) * self.symbol_len
    }

    pub fn ln_success(&self, k: u64) -> S {
        self.ln_header_success + S::from_count(k) * self.ln_symbol_success
    }
}

impl<S: Scalar> SystemParams<S> {
    /// Uncoded, efficient-mode parameters with unit transmit power.
    pub fn new(symbol_bits: u32, header_bits: u32, arrival_rate: S, channel_rate: S, bit_error_prob: S, interval: S) -> Self {
        Self {
            symbol_bits,
            header_bits,
            arrival_rate,
            channel_rate,
            bit_error_prob,
            interval,
            mode: Mode::Efficient,
            transmit_power: S::one(),
            coding: None,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_interval(mut self, interval: S) -> Self {
        self.interval = interval;
        self
    }

    pub fn with_ber(mut self, ber: S) -> Self {
        self.bit_error_prob = ber;
        self
    }

    pub fn with_channel_rate(mut self, rate: S) -> Self {
        self.channel_rate = rate;
        self
    }

    pub fn with_header_bits(mut self, h: u32) -> Self {
        self.header_bits = h;
        self
    }

    pub fn with_power(mut self, watts: S) -> Self {
        self.transmit_power = watts;
        self
    }

    pub fn with_coding(mut self, coding: CodingProfile<S>) -> Self {
        self.coding = Some(coding);
        self
    }

    /// Mean symbols per interval, `μ = λT`.
    pub fn mu(&self) -> S {
        self.arrival_rate * self.interval
    }

    /// Bit success probability `α = 1 − β`.
    pub fn alpha(&self) -> S {
        S::one() - self.bit_error_prob
    }

    /// Header load ratio `η = H/N`.
    pub fn eta(&self) -> S {
        S::from_count(self.header_bits as u64) / S::from_count(self.symbol_bits as u64)
    }

    /// Probability of an empty interval, `P₀ = e^{−μ}`.
    pub fn p0(&self) -> S {
        (-self.mu()).exp()
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidParam { field, reason: reason.into() }
        }
        let pos = |field: &'static str, v: S| -> Result<()> {
            if v > S::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(bad(field, format!("must be positive and finite, got {v}")))
            }
        };
        let ber = |field: &'static str, v: S| -> Result<()> {
            if v >= S::zero() && v < S::one() {
                Ok(())
            } else {
                Err(bad(field, format!("must lie in [0, 1), got {v}")))
            }
        };
        if self.symbol_bits == 0 {
            return Err(bad("symbol_bits", "must be at least 1"));
        }
        pos("arrival_rate", self.arrival_rate)?;
        pos("channel_rate", self.channel_rate)?;
        ber("bit_error_prob", self.bit_error_prob)?;
        pos("interval", self.interval)?;
        pos("transmit_power", self.transmit_power)?;
        if let Some(c) = &self.coding {
            for (field, rate) in [("coding.data_rate", c.data_rate), ("coding.header_rate", c.header_rate)] {
                if !(rate > S::zero() && rate <= S::one()) {
                    return Err(bad(field, format!("must lie in (0, 1], got {rate}")));
                }
            }
            ber("coding.data_ber", c.data_ber)?;
            ber("coding.header_ber", c.header_ber)?;
        }
        Ok(())
    }

    pub(crate) fn link(&self) -> LinkTerms<S> {
        let n = S::from_count(self.symbol_bits as u64);
        let h = S::from_count(self.header_bits as u64);
        let (rd, rh, bd, bh) = match &self.coding {
            Some(c) => (c.data_rate, c.header_rate, c.data_ber, c.header_ber),
            None => (S::one(), S::one(), self.bit_error_prob, self.bit_error_prob),
        };
        LinkTerms {
            symbol_len: n / rd,
            header_len: h / rh,
            ln_symbol_success: n * (-bd).ln_1p(),
            ln_header_success: h * (-bh).ln_1p(),
        }
    }

    fn uncoded_only(&self, what: &'static str) -> Result<()> {
        if self.coding.is_some() {
            return Err(Error::Domain {
                what,
                detail: "defined for uncoded links only".into(),
            });
        }
        Ok(())
    }
}

/// First two moments of a nonnegative random quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments<S = f64> {
    pub mean: S,
    pub second_moment: S,
    pub variance: S,
    /// Squared coefficient of variation, `variance / mean²`.
    pub cv2: S,
}

impl<S: Scalar> Moments<S> {
    pub fn from_raw(mean: S, second_moment: S) -> Self {
        let variance = (second_moment - mean * mean).max(S::zero());
        let cv2 = if mean > S::zero() { variance / (mean * mean) } else { S::zero() };
        Self { mean, second_moment, variance, cv2 }
    }

    /// Coefficient of variation `σ/mean`.
    pub fn cv(&self) -> S {
        self.cv2.sqrt()
    }
}

/// Expected per-symbol delay split into its three sources, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown<S = f64> {
    pub formation: S,
    pub waiting: S,
    pub service: S,
    pub total: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport<S = f64> {
    pub utilization: S,
    pub is_stable: bool,
    /// Smallest channel rate that keeps the queue stable at this `T`.
    pub min_channel_rate: S,
    /// Error-free limits `(Nλ, (N+H)λ)`: below the first no `T` is stable,
    /// above the second every `T` is.
    pub asymptotic_rate_bounds: (S, S),
}

/// `P(k symbols in a packet)`. Zero-truncated Poisson in efficient mode, Poisson in slotted mode.
pub fn packet_length_pmf<S: Scalar>(params: &SystemParams<S>, k: u64) -> Result<S> {
    params.validate()?;
    let mu = params.mu();
    let ln_p = S::from_count(k) * mu.ln() - mu - ln_factorial::<S>(k);
    match params.mode {
        Mode::Efficient if k == 0 => Err(Error::Domain {
            what: "packet_length_pmf",
            detail: "efficient mode never forms empty packets".into(),
        }),
        Mode::Efficient => Ok(ln_p.exp() / -(-mu).exp_m1()),
        Mode::Slotted => Ok(ln_p.exp()),
    }
}

fn check_symbol_count<S: Scalar>(params: &SystemParams<S>, k: u64, what: &'static str) -> Result<()> {
    if k == 0 && params.mode == Mode::Efficient {
        return Err(Error::Domain {
            what,
            detail: "k must be at least 1 in efficient mode".into(),
        });
    }
    Ok(())
}

/// On-air length in bits and packet error probability of a packet carrying `k` symbols.
///
/// `k = 0` is accepted in slotted mode (the header-only dummy packet).
pub fn effective_length_and_per<S: Scalar>(params: &SystemParams<S>, k: u64) -> Result<(S, S)> {
    params.validate()?;
    check_symbol_count(params, k, "effective_length_and_per")?;
    let link = params.link();
    Ok((link.length(k), -link.ln_success(k).exp_m1()))
}

/// Mean number of transmissions `α^{-l}` of an `l`-bit uncoded packet.
pub fn expected_retransmissions<S: Scalar>(params: &SystemParams<S>, length_bits: S) -> Result<S> {
    params.validate()?;
    if !(length_bits >= S::one()) {
        return Err(Error::Domain {
            what: "expected_retransmissions",
            detail: format!("packet length must be at least one bit, got {length_bits}"),
        });
    }
    let exponent = -length_bits * (-params.bit_error_prob).ln_1p();
    if exponent > S::max_exp_arg() {
        return Err(Error::Overflow {
            what: "expected_retransmissions",
            exponent: exponent.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(exponent.exp())
}

/// Moments of the packet inter-arrival time `τ`.
pub fn interarrival_moments<S: Scalar>(params: &SystemParams<S>) -> Moments<S> {
    let t = params.interval;
    match params.mode {
        Mode::Slotted => Moments { mean: t, second_moment: t * t, variance: S::zero(), cv2: S::zero() },
        Mode::Efficient => {
            let p0 = params.p0();
            let q = -(-params.mu()).exp_m1();
            Moments {
                mean: t / q,
                second_moment: t * t * (S::one() + p0) / (q * q),
                variance: t * t * p0 / (q * q),
                cv2: p0,
            }
        }
    }
}

/// Service time `r·l/R` of a packet with `k` symbols sent `r` times.
pub fn service_time<S: Scalar>(params: &SystemParams<S>, r: u64, k: u64) -> S {
    S::from_count(r) * params.link().length(k) / params.channel_rate
}

/// Joint probability of `r` transmissions of a `k`-symbol packet, i.e. the mass
/// at service time [`service_time`]`(r, k)`.
pub fn service_pmf<S: Scalar>(params: &SystemParams<S>, r: u64, k: u64) -> Result<S> {
    if r == 0 {
        return Err(Error::Domain {
            what: "service_pmf",
            detail: "at least one transmission is always made".into(),
        });
    }
    check_symbol_count(params, k, "service_pmf")?;
    let pk = packet_length_pmf(params, k)?;
    let ln_success = params.link().ln_success(k);
    let success = ln_success.exp();
    let fail = -ln_success.exp_m1();
    let repeat = if r == 1 {
        S::one()
    } else if fail == S::zero() {
        S::zero()
    } else {
        (S::from_count(r - 1) * fail.ln()).exp()
    };
    Ok(success * repeat * pk)
}

/// `E[h(k)/ζᵏ]` in efficient mode, `E[1/ζᵏ]` in slotted mode.
fn header_term<S: Scalar>(mode: Mode, mu: S, zeta: S) -> Result<S> {
    match mode {
        Mode::Efficient => zero_deleted_step_expectation(mu, zeta),
        Mode::Slotted => {
            let e = mu / zeta - mu;
            if e > S::max_exp_arg() {
                return Err(Error::Overflow { what: "service_moments", exponent: e.to_f64().unwrap_or(f64::INFINITY) });
            }
            Ok(e.exp())
        }
    }
}

/// Closed-form mean and second moment of the service time.
///
/// With `ζ = α^N` the per-packet retransmission factors `α^{-kN}` become
/// `ζ^{-k}`, so both moments reduce to Poisson expectations of `kⁿ/ζᵏ`.
/// Efficient mode conditions on `k ≥ 1` by dividing by `1 − e^{−μ}`.
pub fn service_moments<S: Scalar>(params: &SystemParams<S>) -> Result<Moments<S>> {
    params.validate()?;
    let link = params.link();
    let mu = params.mu();
    let rate = params.channel_rate;
    let (ls, lh) = (link.symbol_len, link.header_len);
    let b = link.header_inv_success();
    let z1 = link.symbol_success();
    let z2 = z1 * z1;
    let two = S::lit(2.0);

    // E_r[r] = 1/p, E_r[r²] = (2 − p)/p² with p = α^{H+kN}
    let first = |z: S| -> Result<S> {
        Ok(lh * header_term(params.mode, mu, z)? + ls * poisson_power_moment(mu, z, 1)?)
    };
    let second = |z: S| -> Result<S> {
        Ok(lh * lh * header_term(params.mode, mu, z)?
            + two * lh * ls * poisson_power_moment(mu, z, 1)?
            + ls * ls * poisson_power_moment(mu, z, 2)?)
    };

    let mut mean = b * first(z1)? / rate;
    let mut second_moment = (two * b * b * second(z2)? - b * second(z1)?) / (rate * rate);
    if params.mode == Mode::Efficient {
        let q = -(-mu).exp_m1();
        mean = mean / q;
        second_moment = second_moment / q;
    }
    if !(mean.is_finite() && second_moment.is_finite()) {
        return Err(Error::Overflow {
            what: "service_moments",
            exponent: (mu / z2).to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(Moments::from_raw(mean, second_moment))
}

/// Mean formation delay of a symbol: `T/2` in both modes.
pub fn formation_delay_mean<S: Scalar>(params: &SystemParams<S>) -> S {
    params.interval / S::lit(2.0)
}

/// `ρ = E[s]/E[τ]`.
pub fn utilization<S: Scalar>(params: &SystemParams<S>) -> Result<S> {
    let s = service_moments(params)?;
    Ok(s.mean / interarrival_moments(params).mean)
}

/// Stability of the queue at the configured interval. Overflowing service
/// moments are reported as an unstable queue.
pub fn stability_report<S: Scalar>(params: &SystemParams<S>) -> Result<StabilityReport<S>> {
    params.validate()?;
    let link = params.link();
    let bounds = (
        params.arrival_rate * link.symbol_len,
        params.arrival_rate * (link.symbol_len + link.header_len),
    );
    let utilization = match utilization(params) {
        Ok(rho) => rho,
        Err(Error::Overflow { .. }) => S::infinity(),
        Err(e) => return Err(e),
    };
    Ok(StabilityReport {
        utilization,
        is_stable: utilization < S::one(),
        // E[s] scales as 1/R, so ρ·R is the rate at which ρ hits one
        min_channel_rate: utilization * params.channel_rate,
        asymptotic_rate_bounds: bounds,
    })
}

fn unstable<S: Scalar>(rho: S, rate: S) -> Error {
    Error::Unstable {
        utilization: rho.to_f64().unwrap_or(f64::INFINITY),
        min_channel_rate: (rho * rate).to_f64().unwrap_or(f64::INFINITY),
    }
}

/// Kingman's G/G/1 approximation of the mean waiting time.
pub fn waiting_time_kingman<S: Scalar>(params: &SystemParams<S>) -> Result<S> {
    params.validate()?;
    let s = service_moments(params)?;
    let tau = interarrival_moments(params);
    let slack = tau.mean - s.mean;
    if !(slack > S::zero()) {
        return Err(unstable(s.mean / tau.mean, params.channel_rate));
    }
    Ok(s.mean * s.mean / slack * (s.cv2 + tau.cv2) / S::lit(2.0))
}

/// Expected end-to-end symbol delay: Kingman waiting + mean service + `T/2`.
pub fn expected_delay<S: Scalar>(params: &SystemParams<S>) -> Result<DelayBreakdown<S>> {
    params.validate()?;
    let s = service_moments(params)?;
    let tau = interarrival_moments(params);
    let slack = tau.mean - s.mean;
    if !(slack > S::zero()) {
        return Err(unstable(s.mean / tau.mean, params.channel_rate));
    }
    let waiting = s.mean * s.mean / slack * (s.cv2 + tau.cv2) / S::lit(2.0);
    let formation = formation_delay_mean(params);
    Ok(DelayBreakdown {
        formation,
        waiting,
        service: s.mean,
        total: formation + waiting + s.mean,
    })
}

/// Large-`μ`, near-error-free approximation of the expected delay.
pub fn approx_delay_large_mu<S: Scalar>(params: &SystemParams<S>) -> Result<S> {
    params.validate()?;
    params.uncoded_only("approx_delay_large_mu")?;
    let n = S::from_count(params.symbol_bits as u64);
    let h = S::from_count(params.header_bits as u64);
    let (mu, beta, t, rate) = (params.mu(), params.bit_error_prob, params.interval, params.channel_rate);
    let alpha_hn = params.alpha().powf(h + n);
    let load = n * mu * (mu * n * beta).exp();
    let denom = S::lit(2.0) * t * rate * alpha_hn - S::lit(2.0) * load;
    if !(denom > S::zero()) {
        return Err(unstable(load / (t * rate * alpha_hn), rate));
    }
    let cv2 = S::one() + S::lit(4.0) * n * beta;
    Ok(load / (rate * alpha_hn) * (cv2 * load / denom + S::one()) + t / S::lit(2.0))
}

/// Small-`μ`, near-error-free approximation of the expected delay, with the
/// formation delay taken as `T`.
pub fn approx_delay_small_mu<S: Scalar>(params: &SystemParams<S>) -> Result<S> {
    params.validate()?;
    params.uncoded_only("approx_delay_small_mu")?;
    let nh = S::from_count(params.symbol_bits as u64 + params.header_bits as u64);
    let h = S::from_count(params.header_bits as u64);
    let (mu, lambda, t, rate) = (params.mu(), params.arrival_rate, params.interval, params.channel_rate);
    let r_alpha_h = rate * params.alpha().powf(h);
    let load = nh * (-mu).exp();
    let denom = r_alpha_h - lambda * load;
    if !(denom > S::zero()) {
        return Err(unstable(lambda * load / r_alpha_h, rate));
    }
    let mean_service = load / r_alpha_h;
    Ok(mean_service * (lambda * load / (S::lit(2.0) * denom) + S::one()) + t)
}
