//! Discrete-event Monte-Carlo simulation of the packetizer and ARQ queue.
//!
//! The simulator works at symbol granularity: it draws exponential inter-symbol
//! gaps, bundles the symbols of each interval into packets, draws the number
//! of transmissions for each packet and runs the FCFS queue through the
//! Lindley recursion `w_n = max(0, w_{n−1} + s_{n−1} − τ_n)`. It shares no code
//! with the closed-form model apart from reading [`SystemParams`], so it can
//! serve as an oracle for it.

use std::io;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{packet_length_pmf, LinkTerms, Mode, Moments, SystemParams};

const BATCHES: usize = 20;
/// Fraction of post-warmup symbols whose packets are inspected for divergence.
const DIVERGENCE_WINDOW: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Symbols to generate, warmup included.
    pub num_symbols: u64,
    /// Leading symbols (and their packets) excluded from the statistics.
    pub warmup_symbols: u64,
    pub seed: u64,
    /// Independent stream index; runs differing only here are independent replications.
    #[serde(default)]
    pub replication: u64,
    /// Abort if a packet needs this many transmissions.
    pub max_retransmissions_guard: u64,
}

impl SimConfig {
    /// `num_symbols` symbols with the first 10% discarded as warmup.
    pub fn new(num_symbols: u64, seed: u64) -> Self {
        Self {
            num_symbols,
            warmup_symbols: num_symbols / 10,
            seed,
            replication: 0,
            max_retransmissions_guard: 1_000_000,
        }
    }

    pub fn with_warmup(mut self, warmup_symbols: u64) -> Self {
        self.warmup_symbols = warmup_symbols;
        self
    }

    pub fn with_replication(mut self, replication: u64) -> Self {
        self.replication = replication;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup_symbols >= self.num_symbols {
            return Err(Error::InvalidParam {
                field: "warmup_symbols",
                reason: format!("must be below num_symbols ({})", self.num_symbols),
            });
        }
        if self.num_symbols - self.warmup_symbols < BATCHES as u64 {
            return Err(Error::InvalidParam {
                field: "num_symbols",
                reason: format!("need at least {BATCHES} post-warmup symbols for batch means"),
            });
        }
        if self.max_retransmissions_guard < 2 {
            return Err(Error::InvalidParam {
                field: "max_retransmissions_guard",
                reason: "must be at least 2".into(),
            });
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.replication);
        rng
    }
}

/// Delay history of one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolRecord {
    pub arrival: f64,
    pub formation_delay: f64,
    pub waiting: f64,
    pub service: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub index: u64,
    /// Time the packet entered the queue.
    pub formation_epoch: f64,
    pub interarrival: f64,
    /// Intervals spanned since the previous packet (always 1 in slotted mode).
    pub interval_count: u64,
    pub symbol_count: u64,
    /// On-air length in bits.
    pub length: f64,
    pub retransmissions: u64,
    pub service: f64,
    pub waiting: f64,
}

/// Per-symbol sample means over the post-warmup symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub n_symbols: u64,
    pub n_packets: u64,
    pub mean_formation: f64,
    pub mean_waiting: f64,
    pub mean_service: f64,
    pub mean_total: f64,
    /// Standard error of `mean_total` from 20 batch means.
    pub stderr_total: f64,
    /// Packet-averaged waiting time (the symbol average weights long packets more).
    pub mean_packet_waiting: f64,
    /// Packet-averaged service time.
    pub mean_packet_service: f64,
    pub mean_retransmissions: f64,
    /// Busy time over elapsed time.
    pub empirical_utilization: f64,
    /// The queue never drained over the final stretch of the run while its
    /// backlog kept growing.
    pub diverged: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    /// Every packet, warmup included.
    pub packets: Vec<PacketRecord>,
    /// Post-warmup symbols in arrival order.
    pub symbols: Vec<SymbolRecord>,
}

/// Inverse-transform geometric draw of the number of transmissions.
fn sample_transmissions<R: Rng + ?Sized>(rng: &mut R, ln_success: f64) -> u64 {
    let fail = -ln_success.exp_m1();
    if fail <= 0.0 {
        return 1;
    }
    let u = 1.0 - rng.random::<f64>();
    let r = (u.ln() / fail.ln()).ceil();
    if r < 1.0 {
        1
    } else if r >= u64::MAX as f64 {
        u64::MAX
    } else {
        r as u64
    }
}

#[derive(Default)]
struct Accumulator {
    n_symbols: u64,
    sum_formation: f64,
    sum_waiting: f64,
    sum_service: f64,
    sum_total: f64,
    batch_sum: [f64; BATCHES],
    batch_count: [u64; BATCHES],

    n_packets: u64,
    sum_packet_waiting: f64,
    sum_packet_service: f64,
    sum_retx: u64,
    sum_interarrival: f64,

    window_packets: u64,
    window_idle: bool,
    window_first_wait: f64,
    window_last_wait: f64,
}

impl Accumulator {
    fn finish(&self) -> SimulationResult {
        let ns = self.n_symbols as f64;
        let np = self.n_packets as f64;
        let means: Vec<f64> = self
            .batch_sum
            .iter()
            .zip(&self.batch_count)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s / c as f64)
            .collect();
        let b = means.len() as f64;
        let grand = means.iter().sum::<f64>() / b;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1.0);
        SimulationResult {
            n_symbols: self.n_symbols,
            n_packets: self.n_packets,
            mean_formation: self.sum_formation / ns,
            mean_waiting: self.sum_waiting / ns,
            mean_service: self.sum_service / ns,
            mean_total: self.sum_total / ns,
            stderr_total: (var / b).sqrt(),
            mean_packet_waiting: self.sum_packet_waiting / np,
            mean_packet_service: self.sum_packet_service / np,
            mean_retransmissions: self.sum_retx as f64 / np,
            empirical_utilization: self.sum_packet_service / self.sum_interarrival,
            diverged: self.window_packets >= 2
                && !self.window_idle
                && self.window_last_wait > self.window_first_wait,
        }
    }
}

fn simulate(params: &SystemParams<f64>, cfg: &SimConfig, mut trace: Option<&mut Trace>) -> Result<SimulationResult> {
    params.validate()?;
    cfg.validate()?;
    let link: LinkTerms<f64> = params.link();
    let t = params.interval;
    let rate = params.channel_rate;
    let gaps = Exp::new(params.arrival_rate).map_err(|e| Error::InvalidParam {
        field: "arrival_rate",
        reason: e.to_string(),
    })?;
    let mut rng = cfg.rng();

    let post = cfg.num_symbols - cfg.warmup_symbols;
    let batch_len = post / BATCHES as u64;
    let window_start = cfg.warmup_symbols + ((1.0 - DIVERGENCE_WINDOW) * post as f64) as u64;

    let mut acc = Accumulator::default();
    let mut arrivals: Vec<f64> = Vec::new();
    let mut next_arrival = gaps.sample(&mut rng);
    let mut assigned: u64 = 0;
    let mut interval: u64 = 0;
    let mut skipped: u64 = 0;
    let mut packet: u64 = 0;
    let mut prev: Option<(f64, f64)> = None;

    while assigned < cfg.num_symbols {
        interval += 1;
        skipped += 1;
        let epoch = interval as f64 * t;
        arrivals.clear();
        while next_arrival < epoch {
            arrivals.push(next_arrival);
            next_arrival += gaps.sample(&mut rng);
        }
        let k = arrivals.len() as u64;
        if k == 0 && params.mode == Mode::Efficient {
            continue;
        }
        let m = skipped;
        skipped = 0;
        let tau = m as f64 * t;
        let waiting = match prev {
            None => 0.0,
            Some((w, s)) => (w + s - tau).max(0.0),
        };
        let retx = sample_transmissions(&mut rng, link.ln_success(k));
        if retx >= cfg.max_retransmissions_guard {
            return Err(Error::RetransmissionGuard { packet, guard: cfg.max_retransmissions_guard });
        }
        let length = link.length(k);
        let service = retx as f64 * length / rate;
        prev = Some((waiting, service));

        if let Some(tr) = trace.as_deref_mut() {
            tr.packets.push(PacketRecord {
                index: packet,
                formation_epoch: epoch,
                interarrival: tau,
                interval_count: m,
                symbol_count: k,
                length,
                retransmissions: retx,
                service,
                waiting,
            });
        }

        if assigned >= cfg.warmup_symbols {
            acc.n_packets += 1;
            acc.sum_packet_waiting += waiting;
            acc.sum_packet_service += service;
            acc.sum_retx += retx;
            acc.sum_interarrival += tau;
            if assigned >= window_start {
                if acc.window_packets == 0 {
                    acc.window_first_wait = waiting;
                }
                acc.window_packets += 1;
                acc.window_idle |= waiting == 0.0;
                acc.window_last_wait = waiting;
            }
        }

        for (j, &arrival) in arrivals.iter().enumerate() {
            let i = assigned + j as u64;
            if i < cfg.warmup_symbols || i >= cfg.num_symbols {
                continue;
            }
            let formation = epoch - arrival;
            let total = formation + waiting + service;
            acc.n_symbols += 1;
            acc.sum_formation += formation;
            acc.sum_waiting += waiting;
            acc.sum_service += service;
            acc.sum_total += total;
            let b = (((i - cfg.warmup_symbols) / batch_len) as usize).min(BATCHES - 1);
            acc.batch_sum[b] += total;
            acc.batch_count[b] += 1;
            if let Some(tr) = trace.as_deref_mut() {
                tr.symbols.push(SymbolRecord {
                    arrival,
                    formation_delay: formation,
                    waiting,
                    service,
                    total,
                });
            }
        }
        assigned += k;
        packet += 1;
    }
    Ok(acc.finish())
}

/// Runs one replication and returns per-symbol delay statistics.
pub fn run_simulation(params: &SystemParams<f64>, cfg: &SimConfig) -> Result<SimulationResult> {
    simulate(params, cfg, None)
}

/// Like [`run_simulation`], additionally returning every packet and post-warmup symbol.
pub fn run_simulation_traced(params: &SystemParams<f64>, cfg: &SimConfig) -> Result<(SimulationResult, Trace)> {
    let mut trace = Trace::default();
    let result = simulate(params, cfg, Some(&mut trace))?;
    Ok((result, trace))
}

/// Sample moments of packet inter-arrival and service times.
pub fn empirical_moments(records: &[PacketRecord]) -> Result<(Moments<f64>, Moments<f64>)> {
    const MIN_RECORDS: usize = 1000;
    if records.len() < MIN_RECORDS {
        return Err(Error::InsufficientData { needed: MIN_RECORDS, got: records.len() });
    }
    let n = records.len() as f64;
    let moments = |f: fn(&PacketRecord) -> f64| {
        let mean = records.iter().map(f).sum::<f64>() / n;
        let var = records.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / n;
        Moments {
            mean,
            second_moment: var + mean * mean,
            variance: var,
            cv2: if mean > 0.0 { var / (mean * mean) } else { 0.0 },
        }
    };
    Ok((moments(|r| r.interarrival), moments(|r| r.service)))
}

/// One transition of the embedded waiting-time chain: draws an inter-arrival
/// time and a service time from their model distributions and applies the
/// Lindley step to `w_prev`.
pub fn kernel_step<R: RngCore + ?Sized>(params: &SystemParams<f64>, w_prev: f64, rng: &mut R) -> Result<f64> {
    params.validate()?;
    let t = params.interval;
    let mu = params.mu();
    let tau = match params.mode {
        Mode::Slotted => t,
        Mode::Efficient => {
            // P(m) = P₀^{m−1}(1 − P₀)
            let u = 1.0 - rng.random::<f64>();
            (u.ln() / -mu).ceil().max(1.0) * t
        }
    };
    let first = match params.mode {
        Mode::Efficient => 1,
        Mode::Slotted => 0,
    };
    let u = rng.random::<f64>();
    let mut k = first;
    let mut pk = packet_length_pmf(params, first)?;
    let mut cdf = pk;
    while cdf <= u {
        k += 1;
        pk *= mu / k as f64;
        let next = cdf + pk;
        if next == cdf {
            break;
        }
        cdf = next;
    }
    let link = params.link();
    let retx = sample_transmissions(rng, link.ln_success(k));
    let service = retx as f64 * link.length(k) / params.channel_rate;
    Ok((w_prev + service - tau).max(0.0))
}

/// Writes packets as CSV with columns `n,a_n,tau_n,k_n,l_n,r_n,s_n,w_n`.
pub fn write_trace_csv<W: io::Write>(records: &[PacketRecord], out: W) -> Result<()> {
    let err = |e: csv::Error| Error::Trace(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "a_n", "tau_n", "k_n", "l_n", "r_n", "s_n", "w_n"]).map_err(err)?;
    for p in records {
        w.write_record(&[
            p.index.to_string(),
            p.formation_epoch.to_string(),
            p.interarrival.to_string(),
            p.symbol_count.to_string(),
            p.length.to_string(),
            p.retransmissions.to_string(),
            p.service.to_string(),
            p.waiting.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Trace(e.to_string()))
}
