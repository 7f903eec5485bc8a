use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("argument outside the domain of {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("numeric overflow in {what} (exponent {exponent:.3e})")]
    Overflow { what: &'static str, exponent: f64 },

    #[error("queue is unstable (utilization {utilization:.6}); minimum channel rate {min_channel_rate:.6} bit/s")]
    Unstable { utilization: f64, min_channel_rate: f64 },

    #[error("no packetization interval yields a stable queue")]
    EmptyRange,

    #[error("delay bound {d_max} s is below the minimum achievable delay {d_min} s")]
    Infeasible { d_max: f64, d_min: f64 },

    #[error("need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("packet {packet} hit the retransmission guard of {guard} attempts")]
    RetransmissionGuard { packet: u64, guard: u64 },

    #[error("trace export failed: {0}")]
    Trace(String),
}

pub type Result<T> = std::result::Result<T, Error>;
