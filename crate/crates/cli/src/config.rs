//! Run configuration: JSON file contents merged with command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use packetize::{CodingProfile, Mode, SimConfig, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SYMBOLS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    #[default]
    Analyze,
    Sweep,
    Optimize,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum SweepVar {
    #[serde(rename = "T")]
    #[value(name = "T", alias = "t", alias = "interval")]
    Interval,
    #[serde(rename = "beta")]
    #[value(name = "beta", alias = "ber")]
    Beta,
    #[serde(rename = "H")]
    #[value(name = "H", alias = "h", alias = "header")]
    Header,
    #[serde(rename = "R")]
    #[value(name = "R", alias = "r", alias = "rate")]
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
    /// Replace `T` at each point by the delay-optimal interval.
    #[serde(default)]
    pub optimize: bool,
    /// Add simulated columns.
    #[serde(default)]
    pub simulate: bool,
}

impl SweepSpec {
    /// Sweep values in increasing order; header sizes are rounded and deduplicated.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let mut out: Vec<f64> = (0..n)
            .map(|i| {
                let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                match self.scale {
                    Scale::Linear => self.from + f * (self.to - self.from),
                    Scale::Log => self.from * (self.to / self.from).powf(f),
                }
            })
            .collect();
        if self.variable == SweepVar::Header {
            for v in &mut out {
                *v = v.round();
            }
            out.dedup();
        }
        out
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(format!("sweep: {msg}")));
        if self.points == 0 {
            return bad("`points` must be at least 1");
        }
        if !(self.from.is_finite() && self.to.is_finite()) {
            return bad("`from` and `to` must be finite");
        }
        if self.from > self.to || (self.from == self.to && self.points > 1) {
            return bad("range must satisfy from < to (or from == to with one point)");
        }
        if self.scale == Scale::Log && self.from <= 0.0 {
            return bad("log scale needs from > 0");
        }
        if self.variable == SweepVar::Header && (self.from < 0.0 || self.to > u32::MAX as f64) {
            return bad("header sizes must fit in u32");
        }
        Ok(())
    }
}

/// Everything needed to reproduce one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Command,
    pub params: SystemParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    #[serde(default)]
    pub require_stable: bool,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            params: SystemParams::new(16, 30, 10.0, 300.0, 1e-3, 1.0),
            sweep: None,
            sim: None,
            d_max: None,
            require_stable: false,
            format: Format::Json,
            output_path: None,
            trace_path: None,
        }
    }

    /// Reads a config file. A document emitted by this tool is accepted too;
    /// its `config` member is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(inner) = doc.get_mut("config") {
            doc = inner.take();
        }
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn sim_or_default(&self) -> SimConfig {
        self.sim.unwrap_or_else(|| SimConfig::new(DEFAULT_SYMBOLS, DEFAULT_SEED))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if self.command == Command::Sweep && self.sweep.is_none() {
            return Err(CliError::Config("sweep needs --var, --from and --to".into()));
        }
        if let Some(sim) = &self.sim {
            sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.d_max.is_some_and(|d| d.is_nan()) {
            return Err(CliError::Config("`d_max` must be a number".into()));
        }
        if self.d_max.is_some() && self.params.mode == Mode::Slotted {
            return Err(CliError::Config("energy optimization is defined for efficient mode only".into()));
        }
        Ok(())
    }
}

/// Parses `rd,rh,bd,bh`: payload and header code rates, then their bit error probabilities.
pub fn parse_coding(s: &str) -> Result<CodingProfile, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [data_rate, header_rate, data_ber, header_ber] => Ok(CodingProfile {
            data_rate,
            header_rate,
            data_ber,
            header_ber,
        }),
        _ => Err(format!("expected 4 comma-separated numbers, got {}", parts.len())),
    }
}
