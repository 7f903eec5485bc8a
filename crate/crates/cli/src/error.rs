use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] packetize::Error),

    #[error("simulation diverged (empirical utilization {0:.6})")]
    Diverged(f64),

    #[error("output: {0}")]
    Io(#[from] std::io::Error),

    #[error("output: {0}")]
    Csv(#[from] csv::Error),

    #[error("output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use packetize::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Model(e) => match e {
                E::InvalidParam { .. } | E::Domain { .. } => 2,
                E::Unstable { .. } | E::EmptyRange => 3,
                E::Infeasible { .. } => 4,
                _ => 1,
            },
            CliError::Diverged(_) => 5,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}
