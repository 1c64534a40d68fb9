use pleasance_core::analysis::AnalysisError;
use pleasance_core::bt::BtError;
use pleasance_core::protocol::ProtocolError;
use pleasance_core::simulation::SimulationError;
use pleasance_core::stimulus::StimulusError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
