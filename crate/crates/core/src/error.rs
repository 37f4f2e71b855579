use thiserror::Error;

use crate::topology::LinkId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate link between {0} and {1}")]
    DuplicateLink(String, String),
    #[error("topology is not connected")]
    Disconnected,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("invalid availability {0}, expected a value in (0, 1]")]
    InvalidAvailability(f64),
    #[error("bitmap length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no run of {need} contiguous free slots")]
    NoFit { need: usize },
    #[error("slot block [{start}, {end}) does not fit in {len} slots")]
    BlockOutOfRange { start: usize, end: usize, len: usize },
    #[error("slot conflict on link {0}")]
    Conflict(LinkId),
    #[error("double free on link {0}")]
    DoubleFree(LinkId),
    #[error("empty candidate path list")]
    NoCandidates,
    #[error("unknown working path {0}")]
    UnknownWorkingPath(u64),
    #[error("link availability is zero")]
    ZeroAvailability,
    #[error("no arrivals counted")]
    NoArrivals,
    #[error("no slots requested")]
    NoDemand,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
