use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for graph with {num_vertices} vertices")]
    VertexOutOfRange { vertex: usize, num_vertices: usize },

    #[error("invalid generator parameters: {0}")]
    InvalidGenerator(String),

    #[error("malformed RLC row: {0}")]
    MalformedRlc(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sample stream exhausted after {0} draws")]
    SampleStreamExhausted(usize),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("aggregation deadlock in round {round}: {unprocessed_edges} edges left, no vertex below gamma={gamma}")]
    Deadlock {
        round: usize,
        gamma: usize,
        unprocessed_edges: usize,
    },

    #[error("edge ({0}, {1}) processed twice")]
    DoubleProcessedEdge(usize, usize),

    #[error("vertex {vertex} finalized with {remaining} unprocessed edges")]
    PrematureFinalize { vertex: usize, remaining: usize },

    #[error("zero softmax denominator for vertex {0}")]
    ZeroDenominator(usize),

    #[error("equal MAC counts ({0}); speedup gain per MAC is undefined")]
    EqualMacCounts(usize),

    #[error("no progress after {0} cache iterations")]
    NoProgress(usize),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
