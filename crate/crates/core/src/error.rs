use thiserror::Error;

use crate::topology::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range 1..={nodes}")]
    NodeOutOfRange { index: usize, nodes: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("invalid network:\n{}", format_diagnostics(.0))]
    InvalidNetwork(Vec<Diagnostic>),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no transition from absorbing mode {0}")]
    AbsorbingMode(usize),

    #[error("P or G not positive definite (eigenvalue {0})")]
    NotPositiveDefinite(f64),

    #[error("delta = {delta} outside (0, {max:.6}] (2*beta*lambda_lo/lambda_hi)")]
    DeltaOutOfRange { delta: f64, max: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state became non-finite at t = {time}")]
    BlowUp { time: f64 },

    #[error("node {node} has no held snapshot for neighbor {neighbor}")]
    MissingSnapshot { node: usize, neighbor: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  - {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}
