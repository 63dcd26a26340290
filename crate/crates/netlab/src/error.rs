use crate::network::NodeId;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node {0} is not declared in the network")]
    UnknownNode(NodeId),
    #[error("colouring assigns no colour to node {0}")]
    ColouringNotTotal(NodeId),
    #[error("colouring is not balanced: {0}")]
    NotBalanced(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("unknown colour \"{0}\"")]
    UnknownColour(String),
    #[error("lift specification rejected: {0}")]
    Lift(String),
    #[error("automorphism rejected: {0}")]
    Automorphism(String),
    #[error("phase lift rejected: {0}")]
    PhaseLift(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("system assembly failed: {0}")]
    Assembly(String),
    #[error("non-finite value produced at node {node}, t = {t}")]
    NonFinite { node: NodeId, t: f64 },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("no return to the section: {0}")]
    NoReturn(String),
    #[error("orbit closure not achieved: {0}")]
    Closure(String),
    #[error("state not synchronous: {0}")]
    NotSynchronous(String),
    #[error("stability analysis failed: {0}")]
    Stability(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
