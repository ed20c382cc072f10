use alloc::string::String;

use crate::drop::DropKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph already contains self-loops")]
    SelfLoopsPresent,
    #[error("self-loop edge ({0}, {0}) is not allowed here")]
    SelfLoopEdge(usize),
    #[error("duplicate undirected edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph construction infeasible: {0}")]
    Infeasible(String),
    #[error("construction retry budget exhausted after {0} attempts")]
    RetryBudgetExhausted(usize),
    #[error("cannot add {requested} edges: only {available} absent node pairs remain")]
    CapacityExceeded { requested: usize, available: usize },
    #[error("mask selects no nodes")]
    EmptyMask,
    #[error("split '{0}' is empty")]
    EmptySplit(&'static str),
    #[error("non-finite gradient for parameter '{0}'")]
    NonFiniteGradient(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {0} (non-finite loss)")]
    Diverged(usize),
    #[error("per-node rates are only supported for DropMessage, got {0:?}")]
    NodewiseUnsupported(DropKind),
    #[error("no valid node pairs for MADGap ({0})")]
    NoValidPairs(&'static str),
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { got: usize, min: usize },
    #[error("labels must be binary (0 or 1) on every masked node")]
    NonBinaryLabels,
    #[error("label {label} on node {node} is invalid for {classes} classes")]
    InvalidLabel {
        node: usize,
        label: usize,
        classes: usize,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::ShapeMismatch { op, left, right }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
