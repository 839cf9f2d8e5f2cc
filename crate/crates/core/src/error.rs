//! Error types, one enum per module plus a crate-wide wrapper.

use thiserror::Error;

use crate::logic::Var;
use crate::model::{ComponentId, Name};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("undeclared state `{0}`")]
    UndeclaredState(Name),
    #[error("undeclared port `{0}`")]
    UndeclaredPort(Name),
    #[error("interaction without bindings")]
    EmptyInteraction,
    #[error("component {0} bound twice in one interaction")]
    RepeatedComponent(ComponentId),
    #[error("state map undefined on {0}")]
    MissingState(ComponentId),
    #[error("state maps disagree on {0}")]
    StateMapMismatch(ComponentId),
    #[error("interaction {0} does not belong to the configuration")]
    UnknownInteraction(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("variable `{0}` is not bound by the store")]
    UnboundVariable(Var),
    #[error("predicate `{0}` is not defined")]
    UndefinedPredicate(Name),
    #[error("predicate `{pred}` expects {expected} arguments, found {found}")]
    ArityMismatch { pred: Name, expected: usize, found: usize },
    #[error("predicate atom `{0}` in a predicate-free context")]
    PredicateAtom(Name),
    #[error("rule for `{pred}` repeats parameter `{var}`")]
    DuplicateParameter { pred: Name, var: Var },
    #[error("rule for `{pred}` has free variable `{var}` that is not a parameter")]
    FreeVariable { pred: Name, var: Var },
    #[error("rhs variable `{0}` is not free on the lhs")]
    RhsVariable(Var),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("address {0} is not in the tree domain")]
    BadAddress(String),
    #[error("automaton is not SID-compatible")]
    NotSidCompatible,
    #[error("symbol of rank {rank} applied to {children} children")]
    RankMismatch { rank: usize, children: usize },
    #[error("symbol variable `{0}` is outside its canonical range")]
    BadSymbolVar(Var),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransducerError {
    #[error("symbol of rank {rank} given {states} child states")]
    ArityMismatch { rank: usize, states: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("tightness of `{0}` not established: the SID is not PCR and --assume-tight was not given")]
    TightnessNotEstablished(Name),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Transducer(#[from] TransducerError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Transducer(#[from] TransducerError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
