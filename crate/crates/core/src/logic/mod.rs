//! Formulas of Configuration Logic, inductive systems, satisfaction and
//! bounded unfolding, and the equality-partition algebra.

mod eq;
mod eval;
mod formula;
mod sid;
mod unfold;
mod var;

pub use eq::EqFormula;
pub use eval::{eval_bounded, eval_qpf, Bounded, Store};
pub use formula::{Atom, Formula, Heap, PredAtom};
pub use sid::{Rule, Sid};
pub use unfold::unfold;
pub use var::{Address, Var};

pub(crate) use unfold::{check_call, for_each_unfolding};
