//! Configuration Logic with inductive definitions.
//!
//! The crate covers the concrete semantics of component configurations,
//! the logic and its inductive systems, tree-automata encodings of
//! unfoldings, the havoc-step tree transducer, the reduction from havoc
//! invariance to entailment, syntactic analyses and a bounded oracle used
//! to cross-check every construction on small instances.

pub mod analysis;
pub mod automata;
pub mod error;
pub mod frontend;
pub mod logic;
pub mod model;
pub mod oracle;
pub mod reduction;
pub mod transducer;
mod unionfind;

pub use error::{Error, Result};
pub use model::{Behavior, ComponentId, Configuration, Interaction, InteractionType, Name};
