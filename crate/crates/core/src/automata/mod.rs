//! Ranked trees over formula-labeled symbols, bottom-up tree automata,
//! characteristic formulas, and the translations between inductive
//! systems and automata.

mod charform;
mod convert;
mod symbol;
mod ta;

pub use charform::{char_formula, char_formula_closed, equality_walk};
pub use convert::{is_sid_compatible, rule_symbol, sid_to_ta, ta_to_sid};
pub use symbol::{Symbol, Tree};
pub use ta::{Bound, TaTransition, TreeAutomaton};
