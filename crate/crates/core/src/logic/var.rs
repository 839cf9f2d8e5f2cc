use std::collections::BTreeSet;
use std::fmt;

use crate::model::Name;

/// Tree node address: a sequence of positive child indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Address(pub Vec<u32>);

impl Address {
    pub fn root() -> Self {
        Address(Vec::new())
    }

    pub fn child(&self, l: u32) -> Self {
        let mut v = self.0.clone();
        v.push(l);
        Address(v)
    }

    pub fn is_prefix_of(&self, other: &Address) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

/// Logical variable.
///
/// Besides user names, the canonical families used by alphabet symbols
/// (`Param`, `ChildParam`, `Local`), the transducer (`Begin`, `End`) and
/// characteristic formulas (`At`) live in the same type.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Var {
    Named(Name),
    /// `i`-th parameter of a symbol, 1-based.
    Param(u32),
    /// `i`-th parameter of child `l`, both 1-based.
    ChildParam(u32, u32),
    /// `k`-th existential of a symbol, 1-based.
    Local(u32),
    Begin(u32),
    End(u32),
    Fresh(Name, u32),
    At(Box<Var>, Address),
}

impl Var {
    pub fn named(s: &str) -> Var {
        Var::Named(Name::new(s))
    }

    pub fn at(self, u: Address) -> Var {
        Var::At(Box::new(self), u)
    }

    fn base(&self) -> Name {
        match self {
            Var::Named(n) | Var::Fresh(n, _) => n.clone(),
            other => Name::from(other.to_string()),
        }
    }

    /// A variant of `self` not in `avoid`.
    pub fn fresh(&self, avoid: &BTreeSet<Var>) -> Var {
        let base = self.base();
        (1..)
            .map(|k| Var::Fresh(base.clone(), k))
            .find(|v| !avoid.contains(v))
            .expect("unbounded supply")
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Named(n) => write!(f, "{n}"),
            Var::Param(i) => write!(f, "$in{i}"),
            Var::ChildParam(l, i) => write!(f, "$out{l}_{i}"),
            Var::Local(k) => write!(f, "$y{k}"),
            Var::Begin(i) => write!(f, "$b{i}"),
            Var::End(i) => write!(f, "$e{i}"),
            Var::Fresh(n, k) => write!(f, "{n}#{k}"),
            Var::At(v, u) => write!(f, "{v}@{u}"),
        }
    }
}
