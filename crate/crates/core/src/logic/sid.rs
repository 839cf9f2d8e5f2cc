use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::formula::{Atom, Formula, Heap};
use super::var::Var;
use crate::error::{LogicError, ModelError};
use crate::model::{Behavior, Name};

/// `pred(params) <- body`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub pred: Name,
    pub params: Vec<Var>,
    pub body: Formula,
}

impl Rule {
    pub fn new(pred: impl Into<Name>, params: Vec<Var>, body: Formula) -> Self {
        Rule { pred: pred.into(), params, body }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn heap(&self) -> Heap {
        self.body.normalize()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.params.iter().map(Var::to_string).collect();
        write!(f, "{}({}) <- {}", self.pred, ps.join(", "), self.body)
    }
}

/// A system of inductive definitions over a fixed behavior.
#[derive(Clone, Debug)]
pub struct Sid {
    behavior: Behavior,
    rules: Vec<Rule>,
    heaps: Vec<Heap>,
    by_pred: BTreeMap<Name, Vec<usize>>,
}

impl PartialEq for Sid {
    fn eq(&self, other: &Self) -> bool {
        self.behavior == other.behavior && self.rules == other.rules
    }
}

impl Sid {
    pub fn new(behavior: Behavior, rules: Vec<Rule>) -> Result<Self, LogicError> {
        let mut arity: BTreeMap<Name, usize> = BTreeMap::new();
        for r in &rules {
            for (i, p) in r.params.iter().enumerate() {
                if r.params[..i].contains(p) {
                    return Err(LogicError::DuplicateParameter { pred: r.pred.clone(), var: p.clone() });
                }
            }
            if let Some(var) = r.body.free_vars().into_iter().find(|v| !r.params.contains(v)) {
                return Err(LogicError::FreeVariable { pred: r.pred.clone(), var });
            }
            match arity.get(&r.pred) {
                Some(&n) if n != r.arity() => {
                    return Err(LogicError::ArityMismatch { pred: r.pred.clone(), expected: n, found: r.arity() })
                }
                _ => {
                    arity.insert(r.pred.clone(), r.arity());
                }
            }
        }
        let heaps: Vec<Heap> = rules.iter().map(Rule::heap).collect();
        for h in &heaps {
            for c in &h.calls {
                match arity.get(&c.pred) {
                    None => return Err(LogicError::UndefinedPredicate(c.pred.clone())),
                    Some(&n) if n != c.args.len() => {
                        return Err(LogicError::ArityMismatch { pred: c.pred.clone(), expected: n, found: c.args.len() })
                    }
                    _ => {}
                }
            }
            for a in &h.atoms {
                check_atom(&behavior, a)?;
            }
        }
        let mut by_pred: BTreeMap<Name, Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            by_pred.entry(r.pred.clone()).or_default().push(i);
        }
        Ok(Sid { behavior, rules, heaps, by_pred })
    }

    pub fn behavior(&self) -> &Behavior {
        &self.behavior
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Normal form of rule `i`.
    pub fn heap(&self, i: usize) -> &Heap {
        &self.heaps[i]
    }

    /// Indices of the rules defining `pred`.
    pub fn rules_for(&self, pred: &Name) -> &[usize] {
        self.by_pred.get(pred).map_or(&[], Vec::as_slice)
    }

    pub fn arity(&self, pred: &Name) -> Option<usize> {
        self.by_pred.get(pred).map(|rs| self.rules[rs[0]].arity())
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Name> {
        self.by_pred.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Canonical argument list `x1..xn` for `pred`.
    pub fn params_of(&self, pred: &Name) -> Result<Vec<Var>, LogicError> {
        let n = self.arity(pred).ok_or_else(|| LogicError::UndefinedPredicate(pred.clone()))?;
        Ok((1..=n).map(|i| Var::Named(Name::from(format!("x{i}")))).collect())
    }

    /// Predicates reachable from `root` through rule bodies, `root` included.
    pub fn reachable_from(&self, root: &Name) -> BTreeSet<Name> {
        let mut seen = BTreeSet::new();
        let mut work = vec![root.clone()];
        while let Some(p) = work.pop() {
            if !seen.insert(p.clone()) {
                continue;
            }
            for &i in self.rules_for(&p) {
                work.extend(self.heaps[i].calls.iter().map(|c| c.pred.clone()));
            }
        }
        seen
    }

    /// The sub-system of rules whose head is reachable from `root`.
    pub fn restrict_to(&self, root: &Name) -> Sid {
        let keep = self.reachable_from(root);
        let rules = self.rules.iter().filter(|r| keep.contains(&r.pred)).cloned().collect();
        Sid::new(self.behavior.clone(), rules).expect("sub-system of a valid SID")
    }

    /// This system extended by `extra` rules.
    pub fn extend(&self, extra: impl IntoIterator<Item = Rule>) -> Result<Sid, LogicError> {
        let mut rules = self.rules.clone();
        rules.extend(extra);
        Sid::new(self.behavior.clone(), rules)
    }
}

fn check_atom(b: &Behavior, a: &Atom) -> Result<(), LogicError> {
    match a {
        Atom::Interaction(bs) => {
            for (_, p) in bs {
                if !b.ports().contains(p) {
                    return Err(ModelError::UndeclaredPort(p.clone()).into());
                }
            }
        }
        Atom::State(_, q) if !b.states().contains(q) => {
            return Err(ModelError::UndeclaredState(q.clone()).into());
        }
        _ => {}
    }
    Ok(())
}
