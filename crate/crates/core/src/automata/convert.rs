use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use super::symbol::Symbol;
use super::ta::TreeAutomaton;
use crate::error::AutomatonError;
use crate::logic::{Atom, Formula, Heap, PredAtom, Rule, Sid, Var};
use crate::model::{Behavior, Name};

/// The symbol of a rule with parameters `params` and prenex body `h`:
/// parameters become `Param`s, binders become `Local`s, and the arguments
/// of the `l`-th call are exported through `ChildParam(l, i) = arg`.
pub fn rule_symbol(params: &[Var], h: &Heap, arity: impl Fn(&Name) -> usize) -> Symbol {
    let mut map: BTreeMap<&Var, Var> = BTreeMap::new();
    for (j, x) in params.iter().enumerate() {
        map.insert(x, Var::Param(j as u32 + 1));
    }
    let locals: Vec<Var> = (1..=h.exists.len() as u32).map(Var::Local).collect();
    for (y, l) in h.exists.iter().zip(&locals) {
        map.insert(y, l.clone());
    }
    let rn = |v: &Var| map.get(v).cloned().unwrap_or_else(|| v.clone());
    let mut atoms: Vec<Atom> = h.atoms.iter().map(|a| a.rename(&rn)).collect();
    let mut arities = vec![params.len()];
    for (l, c) in h.calls.iter().enumerate() {
        arities.push(arity(&c.pred));
        for (i, z) in c.args.iter().enumerate() {
            atoms.push(Atom::Eq(Var::ChildParam(l as u32 + 1, i as u32 + 1), rn(z)));
        }
    }
    Symbol::new(locals, atoms, arities).expect("rule bodies only mention parameters and binders")
}

/// One state per predicate (named by the predicate) and one transition per
/// rule; structurally equal symbols are shared. No state is final.
pub fn sid_to_ta(sid: &Sid) -> TreeAutomaton<Name> {
    let mut a = TreeAutomaton::new();
    for p in sid.predicates() {
        a.add_state(p.clone());
    }
    let arity = |p: &Name| sid.arity(p).expect("validated system");
    for (i, r) in sid.rules().iter().enumerate() {
        let h = sid.heap(i);
        let sym = a.add_symbol(rule_symbol(&r.params, h, arity));
        let kids = h.calls.iter().map(|c| a.state_id(&c.pred).expect("defined")).collect();
        let target = a.state_id(&r.pred).expect("defined");
        a.add_transition(sym, kids, target);
    }
    a
}

/// Arity annotation of every state, or `None` when two transitions
/// disagree on it.
fn state_arities<S: Clone + Eq + Hash + fmt::Display>(a: &TreeAutomaton<S>) -> Option<Vec<Option<usize>>> {
    let mut ar: Vec<Option<usize>> = vec![None; a.states().len()];
    let mut set = |q: usize, n: usize| match ar[q] {
        Some(m) if m != n => false,
        _ => {
            ar[q] = Some(n);
            true
        }
    };
    for t in a.transitions() {
        let ns = a.alphabet()[t.symbol].arities();
        if !set(t.target, ns[0]) {
            return None;
        }
        for (c, n) in t.children.iter().zip(&ns[1..]) {
            if !set(*c, *n) {
                return None;
            }
        }
    }
    Some(ar)
}

pub fn is_sid_compatible<S: Clone + Eq + Hash + fmt::Display>(a: &TreeAutomaton<S>) -> bool {
    state_arities(a).is_some()
}

/// One rule `name(q0)(x1..xa0) <- exists y.. z.. . psi * name(q1)(y1_..) * ..`
/// per transition.
pub fn ta_to_sid<S: Clone + Eq + Hash + fmt::Display>(
    a: &TreeAutomaton<S>,
    name: impl Fn(usize) -> Name,
    behavior: &Behavior,
) -> Result<Sid, AutomatonError> {
    if !is_sid_compatible(a) {
        return Err(AutomatonError::NotSidCompatible);
    }
    let mut rules = Vec::new();
    for t in a.transitions() {
        let sym = &a.alphabet()[t.symbol];
        let ns = sym.arities();
        let rn = |v: &Var| match v {
            Var::Param(i) => Var::Named(Name::from(format!("x{i}"))),
            Var::ChildParam(l, i) => Var::Named(Name::from(format!("y{l}_{i}"))),
            Var::Local(k) => Var::Named(Name::from(format!("z{k}"))),
            other => other.clone(),
        };
        let params: Vec<Var> = (1..=ns[0] as u32).map(Var::Param).map(|v| rn(&v)).collect();
        let mut binders = Vec::new();
        let mut calls = Vec::new();
        for (l, c) in t.children.iter().enumerate() {
            let args: Vec<Var> = (1..=ns[l + 1] as u32).map(|i| rn(&Var::ChildParam(l as u32 + 1, i))).collect();
            binders.extend(args.iter().cloned());
            calls.push(Formula::Pred(PredAtom::new(name(*c), args)));
        }
        binders.extend(sym.exists().iter().map(rn));
        let parts = sym.atoms().iter().map(|x| Formula::Atom(x.rename(&rn))).chain(calls);
        rules.push(Rule::new(name(t.target), params, Formula::exists(binders, Formula::sep(parts))));
    }
    Ok(Sid::new(behavior.clone(), rules)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_system;

    #[test]
    fn tll_automaton_shape() {
        let f = parse_system(include_str!("../../fixtures/tll.clsys")).unwrap();
        let a = sid_to_ta(&f.sid);
        assert_eq!(a.states().len(), 2);
        assert_eq!(a.transitions().len(), 4);
        assert_eq!(a.alphabet().len(), 4);
        let root = a.state_id(&Name::new("Root")).unwrap();
        let node = a.state_id(&Name::new("Node")).unwrap();
        let shapes: Vec<(usize, Vec<usize>)> = a.transitions().iter().map(|t| (t.target, t.children.clone())).collect();
        assert_eq!(shapes, vec![(root, vec![node]), (node, vec![node, node]), (node, vec![]), (node, vec![])]);
        assert_eq!(a.alphabet()[2].to_string(), "<comp($in1 : q0), 3>");
        assert_eq!(a.alphabet()[0].arities(), [0, 3]);
        assert!(is_sid_compatible(&a));
        assert_eq!(a.trim().dump(), a.dump());
    }

    #[test]
    fn single_empty_rule() {
        let f = parse_system("behavior { ports; states; } sid { A() <- emp; }").unwrap();
        let a = sid_to_ta(&f.sid);
        assert_eq!((a.states().len(), a.transitions().len(), a.alphabet().len()), (1, 1, 1));
        let back = ta_to_sid(&a, |q| a.states()[q].clone(), f.sid.behavior()).unwrap();
        assert_eq!(back.rules().len(), 1);
    }

    #[test]
    fn incompatible_arities() {
        let mut a: TreeAutomaton<String> = TreeAutomaton::new();
        let q = a.add_state("q".into());
        let s2 = a.add_symbol(Symbol::new(vec![], vec![], vec![2]).unwrap());
        let s3 = a.add_symbol(Symbol::new(vec![], vec![], vec![3]).unwrap());
        a.add_transition(s2, vec![], q);
        assert!(is_sid_compatible(&a));
        a.add_transition(s3, vec![], q);
        assert!(!is_sid_compatible(&a));
        let b = Behavior::default();
        assert_eq!(ta_to_sid(&a, |_| Name::new("A"), &b).unwrap_err(), AutomatonError::NotSidCompatible);
    }
}
