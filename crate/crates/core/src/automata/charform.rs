use std::collections::{BTreeMap, VecDeque};

use super::symbol::Tree;
use crate::error::AutomatonError;
use crate::logic::{Address, Atom, Formula, Var};

fn localize(v: &Var, u: &Address) -> Var {
    match v {
        Var::ChildParam(l, j) => Var::Param(*j).at(u.child(*l)),
        other => other.clone().at(u.clone()),
    }
}

fn node_atoms(t: &Tree, u: &Address, out: &mut Vec<(Address, Atom)>) {
    for a in t.symbol().atoms() {
        out.push((u.clone(), a.rename(&|v: &Var| localize(v, u))));
    }
    for (l, c) in t.children().iter().enumerate() {
        node_atoms(c, &u.child(l as u32 + 1), out);
    }
}

/// Quantifier-free characteristic formula of the subtree at `u`; the
/// variables of the node at address `v` are tagged `@v`.
pub fn char_formula(t: &Tree, u: &Address) -> Result<Formula, AutomatonError> {
    let sub = t.subtree(u)?;
    let mut atoms = Vec::new();
    node_atoms(sub, u, &mut atoms);
    Ok(Formula::sep(atoms.into_iter().map(|(_, a)| Formula::Atom(a))))
}

/// `char_formula` with every variable bound except the parameters of `u`.
pub fn char_formula_closed(t: &Tree, u: &Address) -> Result<Formula, AutomatonError> {
    let sub = t.subtree(u)?;
    let mut bound = Vec::new();
    for v in sub.addresses() {
        let node = sub.subtree(&v)?;
        let w = Address(u.0.iter().chain(&v.0).copied().collect());
        if !v.0.is_empty() {
            bound.extend((1..=node.symbol().arities()[0] as u32).map(|j| Var::Param(j).at(w.clone())));
        }
        bound.extend(node.symbol().exists().iter().map(|y| y.clone().at(w.clone())));
    }
    Ok(Formula::exists(bound, char_formula(t, u)?))
}

/// A walk of tree nodes along equality atoms of the characteristic formula
/// at the root connecting `x` and `y`, if one exists.
pub fn equality_walk(t: &Tree, x: &Var, y: &Var) -> Option<Vec<Address>> {
    let mut atoms = Vec::new();
    node_atoms(t, &Address::root(), &mut atoms);
    let mut adj: BTreeMap<&Var, Vec<(&Var, &Address)>> = BTreeMap::new();
    for (u, a) in &atoms {
        if let Atom::Eq(p, q) = a {
            adj.entry(p).or_default().push((q, u));
            adj.entry(q).or_default().push((p, u));
        }
    }
    let home = |v: &Var| match v {
        Var::At(_, u) => Some(u.clone()),
        _ => None,
    };
    if x == y {
        return home(x).map(|u| vec![u]);
    }
    let mut prev: BTreeMap<&Var, (&Var, &Address)> = BTreeMap::new();
    let mut queue = VecDeque::from([x]);
    while let Some(v) = queue.pop_front() {
        if v == y {
            let mut walk = Vec::new();
            let mut cur = y;
            while cur != x {
                let (p, u) = prev[cur];
                if walk.last() != Some(u) {
                    walk.push(u.clone());
                }
                cur = p;
            }
            walk.reverse();
            return Some(walk);
        }
        for (w, u) in adj.get(v).into_iter().flatten() {
            if *w != x && !prev.contains_key(w) {
                prev.insert(w, (v, u));
                queue.push_back(w);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::automata::Symbol;
    use crate::model::Name;

    #[test]
    fn leaf_formula() {
        let x = Var::Param(1);
        let s = Symbol::new(vec![], vec![Atom::Comp(x.clone()), Atom::State(x, Name::new("q0"))], vec![3]).unwrap();
        let t = Tree::leaf(Arc::new(s)).unwrap();
        assert_eq!(char_formula(&t, &Address::root()).unwrap().to_string(), "comp($in1@ε : q0)");
        assert!(char_formula(&t, &Address(vec![1])).is_err());
    }

    #[test]
    fn empty_symbol() {
        let t = Tree::leaf(Arc::new(Symbol::new(vec![], vec![], vec![0]).unwrap())).unwrap();
        assert_eq!(char_formula(&t, &Address::root()).unwrap(), Formula::Emp);
        assert_eq!(char_formula_closed(&t, &Address::root()).unwrap(), Formula::Emp);
    }

    #[test]
    fn walk_through_child() {
        // parent: $out1_1 = $in1; child: comp($in1)
        let p = Symbol::new(vec![], vec![Atom::Eq(Var::ChildParam(1, 1), Var::Param(1))], vec![1, 1]).unwrap();
        let c = Symbol::new(vec![], vec![Atom::Comp(Var::Param(1))], vec![1]).unwrap();
        let t = Tree::new(Arc::new(p), vec![Tree::leaf(Arc::new(c)).unwrap()]).unwrap();
        let root = Var::Param(1).at(Address::root());
        let child = Var::Param(1).at(Address(vec![1]));
        assert_eq!(equality_walk(&t, &root, &child), Some(vec![Address::root()]));
        let closed = char_formula_closed(&t, &Address::root()).unwrap();
        assert_eq!(closed.free_vars().into_iter().collect::<Vec<_>>(), vec![root]);
    }
}
