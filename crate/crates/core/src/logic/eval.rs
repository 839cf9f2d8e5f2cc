use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use super::formula::{Atom, Formula, Heap};
use super::sid::Sid;
use super::unfold::{check_call, for_each_unfolding};
use super::var::Var;
use crate::error::LogicError;
use crate::model::{ComponentId, Configuration, Interaction, Port, State};
use crate::unionfind::UnionFind;

/// Variable assignment.
pub type Store = BTreeMap<Var, ComponentId>;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bounded {
    Sat,
    UnsatAtDepth,
}

/// Satisfaction of a predicate-free formula.
pub fn eval_qpf(g: &Configuration, store: &Store, f: &Formula) -> Result<bool, LogicError> {
    let h = f.normalize();
    if let Some(c) = h.calls.first() {
        return Err(LogicError::PredicateAtom(c.pred.clone()));
    }
    heap_sat(g, store, &h.exists, &h.atoms)
}

/// Satisfaction of `f` through some complete unfolding of height at most
/// `depth`.
pub fn eval_bounded(
    g: &Configuration,
    store: &Store,
    f: &Formula,
    sid: &Sid,
    depth: usize,
) -> Result<Bounded, LogicError> {
    let start = f.normalize();
    for c in &start.calls {
        check_call(sid, c)?;
    }
    if let Some(v) = start.free_vars().into_iter().find(|v| !store.contains_key(v)) {
        return Err(LogicError::UnboundVariable(v));
    }
    let (nc, ni) = (g.components().len(), g.interactions().len());
    let mut result = Ok(Bounded::UnsatAtDepth);
    let _ = for_each_unfolding(
        sid,
        &start,
        depth,
        false,
        &mut |h: &Heap| exceeds(h, nc, ni),
        &mut |h: &Heap| match heap_sat(g, store, &h.exists, &h.atoms) {
            Ok(true) => {
                result = Ok(Bounded::Sat);
                ControlFlow::Break(())
            }
            Ok(false) => ControlFlow::Continue(()),
            Err(e) => {
                result = Err(e);
                ControlFlow::Break(())
            }
        },
    );
    result
}

/// More spatial atoms than `g` can match bijectively.
pub(crate) fn exceeds(h: &Heap, components: usize, interactions: usize) -> bool {
    let mut c = 0;
    let mut i = 0;
    for a in &h.atoms {
        match a {
            Atom::Comp(_) => c += 1,
            Atom::Interaction(_) => i += 1,
            _ => {}
        }
    }
    c > components || i > interactions
}

/// Satisfaction of `exists exists . atoms`.
///
/// Component atoms are matched bijectively against the components and
/// interaction atoms against the interactions, by backtracking over
/// variable classes. Classes left unbound get fresh absent ids, which
/// satisfy every remaining state and disequality constraint.
pub(crate) fn heap_sat(g: &Configuration, store: &Store, exists: &[Var], atoms: &[Atom]) -> Result<bool, LogicError> {
    let mut index: BTreeMap<&Var, usize> = BTreeMap::new();
    for a in atoms {
        for v in a.vars() {
            let n = index.len();
            index.entry(v).or_insert(n);
        }
    }
    let bound: BTreeSet<&Var> = exists.iter().collect();
    for v in index.keys() {
        if !bound.contains(v) && !store.contains_key(*v) {
            return Err(LogicError::UnboundVariable((*v).clone()));
        }
    }
    let mut uf = UnionFind::new(index.len());
    for a in atoms {
        if let Atom::Eq(x, y) = a {
            uf.union(index[x], index[y]);
        }
    }
    let (class_of, nclasses) = uf.classes();
    let cls = |v: &Var| class_of[index[v]];

    let mut value: Vec<Option<ComponentId>> = vec![None; nclasses];
    for (v, i) in &index {
        if bound.contains(v) {
            continue;
        }
        let c = store[*v];
        let k = class_of[*i];
        match value[k] {
            Some(d) if d != c => return Ok(false),
            _ => value[k] = Some(c),
        }
    }

    let mut comps = Vec::new();
    let mut inters: Vec<(Vec<usize>, Vec<&Port>)> = Vec::new();
    let mut required: Vec<Option<&State>> = vec![None; nclasses];
    let mut neqs = Vec::new();
    for a in atoms {
        match a {
            Atom::Comp(x) => comps.push(cls(x)),
            Atom::Interaction(bs) => {
                inters.push((bs.iter().map(|(x, _)| cls(x)).collect(), bs.iter().map(|(_, p)| p).collect()))
            }
            Atom::State(x, q) => {
                let k = cls(x);
                match required[k] {
                    Some(r) if r != q => return Ok(false),
                    _ => required[k] = Some(q),
                }
            }
            Atom::Neq(x, y) => {
                if cls(x) == cls(y) {
                    return Ok(false);
                }
                neqs.push((cls(x), cls(y)));
            }
            Atom::Eq(..) => {}
        }
    }
    if comps.len() != g.components().len() || inters.len() != g.interactions().len() {
        return Ok(false);
    }
    for k in 0..nclasses {
        if let (Some(c), Some(q)) = (value[k], required[k]) {
            if g.state(c) != Some(q) {
                return Ok(false);
            }
        }
    }

    let mut m = Matcher {
        g,
        comps_avail: g.components().iter().copied().collect(),
        inters_avail: g.interactions().iter().collect(),
        used_comp: vec![false; g.components().len()],
        used_inter: vec![false; g.interactions().len()],
        required,
        neqs,
        value,
    };
    let order = match_order(&comps, &inters, &m.value);
    Ok(m.search(&order, 0, &comps, &inters))
}

#[derive(Clone, Copy)]
enum Item {
    Comp(usize),
    Inter(usize),
}

/// Greedy static order: next the atom with most classes already bound.
fn match_order(comps: &[usize], inters: &[(Vec<usize>, Vec<&Port>)], value: &[Option<ComponentId>]) -> Vec<Item> {
    let mut known: Vec<bool> = value.iter().map(Option::is_some).collect();
    let mut left: Vec<Item> = (0..inters.len()).map(Item::Inter).chain((0..comps.len()).map(Item::Comp)).collect();
    let mut order = Vec::with_capacity(left.len());
    while !left.is_empty() {
        let score = |it: &Item| -> (usize, usize) {
            match it {
                Item::Comp(k) => (usize::from(known[comps[*k]]) * 1000, 0),
                Item::Inter(k) => {
                    let cs = &inters[*k].0;
                    let b = cs.iter().filter(|c| known[**c]).count();
                    (b * 1000 / cs.len().max(1), 1)
                }
            }
        };
        let (pos, _) = left
            .iter()
            .enumerate()
            .max_by_key(|(i, it)| (score(it), std::cmp::Reverse(*i)))
            .expect("nonempty");
        let it = left.remove(pos);
        match it {
            Item::Comp(k) => known[comps[k]] = true,
            Item::Inter(k) => inters[k].0.iter().for_each(|c| known[*c] = true),
        }
        order.push(it);
    }
    order
}

struct Matcher<'a> {
    g: &'a Configuration,
    comps_avail: Vec<ComponentId>,
    inters_avail: Vec<&'a Interaction>,
    used_comp: Vec<bool>,
    used_inter: Vec<bool>,
    required: Vec<Option<&'a State>>,
    neqs: Vec<(usize, usize)>,
    value: Vec<Option<ComponentId>>,
}

impl Matcher<'_> {
    fn bind(&mut self, k: usize, c: ComponentId, trail: &mut Vec<usize>) -> bool {
        match self.value[k] {
            Some(d) => d == c,
            None => {
                if let Some(q) = self.required[k] {
                    if self.g.state(c) != Some(q) {
                        return false;
                    }
                }
                self.value[k] = Some(c);
                trail.push(k);
                true
            }
        }
    }

    fn undo(&mut self, trail: &[usize]) {
        for k in trail {
            self.value[*k] = None;
        }
    }

    fn search(&mut self, order: &[Item], pos: usize, comps: &[usize], inters: &[(Vec<usize>, Vec<&Port>)]) -> bool {
        if pos == order.len() {
            return self.neqs.iter().all(|(a, b)| match (self.value[*a], self.value[*b]) {
                (Some(x), Some(y)) => x != y,
                _ => true,
            });
        }
        match order[pos] {
            Item::Comp(k) => {
                let class = comps[k];
                for j in 0..self.comps_avail.len() {
                    if self.used_comp[j] {
                        continue;
                    }
                    let mut trail = Vec::new();
                    if self.bind(class, self.comps_avail[j], &mut trail) {
                        self.used_comp[j] = true;
                        if self.search(order, pos + 1, comps, inters) {
                            return true;
                        }
                        self.used_comp[j] = false;
                    }
                    self.undo(&trail);
                }
                false
            }
            Item::Inter(k) => {
                let (classes, ports) = &inters[k];
                for j in 0..self.inters_avail.len() {
                    if self.used_inter[j] {
                        continue;
                    }
                    let bs = self.inters_avail[j].bindings();
                    if bs.len() != ports.len() || bs.iter().zip(ports).any(|((_, p), q)| p != *q) {
                        continue;
                    }
                    let mut trail = Vec::new();
                    let ok = classes.iter().zip(bs).all(|(cl, (c, _))| self.bind(*cl, *c, &mut trail));
                    if ok {
                        self.used_inter[j] = true;
                        if self.search(order, pos + 1, comps, inters) {
                            return true;
                        }
                        self.used_inter[j] = false;
                    }
                    self.undo(&trail);
                }
                false
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Name;

    fn v(s: &str) -> Var {
        Var::named(s)
    }

    fn n(s: &str) -> Name {
        Name::new(s)
    }

    fn inter(bs: &[(&str, &str)]) -> Formula {
        Formula::Atom(Atom::Interaction(bs.iter().map(|(x, p)| (v(x), n(p))).collect()))
    }

    fn example3() -> Configuration {
        let c1 = ComponentId(1);
        let c2 = ComponentId(2);
        Configuration::new(
            [c1, c2],
            [
                Interaction::new(vec![(c1, n("out")), (c2, n("in"))]).unwrap(),
                Interaction::new(vec![(c2, n("out")), (c1, n("in"))]).unwrap(),
            ],
            [(c1, n("q")), (c2, n("r"))].into(),
        )
        .unwrap()
    }

    #[test]
    fn two_component_description() {
        let f = Formula::sep([
            Formula::comp_in(v("x1"), n("q")),
            Formula::comp_in(v("x2"), n("r")),
            inter(&[("x1", "out"), ("x2", "in")]),
            inter(&[("x2", "out"), ("x1", "in")]),
        ]);
        let store: Store = [(v("x1"), ComponentId(1)), (v("x2"), ComponentId(2))].into();
        assert!(eval_qpf(&example3(), &store, &f).unwrap());
        let swapped: Store = [(v("x1"), ComponentId(2)), (v("x2"), ComponentId(1))].into();
        assert!(!eval_qpf(&example3(), &swapped, &f).unwrap());
    }

    #[test]
    fn emp_and_comp_on_empty() {
        let g = Configuration::empty();
        assert!(eval_qpf(&g, &Store::new(), &Formula::Emp).unwrap());
        let store: Store = [(v("x"), ComponentId(1))].into();
        assert!(!eval_qpf(&g, &store, &Formula::comp(v("x"))).unwrap());
    }

    #[test]
    fn disjointness_needs_two_components() {
        let g = Configuration::new([ComponentId(1)], [], [(ComponentId(1), n("q"))].into()).unwrap();
        let f = Formula::exists(vec![v("x"), v("y")], Formula::sep([Formula::comp(v("x")), Formula::comp(v("y"))]));
        assert!(!eval_qpf(&g, &Store::new(), &f).unwrap());
        let one = Formula::exists(vec![v("x")], Formula::comp(v("x")));
        assert!(eval_qpf(&g, &Store::new(), &one).unwrap());
    }

    #[test]
    fn unbound_variable_is_error() {
        let r = eval_qpf(&Configuration::empty(), &Store::new(), &Formula::Atom(Atom::Eq(v("x"), v("y"))));
        assert!(matches!(r, Err(LogicError::UnboundVariable(_))));
    }

    #[test]
    fn existential_absent_ids_are_fresh() {
        let f = Formula::exists(vec![v("y")], Formula::sep([Formula::Atom(Atom::Neq(v("x"), v("y"))), Formula::Atom(Atom::State(v("y"), n("q")))]));
        let store: Store = [(v("x"), ComponentId(1))].into();
        assert!(eval_qpf(&Configuration::empty(), &store, &f).unwrap());
    }

    #[test]
    fn predicate_atom_rejected() {
        let r = eval_qpf(&Configuration::empty(), &Store::new(), &Formula::pred("A", vec![]));
        assert!(matches!(r, Err(LogicError::PredicateAtom(_))));
    }
}
