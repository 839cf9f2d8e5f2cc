use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::var::Var;
use crate::model::{Name, Port, State};

/// Predicate-free, quantifier-free atom.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Atom {
    Comp(Var),
    Interaction(Vec<(Var, Port)>),
    State(Var, State),
    Eq(Var, Var),
    Neq(Var, Var),
}

impl Atom {
    pub fn vars(&self) -> Vec<&Var> {
        match self {
            Atom::Comp(x) | Atom::State(x, _) => vec![x],
            Atom::Interaction(bs) => bs.iter().map(|(x, _)| x).collect(),
            Atom::Eq(x, y) | Atom::Neq(x, y) => vec![x, y],
        }
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> Atom {
        match self {
            Atom::Comp(x) => Atom::Comp(f(x)),
            Atom::Interaction(bs) => Atom::Interaction(bs.iter().map(|(x, p)| (f(x), p.clone())).collect()),
            Atom::State(x, q) => Atom::State(f(x), q.clone()),
            Atom::Eq(x, y) => Atom::Eq(f(x), f(y)),
            Atom::Neq(x, y) => Atom::Neq(f(x), f(y)),
        }
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self, Atom::Comp(_) | Atom::Interaction(_))
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PredAtom {
    pub pred: Name,
    pub args: Vec<Var>,
}

impl PredAtom {
    pub fn new(pred: impl Into<Name>, args: Vec<Var>) -> Self {
        PredAtom { pred: pred.into(), args }
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> PredAtom {
        PredAtom { pred: self.pred.clone(), args: self.args.iter().map(f).collect() }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Formula {
    Emp,
    Atom(Atom),
    Pred(PredAtom),
    Sep(Vec<Formula>),
    Exists(Vec<Var>, Box<Formula>),
}

impl Formula {
    pub fn comp(x: Var) -> Formula {
        Formula::Atom(Atom::Comp(x))
    }

    /// `comp(x) * state(x : q)`.
    pub fn comp_in(x: Var, q: State) -> Formula {
        Formula::Sep(vec![Formula::Atom(Atom::Comp(x.clone())), Formula::Atom(Atom::State(x, q))])
    }

    pub fn pred(p: impl Into<Name>, args: Vec<Var>) -> Formula {
        Formula::Pred(PredAtom::new(p, args))
    }

    /// Flattening separating conjunction; a single operand is returned as is.
    pub fn sep(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::Sep(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::Emp,
            1 => out.pop().expect("one element"),
            _ => Formula::Sep(out),
        }
    }

    pub fn exists(vars: Vec<Var>, body: Formula) -> Formula {
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out, &BTreeSet::new());
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<Var>, bound: &BTreeSet<Var>) {
        match self {
            Formula::Emp => {}
            Formula::Atom(a) => out.extend(a.vars().into_iter().filter(|v| !bound.contains(*v)).cloned()),
            Formula::Pred(p) => out.extend(p.args.iter().filter(|v| !bound.contains(*v)).cloned()),
            Formula::Sep(fs) => fs.iter().for_each(|f| f.collect_free(out, bound)),
            Formula::Exists(vs, b) => {
                let mut inner = bound.clone();
                inner.extend(vs.iter().cloned());
                b.collect_free(out, &inner);
            }
        }
    }

    /// Every variable occurring, bound or free.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            out.insert(v.clone());
        });
        out
    }

    fn visit_vars(&self, f: &mut impl FnMut(&Var)) {
        match self {
            Formula::Emp => {}
            Formula::Atom(a) => a.vars().into_iter().for_each(f),
            Formula::Pred(p) => p.args.iter().for_each(f),
            Formula::Sep(fs) => fs.iter().for_each(|g| g.visit_vars(f)),
            Formula::Exists(vs, b) => {
                vs.iter().for_each(&mut *f);
                b.visit_vars(f);
            }
        }
    }

    pub fn pred_atoms(&self) -> Vec<&PredAtom> {
        match self {
            Formula::Pred(p) => vec![p],
            Formula::Sep(fs) => fs.iter().flat_map(Formula::pred_atoms).collect(),
            Formula::Exists(_, b) => b.pred_atoms(),
            _ => Vec::new(),
        }
    }

    pub fn is_predicate_free(&self) -> bool {
        self.pred_atoms().is_empty()
    }

    /// Simultaneous capture-avoiding substitution of free occurrences.
    pub fn substitute(&self, map: &BTreeMap<Var, Var>) -> Formula {
        let look = |v: &Var| map.get(v).cloned().unwrap_or_else(|| v.clone());
        match self {
            Formula::Emp => Formula::Emp,
            Formula::Atom(a) => Formula::Atom(a.rename(&look)),
            Formula::Pred(p) => Formula::Pred(p.rename(&look)),
            Formula::Sep(fs) => Formula::Sep(fs.iter().map(|f| f.substitute(map)).collect()),
            Formula::Exists(vs, body) => {
                let fvb = body.free_vars();
                let mut inner: BTreeMap<Var, Var> = map
                    .iter()
                    .filter(|(k, _)| !vs.contains(k) && fvb.contains(*k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                let images: BTreeSet<Var> = inner.values().cloned().collect();
                let mut avoid = body.all_vars();
                avoid.extend(images.iter().cloned());
                avoid.extend(vs.iter().cloned());
                let mut new_vs = Vec::with_capacity(vs.len());
                for v in vs {
                    if images.contains(v) {
                        let w = v.fresh(&avoid);
                        avoid.insert(w.clone());
                        inner.insert(v.clone(), w.clone());
                        new_vs.push(w);
                    } else {
                        new_vs.push(v.clone());
                    }
                }
                Formula::Exists(new_vs, Box::new(body.substitute(&inner)))
            }
        }
    }

    /// Prenex normal form `exists ys . atoms * calls`, with bound variables
    /// renamed apart from free ones and from each other.
    pub fn normalize(&self) -> Heap {
        let free = self.free_vars();
        let mut avoid = self.all_vars();
        let mut seen_bound: BTreeSet<Var> = BTreeSet::new();
        let mut heap = Heap::default();
        self.normalize_into(&mut heap, &BTreeMap::new(), &free, &mut avoid, &mut seen_bound);
        heap
    }

    fn normalize_into(
        &self,
        heap: &mut Heap,
        env: &BTreeMap<Var, Var>,
        free: &BTreeSet<Var>,
        avoid: &mut BTreeSet<Var>,
        seen_bound: &mut BTreeSet<Var>,
    ) {
        let look = |v: &Var| env.get(v).cloned().unwrap_or_else(|| v.clone());
        match self {
            Formula::Emp => {}
            Formula::Atom(a) => heap.atoms.push(a.rename(&look)),
            Formula::Pred(p) => heap.calls.push(p.rename(&look)),
            Formula::Sep(fs) => fs.iter().for_each(|f| f.normalize_into(heap, env, free, avoid, seen_bound)),
            Formula::Exists(vs, body) => {
                let mut inner = env.clone();
                for v in vs {
                    let w = if free.contains(v) || seen_bound.contains(v) {
                        let w = v.fresh(avoid);
                        avoid.insert(w.clone());
                        w
                    } else {
                        v.clone()
                    };
                    seen_bound.insert(w.clone());
                    heap.exists.push(w.clone());
                    inner.insert(v.clone(), w);
                }
                body.normalize_into(heap, &inner, free, avoid, seen_bound);
            }
        }
    }
}

/// Prenex form `exists exists . atoms * calls`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Heap {
    pub exists: Vec<Var>,
    pub atoms: Vec<Atom>,
    pub calls: Vec<PredAtom>,
}

impl Heap {
    pub fn to_formula(&self) -> Formula {
        let parts = self
            .atoms
            .iter()
            .cloned()
            .map(Formula::Atom)
            .chain(self.calls.iter().cloned().map(Formula::Pred));
        Formula::exists(self.exists.clone(), Formula::sep(parts))
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> Heap {
        Heap {
            exists: self.exists.iter().map(f).collect(),
            atoms: self.atoms.iter().map(|a| a.rename(f)).collect(),
            calls: self.calls.iter().map(|c| c.rename(f)).collect(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out: BTreeSet<Var> = self.atoms.iter().flat_map(|a| a.vars()).cloned().collect();
        out.extend(self.calls.iter().flat_map(|c| c.args.iter().cloned()));
        for y in &self.exists {
            out.remove(y);
        }
        out
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Comp(x) => write!(f, "comp({x})"),
            Atom::State(x, q) => write!(f, "state({x} : {q})"),
            Atom::Interaction(bs) => {
                let parts: Vec<String> = bs.iter().map(|(x, p)| format!("{x}.{p}")).collect();
                write!(f, "<{}>", parts.join(", "))
            }
            Atom::Eq(x, y) => write!(f, "{x} = {y}"),
            Atom::Neq(x, y) => write!(f, "{x} != {y}"),
        }
    }
}

impl fmt::Display for PredAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(Var::to_string).collect();
        write!(f, "{}({})", self.pred, args.join(", "))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Emp => f.write_str("emp"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Pred(p) => write!(f, "{p}"),
            Formula::Exists(vs, b) => {
                let names: Vec<String> = vs.iter().map(Var::to_string).collect();
                write!(f, "exists {} . {b}", names.join(", "))
            }
            Formula::Sep(fs) if fs.is_empty() => f.write_str("emp"),
            Formula::Sep(fs) => {
                let mut parts = Vec::new();
                let mut i = 0;
                while i < fs.len() {
                    if let (Formula::Atom(Atom::Comp(x)), Some(Formula::Atom(Atom::State(y, q)))) = (&fs[i], fs.get(i + 1)) {
                        if x == y {
                            parts.push(format!("comp({x} : {q})"));
                            i += 2;
                            continue;
                        }
                    }
                    parts.push(match &fs[i] {
                        g @ (Formula::Exists(..) | Formula::Sep(_)) => format!("({g})"),
                        g => g.to_string(),
                    });
                    i += 1;
                }
                f.write_str(&parts.join(" * "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Var {
        Var::named(s)
    }

    fn eq(a: &str, b: &str) -> Formula {
        Formula::Atom(Atom::Eq(v(a), v(b)))
    }

    #[test]
    fn substitute_free_occurrence() {
        let m = [(v("x"), v("z"))].into();
        assert_eq!(eq("x", "y").substitute(&m), eq("z", "y"));
    }

    #[test]
    fn substitute_skips_bound_occurrence() {
        let f = Formula::exists(vec![v("x")], eq("x", "y"));
        let m = [(v("x"), v("z"))].into();
        assert_eq!(f.substitute(&m), f);
    }

    #[test]
    fn substitute_is_simultaneous() {
        let f = Formula::pred("Chain", vec![v("x"), v("y")]);
        let m = [(v("x"), v("u")), (v("y"), v("x"))].into();
        assert_eq!(f.substitute(&m), Formula::pred("Chain", vec![v("u"), v("x")]));
    }

    #[test]
    fn substitute_avoids_capture() {
        let f = Formula::exists(vec![v("x")], eq("x", "y"));
        let m = [(v("y"), v("x"))].into();
        let g = f.substitute(&m);
        let Formula::Exists(vs, body) = &g else { panic!("shape") };
        assert_ne!(vs[0], v("x"));
        assert_eq!(**body, Formula::Atom(Atom::Eq(vs[0].clone(), v("x"))));
        assert_eq!(g.free_vars(), [v("x")].into());
    }

    #[test]
    fn normalize_renames_clashing_binders() {
        let f = Formula::sep([
            Formula::exists(vec![v("z")], Formula::comp(v("z"))),
            Formula::exists(vec![v("z")], eq("z", "x")),
            Formula::comp(v("z")),
        ]);
        let h = f.normalize();
        assert_eq!(h.exists.len(), 2);
        assert_ne!(h.exists[0], h.exists[1]);
        assert!(!h.exists.contains(&v("z")));
        assert_eq!(h.free_vars(), [v("x"), v("z")].into());
    }

    #[test]
    fn display_uses_shorthand() {
        let f = Formula::sep([Formula::comp_in(v("x"), Name::new("H")), eq("x", "y")]);
        assert_eq!(f.to_string(), "comp(x : H) * x = y");
    }
}
