//! Reduction of havoc invariance to entailment, and the rule-wise class
//! equivalence between the original and the derived system.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde_json::json;

use crate::analysis::check_pcr;
use crate::automata::{sid_to_ta, ta_to_sid, TreeAutomaton};
use crate::error::ReductionError;
use crate::frontend::{render, Query, SystemFile};
use crate::logic::{Atom, Formula, PredAtom, Rule, Sid, Var};
use crate::model::{InteractionType, Name, Port};
use crate::transducer::{image, ProductState, Trace};
use crate::unionfind::UnionFind;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ReduceOptions {
    /// Skip the PCR check and take tightness for granted.
    pub assume_tight: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Tightness {
    Pcr,
    Assumed,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ReductionStats {
    pub product_states: usize,
    pub product_transitions: usize,
    pub alphabet: usize,
    pub trimmed_states: usize,
    pub trimmed_transitions: usize,
}

#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub pred: Name,
    /// Derived system, one rule per transition of the trimmed image.
    pub derived: Sid,
    /// Original and derived rules together.
    pub combined: Sid,
    /// Derived predicates of final product states.
    pub targets: Vec<Name>,
    /// Derived predicate -> originating predicate.
    pub origin: BTreeMap<Name, Name>,
    pub automaton: TreeAutomaton<ProductState>,
    pub types: Vec<InteractionType>,
    pub tightness: Tightness,
    pub stats: ReductionStats,
    traces: Vec<String>,
}

/// Name of the derived predicate for the `k`-th product state over `pred`.
pub fn derived_name(pred: &Name, k: usize) -> Name {
    Name::from(format!("{pred}_bar${k}"))
}

/// Builds the image of the language of `pred` under the havoc-step
/// transducers and turns it back into rules. Requires tightness evidence:
/// the system reachable from `pred` is PCR, or `assume_tight` is set.
/// Rules of `sid` for predicates named like a derived one are replaced.
pub fn reduce_havoc_to_entailment(sid: &Sid, pred: &Name, opts: ReduceOptions) -> Result<ReductionResult, ReductionError> {
    sid.params_of(pred)?;
    let sub = sid.restrict_to(pred);
    let tightness = if check_pcr(&sub).is_pcr() {
        Tightness::Pcr
    } else if opts.assume_tight {
        Tightness::Assumed
    } else {
        return Err(ReductionError::TightnessNotEstablished(pred.clone()));
    };
    let ta = sid_to_ta(&sub);
    let img = image(&ta, pred, &sub)?;
    let trimmed = img.automaton.trim();
    let name = |q: usize| derived_name(&trimmed.states()[q].pred, q);
    let derived = ta_to_sid(&trimmed, name, sid.behavior())?;
    let origin: BTreeMap<Name, Name> =
        trimmed.states().iter().enumerate().map(|(q, s)| (name(q), s.pred.clone())).collect();
    let targets: Vec<Name> = trimmed.finals().iter().map(|q| name(*q)).collect();
    for t in &targets {
        assert_eq!(derived.arity(t), sid.arity(pred), "targets keep the arity of the source predicate");
    }
    let kept = sid.rules().iter().filter(|r| derived.arity(&r.pred).is_none()).cloned();
    let combined = Sid::new(sid.behavior().clone(), kept.chain(derived.rules().iter().cloned()).collect())?;
    let traces = trace_lines(&ta, &img.automaton, &img.traces, &trimmed, &name);
    let stats = ReductionStats {
        product_states: img.automaton.states().len(),
        product_transitions: img.automaton.transitions().len(),
        alphabet: img.automaton.alphabet().len(),
        trimmed_states: trimmed.states().len(),
        trimmed_transitions: trimmed.transitions().len(),
    };
    Ok(ReductionResult {
        pred: pred.clone(),
        derived,
        combined,
        targets,
        origin,
        automaton: trimmed,
        types: img.types,
        tightness,
        stats,
        traces,
    })
}

fn trace_lines(
    ta: &TreeAutomaton<Name>,
    full: &TreeAutomaton<ProductState>,
    traces: &[Trace],
    trimmed: &TreeAutomaton<ProductState>,
    name: &impl Fn(usize) -> Name,
) -> Vec<String> {
    let mut out = Vec::new();
    for tr in traces {
        let t = &full.transitions()[tr.transition];
        let lookup = |q: usize| trimmed.state_id(&full.states()[q]);
        let (Some(target), Some(kids)) = (lookup(t.target), t.children.iter().map(|c| lookup(*c)).collect::<Option<Vec<_>>>()) else {
            continue;
        };
        let kids: Vec<String> = kids.into_iter().map(|q| name(q).to_string()).collect();
        out.push(format!(
            "{} <- {}({})\n    reads {}\n    {}",
            name(target),
            full.alphabet()[t.symbol],
            kids.join(", "),
            ta.alphabet()[tr.input],
            tr.witness
        ));
    }
    out
}

impl ReductionResult {
    /// `target(x1..xn) |= pred(x1..xn)` for every target.
    pub fn entailments(&self) -> Vec<(Formula, Formula)> {
        let params = self.combined.params_of(&self.pred).expect("source predicate is defined");
        let rhs = Formula::Pred(PredAtom::new(self.pred.clone(), params.clone()));
        self.targets.iter().map(|t| (Formula::Pred(PredAtom::new(t.clone(), params.clone())), rhs.clone())).collect()
    }

    /// The combined system with one entailment query per target, in the
    /// `.clsys` syntax.
    pub fn render(&self) -> String {
        let file = SystemFile {
            sid: self.combined.clone(),
            configs: Vec::new(),
            queries: self.entailments().into_iter().map(|(l, r)| Query::Entail(l, r)).collect(),
        };
        render(&file)
    }

    pub fn manifest(&self) -> serde_json::Value {
        let preds: Vec<serde_json::Value> = self
            .automaton
            .states()
            .iter()
            .enumerate()
            .map(|(q, s)| {
                let n = derived_name(&s.pred, q);
                json!({
                    "name": n.as_str(),
                    "origin": s.pred.as_str(),
                    "type": self.types[s.ty].to_string(),
                    "partition": s.eq.to_string(),
                    "target": self.automaton.finals().contains(&q),
                })
            })
            .collect();
        json!({
            "predicate": self.pred.as_str(),
            "tightness": match self.tightness { Tightness::Pcr => "pcr", Tightness::Assumed => "assumed" },
            "interaction_types": self.types.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            "targets": self.targets.iter().map(|t| t.as_str()).collect::<Vec<_>>(),
            "stats": {
                "product_states": self.stats.product_states,
                "product_transitions": self.stats.product_transitions,
                "alphabet": self.stats.alphabet,
                "trimmed_states": self.stats.trimmed_states,
                "trimmed_transitions": self.stats.trimmed_transitions,
                "derived_rules": self.derived.rules().len(),
            },
            "predicates": preds,
        })
    }

    /// One entry per surviving image transition with its witness.
    pub fn trace(&self) -> String {
        let mut out = String::new();
        for t in &self.traces {
            let _ = writeln!(out, "{t}");
        }
        out
    }
}

/// Predicate correspondence used by [`class_equiv`].
#[derive(Clone, Debug)]
pub enum PredRelation {
    /// Any two predicates of equal arity.
    SameArity,
    /// The equivalence generated by mapping each key to its value; names
    /// not in the map stand for themselves.
    Origin(BTreeMap<Name, Name>),
}

impl PredRelation {
    fn related(&self, a: &Name, b: &Name) -> bool {
        match self {
            PredRelation::SameArity => true,
            PredRelation::Origin(m) => m.get(a).unwrap_or(a) == m.get(b).unwrap_or(b),
        }
    }
}

/// Rule pairings in both directions; `forward[i]` is a rule of the second
/// system matching rule `i` of the first.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ClassReport {
    pub forward: Vec<Option<usize>>,
    pub backward: Vec<Option<usize>>,
}

impl ClassReport {
    pub fn holds(&self) -> bool {
        self.forward.iter().chain(&self.backward).all(Option::is_some)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum V {
    P(usize),
    E(usize),
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum NAtom {
    Comp(V),
    Inter(Vec<(V, Port)>),
    Neq(V, V),
}

/// A rule with state atoms dropped and equalities folded into class
/// representatives: parameters by position, other classes numbered.
struct NormRule {
    pred: Name,
    arity: usize,
    locals: usize,
    atoms: Vec<NAtom>,
    calls: Vec<(Name, Vec<V>)>,
    param_eqs: BTreeSet<(usize, usize)>,
}

fn normalize_rule(r: &Rule) -> NormRule {
    let h = r.heap();
    let mut index: BTreeMap<&Var, usize> = BTreeMap::new();
    let vars = r.params.iter().chain(&h.exists).chain(h.atoms.iter().flat_map(|a| a.vars())).chain(h.calls.iter().flat_map(|c| &c.args));
    for v in vars {
        let n = index.len();
        index.entry(v).or_insert(n);
    }
    let mut uf = UnionFind::new(index.len());
    for a in &h.atoms {
        if let Atom::Eq(x, y) = a {
            uf.union(index[x], index[y]);
        }
    }
    let mut rep: BTreeMap<usize, V> = BTreeMap::new();
    let mut param_eqs = BTreeSet::new();
    for (j, x) in r.params.iter().enumerate() {
        let root = uf.find(index[x]);
        match rep.get(&root) {
            Some(V::P(i)) => {
                param_eqs.insert((*i, j));
            }
            _ => {
                rep.insert(root, V::P(j));
            }
        }
    }
    let mut locals = 0;
    let mut val = |v: &Var| -> V {
        let root = uf.find(index[v]);
        *rep.entry(root).or_insert_with(|| {
            locals += 1;
            V::E(locals - 1)
        })
    };
    let mut atoms = Vec::new();
    for a in &h.atoms {
        match a {
            Atom::Comp(x) => atoms.push(NAtom::Comp(val(x))),
            Atom::Interaction(bs) => atoms.push(NAtom::Inter(bs.iter().map(|(x, p)| (val(x), p.clone())).collect())),
            Atom::Neq(x, y) => atoms.push(NAtom::Neq(val(x), val(y))),
            Atom::State(..) | Atom::Eq(..) => {}
        }
    }
    let calls = h.calls.iter().map(|c| (c.pred.clone(), c.args.iter().map(&mut val).collect())).collect();
    NormRule { pred: r.pred.clone(), arity: r.arity(), locals, atoms, calls, param_eqs }
}

struct Bijection {
    fwd: Vec<Option<usize>>,
    bwd: Vec<Option<usize>>,
}

impl Bijection {
    /// Extends the map with `a -> b`; returns whether a new pair was added,
    /// or `None` on conflict.
    fn bind(&mut self, a: V, b: V) -> Option<bool> {
        match (a, b) {
            (V::P(i), V::P(j)) => (i == j).then_some(false),
            (V::E(i), V::E(j)) => match (self.fwd[i], self.bwd[j]) {
                (Some(x), _) => (x == j).then_some(false),
                (None, Some(_)) => None,
                (None, None) => {
                    self.fwd[i] = Some(j);
                    self.bwd[j] = Some(i);
                    Some(true)
                }
            },
            _ => None,
        }
    }

    fn unbind(&mut self, a: V) {
        if let V::E(i) = a {
            if let Some(j) = self.fwd[i].take() {
                self.bwd[j] = None;
            }
        }
    }

    /// Binds pairwise, undoing on failure; returns the newly bound sources.
    fn bind_all(&mut self, pairs: &[(V, V)]) -> Option<Vec<V>> {
        let mut added = Vec::new();
        for (a, b) in pairs {
            match self.bind(*a, *b) {
                Some(true) => added.push(*a),
                Some(false) => {}
                None => {
                    for v in added {
                        self.unbind(v);
                    }
                    return None;
                }
            }
        }
        Some(added)
    }
}

fn atom_pairs(a: &NAtom, b: &NAtom) -> Vec<Vec<(V, V)>> {
    match (a, b) {
        (NAtom::Comp(x), NAtom::Comp(y)) => vec![vec![(*x, *y)]],
        (NAtom::Inter(xs), NAtom::Inter(ys)) if xs.len() == ys.len() && xs.iter().zip(ys).all(|((_, p), (_, q))| p == q) => {
            vec![xs.iter().zip(ys).map(|((x, _), (y, _))| (*x, *y)).collect()]
        }
        (NAtom::Neq(x1, x2), NAtom::Neq(y1, y2)) => vec![vec![(*x1, *y1), (*x2, *y2)], vec![(*x1, *y2), (*x2, *y1)]],
        _ => Vec::new(),
    }
}

fn match_atoms(k: usize, a: &[NAtom], b: &[NAtom], used: &mut [bool], bij: &mut Bijection) -> bool {
    if k == a.len() {
        return true;
    }
    for j in 0..b.len() {
        if used[j] {
            continue;
        }
        for pairs in atom_pairs(&a[k], &b[j]) {
            if let Some(added) = bij.bind_all(&pairs) {
                used[j] = true;
                if match_atoms(k + 1, a, b, used, bij) {
                    return true;
                }
                used[j] = false;
                for v in added {
                    bij.unbind(v);
                }
            }
        }
    }
    false
}

fn rules_match(r1: &NormRule, r2: &NormRule, rel: &PredRelation) -> bool {
    if r1.arity != r2.arity
        || !rel.related(&r1.pred, &r2.pred)
        || r1.locals != r2.locals
        || r1.atoms.len() != r2.atoms.len()
        || r1.calls.len() != r2.calls.len()
        || r1.param_eqs != r2.param_eqs
    {
        return false;
    }
    let mut bij = Bijection { fwd: vec![None; r1.locals], bwd: vec![None; r2.locals] };
    for ((p, xs), (q, ys)) in r1.calls.iter().zip(&r2.calls) {
        if xs.len() != ys.len() || !rel.related(p, q) {
            return false;
        }
        let pairs: Vec<(V, V)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        if bij.bind_all(&pairs).is_none() {
            return false;
        }
    }
    let mut used = vec![false; r2.atoms.len()];
    match_atoms(0, &r1.atoms, &r2.atoms, &mut used, &mut bij)
}

/// Rule-wise equivalence of two systems after dropping state atoms, with
/// predicates related by `rel` (arity is always required to agree).
/// Bodies are compared up to equalities and a bijection of the remaining
/// existential classes; predicate atoms are matched in order.
pub fn class_equiv(d1: &Sid, d2: &Sid, rel: &PredRelation) -> ClassReport {
    let n1: Vec<NormRule> = d1.rules().iter().map(normalize_rule).collect();
    let n2: Vec<NormRule> = d2.rules().iter().map(normalize_rule).collect();
    let find = |a: &[NormRule], b: &[NormRule]| -> Vec<Option<usize>> {
        a.iter().map(|r| b.iter().position(|s| rules_match(r, s, rel))).collect()
    };
    ClassReport { forward: find(&n1, &n2), backward: find(&n2, &n1) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_system;

    fn load(text: &str) -> Sid {
        parse_system(text).unwrap().sid
    }

    #[test]
    fn identity_pairing() {
        let sid = load(include_str!("../fixtures/ring.clsys"));
        let r = class_equiv(&sid, &sid, &PredRelation::Origin(BTreeMap::new()));
        assert!(r.holds());
        for (i, j) in r.forward.iter().enumerate() {
            assert_eq!(sid.rules()[i].pred, sid.rules()[j.unwrap()].pred);
        }
    }

    #[test]
    fn altered_ports_break_equivalence() {
        let sid = load(include_str!("../fixtures/tll_pcr.clsys"));
        let text = include_str!("../fixtures/tll_pcr.clsys").replace("<r1.in, l2.out>", "<r1.out, l2.in>");
        let other = load(&text);
        assert!(!class_equiv(&sid, &other, &PredRelation::SameArity).holds());
    }

    #[test]
    fn states_and_equalities_are_ignored() {
        let a = load("behavior { ports p; states q, r; } sid { A(x) <- exists y . comp(x : q) * <x.p, y.p> * A(y); A(x) <- comp(x); }");
        let b = load("behavior { ports p; states q, r; } sid { B(x) <- exists u, v . u = v * comp(x : r) * <x.p, u.p> * B(v); B(x) <- comp(x : q); }");
        let rel = PredRelation::Origin([(Name::new("B"), Name::new("A"))].into_iter().collect());
        let rep = class_equiv(&a, &b, &rel);
        assert!(rep.holds(), "{rep:?}");
        assert!(!class_equiv(&a, &b, &PredRelation::Origin(BTreeMap::new())).holds());
    }

    #[test]
    fn gate_without_evidence() {
        let sid = load(include_str!("../fixtures/ring.clsys"));
        let err = reduce_havoc_to_entailment(&sid, &Name::new("Ring_1_1"), ReduceOptions::default()).unwrap_err();
        assert_eq!(err, ReductionError::TightnessNotEstablished(Name::new("Ring_1_1")));
    }

    #[test]
    fn no_interactions_no_targets() {
        let sid = load(include_str!("../fixtures/noint.clsys"));
        let r = reduce_havoc_to_entailment(&sid, &Name::new("Pair"), ReduceOptions { assume_tight: true }).unwrap();
        assert!(r.targets.is_empty());
        assert!(r.derived.is_empty());
    }
}
