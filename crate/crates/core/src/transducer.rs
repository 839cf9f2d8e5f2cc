//! The havoc-step tree transducer for one interaction type, and the image
//! of an automaton language under the union of these transducers.
//!
//! A transducer state is a partition over the parameters `$in_i` of the
//! current node and the markers `$b_i` / `$e_i`: `$b_i` records the
//! component whose state atom was rewritten for port `i`, `$e_i` the
//! variable at position `i` of the interaction atom that fired.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::automata::{Symbol, TreeAutomaton};
use crate::error::TransducerError;
use crate::logic::{Atom, EqFormula, Sid, Var};
use crate::model::{Behavior, InteractionType, Name, State};

/// All port sequences of interaction atoms in the system, sorted.
pub fn interaction_types(sid: &Sid) -> Vec<InteractionType> {
    let mut out = BTreeSet::new();
    for i in 0..sid.rules().len() {
        for a in &sid.heap(i).atoms {
            if let Atom::Interaction(bs) = a {
                out.insert(InteractionType::new(bs.iter().map(|(_, p)| p.clone()).collect()).expect("nonempty atom"));
            }
        }
    }
    out.into_iter().collect()
}

/// One rewritten component: port position, variable, old state (absent
/// for a bare `comp`) and new state.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rewrite {
    pub position: u32,
    pub var: Var,
    pub from: Option<State>,
    pub to: State,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Witness {
    pub rewrites: Vec<Rewrite>,
    /// Index, within the symbol atoms, of the interaction atom that fires.
    pub fired: Option<usize>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rs: Vec<String> = self
            .rewrites
            .iter()
            .map(|r| match &r.from {
                Some(q) => format!("{}:{} {q}->{}", r.position, r.var, r.to),
                None => format!("{}:{} *->{}", r.position, r.var, r.to),
            })
            .collect();
        write!(f, "I=[{}]", rs.join(", "))?;
        match self.fired {
            Some(k) => write!(f, " J=atom#{k}"),
            None => write!(f, " J=-"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StepOutput {
    pub symbol: Symbol,
    pub state: EqFormula,
    pub witness: Witness,
}

/// Whether a partition is a valid transducer state: no two distinct
/// begin/end markers are entailed equal, apart from `$b_i = $e_i`.
pub fn is_valid_state(eq: &EqFormula, n: usize) -> bool {
    for i in 1..=n as u32 {
        for j in 1..=n as u32 {
            if i == j {
                continue;
            }
            let (bi, bj, ei, ej) = (Var::Begin(i), Var::Begin(j), Var::End(i), Var::End(j));
            if eq.entails(&bi, &bj) || eq.entails(&ei, &ej) || eq.entails(&bi, &ej) {
                return false;
            }
        }
    }
    true
}

/// Final states entail `$b_i = $e_i` for every position.
pub fn is_final_state(eq: &EqFormula, n: usize) -> bool {
    (1..=n as u32).all(|i| eq.contains(&Var::Begin(i)) && eq.entails(&Var::Begin(i), &Var::End(i)))
}

fn markers(eq: &EqFormula, begin: bool) -> BTreeSet<u32> {
    eq.vars()
        .filter_map(|v| match (v, begin) {
            (Var::Begin(i), true) | (Var::End(i), false) => Some(*i),
            _ => None,
        })
        .collect()
}

struct Candidate {
    var: Var,
    from: Option<State>,
}

/// Every transition of the transducer for `ty` reading `alpha` over the
/// child states `children`, with one witness per distinct output.
pub fn transducer_step(
    ty: &InteractionType,
    alpha: &Symbol,
    children: &[EqFormula],
    behavior: &Behavior,
) -> Result<Vec<StepOutput>, TransducerError> {
    if alpha.rank() != children.len() {
        return Err(TransducerError::ArityMismatch { rank: alpha.rank(), states: children.len() });
    }
    let n = ty.len();
    let mut used = BTreeSet::new();
    for c in children {
        let b = markers(c, true);
        if !used.is_disjoint(&b) {
            return Ok(Vec::new());
        }
        used.extend(b);
    }
    let ended = children.iter().filter(|c| !markers(c, false).is_empty()).count();
    if ended > 1 {
        return Ok(Vec::new());
    }

    let mut cands = Vec::new();
    for a in alpha.atoms() {
        if let Atom::Comp(x) = a {
            let qs: BTreeSet<&State> = alpha
                .atoms()
                .iter()
                .filter_map(|b| match b {
                    Atom::State(y, q) if y == x => Some(q),
                    _ => None,
                })
                .collect();
            if qs.len() <= 1 && !cands.iter().any(|c: &Candidate| &c.var == x) {
                cands.push(Candidate { var: x.clone(), from: qs.into_iter().next().cloned() });
            }
        }
    }
    let fire: Vec<Option<usize>> = std::iter::once(None)
        .chain(alpha.atoms().iter().enumerate().filter_map(|(k, a)| match a {
            Atom::Interaction(bs) if ended == 0 && bs.len() == n && bs.iter().zip(ty.ports()).all(|((_, p), t)| p == t) => {
                Some(Some(k))
            }
            _ => None,
        }))
        .collect();

    // Conjunction of the renamed child states, the symbol equalities and
    // the parameters of this node (kept even when unconstrained).
    let mut base = EqFormula::from_equalities((1..=alpha.arities()[0] as u32).map(Var::Param), Vec::new());
    for (l, c) in children.iter().enumerate() {
        let l = l as u32 + 1;
        base = base.conjoin(&c.rename(|v| match v {
            Var::Param(j) => Var::ChildParam(l, *j),
            other => other.clone(),
        }));
    }
    let eqs: Vec<(Var, Var)> = alpha
        .atoms()
        .iter()
        .filter_map(|a| match a {
            Atom::Eq(x, y) => Some((x.clone(), y.clone())),
            _ => None,
        })
        .collect();
    base = base.conjoin(&EqFormula::from_equalities(Vec::new(), eqs));

    let free: Vec<u32> = (1..=n as u32).filter(|i| !used.contains(i)).collect();
    let mut outputs: Vec<StepOutput> = Vec::new();
    let mut seen: HashSet<(Symbol, EqFormula)> = HashSet::new();
    let mut choice: Vec<Rewrite> = Vec::new();
    let mut taken = vec![false; cands.len()];
    let mut emit = |rewrites: &[Rewrite]| {
        for fired in &fire {
            let mut extra: Vec<(Var, Var)> = rewrites.iter().map(|r| (Var::Begin(r.position), r.var.clone())).collect();
            if let Some(k) = fired {
                if let Atom::Interaction(bs) = &alpha.atoms()[*k] {
                    extra.extend(bs.iter().enumerate().map(|(m, (z, _))| (Var::End(m as u32 + 1), z.clone())));
                }
            }
            let conj = base.conjoin(&EqFormula::from_equalities(Vec::new(), extra));
            let state = conj.restrict(|v| matches!(v, Var::Param(_) | Var::Begin(_) | Var::End(_)));
            if !is_valid_state(&state, n) {
                continue;
            }
            let symbol = rewrite(alpha, rewrites);
            if seen.insert((symbol.clone(), state.clone())) {
                outputs.push(StepOutput { symbol, state, witness: Witness { rewrites: rewrites.to_vec(), fired: *fired } });
            }
        }
    };
    choose(0, &free, ty, &cands, behavior, &mut taken, &mut choice, &mut emit);
    Ok(outputs)
}

/// Enumerates subsets of `free` positions together with distinct
/// candidates and behavior moves for each chosen position.
#[allow(clippy::too_many_arguments)]
fn choose(
    k: usize,
    free: &[u32],
    ty: &InteractionType,
    cands: &[Candidate],
    behavior: &Behavior,
    taken: &mut [bool],
    choice: &mut Vec<Rewrite>,
    emit: &mut impl FnMut(&[Rewrite]),
) {
    if k == free.len() {
        emit(choice);
        return;
    }
    choose(k + 1, free, ty, cands, behavior, taken, choice, emit);
    let i = free[k];
    let port = &ty.ports()[i as usize - 1];
    for (ci, c) in cands.iter().enumerate() {
        if taken[ci] {
            continue;
        }
        let targets: BTreeSet<State> = match &c.from {
            Some(q) => behavior.post(q, port).into_iter().collect(),
            None => behavior.moves(port).into_iter().map(|(_, r)| r).collect(),
        };
        taken[ci] = true;
        for to in targets {
            choice.push(Rewrite { position: i, var: c.var.clone(), from: c.from.clone(), to });
            choose(k + 1, free, ty, cands, behavior, taken, choice, emit);
            choice.pop();
        }
        taken[ci] = false;
    }
}

fn rewrite(alpha: &Symbol, rewrites: &[Rewrite]) -> Symbol {
    let mut atoms = Vec::with_capacity(alpha.atoms().len() + rewrites.len());
    for a in alpha.atoms() {
        match a {
            Atom::State(x, _) => match rewrites.iter().find(|r| &r.var == x) {
                Some(r) => atoms.push(Atom::State(x.clone(), r.to.clone())),
                None => atoms.push(a.clone()),
            },
            Atom::Comp(x) => {
                atoms.push(a.clone());
                if let Some(r) = rewrites.iter().find(|r| &r.var == x && r.from.is_none()) {
                    atoms.push(Atom::State(x.clone(), r.to.clone()));
                }
            }
            _ => atoms.push(a.clone()),
        }
    }
    alpha.with_atoms(atoms)
}

/// State of the image automaton: an input state paired with a transducer
/// state of the `ty`-th interaction type.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ProductState {
    pub pred: Name,
    pub ty: usize,
    pub eq: EqFormula,
}

impl fmt::Display for ProductState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, t{}, {})", self.pred, self.ty, self.eq)
    }
}

/// Witness of one image transition.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Index into the image automaton's transitions.
    pub transition: usize,
    /// Input symbol index in the source automaton.
    pub input: usize,
    pub witness: Witness,
}

#[derive(Clone, Debug)]
pub struct Image {
    pub automaton: TreeAutomaton<ProductState>,
    pub types: Vec<InteractionType>,
    pub traces: Vec<Trace>,
}

/// Product of `a` with the transducer of every interaction type of `sid`,
/// explored bottom-up from reachable pairs only. Final states pair `root`
/// with a final transducer state.
pub fn image(a: &TreeAutomaton<Name>, root: &Name, sid: &Sid) -> Result<Image, TransducerError> {
    let types = interaction_types(sid);
    let mut out: TreeAutomaton<ProductState> = TreeAutomaton::new();
    let mut traces = Vec::new();
    for (k, ty) in types.iter().enumerate() {
        let mut reached: Vec<Vec<usize>> = vec![Vec::new(); a.states().len()];
        let mut processed: HashSet<(usize, Vec<usize>)> = HashSet::new();
        loop {
            let mut changed = false;
            for (ti, t) in a.transitions().iter().enumerate() {
                let pools: Vec<Vec<usize>> = t.children.iter().map(|c| reached[*c].clone()).collect();
                for combo in cartesian(&pools) {
                    if !processed.insert((ti, combo.clone())) {
                        continue;
                    }
                    let kids: Vec<EqFormula> = combo.iter().map(|s| out.states()[*s].eq.clone()).collect();
                    for o in transducer_step(ty, &a.alphabet()[t.symbol], &kids, sid.behavior())? {
                        let ps = ProductState { pred: a.states()[t.target].clone(), ty: k, eq: o.state };
                        let known = out.state_id(&ps).is_some();
                        let target = out.add_state(ps);
                        if !known {
                            reached[t.target].push(target);
                            changed = true;
                        }
                        let sym = out.add_symbol(o.symbol);
                        if out.add_transition(sym, combo.clone(), target) {
                            traces.push(Trace { transition: out.transitions().len() - 1, input: t.symbol, witness: o.witness });
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
    let finals: Vec<usize> = out
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| &s.pred == root && is_final_state(&s.eq, types[s.ty].len()))
        .map(|(i, _)| i)
        .collect();
    for q in finals {
        out.set_final(q);
    }
    Ok(Image { automaton: out, types, traces })
}

fn cartesian(pools: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut acc = vec![Vec::new()];
    for pool in pools {
        acc = acc
            .into_iter()
            .flat_map(|p| {
                pool.iter().map(move |x| {
                    let mut v = p.clone();
                    v.push(*x);
                    v
                })
            })
            .collect();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::sid_to_ta;
    use crate::frontend::parse_system;

    fn ty(ports: &[&str]) -> InteractionType {
        InteractionType::new(ports.iter().map(|p| Name::new(p)).collect()).unwrap()
    }

    fn tll() -> Sid {
        parse_system(include_str!("../fixtures/tll.clsys")).unwrap().sid
    }

    #[test]
    fn types_of_fixtures() {
        let ring = parse_system(include_str!("../fixtures/ring.clsys")).unwrap().sid;
        assert_eq!(interaction_types(&ring), vec![ty(&["out", "in"])]);
        let pcr = parse_system(include_str!("../fixtures/tll_pcr.clsys")).unwrap().sid;
        assert_eq!(interaction_types(&pcr), vec![ty(&["in", "out"]), ty(&["req", "reply", "reply"])]);
        assert_eq!(interaction_types(&tll()).len(), 3);
        let noint = parse_system(include_str!("../fixtures/noint.clsys")).unwrap().sid;
        assert!(interaction_types(&noint).is_empty());
    }

    #[test]
    fn leaf_rewrite_q1_out() {
        let sid = tll();
        let a = sid_to_ta(&sid);
        let g1 = a.alphabet().iter().find(|s| s.to_string() == "<comp($in1 : q1), 3>").unwrap();
        let outs = transducer_step(&ty(&["out", "in"]), g1, &[], sid.behavior()).unwrap();
        let hit = outs
            .iter()
            .find(|o| o.witness.rewrites.len() == 1 && o.witness.rewrites[0].position == 1)
            .expect("rewrite at the out position");
        assert_eq!(hit.symbol.to_string(), "<comp($in1 : q0), 3>");
        assert!(hit.state.entails(&Var::Begin(1), &Var::Param(1)));
        assert!(!hit.state.contains(&Var::End(1)));
    }

    #[test]
    fn bookkeeping_step_keeps_symbol() {
        let sid = tll();
        let a = sid_to_ta(&sid);
        let g0 = &a.alphabet()[2];
        let outs = transducer_step(&ty(&["out", "in"]), g0, &[], sid.behavior()).unwrap();
        let idle = outs.iter().find(|o| o.witness.rewrites.is_empty()).unwrap();
        assert_eq!(&idle.symbol, &**g0);
        let params: Vec<Var> = (1..=3).map(Var::Param).collect();
        assert_eq!(idle.state, EqFormula::from_equalities(params, Vec::new()));
    }

    #[test]
    fn begin_markers_are_disjoint() {
        let sid = tll();
        let a = sid_to_ta(&sid);
        let beta = &a.alphabet()[1];
        let child = EqFormula::from_equalities(vec![Var::Param(1), Var::Begin(1)], vec![(Var::Param(1), Var::Begin(1))]);
        let outs = transducer_step(&ty(&["out", "in"]), beta, &[child.clone(), EqFormula::new()], sid.behavior()).unwrap();
        assert!(outs.iter().all(|o| o.witness.rewrites.iter().all(|r| r.position != 1)));
        let both = transducer_step(&ty(&["out", "in"]), beta, &[child.clone(), child], sid.behavior()).unwrap();
        assert!(both.is_empty());
        assert_eq!(
            transducer_step(&ty(&["out", "in"]), beta, &[], sid.behavior()).unwrap_err(),
            TransducerError::ArityMismatch { rank: 2, states: 0 }
        );
    }

    #[test]
    fn states_are_valid() {
        let sid = parse_system(include_str!("../fixtures/ring.clsys")).unwrap().sid.restrict_to(&Name::new("Ring_1_1"));
        let img = image(&sid_to_ta(&sid), &Name::new("Ring_1_1"), &sid).unwrap();
        assert!(!img.automaton.finals().is_empty());
        for s in img.automaton.states() {
            assert!(is_valid_state(&s.eq, img.types[s.ty].len()), "{s}");
        }
    }

    #[test]
    fn no_interactions_no_image() {
        let sid = parse_system(include_str!("../fixtures/noint.clsys")).unwrap().sid;
        let img = image(&sid_to_ta(&sid), &Name::new("Pair"), &sid).unwrap();
        assert!(img.automaton.states().is_empty());
    }
}
