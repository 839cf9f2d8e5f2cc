//! Bounded ground truth: model enumeration, direct havoc-invariance
//! checking, bounded entailment and cross-validation of the reduction.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::error::LogicError;
use crate::logic::{check_call, eval_bounded, for_each_unfolding, Atom, Bounded, Formula, Heap, PredAtom, Sid, Store, Var};
use crate::model::{canonical_form, ComponentId, Configuration, Interaction, Name, Port, State};
use crate::reduction::ReductionResult;
use crate::unionfind::UnionFind;

/// A configuration together with a store for the free variables.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Model {
    pub config: Configuration,
    pub store: Store,
}

/// Canonical representative of a model modulo component renaming.
pub type ModelKey = (Configuration, Vec<(Var, ComponentId)>);

impl Model {
    pub fn key(&self) -> ModelKey {
        let labels: Vec<(Var, ComponentId)> = self.store.iter().map(|(v, c)| (v.clone(), *c)).collect();
        canonical_form(&self.config, &labels)
    }

    pub fn canonical(&self) -> Model {
        let (config, labels) = self.key();
        Model { config, store: labels.into_iter().collect() }
    }
}

/// Models up to renaming, in canonical order: fewest components first, then
/// lexicographic. `provenance[i]` is the index of the first complete
/// unfolding that produced `models[i]`.
#[derive(Clone, Debug, Default)]
pub struct ModelSet {
    models: Vec<Model>,
    provenance: Vec<usize>,
    unfoldings: usize,
}

impl ModelSet {
    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    /// Number of complete unfoldings examined.
    pub fn unfoldings(&self) -> usize {
        self.unfoldings
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn keys(&self) -> BTreeSet<ModelKey> {
        self.models.iter().map(|m| (m.config.clone(), m.store.iter().map(|(v, c)| (v.clone(), *c)).collect())).collect()
    }

    fn from_keyed(found: BTreeMap<ModelKey, usize>, unfoldings: usize) -> Self {
        let mut entries: Vec<(ModelKey, usize)> = found.into_iter().collect();
        entries.sort_by(|(a, _), (b, _)| (a.0.components().len(), a).cmp(&(b.0.components().len(), b)));
        let (models, provenance) = entries
            .into_iter()
            .map(|((config, labels), p)| (Model { config, store: labels.into_iter().collect() }, p))
            .unzip();
        ModelSet { models, provenance, unfoldings }
    }
}

/// Complete unfoldings of `f` of height at most `depth`, in prenex form.
pub fn complete_unfoldings(sid: &Sid, f: &Formula, depth: usize) -> Result<Vec<Heap>, LogicError> {
    let start = f.normalize();
    for c in &start.calls {
        check_call(sid, c)?;
    }
    let mut out = Vec::new();
    let _ = for_each_unfolding(sid, &start, depth, false, &mut |_| false, &mut |h| {
        out.push(h.clone());
        ControlFlow::Continue(())
    });
    Ok(out)
}

/// All models of `f` arising from complete unfoldings of height at most
/// `depth`, canonical up to renaming of component ids.
pub fn enumerate_models(sid: &Sid, f: &Formula, depth: usize) -> Result<ModelSet, LogicError> {
    let states: Vec<State> = sid.behavior().states().iter().cloned().collect();
    enumerate_with(sid, f, depth, &states)
}

/// Like [`enumerate_models`], but components not constrained by a state
/// atom all get the first declared state. Enough for state-independent
/// measures such as the degree or tightness.
pub fn enumerate_shapes(sid: &Sid, f: &Formula, depth: usize) -> Result<ModelSet, LogicError> {
    let states: Vec<State> = sid.behavior().states().iter().take(1).cloned().collect();
    enumerate_with(sid, f, depth, &states)
}

fn enumerate_with(sid: &Sid, f: &Formula, depth: usize, states: &[State]) -> Result<ModelSet, LogicError> {
    let free: Vec<Var> = f.free_vars().into_iter().collect();
    let heaps = complete_unfoldings(sid, f, depth)?;
    let per_heap: Vec<Vec<ModelKey>> = heaps
        .par_iter()
        .map(|h| {
            let mut keys: Vec<ModelKey> = heap_models(h, &free, states)
                .into_iter()
                .map(|(config, store)| Model { config, store }.key())
                .collect();
            keys.sort();
            keys.dedup();
            keys
        })
        .collect();
    let mut found: BTreeMap<ModelKey, usize> = BTreeMap::new();
    for (i, keys) in per_heap.into_iter().enumerate() {
        for k in keys {
            found.entry(k).or_insert(i);
        }
    }
    Ok(ModelSet::from_keyed(found, heaps.len()))
}

/// Models of `A(x1, .., xn)`.
pub fn enumerate_pred_models(sid: &Sid, pred: &Name, depth: usize) -> Result<ModelSet, LogicError> {
    enumerate_models(sid, &pred_formula(sid, pred)?, depth)
}

/// `A(x1, .., xn)` with the canonical parameter names.
pub fn pred_formula(sid: &Sid, pred: &Name) -> Result<Formula, LogicError> {
    Ok(Formula::Pred(PredAtom::new(pred.clone(), sid.params_of(pred)?)))
}

struct Block {
    comp: bool,
    state: Option<State>,
    members: Vec<usize>,
}

/// Every model of `exists ys . atoms` over the free variables `free`, one
/// component id per block of a variable partition.
fn heap_models(h: &Heap, free: &[Var], states: &[State]) -> Vec<(Configuration, Store)> {
    let mut index: BTreeMap<&Var, usize> = BTreeMap::new();
    for v in free.iter().chain(h.atoms.iter().flat_map(|a| a.vars())) {
        let n = index.len();
        index.entry(v).or_insert(n);
    }
    let mut uf = UnionFind::new(index.len());
    for a in &h.atoms {
        if let Atom::Eq(x, y) = a {
            uf.union(index[x], index[y]);
        }
    }
    let (class_of, n) = uf.classes();
    let cls = |v: &Var| class_of[index[v]];

    let mut comp = vec![false; n];
    let mut relevant = vec![false; n];
    let mut state: Vec<Option<State>> = vec![None; n];
    let mut conflict = vec![vec![false; n]; n];
    let mut inters: Vec<(Vec<usize>, Vec<Port>)> = Vec::new();
    for v in free {
        relevant[cls(v)] = true;
    }
    for a in &h.atoms {
        match a {
            Atom::Comp(x) => {
                let k = cls(x);
                if comp[k] {
                    return Vec::new();
                }
                comp[k] = true;
                relevant[k] = true;
            }
            Atom::Interaction(bs) => {
                let ks: Vec<usize> = bs.iter().map(|(x, _)| cls(x)).collect();
                for (i, a) in ks.iter().enumerate() {
                    relevant[*a] = true;
                    for b in &ks[..i] {
                        if a == b {
                            return Vec::new();
                        }
                        conflict[*a][*b] = true;
                        conflict[*b][*a] = true;
                    }
                }
                inters.push((ks, bs.iter().map(|(_, p)| p.clone()).collect()));
            }
            Atom::State(x, q) => {
                let k = cls(x);
                match &state[k] {
                    Some(r) if r != q => return Vec::new(),
                    _ => state[k] = Some(q.clone()),
                }
            }
            Atom::Neq(x, y) => {
                let (a, b) = (cls(x), cls(y));
                if a == b {
                    return Vec::new();
                }
                conflict[a][b] = true;
                conflict[b][a] = true;
            }
            Atom::Eq(..) => {}
        }
    }
    let order: Vec<usize> = (0..n).filter(|k| relevant[*k]).collect();
    let mut block_of = vec![usize::MAX; n];
    let mut blocks: Vec<Block> = Vec::new();
    let mut out = Vec::new();
    let mut emit = |block_of: &[usize], blocks: &[Block]| {
        let mut tuples = BTreeSet::new();
        let mut interactions = Vec::new();
        for (ks, ports) in &inters {
            let ids: Vec<(ComponentId, Port)> =
                ks.iter().zip(ports).map(|(k, p)| (ComponentId(block_of[*k] as u32 + 1), p.clone())).collect();
            if !tuples.insert(ids.clone()) {
                return;
            }
            interactions.push(Interaction::new(ids).expect("distinct by construction"));
        }
        let comps: Vec<ComponentId> =
            (0..blocks.len()).filter(|b| blocks[*b].comp).map(|b| ComponentId(b as u32 + 1)).collect();
        let store: Store = free.iter().map(|v| (v.clone(), ComponentId(block_of[cls(v)] as u32 + 1))).collect();
        let open: Vec<usize> = (0..blocks.len()).filter(|b| blocks[*b].state.is_none()).collect();
        if !open.is_empty() && states.is_empty() {
            return;
        }
        let mut pick = vec![0usize; open.len()];
        loop {
            let mut qs = BTreeMap::new();
            for (b, blk) in blocks.iter().enumerate() {
                if let Some(q) = &blk.state {
                    qs.insert(ComponentId(b as u32 + 1), q.clone());
                }
            }
            for (i, b) in open.iter().enumerate() {
                qs.insert(ComponentId(*b as u32 + 1), states[pick[i]].clone());
            }
            let g = Configuration::new(comps.iter().copied(), interactions.iter().cloned(), qs)
                .expect("state map covers the carrier");
            out.push((g, store.clone()));
            let mut i = 0;
            loop {
                if i == pick.len() {
                    return;
                }
                pick[i] += 1;
                if pick[i] < states.len() {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
        }
    };
    partitions(0, &order, &comp, &state, &conflict, &mut block_of, &mut blocks, &mut emit);
    out
}

#[allow(clippy::too_many_arguments)]
fn partitions(
    i: usize,
    order: &[usize],
    comp: &[bool],
    state: &[Option<State>],
    conflict: &[Vec<bool>],
    block_of: &mut Vec<usize>,
    blocks: &mut Vec<Block>,
    emit: &mut impl FnMut(&[usize], &[Block]),
) {
    if i == order.len() {
        emit(block_of, blocks);
        return;
    }
    let k = order[i];
    for b in 0..=blocks.len() {
        if b == blocks.len() {
            blocks.push(Block { comp: comp[k], state: state[k].clone(), members: vec![k] });
        } else {
            let blk = &blocks[b];
            if (blk.comp && comp[k])
                || matches!((&blk.state, &state[k]), (Some(p), Some(q)) if p != q)
                || blk.members.iter().any(|m| conflict[*m][k])
            {
                continue;
            }
            let blk = &mut blocks[b];
            blk.comp |= comp[k];
            let old_state = blk.state.clone();
            if blk.state.is_none() {
                blk.state = state[k].clone();
            }
            blk.members.push(k);
            block_of[k] = b;
            partitions(i + 1, order, comp, state, conflict, block_of, blocks, emit);
            let blk = &mut blocks[b];
            blk.members.pop();
            blk.state = old_state;
            blk.comp = blk.members.iter().any(|m| comp[*m]);
            continue;
        }
        block_of[k] = b;
        partitions(i + 1, order, comp, state, conflict, block_of, blocks, emit);
        blocks.pop();
    }
    block_of[k] = usize::MAX;
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HavocCounterexample {
    pub model: Model,
    pub interaction: Interaction,
    pub successor: Configuration,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum HavocVerdict {
    InvariantUpToDepth { models: usize, successors: usize },
    Counterexample(Box<HavocCounterexample>),
}

/// Checks every one-step successor of every bounded model of `A(x1..xn)`
/// against `A` at the same depth. One step suffices for invariance, and
/// steps keep the components and interactions, so an unfolding matching a
/// successor has the same spatial shape and no extra depth is needed.
pub fn havoc_invariant_bounded(sid: &Sid, pred: &Name, depth: usize) -> Result<HavocVerdict, LogicError> {
    let f = pred_formula(sid, pred)?;
    let models = enumerate_models(sid, &f, depth)?;
    let keys = models.keys();
    let results: Vec<Result<(usize, Option<HavocCounterexample>), LogicError>> = models
        .models()
        .par_iter()
        .map(|m| {
            let mut count = 0;
            for i in m.config.interactions() {
                for succ in m.config.step(i, sid.behavior())? {
                    count += 1;
                    let known = keys.contains(&Model { config: succ.clone(), store: m.store.clone() }.key());
                    if !known && eval_bounded(&succ, &m.store, &f, sid, depth)? == Bounded::UnsatAtDepth {
                        return Ok((count, Some(HavocCounterexample { model: m.clone(), interaction: i.clone(), successor: succ })));
                    }
                }
            }
            Ok((count, None))
        })
        .collect();
    let mut successors = 0;
    for r in results {
        let (n, cex) = r?;
        successors += n;
        if let Some(c) = cex {
            return Ok(HavocVerdict::Counterexample(Box::new(c)));
        }
    }
    Ok(HavocVerdict::InvariantUpToDepth { models: models.len(), successors })
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EntailVerdict {
    HoldsUpToDepth { models: usize },
    Counterexample(Box<Model>),
}

/// Every bounded model of `lhs` satisfies `rhs` within `depth`.
pub fn entails_bounded(sid: &Sid, lhs: &Formula, rhs: &Formula, depth: usize) -> Result<EntailVerdict, LogicError> {
    let lfv = lhs.free_vars();
    if let Some(v) = rhs.free_vars().into_iter().find(|v| !lfv.contains(v)) {
        return Err(LogicError::RhsVariable(v));
    }
    let models = enumerate_models(sid, lhs, depth)?;
    let failures: Vec<Result<bool, LogicError>> = models
        .models()
        .par_iter()
        .map(|m| Ok(eval_bounded(&m.config, &m.store, rhs, sid, depth)? == Bounded::Sat))
        .collect();
    for (m, r) in models.models().iter().zip(failures) {
        if !r? {
            return Ok(EntailVerdict::Counterexample(Box::new(m.clone())));
        }
    }
    Ok(EntailVerdict::HoldsUpToDepth { models: models.len() })
}

/// Closure of a bounded model set under one step and under the full
/// havoc relation.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ClosureReport {
    pub models: usize,
    pub one_step_closed: bool,
    pub multi_step_closed: bool,
}

pub fn havoc_closure(sid: &Sid, pred: &Name, depth: usize) -> Result<ClosureReport, LogicError> {
    let models = enumerate_pred_models(sid, pred, depth)?;
    let keys = models.keys();
    let inside = |g: &Configuration, store: &Store| keys.contains(&Model { config: g.clone(), store: store.clone() }.key());
    let one_step_closed = models
        .models()
        .par_iter()
        .all(|m| m.config.successors(sid.behavior()).iter().all(|g| inside(g, &m.store)));
    let multi_step_closed = reach_stays_inside(sid, &models, &keys);
    Ok(ClosureReport { models: models.len(), one_step_closed, multi_step_closed })
}

/// Breadth-first search of the havoc relation from every model at once,
/// sharing one visited set of canonical keys; false as soon as a reachable
/// model falls outside `keys`.
fn reach_stays_inside(sid: &Sid, models: &ModelSet, keys: &BTreeSet<ModelKey>) -> bool {
    let mut seen: BTreeSet<ModelKey> = BTreeSet::new();
    let mut frontier: Vec<Model> = models.models().iter().map(Model::canonical).collect();
    seen.extend(frontier.iter().map(Model::key));
    while !frontier.is_empty() {
        let next: Vec<(ModelKey, Model)> = frontier
            .par_iter()
            .flat_map_iter(|m| {
                m.config
                    .successors(sid.behavior())
                    .into_iter()
                    .map(|g| {
                        let s = Model { config: g, store: m.store.clone() };
                        (s.key(), s)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        frontier = Vec::new();
        for (k, m) in next {
            if !keys.contains(&k) {
                return false;
            }
            if seen.insert(k) {
                frontier.push(m);
            }
        }
    }
    true
}

/// Outcome of comparing the successors of the bounded models of `A` with
/// the bounded models of the derived targets.
#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub successors: BTreeSet<ModelKey>,
    pub derived: BTreeSet<ModelKey>,
}

impl CrossValidation {
    pub fn is_equal(&self) -> bool {
        self.successors == self.derived
    }

    /// Successors not produced by any target.
    pub fn missing(&self) -> Vec<&ModelKey> {
        self.successors.difference(&self.derived).collect()
    }

    /// Target models that are not successors.
    pub fn extra(&self) -> Vec<&ModelKey> {
        self.derived.difference(&self.successors).collect()
    }
}

/// Set comparison, modulo renaming, between the one-step successors of the
/// bounded models of `A` (steps whose components are all present) and the
/// bounded models of the derived targets in `Δ ∪ Δ̄`.
pub fn cross_validate_reduction(sid: &Sid, red: &ReductionResult, depth: usize) -> Result<CrossValidation, LogicError> {
    let models = enumerate_pred_models(sid, &red.pred, depth)?;
    let successors: BTreeSet<ModelKey> = models
        .models()
        .par_iter()
        .flat_map_iter(|m| {
            let mut out = Vec::new();
            for i in m.config.interactions() {
                if i.components().all(|c| m.config.components().contains(&c)) {
                    for g in m.config.step(i, sid.behavior()).expect("own interaction") {
                        out.push(Model { config: g, store: m.store.clone() }.key());
                    }
                }
            }
            out
        })
        .collect();
    let params = sid.params_of(&red.pred)?;
    let per_target: Vec<Result<BTreeSet<ModelKey>, LogicError>> = red
        .targets
        .par_iter()
        .map(|t| {
            let f = Formula::Pred(PredAtom::new(t.clone(), params.clone()));
            Ok(enumerate_models(&red.combined, &f, depth)?.keys())
        })
        .collect();
    let mut derived = BTreeSet::new();
    for r in per_target {
        derived.extend(r?);
    }
    Ok(CrossValidation { successors, derived })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_system;

    fn ring() -> Sid {
        parse_system(include_str!("../fixtures/ring.clsys")).unwrap().sid
    }

    #[test]
    fn chain_base_has_one_model() {
        let sid = ring();
        let f = Formula::pred("Chain_0_1", vec![Var::named("x"), Var::named("x")]);
        let ms = enumerate_models(&sid, &f, 1).unwrap();
        assert_eq!(ms.len(), 1);
        let m = &ms.models()[0];
        assert_eq!(m.config.components().len(), 1);
        assert!(m.config.interactions().is_empty());
        assert_eq!(m.config.state_map().values().next().unwrap().as_str(), "T");
    }

    #[test]
    fn contradictory_body_has_no_model() {
        let x = Var::named("x");
        let y = Var::named("y");
        let f = Formula::sep([Formula::Atom(Atom::Eq(x.clone(), y.clone())), Formula::Atom(Atom::Neq(x, y))]);
        assert!(enumerate_models(&ring(), &f, 1).unwrap().is_empty());
    }

    #[test]
    fn free_variables_may_alias() {
        let f = Formula::exists(vec![Var::named("z")], Formula::comp(Var::named("z")));
        let g = Formula::sep([f, Formula::Atom(Atom::State(Var::named("x"), Name::new("H")))]);
        let ms = enumerate_models(&ring(), &g, 0).unwrap();
        assert_eq!(ms.len(), 3);
    }
}
