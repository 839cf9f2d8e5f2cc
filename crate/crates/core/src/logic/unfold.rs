use std::collections::BTreeMap;
use std::ops::ControlFlow;

use super::formula::{Formula, Heap, PredAtom};
use super::sid::Sid;
use super::var::Var;
use crate::error::LogicError;

/// Unfoldings of `atom` up to derivation height `depth`, each flagged
/// complete when no predicate atom remains. Calls are expanded whenever the
/// height budget allows, so incomplete entries have their remaining atoms
/// exactly at height `depth`.
pub fn unfold(sid: &Sid, atom: &PredAtom, depth: usize) -> Result<Vec<(Formula, bool)>, LogicError> {
    check_call(sid, atom)?;
    let start = Heap { calls: vec![atom.clone()], ..Heap::default() };
    let mut out = Vec::new();
    let _ = for_each_unfolding(sid, &start, depth, true, &mut |_| false, &mut |h| {
        out.push((h.to_formula(), h.calls.is_empty()));
        ControlFlow::Continue(())
    });
    Ok(out)
}

pub(crate) fn check_call(sid: &Sid, atom: &PredAtom) -> Result<(), LogicError> {
    match sid.arity(&atom.pred) {
        None => Err(LogicError::UndefinedPredicate(atom.pred.clone())),
        Some(n) if n != atom.args.len() => Err(LogicError::ArityMismatch {
            pred: atom.pred.clone(),
            expected: n,
            found: atom.args.len(),
        }),
        Some(_) => Ok(()),
    }
}

struct Partial {
    heap: Heap,
    pending: Vec<(PredAtom, usize)>,
    next_fresh: u32,
}

/// Drives `visit` over the unfoldings of `start` (leftmost-innermost).
/// `prune` sees every partial heap after a rule application and cuts the
/// branch when it returns true. Without `keep_incomplete`, branches that
/// cannot complete within `depth` are dropped.
pub(crate) fn for_each_unfolding(
    sid: &Sid,
    start: &Heap,
    depth: usize,
    keep_incomplete: bool,
    prune: &mut dyn FnMut(&Heap) -> bool,
    visit: &mut dyn FnMut(&Heap) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let next_fresh = start
        .exists
        .iter()
        .chain(start.free_vars().iter())
        .filter_map(|v| match v {
            Var::Fresh(_, k) => Some(*k),
            _ => None,
        })
        .max()
        .unwrap_or(0)
        + 1;
    let pending: Vec<(PredAtom, usize)> = start.calls.iter().map(|c| (c.clone(), 0)).collect();
    let partial = Partial {
        heap: Heap { calls: Vec::new(), ..start.clone() },
        pending,
        next_fresh,
    };
    go(sid, partial, depth, keep_incomplete, prune, visit)
}

fn go(
    sid: &Sid,
    mut p: Partial,
    depth: usize,
    keep_incomplete: bool,
    prune: &mut dyn FnMut(&Heap) -> bool,
    visit: &mut dyn FnMut(&Heap) -> ControlFlow<()>,
) -> ControlFlow<()> {
    loop {
        if p.pending.is_empty() {
            return visit(&p.heap);
        }
        let (call, level) = p.pending.remove(0);
        if level < depth {
            for &ri in sid.rules_for(&call.pred) {
                let mut q = Partial { heap: p.heap.clone(), pending: p.pending.clone(), next_fresh: p.next_fresh };
                let rule = &sid.rules()[ri];
                let body = sid.heap(ri);
                let mut map: BTreeMap<Var, Var> = rule.params.iter().cloned().zip(call.args.iter().cloned()).collect();
                for y in &body.exists {
                    let base = match y {
                        Var::Named(n) | Var::Fresh(n, _) => n.clone(),
                        other => other.to_string().into(),
                    };
                    let w = Var::Fresh(base, q.next_fresh);
                    q.next_fresh += 1;
                    q.heap.exists.push(w.clone());
                    map.insert(y.clone(), w);
                }
                let f = |v: &Var| map.get(v).cloned().unwrap_or_else(|| v.clone());
                q.heap.atoms.extend(body.atoms.iter().map(|a| a.rename(&f)));
                let children: Vec<(PredAtom, usize)> = body.calls.iter().map(|c| (c.rename(&f), level + 1)).collect();
                q.pending.splice(0..0, children);
                if prune(&q.heap) {
                    continue;
                }
                go(sid, q, depth, keep_incomplete, prune, visit)?;
            }
            return ControlFlow::Continue(());
        }
        if !keep_incomplete {
            return ControlFlow::Continue(());
        }
        p.heap.calls.push(call);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::formula::Atom;
    use crate::logic::sid::Rule;
    use crate::model::{Behavior, Name};

    fn v(s: &str) -> Var {
        Var::named(s)
    }

    fn list_sid() -> Sid {
        let b = Behavior::new([Name::new("p")], [], []).unwrap();
        Sid::new(
            b,
            vec![
                Rule::new("L", vec![v("x")], Formula::comp(v("x"))),
                Rule::new(
                    "L",
                    vec![v("x")],
                    Formula::exists(
                        vec![v("y")],
                        Formula::sep([
                            Formula::comp(v("x")),
                            Formula::Atom(Atom::Interaction(vec![(v("x"), Name::new("p")), (v("y"), Name::new("p"))])),
                            Formula::pred("L", vec![v("y")]),
                        ]),
                    ),
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn depth_zero_is_the_atom() {
        let sid = list_sid();
        let a = PredAtom::new("L", vec![v("x")]);
        assert_eq!(unfold(&sid, &a, 0).unwrap(), vec![(Formula::Pred(a.clone()), false)]);
    }

    #[test]
    fn list_unfoldings_by_height() {
        let sid = list_sid();
        let a = PredAtom::new("L", vec![v("x")]);
        for d in 1..5 {
            let us = unfold(&sid, &a, d).unwrap();
            assert_eq!(us.iter().filter(|(_, c)| *c).count(), d);
            assert_eq!(us.iter().filter(|(_, c)| !*c).count(), 1);
        }
    }

    #[test]
    fn fresh_names_differ_per_site() {
        let sid = list_sid();
        let a = PredAtom::new("L", vec![v("x")]);
        let us = unfold(&sid, &a, 3).unwrap();
        let (f, _) = us.iter().find(|(f, c)| *c && f.all_vars().len() == 3).unwrap();
        let Formula::Exists(vs, _) = f else { panic!("shape") };
        assert_eq!(vs.len(), 2);
        assert_ne!(vs[0], vs[1]);
    }

    #[test]
    fn undefined_predicate() {
        let sid = list_sid();
        let a = PredAtom::new("M", vec![]);
        assert!(matches!(unfold(&sid, &a, 1), Err(LogicError::UndefinedPredicate(_))));
    }
}
