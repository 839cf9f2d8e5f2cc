use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use proptest::prelude::*;

use cl_havoc::analysis::{check_pcr, degree_sample, profile};
use cl_havoc::automata::{sid_to_ta, Bound, Symbol, Tree, TreeAutomaton};
use cl_havoc::frontend::parse_system;
use cl_havoc::logic::{EqFormula, Sid, Var};
use cl_havoc::model::canonical_form;
use cl_havoc::oracle::{complete_unfoldings, enumerate_pred_models, pred_formula};
use cl_havoc::transducer::{image, is_valid_state};
use cl_havoc::{Behavior, ComponentId, Configuration, Interaction, Name};

fn sid(name: &str) -> Sid {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.clsys"));
    parse_system(&std::fs::read_to_string(p).unwrap()).unwrap().sid
}

fn var(i: usize) -> Var {
    Var::named(["a", "b", "c", "d", "e"][i])
}

fn eq_formula() -> impl Strategy<Value = EqFormula> {
    prop::collection::vec((0..5usize, 0..5usize), 0..6).prop_map(|pairs| {
        let eqs: Vec<(Var, Var)> = pairs.into_iter().map(|(a, b)| (var(a), var(b))).collect();
        EqFormula::from_equalities((0..5).map(var), eqs)
    })
}

fn sat(e: &EqFormula, val: &[usize]) -> bool {
    let idx = |v: &Var| (0..5).position(|i| var(i) == *v).unwrap();
    e.classes().iter().all(|c| c.iter().all(|v| val[idx(v)] == val[idx(&c[0])]))
}

proptest! {
    #[test]
    fn eq_entailment_is_an_equivalence(e in eq_formula(), x in 0..5usize, y in 0..5usize, z in 0..5usize) {
        let (x, y, z) = (var(x), var(y), var(z));
        prop_assert!(e.entails(&x, &x));
        prop_assert_eq!(e.entails(&x, &y), e.entails(&y, &x));
        if e.entails(&x, &y) && e.entails(&y, &z) {
            prop_assert!(e.entails(&x, &z));
        }
    }

    #[test]
    fn eq_conjoin_is_a_join(a in eq_formula(), b in eq_formula(), c in eq_formula()) {
        prop_assert_eq!(a.conjoin(&b), b.conjoin(&a));
        prop_assert_eq!(a.conjoin(&b).conjoin(&c), a.conjoin(&b.conjoin(&c)));
        prop_assert_eq!(a.conjoin(&a), a.clone());
        for (x, y) in a.equalities() {
            prop_assert!(a.conjoin(&b).entails(&x, &y));
        }
    }

    #[test]
    fn eq_qelim_is_projection(e in eq_formula(), mask in 0..32usize, val in prop::collection::vec(0..3usize, 5)) {
        let dropped = |v: &Var| (0..5).any(|i| mask >> i & 1 == 1 && var(i) == *v);
        let q = e.qelim(dropped);
        for (x, y) in q.equalities() {
            prop_assert!(e.entails(&x, &y));
        }
        // A valuation of the kept variables satisfying the projection
        // extends to one satisfying `e` by copying class values.
        if sat(&q, &val) {
            let mut ext = val.clone();
            for c in e.classes() {
                let anchor = c.iter().find(|v| !dropped(v));
                let idx = |v: &Var| (0..5).position(|i| var(i) == *v).unwrap();
                let value = anchor.map_or(0, |a| val[idx(a)]);
                for v in c {
                    if dropped(v) {
                        ext[idx(v)] = value;
                    }
                }
            }
            prop_assert!(sat(&e, &ext));
        }
    }
}

fn ring_behavior() -> Behavior {
    let n = Name::new;
    Behavior::new([n("in"), n("out")], [n("H"), n("T")], [(n("H"), n("in"), n("T")), (n("T"), n("out"), n("H"))]).unwrap()
}

/// A configuration over ids `base + 1 ..= base + 4`.
fn config(base: u32) -> impl Strategy<Value = Configuration> {
    (
        prop::collection::btree_set(1..=4u32, 0..=4),
        prop::collection::btree_set((1..=4u32, 1..=4u32), 0..5),
        prop::collection::vec(prop::bool::ANY, 4),
    )
        .prop_map(move |(comps, links, hs)| {
            let id = |i: u32| ComponentId(base + i);
            let n = Name::new;
            let inters = links
                .into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| Interaction::new(vec![(id(a), n("out")), (id(b), n("in"))]).unwrap());
            let states = (1..=4).map(|i| (id(i), if hs[i as usize - 1] { n("H") } else { n("T") })).collect();
            Configuration::new(comps.into_iter().map(id), inters, states).unwrap()
        })
}

fn permutation() -> impl Strategy<Value = Vec<u32>> {
    Just((1..=4u32).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn compose_is_commutative_and_associative(a in config(0), b in config(4), c in config(8)) {
        let ab = a.compose(&b).unwrap().unwrap();
        prop_assert_eq!(Some(ab.clone()), b.compose(&a).unwrap());
        let bc = b.compose(&c).unwrap().unwrap();
        prop_assert_eq!(ab.compose(&c).unwrap(), a.compose(&bc).unwrap());
        prop_assert_eq!(a.compose(&Configuration::empty()).unwrap(), Some(a.clone()));
    }

    #[test]
    fn compose_with_self_needs_no_components(a in config(0)) {
        let again = a.compose(&a).unwrap();
        prop_assert_eq!(again.is_some(), a.components().is_empty() && a.interactions().is_empty());
    }

    #[test]
    fn steps_keep_the_shape(a in config(0)) {
        for g in a.successors(&ring_behavior()) {
            prop_assert_eq!(g.components(), a.components());
            prop_assert_eq!(g.interactions(), a.interactions());
            prop_assert_eq!(g.degree(), a.degree());
        }
    }

    #[test]
    fn canonical_form_ignores_renaming(a in config(0), p in permutation()) {
        let b = a.rename(|c| ComponentId(p[c.0 as usize - 1]));
        let la = [("x", ComponentId(1))];
        let lb = [("x", ComponentId(p[0]))];
        prop_assert_eq!(canonical_form(&a, &la), canonical_form(&b, &lb));
    }

    #[test]
    fn canonical_form_keeps_the_configuration(a in config(0)) {
        let (k, _) = canonical_form::<u8>(&a, &[]);
        prop_assert_eq!(k.components().len(), a.components().len());
        prop_assert_eq!(k.interactions().len(), a.interactions().len());
        prop_assert_eq!(k.degree(), a.degree());
        prop_assert_eq!(k.is_tight(), a.is_tight());
    }
}

const SMALL: [&str; 6] = ["chain", "noint", "pcring", "ring", "ring2", "syntax"];

fn fixture_pred() -> impl Strategy<Value = (Sid, Name)> {
    prop::sample::select(SMALL.to_vec()).prop_flat_map(|f| {
        let s = sid(f);
        let preds: Vec<Name> = s.predicates().cloned().collect();
        (Just(s), prop::sample::select(preds))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unfoldings_grow_with_depth((s, p) in fixture_pred(), d in 0..4usize) {
        let f = pred_formula(&s, &p).unwrap();
        let small = complete_unfoldings(&s, &f, d).unwrap();
        let large = complete_unfoldings(&s, &f, d + 1).unwrap();
        prop_assert!(small.len() <= large.len());
        let large_set: BTreeSet<String> = large.iter().map(|h| h.to_formula().to_string()).collect();
        for h in &small {
            prop_assert!(large_set.contains(&h.to_formula().to_string()));
        }
    }

    #[test]
    fn models_grow_with_depth((s, p) in fixture_pred(), d in 0..4usize) {
        let small = enumerate_pred_models(&s, &p, d).unwrap().keys();
        let large = enumerate_pred_models(&s, &p, d + 1).unwrap().keys();
        prop_assert!(small.is_subset(&large));
        prop_assert!(degree_sample(&s, &p, d).unwrap() <= degree_sample(&s, &p, d + 1).unwrap());
    }

    #[test]
    fn profile_grows_when_rules_go((s, _) in fixture_pred(), k in 0..64usize) {
        let k = k % s.rules().len();
        let rest: Vec<_> = s.rules().iter().enumerate().filter(|(i, _)| *i != k).map(|(_, r)| r.clone()).collect();
        if let Ok(smaller) = Sid::new(s.behavior().clone(), rest) {
            let before = profile(&s);
            let after = profile(&smaller);
            for (p, set) in &after {
                prop_assert!(before[p].is_subset(set), "{}: {:?} vs {:?}", p, before[p], set);
            }
        }
    }

    #[test]
    fn pcr_is_closed_under_rule_removal_of_callees((s, p) in fixture_pred()) {
        // The restriction to reachable predicates keeps PCR.
        if check_pcr(&s).is_pcr() {
            prop_assert!(check_pcr(&s.restrict_to(&p)).is_pcr());
        }
    }
}

/// A random automaton over a tiny ranked alphabet, with its runs computed
/// naively from the transition list.
fn naive_runs(a: &TreeAutomaton<usize>, t: &Tree) -> BTreeSet<usize> {
    let kids: Vec<BTreeSet<usize>> = t.children().iter().map(|c| naive_runs(a, c)).collect();
    let sym = a.symbol_id(t.symbol()).unwrap();
    a.transitions()
        .iter()
        .filter(|tr| tr.symbol == sym && tr.children.iter().zip(&kids).all(|(q, ks)| ks.contains(q)))
        .map(|tr| tr.target)
        .collect()
}

fn alphabet() -> Vec<Symbol> {
    (0..=2usize)
        .map(|rank| Symbol::new(vec![], vec![], vec![0; rank + 1]).unwrap())
        .collect()
}

fn automaton() -> impl Strategy<Value = TreeAutomaton<usize>> {
    prop::collection::vec((0..3usize, prop::collection::vec(0..3usize, 2), 0..3usize), 1..10).prop_map(|ts| {
        let mut a = TreeAutomaton::new();
        for q in 0..3 {
            a.add_state(q);
        }
        let syms: Vec<usize> = alphabet().into_iter().map(|s| a.add_symbol(s)).collect();
        for (rank, kids, target) in ts {
            a.add_transition(syms[rank], kids[..rank].to_vec(), target);
        }
        a
    })
}

fn tree() -> impl Strategy<Value = Tree> {
    let syms: Vec<Arc<Symbol>> = alphabet().into_iter().map(Arc::new).collect();
    let leaf = Just(Tree::leaf(syms[0].clone()).unwrap());
    leaf.prop_recursive(3, 12, 2, move |inner| {
        let s1 = syms[1].clone();
        let s2 = syms[2].clone();
        prop_oneof![
            inner.clone().prop_map(move |c| Tree::new(s1.clone(), vec![c]).unwrap()),
            (inner.clone(), inner).prop_map(move |(l, r)| Tree::new(s2.clone(), vec![l, r]).unwrap()),
        ]
    })
}

proptest! {
    #[test]
    fn runs_match_naive_definition(a in automaton(), t in tree()) {
        prop_assert_eq!(a.run_states(&t), naive_runs(&a, &t));
    }

    #[test]
    fn trimming_keeps_accepted_trees(a in automaton(), t in tree()) {
        let trimmed = a.trim();
        for q in a.run_states(&t) {
            let name = a.states()[q];
            let tq = trimmed.state_id(&name);
            prop_assert!(tq.is_some());
            prop_assert!(trimmed.accepts(&t, tq.unwrap()));
        }
    }

    #[test]
    fn enumerated_trees_are_accepted(a in automaton(), q in 0..3usize, n in 1..6usize) {
        let trees = a.trees(q, Bound::Nodes(n));
        for t in &trees {
            prop_assert!(t.size() <= n);
            prop_assert!(a.accepts(t, q));
        }
        let set: BTreeSet<String> = trees.iter().map(|t| t.to_string()).collect();
        prop_assert_eq!(set.len(), trees.len());
    }
}

#[test]
fn image_states_are_valid() {
    for (name, root) in [("ring", "Ring_1_1"), ("pcring", "pcRing_1_1")] {
        let s = sid(name).restrict_to(&Name::new(root));
        let img = image(&sid_to_ta(&s), &Name::new(root), &s).unwrap();
        let n_of: BTreeMap<usize, usize> = img.types.iter().enumerate().map(|(k, t)| (k, t.len())).collect();
        for st in img.automaton.states() {
            assert!(is_valid_state(&st.eq, n_of[&st.ty]), "{st}");
        }
    }
}
