use std::collections::BTreeMap;
use std::path::PathBuf;

use cl_havoc::analysis::{check_pcr, degree_sample, sid_metrics, SidMetrics};
use cl_havoc::automata::{sid_to_ta, Bound};
use cl_havoc::frontend::{parse_system, render, Query};
use cl_havoc::logic::{unfold, Sid};
use cl_havoc::oracle::{complete_unfoldings, enumerate_pred_models, pred_formula};
use cl_havoc::transducer::interaction_types;
use cl_havoc::Name;

fn text(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.clsys"));
    std::fs::read_to_string(p).unwrap()
}

fn sid(name: &str) -> Sid {
    parse_system(&text(name)).unwrap().sid
}

const ALL: [&str; 10] = ["bad", "chain", "noint", "pcring", "ring", "ring2", "syntax", "tll", "tll_pcr", "tll_pcr_states"];

#[test]
fn every_fixture_round_trips() {
    for name in ALL {
        let f = parse_system(&text(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let once = render(&f);
        assert_eq!(parse_system(&once).unwrap(), f, "{name}");
        assert_eq!(render(&parse_system(&once).unwrap()), once, "{name}");
    }
}

#[test]
fn ring2_expansion_counts() {
    let s = sid("ring2");
    // Ring over h, t in 1..=2; Chain over h, t in 0..=2 twice; three base rules.
    assert_eq!(s.predicates().count(), 4 + 9);
    assert_eq!(s.rules().len(), 4 + 2 * 9 + 3);
    let f = parse_system(&text("ring2")).unwrap();
    assert_eq!(f.queries[0], Query::Invariant(Name::new("Ring_2_1")));
}

#[test]
fn tll_rules() {
    assert_eq!(sid("tll").rules().len(), 4);
    assert_eq!(sid("tll_pcr").rules().len(), 4);
}

#[test]
fn tll_node_unfolding_counts() {
    // N(1) = 2 leaves, N(h) = 2 + N(h - 1)^2.
    let s = sid("tll");
    let node = pred_formula(&s, &Name::new("Node")).unwrap();
    let counts: Vec<usize> = (1..=4).map(|d| complete_unfoldings(&s, &node, d).unwrap().len()).collect();
    assert_eq!(counts, [2, 6, 38, 1446]);
    let root = pred_formula(&s, &Name::new("Root")).unwrap();
    assert_eq!(complete_unfoldings(&s, &root, 3).unwrap().len(), 6);
}

#[test]
fn unfold_marks_incomplete_entries() {
    let s = sid("tll");
    let atom = match pred_formula(&s, &Name::new("Node")).unwrap() {
        cl_havoc::logic::Formula::Pred(p) => p,
        other => panic!("{other}"),
    };
    let all = unfold(&s, &atom, 1).unwrap();
    assert_eq!(all.iter().filter(|(_, c)| *c).count(), 2);
    assert_eq!(all.iter().filter(|(_, c)| !*c).count(), 1);
}

#[test]
fn ring_models_are_necklaces() {
    // Directed rings with at least one H and one T, up to rotation: sizes
    // 2, 3, 4 give 1, 2, 4. A ring of n components has height n + 1.
    let s = sid("ring");
    let at = |d| enumerate_pred_models(&s, &Name::new("Ring_1_1"), d).unwrap().len();
    assert_eq!([at(2), at(3), at(4), at(5)], [0, 1, 3, 7]);
    let by_size = |d| {
        let mut m: BTreeMap<usize, usize> = BTreeMap::new();
        for model in enumerate_pred_models(&s, &Name::new("Ring_1_1"), d).unwrap().models() {
            *m.entry(model.config.components().len()).or_default() += 1;
        }
        m
    };
    assert_eq!(by_size(5), BTreeMap::from([(2, 1), (3, 2), (4, 4)]));
}

#[test]
fn degree_samples() {
    assert_eq!(degree_sample(&sid("ring"), &Name::new("Ring_1_1"), 5).unwrap(), 2);
    assert_eq!(degree_sample(&sid("tll_pcr"), &Name::new("Root"), 4).unwrap(), 3);
    assert_eq!(degree_sample(&sid("noint"), &Name::new("Pair"), 4).unwrap(), 0);
    // Three interactions at height 3, and a leaf can sit in all of them by
    // aliasing the free ends of the other two.
    assert_eq!(degree_sample(&sid("tll"), &Name::new("Root"), 3).unwrap(), 3);
}

#[test]
fn pcr_fixtures() {
    let pcr: Vec<&str> = ALL.into_iter().filter(|n| check_pcr(&sid(n)).is_pcr()).collect();
    assert_eq!(pcr, ["chain", "pcring", "tll_pcr", "tll_pcr_states"]);
}

#[test]
fn metrics() {
    assert_eq!(sid_metrics(&sid("tll")), SidMetrics { size: 72, maxarity: 3, maxinter: 3, maxpreds: 2 });
    assert_eq!(sid_metrics(&sid("bad")).maxinter, 2);
}

#[test]
fn interaction_types_per_fixture() {
    let tys = |n| interaction_types(&sid(n)).iter().map(|t| t.to_string()).collect::<Vec<_>>();
    assert_eq!(tys("ring"), ["(out, in)"]);
    assert_eq!(tys("tll").len(), 3);
    assert!(tys("noint").is_empty());
}

#[test]
fn automaton_language_matches_unfoldings() {
    // Trees of height <= d accepted at Node correspond to complete
    // unfoldings of Node of height <= d.
    let s = sid("tll");
    let a = sid_to_ta(&s);
    let node = a.state_id(&Name::new("Node")).unwrap();
    let f = pred_formula(&s, &Name::new("Node")).unwrap();
    for d in 1..=3 {
        let trees = a.trees(node, Bound::Height(d));
        assert!(trees.iter().all(|t| a.accepts(t, node)));
        assert_eq!(trees.len(), complete_unfoldings(&s, &f, d).unwrap().len());
    }
}
