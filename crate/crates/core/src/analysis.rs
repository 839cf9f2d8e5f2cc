//! Syntactic analyses of inductive systems: profile, the progressing /
//! connected / e-restricted checks, size metrics, and a sampled degree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::LogicError;
use crate::logic::{Atom, Formula, Heap, Sid, Var};
use crate::model::Name;
use crate::oracle::{enumerate_shapes, pred_formula};
use crate::unionfind::UnionFind;

/// Parameter positions (1-based) always instantiated by a parameter of the
/// enclosing predicate.
pub type Profile = BTreeMap<Name, BTreeSet<usize>>;

/// Greatest fixpoint, starting from all positions.
pub fn profile(sid: &Sid) -> Profile {
    let mut p: Profile =
        sid.predicates().map(|a| (a.clone(), (1..=sid.arity(a).unwrap_or(0)).collect())).collect();
    loop {
        let mut changed = false;
        for (i, r) in sid.rules().iter().enumerate() {
            for c in &sid.heap(i).calls {
                let keep: BTreeSet<usize> = p[&c.pred]
                    .iter()
                    .copied()
                    .filter(|k| p[&r.pred].iter().any(|j| r.params[j - 1] == c.args[k - 1]))
                    .collect();
                if keep.len() != p[&c.pred].len() {
                    p.insert(c.pred.clone(), keep);
                    changed = true;
                }
            }
        }
        if !changed {
            return p;
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RulePcr {
    pub rule: usize,
    pub progressing: bool,
    pub connected: bool,
    pub restricted: bool,
    pub reasons: Vec<String>,
}

impl RulePcr {
    pub fn is_pcr(&self) -> bool {
        self.progressing && self.connected && self.restricted
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PcrReport {
    pub rules: Vec<RulePcr>,
    pub progressing: bool,
    pub connected: bool,
    pub restricted: bool,
}

impl PcrReport {
    pub fn is_pcr(&self) -> bool {
        self.progressing && self.connected && self.restricted
    }
}

/// Equality classes of the variables of one rule body.
struct Classes {
    index: BTreeMap<Var, usize>,
    uf: UnionFind,
}

impl Classes {
    fn new(params: &[Var], h: &Heap) -> Self {
        let mut index = BTreeMap::new();
        let vars = params
            .iter()
            .chain(&h.exists)
            .chain(h.atoms.iter().flat_map(|a| a.vars()))
            .chain(h.calls.iter().flat_map(|c| &c.args));
        for v in vars {
            let n = index.len();
            index.entry(v.clone()).or_insert(n);
        }
        let mut uf = UnionFind::new(index.len());
        for a in &h.atoms {
            if let Atom::Eq(x, y) = a {
                uf.union(index[x], index[y]);
            }
        }
        Classes { index, uf }
    }

    fn of(&mut self, v: &Var) -> usize {
        self.uf.find(self.index[v])
    }
}

fn check_rule(sid: &Sid, prof: &Profile, i: usize) -> RulePcr {
    let r = &sid.rules()[i];
    let h = sid.heap(i);
    let mut cls = Classes::new(&r.params, h);
    let mut reasons = Vec::new();

    let progressing = match r.params.first() {
        None => {
            reasons.push("P: no parameter to allocate".into());
            false
        }
        Some(x1) => {
            let root = cls.of(x1);
            let comps: Vec<&Var> = h.atoms.iter().filter_map(|a| if let Atom::Comp(x) = a { Some(x) } else { None }).collect();
            let mut ok = true;
            if comps.len() != 1 || cls.of(comps[0]) != root {
                reasons.push(format!("P: expected exactly comp({x1})"));
                ok = false;
            }
            for a in &h.atoms {
                if let Atom::State(x, _) = a {
                    if cls.of(x) != root {
                        reasons.push(format!("P: state atom on {x}"));
                        ok = false;
                    }
                }
            }
            let lhs: BTreeSet<usize> = h.calls.iter().flat_map(|c| &c.args).map(|v| cls.of(v)).collect();
            let rhs: BTreeSet<usize> =
                r.params[1..].iter().chain(&h.exists).map(|v| cls.of(v)).filter(|c| *c != root).collect();
            if lhs != rhs {
                reasons.push("P: call arguments differ from the non-allocated variables".into());
                ok = false;
            }
            ok
        }
    };

    let anchors: BTreeSet<usize> = {
        let mut s: BTreeSet<usize> = prof[&r.pred].iter().map(|j| cls.of(&r.params[j - 1])).collect();
        if let Some(x1) = r.params.first() {
            s.insert(cls.of(x1));
        }
        s
    };
    let inters: Vec<BTreeSet<usize>> = h
        .atoms
        .iter()
        .filter_map(|a| if let Atom::Interaction(bs) = a { Some(bs) } else { None })
        .map(|bs| bs.iter().map(|(x, _)| cls.of(x)).collect())
        .collect();
    let mut connected = true;
    for (l, c) in h.calls.iter().enumerate() {
        let ok = c.args.first().is_some_and(|z| {
            let z = cls.of(z);
            inters.iter().any(|s| s.contains(&z) && !s.is_disjoint(&anchors))
        });
        if !ok {
            reasons.push(format!("C: call {} ({}) not linked to an anchor", l + 1, c.pred));
            connected = false;
        }
    }

    let prof_vars: BTreeSet<&Var> = prof[&r.pred].iter().map(|j| &r.params[j - 1]).collect();
    let mut restricted = true;
    for a in &h.atoms {
        if let Atom::Neq(x, y) = a {
            if !prof_vars.contains(x) && !prof_vars.contains(y) {
                reasons.push(format!("R: {x} != {y} avoids the profile"));
                restricted = false;
            }
        }
    }
    RulePcr { rule: i, progressing, connected, restricted, reasons }
}

pub fn check_pcr(sid: &Sid) -> PcrReport {
    let prof = profile(sid);
    let rules: Vec<RulePcr> = (0..sid.rules().len()).map(|i| check_rule(sid, &prof, i)).collect();
    PcrReport {
        progressing: rules.iter().all(|r| r.progressing),
        connected: rules.iter().all(|r| r.connected),
        restricted: rules.iter().all(|r| r.restricted),
        rules,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct SidMetrics {
    pub size: usize,
    pub maxarity: usize,
    pub maxinter: usize,
    pub maxpreds: usize,
}

/// Symbol count of a formula: `emp` 1, `comp(x)` 2, `state(x : q)`, `x = y`
/// and `x != y` 3, an interaction with n bindings 2n, `B(y1..yk)` k + 1,
/// 1 per `*` and 2 per quantified variable.
pub fn formula_size(f: &Formula) -> usize {
    match f {
        Formula::Emp => 1,
        Formula::Atom(Atom::Comp(_)) => 2,
        Formula::Atom(Atom::Interaction(bs)) => 2 * bs.len(),
        Formula::Atom(_) => 3,
        Formula::Pred(p) => 1 + p.args.len(),
        Formula::Sep(fs) => fs.iter().map(formula_size).sum::<usize>() + fs.len().saturating_sub(1),
        Formula::Exists(vs, b) => 2 * vs.len() + formula_size(b),
    }
}

pub fn sid_metrics(sid: &Sid) -> SidMetrics {
    let mut m = SidMetrics::default();
    for (i, r) in sid.rules().iter().enumerate() {
        m.size += formula_size(&r.body) + r.arity() + 1;
        m.maxarity = m.maxarity.max(r.arity());
        let h = sid.heap(i);
        m.maxpreds = m.maxpreds.max(h.calls.len());
        for a in &h.atoms {
            if let Atom::Interaction(bs) = a {
                m.maxinter = m.maxinter.max(bs.len());
            }
        }
    }
    m
}

/// Largest degree among the bounded models of `pred(x1..xn)`.
pub fn degree_sample(sid: &Sid, pred: &Name, depth: usize) -> Result<usize, LogicError> {
    let models = enumerate_shapes(sid, &pred_formula(sid, pred)?, depth)?;
    Ok(models.models().iter().map(|m| m.config.degree()).max().unwrap_or(0))
}

/// Rule table with P/C/R flags, profile sets and metrics.
pub fn render_analysis(sid: &Sid) -> String {
    let report = check_pcr(sid);
    let prof = profile(sid);
    let mut out = String::from("rule\tP\tC\tR\thead\n");
    let flag = |b: bool| if b { "yes" } else { "no" };
    for r in &report.rules {
        let rule = &sid.rules()[r.rule];
        let params: Vec<String> = rule.params.iter().map(Var::to_string).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}({})",
            r.rule + 1,
            flag(r.progressing),
            flag(r.connected),
            flag(r.restricted),
            rule.pred,
            params.join(", ")
        );
        for why in &r.reasons {
            let _ = writeln!(out, "\t\t\t\t  {why}");
        }
    }
    let _ = writeln!(
        out,
        "sid\t{}\t{}\t{}\t{}",
        flag(report.progressing),
        flag(report.connected),
        flag(report.restricted),
        if report.is_pcr() { "PCR" } else { "not PCR" }
    );
    out.push_str("\nprofile\n");
    for (p, s) in &prof {
        let items: Vec<String> = s.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "  {p}: {{{}}}", items.join(", "));
    }
    let m = sid_metrics(sid);
    let _ = writeln!(
        out,
        "\nmetrics\n  size {}\n  maxarity {}\n  maxinter {}\n  maxpreds {}",
        m.size, m.maxarity, m.maxinter, m.maxpreds
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_system;

    fn load(text: &str) -> Sid {
        parse_system(text).unwrap().sid
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn profile_of_unconstrained_rule() {
        let sid = load("behavior { ports; states; } sid { A(x1, x2) <- emp; }");
        assert_eq!(profile(&sid)[&Name::new("A")], set(&[1, 2]));
    }

    #[test]
    fn profile_of_chain() {
        let sid = load(include_str!("../fixtures/chain.clsys"));
        let p = profile(&sid);
        assert_eq!(p[&Name::new("Chain_0_1")], set(&[2]));
        assert_eq!(p[&Name::new("Chain_1_1")], set(&[1, 2]));
        let ring = load(include_str!("../fixtures/ring.clsys"));
        assert_eq!(profile(&ring)[&Name::new("Chain_1_1")], set(&[]));
    }

    #[test]
    fn disequality_between_existentials() {
        let sid = load("behavior { ports p; states q; } sid { A(x) <- exists y1, y2 . comp(x) * y1 != y2 * <x.p, y1.p> * B(y1) * B(y2); B(x) <- comp(x); }");
        let r = check_pcr(&sid);
        assert!(!r.rules[0].restricted);
        assert!(r.rules[1].is_pcr());
    }

    #[test]
    fn metrics() {
        let tll = load(include_str!("../fixtures/tll.clsys"));
        let m = sid_metrics(&tll);
        assert_eq!((m.maxarity, m.maxinter, m.maxpreds), (3, 3, 2));
        let empty = load("behavior { ports; states; } sid { }");
        assert_eq!(sid_metrics(&empty), SidMetrics::default());
        let ring = load(include_str!("../fixtures/ring.clsys"));
        assert_eq!(sid_metrics(&ring).maxinter, 2);
    }

    #[test]
    fn size_counts_symbols() {
        let sid = load("behavior { ports a; states q; } sid { A(x) <- exists y . comp(x) * <x.a, y.a> * A(y); }");
        // body: 2 + 2 + 4 + 2 + 2 stars = 12, plus arity 1 and 1.
        assert_eq!(sid_metrics(&sid).size, 14);
    }

    #[test]
    fn degree_of_single_component() {
        let sid = load("behavior { ports; states q; } sid { A(x) <- comp(x); }");
        assert_eq!(degree_sample(&sid, &Name::new("A"), 3).unwrap(), 0);
    }
}
