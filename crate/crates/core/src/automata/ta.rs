use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::hash::Hash;
use std::sync::Arc;

use super::symbol::{Symbol, Tree};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TaTransition {
    pub symbol: usize,
    pub children: Vec<usize>,
    pub target: usize,
}

/// Size bound for tree enumeration.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bound {
    /// Trees of height at most `n` (a leaf has height 1).
    Height(usize),
    /// Trees with at most `n` nodes.
    Nodes(usize),
}

/// Bottom-up tree automaton with interned symbols and states.
#[derive(Clone, Debug)]
pub struct TreeAutomaton<S> {
    alphabet: Vec<Arc<Symbol>>,
    symbol_index: HashMap<Arc<Symbol>, usize>,
    states: Vec<S>,
    state_index: HashMap<S, usize>,
    transitions: Vec<TaTransition>,
    seen: HashSet<TaTransition>,
    finals: BTreeSet<usize>,
}

impl<S> Default for TreeAutomaton<S> {
    fn default() -> Self {
        TreeAutomaton {
            alphabet: Vec::new(),
            symbol_index: HashMap::new(),
            states: Vec::new(),
            state_index: HashMap::new(),
            transitions: Vec::new(),
            seen: HashSet::new(),
            finals: BTreeSet::new(),
        }
    }
}

impl<S: Clone + Eq + Hash + fmt::Display> TreeAutomaton<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `s`; structurally equal symbols share one index.
    pub fn add_symbol(&mut self, s: Symbol) -> usize {
        if let Some(&i) = self.symbol_index.get(&s) {
            return i;
        }
        let s = Arc::new(s);
        self.alphabet.push(s.clone());
        self.symbol_index.insert(s, self.alphabet.len() - 1);
        self.alphabet.len() - 1
    }

    pub fn add_state(&mut self, s: S) -> usize {
        if let Some(&i) = self.state_index.get(&s) {
            return i;
        }
        self.states.push(s.clone());
        self.state_index.insert(s, self.states.len() - 1);
        self.states.len() - 1
    }

    /// Returns false when the transition was already present.
    pub fn add_transition(&mut self, symbol: usize, children: Vec<usize>, target: usize) -> bool {
        assert_eq!(self.alphabet[symbol].rank(), children.len(), "transition arity must match the symbol rank");
        let t = TaTransition { symbol, children, target };
        if !self.seen.insert(t.clone()) {
            return false;
        }
        self.transitions.push(t);
        true
    }

    pub fn set_final(&mut self, q: usize) {
        self.finals.insert(q);
    }

    pub fn alphabet(&self) -> &[Arc<Symbol>] {
        &self.alphabet
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn transitions(&self) -> &[TaTransition] {
        &self.transitions
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    pub fn state_id(&self, s: &S) -> Option<usize> {
        self.state_index.get(s).copied()
    }

    pub fn symbol_id(&self, s: &Symbol) -> Option<usize> {
        self.symbol_index.get(s).copied()
    }

    /// States reachable by some run at the root of `t`.
    pub fn run_states(&self, t: &Tree) -> BTreeSet<usize> {
        let Some(sym) = self.symbol_id(t.symbol()) else {
            return BTreeSet::new();
        };
        let kids: Vec<BTreeSet<usize>> = t.children().iter().map(|c| self.run_states(c)).collect();
        self.transitions
            .iter()
            .filter(|tr| {
                tr.symbol == sym
                    && tr.children.len() == kids.len()
                    && tr.children.iter().zip(&kids).all(|(q, ks)| ks.contains(q))
            })
            .map(|tr| tr.target)
            .collect()
    }

    /// Whether some run over `t` is `q`-accepting.
    pub fn accepts(&self, t: &Tree, q: usize) -> bool {
        self.run_states(t).contains(&q)
    }

    /// Restriction to productive states, and when final states are set,
    /// further to states from which a final state is reachable upwards.
    pub fn trim(&self) -> TreeAutomaton<S> {
        let mut productive = vec![false; self.states.len()];
        loop {
            let mut changed = false;
            for t in &self.transitions {
                if !productive[t.target] && t.children.iter().all(|c| productive[*c]) {
                    productive[t.target] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let live = |t: &TaTransition, keep: &[bool]| keep[t.target] && t.children.iter().all(|c| keep[*c]);
        let keep = if self.finals.is_empty() {
            productive
        } else {
            let mut useful = vec![false; self.states.len()];
            let mut work: Vec<usize> = self.finals.iter().copied().filter(|q| productive[*q]).collect();
            for q in &work {
                useful[*q] = true;
            }
            while let Some(q) = work.pop() {
                for t in self.transitions.iter().filter(|t| t.target == q && live(t, &productive)) {
                    for c in &t.children {
                        if !useful[*c] {
                            useful[*c] = true;
                            work.push(*c);
                        }
                    }
                }
            }
            useful
        };
        let mut out = TreeAutomaton::new();
        let mut remap = vec![usize::MAX; self.states.len()];
        for (i, s) in self.states.iter().enumerate() {
            if keep[i] {
                remap[i] = out.add_state(s.clone());
            }
        }
        for t in self.transitions.iter().filter(|t| live(t, &keep)) {
            let sym = out.add_symbol((*self.alphabet[t.symbol]).clone());
            out.add_transition(sym, t.children.iter().map(|c| remap[*c]).collect(), remap[t.target]);
        }
        for q in self.finals.iter().filter(|q| keep[**q]) {
            out.set_final(remap[*q]);
        }
        out
    }

    /// All trees `q`-accepted within `bound`, sorted and without repeats.
    pub fn trees(&self, q: usize, bound: Bound) -> Vec<Tree> {
        match bound {
            Bound::Height(h) => {
                let mut level: Vec<BTreeSet<Tree>> = vec![BTreeSet::new(); self.states.len()];
                for _ in 0..h {
                    let mut next: Vec<BTreeSet<Tree>> = vec![BTreeSet::new(); self.states.len()];
                    for t in &self.transitions {
                        let pools: Vec<Vec<Tree>> = t.children.iter().map(|c| level[*c].iter().cloned().collect()).collect();
                        for kids in product(&pools) {
                            next[t.target].insert(Tree::new(self.alphabet[t.symbol].clone(), kids).expect("rank checked"));
                        }
                    }
                    level = next;
                }
                level.swap_remove(q).into_iter().collect()
            }
            Bound::Nodes(n) => {
                // exact[k][s]: trees with exactly k nodes accepted at s.
                let mut exact: Vec<Vec<BTreeSet<Tree>>> = vec![vec![BTreeSet::new(); self.states.len()]];
                for k in 1..=n {
                    let mut row: Vec<BTreeSet<Tree>> = vec![BTreeSet::new(); self.states.len()];
                    for t in &self.transitions {
                        for sizes in compositions(k - 1, t.children.len()) {
                            let pools: Vec<Vec<Tree>> = t
                                .children
                                .iter()
                                .zip(&sizes)
                                .map(|(c, s)| exact[*s][*c].iter().cloned().collect())
                                .collect();
                            for kids in product(&pools) {
                                row[t.target].insert(Tree::new(self.alphabet[t.symbol].clone(), kids).expect("rank checked"));
                            }
                        }
                    }
                    exact.push(row);
                }
                let mut all: Vec<Tree> = exact.into_iter().flat_map(|mut row| row.swap_remove(q)).collect();
                all.sort();
                all
            }
        }
    }

    /// Debug listing: states, final states, transitions with symbol bodies.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = self.states.iter().map(S::to_string).collect();
        let _ = writeln!(out, "states: {}", names.join(" "));
        let fin: Vec<&str> = self.finals.iter().map(|q| names[*q].as_str()).collect();
        let _ = writeln!(out, "final: {}", fin.join(" "));
        let _ = writeln!(out, "transitions:");
        for t in &self.transitions {
            let kids: Vec<&str> = t.children.iter().map(|c| names[*c].as_str()).collect();
            if kids.is_empty() {
                let _ = writeln!(out, "  {} -> {}", self.alphabet[t.symbol], names[t.target]);
            } else {
                let _ = writeln!(out, "  {}({}) -> {}", self.alphabet[t.symbol], kids.join(", "), names[t.target]);
            }
        }
        out
    }
}

fn product(pools: &[Vec<Tree>]) -> Vec<Vec<Tree>> {
    let mut acc: Vec<Vec<Tree>> = vec![Vec::new()];
    for pool in pools {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                pool.iter().map(move |t| {
                    let mut v = prefix.clone();
                    v.push(t.clone());
                    v
                })
            })
            .collect();
    }
    acc
}

/// Ordered ways of writing `n` as a sum of `k` positive parts.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return if n == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..=n.saturating_sub(k - 1) {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
