//! Components, behaviors and configurations, together with composition,
//! the step relation and canonical forms modulo component renaming.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::ModelError;
use crate::unionfind::UnionFind;

/// Interned symbol used for ports, states, predicates and variable names.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Self {
        Name(Arc::from(s))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

pub type Port = Name;
pub type State = Name;

/// Component identifier. Rendered as `c<N>`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ComponentId(pub u32);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// The finite-state machine run by every component.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Behavior {
    ports: BTreeSet<Port>,
    states: BTreeSet<State>,
    transitions: BTreeSet<(State, Port, State)>,
}

impl Behavior {
    pub fn new(
        ports: impl IntoIterator<Item = Port>,
        states: impl IntoIterator<Item = State>,
        transitions: impl IntoIterator<Item = (State, Port, State)>,
    ) -> Result<Self, ModelError> {
        let b = Behavior {
            ports: ports.into_iter().collect(),
            states: states.into_iter().collect(),
            transitions: transitions.into_iter().collect(),
        };
        for (q, p, r) in &b.transitions {
            for s in [q, r] {
                if !b.states.contains(s) {
                    return Err(ModelError::UndeclaredState(s.clone()));
                }
            }
            if !b.ports.contains(p) {
                return Err(ModelError::UndeclaredPort(p.clone()));
            }
        }
        Ok(b)
    }

    pub fn ports(&self) -> &BTreeSet<Port> {
        &self.ports
    }

    pub fn states(&self) -> &BTreeSet<State> {
        &self.states
    }

    pub fn transitions(&self) -> &BTreeSet<(State, Port, State)> {
        &self.transitions
    }

    /// States reachable from `q` by one `p`-transition.
    pub fn post(&self, q: &State, p: &Port) -> Vec<State> {
        self.transitions
            .iter()
            .filter(|(a, b, _)| a == q && b == p)
            .map(|(_, _, r)| r.clone())
            .collect()
    }

    /// All `(q, q')` with `q -p-> q'`.
    pub fn moves(&self, p: &Port) -> Vec<(State, State)> {
        self.transitions
            .iter()
            .filter(|(_, b, _)| b == p)
            .map(|(a, _, r)| (a.clone(), r.clone()))
            .collect()
    }
}

/// Ordered port sequence of an interaction.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct InteractionType(Vec<Port>);

impl InteractionType {
    pub fn new(ports: Vec<Port>) -> Result<Self, ModelError> {
        if ports.is_empty() {
            return Err(ModelError::EmptyInteraction);
        }
        Ok(InteractionType(ports))
    }

    pub fn ports(&self) -> &[Port] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for InteractionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<&str> = self.0.iter().map(Name::as_str).collect();
        write!(f, "({})", ps.join(", "))
    }
}

/// Ordered bindings of pairwise distinct components to ports.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Interaction(Vec<(ComponentId, Port)>);

impl Interaction {
    pub fn new(bindings: Vec<(ComponentId, Port)>) -> Result<Self, ModelError> {
        if bindings.is_empty() {
            return Err(ModelError::EmptyInteraction);
        }
        for (i, (c, _)) in bindings.iter().enumerate() {
            if bindings[..i].iter().any(|(d, _)| d == c) {
                return Err(ModelError::RepeatedComponent(*c));
            }
        }
        Ok(Interaction(bindings))
    }

    pub fn bindings(&self) -> &[(ComponentId, Port)] {
        &self.0
    }

    pub fn components(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.0.iter().map(|(c, _)| *c)
    }

    pub fn ty(&self) -> InteractionType {
        InteractionType(self.0.iter().map(|(_, p)| p.clone()).collect())
    }

    pub fn mentions(&self, c: ComponentId) -> bool {
        self.0.iter().any(|(d, _)| *d == c)
    }

    fn rename(&self, f: &impl Fn(ComponentId) -> ComponentId) -> Interaction {
        Interaction(self.0.iter().map(|(c, p)| (f(*c), p.clone())).collect())
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bs: Vec<String> = self.0.iter().map(|(c, p)| format!("{c}.{p}")).collect();
        write!(f, "<{}>", bs.join(", "))
    }
}

/// Components, interactions and a state map over a finite carrier.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Configuration {
    components: BTreeSet<ComponentId>,
    interactions: BTreeSet<Interaction>,
    states: BTreeMap<ComponentId, State>,
}

impl Configuration {
    pub fn new(
        components: impl IntoIterator<Item = ComponentId>,
        interactions: impl IntoIterator<Item = Interaction>,
        states: BTreeMap<ComponentId, State>,
    ) -> Result<Self, ModelError> {
        let g = Configuration {
            components: components.into_iter().collect(),
            interactions: interactions.into_iter().collect(),
            states,
        };
        for c in g.components.iter().copied().chain(g.interactions.iter().flat_map(|i| i.components())) {
            if !g.states.contains_key(&c) {
                return Err(ModelError::MissingState(c));
            }
        }
        Ok(g)
    }

    pub fn empty() -> Self {
        Configuration::default()
    }

    pub fn components(&self) -> &BTreeSet<ComponentId> {
        &self.components
    }

    pub fn interactions(&self) -> &BTreeSet<Interaction> {
        &self.interactions
    }

    pub fn state_map(&self) -> &BTreeMap<ComponentId, State> {
        &self.states
    }

    pub fn state(&self, c: ComponentId) -> Option<&State> {
        self.states.get(&c)
    }

    /// Ids on which the state map is defined.
    pub fn carrier(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.states.keys().copied()
    }

    /// Disjoint union. `Ok(None)` when components or interactions overlap.
    pub fn compose(&self, other: &Configuration) -> Result<Option<Configuration>, ModelError> {
        for (c, q) in &other.states {
            if let Some(r) = self.states.get(c) {
                if r != q {
                    return Err(ModelError::StateMapMismatch(*c));
                }
            }
        }
        if !self.components.is_disjoint(&other.components)
            || !self.interactions.is_disjoint(&other.interactions)
        {
            return Ok(None);
        }
        let mut g = self.clone();
        g.components.extend(other.components.iter().copied());
        g.interactions.extend(other.interactions.iter().cloned());
        g.states.extend(other.states.iter().map(|(c, q)| (*c, q.clone())));
        Ok(Some(g))
    }

    /// Successors obtained by firing `i`, one per choice of transitions.
    pub fn step(&self, i: &Interaction, behavior: &Behavior) -> Result<Vec<Configuration>, ModelError> {
        if !self.interactions.contains(i) {
            return Err(ModelError::UnknownInteraction(i.to_string()));
        }
        let mut choices: Vec<Vec<State>> = Vec::with_capacity(i.0.len());
        for (c, p) in &i.0 {
            let q = self.states.get(c).ok_or(ModelError::MissingState(*c))?;
            let post = behavior.post(q, p);
            if post.is_empty() {
                return Ok(Vec::new());
            }
            choices.push(post);
        }
        let mut out = Vec::new();
        let mut pick = vec![0usize; choices.len()];
        loop {
            let mut g = self.clone();
            for (k, (c, _)) in i.0.iter().enumerate() {
                g.states.insert(*c, choices[k][pick[k]].clone());
            }
            out.push(g);
            let mut k = 0;
            loop {
                if k == pick.len() {
                    out.sort();
                    out.dedup();
                    return Ok(out);
                }
                pick[k] += 1;
                if pick[k] < choices[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
        }
    }

    /// Union of `step` over all interactions.
    pub fn successors(&self, behavior: &Behavior) -> BTreeSet<Configuration> {
        self.interactions
            .iter()
            .flat_map(|i| self.step(i, behavior).expect("interaction belongs to configuration"))
            .collect()
    }

    /// Reflexive-transitive closure of `successors`.
    pub fn reachable(&self, behavior: &Behavior) -> BTreeSet<Configuration> {
        let mut seen = BTreeSet::new();
        let mut work = vec![self.clone()];
        seen.insert(self.clone());
        while let Some(g) = work.pop() {
            for h in g.successors(behavior) {
                if seen.insert(h.clone()) {
                    work.push(h);
                }
            }
        }
        seen
    }

    /// Largest number of interactions mentioning one id.
    pub fn degree(&self) -> usize {
        let mut count: BTreeMap<ComponentId, usize> = BTreeMap::new();
        for i in &self.interactions {
            for c in i.components() {
                *count.entry(c).or_default() += 1;
            }
        }
        count.values().copied().max().unwrap_or(0)
    }

    /// Every id bound by an interaction is a present component.
    pub fn is_tight(&self) -> bool {
        self.interactions
            .iter()
            .all(|i| i.components().all(|c| self.components.contains(&c)))
    }

    pub fn rename(&self, f: impl Fn(ComponentId) -> ComponentId) -> Configuration {
        Configuration {
            components: self.components.iter().map(|c| f(*c)).collect(),
            interactions: self.interactions.iter().map(|i| i.rename(&f)).collect(),
            states: self.states.iter().map(|(c, q)| (f(*c), q.clone())).collect(),
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cs: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        let is: Vec<String> = self.interactions.iter().map(|i| i.to_string()).collect();
        let qs: Vec<String> = self.states.iter().map(|(c, q)| format!("{c} = {q}")).collect();
        write!(f, "{{{}}} {{{}}} [{}]", cs.join(", "), is.join(", "), qs.join(", "))
    }
}

/// Canonical representative of `(g, labels)` modulo bijective renaming of
/// component ids. Two inputs are isomorphic iff their canonical forms are
/// equal. Ids of the result are `c1..cn`.
pub fn canonical_form<L: Ord + Clone>(
    g: &Configuration,
    labels: &[(L, ComponentId)],
) -> (Configuration, Vec<(L, ComponentId)>) {
    let mut verts: BTreeSet<ComponentId> = g.states.keys().copied().collect();
    verts.extend(g.components.iter().copied());
    verts.extend(labels.iter().map(|(_, c)| *c));
    let verts: Vec<ComponentId> = verts.into_iter().collect();
    let index: BTreeMap<ComponentId, usize> = verts.iter().enumerate().map(|(i, c)| (*c, i)).collect();

    let inters: Vec<&Interaction> = g.interactions.iter().collect();
    let types: Vec<InteractionType> = inters.iter().map(|i| i.ty()).collect();
    let ty_rank = rank(&types);
    let members: Vec<Vec<usize>> = inters
        .iter()
        .map(|i| i.components().map(|c| index[&c]).collect())
        .collect();
    let mut incidence: Vec<Vec<(usize, usize)>> = vec![Vec::new(); verts.len()];
    for (k, ms) in members.iter().enumerate() {
        for (pos, v) in ms.iter().enumerate() {
            incidence[*v].push((k, pos));
        }
    }

    let initial: Vec<(bool, Option<&State>, Vec<&L>)> = verts
        .iter()
        .map(|c| {
            let mut ls: Vec<&L> = labels.iter().filter(|(_, d)| d == c).map(|(l, _)| l).collect();
            ls.sort();
            (g.components.contains(c), g.states.get(c), ls)
        })
        .collect();
    let ctx = Refiner { ty_rank, members, incidence };
    let colors = ctx.refine(rank(&initial));

    let best = ctx.search(colors, &mut |colors: &[u32]| {
        let map: BTreeMap<ComponentId, ComponentId> = verts
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, ComponentId(colors[i] + 1)))
            .collect();
        let h = g.rename(|c| map[&c]);
        let mut ls: Vec<(L, ComponentId)> = labels.iter().map(|(l, c)| (l.clone(), map[c])).collect();
        ls.sort();
        (h, ls)
    });
    best
}

fn rank<T: Ord>(keys: &[T]) -> Vec<u32> {
    let mut sorted: Vec<&T> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(&k).expect("present") as u32)
        .collect()
}

struct Refiner {
    ty_rank: Vec<u32>,
    members: Vec<Vec<usize>>,
    incidence: Vec<Vec<(usize, usize)>>,
}

impl Refiner {
    fn classes(colors: &[u32]) -> usize {
        colors.iter().collect::<BTreeSet<_>>().len()
    }

    fn refine(&self, mut colors: Vec<u32>) -> Vec<u32> {
        loop {
            let before = Self::classes(&colors);
            let keys: Vec<(u32, Vec<(u32, usize, Vec<u32>)>)> = (0..colors.len())
                .map(|v| {
                    let mut sig: Vec<(u32, usize, Vec<u32>)> = self.incidence[v]
                        .iter()
                        .map(|(k, pos)| {
                            let cs = self.members[*k].iter().map(|m| colors[*m]).collect();
                            (self.ty_rank[*k], *pos, cs)
                        })
                        .collect();
                    sig.sort();
                    (colors[v], sig)
                })
                .collect();
            colors = rank(&keys);
            if Self::classes(&colors) == before {
                return colors;
            }
        }
    }

    /// Smallest leaf value over the individualization-refinement tree.
    /// Leaves tying with the best so far yield automorphisms, which prune
    /// siblings in the same orbit of the stabilizer of the current path.
    fn search<K: Ord>(&self, colors: Vec<u32>, leaf: &mut impl FnMut(&[u32]) -> K) -> K {
        let mut st = Search { best: None, autos: Vec::new(), path: Vec::new() };
        self.descend(colors, leaf, &mut st);
        st.best.expect("search visits at least one leaf").0
    }

    fn descend<K: Ord>(&self, colors: Vec<u32>, leaf: &mut impl FnMut(&[u32]) -> K, st: &mut Search<K>) {
        let n = colors.len();
        let mut size: BTreeMap<u32, usize> = BTreeMap::new();
        for c in &colors {
            *size.entry(*c).or_default() += 1;
        }
        let Some((&target, _)) = size.iter().find(|(_, s)| **s > 1) else {
            let k = leaf(&colors);
            match &st.best {
                Some((b, bc)) if k == *b => {
                    let mut at = vec![0; n];
                    for (j, c) in bc.iter().enumerate() {
                        at[*c as usize] = j;
                    }
                    st.autos.push(colors.iter().map(|c| at[*c as usize]).collect());
                }
                Some((b, _)) if k > *b => {}
                _ => st.best = Some((k, colors)),
            }
            return;
        };
        let mut tried: Vec<usize> = Vec::new();
        for v in 0..n {
            if colors[v] != target {
                continue;
            }
            if !tried.is_empty() {
                let orbit = st.orbits(n);
                if tried.iter().any(|u| orbit[*u] == orbit[v]) {
                    continue;
                }
            }
            tried.push(v);
            let keys: Vec<(u32, bool)> = (0..n).map(|u| (colors[u], u != v)).collect();
            st.path.push(v);
            self.descend(self.refine(rank(&keys)), leaf, st);
            st.path.pop();
        }
    }
}

struct Search<K> {
    best: Option<(K, Vec<u32>)>,
    autos: Vec<Vec<usize>>,
    path: Vec<usize>,
}

impl<K> Search<K> {
    /// Orbit representative of every vertex under the automorphisms found
    /// so far that fix the current path pointwise.
    fn orbits(&self, n: usize) -> Vec<usize> {
        let mut uf = UnionFind::new(n);
        for a in self.autos.iter().filter(|a| self.path.iter().all(|v| a[*v] == *v)) {
            for (i, j) in a.iter().enumerate() {
                uf.union(i, *j);
            }
        }
        (0..n).map(|i| uf.find(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(s: &str) -> State {
        Name::new(s)
    }

    fn ring_behavior() -> Behavior {
        Behavior::new(
            [st("in"), st("out")],
            [st("H"), st("T")],
            [(st("H"), st("in"), st("T")), (st("T"), st("out"), st("H"))],
        )
        .unwrap()
    }

    fn link(a: u32, b: u32) -> Interaction {
        Interaction::new(vec![(ComponentId(a), st("out")), (ComponentId(b), st("in"))]).unwrap()
    }

    fn ring(states: &[&str]) -> Configuration {
        let n = states.len() as u32;
        let qs = (0..n).map(|i| (ComponentId(i + 1), st(states[i as usize]))).collect();
        Configuration::new((1..=n).map(ComponentId), (1..=n).map(|i| link(i, i % n + 1)), qs).unwrap()
    }

    #[test]
    fn interaction_rejects_repeated_component() {
        let r = Interaction::new(vec![(ComponentId(1), st("out")), (ComponentId(1), st("in"))]);
        assert!(matches!(r, Err(ModelError::RepeatedComponent(_))));
    }

    #[test]
    fn compose_with_empty_is_identity() {
        let g = ring(&["H", "T"]);
        assert_eq!(g.compose(&Configuration::empty()).unwrap(), Some(g.clone()));
    }

    #[test]
    fn compose_overlap_is_undefined() {
        let g = ring(&["H", "T"]);
        assert_eq!(g.compose(&g).unwrap(), None);
    }

    #[test]
    fn compose_state_mismatch_is_error() {
        let g = ring(&["H", "T"]);
        let h = Configuration::new([], [], [(ComponentId(1), st("T"))].into()).unwrap();
        assert!(matches!(g.compose(&h), Err(ModelError::StateMapMismatch(_))));
    }

    #[test]
    fn step_requires_own_interaction() {
        let g = ring(&["H", "T"]);
        assert!(g.step(&link(5, 6), &ring_behavior()).is_err());
    }

    #[test]
    fn disabled_interaction_has_no_successor() {
        let g = ring(&["H", "H"]);
        assert!(g.step(&link(1, 2), &ring_behavior()).unwrap().is_empty());
    }

    #[test]
    fn nondeterministic_step() {
        let b = Behavior::new(
            [st("p")],
            [st("q"), st("q1"), st("q2")],
            [(st("q"), st("p"), st("q1")), (st("q"), st("p"), st("q2"))],
        )
        .unwrap();
        let i = Interaction::new(vec![(ComponentId(1), st("p"))]).unwrap();
        let g = Configuration::new([ComponentId(1)], [i.clone()], [(ComponentId(1), st("q"))].into()).unwrap();
        assert_eq!(g.step(&i, &b).unwrap().len(), 2);
    }

    #[test]
    fn two_ring_token_positions_closed() {
        let g = ring(&["T", "H"]);
        let b = ring_behavior();
        let reach = g.reachable(&b);
        assert_eq!(reach, [ring(&["T", "H"]), ring(&["H", "T"])].into_iter().collect());
        assert!(g.successors(&Behavior::default()).is_empty());
    }

    #[test]
    fn degree_examples() {
        assert_eq!(Configuration::empty().degree(), 0);
        let star = Configuration::new(
            (1..=4).map(ComponentId),
            [link(1, 2), link(1, 3), link(1, 4)],
            (1..=4).map(|i| (ComponentId(i), st("H"))).collect(),
        )
        .unwrap();
        assert_eq!(star.degree(), 3);
    }

    #[test]
    fn tightness() {
        let loose = Configuration::new(
            [],
            [link(1, 2)],
            [(ComponentId(1), st("T")), (ComponentId(2), st("H"))].into(),
        )
        .unwrap();
        assert!(!loose.is_tight());
        assert!(ring(&["H", "T", "H"]).is_tight());
    }

    #[test]
    fn canonical_form_identifies_rotations() {
        let a = ring(&["H", "T", "T"]);
        let b = ring(&["T", "H", "T"]);
        let c = ring(&["T", "T", "H"]);
        let ka = canonical_form::<u8>(&a, &[]);
        assert_eq!(ka, canonical_form::<u8>(&b, &[]));
        assert_eq!(ka, canonical_form::<u8>(&c, &[]));
        assert_ne!(ka, canonical_form::<u8>(&ring(&["H", "H", "T"]), &[]));
    }

    #[test]
    fn canonical_form_respects_labels() {
        let a = ring(&["H", "H"]);
        let x1 = canonical_form(&a, &[("x", ComponentId(1))]);
        let x2 = canonical_form(&a, &[("x", ComponentId(2))]);
        assert_eq!(x1, x2);
        let ab = canonical_form(&a, &[("x", ComponentId(1)), ("y", ComponentId(1))]);
        let ab2 = canonical_form(&a, &[("x", ComponentId(1)), ("y", ComponentId(2))]);
        assert_ne!(ab, ab2);
    }

    #[test]
    fn canonical_form_separates_regular_graphs() {
        // One 6-ring and two 3-rings look alike to colour refinement.
        let six = ring(&["H"; 6]);
        let threes = Configuration::new(
            (1..=6).map(ComponentId),
            [link(1, 2), link(2, 3), link(3, 1), link(4, 5), link(5, 6), link(6, 4)],
            (1..=6).map(|i| (ComponentId(i), st("H"))).collect(),
        )
        .unwrap();
        let k6 = canonical_form::<u8>(&six, &[]);
        assert_ne!(k6, canonical_form::<u8>(&threes, &[]));
        let shuffled = six.rename(|c| ComponentId([4, 6, 1, 3, 2, 5][c.0 as usize - 1]));
        assert_eq!(k6, canonical_form::<u8>(&shuffled, &[]));
        let swapped = threes.rename(|c| ComponentId((c.0 + 2) % 6 + 1));
        assert_eq!(canonical_form::<u8>(&threes, &[]), canonical_form::<u8>(&swapped, &[]));
    }
}
