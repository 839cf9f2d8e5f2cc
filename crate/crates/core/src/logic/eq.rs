use std::collections::BTreeMap;
use std::fmt;

use super::var::Var;
use crate::unionfind::UnionFind;

/// Separating conjunction of equalities, kept as a partition of an explicit
/// variable set. Classes are sorted and the class list is sorted, so
/// structural equality is logical equivalence.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct EqFormula {
    classes: Vec<Vec<Var>>,
}

impl EqFormula {
    pub fn new() -> Self {
        EqFormula::default()
    }

    /// Partition generated by `eqs` over `vars` and the variables of `eqs`.
    pub fn from_equalities(
        vars: impl IntoIterator<Item = Var>,
        eqs: impl IntoIterator<Item = (Var, Var)>,
    ) -> Self {
        let mut index: BTreeMap<Var, usize> = BTreeMap::new();
        let id = |v: Var, index: &mut BTreeMap<Var, usize>| -> usize {
            let n = index.len();
            *index.entry(v).or_insert(n)
        };
        for v in vars {
            id(v, &mut index);
        }
        let pairs: Vec<(usize, usize)> = eqs
            .into_iter()
            .map(|(a, b)| (id(a, &mut index), id(b, &mut index)))
            .collect();
        let mut uf = UnionFind::new(index.len());
        for (a, b) in pairs {
            uf.union(a, b);
        }
        let mut groups: BTreeMap<usize, Vec<Var>> = BTreeMap::new();
        for (v, i) in index {
            groups.entry(uf.find(i)).or_default().push(v);
        }
        EqFormula::from_groups(groups.into_values().collect())
    }

    pub fn from_classes(classes: impl IntoIterator<Item = Vec<Var>>) -> Self {
        let mut vars = Vec::new();
        let mut eqs = Vec::new();
        for c in classes {
            for w in c.windows(2) {
                eqs.push((w[0].clone(), w[1].clone()));
            }
            vars.extend(c);
        }
        EqFormula::from_equalities(vars, eqs)
    }

    fn from_groups(mut classes: Vec<Vec<Var>>) -> Self {
        for c in &mut classes {
            c.sort();
            c.dedup();
        }
        classes.retain(|c| !c.is_empty());
        classes.sort();
        EqFormula { classes }
    }

    pub fn classes(&self) -> &[Vec<Var>] {
        &self.classes
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.classes.iter().flatten()
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.class_of(v).is_some()
    }

    pub fn class_of(&self, v: &Var) -> Option<&[Var]> {
        self.classes.iter().find(|c| c.binary_search(v).is_ok()).map(Vec::as_slice)
    }

    /// `x` and `y` are in the same class (or syntactically equal).
    pub fn entails(&self, x: &Var, y: &Var) -> bool {
        x == y || self.class_of(x).is_some_and(|c| c.binary_search(y).is_ok())
    }

    /// Join of the two partitions.
    pub fn conjoin(&self, other: &EqFormula) -> EqFormula {
        let vars = self.vars().chain(other.vars()).cloned().collect::<Vec<_>>();
        let eqs = self.spanning_pairs().chain(other.spanning_pairs()).collect::<Vec<_>>();
        EqFormula::from_equalities(vars, eqs)
    }

    /// Existential elimination of every variable matching `drop`.
    pub fn qelim(&self, drop: impl Fn(&Var) -> bool) -> EqFormula {
        self.restrict(|v| !drop(v))
    }

    /// Restriction of the partition to variables matching `keep`.
    pub fn restrict(&self, keep: impl Fn(&Var) -> bool) -> EqFormula {
        EqFormula::from_groups(
            self.classes
                .iter()
                .map(|c| c.iter().filter(|v| keep(v)).cloned().collect())
                .collect(),
        )
    }

    /// Image under `f`; classes whose images meet are merged.
    pub fn rename(&self, f: impl Fn(&Var) -> Var) -> EqFormula {
        EqFormula::from_classes(self.classes.iter().map(|c| c.iter().map(&f).collect()))
    }

    fn spanning_pairs(&self) -> impl Iterator<Item = (Var, Var)> + '_ {
        self.classes
            .iter()
            .flat_map(|c| c.windows(2).map(|w| (w[0].clone(), w[1].clone())))
    }

    /// One equality per non-representative variable.
    pub fn equalities(&self) -> Vec<(Var, Var)> {
        self.classes
            .iter()
            .flat_map(|c| c[1..].iter().map(move |v| (c[0].clone(), v.clone())))
            .collect()
    }
}

impl fmt::Display for EqFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cs: Vec<String> = self
            .classes
            .iter()
            .map(|c| c.iter().map(Var::to_string).collect::<Vec<_>>().join("="))
            .collect();
        write!(f, "{{{}}}", cs.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Var {
        Var::named(s)
    }

    fn eqs(pairs: &[(&str, &str)]) -> EqFormula {
        EqFormula::from_equalities([], pairs.iter().map(|(a, b)| (v(a), v(b))))
    }

    #[test]
    fn conjoin_is_transitive() {
        let a = eqs(&[("x", "y")]).conjoin(&eqs(&[("y", "z")]));
        assert_eq!(a, eqs(&[("x", "y"), ("x", "z")]));
        assert_eq!(a.conjoin(&EqFormula::new()), a);
    }

    #[test]
    fn conjoin_begin_end_example() {
        let a = EqFormula::from_equalities([], [(Var::Begin(1), v("x")), (Var::End(1), v("y"))]);
        let c = a.conjoin(&eqs(&[("x", "y")]));
        assert!(c.entails(&Var::Begin(1), &Var::End(1)));
    }

    #[test]
    fn qelim_projects() {
        let a = eqs(&[("x", "y"), ("x", "z")]).qelim(|u| *u == v("x"));
        assert_eq!(a, eqs(&[("y", "z")]));
        let only_x = EqFormula::from_equalities([v("x")], []);
        assert_eq!(only_x.qelim(|u| *u == v("x")), EqFormula::new());
    }

    #[test]
    fn entails_basic() {
        assert!(eqs(&[("x", "y")]).entails(&v("x"), &v("y")));
        assert!(!EqFormula::new().entails(&v("x"), &v("y")));
    }

    #[test]
    fn singletons_are_recorded() {
        let a = EqFormula::from_equalities([v("w")], [(v("x"), v("y"))]);
        assert!(a.contains(&v("w")));
        assert_eq!(a.to_string(), "{w, x=y}");
    }
}
