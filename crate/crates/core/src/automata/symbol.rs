use std::fmt;
use std::sync::Arc;

use crate::error::AutomatonError;
use crate::logic::{Address, Atom, Formula, Var};

/// `⟨exists locals . atoms, a0, a1, .., ah⟩` over the canonical variables
/// `Param(i)` (i ≤ a0), `ChildParam(l, i)` (i ≤ al) and the bound `Local`s.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Symbol {
    exists: Vec<Var>,
    atoms: Vec<Atom>,
    arities: Vec<usize>,
}

impl Symbol {
    pub fn new(exists: Vec<Var>, atoms: Vec<Atom>, arities: Vec<usize>) -> Result<Self, AutomatonError> {
        assert!(!arities.is_empty(), "arity list holds at least a0");
        let ok = |v: &Var| match v {
            Var::Param(i) => *i >= 1 && (*i as usize) <= arities[0],
            Var::ChildParam(l, i) => {
                *l >= 1 && (*l as usize) < arities.len() && *i >= 1 && (*i as usize) <= arities[*l as usize]
            }
            Var::Local(_) => exists.contains(v),
            _ => false,
        };
        for v in exists.iter().filter(|v| !matches!(v, Var::Local(_))) {
            return Err(AutomatonError::BadSymbolVar(v.clone()));
        }
        for a in &atoms {
            if let Some(v) = a.vars().into_iter().find(|v| !ok(v)) {
                return Err(AutomatonError::BadSymbolVar(v.clone()));
            }
        }
        Ok(Symbol { exists, atoms, arities })
    }

    pub fn exists(&self) -> &[Var] {
        &self.exists
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn rank(&self) -> usize {
        self.arities.len() - 1
    }

    /// The same symbol with another atom list.
    pub fn with_atoms(&self, atoms: Vec<Atom>) -> Symbol {
        Symbol { exists: self.exists.clone(), atoms, arities: self.arities.clone() }
    }

    pub fn body(&self) -> Formula {
        Formula::exists(self.exists.clone(), Formula::sep(self.atoms.iter().cloned().map(Formula::Atom)))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ar: Vec<String> = self.arities.iter().map(usize::to_string).collect();
        write!(f, "<{}, {}>", self.body(), ar.join(", "))
    }
}

/// A finite ranked tree; the number of children equals the symbol rank.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Tree {
    symbol: Arc<Symbol>,
    children: Vec<Tree>,
}

impl Tree {
    pub fn new(symbol: Arc<Symbol>, children: Vec<Tree>) -> Result<Self, AutomatonError> {
        if symbol.rank() != children.len() {
            return Err(AutomatonError::RankMismatch { rank: symbol.rank(), children: children.len() });
        }
        Ok(Tree { symbol, children })
    }

    pub fn leaf(symbol: Arc<Symbol>) -> Result<Self, AutomatonError> {
        Tree::new(symbol, Vec::new())
    }

    pub fn symbol(&self) -> &Arc<Symbol> {
        &self.symbol
    }

    pub fn children(&self) -> &[Tree] {
        &self.children
    }

    pub fn subtree(&self, u: &Address) -> Result<&Tree, AutomatonError> {
        let mut t = self;
        for &l in &u.0 {
            t = (l as usize).checked_sub(1).and_then(|i| t.children.get(i)).ok_or_else(|| AutomatonError::BadAddress(u.to_string()))?;
        }
        Ok(t)
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        1 + self.children.iter().map(Tree::height).max().unwrap_or(0)
    }

    /// Domain in preorder.
    pub fn addresses(&self) -> Vec<Address> {
        let mut out = Vec::new();
        self.collect(Address::root(), &mut out);
        out
    }

    fn collect(&self, u: Address, out: &mut Vec<Address>) {
        out.push(u.clone());
        for (l, c) in self.children.iter().enumerate() {
            c.collect(u.child(l as u32 + 1), out);
        }
    }

    /// Same shape with every symbol replaced.
    pub fn map(&self, f: &impl Fn(&Arc<Symbol>) -> Arc<Symbol>) -> Tree {
        Tree { symbol: f(&self.symbol), children: self.children.iter().map(|c| c.map(f)).collect() }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol)?;
        if !self.children.is_empty() {
            let cs: Vec<String> = self.children.iter().map(Tree::to_string).collect();
            write!(f, "({})", cs.join(", "))?;
        }
        Ok(())
    }
}
