use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{lex, Pos, Tok};
use super::{Query, SystemFile};
use crate::error::ParseError;
use crate::logic::{Atom, Formula, Rule, Sid, Var};
use crate::model::{Behavior, ComponentId, Configuration, Interaction, Name};

type Env = BTreeMap<String, i64>;

/// Index expression of a predicate family reference.
enum Expr {
    Int(i64),
    Var(String, Pos),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn eval(&self, env: &Env) -> Result<i64, ParseError> {
        Ok(match self {
            Expr::Int(n) => *n,
            Expr::Var(s, pos) => *env.get(s).ok_or_else(|| pos.error(format!("unbound index `{s}`")))?,
            Expr::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Expr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Expr::Max(a, b) => a.eval(env)?.max(b.eval(env)?),
            Expr::Min(a, b) => a.eval(env)?.min(b.eval(env)?),
        })
    }
}

struct RawRule {
    rule: Rule,
    pos: Pos,
    calls: Vec<(Name, usize, Pos)>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    ports: Vec<(Name, Pos)>,
    states: Vec<(Name, Pos)>,
    calls: Vec<(Name, usize, Pos)>,
}

pub(crate) fn parse_system(text: &str) -> Result<SystemFile, ParseError> {
    let mut p = Parser::new(text)?;
    let mut behavior: Option<(Vec<Name>, Vec<Name>, Vec<(Name, Name, Name)>)> = None;
    let mut raw_rules: Vec<RawRule> = Vec::new();
    let mut raw_configs = Vec::new();
    let mut queries = Vec::new();
    loop {
        let pos = p.pos();
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(k) if k == "behavior" => {
                if behavior.is_some() {
                    return Err(pos.error("duplicate behavior block"));
                }
                p.bump();
                behavior = Some(p.behavior()?);
            }
            Tok::Ident(k) if k == "sid" => {
                p.bump();
                p.expect(Tok::LBrace)?;
                while *p.peek() != Tok::RBrace {
                    raw_rules.extend(p.rules()?);
                }
                p.bump();
            }
            Tok::Ident(k) if k == "config" => {
                p.bump();
                raw_configs.push(p.config()?);
            }
            Tok::Ident(k) if k == "query" => {
                p.bump();
                let start = p.calls.len();
                let q = p.query()?;
                queries.push((q, p.calls.split_off(start)));
            }
            t => return Err(pos.error(format!("expected `behavior`, `sid`, `config` or `query`, found {}", t.describe()))),
        }
    }

    let (ports, states, trans) = behavior.unwrap_or_default();
    let declared_ports: BTreeSet<&Name> = ports.iter().collect();
    let declared_states: BTreeSet<&Name> = states.iter().collect();
    for (n, pos) in &p.ports {
        if !declared_ports.contains(n) {
            return Err(pos.error(format!("undeclared port `{n}`")));
        }
    }
    for (n, pos) in &p.states {
        if !declared_states.contains(n) {
            return Err(pos.error(format!("undeclared state `{n}`")));
        }
    }
    let behavior = Behavior::new(ports, states, trans).map_err(|e| Pos { line: 1, col: 1 }.error(e.to_string()))?;

    let mut arity: BTreeMap<Name, usize> = BTreeMap::new();
    for r in &raw_rules {
        let rule = &r.rule;
        if let Some(&n) = arity.get(&rule.pred) {
            if n != rule.arity() {
                return Err(r.pos.error(format!("predicate `{}` declared with {n} parameters, found {}", rule.pred, rule.arity())));
            }
        }
        arity.insert(rule.pred.clone(), rule.arity());
        for (i, x) in rule.params.iter().enumerate() {
            if rule.params[..i].contains(x) {
                return Err(r.pos.error(format!("parameter `{x}` repeated in head of `{}`", rule.pred)));
            }
        }
        if let Some(x) = rule.body.free_vars().into_iter().find(|x| !rule.params.contains(x)) {
            return Err(r.pos.error(format!("variable `{x}` is free in the body of `{}` but not a parameter", rule.pred)));
        }
    }
    let all_calls = raw_rules.iter().flat_map(|r| r.calls.iter()).chain(queries.iter().flat_map(|(_, cs)| cs.iter()));
    for (name, n, pos) in all_calls {
        match arity.get(name) {
            None => return Err(pos.error(format!("undefined predicate `{name}`"))),
            Some(&m) if m != *n => {
                return Err(pos.error(format!("predicate `{name}` expects {m} arguments, found {n}")))
            }
            _ => {}
        }
    }
    let rules = raw_rules.into_iter().map(|r| r.rule).collect();
    let sid = Sid::new(behavior, rules).map_err(|e| Pos { line: 1, col: 1 }.error(e.to_string()))?;

    let mut configs = Vec::new();
    for (name, pos, comps, inters, qs) in raw_configs {
        let g = Configuration::new(comps, inters, qs).map_err(|e| pos.error(e.to_string()))?;
        configs.push((name, g));
    }
    for (q, _) in &queries {
        if let Query::Invariant(a) = q {
            if !arity.contains_key(a) {
                return Err(Pos { line: 1, col: 1 }.error(format!("undefined predicate `{a}`")));
            }
        }
    }
    Ok(SystemFile { sid, configs, queries: queries.into_iter().map(|(q, _)| q).collect() })
}

pub(crate) fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula(&Env::new())?;
    p.expect(Tok::Eof)?;
    Ok(f)
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(text)?, i: 0, ports: Vec::new(), states: Vec::new(), calls: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.pos().error(format!("expected {}, found {}", t.describe(), self.peek().describe())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            t => Err(self.pos().error(format!("expected identifier, found {}", t.describe()))),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            t => Err(self.pos().error(format!("expected integer, found {}", t.describe()))),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Pos)>, ParseError> {
        let mut out = Vec::new();
        if matches!(self.peek(), Tok::Ident(_)) {
            loop {
                let pos = self.pos();
                out.push((self.ident()?, pos));
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
        }
        Ok(out)
    }

    #[allow(clippy::type_complexity)]
    fn behavior(&mut self) -> Result<(Vec<Name>, Vec<Name>, Vec<(Name, Name, Name)>), ParseError> {
        self.expect(Tok::LBrace)?;
        let (mut ports, mut states, mut trans) = (Vec::new(), Vec::new(), Vec::new());
        while *self.peek() != Tok::RBrace {
            let pos = self.pos();
            match self.ident()?.as_str() {
                "ports" => ports.extend(self.ident_list()?.into_iter().map(|(s, _)| Name::from(s))),
                "states" => states.extend(self.ident_list()?.into_iter().map(|(s, _)| Name::from(s))),
                "trans" => {
                    let q = self.ident()?;
                    let qpos = self.pos();
                    self.expect(Tok::Minus)?;
                    let ppos = self.pos();
                    let port = self.ident()?;
                    self.expect(Tok::RArrow)?;
                    let rpos = self.pos();
                    let r = self.ident()?;
                    self.states.push((Name::from(q.clone()), qpos));
                    self.ports.push((Name::from(port.clone()), ppos));
                    self.states.push((Name::from(r.clone()), rpos));
                    trans.push((Name::from(q), Name::from(port), Name::from(r)));
                }
                other => return Err(pos.error(format!("expected `ports`, `states` or `trans`, found `{other}`"))),
            }
            self.expect(Tok::Semi)?;
        }
        self.bump();
        Ok((ports, states, trans))
    }

    /// One rule, or the instances of a macro family rule.
    fn rules(&mut self) -> Result<Vec<RawRule>, ParseError> {
        let pos = self.pos();
        let base = self.ident()?;
        let mut binders: Vec<(String, i64, i64)> = Vec::new();
        if *self.peek() == Tok::LBracket {
            self.bump();
            loop {
                let b = self.ident()?;
                self.expect(Tok::Eq)?;
                let lo = self.int()?;
                self.expect(Tok::DotDot)?;
                let hi = self.int()?;
                binders.push((b, lo, hi));
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
            self.expect(Tok::RBracket)?;
        }
        let mut envs: Vec<Env> = vec![Env::new()];
        for (b, lo, hi) in &binders {
            envs = envs
                .into_iter()
                .flat_map(|e| {
                    (*lo..=*hi).map(move |v| {
                        let mut e = e.clone();
                        e.insert(b.clone(), v);
                        e
                    })
                })
                .collect();
        }
        let start = self.i;
        let mut out = Vec::new();
        for env in envs {
            self.i = start;
            let idx: Vec<i64> = binders.iter().map(|(b, _, _)| env[b]).collect();
            let pred = family_name(&base, &idx, pos)?;
            self.expect(Tok::LParen)?;
            let params: Vec<Var> = self.ident_list()?.into_iter().map(|(s, _)| Var::Named(s.into())).collect();
            self.expect(Tok::RParen)?;
            self.expect(Tok::LArrow)?;
            let mark = self.calls.len();
            let body = self.formula(&env)?;
            self.expect(Tok::Semi)?;
            let calls = self.calls.split_off(mark);
            out.push(RawRule { rule: Rule::new(pred, params, body), pos, calls });
        }
        Ok(out)
    }

    #[allow(clippy::type_complexity)]
    fn config(
        &mut self,
    ) -> Result<(Name, Pos, Vec<ComponentId>, Vec<Interaction>, BTreeMap<ComponentId, Name>), ParseError> {
        let pos = self.pos();
        let name = Name::from(self.ident()?);
        self.expect(Tok::LBrace)?;
        let (mut comps, mut inters, mut qs) = (Vec::new(), Vec::new(), BTreeMap::new());
        while *self.peek() != Tok::RBrace {
            let kpos = self.pos();
            match self.ident()?.as_str() {
                "components" => {
                    for (s, p) in self.ident_list()? {
                        comps.push(component_id(&s, p)?);
                    }
                }
                "interactions" => {
                    if *self.peek() == Tok::Lt {
                        loop {
                            let ipos = self.pos();
                            let bs = self.bindings()?;
                            let mut ids = Vec::new();
                            for (s, p, port) in bs {
                                ids.push((component_id(&s, p)?, port));
                            }
                            inters.push(Interaction::new(ids).map_err(|e| ipos.error(e.to_string()))?);
                            if *self.peek() != Tok::Comma {
                                break;
                            }
                            self.bump();
                        }
                    }
                }
                "states" => {
                    if matches!(self.peek(), Tok::Ident(_)) {
                        loop {
                            let cpos = self.pos();
                            let c = component_id(&self.ident()?, cpos)?;
                            self.expect(Tok::Eq)?;
                            let qpos = self.pos();
                            let q = Name::from(self.ident()?);
                            self.states.push((q.clone(), qpos));
                            qs.insert(c, q);
                            if *self.peek() != Tok::Comma {
                                break;
                            }
                            self.bump();
                        }
                    }
                }
                other => {
                    return Err(kpos.error(format!("expected `components`, `interactions` or `states`, found `{other}`")))
                }
            }
            self.expect(Tok::Semi)?;
        }
        self.bump();
        Ok((name, pos, comps, inters, qs))
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let pos = self.pos();
        let q = match self.ident()?.as_str() {
            "entail" => {
                let lhs = self.formula(&Env::new())?;
                self.expect(Tok::Entails)?;
                let rhs = self.formula(&Env::new())?;
                Query::Entail(lhs, rhs)
            }
            "invariant" => {
                let base = self.ident()?;
                let npos = self.pos();
                let idx = self.indices(&Env::new())?;
                Query::Invariant(family_name(&base, &idx, npos)?)
            }
            other => return Err(pos.error(format!("expected `entail` or `invariant`, found `{other}`"))),
        };
        self.expect(Tok::Semi)?;
        Ok(q)
    }

    fn formula(&mut self, env: &Env) -> Result<Formula, ParseError> {
        let mut parts = vec![self.term(env)?];
        while *self.peek() == Tok::Star {
            self.bump();
            parts.push(self.term(env)?);
        }
        Ok(Formula::sep(parts))
    }

    fn term(&mut self, env: &Env) -> Result<Formula, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.formula(env)?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Lt => {
                let bs = self.bindings()?;
                Ok(Formula::Atom(Atom::Interaction(
                    bs.into_iter().map(|(x, _, p)| (Var::Named(x.into()), p)).collect(),
                )))
            }
            Tok::Ident(k) if k == "exists" => {
                self.bump();
                let vs = self.ident_list()?;
                if vs.is_empty() {
                    return Err(self.pos().error("expected variable after `exists`"));
                }
                self.expect(Tok::Dot)?;
                let body = self.formula(env)?;
                Ok(Formula::Exists(vs.into_iter().map(|(s, _)| Var::Named(s.into())).collect(), Box::new(body)))
            }
            Tok::Ident(k) if k == "emp" => {
                self.bump();
                Ok(Formula::Emp)
            }
            Tok::Ident(k) if (k == "comp" || k == "state") && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                let x = Var::Named(self.ident()?.into());
                let with_state = k == "state" || *self.peek() == Tok::Colon;
                let f = if with_state {
                    self.expect(Tok::Colon)?;
                    let qpos = self.pos();
                    let q = Name::from(self.ident()?);
                    self.states.push((q.clone(), qpos));
                    if k == "comp" {
                        Formula::comp_in(x, q)
                    } else {
                        Formula::Atom(Atom::State(x, q))
                    }
                } else {
                    Formula::comp(x)
                };
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(name) => {
                self.bump();
                match self.peek() {
                    Tok::Eq | Tok::Neq => {
                        let neq = *self.peek() == Tok::Neq;
                        self.bump();
                        let y = Var::Named(self.ident()?.into());
                        let x = Var::Named(name.into());
                        Ok(Formula::Atom(if neq { Atom::Neq(x, y) } else { Atom::Eq(x, y) }))
                    }
                    Tok::LParen | Tok::LBracket => {
                        let idx = self.indices(env)?;
                        let pred = family_name(&name, &idx, pos)?;
                        self.expect(Tok::LParen)?;
                        let args: Vec<Var> =
                            self.ident_list()?.into_iter().map(|(s, _)| Var::Named(s.into())).collect();
                        self.expect(Tok::RParen)?;
                        self.calls.push((pred.clone(), args.len(), pos));
                        Ok(Formula::pred(pred, args))
                    }
                    t => Err(self.pos().error(format!("expected `=`, `!=` or `(` after `{name}`, found {}", t.describe()))),
                }
            }
            t => Err(pos.error(format!("expected a formula, found {}", t.describe()))),
        }
    }

    fn bindings(&mut self) -> Result<Vec<(String, Pos, Name)>, ParseError> {
        self.expect(Tok::Lt)?;
        let mut out = Vec::new();
        loop {
            let pos = self.pos();
            let x = self.ident()?;
            self.expect(Tok::Dot)?;
            let ppos = self.pos();
            let p = Name::from(self.ident()?);
            self.ports.push((p.clone(), ppos));
            out.push((x, pos, p));
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::Gt => {
                    self.bump();
                    return Ok(out);
                }
                t => return Err(self.pos().error(format!("expected `,` or `>`, found {}", t.describe()))),
            }
        }
    }

    fn indices(&mut self, env: &Env) -> Result<Vec<i64>, ParseError> {
        let mut out = Vec::new();
        if *self.peek() == Tok::LBracket {
            self.bump();
            loop {
                out.push(self.expr()?.eval(env)?);
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
            self.expect(Tok::RBracket)?;
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_atom()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    e = Expr::Add(Box::new(e), Box::new(self.expr_atom()?));
                }
                Tok::Minus => {
                    self.bump();
                    e = Expr::Sub(Box::new(e), Box::new(self.expr_atom()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn expr_atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Ident(f) if (f == "max" || f == "min") && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                let a = self.expr()?;
                self.expect(Tok::Comma)?;
                let b = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(if f == "max" { Expr::Max(Box::new(a), Box::new(b)) } else { Expr::Min(Box::new(a), Box::new(b)) })
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(Expr::Var(s, pos))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            t => Err(pos.error(format!("expected index expression, found {}", t.describe()))),
        }
    }
}

fn family_name(base: &str, idx: &[i64], pos: Pos) -> Result<Name, ParseError> {
    let mut s = base.to_string();
    for i in idx {
        if *i < 0 {
            return Err(pos.error(format!("negative index {i} for family `{base}`")));
        }
        s.push('_');
        s.push_str(&i.to_string());
    }
    Ok(Name::from(s))
}

fn component_id(s: &str, pos: Pos) -> Result<ComponentId, ParseError> {
    s.strip_prefix('c')
        .and_then(|d| d.parse().ok())
        .map(ComponentId)
        .ok_or_else(|| pos.error(format!("component names have the form c<N>, found `{s}`")))
}
