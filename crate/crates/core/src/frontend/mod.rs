//! The `.clsys` text format: parser, macro expansion and canonical printer.
//!
//! ```text
//! file      ::= item*
//! item      ::= behavior | sid | config | query
//! behavior  ::= "behavior" "{" ( "ports" ids ";" | "states" ids ";" | "trans" id "-" id "->" id ";" )* "}"
//! sid       ::= "sid" "{" rule* "}"
//! rule      ::= id [ "[" id "=" int ".." int ("," id "=" int ".." int)* "]" ] "(" [ids] ")" "<-" formula ";"
//! config    ::= "config" id "{" ( "components" [ids] ";" | "interactions" [inter ("," inter)*] ";"
//!                               | "states" [id "=" id ("," id "=" id)*] ";" )* "}"
//! query     ::= "query" ( "entail" formula "|=" formula | "invariant" pred ) ";"
//! formula   ::= term ("*" term)*
//! term      ::= "exists" ids "." formula | "(" formula ")" | "emp"
//!             | "comp" "(" id [":" id] ")" | "state" "(" id ":" id ")"
//!             | inter | id "=" id | id "!=" id | pred "(" [ids] ")"
//! inter     ::= "<" id "." id ("," id "." id)* ">"
//! pred      ::= id [ "[" expr ("," expr)* "]" ]
//! expr      ::= eatom (("+" | "-") eatom)*
//! eatom     ::= int | id | "max" "(" expr "," expr ")" | "min" "(" expr "," expr ")" | "(" expr ")"
//! ids       ::= id ("," id)*
//! ```
//!
//! A family reference `Chain[1, 0]` names the predicate `Chain_1_0`; a
//! family rule is expanded once per valuation of its index ranges.
//! Comments run from `#` or `//` to the end of the line.

mod lexer;
mod parser;

use crate::error::ParseError;
use crate::logic::{Formula, Sid};
use crate::model::{Configuration, Name};

#[derive(Clone, PartialEq, Debug)]
pub enum Query {
    Entail(Formula, Formula),
    Invariant(Name),
}

#[derive(Clone, PartialEq, Debug)]
pub struct SystemFile {
    pub sid: Sid,
    pub configs: Vec<(Name, Configuration)>,
    pub queries: Vec<Query>,
}

impl SystemFile {
    pub fn config(&self, name: &str) -> Option<&Configuration> {
        self.configs.iter().find(|(n, _)| n.as_str() == name).map(|(_, g)| g)
    }
}

pub fn parse_system(text: &str) -> Result<SystemFile, ParseError> {
    parser::parse_system(text)
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    parser::parse_formula(text)
}

pub fn render(file: &SystemFile) -> String {
    let mut out = String::new();
    let b = file.sid.behavior();
    out.push_str("behavior {\n");
    out.push_str(&format!("  ports {};\n", join(b.ports())));
    out.push_str(&format!("  states {};\n", join(b.states())));
    for (q, p, r) in b.transitions() {
        out.push_str(&format!("  trans {q} -{p}-> {r};\n"));
    }
    out.push_str("}\n\nsid {\n");
    for r in file.sid.rules() {
        out.push_str(&format!("  {r};\n"));
    }
    out.push_str("}\n");
    for (name, g) in &file.configs {
        out.push('\n');
        out.push_str(&render_config(name, g));
    }
    if !file.queries.is_empty() {
        out.push('\n');
    }
    for q in &file.queries {
        match q {
            Query::Entail(l, r) => out.push_str(&format!("query entail {l} |= {r};\n")),
            Query::Invariant(a) => out.push_str(&format!("query invariant {a};\n")),
        }
    }
    out
}

pub fn render_config(name: &Name, g: &Configuration) -> String {
    let comps: Vec<String> = g.components().iter().map(|c| c.to_string()).collect();
    let inters: Vec<String> = g.interactions().iter().map(|i| i.to_string()).collect();
    let states: Vec<String> = g.state_map().iter().map(|(c, q)| format!("{c} = {q}")).collect();
    let mut out = format!("config {name} {{\n");
    out.push_str(&with_items("components", &comps));
    out.push_str(&with_items("interactions", &inters));
    out.push_str(&with_items("states", &states));
    out.push_str("}\n");
    out
}

fn with_items(kw: &str, items: &[String]) -> String {
    if items.is_empty() {
        format!("  {kw};\n")
    } else {
        format!("  {kw} {};\n", items.join(", "))
    }
}

fn join<'a>(names: impl IntoIterator<Item = &'a Name>) -> String {
    names.into_iter().map(Name::as_str).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const RING: &str = r#"
behavior {
  ports in, out;
  states H, T;
  trans H -in-> T;
  trans T -out-> H;
}
sid {
  Ring[h=1..2, t=1..2]() <- exists x, y . <x.out, y.in> * Chain[h, t](y, x);
  Chain[h=0..2, t=0..2](x, y) <- exists z . comp(x : H) * <x.out, z.in> * Chain[max(h-1, 0), t](z, y);
  Chain[h=0..2, t=0..2](x, y) <- exists z . comp(x : T) * <x.out, z.in> * Chain[h, max(t-1, 0)](z, y);
  Chain_0_1(x, y) <- x = y * comp(x : T);
  Chain_1_0(x, y) <- x = y * comp(x : H);
  Chain_0_0(x, y) <- x = y * comp(x);
}
config g1 {
  components c1, c2;
  interactions <c1.out, c2.in>, <c2.out, c1.in>;
  states c1 = H, c2 = T;
}
query invariant Ring[1, 1];
query entail Ring_1_1() |= exists x, y . <x.out, y.in> * Chain_1_1(y, x);
"#;

    #[test]
    fn macro_expansion_counts() {
        let f = parse_system(RING).unwrap();
        let preds: Vec<&Name> = f.sid.predicates().collect();
        assert_eq!(preds.len(), 4 + 9);
        assert_eq!(f.sid.rules().len(), 4 + 9 * 2 + 3);
        assert_eq!(f.queries[0], Query::Invariant(Name::new("Ring_1_1")));
    }

    #[test]
    fn round_trip() {
        let f = parse_system(RING).unwrap();
        let text = render(&f);
        let g = parse_system(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(render(&g), text);
    }

    #[test]
    fn empty_sid_block() {
        let f = parse_system("behavior { ports; states; } sid { }").unwrap();
        assert!(f.sid.is_empty());
    }

    #[test]
    fn missing_comma_in_interaction() {
        let text = "behavior { ports in, out; states q; } sid { A(x, y) <- <x.out y.in>; }";
        let e = parse_system(text).unwrap_err();
        assert_eq!((e.line, e.col), (1, 63));
        assert!(e.msg.contains("expected `,` or `>`"), "{}", e.msg);
    }

    #[test]
    fn undeclared_port() {
        let text = "behavior { ports in; states q; } sid { A(x, y) <- <x.out, y.in>; }";
        let e = parse_system(text).unwrap_err();
        assert!(e.msg.contains("undeclared port `out`"));
    }

    #[test]
    fn arity_mismatch() {
        let text = "behavior { ports; states; } sid { A(x) <- emp; B() <- exists z . A(z, z); }";
        let e = parse_system(text).unwrap_err();
        assert!(e.msg.contains("expects 1 arguments"), "{}", e.msg);
    }

    #[test]
    fn duplicate_parameter() {
        let text = "behavior { ports; states; } sid { A(x, x) <- emp; }";
        assert!(parse_system(text).unwrap_err().msg.contains("repeated"));
    }

    #[test]
    fn free_body_variable() {
        let text = "behavior { ports; states; } sid { A(x) <- x = y; }";
        assert!(parse_system(text).unwrap_err().msg.contains("free in the body"));
    }
}
