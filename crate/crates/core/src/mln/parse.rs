//! Line-oriented MLN source format.
//!
//! ```text
//! # comment
//! domain person = { alice, bob }
//! predicate Smokes(person)
//! predicate Friends(person, person)
//! 1.5 :: !Smokes(x) v !Friends(x, y) v Smokes(y) ; x != y
//! ```
//!
//! Literal arguments that name a constant of the position's domain are
//! constants; other lowercase identifiers are logical variables. Variable
//! domains are implied by argument positions.

use std::collections::BTreeMap;

use super::model::{Constraint, Domain, Literal, Mln, Predicate, Term, WeightedClause};
use crate::error::{Error, Result};

struct Cursor<'a> {
    line: usize,
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, src: &'a str) -> Self {
        Cursor {
            line,
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars[self.pos..].iter().take(n).copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected '{s}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_alphanumeric() || c == '_' || c == '@' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return self.err("expected identifier");
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    /// Consumes a standalone `v` separator.
    fn eat_or(&mut self) -> bool {
        self.skip_ws();
        let next = self.chars.get(self.pos + 1).copied();
        if self.chars.get(self.pos) == Some(&'v')
            && next.is_none_or(|c| c.is_whitespace() || c == '!')
        {
            self.pos += 1;
            true
        } else {
            false
        }
    }
}

/// Parses MLN source text into a validated model.
pub fn parse_mln(text: &str) -> Result<Mln> {
    let mut domains: Vec<Domain> = Vec::new();
    let mut predicates: Vec<Predicate> = Vec::new();
    let mut clauses: Vec<WeightedClause> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor::new(lineno, line);
        let first = line.trim_start();
        if first.starts_with("domain ") || first.starts_with("domain\t") {
            cur.expect("domain")?;
            let name = cur.ident()?;
            if domains.iter().any(|d| d.name == name) {
                return cur.err(format!("domain {name} declared twice"));
            }
            cur.expect("=")?;
            cur.expect("{")?;
            let mut objects = Vec::new();
            if !cur.eat("}") {
                loop {
                    let c = cur.ident()?;
                    if objects.contains(&c) {
                        return cur.err(format!("duplicate constant {c}"));
                    }
                    objects.push(c);
                    if cur.eat("}") {
                        break;
                    }
                    cur.expect(",")?;
                }
            }
            if !cur.at_end() {
                return cur.err("trailing input after domain");
            }
            domains.push(Domain { name, objects });
        } else if first.starts_with("predicate ") || first.starts_with("predicate\t") {
            cur.expect("predicate")?;
            let name = cur.ident()?;
            if predicates.iter().any(|p| p.name == name) {
                return cur.err(format!("predicate {name} declared twice"));
            }
            let mut arg_domains = Vec::new();
            if cur.eat("(") && !cur.eat(")") {
                loop {
                    let d = cur.ident()?;
                    match domains.iter().position(|x| x.name == d) {
                        Some(idx) => arg_domains.push(idx),
                        None => return cur.err(format!("undeclared domain {d}")),
                    }
                    if cur.eat(")") {
                        break;
                    }
                    cur.expect(",")?;
                }
            }
            if !cur.at_end() {
                return cur.err("trailing input after predicate");
            }
            predicates.push(Predicate { name, arg_domains });
        } else {
            clauses.push(parse_clause(&mut cur, line, &domains, &predicates)?);
        }
    }
    let mln = Mln {
        domains,
        predicates,
        clauses,
    }
    .standardized();
    mln.validate()?;
    Ok(mln)
}

fn parse_clause(
    cur: &mut Cursor<'_>,
    line: &str,
    domains: &[Domain],
    predicates: &[Predicate],
) -> Result<WeightedClause> {
    let Some(sep) = line.find("::") else {
        return cur.err("expected 'domain', 'predicate' or 'WEIGHT :: clause'");
    };
    let wtext = &line[..sep];
    let weight: f64 = match wtext.trim().parse() {
        Ok(w) => w,
        Err(_) => {
            cur.skip_ws();
            return cur.err(format!("invalid weight '{}'", wtext.trim()));
        }
    };
    cur.pos = line[..sep].chars().count() + 2;

    let mut literals = Vec::new();
    let mut var_dom: BTreeMap<String, usize> = BTreeMap::new();
    loop {
        let positive = !cur.eat("!");
        let col = cur.pos;
        let pname = cur.ident()?;
        let Some(pid) = predicates.iter().position(|p| p.name == pname) else {
            cur.pos = col;
            return cur.err(format!("undeclared predicate {pname}"));
        };
        let pred = &predicates[pid];
        let mut args = Vec::new();
        if cur.eat("(") && !cur.eat(")") {
            loop {
                let acol = cur.pos;
                let a = cur.ident()?;
                let pos = args.len();
                if pos >= pred.arity() {
                    cur.pos = acol;
                    return cur.err(format!(
                        "predicate {pname} has arity {}, too many arguments",
                        pred.arity()
                    ));
                }
                let dom = pred.arg_domains[pos];
                if let Some(c) = domains[dom].index_of(&a) {
                    args.push(Term::Const(c));
                } else if a.chars().next().is_some_and(|c| c.is_lowercase()) {
                    match var_dom.get(&a) {
                        Some(&d) if d != dom => {
                            cur.pos = acol;
                            return cur.err(format!(
                                "variable {a} used with domains {} and {}",
                                domains[d].name, domains[dom].name
                            ));
                        }
                        _ => {
                            var_dom.insert(a.clone(), dom);
                        }
                    }
                    args.push(Term::Var(a));
                } else {
                    cur.pos = acol;
                    return cur.err(format!(
                        "{a} is not a constant of domain {}",
                        domains[dom].name
                    ));
                }
                if cur.eat(")") {
                    break;
                }
                cur.expect(",")?;
            }
        }
        if args.len() != pred.arity() {
            return cur.err(format!(
                "predicate {pname} has arity {}, got {} arguments",
                pred.arity(),
                args.len()
            ));
        }
        literals.push(Literal {
            positive,
            predicate: pid,
            args,
        });
        if !cur.eat_or() {
            break;
        }
    }

    let mut constraints: Vec<Constraint> = var_dom
        .iter()
        .map(|(v, &d)| Constraint::InDomain(v.clone(), d))
        .collect();
    if cur.eat(";") {
        loop {
            let col = cur.pos;
            let a = cur.ident()?;
            let neq = if cur.eat("!=") {
                true
            } else if cur.eat("=") {
                false
            } else {
                return cur.err("expected '=' or '!='");
            };
            let b = cur.ident()?;
            for v in [&a, &b] {
                if !var_dom.contains_key(v) {
                    cur.pos = col;
                    return cur.err(format!("constraint over unknown variable {v}"));
                }
            }
            if var_dom[&a] != var_dom[&b] {
                cur.pos = col;
                return cur.err(format!(
                    "constraint over {a} and {b} with different domains"
                ));
            }
            constraints.push(if neq {
                Constraint::Neq(a, b)
            } else {
                Constraint::Eq(a, b)
            });
            if !cur.eat(",") {
                break;
            }
        }
    }
    if !cur.at_end() {
        return cur.err("unexpected trailing input");
    }
    Ok(WeightedClause {
        literals,
        weight,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mln::ground::{ground_atoms, ground_formulas};

    #[test]
    fn smallest_program() {
        let m = parse_mln("domain d={a1,a2}\npredicate S(d)\n1.0 :: S(x)").unwrap();
        assert_eq!(m.clauses.len(), 1);
        assert_eq!(ground_formulas(&m).len(), 2);
    }

    #[test]
    fn inequality_example_grounds_two_features() {
        let src = "domain d = {a1, a2}\npredicate S(d)\npredicate T(d)\n\
                   0.5 :: S(x) v !T(y) ; x != y\n";
        let m = parse_mln(src).unwrap();
        let g = ground_formulas(&m);
        let shown: Vec<String> = g
            .iter()
            .map(|gc| {
                gc.literals
                    .iter()
                    .map(|(p, a)| format!("{}{}", if *p { "" } else { "!" }, m.fmt_atom(a)))
                    .collect::<Vec<_>>()
                    .join(" v ")
            })
            .collect();
        assert_eq!(shown, vec!["S(a1) v !T(a2)", "S(a2) v !T(a1)"]);
        assert_eq!(ground_atoms(&m).len(), 4);
    }

    #[test]
    fn undeclared_predicate_is_an_error() {
        let e = parse_mln("domain d={a}\npredicate S(d)\n1 :: Q(x)").unwrap_err();
        match e {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arity_and_domain_errors() {
        assert!(parse_mln("domain d={a}\npredicate S(d)\n1 :: S(x, y)").is_err());
        assert!(parse_mln("domain d={a}\npredicate S(e)").is_err());
        let src = "domain d={a}\ndomain e={b}\npredicate S(d)\npredicate T(e)\n1 :: S(x) v T(x)";
        assert!(parse_mln(src).is_err());
        let src =
            "domain d={a}\ndomain e={b}\npredicate S(d)\npredicate T(e)\n1 :: S(x) v T(y) ; x != y";
        assert!(parse_mln(src).is_err());
    }

    #[test]
    fn constants_and_roundtrip() {
        let src = "domain d = {1, 2, 3}\npredicate R(d, d)\n-0.25 :: !R(x, 2) v R(2, x)\n";
        let m = parse_mln(src).unwrap();
        assert_eq!(ground_formulas(&m).len(), 3);
        let again = parse_mln(&m.to_string()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn comments_and_zero_arity() {
        let src = "# header\npredicate P\npredicate Q()\n2 :: P v !Q # trailing\n";
        let m = parse_mln(src).unwrap();
        assert_eq!(ground_formulas(&m).len(), 1);
        assert_eq!(ground_atoms(&m).len(), 2);
    }
}
