//! Text syntax for formulas.
//!
//! Grammar (loosest binding first): `E x. phi | A x. phi`, `phi -> phi`
//! (right associative), `phi | phi`, `phi & phi`, `!phi`, atoms
//! `x=y`, `x!=y`, `edge[c](x,y)`, `col[c](x)`, `x in Y`, `dist(x,y)<=k`,
//! `dist(x,y)>k`, parentheses. FO variables start lowercase, set variables
//! uppercase; `edge(x,y)` abbreviates `edge[0](x,y)`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{EColor, VColor};

use super::ast::Formula;

#[derive(Debug, Error)]
#[error("formula parse error at byte {at}: {message}")]
pub struct FormulaParseError {
    pub at: usize,
    pub message: String,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> FormulaParseError {
        FormulaParseError { at: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn starts_with(&mut self, s: &str) -> bool {
        self.skip_ws();
        self.bytes[self.pos..].starts_with(s.as_bytes())
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), FormulaParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected {s:?}")))
        }
    }

    fn ident(&mut self) -> Result<String, FormulaParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos || !self.bytes[start].is_ascii_alphabetic() {
            return Err(self.err("expected an identifier"));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<u64, FormulaParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("number too large"))
    }

    fn fo_var(&mut self) -> Result<String, FormulaParseError> {
        let at = self.pos;
        let name = self.ident()?;
        if !name.chars().next().unwrap().is_ascii_lowercase() {
            return Err(FormulaParseError {
                at,
                message: format!("FO variables start lowercase, got {name:?}"),
            });
        }
        Ok(name)
    }

    // quantifiers bind loosest and extend to the end of the expression
    fn formula(&mut self) -> Result<Formula, FormulaParseError> {
        self.skip_ws();
        if self.quantifier_ahead() {
            let quant = self.bytes[self.pos];
            self.pos += 1;
            let var = self.fo_var()?;
            self.expect(".")?;
            let body = self.formula()?;
            return Ok(match quant {
                b'E' => Formula::exists(var, body),
                _ => Formula::forall(var, body),
            });
        }
        self.implies()
    }

    fn quantifier_ahead(&mut self) -> bool {
        self.skip_ws();
        if !matches!(self.bytes.get(self.pos), Some(b'E') | Some(b'A')) {
            return false;
        }
        // single-letter keyword followed by whitespace then an FO variable
        matches!(self.bytes.get(self.pos + 1), Some(c) if c.is_ascii_whitespace())
    }

    fn implies(&mut self) -> Result<Formula, FormulaParseError> {
        let lhs = self.or()?;
        if self.eat("->") {
            let rhs = self.formula_tail_for_implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn formula_tail_for_implies(&mut self) -> Result<Formula, FormulaParseError> {
        self.skip_ws();
        if self.quantifier_ahead() {
            self.formula()
        } else {
            self.implies()
        }
    }

    fn or(&mut self) -> Result<Formula, FormulaParseError> {
        let mut acc = self.and()?;
        loop {
            self.skip_ws();
            // '|' but not '|>' or similar; plain single byte here
            if self.peek() == Some(b'|') {
                self.pos += 1;
                let rhs = self.and()?;
                acc = Formula::or(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn and(&mut self) -> Result<Formula, FormulaParseError> {
        let mut acc = self.unary()?;
        loop {
            self.skip_ws();
            if self.peek() == Some(b'&') {
                self.pos += 1;
                let rhs = self.unary()?;
                acc = Formula::and(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Formula, FormulaParseError> {
        self.skip_ws();
        if self.eat("!") {
            return Ok(Formula::not(self.unary()?));
        }
        if self.quantifier_ahead() {
            return self.formula();
        }
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let inner = self.formula()?;
            self.expect(")")?;
            return Ok(inner);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, FormulaParseError> {
        self.skip_ws();
        let at = self.pos;
        let name = self.ident()?;
        match name.as_str() {
            "edge" => {
                let color = if self.eat("[") {
                    let c = self.number()? as u16;
                    self.expect("]")?;
                    EColor(c)
                } else {
                    EColor(0)
                };
                self.expect("(")?;
                let x = self.fo_var()?;
                self.expect(",")?;
                let y = self.fo_var()?;
                self.expect(")")?;
                Ok(Formula::Edge(color, x, y))
            }
            "col" => {
                self.expect("[")?;
                let c = self.number()? as u16;
                self.expect("]")?;
                self.expect("(")?;
                let x = self.fo_var()?;
                self.expect(")")?;
                Ok(Formula::Col(VColor(c), x))
            }
            "dist" => {
                self.expect("(")?;
                let x = self.fo_var()?;
                self.expect(",")?;
                let y = self.fo_var()?;
                self.expect(")")?;
                if self.eat("<=") {
                    let k = self.number()? as usize;
                    Ok(Formula::DistLe(x, y, k))
                } else if self.eat(">") {
                    let k = self.number()? as usize;
                    Ok(Formula::not(Formula::DistLe(x, y, k)))
                } else {
                    Err(self.err("expected <= or > after dist(..)"))
                }
            }
            _ => {
                let first = name.chars().next().unwrap();
                if !first.is_ascii_lowercase() {
                    return Err(FormulaParseError {
                        at,
                        message: format!("unexpected token {name:?}"),
                    });
                }
                // variable-led atom: = / != / in
                if self.eat("!=") {
                    let y = self.fo_var()?;
                    return Ok(Formula::not(Formula::Eq(name, y)));
                }
                if self.eat("=") {
                    let y = self.fo_var()?;
                    return Ok(Formula::Eq(name, y));
                }
                let kw = self.ident().map_err(|_| self.err("expected =, != or in"))?;
                if kw != "in" {
                    return Err(self.err(format!("expected 'in', got {kw:?}")));
                }
                let at = self.pos;
                let set = self.ident()?;
                if !set.chars().next().unwrap().is_ascii_uppercase() {
                    return Err(FormulaParseError {
                        at,
                        message: format!("set variables start uppercase, got {set:?}"),
                    });
                }
                Ok(Formula::In(name, set))
            }
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, FormulaParseError> {
    let mut parser = Parser { bytes: text.as_bytes(), pos: 0 };
    let formula = parser.formula()?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return Err(parser.err("trailing input after formula"));
    }
    Ok(formula)
}

/// Canonical fully parenthesized rendering; `parse_formula(print_formula(f))`
/// reproduces `f` structurally.
pub fn print_formula(formula: &Formula) -> String {
    let mut out = String::new();
    print_into(formula, &mut out);
    out
}

fn print_into(formula: &Formula, out: &mut String) {
    match formula {
        Formula::Eq(x, y) => write!(out, "{x} = {y}").unwrap(),
        Formula::Edge(c, x, y) => write!(out, "edge[{}]({x},{y})", c.0).unwrap(),
        Formula::Col(c, x) => write!(out, "col[{}]({x})", c.0).unwrap(),
        Formula::In(x, s) => write!(out, "{x} in {s}").unwrap(),
        Formula::DistLe(x, y, k) => write!(out, "dist({x},{y})<={k}").unwrap(),
        Formula::Not(f) => {
            out.push_str("!(");
            print_into(f, out);
            out.push(')');
        }
        Formula::And(a, b) => {
            out.push('(');
            print_into(a, out);
            out.push_str(" & ");
            print_into(b, out);
            out.push(')');
        }
        Formula::Or(a, b) => {
            out.push('(');
            print_into(a, out);
            out.push_str(" | ");
            print_into(b, out);
            out.push(')');
        }
        Formula::Implies(a, b) => {
            out.push('(');
            print_into(a, out);
            out.push_str(" -> ");
            print_into(b, out);
            out.push(')');
        }
        Formula::Exists(v, f) => {
            write!(out, "E {v}. ").unwrap();
            print_into(f, out);
        }
        Formula::Forall(v, f) => {
            write!(out, "A {v}. ").unwrap();
            print_into(f, out);
        }
    }
}

/// Seeded random quantifier-free formula over the given variables, set
/// variables and palettes. Every listed variable occurs, so positional
/// binding has the declared arity.
pub fn random_qf_formula<R: rand::Rng>(
    rng: &mut R,
    fo_vars: &[&str],
    set_vars: &[&str],
    edge_colors: &[EColor],
    vertex_colors: &[VColor],
) -> Formula {
    fn atom<R: rand::Rng>(
        rng: &mut R,
        fo: &[&str],
        sets: &[&str],
        ec: &[EColor],
        vc: &[VColor],
    ) -> Formula {
        let var = |rng: &mut R| fo[rng.gen_range(0..fo.len())].to_owned();
        loop {
            match rng.gen_range(0..5u8) {
                0 => return Formula::Eq(var(rng), var(rng)),
                1 => {
                    let c = ec[rng.gen_range(0..ec.len())];
                    return Formula::Edge(c, var(rng), var(rng));
                }
                2 if !vc.is_empty() => {
                    let c = vc[rng.gen_range(0..vc.len())];
                    return Formula::Col(c, var(rng));
                }
                3 if !sets.is_empty() => {
                    let s = sets[rng.gen_range(0..sets.len())].to_owned();
                    return Formula::In(var(rng), s);
                }
                4 => {
                    let c = ec[rng.gen_range(0..ec.len())];
                    return Formula::Edge(c, var(rng), var(rng));
                }
                _ => continue,
            }
        }
    }
    fn build<R: rand::Rng>(
        rng: &mut R,
        size: usize,
        fo: &[&str],
        sets: &[&str],
        ec: &[EColor],
        vc: &[VColor],
    ) -> Formula {
        if size <= 1 {
            return atom(rng, fo, sets, ec, vc);
        }
        match rng.gen_range(0..4u8) {
            0 => Formula::not(build(rng, size - 1, fo, sets, ec, vc)),
            1 => {
                let l = rng.gen_range(1..size);
                Formula::and(
                    build(rng, l, fo, sets, ec, vc),
                    build(rng, size - l, fo, sets, ec, vc),
                )
            }
            2 => {
                let l = rng.gen_range(1..size);
                Formula::or(
                    build(rng, l, fo, sets, ec, vc),
                    build(rng, size - l, fo, sets, ec, vc),
                )
            }
            _ => {
                let l = rng.gen_range(1..size);
                Formula::implies(
                    build(rng, l, fo, sets, ec, vc),
                    build(rng, size - l, fo, sets, ec, vc),
                )
            }
        }
    }
    assert!(!fo_vars.is_empty() && !edge_colors.is_empty());
    let size = rng.gen_range(3..10);
    let mut f = build(rng, size, fo_vars, set_vars, edge_colors, vertex_colors);
    // force every declared variable to occur so arities are stable
    for v in fo_vars {
        f = Formula::and(f, Formula::Eq((*v).to_owned(), (*v).to_owned()));
    }
    for s in set_vars {
        f = Formula::and(
            f,
            Formula::or(
                Formula::In(fo_vars[0].to_owned(), (*s).to_owned()),
                Formula::not(Formula::In(fo_vars[0].to_owned(), (*s).to_owned())),
            ),
        );
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::ast::common_neighbor_formula;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn parse_examples() {
        let f = parse_formula("x != y & E z. (z != x & z != y & edge(x,z) & edge(z,y))").unwrap();
        assert_eq!(f.free_fo_vars(), vec!["x".to_owned(), "y".to_owned()]);
        // structurally equal to the builder, up to conjunction grouping
        let built = common_neighbor_formula();
        let p4 = crate::graph::path_graph(4);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(
                    crate::logic::eval_oracle(&p4, &f, &[a, b], &[]).unwrap(),
                    crate::logic::eval_oracle(&p4, &built, &[a, b], &[]).unwrap(),
                );
            }
        }
    }

    #[test]
    fn precedence_and_sugar() {
        // implies binds looser than or/and, right-assoc
        let f = parse_formula("x=y -> x=y -> x=y").unwrap();
        assert!(matches!(f, Formula::Implies(_, ref b) if matches!(**b, Formula::Implies(..))));
        // quantifier extends to the end
        let f = parse_formula("E z. edge(x,z) & edge(z,y)").unwrap();
        assert!(matches!(f, Formula::Exists(..)));
        // != and dist > sugar
        assert_eq!(
            parse_formula("x != y").unwrap(),
            Formula::not(Formula::Eq("x".into(), "y".into()))
        );
        assert_eq!(
            parse_formula("dist(x,y)>4").unwrap(),
            Formula::not(Formula::DistLe("x".into(), "y".into(), 4))
        );
        // bare edge color defaults to 0
        assert_eq!(
            parse_formula("edge(x,y)").unwrap(),
            Formula::Edge(EColor(0), "x".into(), "y".into())
        );
        // set variable named E is fine after `in`
        let f = parse_formula("x in E").unwrap();
        assert_eq!(f.free_set_vars(), vec!["E".to_owned()]);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_formula("x =").is_err());
        assert!(parse_formula("edge(x,Y)").is_err());
        assert!(parse_formula("x in y").is_err());
        assert!(parse_formula("dist(x,y) = 3").is_err());
        assert!(parse_formula("(x = y").is_err());
        assert!(parse_formula("x = y extra").is_err());
    }

    #[test]
    fn print_parse_round_trip_examples() {
        for text in [
            "E x. A y. (edge[2](x,y) -> (col[1](x) | x in Big))",
            "!(x = y) & dist(x,y)<=3",
            "x in Y | !(y in Y)",
        ] {
            let f = parse_formula(text).unwrap();
            assert_eq!(parse_formula(&print_formula(&f)).unwrap(), f);
        }
    }

    #[test]
    fn print_parse_round_trip_random() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let f = random_qf_formula(
                &mut rng,
                &["x", "y"],
                &["Y"],
                &[EColor(0), EColor(1)],
                &[VColor(0)],
            );
            let printed = print_formula(&f);
            assert_eq!(parse_formula(&printed).unwrap(), f, "failed on {printed}");
        }
    }
}
