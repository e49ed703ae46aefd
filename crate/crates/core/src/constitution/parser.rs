//! Lexer and recursive-descent parser for `.cst` constitution files.
//!
//! ```text
//! program    := statement*
//! statement  := directive | clause
//! directive  := "query" "(" atom ")" "." | "domain" "(" VAR "," "[" const ("," const)* "]" ")" "."
//! clause     := [number "::"] atom ["~" dist] [":-" literal ("," literal)*] "."
//! dist       := "normal" "(" number "," number ")" | "bernoulli" "(" number ")"
//! literal    := "\+" atom | atom [cmp]
//! cmp        := ("<" | "<=" | "=<" | ">" | ">=") number | "between" "[" number "," number "]"
//! atom       := IDENT ["(" term ("," term)* ")"]
//! term       := VAR | IDENT | number
//! ```
//!
//! Identifiers start with a lowercase letter, variables with an uppercase
//! letter or `_`. `%` starts a comment that runs to the end of the line.

use std::collections::BTreeMap;

use super::ast::{default_query, Atom, Clause, Distribution, Literal, Program, Region, Span, Term};
use super::ConstitutionError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Num(f64, String),
    ColonColon,
    Neck,
    Tilde,
    Not,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Minus,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("'{s}'"),
            Tok::Num(_, s) => format!("number {s}"),
            Tok::Eof => "end of input".into(),
            other => format!("{other:?}"),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> ConstitutionError {
        ConstitutionError::Syntax { line, col, msg: msg.into() }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Span)>, ConstitutionError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek(0) {
                if c.is_ascii_whitespace() {
                    self.bump();
                } else if c == b'%' {
                    while let Some(c) = self.peek(0) {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let span = Span { line: self.line, col: self.col };
            let Some(c) = self.peek(0) else {
                out.push((Tok::Eof, span));
                return Ok(out);
            };
            let tok = match c {
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let start = self.pos;
                    while matches!(self.peek(0), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                        self.bump();
                    }
                    let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                    if c.is_ascii_lowercase() {
                        Tok::Ident(s)
                    } else {
                        Tok::Var(s)
                    }
                }
                b'0'..=b'9' => {
                    let start = self.pos;
                    while matches!(self.peek(0), Some(b'0'..=b'9')) {
                        self.bump();
                    }
                    if self.peek(0) == Some(b'.') && matches!(self.peek(1), Some(b'0'..=b'9')) {
                        self.bump();
                        while matches!(self.peek(0), Some(b'0'..=b'9')) {
                            self.bump();
                        }
                    }
                    if matches!(self.peek(0), Some(b'e' | b'E')) {
                        let sign = usize::from(matches!(self.peek(1), Some(b'+' | b'-')));
                        if matches!(self.peek(1 + sign), Some(b'0'..=b'9')) {
                            self.bump();
                            if sign == 1 {
                                self.bump();
                            }
                            while matches!(self.peek(0), Some(b'0'..=b'9')) {
                                self.bump();
                            }
                        }
                    }
                    let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                    let v: f64 = s.parse().map_err(|_| self.err(span.line, span.col, format!("bad number '{s}'")))?;
                    Tok::Num(v, s)
                }
                _ => {
                    self.bump();
                    match (c, self.peek(0)) {
                        (b':', Some(b':')) => {
                            self.bump();
                            Tok::ColonColon
                        }
                        (b':', Some(b'-')) => {
                            self.bump();
                            Tok::Neck
                        }
                        (b'\\', Some(b'+')) => {
                            self.bump();
                            Tok::Not
                        }
                        (b'<', Some(b'=')) | (b'=', Some(b'<')) => {
                            self.bump();
                            Tok::Le
                        }
                        (b'>', Some(b'=')) => {
                            self.bump();
                            Tok::Ge
                        }
                        (b'<', _) => Tok::Lt,
                        (b'>', _) => Tok::Gt,
                        (b'~', _) => Tok::Tilde,
                        (b'(', _) => Tok::LParen,
                        (b')', _) => Tok::RParen,
                        (b'[', _) => Tok::LBracket,
                        (b']', _) => Tok::RBracket,
                        (b',', _) => Tok::Comma,
                        (b'.', _) => Tok::Dot,
                        (b'-', _) => Tok::Minus,
                        _ => {
                            let ch = std::str::from_utf8(&self.src[self.pos - 1..])
                                .ok()
                                .and_then(|s| s.chars().next())
                                .unwrap_or(c as char);
                            return Err(self.err(span.line, span.col, format!("unexpected character '{ch}'")));
                        }
                    }
                }
            };
            out.push((tok, span));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, off: usize) -> &Tok {
        &self.toks[(self.pos + off).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> ConstitutionError {
        let s = self.span();
        ConstitutionError::Syntax { line: s.line, col: s.col, msg: msg.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ConstitutionError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.err_here(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn number(&mut self) -> Result<f64, ConstitutionError> {
        let neg = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.next() {
            Tok::Num(v, _) => Ok(if neg { -v } else { v }),
            other => {
                self.pos -= 1;
                Err(self.err_here(format!("expected a number, found {}", other.describe())))
            }
        }
    }

    fn probability(&mut self) -> Result<f64, ConstitutionError> {
        let span = self.span();
        let p = self.number()?;
        if !(0.0..=1.0).contains(&p) {
            return Err(ConstitutionError::ProbabilityRange { line: span.line, col: span.col, value: p });
        }
        Ok(p)
    }

    fn term(&mut self) -> Result<Term, ConstitutionError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(Term::Const(s))
            }
            Tok::Var(s) => {
                self.next();
                Ok(Term::Var(s))
            }
            Tok::Num(..) | Tok::Minus => {
                let v = self.number()?;
                Ok(Term::Const(format!("{v}")))
            }
            other => Err(self.err_here(format!("expected a term, found {}", other.describe()))),
        }
    }

    fn atom(&mut self) -> Result<Atom, ConstitutionError> {
        let predicate = match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                s
            }
            other => return Err(self.err_here(format!("expected a predicate name, found {}", other.describe()))),
        };
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            loop {
                args.push(self.term()?);
                match self.next() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => {
                        self.pos -= 1;
                        return Err(self.err_here(format!("expected ',' or ')', found {}", other.describe())));
                    }
                }
            }
        }
        Ok(Atom { predicate, args })
    }

    fn literal(&mut self) -> Result<Literal, ConstitutionError> {
        if *self.peek() == Tok::Not {
            self.next();
            return Ok(Literal::neg(self.atom()?));
        }
        let atom = self.atom()?;
        let region = match self.peek().clone() {
            Tok::Lt => {
                self.next();
                Region::Lt(self.number()?)
            }
            Tok::Le => {
                self.next();
                Region::Le(self.number()?)
            }
            Tok::Gt => {
                self.next();
                Region::Gt(self.number()?)
            }
            Tok::Ge => {
                self.next();
                Region::Ge(self.number()?)
            }
            Tok::Ident(ref s) if s == "between" => {
                self.next();
                self.expect(Tok::LBracket, "'['")?;
                let lo = self.number()?;
                self.expect(Tok::Comma, "','")?;
                let hi = self.number()?;
                self.expect(Tok::RBracket, "']'")?;
                if lo > hi {
                    return Err(self.err_here(format!("empty interval [{lo}, {hi}]")));
                }
                Region::Between(lo, hi)
            }
            _ => return Ok(Literal::pos(atom)),
        };
        Ok(Literal::Comparison { lhs: atom, region })
    }

    fn distribution(&mut self) -> Result<Distribution, ConstitutionError> {
        let name = match self.next() {
            Tok::Ident(s) => s,
            other => {
                self.pos -= 1;
                return Err(self.err_here(format!("expected a distribution, found {}", other.describe())));
            }
        };
        self.expect(Tok::LParen, "'('")?;
        let d = match name.as_str() {
            "normal" => {
                let mean = self.number()?;
                self.expect(Tok::Comma, "','")?;
                let span = self.span();
                let std = self.number()?;
                if !(std > 0.0 && std.is_finite()) {
                    return Err(ConstitutionError::Syntax {
                        line: span.line,
                        col: span.col,
                        msg: format!("normal std must be positive, got {std}"),
                    });
                }
                Distribution::Normal { mean, std }
            }
            "bernoulli" => Distribution::Bernoulli { p: self.probability()? },
            other => return Err(self.err_here(format!("unknown distribution '{other}'"))),
        };
        self.expect(Tok::RParen, "')'")?;
        Ok(d)
    }

    fn body(&mut self) -> Result<Vec<Literal>, ConstitutionError> {
        let mut body = Vec::new();
        if *self.peek() == Tok::Neck {
            self.next();
            loop {
                body.push(self.literal()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        Ok(body)
    }

    fn clause(&mut self) -> Result<Clause, ConstitutionError> {
        let span = self.span();
        let prob = if matches!(self.peek(), Tok::Num(..) | Tok::Minus) {
            let p = self.probability()?;
            self.expect(Tok::ColonColon, "'::'")?;
            Some(p)
        } else {
            None
        };
        let head = self.atom()?;
        let clause = if *self.peek() == Tok::Tilde {
            if prob.is_some() {
                return Err(self.err_here("a clause cannot carry both a probability and a distribution"));
            }
            self.next();
            let dist = self.distribution()?;
            let body = self.body()?;
            Clause::Continuous { head, dist, body, span }
        } else {
            let body = self.body()?;
            Clause::Categorical { prob, head, body, span }
        };
        self.expect(Tok::Dot, "'.' at the end of the clause")?;
        Ok(clause)
    }

    fn is_directive(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name) && *self.peek_at(1) == Tok::LParen
    }

    fn program(&mut self) -> Result<Program, ConstitutionError> {
        let mut clauses = Vec::new();
        let mut query = None;
        let mut domains: BTreeMap<String, Vec<String>> = BTreeMap::new();
        while *self.peek() != Tok::Eof {
            if self.is_directive("query") && matches!(self.peek_at(2), Tok::Ident(_)) {
                self.next();
                self.next();
                let q = self.atom()?;
                self.expect(Tok::RParen, "')'")?;
                self.expect(Tok::Dot, "'.'")?;
                if query.replace(q).is_some() {
                    return Err(self.err_here("more than one query directive"));
                }
            } else if self.is_directive("domain") && matches!(self.peek_at(2), Tok::Var(_)) {
                self.next();
                self.next();
                let Tok::Var(var) = self.next() else { unreachable!() };
                self.expect(Tok::Comma, "','")?;
                self.expect(Tok::LBracket, "'['")?;
                let entry = domains.entry(var).or_default();
                loop {
                    let c = match self.term()? {
                        Term::Const(c) => c,
                        Term::Var(v) => return Err(self.err_here(format!("domain members must be constants, found {v}"))),
                    };
                    if !entry.contains(&c) {
                        entry.push(c);
                    }
                    match self.next() {
                        Tok::Comma => continue,
                        Tok::RBracket => break,
                        other => {
                            self.pos -= 1;
                            return Err(self.err_here(format!("expected ',' or ']', found {}", other.describe())));
                        }
                    }
                }
                self.expect(Tok::RParen, "')'")?;
                self.expect(Tok::Dot, "'.'")?;
            } else {
                clauses.push(self.clause()?);
            }
        }
        Ok(Program { clauses, query: query.unwrap_or_else(default_query), domains })
    }
}

/// Parses constitution source text.
pub fn parse(text: &str) -> Result<Program, ConstitutionError> {
    let toks = Lexer::new(text).tokens()?;
    Parser { toks, pos: 0 }.program()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_fact() {
        let p = parse("0.95 :: over(x, park).").unwrap();
        assert_eq!(p.clauses.len(), 1);
        match &p.clauses[0] {
            Clause::Categorical { prob, head, body, span } => {
                assert_eq!(*prob, Some(0.95));
                assert_eq!(head.to_string(), "over(x, park)");
                assert!(body.is_empty());
                assert_eq!((span.line, span.col), (1, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn continuous_fact() {
        let p = parse("distance(x, road) ~ normal(100, 1).").unwrap();
        assert_eq!(
            p.clauses[0],
            Clause::Continuous {
                head: Atom::ground("distance", &["x", "road"]),
                dist: Distribution::Normal { mean: 100.0, std: 1.0 },
                body: vec![],
                span: Span::default(),
            }
        );
    }

    #[test]
    fn rule_with_negation_roundtrips() {
        let src = "1.0 :: a :- b, \\+ c.";
        let p = parse(src).unwrap();
        let printed = p.to_string();
        assert_eq!(printed.trim(), "1 :: a :- b, \\+ c.");
        assert_eq!(parse(&printed).unwrap(), p);
    }

    #[test]
    fn comparisons_and_directives() {
        let src = "% marine rules\n\
                   domain(T, [cargo, tanker]).\n\
                   query(ok(X, Z)).\n\
                   ok(X, Z) :- distance(X, land) > 50, depth(X, water) between [5, 2e1], speed(Z) =< -1.5.\n";
        let p = parse(src).unwrap();
        assert_eq!(p.query.to_string(), "ok(X, Z)");
        assert_eq!(p.domains["T"], vec!["cargo", "tanker"]);
        let body = p.clauses[0].body();
        assert_eq!(body[0], Literal::Comparison { lhs: Atom::new("distance", vec![Term::Var("X".into()), Term::Const("land".into())]), region: Region::Gt(50.0) });
        assert!(matches!(body[1], Literal::Comparison { region: Region::Between(lo, hi), .. } if lo == 5.0 && hi == 20.0));
        assert!(matches!(body[2], Literal::Comparison { region: Region::Le(b), .. } if b == -1.5));
        assert_eq!(parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse("a :- b\nc.") {
            Err(ConstitutionError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
        match parse("  1.5 :: a.") {
            Err(ConstitutionError::ProbabilityRange { line, col, value }) => {
                assert_eq!((line, col, value), (1, 3, 1.5))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("a ~ normal(1, 0)."), Err(ConstitutionError::Syntax { .. })));
        assert!(matches!(parse("a ~ bernoulli(2)."), Err(ConstitutionError::ProbabilityRange { .. })));
        assert!(matches!(parse("a :- b $ c."), Err(ConstitutionError::Syntax { line: 1, col: 8, .. })));
        assert!(matches!(parse("0.5 :: a ~ normal(0, 1)."), Err(ConstitutionError::Syntax { .. })));
    }

    #[test]
    fn numeric_constants_and_trailing_dot() {
        let p = parse("draft(v1, 12). big(V) :- draft(V, 12), load(V) > 9.").unwrap();
        assert_eq!(p.clauses[0].head().args[1], Term::Const("12".into()));
        assert!(matches!(p.clauses[1].body()[1], Literal::Comparison { region: Region::Gt(b), .. } if b == 9.0));
    }
}
