use std::collections::BTreeMap;
use std::fmt;

/// Source position of a clause (1-based). Positions never take part in equality,
/// so a pretty-printed and reparsed program compares equal to the original.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Const(s) | Term::Var(s) => s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self { predicate: predicate.into(), args }
    }

    /// A ground atom from constant names.
    pub fn ground(predicate: impl Into<String>, args: &[&str]) -> Self {
        Self::new(predicate, args.iter().map(|a| Term::Const(a.to_string())).collect())
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn signature(&self) -> (&str, usize) {
        (&self.predicate, self.args.len())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Normal { mean: f64, std: f64 },
    Bernoulli { p: f64 },
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Normal { mean, std } => write!(f, "normal({mean}, {std})"),
            Distribution::Bernoulli { p } => write!(f, "bernoulli({p})"),
        }
    }
}

/// The set of values a comparison literal accepts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Lt(f64),
    Le(f64),
    Gt(f64),
    Ge(f64),
    /// Closed interval `[lo, hi]`.
    Between(f64, f64),
}

impl Region {
    pub fn contains(&self, v: f64) -> bool {
        match *self {
            Region::Lt(b) => v < b,
            Region::Le(b) => v <= b,
            Region::Gt(b) => v > b,
            Region::Ge(b) => v >= b,
            Region::Between(lo, hi) => lo <= v && v <= hi,
        }
    }

    pub fn bounds(&self) -> Vec<f64> {
        match *self {
            Region::Lt(b) | Region::Le(b) | Region::Gt(b) | Region::Ge(b) => vec![b],
            Region::Between(lo, hi) => vec![lo, hi],
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Lt(b) => write!(f, "< {b}"),
            Region::Le(b) => write!(f, "<= {b}"),
            Region::Gt(b) => write!(f, "> {b}"),
            Region::Ge(b) => write!(f, ">= {b}"),
            Region::Between(lo, hi) => write!(f, "between [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Atom { atom: Atom, negated: bool },
    /// A comparison on the value of a continuous atom.
    Comparison { lhs: Atom, region: Region },
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal::Atom { atom, negated: false }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal::Atom { atom, negated: true }
    }

    pub fn atom(&self) -> &Atom {
        match self {
            Literal::Atom { atom, .. } => atom,
            Literal::Comparison { lhs, .. } => lhs,
        }
    }

    pub(crate) fn atom_mut(&mut self) -> &mut Atom {
        match self {
            Literal::Atom { atom, .. } => atom,
            Literal::Comparison { lhs, .. } => lhs,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom { atom, negated: false } => write!(f, "{atom}"),
            Literal::Atom { atom, negated: true } => write!(f, "\\+ {atom}"),
            Literal::Comparison { lhs, region } => write!(f, "{lhs} {region}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    /// `p :: head :- body.`; `prob` is `None` for a plain (certain) clause.
    Categorical { prob: Option<f64>, head: Atom, body: Vec<Literal>, span: Span },
    /// `head ~ dist :- body.`
    Continuous { head: Atom, dist: Distribution, body: Vec<Literal>, span: Span },
}

impl Clause {
    pub fn head(&self) -> &Atom {
        match self {
            Clause::Categorical { head, .. } | Clause::Continuous { head, .. } => head,
        }
    }

    pub fn body(&self) -> &[Literal] {
        match self {
            Clause::Categorical { body, .. } | Clause::Continuous { body, .. } => body,
        }
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Atom, &mut Vec<Literal>) {
        match self {
            Clause::Categorical { head, body, .. } | Clause::Continuous { head, body, .. } => (head, body),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Clause::Categorical { span, .. } | Clause::Continuous { span, .. } => *span,
        }
    }

    /// Variables in order of first occurrence, head first.
    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let all = std::iter::once(self.head()).chain(self.body().iter().map(Literal::atom));
        for a in all {
            for v in a.vars() {
                if !out.iter().any(|o| o == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }

    pub fn fact(prob: f64, head: Atom) -> Self {
        Clause::Categorical { prob: Some(prob), head, body: Vec::new(), span: Span::default() }
    }

    pub fn rule(head: Atom, body: Vec<Literal>) -> Self {
        Clause::Categorical { prob: None, head, body, span: Span::default() }
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[Literal]) -> fmt::Result {
    if body.is_empty() {
        return Ok(());
    }
    f.write_str(" :- ")?;
    for (i, l) in body.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::Categorical { prob, head, body, .. } => {
                if let Some(p) = prob {
                    write!(f, "{p} :: ")?;
                }
                write!(f, "{head}")?;
                write_body(f, body)?;
            }
            Clause::Continuous { head, dist, body, .. } => {
                write!(f, "{head} ~ {dist}")?;
                write_body(f, body)?;
            }
        }
        f.write_str(".")
    }
}

/// A constitution program: clauses, the query, and finite variable domains.
///
/// Domains are keyed by variable name: every occurrence of a variable named
/// `T` in any clause ranges over `domains["T"]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub clauses: Vec<Clause>,
    pub query: Atom,
    pub domains: BTreeMap<String, Vec<String>>,
}

impl Default for Program {
    fn default() -> Self {
        Self { clauses: Vec::new(), query: default_query(), domains: BTreeMap::new() }
    }
}

/// `constitution(X, Z)`.
pub fn default_query() -> Atom {
    Atom::new("constitution", vec![Term::Var("X".into()), Term::Var("Z".into())])
}

impl Program {
    /// Whether some clause head has the given predicate and arity.
    pub fn defines(&self, predicate: &str, arity: usize) -> bool {
        self.clauses.iter().any(|c| c.head().signature() == (predicate, arity))
    }

    /// Appends the clauses and domains of `other` (e.g. a perception subprogram).
    pub fn extend(&mut self, other: Program) {
        self.clauses.extend(other.clauses);
        for (k, v) in other.domains {
            let entry = self.domains.entry(k).or_default();
            for c in v {
                if !entry.contains(&c) {
                    entry.push(c);
                }
            }
        }
    }
}

/// Pretty-printer; this output is the normative formatting of the language.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (var, consts) in &self.domains {
            writeln!(f, "domain({var}, [{}]).", consts.join(", "))?;
        }
        if self.query != default_query() {
            writeln!(f, "query({}).", self.query)?;
        }
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}
