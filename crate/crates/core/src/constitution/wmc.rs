//! Weighted model counting by Shannon expansion over the probabilistic atoms
//! that the query depends on.
//!
//! Each branch evaluates the rules in three-valued (Kleene) logic, so a branch
//! stops as soon as the query is decided. Residual subproblems are memoized on
//! the values that still matter: the decided atoms feeding undecided rules.

use std::collections::HashMap;

use super::ast::Atom;
use super::ground::{AtomId, GroundProgram};
use super::ConstitutionError;

/// Default limit on the number of probabilistic atoms a query may depend on.
pub const DEFAULT_MAX_ATOMS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WmcOptions {
    pub max_atoms: usize,
}

impl Default for WmcOptions {
    fn default() -> Self {
        Self { max_atoms: DEFAULT_MAX_ATOMS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
enum Tri {
    False = 0,
    True = 1,
    Unknown = 2,
}

impl Tri {
    fn and(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    fn or(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::True, _) | (_, Tri::True) => Tri::True,
            (Tri::False, Tri::False) => Tri::False,
            _ => Tri::Unknown,
        }
    }

    fn not(self) -> Tri {
        match self {
            Tri::False => Tri::True,
            Tri::True => Tri::False,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

/// `P(query)` with the default capacity limit.
pub fn query_probability(gp: &GroundProgram, query: &Atom) -> Result<f64, ConstitutionError> {
    query_probability_with(gp, query, WmcOptions::default())
}

/// `P(query) = Σ_models Π_atoms P(atom = model(atom))`.
pub fn query_probability_with(gp: &GroundProgram, query: &Atom, opts: WmcOptions) -> Result<f64, ConstitutionError> {
    if !query.is_ground() {
        return Err(ConstitutionError::UnboundVariable(format!("query {query} is not ground")));
    }
    if !gp.defines(&query.predicate, query.arity()) {
        return Err(ConstitutionError::UndefinedQuery(query.to_string()));
    }
    let Some(q) = gp.atom_id(query) else { return Ok(0.0) };
    if let Some(p) = gp.fact_prob(q) {
        return Ok(p);
    }
    Counter::new(gp, q, opts)?.run()
}

struct Counter<'a> {
    gp: &'a GroundProgram,
    query: AtomId,
    /// Derived atoms of the query's cone in evaluation order.
    derived: Vec<AtomId>,
    /// Probabilistic atoms of the cone in branching order.
    vars: Vec<AtomId>,
    /// Every atom of the cone, for memo keys.
    cone: Vec<AtomId>,
    memo: HashMap<Vec<u8>, f64>,
}

impl<'a> Counter<'a> {
    fn new(gp: &'a GroundProgram, query: AtomId, opts: WmcOptions) -> Result<Self, ConstitutionError> {
        let mut in_cone = vec![false; gp.atoms.len()];
        let mut stack = vec![query];
        in_cone[query] = true;
        while let Some(a) = stack.pop() {
            for r in gp.rules_for(a) {
                for &d in r.pos.iter().chain(&r.neg) {
                    if !in_cone[d] {
                        in_cone[d] = true;
                        stack.push(d);
                    }
                }
            }
        }
        let cone: Vec<AtomId> = gp.topological_order().iter().copied().filter(|&a| in_cone[a]).collect();
        let vars: Vec<AtomId> = cone.iter().copied().filter(|&a| gp.fact_prob(a).is_some()).collect();
        if vars.len() > opts.max_atoms {
            return Err(ConstitutionError::Capacity { atoms: vars.len(), limit: opts.max_atoms });
        }
        let derived = cone.iter().copied().filter(|&a| gp.fact_prob(a).is_none()).collect();
        Ok(Self { gp, query, derived, vars, cone, memo: HashMap::new() })
    }

    fn run(mut self) -> Result<f64, ConstitutionError> {
        let mut values = vec![Tri::Unknown; self.gp.atoms.len()];
        let p = self.expand(0, &mut values);
        Ok(p.clamp(0.0, 1.0))
    }

    fn evaluate(&self, values: &mut [Tri]) {
        for &a in &self.derived {
            let mut v = Tri::False;
            for r in self.gp.rules_for(a) {
                let mut rv = Tri::True;
                for &p in &r.pos {
                    rv = rv.and(values[p]);
                }
                for &n in &r.neg {
                    rv = rv.and(values[n].not());
                }
                v = v.or(rv);
                if v == Tri::True {
                    break;
                }
            }
            values[a] = v;
        }
    }

    fn memo_key(&self, level: usize, values: &[Tri]) -> Vec<u8> {
        let mut relevant = vec![false; values.len()];
        for &a in &self.derived {
            if values[a] == Tri::Unknown {
                relevant[a] = true;
                for r in self.gp.rules_for(a) {
                    for &d in r.pos.iter().chain(&r.neg) {
                        relevant[d] = true;
                    }
                }
            }
        }
        let mut key = Vec::with_capacity(self.cone.len() + 4);
        key.extend_from_slice(&(level as u32).to_le_bytes());
        key.extend(self.cone.iter().map(|&a| if relevant[a] { values[a] as u8 } else { 3 }));
        key
    }

    /// Probability of the query given the assignment of `vars[..level]`.
    fn expand(&mut self, level: usize, values: &mut Vec<Tri>) -> f64 {
        self.evaluate(values);
        match values[self.query] {
            Tri::True => return 1.0,
            Tri::False => return 0.0,
            Tri::Unknown => {}
        }
        debug_assert!(level < self.vars.len(), "query undecided with every atom assigned");
        let key = self.memo_key(level, values);
        if let Some(&p) = self.memo.get(&key) {
            return p;
        }
        let var = self.vars[level];
        let p_true = self.gp.fact_prob(var).expect("branching variable is probabilistic");
        let saved = values.clone();
        values[var] = Tri::True;
        let hi = if p_true > 0.0 { self.expand(level + 1, values) } else { 0.0 };
        values.copy_from_slice(&saved);
        values[var] = Tri::False;
        let lo = if p_true < 1.0 { self.expand(level + 1, values) } else { 0.0 };
        values.copy_from_slice(&saved);
        let p = p_true * hi + (1.0 - p_true) * lo;
        self.memo.insert(key, p);
        p
    }
}
