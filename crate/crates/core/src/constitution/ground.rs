//! Grounding: substitutes every variable over its finite domain and compiles
//! the result to a propositional program of independent probabilistic facts
//! plus deterministic rules.

use std::collections::{BTreeSet, HashMap};

use super::ast::{Atom, Clause, Distribution, Literal, Program, Region, Term};
use super::normal::{normal_interval, region_probability};
use super::ConstitutionError;

pub type AtomId = usize;

/// `head :- pos..., \+ neg...` over interned ground atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundRule {
    pub head: AtomId,
    pub pos: Vec<AtomId>,
    pub neg: Vec<AtomId>,
}

/// An independent Bernoulli atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbFact {
    pub atom: AtomId,
    pub prob: f64,
}

/// A grounded, compiled program.
///
/// Every probabilistic atom is the head of exactly one [`ProbFact`] and of no
/// rule. Atoms that are neither facts nor rule heads are false.
#[derive(Debug, Clone)]
pub struct GroundProgram {
    pub atoms: Vec<String>,
    pub facts: Vec<ProbFact>,
    pub rules: Vec<GroundRule>,
    pub query: Atom,
    index: HashMap<String, AtomId>,
    defined: BTreeSet<(String, usize)>,
    rules_by_head: Vec<Vec<usize>>,
    prob_of: Vec<Option<f64>>,
    /// Atoms ordered so that every rule's body atoms precede its head.
    order: Vec<AtomId>,
}

impl GroundProgram {
    pub fn atom_id(&self, atom: &Atom) -> Option<AtomId> {
        self.index.get(&atom.to_string()).copied()
    }

    pub fn atom_name(&self, id: AtomId) -> &str {
        &self.atoms[id]
    }

    /// Whether the program has any clause for this predicate/arity.
    pub fn defines(&self, predicate: &str, arity: usize) -> bool {
        self.defined.contains(&(predicate.to_string(), arity))
    }

    pub fn rules_for(&self, id: AtomId) -> impl Iterator<Item = &GroundRule> {
        self.rules_by_head[id].iter().map(move |&r| &self.rules[r])
    }

    /// Bernoulli parameter of `id` when it is a probabilistic atom.
    pub fn fact_prob(&self, id: AtomId) -> Option<f64> {
        self.prob_of[id]
    }

    pub(crate) fn topological_order(&self) -> &[AtomId] {
        &self.order
    }
}

struct Builder {
    atoms: Vec<String>,
    index: HashMap<String, AtomId>,
    facts: Vec<ProbFact>,
    rules: Vec<GroundRule>,
}

impl Builder {
    fn intern(&mut self, name: String) -> AtomId {
        if let Some(&id) = self.index.get(&name) {
            return id;
        }
        let id = self.atoms.len();
        self.atoms.push(name.clone());
        self.index.insert(name, id);
        id
    }

    fn fresh(&mut self, prefix: &str) -> AtomId {
        let name = format!("_{prefix}({})", self.atoms.len());
        self.intern(name)
    }

    fn fact(&mut self, atom: AtomId, prob: f64) {
        self.facts.push(ProbFact { atom, prob });
    }

    fn rule(&mut self, head: AtomId, pos: Vec<AtomId>, neg: Vec<AtomId>) {
        self.rules.push(GroundRule { head, pos, neg });
    }

    /// Emits `head` as `prob` under `body`, introducing a choice atom when needed.
    fn probabilistic(&mut self, head: AtomId, prob: f64, mut pos: Vec<AtomId>, neg: Vec<AtomId>) {
        if prob <= 0.0 {
            return;
        }
        if prob < 1.0 {
            let choice = self.fresh("choice");
            self.fact(choice, prob);
            pos.push(choice);
        }
        self.rule(head, pos, neg);
    }
}

fn substitute(atom: &Atom, binding: &HashMap<&str, &str>) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => Term::Const(binding[v.as_str()].to_string()),
                c => c.clone(),
            })
            .collect(),
    }
}

fn instantiate(clause: &Clause, domains: &std::collections::BTreeMap<String, Vec<String>>) -> Result<Vec<Clause>, ConstitutionError> {
    let vars = clause.vars();
    let mut doms = Vec::with_capacity(vars.len());
    for v in &vars {
        match domains.get(v) {
            Some(d) => doms.push(d),
            None => {
                let span = clause.span();
                return Err(ConstitutionError::UnboundVariable(format!(
                    "variable {v} in clause at {}:{} has no domain",
                    span.line, span.col
                )));
            }
        }
    }
    if doms.iter().any(|d| d.is_empty()) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let binding: HashMap<&str, &str> =
            vars.iter().zip(&idx).zip(&doms).map(|((v, &i), d)| (v.as_str(), d[i].as_str())).collect();
        let mut c = clause.clone();
        let (head, body) = c.parts_mut();
        *head = substitute(head, &binding);
        for l in body.iter_mut() {
            let a = l.atom_mut();
            *a = substitute(a, &binding);
        }
        out.push(c);
        // odometer over the domains, last variable fastest
        let mut k = vars.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < doms[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

struct NormalDef {
    mean: f64,
    std: f64,
    body: Vec<Literal>,
}

/// Grounds `program` and compiles continuous comparisons to Bernoulli facts.
///
/// For a continuous atom compared against a single region, the comparison
/// becomes one fact with `p = P(Y ∈ region)`. When several regions are used on
/// the same atom they are not independent, so the real line is split at every
/// bound and the interval choice is encoded with sequential binary facts whose
/// marginals reproduce the Normal interval probabilities exactly.
pub fn ground(program: &Program) -> Result<GroundProgram, ConstitutionError> {
    let query = &program.query;
    if !program.defines(&query.predicate, query.arity()) {
        return Err(ConstitutionError::UndefinedQuery(query.to_string()));
    }

    let mut normal_sigs: BTreeSet<(String, usize)> = BTreeSet::new();
    for c in &program.clauses {
        if let Clause::Continuous { head, dist: Distribution::Normal { .. }, .. } = c {
            normal_sigs.insert((head.predicate.clone(), head.arity()));
        }
    }

    let mut ground_clauses = Vec::new();
    for c in &program.clauses {
        ground_clauses.extend(instantiate(c, &program.domains)?);
    }

    let mut normals: HashMap<String, NormalDef> = HashMap::new();
    for c in &ground_clauses {
        if let Clause::Continuous { head, dist: Distribution::Normal { mean, std }, body, .. } = c {
            let key = head.to_string();
            if normals.contains_key(&key) {
                return Err(ConstitutionError::Unsupported(format!("continuous atom {key} has more than one distribution")));
            }
            normals.insert(key, NormalDef { mean: *mean, std: *std, body: body.clone() });
        }
    }

    let mut b = Builder { atoms: Vec::new(), index: HashMap::new(), facts: Vec::new(), rules: Vec::new() };
    // comparisons per continuous atom, in first-use order
    let mut regions: Vec<(String, Vec<(Region, AtomId)>)> = Vec::new();

    let mut compile_body = |b: &mut Builder, body: &[Literal]| -> Result<(Vec<AtomId>, Vec<AtomId>), ConstitutionError> {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for l in body {
            match l {
                Literal::Atom { atom, negated } => {
                    if normal_sigs.contains(&(atom.predicate.clone(), atom.arity())) {
                        return Err(ConstitutionError::Unsupported(format!(
                            "continuous atom {atom} may only appear in comparisons"
                        )));
                    }
                    let id = b.intern(atom.to_string());
                    if *negated { neg.push(id) } else { pos.push(id) }
                }
                Literal::Comparison { lhs, region } => {
                    if !normal_sigs.contains(&(lhs.predicate.clone(), lhs.arity())) {
                        return Err(ConstitutionError::Unsupported(format!(
                            "comparison on {lhs}, which no normal-distributed clause defines"
                        )));
                    }
                    let key = lhs.to_string();
                    let id = b.intern(format!("_cmp({key} {region})"));
                    match regions.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, rs)) => {
                            if !rs.iter().any(|(_, a)| *a == id) {
                                rs.push((*region, id));
                            }
                        }
                        None => regions.push((key, vec![(*region, id)])),
                    }
                    pos.push(id);
                }
            }
        }
        Ok((pos, neg))
    };

    // categorical clauses, with bernoulli-distributed ones treated as categorical
    let mut categorical: Vec<(AtomId, Option<f64>, Vec<AtomId>, Vec<AtomId>)> = Vec::new();
    for c in &ground_clauses {
        let (head, prob, body) = match c {
            Clause::Categorical { prob, head, body, .. } => (head, *prob, body),
            Clause::Continuous { head, dist: Distribution::Bernoulli { p }, body, .. } => (head, Some(*p), body),
            Clause::Continuous { .. } => continue,
        };
        let head_id = b.intern(head.to_string());
        let (pos, neg) = compile_body(&mut b, body)?;
        categorical.push((head_id, prob, pos, neg));
    }
    let mut normal_bodies: HashMap<String, (Vec<AtomId>, Vec<AtomId>)> = HashMap::new();
    let mut normal_keys: Vec<&String> = normals.keys().collect();
    normal_keys.sort();
    for key in normal_keys {
        let compiled = compile_body(&mut b, &normals[key].body)?;
        normal_bodies.insert(key.clone(), compiled);
    }

    let mut clause_count: HashMap<AtomId, usize> = HashMap::new();
    for (h, ..) in &categorical {
        *clause_count.entry(*h).or_default() += 1;
    }
    for (head, prob, pos, neg) in categorical {
        match prob {
            Some(p) if p > 0.0 && p < 1.0 && pos.is_empty() && neg.is_empty() && clause_count[&head] == 1 => {
                b.fact(head, p)
            }
            Some(p) => b.probabilistic(head, p, pos, neg),
            None => b.rule(head, pos, neg),
        }
    }

    for (key, rs) in &regions {
        let Some(def) = normals.get(key) else { continue };
        let (body_pos, body_neg) = normal_bodies[key].clone();
        if rs.len() == 1 {
            let (region, cmp) = rs[0];
            let p = region_probability(def.mean, def.std, region);
            if body_pos.is_empty() && body_neg.is_empty() && p > 0.0 && p < 1.0 {
                b.fact(cmp, p);
            } else {
                b.probabilistic(cmp, p, body_pos, body_neg);
            }
            continue;
        }
        let mut cuts: Vec<f64> = rs.iter().flat_map(|(r, _)| r.bounds()).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let n_iv = cuts.len() + 1;
        let lo = |i: usize| if i == 0 { f64::NEG_INFINITY } else { cuts[i - 1] };
        let hi = |i: usize| if i == cuts.len() { f64::INFINITY } else { cuts[i] };
        let probs: Vec<f64> = (0..n_iv).map(|i| normal_interval(def.mean, def.std, lo(i), hi(i))).collect();
        let witness = |i: usize| match (lo(i).is_finite(), hi(i).is_finite()) {
            (true, true) => 0.5 * (lo(i) + hi(i)),
            (false, true) => hi(i) - 1.0,
            (true, false) => lo(i) + 1.0,
            (false, false) => 0.0,
        };
        let mut sticks = Vec::with_capacity(n_iv - 1);
        let mut intervals = Vec::with_capacity(n_iv);
        for i in 0..n_iv {
            let iv = b.fresh("interval");
            let mut pos = Vec::new();
            if i + 1 < n_iv {
                let rest: f64 = probs[i..].iter().sum();
                let p = if rest > 0.0 { (probs[i] / rest).clamp(0.0, 1.0) } else { 0.0 };
                let stick = b.fresh("stick");
                b.fact(stick, p);
                pos.push(stick);
                sticks.push(stick);
            }
            let neg: Vec<AtomId> = sticks[..i].to_vec();
            b.rule(iv, pos, neg);
            intervals.push(iv);
        }
        for &(region, cmp) in rs {
            for (i, &iv) in intervals.iter().enumerate() {
                if region.contains(witness(i)) {
                    let mut pos = body_pos.clone();
                    pos.push(iv);
                    b.rule(cmp, pos, body_neg.clone());
                }
            }
        }
    }

    let n = b.atoms.len();
    let mut prob_of = vec![None; n];
    for f in &b.facts {
        prob_of[f.atom] = Some(f.prob);
    }
    let mut rules_by_head = vec![Vec::new(); n];
    for (i, r) in b.rules.iter().enumerate() {
        debug_assert!(prob_of[r.head].is_none());
        rules_by_head[r.head].push(i);
    }
    let order = topological_order(n, &b.rules, &b.atoms)?;
    let defined = program
        .clauses
        .iter()
        .map(|c| (c.head().predicate.clone(), c.head().arity()))
        .collect();

    Ok(GroundProgram {
        atoms: b.atoms,
        facts: b.facts,
        rules: b.rules,
        query: query.clone(),
        index: b.index,
        defined,
        rules_by_head,
        prob_of,
        order,
    })
}

fn topological_order(n: usize, rules: &[GroundRule], names: &[String]) -> Result<Vec<AtomId>, ConstitutionError> {
    let mut dependents: Vec<Vec<AtomId>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for r in rules {
        for &d in r.pos.iter().chain(&r.neg) {
            dependents[d].push(r.head);
            indegree[r.head] += 1;
        }
    }
    let mut ready: Vec<AtomId> = (0..n).filter(|&a| indegree[a] == 0).rev().collect();
    let mut order = Vec::with_capacity(n);
    while let Some(a) = ready.pop() {
        order.push(a);
        for &h in &dependents[a] {
            indegree[h] -= 1;
            if indegree[h] == 0 {
                ready.push(h);
            }
        }
    }
    if order.len() < n {
        let stuck: Vec<&str> = (0..n).filter(|&a| indegree[a] > 0).map(|a| names[a].as_str()).take(5).collect();
        return Err(ConstitutionError::Unsupported(format!(
            "recursive dependency among ground atoms ({})",
            stuck.join(", ")
        )));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitution::parse;

    #[test]
    fn single_comparison_becomes_a_fact() {
        let p = parse("distance(x, road) ~ normal(100, 1). q :- distance(x, road) > 100. query(q).").unwrap();
        let g = ground(&p).unwrap();
        assert_eq!(g.facts.len(), 1);
        assert_eq!(g.facts[0].prob, 0.5);
        assert_eq!(g.atom_name(g.facts[0].atom), "_cmp(distance(x, road) > 100)");
    }

    #[test]
    fn between_uses_cdf_difference() {
        let p = parse("d ~ normal(100, 1). q :- d between [99, 101]. query(q).").unwrap();
        let g = ground(&p).unwrap();
        assert!((g.facts[0].prob - 0.682_689_492_137_085_9).abs() < 1e-12);
    }

    #[test]
    fn domains_expand_variables() {
        let p = parse("domain(T, [a, b, c]). 0.5 :: t(T). q :- t(T). query(q).").unwrap();
        let g = ground(&p).unwrap();
        assert_eq!(g.facts.len(), 3);
        assert_eq!(g.rules.len(), 3);
    }

    #[test]
    fn errors() {
        let unbound = parse("q :- p(Y). p(a). query(q).").unwrap();
        assert!(matches!(ground(&unbound), Err(ConstitutionError::UnboundVariable(_))));
        let cyclic = parse("0.5 :: a. b :- a, c. c :- b. query(c).").unwrap();
        assert!(matches!(ground(&cyclic), Err(ConstitutionError::Unsupported(_))));
        let plain = parse("d ~ normal(0, 1). q :- d. query(q).").unwrap();
        assert!(matches!(ground(&plain), Err(ConstitutionError::Unsupported(_))));
        let discrete = parse("0.5 :: d. q :- d > 1. query(q).").unwrap();
        assert!(matches!(ground(&discrete), Err(ConstitutionError::Unsupported(_))));
        let twice = parse("d ~ normal(0, 1). d ~ normal(1, 1). q :- d > 0. query(q).").unwrap();
        assert!(matches!(ground(&twice), Err(ConstitutionError::Unsupported(_))));
        let undefined = parse("a.").unwrap();
        assert!(matches!(ground(&undefined), Err(ConstitutionError::UndefinedQuery(_))));
    }

    #[test]
    fn several_regions_share_one_partition() {
        let p = parse("d ~ normal(0, 1). q :- d > 1, d < 0. query(q).").unwrap();
        let g = ground(&p).unwrap();
        // cuts at 0 and 1: three intervals, two sticks
        assert_eq!(g.facts.len(), 2);
    }
}
