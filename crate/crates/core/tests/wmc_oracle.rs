use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use rulefilter::constitution::{ground, parse, query_probability, Atom};
use rulefilter::seed;

/// A random acyclic propositional program together with its source text.
#[derive(Debug, Clone)]
struct RandomProgram {
    facts: Vec<f64>,
    /// `(head, probability, body)` with body literals `(is_fact, index, negated)`.
    rules: Vec<(usize, Option<f64>, Vec<(bool, usize, bool)>)>,
    query: usize,
}

impl RandomProgram {
    fn generate(seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value);
        let n_facts = rng.random_range(1..=6usize);
        let n_rules = rng.random_range(1..=10usize);
        let max_prob_rules = 10 - n_facts;
        let facts = (0..n_facts).map(|_| prob(&mut rng)).collect();
        let mut rules = Vec::new();
        let mut prob_rules = 0;
        let mut max_head = 0;
        for _ in 0..n_rules {
            // heads grow so that bodies only refer to earlier derived atoms
            let head = rng.random_range(max_head..=max_head + 1);
            max_head = head;
            let len = rng.random_range(0..=3usize);
            let body = (0..len)
                .map(|_| {
                    if head > 0 && rng.random_bool(0.4) {
                        (false, rng.random_range(0..head), rng.random_bool(0.3))
                    } else {
                        (true, rng.random_range(0..n_facts), rng.random_bool(0.3))
                    }
                })
                .collect();
            let p = if prob_rules < max_prob_rules && rng.random_bool(0.3) {
                prob_rules += 1;
                Some(prob(&mut rng))
            } else {
                None
            };
            rules.push((head, p, body));
        }
        let query = rules.last().unwrap().0;
        Self { facts, rules, query }
    }

    fn source(&self, shuffle_seed: Option<u64>) -> String {
        let mut lines: Vec<String> = self.facts.iter().enumerate().map(|(i, p)| format!("{p} :: a{i}.")).collect();
        for (head, p, body) in &self.rules {
            let mut s = match p {
                Some(p) => format!("{p} :: d{head}"),
                None => format!("d{head}"),
            };
            if !body.is_empty() {
                let lits: Vec<String> = body
                    .iter()
                    .map(|&(is_fact, i, neg)| format!("{}{}{i}", if neg { "\\+ " } else { "" }, if is_fact { "a" } else { "d" }))
                    .collect();
                s += &format!(" :- {}", lits.join(", "));
            }
            lines.push(s + ".");
        }
        if let Some(sd) = shuffle_seed {
            lines.shuffle(&mut seed::rng(sd));
        }
        lines.push(format!("query(d{}).", self.query));
        lines.join("\n")
    }

    /// Sum over all 2^k assignments of the independent Bernoulli atoms.
    fn brute_force(&self) -> f64 {
        let choice_rules: Vec<usize> = (0..self.rules.len()).filter(|&r| self.rules[r].1.is_some()).collect();
        let k = self.facts.len() + choice_rules.len();
        let n_derived = self.rules.iter().map(|r| r.0).max().unwrap() + 1;
        let mut total = 0.0;
        for mask in 0u32..(1 << k) {
            let bit = |i: usize| mask >> i & 1 == 1;
            let mut weight = 1.0;
            for (i, &p) in self.facts.iter().enumerate() {
                weight *= if bit(i) { p } else { 1.0 - p };
            }
            let mut chosen = vec![true; self.rules.len()];
            for (j, &r) in choice_rules.iter().enumerate() {
                let p = self.rules[r].1.unwrap();
                let on = bit(self.facts.len() + j);
                weight *= if on { p } else { 1.0 - p };
                chosen[r] = on;
            }
            if weight == 0.0 {
                continue;
            }
            let mut derived = vec![false; n_derived];
            for d in 0..n_derived {
                derived[d] = self.rules.iter().enumerate().any(|(r, (head, _, body))| {
                    *head == d
                        && chosen[r]
                        && body.iter().all(|&(is_fact, i, neg)| (if is_fact { bit(i) } else { derived[i] }) != neg)
                });
            }
            if derived[self.query] {
                total += weight;
            }
        }
        total
    }
}

fn prob<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => (rng.random_range(1..1000) as f64) / 1000.0,
    }
}

fn engine(src: &str, query: &str) -> f64 {
    let program = parse(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let gp = ground(&program).unwrap();
    query_probability(&gp, &Atom::ground(query, &[])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_brute_force_enumeration(s in any::<u64>()) {
        let rp = RandomProgram::generate(s);
        let src = rp.source(None);
        let expected = rp.brute_force();
        let got = engine(&src, &format!("d{}", rp.query));
        prop_assert!((got - expected).abs() < 1e-9, "engine {got}, oracle {expected}\n{src}");
    }

    #[test]
    fn clause_order_does_not_matter(s in any::<u64>(), shuffle in any::<u64>()) {
        let rp = RandomProgram::generate(s);
        let q = format!("d{}", rp.query);
        let a = engine(&rp.source(None), &q);
        let b = engine(&rp.source(Some(shuffle)), &q);
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn query_and_its_negation_sum_to_one(s in any::<u64>()) {
        let rp = RandomProgram::generate(s);
        let src = rp.source(None);
        let body = src.rsplit_once('\n').map(|(b, _)| b).unwrap_or("");
        let q = format!("d{}", rp.query);
        let p = engine(&src, &q);
        let np = engine(&format!("{body}\nnq :- \\+ {q}.\nquery(nq)."), "nq");
        prop_assert!((p + np - 1.0).abs() < 1e-9);
    }

    #[test]
    fn raising_a_positive_fact_never_lowers_the_query(pa in 0.0..1.0f64, pb in 0.0..1.0f64, bump in 0.0..1.0f64) {
        let src = |a: f64| format!("{a} :: a. {pb} :: b. q :- a, b. q :- b, c. 0.5 :: c.\nquery(q).");
        let lo = engine(&src(pa), "q");
        let hi = engine(&src(pa + (1.0 - pa) * bump), "q");
        prop_assert!(hi >= lo - 1e-15);
    }
}

/// Composite Simpson's rule with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn normal_pdf(mu: f64, sigma: f64) -> impl Fn(f64) -> f64 {
    move |x| (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

#[test]
fn comparisons_match_quadrature_of_the_density() {
    let cases = [(100.0, 1.0), (10.0, 2.0), (-3.0, 0.5), (50.0, 7.5)];
    for (mu, sigma) in cases {
        for &b in &[mu - 2.5 * sigma, mu - 0.3 * sigma, mu, mu + 1.7 * sigma] {
            let src = format!("d ~ normal({mu}, {sigma}).\nq :- d > {b}.\nquery(q).");
            let expected = simpson(normal_pdf(mu, sigma), b, mu + 12.0 * sigma, 20_000);
            let got = engine(&src, "q");
            assert!((got - expected).abs() < 1e-7, "P(N({mu},{sigma}) > {b}) = {got}, quadrature {expected}");

            let lo = b;
            let hi = b + 1.3 * sigma;
            let src = format!("d ~ normal({mu}, {sigma}).\nq :- d between [{lo}, {hi}].\nquery(q).");
            let expected = simpson(normal_pdf(mu, sigma), lo, hi, 20_000);
            let got = engine(&src, "q");
            assert!((got - expected).abs() < 1e-7, "between: {got} vs {expected}");
        }
    }
}

#[test]
fn documented_comparison_values() {
    let p = engine("d ~ normal(100, 1).\nq :- d > 100.\nquery(q).", "q");
    assert!((p - 0.5).abs() < 1e-9);
    let p = engine("d ~ normal(10, 2).\nq :- d > 5.\nquery(q).", "q");
    assert!((p - 0.993_790_334_674_223_7).abs() < 1e-9);
}

#[test]
fn several_comparisons_on_one_atom_are_consistent() {
    // both regions of the same draw: P(d > 99 and d < 101) must equal the interval probability
    let both = engine("d ~ normal(100, 1).\nq :- d > 99, d < 101.\nquery(q).", "q");
    let interval = engine("d ~ normal(100, 1).\nq :- d between [99, 101].\nquery(q).", "q");
    assert!((both - interval).abs() < 1e-12, "{both} vs {interval}");
    // disjoint regions can never hold together
    let never = engine("d ~ normal(100, 1).\nq :- d > 101, d < 99.\nquery(q).", "q");
    assert!(never.abs() < 1e-12);
}
