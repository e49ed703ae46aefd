use std::collections::BTreeMap;
use std::sync::Arc;

use crate::geo_map::{MapError, RelationKind, StarMap};
use crate::geometry::Point2;

use super::ast::{Atom, Clause, Distribution, Literal, Program, Span, Term};
use super::ground::ground;
use super::wmc::{query_probability_with, WmcOptions};
use super::ConstitutionError;

/// Lower bound on Normal standard deviations taken from StaR map layers (meters).
pub const STD_FLOOR: f64 = 1e-3;
/// Constant bound to the query's state variable.
pub const STATE_CONST: &str = "x";
/// Constant bound to the query's measurement variable.
pub const MEASUREMENT_CONST: &str = "z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Location {
    State,
    Measurement,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct EnvAtom {
    relation: RelationKind,
    location: Location,
    tag: String,
}

impl EnvAtom {
    fn head(&self) -> Atom {
        let loc = match self.location {
            Location::State => STATE_CONST,
            Location::Measurement => MEASUREMENT_CONST,
        };
        Atom::ground(self.relation.name(), &[loc, &self.tag])
    }
}

fn relation_of(predicate: &str) -> Option<RelationKind> {
    predicate.parse().ok()
}

/// A constitution prepared for repeated evaluation against one StaR map.
///
/// Construction resolves which environment atoms the program uses and checks
/// that a layer exists for each; [`Constitution::bind`] then only interpolates.
#[derive(Debug, Clone)]
pub struct Constitution {
    template: Program,
    env: Vec<EnvAtom>,
    starmap: Arc<StarMap>,
    pub wmc: WmcOptions,
}

impl Constitution {
    pub fn new(program: &Program, starmap: Arc<StarMap>) -> Result<Self, ConstitutionError> {
        let mut template = program.clone();
        let (state_var, meas_var) = match program.query.args.as_slice() {
            [s, m] => (s.clone(), m.clone()),
            _ => {
                return Err(ConstitutionError::Config(format!(
                    "query {} must have a state and a measurement argument",
                    program.query
                )))
            }
        };
        let bind_term = |t: &Term, c: &str| match t {
            Term::Var(_) => Term::Const(c.to_string()),
            other => other.clone(),
        };
        template.query.args = vec![bind_term(&state_var, STATE_CONST), bind_term(&meas_var, MEASUREMENT_CONST)];
        if let Term::Var(v) = &state_var {
            template.domains.insert(v.clone(), vec![STATE_CONST.to_string()]);
        }
        if let Term::Var(v) = &meas_var {
            template.domains.insert(v.clone(), vec![MEASUREMENT_CONST.to_string()]);
        }

        let mut env: Vec<EnvAtom> = Vec::new();
        for clause in &program.clauses {
            for lit in clause.body() {
                let atom = lit.atom();
                let Some(relation) = relation_of(&atom.predicate) else { continue };
                if atom.arity() != 2 || program.defines(&atom.predicate, 2) {
                    continue;
                }
                let location = match &atom.args[0] {
                    t if *t == state_var || t.name() == STATE_CONST && !t.is_var() => Location::State,
                    t if *t == meas_var || t.name() == MEASUREMENT_CONST && !t.is_var() => Location::Measurement,
                    other => {
                        return Err(ConstitutionError::Config(format!(
                            "environment atom {atom} uses location {other}, which is neither the state nor the measurement"
                        )))
                    }
                };
                let tags: Vec<String> = match &atom.args[1] {
                    Term::Const(t) => vec![t.clone()],
                    Term::Var(v) => program
                        .domains
                        .get(v)
                        .cloned()
                        .ok_or_else(|| ConstitutionError::UnboundVariable(format!("tag variable {v} in {atom} has no domain")))?,
                };
                for tag in tags {
                    if starmap.layer(relation, &tag).is_none() {
                        return Err(ConstitutionError::MissingLayer(format!("{}({}, {tag})", relation, atom.args[0])));
                    }
                    let e = EnvAtom { relation, location, tag };
                    if !env.contains(&e) {
                        env.push(e);
                    }
                }
            }
        }
        env.sort();
        Ok(Self { template, env, starmap, wmc: WmcOptions::default() })
    }

    pub fn starmap(&self) -> &StarMap {
        &self.starmap
    }

    /// Rewrites environment atoms as facts parameterized at the given locations.
    pub fn bind(&self, state: Point2, measurement: Point2) -> Result<Program, ConstitutionError> {
        let mut program = self.template.clone();
        let mut cache: BTreeMap<(RelationKind, &str, Location), Clause> = BTreeMap::new();
        for e in &self.env {
            let at = match e.location {
                Location::State => state,
                Location::Measurement => measurement,
            };
            let layer = self.starmap.layer(e.relation, &e.tag).expect("checked at construction");
            let m = layer.interpolate(at).map_err(|err| match err {
                MapError::OutOfBounds { x, y } => ConstitutionError::OutOfBounds { x, y },
                other => ConstitutionError::Map(other),
            })?;
            let head = e.head();
            let clause = if e.relation.is_indicator() {
                Clause::Categorical { prob: Some(m.mean.clamp(0.0, 1.0)), head, body: Vec::new(), span: Span::default() }
            } else {
                Clause::Continuous {
                    head,
                    dist: Distribution::Normal { mean: m.mean, std: m.std.max(STD_FLOOR) },
                    body: Vec::new(),
                    span: Span::default(),
                }
            };
            cache.insert((e.relation, &e.tag, e.location), clause);
        }
        program.clauses.extend(cache.into_values());
        Ok(program)
    }

    /// `P(C | x, z)`: bind, ground, and count models of the query.
    pub fn probability(&self, state: Point2, measurement: Point2) -> Result<f64, ConstitutionError> {
        let bound = self.bind(state, measurement)?;
        let gp = ground(&bound)?;
        query_probability_with(&gp, &bound.query, self.wmc)
    }
}

/// Rewrites the environment atoms of `program` as facts interpolated from `starmap`.
pub fn bind_environment(program: &Program, starmap: &StarMap, state: Point2, measurement: Point2) -> Result<Program, ConstitutionError> {
    Constitution::new(program, Arc::new(starmap.clone()))?.bind(state, measurement)
}

/// `P(C | x, z)` for a single state–measurement pair.
pub fn constitution_probability(program: &Program, starmap: &StarMap, state: Point2, measurement: Point2) -> Result<f64, ConstitutionError> {
    Constitution::new(program, Arc::new(starmap.clone()))?.probability(state, measurement)
}

/// Whether a literal refers to an environment relation (used in diagnostics).
pub fn is_environment_literal(lit: &Literal) -> bool {
    relation_of(&lit.atom().predicate).is_some() && lit.atom().arity() == 2
}
