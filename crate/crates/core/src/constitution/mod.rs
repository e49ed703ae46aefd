//! The constitution language: a probabilistic logic program over spatial
//! relations, grounded over finite domains and solved by weighted model counting.
//!
//! Pipeline: [`parse`] → [`Constitution::bind`] (environment atoms from a StaR
//! map) → [`ground`] → [`query_probability`].

mod ast;
mod bind;
mod field;
mod ground;
mod normal;
mod parser;
mod wmc;

use thiserror::Error;

use crate::geo_map::MapError;

pub use ast::{default_query, Atom, Clause, Distribution, Literal, Program, Region, Span, Term};
pub use bind::{
    bind_environment, constitution_probability, is_environment_literal, Constitution, MEASUREMENT_CONST,
    STATE_CONST, STD_FLOOR,
};
pub use field::{precompute_field, ConstitutionField, MeasurementPolicy};
pub use ground::{ground, AtomId, GroundProgram, GroundRule, ProbFact};
pub use normal::{normal_interval, region_probability, std_normal_cdf};
pub use parser::parse;
pub use wmc::{query_probability, query_probability_with, WmcOptions, DEFAULT_MAX_ATOMS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutionError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("probability {value} at {line}:{col} is outside [0, 1]")]
    ProbabilityRange { line: usize, col: usize, value: f64 },
    #[error("unbound variable: {0}")]
    UnboundVariable(String),
    #[error("query {0} is not defined by the program")]
    UndefinedQuery(String),
    #[error("unsupported program: {0}")]
    Unsupported(String),
    #[error("query depends on {atoms} probabilistic atoms, above the limit of {limit}; factor the program or raise the limit")]
    Capacity { atoms: usize, limit: usize },
    #[error("no StaR map layer for environment atom {0}")]
    MissingLayer(String),
    #[error("constitution configuration error: {0}")]
    Config(String),
    #[error("point ({x}, {y}) lies outside the StaR map bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error(transparent)]
    Map(#[from] MapError),
}
