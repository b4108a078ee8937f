//! Query answering over relational data exchange under closed-world style
//! semantics, centred on the GCWA* semantics for universal queries.
//!
//! The modules build on each other: [`model`] holds instances and mappings,
//! [`logic`] evaluates first-order queries, [`chase`] and [`corelib`] compute
//! canonical and core solutions, [`minrep`] enumerates minimal
//! representatives, [`gcwa`] answers universal queries, and [`oracle`]
//! enumerates solutions by brute force on small inputs.

pub mod chase;
pub mod cli;
pub mod corelib;
pub mod error;
pub mod gcwa;
pub mod gen;
pub mod logic;
pub mod minrep;
pub mod model;
pub mod oracle;
pub mod textio;

pub use error::{Error, Precondition, Result};
pub use logic::{FOQuery, Formula, Tuple, TupleSet};
pub use model::{atom, Atom, Instance, PAtom, Schema, SchemaMapping, StTgd, Term, Value, ValueMap};
