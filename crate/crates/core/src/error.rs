//! Error type shared by every module.

use crate::model::Value;
use crate::textio::TextError;

/// Which precondition of a fast-path operation failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precondition {
    NotPacked,
    NotCore,
    NotUniversal,
    NotStTgdMapping,
}

impl std::fmt::Display for Precondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precondition::NotPacked => "atom blocks are not packed",
            Precondition::NotCore => "instance is not a core",
            Precondition::NotUniversal => "query is not universal",
            Precondition::NotStTgdMapping => "mapping has constraints other than st-tgds",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] TextError),
    #[error("value {0} has no image under the map")]
    UndefinedValue(Value),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("source instance contains null {0}")]
    NotGround(Value),
    #[error("query is not universal")]
    NotUniversal,
    #[error("query is not a union of conjunctive queries")]
    NotHomomorphismClosed,
    #[error("precondition violated: {0}")]
    PreconditionViolated(Precondition),
    #[error("block has {nulls} nulls, more than the limit {limit}")]
    BlockTooLarge { nulls: usize, limit: usize },
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("fixpoint not reached after {0} rounds")]
    FixpointNotReached(usize),
    #[error("semantics {0} is not supported for this mapping")]
    UnsupportedSemantics(String),
}

pub type Result<T> = std::result::Result<T, Error>;
