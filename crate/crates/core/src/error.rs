use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("base must be at least 2, got {0}")]
    InvalidBase(u64),

    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),

    #[error("prime {0} appears more than once")]
    RepeatedPrime(u64),

    #[error("prime set is empty")]
    EmptyPrimeSet,

    #[error("factor oracle is capped at n <= {cap}, got {n}")]
    OracleCap { n: u64, cap: u64 },

    /// A certified interval straddles a decision boundary.
    #[error("precision exhausted while computing {0}")]
    PrecisionExhausted(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A structural invariant failed; the CLI maps this to exit code 2.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("relation row {row} is linearly dependent on the rows before it")]
    RankDeficient { row: usize },

    #[error("relation row {row} is inconsistent (reduces to 0 = nonzero)")]
    InconsistentRelation { row: usize },

    #[error(
        "{k} independent relations among {k} ratios would make every log 2 / log p rational, \
         i.e. a power of 2 equal to a power of p"
    )]
    FullRankRelations { k: usize },

    #[error("checkpoint problem fingerprint does not match the problem being resumed")]
    FingerprintMismatch,

    #[error("checkpoint is corrupt: {0}")]
    CorruptCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::InvariantViolation(_))
    }
}
