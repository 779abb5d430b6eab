use thiserror::Error;

use crate::measure::Point;
use crate::rational::{to_canonical, Q};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("value too large to evaluate exactly: {0}")]
    TooLarge(String),

    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("map undefined at {0}")]
    UndefinedAt(u64),
    #[error("measure charges PF")]
    HasPFAtom,
    #[error("weight at {0} is not positive")]
    NotNonNegative(Point),

    #[error("set is not contained in the finite ground")]
    OutOfGround,
    #[error("ground of size {size} exceeds the bound {bound}")]
    GroundTooLarge { size: usize, bound: usize },
    #[error("ideal is not block structured")]
    NotBlockStructured,

    #[error("no index found below the horizon (reached k = {k})")]
    HorizonExhausted { k: usize },
    #[error("submeasure stays bounded: no prefix from {from} exceeds {} up to {horizon}", to_canonical(bound))]
    BoundedSubmeasure { from: u64, bound: Q, horizon: u64 },
    #[error("every element of the prefix is zero")]
    AllZeroPrefix,
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("total masses differ: {} vs {}", to_canonical(.0), to_canonical(.1))]
    MassMismatch(Q, Q),
    #[error("atom {} exceeds eps/(2|A|) = {}", to_canonical(atom), to_canonical(limit))]
    AtomTooLarge { atom: Q, limit: Q },
    #[error("block {0} does not have norm n")]
    NormMismatch(u64),
    #[error("atom condition fails at {0:?}")]
    AtomConditionFails(Vec<u64>),
    #[error("function value at {0} is not positive")]
    NonPositiveValue(u64),
    #[error("block {0} has norm below n + 1")]
    NormTooSmall(u64),
    #[error("2n^2 g(n) <= h(n) fails up to the horizon; greatest violation at n = {0}")]
    DominationFails(u64),
    #[error("fiber over {0} minus the pseudo-union is not finite up to the horizon")]
    NotPseudoUnion(u64),
    #[error("hypothesis `{which}` fails at n = {n}")]
    HypothesisFails { n: u64, which: String },
    #[error("map is not finite-to-one on its domain")]
    NotFiniteToOne,
    #[error("map domain does not cover the required blocks")]
    DomainTooSmall,
    #[error("inconsistent membership verdicts: {0}")]
    InconsistentVerdicts(String),
    #[error("not an ideal: {0}")]
    NotAnIdeal(String),
    #[error("condition fails at n = {0}")]
    ConditionFails(u64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
