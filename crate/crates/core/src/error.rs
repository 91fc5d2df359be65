use thiserror::Error;

use crate::bound::BoundError;
use crate::census::CensusError;
use crate::chisq::ChiSquareError;
use crate::entropy::EntropyError;
use crate::numerics::NumericsError;
use crate::oracle::OracleError;
use crate::walk::WalkError;

/// Any error raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Census(#[from] CensusError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    ChiSquare(#[from] ChiSquareError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Walk(#[from] WalkError),
}
