// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix code reads better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod adam;
pub mod emission;
pub mod error;
pub mod eval;
pub mod features;
pub mod flow;
pub mod gmm;
pub mod hmm;
pub mod io;
pub mod math;
pub mod nmm;
pub mod par;
pub mod sequence;
pub mod standardize;
pub mod train;

pub use emission::{EmissionKind, EmissionModel};
pub use error::{Error, Result};
pub use hmm::{HmmModel, PosteriorTables};
pub use sequence::FeatureSequence;
