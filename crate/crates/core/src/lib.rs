pub mod analytic;
pub mod blaschke;
pub mod classify;
pub mod error;
pub mod frames;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod monodromy;
pub mod operators;
pub mod poly;
pub mod verify;
pub mod series;
pub mod weights;

pub use blaschke::{BlaschkeProduct, MoebiusTransform};
pub use error::{LabError, Result};
pub use series::{FunctionSpec, PowerSeries};
pub use weights::WeightSequence;
