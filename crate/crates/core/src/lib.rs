//! Structural analysis and simulation of delay differential-algebraic
//! equations arising from coupling substructures through a delayed
//! interface.

pub mod cli;
pub mod ddae;
pub mod error;
pub mod forcing;
pub mod integrator;
mod linalg;
pub mod lti;
pub mod models;
pub mod mos;
pub mod pencil;

pub use ddae::{Classification, SfDdaeModel};
pub use error::{Error, Result};
pub use integrator::{IntegratorOptions, SegmentSolution};
pub use forcing::{ForcingFunction, HistoryFunction, Sinusoid};
pub use mos::{Status, Trajectory};
pub use lti::{LinearDdae, LtiDescriptor};
pub use pencil::{MatrixPencil, WeierstrassForm};
