//! Small-cell site selection and macro upgrade planning.

pub mod error;
pub mod evaluation;
pub mod instance;
pub mod oracle;
pub mod relaxation;
pub mod solver;
pub mod tabu;

pub use error::{Error, Result};
pub use evaluation::{Assignment, Deployment};
pub use instance::{FacilityRef, ProblemInstance};
pub use oracle::{enumerate_optimum, OracleLimits, OracleResult};
pub use solver::{solve, SolveResult, SolverParams, TerminationReason};
