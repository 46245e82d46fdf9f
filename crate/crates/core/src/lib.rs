//! Open-loop steering of control-affine systems `x' = N_t(x) + B_t(x) u` by
//! Picard iteration of trajectory-dependent Gramian maps.
//!
//! ```no_run
//! use gramsynth::{make_benchmark, run_picard, BenchmarkParams, SynthesisConfig};
//!
//! let (_, problem) = make_benchmark("unicycle", &BenchmarkParams::default()).unwrap();
//! let outcome = run_picard(&problem, &SynthesisConfig::default()).unwrap();
//! println!("{:?} after {} passes", outcome.termination, outcome.records.len());
//! ```

pub mod control;
pub mod error;
pub mod flow_jac;
pub mod gramian;
pub mod harness;
pub mod ode;
pub mod picard;
pub mod systems;

pub use control::{ControlFunction, EvalStrategy, MapKind};
pub use error::{Error, Result};
pub use flow_jac::{solve_trajectory, Trajectory};
pub use gramian::{simpson_rule, solve_gramian, GramianKind, GramianMatrix};
pub use ode::{integrate, SolverConfig};
pub use picard::{run_picard, IterationRecord, PicardOutcome, SynthesisConfig, Termination};
pub use systems::{make_benchmark, Anchor, BenchmarkParams, ControlAffineSystem, SteeringProblem};
