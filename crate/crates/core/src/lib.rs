//! Symbolic planning for factored Markov decision processes.
//!
//! Algebraic decision diagrams represent value functions, rewards and
//! conditional probability tables; sets of states are 0/1 diagrams.
//! On top of the diagram engine sit symbolic value iteration, symbolic
//! LAO*, RTDP, symbolic RTDP and an adaptive variant that learns the
//! transition model while acting.

pub mod adaptive;
pub mod diagram;
pub mod dp;
pub mod experiment;
pub mod fixtures;
pub mod generator;
pub mod model;
pub mod oracle;
pub mod planners;
pub mod reach;
pub mod sexpr;

pub use diagram::{BinaryOp, Diagram, DiagramError, Manager, Node, StateAssignment, VarId, VarSet};
pub use dp::{DpError, HeuristicMode, Policy, ValueFunction};
pub use model::{parse_model, serialize_model, validate_model, ActionSpec, FactoredMdp, ModelError};
pub use planners::{Generalization, PlannerError, TrialLog, TrialSchedule};
pub use reach::StateSet;
pub use experiment::{Algorithm, ExperimentConfig, ExperimentError, ModelSource};
pub use generator::generate_problem;
pub use oracle::oracle_value_iteration;
