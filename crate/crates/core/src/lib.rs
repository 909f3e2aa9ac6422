//! Formalize, audit, benchmark and simulate discrete decision problems used
//! in human-subjects decision experiments.
//!
//! - [`problem`]: states, actions, signals, the joint information structure,
//!   scoring rules, validation.
//! - [`normative`]: optimal actions, properization, rational benchmark and
//!   baseline, value of information, axiom checks.
//! - [`behavioral`]: trial data ingestion, behavioral and calibrated scores,
//!   normalized loss decomposition.
//! - [`audit`]: well-definedness verdicts, loss-source ledger, multiplicity
//!   of data-generating models, disclosure screens.
//! - [`simulation`]: lossy agents, exact metrics, sampling, learning agents,
//!   design sweeps.

pub mod audit;
pub mod behavioral;
pub mod error;
pub mod grid;
pub mod normative;
pub mod polytope;
pub mod problem;
pub mod seeding;
pub mod simulation;

pub use error::ProblemError;
pub use grid::BeliefGrid;
pub use problem::{Belief, DecisionProblem, InformationStructure, ProblemSpec, RuleChoice, ScoreTable, ScoringRule};
