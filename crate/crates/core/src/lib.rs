//! Desk-scale simulation of quantum computation with access to unitary
//! post-selection closed timelike curves, and the CTC-based SAT procedure
//! built on it.
//!
//! Layers, bottom up:
//!
//! * [`tensor`]: dense complex matrices, partial traces, predicates.
//! * [`circuit`]: gate lists and basis rules, compiled or traced column by
//!   column.
//! * [`pmf`]: Choi-Jamiolkowski maps, the indefinite operator, process
//!   matrix channels and the pure-generator predicates.
//! * [`ctc`]: the unitary CTC generator with adversarial behavior on
//!   invalid queries.
//! * [`cnf`], [`vv`]: formulas, brute-force oracles, isolation by random
//!   XOR constraints.
//! * [`solver`]: the single-query unique-SAT routine and the SAT decision
//!   loop.

pub mod circuit;
pub mod cnf;
pub mod ctc;
pub mod error;
pub mod pmf;
pub mod rng;
pub mod solver;
pub mod tensor;
pub mod vv;

pub use circuit::{parse_circuit, BasisRule, CircuitSpec, Gate, GateKind};
pub use cnf::{parse_dimacs, emit_dimacs, Assignment, CnfFormula, Completion};
pub use ctc::{AdversarialPolicy, CtcHandle, QuantumState, UnitaryCtcGenerator};
pub use error::{Error, Result};
pub use pmf::{ChannelForm, ChannelRep, PmgQuery, PmoPath, ProcessCheckReport};
pub use solver::{SatDecision, SatResult, SolverConfig, UsatOutcome};
pub use tensor::{ComplexMatrix, SubsystemDims, C64, DEFAULT_TOL};
pub use vv::{EncodingMode, HashConstraint};
