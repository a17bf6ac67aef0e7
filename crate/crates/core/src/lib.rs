//! Desk-scale laboratory for decision-theoretic probability in branching-worlds
//! quantum mechanics.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: state vectors, observables, quantum games and measurement
//!   realizations (direct and ancilla-coupled).
//! - [`branching`]: weighted branch trees with fine-grained cells, basis
//!   rotations and coarse-graining.
//! - [`decision`]: finite Savage-style acts, preferences, expected utility,
//!   axiom checks and representation extraction.
//! - [`strategy`]: caring measures over branch trees and game valuation.
//! - [`verifier`]: staged checks of the Born-rule derivation and the
//!   branch-counting incoherence demo.
//! - [`confirmation`]: conditionalization, the diachronic Dutch book and
//!   branching confirmation experiments.
//! - [`emit`]: deterministic JSON / CSV / table output.

pub mod branching;
pub mod confirmation;
pub mod decision;
pub mod emit;
pub mod exact;
pub mod quantum;
pub mod strategy;
pub mod verifier;

pub use branching::{BranchLeaf, BranchTree, CellPair, RotationConfig};
pub use decision::{Act, PreferenceRelation, Representation, Setup, SetupKind};
pub use quantum::{
    Amplitude, Consequence, Eigenvalue, MeasurementRealization, Observable, PayoffFunction,
    PureState, QuantumGame,
};
pub use strategy::{CaringMeasure, Strategy};
pub use verifier::{Stage, StageReport, Verdict};
