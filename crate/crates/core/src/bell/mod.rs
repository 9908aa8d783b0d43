//! Linear Bell functionals and their classical, no-signaling, and quantum
//! (seesaw lower) bounds.

pub mod behavior;
pub mod classical;
pub mod functional;
pub mod nosignaling;
pub mod quantum;
pub mod scenario;
pub mod seesaw;
pub mod simplex;

pub use behavior::Behavior;
pub use classical::{classical_bound, DeterministicStrategy};
pub use functional::{chsh, BellFunctional, CorrelatorFunctional, FunctionalDoc};
pub use nosignaling::no_signaling_bound;
pub use quantum::{bell_operator, quantum_behavior, Measurement, QuantumStrategy};
pub use scenario::Scenario;
pub use seesaw::{seesaw, SeesawOptions, SeesawResult};
