//! Dense statevector simulation over a system, clock and ancilla register.

pub mod evolution;
pub mod pauli;
pub mod state;

pub use evolution::{exact_evolution, gershgorin_upper, trotter_evolution, EvolutionOperator, Provenance, TrotterSplit};
pub use pauli::{pauli_decompose, PauliTerm};
pub use state::{prepare_b_state, system_qubits, Postselected, Readout, RegisterLayout, RotationMode, StateVector};
