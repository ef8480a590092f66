//! Locked-qubit dynamics: trajectories, ensembles and analytic averages.

pub mod coherent;
pub mod cumulant;
pub mod ensemble;
pub mod hamiltonian;
pub mod propagate;

pub use coherent::{
    coherent_evolution, coherent_validity_warning, combined_sigma_x, secular_sigma_x,
};
pub use cumulant::{
    analytic_decay_operator, cumulant_bloch, decay_generator, second_cumulant_integral,
    CumulantOptions, DecayOperator,
};
pub use ensemble::ensemble_average;
pub use hamiltonian::{
    liouville_superoperator, noise_frame_hamiltonian, pauli_x, pauli_y, pauli_z, VectorizedDensity,
};
pub use propagate::{
    propagate_trajectory, BlochRecord, DriveConfig, Frame, InitialState, PhaseInput, STRONG_PHASE,
};
