//! Quantization and spectrum engine for superconducting Josephson circuits.
//!
//! The pipeline runs netlist-in, spectrum-out:
//!
//! 1. [`netlist`] — parse and validate a lumped-element circuit description.
//! 2. [`topology`] — superconducting spanning forest, islands, branch matrix.
//! 3. [`modes`] — node matrices and the canonical transform that splits the
//!    circuit into oscillator, island, and Josephson modes.
//! 4. [`operators`] — truncated single-mode operator matrices.
//! 5. [`hamiltonian`] — term compilation and sparse assembly.
//! 6. [`solver`] — lowest eigenpairs, truncation convergence.
//! 7. [`hierarchy`] — partitioned subsystem diagonalization.
//! 8. [`perturbation`] — second-order corrections for discarded subsystem levels.

pub mod hamiltonian;
pub mod hierarchy;
pub mod linalg;
pub mod modes;
pub mod netlist;
pub mod operators;
pub mod perturbation;
pub mod pipeline;
pub mod solver;
pub mod sparse;
pub mod topology;
pub mod units;
