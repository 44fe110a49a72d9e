//! Deterministic qubit detector: a spin-1/2 coupled to a quantum kicked rotator.
//!
//! The crate is organised bottom-up:
//!
//! * [`qstate`] holds the parameter set, state vectors, the qubit density
//!   matrix / Bloch vector pair and a dense one-kick unitary used as a test
//!   oracle.
//! * [`detector`] evolves the uncoupled rotator (Gaussian packets, kicks,
//!   free propagation) and the classical standard map with its Lyapunov
//!   exponent.
//! * [`coupled`] runs the full qubit ⊗ rotator Floquet map and extracts the
//!   reduced density matrix, ⟨p²⟩, Husimi distributions, box integrals and
//!   the fidelity amplitude.
//! * [`channel`] is the analytic phase-damping map the detector converges to,
//!   together with its continuous-time closed form.
//! * [`analysis`] extracts Γ₁, Γ₂ and residual coherence from trajectories and
//!   runs parameter sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod coupled;
pub mod detector;
mod error;
pub mod qstate;

pub use error::{Error, Result};
pub use num_complex::Complex64;
