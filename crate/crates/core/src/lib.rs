//! Simulation of optimal quantum cloning of photonic qudits by bosonic
//! symmetrization.
//!
//! An input photon carrying an unknown `d`-level state meets an ancilla photon
//! in the maximally mixed state on a balanced beam splitter. Keeping only the
//! events where both photons leave through the same output port projects the
//! pair onto the symmetric subspace, and each output photon is then an optimal
//! clone of the input.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`]: pure states, density matrices and the polarization ⊗ OAM
//!   bases used for `d = 4` ququarts.
//! * [`bosonic`]: a sparse second-quantized engine (Fock states, beam
//!   splitters, post-selection, one-photon reduced states) together with the
//!   distinguishability model behind the Hong-Ou-Mandel peak.
//! * [`cloning`]: closed-form optimal fidelities, the symmetrization channel
//!   evaluated exactly on the Fock engine, and the cascaded `N → M` cloner.
//! * [`experiment`]: a seeded Monte Carlo replica of the coincidence-counting
//!   measurement, including imperfect ancilla randomization and
//!   preparation/analysis errors.

pub mod bosonic;
pub mod cloning;
pub mod error;
pub mod experiment;
pub mod hilbert;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
