//! Truncated Fock-space simulator for a harmonically driven cavity mode.
//!
//! The crate is organised around one physical setup: a single cavity mode
//! prepared in thermal equilibrium, pushed out of equilibrium by a linear
//! drive, and interrogated either interferometrically (a dispersive probe
//! atom in a Ramsey sequence) or energetically (two projective energy
//! measurements around the drive). The modules are
//!
//! * [`fock`]: dense operators on the truncated number basis, the
//!   displacement operator, and state validation with tail diagnostics,
//! * [`states`]: thermal and displaced thermal states, partition
//!   functions and free-energy differences,
//! * [`ramsey`]: dispersive atom-field evolution and fringe visibilities,
//! * [`work`]: protocol propagators, transition probabilities, work
//!   distributions and their exponential averages,
//! * [`estimator`]: inversion of visibility pairs into free-energy
//!   estimates, tying the two measurement pictures together.

use blas_src as _;

pub mod error;
pub mod estimator;
pub mod fock;
pub mod linalg;
pub mod ramsey;
pub mod states;
pub mod work;

pub use error::{Error, Result};
