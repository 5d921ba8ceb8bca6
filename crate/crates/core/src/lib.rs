//! Gaussian fluctuation theory for a chain of parametrically driven Kerr
//! resonators whose only inter-site coupling is a staggered cross-Kerr
//! interaction.
//!
//! The pipeline runs bottom-up:
//!
//! * [`model`]: raw chain parameters, the dimensionless `g`, `mu`, `delta`
//!   and the semiclassical correlation length `tau`.
//! * [`semiclassical`]: broken-symmetry mean-field amplitudes for periodic and
//!   open chains (closed forms plus a Newton solver).
//! * [`gaussian`]: site-resolved coefficients of the quadratic Hamiltonian.
//! * [`bands`]: periodic-chain dispersion, Bogoliubov angles and the Zak winding.
//! * [`bdg`]: open-chain Bogoliubov-de Gennes spectra, mode classification and
//!   localization lengths.
//! * [`edge`]: effective models for edge-mode death and revival.
//! * [`fock`]: exact diagonalization of a single two-resonator cell and its
//!   Husimi function.
//! * [`output`] / [`cli`]: CSV/JSON serialization and the command-line runner.

pub mod bands;
pub mod bdg;
pub mod cli;
pub mod edge;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod model;
pub mod output;
pub mod semiclassical;

pub use error::{Error, Result};
pub use model::{Boundary, ChainConfig, DerivedParams, MaybeDefined, Regime};
