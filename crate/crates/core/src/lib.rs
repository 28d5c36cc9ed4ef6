//! Forward and inverse helioseismic scattering for a spherically symmetric
//! Sun with a Coulomb-type atmosphere.
//!
//! The pipeline runs from a background model through the radial
//! Schrödinger problem to Green's-function diagonals, power-spectrum
//! observations, recovered scattering coefficients and finally a
//! regularised Gauss–Newton reconstruction of sound speed, density and
//! attenuation.

pub mod error;
pub mod invert;
pub mod multipole;
pub mod observe;
pub mod radial;
pub mod recover;
pub mod solar_model;
pub mod specfun;
pub mod spline;
pub mod table;

pub use error::{Error, Result};
