//! Special functions: Coulomb wave functions and phases, Legendre
//! polynomials and Gauss–Legendre quadrature.

mod coulomb;
mod gamma;
mod legendre;

pub use coulomb::{
    coulomb_fg, coulomb_h, coulomb_h_capped, coulomb_h_range, coulomb_phase, coulomb_theta,
    vartheta_principal, CoulombPair, CoulombPhase, PhaseTracker, DEFAULT_ELL_CAP,
};
pub use gamma::{coulomb_sigma, coulomb_sigma_continuous, ln_gamma, reduce_angle};
pub use legendre::{gauss_legendre, legendre_all, legendre_into, legendre_p};
