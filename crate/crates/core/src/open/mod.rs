//! Transport under pure site dephasing.

pub mod hsr;
pub mod hsr_dimer;
pub mod kappa;
pub mod secular;

pub use hsr::{
    diffusivity_from_rho, lindblad_propagate, open_moments, site_projector, superoperator_propagate, DensityMatrixTrace, HsrParams,
};
pub use hsr_dimer::{hsr_dimer_asymptotic, hsr_dimer_exact_grid, HsrDimerAsymptotic};
pub use kappa::{eigenbasis_propagate, kappa_tensor, KappaTensor};
pub use secular::{secular_moments, secular_propagate, SecularModel};
