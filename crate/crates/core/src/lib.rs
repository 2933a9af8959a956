//! Numerical toolkit for blow-up profiles of `u_t = u_xx + μ|u_x|^q + |u|^{p-1}u`
//! with the critical gradient exponent `q = 2p/(p+1)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod experiment;
pub mod field;
pub mod fit;
pub mod mode_ode;
pub mod pde;
pub mod quadrature;
pub mod shooting;
pub mod similarity;
pub mod spectral;

pub use constants::{classical_profile_f0, Params, ProfileConstants, ProfileSlice, VhjMap};
pub use error::{Error, Result};
pub use field::Field;
pub use quadrature::{AbsPowerRule, QuadratureRule};
pub use spectral::{apply_l, hermite_eval, inner_product_rho, project_modes, weight_rho, HermiteBasis};
pub use shooting::{ExitMap, Rect, ShootState};
