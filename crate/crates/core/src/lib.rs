//! Multiparameter dyadic martingale calculus on finite product grids: Haar
//! decompositions, square functions, H¹ and BMO norms, the strong maximal
//! function and A₁-weight cutoffs, and numerical checks of the inequalities
//! behind weak-star convergence in product H¹.

pub mod aligned;
pub mod cli;
pub mod error;
pub mod generate;
pub mod grid;
pub mod io;
pub mod martingale;
pub mod maximal;
pub mod norms;
pub mod sum;
pub mod verify;

pub use error::{Error, Result};
