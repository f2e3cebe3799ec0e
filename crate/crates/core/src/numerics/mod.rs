//! Quadrature and special functions used by the analytic engines.

mod gamma;
mod quad;

pub use gamma::upper_incomplete_gamma;
pub use quad::{
    integrate_1d, integrate_semi_infinite, integrate_semi_infinite_scaled,
    integrate_with_breakpoints, QuadResult, QuadSpec,
};
