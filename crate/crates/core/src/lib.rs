//! Mode-matching solver for rectangular-waveguide junctions containing
//! full-height conducting cylindrical posts.
//!
//! The field continuity conditions at a zero-length junction are projected
//! onto local piecewise-linear (hat) test functions on the boundary
//! segments; the resulting overdetermined block system is solved by
//! least squares for the generalized scattering matrix over `M` TE_m0
//! modes. Junction matrices cascade with uniform guide sections into
//! multi-post filters, swept over frequency.
//!
//! Modules
//! - [`modes`]: waveguide geometry and TE_m0 modal parameters
//! - [`basis`]: hat functions, analytic sine-kernel integrals, post-wall
//!   quadrature
//! - [`junction`]: block-system assembly and least-squares solve
//! - [`network`]: Redheffer cascading and frequency sweeps
//! - [`validation`]: adaptive-quadrature and collocation oracles
//! - [`quadrature`]: fixed-order Gauss-Legendre rules

// Validation guards use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod junction;
pub mod modes;
pub mod network;
pub mod quadrature;
pub mod smatrix;
pub mod validation;

pub use error::{Error, Result};
pub use junction::{solve_junction, Discretization, JunctionSolution, PostJunction};
pub use modes::{ModeParams, Waveguide};
pub use network::{
    cascade, frequency_sweep, frequency_sweep_serial, solve_network, uniform_guide_smatrix,
    DiscPolicy, Network, NetworkElement, Numerics, PointOutcome, SweepPoint,
};
pub use num_complex::Complex64;
pub use smatrix::ScatteringMatrix;
