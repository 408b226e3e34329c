//! Radial theory of the p-Laplace Hénon equation `-Δ_p u = |x|^α u^q`:
//! regular, singular and exterior radial solutions, singularity
//! classification, phase-plane stability, Pohozaev and energy identities,
//! and a monotone iteration on annuli.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bvp;
pub mod classify;
pub mod cli;
pub mod error;
pub mod global;
pub mod io;
pub mod numeric;
pub mod ode;
pub mod params;
pub mod phase;
pub mod radial;
pub mod transforms;

pub use error::{HenonError, Result};
pub use params::{ExponentSet, ProblemParams, Regime};
pub use radial::{RadialSolution, ShootResult, Terminal, ToleranceConfig};
