//! Scenario-based numerics for a one-dimensional forward-backward system
//! driven by an uncertain-volatility noise source.
//!
//! The library is organized around three layers:
//!
//! * sampling: worst-case expectations over volatility scenarios ([`gcore`]),
//!   piecewise-constant scenario controls and coupled noise paths ([`paths`]),
//!   coefficient sets ([`coeffs`]) and convex penalties with proximal maps
//!   ([`convex`]);
//! * solvers: the small-noise forward scheme ([`forward`]), the deterministic
//!   limit backward inclusion ([`limitbw`]) and the variational-inequality
//!   field with path reconstruction ([`vi`]);
//! * asymptotics: action functionals and rate evaluation ([`ratefn`]) plus
//!   empirical rare-event curves ([`ldp`]).
//!
//! All stochastic routines are deterministic functions of `(seed, path_index)`
//! so batches can be generated in parallel in any order and still reproduce
//! bit-identical results.

// Stepping loops index several arrays by the same cell counter, and negated
// comparisons are deliberate wherever a NaN must count as a violation.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod convex;
pub mod error;
pub mod forward;
pub mod gcore;
pub mod ldp;
pub mod limitbw;
pub mod paths;
pub mod ratefn;
pub mod rng;
pub mod vi;

pub use error::{Error, Result};
