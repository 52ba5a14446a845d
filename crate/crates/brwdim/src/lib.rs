//! Analytics and simulation for branching random walks on free products of
//! groups.
//!
//! The library computes, for a free product of finite (or ball-truncated
//! infinite) factor groups carrying a mixed nearest-neighbour step law:
//!
//! * per-factor first-visit generating functions and the fixed-point vector
//!   `xi_i(z)` of first-passage functions,
//! * the radius `R` of the Green function, which separates transient from
//!   recurrent branching random walks,
//! * the roots `z*` and `z*_S` whose logarithms give the Hausdorff and
//!   box-counting dimensions of the accumulation set and of the full end
//!   boundary,
//! * Perron-Frobenius dimension formulas for free products of finite groups
//!   under the block metric, and for amalgams over a common finite subgroup,
//! * two independent validation layers: truncated path series (a certified
//!   monotone lower bound) and a seeded Monte Carlo particle engine.
//!
//! The `brwdim` binary exposes the same operations behind a line-oriented
//! config format; see the repository README.

pub mod amalgam;
pub mod config;
pub mod error;
pub mod finite_dims;
pub mod group;
pub mod genfun;
pub mod oracle;
pub mod pf;
pub mod simulator;

pub use error::{AmalgamError, GenfunError, GroupError, OracleError, PfError, SimError};
pub use group::{FactorGroup, FactorKind, FreeProduct, SphereTail, Word};
