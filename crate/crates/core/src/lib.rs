//! Proximity operators of perspective functions and the sparse-regression
//! machinery built on them.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: scalar root finders (Cardano, safeguarded Newton) and the
//!   small dense kernels shared by every operator.
//! * [`prox`]: the scaled-pair argument type, standard proximity operators and
//!   the Moreau / threshold identities used as correctness oracles.
//! * [`perspective`]: closed-form and root-finding proximity operators of
//!   perspective functions (radial, square-root, power, quadratic,
//!   distance-to-ball, cone, Huber, Vapnik, separable sums).
//! * [`solvers`]: Douglas-Rachford splitting, including the graph-constrained
//!   composite form.
//! * [`trex`]: TREX, generalized TREX and the concomitant (scaled) Lasso.
//! * [`experiments`]: synthetic linear models, support metrics and the
//!   scaling / phase-transition harnesses.
//! * [`oracle`] and [`selftest`]: brute-force Moreau minimization and the
//!   property suites that check every operator against it.

pub mod error;
pub mod experiments;
pub mod numerics;
pub mod oracle;
pub mod perspective;
pub mod prox;
pub mod selftest;
pub mod solvers;
pub mod trex;

pub use error::{Error, Result};
pub use numerics::{Matrix, Vector};
pub use prox::{ProxStep, ScaledPair};
