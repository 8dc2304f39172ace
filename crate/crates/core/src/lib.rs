//! Numerical workbench for quantum query lower bounds.
//!
//! The crate builds the finite-dimensional operators that appear in
//! compressed-oracle and multiplicative-adversary arguments, checks the
//! algebraic identities those arguments rely on, and evaluates the resulting
//! query bounds on small concrete instances.
//!
//! Organization:
//!
//! * [`linalg`] — dense complex matrices, Hermitian eigendecomposition,
//!   spectral norms, subspace constructions. Everything downstream sits on
//!   this kernel.
//! * [`oracle`] — function/database index spaces, quantum Fourier transforms,
//!   phase oracles, and a small algorithm simulator.
//! * [`compressed`] — the compressed (database) encoding of the uniform
//!   oracle, database projectors, and the sandwiched operators used in
//!   progress arguments.
//! * [`ladder`] — multiplicative adversary matrices assembled from graded
//!   eigenspace ladders, their validation, and per-query step bounds.
//! * [`reductions`] — the search-to-decision style reductions: property
//!   adversaries from database predicates, tensor-power lifts, and the
//!   scalar strong-direct-product checks.
//! * [`poly`] — exact approximate-degree computation by linear programming
//!   and the parity ladder that converts degree into an adversary bound.
//! * [`perm`] — permutation-inversion chains and their truncated projector
//!   ladders.
//! * [`report`] — serializable result records shared with the CLI.
//! * [`suites`] — named verification suites the CLI exposes.

pub mod compressed;
pub mod error;
pub mod ladder;
pub mod linalg;
pub mod oracle;
pub mod perm;
pub mod poly;
pub mod reductions;
pub mod report;
pub mod suites;

pub use error::{Error, Result};
