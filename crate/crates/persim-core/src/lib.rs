//! Simulation primitives for differentially private personalized learning.
//!
//! The crate is organized around four concerns:
//!
//! - [`privacy`]: zCDP and approximate-DP budgets, the conversion between
//!   them, the Gaussian mechanism, and an analytic Rényi-divergence witness
//!   for mechanism privacy claims.
//! - [`tasks`]: the two synthetic problem families — indexed mean estimation
//!   and indexed classification over product distributions on the hypercube
//!   `{±1}^d` — plus the hard-instance samplers used by the attacks.
//! - [`learners`]: the algorithm matrix {nonprivate, 1-out-of-t, joint-DP,
//!   billboard} for those problems, the billboard→metalearning reduction,
//!   the classification↔sign-estimation reductions, and the loss functionals.
//! - [`attacks`]: exact fingerprinting-lemma oracles (enumeration plus
//!   Gauss–Legendre quadrature) and the tracing statistics behind the
//!   membership-inference experiments that separate the frameworks.
//!
//! All randomized operations take explicit RNG state; [`rng`] provides
//! seeded, splittable streams so parallel Monte Carlo trials reproduce
//! bit-identically regardless of scheduling.

pub mod attacks;
pub mod learners;
pub mod privacy;
pub mod rng;
pub mod tasks;
