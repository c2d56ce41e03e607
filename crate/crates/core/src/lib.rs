//! Counting abelian extensions of ℚ ordered by height functions, with
//! restricted ramification type.
//!
//! The library has three layers:
//!
//! * exact arithmetic: finite abelian groups with the unit-exponentiation
//!   Galois action ([`group`]), local character spaces at each place of ℚ
//!   ([`local`]), cyclotomic numbers ([`cyclotomic`]);
//! * exact enumeration: global homomorphisms Γ_ℚ → G realised as finitely
//!   supported families of local unit characters, streamed in height order
//!   with exact pruning ([`global`]), plus obstruction and witness searches
//!   ([`obstruction`]);
//! * numerics: Dirichlet L-values at s = 1 ([`dirichlet`]), rigorous
//!   conditionally convergent Euler products ([`euler`]), frobenian means,
//!   twist sets and the leading-constant routes ([`analytic`]).
//!
//! Configuration, report emission and the result cache live in [`config`],
//! [`report`] and [`cache`].

pub mod analytic;
pub mod cache;
pub mod config;
pub mod cyclotomic;
pub mod dirichlet;
pub mod euler;
pub mod examples;
pub mod global;
pub mod group;
pub mod heights;
pub mod local;
pub mod obstruction;
pub mod primes;
pub mod report;
pub mod util;

pub use num::rational::BigRational;
pub use num::BigInt;
