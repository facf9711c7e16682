//! Exact computer algebra for characteristic classes of vector bundles and the
//! orientation → Spin → String → Fivebrane lifting ladder.
//!
//! The crate is organized bottom-up:
//!
//! - [`graded_ring`]: truncated polynomial rings over ℚ in named even-degree generators.
//! - [`char_calc`]: Chern characters, Pontrjagin classes, Whitney sums, Spin classes.
//! - [`abelian`] and [`bundle_model`]: finitely generated cohomology groups with torsion,
//!   integral classes, bundles and the divisibility questions behind fractional classes.
//! - [`obstruction`]: anomaly polynomials and the structure ladder.
//! - [`cover_cohomology`]: rational cohomology of Whitehead-tower stages of `BU` and `BSO`.
//! - [`cs_forms`]: matrix-valued polynomial differential forms, curvature and
//!   Chern–Simons transgressions.
//!
//! Everything is exact: coefficients are arbitrary-precision rationals throughout.

pub mod abelian;
pub mod bundle_model;
pub mod char_calc;
pub mod cover_cohomology;
pub mod cs_forms;
pub mod expr;
pub mod graded_ring;
pub mod obstruction;
pub mod par;
pub mod rational;
pub mod sample;

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
