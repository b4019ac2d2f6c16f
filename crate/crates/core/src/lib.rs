//! Exact-arithmetic kernels for chamber geometry on reductive symmetric spaces.
//!
//! The crate is organized around one pipeline:
//!
//! * [`rootdata`] — based root data with a materialized Weyl group, facet
//!   combinatorics, involutions of the cocharacter lattice, and the
//!   components-group quotient Λ (cocharacters modulo the coroot lattice).
//! * [`orthoset`] — orthogonal families of chamber points, their convex hulls
//!   restricted to a Λ-class, and the split-form refinement obtained by
//!   folding chamber-ray coordinates under an involution.
//! * [`padic`] — fixed-precision p-adic scalars and matrices, the
//!   elementary-divisor (Cartan) invariant, triangular (Iwasawa) retractions,
//!   the twisted-involution map g ↦ θ(g)⁻¹g, and membership oracles for its
//!   image inside a maximal torus.
//! * [`latcount`] — lattice-point counts of hull slices over declared
//!   sublattices and cosets, with polynomiality checks along dilation
//!   families.
//! * [`trunc`] — truncation weight factors built from the modules above:
//!   indicator weights, torus-summed weights, their asymptotic forms, fitted
//!   counting polynomials, and the vanishing-difference limit check.
//! * [`finfield`] — desk-scale verification of the Weyl-integration fibration
//!   and of a modified Plancherel identity for 2×2 trace-form Lie algebras
//!   over ℤ/p^k.
//!
//! Everything is rational or integral: no floating point enters a verdict.
//! Floating point appears only in reports, as a display projection of exact
//! quantities.

pub mod exact;
pub mod finfield;
pub mod latcount;
pub mod orthoset;
pub mod padic;
pub mod rootdata;
pub mod trunc;

pub use exact::Rat;
