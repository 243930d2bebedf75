#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Hausdorff operators on two-weighted Herz-type Hardy spaces.
//!
//! The crate evaluates the one-dimensional, rough and matrix Hausdorff
//! operators by quadrature, computes two-weighted Herz norms over dyadic
//! annuli, constructs and validates central atoms, evaluates the explicit
//! per-octave bound constants, and checks boundedness numerically by
//! decomposing the image of an atom into certified atoms or dyadic units.

pub mod atoms;
pub mod bounds;
pub mod decompose;
pub mod error;
pub mod function;
pub mod harness;
pub mod hausdorff;
pub mod herz;
pub mod quadrature;
pub mod weights;

pub use atoms::{Atom, AtomSpec, DyadicUnit, Shape, Tolerances, ValidationReport};
pub use error::{Error, Result};
pub use function::SampledFunction;
pub use hausdorff::{MatrixField, RadialKernel, SmallMatrix, SphereSymbol};
pub use herz::{HerzParams, Region};
pub use quadrature::{Estimate, Grid, GridSettings, RadialGrid, RuleKind, SphereGrid};
pub use weights::{Ball, Weight};
