//! Exact computations with toric vector bundles.
//!
//! A toric vector bundle on a complete toric variety is encoded by its
//! Klyachko data: one decreasing Z-filtration of the fiber E per ray of
//! the fan, compatible on every maximal cone. This library stores that
//! data exactly (rational arithmetic throughout) and implements the
//! classifications and invariants built on top of it:
//!
//! * conversion between filtrations, piecewise linear maps into the
//!   space of vector-space valuations, and valuations with values in the
//!   semifield of integral piecewise linear functions;
//! * positivity decisions (nef, ample, globally generated) through
//!   wall-crossing degrees and per-cone polytope certificates;
//! * the Klyachko subspace arrangement, its representable matroid, the
//!   parliament of polytopes, and weight-space dimensions of global
//!   sections;
//! * tropical points of linear ideals over the piecewise linear
//!   semifield: membership, reconstruction of the bundle from a tuple,
//!   and the diagram matrix.

pub mod error;
pub mod examples;
pub mod fan;
pub mod klyachko;
pub mod lattice;
pub mod linalg;

pub mod parliament;
pub mod plfunc;
pub mod positivity;

pub mod rat;
pub mod tropical;


pub use error::{Error, Result};
pub use fan::{Cone, Fan};


pub use rat::Rat;
