//! Discrete-network energies of periodic sphere packings.
//!
//! A periodic configuration of equal balls on a torus induces a neighbour
//! graph through its Voronoi tessellation. Putting a gap-singular flux
//! coefficient on every edge turns transport through the packed structure
//! into a finite network problem: the minimal network energy approximates
//! the effective conductivity, and minimising it over ball centers inside
//! a fixed graph class recovers optimal packings as the solution of one
//! linear system per coordinate.
//!
//! Modules follow that pipeline: [`torus`] (cell geometry), [`graph`]
//! (periodic Voronoi/Delaunay), [`flux`] (edge coefficients), [`energy`]
//! (network energy and its minimisers), [`optimizer`] (center placement
//! in a graph class), [`analysis`] (lower bounds and percolation),
//! [`lattices`] (reference structures), [`cli`] (the `densepack` binary).

pub mod analysis;
pub mod cli;
pub mod energy;
pub mod flux;
pub mod formats;
pub mod graph;
pub mod lattices;
pub mod optimizer;
pub mod torus;

mod error;
mod linalg;
pub mod par;
mod polytope;
mod quadrature;
mod special;

pub use error::{Error, Result};
