//! Lagrangian simulation of incompressible elastodynamics on a periodic
//! slab, through the kappa-regularized approximate system.

pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod grid;
pub mod initial_data;
pub mod mollifier;
pub mod random;
pub mod slab;
pub mod stencil;

pub use error::{AprioriStatus, Error, Result};
pub use evolution::{KappaSystem, RunOptions, SimState, Trajectory};
pub use geometry::{FlowMap, InitialDeformation};
pub use grid::{BoundaryScalarField, BoundaryVectorField, Face, Grid, MatrixField, ScalarField, VectorField};
pub use initial_data::{BoundaryPartition, G0Recipe, InitialData, Regime};
pub use mollifier::MollifierKernel;
pub use slab::Slab;
