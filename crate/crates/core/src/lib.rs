//! P1 finite elements for the biharmonic problem with Navier boundary
//! conditions on polygons, using a mixed formulation with a singular-function
//! correction at a reentrant corner.

pub mod analysis;
pub mod assembly;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod multigrid;
pub mod quadrature;
pub mod singular;
pub mod solver;
