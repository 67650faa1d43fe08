//! Meshes, quadrature, closed-form time moments, the implicit FEM solver
//! and true-error evaluation.

pub mod field;
pub mod mesh;
pub mod moments;
pub mod quadrature;
pub mod solver;
pub mod true_error;

pub use field::{Analytic, FluxFunction, SpaceTimeField, SpaceTimeFunction};
pub use mesh::{build_space_time_grid, Grid, SpatialMesh, TimeGrid};
pub use moments::{time_moments, TimeMoment};
pub use quadrature::{slab_integral, BasisAt, ElementTable, GaussRule, QuadPoint, SlabRule};
pub use solver::{solve_parabolic, solve_parabolic_with, Scheme};
pub use true_error::{true_error_components, ErrorComponents, ErrorOptions, SlabNorms, TrueError};
