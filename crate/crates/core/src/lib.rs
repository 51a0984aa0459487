//! Semi-discrete optimal transport tessellations for the cost `d(x, y)^p / p`.
//!
//! The normalized volume measure of a planar polygon or of the unit sphere is
//! transported onto finitely many weighted Dirac sites. The optimal map sends a
//! point `z` to the site maximizing `Phi_i(z) = -d(x_i, z)^p / p + b_i`, so every
//! cell is an intersection of the "halfspaces" `{Phi_i > Phi_j}`.
//!
//! The crate is organized bottom-up:
//!
//! - [`domain`]: geodesic distance, interpolation and membership on polygons and S².
//! - [`potential`]: the potentials `Phi_i`, argmax assignment and halfspace tests.
//! - [`grid`]: quadrature grids for the normalized volume measure, with adjacency.
//! - [`solver`]: cell masses and gradient ascent on the discrete Kantorovich dual.
//! - [`bisector`]: the two-site level function `m(x, y, p)`, its implicit
//!   derivatives, level-curve tracing and the disconnected-cell witness domains.
//! - [`topology`]: component labeling and the convexity, starlikeness,
//!   connectedness and lemma checks run on computed tessellations.
//! - [`render`]: deterministic SVG output.
//!
//! Grid-wide evaluations run on rayon when the `parallel` feature is enabled
//! (the default); see [`par`].

pub mod bisector;
pub mod domain;
mod error;
pub mod grid;
pub mod par;
pub mod potential;
pub mod render;
pub mod solver;
pub mod topology;

pub use domain::{Domain, DomainKind, Point, Polygon};
pub use error::{Error, Result};
pub use grid::{build_polygon_grid, build_sphere_grid, Grid};
pub use potential::{assign, in_halfspace, phi, Assignment, CostExponent, CostTable, Site};
pub use solver::{cell_masses, dual_objective, solve_weights, SolveReport};
pub use topology::Tessellation;
