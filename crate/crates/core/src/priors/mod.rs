//! The ambiguity set: one-step density factors `f_t(θ)`, density processes
//! `D_t = ∏ f_s(θ_s)`, pasting at stopping times, and ellipsoidal parameter
//! regions with boundary discretizations.
//!
//! Only Dirac selections of θ are materialized. Worst-case expectations over
//! the rectangular hull reduce to a minimum over the parameter grid at each
//! step, so mixtures over θ never need to be formed.

pub mod density;
pub mod family;
pub mod region;

pub use density::{density_process, paste, DensityProcess, Selection};
pub use family::{normal_ratio, DensityFamily, TableFamily, Theta, TiltFamily};
pub use region::{
    check_boundary, interior_grid, maximize_on_boundary, sphere_directions, BoundaryGrid,
    BoundaryOptimum, ParamRegion,
};
