//! Two-period Gaussian chain-ladder example: estimator clouds and ellipsoidal
//! parameter regions, the closed-form time-1 layer, Monte Carlo at the root,
//! bounds for constant priors (Case 1) and the value under the rectangular
//! closure (Case 2).

pub mod cases;
pub mod closed_form;
pub mod model;
pub mod table;

pub use cases::{
    case1_bounds, case1_upper, case2_upper, case2_value, value_single_prior, Case, Case1Result,
    Case2Result, CaseConfig, McDraws, RootLayer,
};
pub use closed_form::{
    closed_form_g, expected_positive_part, fit_h, r1_closed_form, PiecewiseLinear,
};
pub use model::{
    estimator_cloud, fit_params, simulate_triangle, ChainLadderFamily, Estimates, EstimatorCloud,
    GaussianModel, Triangle,
};
pub use table::{
    cloud_region, coverage, figure1_data, table1, Figure1, Table1, TableRow, FIGURE_P, TABLE_P,
    TABLE_Q,
};
