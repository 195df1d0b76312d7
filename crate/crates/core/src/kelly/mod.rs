//! Optimal risky fractions: the crash-aware Kelly fraction (numerical and
//! approximate) and the classical GBM Kelly fraction.

mod approx;
mod classical;
mod interpolant;
mod objective;
mod quadrature;
mod solver;

pub use approx::{optimal_lambda_approx, optimal_lambda_leading_order, ApproxSolutionTerms};
pub use classical::{classical_kelly_lambda, DriftMode};
pub use interpolant::{
    build_lambda_interpolant, GridSpec, LambdaTable, TableNode, DEFAULT_SPACING,
};
pub use objective::Scenario;
pub use quadrature::{discretize_jump_distribution, GaussHermite, JumpMenu, NormalRule};
pub use solver::{
    expected_log_growth, golden_section_max, maximize_golden, maximize_stationary,
    optimal_lambda_numeric, EcoKelly, LambdaBounds, DEFAULT_GAUSS_NODES, DEFAULT_JUMP_NODES,
    DEFAULT_TOL, LAMBDA_CAP,
};
