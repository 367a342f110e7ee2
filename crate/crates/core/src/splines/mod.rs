//! B-spline bases, roughness penalties, penalized least-squares smoothing
//! with per-subject GCV, and discretization of fitted curves onto a grid.

mod basis;
mod fit;

pub use basis::{make_knots, make_knots_with_order, BasisSpec, KnotStrategy};
pub use fit::{
    discretize_curves, fit_penalized, gcv_select_lambda, smooth_matrix, trapezoid_weights,
    CurveGrid, PenalizedSmoother, SmoothCurve, GCV_LAMBDA_MAX, GCV_LAMBDA_MIN,
};
