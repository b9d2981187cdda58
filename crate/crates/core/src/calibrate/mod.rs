//! Calibrators: histogram binning, linear scaling, group-conditional
//! regression and the iterative grouped binning methods.

mod histogram;
mod iterative;
mod optim;
mod predict;
mod regression;
mod scaling;

pub use histogram::fit_hb;
pub use iterative::{
    fit_ighb, fit_iglb, select_worst_bin, FitConfig, FitTrace, RoundRecord, StopReason, MIN_LOGIT_LINEAR_ROWS,
    MSE_DECREASE_TOL,
};
pub use predict::predict;
pub use regression::{fit_gcur, fit_gculr, max_group_residual, RegressionFit};
pub use scaling::{fit_ls, fit_ls_params, ScalingFit};
