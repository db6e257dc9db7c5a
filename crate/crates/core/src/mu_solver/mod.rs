//! Multi-user alternating optimization: MMSE combining, FP+RCG phases,
//! cap-projected boresight steps and BB orientation steps.

pub mod ao;
pub mod combiner;
pub mod fp;
pub mod gradient;
pub mod projection;
pub mod rotation;

pub use ao::{ao_optimize, AoControls, AoInit, Scheme, SolveReport};
pub use combiner::{mmse_combiners, mrc_combiner, sinr_and_sum_rate, sum_rate};
pub use fp::{
    fp_auxiliary_update, fp_quadratic_build, fp_rcg_phase_update, fp_surrogate, fp_terms, FpAuxiliary, FpOutcome,
};
pub use gradient::{sum_rate_gradient, sum_rate_weights, GradientTarget};
pub use projection::{box_project, cap_project, dykstra_project, DykstraInfo, Halfspace};
pub use rotation::{
    boresight_update_sweep, orientation_bb_update, rotation_update, BbMemory, RotationBounds, RotationControls,
    RotationOutcome, RotationProblem,
};
