//! Gain patterns, scenario sampling, channel constructors and derivatives.

mod derivative;
mod gain;
mod model;
mod scenario;

pub use derivative::{channel_derivative_boresight, channel_derivative_orientation, pair_distance_partial};
pub use gain::{element_gain, element_gain_sqrt_derivative_factor, GainPattern, DELTA_BOUNDARY};
pub(crate) use model::compose_unchecked;
pub use model::{
    check_visibility, composite_channel, irs_bs_channel, irs_bs_channel_farfield, user_bs_channel, user_irs_channel,
    CMatrix, CVector, ChannelSet, FarFieldFactors, IrsBsLink, UNIT_MODULUS_TOL,
};
pub use scenario::{sample_scenario, PathComponent, Scenario, UserLinks, SCATTERER_MAX_DRAWS};
