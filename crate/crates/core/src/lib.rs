//! Controller and simulator for a tilt-rotor tail-sitter VTOL aircraft.
//!
//! Build order follows the data flow: [`geom3`] and [`airframe`] feed
//! [`dynamics`]; the controller chain is [`airvel`] → [`guidance`] →
//! [`frame`] → [`attitude`] → [`allocation`]; [`sim`] closes the loop and
//! [`stability`] checks the attitude law in isolation.

pub mod airframe;
pub mod airvel;
pub mod allocation;
pub mod attitude;
pub mod dynamics;
pub mod frame;
pub mod geom3;
pub mod guidance;
pub mod sim;
pub mod stability;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Geom(#[from] geom3::GeomError),
    #[error(transparent)]
    Params(#[from] airframe::ParamError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Estimator(#[from] airvel::EstimatorError),
    #[error(transparent)]
    Guidance(#[from] guidance::GuidanceError),
    #[error(transparent)]
    Frame(#[from] frame::FrameError),
    #[error(transparent)]
    Attitude(#[from] attitude::AttitudeError),
    #[error(transparent)]
    Alloc(#[from] allocation::AllocError),
    #[error(transparent)]
    Stability(#[from] stability::StabilityError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
}
