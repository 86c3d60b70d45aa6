//! Loudspeaker rendering of the decoded downmix.

pub mod covariance;
pub mod efap;
pub mod layout;
pub mod renderer;

pub use covariance::{
    achieved_covariance, covariance_synthesis, synthesize, TargetFactor, EIGEN_FLOOR, MAX_MIXING_GAIN,
};
pub use efap::{DirectResponses, EfapPanner};
pub use layout::{LayoutName, PrototypeMatrix, Speaker, SpeakerLayout};
pub use renderer::{apply_matrix, input_covariance, Renderer};
