//! Sum secrecy rate maximization for V2V pairs that reuse cellular resource
//! blocks in the presence of a multi-antenna eavesdropper.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod channel;
pub mod cli;
pub mod error;
pub mod fista;
pub mod gradient;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod phy;
pub mod scalar;
pub mod sca;
pub mod scenario;
pub mod trace;

pub use error::{Error, Result};
pub use grid::Grid;
pub use scalar::Scalar;
pub use scenario::{build_topology, InterferenceTopology, ScenarioConfig};
pub use trace::{SolveStatus, SolveTrace};

pub type Channels = channel::ChannelRealization<f64>;
pub type Power = phy::PowerAllocation<f64>;
pub type Combiner = phy::EveCombiner<f64>;
pub type Problem = phy::SecrecyProblem<f64>;
pub type Gradient = gradient::GradientVector<f64>;
pub type FistaSettings = fista::FistaSettings<f64>;
pub type ScaSettings = sca::ScaSettings<f64>;

pub type Channels32 = channel::ChannelRealization<f32>;
pub type Power32 = phy::PowerAllocation<f32>;
pub type Problem32 = phy::SecrecyProblem<f32>;
