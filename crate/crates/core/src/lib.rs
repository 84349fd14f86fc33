//! Safe-RL toolkit for a simplified tissue-retraction task.
//!
//! The crate has two halves. The training half ([`environment`], [`trainer`])
//! learns discrete-action PPO policies whose reward carries a collision
//! penalty. The verification half ([`interval`], [`network`], [`property`],
//! [`verifier`]) proves or refutes "never pick an outward action near a
//! workspace face" properties on the exported policy networks and reports a
//! violation rate: the fraction of a property's input domain that is not
//! proved safe.

pub mod digest;
pub mod environment;
pub mod interval;
pub mod matrix;
pub mod network;
pub mod property;
pub mod trainer;
pub mod verifier;

pub use environment::{Action, EnvConfig, EnvState, Environment, Observation, StepInfo};
pub use interval::{affine_bounds, moore_compare, propagate, relu_bounds, Comparison, Interval, IntervalBox};
pub use matrix::Matrix;
pub use network::{Activation, Layer, Network, NetworkMetadata};
pub use property::{Condition, Normalization, PropertySuite, SafetyProperty};
pub use trainer::{ActorCritic, SafetyMode, TrainConfig};
pub use verifier::{Verdict, VerificationReport, VerifyConfig};
