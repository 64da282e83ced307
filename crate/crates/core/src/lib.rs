//! Runtime for dataflow matrix machines: recurrent nets generalized to
//! streams of prefix-tree vectors with numerical leaves.
//!
//! The pieces:
//!
//! - [`vspace`] — the vector space itself: finite prefix trees with numeric
//!   leaves, linear combination, canonical pruned form, text serialization.
//! - [`samples`] — the extension where leaves also carry signed samples,
//!   with the stochastic rule for combining sample streams.
//! - [`activations`] — the built-in neuron types (accumulator addition,
//!   identity, leaky accumulator, multiplicative gating, elementwise
//!   nonlinearities, constants) and the name registry.
//! - [`engine`] — the two-stroke engine: a rank-6 sparse network matrix,
//!   down/up movements, and self-modification through a designated Self
//!   output.
//! - [`lightweight`] — the fixed-size variant where all streams carry
//!   rectangular matrices, plus the circular wave-pattern demo system.
//! - [`netfile`] — the JSON network-definition format and its loader.
//! - [`mod@reference`] — independent dense reference implementations used
//!   by demo verdicts and verification tests.

pub mod activations;
pub mod engine;
pub mod lightweight;
pub mod netfile;
pub mod reference;
pub mod samples;
pub mod vspace;

/// The engine's seeded random source. A fixed-algorithm generator keeps
/// traces reproducible across platforms and releases.
pub type EngineRng = rand_chacha::ChaCha8Rng;

pub use activations::{NeuronType, NeuronTypeRegistry};
pub use engine::{
    down_movement, up_movement, EngineError, EngineState, InputFeed, MatrixDepthError,
    NetworkMatrix, NeuronAddress, NeuronId, RunLog, SelfUpdate, StepOutcome, TraceRecord,
};
pub use netfile::{NetworkFile, NetworkFileError};
pub use samples::{SampleSlot, SampleVector, Sign, SignedSample};
pub use vspace::{PTVector, Path, Token, TokenError, DEFAULT_EPSILON};
