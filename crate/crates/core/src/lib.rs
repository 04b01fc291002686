//! Training-free confidence calibration for generative question answering.
//!
//! The pipeline has two stages. Stage 1 runs an ensemble of expert agents
//! (chain-of-thought, program-of-thoughts, search-augmented self-ask and
//! generate-then-read), each voting for an answer with a raw confidence, and
//! clusters the votes into semantically unique stances. Stage 2 hands those
//! stances to general deliberator agents that argue, rate each other's
//! arguments, check premises against a search hook, re-vote and state a
//! posterior confidence. The final answer is the majority of the re-votes and
//! its confidence is the mean posterior confidence of its supporters.
//!
//! Backends are pluggable: a chat-completion HTTP client for live models and a
//! seeded simulator whose every response is a pure function of the call
//! identity, which makes whole runs reproducible under any thread count.

pub mod backend;
pub mod config;
pub mod confidence;
pub mod dataset;
pub mod deliberation;
pub mod ensemble;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod report;
pub mod runtime;
pub mod search;
pub mod seed;
pub mod text;
pub mod transcript;

pub use backend::{
    Backbone, BackendError, CallKind, CallTag, CompletionRequest, CompletionResponse, Message,
    Provider, ProviderHandle, Role,
};
pub use config::RunConfig;
pub use dataset::{DatasetRecord, Question, ReferenceAnswerSet, Split};
pub use pipeline::{run_pipeline, RunOutput};
pub use runtime::Runtime;
