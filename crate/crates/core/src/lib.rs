//! Induction of an open primitive-action space from how-to tutorials.
//!
//! Each tutorial is turned into an agent program by a text-generation
//! backend. Programs are verified against a small indentation-sensitive
//! agent language, and every verified program feeds back into a growing
//! pool of APIs, use cases and full demonstrations that later prompts
//! retrieve from.
//!
//! Module map:
//!
//! - [`corpus`]: tutorial records, sampling and rendering
//! - [`worldmodel`]: world objects and the seed API registry
//! - [`agentlang`]: parser, verifier and extractors for agent programs
//! - [`pool`]: the monotonically growing API/demo store
//! - [`retrieval`]: embeddings and exact top-k retrieval
//! - [`promptgen`]: prompt assembly for the three pipeline variants
//! - [`genclient`]: generation backends, cassettes and rejection sampling
//! - [`induction`]: the sequential loop with checkpoint/resume
//! - [`analytics`]: pool curves, induction ratios, frequency and human-eval tables

pub mod agentlang;
pub mod analytics;
pub mod corpus;
pub mod digest;
pub mod genclient;
pub mod induction;
pub mod pool;
pub mod promptgen;
pub mod retrieval;
pub mod worldmodel;

#[cfg(test)]
mod testutil;

pub use agentlang::{parse, AgentProgram, ParseError};
pub use corpus::{InstructionStep, Tutorial};
pub use analytics::{human_eval_report, AnalyticsError, Report};
pub use genclient::{GenError, GenerationBackend, ReplayBackend, ScriptedBackend};
pub use induction::{InductionError, RunConfig, RunOutcome};
pub use pool::{InductionRecord, PoolError, PoolState};
pub use promptgen::PipelineVariant;
pub use retrieval::Embedder;
