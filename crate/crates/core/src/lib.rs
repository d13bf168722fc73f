//! Data pipeline and evaluation toolkit for distilling open-domain named
//! entity recognition into instruction-tuned models.
//!
//! The stages, in pipeline order:
//!
//! * [`sampler`]: chunk a corpus into bounded passages and sample them.
//! * [`gateway`]: ask a chat model to annotate each passage with
//!   `(mention, type)` tuples, quarantining malformed answers.
//! * [`stats`]: entity-type frequency tables and their bucket report.
//! * [`conversation`]: render annotations or supervised records as
//!   conversation-style tuning examples, with negative-type sampling.
//! * [`benchmark`]: harmonize NER datasets into sentence-level records.
//! * [`eval`]: strict and partial entity-level micro-F1.
//!
//! [`pipeline`] wires the stages into file-to-file steps with run manifests.
//! [`model`] holds the record types shared by all of them and their JSONL
//! form. Per-record loops run on rayon when the `parallel` feature is on
//! (the default); see [`exec::Execution`].

pub mod benchmark;
pub mod conversation;
pub mod eval;
pub mod exec;
pub mod gateway;
pub mod model;
pub mod parse;
pub mod pipeline;
pub mod sampler;
pub mod seed;
pub mod stats;
pub mod text;

pub use exec::Execution;
