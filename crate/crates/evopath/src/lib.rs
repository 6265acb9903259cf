//! Evolutionary meta-path discovery over heterogeneous information
//! networks.
//!
//! The pipeline seeds a replay buffer with meta-paths summarized from
//! relation-anchored random walks, then iterates: draw few-shot examples by
//! score-prioritized sampling, prompt a generation backend (an LLM chat
//! endpoint or a deterministic schema-guided mutator), repair and validate
//! the candidates against the schema graph, score them exactly on the
//! instance graph, and feed the survivors back into the buffer. Scored
//! meta-paths drive knowledge base completion and link prediction,
//! including the inductive variant with held-out entities.

pub mod atoms;
pub mod buffer;
pub mod cleaner;
pub mod cli;
pub mod error;
pub mod eval;
pub mod evolution;
pub mod generator;
pub mod hin;
pub mod matcher;
pub mod metapath;
pub mod rng;
pub mod sampler;
pub mod synth;

pub use error::{EvoPathError, Result};
pub use hin::{load_hin, EntityId, Fact, FactSet, Hin, HinBuilder, RelationId, SchemaGraph, TypeId};
pub use matcher::{batch_score, match_pairs, score_metapath, MetaPathScore, PairSet};
pub use metapath::MetaPath;
