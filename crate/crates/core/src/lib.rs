//! Schema evolution benchmarks, schema-constrained decoding and span-level
//! evaluation for adaptable knowledge graph construction.
//!
//! Data flows `schema` + `corpus` → `evolve` (per-iteration benchmarks) →
//! `decode` (constrained extraction over the `lineal` grammar) → `metrics`.
//! `embed` supplies the similarity statistics that drive evolution, and
//! `llmclient` covers few-shot prompting of hosted chat models.

pub mod corpus;
pub mod decode;
pub mod embed;
pub mod evolve;
pub mod lineal;
pub mod llmclient;
pub mod metrics;
pub mod presets;
pub mod schema;

pub use corpus::{Annotation, Example, SplitSet};
pub use decode::{Decoder, Scorer};
pub use evolve::{build_benchmark, BenchmarkInputs, EvolutionConfig, Strategy};
pub use metrics::{micro_f1, MetricKind, MetricsReport};
pub use schema::{SchemaGraph, Task};
