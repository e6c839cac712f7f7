//! Cross-lingual entity alignment with type-enhanced ensemble triple
//! representations, built on a small define-by-run autodiff engine.
//!
//! The pipeline: [`structure`] (highway GCN) feeds [`triple`] (triple
//! specificity, role-aware attention, type space), whose output drives
//! [`enhance`] (cycle co-enhancement and neighbor re-aggregation).
//! [`train`] fits the shared parameters with a margin loss and [`eval`]
//! ranks the test pairs.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod kg;
pub mod oracle;
pub mod model;
pub mod optim;
pub mod params;
pub mod selfcheck;
pub mod structure;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod triple;

pub use autodiff::{Tape, Var};
pub use config::{TrainConfig, Variant};
pub use dataset::{AlignmentTask, SeedPair};
pub use enhance::CycleMode;
pub use error::{Error, Result};
pub use eval::{evaluate, EvalOptions, EvalReport};
pub use kg::{KnowledgeGraph, RelationExpandedGraph, Triple};
pub use model::{ModelConfig, TteaModel};
pub use synth::{generate_synthetic_pair, SynthConfig};
pub use tensor::{SparseMatrix, Tensor};
pub use train::{fit, TrainOutcome};
