//! Identification of referent objects from composite symbolic descriptions.
//!
//! A description is a set of lexicon symbols (`green left`). Each symbol owns a
//! small block of log-linear weights over hand-picked object features, and the
//! identification posterior over an environment's objects is the softmax of the
//! summed per-symbol scores. Training minimizes the KL divergence to target
//! identification distributions with exact gradients and Hessians.

pub mod dataset;
mod error;
pub mod features;
pub mod grasp;
pub mod identify;
pub mod lexicon;
pub mod model;
pub mod optim;
pub mod pnm;
pub mod render;
pub mod synth;
pub mod training;

pub use dataset::{Corpus, EvalMetrics, IdentificationTask, TaskFilter};
pub use error::{Error, Result};
pub use features::{EnvStats, RawFeatures};
pub use lexicon::{default_lexicon, Channel, Description, Lexicon, Symbol};
pub use model::{Environment, ModelParams, Posterior, SceneObject};
pub use training::{FitConfig, FitReport, Method};
