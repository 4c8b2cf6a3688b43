//! Distillation workbench: teacher data generation with critique-revision
//! prompting, multitask and counterfactual student training, accuracy
//! evaluation, and the statistics used to compare student variants.

pub mod corpus;
pub mod datagen;
pub mod evaluation;
pub mod manifest;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod synthetic;
pub mod teacher;
pub mod variant;

pub use scalar::Scalar;
pub use variant::{ExplanationSource, ModelVariant, TrainingMethod};
pub mod train;

/// Built-in student in single and double precision.
pub type MlpStudentF32 = train::MlpStudent<f32>;
pub type MlpStudentF64 = train::MlpStudent<f64>;
