//! Bird's-eye-view fish-bone diagrams from the introductions of academic
//! papers: corpus loading, sentence segmentation, embeddings, issue
//! classification, clustering, chat-model summaries, diagram assembly and
//! rendering.

pub mod classifier;
pub mod cluster;
pub mod corpus;
pub mod embedding;
pub mod fishbone;
mod http;
pub mod render;
pub mod scalar;
pub mod segment;
pub mod summarizer;

pub use scalar::Scalar;

pub type SvmModelF32 = classifier::SvmModel<f32>;
pub type SvmModelF64 = classifier::SvmModel<f64>;
pub type EvalReportF64 = classifier::EvalReport<f64>;
pub type ClusterResultF32 = cluster::ClusterResult<f32>;
pub type ClusterResultF64 = cluster::ClusterResult<f64>;
