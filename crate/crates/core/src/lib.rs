//! Offline pipeline that turns Russian cybersecurity chatter into English
//! intelligence: corpus ingestion and tokenization, per-language skip-gram
//! embeddings, a kappa-gated synset alignment database, an LSTM
//! encoder-decoder translator, translation-quality metrics, and RDF output
//! for downstream defense systems.

pub mod alignment;
pub mod corpus;
pub mod embeddings;
pub mod evaluation;
pub mod intel;
pub mod linalg;
pub mod synth;
pub mod translator;

mod rngutil;

pub use corpus::{Lang, TweetRecord, Vocabulary};
pub use embeddings::{EmbeddingSpace, SgnsConfig};
pub use translator::{Seq2SeqModel, TrainConfig};
