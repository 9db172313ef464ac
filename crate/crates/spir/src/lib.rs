//! Privacy-preserving important passage retrieval.
//!
//! Documents become a compact term-by-column matrix (passages plus
//! key-phrase pseudo-passages); KP-Centrality ranks passages by support-set
//! membership counts. For outsourced retrieval the matrix columns are
//! replaced by secure binary embeddings: band-quantized random projections
//! whose Hamming distances track Euclidean distances only below a
//! delta-controlled radius, so the untrusted side sees bit strings and
//! nothing else.
//!
//! Modules:
//! - [`sbe`]: parameter generation, hashing, Hamming statistics, the
//!   distance bounds and leakage calibration
//! - [`text`]: segmentation, tokenization, key phrases, the compact matrix
//! - [`centrality`]: distances, support sets, ranking
//! - [`protocol`]: Alice/Bob separation, wire format, TCP transport
//! - [`eval`]: ROUGE-1, baselines and leakage/bpc sweeps
//! - [`corpus`]: corpus directory format, config, synthetic fixtures

pub mod centrality;
pub mod corpus;
pub mod eval;
pub mod protocol;
pub mod rng;
pub mod sbe;
pub mod text;
