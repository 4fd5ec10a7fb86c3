//! Toolkit for aligning two monolingual word-embedding spaces, inducing
//! bilingual dictionaries with CSLS retrieval, and measuring how alignable
//! the two spaces are through the Laplacian spectra of their
//! nearest-neighbour graphs.

pub mod alignment;
pub mod corpus;
pub mod dictionary;
pub mod embeddings;
pub mod error;
pub mod graph;
pub mod numerics;
pub mod retrieval;
pub mod stats;
pub mod synth;

pub use alignment::{
    adversarial_init, identical_seed, mutual_nn_dictionary, procrustes, refine, AdversarialConfig,
    MutualNnConfig, RefineConfig, TranslationMatrix,
};
pub use dictionary::{BilingualDictionary, Provenance};
pub use embeddings::{load_vec, EmbeddingSpace, HeaderMode, LoadOptions};
pub use error::{Error, Result};
pub use graph::{
    build_nn_graph, eigensimilarity, laplacian, sampled_subgraph_similarity, vf2_isomorphic,
    EigenSimilarity, GraphOptions, NnGraph, SampleConfig,
};
pub use numerics::Matrix;
pub use retrieval::{evaluate_p1, translate, RetrievalConfig, RetrievalMethod};
