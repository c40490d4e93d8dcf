//! Core library for extracting ABCD cognitive pathways from social-media
//! statements and evaluating the extraction.
//!
//! The pipeline has two stages. Every sentence of a post is classified into
//! the hierarchical ABCD scheme ([`taxonomy`]) by a [`classifier`] backend;
//! sentences are then grouped per parent category and each group is
//! summarized ([`pathway`]). [`metrics`] scores both stages, [`corpus`] handles
//! dataset files and [`llm`] talks to chat-completion endpoints.

pub mod backend;
pub mod classifier;
pub mod corpus;
pub mod llm;
pub mod metrics;
pub mod pathway;
pub mod taxonomy;
pub mod testing;

pub use backend::BackendError;

pub use taxonomy::{
    canonical_scheme, Category, CategoryScheme, ChildCategory, LabelEntry, LabelViolation, ParentCategory,
    RawLabelEntry, Resolution, SentenceLabel, TaxonomyError,
};
