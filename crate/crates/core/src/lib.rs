//! Building blocks for acquiring domain-specific corpora from the web.
//!
//! The crate covers the whole acquisition pipeline: a polite fetcher with
//! pluggable page sources, HTML normalisation into text blocks, character
//! n-gram language identification, shallow-feature boilerplate marking,
//! topic-driven relevance scoring and link prioritisation, parallel document
//! detection, length-based sentence alignment, and the XML / TMX exporters.
//! [`sitegen`] produces deterministic multilingual test sites with ground
//! truth so that every stage can be exercised offline.

pub mod align;
pub mod boilerplate;
pub mod config;
pub mod crawl;
pub mod export;
pub mod fetch;
pub mod frontier;
pub mod html;
pub mod lang;
pub mod langid;
pub mod pairs;
pub mod provenance;
pub mod sitegen;
pub mod tokenize;
pub mod topic;
pub mod xml;

pub use lang::Lang;
