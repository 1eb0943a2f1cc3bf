//! Toolkit for building web-table corpora out of a MediaWiki instance.
//!
//! The pipeline runs in stages that map onto the modules below:
//!
//! * [`source`] enumerates page titles and fetches rendered HTML, either from the
//!   MediaWiki Action API or from an offline HTML dump.
//! * [`extract`] locates every `<table>` of a page, expands row/column spans into a
//!   rectangular grid and captures the surrounding text.
//! * [`filter`] holds the character-class, numeric and null predicates together with
//!   the language-customization filters built on them.
//! * [`store`] persists tables as CSV with JSON sidecars and keeps the checkpoint log.
//! * [`controller`] drives a crawl job: chunking, worker pool, pause/resume, progress.
//! * [`stats`] computes corpus statistics and rankings, and answers metadata queries.
//! * [`mockwiki`] is a small in-process MediaWiki imitation used by tests and demos.

pub mod controller;
pub mod error;
pub mod extract;
pub mod filter;
pub mod mockwiki;
pub mod source;
pub mod stats;
pub mod store;

pub use error::{Error, Result};

/// Version string written into corpus manifests and reported by the service.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
