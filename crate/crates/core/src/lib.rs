//! Cybersecurity entity extraction from threat-intelligence text.
//!
//! The crate covers the whole loop: corpus ingestion ([`ingest`]), document
//! structure ([`text`]), rule-based recognisers ([`rules`]), the hashed-embedding
//! tagger ([`ner`]), annotation sets and agreement ([`annotations`]), Wikidata
//! linking ([`linker`]) and span-level evaluation ([`eval`]).

pub mod ingest;
pub mod patterns;
pub mod schema;
pub mod text;
pub mod annotations;
pub mod mention;
pub mod rules;
pub mod eval;
pub mod ner;
pub mod linker;
