//! Drug-class classification of antimicrobial-resistance (AMR) gene sequences.
//!
//! The crate chains five stages into one batch pipeline:
//!
//! 1. [`seqio`] — parse, validate, and split labeled DNA datasets (FASTA in,
//!    JSON-lines manifests out).
//! 2. [`align`] — a small word-indexed seed-and-extend local nucleotide
//!    aligner that produces top-k hits with Karlin–Altschul e-values.
//! 3. [`promptgen`] — render classification prompts from a sequence alone or
//!    from the sequence's top alignment hits.
//! 4. [`llmclient`] + [`extract`] — send prompts to a chat backend (HTTP or a
//!    deterministic mock), cache replies, and map verbose reply text back to
//!    one of nine drug classes.
//! 5. [`evalkit`] — score predictions against multi-label ground truth and
//!    emit report tables.
//!
//! The `examples/` directory has one runnable program per stage; the
//! `amrclass` binary wires the same library calls into subcommands.

pub mod align;
pub mod evalkit;
pub mod extract;
pub mod labelspace;
pub mod llmclient;
pub mod pipeline;
pub mod promptgen;
pub mod seqio;

pub use labelspace::DrugClass;
pub use seqio::{SeqRecord, SourceDb};
