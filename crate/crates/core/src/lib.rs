//! Assertion-hint synthesis for SMT-backed verification languages.
//!
//! Proof engineers working with auto-active verifiers (Dafny and friends)
//! spend a lot of time divining the inline `assert` hints that unblock the
//! SMT solver. This crate automates that loop:
//!
//! 1. [`localization`] parses the verifier's error output and, from a
//!    block-structured model of the failing lemma, computes candidate
//!    positions where a missing assertion belongs.
//! 2. [`selection`] mines an example bank of (context, assertion) pairs from
//!    the surrounding codebase and ranks it against the target with a
//!    hierarchical sequence-similarity metric ([`similarity`]), TF-IDF, or a
//!    seeded random baseline.
//! 3. [`prompting`] assembles a few-shot chat prompt with an explicit
//!    assertion placeholder, and [`driver`] runs the sample-splice-verify
//!    repair loop with a fixed attempt budget.
//!
//! All verifier and LLM traffic goes through the pluggable [`backends`], and
//! the deterministic mock backends make the whole pipeline runnable offline.
//! [`extraction`] builds benchmark tasks from a codebase by ablating
//! assertions one at a time and keeping the ones the proof actually needs.
//!
//! Bank scoring, ablation, and benchmark runs are data-parallel; they run on
//! rayon when the default `parallel` feature is enabled and fall back to
//! sequential loops without it.

pub mod backends;
pub mod config;
pub mod context;
pub mod driver;
pub mod error;
pub mod extraction;
pub mod lexer;
pub mod localization;
pub mod prompting;
pub mod selection;
pub mod similarity;

pub use error::{Error, Result};
