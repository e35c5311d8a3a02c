//! Controlled word-order experiments with switch-parameterized grammars.
//!
//! The pipeline has four stages:
//!
//! 1. [`grammar`] and [`lexicon`] define a probabilistic context-free grammar
//!    whose rules can be tagged with binary *switches*; each switch reverses
//!    the right-hand side of the rules it tags.
//! 2. [`sampler`] draws derivation trees once, and [`switching`] writes them
//!    out under all `2^K` switch configurations as aligned train/dev/test
//!    corpora.
//! 3. [`ngram`] trains a language model per corpus and scores every test
//!    sentence (external scorers can supply the same scores file instead).
//! 4. [`analysis`] fits a random-intercept linear mixed model of perplexity
//!    on the switch configuration and reports per-switch effects.
//!
//! [`pipeline`] glues the stages together for the command-line tool.

pub mod analysis;
pub mod grammar;
pub mod lexicon;
pub mod ngram;
pub mod pipeline;
pub mod sampler;
pub mod switching;

pub use grammar::{base_grammar, parse_grammar, Grammar, GrammarError};
pub use lexicon::Lexicon;
pub use sampler::{sample, yield_of, DerivationTree, SampleConfig};
pub use switching::{enumerate_switch_vectors, generate_parallel, word_order_of, CorpusPlan, SwitchVector, WordOrder};
