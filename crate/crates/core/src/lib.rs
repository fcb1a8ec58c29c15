//! Two-hop explanation chain retrieval.
//!
//! Given a question-answer pair and a corpus of declarative facts, `hopchain`
//! proposes ranked pairs of facts that together connect the question to its
//! answer. Chains come from a constrained BM25 search ([`lexical_index`]),
//! from exact inner-product search with a learned second-hop query
//! ([`dense_index`], [`reencoder`]), or from a merge of the two
//! ([`chain_builder`]). They can be re-ranked with external validity scores
//! ([`reranker`]) and are evaluated by gold retrieval rate ([`eval`]).
//!
//! ```
//! use hopchain::corpus::{Corpus, Fact, QaPair, Tokenizer};
//! use hopchain::lexical_index::{build_index, Bm25Params};
//! use hopchain::chain_builder::{syntactic_chains, PipelineConfig};
//!
//! let corpus = Corpus::new(vec![
//!     Fact::new("A", "Differential heating of air produces wind"),
//!     Fact::new("B", "Wind is used for producing electricity"),
//!     Fact::new("C", "Penguins live in Antarctica"),
//! ])?;
//! let index = build_index(&corpus, &Tokenizer::default(), Bm25Params::default())?;
//! let qa = QaPair::new("q1", "Differential heating of air can be harnessed for what?", "electricity production");
//! let chains = syntactic_chains(&index, &qa, &PipelineConfig::default());
//! assert_eq!((chains[0].f1.as_str(), chains[0].f2.as_str()), ("A", "B"));
//! # Ok::<(), hopchain::Error>(())
//! ```

pub mod chain_builder;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dense_index;
pub mod error;
pub mod eval;
pub mod io;
pub mod lexical_index;
pub mod reencoder;
pub mod reranker;

pub use error::{Error, Result};

// The guide under book/ is compiled as doc-tests so its snippets stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tokenization.md")]
    mod tokenization {}
    #[doc = include_str!("../../../book/src/bm25.md")]
    mod bm25 {}
    #[doc = include_str!("../../../book/src/syntactic_chains.md")]
    mod syntactic_chains {}
    #[doc = include_str!("../../../book/src/dense_retrieval.md")]
    mod dense_retrieval {}
    #[doc = include_str!("../../../book/src/reencoder.md")]
    mod reencoder {}
    #[doc = include_str!("../../../book/src/merging.md")]
    mod merging {}
    #[doc = include_str!("../../../book/src/reranking.md")]
    mod reranking {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
