//! Two-hop chain construction.
//!
//! Three builders share one ranking rule: a chain scores `s1 + s2`, reversed
//! duplicates collapse onto their higher-scored orientation, and ties order by
//! `(f1, f2)`.
//!
//! * [`syntactic_chains`]: BM25 hop one on the question-answer text, then a
//!   constrained BM25 hop two whose facts must share a word with both the
//!   question-answer pair and the first fact.
//! * [`semantic_chains`]: inner-product hop one on the query embedding, a
//!   re-encoded query per first fact for hop two, and a filter dropping second
//!   facts that share no word with the question or the answer.
//! * [`merge_candidates`]: swaps the tail of a syntactic list for the head of
//!   a semantic one.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, QaPair, TokenSet, Tokenizer};
use crate::dense_index::{DenseIndex, Embedding};
use crate::error::{Error, Result};
use crate::io;
use crate::lexical_index::InvertedIndex;
use crate::reencoder::ReEncoderModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainSource {
    Syntactic,
    Semantic,
}

impl fmt::Display for ChainSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainSource::Syntactic => "syntactic",
            ChainSource::Semantic => "semantic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCandidate {
    pub f1: String,
    pub f2: String,
    pub s1: f64,
    pub s2: f64,
    pub score: f64,
    pub source: ChainSource,
}

impl ChainCandidate {
    pub fn new(f1: impl Into<String>, f2: impl Into<String>, s1: f64, s2: f64, source: ChainSource) -> Self {
        ChainCandidate {
            f1: f1.into(),
            f2: f2.into(),
            s1,
            s2,
            score: s1 + s2,
            source,
        }
    }

    pub fn key(&self) -> ChainKey {
        ChainKey::new(&self.f1, &self.f2)
    }
}

/// An unordered fact pair, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainKey(pub String, pub String);

impl ChainKey {
    pub fn new(a: &str, b: &str) -> Self {
        if a <= b {
            ChainKey(a.to_string(), b.to_string())
        } else {
            ChainKey(b.to_string(), a.to_string())
        }
    }
}

impl fmt::Display for ChainKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// First-hop facts retrieved lexically (N).
    pub n_first: usize,
    /// Second-hop facts retrieved lexically per first fact (M).
    pub m_second: usize,
    /// Chains kept (K).
    pub k_chains: usize,
    pub semantic_n: usize,
    pub semantic_m: usize,
    /// Fraction of the syntactic list's tail open to semantic chains.
    pub merge_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_first: 20,
            m_second: 4,
            k_chains: 10,
            semantic_n: 5,
            semantic_m: 2,
            merge_fraction: 0.25,
        }
    }
}

/// Deduplicates unordered pairs (keeping the higher-scored orientation), sorts
/// by descending score with ties on `(f1, f2)`, and truncates to `k`.
pub fn rank_chains(mut chains: Vec<ChainCandidate>, k: usize) -> Vec<ChainCandidate> {
    chains.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.f1.cmp(&b.f1))
            .then_with(|| a.f2.cmp(&b.f2))
    });
    let mut seen = HashSet::new();
    chains.retain(|c| seen.insert(c.key()));
    chains.truncate(k);
    chains
}

pub fn syntactic_chains(index: &InvertedIndex, qa: &QaPair, cfg: &PipelineConfig) -> Vec<ChainCandidate> {
    let qa_tokens = index.tokenizer().tokenize(&qa.text());
    let first = index.query(&qa_tokens, cfg.n_first.max(1));
    let mut pairs = Vec::new();
    for f1 in &first {
        let f1_tokens = index
            .fact_terms(&f1.fact_id)
            .expect("hop-one results come from the index");
        let query = qa_tokens.union(f1_tokens);
        let exclude: HashSet<&str> = [f1.fact_id.as_str()].into_iter().collect();
        let second = index.query_constrained(&query, &[&qa_tokens, f1_tokens], &exclude, cfg.m_second.max(1));
        pairs.extend(
            second
                .into_iter()
                .map(|f2| ChainCandidate::new(&f1.fact_id, f2.fact_id, f1.score, f2.score, ChainSource::Syntactic)),
        );
    }
    rank_chains(pairs, cfg.k_chains)
}

pub fn semantic_chains(
    dindex: &DenseIndex,
    model: &ReEncoderModel,
    q_embedding: &Embedding,
    qa: &QaPair,
    corpus: &Corpus,
    tokenizer: &Tokenizer,
    cfg: &PipelineConfig,
) -> Result<Vec<ChainCandidate>> {
    if model.dim != dindex.dim() {
        return Err(Error::Dimension {
            expected: dindex.dim(),
            found: model.dim,
        });
    }
    let concepts = tokenizer.tokenize(&qa.question).union(&tokenizer.tokenize(&qa.answer));
    let first = dindex.mips_top_k(q_embedding, cfg.semantic_n.max(1), &HashSet::new())?;
    let mut concept_cache: HashMap<String, bool> = HashMap::new();
    let mut pairs = Vec::new();
    for f1 in &first {
        let d1 = Embedding(
            dindex
                .get(&f1.fact_id)
                .expect("hop-one results come from the index")
                .to_vec(),
        );
        let q_r = model.reencode(q_embedding, &d1)?;
        let exclude: HashSet<&str> = [f1.fact_id.as_str()].into_iter().collect();
        for f2 in dindex.mips_top_k(&q_r, cfg.semantic_m.max(1), &exclude)? {
            let keep = match concept_cache.get(&f2.fact_id) {
                Some(&k) => k,
                None => {
                    let fact = corpus
                        .get(&f2.fact_id)
                        .ok_or_else(|| Error::UnknownFact(f2.fact_id.clone()))?;
                    let k = tokenizer.tokenize(&fact.text).overlaps(&concepts);
                    concept_cache.insert(f2.fact_id.clone(), k);
                    k
                }
            };
            if keep {
                pairs.push(ChainCandidate::new(
                    &f1.fact_id,
                    f2.fact_id,
                    f1.score,
                    f2.score,
                    ChainSource::Semantic,
                ));
            }
        }
    }
    Ok(rank_chains(pairs, cfg.k_chains))
}

/// Replaces up to `floor(merge_fraction · |syntactic|)` trailing syntactic
/// chains with the leading semantic chains.
///
/// A semantic chain already present (as an unordered pair) in the kept
/// syntactic prefix, or already taken, is skipped and the next one is used.
/// When the semantic list runs out, the output is shorter than `syntactic`.
pub fn merge_candidates(
    syntactic: &[ChainCandidate],
    semantic: &[ChainCandidate],
    cfg: &PipelineConfig,
) -> Vec<ChainCandidate> {
    let r = (cfg.merge_fraction * syntactic.len() as f64).floor() as usize;
    let replace = r.min(semantic.len()).min(syntactic.len());
    let keep = syntactic.len() - replace;
    let mut out: Vec<ChainCandidate> = syntactic[..keep].to_vec();
    let mut seen: HashSet<ChainKey> = out.iter().map(ChainCandidate::key).collect();
    out.extend(semantic.iter().filter(|c| seen.insert(c.key())).take(replace).cloned());
    out
}

/// Ranked chains per question id.
pub type Predictions = BTreeMap<String, Vec<ChainCandidate>>;

#[derive(Serialize, Deserialize)]
struct ChainsRecord {
    qid: String,
    chains: Vec<ChainCandidate>,
}

/// One JSON record per question, ordered by qid, after a provenance header.
pub fn predictions_to_jsonl(predictions: &Predictions, config_digest: &str) -> String {
    let mut out = io::header_line("chains", config_digest);
    out.push('\n');
    for (qid, chains) in predictions {
        let rec = ChainsRecord {
            qid: qid.clone(),
            chains: chains.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("chains serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_predictions(text: &str) -> Result<Predictions> {
    let (_, records) = io::parse_jsonl::<ChainsRecord>(text)?;
    let mut out = Predictions::new();
    for (line, rec) in records {
        if out.insert(rec.qid.clone(), rec.chains).is_some() {
            return Err(Error::DuplicateId { id: rec.qid, line });
        }
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Predictions> {
    parse_predictions(&io::read_to_string(path)?)
}

/// True iff `f2_text` shares a token with the question-answer text and with
/// `f1_text`.
pub fn syntactic_constraints_hold(tokenizer: &Tokenizer, qa: &QaPair, f1_text: &str, f2_text: &str) -> bool {
    let qa_tokens: TokenSet = tokenizer.tokenize(&qa.text());
    let f2 = tokenizer.tokenize(f2_text);
    f2.overlaps(&qa_tokens) && f2.overlaps(&tokenizer.tokenize(f1_text))
}
