//! Okapi BM25 over an in-memory inverted index.
//!
//! For a query term `t` and a fact `d`:
//!
//! ```text
//! idf(t)     = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//! score(t,d) = idf(t) * tf(t,d) * (k1 + 1) / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))
//! ```
//!
//! Query tokens form a set, so each term contributes once. Facts with a zero
//! score (no shared term) are never returned, and equal scores are ordered by
//! ascending fact id.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TokenSet, Tokenizer};
use crate::error::{Error, Result};
use crate::io;

/// First line of an index snapshot file.
pub const SNAPSHOT_MAGIC: &str = "HOPCHAIN-BM25-INDEX v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn is_valid(&self) -> bool {
        self.k1.is_finite() && self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b)
    }
}

/// A retrieved fact and its relevance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFact {
    pub fact_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    doc_ids: Vec<String>,
    doc_terms: Vec<TokenSet>,
    by_id: HashMap<String, u32>,
    params: Bm25Params,
    tokenizer: Tokenizer,
}

pub fn build_index(corpus: &Corpus, tokenizer: &Tokenizer, params: Bm25Params) -> Result<InvertedIndex> {
    InvertedIndex::build(corpus, tokenizer, params)
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, tokenizer: &Tokenizer, params: Bm25Params) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if !params.is_valid() {
            return Err(Error::Precondition(format!(
                "BM25 parameters out of range: k1={}, b={}",
                params.k1, params.b
            )));
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        let mut doc_terms = Vec::with_capacity(corpus.len());
        for (ordinal, fact) in corpus.facts().iter().enumerate() {
            let terms = tokenizer.terms(&fact.text);
            doc_lengths.push(terms.len() as u32);
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &terms {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_string()).or_default().push(Posting {
                    ordinal: ordinal as u32,
                    tf: count,
                });
            }
            doc_terms.push(terms.into_iter().collect());
        }
        let doc_ids: Vec<String> = corpus.facts().iter().map(|f| f.id.clone()).collect();
        Ok(Self::assemble(
            postings,
            doc_lengths,
            doc_ids,
            doc_terms,
            params,
            tokenizer.clone(),
        ))
    }

    fn assemble(
        postings: BTreeMap<String, Vec<Posting>>,
        doc_lengths: Vec<u32>,
        doc_ids: Vec<String>,
        doc_terms: Vec<TokenSet>,
        params: Bm25Params,
        tokenizer: Tokenizer,
    ) -> Self {
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_length = total as f64 / doc_lengths.len() as f64;
        let by_id = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        InvertedIndex {
            postings,
            doc_lengths,
            avg_doc_length,
            doc_ids,
            doc_terms,
            by_id,
            params,
            tokenizer,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// The tokenizer the index was built with. Queries should be tokenized
    /// with it so overlap tests agree with the indexed terms.
    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn fact_id(&self, ordinal: usize) -> &str {
        &self.doc_ids[ordinal]
    }

    /// Distinct indexed terms of a fact.
    pub fn fact_terms(&self, fact_id: &str) -> Option<&TokenSet> {
        self.by_id.get(fact_id).map(|&i| &self.doc_terms[i as usize])
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.postings(term).len() as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Accumulates BM25 scores for every fact matching any query token.
    /// Returns `(ordinal, score)` in ascending ordinal order.
    fn score_all(&self, query_tokens: &TokenSet) -> Vec<(u32, f64)> {
        let Bm25Params { k1, b } = self.params;
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in query_tokens.iter() {
            let postings = self.postings(term);
            if postings.is_empty() {
                continue;
            }
            let idf = self.idf(term);
            for p in postings {
                let tf = p.tf as f64;
                let dl = self.doc_lengths[p.ordinal as usize] as f64;
                let norm = k1 * (1.0 - b + b * dl / self.avg_doc_length);
                *acc.entry(p.ordinal).or_insert(0.0) += idf * tf * (k1 + 1.0) / (tf + norm);
            }
        }
        let mut scored: Vec<(u32, f64)> = acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
        scored.sort_unstable_by_key(|&(o, _)| o);
        scored
    }

    fn rank(&self, mut hits: Vec<(u32, f64)>, top: usize) -> Vec<ScoredFact> {
        hits.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_ids[a.0 as usize].cmp(&self.doc_ids[b.0 as usize]))
        });
        hits.truncate(top);
        hits.into_iter()
            .map(|(o, score)| ScoredFact {
                fact_id: self.doc_ids[o as usize].clone(),
                score,
            })
            .collect()
    }

    /// Top `top_n` facts by BM25 score.
    pub fn query(&self, query_tokens: &TokenSet, top_n: usize) -> Vec<ScoredFact> {
        assert!(top_n >= 1, "top_n must be positive");
        self.rank(self.score_all(query_tokens), top_n)
    }

    /// Like [`query`](Self::query), restricted to facts that share a token
    /// with every set in `must_overlap` and are not in `exclude`.
    pub fn query_constrained(
        &self,
        query_tokens: &TokenSet,
        must_overlap: &[&TokenSet],
        exclude: &HashSet<&str>,
        top_m: usize,
    ) -> Vec<ScoredFact> {
        assert!(top_m >= 1, "top_m must be positive");
        let hits = self
            .score_all(query_tokens)
            .into_iter()
            .filter(|&(o, _)| {
                let o = o as usize;
                !exclude.contains(self.doc_ids[o].as_str())
                    && must_overlap.iter().all(|c| self.doc_terms[o].overlaps(c))
            })
            .collect();
        self.rank(hits, top_m)
    }

    /// Serializes the index as the magic line followed by a JSON body.
    pub fn to_snapshot(&self, config_digest: &str) -> String {
        let snap = Snapshot {
            config_digest: config_digest.to_string(),
            params: self.params,
            tokenizer: self.tokenizer.clone(),
            doc_ids: self.doc_ids.clone(),
            doc_lengths: self.doc_lengths.clone(),
            doc_terms: self.doc_terms.clone(),
            postings: self.postings.clone(),
        };
        let mut out = String::from(SNAPSHOT_MAGIC);
        out.push('\n');
        out.push_str(&serde_json::to_string(&snap).expect("index serializes"));
        out.push('\n');
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let (magic, body) = text.split_once('\n').unwrap_or((text, ""));
        if magic.trim_end() != SNAPSHOT_MAGIC {
            return Err(Error::parse(
                1,
                format!("not an index snapshot (expected {SNAPSHOT_MAGIC:?})"),
            ));
        }
        let snap: Snapshot = serde_json::from_str(body).map_err(|e| Error::parse(2, e.to_string()))?;
        let n = snap.doc_ids.len();
        if n == 0 {
            return Err(Error::EmptyCorpus);
        }
        if snap.doc_lengths.len() != n || snap.doc_terms.len() != n {
            return Err(Error::parse(2, "snapshot arrays disagree in length"));
        }
        for (term, list) in &snap.postings {
            let sorted = list.windows(2).all(|w| w[0].ordinal < w[1].ordinal);
            if !sorted || list.iter().any(|p| p.ordinal as usize >= n) {
                return Err(Error::parse(2, format!("corrupt postings for term {term:?}")));
            }
        }
        Ok(Self::assemble(
            snap.postings,
            snap.doc_lengths,
            snap.doc_ids,
            snap.doc_terms,
            snap.params,
            snap.tokenizer,
        ))
    }

    pub fn save(&self, path: &Path, config_digest: &str) -> Result<()> {
        io::write_atomic(path, self.to_snapshot(config_digest).as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_snapshot(&io::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    config_digest: String,
    params: Bm25Params,
    tokenizer: Tokenizer,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    doc_terms: Vec<TokenSet>,
    postings: BTreeMap<String, Vec<Posting>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Fact;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Fact::new(format!("f{i}"), *t))
                .collect(),
        )
        .unwrap()
    }

    fn index(texts: &[&str]) -> InvertedIndex {
        build_index(&corpus(texts), &Tokenizer::default(), Bm25Params::default()).unwrap()
    }

    fn toks(s: &str) -> TokenSet {
        Tokenizer::default().tokenize(s)
    }

    /// Scores every fact from its raw text, with no postings involved.
    fn brute_force(texts: &[&str], query: &TokenSet, p: Bm25Params) -> Vec<(String, f64)> {
        let tok = Tokenizer::default();
        let docs: Vec<Vec<String>> = texts.iter().map(|t| tok.terms(t)).collect();
        let n = docs.len() as f64;
        let avgdl = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
        let mut out = Vec::new();
        for (i, d) in docs.iter().enumerate() {
            let mut s = 0.0;
            for q in query.iter() {
                let tf = d.iter().filter(|t| t.as_str() == q).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|d| d.iter().any(|t| t == q)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                s += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * d.len() as f64 / avgdl));
            }
            if s > 0.0 {
                out.push((format!("f{i}"), s));
            }
        }
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    #[test]
    fn postings_hold_exactly_matching_facts() {
        let idx = index(&["wind turbine", "solar panel", "strong wind wind"]);
        let ords: Vec<u32> = idx.postings("wind").iter().map(|p| p.ordinal).collect();
        assert_eq!(ords, vec![0, 2]);
        assert_eq!(idx.postings("wind")[1].tf, 2);
    }

    #[test]
    fn avg_doc_length_is_mean() {
        let idx = index(&["alpha beta", "gamma delta epsilon zeta"]);
        assert_eq!(idx.avg_doc_length(), 3.0);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let err = build_index(&Corpus::default(), &Tokenizer::default(), Bm25Params::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    #[test]
    fn unique_match_ranks_first() {
        let idx = index(&["wind turbine", "solar panel", "river water"]);
        let hits = idx.query(&toks("solar"), 5);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].fact_id, "f1");
    }

    #[test]
    fn stopword_query_is_empty() {
        let idx = index(&["wind turbine", "solar panel"]);
        assert!(idx.query(&toks("the of and"), 5).is_empty());
    }

    #[test]
    fn toy_corpus_matches_brute_force() {
        let texts = [
            "wind is used for producing electricity",
            "differential heating of air produces wind",
            "wind moves sailboats across the water",
            "solar panels convert sunlight",
            "strong wind and more wind can damage trees",
        ];
        let idx = index(&texts);
        let q = toks("wind");
        let got = idx.query(&q, 10);
        let want = brute_force(&texts, &q, Bm25Params::default());
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.fact_id, w.0);
            assert!((g.score - w.1).abs() < 1e-9);
        }
    }

    #[test]
    fn constrained_requires_every_overlap() {
        let idx = index(&["Wind produces electricity", "Wind moves sailboats"]);
        let hits = idx.query_constrained(
            &toks("wind"),
            &[&toks("wind"), &toks("electricity")],
            &HashSet::new(),
            5,
        );
        let ids: Vec<_> = hits.iter().map(|h| h.fact_id.as_str()).collect();
        assert_eq!(ids, vec!["f0"]);
    }

    #[test]
    fn constrained_exclusion() {
        let idx = index(&["wind produces electricity", "solar panel"]);
        let exclude: HashSet<&str> = ["f0"].into_iter().collect();
        assert!(idx.query_constrained(&toks("wind"), &[], &exclude, 5).is_empty());
    }

    #[test]
    fn constrained_keeps_best_of_passing() {
        let texts = [
            "wind power wind",
            "wind electricity",
            "wind turbine electricity grid",
            "wind electricity electricity",
            "electricity bill",
        ];
        let idx = index(&texts);
        let q = toks("wind electricity");
        let must = toks("wind");
        let got = idx.query_constrained(&q, &[&must], &HashSet::new(), 2);
        // oracle: brute force, filter by the predicate, sort, take two
        let tok = Tokenizer::default();
        let want: Vec<_> = brute_force(&texts, &q, Bm25Params::default())
            .into_iter()
            .filter(|(id, _)| {
                let i: usize = id[1..].parse().unwrap();
                tok.tokenize(texts[i]).overlaps(&must)
            })
            .take(2)
            .collect();
        assert_eq!(got.len(), 2);
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.fact_id, w.0);
            assert!((g.score - w.1).abs() < 1e-9);
        }
    }

    #[test]
    fn ties_break_by_fact_id() {
        let c = Corpus::new(vec![
            Fact::new("z", "wind"),
            Fact::new("a", "wind"),
            Fact::new("m", "wind"),
        ])
        .unwrap();
        let idx = build_index(&c, &Tokenizer::default(), Bm25Params::default()).unwrap();
        let ids: Vec<_> = idx.query(&toks("wind"), 3).into_iter().map(|h| h.fact_id).collect();
        assert_eq!(ids, vec!["a", "m", "z"]);
    }

    #[test]
    fn snapshot_round_trip() {
        let idx = index(&["wind turbine", "solar panel", "strong wind wind", "panel of wind"]);
        let snap = idx.to_snapshot("digest");
        assert!(snap.starts_with(SNAPSHOT_MAGIC));
        let back = InvertedIndex::from_snapshot(&snap).unwrap();
        let q = toks("wind panel");
        assert_eq!(idx.query(&q, 10), back.query(&q, 10));
        assert_eq!(back.avg_doc_length(), idx.avg_doc_length());
        assert!(InvertedIndex::from_snapshot("garbage\n{}").is_err());
    }

    const VOCAB: &[&str] = &[
        "wind", "air", "heat", "sun", "water", "plant", "rock", "ice", "salt", "fire",
    ];

    fn arb_corpus() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            proptest::collection::vec(proptest::sample::select(VOCAB), 1..8).prop_map(|w| w.join(" ")),
            1..30,
        )
    }

    proptest! {
        #[test]
        fn query_matches_oracle(texts in arb_corpus(),
                                q in proptest::collection::vec(proptest::sample::select(VOCAB), 0..4),
                                top in 1usize..40) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let idx = index(&refs);
            let q: TokenSet = q.into_iter().collect();
            let got = idx.query(&q, top);
            let want = brute_force(&refs, &q, Bm25Params::default());
            prop_assert_eq!(got.len(), want.len().min(top));
            for (g, w) in got.iter().zip(&want) {
                prop_assert_eq!(&g.fact_id, &w.0);
                prop_assert!((g.score - w.1).abs() < 1e-9);
            }
        }

        #[test]
        fn extra_token_never_lowers_scores(texts in arb_corpus(),
                                           q in proptest::collection::btree_set(proptest::sample::select(VOCAB), 1..4),
                                           extra in proptest::sample::select(VOCAB)) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let idx = index(&refs);
            let base: TokenSet = q.iter().copied().collect();
            let mut more = base.clone();
            more.insert(extra);
            let before: HashMap<_, _> = idx.query(&base, 1000).into_iter().map(|h| (h.fact_id, h.score)).collect();
            let after: HashMap<_, _> = idx.query(&more, 1000).into_iter().map(|h| (h.fact_id, h.score)).collect();
            for (id, s) in before {
                prop_assert!(after[&id] >= s - 1e-12);
            }
        }

        #[test]
        fn constrained_is_filtered_subsequence(texts in arb_corpus(),
                                                q in proptest::collection::btree_set(proptest::sample::select(VOCAB), 1..4),
                                                c in proptest::collection::btree_set(proptest::sample::select(VOCAB), 1..3)) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let idx = index(&refs);
            let q: TokenSet = q.into_iter().collect();
            let c: TokenSet = c.into_iter().collect();
            let constrained = idx.query_constrained(&q, &[&c], &HashSet::new(), 1000);
            let filtered: Vec<_> = idx
                .query(&q, 1000)
                .into_iter()
                .filter(|h| idx.fact_terms(&h.fact_id).unwrap().overlaps(&c))
                .collect();
            prop_assert_eq!(constrained, filtered);
        }
    }
}
