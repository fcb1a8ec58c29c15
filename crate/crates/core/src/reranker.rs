//! Score-driven re-ranking of candidate chains and export of the labelled
//! dataset an external validity classifier is trained on.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain_builder::{ChainCandidate, ChainKey};
use crate::config::derive_seed;
use crate::corpus::{Corpus, QaPair};
use crate::error::{Error, Result};
use crate::eval::GoldChain;
use crate::io;

/// Validity scores keyed by question and unordered chain. Higher is better.
///
/// File format, one entry per line:
///
/// ```text
/// <qid>\t<f1_id>|<f2_id>\t<score>
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: HashMap<String, HashMap<ChainKey, f64>>,
}

impl ScoreTable {
    pub fn new() -> Self {
        ScoreTable::default()
    }

    pub fn len(&self) -> usize {
        self.scores.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inserts or overwrites a score. Non-finite scores are rejected.
    pub fn insert(&mut self, qid: &str, key: ChainKey, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::Precondition(format!("non-finite score for {qid} {key}")));
        }
        self.scores.entry(qid.to_string()).or_default().insert(key, score);
        Ok(())
    }

    pub fn get(&self, qid: &str, key: &ChainKey) -> Option<f64> {
        self.scores.get(qid).and_then(|m| m.get(key)).copied()
    }

    pub fn merge(&mut self, other: ScoreTable) {
        for (qid, m) in other.scores {
            self.scores.entry(qid).or_default().extend(m);
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = ScoreTable::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [qid, chain, score] = fields[..] else {
                return Err(Error::parse(line_no, "expected <qid>\\t<f1>|<f2>\\t<score>"));
            };
            let Some((f1, f2)) = chain.split_once('|') else {
                return Err(Error::parse(line_no, format!("chain key {chain:?} lacks '|'")));
            };
            if qid.is_empty() || f1.is_empty() || f2.is_empty() || f2.contains('|') {
                return Err(Error::parse(line_no, format!("malformed entry {line:?}")));
            }
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|e| Error::parse(line_no, format!("bad score: {e}")))?;
            if !score.is_finite() {
                return Err(Error::parse(line_no, "score is not finite"));
            }
            let key = ChainKey::new(f1, f2);
            if table.get(qid, &key).is_some() {
                return Err(Error::parse(line_no, format!("duplicate entry for {qid} {key}")));
            }
            table.insert(qid, key, score)?;
        }
        Ok(table)
    }

    /// Serializes sorted by qid then chain key.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let sorted: BTreeMap<_, BTreeMap<_, _>> = self.scores.iter().map(|(q, m)| (q, m.iter().collect())).collect();
        for (qid, m) in sorted {
            for (key, score) in m {
                writeln!(out, "{qid}\t{key}\t{score:?}").unwrap();
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_text().as_bytes())
    }
}

/// Retrieval-sum scores for `candidates`; reversed duplicates keep the max.
pub fn baseline_scores(qid: &str, candidates: &[ChainCandidate]) -> ScoreTable {
    let mut table = ScoreTable::new();
    let m = table.scores.entry(qid.to_string()).or_default();
    for c in candidates {
        m.entry(c.key()).and_modify(|s| *s = s.max(c.score)).or_insert(c.score);
    }
    if m.is_empty() {
        table.scores.clear();
    }
    table
}

/// Orders `candidates` by descending table score, keeping the input order for
/// ties and placing unscored chains last, then truncates to `k`. Repeated
/// unordered pairs keep their first occurrence.
pub fn rerank(candidates: &[ChainCandidate], scores: &ScoreTable, qid: &str, k: usize) -> Vec<ChainCandidate> {
    assert!(k >= 1, "k must be positive");
    let mut seen = HashSet::new();
    let mut scored = Vec::new();
    let mut unscored = Vec::new();
    for c in candidates {
        let key = c.key();
        if !seen.insert(key.clone()) {
            continue;
        }
        match scores.get(qid, &key) {
            Some(s) => scored.push((s, c)),
            None => unscored.push(c),
        }
    }
    // stable sort keeps original rank among equal scores
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored
        .into_iter()
        .map(|(_, c)| c)
        .chain(unscored)
        .take(k)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankDatasetRecord {
    pub qid: String,
    pub question: String,
    pub answer: String,
    pub f1_text: String,
    pub f2_text: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Invalid chains sampled per valid record.
    pub negatives_per_positive: usize,
    /// Emit the gold chain in both orientations as positives.
    pub include_reverse: bool,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            negatives_per_positive: 2,
            include_reverse: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetOutcome {
    pub records: Vec<RerankDatasetRecord>,
    /// Questions whose pool held fewer distinct invalid chains than requested.
    pub short_pools: usize,
    /// Total negatives missing across those questions.
    pub missing_negatives: usize,
}

impl DatasetOutcome {
    pub fn to_jsonl(&self, config_digest: &str) -> String {
        let mut out = io::header_line("rerank-dataset", config_digest);
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn parse_dataset(text: &str) -> Result<Vec<RerankDatasetRecord>> {
    Ok(io::parse_jsonl(text)?.1.into_iter().map(|(_, r)| r).collect())
}

/// Builds classifier training rows: the gold chain as positives, and a seeded
/// sample of other pool chains as negatives.
pub fn build_rerank_dataset(
    gold: &[GoldChain],
    questions: &HashMap<String, QaPair>,
    corpus: &Corpus,
    pools: &BTreeMap<String, Vec<ChainCandidate>>,
    cfg: &DatasetConfig,
) -> Result<DatasetOutcome> {
    let text = |id: &str| -> Result<String> {
        corpus
            .get(id)
            .map(|f| f.text.clone())
            .ok_or_else(|| Error::UnknownFact(id.to_string()))
    };
    let mut out = DatasetOutcome::default();
    for g in gold {
        let qa = questions
            .get(&g.qid)
            .ok_or_else(|| Error::Precondition(format!("no question text for {}", g.qid)))?;
        let pool = pools
            .get(&g.qid)
            .ok_or_else(|| Error::Precondition(format!("no candidate pool for {}", g.qid)))?;
        let record = |f1: &str, f2: &str, label| -> Result<RerankDatasetRecord> {
            Ok(RerankDatasetRecord {
                qid: g.qid.clone(),
                question: qa.question.clone(),
                answer: qa.answer.clone(),
                f1_text: text(f1)?,
                f2_text: text(f2)?,
                label,
            })
        };

        let mut positives = vec![record(&g.f1, &g.f2, Label::Valid)?];
        if cfg.include_reverse {
            positives.push(record(&g.f2, &g.f1, Label::Valid)?);
        }
        let wanted = cfg.negatives_per_positive * positives.len();
        out.records.extend(positives);

        let gold_key = g.key();
        let mut seen = HashSet::new();
        let negatives: Vec<&ChainCandidate> = pool
            .iter()
            .filter(|c| c.key() != gold_key && c.f1 != c.f2 && seen.insert(c.key()))
            .collect();
        let chosen: Vec<usize> = if negatives.len() <= wanted {
            if negatives.len() < wanted {
                out.short_pools += 1;
                out.missing_negatives += wanted - negatives.len();
            }
            (0..negatives.len()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed as i64, &format!("rerank-dataset/{}", g.qid)));
            let mut idx = rand::seq::index::sample(&mut rng, negatives.len(), wanted).into_vec();
            idx.sort_unstable();
            idx
        };
        for i in chosen {
            let c = negatives[i];
            out.records.push(record(&c.f1, &c.f2, Label::Invalid)?);
        }
    }
    Ok(out)
}
