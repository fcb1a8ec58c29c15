//! Fact corpus, question-answer pairs and the tokenizer behind every
//! word-overlap test in the engine.
//!
//! Tokenization is deliberately plain: lowercase, split on anything that is
//! not alphanumeric, drop stopwords. Optional plural stemming can be turned on
//! through [`Tokenizer::with_stemming`]; it is off by default.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Default stopword list. Thirty English function words.
pub const DEFAULT_STOPWORDS: [&str; 30] = [
    "a", "an", "the", "and", "or", "of", "to", "in", "on", "at", "by", "for", "with", "from", "as", "is", "are", "was",
    "were", "be", "been", "it", "its", "this", "that", "these", "those", "what", "which", "can",
];

/// One declarative sentence from the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub id: String,
    pub text: String,
}

impl Fact {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Fact {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub qid: String,
    pub question: String,
    pub answer: String,
}

impl QaPair {
    pub fn new(qid: impl Into<String>, question: impl Into<String>, answer: impl Into<String>) -> Self {
        QaPair {
            qid: qid.into(),
            question: question.into(),
            answer: answer.into(),
        }
    }

    /// Question and answer joined by a single space; the unit queried in hop one.
    pub fn text(&self) -> String {
        format!("{} {}", self.question, self.answer)
    }
}

/// A set of normalized terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSet(BTreeSet<String>);

impl TokenSet {
    pub fn new() -> Self {
        TokenSet::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn insert(&mut self, token: impl Into<String>) -> bool {
        self.0.insert(token.into())
    }

    pub fn union(&self, other: &TokenSet) -> TokenSet {
        TokenSet(self.0.union(&other.0).cloned().collect())
    }

    /// True iff the two sets share at least one token.
    pub fn overlaps(&self, other: &TokenSet) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.0.iter().any(|t| large.0.contains(t))
    }

    /// Space-joined tokens in sorted order.
    pub fn join(&self) -> String {
        self.iter().collect::<Vec<_>>().join(" ")
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSet(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for TokenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.iter().collect::<Vec<_>>().join(", "))
    }
}

pub fn overlaps(a: &TokenSet, b: &TokenSet) -> bool {
    a.overlaps(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    stopwords: BTreeSet<String>,
    #[serde(default)]
    stem: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::with_stopwords(DEFAULT_STOPWORDS)
    }
}

impl Tokenizer {
    /// Stopwords are normalized the same way as text, so `"The"` and `"the"`
    /// name the same entry.
    pub fn with_stopwords<I, S>(stopwords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stopwords = stopwords
            .into_iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        Tokenizer { stopwords, stem: false }
    }

    pub fn with_stemming(mut self, stem: bool) -> Self {
        self.stem = stem;
        self
    }

    /// Loads a plain-text stopword list, one token per line.
    pub fn load_stopwords(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        Ok(Tokenizer::with_stopwords(text.lines()))
    }

    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }

    pub fn is_stemming(&self) -> bool {
        self.stem
    }

    /// The term sequence of `text`, with multiplicity. Used for term
    /// frequencies and document lengths.
    pub fn terms(&self, text: &str) -> Vec<String> {
        let lowered = text.to_lowercase();
        lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty() && !self.stopwords.contains(*t))
            .map(|t| if self.stem { plural_stem(t) } else { t.to_string() })
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }

    pub fn tokenize(&self, text: &str) -> TokenSet {
        TokenSet(self.terms(text).into_iter().collect())
    }
}

/// Tokenizes with the default stopword list.
pub fn tokenize(text: &str) -> TokenSet {
    Tokenizer::default().tokenize(text)
}

// Plural-only suffix stripping: -ies -> -y, -es -> -e, -s -> "" with the usual
// exceptions. Idempotent, and never applied to tokens of three chars or fewer.
fn plural_stem(token: &str) -> String {
    if token.chars().count() <= 3 {
        return token.to_string();
    }
    if let Some(stem) = token.strip_suffix("ies") {
        if !stem.ends_with('e') && !stem.ends_with('a') {
            return format!("{stem}y");
        }
        return token.to_string();
    }
    if let Some(stem) = token.strip_suffix("es") {
        if !stem.ends_with('a') && !stem.ends_with('e') && !stem.ends_with('o') {
            return format!("{stem}e");
        }
        return token.to_string();
    }
    if let Some(stem) = token.strip_suffix('s') {
        if !stem.ends_with('u') && !stem.ends_with('s') {
            return stem.to_string();
        }
    }
    token.to_string()
}

/// An ordered fact store with id lookup.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    facts: Vec<Fact>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(facts: Vec<Fact>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(facts.len());
        for (i, fact) in facts.iter().enumerate() {
            check_fact(fact, i + 1)?;
            if by_id.insert(fact.id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    id: fact.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Corpus { facts, by_id })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        Corpus::parse(&text)
    }

    /// Parses line-delimited `{"id": .., "text": ..}` records. Error line
    /// numbers refer to physical lines.
    pub fn parse(text: &str) -> Result<Self> {
        let (_, records) = io::parse_jsonl::<Fact>(text)?;
        let mut facts = Vec::with_capacity(records.len());
        let mut by_id = HashMap::with_capacity(records.len());
        for (line, fact) in records {
            check_fact(&fact, line)?;
            if by_id.insert(fact.id.clone(), facts.len()).is_some() {
                return Err(Error::DuplicateId { id: fact.id, line });
            }
            facts.push(fact);
        }
        Ok(Corpus { facts, by_id })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for fact in &self.facts {
            out.push_str(&serde_json::to_string(fact).expect("fact serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_jsonl().as_bytes())
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Fact> {
        self.by_id.get(id).map(|&i| &self.facts[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::load(path)
}

fn check_fact(fact: &Fact, line: usize) -> Result<()> {
    if fact.id.is_empty() {
        return Err(Error::parse(line, "fact id is empty"));
    }
    if fact.text.trim().is_empty() {
        return Err(Error::parse(line, format!("fact {:?} has empty text", fact.id)));
    }
    Ok(())
}

/// A line of a questions / gold file. The gold fact ids are optional so the
/// same format serves for unlabelled question sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub qid: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact2: Option<String>,
}

impl QuestionRecord {
    pub fn qa(&self) -> QaPair {
        QaPair::new(&self.qid, &self.question, &self.answer)
    }
}

pub fn parse_questions(text: &str) -> Result<Vec<QuestionRecord>> {
    let (_, records) = io::parse_jsonl::<QuestionRecord>(text)?;
    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, rec) in records {
        if rec.qid.is_empty() {
            return Err(Error::parse(line, "qid is empty"));
        }
        if rec.question.trim().is_empty() || rec.answer.trim().is_empty() {
            return Err(Error::parse(
                line,
                format!("question {:?} has empty question or answer", rec.qid),
            ));
        }
        if seen.insert(rec.qid.clone(), line).is_some() {
            return Err(Error::DuplicateId { id: rec.qid, line });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_questions(path: &Path) -> Result<Vec<QuestionRecord>> {
    parse_questions(&io::read_to_string(path)?)
}
