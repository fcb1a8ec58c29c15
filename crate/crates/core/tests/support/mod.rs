//! Corpus generators, a brute-force BM25 oracle and a CLI runner shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hopchain::config::CONFIG_ENV;
use hopchain::corpus::{Corpus, Fact, QuestionRecord, Tokenizer};
use hopchain::lexical_index::Bm25Params;
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn hopchain() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hopchain"));
    c.env_remove(CONFIG_ENV);
    c
}

/// Runs the binary with `args` and returns its output, panicking with stderr
/// on a nonzero exit.
pub fn run_ok(args: &[&str]) -> Output {
    let out = hopchain().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "hopchain {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).unwrap());
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

pub fn write_embeddings(path: &Path, dim: usize, rows: &[(String, Vec<f64>)]) {
    let mut s = format!("#dim={dim}\n");
    for (id, v) in rows {
        let vals: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        writeln!(s, "{id}\t{}", vals.join(" ")).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

pub fn question(qid: &str, q: &str, a: &str, f1: &str, f2: &str) -> QuestionRecord {
    QuestionRecord {
        qid: qid.into(),
        question: q.into(),
        answer: a.into(),
        fact1: Some(f1.into()),
        fact2: Some(f2.into()),
    }
}

pub struct Planted {
    pub corpus: PathBuf,
    pub questions: PathBuf,
    pub fact_embeddings: Option<PathBuf>,
    pub query_embeddings: Option<PathBuf>,
}

fn filler(rng: &mut impl Rng, words: usize) -> String {
    (0..words)
        .map(|_| format!("fill{}", rng.random_range(0..300)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 500 facts and 50 questions. Question `i` asks about `xq_i yq_i` with answer
/// `za_i`; its gold chain is `A_i = "xq_i yq_i produces bw_i"` then
/// `B_i = "bw_i generates za_i"`, linked by the bridge word `bw_i`. Each
/// question has three distractors, each sharing one of `xq_i`, `yq_i`, `za_i`;
/// the rest is filler.
pub fn planted_syntactic(dir: &Path, rng: &mut impl Rng) -> Planted {
    let mut facts = Vec::new();
    let mut questions = Vec::new();
    for i in 0..50 {
        facts.push(Fact::new(format!("A{i:02}"), format!("xq{i} yq{i} produces bw{i}")));
        facts.push(Fact::new(format!("B{i:02}"), format!("bw{i} generates za{i}")));
        for (k, w) in [format!("xq{i}"), format!("yq{i}"), format!("za{i}")]
            .iter()
            .enumerate()
        {
            facts.push(Fact::new(format!("D{i:02}{k}"), format!("{w} {}", filler(rng, 4))));
        }
        questions.push(question(
            &format!("q{i:02}"),
            &format!("What do xq{i} and yq{i} lead to?"),
            &format!("za{i}"),
            &format!("A{i:02}"),
            &format!("B{i:02}"),
        ));
    }
    let mut n = 0;
    while facts.len() < 500 {
        facts.push(Fact::new(format!("F{n:03}"), filler(rng, 6)));
        n += 1;
    }
    let corpus = dir.join("planted_corpus.jsonl");
    let qpath = dir.join("planted_questions.jsonl");
    write_jsonl(&corpus, &facts);
    write_jsonl(&qpath, &questions);
    Planted {
        corpus,
        questions: qpath,
        fact_embeddings: None,
        query_embeddings: None,
    }
}

pub const SEMANTIC_DIM: usize = 24;

/// 10 questions whose gold first fact shares no word with the question or
/// answer, so only embedding geometry reaches it. Query `i` and `A_i` are the
/// unit vector `e_i`; `B_i` is `e_{10+i}`. Distractors overlap the question
/// lexically and live in the remaining four dimensions.
pub fn planted_semantic(dir: &Path, rng: &mut impl Rng) -> Planted {
    let mut facts = Vec::new();
    let mut emb = Vec::new();
    let mut qemb = Vec::new();
    let mut questions = Vec::new();
    let unit = |k: usize| {
        let mut v = vec![0.0; SEMANTIC_DIM];
        v[k] = 1.0;
        v
    };
    for i in 0..10 {
        facts.push(Fact::new(format!("A{i}"), format!("pk{i} rk{i} produces bv{i}")));
        emb.push((format!("A{i}"), unit(i)));
        facts.push(Fact::new(format!("B{i}"), format!("bv{i} generates zb{i}")));
        emb.push((format!("B{i}"), unit(10 + i)));
        for k in 0..6 {
            let id = format!("D{i}{k}");
            facts.push(Fact::new(&id, format!("mq{i} zb{i} {}", filler(rng, 3))));
            let mut v = vec![0.0; SEMANTIC_DIM];
            for x in &mut v[20..] {
                *x = rng.random_range(-0.5..0.5);
            }
            emb.push((id, v));
        }
        questions.push(question(
            &format!("s{i}"),
            &format!("What do mq{i} and nq{i} lead to?"),
            &format!("zb{i}"),
            &format!("A{i}"),
            &format!("B{i}"),
        ));
        qemb.push((format!("s{i}"), unit(i)));
    }
    let corpus = dir.join("semantic_corpus.jsonl");
    let qpath = dir.join("semantic_questions.jsonl");
    let fe = dir.join("semantic_facts.emb");
    let qe = dir.join("semantic_queries.emb");
    write_jsonl(&corpus, &facts);
    write_jsonl(&qpath, &questions);
    write_embeddings(&fe, SEMANTIC_DIM, &emb);
    write_embeddings(&qe, SEMANTIC_DIM, &qemb);
    Planted {
        corpus,
        questions: qpath,
        fact_embeddings: Some(fe),
        query_embeddings: Some(qe),
    }
}

/// Random text over a skewed vocabulary of `vocab` words, with stopwords mixed in.
pub fn random_text(rng: &mut impl Rng, vocab: usize, len: usize) -> String {
    const STOP: [&str; 6] = ["the", "of", "is", "and", "a", "to"];
    (0..len)
        .map(|_| {
            if rng.random_bool(0.2) {
                STOP.choose(rng).unwrap().to_string()
            } else {
                // squaring skews draws towards low word ids
                let u: f64 = rng.random();
                format!("w{}", (u * u * vocab as f64) as usize)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_corpus(rng: &mut impl Rng, n: usize, vocab: usize) -> Corpus {
    let facts = (0..n)
        .map(|i| {
            let len = rng.random_range(3..15);
            Fact::new(format!("f{i:04}"), random_text(rng, vocab, len))
        })
        .collect();
    Corpus::new(facts).unwrap()
}

/// Questions whose gold chain is a random pair of facts sharing a word; the
/// question takes words from the first fact and the answer from the second.
pub fn random_questions(rng: &mut impl Rng, corpus: &Corpus, tok: &Tokenizer, n: usize) -> Vec<QuestionRecord> {
    let facts = corpus.facts();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < n && attempts < n * 200 {
        attempts += 1;
        let a = facts.choose(rng).unwrap();
        let b = facts.choose(rng).unwrap();
        let (ta, tb) = (tok.tokenize(&a.text), tok.tokenize(&b.text));
        if a.id == b.id || !ta.overlaps(&tb) {
            continue;
        }
        let qa: Vec<&str> = ta.iter().filter(|w| !tb.contains(w)).collect();
        let ans: Vec<&str> = tb.iter().filter(|w| !ta.contains(w)).collect();
        if qa.is_empty() || ans.is_empty() {
            continue;
        }
        out.push(question(
            &format!("r{:03}", out.len()),
            &format!("How does {} relate?", qa.choose(rng).unwrap()),
            ans.choose(rng).unwrap(),
            &a.id,
            &b.id,
        ));
    }
    out
}

/// Scores every document from scratch: no postings, no shared state with the
/// index under test.
pub fn bm25_oracle(corpus: &Corpus, tok: &Tokenizer, p: Bm25Params, query: &[String]) -> Vec<(String, f64)> {
    let docs: Vec<Vec<String>> = corpus.facts().iter().map(|f| tok.terms(&f.text)).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut q: Vec<&String> = query.iter().collect();
    q.sort();
    q.dedup();
    let df: HashMap<&String, usize> = q
        .iter()
        .map(|t| (*t, docs.iter().filter(|d| d.contains(t)).count()))
        .collect();
    let mut scored: Vec<(String, f64)> = Vec::new();
    for (fact, d) in corpus.facts().iter().zip(&docs) {
        let mut s = 0.0;
        for t in &q {
            let tf = d.iter().filter(|w| w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let dfi = df[t] as f64;
            let idf = (1.0 + (n - dfi + 0.5) / (dfi + 0.5)).ln();
            s += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * d.len() as f64 / avg));
        }
        if s > 0.0 {
            scored.push((fact.id.clone(), s));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}
