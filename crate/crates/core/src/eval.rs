//! Gold retrieval rate and run comparison.
//!
//! A question counts as a hit when its gold chain appears among the top-`k`
//! predicted chains in either orientation. Questions without predictions are
//! misses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chain_builder::ChainKey;
pub use crate::chain_builder::Predictions;
use crate::corpus::QuestionRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldChain {
    pub qid: String,
    pub f1: String,
    pub f2: String,
}

impl GoldChain {
    pub fn new(qid: impl Into<String>, f1: impl Into<String>, f2: impl Into<String>) -> Self {
        GoldChain {
            qid: qid.into(),
            f1: f1.into(),
            f2: f2.into(),
        }
    }

    pub fn key(&self) -> ChainKey {
        ChainKey::new(&self.f1, &self.f2)
    }

    pub fn reversed(&self) -> GoldChain {
        GoldChain::new(&self.qid, &self.f2, &self.f1)
    }
}

/// Extracts gold chains from question records; every record must name both facts.
pub fn gold_from_records(records: &[QuestionRecord]) -> Result<Vec<GoldChain>> {
    records
        .iter()
        .map(|r| match (&r.fact1, &r.fact2) {
            (Some(f1), Some(f2)) if f1 != f2 => Ok(GoldChain::new(&r.qid, f1, f2)),
            (Some(_), Some(_)) => Err(Error::Precondition(format!("gold chain for {} repeats a fact", r.qid))),
            _ => Err(Error::Precondition(format!("question {} has no gold chain", r.qid))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub hit: bool,
    /// 1-based rank of the first chain matching the gold pair, anywhere in
    /// the prediction list.
    pub rank_of_gold: Option<usize>,
    /// False when the question had no prediction entry at all.
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_used: usize,
    pub questions: usize,
    pub hits: usize,
    pub retrieval_rate: f64,
    pub per_question: BTreeMap<String, QuestionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

impl EvalReport {
    pub fn missing(&self) -> impl Iterator<Item = &str> {
        self.per_question
            .iter()
            .filter(|(_, o)| !o.predicted)
            .map(|(q, _)| q.as_str())
    }

    pub fn question_ids(&self) -> BTreeSet<&str> {
        self.per_question.keys().map(String::as_str).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("k\tquestions\thits\tmissing\tgold_rr(%)\n");
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            self.k_used,
            self.questions,
            self.hits,
            self.missing().count(),
            percent(self.retrieval_rate)
        )
        .unwrap();
        out
    }
}

fn percent(rate: f64) -> String {
    format!("{:.1}", rate * 100.0)
}

pub fn gold_retrieval_rate(predictions: &Predictions, gold: &[GoldChain], k: usize) -> Result<EvalReport> {
    if k < 1 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let mut per_question = BTreeMap::new();
    for (line, g) in gold.iter().enumerate() {
        let key = g.key();
        let outcome = match predictions.get(&g.qid) {
            Some(chains) => {
                let rank = chains.iter().position(|c| c.key() == key).map(|p| p + 1);
                QuestionOutcome {
                    hit: rank.is_some_and(|r| r <= k),
                    rank_of_gold: rank,
                    predicted: true,
                }
            }
            None => QuestionOutcome {
                hit: false,
                rank_of_gold: None,
                predicted: false,
            },
        };
        if per_question.insert(g.qid.clone(), outcome).is_some() {
            return Err(Error::DuplicateId {
                id: g.qid.clone(),
                line: line + 1,
            });
        }
    }
    let questions = per_question.len();
    let hits = per_question.values().filter(|o| o.hit).count();
    let retrieval_rate = if questions == 0 {
        0.0
    } else {
        hits as f64 / questions as f64
    };
    Ok(EvalReport {
        k_used: k,
        questions,
        hits,
        retrieval_rate,
        per_question,
        config_digest: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub name: String,
    pub k_used: usize,
    pub questions: usize,
    pub hits: usize,
    pub retrieval_rate: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDelta {
    pub from: String,
    pub to: String,
    /// `to` rate minus `from` rate, as a fraction.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<RunRow>,
    pub deltas: Vec<RunDelta>,
    pub best: String,
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let mut out = String::from("run\tk\tquestions\thits\tgold_rr(%)\tbest\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.name,
                r.k_used,
                r.questions,
                r.hits,
                percent(r.retrieval_rate),
                if r.best { "*" } else { "" }
            )
            .unwrap();
        }
        if !self.deltas.is_empty() {
            out.push_str("\nfrom\tto\tdelta(pp)\n");
            for d in &self.deltas {
                writeln!(out, "{}\t{}\t{:+.1}", d.from, d.to, d.delta * 100.0).unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
        s.push('\n');
        s
    }
}

/// Tabulates retrieval rates of several runs over the same question set,
/// with every pairwise delta (later run minus earlier run).
pub fn compare_runs(reports: &[(String, EvalReport)]) -> Result<Comparison> {
    let Some((first_name, first)) = reports.first() else {
        return Err(Error::Precondition("no reports to compare".into()));
    };
    let ids = first.question_ids();
    for (name, r) in &reports[1..] {
        let other = r.question_ids();
        if other != ids {
            return Err(Error::QuestionSetMismatch {
                left_name: first_name.clone(),
                right_name: name.clone(),
                only_left: ids.difference(&other).map(|s| s.to_string()).collect(),
                only_right: other.difference(&ids).map(|s| s.to_string()).collect(),
            });
        }
    }
    let best_idx = reports.iter().enumerate().fold(0, |best, (i, (_, r))| {
        if r.retrieval_rate > reports[best].1.retrieval_rate {
            i
        } else {
            best
        }
    });
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, (name, r))| RunRow {
            name: name.clone(),
            k_used: r.k_used,
            questions: r.questions,
            hits: r.hits,
            retrieval_rate: r.retrieval_rate,
            best: i == best_idx,
        })
        .collect();
    let mut deltas = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            deltas.push(RunDelta {
                from: reports[i].0.clone(),
                to: reports[j].0.clone(),
                delta: reports[j].1.retrieval_rate - reports[i].1.retrieval_rate,
            });
        }
    }
    Ok(Comparison {
        rows,
        deltas,
        best: reports[best_idx].0.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_builder::{ChainCandidate, ChainSource};
    use proptest::prelude::*;

    fn c(f1: &str, f2: &str) -> ChainCandidate {
        ChainCandidate::new(f1, f2, 1.0, 1.0, ChainSource::Syntactic)
    }

    fn report_with_rate(questions: usize, hits: usize) -> EvalReport {
        let gold: Vec<_> = (0..questions)
            .map(|i| GoldChain::new(format!("q{i}"), "a", "b"))
            .collect();
        let preds: Predictions = (0..hits).map(|i| (format!("q{i}"), vec![c("a", "b")])).collect();
        gold_retrieval_rate(&preds, &gold, 10).unwrap()
    }

    #[test]
    fn reverse_orientation_counts() {
        let preds: Predictions = [("q".to_string(), vec![c("x", "y"), c("A", "C"), c("B", "A")])].into();
        let r = gold_retrieval_rate(&preds, &[GoldChain::new("q", "A", "B")], 10).unwrap();
        assert_eq!(
            r.per_question["q"],
            QuestionOutcome {
                hit: true,
                rank_of_gold: Some(3),
                predicted: true
            }
        );
    }

    #[test]
    fn rate_is_hits_over_questions() {
        assert_eq!(report_with_rate(4, 2).retrieval_rate, 0.5);
    }

    #[test]
    fn partial_matches_miss() {
        let preds: Predictions = [("q".to_string(), vec![c("A", "C"), c("C", "B")])].into();
        let r = gold_retrieval_rate(&preds, &[GoldChain::new("q", "A", "B")], 10).unwrap();
        assert!(!r.per_question["q"].hit);
        assert_eq!(r.retrieval_rate, 0.0);
    }

    #[test]
    fn beyond_k_is_ranked_but_missed() {
        let preds: Predictions = [("q".to_string(), vec![c("x", "y"), c("A", "B")])].into();
        let r = gold_retrieval_rate(&preds, &[GoldChain::new("q", "A", "B")], 1).unwrap();
        assert_eq!(
            r.per_question["q"],
            QuestionOutcome {
                hit: false,
                rank_of_gold: Some(2),
                predicted: true
            }
        );
    }

    #[test]
    fn missing_questions_count_as_misses() {
        let r = gold_retrieval_rate(&Predictions::new(), &[GoldChain::new("q", "A", "B")], 5).unwrap();
        assert_eq!(r.missing().collect::<Vec<_>>(), vec!["q"]);
        assert_eq!(r.hits, 0);
    }

    #[test]
    fn k_zero_rejected() {
        assert!(gold_retrieval_rate(&Predictions::new(), &[], 0).is_err());
    }

    #[test]
    fn compare_delta_and_best() {
        let reports = vec![
            ("syntactic".to_string(), report_with_rate(1000, 311)),
            ("expanded".to_string(), report_with_rate(1000, 465)),
        ];
        let cmp = compare_runs(&reports).unwrap();
        assert_eq!(cmp.best, "expanded");
        assert!(cmp.rows[1].best && !cmp.rows[0].best);
        assert_eq!(cmp.deltas.len(), 1);
        assert!((cmp.deltas[0].delta - 0.154).abs() < 1e-12);
        assert!(cmp.to_table().contains("syntactic\texpanded\t+15.4"));
        assert!(cmp.to_table().contains("46.5\t*"));
    }

    #[test]
    fn compare_single_and_identical() {
        let one = compare_runs(&[("a".to_string(), report_with_rate(10, 3))]).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert!(one.deltas.is_empty());
        let r = report_with_rate(10, 3);
        let two = compare_runs(&[("a".to_string(), r.clone()), ("b".to_string(), r)]).unwrap();
        assert_eq!(two.deltas[0].delta, 0.0);
    }

    #[test]
    fn compare_rejects_mismatched_questions() {
        let err = compare_runs(&[
            ("a".to_string(), report_with_rate(3, 1)),
            ("b".to_string(), report_with_rate(4, 1)),
        ])
        .unwrap_err();
        match err {
            Error::QuestionSetMismatch {
                only_left, only_right, ..
            } => {
                assert!(only_left.is_empty());
                assert_eq!(only_right, vec!["q3"]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn report_json_round_trip() {
        let r = report_with_rate(5, 2);
        assert_eq!(EvalReport::from_json(&r.to_json()).unwrap(), r);
    }

    fn arb_case() -> impl Strategy<Value = (Predictions, Vec<GoldChain>)> {
        let ids = || proptest::sample::select(vec!["a", "b", "c", "d", "e"]);
        let chain = (ids(), ids()).prop_filter("distinct", |(a, b)| a != b);
        proptest::collection::vec((proptest::collection::vec(chain.clone(), 0..12), chain), 1..12).prop_map(|qs| {
            let mut preds = Predictions::new();
            let mut gold = Vec::new();
            for (i, (list, (g1, g2))) in qs.into_iter().enumerate() {
                let qid = format!("q{i}");
                if i % 5 != 4 {
                    preds.insert(qid.clone(), list.into_iter().map(|(a, b)| c(a, b)).collect());
                }
                gold.push(GoldChain::new(qid, g1, g2));
            }
            (preds, gold)
        })
    }

    proptest! {
        #[test]
        fn orientation_invariance((preds, gold) in arb_case(), k in 1usize..15) {
            let reversed: Vec<_> = gold.iter().map(GoldChain::reversed).collect();
            prop_assert_eq!(gold_retrieval_rate(&preds, &gold, k).unwrap(), gold_retrieval_rate(&preds, &reversed, k).unwrap());
        }

        #[test]
        fn rate_monotone_in_k((preds, gold) in arb_case(), k in 1usize..15) {
            let a = gold_retrieval_rate(&preds, &gold, k).unwrap();
            let b = gold_retrieval_rate(&preds, &gold, k + 1).unwrap();
            prop_assert!(a.retrieval_rate <= b.retrieval_rate);
            prop_assert!((0.0..=1.0).contains(&a.retrieval_rate));
            let ranked_within = a.per_question.values().filter(|o| o.rank_of_gold.is_some_and(|r| r <= k)).count();
            prop_assert_eq!(a.hits, ranked_within);
            prop_assert!((a.retrieval_rate - a.hits as f64 / a.questions as f64).abs() < 1e-12);
        }
    }
}
