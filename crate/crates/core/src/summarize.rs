//! TextRank extractive summarization and the opinion-classification
//! dataset builder.
//!
//! Sentence similarity is the classic content-overlap measure:
//! `|shared word types| / (log|Si| + log|Sj|)` for sentences of at least
//! two words. Ranking is damped power iteration over the resulting
//! undirected weighted graph; selection is greedy by score with ties broken
//! by earlier document position, and the summary keeps original sentence
//! order.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ingest::{LegalCase, OpinionKind};
use crate::sentences::segment;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Binary label of a classification record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpinionLabel {
    Majority,
    Dissent,
}

impl OpinionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            OpinionLabel::Majority => "majority",
            OpinionLabel::Dissent => "dissent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "majority" => Some(OpinionLabel::Majority),
            "dissent" => Some(OpinionLabel::Dissent),
            _ => None,
        }
    }
}

/// One summarized, labeled opinion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationRecord {
    pub text: String,
    pub label: OpinionLabel,
    pub case_id: u64,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad dataset line {line}: {reason}")]
    BadLine { line: usize, reason: String },
}

fn sentence_words(sentence: &str) -> Vec<String> {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// Content-overlap similarity between two tokenized sentences.
pub fn sentence_similarity(a: &[String], b: &[String]) -> f64 {
    if a.len() < 2 || b.len() < 2 {
        return 0.0;
    }
    let types_a: HashSet<&String> = a.iter().collect();
    let types_b: HashSet<&String> = b.iter().collect();
    let overlap = types_a.intersection(&types_b).count();
    overlap as f64 / ((a.len() as f64).ln() + (b.len() as f64).ln())
}

/// Result of the power iteration: final scores plus the L∞ distance
/// between consecutive iterates, one entry per iteration.
#[derive(Debug, Clone)]
pub struct RankResult {
    pub scores: Vec<f64>,
    pub deltas: Vec<f64>,
}

/// Damped power iteration over the sentence-similarity graph.
pub fn rank_sentences(
    sentences: &[String],
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> RankResult {
    let n = sentences.len();
    if n == 0 {
        return RankResult {
            scores: Vec::new(),
            deltas: Vec::new(),
        };
    }
    let words: Vec<Vec<String>> = sentences.iter().map(|s| sentence_words(s)).collect();
    let mut weights = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = sentence_similarity(&words[i], &words[j]);
            weights[i][j] = w;
            weights[j][i] = w;
        }
    }
    let out_sums: Vec<f64> = weights.iter().map(|row| row.iter().sum()).collect();

    let mut scores = vec![1.0f64; n];
    let mut deltas = Vec::new();
    for _ in 0..max_iter {
        let mut next = vec![1.0 - damping; n];
        for j in 0..n {
            if out_sums[j] <= 0.0 {
                continue;
            }
            let share = damping * scores[j] / out_sums[j];
            for i in 0..n {
                next[i] += share * weights[j][i];
            }
        }
        let delta = scores
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        deltas.push(delta);
        scores = next;
        if delta <= tol {
            break;
        }
    }
    RankResult { scores, deltas }
}

/// Indices of the sentences a summary keeps, in original order.
///
/// Greedy by descending score (earlier position wins ties) until adding the
/// next sentence would exceed `target_words`; always keeps at least one.
pub fn select_sentences(
    sentences: &[String],
    scores: &[f64],
    target_words: usize,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut selected = Vec::new();
    let mut words = 0usize;
    for idx in order {
        let len = sentences[idx].split_whitespace().count();
        if selected.is_empty() || words + len <= target_words {
            selected.push(idx);
            words += len;
            if words >= target_words {
                break;
            }
        } else {
            break;
        }
    }
    selected.sort_unstable();
    selected
}

/// Extractive TextRank summary of `text`.
pub fn textrank_summarize(
    text: &str,
    target_words: usize,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> String {
    let sentences = segment(text);
    if sentences.is_empty() {
        return String::new();
    }
    let ranked = rank_sentences(&sentences, damping, tol, max_iter);
    let selected = select_sentences(&sentences, &ranked.scores, target_words);
    selected
        .iter()
        .map(|&i| sentences[i].as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One record per majority/dissent opinion, summarized; other kinds are
/// excluded. Order is case order, then opinion order.
pub fn build_classification_dataset(
    cases: &[LegalCase],
    target_words: usize,
) -> Vec<ClassificationRecord> {
    let mut records = Vec::new();
    for case in cases {
        for opinion in &case.opinions {
            let label = match opinion.kind {
                OpinionKind::Majority => OpinionLabel::Majority,
                OpinionKind::Dissent => OpinionLabel::Dissent,
                OpinionKind::Other(_) => continue,
            };
            let text = textrank_summarize(
                &opinion.text,
                target_words,
                DEFAULT_DAMPING,
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
            );
            records.push(ClassificationRecord {
                text,
                label,
                case_id: case.id,
            });
        }
    }
    records
}

fn flatten_field(text: &str) -> String {
    text.split(['\t', '\n', '\r'])
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Write the tab-separated classification dataset with its header line.
pub fn write_classification_tsv(
    records: &[ClassificationRecord],
    path: &Path,
) -> Result<(), DatasetError> {
    let io_err = |e: std::io::Error| DatasetError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "text\tlabel\tcase_id").map_err(io_err)?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}",
            flatten_field(&r.text),
            r.label.as_str(),
            r.case_id
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Read a classification dataset written by [`write_classification_tsv`].
pub fn read_classification_tsv(path: &Path) -> Result<Vec<ClassificationRecord>, DatasetError> {
    let io_err = |e: std::io::Error| DatasetError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if i == 0 {
            continue; // header
        }
        let mut parts = line.splitn(3, '\t');
        let (text, label, case_id) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(l), Some(c)) => (t, l, c),
            _ => {
                return Err(DatasetError::BadLine {
                    line: i + 1,
                    reason: "expected 3 tab-separated fields".into(),
                })
            }
        };
        let label = OpinionLabel::parse(label).ok_or_else(|| DatasetError::BadLine {
            line: i + 1,
            reason: format!("unknown label {label}"),
        })?;
        let case_id = case_id.parse().map_err(|_| DatasetError::BadLine {
            line: i + 1,
            reason: "case_id not an integer".into(),
        })?;
        records.push(ClassificationRecord {
            text: text.to_string(),
            label,
            case_id,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Opinion;
    use proptest::prelude::*;

    pub const SIX_SENTENCES: &str = "The district court granted summary judgment to the seller. \
        The buyer appealed the summary judgment ruling on the contract. \
        Forfeiture of the down payment was the central contract question. \
        Precedent requires the court to weigh forfeiture against damages. \
        The appellate court reversed the judgment of the district court. \
        Costs were assessed against the seller on remand.";

    #[test]
    fn single_sentence_returned_verbatim() {
        let text = "The court affirmed the judgment.";
        assert_eq!(
            textrank_summarize(text, 150, DEFAULT_DAMPING, DEFAULT_TOL, DEFAULT_MAX_ITER),
            text
        );
    }

    #[test]
    fn empty_text_empty_summary() {
        assert_eq!(
            textrank_summarize("", 150, DEFAULT_DAMPING, DEFAULT_TOL, DEFAULT_MAX_ITER),
            ""
        );
    }

    /// Independent dense oracle: similarity matrix built token-by-token,
    /// plain matrix-vector power iteration.
    fn oracle_scores(sentences: &[String], damping: f64, iters: usize) -> Vec<f64> {
        let n = sentences.len();
        let toks: Vec<Vec<String>> = sentences
            .iter()
            .map(|s| {
                s.split(|c: char| !c.is_alphanumeric())
                    .filter(|w| !w.is_empty())
                    .map(|w| w.to_lowercase())
                    .collect()
            })
            .collect();
        let mut m = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j || toks[i].len() < 2 || toks[j].len() < 2 {
                    continue;
                }
                let mut overlap = 0usize;
                let mut seen: Vec<&String> = Vec::new();
                for w in &toks[i] {
                    if seen.contains(&w) {
                        continue;
                    }
                    seen.push(w);
                    if toks[j].contains(w) {
                        overlap += 1;
                    }
                }
                m[i][j] =
                    overlap as f64 / ((toks[i].len() as f64).ln() + (toks[j].len() as f64).ln());
            }
        }
        let col_sums: Vec<f64> = (0..n).map(|j| (0..n).map(|i| m[i][j]).sum()).collect();
        let mut v = vec![1.0f64; n];
        for _ in 0..iters {
            let mut next = vec![1.0 - damping; n];
            for i in 0..n {
                for j in 0..n {
                    if col_sums[j] > 0.0 {
                        next[i] += damping * m[i][j] * v[j] / col_sums[j];
                    }
                }
            }
            v = next;
        }
        v
    }

    #[test]
    fn matches_dense_power_iteration_oracle() {
        let sentences = segment(SIX_SENTENCES);
        assert_eq!(sentences.len(), 6);
        let ranked = rank_sentences(&sentences, DEFAULT_DAMPING, 0.0, 200);
        let expected = oracle_scores(&sentences, DEFAULT_DAMPING, 200);
        for (got, want) in ranked.scores.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        let sel_impl = select_sentences(&sentences, &ranked.scores, 30);
        let sel_oracle = select_sentences(&sentences, &expected, 30);
        assert_eq!(sel_impl, sel_oracle);
    }

    #[test]
    fn iteration_is_contracting() {
        let sentences = segment(SIX_SENTENCES);
        let ranked = rank_sentences(&sentences, DEFAULT_DAMPING, 1e-10, 500);
        assert!(*ranked.deltas.last().unwrap() <= 1e-10);
        assert!(ranked.scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn uniform_graph_gives_equal_scores() {
        // identical sentences: all pairwise similarities equal
        let sentences: Vec<String> =
            vec!["alpha beta gamma delta".to_string(); 5];
        let ranked = rank_sentences(&sentences, DEFAULT_DAMPING, 1e-12, 1000);
        let first = ranked.scores[0];
        for s in &ranked.scores {
            assert!((s - first).abs() < 1e-9);
        }
    }

    #[test]
    fn summary_length_bounded() {
        // ~2000-word fixture from repeated sentence templates
        let mut text = String::new();
        for i in 0..100 {
            text.push_str(&format!(
                "The court considered argument number {i} about the disputed contract terms in detail. "
            ));
        }
        let target = 150;
        let summary =
            textrank_summarize(&text, target, DEFAULT_DAMPING, DEFAULT_TOL, DEFAULT_MAX_ITER);
        let words = summary.split_whitespace().count();
        let longest = segment(&text)
            .iter()
            .map(|s| s.split_whitespace().count())
            .max()
            .unwrap();
        assert!(words >= 1);
        assert!(words <= target + longest);
    }

    #[test]
    fn summary_is_subsequence_of_input() {
        let sentences = segment(SIX_SENTENCES);
        let summary = textrank_summarize(
            SIX_SENTENCES,
            25,
            DEFAULT_DAMPING,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        );
        let picked: Vec<&str> = summary.split(". ").collect();
        assert!(!picked.is_empty());
        // every selected sentence appears in the original, in order
        let mut pos = 0;
        for s in segment(&summary) {
            let found = sentences[pos..].iter().position(|orig| *orig == s);
            assert!(found.is_some(), "sentence {s:?} out of order or missing");
            pos += found.unwrap() + 1;
        }
    }

    fn case_with(kinds: &[OpinionKind]) -> LegalCase {
        LegalCase {
            id: 1,
            decision_date: None,
            raw_decision_date: None,
            jurisdiction_name: None,
            opinions: kinds
                .iter()
                .map(|k| Opinion {
                    kind: k.clone(),
                    author: None,
                    text: "The court affirmed. The appeal was denied.".to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn one_record_per_majority_or_dissent() {
        let case = case_with(&[OpinionKind::Majority, OpinionKind::Dissent]);
        let records = build_classification_dataset(&[case], 150);
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].label, OpinionLabel::Majority);
        assert_eq!(records[1].label, OpinionLabel::Dissent);
    }

    #[test]
    fn other_kinds_excluded() {
        let case = case_with(&[OpinionKind::Other("concurrence".into())]);
        assert!(build_classification_dataset(&[case], 150).is_empty());
    }

    #[test]
    fn tsv_round_trip_flattens_tabs() {
        let records = vec![ClassificationRecord {
            text: "has\ttab and\nnewline".into(),
            label: OpinionLabel::Dissent,
            case_id: 7,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.tsv");
        write_classification_tsv(&records, &path).unwrap();
        let back = read_classification_tsv(&path).unwrap();
        assert_eq!(back[0].text, "has tab and newline");
        assert_eq!(back[0].label, OpinionLabel::Dissent);
        assert_eq!(back[0].case_id, 7);
    }

    proptest! {
        #[test]
        fn selection_never_empty_and_in_order(
            scores in proptest::collection::vec(0.0f64..10.0, 1..20),
            target in 1usize..60
        ) {
            let sentences: Vec<String> = (0..scores.len())
                .map(|i| format!("Sentence number {i} has exactly six words."))
                .collect();
            let sel = select_sentences(&sentences, &scores, target);
            prop_assert!(!sel.is_empty());
            prop_assert!(sel.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
