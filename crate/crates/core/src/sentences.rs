//! Text cleaning, rule-based sentence segmentation, document assembly and
//! pretraining file output.
//!
//! Output format is fixed: UTF-8, LF endings, one sentence per line,
//! exactly one blank line between documents, no blank line after the last
//! document, rotation into `part-NNNNN.txt` files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ingest::Opinion;

/// Abbreviations that never end a sentence.
const PROTECTED_ABBREVIATIONS: &[&str] = &[
    "Dr.", "Mr.", "Mrs.", "Ms.", "St.", "No.", "U.S.", "v.", "Inc.", "Co.", "Jr.", "Sr.", "J.",
    "JJ.",
];

/// Quoted spans shorter than this many characters are never split.
const SHORT_QUOTE_LIMIT: usize = 40;

/// Per-sentence quality thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityRules {
    pub min_tokens: usize,
    pub min_alpha_ratio: f64,
    pub max_chars: usize,
}

impl Default for QualityRules {
    fn default() -> Self {
        QualityRules {
            min_tokens: 5,
            min_alpha_ratio: 0.5,
            max_chars: 1000,
        }
    }
}

/// Minimum sentences per emitted pretraining document.
pub const MIN_DOC_SENTENCES: usize = 10;

/// Default rotation limit, ~43MB per output file.
pub const DEFAULT_MAX_FILE_BYTES: u64 = 43 * (1 << 20);

/// One pretraining document: a maximal run of quality sentences from a
/// single opinion. Always holds at least [`MIN_DOC_SENTENCES`] sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceDoc {
    pub sentences: Vec<String>,
    pub source_case_id: u64,
    pub source_opinion_index: usize,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Normalize Unicode whitespace to ASCII spaces, collapse runs, strip
/// control characters and trim.
pub fn clean_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() {
            // dropped outright
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

fn ends_with_protected(text: &str, punct_end: usize) -> bool {
    let head = &text[..punct_end];
    let word_start = head.rfind(' ').map(|i| i + 1).unwrap_or(0);
    let token = &text[word_start..punct_end];
    PROTECTED_ABBREVIATIONS.contains(&token)
}

/// Character positions lying inside a double-quoted span shorter than
/// [`SHORT_QUOTE_LIMIT`] characters.
fn short_quote_mask(chars: &[char]) -> Vec<bool> {
    let mut mask = vec![false; chars.len()];
    let quote_positions: Vec<usize> = chars
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == '"')
        .map(|(i, _)| i)
        .collect();
    for pair in quote_positions.chunks(2) {
        if let [open, close] = pair {
            if close - open < SHORT_QUOTE_LIMIT {
                for m in mask.iter_mut().take(*close).skip(*open) {
                    *m = true;
                }
            }
        }
    }
    mask
}

/// Split cleaned text into sentences.
///
/// A boundary is a `.`, `!` or `?` followed by whitespace and an ASCII
/// uppercase letter or digit, unless the terminating token is a protected
/// abbreviation or the position lies inside a short quoted span.
pub fn segment(text: &str) -> Vec<String> {
    let cleaned = clean_text(text);
    if cleaned.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = cleaned.chars().collect();
    let quote_mask = short_quote_mask(&chars);

    // byte offset of each char, for slicing
    let mut byte_of = Vec::with_capacity(chars.len() + 1);
    let mut b = 0;
    for c in &chars {
        byte_of.push(b);
        b += c.len_utf8();
    }
    byte_of.push(b);

    let mut sentences = Vec::new();
    let mut start = 0usize; // char index
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if (c == '.' || c == '!' || c == '?')
            && i + 2 < chars.len()
            && chars[i + 1] == ' '
            && (chars[i + 2].is_ascii_uppercase() || chars[i + 2].is_ascii_digit())
            && !quote_mask[i]
            && !(c == '.' && ends_with_protected(&cleaned, byte_of[i + 1]))
        {
            sentences.push(cleaned[byte_of[start]..byte_of[i + 1]].to_string());
            start = i + 2;
            i += 2;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        sentences.push(cleaned[byte_of[start]..].to_string());
    }
    sentences
}

/// True iff the sentence clears every quality threshold.
pub fn quality_filter(sentence: &str, rules: &QualityRules) -> bool {
    let tokens = sentence.split_whitespace().count();
    if tokens < rules.min_tokens {
        return false;
    }
    let total = sentence.chars().count();
    if total > rules.max_chars || total == 0 {
        return false;
    }
    let alpha = sentence.chars().filter(|c| c.is_alphabetic()).count();
    (alpha as f64) / (total as f64) >= rules.min_alpha_ratio
}

/// Assemble pretraining documents from opinions.
///
/// Within one opinion, each maximal run of consecutive surviving sentences
/// is a candidate; only runs of at least [`MIN_DOC_SENTENCES`] are kept.
pub fn build_documents<'a, I>(opinions: I, rules: &QualityRules) -> Vec<SentenceDoc>
where
    I: IntoIterator<Item = (u64, usize, &'a Opinion)>,
{
    let mut docs = Vec::new();
    for (case_id, op_index, opinion) in opinions {
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, docs: &mut Vec<SentenceDoc>| {
            if run.len() >= MIN_DOC_SENTENCES {
                docs.push(SentenceDoc {
                    sentences: std::mem::take(run),
                    source_case_id: case_id,
                    source_opinion_index: op_index,
                });
            } else {
                run.clear();
            }
        };
        for sentence in segment(&opinion.text) {
            if quality_filter(&sentence, rules) {
                run.push(sentence);
            } else {
                flush(&mut run, &mut docs);
            }
        }
        flush(&mut run, &mut docs);
    }
    docs
}

fn doc_block_bytes(doc: &SentenceDoc) -> u64 {
    doc.sentences.iter().map(|s| s.len() as u64 + 1).sum()
}

/// Write documents as rotated pretraining text files.
///
/// A document is never split across files; rotation happens when appending
/// the next document would push the current file past `max_file_bytes`.
pub fn write_pretrain_files(
    docs: &[SentenceDoc],
    out_dir: &Path,
    max_file_bytes: u64,
) -> Result<Vec<PathBuf>, PipelineError> {
    let io_err = |path: &Path, e: std::io::Error| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let mut written: Vec<PathBuf> = Vec::new();
    let mut writer: Option<(PathBuf, BufWriter<File>, u64)> = None;

    let cleanup = |written: &[PathBuf], current: Option<&PathBuf>| {
        if let Some(p) = current.or(written.last()) {
            let _ = fs::remove_file(p);
        }
    };

    for doc in docs {
        let block = doc_block_bytes(doc);
        let needs_new = match &writer {
            None => true,
            // +1 for the blank separator line
            Some((_, _, size)) => size + 1 + block > max_file_bytes,
        };
        if needs_new {
            if let Some((_, mut w, _)) = writer.take() {
                if let Err(e) = w.flush() {
                    cleanup(&written, None);
                    return Err(io_err(written.last().unwrap(), e));
                }
            }
            let path = out_dir.join(format!("part-{:05}.txt", written.len()));
            let f = File::create(&path).map_err(|e| io_err(&path, e))?;
            written.push(path.clone());
            writer = Some((path, BufWriter::new(f), 0));
        }
        let (path, w, size) = writer.as_mut().unwrap();
        let mut write_all = || -> std::io::Result<()> {
            if *size > 0 {
                w.write_all(b"\n")?;
                *size += 1;
            }
            for s in &doc.sentences {
                w.write_all(s.as_bytes())?;
                w.write_all(b"\n")?;
            }
            *size += block;
            Ok(())
        };
        if let Err(e) = write_all() {
            let p = path.clone();
            cleanup(&written, Some(&p));
            return Err(io_err(&p, e));
        }
    }
    if let Some((path, mut w, _)) = writer.take() {
        if let Err(e) = w.flush() {
            cleanup(&written, Some(&path));
            return Err(io_err(&path, e));
        }
    }
    Ok(written)
}

/// Read back rotated pretraining files into sentence lists, splitting on
/// blank lines. Inverse of [`write_pretrain_files`] up to provenance.
pub fn read_pretrain_files(paths: &[PathBuf]) -> Result<Vec<Vec<String>>, PipelineError> {
    let mut docs = Vec::new();
    for path in paths {
        let content = fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.clone(),
            source: e,
        })?;
        let mut current: Vec<String> = Vec::new();
        for line in content.lines() {
            if line.is_empty() {
                if !current.is_empty() {
                    docs.push(std::mem::take(&mut current));
                }
            } else {
                current.push(line.to_string());
            }
        }
        if !current.is_empty() {
            docs.push(current);
        }
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::OpinionKind;
    use proptest::prelude::*;

    fn opinion(text: &str) -> Opinion {
        Opinion {
            kind: OpinionKind::Majority,
            author: None,
            text: text.to_string(),
        }
    }

    #[test]
    fn segment_empty() {
        assert!(segment("").is_empty());
    }

    #[test]
    fn segment_no_terminator() {
        assert_eq!(
            segment("One sentence without terminator"),
            vec!["One sentence without terminator"]
        );
    }

    #[test]
    fn segment_protects_abbreviations() {
        assert_eq!(
            segment("Dr. Smith ruled. The case closed."),
            vec!["Dr. Smith ruled.", "The case closed."]
        );
    }

    #[test]
    fn segment_protects_citation_forms() {
        assert_eq!(
            segment("Buckingham v. Ryan was cited. No. 12 follows. U.S. Law applies."),
            vec![
                "Buckingham v. Ryan was cited.",
                "No. 12 follows.",
                "U.S. Law applies."
            ]
        );
    }

    #[test]
    fn segment_skips_short_quotes() {
        let text = "He said \"Stop. Now.\" and left. The court agreed.";
        assert_eq!(
            segment(text),
            vec!["He said \"Stop. Now.\" and left.", "The court agreed."]
        );
    }

    #[test]
    fn segment_splits_before_digits() {
        assert_eq!(
            segment("It ended! 12 jurors agreed."),
            vec!["It ended!", "12 jurors agreed."]
        );
    }

    #[test]
    fn clean_normalizes_whitespace() {
        assert_eq!(clean_text("a\t b\u{00a0}\nc\u{0007}d"), "a b cd");
    }

    #[test]
    fn quality_filter_defaults() {
        let rules = QualityRules::default();
        assert!(quality_filter(
            "The court affirmed the judgment below.",
            &rules
        ));
        assert!(!quality_filter("§ 12 (3) 44 --", &rules));
        assert!(!quality_filter("", &rules));
    }

    #[test]
    fn quality_filter_max_chars() {
        let rules = QualityRules {
            max_chars: 20,
            ..QualityRules::default()
        };
        assert!(!quality_filter("This sentence is definitely too long now.", &rules));
    }

    fn sentences(n: usize, good: bool) -> String {
        let s = if good {
            "The appellate court reviewed the record carefully."
        } else {
            "12 34 56."
        };
        vec![s; n].join(" ")
    }

    #[test]
    fn twelve_surviving_sentences_make_one_doc() {
        let op = opinion(&sentences(12, true));
        let docs = build_documents([(1, 0, &op)], &QualityRules::default());
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].sentences.len(), 12);
    }

    #[test]
    fn nine_sentences_make_no_doc() {
        let op = opinion(&sentences(9, true));
        let docs = build_documents([(1, 0, &op)], &QualityRules::default());
        assert!(docs.is_empty());
    }

    #[test]
    fn filtered_sentence_splits_runs() {
        let text = format!(
            "{} {} {}",
            sentences(11, true),
            sentences(1, false),
            sentences(4, true)
        );
        let op = opinion(&text);
        let docs = build_documents([(1, 0, &op)], &QualityRules::default());
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].sentences.len(), 11);
    }

    fn doc(n: usize, tag: &str) -> SentenceDoc {
        SentenceDoc {
            sentences: (0..n).map(|i| format!("Sentence {tag} number {i}.")).collect(),
            source_case_id: 0,
            source_opinion_index: 0,
        }
    }

    #[test]
    fn single_file_byte_exact() {
        let d = doc(10, "a");
        let dir = tempfile::tempdir().unwrap();
        let files = write_pretrain_files(&[d.clone()], dir.path(), u64::MAX).unwrap();
        assert_eq!(files.len(), 1);
        let content = std::fs::read_to_string(&files[0]).unwrap();
        let expected: String = d.sentences.iter().map(|s| format!("{s}\n")).collect();
        assert_eq!(content, expected);
        assert!(content.ends_with('\n'));
        assert!(!content.ends_with("\n\n"));
    }

    #[test]
    fn no_docs_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_pretrain_files(&[], dir.path(), 1024).unwrap();
        assert!(files.is_empty());
    }

    #[test]
    fn rotation_one_doc_per_file() {
        let docs = vec![doc(10, "a"), doc(10, "b"), doc(10, "c")];
        let limit = doc_block_bytes(&docs[0]) + 2;
        let dir = tempfile::tempdir().unwrap();
        let files = write_pretrain_files(&docs, dir.path(), limit).unwrap();
        assert_eq!(files.len(), 3);
        assert_eq!(files[0].file_name().unwrap(), "part-00000.txt");
        assert_eq!(files[2].file_name().unwrap(), "part-00002.txt");
    }

    #[test]
    fn write_read_round_trip() {
        let docs = vec![doc(10, "a"), doc(11, "b"), doc(12, "c")];
        let dir = tempfile::tempdir().unwrap();
        let files = write_pretrain_files(&docs, dir.path(), 300).unwrap();
        let back = read_pretrain_files(&files).unwrap();
        let expected: Vec<Vec<String>> = docs.iter().map(|d| d.sentences.clone()).collect();
        assert_eq!(back, expected);
    }

    proptest! {
        #[test]
        fn segment_concat_equals_cleaned_input(text in "[ -~]{0,200}") {
            let cleaned = clean_text(&text);
            let joined = segment(&text).join(" ");
            prop_assert_eq!(joined, cleaned);
        }

        #[test]
        fn no_doc_under_ten_sentences(
            pattern in proptest::collection::vec(any::<bool>(), 0..60)
        ) {
            let text: String = pattern
                .iter()
                .map(|good| if *good {
                    "The appellate court reviewed the record carefully. "
                } else {
                    "§ 1 2. "
                })
                .collect();
            let op = opinion(&text);
            let docs = build_documents([(1, 0, &op)], &QualityRules::default());
            for d in docs {
                prop_assert!(d.sentences.len() >= MIN_DOC_SENTENCES);
            }
        }

        #[test]
        fn round_trip_arbitrary_docs(
            lens in proptest::collection::vec(10usize..15, 0..6),
            limit in 50u64..5000
        ) {
            let docs: Vec<SentenceDoc> = lens
                .iter()
                .enumerate()
                .map(|(i, n)| doc(*n, &format!("d{i}")))
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let files = write_pretrain_files(&docs, dir.path(), limit).unwrap();
            let back = read_pretrain_files(&files).unwrap();
            let expected: Vec<Vec<String>> = docs.iter().map(|d| d.sentences.clone()).collect();
            prop_assert_eq!(back, expected);
        }
    }
}
