//! WordPiece vocabulary handling, greedy subword tokenization, sequence
//! encoding and the legal-vocabulary extension procedure.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use regex::RegexBuilder;
use thiserror::Error;

use crate::summarize::ClassificationRecord;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

const SPECIALS: [&str; 5] = [PAD, UNK, CLS, SEP, MASK];

/// Words longer than this become the unknown token outright.
const MAX_WORD_CHARS: usize = 100;

/// Token table with line-number identity: `tokens[i]` has id `i`.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    /// Multi-word entries, matched as phrases during basic tokenization.
    phrases: Vec<String>,
    pub cased: bool,
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("duplicate token at line {0}")]
    DuplicateToken(usize),
    #[error("missing special token {0}")]
    MissingSpecial(&'static str),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>, cased: bool) -> Result<Self, VocabError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(VocabError::DuplicateToken(i + 1));
            }
        }
        for s in SPECIALS {
            if !index.contains_key(s) {
                return Err(VocabError::MissingSpecial(s));
            }
        }
        let phrases = tokens
            .iter()
            .filter(|t| t.contains(' '))
            .cloned()
            .collect();
        Ok(Vocabulary {
            tokens,
            index,
            phrases,
            cased,
        })
    }

    pub fn load(path: &Path, cased: bool) -> Result<Self, VocabError> {
        let content = fs::read_to_string(path).map_err(|e| VocabError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let tokens: Vec<String> = content.lines().map(|l| l.to_string()).collect();
        Self::from_tokens(tokens, cased)
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| VocabError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pad_id(&self) -> u32 {
        self.index[PAD]
    }
    pub fn unk_id(&self) -> u32 {
        self.index[UNK]
    }
    pub fn cls_id(&self) -> u32 {
        self.index[CLS]
    }
    pub fn sep_id(&self) -> u32 {
        self.index[SEP]
    }
    pub fn mask_id(&self) -> u32 {
        self.index[MASK]
    }

    pub fn is_special(&self, token: &str) -> bool {
        SPECIALS.contains(&token)
    }

    fn normalize_case(&self, s: &str) -> String {
        if self.cased {
            s.to_string()
        } else {
            s.to_lowercase()
        }
    }
}

/// A dictionary entry with its document frequency over the classification
/// corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegalTerm {
    pub term: String,
    pub definition: String,
    pub doc_frequency: usize,
}

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad dictionary line {0}: expected term<TAB>definition[<TAB>doc_frequency]")]
    BadLine(usize),
}

/// Load a tab-separated legal dictionary. The frequency column is optional
/// and defaults to zero (recompute with [`term_doc_frequency`]).
pub fn load_dictionary(path: &Path) -> Result<Vec<LegalTerm>, DictionaryError> {
    let content = fs::read_to_string(path).map_err(|e| DictionaryError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut terms = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (term, definition, df) = match fields.as_slice() {
            [t, d] => (*t, *d, 0),
            [t, d, f] => (
                *t,
                *d,
                f.parse().map_err(|_| DictionaryError::BadLine(i + 1))?,
            ),
            _ => return Err(DictionaryError::BadLine(i + 1)),
        };
        if term.is_empty() {
            return Err(DictionaryError::BadLine(i + 1));
        }
        terms.push(LegalTerm {
            term: term.to_string(),
            definition: definition.to_string(),
            doc_frequency: df,
        });
    }
    Ok(terms)
}

fn is_word_punct(c: char) -> bool {
    !c.is_alphanumeric() && c != '#' && !c.is_whitespace()
}

fn split_punctuation(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in word.chars() {
        if is_word_punct(c) {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Whitespace + punctuation tokenization with case folding, plus a
/// longest-match phrase pass so multi-word vocabulary entries survive as
/// single tokens.
pub fn basic_tokenize(text: &str, vocab: &Vocabulary) -> Vec<String> {
    let words: Vec<String> = text
        .split_whitespace()
        .map(|w| vocab.normalize_case(w))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let mut matched = 0;
        if !vocab.phrases.is_empty() {
            // longest multi-word match starting at i
            let max_words = vocab
                .phrases
                .iter()
                .map(|p| p.split(' ').count())
                .max()
                .unwrap();
            for take in (2..=max_words.min(words.len() - i)).rev() {
                let candidate = words[i..i + take].join(" ");
                if vocab.contains(&candidate) {
                    out.push(candidate);
                    matched = take;
                    break;
                }
            }
        }
        if matched > 0 {
            i += matched;
        } else {
            out.extend(split_punctuation(&words[i]));
            i += 1;
        }
    }
    out
}

/// Greedy longest-prefix WordPiece segmentation of one basic token.
/// Returns `None` when the word cannot be segmented (caller emits unk).
fn wordpiece_word(word: &str, vocab: &Vocabulary) -> Option<Vec<String>> {
    if word.chars().count() > MAX_WORD_CHARS {
        return None;
    }
    let chars: Vec<char> = word.chars().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found: Option<String> = None;
        while end > start {
            let mut candidate: String = chars[start..end].iter().collect();
            if start > 0 {
                candidate = format!("##{candidate}");
            }
            if vocab.contains(&candidate) {
                found = Some(candidate);
                break;
            }
            end -= 1;
        }
        match found {
            Some(piece) => {
                pieces.push(piece);
                start = end;
            }
            None => return None,
        }
    }
    Some(pieces)
}

/// Full tokenization: basic tokenization then greedy subword segmentation.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<String> {
    let mut out = Vec::new();
    for word in basic_tokenize(text, vocab) {
        match wordpiece_word(&word, vocab) {
            Some(pieces) => out.extend(pieces),
            None => out.push(UNK.to_string()),
        }
    }
    out
}

/// Encoded sequence, padded to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub ids: Vec<u32>,
    pub segment_ids: Vec<u8>,
    pub attention_mask: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("max_seq_length {got} too small, need at least {need}")]
    LengthTooSmall { got: usize, need: usize },
}

/// Remove tokens one at a time from the end of the longer sequence until
/// the pair fits the budget.
pub fn truncate_pair(a: &mut Vec<String>, b: &mut Vec<String>, max_tokens: usize) {
    while a.len() + b.len() > max_tokens {
        if a.len() >= b.len() {
            a.pop();
        } else {
            b.pop();
        }
    }
}

/// Encode one text (or a pair) into ids, segment ids and attention mask.
pub fn encode(
    text_a: &str,
    text_b: Option<&str>,
    vocab: &Vocabulary,
    max_seq_length: usize,
) -> Result<Encoding, EncodeError> {
    let need = if text_b.is_some() { 4 } else { 3 };
    if max_seq_length < need {
        return Err(EncodeError::LengthTooSmall {
            got: max_seq_length,
            need,
        });
    }
    let mut a = tokenize(text_a, vocab);
    let mut b = text_b.map(|t| tokenize(t, vocab));

    match &mut b {
        Some(b) => truncate_pair(&mut a, b, max_seq_length - 3),
        None => a.truncate(max_seq_length - 2),
    }

    let mut ids = vec![vocab.cls_id()];
    let mut segment_ids = vec![0u8];
    for t in &a {
        ids.push(vocab.id(t).unwrap_or_else(|| vocab.unk_id()));
        segment_ids.push(0);
    }
    ids.push(vocab.sep_id());
    segment_ids.push(0);
    if let Some(b) = &b {
        for t in b {
            ids.push(vocab.id(t).unwrap_or_else(|| vocab.unk_id()));
            segment_ids.push(1);
        }
        ids.push(vocab.sep_id());
        segment_ids.push(1);
    }
    let real = ids.len();
    let mut attention_mask = vec![1u8; real];
    ids.resize(max_seq_length, vocab.pad_id());
    segment_ids.resize(max_seq_length, 0);
    attention_mask.resize(max_seq_length, 0);
    Ok(Encoding {
        ids,
        segment_ids,
        attention_mask,
    })
}

/// Recompute document frequencies: the number of records whose text
/// contains the term as a whole word, case-insensitive.
pub fn term_doc_frequency(terms: &mut [LegalTerm], corpus: &[ClassificationRecord]) {
    for term in terms.iter_mut() {
        let pattern = format!(r"\b{}\b", regex::escape(&term.term));
        let re = RegexBuilder::new(&pattern)
            .case_insensitive(true)
            .build()
            .expect("escaped term is a valid pattern");
        term.doc_frequency = corpus.iter().filter(|r| re.is_match(&r.text)).count();
    }
}

/// Append eligible legal terms (document frequency at or above `threshold`,
/// not already present) to the vocabulary. Existing ids are untouched.
pub fn extend_vocab(
    vocab: &Vocabulary,
    terms: &[LegalTerm],
    threshold: usize,
) -> (Vocabulary, Vec<String>) {
    let mut tokens = vocab.tokens.clone();
    let mut added = Vec::new();
    let mut present: std::collections::HashSet<String> =
        tokens.iter().cloned().collect();
    for term in terms {
        if term.doc_frequency < threshold {
            continue;
        }
        let normalized = vocab.normalize_case(&term.term);
        if present.insert(normalized.clone()) {
            tokens.push(normalized.clone());
            added.push(normalized);
        }
    }
    let new_vocab =
        Vocabulary::from_tokens(tokens, vocab.cased).expect("extension preserves validity");
    (new_vocab, added)
}
