//! Masked-LM + next-sentence-prediction instance generation from
//! pretraining documents.
//!
//! Each dupe pass and each document get an independent sub-generator
//! derived from `(random_seed, pass, doc_index)`, so output is
//! reproducible and order-independent across documents.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sentences::SentenceDoc;
use crate::wordpiece::{tokenize, truncate_pair, Vocabulary, CLS, MASK, SEP};

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub max_seq_length: usize,
    pub dupe_factor: usize,
    pub masked_lm_prob: f64,
    pub max_predictions_per_seq: usize,
    pub short_seq_prob: f64,
    pub random_seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            max_seq_length: 128,
            dupe_factor: 5,
            masked_lm_prob: 0.15,
            max_predictions_per_seq: 20,
            short_seq_prob: 0.1,
            random_seed: 12345,
        }
    }
}

/// One MLM+NSP training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PretrainInstance {
    pub tokens: Vec<String>,
    pub segment_ids: Vec<u8>,
    pub is_random_next: bool,
    pub masked_lm_positions: Vec<usize>,
    pub masked_lm_labels: Vec<String>,
    /// Index of the document segment A came from.
    pub source_doc: usize,
    /// Set iff `is_random_next`: the document segment B was sampled from.
    pub b_source_doc: Option<usize>,
}

#[derive(Debug, Error)]
pub enum PretrainError {
    #[error("need at least 2 documents for next-sentence sampling, got {0}")]
    TooFewDocuments(usize),
    #[error("no maskable position in sequence")]
    NoMaskablePosition,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad record at line {0}")]
    BadRecord(usize),
}

fn sub_rng(seed: u64, pass: usize, doc_index: usize) -> ChaCha20Rng {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&(pass as u64).to_le_bytes());
    bytes[16..24].copy_from_slice(&(doc_index as u64).to_le_bytes());
    ChaCha20Rng::from_seed(bytes)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Select and mask prediction positions in `tokens`.
///
/// 80% of selected positions become the mask token, 10% a uniform random
/// non-special vocabulary token, 10% stay unchanged; labels always record
/// the original token. Positions come back sorted.
pub fn mask_tokens(
    tokens: &[String],
    vocab: &Vocabulary,
    cfg: &PretrainConfig,
    rng: &mut ChaCha20Rng,
) -> Result<(Vec<String>, Vec<usize>, Vec<String>), PretrainError> {
    let mut candidates: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.as_str() != CLS && t.as_str() != SEP)
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Err(PretrainError::NoMaskablePosition);
    }
    candidates.shuffle(rng);

    let num_to_predict = round_half_up(tokens.len() as f64 * cfg.masked_lm_prob)
        .max(1)
        .min(cfg.max_predictions_per_seq)
        .min(candidates.len());

    let mut masked = tokens.to_vec();
    let mut picked: Vec<(usize, String)> = Vec::with_capacity(num_to_predict);
    for &pos in candidates.iter().take(num_to_predict) {
        let original = tokens[pos].clone();
        let u: f64 = rng.random();
        if u < 0.8 {
            masked[pos] = MASK.to_string();
        } else if u < 0.9 {
            loop {
                let id = rng.random_range(0..vocab.len() as u32);
                let tok = vocab.token(id).unwrap();
                if !vocab.is_special(tok) {
                    masked[pos] = tok.to_string();
                    break;
                }
            }
        } // else keep the original
        picked.push((pos, original));
    }
    picked.sort_by_key(|(pos, _)| *pos);
    let (positions, labels) = picked.into_iter().unzip();
    Ok((masked, positions, labels))
}

fn instances_from_document(
    tokenized: &[Vec<Vec<String>>],
    doc_index: usize,
    vocab: &Vocabulary,
    cfg: &PretrainConfig,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<PretrainInstance>, PretrainError> {
    let document = &tokenized[doc_index];
    let max_num_tokens = cfg.max_seq_length.saturating_sub(3).max(2);
    let target_seq_length = if rng.random::<f64>() < cfg.short_seq_prob {
        rng.random_range(2..=max_num_tokens)
    } else {
        max_num_tokens
    };

    let mut instances = Vec::new();
    let mut chunk: Vec<usize> = Vec::new(); // sentence indices
    let mut chunk_len = 0usize;
    let mut i = 0usize;
    while i < document.len() {
        chunk.push(i);
        chunk_len += document[i].len();
        if i == document.len() - 1 || chunk_len >= target_seq_length {
            if !chunk.is_empty() {
                let a_end = if chunk.len() >= 2 {
                    rng.random_range(1..chunk.len())
                } else {
                    1
                };
                let mut tokens_a: Vec<String> = chunk[..a_end]
                    .iter()
                    .flat_map(|&s| document[s].iter().cloned())
                    .collect();

                let mut tokens_b: Vec<String> = Vec::new();
                let mut b_source_doc = None;
                let is_random_next = chunk.len() == 1 || rng.random::<f64>() < 0.5;
                if is_random_next {
                    let target_b = target_seq_length.saturating_sub(tokens_a.len());
                    let other = loop {
                        let cand = rng.random_range(0..tokenized.len());
                        if cand != doc_index {
                            break cand;
                        }
                    };
                    b_source_doc = Some(other);
                    let other_doc = &tokenized[other];
                    let start = rng.random_range(0..other_doc.len());
                    for sent in &other_doc[start..] {
                        tokens_b.extend(sent.iter().cloned());
                        if tokens_b.len() >= target_b {
                            break;
                        }
                    }
                } else {
                    for &s in &chunk[a_end..] {
                        tokens_b.extend(document[s].iter().cloned());
                    }
                }
                truncate_pair(&mut tokens_a, &mut tokens_b, max_num_tokens);

                if !tokens_a.is_empty() && !tokens_b.is_empty() {
                    let mut tokens =
                        Vec::with_capacity(tokens_a.len() + tokens_b.len() + 3);
                    let mut segment_ids = Vec::with_capacity(tokens.capacity());
                    tokens.push(CLS.to_string());
                    segment_ids.push(0);
                    for t in tokens_a {
                        tokens.push(t);
                        segment_ids.push(0);
                    }
                    tokens.push(SEP.to_string());
                    segment_ids.push(0);
                    for t in tokens_b {
                        tokens.push(t);
                        segment_ids.push(1);
                    }
                    tokens.push(SEP.to_string());
                    segment_ids.push(1);

                    let (masked, positions, labels) =
                        mask_tokens(&tokens, vocab, cfg, rng)?;
                    instances.push(PretrainInstance {
                        tokens: masked,
                        segment_ids,
                        is_random_next,
                        masked_lm_positions: positions,
                        masked_lm_labels: labels,
                        source_doc: doc_index,
                        b_source_doc,
                    });
                }
            }
            chunk.clear();
            chunk_len = 0;
        }
        i += 1;
    }
    Ok(instances)
}

/// Generate pretraining instances for the whole corpus, `dupe_factor`
/// passes, deterministically from `cfg.random_seed`.
pub fn create_instances(
    docs: &[SentenceDoc],
    vocab: &Vocabulary,
    cfg: &PretrainConfig,
) -> Result<Vec<PretrainInstance>, PretrainError> {
    if docs.len() < 2 {
        return Err(PretrainError::TooFewDocuments(docs.len()));
    }
    let tokenized: Vec<Vec<Vec<String>>> = docs
        .iter()
        .map(|d| {
            d.sentences
                .iter()
                .map(|s| tokenize(s, vocab))
                .filter(|t| !t.is_empty())
                .collect()
        })
        .collect();

    let mut instances = Vec::new();
    for pass in 0..cfg.dupe_factor {
        for doc_index in 0..tokenized.len() {
            if tokenized[doc_index].is_empty() {
                continue;
            }
            let mut rng = sub_rng(cfg.random_seed, pass, doc_index);
            instances.extend(instances_from_document(
                &tokenized, doc_index, vocab, cfg, &mut rng,
            )?);
        }
    }
    Ok(instances)
}

/// Line-oriented serialized form of one instance, padded to fixed widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub input_ids: Vec<u32>,
    pub input_mask: Vec<u8>,
    pub segment_ids: Vec<u8>,
    pub masked_lm_positions: Vec<usize>,
    pub masked_lm_ids: Vec<u32>,
    pub masked_lm_weights: Vec<f32>,
    pub next_sentence_label: u8,
}

/// Convert an instance into its padded record.
pub fn to_record(
    instance: &PretrainInstance,
    vocab: &Vocabulary,
    cfg: &PretrainConfig,
) -> InstanceRecord {
    let real = instance.tokens.len();
    let mut input_ids: Vec<u32> = instance
        .tokens
        .iter()
        .map(|t| vocab.id(t).unwrap_or_else(|| vocab.unk_id()))
        .collect();
    let mut input_mask = vec![1u8; real];
    let mut segment_ids = instance.segment_ids.clone();
    input_ids.resize(cfg.max_seq_length, vocab.pad_id());
    input_mask.resize(cfg.max_seq_length, 0);
    segment_ids.resize(cfg.max_seq_length, 0);

    let preds = instance.masked_lm_positions.len();
    let mut masked_lm_positions = instance.masked_lm_positions.clone();
    let mut masked_lm_ids: Vec<u32> = instance
        .masked_lm_labels
        .iter()
        .map(|t| vocab.id(t).unwrap_or_else(|| vocab.unk_id()))
        .collect();
    let mut masked_lm_weights = vec![1.0f32; preds];
    masked_lm_positions.resize(cfg.max_predictions_per_seq, 0);
    masked_lm_ids.resize(cfg.max_predictions_per_seq, 0);
    masked_lm_weights.resize(cfg.max_predictions_per_seq, 0.0);

    InstanceRecord {
        input_ids,
        input_mask,
        segment_ids,
        masked_lm_positions,
        masked_lm_ids,
        masked_lm_weights,
        next_sentence_label: instance.is_random_next as u8,
    }
}

/// Write instances as one JSON record per line. Returns the record count.
pub fn serialize_instances(
    instances: &[PretrainInstance],
    vocab: &Vocabulary,
    cfg: &PretrainConfig,
    out_path: &Path,
) -> Result<usize, PretrainError> {
    let io_err = |e: std::io::Error| PretrainError::Io {
        path: out_path.to_path_buf(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(out_path).map_err(io_err)?);
    for instance in instances {
        let record = to_record(instance, vocab, cfg);
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(instances.len())
}

/// Read back a record file written by [`serialize_instances`].
pub fn read_instance_records(path: &Path) -> Result<Vec<InstanceRecord>, PretrainError> {
    let reader = BufReader::new(File::open(path).map_err(|e| PretrainError::Io {
        path: path.to_path_buf(),
        source: e,
    })?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PretrainError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let record =
            serde_json::from_str(&line).map_err(|_| PretrainError::BadRecord(i + 1))?;
        records.push(record);
    }
    Ok(records)
}
