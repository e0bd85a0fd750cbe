//! Corpus domain-adaptation toolkit for legal case records.
//!
//! Turns raw case records into pretraining text, masked-LM /
//! next-sentence-prediction instances, a summarized opinion-classification
//! dataset, a merged silver-standard NER corpus and an extended WordPiece
//! vocabulary, plus the evaluation arithmetic to score models trained on
//! those artifacts.

pub mod ingest;
pub mod metrics;
pub mod ner;
pub mod pretrain;
pub mod sentences;
pub mod split;
pub mod summarize;
pub mod wordpiece;

pub use ingest::{extract_opinions, parse_case, stream_cases, LegalCase, Opinion, OpinionKind};
pub use metrics::{
    classification_report, confusion, ner_scores, per_entity_report, ClassificationReport,
    ConfusionMatrix, NerScores,
};
pub use ner::{
    apply_corrections, builtin_rules, merge, read_conll, split_ner, tag_population, write_conll,
    MergeConflict, Tag, TagMapping, TaggedSentence,
};
pub use pretrain::{
    create_instances, mask_tokens, serialize_instances, PretrainConfig, PretrainInstance,
};
pub use sentences::{
    build_documents, quality_filter, segment, write_pretrain_files, QualityRules, SentenceDoc,
};
pub use split::{split_items, SplitSpec};
pub use summarize::{
    build_classification_dataset, textrank_summarize, ClassificationRecord, OpinionLabel,
};
pub use wordpiece::{encode, extend_vocab, term_doc_frequency, tokenize, LegalTerm, Vocabulary};
