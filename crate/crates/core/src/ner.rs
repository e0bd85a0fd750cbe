//! Silver-standard NER corpus construction: tag mapping, dual-annotation
//! merging, pattern-based corrections and the CoNLL-style interchange
//! format.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use thiserror::Error;

/// Canonical token-level tag. `Ext` carries tags outside the five paper
/// types without losing them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Person,
    Org,
    Date,
    Gpe,
    Cardinal,
    O,
    Ext(String),
}

impl Tag {
    pub fn parse(s: &str) -> Tag {
        match s {
            "PERSON" => Tag::Person,
            "ORG" => Tag::Org,
            "DATE" => Tag::Date,
            "GPE" => Tag::Gpe,
            "CARDINAL" => Tag::Cardinal,
            "O" => Tag::O,
            other => Tag::Ext(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Tag::Person => "PERSON",
            Tag::Org => "ORG",
            Tag::Date => "DATE",
            Tag::Gpe => "GPE",
            Tag::Cardinal => "CARDINAL",
            Tag::O => "O",
            Tag::Ext(s) => s,
        }
    }

    pub fn is_entity(&self) -> bool {
        !matches!(self, Tag::O)
    }

    /// The five canonical entity tags.
    pub fn canonical_entities() -> [Tag; 5] {
        [Tag::Person, Tag::Org, Tag::Date, Tag::Gpe, Tag::Cardinal]
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-token record of a merge disagreement kept for later resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictMark {
    pub tag_a: Tag,
    pub tag_b: Tag,
}

/// One annotated sentence. `provenance[i]` is set where the two source
/// annotations disagreed on token `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub provenance: Vec<Option<ConflictMark>>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<Tag>) -> Self {
        assert_eq!(tokens.len(), tags.len());
        let provenance = vec![None; tokens.len()];
        TaggedSentence {
            tokens,
            tags,
            provenance,
        }
    }
}

/// An unresolved dual-annotation disagreement, addressed by sentence and
/// token index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeConflict {
    pub sentence_index: usize,
    pub token_index: usize,
    pub tag_a: Tag,
    pub tag_b: Tag,
}

#[derive(Debug, Error)]
pub enum NerError {
    #[error("unmapped source tag {0}")]
    UnmappedTag(String),
    #[error("token mismatch at position {0}")]
    TokenMismatch(usize),
    #[error("format error at line {0}: {1}")]
    FormatError(usize, String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad correction rule {name}: {reason}")]
    BadRule { name: String, reason: String },
}

/// Source-tag to canonical-tag table.
#[derive(Debug, Clone)]
pub struct TagMapping {
    pairs: HashMap<String, Tag>,
}

impl TagMapping {
    pub fn new(pairs: HashMap<String, Tag>) -> Self {
        TagMapping { pairs }
    }

    /// Mapping for the paper's five tags plus common aliases of both
    /// annotation toolkits.
    pub fn default_mapping() -> Self {
        let mut pairs = HashMap::new();
        for (src, tag) in [
            ("O", Tag::O),
            ("PERSON", Tag::Person),
            ("PER", Tag::Person),
            ("ORGANIZATION", Tag::Org),
            ("ORG", Tag::Org),
            ("GPE", Tag::Gpe),
            ("GSP", Tag::Gpe),
            ("LOC", Tag::Gpe),
            ("LOCATION", Tag::Gpe),
            ("DATE", Tag::Date),
            ("CARDINAL", Tag::Cardinal),
            ("NUMBER", Tag::Cardinal),
        ] {
            pairs.insert(src.to_string(), tag);
        }
        TagMapping { pairs }
    }

    /// Load `source_tag<TAB>canonical_tag` lines.
    pub fn load(path: &Path) -> Result<Self, NerError> {
        let content = fs::read_to_string(path).map_err(|e| NerError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut pairs = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(src), Some(dst), None) => {
                    pairs.insert(src.to_string(), Tag::parse(dst));
                }
                _ => {
                    return Err(NerError::FormatError(
                        i + 1,
                        "expected source<TAB>canonical".into(),
                    ))
                }
            }
        }
        Ok(TagMapping { pairs })
    }

    pub fn map(&self, source_tag: &str) -> Result<Tag, NerError> {
        self.pairs
            .get(source_tag)
            .cloned()
            .ok_or_else(|| NerError::UnmappedTag(source_tag.to_string()))
    }
}

/// Replace source tags with their canonical equivalents.
pub fn map_tags(
    tokens: Vec<String>,
    source_tags: &[String],
    mapping: &TagMapping,
) -> Result<TaggedSentence, NerError> {
    let tags = source_tags
        .iter()
        .map(|t| mapping.map(t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TaggedSentence::new(tokens, tags))
}

/// Merge two annotations of the same sentence.
///
/// Agreement keeps the tag; an entity tag beats O; two distinct entity
/// tags record a conflict and provisionally keep `a`'s tag.
pub fn merge(
    a: &TaggedSentence,
    b: &TaggedSentence,
    sentence_index: usize,
) -> Result<(TaggedSentence, Vec<MergeConflict>), NerError> {
    if a.tokens.len() != b.tokens.len() {
        return Err(NerError::TokenMismatch(a.tokens.len().min(b.tokens.len())));
    }
    if let Some(pos) = a.tokens.iter().zip(&b.tokens).position(|(x, y)| x != y) {
        return Err(NerError::TokenMismatch(pos));
    }
    let mut tags = Vec::with_capacity(a.tokens.len());
    let mut provenance = vec![None; a.tokens.len()];
    let mut conflicts = Vec::new();
    for (i, (ta, tb)) in a.tags.iter().zip(&b.tags).enumerate() {
        let merged = if ta == tb {
            ta.clone()
        } else if *ta == Tag::O {
            tb.clone()
        } else if *tb == Tag::O {
            ta.clone()
        } else {
            conflicts.push(MergeConflict {
                sentence_index,
                token_index: i,
                tag_a: ta.clone(),
                tag_b: tb.clone(),
            });
            provenance[i] = Some(ConflictMark {
                tag_a: ta.clone(),
                tag_b: tb.clone(),
            });
            ta.clone()
        };
        tags.push(merged);
    }
    Ok((
        TaggedSentence {
            tokens: a.tokens.clone(),
            tags,
            provenance,
        },
        conflicts,
    ))
}

/// Token-level correction rule: one regex per token position, a tag to
/// assign and the relative indices it applies to.
#[derive(Debug, Clone)]
pub struct CorrectionRule {
    pub name: String,
    token_patterns: Vec<Regex>,
    pub assign_tag: Tag,
    /// Indices into the matched window; empty means every matched token.
    pub applies_to: Vec<usize>,
}

impl CorrectionRule {
    /// `pattern` is whitespace-separated per-token regexes; `applies_to`
    /// is `all` or a comma-separated list of window indices.
    pub fn new(
        name: &str,
        pattern: &str,
        assign_tag: Tag,
        applies_to: &str,
    ) -> Result<Self, NerError> {
        let token_patterns = pattern
            .split_whitespace()
            .map(|p| {
                Regex::new(&format!("^(?:{p})$")).map_err(|e| NerError::BadRule {
                    name: name.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if token_patterns.is_empty() {
            return Err(NerError::BadRule {
                name: name.to_string(),
                reason: "empty pattern".into(),
            });
        }
        let applies_to = if applies_to == "all" {
            Vec::new()
        } else {
            applies_to
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| NerError::BadRule {
                        name: name.to_string(),
                        reason: format!("bad applies_to index {s}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        if applies_to.iter().any(|&i| i >= token_patterns.len()) {
            return Err(NerError::BadRule {
                name: name.to_string(),
                reason: "applies_to index out of window".into(),
            });
        }
        Ok(CorrectionRule {
            name: name.to_string(),
            token_patterns,
            assign_tag,
            applies_to,
        })
    }

    fn window(&self) -> usize {
        self.token_patterns.len()
    }

    fn matches_at(&self, tokens: &[String], start: usize) -> bool {
        self.token_patterns
            .iter()
            .enumerate()
            .all(|(k, re)| re.is_match(&tokens[start + k]))
    }
}

const MONTHS: &str = "January|February|March|April|May|June|July|August|September|October|November|December";

/// The two correction rules the source workflow names: month-day-year
/// dates and honorific-preceded names.
pub fn builtin_rules() -> Vec<CorrectionRule> {
    vec![
        CorrectionRule::new(
            "month_day_year_date",
            &format!(r"(?:{MONTHS}) \d{{1,2}} , \d{{4}}"),
            Tag::Date,
            "all",
        )
        .expect("builtin compiles"),
        CorrectionRule::new(
            "honorific_person",
            r"(?:President|Sir|Dr\.) [A-Z][a-z]+",
            Tag::Person,
            "1",
        )
        .expect("builtin compiles"),
    ]
}

/// Load additional rules: `name<TAB>pattern<TAB>tag<TAB>applies_to` lines.
pub fn load_rules(path: &Path) -> Result<Vec<CorrectionRule>, NerError> {
    let content = fs::read_to_string(path).map_err(|e| NerError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut rules = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [name, pattern, tag, applies_to] => {
                rules.push(CorrectionRule::new(
                    name,
                    pattern,
                    Tag::parse(tag),
                    applies_to,
                )?);
            }
            _ => {
                return Err(NerError::FormatError(
                    i + 1,
                    "expected name<TAB>pattern<TAB>tag<TAB>applies_to".into(),
                ))
            }
        }
    }
    Ok(rules)
}

/// One re-tagging performed by [`apply_corrections`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionChange {
    pub rule: String,
    pub sentence_index: usize,
    pub token_index: usize,
    pub old_tag: Tag,
    pub new_tag: Tag,
}

/// Apply rules in order, each scanning every sentence. Only tokens whose
/// tag actually changes are logged, so a second pass logs nothing.
pub fn apply_corrections(
    corpus: &mut [TaggedSentence],
    rules: &[CorrectionRule],
) -> Vec<CorrectionChange> {
    let mut log = Vec::new();
    for rule in rules {
        let w = rule.window();
        for (si, sentence) in corpus.iter_mut().enumerate() {
            if sentence.tokens.len() < w {
                continue;
            }
            for start in 0..=(sentence.tokens.len() - w) {
                if !rule.matches_at(&sentence.tokens, start) {
                    continue;
                }
                let targets: Vec<usize> = if rule.applies_to.is_empty() {
                    (0..w).collect()
                } else {
                    rule.applies_to.clone()
                };
                for k in targets {
                    let ti = start + k;
                    if sentence.tags[ti] != rule.assign_tag {
                        log.push(CorrectionChange {
                            rule: rule.name.clone(),
                            sentence_index: si,
                            token_index: ti,
                            old_tag: sentence.tags[ti].clone(),
                            new_tag: rule.assign_tag.clone(),
                        });
                        sentence.tags[ti] = rule.assign_tag.clone();
                    }
                }
            }
        }
    }
    log
}

/// Token counts per non-O tag.
pub fn tag_population(corpus: &[TaggedSentence]) -> BTreeMap<Tag, usize> {
    let mut counts = BTreeMap::new();
    for sentence in corpus {
        for tag in &sentence.tags {
            if tag.is_entity() {
                *counts.entry(tag.clone()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// CoNLL-style writer: `token<TAB>tag` lines, blank line between
/// sentences. With `bio`, entity runs get `B-`/`I-` prefixes.
pub fn write_conll(corpus: &[TaggedSentence], path: &Path, bio: bool) -> Result<(), NerError> {
    let mut out = String::new();
    for (si, sentence) in corpus.iter().enumerate() {
        if si > 0 {
            out.push('\n');
        }
        let mut prev: Option<&Tag> = None;
        for (token, tag) in sentence.tokens.iter().zip(&sentence.tags) {
            let rendered = if bio && tag.is_entity() {
                let prefix = if prev == Some(tag) { "I-" } else { "B-" };
                format!("{prefix}{tag}")
            } else {
                tag.to_string()
            };
            out.push_str(token);
            out.push('\t');
            out.push_str(&rendered);
            out.push('\n');
            prev = Some(tag);
        }
    }
    fs::write(path, out).map_err(|e| NerError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Inverse of [`write_conll`]; `B-`/`I-` prefixes are stripped on read.
pub fn read_conll(path: &Path) -> Result<Vec<TaggedSentence>, NerError> {
    let content = fs::read_to_string(path).map_err(|e| NerError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_conll(&content)
}

pub fn parse_conll(content: &str) -> Result<Vec<TaggedSentence>, NerError> {
    let mut corpus = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.is_empty() {
            if !tokens.is_empty() {
                corpus.push(TaggedSentence::new(
                    std::mem::take(&mut tokens),
                    std::mem::take(&mut tags),
                ));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [token, tag] => {
                tokens.push(token.to_string());
                let bare = tag
                    .strip_prefix("B-")
                    .or_else(|| tag.strip_prefix("I-"))
                    .unwrap_or(tag);
                tags.push(Tag::parse(bare));
            }
            _ => {
                return Err(NerError::FormatError(
                    i + 1,
                    format!("expected 2 tab-separated fields, got {}", fields.len()),
                ))
            }
        }
    }
    if !tokens.is_empty() {
        corpus.push(TaggedSentence::new(tokens, tags));
    }
    Ok(corpus)
}

/// Conflict file: `sentence_index<TAB>token_index<TAB>tag_a<TAB>tag_b<TAB>resolution`,
/// resolution blank until edited.
pub fn write_conflicts(conflicts: &[MergeConflict], path: &Path) -> Result<(), NerError> {
    let mut out = String::new();
    for c in conflicts {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t\n",
            c.sentence_index, c.token_index, c.tag_a, c.tag_b
        ));
    }
    fs::write(path, out).map_err(|e| NerError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Re-ingest an edited conflict file, applying non-blank resolutions to
/// the corpus. Returns how many resolutions were applied.
pub fn apply_resolutions(corpus: &mut [TaggedSentence], path: &Path) -> Result<usize, NerError> {
    let content = fs::read_to_string(path).map_err(|e| NerError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut applied = 0;
    for (i, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [si, ti, _, _, resolution] = fields.as_slice() else {
            return Err(NerError::FormatError(i + 1, "expected 5 fields".into()));
        };
        if resolution.is_empty() {
            continue;
        }
        let si: usize = si
            .parse()
            .map_err(|_| NerError::FormatError(i + 1, "bad sentence index".into()))?;
        let ti: usize = ti
            .parse()
            .map_err(|_| NerError::FormatError(i + 1, "bad token index".into()))?;
        let sentence = corpus
            .get_mut(si)
            .ok_or_else(|| NerError::FormatError(i + 1, "sentence index out of range".into()))?;
        if ti >= sentence.tags.len() {
            return Err(NerError::FormatError(i + 1, "token index out of range".into()));
        }
        sentence.tags[ti] = Tag::parse(resolution);
        sentence.provenance[ti] = None;
        applied += 1;
    }
    Ok(applied)
}

/// Sentence-level 70/20/10 train/test/dev split, same rounding and
/// shuffling policy as the classification split.
pub fn split_ner(
    corpus: Vec<TaggedSentence>,
    seed: u64,
) -> Result<Vec<(String, Vec<TaggedSentence>)>, crate::split::SplitError> {
    let spec = crate::split::SplitSpec::new(
        vec![
            ("train".into(), 0.70),
            ("test".into(), 0.20),
            ("dev".into(), 0.10),
        ],
        seed,
    )?;
    crate::split::split_items(corpus, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(tokens: &[&str], tags: &[Tag]) -> TaggedSentence {
        TaggedSentence::new(
            tokens.iter().map(|s| s.to_string()).collect(),
            tags.to_vec(),
        )
    }

    #[test]
    fn maps_organization_to_org() {
        let mapping = TagMapping::default_mapping();
        let out = map_tags(
            vec!["Acme".into()],
            &["ORGANIZATION".to_string()],
            &mapping,
        )
        .unwrap();
        assert_eq!(out.tags, vec![Tag::Org]);
    }

    #[test]
    fn maps_o_to_o() {
        let mapping = TagMapping::default_mapping();
        let out = map_tags(vec!["the".into()], &["O".to_string()], &mapping).unwrap();
        assert_eq!(out.tags, vec![Tag::O]);
    }

    #[test]
    fn unknown_tag_errors() {
        let mapping = TagMapping::default_mapping();
        let err = map_tags(vec!["x".into()], &["FOO".to_string()], &mapping).unwrap_err();
        assert!(matches!(err, NerError::UnmappedTag(t) if t == "FOO"));
    }

    #[test]
    fn merge_agreement() {
        let a = sent(&["Smith"], &[Tag::Person]);
        let b = sent(&["Smith"], &[Tag::Person]);
        let (merged, conflicts) = merge(&a, &b, 0).unwrap();
        assert_eq!(merged.tags, vec![Tag::Person]);
        assert!(conflicts.is_empty());
    }

    #[test]
    fn merge_entity_beats_o() {
        let a = sent(&["Monday"], &[Tag::O]);
        let b = sent(&["Monday"], &[Tag::Date]);
        let (merged, conflicts) = merge(&a, &b, 0).unwrap();
        assert_eq!(merged.tags, vec![Tag::Date]);
        assert!(conflicts.is_empty());
    }

    #[test]
    fn merge_conflict_keeps_a_and_records_both() {
        let a = sent(&["Acme"], &[Tag::Org]);
        let b = sent(&["Acme"], &[Tag::Gpe]);
        let (merged, conflicts) = merge(&a, &b, 3).unwrap();
        assert_eq!(merged.tags, vec![Tag::Org]);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].sentence_index, 3);
        assert_eq!(conflicts[0].tag_a, Tag::Org);
        assert_eq!(conflicts[0].tag_b, Tag::Gpe);
        assert_eq!(
            merged.provenance[0],
            Some(ConflictMark {
                tag_a: Tag::Org,
                tag_b: Tag::Gpe
            })
        );
    }

    #[test]
    fn merge_token_mismatch() {
        let a = sent(&["x"], &[Tag::O]);
        let b = sent(&["y"], &[Tag::O]);
        assert!(matches!(merge(&a, &b, 0), Err(NerError::TokenMismatch(0))));
    }

    #[test]
    fn merge_truth_table_exhaustive() {
        let mut all: Vec<Tag> = Tag::canonical_entities().to_vec();
        all.push(Tag::O);
        for ta in &all {
            for tb in &all {
                let a = sent(&["tok"], std::slice::from_ref(ta));
                let b = sent(&["tok"], std::slice::from_ref(tb));
                let (merged, conflicts) = merge(&a, &b, 0).unwrap();
                if ta == tb {
                    assert_eq!(&merged.tags[0], ta);
                    assert!(conflicts.is_empty());
                } else if *ta == Tag::O {
                    assert_eq!(&merged.tags[0], tb);
                    assert!(conflicts.is_empty());
                } else if *tb == Tag::O {
                    assert_eq!(&merged.tags[0], ta);
                    assert!(conflicts.is_empty());
                } else {
                    assert_eq!(conflicts.len(), 1);
                    assert_eq!(&merged.tags[0], ta);
                }
                // rule 2 monotonicity: never converts an entity to O
                if ta.is_entity() || tb.is_entity() {
                    assert!(merged.tags[0].is_entity());
                }
            }
        }
    }

    #[test]
    fn month_day_year_rule() {
        let mut corpus = vec![sent(
            &["January", "5", ",", "1997"],
            &[Tag::O, Tag::O, Tag::O, Tag::O],
        )];
        let log = apply_corrections(&mut corpus, &builtin_rules());
        assert_eq!(
            corpus[0].tags,
            vec![Tag::Date, Tag::Date, Tag::Date, Tag::Date]
        );
        assert_eq!(log.len(), 4);
    }

    #[test]
    fn honorific_rule() {
        let mut corpus = vec![sent(&["Dr.", "Pickard"], &[Tag::O, Tag::O])];
        let log = apply_corrections(&mut corpus, &builtin_rules());
        assert_eq!(corpus[0].tags, vec![Tag::O, Tag::Person]);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].rule, "honorific_person");
    }

    #[test]
    fn corrections_are_idempotent() {
        let mut corpus = vec![
            sent(
                &["January", "5", ",", "1997"],
                &[Tag::O, Tag::O, Tag::O, Tag::O],
            ),
            sent(&["President", "Adams"], &[Tag::O, Tag::O]),
        ];
        let first = apply_corrections(&mut corpus, &builtin_rules());
        assert!(!first.is_empty());
        let second = apply_corrections(&mut corpus, &builtin_rules());
        assert!(second.is_empty());
    }

    #[test]
    fn rule_with_no_matches_changes_nothing() {
        let mut corpus = vec![sent(&["the", "court"], &[Tag::O, Tag::O])];
        let before = corpus.clone();
        let log = apply_corrections(&mut corpus, &builtin_rules());
        assert!(log.is_empty());
        assert_eq!(corpus, before);
    }

    #[test]
    fn population_counts() {
        assert!(tag_population(&[]).is_empty());
        let corpus = vec![
            sent(
                &["John", "Smith", "of", "Acme"],
                &[Tag::Person, Tag::Person, Tag::O, Tag::Org],
            ),
            sent(&["Jane"], &[Tag::Person]),
        ];
        let pop = tag_population(&corpus);
        assert_eq!(pop.get(&Tag::Person), Some(&3));
        assert_eq!(pop.get(&Tag::Org), Some(&1));
        assert_eq!(pop.get(&Tag::O), None);
    }

    #[test]
    fn conll_round_trip() {
        let corpus = vec![
            sent(&["John", "went"], &[Tag::Person, Tag::O]),
            sent(&["Acme", ",", "Inc"], &[Tag::Org, Tag::O, Tag::Org]),
            sent(&["done"], &[Tag::O]),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.conll");
        write_conll(&corpus, &path, false).unwrap();
        let back = read_conll(&path).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn conll_empty_corpus_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.conll");
        write_conll(&[], &path, false).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
        assert!(read_conll(&path).unwrap().is_empty());
    }

    #[test]
    fn conll_three_fields_is_format_error() {
        let err = parse_conll("a\tb\tc\n").unwrap_err();
        assert!(matches!(err, NerError::FormatError(1, _)));
    }

    #[test]
    fn conll_bio_round_trip() {
        let corpus = vec![sent(
            &["John", "Smith", "works"],
            &[Tag::Person, Tag::Person, Tag::O],
        )];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bio.conll");
        write_conll(&corpus, &path, true).unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(raw.contains("John\tB-PERSON"));
        assert!(raw.contains("Smith\tI-PERSON"));
        assert_eq!(read_conll(&path).unwrap(), corpus);
    }

    #[test]
    fn conflict_file_round_trip_with_resolution() {
        let a = sent(&["Acme"], &[Tag::Org]);
        let b = sent(&["Acme"], &[Tag::Gpe]);
        let (merged, conflicts) = merge(&a, &b, 0).unwrap();
        let mut corpus = vec![merged];

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("conflicts.tsv");
        write_conflicts(&conflicts, &path).unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        assert_eq!(raw, "0\t0\tORG\tGPE\t\n");

        // edit: resolve to GPE
        std::fs::write(&path, "0\t0\tORG\tGPE\tGPE\n").unwrap();
        let applied = apply_resolutions(&mut corpus, &path).unwrap();
        assert_eq!(applied, 1);
        assert_eq!(corpus[0].tags, vec![Tag::Gpe]);
        assert_eq!(corpus[0].provenance[0], None);
    }

    #[test]
    fn split_ner_sizes_and_determinism() {
        let corpus: Vec<TaggedSentence> = (0..10)
            .map(|i| sent(&[&format!("tok{i}")], &[Tag::O]))
            .collect();
        let parts = split_ner(corpus.clone(), 7).unwrap();
        let sizes: Vec<usize> = parts.iter().map(|(_, p)| p.len()).collect();
        assert_eq!(sizes, vec![7, 2, 1]);
        let again = split_ner(corpus, 7).unwrap();
        assert_eq!(parts, again);
    }

    #[test]
    fn rules_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.tsv");
        std::fs::write(
            &path,
            "state_of_gpe\tState of [A-Z][a-z]+\tGPE\t2\n",
        )
        .unwrap();
        let rules = load_rules(&path).unwrap();
        assert_eq!(rules.len(), 1);
        let mut corpus = vec![sent(
            &["State", "of", "Illinois"],
            &[Tag::O, Tag::O, Tag::O],
        )];
        let log = apply_corrections(&mut corpus, &rules);
        assert_eq!(log.len(), 1);
        assert_eq!(corpus[0].tags, vec![Tag::O, Tag::O, Tag::Gpe]);
    }
}
