//! `lexforge` command-line entry point.
//!
//! Every subcommand is a pure function of its inputs and effective
//! configuration; all randomness flows from an explicit seed flag. The
//! effective configuration of each run is echoed to a sidecar file next to
//! the outputs so a run can be replayed.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lexforge_core::ingest::stream_cases;
use lexforge_core::metrics::{format_report, ner_scores, per_entity_report, round4};
use lexforge_core::ner::{
    apply_corrections, builtin_rules, load_rules, map_tags, merge, read_conll, tag_population,
    write_conflicts, write_conll, TagMapping, TaggedSentence,
};
use lexforge_core::pretrain::{create_instances, serialize_instances, PretrainConfig};
use lexforge_core::sentences::{
    build_documents, read_pretrain_files, write_pretrain_files, QualityRules, SentenceDoc,
    DEFAULT_MAX_FILE_BYTES,
};
use lexforge_core::split::{split_items, SplitSpec};
use lexforge_core::summarize::{
    build_classification_dataset, read_classification_tsv, write_classification_tsv,
};
use lexforge_core::wordpiece::{extend_vocab, load_dictionary, term_doc_frequency, Vocabulary};

const CONFIG_ENV: &str = "LEXFORGE_CONFIG";

#[derive(Parser)]
#[command(name = "lexforge", version, about = "Legal corpus domain-adaptation toolkit")]
struct Cli {
    /// Flat key=value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse case record files and print a summary report.
    Ingest(IngestArgs),
    /// Build rotated pretraining text files from case records.
    PretrainData(PretrainDataArgs),
    /// Build the summarized opinion-classification dataset with splits.
    ClassifyData(ClassifyDataArgs),
    /// Extend a WordPiece vocabulary with frequent legal terms.
    VocabExtend(VocabExtendArgs),
    /// Generate masked-LM + next-sentence instances from pretraining files.
    Instances(InstancesArgs),
    /// Merge two NER annotations into a silver-standard corpus.
    NerMerge(NerMergeArgs),
    /// Score predictions against truth (classification or NER).
    Eval(EvalArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "page_size")]
    page_size: Option<usize>,
}

#[derive(Args)]
struct PretrainDataArgs {
    #[arg(long, required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long = "out_dir")]
    out_dir: PathBuf,
    #[arg(long = "min_tokens")]
    min_tokens: Option<usize>,
    #[arg(long = "min_alpha_ratio")]
    min_alpha_ratio: Option<f64>,
    #[arg(long = "max_chars")]
    max_chars: Option<usize>,
    #[arg(long = "max_file_bytes")]
    max_file_bytes: Option<u64>,
}

#[derive(Args)]
struct ClassifyDataArgs {
    #[arg(long, required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "target_words")]
    target_words: Option<usize>,
    /// Comma-separated split fractions, e.g. 0.7,0.15,0.15
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VocabExtendArgs {
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    dictionary: PathBuf,
    /// Classification dataset TSV; needed when the dictionary has no
    /// frequency column.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    cased: bool,
}

#[derive(Args)]
struct InstancesArgs {
    #[arg(long = "pretrain_dir")]
    pretrain_dir: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "max_seq_length")]
    max_seq_length: Option<usize>,
    #[arg(long = "dupe_factor")]
    dupe_factor: Option<usize>,
    #[arg(long = "masked_lm_prob")]
    masked_lm_prob: Option<f64>,
    #[arg(long = "max_predictions_per_seq")]
    max_predictions_per_seq: Option<usize>,
    #[arg(long = "short_seq_prob")]
    short_seq_prob: Option<f64>,
    #[arg(long = "random_seed")]
    random_seed: Option<u64>,
    #[arg(long)]
    cased: bool,
}

#[derive(Args)]
struct NerMergeArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// classify or ner
    #[arg(long)]
    mode: String,
}

enum CliError {
    Validation(String),
    Io(String),
}

fn io<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(e.to_string())
}

fn invalid<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

/// Flat `key = value` config file, `#` comments allowed.
struct ConfigMap(HashMap<String, String>);

impl ConfigMap {
    fn load(explicit: Option<&Path>) -> Result<Self, CliError> {
        let path = explicit
            .map(|p| p.to_path_buf())
            .or_else(|| std::env::var(CONFIG_ENV).ok().map(PathBuf::from));
        let mut map = HashMap::new();
        if let Some(path) = path {
            let content = fs::read_to_string(&path)
                .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
            for (i, line) in content.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(CliError::Validation(format!(
                        "config line {}: expected key = value",
                        i + 1
                    )));
                };
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(ConfigMap(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                CliError::Validation(format!("config key {key}: cannot parse {v:?}"))
            }),
        }
    }
}

/// Pick flag value, then config value, then default.
fn effective<T: std::str::FromStr + Clone>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

/// Echo the effective configuration next to the run's outputs.
fn write_sidecar(out: &Path, entries: &[(&str, String)]) -> Result<(), CliError> {
    let mut sidecar = String::new();
    for (k, v) in entries {
        writeln!(sidecar, "{k} = {v}").unwrap();
    }
    let path = if out.is_dir() {
        out.join("effective-config.txt")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".config");
        out.with_file_name(name)
    };
    fs::write(&path, sidecar).map_err(io)
}

fn collect_cases(
    inputs: &[PathBuf],
    page_size: usize,
) -> Result<(Vec<lexforge_core::LegalCase>, Vec<String>, Vec<u64>), CliError> {
    let mut stream = stream_cases(inputs, page_size);
    let mut cases = Vec::new();
    for case in &mut stream {
        cases.push(case.map_err(io)?);
    }
    let failures = stream.failures.iter().map(|f| f.report_line()).collect();
    Ok((cases, failures, stream.duplicate_ids.clone()))
}

fn run_ingest(args: IngestArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let page_size = effective(args.page_size, cfg, "page_size", 100)?;
    if page_size == 0 {
        return Err(CliError::Validation("page_size must be positive".into()));
    }
    let (cases, failures, duplicates) = collect_cases(&args.inputs, page_size)?;

    let mut by_kind: HashMap<String, usize> = HashMap::new();
    for case in &cases {
        for op in &case.opinions {
            *by_kind.entry(op.kind.as_type_str().to_string()).or_insert(0) += 1;
        }
    }
    let mut kinds: Vec<_> = by_kind.into_iter().collect();
    kinds.sort();

    let mut report = String::new();
    writeln!(report, "cases\t{}", cases.len()).unwrap();
    writeln!(report, "parse_errors\t{}", failures.len()).unwrap();
    writeln!(report, "duplicate_ids\t{}", duplicates.len()).unwrap();
    for (kind, count) in kinds {
        writeln!(report, "opinions[{kind}]\t{count}").unwrap();
    }
    for line in &failures {
        writeln!(report, "error\t{line}").unwrap();
    }
    fs::write(&args.out, &report).map_err(io)?;
    print!("{report}");
    write_sidecar(&args.out, &[("page_size", page_size.to_string())])
}

fn run_pretrain_data(args: PretrainDataArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let defaults = QualityRules::default();
    let rules = QualityRules {
        min_tokens: effective(args.min_tokens, cfg, "min_tokens", defaults.min_tokens)?,
        min_alpha_ratio: effective(
            args.min_alpha_ratio,
            cfg,
            "min_alpha_ratio",
            defaults.min_alpha_ratio,
        )?,
        max_chars: effective(args.max_chars, cfg, "max_chars", defaults.max_chars)?,
    };
    if !(0.0..=1.0).contains(&rules.min_alpha_ratio) || rules.min_tokens == 0 {
        return Err(CliError::Validation("invalid quality rules".into()));
    }
    let max_file_bytes = effective(
        args.max_file_bytes,
        cfg,
        "max_file_bytes",
        DEFAULT_MAX_FILE_BYTES,
    )?;

    let (cases, failures, _) = collect_cases(&args.inputs, 100)?;
    let opinions = cases.iter().flat_map(|case| {
        case.opinions
            .iter()
            .enumerate()
            .map(move |(i, op)| (case.id, i, op))
    });
    let docs = build_documents(opinions, &rules);
    let files = write_pretrain_files(&docs, &args.out_dir, max_file_bytes).map_err(io)?;

    let total_sentences: usize = docs.iter().map(|d| d.sentences.len()).sum();
    println!("documents\t{}", docs.len());
    println!("sentences\t{total_sentences}");
    println!("parse_errors\t{}", failures.len());
    for f in &files {
        println!("file\t{}", f.display());
    }
    write_sidecar(
        &args.out_dir,
        &[
            ("min_tokens", rules.min_tokens.to_string()),
            ("min_alpha_ratio", rules.min_alpha_ratio.to_string()),
            ("max_chars", rules.max_chars.to_string()),
            ("max_file_bytes", max_file_bytes.to_string()),
        ],
    )
}

fn parse_split_ratios(spec: &str, seed: u64) -> Result<SplitSpec, CliError> {
    let fractions: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("bad split spec {spec:?}")))?;
    let names = ["train", "validation", "test", "extra"];
    let ratios = fractions
        .iter()
        .enumerate()
        .map(|(i, f)| (names.get(i).unwrap_or(&"extra").to_string(), *f))
        .collect();
    SplitSpec::new(ratios, seed).map_err(invalid)
}

fn run_classify_data(args: ClassifyDataArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let target_words = effective(args.target_words, cfg, "target_words", 150)?;
    let seed = effective(args.seed, cfg, "seed", 0)?;
    let split = args
        .split
        .or(cfg.get("split")?)
        .unwrap_or_else(|| "0.7,0.15,0.15".to_string());
    let spec = parse_split_ratios(&split, seed)?;

    let (cases, _, _) = collect_cases(&args.inputs, 100)?;
    let records = build_classification_dataset(&cases, target_words);
    let empties = records.iter().filter(|r| r.text.is_empty()).count();
    write_classification_tsv(&records, &args.out).map_err(io)?;

    let parts = split_items(records, &spec).map_err(invalid)?;
    println!("records\t{}", parts.iter().map(|(_, p)| p.len()).sum::<usize>());
    if empties > 0 {
        eprintln!("warning: {empties} records have empty summaries");
    }
    for (name, part) in &parts {
        let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
        let path = args.out.with_file_name(format!("{stem}.{name}.tsv"));
        write_classification_tsv(part, &path).map_err(io)?;
        println!("{name}\t{}\t{}", part.len(), path.display());
    }
    write_sidecar(
        &args.out,
        &[
            ("target_words", target_words.to_string()),
            ("split", split),
            ("seed", seed.to_string()),
        ],
    )
}

fn run_vocab_extend(args: VocabExtendArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let threshold = effective(args.threshold, cfg, "threshold", 30)?;
    let vocab = Vocabulary::load(&args.vocab, args.cased).map_err(invalid)?;
    let mut terms = load_dictionary(&args.dictionary).map_err(invalid)?;

    let has_frequencies = terms.iter().any(|t| t.doc_frequency > 0);
    if !has_frequencies {
        let corpus_path = args.corpus.as_ref().ok_or_else(|| {
            CliError::Validation(
                "dictionary has no frequency column; --corpus is required to compute it".into(),
            )
        })?;
        let corpus = read_classification_tsv(corpus_path).map_err(io)?;
        term_doc_frequency(&mut terms, &corpus);
    }

    let (extended, added) = extend_vocab(&vocab, &terms, threshold);
    extended.save(&args.out).map_err(io)?;

    let added_path = {
        let mut name = args.out.file_name().unwrap_or_default().to_os_string();
        name.push(".added");
        args.out.with_file_name(name)
    };
    fs::write(&added_path, added.join("\n") + "\n").map_err(io)?;
    println!("vocab_size\t{}", extended.len());
    println!("added\t{}", added.len());
    for t in &added {
        println!("term\t{t}");
    }
    write_sidecar(
        &args.out,
        &[
            ("threshold", threshold.to_string()),
            ("cased", args.cased.to_string()),
        ],
    )
}

fn run_instances(args: InstancesArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let d = PretrainConfig::default();
    let pretrain_cfg = PretrainConfig {
        max_seq_length: effective(args.max_seq_length, cfg, "max_seq_length", d.max_seq_length)?,
        dupe_factor: effective(args.dupe_factor, cfg, "dupe_factor", d.dupe_factor)?,
        masked_lm_prob: effective(args.masked_lm_prob, cfg, "masked_lm_prob", d.masked_lm_prob)?,
        max_predictions_per_seq: effective(
            args.max_predictions_per_seq,
            cfg,
            "max_predictions_per_seq",
            d.max_predictions_per_seq,
        )?,
        short_seq_prob: effective(args.short_seq_prob, cfg, "short_seq_prob", d.short_seq_prob)?,
        random_seed: effective(args.random_seed, cfg, "random_seed", d.random_seed)?,
    };
    if !(0.0..1.0).contains(&pretrain_cfg.masked_lm_prob)
        || pretrain_cfg.masked_lm_prob <= 0.0
        || pretrain_cfg.max_predictions_per_seq == 0
        || pretrain_cfg.dupe_factor == 0
        || pretrain_cfg.max_seq_length < 5
    {
        return Err(CliError::Validation("invalid pretraining config".into()));
    }

    let vocab = Vocabulary::load(&args.vocab, args.cased).map_err(invalid)?;
    let mut part_files: Vec<PathBuf> = fs::read_dir(&args.pretrain_dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("part-") && n.ends_with(".txt"))
                .unwrap_or(false)
        })
        .collect();
    part_files.sort();
    let docs: Vec<SentenceDoc> = read_pretrain_files(&part_files)
        .map_err(io)?
        .into_iter()
        .map(|sentences| SentenceDoc {
            sentences,
            source_case_id: 0,
            source_opinion_index: 0,
        })
        .collect();

    let instances = create_instances(&docs, &vocab, &pretrain_cfg).map_err(invalid)?;
    let written = serialize_instances(&instances, &vocab, &pretrain_cfg, &args.out).map_err(io)?;
    println!("instances\t{written}");
    write_sidecar(
        &args.out,
        &[
            ("max_seq_length", pretrain_cfg.max_seq_length.to_string()),
            ("dupe_factor", pretrain_cfg.dupe_factor.to_string()),
            ("masked_lm_prob", pretrain_cfg.masked_lm_prob.to_string()),
            (
                "max_predictions_per_seq",
                pretrain_cfg.max_predictions_per_seq.to_string(),
            ),
            ("short_seq_prob", pretrain_cfg.short_seq_prob.to_string()),
            ("random_seed", pretrain_cfg.random_seed.to_string()),
            ("cased", args.cased.to_string()),
        ],
    )
}

fn run_ner_merge(args: NerMergeArgs, _cfg: &ConfigMap) -> Result<(), CliError> {
    let mapping = match &args.mapping {
        Some(path) => TagMapping::load(path).map_err(invalid)?,
        None => TagMapping::default_mapping(),
    };
    let corpus_a = read_conll(&args.a).map_err(io)?;
    let corpus_b = read_conll(&args.b).map_err(io)?;
    if corpus_a.len() != corpus_b.len() {
        return Err(CliError::Validation(format!(
            "annotation sentence counts differ: {} vs {}",
            corpus_a.len(),
            corpus_b.len()
        )));
    }

    let remap = |s: TaggedSentence| -> Result<TaggedSentence, CliError> {
        let source: Vec<String> = s.tags.iter().map(|t| t.as_str().to_string()).collect();
        map_tags(s.tokens, &source, &mapping).map_err(invalid)
    };

    let mut merged = Vec::with_capacity(corpus_a.len());
    let mut conflicts = Vec::new();
    for (i, (a, b)) in corpus_a.into_iter().zip(corpus_b).enumerate() {
        let a = remap(a)?;
        let b = remap(b)?;
        let (m, mut c) = merge(&a, &b, i).map_err(invalid)?;
        merged.push(m);
        conflicts.append(&mut c);
    }

    let mut rules = builtin_rules();
    if let Some(path) = &args.rules {
        rules.extend(load_rules(path).map_err(invalid)?);
    }
    let changes = apply_corrections(&mut merged, &rules);

    write_conll(&merged, &args.out, false).map_err(io)?;
    let suffixed = |suffix: &str| {
        let mut name = args.out.file_name().unwrap_or_default().to_os_string();
        name.push(suffix);
        args.out.with_file_name(name)
    };
    write_conflicts(&conflicts, &suffixed(".conflicts.tsv")).map_err(io)?;
    let mut change_log = String::new();
    for ch in &changes {
        writeln!(
            change_log,
            "{}\t{}\t{}\t{}\t{}",
            ch.rule, ch.sentence_index, ch.token_index, ch.old_tag, ch.new_tag
        )
        .unwrap();
    }
    fs::write(suffixed(".changes.tsv"), change_log).map_err(io)?;

    println!("sentences\t{}", merged.len());
    println!("conflicts\t{}", conflicts.len());
    println!("corrections\t{}", changes.len());
    for (tag, count) in tag_population(&merged) {
        println!("population[{tag}]\t{count}");
    }
    write_sidecar(
        &args.out,
        &[
            (
                "mapping",
                args.mapping
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "builtin".into()),
            ),
            (
                "rules",
                args.rules
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "builtin".into()),
            ),
        ],
    )
}

fn run_eval(args: EvalArgs, _cfg: &ConfigMap) -> Result<(), CliError> {
    match args.mode.as_str() {
        "classify" => {
            let read_labels = |p: &Path| -> Result<Vec<String>, CliError> {
                Ok(fs::read_to_string(p)
                    .map_err(io)?
                    .lines()
                    .filter(|l| !l.is_empty())
                    .map(|l| l.to_string())
                    .collect())
            };
            let truth = read_labels(&args.truth)?;
            let pred = read_labels(&args.pred)?;
            let mut labels: Vec<String> = truth.iter().chain(&pred).cloned().collect::<HashSet<_>>().into_iter().collect();
            labels.sort();
            let m = lexforge_core::metrics::confusion(&truth, &pred, &labels).map_err(invalid)?;
            let report = lexforge_core::metrics::classification_report(&m).map_err(invalid)?;
            print!("{}", format_report(&report));
        }
        "ner" => {
            let truth = read_conll(&args.truth).map_err(io)?;
            let pred = read_conll(&args.pred).map_err(io)?;
            let truth_tags: Vec<Vec<_>> = truth.into_iter().map(|s| s.tags).collect();
            let pred_tags: Vec<Vec<_>> = pred.into_iter().map(|s| s.tags).collect();
            let scores = ner_scores(&truth_tags, &pred_tags).map_err(invalid)?;
            println!("precision\t{:.4}", round4(scores.precision));
            println!("recall\t{:.4}", round4(scores.recall));
            println!("f1-score\t{:.4}", round4(scores.f1));
            println!("accuracy\t{:.4}", round4(scores.accuracy));
            if scores.all_o {
                println!("all_o\ttrue");
            }
            println!("label\tprecision\trecall\tf1-score\tsupport");
            for row in per_entity_report(&truth_tags, &pred_tags).map_err(invalid)? {
                println!(
                    "{}\t{:.4}\t{:.4}\t{:.4}\t{}",
                    row.label,
                    round4(row.precision),
                    round4(row.recall),
                    round4(row.f1),
                    row.support
                );
            }
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown eval mode {other:?}, expected classify or ner"
            )))
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match ConfigMap::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return report(e),
    };
    let result = match cli.command {
        Command::Ingest(args) => run_ingest(args, &cfg),
        Command::PretrainData(args) => run_pretrain_data(args, &cfg),
        Command::ClassifyData(args) => run_classify_data(args, &cfg),
        Command::VocabExtend(args) => run_vocab_extend(args, &cfg),
        Command::Instances(args) => run_instances(args, &cfg),
        Command::NerMerge(args) => run_ner_merge(args, &cfg),
        Command::Eval(args) => run_eval(args, &cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    match e {
        CliError::Validation(msg) => {
            eprintln!("ERROR 1: {msg}");
            ExitCode::from(1)
        }
        CliError::Io(msg) => {
            eprintln!("ERROR 2: {msg}");
            ExitCode::from(2)
        }
    }
}
