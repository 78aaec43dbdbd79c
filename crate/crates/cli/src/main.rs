//! `cxg`: learn construction grammars from unannotated corpora and evaluate
//! them by corpus compression.
//!
//! Subcommands: `ingest` (text -> annotated corpus), `learn` (the three-pass
//! induction over folds and restarts), `evaluate` (price a grammar against a
//! held-out corpus), `parse` (render construction matches), and `stability`
//! (cross-restart agreement).
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cxg_core::corpus::{
    cluster_embeddings, ingest_annotated_file, ingest_plain, EmbeddingTable, SemanticMap,
    TagLexicon,
};
use cxg_core::encoder::{confidence, corpus_mdl, cover, decode};
use cxg_core::grammar::{fuse_lexical, syn_to_rules, Cfg};
use cxg_core::pipeline::{evaluate, run_folds_to, stability, RunConfig};
use cxg_core::search::render_trace;
use cxg_core::{AnnotatedCorpus, Grammar, Level, Rep, SegmentScheme};

#[derive(Parser)]
#[command(name = "cxg", version, about = "Construction grammar induction by MDL-guided tabu search")]
struct Cli {
    /// Plain-text `key = value` config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores). Results are identical for any
    /// thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate plain text and write the tab-separated corpus format.
    Ingest(IngestArgs),
    /// Learn grammars over folds and restarts; write grammars, traces, and
    /// reports.
    Learn(LearnArgs),
    /// Price a grammar against a corpus and report compression.
    Evaluate(EvaluateArgs),
    /// Render construction matches over a corpus.
    Parse(ParseArgs),
    /// Joint content/quality stability of two or more grammars.
    Stability(StabilityArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Plain UTF-8 text, one sentence per line.
    #[arg(long)]
    text: PathBuf,
    /// Tag lexicon: `word<TAB>tag` rows (most frequent tag per word).
    #[arg(long)]
    lexicon: PathBuf,
    /// Semantic map: `word<TAB>domainId` rows.
    #[arg(long, conflicts_with = "embeddings")]
    semantic_map: Option<PathBuf>,
    /// Word embeddings (`word v1 .. vd` rows) to cluster into domains.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Number of semantic domains for embedding clustering.
    #[arg(long)]
    k: Option<usize>,
    /// Clustering seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the derived semantic map (embeddings mode only).
    #[arg(long)]
    map_out: Option<PathBuf>,
    /// Output corpus file.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    /// Annotated corpus (`word<TAB>tag<TAB>domain` rows).
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for grammars, traces, and reports.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Threshold-grid bins per association feature.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    max_slots: Option<usize>,
    #[arg(long)]
    min_freq: Option<u64>,
    /// Segment sizes `candidate,restart,restart_full,eval` (sentences).
    #[arg(long)]
    scheme: Option<String>,
    /// Run the pipeline only up to this pass: lex, syn, or full.
    #[arg(long)]
    passes: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Grammar file to price.
    #[arg(long)]
    grammar: PathBuf,
    /// Annotated corpus to price it against.
    #[arg(long)]
    corpus: PathBuf,
    /// Lexical grammar used to fuse the corpus before matching.
    #[arg(long)]
    lex_grammar: Option<PathBuf>,
    /// Syntactic grammar supplying phrase structure rules.
    #[arg(long)]
    syn_grammar: Option<PathBuf>,
    /// Second grammar: report the confidence (absolute MDL difference).
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Write the report here as well as to stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lex_grammar: Option<PathBuf>,
    #[arg(long)]
    syn_grammar: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    /// Evaluation corpus used to compute each grammar's MDL.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lex_grammar: Option<PathBuf>,
    #[arg(long)]
    syn_grammar: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Two or more grammar files.
    #[arg(required = false)]
    grammars: Vec<PathBuf>,
}

/// Errors carrying their exit code: usage/config problems exit 1, data
/// problems exit 2.
enum CliError {
    Usage(String),
    Data(String),
}

impl From<cxg_core::Error> for CliError {
    fn from(e: cxg_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let file_config = match cli.config.as_deref().map(read_config_file).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => return report(e),
    };

    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args, &file_config),
        Command::Learn(args) => cmd_learn(args, &file_config),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Parse(args) => cmd_parse(args),
        Command::Stability(args) => cmd_stability(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    match e {
        CliError::Usage(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        CliError::Data(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Parse a `key = value` config file; `#` starts a comment.
fn read_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected `key = value`", lineno + 1)))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn config_get<T: std::str::FromStr>(
    file: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| usage(format!("config key `{key}`: cannot parse `{v}`"))),
    }
}

fn parse_scheme(spec: &str, restarts: usize) -> Result<SegmentScheme, CliError> {
    let parts: Vec<usize> = spec
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad scheme `{spec}`: expected 4 comma-separated sizes")))?;
    if parts.len() != 4 {
        return Err(usage(format!(
            "bad scheme `{spec}`: expected `candidate,restart,restart_full,eval`"
        )));
    }
    Ok(SegmentScheme {
        candidate: parts[0],
        restart_test: parts[1],
        restart_test_full: parts[2],
        restarts,
        eval: parts[3],
    })
}

/// Render the effective configuration as `# cfg` comment lines for the
/// provenance echo at the top of every output file.
fn echo_block(pairs: &[(String, String)]) -> String {
    let mut sorted = pairs.to_vec();
    sorted.sort();
    let mut out = String::new();
    for (k, v) in sorted {
        let _ = writeln!(out, "# cfg {k} = {v}");
    }
    out
}

fn write_output(path: &Path, echo: &str, body: &str) -> Result<(), CliError> {
    fs::write(path, format!("{echo}{body}"))?;
    Ok(())
}

fn load_corpus(path: &Path) -> Result<AnnotatedCorpus, CliError> {
    ingest_annotated_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_grammar(
    path: &Path,
    corpus: &mut AnnotatedCorpus,
    default_level: Option<Level>,
) -> Result<Grammar, CliError> {
    Grammar::load_file(path, corpus, default_level)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Fuse and derive phrase rules so a corpus matches a grammar's preparation
/// stage, validating the level against the supplied artifacts.
fn prepare_corpus(
    corpus: AnnotatedCorpus,
    level: Level,
    lex_grammar: Option<&PathBuf>,
    syn_grammar: Option<&PathBuf>,
) -> Result<(AnnotatedCorpus, Cfg), CliError> {
    match level {
        Level::Lex if lex_grammar.is_some() || syn_grammar.is_some() => {
            return Err(usage(
                "a lex-level grammar is matched against the raw corpus; drop --lex-grammar/--syn-grammar",
            ));
        }
        Level::Syn if syn_grammar.is_some() => {
            return Err(usage(
                "a syn-level grammar does not use phrase rules; drop --syn-grammar",
            ));
        }
        _ => {}
    }
    let mut prepared = corpus;
    if let Some(path) = lex_grammar {
        let g = load_grammar(path, &mut prepared, Some(Level::Lex))?;
        if g.level != Level::Lex {
            return Err(usage(format!(
                "--lex-grammar {} is a {} grammar",
                path.display(),
                g.level
            )));
        }
        prepared = fuse_lexical(&prepared, &g);
    }
    let cfg = match syn_grammar {
        Some(path) => {
            let g = load_grammar(path, &mut prepared, Some(Level::Syn))?;
            if g.level != Level::Syn {
                return Err(usage(format!(
                    "--syn-grammar {} is a {} grammar",
                    path.display(),
                    g.level
                )));
            }
            syn_to_rules(&g, &prepared)
        }
        None => Cfg::default(),
    };
    Ok((prepared, cfg))
}

fn all_sentences(corpus: &AnnotatedCorpus) -> Vec<u32> {
    (0..corpus.sentence_count() as u32).collect()
}

fn cmd_ingest(args: IngestArgs, file_config: &HashMap<String, String>) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.text.display())))?;
    let lexicon = TagLexicon::load(&args.lexicon)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.lexicon.display())))?;

    let k = args
        .k
        .or(config_get(file_config, "k")?)
        .unwrap_or(100);
    let seed = args
        .seed
        .or(config_get(file_config, "seed")?)
        .unwrap_or(1);

    let map = match (&args.semantic_map, &args.embeddings) {
        (Some(path), _) => SemanticMap::load(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        (None, Some(path)) => {
            let table = EmbeddingTable::load(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let map = cluster_embeddings(&table, k, seed)?;
            if let Some(out) = &args.map_out {
                fs::write(out, map.export())?;
            }
            map
        }
        (None, None) => {
            return Err(usage("ingest needs --semantic-map or --embeddings"));
        }
    };

    let corpus = ingest_plain(&text, &lexicon, &map)?;
    let echo = echo_block(&[
        ("command".to_string(), "ingest".to_string()),
        ("text".to_string(), args.text.display().to_string()),
        ("lexicon".to_string(), args.lexicon.display().to_string()),
        ("k".to_string(), k.to_string()),
        ("seed".to_string(), seed.to_string()),
    ]);
    write_output(&args.out, &echo, &corpus.export())?;
    println!(
        "ingested {} sentences, {} tokens (vocab: {} lexical, {} syntactic, {} semantic)",
        corpus.sentence_count(),
        corpus.token_count,
        corpus.lex.len(),
        corpus.syn.len(),
        corpus.sem.len()
    );
    Ok(())
}

fn cmd_learn(args: LearnArgs, file_config: &HashMap<String, String>) -> Result<(), CliError> {
    let mut config = RunConfig::default();
    config.folds = args.folds.or(config_get(file_config, "folds")?).unwrap_or(config.folds);
    config.restarts = args
        .restarts
        .or(config_get(file_config, "restarts")?)
        .unwrap_or(config.restarts);
    config.seed = args.seed.or(config_get(file_config, "seed")?).unwrap_or(config.seed);
    config.bins = args.bins.or(config_get(file_config, "bins")?).unwrap_or(config.bins);
    config.max_slots = args
        .max_slots
        .or(config_get(file_config, "max_slots")?)
        .unwrap_or(config.max_slots);
    config.min_freq = args
        .min_freq
        .or(config_get(file_config, "min_freq")?)
        .unwrap_or(config.min_freq);
    if config.folds == 0 || config.restarts == 0 {
        return Err(usage("folds and restarts must be at least 1"));
    }
    let scheme_spec: Option<String> = args.scheme.clone().or(config_get(file_config, "scheme")?);
    if let Some(spec) = &scheme_spec {
        config.scheme = Some(parse_scheme(spec, config.restarts)?);
    }
    let up_to = match args
        .passes
        .clone()
        .or(config_get(file_config, "passes")?)
        .as_deref()
    {
        None => Level::Full,
        Some(p) => Level::parse(p)
            .ok_or_else(|| usage(format!("bad --passes `{p}`: expected lex, syn, or full")))?,
    };

    let corpus = load_corpus(&args.corpus)?;
    fs::create_dir_all(&args.out)?;

    let mut echo_pairs = config.echo();
    echo_pairs.push(("command".to_string(), "learn".to_string()));
    echo_pairs.push(("corpus".to_string(), args.corpus.display().to_string()));
    echo_pairs.push(("passes".to_string(), up_to.to_string()));
    let scheme = config.scheme_for(&corpus);
    echo_pairs.push((
        "effective_scheme".to_string(),
        format!(
            "{},{},{},{}",
            scheme.candidate, scheme.restart_test, scheme.restart_test_full, scheme.eval
        ),
    ));
    let echo = echo_block(&echo_pairs);

    let outcomes = run_folds_to(&corpus, &config, up_to)?;

    for (f, outcome) in outcomes.iter().enumerate() {
        for level in [Level::Lex, Level::Syn, Level::Full] {
            let Some(pass) = outcome.pass(level) else { continue };
            let prefix = args.out.join(format!("fold{f}.{level}"));
            let corpus_for_render = match level {
                Level::Lex => &corpus,
                _ => &outcome.fused,
            };
            write_output(
                &prefix.with_extension("grammar"),
                &echo,
                &pass.grammar.save(corpus_for_render),
            )?;
            write_output(&prefix.with_extension("report"), &echo, &pass.report.render())?;
            for (r, restart) in pass.restarts.iter().enumerate() {
                write_output(
                    &args.out.join(format!("fold{f}.{level}.restart{r}.search.trace")),
                    &echo,
                    &render_trace(&restart.search_trace),
                )?;
                write_output(
                    &args.out.join(format!("fold{f}.{level}.restart{r}.direct.trace")),
                    &echo,
                    &render_trace(&restart.direct_trace),
                )?;
            }
            println!(
                "fold {f} {level}: {} constructions, compression {:.4} (from {} candidates)",
                pass.grammar.len(),
                pass.report.compression,
                pass.candidate_count
            );
        }
    }

    if up_to == Level::Full {
        let report = evaluate(&outcomes)?;
        write_output(&args.out.join("evaluation.report"), &echo, &report.render())?;
        println!("wrote {}", args.out.join("evaluation.report").display());
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus)?;
    let grammar_level = peek_level(&args.grammar)?;
    let (mut prepared, cfg) = prepare_corpus(
        corpus,
        grammar_level,
        args.lex_grammar.as_ref(),
        args.syn_grammar.as_ref(),
    )?;
    let grammar = load_grammar(&args.grammar, &mut prepared, None)?;
    let sentences = all_sentences(&prepared);
    let report = corpus_mdl(&prepared, &sentences, &grammar, &cfg)?;

    let mut body = report.render();
    if let Some(other_path) = &args.compare {
        let other = load_grammar(other_path, &mut prepared, None)?;
        if other.level != grammar.level {
            return Err(usage(format!(
                "cannot compare a {} grammar with a {} grammar",
                grammar.level, other.level
            )));
        }
        let other_report = corpus_mdl(&prepared, &sentences, &other, &cfg)?;
        let _ = writeln!(
            body,
            "confidence\t{:.4}",
            confidence(report.mdl_total, other_report.mdl_total)
        );
    }

    let echo = echo_block(&[
        ("command".to_string(), "evaluate".to_string()),
        ("grammar".to_string(), args.grammar.display().to_string()),
        ("corpus".to_string(), args.corpus.display().to_string()),
    ]);
    print!("{body}");
    if let Some(out) = &args.out {
        write_output(out, &echo, &body)?;
    }
    Ok(())
}

/// Read just the `# level:` header of a grammar file.
fn peek_level(path: &Path) -> Result<Level, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix('#') {
            if let Some(value) = rest.trim().strip_prefix("level:") {
                if let Some(level) = Level::parse(value.trim()) {
                    return Ok(level);
                }
            }
        }
    }
    Err(CliError::Data(format!(
        "{}: grammar file does not declare `# level:`",
        path.display()
    )))
}

fn cmd_parse(args: ParseArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus)?;
    let grammar_level = peek_level(&args.grammar)?;
    let (mut prepared, cfg) = prepare_corpus(
        corpus,
        grammar_level,
        args.lex_grammar.as_ref(),
        args.syn_grammar.as_ref(),
    )?;
    let grammar = load_grammar(&args.grammar, &mut prepared, None)?;

    let mut body = String::new();
    let surface_rep = grammar.level.regret_rep();
    for (i, sentence) in prepared.sentences.iter().enumerate() {
        let words: Vec<&str> = sentence
            .iter()
            .map(|u| prepared.vocab(Rep::Lex).form(u.lex))
            .collect();
        let _ = writeln!(body, "sent\t{i}\t{}", words.join(" "));
        let coverage = cover(sentence, &grammar, &cfg);
        decode(&coverage, &grammar)?; // validates the coverage/grammar pairing
        for span in &coverage.spans {
            let c = &grammar.constructions()[span.construction as usize];
            let covered: Vec<&str> = sentence
                [span.start as usize..(span.start + span.units) as usize]
                .iter()
                .map(|u| prepared.vocab(Rep::Lex).form(u.lex))
                .collect();
            let _ = writeln!(
                body,
                "span\t{}\t{}\t{}\t{}",
                span.start,
                span.start + span.units,
                c.render_brackets(&prepared),
                covered.join(" ")
            );
        }
        for &(pos, unit) in &coverage.regrets {
            let _ = writeln!(
                body,
                "regret\t{pos}\t{}",
                prepared.vocab(surface_rep).form(unit)
            );
        }
    }

    print!("{body}");
    if let Some(out) = &args.out {
        let echo = echo_block(&[
            ("command".to_string(), "parse".to_string()),
            ("grammar".to_string(), args.grammar.display().to_string()),
            ("corpus".to_string(), args.corpus.display().to_string()),
        ]);
        write_output(out, &echo, &body)?;
    }
    Ok(())
}

fn cmd_stability(args: StabilityArgs) -> Result<(), CliError> {
    if args.grammars.len() < 2 {
        return Err(usage("stability needs at least two grammar files"));
    }
    let corpus = load_corpus(&args.corpus)?;
    let level = peek_level(&args.grammars[0])?;
    let (mut prepared, cfg) = prepare_corpus(
        corpus,
        level,
        args.lex_grammar.as_ref(),
        args.syn_grammar.as_ref(),
    )?;
    let mut grammars = Vec::new();
    for path in &args.grammars {
        let g = load_grammar(path, &mut prepared, None)?;
        if g.level != level {
            return Err(usage(format!(
                "{}: level {} differs from the first grammar's {}",
                path.display(),
                g.level,
                level
            )));
        }
        grammars.push(g);
    }
    let sentences = all_sentences(&prepared);
    let mut scored = Vec::new();
    for g in &grammars {
        let report = corpus_mdl(&prepared, &sentences, g, &cfg)?;
        scored.push(report.mdl_total);
    }
    let items: Vec<(&Grammar, f64)> = grammars.iter().zip(scored.iter().copied()).collect();
    let report = stability(&items)?;

    let body = report.render();
    print!("{body}");
    if let Some(out) = &args.out {
        let echo = echo_block(&[
            ("command".to_string(), "stability".to_string()),
            ("corpus".to_string(), args.corpus.display().to_string()),
            (
                "grammars".to_string(),
                args.grammars
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        ]);
        write_output(out, &echo, &body)?;
    }
    Ok(())
}
