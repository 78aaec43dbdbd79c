//! The three-pass induction pipeline with folds, restarts, and stability.
//!
//! Structure accumulates across passes: lexical constructions from the LEX
//! pass are fused into single units, syntactic constructions from the SYN
//! pass become phrase structure rules, and the FULL pass searches over all
//! three representation lines with constituent folding available.

use std::collections::HashSet;

use crate::assoc::{extract_candidates, ExtractParams};
use crate::corpus::{segment, AnnotatedCorpus, DataSegments, SegmentScheme};
use crate::encoder::{corpus_mdl_view, EncodingReport, SegmentView};
use crate::error::{Error, Result};
use crate::grammar::{fuse_lexical, syn_to_rules, Cfg, Grammar, Level};
use crate::search::{direct_search, parameter_search, SearchConfig, TraceRecord};

/// Pipeline-level knobs. Defaults follow the experimental protocol: two
/// folds, two restarts, 20 grid bins, constructions of up to 5 slots,
/// minimum candidate frequency 5.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub folds: usize,
    pub restarts: usize,
    pub bins: usize,
    pub max_slots: usize,
    pub min_freq: u64,
    pub full_top_m: usize,
    pub seed: u64,
    /// Sentence budget per fold; None scales the full-scale scheme down to
    /// the corpus.
    pub scheme: Option<SegmentScheme>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            folds: 2,
            restarts: 2,
            bins: 20,
            max_slots: 5,
            min_freq: 5,
            full_top_m: 8,
            seed: 1,
            scheme: None,
        }
    }
}

impl RunConfig {
    pub fn scheme_for(&self, corpus: &AnnotatedCorpus) -> SegmentScheme {
        match &self.scheme {
            Some(s) => s.clone(),
            None => SegmentScheme::scaled_to(corpus.sentence_count(), self.restarts),
        }
    }

    fn search_config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            bins: self.bins,
            seed,
            ..SearchConfig::default()
        }
    }

    /// Render as `key = value` lines, the provenance echo embedded in every
    /// output file.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("folds".to_string(), self.folds.to_string()),
            ("restarts".to_string(), self.restarts.to_string()),
            ("bins".to_string(), self.bins.to_string()),
            ("max_slots".to_string(), self.max_slots.to_string()),
            ("min_freq".to_string(), self.min_freq.to_string()),
            ("full_top_m".to_string(), self.full_top_m.to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        if let Some(s) = &self.scheme {
            out.push((
                "scheme".to_string(),
                format!(
                    "{},{},{},{}",
                    s.candidate, s.restart_test, s.restart_test_full, s.eval
                ),
            ));
        }
        out
    }
}

fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base;
    for &p in parts {
        h = h.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(p + 1);
    }
    h
}

/// One restart's search products.
#[derive(Debug, Clone)]
pub struct RestartResult {
    pub grammar: Grammar,
    /// MDL of this restart's grammar on the held-out evaluation segment.
    pub eval_mdl: f64,
    pub search_trace: Vec<TraceRecord>,
    pub direct_trace: Vec<TraceRecord>,
}

/// One pass over one fold: the optimum grammar across restarts with its
/// held-out report, plus everything the next pass consumes.
#[derive(Debug, Clone)]
pub struct PassResult {
    pub level: Level,
    pub grammar: Grammar,
    pub report: EncodingReport,
    /// Phrase structure rules derived from the optimum grammar (SYN only).
    pub cfg: Option<Cfg>,
    pub restarts: Vec<RestartResult>,
    pub candidate_count: usize,
}

/// Run one pass: extract candidates, search per restart, evaluate on the
/// held-out segment, and keep the lowest-MDL restart as the optimum.
pub fn run_pass(
    level: Level,
    corpus: &AnnotatedCorpus,
    cfg: &Cfg,
    segments: &DataSegments,
    config: &RunConfig,
    fold: u64,
) -> Result<PassResult> {
    let params = ExtractParams {
        level,
        min_len: 2,
        max_len: config.max_slots,
        min_freq: config.min_freq,
        full_top_m: config.full_top_m,
    };
    let table = extract_candidates(corpus, &segments.candidate, &params)?;
    let alphabet_sizes = corpus.alphabet_sizes();

    let eval_view = SegmentView::new(corpus, &segments.eval, cfg);
    let mut restarts = Vec::with_capacity(segments.restart_tests.len());
    for r in 0..segments.restart_tests.len() {
        let test_sentences: &[u32] = match level {
            Level::Full => segments.full_restart_test(r),
            _ => &segments.restart_tests[r],
        };
        let view = SegmentView::new(corpus, test_sentences, cfg);
        let seed = derive_seed(config.seed, &[fold, level_index(level), r as u64]);
        let search_config = config.search_config(seed);
        let searched = parameter_search(&table, &view, level, alphabet_sizes, &search_config)?;
        let direct = direct_search(&searched.grammar, &table, &view, &search_config)?;
        let eval_mdl = corpus_mdl_view(&eval_view, &direct.grammar)?.mdl_total;
        restarts.push(RestartResult {
            grammar: direct.grammar,
            eval_mdl,
            search_trace: searched.trace,
            direct_trace: direct.trace,
        });
    }

    let optimum = restarts
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.eval_mdl.total_cmp(&b.eval_mdl))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::invalid("pass ran with zero restarts"))?;
    let grammar = restarts[optimum].grammar.clone();
    let report = corpus_mdl_view(&eval_view, &grammar)?;
    let cfg_out = match level {
        Level::Syn => Some(syn_to_rules(&grammar, corpus)),
        _ => None,
    };
    Ok(PassResult {
        level,
        grammar,
        report,
        cfg: cfg_out,
        restarts,
        candidate_count: table.len(),
    })
}

fn level_index(level: Level) -> u64 {
    match level {
        Level::Lex => 0,
        Level::Syn => 1,
        Level::Full => 2,
    }
}

/// Everything produced by the passes over one fold. `syn` and `full` are
/// absent when the run stopped at an earlier pass.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub lex: PassResult,
    pub syn: Option<PassResult>,
    pub full: Option<PassResult>,
    /// The corpus after lexical fusion; SYN and FULL grammars reference its
    /// vocabularies.
    pub fused: AnnotatedCorpus,
    pub segments: DataSegments,
}

impl FoldOutcome {
    pub fn pass(&self, level: Level) -> Option<&PassResult> {
        match level {
            Level::Lex => Some(&self.lex),
            Level::Syn => self.syn.as_ref(),
            Level::Full => self.full.as_ref(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.syn.is_some() && self.full.is_some()
    }
}

/// Run the passes in order up to `up_to`, accumulating structure: LEX fuses,
/// SYN yields phrase rules, FULL folds constituents.
pub fn run_passes(
    corpus: &AnnotatedCorpus,
    segments: &DataSegments,
    config: &RunConfig,
    fold: u64,
    up_to: Level,
) -> Result<FoldOutcome> {
    debug_assert!(segments_disjoint(segments), "segments overlap");
    let empty_cfg = Cfg::default();
    let lex = run_pass(Level::Lex, corpus, &empty_cfg, segments, config, fold)?;
    let fused = fuse_lexical(corpus, &lex.grammar);
    let mut outcome = FoldOutcome {
        lex,
        syn: None,
        full: None,
        fused,
        segments: segments.clone(),
    };
    if up_to == Level::Lex {
        return Ok(outcome);
    }
    let syn = run_pass(Level::Syn, &outcome.fused, &empty_cfg, segments, config, fold)?;
    let cfg = syn.cfg.clone().expect("SYN pass always yields a CFG");
    outcome.syn = Some(syn);
    if up_to == Level::Syn {
        return Ok(outcome);
    }
    outcome.full = Some(run_pass(
        Level::Full,
        &outcome.fused,
        &cfg,
        segments,
        config,
        fold,
    )?);
    Ok(outcome)
}

/// Run all three passes over one fold.
pub fn run_all(
    corpus: &AnnotatedCorpus,
    segments: &DataSegments,
    config: &RunConfig,
    fold: u64,
) -> Result<FoldOutcome> {
    run_passes(corpus, segments, config, fold, Level::Full)
}

fn segments_disjoint(segments: &DataSegments) -> bool {
    let mut seen = HashSet::new();
    let mut all = segments.candidate.clone();
    all.extend(segments.restart_tests.iter().flatten());
    all.extend(&segments.eval);
    all.into_iter().all(|i| seen.insert(i))
}

/// Cross-validation driver: segment per fold with a fold-derived seed and
/// run the passes up to `up_to`.
pub fn run_folds_to(
    corpus: &AnnotatedCorpus,
    config: &RunConfig,
    up_to: Level,
) -> Result<Vec<FoldOutcome>> {
    let scheme = config.scheme_for(corpus);
    let mut outcomes = Vec::with_capacity(config.folds);
    for fold in 0..config.folds {
        let segments = segment(corpus, &scheme, derive_seed(config.seed, &[fold as u64]))?;
        outcomes.push(run_passes(corpus, &segments, config, fold as u64, up_to)?);
    }
    Ok(outcomes)
}

/// Cross-validation driver over all three passes.
pub fn run_folds(corpus: &AnnotatedCorpus, config: &RunConfig) -> Result<Vec<FoldOutcome>> {
    run_folds_to(corpus, config, Level::Full)
}

/// Jaccard agreement between two grammars' construction sets. Two empty
/// grammars agree completely.
pub fn jaccard(a: &Grammar, b: &Grammar) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let sa: HashSet<_> = a.constructions().iter().collect();
    let sb: HashSet<_> = b.constructions().iter().collect();
    let intersection = sa.intersection(&sb).count() as f64;
    let union = sa.union(&sb).count() as f64;
    intersection / union
}

/// MDL agreement: 1 - |MDL(k) - MDL(i)| / MDL(k), clamped below at 0 so the
/// stability metric stays in [0, 1].
pub fn mdl_agreement(mdl_k: f64, mdl_i: f64) -> Result<f64> {
    if mdl_k <= 0.0 {
        return Err(Error::invalid("optimum MDL must be positive"));
    }
    Ok((1.0 - (mdl_k - mdl_i).abs() / mdl_k).max(0.0))
}

/// One restart's contribution to the stability score.
#[derive(Debug, Clone)]
pub struct StabilityTerm {
    pub jaccard: f64,
    pub mdl_agreement: f64,
    pub product: f64,
}

/// Joint stability of grammar content and quality across restarts.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// Index of the optimum (lowest-MDL) grammar among the inputs.
    pub optimum: usize,
    pub terms: Vec<StabilityTerm>,
    pub sta: f64,
}

impl StabilityReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("optimum\t{}\n", self.optimum));
        out.push_str(&format!("n\t{}\n", self.terms.len()));
        for (i, t) in self.terms.iter().enumerate() {
            out.push_str(&format!("a.{i}\t{:.4}\n", t.jaccard));
            out.push_str(&format!("m.{i}\t{:.4}\n", t.mdl_agreement));
            out.push_str(&format!("product.{i}\t{:.4}\n", t.product));
        }
        out.push_str(&format!("sta\t{:.4}\n", self.sta));
        out
    }
}

/// STA: mean of per-restart Jaccard x MDL-agreement against the optimum
/// grammar, over all output grammars (the optimum contributes 1).
pub fn stability(grammars: &[(&Grammar, f64)]) -> Result<StabilityReport> {
    if grammars.is_empty() {
        return Err(Error::invalid("stability requires at least one grammar"));
    }
    let optimum = grammars
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap();
    let (g_k, mdl_k) = grammars[optimum];
    let mut terms = Vec::with_capacity(grammars.len());
    let mut sum = 0.0;
    for &(g_i, mdl_i) in grammars {
        let a = jaccard(g_k, g_i);
        let m = mdl_agreement(mdl_k, mdl_i)?;
        let product = a * m;
        sum += product;
        terms.push(StabilityTerm {
            jaccard: a,
            mdl_agreement: m,
            product,
        });
    }
    Ok(StabilityReport {
        optimum,
        terms,
        sta: sum / grammars.len() as f64,
    })
}

/// The cross-fold evaluation report: per-level compression, grammar sizes,
/// and stability, rendered as `key<TAB>value` records.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub records: Vec<(String, String)>,
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.records {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.records
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Aggregate fold results: per level, compression and grammar size per fold,
/// the mean compression, and STA over all restart grammars pooled across
/// folds.
pub fn evaluate(outcomes: &[FoldOutcome]) -> Result<EvalReport> {
    if outcomes.is_empty() {
        return Err(Error::invalid("no fold outcomes to evaluate"));
    }
    let mut records = Vec::new();
    for level in [Level::Lex, Level::Syn, Level::Full] {
        let name = level.name();
        let mut compressions = Vec::new();
        for (f, outcome) in outcomes.iter().enumerate() {
            let pass = outcome.pass(level).ok_or_else(|| {
                Error::invalid(format!("fold {f} is missing its {name} pass"))
            })?;
            records.push((
                format!("{name}.fold{f}.compression"),
                format!("{:.4}", pass.report.compression),
            ));
            records.push((
                format!("{name}.fold{f}.mdl"),
                format!("{:.4}", pass.report.mdl_total),
            ));
            records.push((
                format!("{name}.fold{f}.grammar_size"),
                pass.grammar.len().to_string(),
            ));
            compressions.push(pass.report.compression);
        }
        let mean = compressions.iter().sum::<f64>() / compressions.len() as f64;
        records.push((format!("{name}.mean_compression"), format!("{mean:.4}")));

        let pool: Vec<(&Grammar, f64)> = outcomes
            .iter()
            .filter_map(|o| o.pass(level))
            .flat_map(|p| p.restarts.iter())
            .map(|r| (&r.grammar, r.eval_mdl))
            .collect();
        let sta = stability(&pool)?;
        records.push((format!("{name}.sta"), format!("{:.4}", sta.sta)));
    }
    Ok(EvalReport { records })
}
