//! Pricing grammars and corpora in nats.
//!
//! The encoding model has two top-level categories, Constructions and
//! Regret, each with probability 0.5. A construction usage costs the
//! category bit plus a uniform pointer into the grammar; every unit instance
//! not described by any construction is stored independently in Regret at
//! the category bit plus a uniform pointer among all regret instances. The
//! grammar itself is priced once per construction, slot by slot, including
//! the lexicon-of-units share of the code.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::{AnnotatedCorpus, Rep, Unit};
use crate::error::{Error, Result};
use crate::grammar::{construction_matches_folded, Cfg, Construction, FoldTable, Grammar};

/// Cost in nats of selecting a top-level category and then one unit within
/// it, both uniformly.
pub fn code_cost(category_count: u64, unit_count: u64) -> Result<f64> {
    if category_count == 0 || unit_count == 0 {
        return Err(Error::invalid("code_cost requires counts of at least 1"));
    }
    Ok((category_count as f64).ln() + (unit_count as f64).ln())
}

/// One-time encoding cost of a construction: for each slot, the cost of
/// selecting the representation type plus a uniform unit within it.
pub fn construction_cost(c: &Construction, g: &Grammar) -> Result<f64> {
    let t_r = g.rep_type_count() as f64;
    let mut total = 0.0;
    for slot in &c.slots {
        let n = g.alphabet_sizes[slot.rep.index()];
        if n == 0 {
            return Err(Error::invalid(format!(
                "grammar has no alphabet for representation {}",
                slot.rep
            )));
        }
        total += t_r.ln() + (n as f64).ln();
    }
    Ok(total)
}

/// Total grammar cost: the sum of its construction costs. Regret adds no
/// model cost.
pub fn grammar_cost(g: &Grammar) -> Result<f64> {
    let mut total = 0.0;
    for c in g.constructions() {
        total += construction_cost(c, g)?;
    }
    Ok(total)
}

/// Uncompressed encoding size of a segment: every one of its N unit
/// instances priced in Regret.
pub fn baseline(corpus: &AnnotatedCorpus, sentences: &[u32]) -> Result<f64> {
    let n: u64 = sentences
        .iter()
        .map(|&si| corpus.sentences[si as usize].len() as u64)
        .sum();
    if n == 0 {
        return Err(Error::invalid("baseline of an empty segment is undefined"));
    }
    Ok(regret_cost(n))
}

fn regret_cost(regret_total: u64) -> f64 {
    if regret_total == 0 {
        0.0
    } else {
        regret_total as f64 * (2f64.ln() + (regret_total as f64).ln())
    }
}

/// Relative compression: 1 - mdl/baseline. Negative values mean the grammar
/// makes the metric worse.
pub fn compression(mdl_total: f64, baseline_u: f64) -> Result<f64> {
    if baseline_u <= 0.0 {
        return Err(Error::invalid("baseline must be positive"));
    }
    Ok(1.0 - mdl_total / baseline_u)
}

/// Confidence that one grammar differs from another: absolute MDL distance.
pub fn confidence(mdl_a: f64, mdl_b: f64) -> f64 {
    (mdl_a - mdl_b).abs()
}

/// A matched span in a covered sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub construction: u32,
    pub start: u32,
    /// Corpus positions consumed.
    pub units: u32,
    /// Raw tokens consumed (fused units count at their original width).
    pub raw_units: u32,
    /// Positions consumed per slot.
    pub fills: Vec<u32>,
}

/// How one sentence tiles into construction usages and regret units.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Coverage {
    pub spans: Vec<Span>,
    /// (position, unit id at the pass's representation line).
    pub regrets: Vec<(u32, u32)>,
}

impl Coverage {
    pub fn usage_count(&self) -> u64 {
        self.spans.len() as u64
    }

    pub fn regret_count(&self) -> u64 {
        self.regrets.len() as u64
    }
}

/// Constructions indexed by what their first slot can match.
pub struct GrammarIndex<'g> {
    grammar: &'g Grammar,
    by_first: HashMap<(Rep, u32), Vec<u32>>,
}

impl<'g> GrammarIndex<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        let mut by_first: HashMap<(Rep, u32), Vec<u32>> = HashMap::new();
        for (i, c) in grammar.constructions().iter().enumerate() {
            let first = c.slots[0];
            by_first.entry((first.rep, first.unit)).or_default().push(i as u32);
        }
        GrammarIndex { grammar, by_first }
    }

    /// Best match at a position: most raw units, then most slots, then the
    /// lowest construction index.
    fn best_at(
        &self,
        sentence: &[Unit],
        pos: usize,
        folds: &FoldTable,
    ) -> Option<(u32, crate::grammar::MatchSpan)> {
        let unit = &sentence[pos];
        let mut best: Option<(u32, crate::grammar::MatchSpan)> = None;
        let consider = |cids: &[u32], best: &mut Option<(u32, crate::grammar::MatchSpan)>| {
            for &cid in cids {
                let c = &self.grammar.constructions()[cid as usize];
                if let Some(span) = construction_matches_folded(c, sentence, pos, folds) {
                    let better = match best {
                        None => true,
                        Some((bid, bspan)) => {
                            (span.raw_units, c.len(), std::cmp::Reverse(cid))
                                > (
                                    bspan.raw_units,
                                    self.grammar.constructions()[*bid as usize].len(),
                                    std::cmp::Reverse(*bid),
                                )
                        }
                    };
                    if better {
                        *best = Some((cid, span));
                    }
                }
            }
        };
        for key in [
            (Rep::Lex, unit.lex),
            (Rep::Syn, unit.syn),
            (Rep::Sem, unit.sem),
        ] {
            if let Some(cids) = self.by_first.get(&key) {
                consider(cids, &mut best);
            }
        }
        for &(head, _) in folds.heads_at(pos) {
            if head != unit.syn {
                if let Some(cids) = self.by_first.get(&(Rep::Syn, head)) {
                    consider(cids, &mut best);
                }
            }
        }
        best
    }
}

/// Greedy left-to-right tiling of one sentence.
pub fn cover_with_index(
    sentence: &[Unit],
    index: &GrammarIndex,
    folds: &FoldTable,
    regret_rep: Rep,
) -> Coverage {
    let mut coverage = Coverage::default();
    let mut pos = 0usize;
    while pos < sentence.len() {
        match index.best_at(sentence, pos, folds) {
            Some((cid, span)) => {
                pos += span.units;
                coverage.spans.push(Span {
                    construction: cid,
                    start: (pos - span.units) as u32,
                    units: span.units as u32,
                    raw_units: span.raw_units as u32,
                    fills: span.fills,
                });
            }
            None => {
                coverage.regrets.push((pos as u32, sentence[pos].id(regret_rep)));
                pos += 1;
            }
        }
    }
    debug_assert_eq!(
        coverage.spans.iter().map(|s| s.units as usize).sum::<usize>() + coverage.regrets.len(),
        sentence.len()
    );
    coverage
}

/// Greedy deterministic tiling: at each uncovered position the matching
/// construction covering the most raw units wins (ties: more slots, then
/// lower index); uncovered positions are recorded as regret at the pass's
/// representation line.
pub fn cover(sentence: &[Unit], g: &Grammar, cfg: &Cfg) -> Coverage {
    let index = GrammarIndex::new(g);
    let folds = cfg.fold_table(sentence);
    cover_with_index(sentence, &index, &folds, g.level.regret_rep())
}

/// A segment prepared for repeated covering: sentence slices plus their
/// constituent fold tables.
pub struct SegmentView<'a> {
    pub sentences: Vec<&'a [Unit]>,
    folds: Vec<FoldTable>,
    pub total_units: u64,
}

impl<'a> SegmentView<'a> {
    pub fn new(corpus: &'a AnnotatedCorpus, sentences: &[u32], cfg: &Cfg) -> Self {
        let sentences: Vec<&[Unit]> = sentences
            .iter()
            .map(|&si| corpus.sentences[si as usize].as_slice())
            .collect();
        let folds = sentences.iter().map(|s| cfg.fold_table(s)).collect();
        let total_units = sentences.iter().map(|s| s.len() as u64).sum();
        SegmentView {
            sentences,
            folds,
            total_units,
        }
    }

    pub fn cover_all(&self, g: &Grammar) -> Vec<Coverage> {
        let index = GrammarIndex::new(g);
        let regret_rep = g.level.regret_rep();
        self.sentences
            .par_iter()
            .zip(&self.folds)
            .map(|(sentence, folds)| cover_with_index(sentence, &index, folds, regret_rep))
            .collect()
    }
}

/// Complete pricing of one grammar against one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingReport {
    pub l1_grammar: f64,
    pub l2_data: f64,
    pub regret_count: u64,
    pub mdl_total: f64,
    pub baseline_u: f64,
    pub compression: f64,
    pub construction_usages: u64,
}

impl EncodingReport {
    /// Line-delimited `key<TAB>value` records with 4 fractional digits.
    pub fn render(&self) -> String {
        format!(
            "l1\t{:.4}\nl2\t{:.4}\nregret_count\t{}\nmdl\t{:.4}\nbaseline\t{:.4}\ncompression\t{:.4}\nusages\t{}\n",
            self.l1_grammar,
            self.l2_data,
            self.regret_count,
            self.mdl_total,
            self.baseline_u,
            self.compression,
            self.construction_usages
        )
    }
}

/// Assemble a report from tallied usage and regret counts.
pub fn report_from_counts(
    g: &Grammar,
    usages: u64,
    regret_total: u64,
    segment_units: u64,
) -> Result<EncodingReport> {
    let l1 = grammar_cost(g)?;
    let usage_cost = if usages == 0 {
        0.0
    } else {
        usages as f64 * (2f64.ln() + (g.len() as f64).ln())
    };
    let l2 = usage_cost + regret_cost(regret_total);
    let mdl = l1 + l2;
    if segment_units == 0 {
        return Err(Error::invalid("cannot price an empty segment"));
    }
    let baseline_u = regret_cost(segment_units);
    Ok(EncodingReport {
        l1_grammar: l1,
        l2_data: l2,
        regret_count: regret_total,
        mdl_total: mdl,
        baseline_u,
        compression: compression(mdl, baseline_u)?,
        construction_usages: usages,
    })
}

/// Price a prepared segment under a grammar.
pub fn corpus_mdl_view(view: &SegmentView, g: &Grammar) -> Result<EncodingReport> {
    let index = GrammarIndex::new(g);
    let regret_rep = g.level.regret_rep();
    let (usages, regrets) = view
        .sentences
        .par_iter()
        .zip(&view.folds)
        .map(|(sentence, folds)| {
            let coverage = cover_with_index(sentence, &index, folds, regret_rep);
            (coverage.usage_count(), coverage.regret_count())
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    report_from_counts(g, usages, regrets, view.total_units)
}

/// Price a segment of the corpus under a grammar: cover every sentence, then
/// charge usages against the grammar pointer code and regret instances
/// against the per-dataset regret code.
pub fn corpus_mdl(
    corpus: &AnnotatedCorpus,
    sentences: &[u32],
    g: &Grammar,
    cfg: &Cfg,
) -> Result<EncodingReport> {
    let view = SegmentView::new(corpus, sentences, cfg);
    corpus_mdl_view(&view, g)
}

/// One decoded symbol: a representation line and a unit in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedSymbol {
    pub rep: Rep,
    pub unit: u32,
}

/// Decode a covered sentence back into its per-unit representation stream.
///
/// Units inside matched spans decode to the representation named by the
/// matching slot's constraint; a constituent-filled slot decodes to the head
/// tag for the whole constituent. Regret units decode to their stored
/// representation.
pub fn decode(coverage: &Coverage, g: &Grammar) -> Result<Vec<DecodedSymbol>> {
    let regret_rep = g.level.regret_rep();
    let mut events: Vec<(u32, Vec<DecodedSymbol>)> = Vec::new();
    for span in &coverage.spans {
        let c = g
            .constructions()
            .get(span.construction as usize)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "coverage references construction {} outside the grammar",
                    span.construction
                ))
            })?;
        if c.len() != span.fills.len() {
            return Err(Error::invalid(
                "coverage span does not tile the construction's slots",
            ));
        }
        let symbols = c
            .slots
            .iter()
            .map(|slot| DecodedSymbol {
                rep: slot.rep,
                unit: slot.unit,
            })
            .collect();
        events.push((span.start, symbols));
    }
    for &(pos, unit) in &coverage.regrets {
        events.push((pos, vec![DecodedSymbol { rep: regret_rep, unit }]));
    }
    events.sort_by_key(|(pos, _)| *pos);
    Ok(events.into_iter().flat_map(|(_, s)| s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ingest_annotated;
    use crate::grammar::{Level, PhraseRule, SlotConstraint};

    fn lex_slots(corpus: &AnnotatedCorpus, words: &[&str]) -> Construction {
        Construction::new(
            words
                .iter()
                .map(|w| SlotConstraint::lex(corpus.lex.id(w).unwrap()))
                .collect(),
        )
    }

    #[test]
    fn code_cost_goldens() {
        assert!((code_cost(2, 1).unwrap() - 0.6931).abs() < 1e-3);
        assert!((code_cost(2, 1000).unwrap() - 7.6009).abs() < 1e-3);
        assert!((code_cost(2, 10000).unwrap() - 9.9035).abs() < 1e-3);
        assert!(code_cost(0, 1).is_err());
        assert!(code_cost(1, 0).is_err());
    }

    #[test]
    fn construction_cost_matches_worked_example() {
        // Three lexically-filled slots against a 20k-word vocabulary in a
        // three-representation grammar.
        let mut g = Grammar::new(Level::Full, [20_000, 14, 100]);
        let c = Construction::new(vec![
            SlotConstraint::lex(0),
            SlotConstraint::lex(1),
            SlotConstraint::lex(2),
        ]);
        g.insert(c.clone());
        let cost = construction_cost(&c, &g).unwrap();
        assert!((cost - 33.006).abs() < 0.01, "{cost}");
    }

    #[test]
    fn construction_cost_degenerate_alphabet() {
        let g = Grammar::new(Level::Lex, [1, 1, 1]);
        let c = Construction::new(vec![SlotConstraint::lex(0)]);
        assert!(construction_cost(&c, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn construction_cost_mixed_slots_hand_sum() {
        let g = Grammar::new(Level::Full, [20_000, 14, 100]);
        let c = Construction::new(vec![SlotConstraint::syn(0), SlotConstraint::sem(0)]);
        let expected = (3f64.ln() + 14f64.ln()) + (3f64.ln() + 100f64.ln());
        let cost = construction_cost(&c, &g).unwrap();
        assert!((cost - expected).abs() < 1e-12);
        assert!((cost - 9.4415).abs() < 1e-4, "{cost}");
    }

    #[test]
    fn grammar_cost_is_additive_and_order_invariant() {
        let mut g = Grammar::new(Level::Full, [20_000, 14, 100]);
        assert_eq!(grammar_cost(&g).unwrap(), 0.0);
        let c1 = Construction::new(vec![
            SlotConstraint::lex(0),
            SlotConstraint::lex(1),
            SlotConstraint::lex(2),
        ]);
        let c2 = Construction::new(vec![
            SlotConstraint::lex(3),
            SlotConstraint::lex(4),
            SlotConstraint::lex(5),
        ]);
        g.insert(c1.clone());
        let single = grammar_cost(&g).unwrap();
        g.insert(c2.clone());
        let double = grammar_cost(&g).unwrap();
        assert!((double - 2.0 * single).abs() < 1e-9);

        let mut swapped = Grammar::new(Level::Full, [20_000, 14, 100]);
        swapped.insert(c2);
        swapped.insert(c1);
        assert!((grammar_cost(&swapped).unwrap() - double).abs() < 1e-12);
    }

    #[test]
    fn cover_with_empty_grammar_is_all_regret() {
        let corpus = ingest_annotated("a\tX\t0\nb\tX\t0\nc\tX\t0\nd\tX\t0\ne\tX\t0\n").unwrap();
        let g = Grammar::for_corpus(Level::Lex, &corpus);
        let coverage = cover(&corpus.sentences[0], &g, &Cfg::default());
        assert!(coverage.spans.is_empty());
        assert_eq!(coverage.regret_count(), 5);
    }

    #[test]
    fn cover_tiles_exactly() {
        let corpus = ingest_annotated("a\tX\t0\nb\tX\t0\na\tX\t0\nb\tX\t0\n").unwrap();
        let g = Grammar::from_constructions(
            Level::Lex,
            corpus.alphabet_sizes(),
            [lex_slots(&corpus, &["a", "b"])],
        );
        let coverage = cover(&corpus.sentences[0], &g, &Cfg::default());
        assert_eq!(coverage.usage_count(), 2);
        assert_eq!(coverage.regret_count(), 0);
    }

    #[test]
    fn cover_prefers_leftmost_on_ties() {
        let corpus = ingest_annotated("a\tX\t0\nb\tX\t0\nc\tX\t0\n").unwrap();
        let g = Grammar::from_constructions(
            Level::Lex,
            corpus.alphabet_sizes(),
            [lex_slots(&corpus, &["a", "b"]), lex_slots(&corpus, &["b", "c"])],
        );
        let coverage = cover(&corpus.sentences[0], &g, &Cfg::default());
        assert_eq!(coverage.spans.len(), 1);
        assert_eq!(coverage.spans[0].construction, 0);
        assert_eq!(coverage.spans[0].start, 0);
        assert_eq!(coverage.regrets, vec![(2, corpus.lex.id("c").unwrap())]);
    }

    fn hundred_ab() -> AnnotatedCorpus {
        let text: String = (0..100).map(|_| "a\tX\t0\nb\tX\t0\n\n").collect();
        ingest_annotated(&text).unwrap()
    }

    #[test]
    fn corpus_mdl_matches_direct_summation() {
        let corpus = hundred_ab();
        // Price as a three-representation grammar with N_LEX = 2.
        let g = Grammar::from_constructions(
            Level::Full,
            [2, 1, 1],
            [lex_slots(&corpus, &["a", "b"])],
        );
        let all: Vec<u32> = (0..100).collect();
        let report = corpus_mdl(&corpus, &all, &g, &Cfg::default()).unwrap();
        assert!((report.l1_grammar - 3.583).abs() < 1e-3, "{}", report.l1_grammar);
        assert!((report.l2_data - 69.31).abs() < 0.01);
        assert!((report.mdl_total - 72.90).abs() < 0.01);
        assert_eq!(report.construction_usages, 100);
        assert_eq!(report.regret_count, 0);
    }

    #[test]
    fn empty_grammar_prices_at_baseline() {
        let corpus = hundred_ab();
        let g = Grammar::for_corpus(Level::Lex, &corpus);
        let all: Vec<u32> = (0..100).collect();
        let report = corpus_mdl(&corpus, &all, &g, &Cfg::default()).unwrap();
        let u = baseline(&corpus, &all).unwrap();
        assert!((report.mdl_total - u).abs() < 1e-9);
        assert!(report.compression.abs() < 1e-12);
    }

    #[test]
    fn usage_pointer_cost_scales_with_grammar_size() {
        // 1,000 constructions: each usage costs 0.693 + 6.907 nats.
        let per_usage = 2f64.ln() + 1000f64.ln();
        assert!((per_usage - 7.6009).abs() < 1e-3);
    }

    #[test]
    fn baseline_golden() {
        let text: String = (0..1000).map(|i| format!("w{i}\tX\t0\n\n")).collect();
        let corpus = ingest_annotated(&text).unwrap();
        let all: Vec<u32> = (0..1000).collect();
        let u = baseline(&corpus, &all).unwrap();
        assert!((u - 7600.9).abs() < 0.1, "{u}");
        let one = baseline(&corpus, &[0]).unwrap();
        assert!((one - 0.6931).abs() < 1e-4);
        assert!(baseline(&corpus, &[]).is_err());
    }

    #[test]
    fn compression_goldens() {
        assert!((compression(256.0, 927.0).unwrap() - 0.7239).abs() < 1e-4);
        assert!(compression(1000.0, 1000.0).unwrap().abs() < 1e-12);
        assert!((compression(1200.0, 1000.0).unwrap() + 0.2).abs() < 1e-12);
        assert!(compression(1.0, 0.0).is_err());
    }

    #[test]
    fn confidence_is_symmetric_distance() {
        assert_eq!(confidence(100.0, 100.0), 0.0);
        assert_eq!(confidence(256.0, 927.0), 671.0);
        assert_eq!(confidence(927.0, 256.0), 671.0);
    }

    #[test]
    fn never_matching_construction_strictly_raises_mdl() {
        let corpus = hundred_ab();
        let all: Vec<u32> = (0..100).collect();
        let mut g = Grammar::from_constructions(
            Level::Full,
            [3, 1, 1],
            [lex_slots(&corpus, &["a", "b"])],
        );
        let before = corpus_mdl(&corpus, &all, &g, &Cfg::default()).unwrap();
        // A lexical unit that never occurs in the corpus.
        g.insert(Construction::new(vec![SlotConstraint::lex(2), SlotConstraint::lex(2)]));
        let after = corpus_mdl(&corpus, &all, &g, &Cfg::default()).unwrap();
        assert!(after.mdl_total > before.mdl_total);
        assert_eq!(after.regret_count, before.regret_count);
        assert_eq!(after.construction_usages, before.construction_usages);
    }

    #[test]
    fn decode_round_trips_lexical_pass() {
        let corpus = ingest_annotated("a\tX\t0\nb\tY\t1\nc\tZ\t2\n").unwrap();
        let g = Grammar::from_constructions(
            Level::Lex,
            corpus.alphabet_sizes(),
            [lex_slots(&corpus, &["a", "b"])],
        );
        let coverage = cover(&corpus.sentences[0], &g, &Cfg::default());
        let symbols = decode(&coverage, &g).unwrap();
        let lex_ids: Vec<u32> = symbols.iter().map(|s| s.unit).collect();
        let expected: Vec<u32> = corpus.sentences[0].iter().map(|u| u.lex).collect();
        assert!(symbols.iter().all(|s| s.rep == Rep::Lex));
        assert_eq!(lex_ids, expected);
    }

    #[test]
    fn decode_round_trips_syntactic_pass() {
        let corpus = ingest_annotated("a\tD\t0\nb\tN\t1\nc\tV\t2\n").unwrap();
        let d = corpus.syn.id("D").unwrap();
        let n = corpus.syn.id("N").unwrap();
        let g = Grammar::from_constructions(
            Level::Syn,
            corpus.alphabet_sizes(),
            [Construction::new(vec![SlotConstraint::syn(d), SlotConstraint::syn(n)])],
        );
        let coverage = cover(&corpus.sentences[0], &g, &Cfg::default());
        let symbols = decode(&coverage, &g).unwrap();
        let tags: Vec<u32> = symbols.iter().map(|s| s.unit).collect();
        let expected: Vec<u32> = corpus.sentences[0].iter().map(|u| u.syn).collect();
        assert!(symbols.iter().all(|s| s.rep == Rep::Syn));
        assert_eq!(tags, expected);
    }

    #[test]
    fn decode_projects_full_pass_slots() {
        let corpus = ingest_annotated("bill\tNOUN\t3\ngave\tVERB\t7\n").unwrap();
        let noun = corpus.syn.id("NOUN").unwrap();
        let gave = corpus.lex.id("gave").unwrap();
        let g = Grammar::from_constructions(
            Level::Full,
            corpus.alphabet_sizes(),
            [Construction::new(vec![
                SlotConstraint::syn(noun),
                SlotConstraint::lex(gave),
            ])],
        );
        let coverage = cover(&corpus.sentences[0], &g, &Cfg::default());
        let symbols = decode(&coverage, &g).unwrap();
        assert_eq!(
            symbols,
            vec![
                DecodedSymbol { rep: Rep::Syn, unit: noun },
                DecodedSymbol { rep: Rep::Lex, unit: gave },
            ]
        );
    }

    #[test]
    fn decode_rejects_mismatched_grammar() {
        let corpus = ingest_annotated("a\tX\t0\nb\tX\t0\n").unwrap();
        let g = Grammar::from_constructions(
            Level::Lex,
            corpus.alphabet_sizes(),
            [lex_slots(&corpus, &["a", "b"])],
        );
        let coverage = cover(&corpus.sentences[0], &g, &Cfg::default());
        let empty = Grammar::for_corpus(Level::Lex, &corpus);
        assert!(decode(&coverage, &empty).is_err());
    }

    #[test]
    fn constituent_fills_decode_to_head_tag() {
        let corpus =
            ingest_annotated("the\tDET\t0\ncat\tNOUN\t1\nran\tVERB\t2\n").unwrap();
        let det = corpus.syn.id("DET").unwrap();
        let noun = corpus.syn.id("NOUN").unwrap();
        let verb = corpus.syn.id("VERB").unwrap();
        let cfg = Cfg::new(vec![PhraseRule { body: vec![det, noun], head: noun }]);
        let g = Grammar::from_constructions(
            Level::Full,
            corpus.alphabet_sizes(),
            [Construction::new(vec![
                SlotConstraint::syn(noun),
                SlotConstraint::syn(verb),
            ])],
        );
        let coverage = cover(&corpus.sentences[0], &g, &cfg);
        assert_eq!(coverage.spans.len(), 1);
        assert_eq!(coverage.spans[0].units, 3);
        assert_eq!(coverage.spans[0].fills, vec![2, 1]);
        let symbols = decode(&coverage, &g).unwrap();
        // Two symbols for three units: the folded constituent is one NOUN.
        assert_eq!(symbols.len(), 2);
        assert_eq!(symbols[0], DecodedSymbol { rep: Rep::Syn, unit: noun });
        assert_eq!(symbols[1], DecodedSymbol { rep: Rep::Syn, unit: verb });
    }

    #[test]
    fn report_render_is_stable() {
        let corpus = hundred_ab();
        let g = Grammar::from_constructions(
            Level::Full,
            [2, 1, 1],
            [lex_slots(&corpus, &["a", "b"])],
        );
        let all: Vec<u32> = (0..100).collect();
        let report = corpus_mdl(&corpus, &all, &g, &Cfg::default()).unwrap();
        let rendered = report.render();
        assert!(rendered.contains("mdl\t72.89"));
        assert!(rendered.contains("usages\t100"));
        assert!(rendered.starts_with("l1\t"));
    }

    proptest::proptest! {
        #[test]
        fn cover_tiles_random_sentences(
            words in proptest::collection::vec(0u32..6, 1..20),
            pattern in proptest::collection::vec(0u32..6, 2..4),
        ) {
            let vocab_size = 6;
            let sentence: Vec<Unit> = words.iter().map(|&w| Unit::new(w, 0, 0)).collect();
            let mut corpus_text = String::new();
            for w in 0..vocab_size {
                corpus_text.push_str(&format!("w{w}\tX\t0\n"));
            }
            let corpus = ingest_annotated(&corpus_text).unwrap();
            let g = Grammar::from_constructions(
                Level::Lex,
                corpus.alphabet_sizes(),
                [Construction::new(pattern.iter().map(|&w| SlotConstraint::lex(w)).collect())],
            );
            let coverage = cover(&sentence, &g, &Cfg::default());
            let mut covered = vec![false; sentence.len()];
            for span in &coverage.spans {
                for i in span.start..span.start + span.units {
                    proptest::prop_assert!(!covered[i as usize], "overlap");
                    covered[i as usize] = true;
                }
            }
            for &(pos, _) in &coverage.regrets {
                proptest::prop_assert!(!covered[pos as usize], "regret overlaps span");
                covered[pos as usize] = true;
            }
            proptest::prop_assert!(covered.iter().all(|&c| c), "gap in tiling");
        }
    }
}
