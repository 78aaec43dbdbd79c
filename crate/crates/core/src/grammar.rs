//! Constructions, grammars, and the constituent CFG.
//!
//! A construction is an ordered sequence of slots, each constrained at
//! exactly one representation line. Matching folds CFG constituents into
//! single head tags so that longer sequences can fill syntactic slots.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::corpus::{AnnotatedCorpus, Rep, Unit, Vocab};
use crate::error::{Error, Result};

/// One slot of a construction: a representation line plus a unit in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotConstraint {
    pub rep: Rep,
    pub unit: u32,
}

impl SlotConstraint {
    pub fn lex(unit: u32) -> Self {
        SlotConstraint { rep: Rep::Lex, unit }
    }
    pub fn syn(unit: u32) -> Self {
        SlotConstraint { rep: Rep::Syn, unit }
    }
    pub fn sem(unit: u32) -> Self {
        SlotConstraint { rep: Rep::Sem, unit }
    }
}

/// An ordered sequence of slot constraints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Construction {
    pub slots: Vec<SlotConstraint>,
}

impl Construction {
    pub fn new(slots: Vec<SlotConstraint>) -> Self {
        debug_assert!(!slots.is_empty());
        Construction { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// `REP:unit` rendering used by grammar files and candidate exports.
    pub fn render(&self, corpus: &AnnotatedCorpus) -> String {
        self.slots
            .iter()
            .map(|s| format!("{}:{}", s.rep.name(), corpus.vocab(s.rep).form(s.unit)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Bracket rendering: `[NOUN --- 'gave' --- (25) --- 'a_hand']`.
    pub fn render_brackets(&self, corpus: &AnnotatedCorpus) -> String {
        let slots: Vec<String> = self
            .slots
            .iter()
            .map(|s| {
                let form = corpus.vocab(s.rep).form(s.unit);
                match s.rep {
                    Rep::Lex => format!("'{form}'"),
                    Rep::Syn => form.to_string(),
                    Rep::Sem => format!("({form})"),
                }
            })
            .collect();
        format!("[{}]", slots.join(" --- "))
    }
}

/// The three induction passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Lex,
    Syn,
    Full,
}

impl Level {
    /// Number of representation types available to grammars of this level.
    pub fn rep_type_count(self) -> u32 {
        match self {
            Level::Lex | Level::Syn => 1,
            Level::Full => 3,
        }
    }

    /// Representation line regret units are recorded at for this pass.
    pub fn regret_rep(self) -> Rep {
        match self {
            Level::Lex | Level::Full => Rep::Lex,
            Level::Syn => Rep::Syn,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Lex => "lex",
            Level::Syn => "syn",
            Level::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Level> {
        match s.to_ascii_lowercase().as_str() {
            "lex" => Some(Level::Lex),
            "syn" => Some(Level::Syn),
            "full" => Some(Level::Full),
            _ => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An ordered, duplicate-free set of constructions plus the alphabet sizes
/// needed to price it in nats.
#[derive(Debug, Clone)]
pub struct Grammar {
    constructions: Vec<Construction>,
    index: HashMap<Construction, u32>,
    pub level: Level,
    pub alphabet_sizes: [usize; 3],
}

impl Grammar {
    pub fn new(level: Level, alphabet_sizes: [usize; 3]) -> Self {
        Grammar {
            constructions: Vec::new(),
            index: HashMap::new(),
            level,
            alphabet_sizes,
        }
    }

    pub fn for_corpus(level: Level, corpus: &AnnotatedCorpus) -> Self {
        Grammar::new(level, corpus.alphabet_sizes())
    }

    pub fn from_constructions(
        level: Level,
        alphabet_sizes: [usize; 3],
        constructions: impl IntoIterator<Item = Construction>,
    ) -> Self {
        let mut g = Grammar::new(level, alphabet_sizes);
        for c in constructions {
            g.insert(c);
        }
        g
    }

    /// T_R: the number of representation types for this grammar.
    pub fn rep_type_count(&self) -> u32 {
        self.level.rep_type_count()
    }

    /// Insert, keeping the set duplicate-free. Returns false on duplicates.
    pub fn insert(&mut self, c: Construction) -> bool {
        if self.index.contains_key(&c) {
            return false;
        }
        self.index.insert(c.clone(), self.constructions.len() as u32);
        self.constructions.push(c);
        true
    }

    pub fn remove(&mut self, c: &Construction) -> bool {
        match self.index.remove(c) {
            Some(pos) => {
                self.constructions.remove(pos as usize);
                for (i, c) in self.constructions.iter().enumerate() {
                    self.index.insert(c.clone(), i as u32);
                }
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, c: &Construction) -> bool {
        self.index.contains_key(c)
    }

    pub fn constructions(&self) -> &[Construction] {
        &self.constructions
    }

    pub fn len(&self) -> usize {
        self.constructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constructions.is_empty()
    }

    /// Save in the grammar file format: a level header comment followed by
    /// one `REP:unit ...` line per construction.
    pub fn save(&self, corpus: &AnnotatedCorpus) -> String {
        let mut out = format!("# level: {}\n", self.level);
        for c in &self.constructions {
            out.push_str(&c.render(corpus));
            out.push('\n');
        }
        out
    }

    pub fn save_file(&self, corpus: &AnnotatedCorpus, path: &Path) -> Result<()> {
        fs::write(path, self.save(corpus))?;
        Ok(())
    }

    /// Load a grammar file against a corpus's vocabularies. Unit names not
    /// yet in the vocabulary are interned so the grammar stays loadable
    /// against held-out corpora; such slots simply never match.
    pub fn load(text: &str, corpus: &mut AnnotatedCorpus, default_level: Option<Level>) -> Result<Grammar> {
        let mut level = default_level;
        let mut constructions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(value) = rest.trim().strip_prefix("level:") {
                    level = Level::parse(value.trim())
                        .or(level);
                }
                continue;
            }
            let mut slots = Vec::new();
            for field in line.split_whitespace() {
                let (rep, unit) = field
                    .split_once(':')
                    .ok_or_else(|| Error::parse(lineno + 1, format!("bad slot `{field}`")))?;
                let rep = Rep::parse(rep)
                    .ok_or_else(|| Error::parse(lineno + 1, format!("unknown representation `{rep}`")))?;
                let id = match rep {
                    Rep::Lex => corpus.lex.intern(unit),
                    Rep::Syn => corpus.syn.intern(unit),
                    Rep::Sem => corpus.sem.intern(unit),
                };
                slots.push(SlotConstraint { rep, unit: id });
            }
            if slots.is_empty() {
                return Err(Error::parse(lineno + 1, "construction has no slots"));
            }
            constructions.push(Construction::new(slots));
        }
        let level = level.ok_or_else(|| {
            Error::invalid("grammar file does not declare `# level:` and no level was given")
        })?;
        Ok(Grammar::from_constructions(
            level,
            corpus.alphabet_sizes(),
            constructions,
        ))
    }

    pub fn load_file(path: &Path, corpus: &mut AnnotatedCorpus, default_level: Option<Level>) -> Result<Grammar> {
        Grammar::load(&fs::read_to_string(path)?, corpus, default_level)
    }
}

/// A phrase structure rule: a tag sequence folds to a single head tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseRule {
    pub body: Vec<u32>,
    pub head: u32,
}

/// An ordered list of phrase structure rules.
#[derive(Debug, Clone, Default)]
pub struct Cfg {
    pub rules: Vec<PhraseRule>,
}

impl Cfg {
    pub fn new(rules: Vec<PhraseRule>) -> Self {
        Cfg { rules }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Longest rule whose body matches the tags starting at `pos`; ties go
    /// to the earlier rule. Returns (rule index, body length).
    pub fn longest_match(&self, sentence: &[Unit], pos: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for (i, rule) in self.rules.iter().enumerate() {
            let len = rule.body.len();
            if len > sentence.len() - pos {
                continue;
            }
            if best.map_or(false, |(_, blen)| len <= blen) {
                continue;
            }
            if rule.body.iter().zip(&sentence[pos..pos + len]).all(|(t, u)| *t == u.syn) {
                best = Some((i, len));
            }
        }
        best
    }

    /// Longest constituent at `pos` folding to head tag `head`.
    fn longest_with_head(&self, sentence: &[Unit], pos: usize, head: u32) -> Option<usize> {
        let mut best = 0usize;
        for rule in &self.rules {
            if rule.head != head {
                continue;
            }
            let len = rule.body.len();
            if len <= best || len > sentence.len() - pos {
                continue;
            }
            if rule.body.iter().zip(&sentence[pos..pos + len]).all(|(t, u)| *t == u.syn) {
                best = len;
            }
        }
        (best > 0).then_some(best)
    }

    /// Precompute, per position, the longest constituent for every head tag
    /// foldable there. Lets hot loops skip rescanning the rule list.
    pub fn fold_table(&self, sentence: &[Unit]) -> FoldTable {
        let mut per_pos = vec![Vec::new(); sentence.len()];
        for (pos, folds) in per_pos.iter_mut().enumerate() {
            for rule in &self.rules {
                let len = rule.body.len();
                if len > sentence.len() - pos {
                    continue;
                }
                if !rule.body.iter().zip(&sentence[pos..pos + len]).all(|(t, u)| *t == u.syn) {
                    continue;
                }
                match folds.iter_mut().find(|f: &&mut (u32, u32)| f.0 == rule.head) {
                    Some((_, best)) => *best = (*best).max(len as u32),
                    None => folds.push((rule.head, len as u32)),
                }
            }
        }
        FoldTable { per_pos }
    }
}

/// Per-position constituent folds: (head tag, longest body length).
#[derive(Debug, Clone, Default)]
pub struct FoldTable {
    per_pos: Vec<Vec<(u32, u32)>>,
}

impl FoldTable {
    pub fn longest(&self, pos: usize, head: u32) -> Option<usize> {
        self.per_pos[pos]
            .iter()
            .find(|(h, _)| *h == head)
            .map(|(_, len)| *len as usize)
    }

    /// Head tags foldable at `pos`, with their longest lengths.
    pub fn heads_at(&self, pos: usize) -> &[(u32, u32)] {
        &self.per_pos[pos]
    }
}

/// True iff the unit's id on the constraint's representation line equals the
/// constrained unit; the other lines are ignored.
pub fn slot_matches(constraint: SlotConstraint, unit: &Unit) -> bool {
    unit.id(constraint.rep) == constraint.unit
}

/// Span consumed by a successful construction match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSpan {
    /// Corpus positions consumed.
    pub units: usize,
    /// Raw tokens consumed (counts fused units at their original width).
    pub raw_units: usize,
    /// Positions consumed per slot, in slot order.
    pub fills: Vec<u32>,
}

/// Match a construction at `start`. Each slot consumes one unit, except that
/// a syntactic slot may instead consume a CFG constituent folding to the
/// required head tag (longest match wins). No backtracking across slots.
pub fn construction_matches(
    c: &Construction,
    sentence: &[Unit],
    start: usize,
    cfg: &Cfg,
) -> Option<MatchSpan> {
    match_at(c, sentence, start, |pos, head| {
        cfg.longest_with_head(sentence, pos, head)
    })
}

/// Same matcher over a precomputed fold table.
pub fn construction_matches_folded(
    c: &Construction,
    sentence: &[Unit],
    start: usize,
    folds: &FoldTable,
) -> Option<MatchSpan> {
    match_at(c, sentence, start, |pos, head| folds.longest(pos, head))
}

fn match_at<F>(c: &Construction, sentence: &[Unit], start: usize, fold: F) -> Option<MatchSpan>
where
    F: Fn(usize, u32) -> Option<usize>,
{
    debug_assert!(start <= sentence.len());
    let mut pos = start;
    let mut raw_units = 0usize;
    let mut fills = Vec::with_capacity(c.slots.len());
    for slot in &c.slots {
        if pos >= sentence.len() {
            return None;
        }
        let consumed = match slot.rep {
            Rep::Syn => match fold(pos, slot.unit) {
                Some(len) if len > 1 => len,
                _ if sentence[pos].syn == slot.unit => 1,
                Some(len) => len, // unary rule, same as a unit match
                None => return None,
            },
            _ => {
                if slot_matches(*slot, &sentence[pos]) {
                    1
                } else {
                    return None;
                }
            }
        };
        raw_units += sentence[pos..pos + consumed]
            .iter()
            .map(|u| u.raw_len as usize)
            .sum::<usize>();
        fills.push(consumed as u32);
        pos += consumed;
    }
    Some(MatchSpan {
        units: pos - start,
        raw_units,
        fills,
    })
}

/// Replace every non-overlapping occurrence of a lexical construction with a
/// single merged unit (longest match, leftmost first). The merged unit takes
/// the underscore-joined word-form, and the tag and domain of its final
/// element; vocabularies are extended in place, existing ids are preserved.
pub fn fuse_lexical(corpus: &AnnotatedCorpus, lex_grammar: &Grammar) -> AnnotatedCorpus {
    debug_assert_eq!(lex_grammar.level, Level::Lex);
    let mut out = corpus.clone();
    if lex_grammar.is_empty() {
        return out;
    }

    // Index lexical constructions by first word id, longest first.
    let mut by_first: HashMap<u32, Vec<&Construction>> = HashMap::new();
    for c in lex_grammar.constructions() {
        if c.slots.iter().all(|s| s.rep == Rep::Lex) {
            by_first.entry(c.slots[0].unit).or_default().push(c);
        }
    }
    for list in by_first.values_mut() {
        list.sort_by(|a, b| b.len().cmp(&a.len()));
    }

    let mut token_count = 0usize;
    for sentence in &mut out.sentences {
        let mut rebuilt = Vec::with_capacity(sentence.len());
        let mut pos = 0usize;
        while pos < sentence.len() {
            let mut consumed = 1usize;
            let mut fused: Option<Unit> = None;
            if let Some(cands) = by_first.get(&sentence[pos].lex) {
                for c in cands {
                    let n = c.len();
                    if n < 2 || n > sentence.len() - pos {
                        continue;
                    }
                    if c.slots.iter().zip(&sentence[pos..pos + n]).all(|(s, u)| u.lex == s.unit) {
                        let form = c
                            .slots
                            .iter()
                            .map(|s| corpus.lex.form(s.unit))
                            .collect::<Vec<_>>()
                            .join("_");
                        let last = sentence[pos + n - 1];
                        fused = Some(Unit {
                            lex: out.lex.intern(&form),
                            syn: last.syn,
                            sem: last.sem,
                            raw_len: sentence[pos..pos + n].iter().map(|u| u.raw_len).sum(),
                        });
                        consumed = n;
                        break; // longest match fired
                    }
                }
            }
            match fused {
                Some(u) => rebuilt.push(u),
                None => rebuilt.push(sentence[pos]),
            }
            pos += consumed;
        }
        token_count += rebuilt.len();
        *sentence = rebuilt;
    }
    out.token_count = token_count;
    out
}

/// Convert syntactic constructions into phrase structure rules.
///
/// Head assignment: rightmost NOUN if any slot is a NOUN; else leftmost VERB
/// if any is a VERB; else the final tag. Rules are ordered by body length
/// descending, then by grammar order.
pub fn syn_to_rules(syn_grammar: &Grammar, corpus: &AnnotatedCorpus) -> Cfg {
    debug_assert_eq!(syn_grammar.level, Level::Syn);
    let noun = find_tag(&corpus.syn, "NOUN");
    let verb = find_tag(&corpus.syn, "VERB");

    let mut rules: Vec<(usize, PhraseRule)> = Vec::new();
    for (order, c) in syn_grammar.constructions().iter().enumerate() {
        if !c.slots.iter().all(|s| s.rep == Rep::Syn) {
            continue;
        }
        let body: Vec<u32> = c.slots.iter().map(|s| s.unit).collect();
        let head = match noun.filter(|n| body.contains(n)) {
            Some(n) => n,
            None => match verb.filter(|v| body.contains(v)) {
                Some(v) => v,
                None => *body.last().unwrap(),
            },
        };
        rules.push((order, PhraseRule { body, head }));
    }
    rules.sort_by(|(oa, a), (ob, b)| b.body.len().cmp(&a.body.len()).then(oa.cmp(ob)));
    Cfg::new(rules.into_iter().map(|(_, r)| r).collect())
}

fn find_tag(vocab: &Vocab, name: &str) -> Option<u32> {
    (0..vocab.len() as u32).find(|&id| vocab.form(id).eq_ignore_ascii_case(name))
}

/// One-level constituent chunking: a single left-to-right pass in which the
/// longest applicable rule fires at each position (ties to the earlier rule)
/// and folds the matched units into one constituent carrying the head tag.
/// Folded constituents are not re-folded within the pass.
pub fn chunk(sentence: &[Unit], cfg: &Cfg) -> Vec<Unit> {
    let mut out = Vec::with_capacity(sentence.len());
    let mut pos = 0usize;
    while pos < sentence.len() {
        match cfg.longest_match(sentence, pos) {
            Some((rule_idx, len)) if len > 1 => {
                let rule = &cfg.rules[rule_idx];
                let last = sentence[pos + len - 1];
                out.push(Unit {
                    lex: last.lex,
                    syn: rule.head,
                    sem: last.sem,
                    raw_len: sentence[pos..pos + len].iter().map(|u| u.raw_len).sum(),
                });
                pos += len;
            }
            _ => {
                out.push(sentence[pos]);
                pos += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ingest_annotated;

    /// Table-style fixture: "bill gave peter a hand" / "bill sent peter a package".
    fn fixture() -> AnnotatedCorpus {
        let text = "bill\tNOUN\thuman\ngave\tVERB\ttransfer\npeter\tNOUN\tanimate\na\tDET\tother\nhand\tNOUN\tobject\n\n\
                    bill\tNOUN\thuman\nsent\tVERB\ttransfer\npeter\tNOUN\tanimate\na\tDET\tother\npackage\tNOUN\tobject\n";
        ingest_annotated(text).unwrap()
    }

    fn lex_slot(corpus: &AnnotatedCorpus, w: &str) -> SlotConstraint {
        SlotConstraint::lex(corpus.lex.id(w).unwrap())
    }
    fn syn_slot(corpus: &AnnotatedCorpus, t: &str) -> SlotConstraint {
        SlotConstraint::syn(corpus.syn.id(t).unwrap())
    }
    fn sem_slot(corpus: &AnnotatedCorpus, d: &str) -> SlotConstraint {
        SlotConstraint::sem(corpus.sem.id(d).unwrap())
    }

    #[test]
    fn slot_matching_ignores_other_lines() {
        let corpus = fixture();
        let animate = sem_slot(&corpus, "animate");
        let peter = &corpus.sentences[0][2];
        let hand = &corpus.sentences[0][4];
        assert!(slot_matches(animate, peter));
        assert!(!slot_matches(animate, hand));

        let bill = &corpus.sentences[0][0];
        assert!(slot_matches(lex_slot(&corpus, "bill"), bill));
        assert!(slot_matches(syn_slot(&corpus, "NOUN"), bill));
    }

    #[test]
    fn idiomatic_construction_matches_after_fusion() {
        let corpus = fixture();
        let lex_grammar = Grammar::from_constructions(
            Level::Lex,
            corpus.alphabet_sizes(),
            [Construction::new(vec![
                lex_slot(&corpus, "a"),
                lex_slot(&corpus, "hand"),
            ])],
        );
        let fused = fuse_lexical(&corpus, &lex_grammar);
        assert_eq!(fused.sentences[0].len(), 4);
        let c = Construction::new(vec![
            syn_slot(&fused, "NOUN"),
            lex_slot(&fused, "gave"),
            sem_slot(&fused, "animate"),
            SlotConstraint::lex(fused.lex.id("a_hand").unwrap()),
        ]);
        let span = construction_matches(&c, &fused.sentences[0], 0, &Cfg::default()).unwrap();
        assert_eq!(span.units, 4);
        assert_eq!(span.raw_units, 5);
        // The idiomatic construction does not describe the second sentence.
        assert!(construction_matches(&c, &fused.sentences[1], 0, &Cfg::default()).is_none());
    }

    #[test]
    fn constituents_fill_syntactic_slots() {
        let corpus = fixture();
        let det = corpus.syn.id("DET").unwrap();
        let noun = corpus.syn.id("NOUN").unwrap();
        let cfg = Cfg::new(vec![PhraseRule {
            body: vec![det, noun],
            head: noun,
        }]);
        let schematic = Construction::new(vec![
            syn_slot(&corpus, "NOUN"),
            sem_slot(&corpus, "transfer"),
            sem_slot(&corpus, "animate"),
            syn_slot(&corpus, "NOUN"),
        ]);
        for sentence in &corpus.sentences {
            let span = construction_matches(&schematic, sentence, 0, &cfg).unwrap();
            assert_eq!(span.units, 5);
            assert_eq!(span.raw_units, 5);
            assert_eq!(span.fills, vec![1, 1, 1, 2]);
        }
    }

    #[test]
    fn all_lexical_matches_require_exact_words() {
        let corpus = fixture();
        let cfg = Cfg::new(vec![PhraseRule {
            body: vec![corpus.syn.id("DET").unwrap(), corpus.syn.id("NOUN").unwrap()],
            head: corpus.syn.id("NOUN").unwrap(),
        }]);
        let c = Construction::new(vec![lex_slot(&corpus, "a"), lex_slot(&corpus, "hand")]);
        let span = construction_matches(&c, &corpus.sentences[0], 3, &cfg).unwrap();
        assert_eq!(span.units, 2);
        assert!(construction_matches(&c, &corpus.sentences[1], 3, &cfg).is_none());
    }

    #[test]
    fn fuse_merges_occurrences() {
        let text = "it\tPRON\t0\ncould\tAUX\t1\nbe\tVERB\t2\nfine\tADJ\t3\n";
        let corpus = ingest_annotated(text).unwrap();
        let g = Grammar::from_constructions(
            Level::Lex,
            corpus.alphabet_sizes(),
            [Construction::new(vec![
                lex_slot(&corpus, "could"),
                lex_slot(&corpus, "be"),
            ])],
        );
        let fused = fuse_lexical(&corpus, &g);
        assert_eq!(fused.token_count, 3);
        let s = &fused.sentences[0];
        assert_eq!(fused.lex.form(s[1].lex), "could_be");
        // Fused unit takes the tag and domain of its final element.
        assert_eq!(fused.syn.form(s[1].syn), "VERB");
        assert_eq!(fused.sem.form(s[1].sem), "2");
        assert_eq!(s[1].raw_len, 2);
    }

    #[test]
    fn fuse_with_empty_grammar_is_identity() {
        let corpus = fixture();
        let g = Grammar::for_corpus(Level::Lex, &corpus);
        let fused = fuse_lexical(&corpus, &g);
        assert_eq!(fused.token_count, corpus.token_count);
        assert_eq!(fused.export(), corpus.export());
    }

    #[test]
    fn fuse_overlap_resolves_leftmost() {
        let text = "a\tX\t0\nb\tX\t0\nc\tX\t0\n";
        let corpus = ingest_annotated(text).unwrap();
        let g = Grammar::from_constructions(
            Level::Lex,
            corpus.alphabet_sizes(),
            [
                Construction::new(vec![lex_slot(&corpus, "a"), lex_slot(&corpus, "b")]),
                Construction::new(vec![lex_slot(&corpus, "b"), lex_slot(&corpus, "c")]),
            ],
        );
        let fused = fuse_lexical(&corpus, &g);
        let forms: Vec<&str> = fused.sentences[0]
            .iter()
            .map(|u| fused.lex.form(u.lex))
            .collect();
        assert_eq!(forms, ["a_b", "c"]);
    }

    #[test]
    fn fuse_token_count_arithmetic() {
        let text = "x\tX\t0\ny\tX\t0\nx\tX\t0\ny\tX\t0\nz\tX\t0\n";
        let corpus = ingest_annotated(text).unwrap();
        let g = Grammar::from_constructions(
            Level::Lex,
            corpus.alphabet_sizes(),
            [Construction::new(vec![lex_slot(&corpus, "x"), lex_slot(&corpus, "y")])],
        );
        let fused = fuse_lexical(&corpus, &g);
        // 2 occurrences x (2 - 1) fewer tokens.
        assert_eq!(fused.token_count, corpus.token_count - 2);
    }

    #[test]
    fn head_table_covers_all_branches() {
        let text = "d\tDET\t0\nn\tNOUN\t0\nv\tVERB\t0\nr\tADV\t0\nj\tADJ\t0\n";
        let corpus = ingest_annotated(text).unwrap();
        let det = corpus.syn.id("DET").unwrap();
        let noun = corpus.syn.id("NOUN").unwrap();
        let verb = corpus.syn.id("VERB").unwrap();
        let adv = corpus.syn.id("ADV").unwrap();
        let adj = corpus.syn.id("ADJ").unwrap();
        let g = Grammar::from_constructions(
            Level::Syn,
            corpus.alphabet_sizes(),
            [
                Construction::new(vec![SlotConstraint::syn(det), SlotConstraint::syn(noun)]),
                Construction::new(vec![SlotConstraint::syn(verb), SlotConstraint::syn(noun)]),
                Construction::new(vec![SlotConstraint::syn(adv), SlotConstraint::syn(adj)]),
            ],
        );
        let cfg = syn_to_rules(&g, &corpus);
        assert_eq!(cfg.rules.len(), 3);
        let by_body: HashMap<Vec<u32>, u32> =
            cfg.rules.iter().map(|r| (r.body.clone(), r.head)).collect();
        assert_eq!(by_body[&vec![det, noun]], noun);
        assert_eq!(by_body[&vec![verb, noun]], noun); // rightmost NOUN
        assert_eq!(by_body[&vec![adv, adj]], adj); // fallback: final tag
    }

    #[test]
    fn rules_order_longest_first() {
        let text = "d\tDET\t0\nn\tNOUN\t0\nj\tADJ\t0\n";
        let corpus = ingest_annotated(text).unwrap();
        let det = corpus.syn.id("DET").unwrap();
        let noun = corpus.syn.id("NOUN").unwrap();
        let adj = corpus.syn.id("ADJ").unwrap();
        let g = Grammar::from_constructions(
            Level::Syn,
            corpus.alphabet_sizes(),
            [
                Construction::new(vec![SlotConstraint::syn(det), SlotConstraint::syn(noun)]),
                Construction::new(vec![
                    SlotConstraint::syn(det),
                    SlotConstraint::syn(adj),
                    SlotConstraint::syn(noun),
                ]),
            ],
        );
        let cfg = syn_to_rules(&g, &corpus);
        assert_eq!(cfg.rules[0].body.len(), 3);
        assert_eq!(cfg.rules[1].body.len(), 2);
    }

    #[test]
    fn chunk_folds_longest_leftmost_once() {
        let text = "d\tDET\t0\nn\tNOUN\t0\nv\tVERB\t0\n";
        let corpus = ingest_annotated(text).unwrap();
        let det = corpus.syn.id("DET").unwrap();
        let noun = corpus.syn.id("NOUN").unwrap();
        let cfg = Cfg::new(vec![PhraseRule {
            body: vec![det, noun],
            head: noun,
        }]);
        let out = chunk(&corpus.sentences[0], &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].syn, noun);
        assert_eq!(out[0].raw_len, 2);
        assert_eq!(corpus.syn.form(out[1].syn), "VERB");

        // Empty CFG leaves the sentence unchanged.
        let same = chunk(&corpus.sentences[0], &Cfg::default());
        assert_eq!(same, corpus.sentences[0]);
    }

    #[test]
    fn chunk_does_not_refold() {
        let text = "d\tDET\t0\nn\tNOUN\t0\nm\tNOUN\t1\n";
        let corpus = ingest_annotated(text).unwrap();
        let det = corpus.syn.id("DET").unwrap();
        let noun = corpus.syn.id("NOUN").unwrap();
        let cfg = Cfg::new(vec![
            PhraseRule { body: vec![det, noun], head: noun },
            PhraseRule { body: vec![noun, noun], head: noun },
        ]);
        let out = chunk(&corpus.sentences[0], &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].raw_len, 2);
        assert_eq!(out[1].raw_len, 1);
        let total: u32 = out.iter().map(|u| u.raw_len).sum();
        assert_eq!(total as usize, corpus.sentences[0].len());
    }

    #[test]
    fn grammar_file_round_trip() {
        let mut corpus = fixture();
        let g = Grammar::from_constructions(
            Level::Full,
            corpus.alphabet_sizes(),
            [
                Construction::new(vec![
                    syn_slot(&corpus, "NOUN"),
                    lex_slot(&corpus, "gave"),
                    sem_slot(&corpus, "animate"),
                ]),
                Construction::new(vec![lex_slot(&corpus, "a"), lex_slot(&corpus, "hand")]),
            ],
        );
        let text = g.save(&corpus);
        assert!(text.starts_with("# level: full\n"));
        assert!(text.contains("SYN:NOUN LEX:gave SEM:animate"));
        let loaded = Grammar::load(&text, &mut corpus, None).unwrap();
        assert_eq!(loaded.level, Level::Full);
        assert_eq!(loaded.constructions(), g.constructions());
    }

    #[test]
    fn bracket_rendering_matches_notation() {
        let corpus = fixture();
        let c = Construction::new(vec![
            syn_slot(&corpus, "NOUN"),
            lex_slot(&corpus, "gave"),
            sem_slot(&corpus, "animate"),
        ]);
        assert_eq!(c.render_brackets(&corpus), "[NOUN --- 'gave' --- (animate)]");
    }

    #[test]
    fn grammar_insert_is_duplicate_free() {
        let corpus = fixture();
        let mut g = Grammar::for_corpus(Level::Lex, &corpus);
        let c = Construction::new(vec![lex_slot(&corpus, "a"), lex_slot(&corpus, "hand")]);
        assert!(g.insert(c.clone()));
        assert!(!g.insert(c.clone()));
        assert_eq!(g.len(), 1);
        assert!(g.remove(&c));
        assert!(g.is_empty());
    }
}
