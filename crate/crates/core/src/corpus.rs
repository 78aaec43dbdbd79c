//! Corpus ingestion: aligned three-representation sentences, vocabularies,
//! semantic domains from clustered embeddings, and data segmentation.
//!
//! Every token carries three parallel representations: a lexical word-form,
//! a syntactic tag, and a semantic domain id. The annotated exchange format
//! is one `word<TAB>tag<TAB>domain` row per token with blank lines between
//! sentences.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fallback tag attached to words missing from the tag lexicon.
pub const FALLBACK_TAG: &str = "X";
/// Reserved semantic domain for words missing from the semantic map.
pub const OOV_DOMAIN: &str = "oov";

/// The three representation lines a unit can be constrained at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rep {
    Lex,
    Syn,
    Sem,
}

impl Rep {
    pub const ALL: [Rep; 3] = [Rep::Lex, Rep::Syn, Rep::Sem];

    pub fn index(self) -> usize {
        match self {
            Rep::Lex => 0,
            Rep::Syn => 1,
            Rep::Sem => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rep::Lex => "LEX",
            Rep::Syn => "SYN",
            Rep::Sem => "SEM",
        }
    }

    pub fn parse(s: &str) -> Option<Rep> {
        match s {
            "LEX" => Some(Rep::Lex),
            "SYN" => Some(Rep::Syn),
            "SEM" => Some(Rep::Sem),
            _ => None,
        }
    }
}

impl fmt::Display for Rep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three ids of a token, one per representation line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnitTriple {
    pub lex: u32,
    pub syn: u32,
    pub sem: u32,
}

impl UnitTriple {
    pub fn id(&self, rep: Rep) -> u32 {
        match rep {
            Rep::Lex => self.lex,
            Rep::Syn => self.syn,
            Rep::Sem => self.sem,
        }
    }
}

/// One corpus position: an id triple plus the number of original tokens it
/// spans (1 for raw tokens, >1 after lexical fusion).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unit {
    pub lex: u32,
    pub syn: u32,
    pub sem: u32,
    pub raw_len: u32,
}

impl Unit {
    pub fn new(lex: u32, syn: u32, sem: u32) -> Self {
        Unit {
            lex,
            syn,
            sem,
            raw_len: 1,
        }
    }

    pub fn id(&self, rep: Rep) -> u32 {
        match rep {
            Rep::Lex => self.lex,
            Rep::Syn => self.syn,
            Rep::Sem => self.sem,
        }
    }

    pub fn triple(&self) -> UnitTriple {
        UnitTriple {
            lex: self.lex,
            syn: self.syn,
            sem: self.sem,
        }
    }
}

/// Bijective unit <-> id table; ids are dense and assigned in
/// first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    forms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Vocab::default()
    }

    pub fn intern(&mut self, form: &str) -> u32 {
        if let Some(&id) = self.index.get(form) {
            return id;
        }
        let id = self.forms.len() as u32;
        self.forms.push(form.to_string());
        self.index.insert(form.to_string(), id);
        id
    }

    pub fn id(&self, form: &str) -> Option<u32> {
        self.index.get(form).copied()
    }

    pub fn form(&self, id: u32) -> &str {
        &self.forms[id as usize]
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

/// A corpus of sentences over three aligned representation lines.
#[derive(Debug, Clone)]
pub struct AnnotatedCorpus {
    pub sentences: Vec<Vec<Unit>>,
    pub lex: Vocab,
    pub syn: Vocab,
    pub sem: Vocab,
    pub token_count: usize,
}

impl AnnotatedCorpus {
    pub fn vocab(&self, rep: Rep) -> &Vocab {
        match rep {
            Rep::Lex => &self.lex,
            Rep::Syn => &self.syn,
            Rep::Sem => &self.sem,
        }
    }

    /// Alphabet size per representation, used to price grammars.
    pub fn alphabet_sizes(&self) -> [usize; 3] {
        [self.lex.len(), self.syn.len(), self.sem.len()]
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    /// Render the corpus in the annotated exchange format.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, sentence) in self.sentences.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for unit in sentence {
                out.push_str(self.lex.form(unit.lex));
                out.push('\t');
                out.push_str(self.syn.form(unit.syn));
                out.push('\t');
                out.push_str(self.sem.form(unit.sem));
                out.push('\n');
            }
        }
        out
    }
}

/// Ingest pre-annotated rows: `word<TAB>tag<TAB>domain`, blank line between
/// sentences. Vocabulary ids are assigned in first-occurrence order. Lines
/// starting with `# ` (hash and space) are comments; a bare `#hashtag` token
/// still counts as data.
pub fn ingest_annotated(text: &str) -> Result<AnnotatedCorpus> {
    let mut lex = Vocab::new();
    let mut syn = Vocab::new();
    let mut sem = Vocab::new();
    let mut sentences: Vec<Vec<Unit>> = Vec::new();
    let mut current: Vec<Unit> = Vec::new();
    let mut token_count = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line == "#" || line.starts_with("# ") {
            continue;
        }
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                lineno + 1,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let unit = Unit::new(lex.intern(cols[0]), syn.intern(cols[1]), sem.intern(cols[2]));
        current.push(unit);
        token_count += 1;
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    if token_count == 0 {
        return Err(Error::invalid("empty corpus: no token rows found"));
    }

    Ok(AnnotatedCorpus {
        sentences,
        lex,
        syn,
        sem,
        token_count,
    })
}

pub fn ingest_annotated_file(path: &Path) -> Result<AnnotatedCorpus> {
    let text = fs::read_to_string(path)?;
    ingest_annotated(&text)
}

/// Word -> most-frequent-tag table used to tag plain text.
#[derive(Debug, Clone, Default)]
pub struct TagLexicon {
    pub tags: HashMap<String, String>,
}

impl TagLexicon {
    /// Parse `word<TAB>tag` rows.
    pub fn parse(text: &str) -> Result<TagLexicon> {
        let mut tags = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(word), Some(tag), None) => {
                    tags.insert(word.to_lowercase(), tag.to_string());
                }
                _ => return Err(Error::parse(lineno + 1, "expected `word<TAB>tag`")),
            }
        }
        Ok(TagLexicon { tags })
    }

    pub fn load(path: &Path) -> Result<TagLexicon> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Word -> semantic-domain assignment with `k` domains.
#[derive(Debug, Clone)]
pub struct SemanticMap {
    pub domains: HashMap<String, u32>,
    pub k: u32,
}

impl SemanticMap {
    /// Parse `word<TAB>domainId` rows; `k` is one past the largest id seen.
    pub fn parse(text: &str) -> Result<SemanticMap> {
        let mut domains = HashMap::new();
        let mut max_id = 0u32;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(word), Some(id), None) => {
                    let id: u32 = id
                        .parse()
                        .map_err(|_| Error::parse(lineno + 1, "domain id is not an integer"))?;
                    max_id = max_id.max(id);
                    domains.insert(word.to_lowercase(), id);
                }
                _ => return Err(Error::parse(lineno + 1, "expected `word<TAB>domainId`")),
            }
        }
        if domains.is_empty() {
            return Err(Error::invalid("semantic map has no entries"));
        }
        Ok(SemanticMap {
            domains,
            k: max_id + 1,
        })
    }

    pub fn load(path: &Path) -> Result<SemanticMap> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn export(&self) -> String {
        let mut entries: Vec<(&String, &u32)> = self.domains.iter().collect();
        entries.sort();
        let mut out = String::new();
        for (word, id) in entries {
            out.push_str(word);
            out.push('\t');
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }
}

/// Ingest plain sentence-per-line text. Tokens are lowercased and split on
/// whitespace; tags come from the lexicon (fallback `X`), domains from the
/// semantic map (fallback `oov`). Empty lines are skipped.
pub fn ingest_plain(
    text: &str,
    lexicon: &TagLexicon,
    map: &SemanticMap,
) -> Result<AnnotatedCorpus> {
    let mut lex = Vocab::new();
    let mut syn = Vocab::new();
    let mut sem = Vocab::new();
    // Seed the domain vocabulary so sem ids equal domain ids, with the
    // reserved OOV domain at index k.
    for d in 0..map.k {
        sem.intern(&d.to_string());
    }
    let oov = sem.intern(OOV_DOMAIN);

    let mut sentences = Vec::new();
    let mut token_count = 0usize;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut sentence = Vec::new();
        for token in line.split_whitespace() {
            let word = token.to_lowercase();
            let tag = lexicon.tags.get(&word).map(String::as_str).unwrap_or(FALLBACK_TAG);
            let dom = match map.domains.get(&word) {
                Some(&d) => d,
                None => oov,
            };
            let unit = Unit::new(lex.intern(&word), syn.intern(tag), dom);
            sentence.push(unit);
            token_count += 1;
        }
        sentences.push(sentence);
    }
    if token_count == 0 {
        return Err(Error::invalid("empty corpus: no tokens found"));
    }
    Ok(AnnotatedCorpus {
        sentences,
        lex,
        syn,
        sem,
        token_count,
    })
}

/// A word-embedding table read from `word v1 v2 ... vd` rows.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub words: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn parse(text: &str) -> Result<EmbeddingTable> {
        let mut words = Vec::new();
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        let mut dim: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap();
            let vector: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(lineno + 1, format!("bad float `{f}`")))
                })
                .collect::<Result<_>>()?;
            if vector.is_empty() {
                return Err(Error::parse(lineno + 1, "embedding row has no values"));
            }
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(Error::parse(
                        lineno + 1,
                        format!("dimension mismatch: expected {d}, found {}", vector.len()),
                    ))
                }
                _ => {}
            }
            words.push(word.to_lowercase());
            vectors.push(vector);
        }
        if words.is_empty() {
            return Err(Error::invalid("embedding table is empty"));
        }
        Ok(EmbeddingTable { words, vectors })
    }

    pub fn load(path: &Path) -> Result<EmbeddingTable> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Segment word embeddings into `k` categorical domains with k-means.
///
/// Deterministic given the seed: the first centroid is drawn from the seeded
/// rng, the rest by farthest-point initialization (ties to the lower index),
/// then Lloyd iterations in fixed order until centroids move less than 1e-6
/// or 100 iterations elapse.
pub fn cluster_embeddings(table: &EmbeddingTable, k: usize, seed: u64) -> Result<SemanticMap> {
    let n = table.words.len();
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "k = {k} exceeds vocabulary size {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rand::Rng::gen_range(&mut rng, 0..n);
    let mut centroids: Vec<Vec<f64>> = vec![table.vectors[first].clone()];
    let mut nearest: Vec<f64> = table.vectors.iter().map(|v| sq_dist(v, &centroids[0])).collect();
    while centroids.len() < k {
        let mut best = 0usize;
        for i in 1..n {
            if nearest[i] > nearest[best] {
                best = i;
            }
        }
        centroids.push(table.vectors[best].clone());
        let c = centroids.last().unwrap();
        for i in 0..n {
            let d = sq_dist(&table.vectors[i], c);
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }

    let dim = table.vectors[0].len();
    let mut assign = vec![0u32; n];
    for _ in 0..100 {
        for (i, v) in table.vectors.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = sq_dist(v, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(v, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best as u32;
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, v) in table.vectors.iter().enumerate() {
            let c = assign[i] as usize;
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(v) {
                *s += x;
            }
        }
        let mut movement = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its previous centroid
            }
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            movement += sq_dist(&new, &centroids[c]).sqrt();
            centroids[c] = new;
        }
        if movement < 1e-6 {
            break;
        }
    }
    // Final reassignment so every word sits with its nearest centroid.
    for (i, v) in table.vectors.iter().enumerate() {
        let mut best = 0usize;
        let mut best_d = sq_dist(v, &centroids[0]);
        for (c, centroid) in centroids.iter().enumerate().skip(1) {
            let d = sq_dist(v, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assign[i] = best as u32;
    }

    let mut domains = HashMap::new();
    for (word, &cluster) in table.words.iter().zip(&assign) {
        domains.insert(word.clone(), cluster);
    }
    Ok(SemanticMap {
        domains,
        k: k as u32,
    })
}

/// Sentence budget per experimental segment.
///
/// The full-scale defaults mirror the experimental protocol: 1M candidate
/// sentences, 100k restart test sentences for the LEX/SYN passes (of which
/// the FULL pass uses a 20k prefix), and 200k evaluation sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentScheme {
    pub candidate: usize,
    /// Per-restart test-segment size used by the LEX and SYN passes.
    pub restart_test: usize,
    /// Prefix of each restart test segment used by the FULL pass.
    pub restart_test_full: usize,
    pub restarts: usize,
    pub eval: usize,
}

impl SegmentScheme {
    pub fn full_scale(restarts: usize) -> Self {
        SegmentScheme {
            candidate: 1_000_000,
            restart_test: 100_000,
            restart_test_full: 20_000,
            restarts,
            eval: 200_000,
        }
    }

    /// Shrink the full-scale scheme proportionally so it fits a corpus of
    /// `sentences` sentences.
    pub fn scaled_to(sentences: usize, restarts: usize) -> Self {
        let full = SegmentScheme::full_scale(restarts);
        let budget = full.candidate + restarts * full.restart_test + full.eval;
        let scale = |x: usize| ((x as f64) * (sentences as f64) / (budget as f64)).floor() as usize;
        SegmentScheme {
            candidate: scale(full.candidate).max(1),
            restart_test: scale(full.restart_test).max(1),
            restart_test_full: scale(full.restart_test_full).max(1),
            restarts,
            eval: scale(full.eval).max(1),
        }
    }

    pub fn total(&self) -> usize {
        self.candidate + self.restarts * self.restart_test + self.eval
    }
}

/// Disjoint sentence-index segments drawn from one corpus.
#[derive(Debug, Clone)]
pub struct DataSegments {
    pub candidate: Vec<u32>,
    pub restart_tests: Vec<Vec<u32>>,
    pub eval: Vec<u32>,
    /// Prefix length of each restart test segment used by the FULL pass.
    pub full_prefix: usize,
}

impl DataSegments {
    /// Restart test segment for the FULL pass: a prefix of the LEX/SYN one.
    pub fn full_restart_test(&self, restart: usize) -> &[u32] {
        let seg = &self.restart_tests[restart];
        &seg[..self.full_prefix.min(seg.len())]
    }
}

/// Randomly assign sentences to disjoint segments, without replacement,
/// deterministically for a given seed.
pub fn segment(corpus: &AnnotatedCorpus, scheme: &SegmentScheme, seed: u64) -> Result<DataSegments> {
    let n = corpus.sentence_count();
    let need = scheme.total();
    if need > n {
        return Err(Error::invalid(format!(
            "corpus has {n} sentences but the scheme needs {need} ({} candidate + {}x{} restart + {} eval)",
            scheme.candidate, scheme.restarts, scheme.restart_test, scheme.eval
        )));
    }
    if scheme.restart_test_full > scheme.restart_test {
        return Err(Error::invalid(
            "restart_test_full exceeds the restart test segment size",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<u32> = (0..n as u32).collect();
    indices.shuffle(&mut rng);

    let mut cursor = 0usize;
    let mut take = |len: usize| -> Vec<u32> {
        let out = indices[cursor..cursor + len].to_vec();
        cursor += len;
        out
    };
    let candidate = take(scheme.candidate);
    let restart_tests: Vec<Vec<u32>> = (0..scheme.restarts).map(|_| take(scheme.restart_test)).collect();
    let eval = take(scheme.eval);

    Ok(DataSegments {
        candidate,
        restart_tests,
        eval,
        full_prefix: scheme.restart_test_full,
    })
}
