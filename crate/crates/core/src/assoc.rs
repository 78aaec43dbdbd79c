//! Candidate extraction and association scoring.
//!
//! Candidates are contiguous n-grams expanded into constraint sequences per
//! pass level. Each retained candidate is scored with a 30-dimensional
//! feature vector: for every representation line and direction, delta-P is
//! computed over each adjacent slot transition and reduced to five
//! statistics (mean, min, max, first transition, last transition).

use std::collections::{HashMap, HashSet};

use crate::corpus::{AnnotatedCorpus, Rep, UnitTriple};
use crate::error::{Error, Result};
use crate::grammar::{Construction, Level, SlotConstraint};

/// Number of association features per candidate: 3 lines x 2 directions x 5
/// reduction statistics.
pub const FEATURE_COUNT: usize = 30;

pub type FeatureVector = [f64; FEATURE_COUNT];

/// Direction of the delta-P statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// P(right | left) - P(right | not left)
    Lr,
    /// P(left | right) - P(left | not right)
    Rl,
}

/// Reduction statistics over per-transition delta-P values, in feature order.
pub const STAT_NAMES: [&str; 5] = ["mean", "min", "max", "first", "last"];

/// Feature index for a (line, direction, statistic) combination.
pub fn feature_index(rep: Rep, direction: Direction, stat: usize) -> usize {
    let d = match direction {
        Direction::Lr => 0,
        Direction::Rl => 1,
    };
    rep.index() * 10 + d * 5 + stat
}

/// Human-readable feature name, used by candidate table exports.
pub fn feature_name(feature: usize) -> String {
    let rep = Rep::ALL[feature / 10];
    let dir = if (feature / 5) % 2 == 0 { "lr" } else { "rl" };
    format!("{}.{}.{}", rep.name().to_lowercase(), dir, STAT_NAMES[feature % 5])
}

/// Adjacent-pair counts for one representation line.
#[derive(Debug, Clone, Default)]
pub struct RepBigrams {
    pairs: HashMap<(u32, u32), u64>,
    left: HashMap<u32, u64>,
    right: HashMap<u32, u64>,
    total: u64,
}

impl RepBigrams {
    pub fn pair(&self, a: u32, b: u32) -> u64 {
        self.pairs.get(&(a, b)).copied().unwrap_or(0)
    }
    pub fn left_count(&self, a: u32) -> u64 {
        self.left.get(&a).copied().unwrap_or(0)
    }
    pub fn right_count(&self, b: u32) -> u64 {
        self.right.get(&b).copied().unwrap_or(0)
    }
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Delta-P for the pair (a, b) in the given direction.
    pub fn delta_p(&self, a: u32, b: u32, direction: Direction) -> f64 {
        delta_p(
            self.pair(a, b),
            self.left_count(a),
            self.right_count(b),
            self.total,
            direction,
        )
        .unwrap_or(0.0)
    }
}

/// Per-line bigram tables over adjacent within-sentence positions.
#[derive(Debug, Clone, Default)]
pub struct BigramStats {
    lines: [RepBigrams; 3],
}

impl BigramStats {
    pub fn build(corpus: &AnnotatedCorpus, sentences: &[u32]) -> BigramStats {
        let mut stats = BigramStats::default();
        for &si in sentences {
            let sentence = &corpus.sentences[si as usize];
            for pair in sentence.windows(2) {
                for rep in Rep::ALL {
                    let line = &mut stats.lines[rep.index()];
                    let a = pair[0].id(rep);
                    let b = pair[1].id(rep);
                    *line.pairs.entry((a, b)).or_insert(0) += 1;
                    *line.left.entry(a).or_insert(0) += 1;
                    *line.right.entry(b).or_insert(0) += 1;
                    line.total += 1;
                }
            }
        }
        stats
    }

    pub fn line(&self, rep: Rep) -> &RepBigrams {
        &self.lines[rep.index()]
    }
}

/// Directional delta-P: P(outcome | cue) - P(outcome | not cue).
///
/// `count_a` is the count of `a` in left position, `count_b` of `b` in right
/// position, `count_ab` of the adjacent pair. Terms with zero denominators
/// contribute 0.
pub fn delta_p(
    count_ab: u64,
    count_a: u64,
    count_b: u64,
    total_bigrams: u64,
    direction: Direction,
) -> Result<f64> {
    let overlap_floor = (count_a + count_b).saturating_sub(total_bigrams);
    if count_ab > count_a.min(count_b)
        || count_a.max(count_b) > total_bigrams
        || count_ab < overlap_floor
    {
        return Err(Error::invalid(format!(
            "inconsistent counts: ab={count_ab} a={count_a} b={count_b} total={total_bigrams}"
        )));
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let value = match direction {
        Direction::Lr => {
            ratio(count_ab, count_a) - ratio(count_b - count_ab, total_bigrams - count_a)
        }
        Direction::Rl => {
            ratio(count_ab, count_b) - ratio(count_a - count_ab, total_bigrams - count_b)
        }
    };
    Ok(value)
}

/// Score a candidate from its per-slot line projections.
///
/// `projections[slot][line]` holds the unit id the slot projects to on each
/// representation line: the constrained unit on its own line, the majority
/// realization elsewhere.
pub fn feature_vector(projections: &[[u32; 3]], stats: &BigramStats) -> FeatureVector {
    debug_assert!(projections.len() >= 2);
    let mut features = [0.0f64; FEATURE_COUNT];
    for rep in Rep::ALL {
        let line = stats.line(rep);
        for direction in [Direction::Lr, Direction::Rl] {
            let values: Vec<f64> = projections
                .windows(2)
                .map(|w| line.delta_p(w[0][rep.index()], w[1][rep.index()], direction))
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let stats5 = [mean, min, max, values[0], *values.last().unwrap()];
            for (stat, value) in stats5.into_iter().enumerate() {
                features[feature_index(rep, direction, stat)] = value;
            }
        }
    }
    features
}

/// One scored candidate construction.
#[derive(Debug, Clone)]
pub struct CandidateEntry {
    pub construction: Construction,
    pub freq: u64,
    pub features: FeatureVector,
    /// Per-slot per-line projected unit ids (see [`feature_vector`]).
    pub projections: Vec<[u32; 3]>,
}

/// Scored candidate constructions, ordered by descending frequency.
#[derive(Debug, Clone)]
pub struct CandidateTable {
    pub entries: Vec<CandidateEntry>,
    index: HashMap<Construction, u32>,
    pub stats: BigramStats,
}

impl CandidateTable {
    /// Build a table from pre-scored entries, keeping their order.
    pub fn from_entries(entries: Vec<CandidateEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.construction.clone(), i as u32))
            .collect();
        CandidateTable {
            entries,
            index,
            stats: BigramStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, c: &Construction) -> Option<&CandidateEntry> {
        self.index.get(c).map(|&i| &self.entries[i as usize])
    }

    /// One line per candidate: slot syntax, frequency, then the 30 features.
    pub fn export(&self, corpus: &AnnotatedCorpus) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&entry.construction.render(corpus));
            out.push('\t');
            out.push_str(&entry.freq.to_string());
            for f in entry.features {
                out.push_str(&format!("\t{f:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Candidate extraction parameters.
#[derive(Debug, Clone)]
pub struct ExtractParams {
    pub level: Level,
    pub min_len: usize,
    pub max_len: usize,
    pub min_freq: u64,
    /// FULL pass only: per token n-gram, keep at most this many constraint
    /// realizations (ranked by frequency).
    pub full_top_m: usize,
}

impl ExtractParams {
    pub fn new(level: Level, max_slots: usize, min_freq: u64) -> Self {
        ExtractParams {
            level,
            min_len: 2,
            max_len: max_slots,
            min_freq,
            full_top_m: 8,
        }
    }
}

/// Reps a FULL-pass slot may be constrained at, given unigram frequencies.
fn allowed_reps(unit: &UnitTriple, unigrams: &[HashMap<u32, u64>; 3], min_freq: u64) -> Vec<Rep> {
    Rep::ALL
        .into_iter()
        .filter(|rep| unigrams[rep.index()].get(&unit.id(*rep)).copied().unwrap_or(0) >= min_freq)
        .collect()
}

/// All constraint realizations of one token window at the FULL level.
fn full_realizations(
    window: &[UnitTriple],
    unigrams: &[HashMap<u32, u64>; 3],
    min_freq: u64,
) -> Vec<Construction> {
    let per_slot: Vec<Vec<Rep>> = window
        .iter()
        .map(|u| allowed_reps(u, unigrams, min_freq))
        .collect();
    if per_slot.iter().any(|reps| reps.is_empty()) {
        return Vec::new();
    }
    let mut out: Vec<Vec<SlotConstraint>> = vec![Vec::new()];
    for (unit, reps) in window.iter().zip(&per_slot) {
        let mut next = Vec::with_capacity(out.len() * reps.len());
        for prefix in &out {
            for &rep in reps {
                let mut slots = prefix.clone();
                slots.push(SlotConstraint { rep, unit: unit.id(rep) });
                next.push(slots);
            }
        }
        out = next;
    }
    out.into_iter().map(Construction::new).collect()
}

fn level_realizations(
    window: &[UnitTriple],
    level: Level,
    unigrams: &[HashMap<u32, u64>; 3],
    min_freq: u64,
) -> Vec<Construction> {
    match level {
        Level::Lex => vec![Construction::new(
            window.iter().map(|u| SlotConstraint::lex(u.lex)).collect(),
        )],
        Level::Syn => vec![Construction::new(
            window.iter().map(|u| SlotConstraint::syn(u.syn)).collect(),
        )],
        Level::Full => full_realizations(window, unigrams, min_freq),
    }
}

/// Extract and score candidate constructions from the given sentences.
pub fn extract_candidates(
    corpus: &AnnotatedCorpus,
    sentences: &[u32],
    params: &ExtractParams,
) -> Result<CandidateTable> {
    if params.min_len > params.max_len {
        return Err(Error::invalid(format!(
            "min_len {} exceeds max_len {}",
            params.min_len, params.max_len
        )));
    }
    if params.min_len < 1 {
        return Err(Error::invalid("min_len must be at least 1"));
    }

    let stats = BigramStats::build(corpus, sentences);

    // Unigram (line, unit) frequencies, used by the FULL-pass slot pruning.
    let mut unigrams: [HashMap<u32, u64>; 3] = Default::default();
    for &si in sentences {
        for unit in &corpus.sentences[si as usize] {
            for rep in Rep::ALL {
                *unigrams[rep.index()].entry(unit.id(rep)).or_insert(0) += 1;
            }
        }
    }

    // Group windows by their full id-triple sequence.
    let mut windows: HashMap<Vec<UnitTriple>, u64> = HashMap::new();
    for &si in sentences {
        let sentence = &corpus.sentences[si as usize];
        for n in params.min_len..=params.max_len {
            if sentence.len() < n {
                break;
            }
            for w in sentence.windows(n) {
                let key: Vec<UnitTriple> = w.iter().map(|u| u.triple()).collect();
                *windows.entry(key).or_insert(0) += 1;
            }
        }
    }

    // Aggregate realization frequencies.
    let mut freqs: HashMap<Construction, u64> = HashMap::new();
    for (window, &count) in &windows {
        for c in level_realizations(window, params.level, &unigrams, params.min_freq) {
            *freqs.entry(c).or_insert(0) += count;
        }
    }
    freqs.retain(|_, &mut f| f >= params.min_freq);

    // FULL pass: keep only the top-m realizations of each token window.
    if params.level == Level::Full {
        let mut survivors: HashSet<Construction> = HashSet::new();
        for window in windows.keys() {
            let mut realized: Vec<(&Construction, u64)> = Vec::new();
            for c in full_realizations(window, &unigrams, params.min_freq) {
                if let Some((key, &freq)) = freqs.get_key_value(&c) {
                    realized.push((key, freq));
                }
            }
            realized.sort_by(|(ca, fa), (cb, fb)| fb.cmp(fa).then(ca.cmp(cb)));
            for (c, _) in realized.into_iter().take(params.full_top_m) {
                survivors.insert(c.clone());
            }
        }
        freqs.retain(|c, _| survivors.contains(c));
    }

    // Per-slot per-line realization counts for the retained candidates.
    let mut realization_counts: HashMap<&Construction, Vec<[HashMap<u32, u64>; 3]>> = HashMap::new();
    let retained: HashSet<&Construction> = freqs.keys().collect();
    for (window, &count) in &windows {
        for c in level_realizations(window, params.level, &unigrams, params.min_freq) {
            let Some(&key) = retained.get(&c) else { continue };
            let slots = realization_counts
                .entry(key)
                .or_insert_with(|| vec![Default::default(); key.len()]);
            for (slot, unit) in slots.iter_mut().zip(window) {
                for rep in Rep::ALL {
                    *slot[rep.index()].entry(unit.id(rep)).or_insert(0) += count;
                }
            }
        }
    }

    let mut entries: Vec<CandidateEntry> = freqs
        .iter()
        .map(|(c, &freq)| {
            let counts = &realization_counts[c];
            let projections: Vec<[u32; 3]> = c
                .slots
                .iter()
                .zip(counts)
                .map(|(slot, lines)| {
                    let mut proj = [0u32; 3];
                    for rep in Rep::ALL {
                        proj[rep.index()] = if rep == slot.rep {
                            slot.unit
                        } else {
                            majority(&lines[rep.index()])
                        };
                    }
                    proj
                })
                .collect();
            let features = feature_vector(&projections, &stats);
            CandidateEntry {
                construction: c.clone(),
                freq,
                features,
                projections,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.freq.cmp(&a.freq).then(a.construction.cmp(&b.construction)));

    let index = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.construction.clone(), i as u32))
        .collect();
    Ok(CandidateTable { entries, index, stats })
}

/// Most frequent unit, ties to the smaller id.
fn majority(counts: &HashMap<u32, u64>) -> u32 {
    let mut best: Option<(u64, u32)> = None;
    for (&unit, &count) in counts {
        let better = match best {
            None => true,
            Some((bc, bu)) => count > bc || (count == bc && unit < bu),
        };
        if better {
            best = Some((count, unit));
        }
    }
    best.map(|(_, u)| u).unwrap_or(0)
}

/// Per-feature ordered threshold lists at empirical quantiles.
#[derive(Debug, Clone)]
pub struct ThresholdGrid {
    pub per_feature: Vec<Vec<f64>>,
}

impl ThresholdGrid {
    pub fn thresholds(&self, feature: usize) -> &[f64] {
        &self.per_feature[feature]
    }
}

/// Discretize the feature space: for each feature, thresholds are the
/// empirical quantiles at i/bins for i = 1..bins-1, deduplicated, ascending.
pub fn threshold_grid(table: &CandidateTable, bins: usize) -> Result<ThresholdGrid> {
    if table.is_empty() {
        return Err(Error::invalid("cannot build a threshold grid from an empty table"));
    }
    if bins < 2 {
        return Err(Error::invalid("bins must be at least 2"));
    }
    let n = table.entries.len();
    let mut per_feature = Vec::with_capacity(FEATURE_COUNT);
    for f in 0..FEATURE_COUNT {
        let mut values: Vec<f64> = table.entries.iter().map(|e| e.features[f]).collect();
        values.sort_by(f64::total_cmp);
        let mut thresholds: Vec<f64> = (1..bins).map(|i| values[i * n / bins]).collect();
        thresholds.dedup();
        per_feature.push(thresholds);
    }
    Ok(ThresholdGrid { per_feature })
}
