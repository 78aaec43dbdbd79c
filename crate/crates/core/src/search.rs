//! Tabu search for the grammar minimizing the MDL metric.
//!
//! The indirect search moves over sampler parameters: per association
//! feature a status (OFF, AND, OR) and a threshold index into that feature's
//! grid. Each turn generates the full move inventory, evaluates every move's
//! sampled grammar against the restart segment, and takes the best
//! admissible move even when it worsens the metric. A move is admissible if
//! it touches no tabu feature or if it sets a new global best (aspiration).
//! The direct search afterwards toggles single constructions in and out of
//! the inventory under the same discipline.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assoc::{CandidateTable, ThresholdGrid};
use crate::encoder::{corpus_mdl_view, SegmentView};
use crate::error::Result;
use crate::grammar::{Construction, Grammar, Level};

/// Sampler status of one association feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Off,
    And,
    Or,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Off => "OFF",
            Status::And => "AND",
            Status::Or => "OR",
        }
    }
}

/// One feature's sampler parameter: status plus a grid threshold index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureState {
    pub status: Status,
    pub threshold: usize,
}

/// The tabu search's state vector: one parameter per association feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerState {
    pub features: Vec<FeatureState>,
}

impl SamplerState {
    /// Random initialization: each feature independently OFF/AND/OR with a
    /// uniformly drawn threshold index.
    pub fn random(grid: &ThresholdGrid, rng: &mut impl Rng) -> Self {
        let features = grid
            .per_feature
            .iter()
            .map(|thresholds| {
                let status = match rng.gen_range(0..3u8) {
                    0 => Status::Off,
                    1 => Status::And,
                    _ => Status::Or,
                };
                FeatureState {
                    status,
                    threshold: rng.gen_range(0..thresholds.len()),
                }
            })
            .collect();
        SamplerState { features }
    }

    pub fn apply(&self, mv: &Move) -> SamplerState {
        let mut next = self.clone();
        for &(feature, state) in &mv.changes {
            next.features[feature] = state;
        }
        next
    }
}

/// The three move kinds of the indirect search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Off,
    And,
    Or,
}

impl MoveKind {
    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Off => "OFF",
            MoveKind::And => "AND",
            MoveKind::Or => "OR",
        }
    }
}

/// A state transition: the touched features with their new parameters.
#[derive(Debug, Clone)]
pub struct Move {
    pub kind: MoveKind,
    pub changes: Vec<(usize, FeatureState)>,
}

impl Move {
    pub fn touched(&self) -> Vec<u32> {
        self.changes.iter().map(|(f, _)| *f as u32).collect()
    }
}

/// Short-term memory: the touched-feature sets of the last `capacity` moves.
#[derive(Debug, Clone)]
pub struct TabuList {
    entries: VecDeque<Vec<u32>>,
    capacity: usize,
}

impl TabuList {
    pub fn new(capacity: usize) -> Self {
        TabuList {
            entries: VecDeque::new(),
            capacity,
        }
    }

    pub fn push(&mut self, touched: Vec<u32>) {
        self.entries.push_back(touched);
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
    }

    /// True if any of the given features was changed in the remembered moves.
    pub fn blocks(&self, touched: &[u32]) -> bool {
        touched
            .iter()
            .any(|f| self.entries.iter().any(|entry| entry.contains(f)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Search knobs. Defaults follow the protocol: tabu capacity 7, stop after
/// 14 non-improving turns, 25 AND moves grouping up to 5 companions, 2 OR
/// moves on each side of the current threshold, 20 grid bins.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub tabu_capacity: usize,
    pub stop_after: usize,
    pub and_moves_per_feature: usize,
    pub and_group_max: usize,
    pub or_moves_each_side: usize,
    pub bins: usize,
    pub direct_add_pool: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            tabu_capacity: 7,
            stop_after: 14,
            and_moves_per_feature: 25,
            and_group_max: 5,
            or_moves_each_side: 2,
            bins: 20,
            direct_add_pool: 50,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        SearchConfig {
            seed,
            ..Default::default()
        }
    }
}

/// One trace line: the applied move, its metric, and the best so far.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub turn: usize,
    pub kind: String,
    pub features: Vec<u32>,
    pub mdl: f64,
    pub best: f64,
}

/// Line-delimited `turn<TAB>kind<TAB>features<TAB>mdl<TAB>best-mdl` records.
pub fn render_trace(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let features = if r.features.is_empty() {
            "-".to_string()
        } else {
            r.features
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\n",
            r.turn, r.kind, features, r.mdl, r.best
        ));
    }
    out
}

/// Candidate indices admitted by a sampler state: a candidate is included if
/// all AND features pass their thresholds (and at least one AND feature
/// exists) or if any OR feature passes its threshold.
pub fn sample(table: &CandidateTable, state: &SamplerState, grid: &ThresholdGrid) -> Vec<u32> {
    let mut and_checks: Vec<(usize, f64)> = Vec::new();
    let mut or_checks: Vec<(usize, f64)> = Vec::new();
    for (f, fs) in state.features.iter().enumerate() {
        let threshold = grid.per_feature[f][fs.threshold];
        match fs.status {
            Status::And => and_checks.push((f, threshold)),
            Status::Or => or_checks.push((f, threshold)),
            Status::Off => {}
        }
    }
    let mut selected = Vec::new();
    for (i, entry) in table.entries.iter().enumerate() {
        let and_ok = !and_checks.is_empty()
            && and_checks.iter().all(|&(f, t)| entry.features[f] >= t);
        let or_ok = or_checks.iter().any(|&(f, t)| entry.features[f] >= t);
        if and_ok || or_ok {
            selected.push(i as u32);
        }
    }
    selected
}

/// Build the grammar a set of candidate indices samples.
pub fn sampled_grammar(
    table: &CandidateTable,
    indices: &[u32],
    level: Level,
    alphabet_sizes: [usize; 3],
) -> Grammar {
    Grammar::from_constructions(
        level,
        alphabet_sizes,
        indices
            .iter()
            .map(|&i| table.entries[i as usize].construction.clone()),
    )
}

/// The full move inventory for one turn: per feature one OFF move, up to two
/// OR moves on each side of the current threshold (clipped at the grid
/// ends), and 25 AND moves grouping the feature with 1..=5 random companions
/// at random thresholds.
pub fn generate_moves(
    state: &SamplerState,
    grid: &ThresholdGrid,
    config: &SearchConfig,
    rng: &mut impl Rng,
) -> Vec<Move> {
    let mut moves = Vec::new();
    let feature_count = state.features.len();
    for f in 0..feature_count {
        let current = state.features[f];
        moves.push(Move {
            kind: MoveKind::Off,
            changes: vec![(
                f,
                FeatureState {
                    status: Status::Off,
                    threshold: current.threshold,
                },
            )],
        });
        let grid_len = grid.per_feature[f].len();
        for d in 1..=config.or_moves_each_side {
            let idx = current.threshold + d;
            if idx < grid_len {
                moves.push(Move {
                    kind: MoveKind::Or,
                    changes: vec![(f, FeatureState { status: Status::Or, threshold: idx })],
                });
            }
        }
        for d in 1..=config.or_moves_each_side {
            if current.threshold >= d {
                let idx = current.threshold - d;
                moves.push(Move {
                    kind: MoveKind::Or,
                    changes: vec![(f, FeatureState { status: Status::Or, threshold: idx })],
                });
            }
        }
        let others: Vec<usize> = (0..feature_count).filter(|&o| o != f).collect();
        for _ in 0..config.and_moves_per_feature {
            let group = rng.gen_range(1..=config.and_group_max.min(others.len()));
            let companions: Vec<usize> = others
                .choose_multiple(rng, group)
                .copied()
                .collect();
            let mut changes = vec![(
                f,
                FeatureState {
                    status: Status::And,
                    threshold: current.threshold,
                },
            )];
            for companion in companions {
                let len = grid.per_feature[companion].len();
                changes.push((
                    companion,
                    FeatureState {
                        status: Status::And,
                        threshold: rng.gen_range(0..len),
                    },
                ));
            }
            moves.push(Move {
                kind: MoveKind::And,
                changes,
            });
        }
    }
    moves
}

/// A move is admissible if it touches no tabu feature, or if its grammar
/// sets a new global best (aspiration overrules the tabu list).
pub fn admissible(mv: &Move, tabu: &TabuList, candidate_mdl: f64, best_mdl: f64) -> bool {
    !tabu.blocks(&mv.touched()) || candidate_mdl < best_mdl
}

/// Result of a search: the best observed grammar, its metric on the search
/// segment, and the per-turn trace.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub grammar: Grammar,
    pub mdl: f64,
    pub trace: Vec<TraceRecord>,
}

/// The indirect tabu search over sampler parameters.
pub fn parameter_search(
    table: &CandidateTable,
    view: &SegmentView,
    level: Level,
    alphabet_sizes: [usize; 3],
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    let empty = Grammar::new(level, alphabet_sizes);
    let empty_mdl = corpus_mdl_view(view, &empty)?.mdl_total;
    if table.is_empty() {
        return Ok(SearchOutcome {
            grammar: empty,
            mdl: empty_mdl,
            trace: vec![TraceRecord {
                turn: 0,
                kind: "WARN-EMPTY-TABLE".to_string(),
                features: Vec::new(),
                mdl: empty_mdl,
                best: empty_mdl,
            }],
        });
    }

    let grid = crate::assoc::threshold_grid(table, config.bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = SamplerState::random(&grid, &mut rng);
    let mut cache: HashMap<Vec<u32>, f64> = HashMap::new();

    let eval = |indices: &[u32]| -> Result<f64> {
        let g = sampled_grammar(table, indices, level, alphabet_sizes);
        Ok(corpus_mdl_view(view, &g)?.mdl_total)
    };

    let initial_indices = sample(table, &state, &grid);
    let initial_mdl = eval(&initial_indices)?;
    cache.insert(initial_indices.clone(), initial_mdl);

    let mut best_indices = initial_indices;
    let mut best_mdl = initial_mdl;
    let mut tabu = TabuList::new(config.tabu_capacity);
    let mut trace = vec![TraceRecord {
        turn: 0,
        kind: "INIT".to_string(),
        features: Vec::new(),
        mdl: initial_mdl,
        best: best_mdl,
    }];

    let mut non_improving = 0usize;
    let mut turn = 0usize;
    while non_improving < config.stop_after {
        turn += 1;
        let moves = generate_moves(&state, &grid, config, &mut rng);
        let sampled: Vec<Vec<u32>> = moves
            .par_iter()
            .map(|mv| sample(table, &state.apply(mv), &grid))
            .collect();

        // Evaluate each distinct grammar once.
        let mut pending: Vec<&Vec<u32>> = Vec::new();
        let mut seen: HashSet<&Vec<u32>> = HashSet::new();
        for indices in &sampled {
            if !cache.contains_key(indices) && seen.insert(indices) {
                pending.push(indices);
            }
        }
        let evaluated: Vec<(Vec<u32>, Result<f64>)> = pending
            .par_iter()
            .map(|indices| ((*indices).clone(), eval(indices)))
            .collect();
        for (indices, mdl) in evaluated {
            cache.insert(indices, mdl?);
        }

        // Best admissible move, ties to generation order.
        let mut chosen: Option<(usize, f64)> = None;
        for (i, mv) in moves.iter().enumerate() {
            let mdl = cache[&sampled[i]];
            if !admissible(mv, &tabu, mdl, best_mdl) {
                continue;
            }
            if chosen.map_or(true, |(_, cm)| mdl < cm) {
                chosen = Some((i, mdl));
            }
        }
        let Some((idx, mdl)) = chosen else {
            // Every move is tabu and none aspires: a lost turn.
            non_improving += 1;
            trace.push(TraceRecord {
                turn,
                kind: "STUCK".to_string(),
                features: Vec::new(),
                mdl: f64::NAN,
                best: best_mdl,
            });
            continue;
        };

        let mv = &moves[idx];
        state = state.apply(mv);
        tabu.push(mv.touched());
        if mdl < best_mdl {
            best_mdl = mdl;
            best_indices = sampled[idx].clone();
            non_improving = 0;
        } else {
            non_improving += 1;
        }
        trace.push(TraceRecord {
            turn,
            kind: mv.kind.name().to_string(),
            features: mv.touched(),
            mdl,
            best: best_mdl,
        });
    }

    Ok(SearchOutcome {
        grammar: sampled_grammar(table, &best_indices, level, alphabet_sizes),
        mdl: best_mdl,
        trace,
    })
}

/// The direct tabu search across constructions: each turn toggles a single
/// construction (remove a member, or add one of the most frequent excluded
/// candidates), with the same tabu capacity, aspiration, and stopping rule.
pub fn direct_search(
    g: &Grammar,
    table: &CandidateTable,
    view: &SegmentView,
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    let level = g.level;
    let alphabet_sizes = g.alphabet_sizes;

    // Stable ids for trace records and memoization: table index when the
    // construction is a candidate, fresh ids past the table otherwise.
    let mut ids: HashMap<Construction, u32> = table
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.construction.clone(), i as u32))
        .collect();
    let mut id_of = |c: &Construction, next: &mut u32| -> u32 {
        if let Some(&id) = ids.get(c) {
            return id;
        }
        let id = *next;
        *next += 1;
        ids.insert(c.clone(), id);
        id
    };
    let mut next_id = table.len() as u32;

    let mut current: Vec<Construction> = g.constructions().to_vec();
    let mut current_ids: Vec<u32> = current.iter().map(|c| id_of(c, &mut next_id)).collect();

    let eval = |constructions: &[Construction]| -> Result<f64> {
        let grammar =
            Grammar::from_constructions(level, alphabet_sizes, constructions.iter().cloned());
        Ok(corpus_mdl_view(view, &grammar)?.mdl_total)
    };

    let key_of = |ids: &[u32]| -> Vec<u32> {
        let mut key = ids.to_vec();
        key.sort_unstable();
        key
    };

    let mut cache: HashMap<Vec<u32>, f64> = HashMap::new();
    let initial_mdl = eval(&current)?;
    cache.insert(key_of(&current_ids), initial_mdl);

    let mut best = current.clone();
    let mut best_mdl = initial_mdl;
    let mut tabu: VecDeque<u32> = VecDeque::new();
    let mut trace = vec![TraceRecord {
        turn: 0,
        kind: "INIT".to_string(),
        features: Vec::new(),
        mdl: initial_mdl,
        best: best_mdl,
    }];

    enum Toggle {
        Drop(usize),
        Add,
    }

    let mut non_improving = 0usize;
    let mut turn = 0usize;
    while non_improving < config.stop_after {
        turn += 1;
        let member_set: HashSet<&Construction> = current.iter().collect();
        let mut moves: Vec<(Toggle, u32, Vec<Construction>)> = Vec::new();
        for i in 0..current.len() {
            let mut removed = current.clone();
            removed.remove(i);
            moves.push((Toggle::Drop(i), current_ids[i], removed));
        }
        let mut added = 0usize;
        for (i, entry) in table.entries.iter().enumerate() {
            if added >= config.direct_add_pool {
                break;
            }
            if member_set.contains(&entry.construction) {
                continue;
            }
            let mut extended = current.clone();
            extended.push(entry.construction.clone());
            moves.push((Toggle::Add, i as u32, extended));
            added += 1;
        }
        if moves.is_empty() {
            break;
        }

        let keys: Vec<Vec<u32>> = moves
            .iter()
            .map(|(toggle, id, _)| {
                let mut key: Vec<u32> = match toggle {
                    Toggle::Drop(i) => current_ids
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| j != i)
                        .map(|(_, &v)| v)
                        .collect(),
                    Toggle::Add => {
                        let mut k = current_ids.clone();
                        k.push(*id);
                        k
                    }
                };
                key.sort_unstable();
                key
            })
            .collect();

        let mut pending: Vec<usize> = Vec::new();
        let mut seen: HashSet<&Vec<u32>> = HashSet::new();
        for (i, key) in keys.iter().enumerate() {
            if !cache.contains_key(key) && seen.insert(key) {
                pending.push(i);
            }
        }
        let evaluated: Vec<(usize, Result<f64>)> = pending
            .par_iter()
            .map(|&i| (i, eval(&moves[i].2)))
            .collect();
        for (i, mdl) in evaluated {
            cache.insert(keys[i].clone(), mdl?);
        }

        let mut chosen: Option<(usize, f64)> = None;
        for (i, (_, id, _)) in moves.iter().enumerate() {
            let mdl = cache[&keys[i]];
            let blocked = tabu.contains(id);
            if blocked && !(mdl < best_mdl) {
                continue;
            }
            if chosen.map_or(true, |(_, cm)| mdl < cm) {
                chosen = Some((i, mdl));
            }
        }
        let Some((idx, mdl)) = chosen else {
            non_improving += 1;
            trace.push(TraceRecord {
                turn,
                kind: "STUCK".to_string(),
                features: Vec::new(),
                mdl: f64::NAN,
                best: best_mdl,
            });
            continue;
        };

        let (toggle, id, constructions) = &moves[idx];
        let kind = match toggle {
            Toggle::Drop(_) => "DROP",
            Toggle::Add => "ADD",
        };
        current = constructions.clone();
        current_ids = match toggle {
            Toggle::Drop(i) => {
                let mut ids = current_ids.clone();
                ids.remove(*i);
                ids
            }
            Toggle::Add => {
                let mut ids = current_ids.clone();
                ids.push(*id);
                ids
            }
        };
        tabu.push_back(*id);
        while tabu.len() > config.tabu_capacity {
            tabu.pop_front();
        }
        if mdl < best_mdl {
            best_mdl = mdl;
            best = current.clone();
            non_improving = 0;
        } else {
            non_improving += 1;
        }
        trace.push(TraceRecord {
            turn,
            kind: kind.to_string(),
            features: vec![*id],
            mdl,
            best: best_mdl,
        });
    }

    Ok(SearchOutcome {
        grammar: Grammar::from_constructions(level, alphabet_sizes, best),
        mdl: best_mdl,
        trace,
    })
}
