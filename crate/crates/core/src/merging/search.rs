use std::collections::BTreeSet;

use rayon::prelude::*;

use super::candidates::candidate_merges;
use super::state::{MergeCandidate, MergeState};
use super::trace::{Trace, TraceStep};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::priors::PriorConfig;

/// Relative tolerance under which objectives count as equal.
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Consecutive non-improving merges tolerated before stopping.
    pub lookahead: usize,
    /// Number of working models; 1 is best-first search.
    pub beam_width: usize,
    /// Samples incorporated per on-line step.
    pub batch_size: usize,
    /// Samples incorporated before the first on-line merge.
    pub warmup: usize,
    /// Restrict merges to states with identical emission sets until the final pass.
    pub same_emission_phase: bool,
    pub forbid_loops: bool,
    pub allow_self_loops: bool,
    /// Only merge states with identical emission sets, in every phase.
    pub single_output: bool,
    /// Reparse all samples after this many merges.
    pub reparse_interval: Option<usize>,
    /// Scale existing counts by this factor whenever samples arrive.
    pub count_decay: Option<f64>,
    /// Check every incremental score against a full recomputation.
    pub audit_scoring: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lookahead: 5,
            beam_width: 1,
            batch_size: 1,
            warmup: 10,
            same_emission_phase: true,
            forbid_loops: false,
            allow_self_loops: false,
            single_output: false,
            reparse_interval: None,
            count_decay: None,
            audit_scoring: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lookahead", self.lookahead),
            ("beam width", self.beam_width),
            ("batch size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.reparse_interval == Some(0) {
            return Err(Error::Config("reparse interval must be at least 1".into()));
        }
        if let Some(d) = self.count_decay {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Config(format!(
                    "count decay must be in (0, 1], got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Final model of a merge run and its log.
#[derive(Clone, Debug)]
pub struct MergeResult {
    pub state: MergeState,
    pub trace: Trace,
}

fn ties(a: f64, b: f64) -> f64 {
    TIE_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Scores every candidate pair, in pair order.
fn score_all(
    state: &MergeState,
    pairs: &[(usize, usize)],
    trace: &mut Trace,
    audit: bool,
) -> Vec<MergeCandidate> {
    let scored: Vec<(MergeCandidate, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let c = state
                .score_candidate(a, b)
                .expect("candidate pairs are live");
            let err = if audit {
                let mut t = state.clone();
                t.merge_states(a, b).expect("candidate pairs are live");
                let full = t.full_score().expect("valid configuration");
                (c.score.objective - full.objective).abs()
            } else {
                0.0
            };
            (c, err)
        })
        .collect();
    if audit {
        trace.audited += scored.len();
        for (_, e) in &scored {
            trace.max_audit_error = trace.max_audit_error.max(*e);
        }
    }
    scored.into_iter().map(|(c, _)| c).collect()
}

/// Highest delta; near-ties go to the smallest pair.
fn select(cands: &[MergeCandidate]) -> Option<MergeCandidate> {
    let best = cands
        .iter()
        .map(|c| c.delta)
        .fold(f64::NEG_INFINITY, f64::max);
    cands
        .iter()
        .filter(|c| c.delta >= best - ties(best, best))
        .min_by_key(|c| c.pair)
        .copied()
}

/// Candidates in selection order: the selected one first, then by
/// decreasing delta and increasing pair.
fn ranked(mut cands: Vec<MergeCandidate>) -> Vec<MergeCandidate> {
    let Some(first) = select(&cands) else {
        return cands;
    };
    cands.retain(|c| c.pair != first.pair);
    cands.sort_by(|x, y| y.delta.total_cmp(&x.delta).then(x.pair.cmp(&y.pair)));
    cands.insert(0, first);
    cands
}

fn apply(
    state: &mut MergeState,
    c: &MergeCandidate,
    search: &SearchConfig,
    since_refresh: &mut usize,
) -> Result<TraceStep> {
    let before = state.score();
    state.merge_states(c.pair.0, c.pair.1)?;
    *since_refresh += 1;
    if search.reparse_interval.is_some_and(|k| *since_refresh >= k) {
        state.refresh_counts()?;
        *since_refresh = 0;
    }
    let after = state.score();
    Ok(TraceStep {
        step: 0,
        pair: c.pair,
        delta: after.objective - before.objective,
        objective: after.objective,
        states: state.n_states(),
        log_prior_delta: after.log_prior - before.log_prior,
        log_likelihood_delta: after.log_likelihood - before.log_likelihood,
        lambda: after.lambda,
        samples_seen: state.samples_seen(),
    })
}

fn run_best_first(
    state: MergeState,
    search: &SearchConfig,
    same_emission: bool,
    trace: &mut Trace,
) -> Result<MergeState> {
    let mut current = state;
    let mut best = current.clone();
    let mut best_obj = current.score().objective;
    let mut stall = 0;
    let mut since_refresh = 0;
    loop {
        let pairs = candidate_merges(&current, search, same_emission);
        let cands = score_all(&current, &pairs, trace, search.audit_scoring);
        let Some(c) = select(&cands) else { break };
        let step = apply(&mut current, &c, search, &mut since_refresh)?;
        let obj = step.objective;
        trace.push(step);
        if obj >= best_obj - ties(obj, best_obj) {
            best = current.clone();
            best_obj = obj;
            stall = 0;
        } else {
            stall += 1;
            if stall >= search.lookahead {
                break;
            }
        }
    }
    Ok(best)
}

fn run_beam(
    state: MergeState,
    search: &SearchConfig,
    same_emission: bool,
    trace: &mut Trace,
) -> Result<MergeState> {
    let width = search.beam_width;
    let mut beam = vec![state];
    let mut best = beam[0].clone();
    let mut best_obj = best.score().objective;
    let mut stall = 0;
    let mut since_refresh = 0;
    loop {
        let mut pool: Vec<(MergeState, TraceStep)> = Vec::new();
        for entry in &beam {
            let pairs = candidate_merges(entry, search, same_emission);
            let cands = ranked(score_all(entry, &pairs, trace, search.audit_scoring));
            let mut earlier: Vec<(usize, usize)> = Vec::new();
            for c in cands.iter().take(width) {
                let mut next = entry.clone();
                next.disallowed.extend(earlier.iter().copied());
                let mut k = since_refresh;
                let step = apply(&mut next, c, search, &mut k)?;
                pool.push((next, step));
                earlier.push(c.pair);
            }
        }
        since_refresh = if search
            .reparse_interval
            .is_some_and(|k| since_refresh + 1 >= k)
        {
            0
        } else {
            since_refresh + 1
        };
        // keep the better-scoring copy of each partition; ties keep the earlier
        pool.sort_by(|x, y| y.1.objective.total_cmp(&x.1.objective));
        let mut seen = BTreeSet::new();
        pool.retain(|(s, _)| seen.insert(s.partition()));
        pool.truncate(width);
        if pool.is_empty() {
            break;
        }
        let obj = pool[0].1.objective;
        trace.push(pool[0].1.clone());
        if obj >= best_obj - ties(obj, best_obj) {
            best = pool[0].0.clone();
            best_obj = obj;
            stall = 0;
        } else {
            stall += 1;
            if stall >= search.lookahead {
                break;
            }
        }
        beam = pool.into_iter().map(|(s, _)| s).collect();
    }
    Ok(best)
}

fn merge_pass(
    state: MergeState,
    search: &SearchConfig,
    same_emission: bool,
    trace: &mut Trace,
) -> Result<MergeState> {
    if search.beam_width > 1 {
        run_beam(state, search, same_emission, trace)
    } else {
        run_best_first(state, search, same_emission, trace)
    }
}

/// Greedy merging with lookahead; returns the best model seen.
pub fn best_first_merge(state: MergeState, search: &SearchConfig) -> Result<MergeResult> {
    search.validate()?;
    let mut trace = Trace::default();
    let state = run_best_first(state, search, false, &mut trace)?;
    Ok(MergeResult { state, trace })
}

/// Beam search over merge sequences; a width of one is best-first search.
pub fn beam_merge(state: MergeState, search: &SearchConfig) -> Result<MergeResult> {
    search.validate()?;
    let mut trace = Trace::default();
    let state = run_beam(state, search, false, &mut trace)?;
    Ok(MergeResult { state, trace })
}

/// Batch induction: build the initial model from all samples, then merge,
/// first among identical-emission pairs if so configured.
pub fn batch_merge(
    corpus: &Corpus,
    cfg: &PriorConfig,
    search: &SearchConfig,
) -> Result<MergeResult> {
    cfg.validate()?;
    search.validate()?;
    let mut trace = Trace::default();
    let mut state = super::build_initial_model(corpus, cfg)?;
    trace.profile.push((state.samples_seen(), state.n_states()));
    if search.same_emission_phase {
        state = merge_pass(state, search, true, &mut trace)?;
    }
    state = merge_pass(state, search, false, &mut trace)?;
    Ok(MergeResult { state, trace })
}

/// On-line induction: samples arrive in batches and merging resumes after
/// each batch once the warm-up count is reached. A final unconstrained pass
/// follows the last batch.
pub fn online_merge(
    stream: &Corpus,
    cfg: &PriorConfig,
    search: &SearchConfig,
) -> Result<MergeResult> {
    cfg.validate()?;
    search.validate()?;
    let mut trace = Trace::default();
    let mut state = MergeState::empty(stream.alphabet(), cfg);
    let mut merged = false;
    for chunk in stream.samples().chunks(search.batch_size) {
        state.incorporate(&Corpus::new(chunk.to_vec()), search.count_decay)?;
        trace.profile.push((state.samples_seen(), state.n_states()));
        if state.samples_seen() >= search.warmup {
            state = merge_pass(state, search, search.same_emission_phase, &mut trace)?;
            merged = true;
        }
    }
    if stream.is_empty() {
        return Ok(MergeResult { state, trace });
    }
    if !merged && search.same_emission_phase {
        state = merge_pass(state, search, true, &mut trace)?;
    }
    state = merge_pass(state, search, false, &mut trace)?;
    Ok(MergeResult { state, trace })
}
