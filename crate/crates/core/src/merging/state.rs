use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Alphabet, Corpus, Sample};
use crate::error::{Error, Result};
use crate::hmm::{ml_estimates, Counts, Dest, Hmm, Src};
use crate::priors::{lambda_schedule, map_estimates, weighted, PriorConfig, Score, Scorer};

/// Per-state rows of counts with cached score terms.
#[derive(Clone, Debug)]
pub(crate) struct StateRow {
    pub trans: BTreeMap<Dest, f64>,
    pub emit: BTreeMap<usize, f64>,
    pub preds: BTreeSet<Src>,
    /// Initial-model states merged into this one.
    pub members: Vec<usize>,
    /// Transition-row terms at the current size and at one state fewer.
    trans_now: (f64, f64),
    trans_next: (f64, f64),
    emit_terms: (f64, f64),
}

/// A model under construction by merging.
///
/// Counts are the persistent state; probabilities are derived from them.
/// States keep stable ids for their lifetime: a merge keeps the smaller id
/// and retires the larger one. Exported models are reindexed densely in id
/// order.
#[derive(Clone, Debug)]
pub struct MergeState {
    alphabet: Alphabet,
    scorer: Scorer,
    initial: BTreeMap<Dest, f64>,
    initial_now: (f64, f64),
    initial_next: (f64, f64),
    states: Vec<Option<StateRow>>,
    n_live: usize,
    n_trans: usize,
    n_emit: usize,
    sum_now: (f64, f64),
    sum_next: (f64, f64),
    samples_seen: usize,
    corpus: Corpus,
    weights: Vec<f64>,
    next_member: usize,
    pub(crate) disallowed: BTreeSet<(usize, usize)>,
    lambda: f64,
}

/// A scored merge: `delta` is the change in objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeCandidate {
    pub pair: (usize, usize),
    pub delta: f64,
    pub score: Score,
}

fn add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

fn sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, a.1 - b.1)
}

fn redirect(d: Dest, from: usize, to: usize) -> Dest {
    match d {
        Dest::State(q) if q == from => Dest::State(to),
        d => d,
    }
}

impl MergeState {
    /// A model with no states and no samples.
    pub fn empty(alphabet: Alphabet, cfg: &PriorConfig) -> Self {
        let scorer = Scorer::new(cfg, &alphabet, &Counts::zeros(0));
        let mut s = MergeState {
            alphabet,
            scorer,
            initial: BTreeMap::new(),
            initial_now: (0.0, 0.0),
            initial_next: (0.0, 0.0),
            states: Vec::new(),
            n_live: 0,
            n_trans: 0,
            n_emit: 0,
            sum_now: (0.0, 0.0),
            sum_next: (0.0, 0.0),
            samples_seen: 0,
            corpus: Corpus::default(),
            weights: Vec::new(),
            next_member: 0,
            disallowed: BTreeSet::new(),
            lambda: lambda_schedule(0, cfg),
        };
        s.rescore_all();
        s
    }

    pub fn config(&self) -> &PriorConfig {
        &self.scorer.cfg
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n_states(&self) -> usize {
        self.n_live
    }

    /// Ids of the live states in ascending order.
    pub fn live_ids(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&q| self.states[q].is_some())
            .collect()
    }

    pub fn is_live(&self, q: usize) -> bool {
        self.states.get(q).is_some_and(Option::is_some)
    }

    pub fn samples_seen(&self) -> usize {
        self.samples_seen
    }

    /// Every incorporated sample, in arrival order.
    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Overrides the prior weight until the next incorporation.
    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    pub fn disallowed(&self) -> &BTreeSet<(usize, usize)> {
        &self.disallowed
    }

    pub(crate) fn row(&self, q: usize) -> &StateRow {
        self.states[q].as_ref().expect("live state")
    }

    pub(crate) fn trans_row(&self, src: Src) -> &BTreeMap<Dest, f64> {
        match src {
            Src::Initial => &self.initial,
            Src::State(q) => &self.row(q).trans,
        }
    }

    /// Emission support of a live state.
    pub fn emission_support(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(q).emit.keys().copied()
    }

    /// Groups of initial states merged so far, one per live state.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        self.states
            .iter()
            .flatten()
            .map(|r| {
                let mut m = r.members.clone();
                m.sort_unstable();
                m
            })
            .collect()
    }

    /// Current score at the current prior weight.
    pub fn score(&self) -> Score {
        let prior = self.sum_now.0
            + self
                .scorer
                .structure(self.n_live, self.n_trans, self.n_emit);
        Score::new(prior, self.sum_now.1, self.lambda)
    }

    /// Counts in dense order, with the dense-to-stable id map.
    pub fn counts(&self) -> (Counts, Vec<usize>) {
        let ids = self.live_ids();
        let mut dense = vec![usize::MAX; self.states.len()];
        for (i, &q) in ids.iter().enumerate() {
            dense[q] = i;
        }
        let map_row = |row: &BTreeMap<Dest, f64>| -> BTreeMap<Dest, f64> {
            row.iter()
                .map(|(d, c)| {
                    let d = match d {
                        Dest::State(q) => Dest::State(dense[*q]),
                        Dest::Final => Dest::Final,
                    };
                    (d, *c)
                })
                .collect()
        };
        let counts = Counts {
            initial: map_row(&self.initial),
            trans: ids.iter().map(|&q| map_row(&self.row(q).trans)).collect(),
            emit: ids.iter().map(|&q| self.row(q).emit.clone()).collect(),
        };
        (counts, ids)
    }

    /// The model at maximum-likelihood parameters.
    pub fn hmm(&self) -> Hmm {
        ml_estimates(&self.counts().0, &self.alphabet)
    }

    /// The model at the configured prior's MAP parameters.
    pub fn map_hmm(&self) -> Hmm {
        let (counts, _) = self.counts();
        map_estimates(
            &ml_estimates(&counts, &self.alphabet),
            &counts,
            &self.scorer.cfg,
        )
    }

    fn state_terms(&self, r: &StateRow) -> ((f64, f64), (f64, f64), (f64, f64)) {
        let now = self.scorer.trans_row(&r.trans, self.n_live);
        let next = if self.scorer.trans_depends_on_size() {
            self.scorer
                .trans_row(&r.trans, self.n_live.saturating_sub(1))
        } else {
            now
        };
        (now, next, self.scorer.emit_row(&r.emit))
    }

    fn rescore_state(&mut self, q: usize) {
        let terms = self.state_terms(self.row(q));
        let r = self.states[q].as_mut().unwrap();
        (r.trans_now, r.trans_next, r.emit_terms) = terms;
    }

    fn rescore_initial(&mut self) {
        self.initial_now = self.scorer.trans_row(&self.initial, self.n_live);
        self.initial_next = if self.scorer.trans_depends_on_size() {
            self.scorer
                .trans_row(&self.initial, self.n_live.saturating_sub(1))
        } else {
            self.initial_now
        };
    }

    /// Recomputes the global sizes and sums from the cached row terms.
    fn resum(&mut self) {
        self.n_live = self.states.iter().flatten().count();
        self.n_trans = self.initial.len()
            + self
                .states
                .iter()
                .flatten()
                .map(|r| r.trans.len())
                .sum::<usize>();
        self.n_emit = self.states.iter().flatten().map(|r| r.emit.len()).sum();
        let mut now = self.initial_now;
        let mut next = self.initial_next;
        for r in self.states.iter().flatten() {
            now = add(now, add(r.trans_now, r.emit_terms));
            next = add(next, add(r.trans_next, r.emit_terms));
        }
        self.sum_now = now;
        self.sum_next = next;
    }

    fn rescore_all(&mut self) {
        self.n_live = self.states.iter().flatten().count();
        let (counts, _) = self.counts();
        self.scorer = Scorer::new(&self.scorer.cfg, &self.alphabet, &counts);
        self.rescore_initial();
        for q in 0..self.states.len() {
            if self.states[q].is_some() {
                self.rescore_state(q);
            }
        }
        self.resum();
    }

    /// Adds samples: a sample the current model generates increments the
    /// counts along its Viterbi path; any other sample gets a fresh chain.
    /// With `decay`, existing counts are scaled by it first.
    pub fn incorporate(&mut self, samples: &Corpus, decay: Option<f64>) -> Result<()> {
        if let Some(f) = decay {
            self.scale_counts(f);
        }
        let n_new = samples.len();
        for x in samples {
            self.incorporate_one(x)?;
        }
        self.samples_seen += n_new;
        self.lambda = lambda_schedule(self.samples_seen, &self.scorer.cfg);
        self.rescore_all();
        Ok(())
    }

    fn scale_counts(&mut self, f: f64) {
        for v in self.initial.values_mut() {
            *v *= f;
        }
        for r in self.states.iter_mut().flatten() {
            r.trans
                .values_mut()
                .chain(r.emit.values_mut())
                .for_each(|v| *v *= f);
        }
        for w in &mut self.weights {
            *w *= f;
        }
    }

    fn incorporate_one(&mut self, x: &Sample) -> Result<()> {
        let ids = self.alphabet.encode(x)?;
        self.corpus.push(x.clone());
        self.weights.push(1.0);
        let path =
            if self.states.iter().any(Option::is_some) || self.initial.contains_key(&Dest::Final) {
                let (counts, live) = self.counts();
                let hmm = ml_estimates(&counts, &self.alphabet);
                hmm.viterbi(&ids)
                    .map(|p| p.states.iter().map(|&d| live[d]).collect::<Vec<_>>())
            } else {
                None
            };
        let states = match path {
            Some(states) => states,
            None => {
                let first = self.states.len();
                for _ in 0..ids.len() {
                    self.states.push(Some(StateRow {
                        trans: BTreeMap::new(),
                        emit: BTreeMap::new(),
                        preds: BTreeSet::new(),
                        members: vec![self.next_member],
                        trans_now: (0.0, 0.0),
                        trans_next: (0.0, 0.0),
                        emit_terms: (0.0, 0.0),
                    }));
                    self.next_member += 1;
                }
                (first..first + ids.len()).collect()
            }
        };
        self.add_path(&ids, &states, 1.0);
        Ok(())
    }

    fn add_path(&mut self, x: &[usize], states: &[usize], w: f64) {
        let mut src = Src::Initial;
        for (&q, &sym) in states.iter().zip(x) {
            self.add_trans(src, Dest::State(q), w);
            *self.states[q]
                .as_mut()
                .unwrap()
                .emit
                .entry(sym)
                .or_insert(0.0) += w;
            src = Src::State(q);
        }
        self.add_trans(src, Dest::Final, w);
    }

    fn add_trans(&mut self, src: Src, dst: Dest, w: f64) {
        let row = match src {
            Src::Initial => &mut self.initial,
            Src::State(q) => &mut self.states[q].as_mut().unwrap().trans,
        };
        *row.entry(dst).or_insert(0.0) += w;
        if let Dest::State(r) = dst {
            self.states[r].as_mut().unwrap().preds.insert(src);
        }
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<(usize, usize)> {
        let (a, b) = (a.min(b), a.max(b));
        if a == b || !self.is_live(a) || !self.is_live(b) {
            return Err(Error::InvalidPair(a, b));
        }
        Ok((a, b))
    }

    /// Objective change from merging `a` and `b`, touching only the merged
    /// pair and the predecessors whose rows point at both.
    pub fn score_candidate(&self, a: usize, b: usize) -> Result<MergeCandidate> {
        let (a, b) = self.check_pair(a, b)?;
        let (ra, rb) = (self.row(a), self.row(b));
        let n1 = self.n_live - 1;
        let merged_trans = merged_trans(ra, rb, a, b);
        let mut merged_emit = ra.emit.clone();
        for (s, c) in &rb.emit {
            *merged_emit.entry(*s).or_insert(0.0) += c;
        }
        let mut sums = sub(
            self.sum_next,
            add(
                add(ra.trans_next, ra.emit_terms),
                add(rb.trans_next, rb.emit_terms),
            ),
        );
        sums = add(sums, self.scorer.trans_row(&merged_trans, n1));
        sums = add(sums, self.scorer.emit_row(&merged_emit));
        let mut n_trans = self.n_trans + merged_trans.len() - ra.trans.len() - rb.trans.len();
        for &p in &rb.preds {
            if p == Src::State(a) || p == Src::State(b) {
                continue;
            }
            let row = self.trans_row(p);
            if !row.contains_key(&Dest::State(a)) {
                continue;
            }
            let mut joined = row.clone();
            let cb = joined.remove(&Dest::State(b)).unwrap_or(0.0);
            *joined.get_mut(&Dest::State(a)).unwrap() += cb;
            let old = match p {
                Src::Initial => self.initial_next,
                Src::State(q) => self.row(q).trans_next,
            };
            sums = add(sub(sums, old), self.scorer.trans_row(&joined, n1));
            n_trans -= 1;
        }
        let n_emit = self.n_emit + merged_emit.len() - ra.emit.len() - rb.emit.len();
        let prior = sums.0 + self.scorer.structure(n1, n_trans, n_emit);
        let score = Score::new(prior, sums.1, self.lambda);
        let delta = score.objective - self.score().objective;
        Ok(MergeCandidate {
            pair: (a, b),
            delta,
            score,
        })
    }

    /// Merges `a` and `b` into the smaller id, summing counts.
    pub fn merge_states(&mut self, a: usize, b: usize) -> Result<()> {
        let (a, b) = self.check_pair(a, b)?;
        let rb = self.states[b].take().unwrap();
        let ra = self.states[a].take().unwrap();
        let trans = merged_trans(&ra, &rb, a, b);
        let mut emit = ra.emit;
        for (s, c) in rb.emit {
            *emit.entry(s).or_insert(0.0) += c;
        }
        let map_src = |p: Src| match p {
            Src::State(q) if q == b => Src::State(a),
            p => p,
        };
        let preds: BTreeSet<Src> = ra
            .preds
            .iter()
            .chain(&rb.preds)
            .map(|&p| map_src(p))
            .collect();
        let mut members = ra.members;
        members.extend(rb.members);
        // successors of b now have a as predecessor
        for d in rb.trans.keys() {
            if let Dest::State(s) = d {
                if *s != a && *s != b {
                    let r = self.states[*s].as_mut().unwrap();
                    r.preds.remove(&Src::State(b));
                    r.preds.insert(Src::State(a));
                }
            }
        }
        let mut touched = Vec::new();
        for &p in &rb.preds {
            if p == Src::State(a) || p == Src::State(b) {
                continue;
            }
            let row = match p {
                Src::Initial => &mut self.initial,
                Src::State(q) => &mut self.states[q].as_mut().unwrap().trans,
            };
            if let Some(cb) = row.remove(&Dest::State(b)) {
                *row.entry(Dest::State(a)).or_insert(0.0) += cb;
            }
            touched.push(p);
        }
        self.states[a] = Some(StateRow {
            trans,
            emit,
            preds,
            members,
            trans_now: (0.0, 0.0),
            trans_next: (0.0, 0.0),
            emit_terms: (0.0, 0.0),
        });
        self.n_live -= 1;
        self.disallowed = std::mem::take(&mut self.disallowed)
            .into_iter()
            .filter_map(|(x, y)| {
                let x = if x == b { a } else { x };
                let y = if y == b { a } else { y };
                (x != y).then_some((x.min(y), x.max(y)))
            })
            .collect();
        if self.scorer.trans_depends_on_size() {
            self.rescore_initial();
            for q in 0..self.states.len() {
                if self.states[q].is_some() {
                    self.rescore_state(q);
                }
            }
        } else {
            self.rescore_state(a);
            for p in touched {
                match p {
                    Src::Initial => self.rescore_initial(),
                    Src::State(q) => self.rescore_state(q),
                }
            }
        }
        self.resum();
        Ok(())
    }

    /// Reparses every incorporated sample under the current ML model and
    /// replaces the counts with exact Viterbi counts. Elements left with zero
    /// count leave the structure.
    pub fn refresh_counts(&mut self) -> Result<()> {
        let (counts, live) = self.counts();
        let hmm = ml_estimates(&counts, &self.alphabet);
        // ml_estimates keeps every live state because all live states carry counts
        debug_assert_eq!(hmm.n_states(), live.len());
        let mut paths = Vec::with_capacity(self.corpus.len());
        let mut failed = Vec::new();
        for x in &self.corpus {
            let ids = self.alphabet.encode(x)?;
            match hmm.viterbi(&ids) {
                Some(p) => paths.push((ids, p.states.iter().map(|&d| live[d]).collect::<Vec<_>>())),
                None => failed.push(crate::corpus::display_sample(x)),
            }
        }
        if !failed.is_empty() {
            return Err(Error::UnparseableSample(failed));
        }
        self.initial.clear();
        for r in self.states.iter_mut().flatten() {
            r.trans.clear();
            r.emit.clear();
            r.preds.clear();
        }
        let weights = self.weights.clone();
        for ((ids, states), w) in paths.iter().zip(weights) {
            self.add_path(ids, states, w);
        }
        for slot in &mut self.states {
            if slot.as_ref().is_some_and(|r| r.emit.is_empty()) {
                *slot = None;
            }
        }
        self.rescore_all();
        Ok(())
    }

    /// Structural check that every stored count is positive and every
    /// predecessor set matches the rows.
    pub fn check_consistency(&self) -> bool {
        let mut expected: Vec<BTreeSet<Src>> = vec![BTreeSet::new(); self.states.len()];
        let mut ok = true;
        let mut visit = |src: Src, row: &BTreeMap<Dest, f64>| {
            for (d, c) in row {
                ok &= *c > 0.0;
                if let Dest::State(q) = d {
                    ok &= self.is_live(*q);
                    if *q < expected.len() {
                        expected[*q].insert(src);
                    }
                }
            }
        };
        visit(Src::Initial, &self.initial);
        for (q, r) in self.states.iter().enumerate() {
            if let Some(r) = r {
                visit(Src::State(q), &r.trans);
            }
        }
        ok && self.states.iter().enumerate().all(|(q, r)| match r {
            Some(r) => r.preds == expected[q] && r.emit.values().all(|c| *c > 0.0),
            None => true,
        })
    }

    /// Objective recomputed from scratch on the exported model.
    pub fn full_score(&self) -> Result<Score> {
        let (counts, _) = self.counts();
        let hmm = ml_estimates(&counts, &self.alphabet);
        crate::priors::model_score(&hmm, &counts, &self.scorer.cfg, self.lambda)
    }

    /// Objective of the current model with the cached row sums at weight `lambda`.
    pub fn objective_at(&self, lambda: f64) -> f64 {
        let s = self.score();
        weighted(lambda, s.log_prior, s.log_likelihood)
    }
}

fn merged_trans(ra: &StateRow, rb: &StateRow, a: usize, b: usize) -> BTreeMap<Dest, f64> {
    let mut out = BTreeMap::new();
    for (d, c) in ra.trans.iter().chain(&rb.trans) {
        *out.entry(redirect(*d, b, a)).or_insert(0.0) += c;
    }
    out
}

/// The initial model: one chain per distinct sample, with counts equal to
/// sample multiplicities.
pub fn build_initial_model(corpus: &Corpus, cfg: &PriorConfig) -> Result<MergeState> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut state = MergeState::empty(corpus.alphabet(), cfg);
    state.incorporate(corpus, None)?;
    Ok(state)
}

/// Adds samples to a merge state (see [`MergeState::incorporate`]).
pub fn incorporate_samples(
    mut state: MergeState,
    samples: &Corpus,
    decay: Option<f64>,
) -> Result<MergeState> {
    state.incorporate(samples, decay)?;
    Ok(state)
}
