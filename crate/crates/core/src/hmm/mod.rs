//! Discrete-output HMMs with distinguished initial and final states.
//!
//! Probabilities are stored as natural logarithms. The structure of a model
//! is the support of its tables: a transition or emission that is not stored
//! has probability exactly zero.

mod algo;
mod counts;
mod format;

use std::collections::BTreeMap;
use std::fmt;

pub(crate) use algo::log_add;
pub use algo::{ml_estimates, Path, DEFAULT_MAX_LEN};
pub use counts::{Counts, ViterbiCounts};
pub use format::{parse_hmm, to_dot, write_hmm};

use crate::corpus::{Alphabet, Symbol};
use crate::error::{Error, Result};

/// Row-sum tolerance for in-memory models.
pub const NORM_TOL: f64 = 1e-9;

/// Transition target: a regular state or the final state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dest {
    State(usize),
    Final,
}

/// Transition source: the initial state or a regular state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Src {
    Initial,
    State(usize),
}

impl From<usize> for Dest {
    fn from(q: usize) -> Self {
        Dest::State(q)
    }
}

impl From<usize> for Src {
    fn from(q: usize) -> Self {
        Src::State(q)
    }
}

impl fmt::Display for Dest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dest::State(q) => write!(f, "{q}"),
            Dest::Final => f.write_str("F"),
        }
    }
}

impl fmt::Display for Src {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Src::Initial => f.write_str("I"),
            Src::State(q) => write!(f, "{q}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hmm {
    alphabet: Alphabet,
    initial: BTreeMap<Dest, f64>,
    trans: Vec<BTreeMap<Dest, f64>>,
    emit: Vec<BTreeMap<usize, f64>>,
}

impl Hmm {
    /// Starts a model with `n_states` regular states and no structure.
    pub fn builder(alphabet: Alphabet, n_states: usize) -> HmmBuilder {
        HmmBuilder {
            hmm: Hmm {
                alphabet,
                initial: BTreeMap::new(),
                trans: vec![BTreeMap::new(); n_states],
                emit: vec![BTreeMap::new(); n_states],
            },
            error: None,
        }
    }

    /// Model with no states and no transitions; it generates nothing.
    pub fn empty(alphabet: Alphabet) -> Self {
        Hmm {
            alphabet,
            initial: BTreeMap::new(),
            trans: Vec::new(),
            emit: Vec::new(),
        }
    }

    pub(crate) fn from_log_tables(
        alphabet: Alphabet,
        initial: BTreeMap<Dest, f64>,
        trans: Vec<BTreeMap<Dest, f64>>,
        emit: Vec<BTreeMap<usize, f64>>,
    ) -> Self {
        debug_assert_eq!(trans.len(), emit.len());
        Hmm {
            alphabet,
            initial,
            trans,
            emit,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n_states(&self) -> usize {
        self.trans.len()
    }

    /// Outgoing log-probabilities of `src`.
    pub fn row(&self, src: Src) -> &BTreeMap<Dest, f64> {
        match src {
            Src::Initial => &self.initial,
            Src::State(q) => &self.trans[q],
        }
    }

    pub fn emissions(&self, q: usize) -> &BTreeMap<usize, f64> {
        &self.emit[q]
    }

    /// Log-probability of the transition, `-inf` if absent.
    pub fn log_trans(&self, src: Src, dst: Dest) -> f64 {
        self.row(src)
            .get(&dst)
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn log_emit(&self, q: usize, sym: usize) -> f64 {
        self.emit[q].get(&sym).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn trans_prob(&self, src: impl Into<Src>, dst: impl Into<Dest>) -> f64 {
        self.log_trans(src.into(), dst.into()).exp()
    }

    pub fn emit_prob(&self, q: usize, sym: &Symbol) -> f64 {
        match self.alphabet.id(sym) {
            Some(s) => self.log_emit(q, s).exp(),
            None => 0.0,
        }
    }

    /// Iterates over all transition rows, initial state first.
    pub fn rows(&self) -> impl Iterator<Item = (Src, &BTreeMap<Dest, f64>)> {
        std::iter::once((Src::Initial, &self.initial)).chain(
            self.trans
                .iter()
                .enumerate()
                .map(|(q, r)| (Src::State(q), r)),
        )
    }

    /// Number of structural transitions, including those out of the initial state.
    pub fn n_transitions(&self) -> usize {
        self.initial.len() + self.trans.iter().map(BTreeMap::len).sum::<usize>()
    }

    pub fn n_emissions(&self) -> usize {
        self.emit.iter().map(BTreeMap::len).sum()
    }

    /// Checks that every non-empty row sums to one.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (src, row) in self.rows() {
            check_row(row.values(), tol, || format!("transitions from {src}"))?;
        }
        for (q, row) in self.emit.iter().enumerate() {
            check_row(row.values(), tol, || format!("emissions of {q}"))?;
        }
        Ok(())
    }

    /// Same support on every row (parameters ignored).
    pub fn same_structure(&self, other: &Hmm) -> bool {
        self.alphabet == other.alphabet
            && self.n_states() == other.n_states()
            && self
                .rows()
                .zip(other.rows())
                .all(|((_, a), (_, b))| a.keys().eq(b.keys()))
            && self
                .emit
                .iter()
                .zip(&other.emit)
                .all(|(a, b)| a.keys().eq(b.keys()))
    }

    /// Largest absolute difference between probabilities of two models with the same structure.
    pub fn max_param_diff(&self, other: &Hmm) -> Option<f64> {
        if !self.same_structure(other) {
            return None;
        }
        let mut worst: f64 = 0.0;
        for ((_, a), (_, b)) in self.rows().zip(other.rows()) {
            for (x, y) in a.values().zip(b.values()) {
                worst = worst.max((x.exp() - y.exp()).abs());
            }
        }
        for (a, b) in self.emit.iter().zip(&other.emit) {
            for (x, y) in a.values().zip(b.values()) {
                worst = worst.max((x.exp() - y.exp()).abs());
            }
        }
        Some(worst)
    }
}

fn check_row<'a>(
    values: impl Iterator<Item = &'a f64>,
    tol: f64,
    what: impl Fn() -> String,
) -> Result<()> {
    let mut sum = 0.0;
    let mut any = false;
    for v in values {
        any = true;
        sum += v.exp();
    }
    if any && (sum - 1.0).abs() > tol {
        return Err(Error::Config(format!("{} sum to {sum}", what())));
    }
    Ok(())
}

/// Probability-space construction of an [`Hmm`].
pub struct HmmBuilder {
    hmm: Hmm,
    error: Option<Error>,
}

impl HmmBuilder {
    pub fn trans(mut self, src: impl Into<Src>, dst: impl Into<Dest>, p: f64) -> Self {
        let (src, dst) = (src.into(), dst.into());
        let n = self.hmm.n_states();
        let in_range = |q: usize| q < n;
        let ok = match (src, dst) {
            (Src::State(a), Dest::State(b)) => in_range(a) && in_range(b),
            (Src::State(a), Dest::Final) => in_range(a),
            (Src::Initial, Dest::State(b)) => in_range(b),
            (Src::Initial, Dest::Final) => true,
        };
        if !ok {
            self.error.get_or_insert(Error::Config(format!(
                "transition {src}->{dst} out of range"
            )));
            return self;
        }
        if p > 0.0 {
            let row = match src {
                Src::Initial => &mut self.hmm.initial,
                Src::State(q) => &mut self.hmm.trans[q],
            };
            row.insert(dst, p.ln());
        }
        self
    }

    pub fn emit(mut self, q: usize, sym: &str, p: f64) -> Self {
        let id = Symbol::new(sym).ok().and_then(|s| self.hmm.alphabet.id(&s));
        match id {
            Some(id) if q < self.hmm.n_states() => {
                if p > 0.0 {
                    self.hmm.emit[q].insert(id, p.ln());
                }
            }
            _ => {
                self.error
                    .get_or_insert(Error::Config(format!("emission {q}^{sym} invalid")));
            }
        }
        self
    }

    pub fn build(self) -> Result<Hmm> {
        if let Some(e) = self.error {
            return Err(e);
        }
        self.hmm.validate(NORM_TOL)?;
        Ok(self.hmm)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Two-state model generating (a(a|b))+.
    pub fn simple_loop() -> Hmm {
        Hmm::builder(Alphabet::from_chars("ab"), 2)
            .trans(Src::Initial, 0, 1.0)
            .trans(0, 1, 1.0)
            .trans(1, 0, 0.5)
            .trans(1, Dest::Final, 0.5)
            .emit(0, "a", 1.0)
            .emit(1, "a", 0.5)
            .emit(1, "b", 0.5)
            .build()
            .unwrap()
    }

    /// Deterministic chain generating exactly `text` (single-char symbols).
    pub fn chain(text: &str) -> Hmm {
        let syms: Vec<char> = text.chars().collect();
        let mut b = Hmm::builder(Alphabet::from_chars(text), syms.len());
        if syms.is_empty() {
            return b.trans(Src::Initial, Dest::Final, 1.0).build().unwrap();
        }
        b = b.trans(Src::Initial, 0, 1.0);
        for (i, c) in syms.iter().enumerate() {
            let next = if i + 1 < syms.len() {
                Dest::State(i + 1)
            } else {
                Dest::Final
            };
            b = b.trans(i, next, 1.0).emit(i, &c.to_string(), 1.0);
        }
        b.build().unwrap()
    }
}
