use std::collections::BTreeMap;

use super::{Dest, Hmm, Src};

/// Transition and emission counts laid out like an [`Hmm`]'s tables.
///
/// Used for Viterbi counts (integral under exact accounting) as well as for
/// expected counts from forward-backward.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Counts {
    pub initial: BTreeMap<Dest, f64>,
    pub trans: Vec<BTreeMap<Dest, f64>>,
    pub emit: Vec<BTreeMap<usize, f64>>,
}

pub type ViterbiCounts = Counts;

impl Counts {
    pub fn zeros(n_states: usize) -> Self {
        Counts {
            initial: BTreeMap::new(),
            trans: vec![BTreeMap::new(); n_states],
            emit: vec![BTreeMap::new(); n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.trans.len()
    }

    pub fn row(&self, src: Src) -> &BTreeMap<Dest, f64> {
        match src {
            Src::Initial => &self.initial,
            Src::State(q) => &self.trans[q],
        }
    }

    pub fn row_mut(&mut self, src: Src) -> &mut BTreeMap<Dest, f64> {
        match src {
            Src::Initial => &mut self.initial,
            Src::State(q) => &mut self.trans[q],
        }
    }

    pub fn add_trans(&mut self, src: Src, dst: Dest, c: f64) {
        *self.row_mut(src).entry(dst).or_insert(0.0) += c;
    }

    pub fn add_emit(&mut self, q: usize, sym: usize, c: f64) {
        *self.emit[q].entry(sym).or_insert(0.0) += c;
    }

    pub fn trans_count(&self, src: impl Into<Src>, dst: impl Into<Dest>) -> f64 {
        self.row(src.into())
            .get(&dst.into())
            .copied()
            .unwrap_or(0.0)
    }

    pub fn emit_count(&self, q: usize, sym: usize) -> f64 {
        self.emit[q].get(&sym).copied().unwrap_or(0.0)
    }

    pub fn trans_total(&self, src: Src) -> f64 {
        self.row(src).values().sum()
    }

    pub fn emit_total(&self, q: usize) -> f64 {
        self.emit[q].values().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = (Src, &BTreeMap<Dest, f64>)> {
        std::iter::once((Src::Initial, &self.initial)).chain(
            self.trans
                .iter()
                .enumerate()
                .map(|(q, r)| (Src::State(q), r)),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.rows().all(|(_, r)| r.values().all(|&c| c == 0.0))
            && self.emit.iter().all(|r| r.values().all(|&c| c == 0.0))
    }

    /// Every count is non-negative and every positive count lies on a structural element.
    pub fn supported_by(&self, hmm: &Hmm) -> bool {
        if self.n_states() != hmm.n_states() {
            return false;
        }
        let rows_ok = self.rows().all(|(src, row)| {
            row.iter()
                .all(|(d, &c)| c >= 0.0 && (c == 0.0 || hmm.row(src).contains_key(d)))
        });
        let emit_ok = self.emit.iter().enumerate().all(|(q, row)| {
            row.iter()
                .all(|(s, &c)| c >= 0.0 && (c == 0.0 || hmm.emissions(q).contains_key(s)))
        });
        rows_ok && emit_ok
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.initial.values_mut() {
            *v *= factor;
        }
        for row in &mut self.trans {
            for v in row.values_mut() {
                *v *= factor;
            }
        }
        for row in &mut self.emit {
            for v in row.values_mut() {
                *v *= factor;
            }
        }
    }

    /// Componentwise sum; both must have the same number of states.
    pub fn add(&mut self, other: &Counts) {
        assert_eq!(self.n_states(), other.n_states());
        for (d, c) in &other.initial {
            *self.initial.entry(*d).or_insert(0.0) += c;
        }
        for (q, row) in other.trans.iter().enumerate() {
            for (d, c) in row {
                *self.trans[q].entry(*d).or_insert(0.0) += c;
            }
        }
        for (q, row) in other.emit.iter().enumerate() {
            for (s, c) in row {
                *self.emit[q].entry(*s).or_insert(0.0) += c;
            }
        }
    }

    /// Largest absolute difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Counts) -> f64 {
        fn row_diff<K: Ord + Copy>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
            let mut worst: f64 = 0.0;
            for (k, x) in a {
                worst = worst.max((x - b.get(k).copied().unwrap_or(0.0)).abs());
            }
            for (k, y) in b {
                worst = worst.max((y - a.get(k).copied().unwrap_or(0.0)).abs());
            }
            worst
        }
        if self.n_states() != other.n_states() {
            return f64::INFINITY;
        }
        let mut worst = row_diff(&self.initial, &other.initial);
        for (a, b) in self.trans.iter().zip(&other.trans) {
            worst = worst.max(row_diff(a, b));
        }
        for (a, b) in self.emit.iter().zip(&other.emit) {
            worst = worst.max(row_diff(a, b));
        }
        worst
    }
}
