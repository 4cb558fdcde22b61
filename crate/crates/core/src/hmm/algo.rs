use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Counts, Dest, Hmm, Src};
use crate::corpus::{display_sample, Alphabet, Corpus, Sample, Symbol};
use crate::error::{Error, Result};

/// Default cap on sampled string length when no training data bounds it.
pub const DEFAULT_MAX_LEN: usize = 100;

const TIE_EPS: f64 = 1e-12;

/// A state sequence generating a string, with its joint log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub states: Vec<usize>,
    pub logprob: f64,
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_EPS * (1.0 + a.abs().max(b.abs()))
}

impl Hmm {
    /// Maps symbols to ids, failing on symbols outside the alphabet.
    pub fn encode(&self, x: &[Symbol]) -> Result<Vec<usize>> {
        self.alphabet.encode(x)
    }

    /// Natural-log probability of an encoded string, summed over all paths.
    pub fn forward(&self, x: &[usize]) -> f64 {
        if x.is_empty() {
            return self.log_trans(Src::Initial, Dest::Final);
        }
        let n = self.n_states();
        let mut alpha = vec![f64::NEG_INFINITY; n];
        for (d, &lp) in &self.initial {
            if let Dest::State(q) = d {
                alpha[*q] = lp + self.log_emit(*q, x[0]);
            }
        }
        for &sym in &x[1..] {
            let mut next = vec![f64::NEG_INFINITY; n];
            for (q, &a) in alpha.iter().enumerate() {
                if a == f64::NEG_INFINITY {
                    continue;
                }
                for (d, &lp) in &self.trans[q] {
                    if let Dest::State(r) = d {
                        next[*r] = log_add(next[*r], a + lp);
                    }
                }
            }
            for (r, v) in next.iter_mut().enumerate() {
                if *v != f64::NEG_INFINITY {
                    *v += self.log_emit(r, sym);
                }
            }
            alpha = next;
        }
        alpha
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != f64::NEG_INFINITY)
            .fold(f64::NEG_INFINITY, |acc, (q, a)| {
                log_add(acc, a + self.log_trans(Src::State(q), Dest::Final))
            })
    }

    pub fn string_log_prob(&self, x: &[Symbol]) -> Result<f64> {
        Ok(self.forward(&self.encode(x)?))
    }

    /// Like [`Hmm::string_log_prob`] but symbols outside the alphabet give `-inf`.
    pub fn log_prob_lenient(&self, x: &[Symbol]) -> f64 {
        match self.encode(x) {
            Ok(ids) => self.forward(&ids),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Most likely path; ties resolve to the lexicographically smallest state sequence.
    pub fn viterbi(&self, x: &[usize]) -> Option<Path> {
        if x.is_empty() {
            let lp = self.log_trans(Src::Initial, Dest::Final);
            return (lp > f64::NEG_INFINITY).then(|| Path {
                states: Vec::new(),
                logprob: lp,
            });
        }
        let n = self.n_states();
        let len = x.len();
        // suffix[t][q]: best log-probability of emitting x[t..] from q at time t and finishing.
        let mut suffix = vec![vec![f64::NEG_INFINITY; n]; len];
        for q in 0..n {
            suffix[len - 1][q] =
                self.log_emit(q, x[len - 1]) + self.log_trans(Src::State(q), Dest::Final);
        }
        for t in (0..len - 1).rev() {
            for q in 0..n {
                let e = self.log_emit(q, x[t]);
                if e == f64::NEG_INFINITY {
                    continue;
                }
                let best = self.trans[q]
                    .iter()
                    .filter_map(|(d, &lp)| match d {
                        Dest::State(r) => Some(lp + suffix[t + 1][*r]),
                        Dest::Final => None,
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                suffix[t][q] = e + best;
            }
        }
        let pick = |row: &BTreeMap<Dest, f64>, t: usize| -> Option<usize> {
            let scored: Vec<(usize, f64)> = row
                .iter()
                .filter_map(|(d, &lp)| match d {
                    Dest::State(r) => Some((*r, lp + suffix[t][*r])),
                    Dest::Final => None,
                })
                .filter(|(_, v)| *v > f64::NEG_INFINITY)
                .collect();
            let best = scored
                .iter()
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            scored
                .into_iter()
                .filter(|(_, v)| close(*v, best))
                .map(|(r, _)| r)
                .min()
        };
        let mut states = Vec::with_capacity(len);
        let mut q = pick(&self.initial, 0)?;
        states.push(q);
        for t in 1..len {
            q = pick(&self.trans[q], t)?;
            states.push(q);
        }
        let logprob = self.path_log_prob(x, &states);
        Some(Path { states, logprob })
    }

    pub fn viterbi_path(&self, x: &[Symbol]) -> Result<Option<Path>> {
        Ok(self.viterbi(&self.encode(x)?))
    }

    /// Joint log-probability of a given path generating `x`.
    pub fn path_log_prob(&self, x: &[usize], states: &[usize]) -> f64 {
        if states.len() != x.len() {
            return f64::NEG_INFINITY;
        }
        let mut src = Src::Initial;
        let mut lp = 0.0;
        for (&q, &sym) in states.iter().zip(x) {
            lp += self.log_trans(src, Dest::State(q)) + self.log_emit(q, sym);
            src = Src::State(q);
        }
        lp + self.log_trans(src, Dest::Final)
    }

    /// Structural parse check: some path has nonzero probability.
    pub fn parses(&self, x: &[usize]) -> bool {
        if x.is_empty() {
            return self.initial.contains_key(&Dest::Final);
        }
        let n = self.n_states();
        let mut active = vec![false; n];
        for d in self.initial.keys() {
            if let Dest::State(q) = d {
                active[*q] = self.emit[*q].contains_key(&x[0]);
            }
        }
        for &sym in &x[1..] {
            let mut next = vec![false; n];
            for q in (0..n).filter(|&q| active[q]) {
                for d in self.trans[q].keys() {
                    if let Dest::State(r) = d {
                        if self.emit[*r].contains_key(&sym) {
                            next[*r] = true;
                        }
                    }
                }
            }
            active = next;
        }
        (0..n).any(|q| active[q] && self.trans[q].contains_key(&Dest::Final))
    }

    /// Parse check on raw symbols; unknown symbols never parse.
    pub fn accepts(&self, x: &[Symbol]) -> bool {
        self.encode(x).map(|ids| self.parses(&ids)).unwrap_or(false)
    }

    /// Counts accumulated along the Viterbi path of every sample.
    pub fn viterbi_counts(&self, corpus: &Corpus) -> Result<Counts> {
        let mut counts = Counts::zeros(self.n_states());
        let mut failed = Vec::new();
        for (x, mult) in corpus.distinct() {
            let path = self
                .encode(&x)
                .ok()
                .and_then(|ids| self.viterbi(&ids).map(|p| (ids, p)));
            match path {
                Some((ids, p)) => add_path(&mut counts, &ids, &p.states, mult as f64),
                None => failed.push(display_sample(&x)),
            }
        }
        if failed.is_empty() {
            Ok(counts)
        } else {
            Err(Error::UnparseableSample(failed))
        }
    }

    /// Draws one string. Walks longer than `max_len` symbols are an error.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> Result<Sample> {
        let mut out = Vec::new();
        let mut dest = draw(&self.initial, rng).ok_or(Error::EmptyModel)?;
        while let Dest::State(q) = dest {
            if out.len() >= max_len {
                return Err(Error::MaxLengthExceeded(max_len));
            }
            let sym = draw(&self.emit[q], rng).ok_or(Error::EmptyModel)?;
            out.push(self.alphabet.symbol(sym).clone());
            dest = draw(&self.trans[q], rng).ok_or(Error::EmptyModel)?;
        }
        Ok(out)
    }

    pub fn sample_seeded(&self, seed: u64, max_len: usize) -> Result<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample(&mut rng, max_len)
    }

    /// `n` consecutive draws from one seeded generator.
    pub fn sample_corpus(&self, n: usize, seed: u64, max_len: usize) -> Result<Corpus> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng, max_len)).collect()
    }

    /// Removes elements whose expected count is below `threshold`, then trims
    /// states that are useless (no emissions, unreachable, or unable to finish)
    /// and renormalizes. A threshold of zero or less returns the model unchanged.
    pub fn prune(&self, expected: &Counts, threshold: f64) -> Result<Hmm> {
        if threshold <= 0.0 {
            return Ok(self.clone());
        }
        let keep_trans = |src: Src, row: &BTreeMap<Dest, f64>| -> BTreeMap<Dest, f64> {
            row.iter()
                .filter(|(d, _)| expected.row(src).get(d).copied().unwrap_or(0.0) >= threshold)
                .map(|(d, lp)| (*d, *lp))
                .collect()
        };
        let initial = keep_trans(Src::Initial, &self.initial);
        let trans: Vec<_> = (0..self.n_states())
            .map(|q| keep_trans(Src::State(q), &self.trans[q]))
            .collect();
        let emit: Vec<BTreeMap<usize, f64>> = (0..self.n_states())
            .map(|q| {
                self.emit[q]
                    .iter()
                    .filter(|(s, _)| {
                        expected
                            .emit
                            .get(q)
                            .and_then(|r| r.get(s))
                            .copied()
                            .unwrap_or(0.0)
                            >= threshold
                    })
                    .map(|(s, lp)| (*s, *lp))
                    .collect()
            })
            .collect();
        let pruned = Hmm::from_log_tables(self.alphabet.clone(), initial, trans, emit);
        let trimmed = pruned.trim();
        if trimmed.initial.is_empty() {
            return Err(Error::EmptyModel);
        }
        Ok(trimmed)
    }

    /// Drops states that cannot lie on a complete path, reindexes densely and renormalizes.
    pub fn trim(&self) -> Hmm {
        let n = self.n_states();
        let mut alive: Vec<bool> = (0..n).map(|q| !self.emit[q].is_empty()).collect();
        loop {
            // forward reachability from I
            let mut reach = vec![false; n];
            let mut stack: Vec<usize> = self
                .initial
                .keys()
                .filter_map(|d| match d {
                    Dest::State(q) if alive[*q] => Some(*q),
                    _ => None,
                })
                .collect();
            while let Some(q) = stack.pop() {
                if reach[q] {
                    continue;
                }
                reach[q] = true;
                for d in self.trans[q].keys() {
                    if let Dest::State(r) = d {
                        if alive[*r] && !reach[*r] {
                            stack.push(*r);
                        }
                    }
                }
            }
            // backward reachability to F
            let mut coreach: Vec<bool> = (0..n)
                .map(|q| alive[q] && self.trans[q].contains_key(&Dest::Final))
                .collect();
            let mut changed = true;
            while changed {
                changed = false;
                for q in 0..n {
                    if alive[q] && !coreach[q] {
                        let hit = self.trans[q]
                            .keys()
                            .any(|d| matches!(d, Dest::State(r) if coreach[*r]));
                        if hit {
                            coreach[q] = true;
                            changed = true;
                        }
                    }
                }
            }
            let next: Vec<bool> = (0..n).map(|q| alive[q] && reach[q] && coreach[q]).collect();
            if next == alive {
                break;
            }
            alive = next;
        }
        let mut map = vec![None; n];
        let mut k = 0;
        for q in 0..n {
            if alive[q] {
                map[q] = Some(k);
                k += 1;
            }
        }
        let remap_row = |row: &BTreeMap<Dest, f64>| -> BTreeMap<Dest, f64> {
            let kept: BTreeMap<Dest, f64> = row
                .iter()
                .filter_map(|(d, lp)| match d {
                    Dest::State(q) => map[*q].map(|r| (Dest::State(r), *lp)),
                    Dest::Final => Some((Dest::Final, *lp)),
                })
                .collect();
            renormalize(kept)
        };
        let initial = remap_row(&self.initial);
        let mut trans = Vec::with_capacity(k);
        let mut emit = Vec::with_capacity(k);
        for q in (0..n).filter(|&q| alive[q]) {
            trans.push(remap_row(&self.trans[q]));
            emit.push(renormalize(self.emit[q].clone()));
        }
        Hmm::from_log_tables(self.alphabet.clone(), initial, trans, emit)
    }
}

pub(crate) fn renormalize<K: Ord>(row: BTreeMap<K, f64>) -> BTreeMap<K, f64> {
    let total = row.values().fold(f64::NEG_INFINITY, |a, &b| log_add(a, b));
    if total == f64::NEG_INFINITY {
        return BTreeMap::new();
    }
    row.into_iter().map(|(k, v)| (k, v - total)).collect()
}

pub(crate) fn add_path(counts: &mut Counts, x: &[usize], states: &[usize], w: f64) {
    let mut src = Src::Initial;
    for (&q, &sym) in states.iter().zip(x) {
        counts.add_trans(src, Dest::State(q), w);
        counts.add_emit(q, sym, w);
        src = Src::State(q);
    }
    counts.add_trans(src, Dest::Final, w);
}

fn draw<K: Copy, R: Rng + ?Sized>(row: &BTreeMap<K, f64>, rng: &mut R) -> Option<K> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (k, lp) in row {
        acc += lp.exp();
        last = Some(*k);
        if u < acc {
            return last;
        }
    }
    last
}

/// Maximum-likelihood parameters from counts.
///
/// Each row is normalized by its total; zero-count elements are dropped from
/// the structure. States with zero transition or emission totals are removed
/// together with their incident structure, and the rest are reindexed densely.
pub fn ml_estimates(counts: &Counts, alphabet: &Alphabet) -> Hmm {
    estimate_rows(counts, alphabet, |row| {
        let total: f64 = row.values().sum();
        row.iter()
            .filter(|(_, &c)| c > 0.0)
            .map(|(k, &c)| (*k, (c / total).ln()))
            .collect()
    })
    .0
}

/// Applies `estimate` to every row after dropping dead states. Returns the
/// model and the old-to-new state map.
pub(crate) fn estimate_rows(
    counts: &Counts,
    alphabet: &Alphabet,
    estimate: impl Fn(&BTreeMap<Dest, f64>) -> BTreeMap<Dest, f64> + Copy,
) -> (Hmm, Vec<Option<usize>>) {
    let n = counts.n_states();
    let mut map = vec![None; n];
    let mut k = 0;
    for q in 0..n {
        if counts.trans_total(Src::State(q)) > 0.0 && counts.emit_total(q) > 0.0 {
            map[q] = Some(k);
            k += 1;
        }
    }
    let remap = |row: &BTreeMap<Dest, f64>| -> BTreeMap<Dest, f64> {
        let mut out = BTreeMap::new();
        for (d, &c) in row {
            let nd = match d {
                Dest::State(q) => match map[*q] {
                    Some(r) => Dest::State(r),
                    None => continue,
                },
                Dest::Final => Dest::Final,
            };
            *out.entry(nd).or_insert(0.0) += c;
        }
        out
    };
    let initial = estimate(&remap(&counts.initial));
    let mut trans = Vec::with_capacity(k);
    let mut emit = Vec::with_capacity(k);
    for q in (0..n).filter(|&q| map[q].is_some()) {
        trans.push(estimate(&remap(&counts.trans[q])));
        let total: f64 = counts.emit[q].values().sum();
        emit.push(
            counts.emit[q]
                .iter()
                .filter(|(_, &c)| c > 0.0)
                .map(|(s, &c)| (*s, (c / total).ln()))
                .collect(),
        );
    }
    (
        Hmm::from_log_tables(alphabet.clone(), initial, trans, emit),
        map,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::chars;
    use crate::hmm::fixtures::{chain, simple_loop};
    use proptest::prelude::*;
    use rand::Rng;

    /// Sum over all |Q|^len state sequences.
    fn brute_force(hmm: &Hmm, x: &[usize]) -> (f64, Vec<(Vec<usize>, f64)>) {
        let n = hmm.n_states();
        let mut paths = Vec::new();
        let mut total = 0.0;
        let mut idx = vec![0usize; x.len()];
        loop {
            let lp = hmm.path_log_prob(x, &idx);
            if lp > f64::NEG_INFINITY {
                total += lp.exp();
                paths.push((idx.clone(), lp));
            }
            // odometer
            let mut i = x.len();
            loop {
                if i == 0 {
                    return (total, paths);
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < n {
                    break;
                }
                idx[i] = 0;
            }
        }
    }

    fn random_hmm(n: usize, m: usize, density: f64, seed: u64) -> Hmm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alphabet = Alphabet::new((0..m).map(|i| Symbol::new(&format!("s{i}")).unwrap()));
        let row = |targets: Vec<Dest>, rng: &mut ChaCha8Rng| -> BTreeMap<Dest, f64> {
            let mut chosen: Vec<(Dest, f64)> = targets
                .into_iter()
                .filter_map(|d| {
                    (rng.random::<f64>() < density).then(|| (d, rng.random::<f64>() + 0.05))
                })
                .collect();
            if chosen.is_empty() {
                chosen.push((Dest::Final, 1.0));
            }
            let t: f64 = chosen.iter().map(|c| c.1).sum();
            chosen.into_iter().map(|(d, w)| (d, (w / t).ln())).collect()
        };
        let all: Vec<Dest> = (0..n).map(Dest::State).chain([Dest::Final]).collect();
        let initial = row(
            all.iter().copied().filter(|d| *d != Dest::Final).collect(),
            &mut rng,
        );
        let trans = (0..n).map(|_| row(all.clone(), &mut rng)).collect();
        let emit = (0..n)
            .map(|_| {
                let mut e: Vec<(usize, f64)> = (0..m)
                    .filter_map(|s| {
                        (rng.random::<f64>() < density.max(0.5))
                            .then(|| (s, rng.random::<f64>() + 0.05))
                    })
                    .collect();
                if e.is_empty() {
                    e.push((0, 1.0));
                }
                let t: f64 = e.iter().map(|c| c.1).sum();
                e.into_iter().map(|(s, w)| (s, (w / t).ln())).collect()
            })
            .collect();
        Hmm::from_log_tables(alphabet, initial, trans, emit)
    }

    #[test]
    fn fig1_string_probability() {
        let hmm = simple_loop();
        let x = hmm.encode(&chars("abaa")).unwrap();
        let (bf, paths) = brute_force(&hmm, &x);
        assert_eq!(paths.len(), 1);
        assert!((bf - 0.0625).abs() < 1e-15);
        assert!((hmm.forward(&x).exp() - 0.0625).abs() < 1e-15);
        let p = hmm.viterbi(&x).unwrap();
        assert_eq!(p.states, vec![0, 1, 0, 1]);
        assert!((p.logprob - 0.0625f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn chain_is_deterministic() {
        let hmm = chain("ab");
        assert_eq!(hmm.string_log_prob(&chars("ab")).unwrap(), 0.0);
        let p = hmm.viterbi_path(&chars("ab")).unwrap().unwrap();
        assert_eq!(p.states, vec![0, 1]);
        assert_eq!(p.logprob, 0.0);
        for seed in 0..20 {
            assert_eq!(hmm.sample_seeded(seed, 10).unwrap(), chars("ab"));
        }
    }

    #[test]
    fn unknown_symbol_is_an_error() {
        let hmm = chain("ab");
        assert_eq!(
            hmm.string_log_prob(&chars("ac")),
            Err(Error::UnknownSymbol("c".into()))
        );
        assert!(hmm.viterbi_path(&chars("c")).is_err());
        assert!(!hmm.accepts(&chars("c")));
    }

    #[test]
    fn unparseable_string_has_no_path() {
        let hmm = simple_loop();
        let x = hmm.encode(&chars("bb")).unwrap();
        assert_eq!(hmm.forward(&x), f64::NEG_INFINITY);
        assert!(hmm.viterbi(&x).is_none());
        assert!(!hmm.parses(&x));
    }

    #[test]
    fn empty_string_uses_direct_transition() {
        let hmm = Hmm::builder(Alphabet::from_chars("a"), 1)
            .trans(Src::Initial, Dest::Final, 0.25)
            .trans(Src::Initial, 0, 0.75)
            .trans(0, Dest::Final, 1.0)
            .emit(0, "a", 1.0)
            .build()
            .unwrap();
        assert!((hmm.forward(&[]).exp() - 0.25).abs() < 1e-15);
        assert!(hmm.parses(&[]));
        assert_eq!(hmm.viterbi(&[]).unwrap().states, Vec::<usize>::new());
    }

    #[test]
    fn viterbi_ties_prefer_smallest_sequence() {
        // two identical branches
        let hmm = Hmm::builder(Alphabet::from_chars("a"), 2)
            .trans(Src::Initial, 1, 0.5)
            .trans(Src::Initial, 0, 0.5)
            .trans(0, Dest::Final, 1.0)
            .trans(1, Dest::Final, 1.0)
            .emit(0, "a", 1.0)
            .emit(1, "a", 1.0)
            .build()
            .unwrap();
        assert_eq!(hmm.viterbi(&[0]).unwrap().states, vec![0]);
    }

    #[test]
    fn viterbi_counts_conserve_mass() {
        let hmm = simple_loop();
        let corpus = Corpus::from_chars(&["ab", "abaa", "aaab", "ab"]);
        let c = hmm.viterbi_counts(&corpus).unwrap();
        assert_eq!(c.trans_total(Src::Initial), 4.0);
        for q in 0..hmm.n_states() {
            assert_eq!(c.trans_total(Src::State(q)), c.emit_total(q));
        }
        assert!(c.supported_by(&hmm));
        assert!(hmm.viterbi_counts(&Corpus::default()).unwrap().is_zero());
        match hmm.viterbi_counts(&Corpus::from_chars(&["b"])) {
            Err(Error::UnparseableSample(v)) => assert_eq!(v, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ml_estimates_normalize_counts() {
        let alphabet = Alphabet::from_chars("a");
        let mut c = Counts::zeros(3);
        c.add_trans(Src::Initial, Dest::State(0), 3.0);
        c.add_trans(Src::State(0), Dest::State(1), 2.0);
        c.add_trans(Src::State(0), Dest::State(2), 1.0);
        c.add_trans(Src::State(1), Dest::Final, 5.0);
        c.add_trans(Src::State(2), Dest::Final, 1.0);
        for (q, k) in [(0, 3.0), (1, 2.0), (2, 1.0)] {
            c.add_emit(q, 0, k);
        }
        let hmm = ml_estimates(&c, &alphabet);
        assert!((hmm.trans_prob(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((hmm.trans_prob(0, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(hmm.trans_prob(1, Dest::Final), 1.0);
        hmm.validate(1e-12).unwrap();
    }

    #[test]
    fn ml_estimates_drop_zero_states() {
        let alphabet = Alphabet::from_chars("a");
        let mut c = Counts::zeros(2);
        c.add_trans(Src::Initial, Dest::State(1), 1.0);
        c.add_trans(Src::State(1), Dest::Final, 1.0);
        c.add_emit(1, 0, 1.0);
        let hmm = ml_estimates(&c, &alphabet);
        assert_eq!(hmm.n_states(), 1);
        assert_eq!(hmm.trans_prob(Src::Initial, 0), 1.0);
    }

    #[test]
    fn prune_removes_rare_transition() {
        let hmm = Hmm::builder(Alphabet::from_chars("ab"), 2)
            .trans(Src::Initial, 0, 0.99999)
            .trans(Src::Initial, 1, 0.00001)
            .trans(0, Dest::Final, 1.0)
            .trans(1, Dest::Final, 1.0)
            .emit(0, "a", 1.0)
            .emit(1, "b", 1.0)
            .build()
            .unwrap();
        let mut expected = Counts::zeros(2);
        expected.add_trans(Src::Initial, Dest::State(0), 1.0);
        expected.add_trans(Src::Initial, Dest::State(1), 1e-5);
        expected.add_trans(Src::State(0), Dest::Final, 1.0);
        expected.add_trans(Src::State(1), Dest::Final, 1e-5);
        expected.add_emit(0, 0, 1.0);
        expected.add_emit(1, 1, 1e-5);
        let pruned = hmm.prune(&expected, 1e-3).unwrap();
        assert_eq!(pruned.n_states(), 1);
        assert_eq!(pruned.trans_prob(Src::Initial, 0), 1.0);
        pruned.validate(1e-12).unwrap();
        assert_eq!(hmm.prune(&expected, 0.0).unwrap(), hmm);
        assert_eq!(hmm.prune(&Counts::zeros(2), 1e-3), Err(Error::EmptyModel));
    }

    #[test]
    fn sampler_respects_length_guard() {
        let looping = Hmm::builder(Alphabet::from_chars("a"), 1)
            .trans(Src::Initial, 0, 1.0)
            .trans(0, 0, 1.0)
            .emit(0, "a", 1.0)
            .build()
            .unwrap();
        assert_eq!(
            looping.sample_seeded(1, 50),
            Err(Error::MaxLengthExceeded(50))
        );
    }

    #[test]
    fn fig1_length_distribution() {
        // P(length = 2) = 0.5 exactly: (aa|ab) then exit.
        let hmm = simple_loop();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| hmm.sample(&mut rng, 1000).unwrap().len() == 2)
            .count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((hits as f64 - 5000.0).abs() < 3.0 * sigma, "hits {hits}");
    }

    #[test]
    fn forward_matches_brute_force_on_random_models() {
        for seed in 0..60u64 {
            let n = 1 + (seed % 4) as usize;
            let hmm = random_hmm(n, 2, 0.6, seed);
            for len in 0..5usize {
                let x: Vec<usize> = (0..len).map(|i| (seed as usize + i * 7) % 2).collect();
                let (bf, paths) = brute_force(&hmm, &x);
                let fw = hmm.forward(&x).exp();
                let bf = if len == 0 { hmm.forward(&x).exp() } else { bf };
                assert!(
                    (fw - bf).abs() < 1e-12,
                    "seed {seed} len {len}: {fw} vs {bf}"
                );
                if len > 0 {
                    let v = hmm.viterbi(&x);
                    let best = paths.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                    match v {
                        Some(p) => assert!((p.logprob - best).abs() < 1e-12),
                        None => assert!(paths.is_empty()),
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn viterbi_never_exceeds_forward(seed in 0u64..10_000, len in 1usize..6) {
            let hmm = random_hmm(3, 2, 0.7, seed);
            let x: Vec<usize> = (0..len).map(|i| ((seed >> i) & 1) as usize).collect();
            let (_, paths) = brute_force(&hmm, &x);
            let fw = hmm.forward(&x);
            if let Some(p) = hmm.viterbi(&x) {
                prop_assert!(p.logprob <= fw + 1e-12);
                if paths.len() == 1 {
                    prop_assert!((p.logprob - fw).abs() < 1e-12);
                } else {
                    prop_assert!(p.logprob < fw);
                }
                // lexicographically smallest among maximal paths
                let best = paths.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                let smallest = paths.iter().filter(|p| close(p.1, best)).map(|p| p.0.clone()).min().unwrap();
                prop_assert_eq!(p.states, smallest);
            } else {
                prop_assert!(paths.is_empty());
            }
        }
    }
}
