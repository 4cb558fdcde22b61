//! Baum-Welch training of fully parameterized models, the baseline for
//! structure induction.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{display_sample, Alphabet, Corpus};
use crate::error::{Error, Result};
use crate::eval::{cross_parse, CrossParseReport};
use crate::hmm::{Counts, Dest, Hmm, Src};

/// How many states a fresh model gets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateCount {
    Fixed(usize),
    /// Multiple of the longest training sample, rounded up.
    PerMaxLength(f64),
}

impl StateCount {
    pub fn resolve(&self, corpus: &Corpus) -> usize {
        match *self {
            StateCount::Fixed(n) => n,
            StateCount::PerMaxLength(f) => ((f * corpus.max_len() as f64).ceil() as usize).max(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BwConfig {
    pub n_states: StateCount,
    pub max_iters: usize,
    /// Stop once the corpus log-likelihood improves by less than this (nats).
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub prune_threshold: f64,
}

impl Default for BwConfig {
    fn default() -> Self {
        BwConfig {
            n_states: StateCount::Fixed(6),
            max_iters: 1000,
            tol: 1e-6,
            restarts: 10,
            seed: 0,
            prune_threshold: 1e-3,
        }
    }
}

impl BwConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.n_states {
            StateCount::Fixed(n) => n >= 1,
            StateCount::PerMaxLength(f) => f > 0.0,
        };
        if !ok {
            return Err(Error::Config("number of states must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fully connected model with rows of normalized uniform draws. Every
/// state can be entered from the initial state and can exit to the final
/// state; the initial state does not connect directly to the final state.
pub fn random_init(n_states: usize, alphabet: &Alphabet, seed: u64) -> Hmm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = |keys: Vec<Dest>| -> BTreeMap<Dest, f64> {
        let draws: Vec<f64> = keys
            .iter()
            .map(|_| rng.random::<f64>() + f64::MIN_POSITIVE)
            .collect();
        let z: f64 = draws.iter().sum();
        keys.into_iter()
            .zip(draws)
            .map(|(k, d)| (k, (d / z).ln()))
            .collect()
    };
    let states: Vec<Dest> = (0..n_states).map(Dest::State).collect();
    let initial = row(states.clone());
    let with_final: Vec<Dest> = states.iter().copied().chain([Dest::Final]).collect();
    let trans = (0..n_states).map(|_| row(with_final.clone())).collect();
    let m = alphabet.len();
    let emit = (0..n_states)
        .map(|_| {
            let r = row((0..m).map(Dest::State).collect());
            r.into_iter()
                .map(|(k, v)| match k {
                    Dest::State(s) => (s, v),
                    Dest::Final => unreachable!(),
                })
                .collect()
        })
        .collect();
    Hmm::from_log_tables(alphabet.clone(), initial, trans, emit)
}

/// Probability-space copy of a model for the inner loops.
struct Dense {
    n: usize,
    init: Vec<f64>,
    init_final: f64,
    trans: Vec<Vec<f64>>,
    fin: Vec<f64>,
    /// emit[s][q]
    emit: Vec<Vec<f64>>,
}

impl Dense {
    fn new(hmm: &Hmm) -> Self {
        let n = hmm.n_states();
        let m = hmm.alphabet().len();
        let mut d = Dense {
            n,
            init: vec![0.0; n],
            init_final: hmm.trans_prob(Src::Initial, Dest::Final),
            trans: vec![vec![0.0; n]; n],
            fin: vec![0.0; n],
            emit: vec![vec![0.0; n]; m],
        };
        for q in 0..n {
            d.init[q] = hmm.trans_prob(Src::Initial, q);
            d.fin[q] = hmm.trans_prob(q, Dest::Final);
            for (dst, lp) in hmm.row(Src::State(q)) {
                if let Dest::State(r) = dst {
                    d.trans[q][*r] = lp.exp();
                }
            }
            for (s, lp) in hmm.emissions(q) {
                d.emit[*s][q] = lp.exp();
            }
        }
        d
    }
}

/// Posterior expectations for one string.
#[derive(Clone, Debug)]
pub struct Expectations {
    pub counts: Counts,
    pub log_likelihood: f64,
    /// Per-position state posteriors.
    pub gamma: Vec<Vec<f64>>,
}

/// Scaled forward-backward pass.
pub fn forward_backward(hmm: &Hmm, x: &[usize]) -> Result<Expectations> {
    fb_dense(&Dense::new(hmm), hmm, x)
}

fn zero_prob(hmm: &Hmm, x: &[usize]) -> Error {
    Error::ZeroProbabilitySample(vec![display_sample(&hmm.alphabet().decode(x))])
}

fn fb_dense(d: &Dense, hmm: &Hmm, x: &[usize]) -> Result<Expectations> {
    let n = d.n;
    let mut counts = Counts::zeros(n);
    if x.is_empty() {
        if d.init_final == 0.0 {
            return Err(zero_prob(hmm, x));
        }
        counts.add_trans(Src::Initial, Dest::Final, 1.0);
        return Ok(Expectations {
            counts,
            log_likelihood: d.init_final.ln(),
            gamma: Vec::new(),
        });
    }
    let len = x.len();
    let mut alpha = vec![vec![0.0; n]; len];
    let mut scale = vec![0.0; len];
    for q in 0..n {
        alpha[0][q] = d.init[q] * d.emit[x[0]][q];
    }
    for t in 0..len {
        if t > 0 {
            let (prev, cur) = alpha.split_at_mut(t);
            let prev = &prev[t - 1];
            for (q, &a) in prev.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (r, &p) in d.trans[q].iter().enumerate() {
                    cur[0][r] += a * p;
                }
            }
            for r in 0..n {
                cur[0][r] *= d.emit[x[t]][r];
            }
        }
        let c: f64 = alpha[t].iter().sum();
        if c == 0.0 {
            return Err(zero_prob(hmm, x));
        }
        scale[t] = c;
        alpha[t].iter_mut().for_each(|a| *a /= c);
    }
    let z: f64 = (0..n).map(|q| alpha[len - 1][q] * d.fin[q]).sum();
    if z == 0.0 {
        return Err(zero_prob(hmm, x));
    }
    let log_likelihood = scale.iter().map(|c| c.ln()).sum::<f64>() + z.ln();
    let mut beta = vec![vec![0.0; n]; len];
    for q in 0..n {
        beta[len - 1][q] = d.fin[q] / z;
    }
    for t in (0..len - 1).rev() {
        let next: Vec<f64> = (0..n)
            .map(|r| d.emit[x[t + 1]][r] * beta[t + 1][r])
            .collect();
        for q in 0..n {
            beta[t][q] = d.trans[q]
                .iter()
                .zip(&next)
                .map(|(p, b)| p * b)
                .sum::<f64>()
                / scale[t + 1];
        }
    }
    let gamma: Vec<Vec<f64>> = (0..len)
        .map(|t| (0..n).map(|q| alpha[t][q] * beta[t][q]).collect())
        .collect();
    for q in 0..n {
        if gamma[0][q] > 0.0 {
            counts.add_trans(Src::Initial, Dest::State(q), gamma[0][q]);
        }
        let f = alpha[len - 1][q] * d.fin[q] / z;
        if f > 0.0 {
            counts.add_trans(Src::State(q), Dest::Final, f);
        }
        for t in 0..len {
            if gamma[t][q] > 0.0 {
                counts.add_emit(q, x[t], gamma[t][q]);
            }
        }
    }
    for t in 0..len - 1 {
        for q in 0..n {
            if alpha[t][q] == 0.0 {
                continue;
            }
            for r in 0..n {
                let p = d.trans[q][r];
                if p == 0.0 {
                    continue;
                }
                let xi = alpha[t][q] * p * d.emit[x[t + 1]][r] * beta[t + 1][r] / scale[t + 1];
                if xi > 0.0 {
                    counts.add_trans(Src::State(q), Dest::State(r), xi);
                }
            }
        }
    }
    Ok(Expectations {
        counts,
        log_likelihood,
        gamma,
    })
}

/// Expected counts and log-likelihood of a whole corpus, each distinct
/// sample weighted by `weight(sample) * multiplicity`.
pub(crate) fn corpus_expectations(
    hmm: &Hmm,
    corpus: &Corpus,
    weights: Option<&[f64]>,
) -> Result<(Counts, f64)> {
    let d = Dense::new(hmm);
    let items: Vec<(Vec<usize>, f64)> = match weights {
        Some(w) => corpus
            .iter()
            .zip(w)
            .map(|(x, &w)| Ok((hmm.encode(x)?, w)))
            .collect::<Result<_>>()?,
        None => corpus
            .distinct()
            .into_iter()
            .map(|(x, m)| Ok((hmm.encode(&x)?, m as f64)))
            .collect::<Result<_>>()?,
    };
    let parts: Vec<Result<(Counts, f64)>> = items
        .par_iter()
        .map(|(x, w)| {
            let e = fb_dense(&d, hmm, x)?;
            let mut c = e.counts;
            c.scale(*w);
            Ok((
                c,
                e.log_likelihood * if weights.is_some() { 1.0 } else { *w },
            ))
        })
        .collect();
    let mut total = Counts::zeros(hmm.n_states());
    let mut ll = 0.0;
    let mut failed = Vec::new();
    for (p, (x, _)) in parts.into_iter().zip(&items) {
        match p {
            Ok((c, l)) => {
                total.add(&c);
                ll += l;
            }
            Err(_) => failed.push(display_sample(&hmm.alphabet().decode(x))),
        }
    }
    if !failed.is_empty() {
        return Err(Error::ZeroProbabilitySample(failed));
    }
    Ok((total, ll))
}

/// Reestimates every row of `hmm` from expected counts over its own
/// structure. Rows without expected mass keep their parameters.
pub(crate) fn reestimate(hmm: &Hmm, counts: &Counts) -> Hmm {
    fn norm<K: Ord + Copy>(
        old: &BTreeMap<K, f64>,
        c: Option<&BTreeMap<K, f64>>,
    ) -> BTreeMap<K, f64> {
        let get = |k: &K| c.and_then(|c| c.get(k)).copied().unwrap_or(0.0);
        let total: f64 = old.keys().map(get).sum();
        if total <= 0.0 {
            return old.clone();
        }
        old.keys()
            .filter(|k| get(k) > 0.0)
            .map(|k| (*k, (get(k) / total).ln()))
            .collect()
    }
    let n = hmm.n_states();
    let initial = norm(hmm.row(Src::Initial), Some(&counts.initial));
    let trans = (0..n)
        .map(|q| norm(hmm.row(Src::State(q)), counts.trans.get(q)))
        .collect();
    let emit = (0..n)
        .map(|q| norm(hmm.emissions(q), counts.emit.get(q)))
        .collect();
    Hmm::from_log_tables(hmm.alphabet().clone(), initial, trans, emit)
}

/// Log of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct BwLog {
    /// Corpus log-likelihood before each reestimation, then at the final parameters.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Expectation-maximization from `hmm` until the likelihood gain drops below `tol`.
pub fn bw_train(hmm: &Hmm, corpus: &Corpus, cfg: &BwConfig) -> Result<(Hmm, BwLog)> {
    let mut current = hmm.clone();
    let mut lls = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let (counts, ll) = corpus_expectations(&current, corpus, None)?;
        if let Some(&prev) = lls.last() {
            if ll - prev < cfg.tol {
                lls.push(ll);
                converged = true;
                break;
            }
        }
        lls.push(ll);
        if iterations >= cfg.max_iters {
            break;
        }
        current = reestimate(&current, &counts);
        iterations += 1;
    }
    Ok((
        current,
        BwLog {
            log_likelihoods: lls,
            iterations,
            converged,
        },
    ))
}

/// One restart of a Baum-Welch experiment.
#[derive(Clone, Debug)]
pub struct BwRun {
    pub restart: usize,
    pub seed: u64,
    pub iterations: usize,
    pub train_ll: f64,
    pub test_ll: Option<f64>,
    pub trained: Hmm,
    pub pruned: Hmm,
    pub cross_parse: Option<CrossParseReport>,
}

impl BwRun {
    pub const CSV_HEADER: &'static str =
        "restart,seed,iters,train_ll,test_ll,states_after_prune,parse_in,parse_out";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{:.6},{},{},{},{}",
            self.restart,
            self.seed,
            self.iterations,
            self.train_ll,
            opt(self.test_ll.map(|v| format!("{v:.6}"))),
            self.pruned.n_states(),
            opt(self.cross_parse.map(|c| c.samples_in.to_string())),
            opt(self.cross_parse.map(|c| c.samples_out.to_string())),
        )
    }
}

/// Monte-Carlo comparison settings for [`bw_experiment`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub n: usize,
    pub seed: u64,
    pub max_len: usize,
}

/// Trains `cfg.restarts` random initializations (seeds `seed`, `seed + 1`,
/// ...), prunes each, and evaluates them against the test set and target.
pub fn bw_experiment(
    target: Option<&Hmm>,
    train: &Corpus,
    test: Option<&Corpus>,
    cfg: &BwConfig,
    mc: McConfig,
) -> Result<Vec<BwRun>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let alphabet = match target {
        Some(t) => t.alphabet().union(&train.alphabet()),
        None => train.alphabet(),
    };
    let n = cfg.n_states.resolve(train);
    (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let init = random_init(n, &alphabet, seed);
            let (trained, log) = bw_train(&init, train, cfg)?;
            let (expected, _) = corpus_expectations(&trained, train, None)?;
            let pruned = trained.prune(&expected, cfg.prune_threshold)?;
            let test_ll = test.map(|t| t.iter().map(|x| trained.log_prob_lenient(x)).sum::<f64>());
            let cross = match target {
                Some(t) => Some(cross_parse(&pruned, t, mc.n, mc.seed, mc.max_len)?),
                None => None,
            };
            Ok(BwRun {
                restart: r,
                seed,
                iterations: log.iterations,
                train_ll: *log.log_likelihoods.last().unwrap(),
                test_ll,
                trained,
                pruned,
                cross_parse: cross,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::chars;
    use crate::hmm::fixtures::{chain, simple_loop};

    fn enumerate_paths(hmm: &Hmm, x: &[usize]) -> Vec<(Vec<usize>, f64)> {
        let n = hmm.n_states();
        let total = n.pow(x.len() as u32);
        (0..total)
            .filter_map(|mut k| {
                let mut states = Vec::with_capacity(x.len());
                for _ in 0..x.len() {
                    states.push(k % n);
                    k /= n;
                }
                let lp = hmm.path_log_prob(x, &states);
                (lp > f64::NEG_INFINITY).then(|| (states, lp.exp()))
            })
            .collect()
    }

    /// Posterior counts by explicit path enumeration.
    fn brute_counts(hmm: &Hmm, x: &[usize]) -> Counts {
        let paths = enumerate_paths(hmm, x);
        let z: f64 = paths.iter().map(|p| p.1).sum();
        let mut c = Counts::zeros(hmm.n_states());
        for (states, p) in paths {
            crate::hmm::Counts::add(&mut c, &{
                let mut one = Counts::zeros(hmm.n_states());
                let mut src = Src::Initial;
                for (&q, &s) in states.iter().zip(x) {
                    one.add_trans(src, Dest::State(q), p / z);
                    one.add_emit(q, s, p / z);
                    src = Src::State(q);
                }
                one.add_trans(src, Dest::Final, p / z);
                one
            });
        }
        c
    }

    #[test]
    fn chain_counts_are_exact() {
        let hmm = chain("ab");
        let e = forward_backward(&hmm, &[0, 1]).unwrap();
        assert_eq!(e.log_likelihood, 0.0);
        assert_eq!(e.counts.trans_count(Src::Initial, 0), 1.0);
        assert_eq!(e.counts.trans_count(0, 1), 1.0);
        assert_eq!(e.counts.trans_count(1, Dest::Final), 1.0);
        assert_eq!(e.counts.emit_count(1, 1), 1.0);
    }

    #[test]
    fn fig1_counts_match_unique_path() {
        let hmm = simple_loop();
        let x = hmm.encode(&chars("abaa")).unwrap();
        let e = forward_backward(&hmm, &x).unwrap();
        assert!(e.counts.max_abs_diff(&brute_counts(&hmm, &x)) < 1e-12);
        assert!((e.counts.trans_count(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_equal_paths_split_evenly() {
        let hmm = Hmm::builder(Alphabet::from_chars("a"), 2)
            .trans(Src::Initial, 0, 0.5)
            .trans(Src::Initial, 1, 0.5)
            .trans(0, Dest::Final, 1.0)
            .trans(1, Dest::Final, 1.0)
            .emit(0, "a", 1.0)
            .emit(1, "a", 1.0)
            .build()
            .unwrap();
        let e = forward_backward(&hmm, &[0]).unwrap();
        assert!((e.counts.trans_count(Src::Initial, 0) - 0.5).abs() < 1e-15);
        assert!((e.counts.trans_count(Src::Initial, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_models_match_enumeration() {
        let alphabet = Alphabet::from_chars("abc");
        for seed in 0..30 {
            let hmm = random_init(1 + (seed as usize % 3), &alphabet, seed);
            let x: Vec<usize> = (0..1 + seed as usize % 5)
                .map(|i| (i * 7 + seed as usize) % 3)
                .collect();
            let e = forward_backward(&hmm, &x).unwrap();
            assert!((e.log_likelihood - hmm.forward(&x)).abs() < 1e-10);
            assert!(e.counts.max_abs_diff(&brute_counts(&hmm, &x)) < 1e-10);
            for g in &e.gamma {
                assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
            assert!((e.counts.trans_total(Src::Initial) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_init_shape() {
        let one = random_init(1, &Alphabet::from_chars("a"), 3);
        assert_eq!(one.emit_prob(0, &chars("a")[0]), 1.0);
        assert_eq!(one.trans_prob(Src::Initial, 0), 1.0);
        let big = random_init(10, &Alphabet::from_chars("abc"), 1);
        big.validate(1e-12).unwrap();
        assert_eq!(big.n_transitions(), 10 + 10 * 11);
        assert_ne!(random_init(10, &Alphabet::from_chars("abc"), 2), big);
    }

    #[test]
    fn fixed_point_converges_immediately() {
        let hmm = chain("ab");
        let corpus = Corpus::from_chars(&["ab", "ab"]);
        let (trained, log) = bw_train(&hmm, &corpus, &BwConfig::default()).unwrap();
        assert_eq!(log.iterations, 1);
        assert_eq!(trained, hmm);
    }

    #[test]
    fn em_is_monotone() {
        let alphabet = Alphabet::from_chars("ab");
        let corpus = Corpus::from_chars(&["ab", "abab", "aab", "b", "abba"]);
        for seed in 0..10 {
            let init = random_init(3, &alphabet, seed);
            let cfg = BwConfig {
                max_iters: 200,
                ..BwConfig::default()
            };
            let (_, log) = bw_train(&init, &corpus, &cfg).unwrap();
            for w in log.log_likelihoods.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "{w:?}");
            }
        }
    }

    #[test]
    fn zero_probability_is_an_error() {
        let hmm = chain("ab");
        let err = bw_train(&hmm, &Corpus::from_chars(&["ba"]), &BwConfig::default()).unwrap_err();
        assert_eq!(err, Error::ZeroProbabilitySample(vec!["b a".into()]));
    }

    #[test]
    fn experiment_report_rows() {
        let corpus = Corpus::from_chars(&["ab", "abab"]);
        let cfg = BwConfig {
            n_states: StateCount::Fixed(2),
            restarts: 1,
            seed: 4,
            ..BwConfig::default()
        };
        let mc = McConfig {
            n: 20,
            seed: 1,
            max_len: 100,
        };
        let runs = bw_experiment(None, &corpus, Some(&corpus), &cfg, mc).unwrap();
        assert_eq!(runs.len(), 1);
        let row = runs[0].csv_row();
        assert_eq!(row.split(',').count(), BwRun::CSV_HEADER.split(',').count());
        assert!(row.starts_with("0,4,"));
    }
}
