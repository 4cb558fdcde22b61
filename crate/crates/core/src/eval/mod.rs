//! Model comparison: test-set likelihood, Monte-Carlo cross-parsing and
//! exact language equality.

mod mixture;
pub mod words;

use std::collections::{BTreeSet, HashSet, VecDeque};

use rayon::prelude::*;

use crate::corpus::{display_sample, Alphabet, Corpus, Symbol};
use crate::error::{Error, Result};
use crate::hmm::{Dest, Hmm, Src};

pub use mixture::{fit_mixture, Bigram, MixtureConfig, MixtureFit, MixtureModel};

/// Anything that assigns a probability to a whole string.
pub trait StringModel {
    /// Natural log-probability, `-inf` when the string is impossible.
    fn log_prob(&self, x: &[Symbol]) -> f64;
}

impl StringModel for Hmm {
    fn log_prob(&self, x: &[Symbol]) -> f64 {
        self.log_prob_lenient(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossEntropy {
    /// Total log-likelihood in nats.
    pub log_likelihood: f64,
    /// Symbols plus one end marker per string.
    pub events: usize,
}

impl CrossEntropy {
    pub fn log10(&self) -> f64 {
        self.log_likelihood / std::f64::consts::LN_10
    }

    /// Nats per event.
    pub fn per_symbol(&self) -> f64 {
        -self.log_likelihood / self.events as f64
    }

    pub fn perplexity(&self) -> f64 {
        self.per_symbol().exp()
    }
}

/// Test-set log-likelihood. Strings with zero probability are an error
/// listing every offender.
pub fn cross_entropy(model: &dyn StringModel, test: &Corpus) -> Result<CrossEntropy> {
    let mut ll = 0.0;
    let mut bad = Vec::new();
    for x in test.iter() {
        let lp = model.log_prob(x);
        if lp == f64::NEG_INFINITY {
            bad.push(display_sample(x));
        } else {
            ll += lp;
        }
    }
    if !bad.is_empty() {
        return Err(Error::ZeroProbabilitySample(bad));
    }
    Ok(CrossEntropy {
        log_likelihood: ll,
        events: test.symbol_count() + test.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrossParseReport {
    pub n: usize,
    /// Target samples the induced model can parse.
    pub samples_in: usize,
    /// Induced samples the target can parse.
    pub samples_out: usize,
}

impl CrossParseReport {
    pub fn is_perfect(&self) -> bool {
        self.samples_in == self.n && self.samples_out == self.n
    }
}

/// Seed for the `i`-th draw of one direction, so every draw is reproducible
/// on its own.
fn draw_seed(seed: u64, direction: u64, i: usize) -> u64 {
    let mut z = seed
        ^ direction.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (i as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `n` strings from each model and checks whether the other one
/// can generate them. Walks longer than `max_len` are an error.
pub fn cross_parse(
    induced: &Hmm,
    target: &Hmm,
    n: usize,
    seed: u64,
    max_len: usize,
) -> Result<CrossParseReport> {
    let count = |from: &Hmm, by: &Hmm, dir: u64| -> Result<usize> {
        let hits: Vec<bool> = (0..n)
            .into_par_iter()
            .map(|i| Ok(by.accepts(&from.sample_seeded(draw_seed(seed, dir, i), max_len)?)))
            .collect::<Result<_>>()?;
        Ok(hits.into_iter().filter(|&h| h).count())
    };
    Ok(CrossParseReport {
        n,
        samples_in: count(target, induced, 1)?,
        samples_out: count(induced, target, 2)?,
    })
}

/// Length guard for sampling: ten times the longest training string, at least 100.
pub fn max_len_guard(corpus: &Corpus) -> usize {
    (10 * corpus.max_len()).max(100)
}

/// Monte-Carlo language check: every string drawn from either model is
/// parseable by the other.
pub fn language_equal(
    induced: &Hmm,
    target: &Hmm,
    n: usize,
    seed: u64,
    max_len: usize,
) -> Result<bool> {
    Ok(cross_parse(induced, target, n, seed, max_len)?.is_perfect())
}

/// Exact equality of the generated languages (supports only, not
/// probabilities), by subset construction on both models at once.
pub fn same_language(a: &Hmm, b: &Hmm) -> bool {
    let alphabet: Alphabet = a.alphabet().union(b.alphabet());
    type Set = BTreeSet<usize>;
    // None stands for the initial configuration.
    fn step(hmm: &Hmm, from: &Option<Set>, sym: Option<usize>) -> Set {
        let Some(sym) = sym else { return Set::new() };
        let succ = |src: Src| -> Vec<usize> {
            hmm.row(src)
                .keys()
                .filter_map(|d| match d {
                    Dest::State(r) if hmm.emissions(*r).contains_key(&sym) => Some(*r),
                    _ => None,
                })
                .collect()
        };
        match from {
            None => succ(Src::Initial).into_iter().collect(),
            Some(set) => set.iter().flat_map(|&q| succ(Src::State(q))).collect(),
        }
    }
    fn accepting(hmm: &Hmm, at: &Option<Set>) -> bool {
        match at {
            None => hmm.row(Src::Initial).contains_key(&Dest::Final),
            Some(set) => set
                .iter()
                .any(|&q| hmm.row(Src::State(q)).contains_key(&Dest::Final)),
        }
    }
    let start = (None::<Set>, None::<Set>);
    let mut seen = HashSet::new();
    seen.insert(start.clone());
    let mut queue = VecDeque::from([start]);
    while let Some((sa, sb)) = queue.pop_front() {
        if accepting(a, &sa) != accepting(b, &sb) {
            return false;
        }
        for sym in alphabet.symbols() {
            let na = step(a, &sa, a.alphabet().id(sym));
            let nb = step(b, &sb, b.alphabet().id(sym));
            if na.is_empty() && nb.is_empty() {
                continue;
            }
            let next = (Some(na), Some(nb));
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    true
}

/// One line of a model comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model_id: String,
    pub test_ll_log10: Option<f64>,
    pub perplexity: Option<f64>,
    pub parse_in: Option<usize>,
    pub parse_out: Option<usize>,
    /// Model size; `None` for models that are not HMMs.
    pub states: Option<usize>,
    pub transitions: Option<usize>,
    pub emissions: Option<usize>,
}

impl ReportRow {
    pub const CSV_HEADER: &'static str =
        "model_id,test_ll_log10,perplexity,parse_in,parse_out,states,transitions,emissions";

    /// Scores `test` with `scorer` (the model itself, or a mixture built
    /// around it) and cross-parses `model` against `target`, each when given.
    pub fn evaluate(
        model_id: &str,
        model: &Hmm,
        scorer: &dyn StringModel,
        test: Option<&Corpus>,
        target: Option<(&Hmm, usize, u64, usize)>,
    ) -> Result<Self> {
        let ce = test.map(|t| cross_entropy(scorer, t)).transpose()?;
        let cp = match target {
            Some((t, n, seed, max_len)) => Some(cross_parse(model, t, n, seed, max_len)?),
            None => None,
        };
        Ok(ReportRow {
            model_id: model_id.to_string(),
            test_ll_log10: ce.map(|c| c.log10()),
            perplexity: ce.map(|c| c.perplexity()),
            parse_in: cp.map(|c| c.samples_in),
            parse_out: cp.map(|c| c.samples_out),
            states: Some(model.n_states()),
            transitions: Some(model.n_transitions()),
            emissions: Some(model.n_emissions()),
        })
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        let real = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.model_id,
            real(self.test_ll_log10),
            real(self.perplexity),
            opt(self.parse_in),
            opt(self.parse_out),
            opt(self.states),
            opt(self.transitions),
            opt(self.emissions)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::chars;
    use crate::hmm::fixtures::{chain, simple_loop};

    #[test]
    fn cross_entropy_counts_end_markers() {
        let hmm = chain("ab");
        let ce = cross_entropy(&hmm, &Corpus::from_chars(&["ab", "ab"])).unwrap();
        assert_eq!(ce.events, 6);
        assert_eq!(ce.log_likelihood, 0.0);
        assert_eq!(ce.perplexity(), 1.0);
        let hmm = simple_loop();
        let ce = cross_entropy(&hmm, &Corpus::from_chars(&["ab"])).unwrap();
        // a (ab from state 1 exits w.p. 0.5): 0.5 * 0.5
        assert!((ce.log_likelihood - 0.25f64.ln()).abs() < 1e-12);
        assert!((ce.perplexity() - 4f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn one_state_perplexity_closed_form() {
        let hmm = Hmm::builder(Alphabet::from_chars("ab"), 1)
            .trans(Src::Initial, 0, 1.0)
            .trans(0, 0, 2.0 / 3.0)
            .trans(0, Dest::Final, 1.0 / 3.0)
            .emit(0, "a", 0.5)
            .emit(0, "b", 0.5)
            .build()
            .unwrap();
        let test = Corpus::from_chars(&["ab", "a", "bab"]);
        // a string of length n has probability (1/2)^n (2/3)^(n-1) (1/3)
        let ll: f64 = [2.0, 1.0, 3.0]
            .iter()
            .map(|n: &f64| n * 0.5f64.ln() + (n - 1.0) * (2.0f64 / 3.0).ln() + (1.0f64 / 3.0).ln())
            .sum();
        let ce = cross_entropy(&hmm, &test).unwrap();
        assert!((ce.log_likelihood - ll).abs() < 1e-12);
        assert!((ce.perplexity() - (-ll / 9.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_lists_offenders() {
        let err = cross_entropy(&chain("ab"), &Corpus::from_chars(&["ab", "ba", "b"])).unwrap_err();
        assert_eq!(
            err,
            Error::ZeroProbabilitySample(vec!["b a".into(), "b".into()])
        );
    }

    #[test]
    fn cross_parse_self_is_perfect() {
        let m = simple_loop();
        let r = cross_parse(&m, &m, 200, 7, 100).unwrap();
        assert!(r.is_perfect());
        assert_eq!(r, cross_parse(&m, &m, 200, 7, 100).unwrap());
        let narrow = chain("aa");
        let r = cross_parse(&narrow, &m, 200, 7, 100).unwrap();
        assert_eq!(r.samples_out, 200);
        assert!(r.samples_in < 200);
    }

    #[test]
    fn language_equality() {
        let m = simple_loop();
        assert!(same_language(&m, &m));
        assert!(!same_language(&m, &chain("ab")));
        assert!(same_language(&chain("ab"), &chain("ab")));
        assert!(language_equal(&m, &m, 100, 3, 100).unwrap());
        assert!(!language_equal(&chain("ab"), &m, 100, 3, 100).unwrap());
        // same language, different probabilities and shape
        let unrolled = Hmm::builder(Alphabet::from_chars("ab"), 4)
            .trans(Src::Initial, 0, 1.0)
            .trans(0, 1, 1.0)
            .trans(1, 2, 0.3)
            .trans(1, Dest::Final, 0.7)
            .trans(2, 3, 1.0)
            .trans(3, 2, 0.1)
            .trans(3, Dest::Final, 0.9)
            .emit(0, "a", 1.0)
            .emit(1, "a", 0.5)
            .emit(1, "b", 0.5)
            .emit(2, "a", 1.0)
            .emit(3, "a", 0.2)
            .emit(3, "b", 0.8)
            .build()
            .unwrap();
        assert!(same_language(&m, &unrolled));
        assert!(unrolled.accepts(&chars("abaa")));
    }

    #[test]
    fn report_row_format() {
        let row = ReportRow::evaluate(
            "m",
            &chain("ab"),
            &chain("ab"),
            Some(&Corpus::from_chars(&["ab"])),
            None,
        )
        .unwrap();
        assert_eq!(row.csv_row(), "m,0.000000,1.000000,,,2,3,2");
    }
}
