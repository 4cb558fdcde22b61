//! Word-pronunciation benchmark on a synthetic lexicon: every word has a
//! hidden loop-free pronunciation model, and competing structure builders
//! are compared through bigram mixtures on held-out pronunciations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{cross_entropy, fit_mixture, Bigram, MixtureConfig, ReportRow, StringModel};
use crate::baum_welch::{bw_train, corpus_expectations, random_init, BwConfig};
use crate::corpus::{Alphabet, Corpus, Symbol};
use crate::error::Result;
use crate::hmm::{Dest, Hmm, Src};
use crate::merging::{build_initial_model, online_merge, SearchConfig};
use crate::priors::{PriorConfig, StructurePrior};

/// Phone inventory, loosely ARPAbet.
const PHONES: [&str; 24] = [
    "aa", "ae", "ah", "ao", "b", "ch", "d", "dh", "eh", "er", "f", "g", "ih", "iy", "k", "l", "m",
    "n", "ow", "p", "r", "s", "t", "uw",
];

#[derive(Clone, Debug, PartialEq)]
pub struct LexiconConfig {
    pub words: usize,
    pub min_samples: usize,
    pub max_samples: usize,
    /// Fraction of each word's samples held out for testing.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        LexiconConfig {
            words: 50,
            min_samples: 20,
            max_samples: 100,
            test_fraction: 0.25,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Word {
    pub target: Hmm,
    pub train: Corpus,
    pub test: Corpus,
}

pub fn phone_alphabet() -> Alphabet {
    Alphabet::new(
        PHONES
            .iter()
            .map(|p| Symbol::new(p).expect("phone names are valid")),
    )
}

/// A random pronunciation model: a chain of 3 to 7 phones where some
/// positions have an alternative realization and some may be dropped.
fn random_word(rng: &mut ChaCha8Rng) -> Hmm {
    let len = rng.random_range(3..=7);
    let phones: Vec<&str> = (0..len)
        .map(|_| PHONES[rng.random_range(0..PHONES.len())])
        .collect();
    let alternative: Vec<Option<&str>> = (0..len)
        .map(|_| {
            rng.random_bool(0.3)
                .then(|| PHONES[rng.random_range(0..PHONES.len())])
        })
        .collect();
    // inner positions only, so every pronunciation keeps its first and last phone
    let optional: Vec<bool> = (0..len)
        .map(|i| i > 0 && i + 1 < len && rng.random_bool(0.2))
        .collect();
    let mut b = Hmm::builder(phone_alphabet(), len);
    // probability of entering position j from a source that is about to enter position i
    let entries = |i: usize| -> Vec<(Dest, f64)> {
        let mut out = Vec::new();
        let mut mass = 1.0;
        for j in i..=len {
            if j == len {
                out.push((Dest::Final, mass));
                break;
            }
            if optional[j] {
                out.push((Dest::State(j), mass * 0.7));
                mass *= 0.3;
            } else {
                out.push((Dest::State(j), mass));
                break;
            }
        }
        out
    };
    for (d, p) in entries(0) {
        b = b.trans(Src::Initial, d, p);
    }
    for i in 0..len {
        for (d, p) in entries(i + 1) {
            b = b.trans(i, d, p);
        }
        match alternative[i] {
            Some(alt) if alt != phones[i] => b = b.emit(i, phones[i], 0.7).emit(i, alt, 0.3),
            _ => b = b.emit(i, phones[i], 1.0),
        }
    }
    b.build().expect("pronunciation models are well formed")
}

/// Draws a lexicon and splits every word's samples into train and test.
pub fn synthetic_lexicon(cfg: &LexiconConfig) -> Result<Vec<Word>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.words)
        .map(|_| {
            let target = random_word(&mut rng);
            let n = rng.random_range(cfg.min_samples..=cfg.max_samples);
            let samples: Corpus = (0..n)
                .map(|_| target.sample(&mut rng, 100))
                .collect::<Result<_>>()?;
            let n_test = ((n as f64) * cfg.test_fraction).round() as usize;
            let (train, test) = samples.split_at(n - n_test);
            Ok(Word {
                target,
                train,
                test,
            })
        })
        .collect()
}

/// Structure builders compared by the benchmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// One path per distinct sample.
    MaxLikelihood,
    Merged {
        lambda: f64,
    },
    SingleOutput {
        lambda: f64,
    },
    BaumWelch {
        multiplier: f64,
    },
    Bigram,
}

impl Method {
    pub fn id(&self) -> String {
        match self {
            Method::MaxLikelihood => "ML".into(),
            Method::Merged { lambda } => format!("M({lambda})"),
            Method::SingleOutput { lambda } => format!("M1({lambda})"),
            Method::BaumWelch { multiplier } => format!("BW({multiplier}L)"),
            Method::Bigram => "BG".into(),
        }
    }

    /// The full line-up: ML, merged and single-output merged at three
    /// weights, Baum-Welch at three sizes, and the bigram.
    pub fn standard_set() -> Vec<Method> {
        let mut out = vec![Method::MaxLikelihood];
        for lambda in [0.25, 0.5, 1.0] {
            out.push(Method::Merged { lambda });
        }
        for lambda in [0.25, 0.5, 1.0] {
            out.push(Method::SingleOutput { lambda });
        }
        for multiplier in [1.0, 1.5, 1.75] {
            out.push(Method::BaumWelch { multiplier });
        }
        out.push(Method::Bigram);
        out
    }
}

/// Builds a structure from `corpus` with `method`. `None` for the bigram.
pub fn induce_structure(method: Method, corpus: &Corpus, seed: u64) -> Result<Option<Hmm>> {
    let merge = |lambda: f64, single: bool| -> Result<Hmm> {
        let cfg = PriorConfig {
            lambda,
            effective_sample_target: None,
            structure: if single {
                StructurePrior::DescriptionLengthSingle
            } else {
                StructurePrior::DescriptionLength
            },
            ..PriorConfig::default()
        };
        let search = SearchConfig {
            warmup: 5,
            forbid_loops: true,
            single_output: single,
            ..SearchConfig::default()
        };
        Ok(online_merge(corpus, &cfg, &search)?.state.hmm())
    };
    Ok(Some(match method {
        Method::MaxLikelihood => {
            let unique = Corpus::new(corpus.distinct().into_iter().map(|(x, _)| x).collect());
            build_initial_model(&unique, &PriorConfig::default())?.hmm()
        }
        Method::Merged { lambda } => merge(lambda, false)?,
        Method::SingleOutput { lambda } => merge(lambda, true)?,
        Method::BaumWelch { multiplier } => {
            let cfg = BwConfig {
                n_states: crate::baum_welch::StateCount::PerMaxLength(multiplier),
                ..BwConfig::default()
            };
            let init = random_init(cfg.n_states.resolve(corpus), &corpus.alphabet(), seed);
            let (trained, _) = bw_train(&init, corpus, &cfg)?;
            let (expected, _) = corpus_expectations(&trained, corpus, None)?;
            trained.prune(&expected, cfg.prune_threshold)?
        }
        Method::Bigram => return Ok(None),
    }))
}

/// Per-word outcome of one method.
#[derive(Clone, Debug)]
pub struct WordResult {
    pub structure: Option<Hmm>,
    pub weight: Option<f64>,
    pub test_log_likelihood: f64,
    pub test_events: usize,
}

/// Runs one method on every word: structure from the first half of the
/// training samples, mixture EM on all of them, scoring on the test samples.
pub fn evaluate_method(
    method: Method,
    words: &[Word],
    backoff: &Bigram,
    seed: u64,
) -> Result<Vec<WordResult>> {
    words
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let (half, _) = w.train.split_at(w.train.len() / 2);
            let structure = induce_structure(method, &half, seed.wrapping_add(i as u64))?;
            let (scorer, weight): (Box<dyn StringModel + Send + Sync>, Option<f64>) =
                match &structure {
                    Some(s) => {
                        let fit = fit_mixture(s, backoff, &w.train, &MixtureConfig::default())?;
                        let weight = fit.model.weight();
                        (Box::new(fit.model), Some(weight))
                    }
                    None => (Box::new(backoff.clone()), None),
                };
            let ce = cross_entropy(scorer.as_ref(), &w.test)?;
            Ok(WordResult {
                structure,
                weight,
                test_log_likelihood: ce.log_likelihood,
                test_events: ce.events,
            })
        })
        .collect()
}

/// Sums per-word results into one report row.
pub fn summarize(method: Method, results: &[WordResult]) -> ReportRow {
    let ll: f64 = results.iter().map(|r| r.test_log_likelihood).sum();
    let events: usize = results.iter().map(|r| r.test_events).sum();
    let size = |f: fn(&Hmm) -> usize| -> Option<usize> {
        results.iter().map(|r| r.structure.as_ref().map(f)).sum()
    };
    ReportRow {
        model_id: method.id(),
        test_ll_log10: Some(ll / std::f64::consts::LN_10),
        perplexity: Some((-ll / events as f64).exp()),
        parse_in: None,
        parse_out: None,
        states: size(Hmm::n_states),
        transitions: size(Hmm::n_transitions),
        emissions: size(Hmm::n_emissions),
    }
}

/// The whole benchmark: one report row per method.
pub fn word_benchmark(words: &[Word], methods: &[Method], seed: u64) -> Result<Vec<ReportRow>> {
    let mut all_train = Corpus::default();
    for w in words {
        all_train.extend(&w.train);
    }
    let backoff = Bigram::fit(&all_train, &phone_alphabet());
    methods
        .iter()
        .map(|&m| Ok(summarize(m, &evaluate_method(m, words, &backoff, seed)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::same_language;

    fn small() -> Vec<Word> {
        synthetic_lexicon(&LexiconConfig {
            words: 4,
            min_samples: 20,
            max_samples: 30,
            ..LexiconConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn lexicon_shape() {
        let words = small();
        assert_eq!(words.len(), 4);
        for w in &words {
            let n = w.train.len() + w.test.len();
            assert!((20..=30).contains(&n));
            assert!(w
                .train
                .iter()
                .chain(w.test.iter())
                .all(|x| w.target.accepts(x)));
            assert!(w.target.n_states() >= 3);
        }
        let again = small();
        assert!(same_language(&words[0].target, &again[0].target));
        assert_eq!(words[0].train, again[0].train);
    }

    #[test]
    fn merged_words_are_loop_free_and_cover_training() {
        let words = small();
        for w in &words {
            let hmm = induce_structure(Method::Merged { lambda: 1.0 }, &w.train, 0)
                .unwrap()
                .unwrap();
            assert!(w.train.iter().all(|x| hmm.accepts(x)));
            for q in 0..hmm.n_states() {
                assert!(!hmm.row(Src::State(q)).contains_key(&Dest::State(q)));
            }
            let single = induce_structure(Method::SingleOutput { lambda: 1.0 }, &w.train, 0)
                .unwrap()
                .unwrap();
            assert!((0..single.n_states()).all(|q| single.emissions(q).len() == 1));
        }
    }

    #[test]
    fn small_benchmark_report() {
        let words = small();
        let methods = [
            Method::MaxLikelihood,
            Method::Merged { lambda: 1.0 },
            Method::Bigram,
        ];
        let rows = word_benchmark(&words, &methods, 3).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].model_id, "BG");
        assert_eq!(rows[2].states, None);
        for r in &rows {
            let ll = r.test_ll_log10.unwrap();
            assert!(ll < 0.0 && ll.is_finite());
            assert!(r.perplexity.unwrap() > 1.0);
        }
        // merging shrinks the sample list
        assert!(rows[1].states < rows[0].states);
        let line = rows[2].csv_row();
        assert!(line.starts_with("BG,") && line.ends_with(",,,,,"));
    }
}
