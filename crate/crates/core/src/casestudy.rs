//! Built-in target languages, their minimal training samples, and drivers
//! for the standard experiments on them.

use crate::corpus::{Alphabet, Corpus};
use crate::error::{Error, Result};
use crate::eval::{cross_parse, CrossParseReport};
use crate::hmm::{Dest, Hmm, Src, DEFAULT_MAX_LEN};
use crate::merging::{
    best_first_merge, build_initial_model, online_merge, MergeResult, SearchConfig,
};
use crate::priors::PriorConfig;

/// `ac*a ∪ bc*b`: two mirrored branches, uniform at every choice point.
pub fn case1_target() -> Hmm {
    let mut b = Hmm::builder(Alphabet::from_chars("abc"), 6)
        .trans(Src::Initial, 0, 0.5)
        .trans(Src::Initial, 3, 0.5);
    for (base, outer) in [(0, "a"), (3, "b")] {
        b = b
            .trans(base, base + 1, 0.5)
            .trans(base, base + 2, 0.5)
            .trans(base + 1, base + 1, 0.5)
            .trans(base + 1, base + 2, 0.5)
            .trans(base + 2, Dest::Final, 1.0)
            .emit(base, outer, 1.0)
            .emit(base + 1, "c", 1.0)
            .emit(base + 2, outer, 1.0);
    }
    b.build().expect("case I target is well formed")
}

/// `a+b+a+b+`: four looping states in a row.
pub fn case2_target() -> Hmm {
    let mut b = Hmm::builder(Alphabet::from_chars("ab"), 4).trans(Src::Initial, 0, 1.0);
    for (q, sym) in ["a", "b", "a", "b"].into_iter().enumerate() {
        let next = if q == 3 {
            Dest::Final
        } else {
            Dest::State(q + 1)
        };
        b = b.trans(q, q, 0.5).trans(q, next, 0.5).emit(q, sym, 1.0);
    }
    b.build().expect("case II target is well formed")
}

/// `(a∪b)c*(a∪b)`: the case I target with its branches collapsed.
pub fn case1_overgeneral() -> Hmm {
    Hmm::builder(Alphabet::from_chars("abc"), 3)
        .trans(Src::Initial, 0, 1.0)
        .trans(0, 1, 0.5)
        .trans(0, 2, 0.5)
        .trans(1, 1, 0.5)
        .trans(1, 2, 0.5)
        .trans(2, Dest::Final, 1.0)
        .emit(0, "a", 0.5)
        .emit(0, "b", 0.5)
        .emit(1, "c", 1.0)
        .emit(2, "a", 0.5)
        .emit(2, "b", 0.5)
        .build()
        .expect("overgeneral model is well formed")
}

pub const CASE1_MINIMAL: [&str; 8] = ["aa", "bb", "aca", "bcb", "acca", "bccb", "accca", "bcccb"];

pub const CASE2_MINIMAL: [&str; 9] = [
    "abab", "aabab", "abbab", "abaab", "ababb", "aaabab", "abbbab", "abaaab", "ababbb",
];

pub const FIG3_SAMPLES: [&str; 2] = ["ab", "abab"];

/// `n` strings drawn from `target` with a fixed seed.
pub fn random_sample(target: &Hmm, n: usize, seed: u64) -> Result<Corpus> {
    target.sample_corpus(n, seed, DEFAULT_MAX_LEN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    One,
    Two,
}

impl Case {
    pub fn target(self) -> Hmm {
        match self {
            Case::One => case1_target(),
            Case::Two => case2_target(),
        }
    }

    pub fn minimal_sample(self) -> Corpus {
        match self {
            Case::One => Corpus::from_chars(&CASE1_MINIMAL),
            Case::Two => Corpus::from_chars(&CASE2_MINIMAL),
        }
    }

    /// The three prior weights of the sweep: no generalization, target, overgeneral.
    pub fn sweep(self) -> [f64; 3] {
        match self {
            Case::One => [0.016, 0.16, 1.0],
            Case::Two => [0.018, 0.18, 1.0],
        }
    }
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case1" => Ok(Case::One),
            "case2" => Ok(Case::Two),
            other => Err(Error::Config(format!("unknown case study {other:?}"))),
        }
    }
}

/// Prior and search settings used for all case-study merging runs:
/// incremental merging one sample at a time from the first sample on.
pub fn standard_config() -> (PriorConfig, SearchConfig) {
    let search = SearchConfig {
        warmup: 1,
        ..SearchConfig::default()
    };
    (PriorConfig::default(), search)
}

/// Merges `corpus` with the standard settings.
pub fn induce(corpus: &Corpus) -> Result<MergeResult> {
    let (cfg, search) = standard_config();
    online_merge(corpus, &cfg, &search)
}

/// The standard run with the prior weight held fixed instead of scheduled.
pub fn induce_fixed_lambda(corpus: &Corpus, lambda: f64) -> Result<MergeResult> {
    let (cfg, search) = standard_config();
    let cfg = PriorConfig {
        lambda,
        effective_sample_target: None,
        ..cfg
    };
    online_merge(corpus, &cfg, &search)
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub lambda: f64,
    pub model: Hmm,
    pub report: CrossParseReport,
}

pub fn lambda_sweep(
    corpus: &Corpus,
    target: &Hmm,
    lambdas: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let model = induce_fixed_lambda(corpus, lambda)?.state.hmm();
            let report = cross_parse(&model, target, n, seed, DEFAULT_MAX_LEN)?;
            Ok(SweepPoint {
                lambda,
                model,
                report,
            })
        })
        .collect()
}

/// One model along the two-string walkthrough.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkStep {
    /// Merge that produced this model, `None` for the initial one.
    pub pair: Option<(usize, usize)>,
    pub states: usize,
    /// Viterbi log10-likelihood of the samples at maximum-likelihood parameters.
    pub log10_likelihood: f64,
}

/// Merges the two-string corpus `ab, abab` best-first under the standard
/// prior, reporting the plain likelihood of every intermediate model, then
/// merges what is left into a single state.
pub fn fig3_walkthrough() -> Result<Vec<WalkStep>> {
    let corpus = Corpus::from_chars(&FIG3_SAMPLES);
    let cfg = PriorConfig {
        effective_sample_target: None,
        ..PriorConfig::default()
    };
    let search = SearchConfig {
        same_emission_phase: false,
        ..SearchConfig::default()
    };
    let found = best_first_merge(build_initial_model(&corpus, &cfg)?, &search)?;
    let mut replay = build_initial_model(&corpus, &PriorConfig::likelihood_only())?;
    let log10 = |s: &crate::merging::MergeState| s.score().log_likelihood / std::f64::consts::LN_10;
    let mut steps = vec![WalkStep {
        pair: None,
        states: replay.n_states(),
        log10_likelihood: log10(&replay),
    }];
    let mut record =
        |replay: &mut crate::merging::MergeState, pair: (usize, usize)| -> Result<()> {
            replay.merge_states(pair.0, pair.1)?;
            steps.push(WalkStep {
                pair: Some(pair),
                states: replay.n_states(),
                log10_likelihood: log10(replay),
            });
            Ok(())
        };
    for step in &found.trace.steps {
        record(&mut replay, step.pair)?;
    }
    while replay.n_states() > 1 {
        let ids = replay.live_ids();
        record(&mut replay, (ids[0], ids[1]))?;
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::chars;
    use crate::eval::same_language;

    #[test]
    fn targets_generate_their_languages() {
        let t1 = case1_target();
        for x in CASE1_MINIMAL {
            assert!(t1.accepts(&chars(x)), "{x}");
        }
        for x in ["ab", "acb", "a", "cc", ""] {
            assert!(!t1.accepts(&chars(x)), "{x}");
        }
        let t2 = case2_target();
        for x in CASE2_MINIMAL {
            assert!(t2.accepts(&chars(x)), "{x}");
        }
        for x in ["aba", "abba", "babab", "ababa"] {
            assert!(!t2.accepts(&chars(x)), "{x}");
        }
        // "aa" has probability 1/2 * 1/2 * 1; "aca" 1/2 * 1/2 * 1/2 * 1
        assert!((t1.string_log_prob(&chars("aa")).unwrap() - 0.25f64.ln()).abs() < 1e-12);
        assert!((t1.string_log_prob(&chars("aca")).unwrap() - 0.125f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn overgeneral_model_contains_target() {
        let over = case1_overgeneral();
        assert!(over.accepts(&chars("acb")));
        assert!(!same_language(&over, &case1_target()));
        let r = cross_parse(&over, &case1_target(), 100, 1, 100).unwrap();
        assert_eq!(r.samples_in, 100);
    }

    #[test]
    fn random_samples_are_reproducible() {
        let a = random_sample(&case1_target(), 20, 5).unwrap();
        assert_eq!(a, random_sample(&case1_target(), 20, 5).unwrap());
        assert_ne!(a, random_sample(&case1_target(), 20, 6).unwrap());
        assert!(a.iter().all(|x| case1_target().accepts(x)));
    }

    #[test]
    fn case_names() {
        assert_eq!("case1".parse::<Case>().unwrap(), Case::One);
        assert!("case3".parse::<Case>().is_err());
    }
}
