use std::collections::HashMap;

use super::StringModel;
use crate::baum_welch::{corpus_expectations, reestimate};
use crate::corpus::{Alphabet, Corpus, Sample, Symbol};
use crate::error::{Error, Result};
use crate::hmm::Hmm;

/// Add-one-half smoothed bigram over an alphabet, with start and end contexts.
#[derive(Clone, Debug, PartialEq)]
pub struct Bigram {
    alphabet: Alphabet,
    /// `log_p[context][outcome]`: context 0 is the start, `1 + s` follows
    /// symbol `s`; outcome `s` is a symbol and outcome `|Σ|` is the end.
    log_p: Vec<Vec<f64>>,
}

impl Bigram {
    pub const SMOOTHING: f64 = 0.5;

    pub fn fit(corpus: &Corpus, alphabet: &Alphabet) -> Self {
        let m = alphabet.len();
        let mut counts = vec![vec![Self::SMOOTHING; m + 1]; m + 1];
        for x in corpus.iter() {
            let mut ctx = 0;
            for sym in x {
                // symbols outside the alphabet are skipped: they get zero probability anyway
                let Some(s) = alphabet.id(sym) else { continue };
                counts[ctx][s] += 1.0;
                ctx = 1 + s;
            }
            counts[ctx][m] += 1.0;
        }
        let log_p = counts
            .into_iter()
            .map(|row| {
                let z: f64 = row.iter().sum();
                row.into_iter().map(|c| (c / z).ln()).collect()
            })
            .collect();
        Bigram {
            alphabet: alphabet.clone(),
            log_p,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
}

impl StringModel for Bigram {
    fn log_prob(&self, x: &[Symbol]) -> f64 {
        let m = self.alphabet.len();
        let mut ctx = 0;
        let mut lp = 0.0;
        for sym in x {
            let Some(s) = self.alphabet.id(sym) else {
                return f64::NEG_INFINITY;
            };
            lp += self.log_p[ctx][s];
            ctx = 1 + s;
        }
        lp + self.log_p[ctx][m]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureModel {
    pub component: Hmm,
    pub backoff: Bigram,
    /// Log weights of the component and of the backoff. Kept apart so a
    /// weight near one does not round the backoff away.
    pub log_weights: (f64, f64),
}

impl MixtureModel {
    pub fn new(component: Hmm, backoff: Bigram, weight: f64) -> Self {
        MixtureModel {
            component,
            backoff,
            log_weights: (weight.ln(), (1.0 - weight).ln()),
        }
    }

    /// Weight of the component.
    pub fn weight(&self) -> f64 {
        self.log_weights.0.exp()
    }

    fn parts(&self, component_lp: f64, backoff_lp: f64) -> (f64, f64) {
        (
            component_lp + self.log_weights.0,
            backoff_lp + self.log_weights.1,
        )
    }
}

impl StringModel for MixtureModel {
    fn log_prob(&self, x: &[Symbol]) -> f64 {
        let (a, b) = self.parts(self.component.log_prob_lenient(x), self.backoff.log_prob(x));
        crate::hmm::log_add(a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureConfig {
    pub initial_weight: f64,
    pub max_iters: usize,
    /// Stop once the relative log-likelihood gain drops below this.
    pub rel_tol: f64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            initial_weight: 0.5,
            max_iters: 200,
            rel_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureFit {
    pub model: MixtureModel,
    /// Training log-likelihood before each update, then at the final parameters.
    pub log_likelihoods: Vec<f64>,
}

/// EM for the mixture weight and the component's parameters within its
/// fixed structure. The backoff stays as given.
pub fn fit_mixture(
    structure: &Hmm,
    backoff: &Bigram,
    train: &Corpus,
    cfg: &MixtureConfig,
) -> Result<MixtureFit> {
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(0.0..=1.0).contains(&cfg.initial_weight) {
        return Err(Error::Config(format!(
            "mixture weight {} outside [0, 1]",
            cfg.initial_weight
        )));
    }
    let distinct: Vec<(Sample, f64)> = train
        .distinct()
        .into_iter()
        .map(|(x, m)| (x, m as f64))
        .collect();
    let total: f64 = distinct.iter().map(|d| d.1).sum();
    let backoff_lp: HashMap<&Sample, f64> = distinct
        .iter()
        .map(|(x, _)| (x, backoff.log_prob(x)))
        .collect();
    let mut model = MixtureModel::new(structure.clone(), backoff.clone(), cfg.initial_weight);
    let mut lls = Vec::new();
    let log_total = total.ln();
    for iter in 0..=cfg.max_iters {
        let mut ll = 0.0;
        let mut resp = Vec::with_capacity(distinct.len());
        let (mut log_mass_a, mut log_mass_b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, m) in &distinct {
            let (a, b) = model.parts(model.component.log_prob_lenient(x), backoff_lp[x]);
            let mix = crate::hmm::log_add(a, b);
            ll += m * mix;
            log_mass_a = crate::hmm::log_add(log_mass_a, m.ln() + a - mix);
            log_mass_b = crate::hmm::log_add(log_mass_b, m.ln() + b - mix);
            resp.push(if a == f64::NEG_INFINITY {
                0.0
            } else {
                (a - mix).exp()
            });
        }
        if let Some(&prev) = lls.last() {
            let gain: f64 = ll - prev;
            if gain / f64::abs(prev).max(f64::MIN_POSITIVE) < cfg.rel_tol {
                lls.push(ll);
                break;
            }
        }
        lls.push(ll);
        if iter == cfg.max_iters {
            break;
        }
        model.log_weights = (log_mass_a - log_total, log_mass_b - log_total);
        let (kept, weights): (Vec<Sample>, Vec<f64>) = distinct
            .iter()
            .zip(&resp)
            .filter(|(_, &r)| r > 0.0)
            .map(|((x, m), r)| (x.clone(), m * r))
            .unzip();
        if !kept.is_empty() {
            let (counts, _) =
                corpus_expectations(&model.component, &Corpus::new(kept), Some(&weights))?;
            model.component = reestimate(&model.component, &counts);
        }
    }
    Ok(MixtureFit {
        model,
        log_likelihoods: lls,
    })
}
