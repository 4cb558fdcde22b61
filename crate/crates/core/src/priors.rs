//! Parameter and structure priors, and the posterior scores built from them.
//!
//! Scores are natural logarithms. A model's objective is
//! `lambda * log_prior + log_likelihood`.

use std::collections::BTreeMap;

use statrs::function::gamma::ln_gamma;

use crate::corpus::Alphabet;
use crate::error::{Error, Result};
use crate::hmm::{Counts, Dest, Hmm, Src};

/// Smallest weight returned by [`lambda_schedule`].
pub const LAMBDA_MIN: f64 = 1e-3;

const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StructurePrior {
    /// Independent existence of each transition and emission, with the given
    /// expected number of transitions and emissions per state.
    Bernoulli {
        n_t: f64,
        n_e: f64,
    },
    /// Code length of the transition and emission lists.
    DescriptionLength,
    /// Code length when every state emits exactly one symbol.
    DescriptionLengthSingle,
    None,
}

/// Support of each Dirichlet: the current structure, or every possible target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Narrow,
    Broad,
}

/// How `alpha_t` and `alpha_e` are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaMode {
    /// Total weight, split evenly across the choices of each multinomial.
    Total,
    /// Weight of every single choice.
    PerChoice,
}

/// What the merge search maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Structure prior plus the Dirichlet marginal likelihood of the Viterbi counts.
    StructurePosterior,
    /// Structure prior plus the Viterbi likelihood at maximum-likelihood parameters.
    ViterbiLikelihood,
    /// Structure and parameter prior at MAP parameters, plus the Viterbi likelihood there.
    Joint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorConfig {
    pub alpha_t: f64,
    pub alpha_e: f64,
    pub alpha_mode: AlphaMode,
    pub scope: Scope,
    pub structure: StructurePrior,
    pub lambda: f64,
    /// Target effective sample size; when set, the weight follows [`lambda_schedule`].
    pub effective_sample_target: Option<f64>,
    /// Extra penalty `C^{-|Q|}` on the number of states.
    pub global_state_prior: Option<f64>,
    /// Broad scope only: emission prior means follow the observed symbol frequencies.
    pub empirical_emissions: bool,
    pub objective: Objective,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            alpha_t: 1.0,
            alpha_e: 1.0,
            alpha_mode: AlphaMode::Total,
            scope: Scope::Narrow,
            structure: StructurePrior::DescriptionLength,
            lambda: 1.0,
            effective_sample_target: Some(50.0),
            global_state_prior: None,
            empirical_emissions: false,
            objective: Objective::StructurePosterior,
        }
    }
}

impl PriorConfig {
    /// Plain likelihood at ML parameters, with no prior at all.
    pub fn likelihood_only() -> Self {
        PriorConfig {
            structure: StructurePrior::None,
            effective_sample_target: None,
            objective: Objective::ViterbiLikelihood,
            ..PriorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in [self.alpha_t, self.alpha_e] {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::NonPositiveAlpha(a));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if let Some(n) = self.effective_sample_target {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Config(format!(
                    "effective sample target must be positive, got {n}"
                )));
            }
        }
        if let Some(c) = self.global_state_prior {
            if !(c >= 1.0 && c.is_finite()) {
                return Err(Error::Config(format!(
                    "state prior constant must be >= 1, got {c}"
                )));
            }
        }
        if let StructurePrior::Bernoulli { n_t, n_e } = self.structure {
            if !(n_t > 0.0 && n_e > 0.0) {
                return Err(Error::DegenerateBernoulli(n_t.min(n_e)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub lambda: f64,
    pub objective: f64,
}

impl Score {
    pub fn new(log_prior: f64, log_likelihood: f64, lambda: f64) -> Self {
        Score {
            log_prior,
            log_likelihood,
            lambda,
            objective: weighted(lambda, log_prior, log_likelihood),
        }
    }
}

/// `lambda * prior + likelihood`, treating a zero prior as exactly zero.
pub(crate) fn weighted(lambda: f64, prior: f64, lik: f64) -> f64 {
    if prior == 0.0 {
        lik
    } else {
        lambda * prior + lik
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    match alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        Some(a) => Err(Error::NonPositiveAlpha(*a)),
        None => Ok(()),
    }
}

/// Log of the Dirichlet-multinomial marginal `B(c + alpha) / B(alpha)`.
pub fn dirichlet_log_marginal(counts: &[f64], alphas: &[f64]) -> Result<f64> {
    if counts.len() != alphas.len() || counts.is_empty() {
        return Err(Error::DimensionMismatch(counts.len(), alphas.len()));
    }
    check_alphas(alphas)?;
    if let Some(c) = counts.iter().find(|c| !(**c >= 0.0)) {
        return Err(Error::Config(format!("negative count {c}")));
    }
    if counts.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let a0: f64 = alphas.iter().sum();
    let n: f64 = counts.iter().sum();
    let terms: f64 = counts
        .iter()
        .zip(alphas)
        .filter(|(c, _)| **c > 0.0)
        .map(|(&c, &a)| ln_gamma(c + a) - ln_gamma(a))
        .sum();
    Ok(terms + ln_gamma(a0) - ln_gamma(n + a0))
}

/// Log density of the Dirichlet distribution at `theta`.
pub fn dirichlet_log_density(theta: &[f64], alphas: &[f64]) -> Result<f64> {
    if theta.len() != alphas.len() || theta.is_empty() {
        return Err(Error::DimensionMismatch(theta.len(), alphas.len()));
    }
    check_alphas(alphas)?;
    let sum: f64 = theta.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL || theta.iter().any(|t| *t < 0.0) {
        return Err(Error::OffSimplex(sum));
    }
    let a0: f64 = alphas.iter().sum();
    let mut lp = ln_gamma(a0);
    for (&t, &a) in theta.iter().zip(alphas) {
        lp -= ln_gamma(a);
        if a != 1.0 {
            lp += (a - 1.0) * t.ln();
        }
    }
    Ok(lp)
}

/// Normalized MAP weights `max(c_i + a_i - 1, 0)`; falls back to `c_i` if all vanish.
fn map_weights(counts: &[f64], alphas: &[f64]) -> Vec<f64> {
    let num: Vec<f64> = counts
        .iter()
        .zip(alphas)
        .map(|(c, a)| (c + a - 1.0).max(0.0))
        .collect();
    let z: f64 = num.iter().sum();
    if z > 0.0 {
        return num.iter().map(|v| v / z).collect();
    }
    let n: f64 = counts.iter().sum();
    if n > 0.0 {
        counts.iter().map(|c| c / n).collect()
    } else {
        vec![1.0 / counts.len() as f64; counts.len()]
    }
}

/// Per-choice weight for a multinomial of dimension `dim`.
fn per_choice(alpha: f64, mode: AlphaMode, dim: usize) -> f64 {
    match mode {
        AlphaMode::PerChoice => alpha,
        AlphaMode::Total => alpha / dim.max(1) as f64,
    }
}

/// Dense view of one multinomial: keys, counts and prior weights.
struct Multinomial<K> {
    keys: Vec<K>,
    counts: Vec<f64>,
    alphas: Vec<f64>,
}

fn trans_multinomial(
    support: &BTreeMap<Dest, f64>,
    counts: &BTreeMap<Dest, f64>,
    n_states: usize,
    cfg: &PriorConfig,
) -> Multinomial<Dest> {
    let keys: Vec<Dest> = match cfg.scope {
        Scope::Narrow => support.keys().copied().collect(),
        Scope::Broad => (0..n_states)
            .map(Dest::State)
            .chain([Dest::Final])
            .collect(),
    };
    let a = per_choice(cfg.alpha_t, cfg.alpha_mode, keys.len());
    Multinomial {
        counts: keys
            .iter()
            .map(|k| counts.get(k).copied().unwrap_or(0.0))
            .collect(),
        alphas: vec![a; keys.len()],
        keys,
    }
}

fn emit_multinomial(
    support: &BTreeMap<usize, f64>,
    counts: &BTreeMap<usize, f64>,
    n_symbols: usize,
    means: Option<&[f64]>,
    cfg: &PriorConfig,
) -> Multinomial<usize> {
    let keys: Vec<usize> = match cfg.scope {
        Scope::Narrow => support.keys().copied().collect(),
        Scope::Broad => (0..n_symbols).collect(),
    };
    let alphas = match (cfg.scope, means) {
        (Scope::Broad, Some(m)) => {
            let total = match cfg.alpha_mode {
                AlphaMode::Total => cfg.alpha_e,
                AlphaMode::PerChoice => cfg.alpha_e * n_symbols as f64,
            };
            keys.iter().map(|&s| total * m[s]).collect()
        }
        _ => vec![per_choice(cfg.alpha_e, cfg.alpha_mode, keys.len()); keys.len()],
    };
    Multinomial {
        counts: keys
            .iter()
            .map(|k| counts.get(k).copied().unwrap_or(0.0))
            .collect(),
        alphas,
        keys,
    }
}

/// Observed symbol frequencies, used as emission prior means. Unseen symbols
/// receive a small share so every weight stays positive.
pub(crate) fn symbol_means(counts: &Counts, n_symbols: usize) -> Vec<f64> {
    let mut totals = vec![0.5; n_symbols];
    for row in &counts.emit {
        for (&s, &c) in row {
            totals[s] += c;
        }
    }
    let z: f64 = totals.iter().sum();
    totals.iter().map(|t| t / z).collect()
}

fn means_for(counts: &Counts, n_symbols: usize, cfg: &PriorConfig) -> Option<Vec<f64>> {
    (cfg.empirical_emissions && cfg.scope == Scope::Broad).then(|| symbol_means(counts, n_symbols))
}

/// Parameters at the Dirichlet MAP point. In narrow scope the support is the
/// structure of `structure`; in broad scope every target and symbol may
/// receive mass. Numerators `c + alpha - 1` below zero are clamped to zero.
pub fn map_estimates(structure: &Hmm, counts: &Counts, cfg: &PriorConfig) -> Hmm {
    let n = structure.n_states();
    let m = structure.alphabet().len();
    let means = means_for(counts, m, cfg);
    let trans_row = |src: Src| -> BTreeMap<Dest, f64> {
        let mult = trans_multinomial(structure.row(src), counts.row(src), n, cfg);
        if mult.keys.is_empty() {
            return BTreeMap::new();
        }
        let theta = map_weights(&mult.counts, &mult.alphas);
        mult.keys
            .into_iter()
            .zip(theta)
            .filter(|(_, t)| *t > 0.0)
            .map(|(k, t)| (k, t.ln()))
            .collect()
    };
    let initial = trans_row(Src::Initial);
    let trans = (0..n).map(|q| trans_row(Src::State(q))).collect();
    let emit = (0..n)
        .map(|q| {
            let mult = emit_multinomial(
                structure.emissions(q),
                &counts.emit[q],
                m,
                means.as_deref(),
                cfg,
            );
            if mult.keys.is_empty() {
                return BTreeMap::new();
            }
            let theta = map_weights(&mult.counts, &mult.alphas);
            mult.keys
                .into_iter()
                .zip(theta)
                .filter(|(_, t)| *t > 0.0)
                .map(|(k, t)| (k, t.ln()))
                .collect()
        })
        .collect();
    Hmm::from_log_tables(structure.alphabet().clone(), initial, trans, emit)
}

/// Structural log prior of a single state with `k_t` transitions and `k_e` emissions.
pub fn state_structure_log_prior(
    k_t: usize,
    k_e: usize,
    n_states: usize,
    n_symbols: usize,
    cfg: &PriorConfig,
) -> Result<f64> {
    let (kt, ke, q, s) = (k_t as f64, k_e as f64, n_states as f64, n_symbols as f64);
    Ok(match cfg.structure {
        StructurePrior::None => 0.0,
        StructurePrior::DescriptionLength => -kt * (q + 1.0).ln() - ke * (s + 1.0).ln(),
        StructurePrior::DescriptionLengthSingle => -kt * q.ln() - s.ln(),
        StructurePrior::Bernoulli { n_t, n_e } => {
            let (p_t, p_e) = bernoulli_params(n_t, n_e, n_states, n_symbols)?;
            bern(kt, q - kt, p_t) + bern(ke, s - ke, p_e)
        }
    })
}

fn bernoulli_params(n_t: f64, n_e: f64, n_states: usize, n_symbols: usize) -> Result<(f64, f64)> {
    let p_t = n_t / n_states as f64;
    let p_e = n_e / n_symbols as f64;
    for p in [p_t, p_e] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::DegenerateBernoulli(p));
        }
    }
    Ok((p_t, p_e))
}

/// `hits * ln p + misses * ln(1 - p)` with `0 * ln 0 = 0`.
fn bern(hits: f64, misses: f64, p: f64) -> f64 {
    let a = if hits == 0.0 { 0.0 } else { hits * p.ln() };
    let b = if misses == 0.0 {
        0.0
    } else {
        misses * (1.0 - p).ln()
    };
    a + b
}

/// Structural prior from global sizes: `n_trans` counts every transition
/// including those leaving the initial state, `n_emit` every emission.
pub(crate) fn global_structure_log_prior(
    n_states: usize,
    n_trans: usize,
    n_emit: usize,
    n_symbols: usize,
    cfg: &PriorConfig,
) -> f64 {
    let (q, t, e, s) = (
        n_states as f64,
        n_trans as f64,
        n_emit as f64,
        n_symbols as f64,
    );
    let base = match cfg.structure {
        StructurePrior::None => 0.0,
        StructurePrior::DescriptionLength => -t * (q + 1.0).ln() - e * (s + 1.0).ln(),
        StructurePrior::DescriptionLengthSingle => {
            // ln 0 never arises: a model with a transition has a state
            (if t == 0.0 { 0.0 } else { -t * q.ln() }) - q * s.ln()
        }
        StructurePrior::Bernoulli { n_t, n_e } => {
            match bernoulli_params(n_t, n_e, n_states, n_symbols) {
                Ok((p_t, p_e)) => bern(t, (q + 1.0) * q - t, p_t) + bern(e, q * s - e, p_e),
                Err(_) => f64::NEG_INFINITY,
            }
        }
    };
    base - cfg.global_state_prior.map_or(0.0, |c| q * c.ln())
}

/// Sum of per-state structural terms (the initial state's transitions
/// included) plus the optional `-|Q| ln C` term.
pub fn structure_log_prior(hmm: &Hmm, cfg: &PriorConfig) -> Result<f64> {
    let n = hmm.n_states();
    let m = hmm.alphabet().len();
    if let StructurePrior::Bernoulli { n_t, n_e } = cfg.structure {
        bernoulli_params(n_t, n_e, n.max(1), m.max(1))?;
    }
    Ok(global_structure_log_prior(
        n,
        hmm.n_transitions(),
        hmm.n_emissions(),
        m,
        cfg,
    ))
}

/// Marginal likelihood of the Viterbi counts with parameters integrated out,
/// together with the structure prior.
pub fn structure_log_posterior(hmm: &Hmm, counts: &Counts, cfg: &PriorConfig) -> Result<Score> {
    let n = hmm.n_states();
    let m = hmm.alphabet().len();
    let means = means_for(counts, m, cfg);
    let mut lik = 0.0;
    for (src, support) in hmm.rows() {
        let mult = trans_multinomial(support, counts.row(src), n, cfg);
        if !mult.keys.is_empty() {
            lik += dirichlet_log_marginal(&mult.counts, &mult.alphas)?;
        }
    }
    for q in 0..n {
        let mult = emit_multinomial(hmm.emissions(q), &counts.emit[q], m, means.as_deref(), cfg);
        if !mult.keys.is_empty() {
            lik += dirichlet_log_marginal(&mult.counts, &mult.alphas)?;
        }
    }
    Ok(Score::new(structure_log_prior(hmm, cfg)?, lik, cfg.lambda))
}

/// Posterior at the parameters stored in `hmm`: structure prior plus the
/// Dirichlet densities of those parameters, and the Viterbi likelihood.
pub fn joint_log_posterior(hmm: &Hmm, counts: &Counts, cfg: &PriorConfig) -> Result<Score> {
    let n = hmm.n_states();
    let m = hmm.alphabet().len();
    let means = means_for(counts, m, cfg);
    let mut prior = structure_log_prior(hmm, cfg)?;
    let mut lik = 0.0;
    for (src, support) in hmm.rows() {
        let mult = trans_multinomial(support, counts.row(src), n, cfg);
        if mult.keys.is_empty() {
            continue;
        }
        let theta: Vec<f64> = mult
            .keys
            .iter()
            .map(|d| hmm.log_trans(src, *d).exp())
            .collect();
        prior += dirichlet_log_density(&theta, &mult.alphas)?;
        lik += loglik(&mult.counts, &theta);
    }
    for q in 0..n {
        let mult = emit_multinomial(hmm.emissions(q), &counts.emit[q], m, means.as_deref(), cfg);
        if mult.keys.is_empty() {
            continue;
        }
        let theta: Vec<f64> = mult
            .keys
            .iter()
            .map(|s| hmm.log_emit(q, *s).exp())
            .collect();
        prior += dirichlet_log_density(&theta, &mult.alphas)?;
        lik += loglik(&mult.counts, &theta);
    }
    Ok(Score::new(prior, lik, cfg.lambda))
}

fn loglik(counts: &[f64], theta: &[f64]) -> f64 {
    counts
        .iter()
        .zip(theta)
        .filter(|(c, _)| **c > 0.0)
        .map(|(c, t)| c * t.ln())
        .sum()
}

/// Viterbi log-likelihood of the counts at their own ML parameters.
pub fn viterbi_log_likelihood(counts: &Counts) -> f64 {
    let row = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = vals.filter(|c| *c > 0.0).collect();
        let n: f64 = v.iter().sum();
        v.iter().map(|c| c * (c / n).ln()).sum()
    };
    counts
        .rows()
        .map(|(_, r)| row(&mut r.values().copied()))
        .chain(counts.emit.iter().map(|r| row(&mut r.values().copied())))
        .sum()
}

/// Scores a model and its counts under the configured objective at weight `lambda`.
pub fn model_score(hmm: &Hmm, counts: &Counts, cfg: &PriorConfig, lambda: f64) -> Result<Score> {
    let s = match cfg.objective {
        Objective::StructurePosterior => structure_log_posterior(hmm, counts, cfg)?,
        Objective::ViterbiLikelihood => Score::new(
            structure_log_prior(hmm, cfg)?,
            viterbi_log_likelihood(counts),
            lambda,
        ),
        Objective::Joint => {
            // broad-scope MAP parameters fill in every choice; the structure stays that of `hmm`
            let map = map_estimates(hmm, counts, cfg);
            let j = joint_log_posterior(&map, counts, cfg)?;
            let prior =
                j.log_prior - structure_log_prior(&map, cfg)? + structure_log_prior(hmm, cfg)?;
            Score::new(prior, j.log_likelihood, lambda)
        }
    };
    Ok(Score::new(s.log_prior, s.log_likelihood, lambda))
}

/// Global prior weight after `samples_seen` samples. With an effective sample
/// target the weight grows linearly, keeping `samples_seen / lambda` fixed.
pub fn lambda_schedule(samples_seen: usize, cfg: &PriorConfig) -> f64 {
    match cfg.effective_sample_target {
        Some(n_eff) => (samples_seen as f64 / n_eff).max(LAMBDA_MIN),
        None => cfg.lambda,
    }
}

/// Sparse row scoring used by the merge engine.
///
/// Each row contributes a `(prior, likelihood)` pair; the structural prior is
/// a function of global sizes and is added separately.
#[derive(Clone, Debug)]
pub(crate) struct Scorer {
    pub cfg: PriorConfig,
    pub n_symbols: usize,
    means: Option<Vec<f64>>,
}

impl Scorer {
    pub fn new(cfg: &PriorConfig, alphabet: &Alphabet, counts: &Counts) -> Self {
        Scorer {
            cfg: cfg.clone(),
            n_symbols: alphabet.len(),
            means: means_for(counts, alphabet.len(), cfg),
        }
    }

    /// Whether transition rows depend on the number of states.
    pub fn trans_depends_on_size(&self) -> bool {
        self.cfg.scope == Scope::Broad && self.cfg.objective != Objective::ViterbiLikelihood
    }

    pub fn trans_row(&self, row: &BTreeMap<Dest, f64>, n_states: usize) -> (f64, f64) {
        let present: Vec<f64> = row.values().copied().filter(|c| *c > 0.0).collect();
        let dim = match self.cfg.scope {
            Scope::Narrow => present.len(),
            // a row cannot outnumber the targets; the max only guards cached
            // look-ahead terms of rows that any merge would rewrite
            Scope::Broad => (n_states + 1).max(present.len()),
        };
        let a = per_choice(self.cfg.alpha_t, self.cfg.alpha_mode, dim);
        self.row_terms(present.iter().map(|&c| (c, a)), dim - present.len(), a)
    }

    pub fn emit_row(&self, row: &BTreeMap<usize, f64>) -> (f64, f64) {
        match (&self.means, self.cfg.scope) {
            (Some(means), Scope::Broad) => {
                let total = match self.cfg.alpha_mode {
                    AlphaMode::Total => self.cfg.alpha_e,
                    AlphaMode::PerChoice => self.cfg.alpha_e * self.n_symbols as f64,
                };
                let entries = (0..self.n_symbols)
                    .map(|s| (row.get(&s).copied().unwrap_or(0.0), total * means[s]));
                self.row_terms(entries, 0, 1.0)
            }
            _ => {
                let present: Vec<f64> = row.values().copied().filter(|c| *c > 0.0).collect();
                let dim = match self.cfg.scope {
                    Scope::Narrow => present.len(),
                    Scope::Broad => self.n_symbols,
                };
                let a = per_choice(self.cfg.alpha_e, self.cfg.alpha_mode, dim);
                self.row_terms(present.iter().map(|&c| (c, a)), dim - present.len(), a)
            }
        }
    }

    /// `entries` are `(count, alpha)` pairs; `absent` further choices have
    /// zero count and weight `absent_alpha` each.
    fn row_terms(
        &self,
        entries: impl Iterator<Item = (f64, f64)> + Clone,
        absent: usize,
        absent_alpha: f64,
    ) -> (f64, f64) {
        let n: f64 = entries.clone().map(|e| e.0).sum();
        if n == 0.0 {
            return (0.0, 0.0);
        }
        match self.cfg.objective {
            Objective::ViterbiLikelihood => {
                let lik = entries
                    .filter(|e| e.0 > 0.0)
                    .map(|(c, _)| c * (c / n).ln())
                    .sum();
                (0.0, lik)
            }
            Objective::StructurePosterior => {
                let mut a0 = absent as f64 * absent_alpha;
                let mut lik = 0.0;
                for (c, a) in entries {
                    a0 += a;
                    if c > 0.0 {
                        lik += ln_gamma(c + a) - ln_gamma(a);
                    }
                }
                (0.0, lik + ln_gamma(a0) - ln_gamma(n + a0))
            }
            Objective::Joint => {
                let absent_num = (absent_alpha - 1.0).max(0.0);
                let mut z = absent as f64 * absent_num;
                let mut a0 = absent as f64 * absent_alpha;
                for (c, a) in entries.clone() {
                    z += (c + a - 1.0).max(0.0);
                    a0 += a;
                }
                let theta = |c: f64, a: f64| -> f64 {
                    if z > 0.0 {
                        (c + a - 1.0).max(0.0) / z
                    } else {
                        c / n
                    }
                };
                let mut prior = ln_gamma(a0) - absent as f64 * ln_gamma(absent_alpha);
                if absent > 0 && absent_alpha != 1.0 {
                    prior += absent as f64 * (absent_alpha - 1.0) * theta(0.0, absent_alpha).ln();
                }
                let mut lik = 0.0;
                for (c, a) in entries {
                    let t = theta(c, a);
                    prior -= ln_gamma(a);
                    if a != 1.0 {
                        prior += (a - 1.0) * t.ln();
                    }
                    if c > 0.0 {
                        lik += c * t.ln();
                    }
                }
                (prior, lik)
            }
        }
    }

    pub fn structure(&self, n_states: usize, n_trans: usize, n_emit: usize) -> f64 {
        global_structure_log_prior(n_states, n_trans, n_emit, self.n_symbols, &self.cfg)
    }
}
