use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hmm_merge::baum_welch::{bw_experiment, BwConfig, BwRun, McConfig, StateCount};
use hmm_merge::casestudy::{self, Case};
use hmm_merge::corpus::display_sample;
use hmm_merge::eval::words::{synthetic_lexicon, word_benchmark, LexiconConfig, Method};
use hmm_merge::eval::{
    cross_parse, fit_mixture, max_len_guard, same_language, Bigram, MixtureConfig, ReportRow,
};
use hmm_merge::hmm::{parse_hmm, to_dot, write_hmm, DEFAULT_MAX_LEN};
use hmm_merge::merging::{
    batch_merge, build_initial_model, online_merge, MergeResult, SearchConfig,
};
use hmm_merge::priors::{AlphaMode, Objective, PriorConfig, Scope, StructurePrior};
use hmm_merge::{Corpus, Error, Hmm};

/// Induce, train and evaluate discrete hidden Markov models.
#[derive(Parser)]
#[command(name = "hmm-merge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Induce a model from a corpus by state merging.
    Induce(InduceArgs),
    /// Train fully connected models with Baum-Welch and report every restart.
    Bw(BwArgs),
    /// Score models on a test corpus and cross-parse them against a target.
    Eval(EvalArgs),
    /// Draw strings from a model.
    Sample(SampleArgs),
    /// Run one of the built-in experiments.
    Casestudy(CaseArgs),
    /// Convert a model file to Graphviz DOT.
    Dot(DotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorKind {
    Bernoulli,
    Dl,
    DlSingle,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Narrow,
    Broad,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Posterior,
    Viterbi,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Online,
    Batch,
}

#[derive(Args)]
struct PriorArgs {
    /// Global weight of the prior; ignored while an effective sample size is targeted.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Effective sample size the prior weight is scheduled to keep.
    #[arg(long, default_value_t = 50.0)]
    neff: f64,
    /// Use the fixed --lambda instead of the effective sample schedule.
    #[arg(long)]
    no_neff: bool,
    #[arg(long, default_value_t = 1.0)]
    alpha_t: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_e: f64,
    /// Read --alpha-t/--alpha-e as the weight of each choice rather than the total.
    #[arg(long)]
    alpha_per_choice: bool,
    #[arg(long, value_enum, default_value = "dl")]
    prior: PriorKind,
    /// Expected transitions per state for the Bernoulli prior.
    #[arg(long, default_value_t = 2.0)]
    bernoulli_nt: f64,
    /// Expected emissions per state for the Bernoulli prior.
    #[arg(long, default_value_t = 1.0)]
    bernoulli_ne: f64,
    #[arg(long, value_enum, default_value = "narrow")]
    scope: ScopeArg,
    #[arg(long, value_enum, default_value = "posterior")]
    objective: ObjectiveArg,
    /// Extra per-state penalty constant C (at least 1).
    #[arg(long)]
    state_prior: Option<f64>,
    /// Broad scope: center emission priors on observed symbol frequencies.
    #[arg(long)]
    empirical_emissions: bool,
}

impl PriorArgs {
    fn config(&self) -> PriorConfig {
        PriorConfig {
            alpha_t: self.alpha_t,
            alpha_e: self.alpha_e,
            alpha_mode: if self.alpha_per_choice {
                AlphaMode::PerChoice
            } else {
                AlphaMode::Total
            },
            scope: match self.scope {
                ScopeArg::Narrow => Scope::Narrow,
                ScopeArg::Broad => Scope::Broad,
            },
            structure: match self.prior {
                PriorKind::Bernoulli => StructurePrior::Bernoulli {
                    n_t: self.bernoulli_nt,
                    n_e: self.bernoulli_ne,
                },
                PriorKind::Dl => StructurePrior::DescriptionLength,
                PriorKind::DlSingle => StructurePrior::DescriptionLengthSingle,
                PriorKind::None => StructurePrior::None,
            },
            lambda: self.lambda,
            effective_sample_target: (!self.no_neff).then_some(self.neff),
            global_state_prior: self.state_prior,
            empirical_emissions: self.empirical_emissions,
            objective: match self.objective {
                ObjectiveArg::Posterior => Objective::StructurePosterior,
                ObjectiveArg::Viterbi => Objective::ViterbiLikelihood,
                ObjectiveArg::Joint => Objective::Joint,
            },
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Incorporate samples incrementally, or all at once.
    #[arg(long, value_enum, default_value = "online")]
    mode: Mode,
    /// Non-improving merges tolerated before stopping.
    #[arg(long, default_value_t = 5)]
    lookahead: usize,
    /// Beam width; 1 is best-first.
    #[arg(long, default_value_t = 1)]
    beam: usize,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    /// Samples incorporated before the first on-line merge.
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    /// Skip the phase that only merges states with identical emissions.
    #[arg(long)]
    no_same_emission: bool,
    #[arg(long)]
    single_output: bool,
    #[arg(long)]
    forbid_loops: bool,
    /// With --forbid-loops, still allow self-loops.
    #[arg(long)]
    allow_self_loops: bool,
    /// Reparse all samples after this many merges.
    #[arg(long)]
    reparse_every: Option<usize>,
    /// Decay factor applied to old counts when samples arrive.
    #[arg(long)]
    decay: Option<f64>,
    /// Check every incremental score against a full recomputation.
    #[arg(long)]
    audit: bool,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            lookahead: self.lookahead,
            beam_width: self.beam,
            batch_size: self.batch_size,
            warmup: self.warmup,
            same_emission_phase: !self.no_same_emission,
            forbid_loops: self.forbid_loops,
            allow_self_loops: self.allow_self_loops,
            single_output: self.single_output,
            reparse_interval: self.reparse_every,
            count_decay: self.decay,
            audit_scoring: self.audit,
        }
    }
}

#[derive(Args)]
struct InduceArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Model output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct BwArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(
        long,
        conflicts_with = "states_multiplier",
        required_unless_present = "states_multiplier"
    )]
    states: Option<usize>,
    /// States per symbol of the longest sample, rounded up.
    #[arg(long)]
    states_multiplier: Option<f64>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    prune_threshold: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Target model to cross-parse each pruned result against.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    mc: usize,
    /// Pruned model of the restart with the best training likelihood.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "model", alias = "induced", required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    mc: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Length cap for Monte-Carlo draws.
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_len: usize,
    /// Score each model inside a mixture with a smoothed bigram.
    #[arg(long, requires_all = ["train", "heldout"])]
    mixture: bool,
    /// Samples the structures were induced from.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Further training samples used only to fit the mixture.
    #[arg(long)]
    heldout: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_len: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseName {
    Case1,
    Case2,
    Fig3,
    Words,
}

#[derive(Args)]
struct CaseArgs {
    #[arg(value_enum)]
    name: CaseName,
    /// Train on this many random target strings instead of the minimal sample.
    #[arg(long)]
    random: Option<usize>,
    /// Also merge at each of these fixed prior weights.
    #[arg(long, value_delimiter = ',')]
    lambda_sweep: Option<Vec<f64>>,
    /// Also run Baum-Welch restarts.
    #[arg(long)]
    bw: bool,
    /// Baum-Welch model size; the target's size when absent.
    #[arg(long)]
    states: Option<usize>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    mc: usize,
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct DotArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Invalid combination of command-line values.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// 1 for bad input, 2 for bad configuration, 3 for failures while running.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::UnknownSymbol(_)
                | Error::InvalidSymbol(_)
                | Error::Format { .. }
                | Error::EmptyCorpus
                | Error::UnparseableSample(_) => 1,
                Error::Config(_)
                | Error::NonPositiveAlpha(_)
                | Error::DegenerateBernoulli(_)
                | Error::DimensionMismatch(..)
                | Error::OffSimplex(_)
                | Error::InvalidPair(..) => 2,
                Error::ZeroProbabilitySample(_)
                | Error::MaxLengthExceeded(_)
                | Error::EmptyModel => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Induce(a) => induce(a),
        Command::Bw(a) => bw(a),
        Command::Eval(a) => eval(a),
        Command::Sample(a) => sample(a),
        Command::Casestudy(a) => casestudy(a),
        Command::Dot(a) => dot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read corpus {}", path.display()))?;
    Corpus::parse(&text).with_context(|| format!("malformed corpus {}", path.display()))
}

fn read_model(path: &Path) -> Result<Hmm> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read model {}", path.display()))?;
    parse_hmm(&text).with_context(|| format!("malformed model {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes the model to `out`, or to standard output.
fn emit_model(hmm: &Hmm, out: Option<&Path>, dot: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_file(p, &write_hmm(hmm))?,
        None => print!("{}", write_hmm(hmm)),
    }
    if let Some(p) = dot {
        write_file(p, &to_dot(hmm))?;
    }
    Ok(())
}

fn induce(a: InduceArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus)
            .with_context(|| format!("nothing to induce from in {}", a.corpus.display()));
    }
    let cfg = a.prior.config();
    let search = a.search.config();
    let result = match a.search.mode {
        Mode::Online => online_merge(&corpus, &cfg, &search)?,
        Mode::Batch => batch_merge(&corpus, &cfg, &search)?,
    };
    let hmm = result.state.hmm();
    emit_model(&hmm, a.out.as_deref(), a.dot.as_deref())?;
    if let Some(p) = &a.trace {
        write_file(p, &result.trace.to_text())?;
    }
    let summary = summary(&hmm, &result);
    if a.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

fn summary(hmm: &Hmm, result: &MergeResult) -> String {
    let score = result.state.score();
    let mut s = format!(
        "states {}\ntransitions {}\nemissions {}\nmerges {}\nobjective {:.9}\nlog_prior {:.9}\nlog_likelihood {:.9}\nlambda {}\n",
        hmm.n_states(),
        hmm.n_transitions(),
        hmm.n_emissions(),
        result.trace.steps.len(),
        score.objective,
        score.log_prior,
        score.log_likelihood,
        score.lambda,
    );
    if result.trace.audited > 0 {
        s += &format!(
            "audited {} max_error {:e}\n",
            result.trace.audited, result.trace.max_audit_error
        );
    }
    s
}

fn bw(a: BwArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let test = a.test.as_deref().map(read_corpus).transpose()?;
    let target = a.target.as_deref().map(read_model).transpose()?;
    let n_states = match (a.states, a.states_multiplier) {
        (Some(n), _) => StateCount::Fixed(n),
        (None, Some(f)) => StateCount::PerMaxLength(f),
        (None, None) => unreachable!("clap requires one of the size flags"),
    };
    let cfg = BwConfig {
        n_states,
        max_iters: a.max_iters,
        tol: a.tol,
        restarts: a.restarts,
        seed: a.seed,
        prune_threshold: a.prune_threshold,
    };
    let mc = McConfig {
        n: a.mc,
        seed: a.seed,
        max_len: max_len_guard(&corpus),
    };
    let runs = bw_experiment(target.as_ref(), &corpus, test.as_ref(), &cfg, mc)?;
    println!("{}", BwRun::CSV_HEADER);
    for r in &runs {
        println!("{}", r.csv_row());
    }
    let best = runs
        .iter()
        .max_by(|x, y| x.train_ll.total_cmp(&y.train_ll))
        .expect("at least one restart");
    if let Some(p) = &a.out {
        write_file(p, &write_hmm(&best.pruned))?;
    }
    if let Some(p) = &a.dot {
        write_file(p, &to_dot(&best.pruned))?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let models: Vec<(String, Hmm)> = a
        .models
        .iter()
        .map(|p| Ok((p.display().to_string(), read_model(p)?)))
        .collect::<Result<_>>()?;
    let test = a.test.as_deref().map(read_corpus).transpose()?;
    let target = a.target.as_deref().map(read_model).transpose()?;
    let target = target.as_ref().map(|t| (t, a.mc, a.seed, a.max_len));
    if !a.mixture {
        if test.is_none() && target.is_none() {
            return Err(
                ConfigError("nothing to evaluate: give --test and/or --target".into()).into(),
            );
        }
        println!("{}", ReportRow::CSV_HEADER);
        for (id, hmm) in &models {
            let row = ReportRow::evaluate(id, hmm, hmm, test.as_ref(), target)
                .with_context(|| format!("evaluating {id}"))?;
            println!("{}", row.csv_row());
        }
        return Ok(());
    }
    let train = read_corpus(a.train.as_deref().expect("clap requires --train"))?;
    let heldout = read_corpus(a.heldout.as_deref().expect("clap requires --heldout"))?;
    let mut full = train.clone();
    full.extend(&heldout);
    let scored = test.as_ref().unwrap_or(&heldout);
    let mut alphabet = full.alphabet().union(&scored.alphabet());
    for (_, m) in &models {
        alphabet = alphabet.union(m.alphabet());
    }
    let backoff = Bigram::fit(&full, &alphabet);
    println!("{},weight", ReportRow::CSV_HEADER);
    for (id, hmm) in &models {
        let fit = fit_mixture(hmm, &backoff, &full, &MixtureConfig::default())
            .with_context(|| format!("fitting mixture for {id}"))?;
        let row = ReportRow::evaluate(id, hmm, &fit.model, Some(scored), target)
            .with_context(|| format!("evaluating {id}"))?;
        println!("{},{:.6}", row.csv_row(), fit.model.weight());
    }
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    let hmm = read_model(&a.model)?;
    let corpus = hmm.sample_corpus(a.n, a.seed, a.max_len)?;
    let mut out = std::io::stdout().lock();
    for x in corpus.iter() {
        writeln!(out, "{}", display_sample(x))?;
    }
    Ok(())
}

fn casestudy(a: CaseArgs) -> Result<()> {
    let case = match a.name {
        CaseName::Fig3 => return fig3(),
        CaseName::Words => return words(&a),
        CaseName::Case1 => Case::One,
        CaseName::Case2 => Case::Two,
    };
    let target = case.target();
    let corpus = match a.random {
        Some(n) => casestudy::random_sample(&target, n, a.seed)?,
        None => case.minimal_sample(),
    };
    let guard = max_len_guard(&corpus);
    let (cfg, mut search) = casestudy::standard_config();
    search.audit_scoring = a.audit;
    let result = online_merge(&corpus, &cfg, &search)?;
    let hmm = result.state.hmm();
    let report = cross_parse(&hmm, &target, a.mc, a.seed, guard)?;
    println!("training strings {}", corpus.len());
    println!(
        "merged states {} transitions {} emissions {} samples_in {}/{} samples_out {}/{} language_equal {}",
        hmm.n_states(),
        hmm.n_transitions(),
        hmm.n_emissions(),
        report.samples_in,
        report.n,
        report.samples_out,
        report.n,
        report.is_perfect()
    );
    if a.audit {
        println!(
            "audited {} candidates, max error {:e}",
            result.trace.audited, result.trace.max_audit_error
        );
    }
    if let Some(p) = &a.out {
        write_file(p, &write_hmm(&hmm))?;
    }
    if let Some(p) = &a.dot {
        write_file(p, &to_dot(&hmm))?;
    }
    if let Some(lambdas) = &a.lambda_sweep {
        let exact = build_initial_model(&corpus, &cfg)?.hmm();
        println!("lambda,states,samples_in,samples_out,language_equal,training_set_only");
        for p in casestudy::lambda_sweep(&corpus, &target, lambdas, a.mc, a.seed)? {
            println!(
                "{},{},{},{},{},{}",
                p.lambda,
                p.model.n_states(),
                p.report.samples_in,
                p.report.samples_out,
                p.report.is_perfect(),
                same_language(&p.model, &exact)
            );
        }
    }
    if a.bw {
        let cfg = BwConfig {
            n_states: StateCount::Fixed(a.states.unwrap_or(target.n_states())),
            restarts: a.restarts,
            seed: a.seed,
            ..BwConfig::default()
        };
        let mc = McConfig {
            n: a.mc,
            seed: a.seed,
            max_len: guard,
        };
        let runs = bw_experiment(Some(&target), &corpus, None, &cfg, mc)?;
        println!("{},language_equal", BwRun::CSV_HEADER);
        for r in &runs {
            let ok = r.cross_parse.is_some_and(|c| c.is_perfect());
            println!("{},{}", r.csv_row(), ok);
        }
        let ok = runs
            .iter()
            .filter(|r| r.cross_parse.is_some_and(|c| c.is_perfect()))
            .count();
        println!("baum-welch successes {ok}/{}", runs.len());
    }
    Ok(())
}

fn fig3() -> Result<()> {
    println!("model,merge,states,log10_likelihood");
    for (i, s) in casestudy::fig3_walkthrough()?.iter().enumerate() {
        let pair = s.pair.map(|(a, b)| format!("{a}+{b}")).unwrap_or_default();
        println!("M{i},{pair},{},{:.3}", s.states, s.log10_likelihood);
    }
    Ok(())
}

fn words(a: &CaseArgs) -> Result<()> {
    let lexicon = LexiconConfig {
        seed: a.seed,
        ..LexiconConfig::default()
    };
    let words = synthetic_lexicon(&lexicon)?;
    println!("{}", ReportRow::CSV_HEADER);
    for row in word_benchmark(&words, &Method::standard_set(), a.seed)? {
        println!("{}", row.csv_row());
    }
    Ok(())
}

fn dot(a: DotArgs) -> Result<()> {
    let hmm = read_model(&a.model)?;
    match &a.out {
        Some(p) => write_file(p, &to_dot(&hmm)),
        None => {
            print!("{}", to_dot(&hmm));
            Ok(())
        }
    }
}
