use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use expfam::catalog::{default_source, sample as sample_family, FAMILY_NAMES};
use expfam::divergences::{
    bhattacharyya_coefficient, bregman, hellinger, kl, renyi_divergence, skew_jensen, tsallis_divergence, Generator,
};
use expfam::inference::mle;
use expfam::mixtures::{
    average_log_likelihood, em_fit, mixture_kl_jensen_bound, mixture_kl_matching, mixture_kl_monte_carlo,
    mixture_kl_unscented, mixture_log_density, sample_mixture,
};
use expfam::numerics::RngSeed;
use expfam::{Family, Hyperparams, ParamVector, Space};
use serde_json::json;

mod card;
mod files;
mod validate;

use files::{
    distribution_json, family_from_name, fmt_num, load_distribution, load_mixture, mixture_json, read_observations,
    to_json, write_observations,
};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed input or arguments (exit 2).
    Parse(String),
    /// Library error, classified by kind.
    Lib(expfam::Error),
    /// Output could not be written (exit 5).
    Io(String),
    /// A validation check failed (exit 5).
    Check(String),
}

impl From<expfam::Error> for CliError {
    fn from(e: expfam::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use expfam::Error as E;
        match self {
            CliError::Parse(_) | CliError::Lib(E::InvalidArgument(_)) => 2,
            CliError::Lib(
                E::Domain { .. } | E::Support { .. } | E::Dimension { .. } | E::FamilyMismatch { .. } | E::Unsupported { .. },
            ) => 3,
            CliError::Lib(E::DegenerateData(_) | E::InsufficientData(_) | E::VanishedComponent { .. }) => 4,
            CliError::Lib(_) | CliError::Io(_) | CliError::Check(_) => 5,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Parse(m) | CliError::Io(m) | CliError::Check(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "expfam", version, about = "Exponential families: conversions, divergences, fitting and mixtures")]
struct Cli {
    /// Worker threads for parallel sections. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Fixed hyperparameters for families that have them.
#[derive(Args, Clone, Default)]
struct Hyper {
    /// Known variance (gaussian_fixed_variance).
    #[arg(long)]
    sigma2: Option<f64>,
    /// Dimension (multivariate_gaussian, isotropic_gaussian).
    #[arg(long)]
    dim: Option<usize>,
    /// Number of trials (binomial, multinomial).
    #[arg(long)]
    trials: Option<u64>,
    /// Number of categories (multinomial, dirichlet).
    #[arg(long)]
    categories: Option<usize>,
}

impl Hyper {
    fn family(&self, name: &str) -> Result<Family, CliError> {
        family_from_name(
            name,
            &Hyperparams {
                sigma2: self.sigma2,
                d: self.dim,
                n: self.trials,
                k: self.categories,
            },
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the numerical family card at a parameter point.
    Card { file: PathBuf },
    /// Convert a distribution file to another parameterization.
    Convert {
        #[arg(long)]
        to: SpaceArg,
        file: PathBuf,
    },
    /// Divergence between two distribution files of one family.
    Divergence {
        #[arg(long)]
        measure: Measure,
        /// Order for renyi, tsallis and jensen (jensen defaults to 0.5).
        #[arg(long)]
        alpha: Option<f64>,
        p: PathBuf,
        q: PathBuf,
    },
    /// Maximum-likelihood fit of a family to a CSV file.
    Fit {
        #[arg(long)]
        family: String,
        #[command(flatten)]
        hyper: Hyper,
        data: PathBuf,
    },
    /// Mixture models.
    #[command(subcommand)]
    Mixture(MixtureCommand),
    /// Draw observations from a distribution file, a mixture file or a
    /// family at its catalog default parameters.
    Sample {
        #[arg(long, conflicts_with_all = ["mixture", "family"])]
        dist: Option<PathBuf>,
        #[arg(long, conflicts_with = "family")]
        mixture: Option<PathBuf>,
        #[arg(long)]
        family: Option<String>,
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Append the component label column (mixtures only).
        #[arg(long)]
        labels: bool,
        /// Output CSV (standard output when omitted).
        out: Option<PathBuf>,
    },
    /// Check catalog invariants and print one line per check.
    Validate {
        #[arg(long, conflicts_with = "all")]
        family: Option<String>,
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        hyper: Hyper,
        /// Distribution file to check instead of the built-in points.
        params: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MixtureCommand {
    /// Fit a k-component mixture by EM.
    Fit {
        #[arg(long)]
        family: String,
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        seed: u64,
        data: PathBuf,
    },
    /// Draw observations from a mixture file.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        labels: bool,
        model: PathBuf,
        out: Option<PathBuf>,
    },
    /// Approximate KL(f || g) between two mixture files.
    Kl {
        #[arg(long)]
        method: KlMethod,
        /// Monte-Carlo draws.
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Required for the Monte-Carlo method.
        #[arg(long)]
        seed: Option<u64>,
        f: PathBuf,
        g: PathBuf,
    },
    /// Log-density of every row of a CSV file and the average.
    Eval { model: PathBuf, data: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Source,
    Natural,
    Expectation,
}

impl From<SpaceArg> for Space {
    fn from(s: SpaceArg) -> Space {
        match s {
            SpaceArg::Source => Space::Source,
            SpaceArg::Natural => Space::Natural,
            SpaceArg::Expectation => Space::Expectation,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Kl,
    Bregman,
    Renyi,
    Tsallis,
    Bhattacharyya,
    Hellinger,
    Jensen,
}

#[derive(Clone, Copy, ValueEnum)]
enum KlMethod {
    Jensen,
    Matching,
    Unscented,
    Mc,
}

fn print_line(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn require_alpha(alpha: Option<f64>) -> Result<f64, CliError> {
    alpha.ok_or_else(|| CliError::Parse("--alpha is required for this measure".into()))
}

fn write_csv(
    out: Option<&Path>,
    dim: usize,
    data: &[Vec<f64>],
    labels: Option<&[usize]>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            write_observations(BufWriter::new(file), dim, data, labels)
        }
        None => write_observations(io::stdout().lock(), dim, data, labels),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Parse("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    match cli.command {
        Command::Card { file } => {
            let p = load_distribution(&file)?;
            let text = card::render(&p, card::use_color())?;
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        Command::Convert { to, file } => {
            let p = load_distribution(&file)?;
            print_line(&to_json(&distribution_json(&p.convert(to.into())?)))?;
        }
        Command::Divergence { measure, alpha, p, q } => {
            let (p, q) = (load_distribution(&p)?, load_distribution(&q)?);
            let value = match measure {
                Measure::Kl => kl(&p, &q)?,
                Measure::Bregman => bregman(Generator::LogNormalizer, &p, &q)?,
                Measure::Renyi => renyi_divergence(require_alpha(alpha)?, &p, &q)?,
                Measure::Tsallis => tsallis_divergence(require_alpha(alpha)?, &p, &q)?,
                Measure::Bhattacharyya => bhattacharyya_coefficient(&p, &q)?,
                Measure::Hellinger => hellinger(&p, &q)?,
                Measure::Jensen => skew_jensen(alpha.unwrap_or(0.5), &p, &q)?,
            };
            print_line(&fmt_num(value))?;
        }
        Command::Fit { family, hyper, data } => {
            let fam = hyper.family(&family)?;
            let samples = read_observations(&data, fam.obs_dim())?;
            let est = mle(&fam, &samples)?;
            print_line(&to_json(&distribution_json(&est.eta.to_source()?)))?;
        }
        Command::Mixture(cmd) => run_mixture(cmd)?,
        Command::Sample {
            dist,
            mixture,
            family,
            hyper,
            n,
            seed,
            labels,
            out,
        } => {
            let seed = RngSeed(seed);
            if let Some(path) = mixture {
                let model = load_mixture(&path)?;
                let (data, lab) = sample_mixture(&model, n, seed)?;
                let lab = labels.then_some(lab.as_slice());
                write_csv(out.as_deref(), model.family().obs_dim(), &data, lab)?;
            } else {
                if labels {
                    return Err(CliError::Parse("--labels applies to mixtures only".into()));
                }
                let p = match (dist, family) {
                    (Some(path), _) => load_distribution(&path)?,
                    (None, Some(name)) => {
                        let fam = hyper.family(&name)?;
                        ParamVector::source(fam, default_source(&fam))?
                    }
                    (None, None) => return Err(CliError::Parse("one of --dist, --mixture or --family is required".into())),
                };
                let fam = p.family();
                let data = sample_family(&fam, p.to_source()?.values(), n, seed)?;
                write_csv(out.as_deref(), fam.obs_dim(), &data, None)?;
            }
        }
        Command::Validate {
            family,
            all,
            hyper,
            params,
        } => {
            let given = params.as_deref().map(load_distribution).transpose()?;
            let families: Vec<Family> = match (&given, family, all) {
                (Some(p), _, _) => vec![p.family()],
                (None, Some(name), false) => vec![hyper.family(&name)?],
                (None, None, true) => FAMILY_NAMES
                    .iter()
                    .map(|name| hyper.family(name))
                    .collect::<Result<_, _>>()?,
                _ => return Err(CliError::Parse("give --family, --all or a parameter file".into())),
            };
            let mut failed = 0;
            let mut out = io::stdout().lock();
            for fam in &families {
                for check in validate::run(fam, given.as_ref())? {
                    if !check.passed() {
                        failed += 1;
                    }
                    writeln!(out, "{}", check.line())?;
                }
            }
            out.flush()?;
            if failed > 0 {
                return Err(CliError::Check(format!("{failed} check(s) failed")));
            }
        }
    }
    Ok(())
}

fn run_mixture(cmd: MixtureCommand) -> Result<(), CliError> {
    match cmd {
        MixtureCommand::Fit {
            family,
            hyper,
            k,
            iters,
            tol,
            seed,
            data,
        } => {
            let fam = hyper.family(&family)?;
            let samples = read_observations(&data, fam.obs_dim())?;
            let (model, trace) = em_fit(&fam, &samples, k, iters, tol, RngSeed(seed))?;
            eprintln!(
                "em: {} iteration(s), converged: {}, average log-likelihood {}",
                trace.iterations_run,
                trace.converged,
                fmt_num(*trace.avg_log_likelihood.last().expect("trace is never empty"))
            );
            print_line(&to_json(&mixture_json(&model)?))?;
        }
        MixtureCommand::Sample {
            n,
            seed,
            labels,
            model,
            out,
        } => {
            let model = load_mixture(&model)?;
            let (data, lab) = sample_mixture(&model, n, RngSeed(seed))?;
            write_csv(out.as_deref(), model.family().obs_dim(), &data, labels.then_some(lab.as_slice()))?;
        }
        MixtureCommand::Kl { method, n, seed, f, g } => {
            let (f, g) = (load_mixture(&f)?, load_mixture(&g)?);
            match method {
                KlMethod::Jensen => print_line(&fmt_num(mixture_kl_jensen_bound(&f, &g)?))?,
                KlMethod::Matching => print_line(&fmt_num(mixture_kl_matching(&f, &g)?))?,
                KlMethod::Unscented => print_line(&fmt_num(mixture_kl_unscented(&f, &g)?))?,
                KlMethod::Mc => {
                    let seed = seed.ok_or_else(|| CliError::Parse("--seed is required for --method mc".into()))?;
                    let est = mixture_kl_monte_carlo(&f, &g, n, RngSeed(seed))?;
                    print_line(&to_json(&json!({"kl": est.mean, "std_error": est.std_error})))?;
                }
            }
        }
        MixtureCommand::Eval { model, data } => {
            let model = load_mixture(&model)?;
            let samples = read_observations(&data, model.family().obs_dim())?;
            let avg = average_log_likelihood(&model, &samples)?;
            let per_row = samples
                .iter()
                .map(|x| mixture_log_density(&model, x))
                .collect::<Result<Vec<_>, _>>()?;
            print_line(&to_json(&json!({"avg_log_likelihood": avg, "log_density": per_row})))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
