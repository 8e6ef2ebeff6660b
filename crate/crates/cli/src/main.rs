mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Numerics, RunConfig};

const EXIT_CONFIG: u8 = 64;

#[derive(Parser)]
#[command(name = "bundle-lab", version, about = "Weighted Hardy space bundles: frames, Riesz bounds, decompositions and similarity verdicts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Growth class of a weight sequence, optionally equivalence with a second one
    WeightsClassify(Flags),
    /// Gram matrix of a truncated frame and its extremal eigenvalues
    Gram(Flags),
    /// Riesz bounds of a frame with a stability check under doubling
    Riesz(Flags),
    /// Fredholm index over a grid, as JSON and SVG
    IndexMap(Flags),
    /// Maximal factorization f = h∘B
    Decompose(Flags),
    /// Jordan decomposition of the bundle of f(S_β) with its certificate
    Jordan(Flags),
    /// Similarity verdict for two functions (exit 0 similar, 1 not, 2 inconclusive)
    Similar(Flags),
    /// Compare the doubled bundles with the single ones
    Kaplansky(Flags),
    /// Intertwiner X with M_B X = X(⊕M_z)
    Douglas(Flags),
    /// Column-norm profile and condition ladder of a Möbius frame
    Counterexample(Flags),
    /// Run the full invariant suite
    Verify(Flags),
    /// Run the command named in the config file
    Run(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// TOML run configuration; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for result.json and other artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// Weight preset, e.g. `bergman:alpha=1`
    #[arg(long)]
    weights: Option<String>,
    /// Second weight preset (weights-classify)
    #[arg(long)]
    weights2: Option<String>,
    /// Function expression, e.g. `poly(2,1,1)`
    #[arg(long = "fn", allow_hyphen_values = true)]
    function: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    f1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    f2: Option<String>,
    /// Blaschke product, e.g. `blaschke(0;0,0.5)`
    #[arg(long, allow_hyphen_values = true)]
    blaschke: Option<String>,
    /// Truncation order
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Grid resolution (index-map)
    #[arg(long = "res")]
    resolution: Option<usize>,
    /// `x_min,x_max,y_min,y_max`
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
    /// Möbius parameter (counterexample)
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long)]
    probe_limit: Option<usize>,
    /// Base point `re,im` for monodromy
    #[arg(long, allow_hyphen_values = true)]
    omega0: Option<String>,
    /// raw, beta or inverse-beta (gram)
    #[arg(long)]
    normalization: Option<String>,
    /// Relative change allowed under doubling (riesz)
    #[arg(long)]
    tol: Option<f64>,
    /// Also write matrices and profiles as CSV
    #[arg(long)]
    csv: bool,
}

fn floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N], ConfigError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ConfigError(format!("{what}: `{s}` is not a list of numbers")))?;
    v.try_into().map_err(|_| ConfigError(format!("{what}: expected {N} comma-separated numbers, got `{s}`")))
}

impl Flags {
    fn to_config(&self) -> Result<RunConfig, ConfigError> {
        Ok(RunConfig {
            command: None,
            out: self.out.clone(),
            weights: self.weights.clone(),
            weights2: self.weights2.clone(),
            function: self.function.clone(),
            f1: self.f1.clone(),
            f2: self.f2.clone(),
            blaschke: self.blaschke.clone(),
            csv: self.csv.then_some(true),
            numerics: Numerics {
                k: self.k,
                n_max: self.n_max,
                resolution: self.resolution,
                bounds: self.bounds.as_deref().map(|s| floats::<4>(s, "--bounds")).transpose()?,
                t: self.t,
                probe_limit: self.probe_limit,
                omega0: self.omega0.as_deref().map(|s| floats::<2>(s, "--omega0")).transpose()?,
                normalization: self.normalization.clone(),
                tol: self.tol,
            },
        })
    }
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("BUNDLE_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("BUNDLE_LAB_THREADS=`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(format!("thread pool: {e}")))
}

fn prepare(command: Command) -> Result<RunConfig, ConfigError> {
    let (name, flags) = match command {
        Command::WeightsClassify(f) => ("weights-classify", f),
        Command::Gram(f) => ("gram", f),
        Command::Riesz(f) => ("riesz", f),
        Command::IndexMap(f) => ("index-map", f),
        Command::Decompose(f) => ("decompose", f),
        Command::Jordan(f) => ("jordan", f),
        Command::Similar(f) => ("similar", f),
        Command::Kaplansky(f) => ("kaplansky", f),
        Command::Douglas(f) => ("douglas", f),
        Command::Counterexample(f) => ("counterexample", f),
        Command::Verify(f) => ("verify", f),
        Command::Run(f) => ("", f),
    };
    let base = match &flags.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = base.overlay(&flags.to_config()?);
    let name = if name.is_empty() {
        cfg.command
            .clone()
            .ok_or_else(|| ConfigError("`run` needs a config with a `command` key".into()))?
    } else {
        name.to_string()
    };
    cfg.resolve(&name)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = match configure_threads().and_then(|_| prepare(cli.command)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("bundle-lab: config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    ExitCode::from(run::run(&cfg))
}
