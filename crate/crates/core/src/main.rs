use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optdual::container;
use optdual::experiment::{self, ExperimentKind, ExperimentSpec};
use optdual::sensing::Sparsity;

#[derive(Parser)]
#[command(name = "optdual", version, about = "Sparse recovery with optimal dual frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded batch of recovery trials.
    Run(RunArgs),
    /// Print the fully-resolved experiment config as TOML.
    Config(RunArgs),
    /// Write an experiment's dictionary as a binary container and CSV.
    Dictionary {
        #[arg(long, default_value = "gabor")]
        experiment: ExperimentKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// gabor, spike_fourier or custom.
    #[arg(long, default_value = "gabor")]
    experiment: ExperimentKind,
    /// TOML file; unspecified keys come from the experiment preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    oversampling: Option<usize>,
    #[arg(long)]
    window_std: Option<f64>,
    /// Total count ("7") or per-block counts ("4+4").
    #[arg(long)]
    sparsity: Option<Sparsity>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    n_inner: Option<usize>,
    #[arg(long)]
    n_outer: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_spec(kind: ExperimentKind, config: Option<&PathBuf>) -> Result<ExperimentSpec, String> {
    match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentSpec::from_toml(&text, kind).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => Ok(ExperimentSpec::preset(kind)),
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentSpec, String> {
        let mut spec = load_spec(self.experiment, self.config.as_ref())?;
        if self.config.is_some() && spec.kind != self.experiment {
            log::info!("config selects {:?}", spec.kind);
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { spec.$($field).+ = v.clone(); })*
            };
        }
        set!(
            trials => trials, seed => seed, m => m, n => n, oversampling => oversampling,
            window_std => window_std, sparsity => sparsity, eps => eps,
            lambda => solver.lambda, mu => solver.mu, tol => solver.tol,
            n_inner => solver.n_inner, n_outer => solver.n_outer,
        );
        if let Some(out) = &self.out {
            spec.out = Some(out.clone());
        }
        Ok(spec)
    }
}

fn run(args: &RunArgs) -> Result<bool, String> {
    let spec = args.resolve()?;
    let output = experiment::run_experiment(&spec).map_err(|e| e.to_string())?;
    let s = &output.summary;
    println!(
        "{:?}: coherence {:.4}, {}/{} trials completed, {} synthesis runs converged",
        spec.kind, output.coherence, s.completed, s.trials, s.synthesis_converged
    );
    for (name, q) in &s.metrics {
        println!("  {name:<28} median {:.4e}  IQR [{:.4e}, {:.4e}]", q.median, q.q1, q.q3);
    }
    if let Some(dir) = &spec.out {
        println!("wrote {}", dir.display());
    }
    Ok(output.all_completed())
}

fn export_dictionary(kind: ExperimentKind, config: Option<&PathBuf>, out: &PathBuf) -> Result<(), String> {
    let spec = load_spec(kind, config)?;
    let dict = spec.build_dictionary().map_err(|e| e.to_string())?;
    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    container::write_dictionary(&out.join("dictionary.bin"), &dict).map_err(|e| e.to_string())?;
    container::write_matrix_csv(&out.join("dictionary.csv"), dict.atoms()).map_err(|e| e.to_string())?;
    println!("{} x {} dictionary written to {}", dict.n(), dict.d(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Config(args) => args.resolve().map(|spec| {
            print!("{}", spec.to_toml());
            true
        }),
        Command::Dictionary { experiment, config, out } => export_dictionary(*experiment, config.as_ref(), out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some trials failed; see trials.json");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
