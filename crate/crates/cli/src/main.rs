mod commands;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tspm_core::config::OptConfig;

#[derive(Parser, Debug)]
#[command(name = "tspm", version, about = "Positivity of linear maps under tensor powers")]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunConfig {
    /// Base seed; restart i uses seed + i.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    restarts: u64,
    #[arg(long, global = true, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    max_iter: u64,
    #[arg(long, global = true, default_value_t = 1e-10, value_parser = positive_real)]
    tol: f64,
    /// Largest matrix side an optimizer may build.
    #[arg(long, global = true, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    size_cap: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    output: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl RunConfig {
    fn opt(&self) -> OptConfig {
        OptConfig {
            seed: self.seed,
            restarts: self.restarts as usize,
            max_iter: self.max_iter as usize,
            tol: self.tol,
            size_cap: self.size_cap as usize,
        }
    }
}

fn positive_real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s}")),
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum BoundKind {
    Transpose,
    General,
    Left,
    ScRate,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Protocol {
    Werner,
    Isotropic,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum SideArg {
    In,
    Out,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the unextendible-product-basis operator P.
    Upb {
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Minimal product-vector overlap of an operator.
    Mu {
        #[arg(long)]
        operator: String,
        /// Number of leading tensor factors on the left of the split.
        #[arg(long, default_value_t = 1)]
        split: usize,
    },
    /// Build the n-tensor-stable positive witness map with Choi P - eps 1.
    Witness {
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        n: u32,
        /// `auto` or a number.
        #[arg(long, default_value = "auto", allow_hyphen_values = true)]
        eps: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Search for a product vector refuting positivity of m^{⊗n}.
    VerifyNts {
        #[arg(long)]
        map: String,
        #[arg(long)]
        n: u32,
    },
    /// Distance d_CP of a map from the completely positive cone.
    Dcp {
        #[arg(long)]
        map: String,
    },
    /// Certified diamond-norm interval.
    Dnorm {
        #[arg(long)]
        map: String,
    },
    /// Quantum capacity upper bounds.
    Capacity {
        #[arg(long)]
        channel: String,
        #[arg(long, value_enum)]
        bound: BoundKind,
        #[arg(long)]
        pmap: Option<String>,
    },
    /// Error floors of two-way schemes.
    TwoWay {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        m: u32,
        /// Output dimension N of the scheme.
        #[arg(long = "N", conflicts_with = "rate", required_unless_present = "rate")]
        n_dim: Option<f64>,
        /// Rate in bits per use.
        #[arg(long, allow_hyphen_values = true)]
        rate: Option<f64>,
    },
    /// Filter a Choi matrix to a Werner or isotropic state.
    Distill {
        #[arg(long)]
        map: String,
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long, value_enum, default_value_t = SideArg::Out)]
        side: SideArg,
    },
    /// Iterates of the recurrence recursion.
    Recurrence {
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        levels: usize,
    },
    /// One-parameter candidate family, directly or from a map.
    Family {
        #[arg(long, required_unless_present = "from_map", requires = "d", allow_hyphen_values = true)]
        p: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, conflicts_with_all = ["p", "d"])]
        from_map: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Closed-form twirls, optionally compared against Monte-Carlo averages.
    Twirl {
        #[arg(long)]
        check: bool,
        /// Local dimension d of the d ⊗ d input; a seeded random Hermitian
        /// operator is used when no operator file is given.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        operator: Option<String>,
    },
    /// Minimal output eigenvalue, or its multiplicativity with a second map.
    Lmin {
        #[arg(long)]
        map: String,
        #[arg(long)]
        tensor: Option<String>,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("TSPM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("TSPM_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot build thread pool: {e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match commands::run(&cli.command, &cli.run.opt(), cli.run.output) {
        Ok(outcome) => ExitCode::from(outcome),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
