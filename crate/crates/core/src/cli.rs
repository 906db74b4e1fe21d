//! Command-line front end. Every command produces a [`ReportDocument`]; the
//! binary prints it as text or JSON and exits with the document's status code
//! (0 exact/pass, 1 approximate/fail) or 2 on usage and validation errors.

use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analyzer::{analyze, suggest_input_sizes};
use crate::config::{builtin, builtins, ArchitectureConfig};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupKind};
use crate::layers::WeightInit;
use crate::metrics::{commutation_grid, invariance_sweep, profile_equivariance, sweep_angles, Symmetry};
use crate::report::{BuiltinSummary, Payload, ReportDocument, Status};

/// Tolerance for real-valued (non-integer) measurements.
pub const REAL_TOLERANCE: f64 = 1e-9;

pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "equicheck", version, about = "Exact-equivariance analysis for p4/p4m group convolutional networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write the structured report to this path as well.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Path to a JSON architecture config, or the name of a built-in.
    pub config: String,

    /// Override the config's input size.
    #[arg(long)]
    pub input_size: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace sizes and check every strided layer for exactness.
    Analyze(ConfigArgs),
    /// List input sizes in [lo, hi] that make the network exact.
    Suggest {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        lo: usize,
        #[arg(long)]
        hi: usize,
    },
    /// Brute-force the index commutation over a grid of (i, k, s).
    Oracle {
        /// Input sizes, `lo..hi` (inclusive) or a single value.
        #[arg(long = "i", default_value = "2..24")]
        i_range: String,
        #[arg(long = "k", default_value = "1..5")]
        k_range: String,
        #[arg(long = "s", default_value = "1..4")]
        s_range: String,
        #[arg(long, default_value = "rot")]
        symmetry: String,
    },
    /// Per-depth equivariance error with random weights.
    Measure {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds to run, starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Draw weights and inputs from {-4..4} so results are exact.
        #[arg(long)]
        integer_weights: bool,
        /// Comma-separated elements, e.g. r,r2,r3,m. Defaults to every
        /// non-identity element of the network's group.
        #[arg(long)]
        elements: Option<String>,
    },
    /// Output discrepancy under bilinear rotations of a circle-cropped input.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 15.0)]
        angle_step: f64,
        #[arg(long)]
        integer_weights: bool,
    },
    /// List the built-in architectures.
    ListBuiltins,
}

/// Loads a config from a file, falling back to built-in names.
pub fn load_config(source: &str) -> Result<ArchitectureConfig> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{source}: {e}")))?;
        return ArchitectureConfig::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{source}: {msg}")),
            other => other,
        });
    }
    let name = source.strip_prefix("builtin:").unwrap_or(source);
    builtin(name).ok_or_else(|| {
        Error::Config(format!(
            "'{source}' is neither a readable config file nor a built-in ({})",
            crate::config::BUILTIN_NAMES.join(", ")
        ))
    })
}

fn resolve(args: &ConfigArgs) -> Result<ArchitectureConfig> {
    let cfg = load_config(&args.config)?;
    let cfg = match args.input_size {
        Some(side) => cfg.with_input_size(side),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_range(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("invalid range '{text}' (expected lo..hi or a single value)"));
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    match text.split_once("..") {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi.trim_start_matches('='))?)),
        None => {
            let v = parse(text)?;
            Ok((v, v))
        }
    }
}

pub fn parse_elements(text: &str) -> Result<Vec<GroupElement>> {
    let els = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if els.is_empty() {
        return Err(Error::Config("no group elements given".into()));
    }
    Ok(els)
}

/// Every non-identity element relevant to a network over `kind`.
pub fn default_elements(kind: GroupKind) -> Vec<GroupElement> {
    let pool = match kind {
        GroupKind::P4m => GroupKind::P4m,
        _ => GroupKind::P4,
    };
    pool.elements().into_iter().filter(|g| !g.is_identity()).collect()
}

fn with_config(mut doc: ReportDocument, cfg: &ArchitectureConfig) -> ReportDocument {
    doc.config_name = Some(cfg.name.clone());
    doc.config_digest = Some(cfg.digest());
    doc
}

/// Runs one parsed command.
pub fn execute(command: &Command, echo: Vec<String>) -> Result<ReportDocument> {
    match command {
        Command::Analyze(args) => {
            let cfg = resolve(args)?;
            let report = analyze(&cfg.layers, cfg.side())?;
            let status = if report.exact { Status::Exact } else { Status::Approximate };
            Ok(with_config(ReportDocument::new(echo, status, Payload::Analysis(report)), &cfg))
        }
        Command::Suggest { config, lo, hi } => {
            let cfg = resolve(config)?;
            if lo > hi {
                return Err(Error::Config(format!("--lo {lo} is greater than --hi {hi}")));
            }
            let sizes = suggest_input_sizes(&cfg.layers, *lo, *hi);
            let payload = Payload::Suggestion {
                lo: *lo,
                hi: *hi,
                sizes,
            };
            Ok(with_config(ReportDocument::new(echo, Status::Pass, payload), &cfg))
        }
        Command::Oracle {
            i_range,
            k_range,
            s_range,
            symmetry,
        } => {
            let symmetry: Symmetry = symmetry.parse()?;
            let grid = commutation_grid(symmetry, parse_range(i_range)?, parse_range(k_range)?, parse_range(s_range)?)?;
            let status = if grid.all_agree() { Status::Pass } else { Status::Fail };
            Ok(ReportDocument::new(echo, status, Payload::Oracle(grid)))
        }
        Command::Measure {
            config,
            seed,
            seeds,
            integer_weights,
            elements,
        } => {
            let cfg = resolve(config)?;
            let elements = match elements {
                Some(text) => parse_elements(text)?,
                None => default_elements(cfg.group),
            };
            if *seeds == 0 {
                return Err(Error::Config("--seeds must be at least 1".into()));
            }
            let profiles = (*seed..seed.saturating_add(*seeds))
                .map(|s| {
                    let net = cfg.build(WeightInit {
                        seed: s,
                        integer_valued: *integer_weights,
                    })?;
                    profile_equivariance(&net, &cfg.name, s, &elements, *integer_weights)
                })
                .collect::<Result<Vec<_>>>()?;
            let tolerance = if *integer_weights { 0.0 } else { REAL_TOLERANCE };
            let pass = profiles.iter().all(|p| p.max_error() <= tolerance);
            let mut doc = ReportDocument::new(
                echo,
                if pass { Status::Pass } else { Status::Fail },
                Payload::Profiles { profiles },
            );
            doc.seed = Some(*seed);
            Ok(with_config(doc, &cfg))
        }
        Command::Sweep {
            config,
            seed,
            angle_step,
            integer_weights,
        } => {
            let cfg = resolve(config)?;
            let angles = sweep_angles(*angle_step)?;
            let net = cfg.build(WeightInit {
                seed: *seed,
                integer_valued: *integer_weights,
            })?;
            let rows = invariance_sweep(&net, *seed, &angles, *integer_weights)?;
            // only quarter turns are guaranteed; other angles are informational
            let pass = rows
                .iter()
                .filter(|r| r.angle % 90.0 == 0.0)
                .all(|r| r.discrepancy <= REAL_TOLERANCE);
            let mut doc = ReportDocument::new(
                echo,
                if pass { Status::Pass } else { Status::Fail },
                Payload::Sweep {
                    angle_step: *angle_step,
                    rows,
                },
            );
            doc.seed = Some(*seed);
            Ok(with_config(doc, &cfg))
        }
        Command::ListBuiltins => {
            let builtins = builtins()
                .into_iter()
                .map(|cfg| {
                    let exact = analyze(&cfg.layers, cfg.side()).map(|r| r.exact).unwrap_or(false);
                    BuiltinSummary {
                        group: cfg.group.name().to_string(),
                        input_size: cfg.side(),
                        layers: cfg.layers.len(),
                        exact,
                        name: cfg.name,
                    }
                })
                .collect();
            Ok(ReportDocument::new(echo, Status::Pass, Payload::Builtins { builtins }))
        }
    }
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

/// Parses `args` (including the program name), runs the command, prints the
/// result and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let echo = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let doc = match execute(&cli.command, echo) {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(path) = &cli.out {
        if let Err(e) = std::fs::write(path, doc.to_json()) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_USAGE;
        }
    }
    match cli.format {
        Format::Structured => println!("{}", doc.to_json()),
        Format::Text => print!("{}", doc.render_text(use_color())),
    }
    doc.exit_code()
}
