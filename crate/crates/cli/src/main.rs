//! `akg`: run the verification suites and the deformation solver, writing a run directory.

mod commands;
mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, RunConfig, Suite};
use report::{now_unix, Outcome, Report, RunPaths};

#[derive(Parser)]
#[command(name = "akg", version, about = "Almost-Kähler geometry toolkit")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Default)]
struct Common {
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cubic resolution n (grid n×n×n×n).
    #[arg(long, conflicts_with = "resolution")]
    res: Option<usize>,
    /// Per-axis resolution, e.g. 32,4,32,4.
    #[arg(long, value_delimiter = ',')]
    resolution: Option<Vec<usize>>,
    /// Run directory, or a `.json` report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct StructureArgs {
    /// Built-in path of almost-complex structures.
    #[arg(long)]
    path: Option<String>,
    /// Path parameter.
    #[arg(long)]
    t: Option<f64>,
    /// Amplitude of `torus-modulated`.
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Subcommand)]
enum Sub {
    /// Sample the five commutator identities on random fields.
    VerifyIdentities {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        structure: StructureArgs,
        /// Random fields per degree.
        #[arg(long)]
        fields: Option<usize>,
    },
    /// Potential-theoretic suites around d𝔾d^c.
    DdcVerify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        structure: StructureArgs,
        /// Triple container to test instead of a built-in path.
        #[arg(long)]
        triple: Option<PathBuf>,
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long)]
        samples: Option<usize>,
        /// Report file (alias of `--out <file>.json`).
        #[arg(long, conflicts_with = "out")]
        report: Option<PathBuf>,
    },
    /// Hermitian Ricci form and scalar curvature of a triple.
    Curvature {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        structure: StructureArgs,
        /// Triple container.
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Continue the constant-scalar-curvature potential along a path.
    Deform {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        structure: StructureArgs,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Skip writing per-step field containers.
        #[arg(long)]
        no_fields: bool,
    },
    /// Exact certificate for the Kodaira–Thurston nilmanifold.
    KtCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Write a triple container from a built-in path.
    BuildTriple {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        structure: StructureArgs,
    },
}

fn apply_common(cfg: &mut RunConfig, c: &Common) -> anyhow::Result<()> {
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.res {
        cfg.grid.resolution = Some([n; 4]);
    }
    if let Some(r) = &c.resolution {
        let r: [usize; 4] = r
            .as_slice()
            .try_into()
            .map_err(|_| anyhow::anyhow!("--resolution needs four comma-separated values, got {}", r.len()))?;
        cfg.grid.resolution = Some(r);
    }
    Ok(())
}

fn apply_structure(cfg: &mut RunConfig, s: &StructureArgs) {
    if let Some(p) = &s.path {
        cfg.structure.path = p.clone();
    }
    if let Some(t) = s.t {
        cfg.structure.t = t;
    }
    if let Some(k) = s.kappa {
        cfg.structure.kappa = k;
    }
}

/// Merge file, flags and defaults. Returns the config and the output location.
fn configure(cli: &Cli) -> anyhow::Result<(RunConfig, PathBuf)> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let (command, common) = match &cli.command {
        Sub::VerifyIdentities { common, structure, fields } => {
            apply_structure(&mut cfg, structure);
            if let Some(f) = fields {
                cfg.identities.fields = *f;
            }
            (Command::VerifyIdentities, common)
        }
        Sub::DdcVerify { common, structure, triple, suite, samples, .. } => {
            apply_structure(&mut cfg, structure);
            if triple.is_some() {
                cfg.structure.file = triple.clone();
            }
            if let Some(s) = suite {
                cfg.ddc.suite = *s;
            }
            if let Some(n) = samples {
                cfg.ddc.samples = *n;
            }
            (Command::DdcVerify, common)
        }
        Sub::Curvature { common, structure, input } => {
            apply_structure(&mut cfg, structure);
            if input.is_some() {
                cfg.structure.file = input.clone();
            }
            (Command::Curvature, common)
        }
        Sub::Deform { common, structure, t_max, step, no_fields } => {
            apply_structure(&mut cfg, structure);
            if let Some(t) = t_max {
                cfg.deform.t_max = *t;
            }
            if let Some(h) = step {
                cfg.deform.step = *h;
                cfg.deform.min_step = cfg.deform.min_step.min(*h);
            }
            if *no_fields {
                cfg.deform.save_fields = false;
            }
            (Command::Deform, common)
        }
        Sub::KtCheck { common } => (Command::KtCheck, common),
        Sub::BuildTriple { common, structure } => {
            apply_structure(&mut cfg, structure);
            (Command::BuildTriple, common)
        }
    };
    apply_common(&mut cfg, common)?;
    cfg.resolve(command)?;
    let out = match &cli.command {
        Sub::DdcVerify { report: Some(r), .. } => r.clone(),
        _ => common.out.clone().unwrap_or_else(|| PathBuf::from(format!("akg-{}", command.name()))),
    };
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let started = now_unix();
    let cli = Cli::parse();
    let (cfg, out) = match configure(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("akg: configuration error: {e:#}");
            return ExitCode::from(Outcome::ConfigError.exit_code() as u8);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("akg: cannot size thread pool: {e}");
            return ExitCode::from(Outcome::ConfigError.exit_code() as u8);
        }
    }
    let paths = RunPaths::from_out(&out);
    let prepared = fs::create_dir_all(&paths.dir).and_then(|_| fs::write(paths.config(), cfg.to_toml()));
    if let Err(e) = prepared {
        eprintln!("akg: cannot write run directory {}: {e}", paths.dir.display());
        return ExitCode::from(Outcome::ConfigError.exit_code() as u8);
    }
    let output = commands::run(&cfg, &paths.dir);
    let report = Report::new(cfg, output.checks, output.data, output.error, started);
    let text = report.to_text(&output.text);
    let written = fs::write(&paths.report, report.to_json()).and_then(|_| fs::write(paths.text(), &text));
    print!("{text}");
    if let Err(e) = written {
        eprintln!("akg: cannot write report: {e}");
        return ExitCode::from(Outcome::ConfigError.exit_code() as u8);
    }
    ExitCode::from(report.exit_code as u8)
}
