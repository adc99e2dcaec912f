mod commands;
mod manifest;
mod svg;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use commands::{Format, OracleArgs, Outputs};
use manifest::{sha256_hex, RunManifest, MANIFEST};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "wust", version, about = "Wired uniform spanning tree experiments")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root directory for run outputs.
    #[arg(long, global = true, env = "WUST_OUT", default_value = "runs")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a wired UST with Wilson's algorithm.
    SampleUst {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample a dimer configuration through Temperley's bijection.
    SampleDimer {
        #[arg(long)]
        config: PathBuf,
    },
    /// Height function of a sampled tree.
    Height {
        #[arg(long)]
        config: PathBuf,
    },
    /// Coupling of branches in nested domains, one report per r.
    CoupleUpper {
        #[arg(long)]
        config: PathBuf,
    },
    /// Coupling from the inner domain outwards.
    CoupleLower {
        #[arg(long)]
        config: PathBuf,
    },
    /// Branches from an outer set avoiding an inner set.
    Annulus {
        #[arg(long)]
        config: PathBuf,
    },
    /// Radon–Nikodym report between two restricted tree laws.
    RnReport {
        #[arg(long)]
        config: PathBuf,
    },
    /// Restricted law under domain perturbations.
    Continuity {
        #[arg(long)]
        config: PathBuf,
    },
    /// Height field against its shift by an integer.
    HeightShift {
        #[arg(long)]
        config: PathBuf,
    },
    /// Random-walk estimates.
    Estimate {
        #[command(subcommand)]
        kind: Estimator,
    },
    /// Exact values on small graphs.
    Oracle {
        #[command(subcommand)]
        kind: Oracle,
    },
    /// Draw the figure stored in a JSON output.
    Render { input: PathBuf },
    /// Re-run a recorded run and compare output digests.
    Replay { run: PathBuf },
}

#[derive(Subcommand)]
enum Estimator {
    Crossing {
        #[arg(long)]
        config: PathBuf,
    },
    Beurling {
        #[arg(long)]
        config: PathBuf,
    },
    Harmonic {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum Oracle {
    MatrixTree(OracleArgs),
    LerwLaw(OracleArgs),
    Matchings(OracleArgs),
    Macmahon(OracleArgs),
}

fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    commands::toml_to_json(&text).with_context(|| format!("in {}", path.display()))
}

fn resolve(cmd: Cmd) -> Result<(Vec<String>, Value)> {
    let one = |s: &str| vec![s.to_string()];
    let two = |a: &str, b: &str| vec![a.to_string(), b.to_string()];
    Ok(match cmd {
        Cmd::SampleUst { config } => (one("sample-ust"), read_config(&config)?),
        Cmd::SampleDimer { config } => (one("sample-dimer"), read_config(&config)?),
        Cmd::Height { config } => (one("height"), read_config(&config)?),
        Cmd::CoupleUpper { config } => (one("couple-upper"), read_config(&config)?),
        Cmd::CoupleLower { config } => (one("couple-lower"), read_config(&config)?),
        Cmd::Annulus { config } => (one("annulus"), read_config(&config)?),
        Cmd::RnReport { config } => (one("rn-report"), read_config(&config)?),
        Cmd::Continuity { config } => (one("continuity"), read_config(&config)?),
        Cmd::HeightShift { config } => (one("height-shift"), read_config(&config)?),
        Cmd::Estimate { kind } => match kind {
            Estimator::Crossing { config } => (two("estimate", "crossing"), read_config(&config)?),
            Estimator::Beurling { config } => (two("estimate", "beurling"), read_config(&config)?),
            Estimator::Harmonic { config } => (two("estimate", "harmonic"), read_config(&config)?),
        },
        Cmd::Oracle { kind } => {
            let (name, args) = match kind {
                Oracle::MatrixTree(a) => ("matrix-tree", a),
                Oracle::LerwLaw(a) => ("lerw-law", a),
                Oracle::Matchings(a) => ("matchings", a),
                Oracle::Macmahon(a) => ("macmahon", a),
            };
            (two("oracle", name), serde_json::to_value(args)?)
        }
        Cmd::Render { input } => {
            let input = std::fs::canonicalize(&input).with_context(|| format!("reading {}", input.display()))?;
            let digest = sha256_hex(&std::fs::read(&input)?);
            (one("render"), serde_json::json!({ "input": input.to_string_lossy(), "digest": digest }))
        }
        Cmd::Replay { .. } => unreachable!(),
    })
}

fn execute(m: &RunManifest) -> Result<Outputs> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(m.threads).build()?;
    pool.install(|| commands::run(&m.command, &m.config, m.seed, m.format))
}

fn write_run(root: &Path, m: &mut RunManifest, out: &Outputs) -> Result<PathBuf> {
    let dir = m.run_dir(root);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    m.outputs.clear();
    for (name, body) in &out.files {
        std::fs::write(dir.join(name), body)?;
        m.outputs.insert(name.clone(), sha256_hex(body));
    }
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    std::fs::write(dir.join(MANIFEST), text)?;
    Ok(dir)
}

fn replay(run: &Path, threads: usize) -> Result<bool> {
    let mut m = RunManifest::load(run)?;
    m.threads = threads;
    let out = execute(&m)?;
    let fresh: std::collections::BTreeMap<String, String> = out.files.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect();
    let mut ok = fresh.len() == m.outputs.len();
    for (name, want) in &m.outputs {
        match fresh.get(name) {
            Some(got) if got == want => eprintln!("match    {name}"),
            Some(_) => {
                eprintln!("MISMATCH {name}");
                ok = false;
            }
            None => {
                eprintln!("MISSING  {name}");
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = (|| -> Result<ExitCode> {
        if threads == 0 {
            bail!("--threads must be positive");
        }
        if let Cmd::Replay { run } = &cli.command {
            return Ok(if replay(run, threads)? {
                eprintln!("replay reproduced every output");
                ExitCode::SUCCESS
            } else {
                eprintln!("replay differs from the recorded run");
                ExitCode::from(3)
            });
        }
        let (command, config) = resolve(cli.command)?;
        let mut m = RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config,
            seed: cli.seed,
            format: cli.format,
            threads,
            started: manifest::unix_time(),
            finished: 0,
            outputs: Default::default(),
        };
        let out = execute(&m)?;
        m.finished = manifest::unix_time();
        let dir = write_run(&cli.out, &mut m, &out)?;
        print!("{}", out.stdout);
        eprintln!("wrote {}", dir.display());
        Ok(ExitCode::SUCCESS)
    })();
    match result {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
