// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod generate;
mod manifest;
mod pv;
mod reconstruct;
mod resources;
mod scaling;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::manifest::{Outcome, RunManifest};

#[derive(Parser)]
#[command(name = "trackhhl", version, about = "Track reconstruction on toy detector events with classical and HHL solvers")]
struct Cli {
    /// Directory for outputs that are not given an explicit path.
    #[arg(long, global = true, env = "TRACKHHL_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    #[command(flatten)]
    Job(Job),
    /// Re-execute the job recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Job {
    /// Generate a toy event.
    Generate(generate::GenerateArgs),
    /// Reconstruct the tracks of an event.
    Reconstruct(reconstruct::ReconstructArgs),
    /// Find primary vertices from a reconstruction.
    Pv(pv::PvArgs),
    /// Sample and qubit scaling curves.
    Scaling(scaling::ScalingArgs),
    /// Abstract gate and qubit accounting for an event.
    Resources(resources::ResourcesArgs),
}

#[derive(Args)]
struct RerunArgs {
    manifest: PathBuf,
    /// Write the outputs into this directory instead of their recorded paths.
    #[arg(long)]
    into: Option<PathBuf>,
}

impl Job {
    /// Fills default output paths and makes every path absolute.
    fn resolve(&mut self, out_dir: &Path) -> anyhow::Result<()> {
        match self {
            Job::Generate(a) => a.resolve(out_dir),
            Job::Reconstruct(a) => a.resolve(out_dir),
            Job::Pv(a) => a.resolve(out_dir),
            Job::Scaling(a) => a.resolve(out_dir),
            Job::Resources(a) => a.resolve(out_dir),
        }
    }

    fn retarget(&mut self, dir: &Path) {
        let mv = |p: &mut PathBuf| {
            if let Some(name) = p.file_name() {
                *p = dir.join(name);
            }
        };
        match self {
            Job::Generate(a) => a.outputs_mut().into_iter().for_each(mv),
            Job::Reconstruct(a) => a.outputs_mut().into_iter().for_each(mv),
            Job::Pv(a) => a.outputs_mut().into_iter().for_each(mv),
            Job::Scaling(a) => a.outputs_mut().into_iter().for_each(mv),
            Job::Resources(a) => a.outputs_mut().into_iter().for_each(mv),
        }
    }

    fn run(&self) -> anyhow::Result<Outcome> {
        match self {
            Job::Generate(a) => a.run(),
            Job::Reconstruct(a) => a.run(),
            Job::Pv(a) => a.run(),
            Job::Scaling(a) => a.run(),
            Job::Resources(a) => a.run(),
        }
    }
}

pub(crate) fn absolute(p: &Path) -> anyhow::Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

/// `explicit` if given, else `dir/default`, made absolute.
pub(crate) fn output_path(explicit: &Option<PathBuf>, dir: &Path, default: &str) -> anyhow::Result<PathBuf> {
    absolute(&explicit.clone().unwrap_or_else(|| dir.join(default)))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub(crate) fn read_event(path: &Path) -> anyhow::Result<trackhhl_core::Event> {
    let event: trackhhl_core::Event = read_json(path)?;
    event.validate().with_context(|| format!("checking {}", path.display()))?;
    Ok(event)
}

fn execute(job: Job, rerun_of: Option<PathBuf>) -> anyhow::Result<()> {
    let outcome = job.run()?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let written = outcome.write_files()?;
    let manifest = RunManifest::new(job, &outcome, rerun_of);
    let path = manifest.write_next_to(&written[0])?;
    for p in &written {
        println!("{}", p.display());
    }
    eprintln!("manifest: {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Job(mut job) => {
            job.resolve(&cli.out_dir)?;
            execute(job, None)
        }
        Command::Rerun(args) => {
            let manifest = RunManifest::read(&args.manifest)?;
            let mut job = manifest.command;
            if let Some(dir) = &args.into {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                job.retarget(&absolute(dir)?);
            }
            execute(job, Some(absolute(&args.manifest)?))
        }
    }
}

/// 2 usage or configuration, 3 solver, 4 quantum budget or post-selection,
/// 1 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    use trackhhl_core::Error;
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_solver_failure() => 3,
        Some(e) if e.is_quantum_failure() => 4,
        Some(Error::Config(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
