use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::Utc;
use gradband_core::eval::{evaluate_spec, sweep as run_sweep, write_json, write_reports_csv, EvalReport, SweepSpec};
use gradband_core::gittins::GittinsTable;
use gradband_core::optimizer::run_gradband;
use gradband_core::PolicySpec;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, ExperimentSpec, RunArgs};

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    command: &'a str,
    invocation: &'a str,
    version: &'a str,
    config_sha256: String,
    train_seed: Option<u64>,
    eval_seed: u64,
    threads: usize,
    started_at: String,
    wall_seconds: f64,
    config: &'a ExperimentSpec,
}

#[derive(Serialize)]
struct TrainedParams<'a> {
    policy: &'a PolicySpec,
    initial_params: Option<Vec<f64>>,
    params: &'a [f64],
    alpha: f64,
    c: Option<f64>,
}

#[derive(Serialize)]
struct SweepParams {
    train_value: f64,
    params: Option<Vec<f64>>,
}

/// Hex SHA-256 of the effective configuration.
pub fn config_hash(spec: &ExperimentSpec) -> String {
    Sha256::digest(spec.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Create `<out>/<experiment>/<timestamp>`, suffixing the timestamp when a
/// directory of that name already exists.
pub fn run_dir(out: &Path, experiment: &str) -> Result<(PathBuf, String), CliError> {
    let parent = out.join(experiment);
    std::fs::create_dir_all(&parent)?;
    let stamp = Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let mut name = stamp.clone();
    for suffix in 1.. {
        match std::fs::create_dir(parent.join(&name)) {
            Ok(()) => break,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => name = format!("{stamp}-{suffix}"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok((parent.join(name), stamp))
}

struct Run {
    spec: ExperimentSpec,
    dir: PathBuf,
    started_at: String,
    clock: Instant,
}

impl Run {
    fn start(spec: ExperimentSpec, args: &RunArgs) -> Result<Self, CliError> {
        let (dir, started_at) = run_dir(&args.out, &spec.name)?;
        log::info!("writing to {}", dir.display());
        Ok(Self { spec, dir, started_at, clock: Instant::now() })
    }

    fn finish(&self, command: &str, invocation: &str) -> Result<(), CliError> {
        let manifest = Manifest {
            experiment: &self.spec.name,
            command,
            invocation,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: config_hash(&self.spec),
            train_seed: self.spec.train.as_ref().map(|t| t.seed),
            eval_seed: self.spec.eval.seed,
            threads: rayon::current_num_threads(),
            started_at: self.started_at.clone(),
            wall_seconds: self.clock.elapsed().as_secs_f64(),
            config: &self.spec,
        };
        write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(())
    }

    fn evaluate(&self, policy: &PolicySpec, prior: &gradband_core::env::Prior) -> Result<EvalReport, CliError> {
        Ok(evaluate_spec(policy, prior, self.spec.horizon, self.spec.eval.instances, self.spec.eval.seed)?)
    }
}

pub fn train(args: &RunArgs, invocation: &str) -> Result<PathBuf, CliError> {
    let spec = args.load()?;
    let prior = spec.validate()?;
    let config = spec.train.clone().ok_or_else(|| CliError::Config(format!("{}: no [train] section", spec.name)))?;
    let run = Run::start(spec, args)?;
    let spec = &run.spec;
    let outcome = run_gradband(&spec.policy, &prior, spec.horizon, &config)?;
    outcome.trace.write_csv(&run.dir.join("trace.csv"))?;
    let params = TrainedParams {
        policy: &outcome.policy,
        initial_params: spec.policy.params(prior.dim()),
        params: &outcome.params,
        alpha: outcome.alpha,
        c: outcome.c,
    };
    write_json(&run.dir.join("params.json"), &params)?;
    let before = run.evaluate(&spec.policy, &prior)?;
    let after = run.evaluate(&outcome.policy, &prior)?;
    let name = spec.policy.name();
    write_reports_csv(
        &run.dir.join("eval.csv"),
        &[(format!("{name} (initial)"), spec.name.clone(), &before), (format!("{name} (trained)"), spec.name.clone(), &after)],
    )?;
    run.finish("train", invocation)?;
    println!(
        "{}: {name} regret {:.3} ± {:.3} -> {:.3} ± {:.3} after {} iterations",
        spec.name, before.regret_mean, before.regret_stderr, after.regret_mean, after.regret_stderr, config.iterations
    );
    println!("{}", run.dir.display());
    Ok(run.dir)
}

pub fn eval(args: &RunArgs, invocation: &str) -> Result<PathBuf, CliError> {
    let spec = args.load()?;
    let prior = spec.validate()?;
    let run = Run::start(spec, args)?;
    let spec = &run.spec;
    let mut rows = Vec::new();
    for policy in std::iter::once(&spec.policy).chain(&spec.eval.compare) {
        let report = run.evaluate(policy, &prior)?;
        println!("{}: {} regret {:.3} ± {:.3}", spec.name, policy.name(), report.regret_mean, report.regret_stderr);
        rows.push((policy.name().to_string(), spec.name.clone(), report));
    }
    let refs: Vec<_> = rows.iter().map(|(p, e, r)| (p.clone(), e.clone(), r)).collect();
    write_reports_csv(&run.dir.join("eval.csv"), &refs)?;
    run.finish("eval", invocation)?;
    println!("{}", run.dir.display());
    Ok(run.dir)
}

pub fn sweep(args: &RunArgs, invocation: &str) -> Result<PathBuf, CliError> {
    let spec = args.load()?;
    spec.validate()?;
    let settings = spec.sweep.clone().ok_or_else(|| CliError::Config(format!("{}: no [sweep] section", spec.name)))?;
    let train = spec.train.clone().ok_or_else(|| CliError::Config(format!("{}: no [train] section", spec.name)))?;
    let run = Run::start(spec, args)?;
    let spec = &run.spec;
    let table = run_sweep(&SweepSpec {
        axis: settings.axis,
        grid: settings.grid,
        policy: spec.policy.clone(),
        prior: spec.prior.clone(),
        horizon: spec.horizon,
        train,
        eval_instances: spec.eval.instances,
    })?;
    table.write_matrix_csv(&run.dir.join("sweep.csv"))?;
    let rows: Vec<_> = table
        .rows
        .iter()
        .map(|r| (format!("{} train={}", spec.policy.name(), r.train_value), format!("eval={}", r.eval_value), &r.report))
        .collect();
    write_reports_csv(&run.dir.join("eval.csv"), &rows)?;
    let mut params: Vec<SweepParams> = Vec::new();
    for r in &table.rows {
        if params.last().is_none_or(|p| p.train_value != r.train_value) {
            params.push(SweepParams { train_value: r.train_value, params: r.params.clone() });
        }
    }
    write_json(&run.dir.join("params.json"), &params)?;
    run.finish("sweep", invocation)?;
    println!("{}: {} sweep rows", spec.name, table.rows.len());
    println!("{}", run.dir.display());
    Ok(run.dir)
}

pub fn gittins(n: usize, cache: &Path) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    let unwritable = |e: &dyn std::fmt::Display| CliError::Cache(format!("{}: {e}", cache.display()));
    File::create(cache).map_err(|e| unwritable(&e))?;
    let clock = Instant::now();
    let table = GittinsTable::build(n)?;
    let seconds = clock.elapsed().as_secs_f64();
    table.save(cache).map_err(|e| unwritable(&e))?;
    println!("n = {n}: lattice size {}, built in {seconds:.3} s, saved to {}", table.lattice_size(), cache.display());
    Ok(())
}
