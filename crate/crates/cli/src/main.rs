//! Command-line entry point: simulation, property verification, spike
//! encoding construction, training, and evaluation with reproducible
//! configuration.
//!
//! Exit codes: 0 success, 1 property or acceptance failure, 2 usage or
//! parse error, 3 numeric divergence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use snn_core::config::ExperimentConfig;
use snn_core::data::{make_moons, split_dataset, Dataset};
use snn_core::error::Error;
use snn_core::lif;
use snn_core::spike::format_f64;
use snn_core::suite;
use snn_core::train::{evaluate, train};
use snn_core::ua;
use snn_core::TrainableParams;

#[derive(Parser)]
#[command(name = "snn", version, about = "Spiking-network simulation, analysis, and training")]
struct Cli {
    /// Configuration file (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the parameter-initialization seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the integration step from the config.
    #[arg(long, global = true)]
    grid_step: Option<f64>,
    /// Prints the effective configuration as canonical JSON and exits.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs one hard-reset forward pass and writes per-neuron
    /// trajectories and spike trains.
    Simulate {
        /// Input vector, comma-separated; random when omitted.
        #[arg(long)]
        x: Option<String>,
        /// Trainable parameters (JSON file); random when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Runs the randomized property suites and writes a JSON report.
    VerifyProps {
        /// Trials per suite.
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Fits a shallow target, designs spike encodings for sampled inputs,
    /// and verifies the readout error bounds.
    ConstructUa {
        /// Evaluation points to encode.
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Spikes per unit.
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Trains on the generated two-moons split and writes history,
    /// parameters, and test metrics.
    Train,
    /// Evaluates stored parameters on the test split.
    Eval {
        /// Trainable parameters (JSON file).
        #[arg(long)]
        params: PathBuf,
    },
}

/// Reproducibility record written next to every run's outputs. Wall
/// times are informational and excluded from determinism comparisons.
#[derive(serde::Serialize)]
struct RunManifest {
    config_sha256: String,
    seeds: BTreeMap<String, u64>,
    version: String,
    wall_times_s: BTreeMap<String, f64>,
    artifacts: Vec<String>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence(_) | Error::ResourceExhausted(_) => 3,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Parse(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text)
                .map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.init_seed = seed;
    }
    if let Some(h) = cli.grid_step {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid step must be positive, got {h}"
            )));
        }
        config.grid_step = h;
    }
    config.structure.validate()?;
    Ok(config)
}

fn write_manifest(
    dir: &Path,
    config: &ExperimentConfig,
    seeds: BTreeMap<String, u64>,
    wall_times_s: BTreeMap<String, f64>,
    artifacts: &[PathBuf],
) -> Result<(), Error> {
    let canonical = config.canonical_json()?;
    let hash = Sha256::digest(canonical.as_bytes());
    let manifest = RunManifest {
        config_sha256: format!("{hash:x}"),
        seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_times_s,
        artifacts: artifacts
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    fs::write(dir.join("config.json"), canonical + "\n")?;
    Ok(())
}

fn parse_vector(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad vector component {s:?}: {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<i32, Error> {
    let config = load_config(&cli)?;
    if cli.print_config {
        println!("{}", config.canonical_json()?);
        return Ok(0);
    }
    fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Simulate { x, params } => cmd_simulate(&cli, &config, x.as_deref(), params.as_deref()),
        Command::VerifyProps { trials } => cmd_verify_props(&cli, &config, *trials),
        Command::ConstructUa { points, k } => cmd_construct_ua(&cli, &config, *points, *k),
        Command::Train => cmd_train(&cli, &config),
        Command::Eval { params } => cmd_eval(&cli, &config, params),
    }
}

fn load_params(path: &Path) -> Result<TrainableParams, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read params {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("params {}: {e}", path.display())))
}

fn cmd_simulate(
    cli: &Cli,
    config: &ExperimentConfig,
    x: Option<&str>,
    params_path: Option<&Path>,
) -> Result<i32, Error> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    let params = match params_path {
        Some(p) => load_params(p)?,
        None => TrainableParams::random(&config.structure, &mut rng),
    };
    let x = match x {
        Some(text) => parse_vector(text)?,
        None => (0..config.structure.input_dim)
            .map(|_| rng.gen_range(-1.0..=1.0))
            .collect(),
    };
    let run = lif::forward(&x, &params, &config.structure, config.grid_step)?;

    let mut artifacts = Vec::new();
    let mut save = |name: String, body: String| -> Result<(), Error> {
        let path = cli.out.join(&name);
        fs::write(&path, body)?;
        artifacts.push(path);
        Ok(())
    };
    save("trajectory_input.csv".into(), run.input.trajectory.to_csv())?;
    save("spikes_input.csv".into(), run.input.spikes.to_csv())?;
    for (l, layer_runs) in run.hidden.iter().enumerate() {
        for (p, nr) in layer_runs.iter().enumerate() {
            save(format!("trajectory_hidden_{}_{p}.csv", l + 1), nr.trajectory.to_csv())?;
            save(format!("spikes_hidden_{}_{p}.csv", l + 1), nr.spikes.to_csv())?;
        }
    }
    for (p, traj) in run.output_trajectories.iter().enumerate() {
        save(format!("trajectory_output_{p}.csv"), traj.to_csv())?;
    }
    let summary = serde_json::json!({
        "input": x,
        "final_potentials": run.output.final_potentials,
        "readout": run.output.readout,
    });
    save("simulate_summary.json".into(), serde_json::to_string_pretty(&summary)? + "\n")?;

    let mut seeds = BTreeMap::new();
    seeds.insert("init".into(), config.init_seed);
    let mut times = BTreeMap::new();
    times.insert("simulate".into(), started.elapsed().as_secs_f64());
    write_manifest(&cli.out, config, seeds, times, &artifacts)?;
    println!("readout {}", format_f64(run.output.readout));
    Ok(0)
}

fn cmd_verify_props(cli: &Cli, config: &ExperimentConfig, trials: usize) -> Result<i32, Error> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    let mut reports = Vec::new();
    for t in suite::reference_pattern_trials()? {
        reports.push(t);
    }
    for _ in 0..trials {
        reports.push(suite::input_exactness_trial(&mut rng)?);
        reports.push(suite::separated_trial(&mut rng, false)?);
        reports.push(suite::separated_trial(&mut rng, true)?);
        reports.push(suite::overlap_trial(&mut rng)?);
    }
    // The convergence ladder is far heavier per trial; a fixed small
    // count keeps the sweep responsive while still randomized.
    for _ in 0..trials.min(10) {
        reports.push(suite::ladder_trial(&mut rng)?);
    }

    let mut by_regime: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in &reports {
        let e = by_regime.entry(r.regime.clone()).or_insert((0, 0));
        e.1 += 1;
        if r.verdict {
            e.0 += 1;
        }
    }
    let all_pass = reports.iter().all(|r| r.verdict);
    for (regime, (pass, total)) in &by_regime {
        println!(
            "{:<28} {:>4}/{:<4} {}",
            regime,
            pass,
            total,
            if pass == total { "pass" } else { "FAIL" }
        );
    }
    let path = cli.out.join("verify_props.json");
    fs::write(&path, serde_json::to_string_pretty(&reports)? + "\n")?;

    let mut seeds = BTreeMap::new();
    seeds.insert("trials".into(), config.init_seed);
    let mut times = BTreeMap::new();
    times.insert("verify_props".into(), started.elapsed().as_secs_f64());
    write_manifest(&cli.out, config, seeds, times, &[path])?;
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_construct_ua(
    cli: &Cli,
    config: &ExperimentConfig,
    points: usize,
    k: usize,
) -> Result<i32, Error> {
    if points == 0 {
        return Err(Error::InvalidArgument("points must be at least 1".into()));
    }
    let started = Instant::now();
    let s = &config.structure;
    let width = s.width();
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);

    // A synthetic but nontrivial shallow target over the input square.
    let mut directions = Vec::with_capacity(width);
    let mut weights = Vec::with_capacity(width);
    for _ in 0..width {
        directions.push((0..s.input_dim).map(|_| rng.gen_range(-1.0..=1.0)).collect());
        weights.push(rng.gen_range(-0.5..=0.5));
    }
    let shallow = ua::ShallowTarget { directions, weights };
    // Output gain sized so every charge stays inside the feasible band.
    let w = 2.0 * s.tau_u * (s.theta_u + shallow.weights.iter().map(|v| v.abs()).sum::<f64>() + 1.0)
        / k as f64;

    let mut checks = Vec::new();
    let mut all_ok = true;
    for _ in 0..points {
        let x: Vec<f64> = (0..s.input_dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let enc = ua::design_spike_times(&shallow, &x, k, w, s.tau_u, s.theta_u, s.horizon)?;
        if !enc.feasible {
            all_ok = false;
            checks.push(serde_json::json!({ "x": x, "feasible": false }));
            continue;
        }
        let check = ua::verify_encoding(&enc, &shallow, &x, s.mu, config.grid_step)?;
        all_ok &= check.ok;
        checks.push(serde_json::json!({ "x": x, "feasible": true, "check": check }));
    }
    let path = cli.out.join("construct_ua.json");
    fs::write(&path, serde_json::to_string_pretty(&checks)? + "\n")?;

    let mut seeds = BTreeMap::new();
    seeds.insert("target".into(), config.init_seed);
    let mut times = BTreeMap::new();
    times.insert("construct_ua".into(), started.elapsed().as_secs_f64());
    write_manifest(&cli.out, config, seeds, times, &[path])?;
    println!("{} encodings, {}", points, if all_ok { "all pass" } else { "FAILURES" });
    Ok(if all_ok { 0 } else { 1 })
}

fn load_split(config: &ExperimentConfig) -> Result<(Dataset, Dataset, Dataset), Error> {
    let data = make_moons(config.dataset.n, config.dataset.noise, config.dataset.seed)?;
    let split = split_dataset(&data, config.dataset.fractions, config.dataset.split_seed)?;
    Ok((
        split.take(&data, &split.train),
        split.take(&data, &split.validation),
        split.take(&data, &split.test),
    ))
}

fn cmd_train(cli: &Cli, config: &ExperimentConfig) -> Result<i32, Error> {
    let started = Instant::now();
    let (train_set, val_set, test_set) = load_split(config)?;
    let outcome = train(&train_set, Some(&val_set), config)?;

    let mut history = String::from("epoch,zeta,loss,step,val_accuracy\n");
    for rec in &outcome.history {
        let acc = rec
            .validation
            .as_ref()
            .map(|m| format_f64(m.accuracy))
            .unwrap_or_default();
        history.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.epoch,
            format_f64(rec.zeta),
            format_f64(rec.loss),
            format_f64(rec.step),
            acc
        ));
    }
    let history_path = cli.out.join("history.csv");
    fs::write(&history_path, history)?;
    let params_path = cli.out.join("params.json");
    fs::write(&params_path, serde_json::to_string_pretty(&outcome.params)? + "\n")?;
    let metrics = evaluate(&test_set, &outcome.params, config)?;
    let metrics_path = cli.out.join("metrics.json");
    fs::write(&metrics_path, serde_json::to_string_pretty(&metrics)? + "\n")?;

    let mut seeds = BTreeMap::new();
    seeds.insert("dataset".into(), config.dataset.seed);
    seeds.insert("split".into(), config.dataset.split_seed);
    seeds.insert("init".into(), config.init_seed);
    let mut times = BTreeMap::new();
    times.insert("train".into(), started.elapsed().as_secs_f64());
    write_manifest(
        &cli.out,
        config,
        seeds,
        times,
        &[history_path, params_path, metrics_path],
    )?;
    println!(
        "test accuracy {} precision {} recall {} f1 {}",
        format_f64(metrics.accuracy),
        format_f64(metrics.precision),
        format_f64(metrics.recall),
        format_f64(metrics.f1)
    );
    Ok(0)
}

fn cmd_eval(cli: &Cli, config: &ExperimentConfig, params_path: &Path) -> Result<i32, Error> {
    let started = Instant::now();
    let params = load_params(params_path)?;
    params.validate(&config.structure)?;
    let (_, _, test_set) = load_split(config)?;
    let metrics = evaluate(&test_set, &params, config)?;
    let metrics_path = cli.out.join("metrics.json");
    fs::write(&metrics_path, serde_json::to_string_pretty(&metrics)? + "\n")?;

    let mut seeds = BTreeMap::new();
    seeds.insert("dataset".into(), config.dataset.seed);
    seeds.insert("split".into(), config.dataset.split_seed);
    let mut times = BTreeMap::new();
    times.insert("eval".into(), started.elapsed().as_secs_f64());
    write_manifest(&cli.out, config, seeds, times, &[metrics_path])?;
    println!(
        "test accuracy {} precision {} recall {} f1 {}",
        format_f64(metrics.accuracy),
        format_f64(metrics.precision),
        format_f64(metrics.recall),
        format_f64(metrics.f1)
    );
    Ok(0)
}
