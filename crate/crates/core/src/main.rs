//! Command-line front end. Exit codes: 0 success, 2 validation error,
//! 3 file/format error, 4 numeric failure (non-finite values).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flowgen::dataset_io::{import_csv, load_dataset, save_dataset};
use flowgen::diffusion::{train_ddpm, ScheduleSpec};
use flowgen::flow::train_flow;
use flowgen::harness::{
    parse_sweep_csv, render_sweep_plot, run_experiment, write_loss_csv, ExperimentConfig,
};
use flowgen::metrics::{evaluate_all, EvalOptions};
use flowgen::nn::{load_model, save_model, Method, TrainConfig};
use flowgen::ode::OdeMethod;
use flowgen::signal::ConditionVector;
use flowgen::synth::{synth_dataset, SynthSpec};
use flowgen::{Error, Result};

#[derive(Parser)]
#[command(
    name = "flowgen",
    version,
    about = "Train and compare flow-matching and diffusion generators for \
             multichannel physiological time series"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a labeled dataset from a JSON spec
    SynthData {
        /// Path to a synthesis spec (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset file (.fgts)
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a generator on a dataset file
    Train {
        /// Generator family: fm | ddpm
        #[arg(long)]
        method: String,
        /// Training dataset (.fgts)
        #[arg(long)]
        data: PathBuf,
        /// Output checkpoint (.fgmd)
        #[arg(long)]
        out: PathBuf,
        /// Training config (JSON); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the number of optimization steps
        #[arg(long)]
        steps: Option<usize>,
        /// Override the training seed
        #[arg(long)]
        seed: Option<u64>,
        /// Diffusion schedule length (ddpm only)
        #[arg(long)]
        t_count: Option<usize>,
        /// First noise level (ddpm only)
        #[arg(long)]
        beta_min: Option<f64>,
        /// Last noise level (ddpm only)
        #[arg(long)]
        beta_max: Option<f64>,
        /// Also write the per-step loss trace as CSV
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Generate signals from a checkpoint
    Sample {
        /// Checkpoint file (.fgmd)
        #[arg(long)]
        checkpoint: PathBuf,
        /// Expected generator family: fm | ddpm (guards against grabbing
        /// the wrong checkpoint)
        #[arg(long)]
        method: String,
        /// Function-evaluation budget
        #[arg(long)]
        nfe: usize,
        /// Number of signals to generate
        #[arg(long)]
        n: usize,
        /// Condition bits, comma separated (e.g. 1,0,0,0)
        #[arg(long)]
        condition: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Integrator for flow-matching checkpoints: euler | midpoint
        #[arg(long, default_value = "euler")]
        ode_method: String,
        /// Output dataset file (.fgts)
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a generated dataset against a reference dataset
    Evaluate {
        /// Reference dataset (.fgts)
        #[arg(long)]
        real: PathBuf,
        /// Generated dataset (.fgts)
        #[arg(long)]
        generated: PathBuf,
        /// Metric options (JSON); defaults apply when omitted
        #[arg(long)]
        opts: Option<PathBuf>,
        /// Also write the report JSON to a file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment described by a config file
    RunExperiment {
        /// Experiment config (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-render the four-panel figure from a sweep table
    RenderPlot {
        /// Sweep table (sweep.csv)
        #[arg(long)]
        sweep: PathBuf,
        /// Output figure (.svg)
        #[arg(long)]
        out: PathBuf,
    },
    /// Import one signal from a CSV file (header of lead names, one
    /// channel per column)
    ImportCsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sample_rate_hz: f64,
        /// Condition bits for the imported signal, comma separated
        #[arg(long)]
        condition: String,
        /// Output dataset file (.fgts)
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<Method> {
    match s {
        "fm" => Ok(Method::FlowMatching),
        "ddpm" => Ok(Method::Ddpm),
        other => Err(Error::contract(format!(
            "unknown method {other:?}, expected \"fm\" or \"ddpm\""
        ))),
    }
}

fn parse_condition(s: &str) -> Result<ConditionVector> {
    let bits = s
        .split(',')
        .map(|b| {
            b.trim()
                .parse::<u8>()
                .map_err(|_| Error::contract(format!("condition bit {b:?} is not 0 or 1")))
        })
        .collect::<Result<Vec<u8>>>()?;
    ConditionVector::new(bits)
}

/// Worker cap: FLOWGEN_THREADS when set, available parallelism
/// otherwise.
fn threads_from_env() -> Result<usize> {
    match std::env::var("FLOWGEN_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                Error::contract(format!("FLOWGEN_THREADS={v:?} is not a positive integer"))
            })?;
            if n == 0 {
                return Err(Error::contract("FLOWGEN_THREADS must be at least 1"));
            }
            Ok(n)
        }
        Err(std::env::VarError::NotPresent) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
        Err(e) => Err(Error::contract(format!("FLOWGEN_THREADS: {e}"))),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::contract(format!("invalid {what}: {e}")))
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::SynthData { spec, out } => {
            let spec: SynthSpec = read_json(&spec, "synthesis spec")?;
            let ds = synth_dataset(&spec)?;
            save_dataset(&ds, &out)?;
            println!(
                "wrote {} signals ({} ch x {} samples) to {}",
                ds.len(),
                ds.channels(),
                ds.samples(),
                out.display()
            );
        }
        Cmd::Train {
            method,
            data,
            out,
            config,
            steps,
            seed,
            t_count,
            beta_min,
            beta_max,
            loss_csv,
        } => {
            let method = parse_method(&method)?;
            let ds = load_dataset(&data)?;
            let mut tc: TrainConfig = match config {
                Some(p) => read_json(&p, "training config")?,
                None => TrainConfig::default(),
            };
            if let Some(s) = steps {
                tc.steps = s;
            }
            if let Some(s) = seed {
                tc.seed = s;
            }
            let (ckpt, losses) = match method {
                Method::FlowMatching => {
                    for (flag, name) in [
                        (t_count.is_some(), "--t-count"),
                        (beta_min.is_some(), "--beta-min"),
                        (beta_max.is_some(), "--beta-max"),
                    ] {
                        if flag {
                            return Err(Error::contract(format!(
                                "{name} only applies to --method ddpm"
                            )));
                        }
                    }
                    train_flow(&ds, &tc)?
                }
                Method::Ddpm => {
                    let mut spec = ScheduleSpec::default();
                    if let Some(t) = t_count {
                        spec.t_count = t;
                    }
                    if let Some(b) = beta_min {
                        spec.beta_min = b;
                    }
                    if let Some(b) = beta_max {
                        spec.beta_max = b;
                    }
                    train_ddpm(&ds, spec, &tc)?
                }
            };
            save_model(&ckpt, &out)?;
            if let Some(p) = loss_csv {
                write_loss_csv(&p, &losses)?;
            }
            let tail = losses.iter().rev().take(50);
            let n_tail = tail.len().max(1);
            let tail_mean: f64 = tail.sum::<f64>() / n_tail as f64;
            println!(
                "trained {} for {} steps (mean loss over last {}: {:.6}) -> {}",
                ckpt.method.as_str(),
                tc.steps,
                n_tail,
                tail_mean,
                out.display()
            );
        }
        Cmd::Sample {
            checkpoint,
            method,
            nfe,
            n,
            condition,
            seed,
            ode_method,
            out,
        } => {
            let want = parse_method(&method)?;
            if n == 0 {
                return Err(Error::contract("--n must be at least 1"));
            }
            let ckpt = load_model(&checkpoint)?;
            if ckpt.method != want {
                return Err(Error::contract(format!(
                    "checkpoint {} holds a {} model but --method {} was requested",
                    checkpoint.display(),
                    ckpt.method.as_str(),
                    want.as_str()
                )));
            }
            let cond = parse_condition(&condition)?;
            let want_dim = ckpt.model.config().condition_dim;
            if cond.dim() != want_dim {
                return Err(Error::contract(format!(
                    "condition has {} bits but the checkpoint expects {}",
                    cond.dim(),
                    want_dim
                )));
            }
            let conditions = vec![cond; n];
            let ds = flowgen::harness::generate(
                &ckpt,
                &conditions,
                OdeMethod::parse(&ode_method)?,
                nfe,
                seed,
                threads_from_env()?,
            )?;
            save_dataset(&ds, &out)?;
            println!("wrote {} generated signals to {}", n, out.display());
        }
        Cmd::Evaluate {
            real,
            generated,
            opts,
            out,
        } => {
            let real = load_dataset(&real)?;
            let generated = load_dataset(&generated)?;
            let opts: EvalOptions = match opts {
                Some(p) => read_json(&p, "metric options")?,
                None => EvalOptions::default(),
            };
            let report = evaluate_all(&real, &generated, &opts)?;
            let json = report.to_json();
            if let Some(p) = out {
                std::fs::write(&p, &json)?;
            }
            println!("{json}");
        }
        Cmd::RunExperiment { config, out_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out_dir {
                cfg.output_dir = dir;
            }
            let out = run_experiment(&cfg, threads_from_env()?)?;
            println!("experiment artifacts in {}", out.display());
        }
        Cmd::RenderPlot { sweep, out } => {
            let rows = parse_sweep_csv(&std::fs::read_to_string(&sweep)?)?;
            std::fs::write(&out, render_sweep_plot(&rows)?)?;
            println!("wrote {}", out.display());
        }
        Cmd::ImportCsv {
            input,
            sample_rate_hz,
            condition,
            out,
        } => {
            let cond = parse_condition(&condition)?;
            let ds = import_csv(&input, sample_rate_hz, cond)?;
            save_dataset(&ds, &out)?;
            println!(
                "imported 1 signal ({} ch x {} samples) to {}",
                ds.channels(),
                ds.samples(),
                out.display()
            );
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Contract(_) => 2,
        Error::Format(_) | Error::Io(_) => 3,
        Error::NonFinite { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
