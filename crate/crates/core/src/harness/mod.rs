//! End-to-end experiment driver: synthesize a dataset, train both
//! generators on it, sweep the sampling budget, and emit metric
//! reports, CSV tables, and an SVG figure.
//!
//! Every artifact is a pure function of the config. A single master
//! seed fans out to every random consumer through
//! [`crate::rng::child_seed`] with these component labels:
//!
//! | component     | index | consumer                         |
//! |---------------|-------|----------------------------------|
//! | `dataset`     | 0     | synthetic dataset draw           |
//! | `train-fm`    | 0     | flow-matching training           |
//! | `train-ddpm`  | 0     | diffusion training               |
//! | `sample-fm`   | nfe   | flow-matching generation at nfe  |
//! | `sample-ddpm` | nfe   | diffusion generation at nfe      |
//! | `eval`        | 0     | metric subsampling               |

pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffusion::{ancestral_batch, ScheduleSpec};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_all, DtwDist, EvalOptions, PairingPolicy};
use crate::nn::{save_model, AdamParams, Checkpoint, Method, TrainConfig};
use crate::ode::{batch_generate, OdeMethod};
use crate::rng::child_seed;
use crate::signal::{ConditionVector, LabeledDataset, MultiLeadSignal};
use crate::synth::{synth_dataset, SynthSpec};
use crate::{dataset_io, diffusion, flow};

pub use plot::{parse_sweep_csv, render_sweep_plot, SweepRow, SWEEP_CSV_HEADER};

pub const CONFIG_VERSION: u32 = 1;

fn default_nfe_list() -> Vec<usize> {
    vec![2, 5, 10, 25, 50, 100, 200]
}

/// Shape of the synthetic dataset. Seedless: the draw is seeded from
/// the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_signals: usize,
    pub channels: usize,
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub condition_dim: usize,
    pub noise_std: f64,
    pub bumps_per_beat: usize,
    /// See the synthesis spec: `Some(k)` collapses each condition to a
    /// k-mode phase mixture.
    pub phase_levels: Option<usize>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_signals: 256,
            channels: 2,
            samples: 64,
            sample_rate_hz: 100.0,
            condition_dim: 4,
            noise_std: 0.05,
            bumps_per_beat: 3,
            phase_levels: None,
        }
    }
}

impl DatasetSpec {
    fn to_synth_spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            n_signals: self.n_signals,
            channels: self.channels,
            samples: self.samples,
            sample_rate_hz: self.sample_rate_hz,
            condition_dim: self.condition_dim,
            rng_seed: seed,
            noise_std: self.noise_std,
            bumps_per_beat: self.bumps_per_beat,
            phase_levels: self.phase_levels,
        }
    }
}

/// Model and optimizer settings shared by both training arms.
/// Seedless for the same reason as [`DatasetSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub steps: usize,
    pub batch_size: usize,
    pub hidden_sizes: Vec<usize>,
    pub time_embed_width: usize,
    pub adam: AdamParams,
    pub ema_decay: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        let tc = TrainConfig::default();
        Self {
            steps: tc.steps,
            batch_size: tc.batch_size,
            hidden_sizes: tc.hidden_sizes,
            time_embed_width: tc.time_embed_width,
            adam: tc.adam,
            ema_decay: tc.ema_decay,
        }
    }
}

impl TrainSpec {
    fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            hidden_sizes: self.hidden_sizes.clone(),
            time_embed_width: self.time_embed_width,
            adam: self.adam,
            ema_decay: self.ema_decay,
            seed,
        }
    }
}

/// Metric settings; the subsampling seed comes from the master seed.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub dtw_dist: DtwDist,
    pub pairing: PairingPolicy,
    pub max_dtw_pairs: Option<usize>,
}

impl EvalSpec {
    fn to_eval_options(&self, seed: u64) -> EvalOptions {
        EvalOptions {
            dtw_dist: self.dtw_dist,
            pairing: self.pairing,
            seed,
            max_dtw_pairs: self.max_dtw_pairs,
        }
    }
}

/// Full experiment description. JSON on disk; unknown keys are
/// rejected so a typo cannot silently fall back to a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Master seed; see the module docs for the fan-out scheme.
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub train: TrainSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_nfe_list")]
    pub nfe_list: Vec<usize>,
    #[serde(default)]
    pub eval: EvalSpec,
    /// Signals to generate per sweep point; defaults to the dataset
    /// size so index-aligned pairing covers everything.
    #[serde(default)]
    pub n_generated: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::contract(format!("invalid experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Collects every offending field instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.version != CONFIG_VERSION {
            bad.push(format!(
                "version: got {}, this build reads {CONFIG_VERSION}",
                self.version
            ));
        }
        if self.dataset.n_signals == 0 {
            bad.push("dataset.n_signals: must be at least 1".into());
        }
        if self.dataset.channels == 0 {
            bad.push("dataset.channels: must be at least 1".into());
        }
        if self.dataset.samples < 2 {
            bad.push("dataset.samples: must be at least 2".into());
        }
        if !(self.dataset.sample_rate_hz > 0.0) {
            bad.push("dataset.sample_rate_hz: must be positive".into());
        }
        if self.dataset.condition_dim == 0 {
            bad.push("dataset.condition_dim: must be at least 1".into());
        }
        if !(self.dataset.noise_std >= 0.0) {
            bad.push("dataset.noise_std: must be non-negative".into());
        }
        if let Err(e) = self.train.to_train_config(0).validate() {
            bad.push(format!("train: {e}"));
        }
        if let Err(e) = self.schedule.validate() {
            bad.push(format!("schedule: {e}"));
        }
        if self.nfe_list.is_empty() {
            bad.push("nfe_list: must not be empty".into());
        }
        for (i, &nfe) in self.nfe_list.iter().enumerate() {
            if nfe == 0 {
                bad.push(format!("nfe_list[{i}]: must be at least 1"));
            } else if nfe > self.schedule.t_count {
                bad.push(format!(
                    "nfe_list[{i}]: {nfe} exceeds schedule.t_count = {} (the diffusion \
                     sampler cannot take more steps than the schedule has)",
                    self.schedule.t_count
                ));
            }
        }
        if self.eval.max_dtw_pairs == Some(0) {
            bad.push("eval.max_dtw_pairs: must be at least 1 when set".into());
        }
        if self.n_generated == Some(0) {
            bad.push("n_generated: must be at least 1 when set".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "invalid experiment config: {}",
                bad.join("; ")
            )))
        }
    }
}

/// Draw signals from a checkpoint under a fixed function-evaluation
/// budget, dispatching on the training method. Flow-matching
/// checkpoints integrate with `ode_method`; diffusion checkpoints
/// ignore it and run the strided ancestral sampler.
pub fn generate(
    ckpt: &Checkpoint,
    conditions: &[ConditionVector],
    ode_method: OdeMethod,
    nfe: usize,
    seed: u64,
    threads: usize,
) -> Result<LabeledDataset> {
    let cfg = ckpt.model.config();
    let dim = cfg.signal_dim();
    let states = match ckpt.method {
        Method::FlowMatching => {
            batch_generate(&ckpt.model, conditions, dim, ode_method, nfe, seed, threads)?
        }
        Method::Ddpm => {
            let spec = ckpt.schedule.as_ref().ok_or_else(|| {
                Error::contract("ddpm checkpoint is missing its noise schedule")
            })?;
            let schedule = spec.build()?;
            ancestral_batch(&ckpt.model, &schedule, conditions, dim, nfe, seed, threads)?
        }
    };
    let signals = states
        .into_iter()
        .map(|data| {
            MultiLeadSignal::with_default_names(
                data,
                cfg.channels,
                cfg.samples,
                cfg.sample_rate_hz,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(signals, conditions.to_vec())
}

/// Write a per-step loss trace as `step,loss` CSV.
pub fn write_loss_csv(path: impl AsRef<Path>, losses: &[f64]) -> Result<()> {
    let mut out = String::from("step,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

fn condition_cycle(ds: &LabeledDataset, n: usize) -> Vec<ConditionVector> {
    (0..n).map(|i| ds.condition(i % ds.len()).clone()).collect()
}

/// Run the whole experiment described by `config`: dataset, two
/// trainings, a sweep of sampling budgets for each method, and the
/// summary artifacts. Returns the output directory.
///
/// Artifacts: `dataset.fgts`, `fm.fgmd`, `ddpm.fgmd`, `fm_loss.csv`,
/// `ddpm_loss.csv`, `report_{method}_nfe{n}.json`, `sweep.csv`,
/// `table1.csv`, `figure2.svg`. Everything except the `wall_ms`
/// column of `sweep.csv` is byte-deterministic in the config.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<PathBuf> {
    config.validate()?;
    let out = &config.output_dir;
    fs::create_dir_all(out)?;

    let ds = synth_dataset(
        &config
            .dataset
            .to_synth_spec(child_seed(config.seed, "dataset", 0)),
    )?;
    dataset_io::save_dataset(&ds, out.join("dataset.fgts"))?;

    let fm_tc = config
        .train
        .to_train_config(child_seed(config.seed, "train-fm", 0));
    let (fm_ckpt, fm_losses) = flow::train_flow(&ds, &fm_tc)?;
    save_model(&fm_ckpt, out.join("fm.fgmd"))?;
    write_loss_csv(out.join("fm_loss.csv"), &fm_losses)?;

    let ddpm_tc = config
        .train
        .to_train_config(child_seed(config.seed, "train-ddpm", 0));
    let (ddpm_ckpt, ddpm_losses) = diffusion::train_ddpm(&ds, config.schedule, &ddpm_tc)?;
    save_model(&ddpm_ckpt, out.join("ddpm.fgmd"))?;
    write_loss_csv(out.join("ddpm_loss.csv"), &ddpm_losses)?;

    let n_gen = config.n_generated.unwrap_or(ds.len());
    let conditions = condition_cycle(&ds, n_gen);
    let eval_opts = config.eval.to_eval_options(child_seed(config.seed, "eval", 0));

    let mut nfes = config.nfe_list.clone();
    nfes.sort_unstable();
    nfes.dedup();

    let mut rows = Vec::new();
    for (ckpt, sample_label) in [(&fm_ckpt, "sample-fm"), (&ddpm_ckpt, "sample-ddpm")] {
        let method = ckpt.method.as_str();
        for &nfe in &nfes {
            let started = Instant::now();
            let gen = generate(
                ckpt,
                &conditions,
                OdeMethod::Euler,
                nfe,
                child_seed(config.seed, sample_label, nfe as u64),
                threads,
            )?;
            let report = evaluate_all(&ds, &gen, &eval_opts)?;
            let wall_ms = started.elapsed().as_millis() as u64;
            fs::write(
                out.join(format!("report_{method}_nfe{nfe}.json")),
                report.to_json(),
            )?;
            rows.push(SweepRow {
                method: method.to_string(),
                nfe,
                dtw: report.dtw,
                wasserstein: report.wasserstein,
                mmd2: report.mmd2,
                spec_sim: report.spectral_similarity,
                wall_ms,
            });
        }
    }

    let mut sweep = String::from(SWEEP_CSV_HEADER);
    sweep.push('\n');
    for r in &rows {
        sweep.push_str(&r.to_csv_row());
        sweep.push('\n');
    }
    fs::write(out.join("sweep.csv"), &sweep)?;

    let max_nfe = *nfes.last().expect("validated non-empty");
    let mut table = String::from("method,nfe,dtw,wasserstein,mmd2,spec_sim\n");
    for r in rows.iter().filter(|r| r.nfe == max_nfe) {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, r.nfe, r.dtw, r.wasserstein, r.mmd2, r.spec_sim
        ));
    }
    fs::write(out.join("table1.csv"), table)?;

    fs::write(out.join("figure2.svg"), render_sweep_plot(&rows)?)?;
    Ok(out.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricReport;

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            version: 1,
            seed: 11,
            output_dir: dir.to_path_buf(),
            dataset: DatasetSpec {
                n_signals: 16,
                channels: 2,
                samples: 64,
                sample_rate_hz: 100.0,
                condition_dim: 4,
                noise_std: 0.05,
                bumps_per_beat: 3,
                phase_levels: None,
            },
            train: TrainSpec {
                steps: 200,
                batch_size: 4,
                hidden_sizes: vec![16],
                time_embed_width: 4,
                adam: AdamParams::default(),
                ema_decay: 0.99,
            },
            schedule: ScheduleSpec {
                t_count: 40,
                ..ScheduleSpec::default()
            },
            nfe_list: vec![2, 8],
            eval: EvalSpec::default(),
            n_generated: None,
        }
    }

    #[test]
    fn minimal_config_emits_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(&dir.path().join("exp"));
        let out = run_experiment(&cfg, 2).unwrap();
        for name in [
            "dataset.fgts",
            "fm.fgmd",
            "ddpm.fgmd",
            "fm_loss.csv",
            "ddpm_loss.csv",
            "report_fm_nfe2.json",
            "report_fm_nfe8.json",
            "report_ddpm_nfe2.json",
            "report_ddpm_nfe8.json",
            "sweep.csv",
            "table1.csv",
            "figure2.svg",
        ] {
            assert!(out.join(name).exists(), "missing {name}");
        }
        let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
        // header + |methods| x |nfe_list| rows
        assert_eq!(sweep.lines().count(), 1 + 4);
        let report = MetricReport::from_json(
            &std::fs::read_to_string(out.join("report_fm_nfe8.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report.n_real, 16);
        assert_eq!(report.n_generated, 16);
    }

    /// Strips the wall-clock column, the one permitted source of
    /// nondeterminism.
    fn strip_wall_ms(csv: &str) -> String {
        csv.lines()
            .map(|l| l.rsplit_once(',').expect("7 columns").0)
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn rerun_is_byte_identical_apart_from_wall_time() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_a = tiny_config(&dir.path().join("a"));
        let cfg_b = ExperimentConfig {
            output_dir: dir.path().join("b"),
            ..cfg_a.clone()
        };
        let out_a = run_experiment(&cfg_a, 1).unwrap();
        let out_b = run_experiment(&cfg_b, 3).unwrap();
        let sweep_a = std::fs::read_to_string(out_a.join("sweep.csv")).unwrap();
        let sweep_b = std::fs::read_to_string(out_b.join("sweep.csv")).unwrap();
        assert_eq!(strip_wall_ms(&sweep_a), strip_wall_ms(&sweep_b));
        let svg_a = std::fs::read(out_a.join("figure2.svg")).unwrap();
        let svg_b = std::fs::read(out_b.join("figure2.svg")).unwrap();
        assert_eq!(svg_a, svg_b);
        let fm_a = std::fs::read(out_a.join("fm.fgmd")).unwrap();
        let fm_b = std::fs::read(out_b.join("fm.fgmd")).unwrap();
        assert_eq!(fm_a, fm_b);
    }

    #[test]
    fn oversized_nfe_is_named_in_the_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.nfe_list = vec![2, 500];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("nfe_list[1]"), "{err}");
        assert!(err.contains("500"), "{err}");
        assert!(err.contains("t_count"), "{err}");
    }

    #[test]
    fn validation_lists_every_offending_field() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.version = 9;
        cfg.dataset.n_signals = 0;
        cfg.nfe_list = vec![];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
        assert!(err.contains("dataset.n_signals"), "{err}");
        assert!(err.contains("nfe_list"), "{err}");
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = ExperimentConfig::from_json(
            r#"{"version":1,"seed":1,"output_dir":"x","nfe_lst":[2]}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("nfe_lst"), "{err}");
    }

    #[test]
    fn config_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.nfe_list, cfg.nfe_list);
        assert_eq!(back.train.steps, cfg.train.steps);
    }

    #[test]
    fn generate_rejects_a_ddpm_checkpoint_without_schedule() {
        use crate::nn::{ModelConfig, VelocityModel};
        let cfg = ModelConfig {
            channels: 1,
            samples: 8,
            sample_rate_hz: 10.0,
            condition_dim: 2,
            time_embed_width: 2,
            hidden_sizes: vec![4],
        };
        let model = VelocityModel::init(cfg, 3).unwrap();
        let ckpt = Checkpoint {
            method: Method::Ddpm,
            model,
            adam: AdamParams::default(),
            schedule: None,
        };
        let conds = vec![ConditionVector::new(vec![1, 0]).unwrap()];
        assert!(generate(&ckpt, &conds, OdeMethod::Euler, 2, 0, 1).is_err());
    }

    #[test]
    fn generation_dispatch_is_deterministic_per_method() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(&dir.path().join("exp"));
        let ds = synth_dataset(&cfg.dataset.to_synth_spec(5)).unwrap();
        let tc = cfg.train.to_train_config(7);
        let (fm, _) = flow::train_flow(&ds, &tc).unwrap();
        let conds = condition_cycle(&ds, 4);
        let a = generate(&fm, &conds, OdeMethod::Euler, 4, 42, 1).unwrap();
        let b = generate(&fm, &conds, OdeMethod::Euler, 4, 42, 2).unwrap();
        for (x, y) in a.signals().iter().zip(b.signals()) {
            assert_eq!(x.data(), y.data());
        }
    }
}
