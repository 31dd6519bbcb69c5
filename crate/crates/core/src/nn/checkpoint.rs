//! Model checkpoint format.
//!
//! Binary layout (little-endian): magic `FGMD`, format version u16,
//! method u8 (0 = flow matching, 1 = ddpm), channels u16, samples u32,
//! sample_rate_hz f32, condition_dim u16, time_embed_width u16, a
//! schedule block (present u8; if 1: t_count u32, beta_min f64,
//! beta_max f64), optimizer hyperparameters (lr, beta1, beta2, eps as
//! f64), layer count u16, then per layer rows u32, cols u32, row-major
//! f64 weights, f64 bias. Weights are f64 on disk, so save/load is
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{AdamParams, Dense, ModelConfig, VelocityModel};
use crate::binio::Reader;
use crate::diffusion::ScheduleSpec;
use crate::error::{FormatError, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FGMD";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Which generative method the weights were trained for. Samplers
/// refuse checkpoints trained for the other method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FlowMatching,
    Ddpm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FlowMatching => "fm",
            Method::Ddpm => "ddpm",
        }
    }

    fn code(self) -> u8 {
        match self {
            Method::FlowMatching => 0,
            Method::Ddpm => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Method::FlowMatching),
            1 => Ok(Method::Ddpm),
            other => Err(FormatError::Shape(format!("unknown method code {other}")).into()),
        }
    }
}

/// A trained model together with everything needed to sample from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub method: Method,
    pub model: VelocityModel,
    pub adam: AdamParams,
    /// Noise schedule parameters; present iff `method` is ddpm.
    pub schedule: Option<ScheduleSpec>,
}

pub fn save_model(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let cfg = ckpt.model.config();
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&[ckpt.method.code()])?;
    w.write_all(&(cfg.channels as u16).to_le_bytes())?;
    w.write_all(&(cfg.samples as u32).to_le_bytes())?;
    w.write_all(&(cfg.sample_rate_hz as f32).to_le_bytes())?;
    w.write_all(&(cfg.condition_dim as u16).to_le_bytes())?;
    w.write_all(&(cfg.time_embed_width as u16).to_le_bytes())?;
    match &ckpt.schedule {
        Some(s) => {
            w.write_all(&[1u8])?;
            w.write_all(&(s.t_count as u32).to_le_bytes())?;
            w.write_all(&s.beta_min.to_le_bytes())?;
            w.write_all(&s.beta_max.to_le_bytes())?;
        }
        None => w.write_all(&[0u8])?,
    }
    for v in [ckpt.adam.lr, ckpt.adam.beta1, ckpt.adam.beta2, ckpt.adam.eps] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(ckpt.model.layers().len() as u16).to_le_bytes())?;
    for layer in ckpt.model.layers() {
        w.write_all(&(layer.rows as u32).to_le_bytes())?;
        w.write_all(&(layer.cols as u32).to_le_bytes())?;
        for v in layer.w.iter().chain(&layer.b) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut r = Reader::new(BufReader::new(File::open(path)?));

    let magic = r.take::<4>("magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: magic,
        }
        .into());
    }
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::Version(version).into());
    }
    let method = Method::from_code(r.u8("method")?)?;
    let channels = r.u16("channels")? as usize;
    let samples = r.u32("samples")? as usize;
    let sample_rate_hz = r.f32("sample_rate_hz")? as f64;
    let condition_dim = r.u16("condition_dim")? as usize;
    let time_embed_width = r.u16("time_embed_width")? as usize;
    let schedule = match r.u8("schedule flag")? {
        0 => None,
        1 => Some(ScheduleSpec {
            t_count: r.u32("schedule t_count")? as usize,
            beta_min: r.f64("schedule beta_min")?,
            beta_max: r.f64("schedule beta_max")?,
        }),
        other => {
            return Err(FormatError::Shape(format!("schedule flag is {other}, expected 0 or 1")).into())
        }
    };
    if (method == Method::Ddpm) != schedule.is_some() {
        return Err(FormatError::Shape(
            "schedule block must be present exactly for ddpm checkpoints".into(),
        )
        .into());
    }
    let adam = AdamParams {
        lr: r.f64("adam lr")?,
        beta1: r.f64("adam beta1")?,
        beta2: r.f64("adam beta2")?,
        eps: r.f64("adam eps")?,
    };

    let layer_count = r.u16("layer count")? as usize;
    if layer_count == 0 {
        return Err(FormatError::Shape("checkpoint declares zero layers".into()).into());
    }
    // Cap plausible layer shapes so a corrupt byte cannot request an
    // enormous allocation before truncation is noticed.
    const MAX_LAYER_PARAMS: usize = 1 << 26;
    let mut layers = Vec::with_capacity(layer_count);
    for li in 0..layer_count {
        let rows = r.u32(&format!("layer {li} rows"))? as usize;
        let cols = r.u32(&format!("layer {li} cols"))? as usize;
        if rows == 0 || cols == 0 || rows.saturating_mul(cols) > MAX_LAYER_PARAMS {
            return Err(FormatError::Shape(format!(
                "layer {li} has implausible shape {rows}x{cols}"
            ))
            .into());
        }
        let mut w = Vec::new();
        for _ in 0..rows * cols {
            w.push(r.f64(&format!("layer {li} weights"))?);
        }
        let mut b = Vec::new();
        for _ in 0..rows {
            b.push(r.f64(&format!("layer {li} bias"))?);
        }
        layers.push(Dense { rows, cols, w, b });
    }

    let hidden_sizes: Vec<usize> = layers[..layer_count - 1].iter().map(|l| l.rows).collect();
    let cfg = ModelConfig {
        channels,
        samples,
        sample_rate_hz,
        condition_dim,
        time_embed_width,
        hidden_sizes,
    };
    cfg.validate().map_err(|e| FormatError::Shape(e.to_string()))?;

    // The layer chain must agree with the declared signal shape.
    let mut expect_cols = cfg.input_dim();
    for (li, layer) in layers.iter().enumerate() {
        if layer.cols != expect_cols {
            return Err(FormatError::Shape(format!(
                "layer {li} expects {} inputs but the chain provides {expect_cols}",
                layer.cols
            ))
            .into());
        }
        expect_cols = layer.rows;
    }
    if expect_cols != cfg.signal_dim() {
        return Err(FormatError::Shape(format!(
            "final layer emits {expect_cols} values but the signal shape needs {}",
            cfg.signal_dim()
        ))
        .into());
    }

    Ok(Checkpoint {
        method,
        model: VelocityModel::from_parts(cfg, layers),
        adam,
        schedule,
    })
}
