//! Dataset file format and CSV import.
//!
//! Binary layout (little-endian): magic `FGTS`, format version u16,
//! n_signals u32, channels u16, samples u32, sample_rate_hz f32,
//! condition_dim u16; then per signal channels*samples f32 amplitudes
//! row-major followed by condition_dim bytes of {0,1}.
//!
//! Amplitudes are stored as f32 and widened to f64 in memory, so the
//! first save quantizes; any file round-trips bit-exactly after that.
//! Lead names are not part of the format — loading assigns the 8/12-lead
//! presets or generic names by channel count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::binio::Reader;
use crate::error::{FormatError, Result};
use crate::signal::{default_lead_names, ConditionVector, LabeledDataset, MultiLeadSignal};

pub const DATASET_MAGIC: [u8; 4] = *b"FGTS";
pub const DATASET_VERSION: u16 = 1;

pub fn save_dataset(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&(ds.len() as u32).to_le_bytes())?;
    w.write_all(&(ds.channels() as u16).to_le_bytes())?;
    w.write_all(&(ds.samples() as u32).to_le_bytes())?;
    w.write_all(&(ds.sample_rate_hz() as f32).to_le_bytes())?;
    w.write_all(&(ds.condition_dim() as u16).to_le_bytes())?;
    for i in 0..ds.len() {
        for &v in ds.signal(i).data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        w.write_all(ds.condition(i).bits())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let mut r = Reader::new(BufReader::new(File::open(path)?));

    let magic = r.take::<4>("magic")?;
    if magic != DATASET_MAGIC {
        return Err(FormatError::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        }
        .into());
    }
    let version = r.u16("version")?;
    if version != DATASET_VERSION {
        return Err(FormatError::Version(version).into());
    }
    let n_signals = r.u32("n_signals")? as usize;
    let channels = r.u16("channels")? as usize;
    let samples = r.u32("samples")? as usize;
    let sample_rate = r.f32("sample_rate_hz")? as f64;
    let condition_dim = r.u16("condition_dim")? as usize;

    if n_signals == 0 || channels == 0 || samples < 2 || condition_dim == 0 {
        return Err(FormatError::Shape(format!(
            "header declares {n_signals} signals of {channels}x{samples} with condition dim {condition_dim}"
        ))
        .into());
    }

    let names = default_lead_names(channels);
    let mut signals = Vec::with_capacity(n_signals);
    let mut conditions = Vec::with_capacity(n_signals);
    for i in 0..n_signals {
        let mut data = Vec::with_capacity(channels * samples);
        for _ in 0..channels * samples {
            data.push(r.f32(&format!("signal {i} payload"))? as f64);
        }
        let mut bits = vec![0u8; condition_dim];
        for (j, b) in bits.iter_mut().enumerate() {
            let byte = r.take::<1>(&format!("signal {i} condition"))?[0];
            if byte > 1 {
                return Err(FormatError::Shape(format!(
                    "signal {i} condition bit {j} is {byte}, expected 0 or 1"
                ))
                .into());
            }
            *b = byte;
        }
        signals.push(
            MultiLeadSignal::new(data, channels, samples, sample_rate, names.clone())
                .map_err(|e| FormatError::Shape(e.to_string()))?,
        );
        conditions.push(
            ConditionVector::new(bits).map_err(|e| FormatError::Shape(e.to_string()))?,
        );
    }
    LabeledDataset::new(signals, conditions)
}

/// Import one signal from a CSV file: a header row of lead names, then
/// one channel per column. The sample rate is not part of the file and
/// must be supplied.
pub fn import_csv(
    path: impl AsRef<Path>,
    sample_rate_hz: f64,
    condition: ConditionVector,
) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| FormatError::Csv {
            line: 1,
            msg: "empty file, expected a header row of lead names".into(),
        })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.is_empty() || names.iter().any(|n| n.is_empty()) {
        return Err(FormatError::Csv {
            line: 1,
            msg: "header must list one non-empty lead name per column".into(),
        }
        .into());
    }
    let channels = names.len();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); channels];
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != channels {
            return Err(FormatError::Csv {
                line: lineno,
                msg: format!("expected {channels} columns, found {}", fields.len()),
            }
            .into());
        }
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| FormatError::Csv {
                line: lineno,
                msg: format!("cannot parse {:?} as a number", field.trim()),
            })?;
            columns[c].push(v);
        }
    }

    let samples = columns[0].len();
    if samples < 2 {
        return Err(FormatError::Csv {
            line: 1,
            msg: format!("need at least 2 sample rows, found {samples}"),
        }
        .into());
    }
    let mut data = Vec::with_capacity(channels * samples);
    for col in &columns {
        data.extend_from_slice(col);
    }
    let signal = MultiLeadSignal::new(data, channels, samples, sample_rate_hz, names)?;
    LabeledDataset::new(vec![signal], vec![condition])
}
