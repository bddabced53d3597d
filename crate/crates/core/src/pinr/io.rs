//! Binary model files.
//!
//! Little-endian layout: magic `PINR`, `u32` version, `u32` stage count,
//! then per stage `u32` frequency count, `u32` hidden-layer count, `u32`
//! hidden widths, `u32` channels, `f64 P[2]`, the `i32` multiplier matrix,
//! `f64` phases, per hidden layer the weight matrix (row-major, rows =
//! outputs) and bias, and finally the output matrix (channels x width)
//! and bias. Version 1 covers integer first layers; version 2 adds a
//! per-stage first-layer tag so SIREN-initialized (continuous-frequency)
//! networks can round-trip too.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use super::{DenseLayer, FirstLayer, FrequencySet, PeriodicInr};
use crate::diffcore::Tensor;

const MAGIC: &[u8; 4] = b"PINR";
const VERSION_INTEGER: u32 = 1;
const VERSION_TAGGED: u32 = 2;
const KIND_INTEGER: u32 = 0;
const KIND_CONTINUOUS: u32 = 1;
// Guards against allocating absurd buffers for corrupt headers.
const MAX_DIM: u32 = 1 << 24;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes; not a model file")]
    BadMagic,
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated while reading {field}{}", stage_label(*.stage))]
    Truncated {
        stage: Option<usize>,
        field: &'static str,
    },
    #[error("invalid model data: {0}")]
    Invalid(String),
}

fn stage_label(stage: Option<usize>) -> String {
    match stage {
        Some(i) => format!(" of stage {i}"),
        None => String::new(),
    }
}

/// Write stages to a model file. A single network is stored as one stage.
pub fn save_model(stages: &[PeriodicInr], path: &Path) -> Result<(), ModelError> {
    if stages.is_empty() {
        return Err(ModelError::Invalid("no stages to save".into()));
    }
    let tagged = stages
        .iter()
        .any(|s| matches!(s.first, FirstLayer::Continuous { .. }));
    let version = if tagged { VERSION_TAGGED } else { VERSION_INTEGER };

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(version)?;
    w.write_u32::<LittleEndian>(stages.len() as u32)?;

    for stage in stages {
        if tagged {
            let kind = match stage.first {
                FirstLayer::Integer(_) => KIND_INTEGER,
                FirstLayer::Continuous { .. } => KIND_CONTINUOUS,
            };
            w.write_u32::<LittleEndian>(kind)?;
        }
        let n = stage.freq_count();
        w.write_u32::<LittleEndian>(n as u32)?;
        w.write_u32::<LittleEndian>(stage.hidden.len() as u32)?;
        for layer in &stage.hidden {
            w.write_u32::<LittleEndian>(layer.w.shape()[1] as u32)?;
        }
        w.write_u32::<LittleEndian>(stage.channels as u32)?;
        let p = stage.period();
        w.write_f64::<LittleEndian>(p[0])?;
        w.write_f64::<LittleEndian>(p[1])?;

        match &stage.first {
            FirstLayer::Integer(freq) => {
                for k in freq.multipliers() {
                    w.write_i32::<LittleEndian>(k[0])?;
                    w.write_i32::<LittleEndian>(k[1])?;
                }
            }
            FirstLayer::Continuous { omega, .. } => {
                for row in omega {
                    w.write_f64::<LittleEndian>(row[0])?;
                    w.write_f64::<LittleEndian>(row[1])?;
                }
            }
        }
        for v in stage.phi.data() {
            w.write_f64::<LittleEndian>(*v)?;
        }
        for layer in &stage.hidden {
            write_transposed(&mut w, &layer.w)?;
            for v in layer.b.data() {
                w.write_f64::<LittleEndian>(*v)?;
            }
        }
        write_transposed(&mut w, &stage.out.w)?;
        for v in stage.out.b.data() {
            w.write_f64::<LittleEndian>(*v)?;
        }
    }
    w.flush()?;
    Ok(())
}

// Internal layout is input-major; the file stores rows = outputs.
fn write_transposed<W: Write>(w: &mut W, t: &Tensor) -> Result<(), ModelError> {
    let (rows, cols) = (t.shape()[0], t.shape()[1]);
    let data = t.data();
    for j in 0..cols {
        for i in 0..rows {
            w.write_f64::<LittleEndian>(data[i * cols + j])?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
    stage: Option<usize>,
}

impl<R: Read> Reader<R> {
    fn trunc(&self, field: &'static str) -> ModelError {
        ModelError::Truncated {
            stage: self.stage,
            field,
        }
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, ModelError> {
        self.inner
            .read_u32::<LittleEndian>()
            .map_err(|_| self.trunc(field))
    }

    fn dim(&mut self, field: &'static str) -> Result<usize, ModelError> {
        let v = self.u32(field)?;
        if v > MAX_DIM {
            return Err(ModelError::Invalid(format!(
                "{field} = {v} exceeds the sanity limit"
            )));
        }
        Ok(v as usize)
    }

    fn f64s(&mut self, n: usize, field: &'static str) -> Result<Vec<f64>, ModelError> {
        let mut out = vec![0.0; n];
        self.inner
            .read_f64_into::<LittleEndian>(&mut out)
            .map_err(|_| self.trunc(field))?;
        Ok(out)
    }

    fn i32s(&mut self, n: usize, field: &'static str) -> Result<Vec<i32>, ModelError> {
        let mut out = vec![0; n];
        self.inner
            .read_i32_into::<LittleEndian>(&mut out)
            .map_err(|_| self.trunc(field))?;
        Ok(out)
    }
}

/// Read a model file back into its stages.
pub fn load_model(path: &Path) -> Result<Vec<PeriodicInr>, ModelError> {
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
        stage: None,
    };

    let mut magic = [0u8; 4];
    r.inner.read_exact(&mut magic).map_err(|_| r.trunc("magic"))?;
    if &magic != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION_INTEGER && version != VERSION_TAGGED {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let n_stages = r.dim("stage count")?;
    if n_stages == 0 {
        return Err(ModelError::Invalid("model has zero stages".into()));
    }

    let mut stages = Vec::with_capacity(n_stages);
    for si in 0..n_stages {
        r.stage = Some(si);
        let kind = if version == VERSION_TAGGED {
            r.u32("first-layer kind")?
        } else {
            KIND_INTEGER
        };
        let n_freq = r.dim("frequency count")?;
        let n_hidden = r.dim("hidden-layer count")?;
        let mut widths = Vec::with_capacity(n_hidden);
        for _ in 0..n_hidden {
            widths.push(r.dim("hidden width")?);
        }
        let channels = r.dim("channels")?;
        let p = r.f64s(2, "period")?;
        let period = [p[0], p[1]];

        let first = match kind {
            KIND_INTEGER => {
                let raw = r.i32s(n_freq * 2, "frequency multipliers")?;
                let mult: Vec<[i32; 2]> = raw.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
                let freq = FrequencySet::new(mult, period)
                    .map_err(|e| ModelError::Invalid(format!("stage {si}: {e}")))?;
                FirstLayer::Integer(freq)
            }
            KIND_CONTINUOUS => {
                let raw = r.f64s(n_freq * 2, "frequency matrix")?;
                let omega: Vec<[f64; 2]> = raw.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
                FirstLayer::Continuous { omega, period }
            }
            other => {
                return Err(ModelError::Invalid(format!(
                    "stage {si}: unknown first-layer kind {other}"
                )))
            }
        };

        let phi_data = r.f64s(n_freq, "phases")?;
        let phi = Tensor::param(vec![1, n_freq], phi_data).expect("phi dims");

        let mut hidden = Vec::with_capacity(n_hidden);
        let mut fan_in = n_freq;
        for &width in &widths {
            let w_data = r.f64s(width * fan_in, "hidden weights")?;
            let b_data = r.f64s(width, "hidden bias")?;
            hidden.push(DenseLayer {
                w: transposed_param(&w_data, width, fan_in),
                b: Tensor::param(vec![1, width], b_data).expect("bias dims"),
            });
            fan_in = width;
        }

        let c_data = r.f64s(channels * fan_in, "output weights")?;
        let c0_data = r.f64s(channels, "output bias")?;
        let out = DenseLayer {
            w: transposed_param(&c_data, channels, fan_in),
            b: Tensor::param(vec![1, channels], c0_data).expect("c0 dims"),
        };

        let stage = PeriodicInr::from_parts(first, phi, hidden, out)
            .map_err(|e| ModelError::Invalid(format!("stage {si}: {e}")))?;
        stages.push(stage);
    }
    Ok(stages)
}

// File stores rows = outputs; internal layout is input-major.
fn transposed_param(file_data: &[f64], file_rows: usize, file_cols: usize) -> Tensor {
    let mut data = vec![0.0; file_rows * file_cols];
    for i in 0..file_rows {
        for j in 0..file_cols {
            data[j * file_rows + i] = file_data[i * file_cols + j];
        }
    }
    Tensor::param(vec![file_cols, file_rows], data).expect("matrix dims")
}
