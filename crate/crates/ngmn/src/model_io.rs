//! Binary model persistence.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic              4 bytes  "NGMN"
//! version            u16      currently 1
//! hidden layer count u32, then that many u32 widths
//! activation id      u8       0 sigmoid, 1 leaky relu, 2 tanh, 3 identity
//! activation param   f64      leaky relu slope, 0 otherwise
//! clip epsilon       f64
//! lambda             f64
//! alpha mode         u8       0 self-tuned, 1 fixed gamma, 2 uniform
//! gamma value        f64      fixed-gamma value, 0 otherwise
//! seed               u64
//! matrices                    rows u32, cols u32, row-major f64 payload
//!   per ridge layer:          W (d_in x d_out), b (d_out x 1)
//!   head:                     W, b (c x 1), alpha (n x 1), M (c x n)
//! ```
//!
//! The training trace is not part of the artifact; loading yields an empty
//! trace. Matrix payloads are validated (finite, sane sizes against the
//! remaining byte count) so corrupt or truncated files fail with a specific
//! error instead of a panic or an allocation blow-up.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::activations::{Activation, ActivationKind};
use crate::decision::{AlphaMode, DecisionState};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, Vector};
use crate::network::{ModelConfig, NetworkModel};
use crate::ridge::LayerParams;

const MAGIC: &[u8; 4] = b"NGMN";
const VERSION: u16 = 1;

fn activation_code(kind: ActivationKind) -> (u8, f64) {
    match kind {
        ActivationKind::Sigmoid => (0, 0.0),
        ActivationKind::LeakyRelu(a) => (1, a),
        ActivationKind::Tanh => (2, 0.0),
        ActivationKind::Identity => (3, 0.0),
    }
}

fn activation_from_code(id: u8, param: f64, source_name: &str) -> Result<ActivationKind> {
    match id {
        0 => Ok(ActivationKind::Sigmoid),
        1 => Ok(ActivationKind::LeakyRelu(param)),
        2 => Ok(ActivationKind::Tanh),
        3 => Ok(ActivationKind::Identity),
        other => Err(Error::InvalidConfig(format!(
            "{source_name}: unknown activation id {other}"
        ))),
    }
}

fn alpha_mode_code(mode: AlphaMode) -> (u8, f64) {
    match mode {
        AlphaMode::SelfTuned => (0, 0.0),
        AlphaMode::FixedGamma(g) => (1, g),
        AlphaMode::Uniform => (2, 0.0),
    }
}

fn alpha_mode_from_code(id: u8, gamma: f64, source_name: &str) -> Result<AlphaMode> {
    match id {
        0 => Ok(AlphaMode::SelfTuned),
        1 => Ok(AlphaMode::FixedGamma(gamma)),
        2 => Ok(AlphaMode::Uniform),
        other => Err(Error::InvalidConfig(format!(
            "{source_name}: unknown alpha mode {other}"
        ))),
    }
}

fn write_matrix(sink: &mut impl Write, m: &Matrix) -> Result<()> {
    sink.write_u32::<LittleEndian>(m.nrows() as u32)?;
    sink.write_u32::<LittleEndian>(m.ncols() as u32)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            sink.write_f64::<LittleEndian>(m[(i, j)])?;
        }
    }
    Ok(())
}

fn write_vector(sink: &mut impl Write, v: &Vector) -> Result<()> {
    write_matrix(sink, &Matrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Serialize a model.
pub fn save_model(model: &NetworkModel, sink: &mut impl Write) -> Result<()> {
    sink.write_all(MAGIC)?;
    sink.write_u16::<LittleEndian>(VERSION)?;

    let config = &model.config;
    sink.write_u32::<LittleEndian>(config.hidden_widths.len() as u32)?;
    for &w in &config.hidden_widths {
        sink.write_u32::<LittleEndian>(w as u32)?;
    }
    let (act_id, act_param) = activation_code(config.activation.kind);
    sink.write_u8(act_id)?;
    sink.write_f64::<LittleEndian>(act_param)?;
    sink.write_f64::<LittleEndian>(config.activation.clip_eps)?;
    sink.write_f64::<LittleEndian>(config.lambda)?;
    let (mode_id, gamma) = alpha_mode_code(config.alpha_mode);
    sink.write_u8(mode_id)?;
    sink.write_f64::<LittleEndian>(gamma)?;
    sink.write_u64::<LittleEndian>(config.seed)?;

    for layer in &model.layers {
        write_matrix(sink, &layer.w)?;
        write_vector(sink, &layer.b)?;
    }
    write_matrix(sink, &model.head.w)?;
    write_vector(sink, &model.head.b)?;
    write_vector(sink, &model.head.alpha)?;
    write_matrix(sink, &model.head.m)?;
    Ok(())
}

/// Serialize to a file path.
pub fn save_model_file(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    let mut file = File::create(path)?;
    save_model(model, &mut file)
}

/// Byte reader that tracks its offset so truncation errors can point at the
/// exact position.
struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
    source_name: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.offset + len > self.bytes.len() {
            return Err(Error::Truncated {
                source_name: self.source_name.to_string(),
                offset: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.offset
    }

    fn read_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn read_u16(&mut self) -> Result<u16> {
        Ok(self.take(2)?.read_u16::<LittleEndian>()?)
    }

    fn read_u32(&mut self) -> Result<u32> {
        Ok(self.take(4)?.read_u32::<LittleEndian>()?)
    }

    fn read_u64(&mut self) -> Result<u64> {
        Ok(self.take(8)?.read_u64::<LittleEndian>()?)
    }

    fn read_f64(&mut self) -> Result<f64> {
        Ok(self.take(8)?.read_f64::<LittleEndian>()?)
    }

    fn read_matrix(&mut self) -> Result<Matrix> {
        let rows = self.read_u32()? as usize;
        let cols = self.read_u32()? as usize;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "{}: empty matrix in model file",
                self.source_name
            )));
        }
        let count = rows
            .checked_mul(cols)
            .filter(|&c| c.checked_mul(8).is_some_and(|b| b <= self.remaining()))
            .ok_or(Error::Truncated {
                source_name: self.source_name.to_string(),
                offset: self.bytes.len(),
            })?;
        let mut data = Vec::with_capacity(count);
        let mut payload = self.take(count * 8)?;
        for _ in 0..count {
            data.push(payload.read_f64::<LittleEndian>()?);
        }
        crate::matrix::matrix_from_row_major(rows, cols, &data)
    }

    fn read_vector(&mut self, what: &str) -> Result<Vector> {
        let m = self.read_matrix()?;
        if m.ncols() != 1 {
            return Err(Error::InvalidInput(format!(
                "{}: {what} must be a column vector, got {}x{}",
                self.source_name,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Vector::from_column_slice(m.as_slice()))
    }
}

/// Deserialize a model from bytes.
pub fn load_model_bytes(bytes: &[u8], source_name: &str) -> Result<NetworkModel> {
    let mut cur = Cursor {
        bytes,
        offset: 0,
        source_name,
    };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::ModelBadMagic {
            source_name: source_name.to_string(),
        });
    }
    let version = cur.read_u16()?;
    if version != VERSION {
        return Err(Error::ModelBadVersion {
            source_name: source_name.to_string(),
            found: version,
        });
    }

    let layer_count = cur.read_u32()? as usize;
    if layer_count > 1024 {
        return Err(Error::InvalidConfig(format!(
            "{source_name}: implausible layer count {layer_count}"
        )));
    }
    let mut hidden_widths = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        hidden_widths.push(cur.read_u32()? as usize);
    }
    let act_id = cur.read_u8()?;
    let act_param = cur.read_f64()?;
    let clip_eps = cur.read_f64()?;
    let activation = Activation::new(activation_from_code(act_id, act_param, source_name)?, clip_eps)?;
    let lambda = cur.read_f64()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "{source_name}: lambda must be positive and finite"
        )));
    }
    let mode_id = cur.read_u8()?;
    let gamma = cur.read_f64()?;
    let alpha_mode = alpha_mode_from_code(mode_id, gamma, source_name)?;
    alpha_mode.validate()?;
    let seed = cur.read_u64()?;

    let mut layers = Vec::with_capacity(layer_count);
    let mut prev_width: Option<usize> = None;
    for (l, &width) in hidden_widths.iter().enumerate() {
        let w = cur.read_matrix()?;
        let b = cur.read_vector("layer bias")?;
        if w.ncols() != width || b.len() != width {
            return Err(Error::InvalidInput(format!(
                "{source_name}: layer {l} shapes disagree with widths"
            )));
        }
        if let Some(prev) = prev_width {
            if w.nrows() != prev {
                return Err(Error::InvalidInput(format!(
                    "{source_name}: layer {l} input dim {} does not chain from {prev}",
                    w.nrows()
                )));
            }
        }
        prev_width = Some(width);
        layers.push(LayerParams { w, b, activation });
    }

    let head_w = cur.read_matrix()?;
    let head_b = cur.read_vector("head bias")?;
    let head_alpha = cur.read_vector("head alpha")?;
    let head_m = cur.read_matrix()?;
    if let Some(prev) = prev_width {
        if head_w.nrows() != prev {
            return Err(Error::InvalidInput(format!(
                "{source_name}: head input dim {} does not chain from {prev}",
                head_w.nrows()
            )));
        }
    }
    let c = head_w.ncols();
    if head_b.len() != c || head_m.nrows() != c || head_m.ncols() != head_alpha.len() {
        return Err(Error::InvalidInput(format!(
            "{source_name}: head shapes are inconsistent"
        )));
    }
    if cur.remaining() != 0 {
        return Err(Error::InvalidInput(format!(
            "{source_name}: {} trailing bytes after model payload",
            cur.remaining()
        )));
    }

    Ok(NetworkModel {
        layers,
        head: DecisionState {
            w: head_w,
            b: head_b,
            alpha: head_alpha,
            m: head_m,
            lambda,
            alpha_mode,
            gamma: match alpha_mode {
                AlphaMode::FixedGamma(g) => g,
                _ => 0.0,
            },
        },
        config: ModelConfig {
            hidden_widths,
            activation,
            lambda,
            alpha_mode,
            seed,
        },
        trace: Vec::new(),
    })
}

/// Deserialize from a file path.
pub fn load_model_file(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    load_model_bytes(&bytes, &path.display().to_string())
}
