//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "HGE1" | u32 version | u8 kind | u32 n | n x u32 header
//!        | f32 parameter blocks (shapes follow from the header)
//!        | u32 len | config JSON | u32 len | loss history JSON
//! ```
//!
//! The JSON sections are kept as raw strings, so save -> load -> save
//! reproduces the file byte for byte.

use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{
    AlsModel, HgeLayer, HgeModel, HybridMfModel, LayerOptions, MfModel, Model, ModelKind,
    RandomModel,
};
use crate::numerics::{Activation, DenseMatrix, SparseIncidence};

pub const MAGIC: &[u8; 4] = b"HGE1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    /// Configuration echo, as JSON.
    pub config_json: String,
    /// Loss history, as a JSON array.
    pub loss_json: String,
}

impl Checkpoint {
    pub fn new(model: Model, config_json: String, loss_history: &[f64]) -> Result<Self> {
        Ok(Self {
            model,
            config_json,
            loss_json: serde_json::to_string(loss_history)?,
        })
    }

    pub fn loss_history(&self) -> Result<Vec<f64>> {
        Ok(serde_json::from_str(&self.loss_json)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (header, blocks) = encode_model(&self.model);
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(kind_tag(self.model.kind()));
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        for h in header {
            out.extend_from_slice(&h.to_le_bytes());
        }
        for b in blocks {
            for x in b.as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        for s in [&self.config_json, &self.loss_json] {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic bytes)".into()));
        }
        r.pos = 4;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}, this build reads version {VERSION}"
            )));
        }
        let kind = kind_from_tag(r.u8()?)?;
        let n = r.u32()? as usize;
        r.need(4 * n)?;
        let header: Vec<u32> = (0..n).map(|_| r.u32().unwrap()).collect();
        let model = decode_model(kind, &header, &mut r)?;
        let config_json = r.string()?;
        let loss_json = r.string()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint length mismatch: expected {} bytes, found {}",
                r.pos,
                bytes.len()
            )));
        }
        Ok(Self {
            model,
            config_json,
            loss_json,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

/// Loads a checkpoint and insists on its model kind.
pub fn load_checkpoint_as(path: &Path, kind: ModelKind) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.model.kind() != kind {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a `{}` model, expected `{kind}`",
            ckpt.model.kind()
        )));
    }
    Ok(ckpt)
}

fn kind_tag(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Random => 0,
        ModelKind::Mf => 1,
        ModelKind::Als => 2,
        ModelKind::HybridMf => 3,
        ModelKind::Hge => 4,
    }
}

fn kind_from_tag(tag: u8) -> Result<ModelKind> {
    Ok(match tag {
        0 => ModelKind::Random,
        1 => ModelKind::Mf,
        2 => ModelKind::Als,
        3 => ModelKind::HybridMf,
        4 => ModelKind::Hge,
        t => return Err(Error::Checkpoint(format!("unknown model kind tag {t}"))),
    })
}

fn split_u64(x: u64) -> [u32; 2] {
    [x as u32, (x >> 32) as u32]
}

fn join_u64(lo: u32, hi: u32) -> u64 {
    lo as u64 | ((hi as u64) << 32)
}

fn encode_model(model: &Model) -> (Vec<u32>, Vec<&DenseMatrix>) {
    let mut h = Vec::new();
    match model {
        Model::Random(m) => {
            h.extend(split_u64(m.seed));
            (h, vec![])
        }
        Model::Mf(m) => {
            h.extend([m.n_users() as u32, m.n_items() as u32, m.dim() as u32]);
            (h, vec![&m.user_embeddings, &m.item_embeddings])
        }
        Model::Als(m) => {
            h.extend([m.n_users() as u32, m.n_items() as u32, m.dim() as u32]);
            for v in [m.alpha, m.lambda_x, m.lambda_y] {
                h.extend(split_u64(v.to_bits()));
            }
            (h, vec![&m.x, &m.y])
        }
        Model::HybridMf(m) => {
            let n_levels = m.item_features.first().map_or(0, Vec::len);
            h.extend([
                m.n_users() as u32,
                m.n_items() as u32,
                m.dim() as u32,
                m.feature_embeddings.rows() as u32,
                n_levels as u32,
            ]);
            h.extend(m.item_features.iter().flatten().map(|&f| f as u32));
            (
                h,
                vec![
                    &m.user_embeddings,
                    &m.item_embeddings,
                    &m.feature_embeddings,
                    &m.user_bias,
                    &m.item_bias,
                ],
            )
        }
        Model::Hge(m) => {
            h.extend([
                m.n_users() as u32,
                m.n_items() as u32,
                m.dim() as u32,
                m.layers.len() as u32,
            ]);
            let mut blocks = vec![&m.base.user_embeddings, &m.base.item_embeddings];
            for l in &m.layers {
                let (code, alpha) = match l.options.activation {
                    Activation::Relu => (0, 0.0f32),
                    Activation::LeakyRelu { alpha } => (1, alpha),
                };
                h.extend([
                    l.level as u32,
                    l.n_categories() as u32,
                    l.hidden() as u32,
                    code,
                    alpha.to_bits(),
                    l.options.skip as u32,
                    l.options.masked_softmax as u32,
                ]);
                h.extend(l.incidence.assignment().iter().map(|&c| c as u32));
                blocks.push(&l.w1);
                blocks.push(&l.w2);
            }
            (h, blocks)
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn need(&self, n: usize) -> Result<()> {
        if self.bytes.len() < self.pos + n {
            return Err(Error::Checkpoint(format!(
                "checkpoint truncated: expected at least {} bytes, found {}",
                self.pos + n,
                self.bytes.len()
            )));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        self.need(n)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let raw = self.take(4 * rows * cols)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        DenseMatrix::new(rows, cols, data).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Checkpoint("JSON section is not UTF-8".into()))
    }
}

/// Pops header values with a bounds check.
struct Header<'a> {
    values: &'a [u32],
    pos: usize,
}

impl Header<'_> {
    fn next(&mut self) -> Result<u32> {
        let v = self.values.get(self.pos).copied().ok_or_else(|| {
            Error::Checkpoint(format!(
                "dimension header too short ({} values)",
                self.values.len()
            ))
        })?;
        self.pos += 1;
        Ok(v)
    }

    fn usize(&mut self) -> Result<usize> {
        self.next().map(|v| v as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(join_u64(self.next()?, self.next()?))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.values.len() {
            return Err(Error::Checkpoint(format!(
                "dimension header has {} values, the model uses {}",
                self.values.len(),
                self.pos
            )));
        }
        Ok(())
    }
}

fn bad(e: Error) -> Error {
    Error::Checkpoint(format!("inconsistent checkpoint: {e}"))
}

fn decode_model(kind: ModelKind, header: &[u32], r: &mut Reader<'_>) -> Result<Model> {
    let mut h = Header {
        values: header,
        pos: 0,
    };
    let model = match kind {
        ModelKind::Random => Model::Random(RandomModel { seed: h.u64()? }),
        ModelKind::Mf => {
            let (u, i, d) = (h.usize()?, h.usize()?, h.usize()?);
            let users = r.matrix(u, d)?;
            let items = r.matrix(i, d)?;
            Model::Mf(MfModel::new(users, items).map_err(bad)?)
        }
        ModelKind::Als => {
            let (u, i, d) = (h.usize()?, h.usize()?, h.usize()?);
            let alpha = f64::from_bits(h.u64()?);
            let lambda_x = f64::from_bits(h.u64()?);
            let lambda_y = f64::from_bits(h.u64()?);
            Model::Als(AlsModel {
                x: r.matrix(u, d)?,
                y: r.matrix(i, d)?,
                lambda_x,
                lambda_y,
                alpha,
            })
        }
        ModelKind::HybridMf => {
            let (u, i, d, f, levels) = (h.usize()?, h.usize()?, h.usize()?, h.usize()?, h.usize()?);
            let mut features = Vec::with_capacity(i);
            for _ in 0..i {
                features.push((0..levels).map(|_| h.usize()).collect::<Result<Vec<_>>>()?);
            }
            let m = HybridMfModel::new(
                r.matrix(u, d)?,
                r.matrix(i, d)?,
                r.matrix(f, d)?,
                r.matrix(u, 1)?,
                r.matrix(i, 1)?,
                features,
            )
            .map_err(bad)?;
            Model::HybridMf(m)
        }
        ModelKind::Hge => {
            let (u, i, d, n_layers) = (h.usize()?, h.usize()?, h.usize()?, h.usize()?);
            let users = r.matrix(u, d)?;
            let items = r.matrix(i, d)?;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let level = h.usize()?;
                let k = h.usize()?;
                let hidden = h.usize()?;
                let code = h.next()?;
                let alpha = f32::from_bits(h.next()?);
                let skip = h.next()? != 0;
                let masked_softmax = h.next()? != 0;
                let assignment = (0..i).map(|_| h.usize()).collect::<Result<Vec<_>>>()?;
                let activation = match code {
                    0 => Activation::Relu,
                    1 => Activation::LeakyRelu { alpha },
                    c => return Err(Error::Checkpoint(format!("unknown activation code {c}"))),
                };
                let g = SparseIncidence::from_assignment(assignment, k).map_err(bad)?;
                let w1 = r.matrix(k, hidden)?;
                let w2 = r.matrix(i, hidden)?;
                let options = LayerOptions {
                    activation,
                    skip,
                    masked_softmax,
                };
                layers.push(HgeLayer::new(level, g, w1, w2, options).map_err(bad)?);
            }
            let base = MfModel::new(users, items).map_err(bad)?;
            Model::Hge(HgeModel::new(base, layers).map_err(bad)?)
        }
    };
    h.finish()?;
    Ok(model)
}
