//! Binary checkpoint.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SGCNCKPT"
//! version    u32
//! hypers     u32 length + UTF-8 key=value lines
//! fingerprint 32 bytes (SHA-256 of the canonical dataset)
//! log tail   u32 length + UTF-8 text
//! tensors    u32 count, then per tensor:
//!              u32 name length + name, u8 dtype (1 = f64), u8 ndim,
//!              ndim x u64 dims, product(dims) x f64
//! ```

use std::path::Path;

use socialgcn::{Aggregator, FeatureMode, HyperParams, ModelParams};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"SGCNCKPT";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hypers: HyperParams,
    pub fingerprint: [u8; 32],
    pub log_tail: String,
    pub params: ModelParams,
}

fn hypers_text(h: &HyperParams) -> String {
    format!(
        "embed_dim={}\nlatent_dim={}\ndepth={}\nfeature_mode={}\naggregator={}\nuse_bias={}\nuser_free_latent={}\n",
        h.embed_dim, h.latent_dim, h.depth, h.feature_mode, h.aggregator, h.use_bias, h.user_free_latent
    )
}

fn parse_hypers(text: &str) -> Result<HyperParams> {
    let mut h = HyperParams::default();
    let mut seen = 0;
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::checkpoint(format!("hyperparameters: malformed line {line:?}")))?;
        let bad = |_| CliError::checkpoint(format!("hyperparameters: bad value for {k}: {v:?}"));
        match k {
            "embed_dim" => h.embed_dim = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "latent_dim" => h.latent_dim = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "depth" => h.depth = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "feature_mode" => h.feature_mode = v.parse::<FeatureMode>().map_err(|e| bad(e.to_string()))?,
            "aggregator" => h.aggregator = v.parse::<Aggregator>().map_err(|e| bad(e.to_string()))?,
            "use_bias" => h.use_bias = v.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?,
            "user_free_latent" => {
                h.user_free_latent = v.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?
            }
            _ => return Err(CliError::checkpoint(format!("hyperparameters: unknown key {k}"))),
        }
        seen += 1;
    }
    if seen != 7 {
        return Err(CliError::checkpoint("hyperparameters: incomplete block"));
    }
    h.validate()
        .map_err(|e| CliError::checkpoint(format!("hyperparameters: {e}")))?;
    Ok(h)
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| CliError::checkpoint(format!("{what} too large")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_str(out: &mut Vec<u8>, s: &str, what: &str) -> Result<()> {
    put_u32(out, s.len(), what)?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &hypers_text(&self.hypers), "hyperparameters")?;
        out.extend_from_slice(&self.fingerprint);
        put_str(&mut out, &self.log_tail, "log tail")?;
        let tensors = self.params.tensors();
        put_u32(&mut out, tensors.len(), "tensor count")?;
        for (name, t) in tensors {
            put_str(&mut out, &name, "tensor name")?;
            out.push(DTYPE_F64);
            out.push(t.ndim() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8, "header")? != MAGIC {
            return Err(CliError::checkpoint("header: bad magic bytes"));
        }
        let version = r.u32("header")?;
        if version != VERSION {
            return Err(CliError::checkpoint(format!(
                "header: unsupported version {version} (expected {VERSION})"
            )));
        }
        let hypers = parse_hypers(&r.string("hyperparameters")?)?;
        let fingerprint: [u8; 32] = r.take(32, "fingerprint")?.try_into().expect("32 bytes");
        let log_tail = r.string("log tail")?;
        let count = r.u32("tensor table")? as usize;

        let mut blocks = Vec::with_capacity(count.min(64));
        for k in 0..count {
            let label = format!("tensor {k}");
            let name = r.string(&label)?;
            let label = format!("tensor `{name}`");
            let dtype = r.take(1, &label)?[0];
            if dtype != DTYPE_F64 {
                return Err(CliError::checkpoint(format!("{label}: unknown dtype {dtype}")));
            }
            let ndim = r.take(1, &label)?[0] as usize;
            let dims = (0..ndim)
                .map(|_| r.u64(&label).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| CliError::checkpoint(format!("{label}: truncated payload")))?;
            let data = r
                .take(len * 8, &label)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect::<Vec<_>>();
            blocks.push((name, dims, data));
        }
        if r.remaining() != 0 {
            return Err(CliError::checkpoint(format!("{} trailing bytes after tensor table", r.remaining())));
        }
        let params = assemble(&hypers, blocks)?;
        Ok(Self {
            hypers,
            fingerprint,
            log_tail,
            params,
        })
    }

    /// Writes through a temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::artifacts::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| CliError::checkpoint(format!("{}: {}", path.display(), e.message)))
    }
}

type Block = (String, Vec<usize>, Vec<f64>);

/// Rebuilds parameters from named blocks, checking names and shapes against
/// what the hyperparameters imply.
fn assemble(hypers: &HyperParams, blocks: Vec<Block>) -> Result<ModelParams> {
    let dims_of = |name: &str| blocks.iter().find(|b| b.0 == name).map(|b| b.1.clone());
    let shape2 = |name: &str| -> Result<(usize, usize)> {
        match dims_of(name).as_deref() {
            Some(&[r, c]) => Ok((r, c)),
            Some(_) => Err(CliError::checkpoint(format!("tensor `{name}`: expected 2 dimensions"))),
            None => Err(CliError::checkpoint(format!("tensor `{name}`: missing"))),
        }
    };
    let (m, _) = shape2("user_latent")?;
    let (n, _) = shape2("item_latent")?;
    let l = hypers.latent_dim;
    let (d1, d2) = if hypers.featureless() {
        (0, 0)
    } else {
        let (_, uc) = shape2("user_transform.weight")?;
        let (_, ic) = shape2("item_transform.weight")?;
        let under = |c: usize, name: &str| {
            c.checked_sub(l)
                .ok_or_else(|| CliError::checkpoint(format!("tensor `{name}`: narrower than latent_dim")))
        };
        (under(uc, "user_transform.weight")?, under(ic, "item_transform.weight")?)
    };
    let mut params = ModelParams::zeros(hypers, m, n, d1, d2);
    let slots = params.tensors_mut();
    if slots.len() != blocks.len() {
        return Err(CliError::checkpoint(format!(
            "tensor table: {} tensors, hyperparameters imply {}",
            blocks.len(),
            slots.len()
        )));
    }
    for ((name, mut slot), (bname, dims, data)) in slots.into_iter().zip(blocks) {
        if name != bname {
            return Err(CliError::checkpoint(format!("tensor table: expected `{name}`, found `{bname}`")));
        }
        if slot.shape() != dims.as_slice() {
            return Err(CliError::checkpoint(format!(
                "tensor `{name}`: shape {dims:?} does not match hyperparameters ({:?})",
                slot.shape()
            )));
        }
        slot.iter_mut().zip(data).for_each(|(s, v)| *s = v);
    }
    params.check_shapes(hypers).map_err(|e| CliError::checkpoint(e.to_string()))?;
    Ok(params)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, block: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(CliError::checkpoint(format!("{block}: truncated")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, block: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, block)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, block: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, block)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, block: &str) -> Result<String> {
        let len = self.u32(block)? as usize;
        let raw = self.take(len, block)?;
        String::from_utf8(raw.to_vec()).map_err(|_| CliError::checkpoint(format!("{block}: invalid UTF-8")))
    }
}
