//! `HPKW` tensor files.
//!
//! Layout (little-endian): magic `HPKW`, `u32` format version, then records
//! until end of file. Each record is a `u16` name length, the UTF-8 name, a
//! `u32` rank, `rank` `u32` extents and the `f32` payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::network::Network;
use crate::nn::optim::{MomentumSchedule, OptimState};
use crate::nn::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"HPKW";
pub const FORMAT_VERSION: u32 = 1;

const VELOCITY_PREFIX: &str = "optim.velocity/";
const STEP_KEY: &str = "optim.step_count";
const LR_KEY: &str = "optim.learning_rate";

/// An ordered list of named tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorFile {
    pub records: Vec<(String, Tensor)>,
}

impl TensorFile {
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.records.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for (name, t) in &self.records {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len())
                .map_err(|_| Error::config(format!("tensor name too long: {name}")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(bytes);
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Data("not an HPKW file (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported HPKW version {version}")));
        }
        let mut records = Vec::new();
        while cur.pos < bytes.len() {
            let len = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| Error::Data("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = cur.u32()? as usize;
            let shape = (0..rank).map(|_| cur.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let payload = cur.take(n * 4)?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::Data(format!("record {name}: {e}")))?;
            records.push((name, t));
        }
        Ok(Self { records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Data("truncated HPKW file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Network weights plus the optimizer state needed to resume training.
pub fn save_checkpoint(path: &Path, net: &Network, optim: Option<&OptimState>) -> Result<()> {
    checkpoint_file(net, optim).write(path)
}

pub fn checkpoint_file(net: &Network, optim: Option<&OptimState>) -> TensorFile {
    let mut file = TensorFile::default();
    let params = net.params();
    for (name, t) in &params {
        let mut t = (*t).clone();
        t.disable_grad();
        file.push(name.clone(), t);
    }
    if let Some(st) = optim {
        for ((name, t), v) in params.iter().zip(&st.velocity) {
            let vt = Tensor::new(t.shape().to_vec(), v.clone()).expect("velocity mirrors parameter");
            file.push(format!("{VELOCITY_PREFIX}{name}"), vt);
        }
        file.push(STEP_KEY, Tensor::new(vec![1], vec![st.step_count as f32]).unwrap());
        file.push(LR_KEY, Tensor::new(vec![1], vec![st.learning_rate as f32]).unwrap());
    }
    file
}

/// Loads weights into `net`; returns optimizer state when the file carries one.
pub fn load_checkpoint(
    path: &Path,
    net: &mut Network,
    schedule: MomentumSchedule,
) -> Result<Option<OptimState>> {
    let file = TensorFile::read(path)?;
    apply_checkpoint(&file, net, schedule)
}

pub fn apply_checkpoint(
    file: &TensorFile,
    net: &mut Network,
    schedule: MomentumSchedule,
) -> Result<Option<OptimState>> {
    let names: Vec<(String, Vec<usize>)> = net
        .params()
        .iter()
        .map(|(n, t)| (n.clone(), t.shape().to_vec()))
        .collect();
    for (name, shape) in &names {
        let t = file
            .get(name)
            .ok_or_else(|| Error::Data(format!("checkpoint lacks parameter {name}")))?;
        net.set_param(name, shape, t.data().to_vec())
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    let Some(step) = file.get(STEP_KEY) else {
        return Ok(None);
    };
    let mut velocity = Vec::with_capacity(names.len());
    for (name, shape) in &names {
        let v = file
            .get(&format!("{VELOCITY_PREFIX}{name}"))
            .ok_or_else(|| Error::Data(format!("checkpoint lacks velocity for {name}")))?;
        if v.shape() != shape.as_slice() {
            return Err(Error::Data(format!("velocity for {name} has wrong shape")));
        }
        velocity.push(v.data().to_vec());
    }
    let step_count = step.data()[0] as u64;
    let learning_rate = file.get(LR_KEY).map(|t| t.data()[0] as f64).unwrap_or(0.0);
    Ok(Some(OptimState {
        learning_rate,
        momentum: schedule.momentum_at(step_count),
        schedule,
        velocity,
        step_count,
    }))
}
