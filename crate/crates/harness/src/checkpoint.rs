//! Policy checkpoints.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `SWRMCKPT` |
//! | 4     | format version (u32) |
//! | 1     | byte order tag, `b'L'` |
//! | 6 × 8 | history_length, obs_dim, action_dim, slot_hidden1, slot_hidden2, trunk_hidden (u64) |
//! | 1     | activation code |
//! | 8     | training iteration (u64) |
//! | 8     | parameter count (u64) |
//! | n × 8 | parameters (f64) |
//!
//! The text form starts with `swarm-checkpoint v1` and holds one `key value`
//! line per header field followed by one parameter per line.

use std::path::Path;

use serde::{Deserialize, Serialize};
use swarm_core::{Activation, PolicyParams, PolicySpec};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"SWRMCKPT";
pub const FORMAT_VERSION: u32 = 1;
const TEXT_HEADER: &str = "swarm-checkpoint v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointFormat {
    #[default]
    Binary,
    Text,
}

impl CheckpointFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CheckpointFormat::Binary => "bin",
            CheckpointFormat::Text => "txt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    /// Number of completed training iterations.
    pub iteration: u64,
}

fn spec_fields(spec: &PolicySpec) -> [(&'static str, usize); 6] {
    [
        ("history_length", spec.history_length),
        ("obs_dim", spec.obs_dim),
        ("action_dim", spec.action_dim),
        ("slot_hidden1", spec.slot_hidden1),
        ("slot_hidden2", spec.slot_hidden2),
        ("trunk_hidden", spec.trunk_hidden),
    ]
}

fn corrupt(msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Checkpoint(format!("malformed checkpoint: {msg}"))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let spec = &self.params.spec;
        let mut out = Vec::with_capacity(80 + 8 * self.params.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(b'L');
        for (_, v) in spec_fields(spec) {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.push(spec.activation.code());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&(self.params.values.len() as u64).to_le_bytes());
        for v in &self.params.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(HarnessError::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        if r.take(1)? != b"L" {
            return Err(corrupt("unknown byte order tag"));
        }
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = r.u64()? as usize;
        }
        let activation = Activation::from_code(r.take(1)?[0]).ok_or_else(|| corrupt("unknown activation"))?;
        let iteration = r.u64()?;
        let n = r.u64()? as usize;
        let spec = spec_from(dims, activation);
        if n != spec.n_params() {
            return Err(corrupt(format!("{n} parameters, spec needs {}", spec.n_params())));
        }
        let values = (0..n)
            .map(|_| r.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        if r.at != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self {
            params: PolicyParams::from_values(spec, values)?,
            iteration,
        })
    }

    pub fn to_text(&self) -> String {
        let spec = &self.params.spec;
        let mut out = format!("{TEXT_HEADER}\n");
        for (k, v) in spec_fields(spec) {
            out += &format!("{k} {v}\n");
        }
        out += &format!("activation {}\n", spec.activation.code());
        out += &format!("iteration {}\n", self.iteration);
        out += &format!("n_params {}\n", self.params.values.len());
        for v in &self.params.values {
            out += &format!("{v:?}\n");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(TEXT_HEADER) {
            return Err(corrupt("missing text header"));
        }
        let mut field = |name: &str| -> Result<u64> {
            let line = lines.next().ok_or_else(|| corrupt(format!("missing {name}")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == name => v.trim().parse().map_err(|_| corrupt(format!("bad {name}"))),
                _ => Err(corrupt(format!("expected {name}"))),
            }
        };
        let mut dims = [0usize; 6];
        for (d, name) in dims.iter_mut().zip(["history_length", "obs_dim", "action_dim", "slot_hidden1", "slot_hidden2", "trunk_hidden"]) {
            *d = field(name)? as usize;
        }
        let activation = Activation::from_code(field("activation")? as u8).ok_or_else(|| corrupt("unknown activation"))?;
        let iteration = field("iteration")?;
        let n = field("n_params")? as usize;
        let values = lines
            .map(|l| l.trim().parse::<f64>().map_err(|_| corrupt(format!("bad value {l:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n {
            return Err(corrupt(format!("{} values, header says {n}", values.len())));
        }
        Ok(Self {
            params: PolicyParams::from_values(spec_from(dims, activation), values)?,
            iteration,
        })
    }

    pub fn save(&self, path: &Path, format: CheckpointFormat) -> Result<()> {
        let bytes = match format {
            CheckpointFormat::Binary => self.to_bytes(),
            CheckpointFormat::Text => self.to_text().into_bytes(),
        };
        std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
    }

    /// Reads either format, detected from the leading bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        let parsed = if bytes.starts_with(MAGIC) {
            Self::from_bytes(&bytes)
        } else {
            let text = std::str::from_utf8(&bytes).map_err(|_| corrupt("neither binary nor text"))?;
            Self::from_text(text)
        };
        parsed.map_err(|e| match e {
            HarnessError::Checkpoint(msg) => HarnessError::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fails unless the stored network matches `expected`.
    pub fn check_spec(&self, expected: &PolicySpec) -> Result<()> {
        if &self.params.spec != expected {
            return Err(HarnessError::Checkpoint(format!(
                "checkpoint network {:?} does not match config {:?}",
                self.params.spec, expected
            )));
        }
        Ok(())
    }
}

fn spec_from(d: [usize; 6], activation: Activation) -> PolicySpec {
    PolicySpec {
        history_length: d[0],
        obs_dim: d[1],
        action_dim: d[2],
        slot_hidden1: d[3],
        slot_hidden2: d[4],
        trunk_hidden: d[5],
        activation,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use swarm_core::policy::init_params;

    fn sample() -> Checkpoint {
        let spec = PolicySpec {
            slot_hidden1: 5,
            ..PolicySpec::new(2, 7)
        };
        let mut params: PolicyParams = init_params(&spec, 3);
        params.values[0] = f64::MIN_POSITIVE;
        params.values[1] = -1.0 / 3.0;
        Checkpoint { params, iteration: 42 }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let c = sample();
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = sample();
        assert_eq!(Checkpoint::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn damaged_files_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(Checkpoint::from_bytes(&wrong).is_err());
        let mut version = bytes.clone();
        version[8] = 9;
        assert!(Checkpoint::from_bytes(&version).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let text = sample().to_text().replace("n_params", "n_parms");
        assert!(Checkpoint::from_text(&text).is_err());
    }

    #[test]
    fn spec_mismatch_is_a_checkpoint_error() {
        let c = sample();
        let other = PolicySpec::new(2, 7);
        assert_eq!(c.check_spec(&other).unwrap_err().category(), "checkpoint");
        assert!(c.check_spec(&c.params.spec.clone()).is_ok());
    }
}
