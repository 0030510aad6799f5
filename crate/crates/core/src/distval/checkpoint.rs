//! Binary estimator checkpoints.
//!
//! All integers and floats are little-endian. Layout:
//!
//! ```text
//! magic "SORB" | u32 version | u8 backend (0 tabular, 1 mlp) | u8 head (0 distributional, 1 scalar)
//! u32 N | u32 name_len | name bytes (UTF-8) | u8 encoder tag (0 = none) | u32 encoder param
//! u64 training updates
//! tabular: u32 width | u32 height | u64 row_len | table(online) | u8 has_target | [table(target)]
//!          table = u64 rows | rows x (u32 state_index, u32 goal_index, u8 action) | rows x row_len f64
//!          rows sorted by (state_index, goal_index)
//! mlp:     u32 layer_count | layer_count x u32 size | u64 P | P f64 online | P f64 target
//! ```
//!
//! Parameters are widened to `f64`, so an `f32` model survives a round trip
//! exactly. Optimizer moments are not stored.

use std::io::{Read, Write};

use super::estimator::{Backend, MlpBackend, ValueEstimator, ValueHead};
use super::mlp::{Adam, Mlp};
use super::tabular::{join_key, split_key, Table, Tabular};
use super::Encoder;
use crate::error::{Error, Result};
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"SORB";
pub const VERSION: u32 = 2;

pub(crate) struct Writer<W: Write>(pub W);

impl<W: Write> Writer<W> {
    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.0.write_all(b)?;
        Ok(())
    }
    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }
    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    pub fn f64s<T: Scalar>(&mut self, vs: &[T]) -> Result<()> {
        for v in vs {
            self.bytes(&v.to_f64_lossless().to_le_bytes())?;
        }
        Ok(())
    }
}

pub(crate) struct Reader<R: Read>(pub R);

impl<R: Read> Reader<R> {
    pub fn array<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
        Ok(b)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    pub fn f64s<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        (0..n).map(|_| Ok(T::of(f64::from_le_bytes(self.array()?)))).collect()
    }
    pub fn len(&mut self, limit: u64, what: &str) -> Result<usize> {
        let n = self.u64()?;
        if n > limit {
            return Err(Error::Checkpoint(format!("{what} count {n} is implausible")));
        }
        Ok(n as usize)
    }
}

const MAX_ITEMS: u64 = 1 << 34;

fn write_table<W: Write, T: Scalar>(w: &mut Writer<W>, table: &Table<T>) -> Result<()> {
    let keys = table.sorted_keys();
    w.u64(keys.len() as u64)?;
    for &k in &keys {
        let (s, g, a) = split_key(k);
        w.u32(s)?;
        w.u32(g)?;
        w.u8(a)?;
    }
    for &k in &keys {
        w.f64s(table.get(k).expect("key from table"))?;
    }
    Ok(())
}

fn read_table<R: Read, T: Scalar>(r: &mut Reader<R>, row_len: usize, init: T) -> Result<Table<T>> {
    let n = r.len(MAX_ITEMS, "table row")?;
    let mut keys = Vec::with_capacity(n);
    for _ in 0..n {
        let (s, g, a) = (r.u32()?, r.u32()?, r.u8()?);
        if s > u32::MAX >> 1 || g > u32::MAX >> 1 || a > 3 {
            return Err(Error::Checkpoint(format!("bad table key ({s}, {g}, {a})")));
        }
        keys.push(join_key(s, g, a));
    }
    let mut table = Table::new(row_len, init);
    for k in keys {
        table.insert(k, r.f64s(row_len)?);
    }
    Ok(table)
}

impl<T: Scalar> ValueEstimator<T> {
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = Writer(out);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.u8(match self.backend {
            Backend::Tabular(_) => 0,
            Backend::Mlp(_) => 1,
        })?;
        w.u8(match self.head {
            ValueHead::Distributional => 0,
            ValueHead::Scalar => 1,
        })?;
        w.u32(self.num_bins as u32)?;
        w.u32(self.map_name.len() as u32)?;
        w.bytes(self.map_name.as_bytes())?;
        let (tag, param) = match &self.backend {
            Backend::Tabular(_) => (0, 0),
            Backend::Mlp(m) => m.encoder.tag(),
        };
        w.u8(tag)?;
        w.u32(param)?;
        w.u64(self.updates)?;
        match &self.backend {
            Backend::Tabular(tab) => {
                w.u32(tab.width as u32)?;
                w.u32(tab.height as u32)?;
                w.u64(tab.online.row_len() as u64)?;
                write_table(&mut w, &tab.online)?;
                match &tab.target {
                    Some(t) => {
                        w.u8(1)?;
                        write_table(&mut w, t)?;
                    }
                    None => w.u8(0)?,
                }
            }
            Backend::Mlp(m) => {
                let sizes = m.net.sizes();
                w.u32(sizes.len() as u32)?;
                for &s in sizes {
                    w.u32(s as u32)?;
                }
                w.u64(m.net.params().len() as u64)?;
                w.f64s(m.net.params())?;
                w.f64s(m.target.params())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    /// Loads a checkpoint. `learning_rate` seeds a fresh optimizer for MLP
    /// backends.
    pub fn read_from<R: Read>(input: R, learning_rate: f64) -> Result<Self> {
        let mut r = Reader(input);
        if &r.array::<4>()? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let backend_tag = r.u8()?;
        let head = match r.u8()? {
            0 => ValueHead::Distributional,
            1 => ValueHead::Scalar,
            t => return Err(Error::Checkpoint(format!("unknown head tag {t}"))),
        };
        let num_bins = r.u32()? as usize;
        if num_bins == 0 {
            return Err(Error::Checkpoint("zero bins".into()));
        }
        let name_len = r.u32()? as usize;
        if name_len > 4096 {
            return Err(Error::Checkpoint("map name too long".into()));
        }
        let mut name = vec![0u8; name_len];
        r.0.read_exact(&mut name).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let map_name = String::from_utf8(name).map_err(|_| Error::Checkpoint("map name is not UTF-8".into()))?;
        let enc_tag = r.u8()?;
        let enc_param = r.u32()?;
        let updates = r.u64()?;
        let width = head.width(num_bins);
        let backend = match backend_tag {
            0 => {
                let w = r.u32()? as usize;
                let h = r.u32()? as usize;
                let row_len = r.len(1 << 20, "row length")?;
                if row_len != width {
                    return Err(Error::Checkpoint(format!("row length {row_len} does not match head")));
                }
                let init = match head {
                    ValueHead::Distributional => T::one() / T::of_usize(num_bins + 1),
                    ValueHead::Scalar => T::of_usize(num_bins) / T::of(2.0),
                };
                let online = read_table(&mut r, row_len, init)?;
                let target = match r.u8()? {
                    0 => None,
                    1 => Some(read_table(&mut r, row_len, init)?),
                    t => return Err(Error::Checkpoint(format!("bad target flag {t}"))),
                };
                Backend::Tabular(Tabular { width: w, height: h, online, target })
            }
            1 => {
                let encoder = Encoder::from_tag(enc_tag, enc_param)
                    .ok_or_else(|| Error::Checkpoint(format!("unknown encoder tag {enc_tag}")))?;
                let layers = r.u32()? as usize;
                if !(2..=64).contains(&layers) {
                    return Err(Error::Checkpoint(format!("{layers} layers")));
                }
                let sizes: Vec<usize> = (0..layers).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
                let p = r.len(MAX_ITEMS, "parameter")?;
                let net = Mlp::from_params(&sizes, r.f64s(p)?).map_err(|e| Error::Checkpoint(e.to_string()))?;
                let target = Mlp::from_params(&sizes, r.f64s(p)?).map_err(|e| Error::Checkpoint(e.to_string()))?;
                if *sizes.last().unwrap() != 4 * width {
                    return Err(Error::Checkpoint("output layer does not match head".into()));
                }
                Backend::Mlp(MlpBackend {
                    encoder,
                    opt: Adam::new(p, T::of(learning_rate)),
                    grads: vec![T::zero(); p],
                    net,
                    target,
                })
            }
            t => return Err(Error::Checkpoint(format!("unknown backend tag {t}"))),
        };
        Ok(Self { backend, head, num_bins, map_name, updates })
    }

    pub fn from_bytes(bytes: &[u8], learning_rate: f64) -> Result<Self> {
        Self::read_from(bytes, learning_rate)
    }
}
