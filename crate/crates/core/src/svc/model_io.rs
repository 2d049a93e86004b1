//! Binary dump of a trained [`MulticlassModel`].
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "HSVM v1\n"
//! u32 class_count, then class_count x u16 class id
//! u32 dim, f64 nu, f64 gamma
//! u32 pair_count, then for each pair:
//!   u16 first, u16 second
//!   f64 rho, f64 margin, f64 gamma, u64 iterations
//!   u8 has_sigmoid, f64 a, f64 b        (a = b = 0 when absent)
//!   u32 sv_count, then for each support vector:
//!     u32 training index, f64 coefficient, dim x f64 coordinates
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{BinaryModel, Features, MulticlassModel, PairModel, Sigmoid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HSVM v1\n";

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}
fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}
fn put_u64(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).to_le_bytes());
}
fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode(model: &MulticlassModel) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    put_u32(&mut out, model.classes.len());
    for &c in &model.classes {
        put_u16(&mut out, c);
    }
    put_u32(&mut out, model.dim);
    put_f64(&mut out, model.nu);
    put_f64(&mut out, model.gamma);
    put_u32(&mut out, model.pairs.len());
    for pm in &model.pairs {
        let m = &pm.model;
        put_u16(&mut out, pm.first);
        put_u16(&mut out, pm.second);
        put_f64(&mut out, m.rho);
        put_f64(&mut out, m.margin);
        put_f64(&mut out, m.gamma);
        put_u64(&mut out, m.iterations);
        let s = m.sigmoid.unwrap_or(Sigmoid { a: 0.0, b: 0.0 });
        out.push(u8::from(m.sigmoid.is_some()));
        put_f64(&mut out, s.a);
        put_f64(&mut out, s.b);
        put_u32(&mut out, m.support.len());
        for k in 0..m.support.len() {
            put_u32(&mut out, m.support[k]);
            put_f64(&mut out, m.coef[k]);
            for &x in m.vectors.row(k) {
                put_f64(&mut out, x);
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| {
            Error::Dimension(format!(
                "model dump truncated at byte {} of {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }
    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take()?) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode(bytes: &[u8]) -> Result<MulticlassModel> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::InvalidParameter("not an HSVM v1 model dump".into()));
    }
    let mut r = Reader {
        bytes,
        pos: MAGIC.len(),
    };
    let nclasses = r.u32()?;
    let classes = (0..nclasses).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
    let dim = r.u32()?;
    let nu = r.f64()?;
    let gamma = r.f64()?;
    let npairs = r.u32()?;
    let mut pairs = Vec::with_capacity(npairs);
    for _ in 0..npairs {
        let first = r.u16()?;
        let second = r.u16()?;
        let rho = r.f64()?;
        let margin = r.f64()?;
        let pair_gamma = r.f64()?;
        let iterations = r.u64()?;
        let has_sigmoid = r.u8()? != 0;
        let sigmoid = Sigmoid {
            a: r.f64()?,
            b: r.f64()?,
        };
        let nsv = r.u32()?;
        let mut support = Vec::with_capacity(nsv);
        let mut coef = Vec::with_capacity(nsv);
        let mut coords = Vec::with_capacity(nsv * dim);
        for _ in 0..nsv {
            support.push(r.u32()?);
            coef.push(r.f64()?);
            for _ in 0..dim {
                coords.push(r.f64()?);
            }
        }
        pairs.push(PairModel {
            first,
            second,
            model: BinaryModel {
                support,
                vectors: Features { dim, data: coords },
                coef,
                rho,
                margin,
                gamma: pair_gamma,
                sigmoid: has_sigmoid.then_some(sigmoid),
                iterations,
            },
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::InvalidParameter(format!(
            "{} trailing bytes after model dump",
            bytes.len() - r.pos
        )));
    }
    Ok(MulticlassModel {
        classes,
        dim,
        nu,
        gamma,
        pairs,
    })
}

pub fn write_model(model: &MulticlassModel, path: &Path) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&encode(model)))
        .map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<MulticlassModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::{train_multiclass, SvcParams};
    use super::*;

    #[test]
    fn dump_round_trips() {
        let data: Vec<f64> = (0..24).map(|k| ((k * 17 % 23) as f64).sqrt()).collect();
        let labels: Vec<u16> = (0..12).map(|k| (k % 3) as u16 + 1).collect();
        let x = Features::new(2, data).unwrap();
        let model = train_multiclass(&x, &labels, &SvcParams::new(0.4, 0.5), true, 1).unwrap();
        let bytes = encode(&model);
        assert_eq!(decode(&bytes).unwrap(), model);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"HSVM v2\n").is_err());
    }
}
