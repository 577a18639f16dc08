//! Little-endian binary serialization. Layout (version 1):
//!
//! ```text
//! b"SYMT"  u32 version  u32 rank  i32 total_charge
//! per leg:   u8 dir (0 = In, 1 = Out)  u32 n_sectors  n × (i32 charge, u64 degeneracy)
//! u64 n_blocks
//! per block: rank × i32 key, then Π degeneracies × (f64 re, f64 im) in row-major order
//! ```

use std::io::{Read, Write};

use crate::error::{Result, TensorError};
use crate::leg::{ChargeLeg, Direction};
use crate::tensor::SymTensor;
use crate::C64;

const MAGIC: &[u8; 4] = b"SYMT";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_tensor<W: Write>(t: &SymTensor, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(t.rank() as u32).to_le_bytes())?;
    w.write_all(&t.total_charge().to_le_bytes())?;
    for l in t.legs() {
        w.write_all(&[match l.dir() {
            Direction::In => 0u8,
            Direction::Out => 1u8,
        }])?;
        w.write_all(&(l.num_sectors() as u32).to_le_bytes())?;
        for &(q, d) in l.sectors() {
            w.write_all(&q.to_le_bytes())?;
            w.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    w.write_all(&(t.num_blocks() as u64).to_le_bytes())?;
    for (key, data) in t.blocks() {
        for q in key {
            w.write_all(&q.to_le_bytes())?;
        }
        for x in data {
            w.write_all(&x.re.to_le_bytes())?;
            w.write_all(&x.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_arr<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_arr(r)?))
}

fn read_i32<R: Read>(r: &mut R) -> Result<i32> {
    Ok(i32::from_le_bytes(read_arr(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_arr(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_arr(r)?))
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<SymTensor> {
    let magic: [u8; 4] = read_arr(r)?;
    if &magic != MAGIC {
        return Err(TensorError::Format("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(TensorError::Format(format!("unsupported version {version}")));
    }
    let rank = read_u32(r)? as usize;
    let total = read_i32(r)?;
    let mut legs = Vec::with_capacity(rank);
    for _ in 0..rank {
        let dir = match read_arr::<1, _>(r)?[0] {
            0 => Direction::In,
            1 => Direction::Out,
            other => return Err(TensorError::Format(format!("bad direction byte {other}"))),
        };
        let n = read_u32(r)? as usize;
        let mut secs = Vec::with_capacity(n);
        for _ in 0..n {
            let q = read_i32(r)?;
            let d = read_u64(r)? as usize;
            secs.push((q, d));
        }
        legs.push(ChargeLeg::new(dir, secs)?);
    }
    let mut t = SymTensor::zeros(legs, total);
    let nb = read_u64(r)?;
    for _ in 0..nb {
        let mut key = Vec::with_capacity(rank);
        for _ in 0..rank {
            key.push(read_i32(r)?);
        }
        let size: usize = key
            .iter()
            .zip(t.legs())
            .map(|(&q, l)| {
                l.degeneracy(q)
                    .ok_or_else(|| TensorError::Format(format!("charge {q} not on leg")))
            })
            .product::<Result<usize>>()?;
        let mut data = Vec::with_capacity(size);
        for _ in 0..size {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            data.push(C64::new(re, im));
        }
        t.insert_block(key, data)?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let legs = vec![
            ChargeLeg::new(Direction::Out, vec![(-1, 2), (1, 1)]).unwrap(),
            ChargeLeg::new(Direction::In, vec![(0, 3)]).unwrap(),
        ];
        let t = SymTensor::random(legs, -1, &mut rng);
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.num_blocks(), t.num_blocks());
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_tensor(&mut &b"NOPE\x01\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_tensor(&SymTensor::scalar_tensor(C64::new(1.0, 0.0)), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_tensor(&mut buf.as_slice()).is_err());
    }
}
