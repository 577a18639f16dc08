use std::collections::BTreeMap;
use std::ops::Range;

use crate::dense;
use crate::error::{Result, TensorError};
use crate::leg::{ChargeLeg, Direction};
use crate::tensor::{Key, SymTensor};
use crate::C64;

/// Where one combination of original sectors sits inside a fused sector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FusedSlot {
    pub sub_key: Key,
    pub offset: usize,
    pub shape: Vec<usize>,
}

/// Record of how several consecutive legs were merged into one, sufficient to
/// split the fused leg again.
///
/// A combination with charges `q_i` on legs with signs `s_i` lands in fused
/// sector `s_f · Σ s_i q_i`, where `s_f` is the sign of the fused leg. Inside a
/// fused sector, combinations are laid out in lexicographic order of their
/// sector indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LegFusion {
    originals: Vec<ChargeLeg>,
    fused: ChargeLeg,
    layout: BTreeMap<i32, Vec<FusedSlot>>,
}

impl LegFusion {
    pub fn new(originals: Vec<ChargeLeg>, dir: Direction) -> Result<Self> {
        if originals.is_empty() {
            return Err(TensorError::Structure("cannot fuse zero legs".into()));
        }
        let sf = dir.sign();
        let mut layout: BTreeMap<i32, Vec<FusedSlot>> = BTreeMap::new();
        let mut fill: BTreeMap<i32, usize> = BTreeMap::new();
        let n = originals.len();
        let mut idx = vec![0usize; n];
        loop {
            let mut q = 0;
            let mut key = Vec::with_capacity(n);
            let mut shape = Vec::with_capacity(n);
            for (l, &i) in originals.iter().zip(&idx) {
                let (c, d) = l.sectors()[i];
                q += l.dir().sign() * c;
                key.push(c);
                shape.push(d);
            }
            let qf = sf * q;
            let size: usize = shape.iter().product();
            let off = fill.entry(qf).or_insert(0);
            layout.entry(qf).or_default().push(FusedSlot {
                sub_key: key,
                offset: *off,
                shape,
            });
            *off += size;
            let mut ax = n;
            loop {
                if ax == 0 {
                    let fused = ChargeLeg::new(dir, fill.into_iter().collect())?;
                    return Ok(Self {
                        originals,
                        fused,
                        layout,
                    });
                }
                ax -= 1;
                idx[ax] += 1;
                if idx[ax] < originals[ax].num_sectors() {
                    break;
                }
                idx[ax] = 0;
            }
        }
    }

    pub fn fused(&self) -> &ChargeLeg {
        &self.fused
    }

    pub fn originals(&self) -> &[ChargeLeg] {
        &self.originals
    }

    pub fn slots(&self, fused_charge: i32) -> &[FusedSlot] {
        self.layout.get(&fused_charge).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Fused charge and slot of a combination of original charges.
    pub fn find(&self, sub_key: &[i32]) -> Option<(i32, &FusedSlot)> {
        let q: i32 = sub_key
            .iter()
            .zip(&self.originals)
            .map(|(&c, l)| l.dir().sign() * c)
            .sum();
        let qf = self.fused.dir().sign() * q;
        self.layout
            .get(&qf)?
            .iter()
            .find(|s| s.sub_key == sub_key)
            .map(|s| (qf, s))
    }

    /// The same fusion with the fused leg's direction flipped, for use on the
    /// conjugate side of a contraction.
    pub fn dual(&self) -> Self {
        Self {
            originals: self.originals.iter().map(|l| l.dual()).collect(),
            fused: self.fused.dual(),
            layout: self.layout.clone(),
        }
    }
}

/// Merges legs `range` of `t` into a single leg of direction `dir`, placed at
/// position `range.start`.
pub fn fuse(t: &SymTensor, range: Range<usize>, dir: Direction) -> Result<(SymTensor, LegFusion)> {
    if range.is_empty() || range.end > t.rank() {
        return Err(TensorError::Structure(format!(
            "cannot fuse legs {range:?} of a rank-{} tensor",
            t.rank()
        )));
    }
    let fusion = LegFusion::new(t.legs()[range.clone()].to_vec(), dir)?;
    let out = fuse_with(t, range.start, &fusion)?;
    Ok((out, fusion))
}

/// Applies a previously built fusion to legs `start..start + n` of `t`.
pub fn fuse_with(t: &SymTensor, start: usize, fusion: &LegFusion) -> Result<SymTensor> {
    let n = fusion.originals.len();
    let range = start..start + n;
    if range.end > t.rank() || t.legs()[range.clone()] != fusion.originals[..] {
        return Err(TensorError::Structure("fusion does not match tensor legs".into()));
    }
    let mut legs: Vec<ChargeLeg> = t.legs()[..start].to_vec();
    legs.push(fusion.fused.clone());
    legs.extend_from_slice(&t.legs()[range.end..]);

    let mut blocks: BTreeMap<Key, Vec<C64>> = BTreeMap::new();
    for (key, data) in t.blocks() {
        let shape = t.shape_of(key);
        let (qf, slot) = fusion.find(&key[range.clone()]).expect("sub key in layout");
        let p: usize = shape[..start].iter().product();
        let s: usize = shape[range.clone()].iter().product();
        let q: usize = shape[range.end..].iter().product();
        let fdeg = fusion.fused.degeneracy(qf).unwrap();
        let mut nkey: Key = key[..start].to_vec();
        nkey.push(qf);
        nkey.extend_from_slice(&key[range.end..]);
        let dst = blocks
            .entry(nkey)
            .or_insert_with(|| vec![C64::new(0.0, 0.0); p * fdeg * q]);
        dense::write_box(dst, &[p, fdeg, q], &[0, slot.offset, 0], data, &[p, s, q]);
    }
    Ok(SymTensor::from_parts(legs, t.total_charge(), blocks))
}

/// Splits leg `leg` of `t` back into the legs recorded in `fusion`.
pub fn split(t: &SymTensor, leg: usize, fusion: &LegFusion) -> Result<SymTensor> {
    if leg >= t.rank() || *t.leg(leg) != fusion.fused {
        return Err(TensorError::Structure("fused leg does not match fusion record".into()));
    }
    let mut legs: Vec<ChargeLeg> = t.legs()[..leg].to_vec();
    legs.extend(fusion.originals.iter().cloned());
    legs.extend_from_slice(&t.legs()[leg + 1..]);

    let mut blocks: BTreeMap<Key, Vec<C64>> = BTreeMap::new();
    for (key, data) in t.blocks() {
        let shape = t.shape_of(key);
        let p: usize = shape[..leg].iter().product();
        let q: usize = shape[leg + 1..].iter().product();
        let fdeg = shape[leg];
        for slot in fusion.slots(key[leg]) {
            let s: usize = slot.shape.iter().product();
            let sub = dense::read_box(data, &[p, fdeg, q], &[0, slot.offset, 0], &[p, s, q]);
            let mut nkey: Key = key[..leg].to_vec();
            nkey.extend_from_slice(&slot.sub_key);
            nkey.extend_from_slice(&key[leg + 1..]);
            blocks.insert(nkey, sub);
        }
    }
    Ok(SymTensor::from_parts(legs, t.total_charge(), blocks))
}

/// Rank-2 view of `t` with the first `split_at` legs fused into rows and the
/// rest into columns, both fused legs pointing `Out`. Block `[r, Q - r]` holds
/// the matrix of row charge `r`.
pub(crate) struct Matricized {
    pub mat: SymTensor,
    pub rows: LegFusion,
    pub cols: LegFusion,
}

pub(crate) fn matricize(t: &SymTensor, split_at: usize) -> Result<Matricized> {
    if split_at == 0 || split_at >= t.rank() {
        return Err(TensorError::Structure(format!(
            "matrix split {split_at} invalid for rank {}",
            t.rank()
        )));
    }
    let (m1, rows) = fuse(t, 0..split_at, Direction::Out)?;
    let (mat, cols) = fuse(&m1, 1..m1.rank(), Direction::Out)?;
    Ok(Matricized { mat, rows, cols })
}
