use crate::error::{Result, TensorError};

/// Orientation of a leg. Charges on `Out` legs count positively in the
/// selection rule, charges on `In` legs negatively.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub fn sign(self) -> i32 {
        match self {
            Direction::In => -1,
            Direction::Out => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Direction::In => Direction::Out,
            Direction::Out => Direction::In,
        }
    }
}

/// A tensor leg split into U(1) charge sectors.
///
/// Sectors are stored with strictly increasing charge. The dense index of an
/// element is the offset of its sector (sum of the degeneracies of all lower
/// charges) plus its index inside the sector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChargeLeg {
    dir: Direction,
    sectors: Vec<(i32, usize)>,
}

impl ChargeLeg {
    pub fn new(dir: Direction, sectors: Vec<(i32, usize)>) -> Result<Self> {
        if sectors.is_empty() {
            return Err(TensorError::InvalidLeg("a leg needs at least one sector".into()));
        }
        for w in sectors.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(TensorError::InvalidLeg(format!(
                    "charges must be strictly increasing, got {} before {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(q, _)) = sectors.iter().find(|(_, d)| *d == 0) {
            return Err(TensorError::InvalidLeg(format!("sector {q} has zero degeneracy")));
        }
        Ok(Self { dir, sectors })
    }

    /// Builds a leg from unsorted `(charge, degeneracy)` pairs, merging
    /// repeated charges and dropping empty ones.
    pub fn from_unsorted(dir: Direction, pairs: impl IntoIterator<Item = (i32, usize)>) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for (q, d) in pairs {
            *map.entry(q).or_insert(0usize) += d;
        }
        Self::new(dir, map.into_iter().filter(|(_, d)| *d > 0).collect())
    }

    /// One-dimensional leg carrying charge 0.
    pub fn trivial(dir: Direction) -> Self {
        Self { dir, sectors: vec![(0, 1)] }
    }

    /// One-dimensional leg carrying `charge`.
    pub fn single(dir: Direction, charge: i32) -> Self {
        Self { dir, sectors: vec![(charge, 1)] }
    }

    pub fn dir(&self) -> Direction {
        self.dir
    }

    pub fn sectors(&self) -> &[(i32, usize)] {
        &self.sectors
    }

    pub fn charges(&self) -> impl Iterator<Item = i32> + '_ {
        self.sectors.iter().map(|s| s.0)
    }

    pub fn dim(&self) -> usize {
        self.sectors.iter().map(|s| s.1).sum()
    }

    pub fn num_sectors(&self) -> usize {
        self.sectors.len()
    }

    pub fn degeneracy(&self, charge: i32) -> Option<usize> {
        self.sectors
            .binary_search_by_key(&charge, |s| s.0)
            .ok()
            .map(|i| self.sectors[i].1)
    }

    /// Dense offset of the first element of sector `charge`.
    pub fn offset(&self, charge: i32) -> Option<usize> {
        let pos = self.sectors.binary_search_by_key(&charge, |s| s.0).ok()?;
        Some(self.sectors[..pos].iter().map(|s| s.1).sum())
    }

    /// The same sectors with the opposite direction.
    pub fn dual(&self) -> Self {
        Self {
            dir: self.dir.flip(),
            sectors: self.sectors.clone(),
        }
    }

    pub fn with_dir(&self, dir: Direction) -> Self {
        Self {
            dir,
            sectors: self.sectors.clone(),
        }
    }

    /// True when `other` can be contracted against this leg.
    pub fn pairs_with(&self, other: &ChargeLeg) -> bool {
        self.dir != other.dir && self.sectors == other.sectors
    }

    pub(crate) fn shifted(&self, delta: i32) -> Self {
        Self {
            dir: self.dir,
            sectors: self.sectors.iter().map(|&(q, d)| (q + delta, d)).collect(),
        }
    }

    /// Sector charge and in-sector index of dense index `i`.
    pub fn locate(&self, mut i: usize) -> Option<(i32, usize)> {
        for &(q, d) in &self.sectors {
            if i < d {
                return Some((q, i));
            }
            i -= d;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_empty_sectors() {
        assert!(ChargeLeg::new(Direction::In, vec![(1, 1), (0, 2)]).is_err());
        assert!(ChargeLeg::new(Direction::In, vec![(0, 1), (0, 2)]).is_err());
        assert!(ChargeLeg::new(Direction::In, vec![(0, 0)]).is_err());
        assert!(ChargeLeg::new(Direction::In, vec![]).is_err());
    }

    #[test]
    fn dims_and_offsets() {
        let leg = ChargeLeg::new(Direction::Out, vec![(-1, 2), (0, 1), (3, 4)]).unwrap();
        assert_eq!(leg.dim(), 7);
        assert_eq!(leg.offset(-1), Some(0));
        assert_eq!(leg.offset(0), Some(2));
        assert_eq!(leg.offset(3), Some(3));
        assert_eq!(leg.offset(2), None);
        assert_eq!(leg.locate(4), Some((3, 1)));
        assert_eq!(leg.locate(7), None);
        assert!(leg.pairs_with(&leg.dual()));
        assert!(!leg.pairs_with(&leg));
    }

    #[test]
    fn from_unsorted_merges() {
        let leg = ChargeLeg::from_unsorted(Direction::In, [(2, 1), (0, 1), (2, 3), (5, 0)]).unwrap();
        assert_eq!(leg.sectors(), &[(0, 1), (2, 4)]);
    }
}
