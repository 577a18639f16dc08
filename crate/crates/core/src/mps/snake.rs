use crate::lattice::Lattice;

/// Row-major boustrophedon ordering of a lattice into a chain: even rows run
/// left to right, odd rows right to left.
///
/// Horizontal lattice bonds become chain nearest neighbours; vertical bonds
/// connect chain sites up to `2 · cols - 1` apart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnakeMap {
    lattice: Lattice,
    chain_of_site: Vec<usize>,
    site_of_chain: Vec<usize>,
}

impl SnakeMap {
    pub fn new(lattice: Lattice) -> Self {
        let n = lattice.n_sites();
        let mut chain_of_site = vec![0; n];
        let mut site_of_chain = vec![0; n];
        for y in 0..lattice.rows {
            for x in 0..lattice.cols {
                let along = if y % 2 == 0 { x } else { lattice.cols - 1 - x };
                let c = y * lattice.cols + along;
                let s = lattice.index(x, y);
                chain_of_site[s] = c;
                site_of_chain[c] = s;
            }
        }
        Self {
            lattice,
            chain_of_site,
            site_of_chain,
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn len(&self) -> usize {
        self.chain_of_site.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain_of_site.is_empty()
    }

    pub fn chain(&self, site: usize) -> usize {
        self.chain_of_site[site]
    }

    pub fn site(&self, chain: usize) -> usize {
        self.site_of_chain[chain]
    }

    /// Every lattice bond as a chain pair `(i, j)` with `i < j`, sorted.
    pub fn chain_bonds(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .lattice
            .bonds()
            .iter()
            .map(|b| {
                let (i, j) = (self.chain(b.a), self.chain(b.b));
                (i.min(j), i.max(j))
            })
            .collect();
        out.sort();
        out
    }

    /// Staggered field sign of chain site `c`.
    pub fn stagger(&self, c: usize) -> i32 {
        self.lattice.stagger(self.site(c))
    }
}
