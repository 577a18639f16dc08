use serde::{Deserialize, Serialize};

/// Open-boundary square lattice. Site `(x, y)` has column `x` and row `y`;
/// the linear index is `y * cols + x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    pub rows: usize,
    pub cols: usize,
}

/// A nearest-neighbour bond between two linear site indices, `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub horizontal: bool,
}

impl Lattice {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "lattice needs at least one site");
        Self { rows, cols }
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.cols && y < self.rows);
        y * self.cols + x
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.cols, i / self.cols)
    }

    /// Staggered field sign `(-1)^(x+y)`.
    pub fn stagger(&self, i: usize) -> i32 {
        let (x, y) = self.coords(i);
        if (x + y) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = Vec::new();
        for y in 0..self.rows {
            for x in 0..self.cols {
                if x + 1 < self.cols {
                    out.push(Bond {
                        a: self.index(x, y),
                        b: self.index(x + 1, y),
                        horizontal: true,
                    });
                }
                if y + 1 < self.rows {
                    out.push(Bond {
                        a: self.index(x, y),
                        b: self.index(x, y + 1),
                        horizontal: false,
                    });
                }
            }
        }
        out
    }

    /// Disjoint bond groups for one Trotter step: horizontal bonds starting at
    /// even then odd `x`, vertical bonds starting at even then odd `y`. Empty
    /// groups are omitted.
    pub fn bond_groups(&self) -> Vec<Vec<Bond>> {
        let mut groups = vec![Vec::new(); 4];
        for b in self.bonds() {
            let (x, y) = self.coords(b.a);
            let g = if b.horizontal { x % 2 } else { 2 + y % 2 };
            groups[g].push(b);
        }
        groups.retain(|g| !g.is_empty());
        groups
    }

    /// Row-direction site pairs `(x0, y) – (x0 + R, y)` in row `y`, starting
    /// from the leftmost column.
    pub fn row_pairs(&self, y: usize, x0: usize) -> Vec<(usize, usize, usize)> {
        (1..self.cols - x0)
            .map(|r| (r, self.index(x0, y), self.index(x0 + r, y)))
            .collect()
    }

    /// Rows closest to the centre (one row for odd heights, two for even).
    pub fn central_rows(&self) -> Vec<usize> {
        if self.rows % 2 == 1 {
            vec![self.rows / 2]
        } else {
            vec![self.rows / 2 - 1, self.rows / 2]
        }
    }

    /// Sites with the same sublattice population balance: `true` when the
    /// Néel state has zero magnetization.
    pub fn is_balanced(&self) -> bool {
        self.n_sites() % 2 == 0
    }
}
