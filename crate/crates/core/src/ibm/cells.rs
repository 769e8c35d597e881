//! Cell lists over the periodic domain for neighborhood queries.

use crate::geometry::Point;

/// Uniform cell decomposition of `[0, L)^d` with cell edge at least the
/// interaction range, so every interacting pair sits in adjacent cells.
///
/// When the domain is too small to fit four cells per axis the structure
/// degrades to a single cell holding everything, which keeps queries correct
/// on tiny test domains at quadratic cost.
#[derive(Clone)]
pub struct CellGrid {
    dim: usize,
    cells_per_dim: usize,
    length: f64,
    members: Vec<Vec<u32>>,
}

impl CellGrid {
    pub fn new(length: f64, interaction_range: f64, dim: usize) -> Self {
        let cells_per_dim = if interaction_range > 0.0 {
            let n = (length / interaction_range).floor() as usize;
            if n < 4 {
                1
            } else {
                n
            }
        } else {
            1
        };
        let cell_count = cells_per_dim.pow(dim as u32);
        CellGrid {
            dim,
            cells_per_dim,
            length,
            members: vec![Vec::new(); cell_count],
        }
    }

    pub fn cell_of(&self, p: &Point) -> u32 {
        if self.cells_per_dim == 1 {
            return 0;
        }
        let n = self.cells_per_dim;
        let scale = n as f64 / self.length;
        let mut idx = 0usize;
        for &coord in p.iter().take(self.dim) {
            // Positions live in [0, L); rounding can still land on n.
            let mut i = (coord * scale) as usize;
            if i >= n {
                i = n - 1;
            }
            idx = idx * n + i;
        }
        idx as u32
    }

    pub fn insert(&mut self, particle: u32, cell: u32) {
        self.members[cell as usize].push(particle);
    }

    pub fn remove(&mut self, particle: u32, cell: u32) {
        let list = &mut self.members[cell as usize];
        let pos = list
            .iter()
            .position(|&m| m == particle)
            .expect("particle must be registered in its cell");
        list.swap_remove(pos);
    }

    /// Rewrite one registered index in place after a swap-removal renumbering.
    pub fn rename(&mut self, cell: u32, old: u32, new: u32) {
        let list = &mut self.members[cell as usize];
        let pos = list
            .iter()
            .position(|&m| m == old)
            .expect("renamed particle must be registered in its cell");
        list[pos] = new;
    }

    /// Push all particles in the 3^d cell neighborhood of `p` into `out`.
    pub fn neighbors_into(&self, p: &Point, out: &mut Vec<u32>) {
        out.clear();
        let n = self.cells_per_dim;
        if n == 1 {
            out.extend_from_slice(&self.members[0]);
            return;
        }
        let center = self.cell_of(p);
        match self.dim {
            1 => {
                let i = center as usize;
                for di in [n - 1, 0, 1] {
                    let c = (i + di) % n;
                    out.extend_from_slice(&self.members[c]);
                }
            }
            _ => {
                let ix = center as usize / n;
                let iy = center as usize % n;
                for dx in [n - 1, 0, 1] {
                    let cx = (ix + dx) % n;
                    for dy in [n - 1, 0, 1] {
                        let cy = (iy + dy) % n;
                        out.extend_from_slice(&self.members[cx * n + cy]);
                    }
                }
            }
        }
    }
}
