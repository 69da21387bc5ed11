//! Uniform grid for fixed-radius neighbor queries.
//!
//! Points are bucketed into cubic cells of side `cell_size`; a query with
//! radius `<= cell_size` only needs the 27 cells around the query point.
//! Cells live in a sorted key table and are found through a fixed-hash
//! open-addressing index, so the structure needs only `alloc` and iteration
//! order is reproducible.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::math;

type CellKey = [i64; 3];

#[derive(Debug, Clone)]
pub struct CellGrid {
    cell_size: f64,
    /// Sorted unique cell keys with `[start, end)` ranges into `order`.
    cells: Vec<(CellKey, u32, u32)>,
    /// Point indices grouped by cell, ascending within each cell.
    order: Vec<u32>,
    /// Copy of the points in `order`, for contiguous scans.
    sorted: Vec<Vector3<f64>>,
    /// Linear-probing table of `cell position + 1` (0 marks an empty slot).
    slots: Vec<u32>,
}

fn hash_key(k: &CellKey) -> u64 {
    let mut h = (k[0] as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h ^= (k[1] as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= (k[2] as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    h ^ (h >> 29)
}

fn cell_of(p: &Vector3<f64>, inv: f64) -> CellKey {
    // Clamp keeps far-away points from overflowing while preserving neighbor structure nearby.
    let c = |x: f64| math::floor(x * inv).clamp(-(1i64 << 52) as f64, (1i64 << 52) as f64) as i64;
    [c(p.x), c(p.y), c(p.z)]
}

impl CellGrid {
    pub fn new(points: &[Vector3<f64>], cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite(), "cell size must be positive");
        let inv = 1.0 / cell_size;
        let mut keyed: Vec<(CellKey, u32)> =
            points.iter().enumerate().map(|(i, p)| (cell_of(p, inv), i as u32)).collect();
        keyed.sort_unstable();

        let mut cells: Vec<(CellKey, u32, u32)> = Vec::new();
        let mut order = Vec::with_capacity(keyed.len());
        for (pos, (key, idx)) in keyed.into_iter().enumerate() {
            match cells.last_mut() {
                Some(last) if last.0 == key => last.2 = pos as u32 + 1,
                _ => cells.push((key, pos as u32, pos as u32 + 1)),
            }
            order.push(idx);
        }
        let sorted = order.iter().map(|&i| points[i as usize]).collect();
        let mask = (2 * cells.len()).next_power_of_two().max(2) - 1;
        let mut slots = vec![0u32; mask + 1];
        for (pos, (key, _, _)) in cells.iter().enumerate() {
            let mut h = hash_key(key) as usize & mask;
            while slots[h] != 0 {
                h = (h + 1) & mask;
            }
            slots[h] = pos as u32 + 1;
        }
        Self { cell_size, cells, order, sorted, slots }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    fn find(&self, key: &CellKey) -> Option<usize> {
        let mask = self.slots.len() - 1;
        let mut h = hash_key(key) as usize & mask;
        loop {
            match self.slots[h] {
                0 => return None,
                s if self.cells[s as usize - 1].0 == *key => return Some(s as usize - 1),
                _ => h = (h + 1) & mask,
            }
        }
    }

    /// Calls `visit(i, squared_distance)` for every point within `radius`
    /// of `q` (inclusive). `radius` must not exceed the cell size; `points`
    /// must be the slice the grid was built from.
    pub fn for_each_within<F: FnMut(usize, f64)>(
        &self,
        points: &[Vector3<f64>],
        q: &Vector3<f64>,
        radius: f64,
        mut visit: F,
    ) {
        debug_assert!(radius <= self.cell_size * (1.0 + 1e-12));
        debug_assert_eq!(points.len(), self.sorted.len());
        let r2 = radius * radius;
        let c = cell_of(q, 1.0 / self.cell_size);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(cell) = self.find(&[c[0] + dx, c[1] + dy, c[2] + dz]) else { continue };
                    let (_, start, end) = self.cells[cell];
                    let (start, end) = (start as usize, end as usize);
                    for (k, p) in self.sorted[start..end].iter().enumerate() {
                        let d2 = (p - q).norm_squared();
                        if d2 <= r2 {
                            visit(self.order[start + k] as usize, d2);
                        }
                    }
                }
            }
        }
    }

    /// Indices within `radius` of `q`, ascending.
    pub fn within(&self, points: &[Vector3<f64>], q: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(points, q, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vector3<f64>> = (0..800)
            .map(|_| Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)))
            .collect();
        let r = 0.37;
        let grid = CellGrid::new(&pts, r);
        for _ in 0..200 {
            let q = Vector3::new(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5), rng.random_range(-1.5..1.5));
            let got = grid.within(&pts, &q, r);
            let want: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() <= r).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn empty_grid_has_no_neighbors() {
        let grid = CellGrid::new(&[], 1.0);
        assert_eq!(grid.cell_count(), 0);
        assert!(grid.within(&[], &Vector3::zeros(), 1.0).is_empty());
    }

    #[test]
    fn boundary_distance_is_inclusive() {
        let pts = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.5, 0.0, 0.0)];
        let grid = CellGrid::new(&pts, 0.5);
        assert_eq!(grid.within(&pts, &pts[0], 0.5), vec![0, 1]);
    }
}
