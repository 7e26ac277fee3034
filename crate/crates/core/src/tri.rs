//! Packed storage for lower-triangular `N x N` matrices (diagonal included).
//!
//! Indices are 0-based here; cell `(i, j)` exists only for `j <= i` and is
//! read as "target `i`, source `j`".

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowerTriangular<T> {
    n: usize,
    cells: Vec<T>,
}

#[inline]
fn offset(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl<T: Clone> LowerTriangular<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Self { n, cells: alloc::vec![value; n * (n + 1) / 2] }
    }
}

impl<T> LowerTriangular<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut cells = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                cells.push(f(i, j));
            }
        }
        Self { n, cells }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `None` above the diagonal or out of range.
    pub fn get(&self, i: usize, j: usize) -> Option<&T> {
        if j > i || i >= self.n {
            return None;
        }
        self.cells.get(offset(i, j))
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> Option<&mut T> {
        if j > i || i >= self.n {
            return None;
        }
        self.cells.get_mut(offset(i, j))
    }

    /// Cells in row-major order: `(i, j, value)` for `j <= i`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        (0..self.n).flat_map(move |i| (0..=i).map(move |j| (i, j, &self.cells[offset(i, j)])))
    }
}

impl<T> core::ops::Index<(usize, usize)> for LowerTriangular<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        self.get(i, j).expect("cell above diagonal or out of range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_layout() {
        let m = LowerTriangular::from_fn(4, |i, j| i * 10 + j);
        assert_eq!(m.iter().count(), 10);
        assert_eq!(m[(3, 2)], 32);
        assert_eq!(m.get(1, 2), None);
        assert_eq!(m.get(4, 0), None);
        let order: Vec<_> = m.iter().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(order[..4], [(0, 0), (1, 0), (1, 1), (2, 0)]);
    }
}
