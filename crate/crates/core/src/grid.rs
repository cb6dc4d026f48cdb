//! Square row-major raster used for every per-pixel quantity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel coordinate `(row, col)`.
pub type Px = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    size: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(size: usize, value: T) -> Self {
        Grid {
            size,
            data: vec![value; size * size],
        }
    }

    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                data.push(f(i, j));
            }
        }
        Grid { size, data }
    }

    pub fn from_vec(size: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::shape(size * size, data.len()));
        }
        Ok(Grid { size, data })
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            size: self.size,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Mirror left-right (column `j` becomes `L-1-j`).
    pub fn flip_h(&self) -> Self {
        let n = self.size;
        Grid::from_fn(n, |i, j| self[(i, n - 1 - j)].clone())
    }

    /// Mirror top-bottom (row `i` becomes `L-1-i`).
    pub fn flip_v(&self) -> Self {
        let n = self.size;
        Grid::from_fn(n, |i, j| self[(n - 1 - i, j)].clone())
    }
}

impl<T> Grid<T> {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn contains(&self, p: Px) -> bool {
        p.0 < self.size && p.1 < self.size
    }

    pub fn get(&self, p: Px) -> Option<&T> {
        self.contains(p).then(|| &self.data[p.0 * self.size + p.1])
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    /// Iterate `((row, col), value)` in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = (Px, &T)> {
        let n = self.size;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, v)| ((k / n, k % n), v))
    }
}

impl<T> std::ops::Index<Px> for Grid<T> {
    type Output = T;

    fn index(&self, p: Px) -> &T {
        debug_assert!(self.contains(p));
        &self.data[p.0 * self.size + p.1]
    }
}

impl<T> std::ops::IndexMut<Px> for Grid<T> {
    fn index_mut(&mut self, p: Px) -> &mut T {
        debug_assert!(self.contains(p));
        &mut self.data[p.0 * self.size + p.1]
    }
}

/// Boolean raster.
pub type Mask = Grid<bool>;

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flips_are_involutions() {
        let g = Grid::from_fn(5, |i, j| i * 10 + j);
        assert_eq!(g.flip_h().flip_h(), g);
        assert_eq!(g.flip_v().flip_v(), g);
        assert_eq!(g.flip_h()[(1, 0)], 14);
        assert_eq!(g.flip_v()[(0, 2)], 42);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Grid::from_vec(3, vec![0u8; 8]).is_err());
        assert!(Grid::from_vec(3, vec![0u8; 9]).is_ok());
    }
}
