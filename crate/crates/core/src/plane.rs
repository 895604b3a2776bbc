//! Square row-major buffers indexed by DFT bin or pixel.

use serde::{Deserialize, Serialize};

/// A square `side x side` array stored row-major. Axis 0 is the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane<T> {
    side: usize,
    data: Vec<T>,
}

impl<T: Clone> Plane<T> {
    pub fn filled(side: usize, value: T) -> Self {
        Plane { side, data: vec![value; side * side] }
    }
}

impl<T> Plane<T> {
    /// Panics if `data.len() != side * side`.
    pub fn from_vec(side: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), side * side, "plane data length");
        Plane { side, data }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                data.push(f(i, j));
            }
        }
        Plane { side, data }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Plane<U> {
        Plane { side: self.side, data: self.data.iter().map(f).collect() }
    }

    /// Value at the bin of a signed frequency (wraps modulo the side).
    pub fn at_freq(&self, k: [i64; 2]) -> &T {
        let m = self.side as i64;
        &self.data[(k[0].rem_euclid(m) * m + k[1].rem_euclid(m)) as usize]
    }

    pub fn at_freq_mut(&mut self, k: [i64; 2]) -> &mut T {
        let m = self.side as i64;
        &mut self.data[(k[0].rem_euclid(m) * m + k[1].rem_euclid(m)) as usize]
    }
}

impl<T> std::ops::Index<(usize, usize)> for Plane<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.side + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Plane<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.side + j]
    }
}

/// Signed frequency of bin `i` on a grid of side `m`, in `[-m/2, m/2)`.
pub fn signed_freq(i: usize, m: usize) -> i64 {
    let (i, m) = (i as i64, m as i64);
    if i < m / 2 {
        i
    } else {
        i - m
    }
}

/// Moves the zero frequency to the centre for display.
pub fn centered<T: Clone>(p: &Plane<T>) -> Plane<T> {
    let m = p.side();
    Plane::from_fn(m, |i, j| p[((i + m / 2) % m, (j + m / 2) % m)].clone())
}
