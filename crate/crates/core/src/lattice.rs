//! Periodic lattice geometry.
//!
//! Sites of a torus with side lengths `dims = [L0, .., L(d-1)]` are indexed
//! row-major: the first coordinate varies slowest, the last fastest, and
//! `index = ((c0 * L1 + c1) * L2 + c2) ...`. Each site has `2d` neighbour
//! slots; slot `2k` is `+e_k` and slot `2k + 1` is `-e_k`, both with modular
//! wrap. On a side of length 2 both slots of that axis point at the same
//! site, and the torus is treated as a multigraph with two parallel bonds.
//!
//! Undirected bonds are enumerated as `(x, x + e_k)` for every site `x` and
//! axis `k`, in site-major then axis order.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SepError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Torus {
    dims: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
    neighbours: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Torus {
    type Error = SepError;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Torus::new(&dims)
    }
}

impl From<Torus> for Vec<usize> {
    fn from(t: Torus) -> Self {
        t.dims
    }
}

impl Torus {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(SepError::InvalidDims("at least one dimension required".into()));
        }
        if let Some(&l) = dims.iter().find(|&&l| l < 2) {
            return Err(SepError::InvalidDims(format!("side length {l} < 2")));
        }
        let size = dims
            .iter()
            .try_fold(1usize, |acc, &l| acc.checked_mul(l))
            .ok_or_else(|| SepError::InvalidDims("site count overflows".into()))?;
        let d = dims.len();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let mut neighbours = vec![0usize; size * 2 * d];
        for x in 0..size {
            for k in 0..d {
                let c = (x / strides[k]) % dims[k];
                let up = if c + 1 == dims[k] {
                    x - c * strides[k]
                } else {
                    x + strides[k]
                };
                let down = if c == 0 {
                    x + (dims[k] - 1) * strides[k]
                } else {
                    x - strides[k]
                };
                neighbours[x * 2 * d + 2 * k] = up;
                neighbours[x * 2 * d + 2 * k + 1] = down;
            }
        }
        Ok(Torus {
            dims: dims.to_vec(),
            strides,
            size,
            neighbours,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of neighbour slots per site (`2d`).
    pub fn degree(&self) -> usize {
        2 * self.dims.len()
    }

    pub fn check_site(&self, x: usize) -> Result<()> {
        if x < self.size {
            Ok(())
        } else {
            Err(SepError::InvalidSite {
                site: x,
                size: self.size,
            })
        }
    }

    #[inline]
    pub fn neighbour(&self, x: usize, slot: usize) -> usize {
        self.neighbours[x * self.degree() + slot]
    }

    /// The `2d` neighbour slots of `x`.
    #[inline]
    pub fn neighbours(&self, x: usize) -> &[usize] {
        let deg = self.degree();
        &self.neighbours[x * deg..(x + 1) * deg]
    }

    /// Slot that undoes `slot` (`+e_k` <-> `-e_k`).
    #[inline]
    pub fn reverse_slot(slot: usize) -> usize {
        slot ^ 1
    }

    pub fn are_neighbours(&self, x: usize, y: usize) -> bool {
        x < self.size && self.neighbours(x).contains(&y)
    }

    pub fn coords(&self, x: usize) -> Vec<usize> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&l, &s)| (x / s) % l)
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.dims)
            .zip(&self.strides)
            .map(|((&c, &l), &s)| (c % l) * s)
            .sum()
    }

    /// Index of `x + shift` with modular wrap; `shift` may be negative.
    pub fn shift(&self, x: usize, shift: &[i64]) -> usize {
        let c = self.coords(x);
        let shifted: Vec<usize> = c
            .iter()
            .zip(&self.dims)
            .zip(shift)
            .map(|((&c, &l), &s)| (c as i64 + s).rem_euclid(l as i64) as usize)
            .collect();
        self.index(&shifted)
    }

    /// Minimal-image coordinate difference `y - x`, each component in
    /// `(-L/2, L/2]`.
    pub fn displacement(&self, x: usize, y: usize) -> Vec<i64> {
        let cx = self.coords(x);
        let cy = self.coords(y);
        cx.iter()
            .zip(&cy)
            .zip(&self.dims)
            .map(|((&a, &b), &l)| {
                let l = l as i64;
                let mut d = (b as i64 - a as i64).rem_euclid(l);
                if d > l / 2 {
                    d -= l;
                }
                d
            })
            .collect()
    }

    /// Euclidean minimal-image distance.
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.displacement(x, y)
            .iter()
            .map(|&d| (d * d) as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Undirected bonds `(x, x + e_k)`.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.dim();
        (0..self.size).flat_map(move |x| (0..d).map(move |k| (x, self.neighbour(x, 2 * k))))
    }

    pub fn bond_count(&self) -> usize {
        self.size * self.dim()
    }

    /// Unit-step direction of `slot` as a signed axis vector component.
    #[inline]
    pub fn slot_axis(slot: usize) -> (usize, i64) {
        (slot / 2, if slot.is_multiple_of(2) { 1 } else { -1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_sides() {
        assert!(Torus::new(&[1]).is_err());
        assert!(Torus::new(&[]).is_err());
    }

    #[test]
    fn row_major_layout() {
        let t = Torus::new(&[3, 4]).unwrap();
        assert_eq!(t.index(&[1, 2]), 6);
        assert_eq!(t.coords(6), vec![1, 2]);
        // +e_1 from (1,3) wraps to (1,0)
        assert_eq!(t.neighbour(t.index(&[1, 3]), 2), t.index(&[1, 0]));
        // -e_0 from (0,1) wraps to (2,1)
        assert_eq!(t.neighbour(t.index(&[0, 1]), 1), t.index(&[2, 1]));
    }

    #[test]
    fn neighbour_relation_is_symmetric() {
        let t = Torus::new(&[5, 3, 4]).unwrap();
        for x in 0..t.size() {
            for slot in 0..t.degree() {
                let y = t.neighbour(x, slot);
                assert_eq!(t.neighbour(y, Torus::reverse_slot(slot)), x);
            }
        }
    }

    #[test]
    fn bond_enumeration() {
        let t = Torus::new(&[3]).unwrap();
        let b: Vec<_> = t.bonds().collect();
        assert_eq!(b, vec![(0, 1), (1, 2), (2, 0)]);
        assert_eq!(Torus::new(&[4, 5]).unwrap().bonds().count(), 40);
    }

    #[test]
    fn minimal_image_distance() {
        let t = Torus::new(&[10]).unwrap();
        assert_eq!(t.displacement(1, 9), vec![-2]);
        assert_eq!(t.distance(0, 5), 5.0);
        let t2 = Torus::new(&[8, 8]).unwrap();
        assert!((t2.distance(0, t2.index(&[7, 7])) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn shift_wraps() {
        let t = Torus::new(&[4, 6]).unwrap();
        let x = t.index(&[3, 5]);
        assert_eq!(t.shift(x, &[1, 1]), 0);
        assert_eq!(t.shift(x, &[-4, 6]), x);
    }
}
