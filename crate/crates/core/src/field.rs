//! Electric-field histories shared by the cascade, the direct solver and
//! the diagnostics.

use std::collections::BTreeMap;

use crate::scalar::{czero, Cx, Real};

/// Number of points of the `x`-grid used for `sup_x |E|`.
pub const X_POINTS: usize = 256;

/// `E_hat(t_i, m)` for spatial modes `m` on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSeries<T> {
    dt: T,
    modes: BTreeMap<i64, Vec<Cx<T>>>,
    len: usize,
}

impl<T: Real> FieldSeries<T> {
    pub fn new(dt: T, len: usize) -> Self {
        Self {
            dt,
            modes: BTreeMap::new(),
            len,
        }
    }

    /// Adds `values` to mode `m`. Mode 0 is ignored (no mean field).
    pub fn accumulate(&mut self, m: i64, values: &[Cx<T>], weight: T) {
        assert_eq!(values.len(), self.len, "field history length");
        if m == 0 {
            return;
        }
        let slot = self.modes.entry(m).or_insert_with(|| vec![czero(); values.len()]);
        for (s, v) in slot.iter_mut().zip(values) {
            *s += *v * weight;
        }
    }

    pub fn insert(&mut self, m: i64, values: Vec<Cx<T>>) {
        assert_eq!(values.len(), self.len, "field history length");
        if m != 0 {
            self.modes.insert(m, values);
        }
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.dt
    }

    pub fn horizon(&self) -> T {
        self.time(self.len.saturating_sub(1))
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, &[Cx<T>])> {
        self.modes.iter().map(|(m, v)| (*m, v.as_slice()))
    }

    pub fn mode(&self, m: i64) -> Option<&[Cx<T>]> {
        self.modes.get(&m).map(|v| v.as_slice())
    }

    /// Amplitude of mode `m` at sample `i`; zero for absent modes.
    pub fn value(&self, m: i64, i: usize) -> Cx<T> {
        self.modes.get(&m).map_or_else(czero, |v| v[i])
    }

    /// `E(t_i, x_j)` on `n` equispaced points of `[0, 2 pi)`.
    pub fn spatial(&self, i: usize, n: usize) -> Vec<Cx<T>> {
        let two_pi = T::lit(2.0) * T::PI();
        (0..n)
            .map(|j| {
                let x = two_pi * T::from_usize_lossy(j) / T::from_usize_lossy(n);
                self.modes.iter().fold(czero(), |acc, (m, v)| {
                    acc + v[i] * Cx::from_polar(T::one(), T::from_i64_lossy(*m) * x)
                })
            })
            .collect()
    }

    /// `sup_x |E(t_i, x)|` on the standard `x`-grid.
    pub fn sup_x(&self, i: usize) -> T {
        self.spatial(i, X_POINTS)
            .iter()
            .map(|e| e.norm())
            .fold(T::zero(), T::max)
    }

    /// `sum_m |E_hat(t_i, m)|`, an upper bound for `sup_x |E|`.
    pub fn amplitude_sum(&self, i: usize) -> T {
        self.modes.values().map(|v| v[i].norm()).sum()
    }

    /// Largest `|Im E(t, x)|` over all samples and the `x`-grid.
    pub fn max_imaginary(&self) -> T {
        (0..self.len)
            .flat_map(|i| self.spatial(i, X_POINTS))
            .map(|e| e.im.abs())
            .fold(T::zero(), T::max)
    }

    pub fn sup_x_series(&self) -> Vec<T> {
        (0..self.len).map(|i| self.sup_x(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn hermitian_modes_synthesise_real_field() {
        let mut f = FieldSeries::<f64>::new(0.1, 2);
        f.insert(1, vec![cx(0.3, -0.2), cx(0.1, 0.0)]);
        f.insert(-1, vec![cx(0.3, 0.2), cx(0.1, 0.0)]);
        f.insert(0, vec![cx(5.0, 5.0); 2]);
        assert!(f.mode(0).is_none());
        assert!(f.max_imaginary() < 1e-15);
        // 2 |E_hat_1| = 2 sqrt(0.13)
        assert!((f.sup_x(0) - 2.0 * 0.13f64.sqrt()).abs() < 1e-3);
        assert!(f.sup_x(0) <= f.amplitude_sum(0) + 1e-15);
    }
}
