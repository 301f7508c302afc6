//! Uniform time and Fourier-velocity grids.

use crate::error::{invalid, Result};
use crate::scalar::{czero, Cx, Real};

/// Uniform time grid `t_i = i * dt`, `i = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    dt: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    /// Grid covering `[0, horizon]`. The horizon is rounded to the nearest
    /// whole number of steps.
    pub fn new(dt: T, horizon: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(invalid("dt", format!("must be positive and finite, got {dt}")));
        }
        if !(horizon >= T::zero()) || !horizon.is_finite() {
            return Err(invalid("T", format!("must be non-negative and finite, got {horizon}")));
        }
        let steps = (horizon / dt).round().to_usize().unwrap_or(0);
        Ok(Self { dt, steps })
    }

    pub fn with_steps(dt: T, steps: usize) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(invalid("dt", "must be positive"));
        }
        Ok(Self { dt, steps })
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.dt
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of samples (`steps + 1`).
    #[inline]
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.dt
    }

    pub fn horizon(&self) -> T {
        self.time(self.steps)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    /// Index of the sample at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let x = t / self.dt;
        let i = x.round();
        if i < T::zero() || (x - i).abs() > T::lit(1e-6) {
            return None;
        }
        let i = i.to_usize()?;
        (i <= self.steps).then_some(i)
    }
}

/// Uniform grid `x_j = start + j * step`, `j = 0..len`, for the
/// Fourier-velocity variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaGrid<T> {
    start: T,
    step: T,
    len: usize,
}

/// Result of a moving-point evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample<T> {
    pub value: Cx<T>,
    pub in_range: bool,
}

impl<T: Real> EtaGrid<T> {
    /// Symmetric grid `[-range, range]`, `range` rounded to whole steps.
    pub fn symmetric(range: T, step: T) -> Result<Self> {
        if !(step > T::zero()) {
            return Err(invalid("eta_step", "must be positive"));
        }
        if !(range > T::zero()) {
            return Err(invalid("eta_range", "must be positive"));
        }
        let half = (range / step).round().to_usize().unwrap_or(0);
        if half == 0 {
            return Err(invalid("eta_range", "shorter than one step"));
        }
        Ok(Self {
            start: -T::from_usize_lossy(half) * step,
            step,
            len: 2 * half + 1,
        })
    }

    pub fn new(start: T, step: T, len: usize) -> Result<Self> {
        if !(step > T::zero()) || len < 2 {
            return Err(invalid("eta_grid", "need positive step and at least two points"));
        }
        Ok(Self { start, step, len })
    }

    #[inline]
    pub fn start(&self) -> T {
        self.start
    }

    #[inline]
    pub fn step(&self) -> T {
        self.step
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn point(&self, j: usize) -> T {
        self.start + T::from_usize_lossy(j) * self.step
    }

    pub fn end(&self) -> T {
        self.point(self.len - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len).map(move |j| self.point(j))
    }

    /// Largest `|eta'|` on the grid.
    pub fn max_abs(&self) -> T {
        self.start.abs().max(self.end().abs())
    }

    /// True when the grid is mirror-symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        self.len % 2 == 1 && (self.start + self.end()).abs() <= self.step * T::lit(1e-9)
    }

    /// Index of the grid point equal to `x`, if any.
    pub fn index_of(&self, x: T) -> Option<usize> {
        let u = (x - self.start) / self.step;
        let j = u.round();
        if j < T::zero() || (u - j).abs() > T::lit(1e-9) {
            return None;
        }
        let j = j.to_usize()?;
        (j < self.len).then_some(j)
    }

    /// Index of `eta' = 0` on a grid that contains it.
    pub fn zero_index(&self) -> Option<usize> {
        self.index_of(T::zero())
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.start && x <= self.end()
    }

    /// The same grid extended by whole steps on either side until it
    /// covers `[-range, range]`. Every point of `self` stays a grid point.
    pub fn widened(&self, range: T) -> Self {
        let left = ((self.start + range) / self.step).ceil().max(T::zero());
        let right = ((range - self.end()) / self.step).ceil().max(T::zero());
        let left = left.to_usize().unwrap_or(0);
        let right = right.to_usize().unwrap_or(0);
        Self {
            start: self.start - T::from_usize_lossy(left) * self.step,
            step: self.step,
            len: self.len + left + right,
        }
    }

    /// Cubic Lagrange interpolation of `values` at `x`.
    ///
    /// Samples outside the grid are treated as zero, so the interpolant
    /// fades to zero within one step past either end.
    pub fn interpolate(&self, values: &[Cx<T>], x: T) -> Sample<T> {
        debug_assert_eq!(values.len(), self.len);
        let in_range = self.contains(x);
        let u = (x - self.start) / self.step;
        let base = u.floor();
        let s = u - base;
        let Some(base) = base.to_i64() else {
            return Sample { value: czero(), in_range };
        };
        let n = self.len as i64;
        if base < -2 || base > n {
            return Sample { value: czero(), in_range };
        }
        let w = cubic_weights(s);
        let mut acc = czero();
        for (offset, wi) in (-1i64..=2).zip(w) {
            let j = base + offset;
            if j >= 0 && j < n {
                acc += values[j as usize] * wi;
            }
        }
        Sample { value: acc, in_range }
    }

    /// Writes the cubic interpolant of `values` at `x_j + shift` into
    /// `out[j]` for every grid point, with zero samples outside the grid.
    ///
    /// Returns true when an evaluation point falls outside the grid on a
    /// side whose edge sample exceeds `1e-14` of the row maximum, i.e. when
    /// the zero extension actually truncates something.
    pub fn shift_into(&self, values: &[Cx<T>], shift: T, out: &mut [Cx<T>]) -> bool {
        debug_assert_eq!(values.len(), self.len);
        debug_assert_eq!(out.len(), self.len);
        let d = shift / self.step;
        let whole = d.floor();
        let w = cubic_weights(d - whole);
        let n = self.len as i64;
        let Some(base0) = whole.to_i64().filter(|b| b.abs() <= n + 2) else {
            out.iter_mut().for_each(|o| *o = czero());
            return edge_significant(values, d > T::zero(), d < T::zero());
        };
        for (j, o) in out.iter_mut().enumerate() {
            let base = j as i64 + base0;
            let mut acc = czero();
            if base >= 1 && base + 2 < n {
                let b = base as usize;
                acc = values[b - 1] * w[0] + values[b] * w[1] + values[b + 1] * w[2] + values[b + 2] * w[3];
            } else {
                for (offset, wi) in (-1i64..=2).zip(w) {
                    let i = base + offset;
                    if i >= 0 && i < n {
                        acc += values[i as usize] * wi;
                    }
                }
            }
            *o = acc;
        }
        let leaves_right = d > T::zero();
        let leaves_left = d < T::zero();
        edge_significant(values, leaves_right, leaves_left)
    }
}

fn edge_significant<T: Real>(values: &[Cx<T>], right: bool, left: bool) -> bool {
    let peak = values.iter().map(|v| v.norm()).fold(T::zero(), T::max);
    if peak == T::zero() {
        return false;
    }
    let cut = peak * T::lit(1e-14);
    (right && values[values.len() - 1].norm() > cut) || (left && values[0].norm() > cut)
}

/// Lagrange weights on nodes -1, 0, 1, 2 for fractional offset `s`.
#[inline]
pub(crate) fn cubic_weights<T: Real>(s: T) -> [T; 4] {
    let one = T::one();
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let sp1 = s + one;
    let sm1 = s - one;
    let sm2 = s - two;
    [
        -s * sm1 * sm2 / six,
        sp1 * sm1 * sm2 / two,
        -sp1 * s * sm2 / two,
        sp1 * s * sm1 / six,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn time_grid_rounds_horizon() {
        let g = TimeGrid::new(0.05f64, 20.0).unwrap();
        assert_eq!(g.steps(), 400);
        assert_eq!(g.len(), 401);
        assert!((g.horizon() - 20.0).abs() < 1e-12);
        assert_eq!(g.index_of(0.5), Some(10));
        assert_eq!(g.index_of(0.51), None);
        assert!(TimeGrid::new(0.0, 1.0).is_err());
    }

    #[test]
    fn eta_grid_symmetric_layout() {
        let g = EtaGrid::symmetric(60.0, 0.25).unwrap();
        assert_eq!(g.len(), 481);
        assert_eq!(g.zero_index(), Some(240));
        assert!(g.is_symmetric());
        assert_eq!(g.point(0), -60.0);
        assert_eq!(g.end(), 60.0);
    }

    #[test]
    fn cubic_interpolation_exact_on_cubics() {
        let g = EtaGrid::symmetric(5.0, 0.5).unwrap();
        let f = |x: f64| 0.3 * x * x * x - x * x + 2.0 * x - 1.0;
        let vals: Vec<_> = g.points().map(|x| cx(f(x), -f(x))).collect();
        for &x in &[-3.3, -0.1, 0.0, 1.77, 4.2] {
            let s = g.interpolate(&vals, x);
            assert!(s.in_range);
            assert!((s.value.re - f(x)).abs() < 1e-11, "x = {x}");
            assert!((s.value.im + f(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn shift_matches_pointwise_interpolation() {
        let g = EtaGrid::symmetric(4.0f64, 0.25).unwrap();
        let vals: Vec<_> = g.points().map(|x| cx((-x * x).exp(), x.sin())).collect();
        let mut out = vec![czero(); g.len()];
        for &s in &[0.0, 0.13, -0.61, 3.9, -7.2, 40.0] {
            let cut = g.shift_into(&vals, s, &mut out);
            for (j, o) in out.iter().enumerate() {
                let p = g.interpolate(&vals, g.point(j) + s).value;
                assert!((o - p).norm() < 1e-13, "shift {s}, j {j}: {o} vs {p}");
            }
            assert_eq!(cut, s != 0.0, "shift {s}");
        }
    }

    #[test]
    fn widening_keeps_points() {
        let g = EtaGrid::symmetric(60.0f64, 0.25).unwrap();
        let w = g.widened(100.1);
        assert_eq!(w.len(), 481 + 2 * 161);
        assert!(w.is_symmetric());
        assert_eq!(w.index_of(g.start()), Some(161));
        assert_eq!(g.widened(10.0), g);
    }

    #[test]
    fn interpolation_outside_is_zero() {
        let g = EtaGrid::symmetric(2.0f64, 0.5).unwrap();
        let vals = vec![cx(1.0, 0.0); g.len()];
        let s = g.interpolate(&vals, 10.0);
        assert!(!s.in_range);
        assert_eq!(s.value, czero());
        let s = g.interpolate(&vals, -2.0);
        assert!(s.in_range);
        assert!((s.value.re - 1.0).abs() < 1e-15);
    }
}
