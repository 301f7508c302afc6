use std::collections::BTreeMap;

use crate::equilibrium::Equilibrium;
use crate::error::{invalid, Error, Result};
use crate::grid::{EtaGrid, TimeGrid};
use crate::quadrature::TimeRule;
use crate::scalar::{bracket, cx, Cx, Real};

/// Parameters of a cascade run.
///
/// `big_k` and `big_l` scale the spatial and velocity frequencies of the
/// initial waves, `e^{i K k x + i L eta v}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeConfig<T> {
    pub big_k: i64,
    pub big_l: i64,
    pub epsilon: T,
    pub lambda0: T,
    pub k_max: i64,
    pub eta_max: i64,
    pub p_max: u32,
    pub eta_grid: EtaGrid<T>,
    pub time: TimeGrid<T>,
    /// Admissible ratio `c` in `L <= c K`.
    pub l_ratio: T,
    pub rule: TimeRule,
    /// Keys whose source never exceeds this are dropped.
    pub prune_floor: T,
}

impl<T: Real> CascadeConfig<T> {
    /// Config with the default ratio, rule and pruning floor.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        big_k: i64,
        big_l: i64,
        epsilon: T,
        lambda0: T,
        k_max: i64,
        eta_max: i64,
        p_max: u32,
        eta_grid: EtaGrid<T>,
        time: TimeGrid<T>,
    ) -> Self {
        Self {
            big_k,
            big_l,
            epsilon,
            lambda0,
            k_max,
            eta_max,
            p_max,
            eta_grid,
            time,
            l_ratio: T::one(),
            rule: TimeRule::default(),
            prune_floor: T::lit(1e-14),
        }
    }

    pub fn validate(&self, eq: &Equilibrium<T>) -> Result<()> {
        if self.big_k < 1 {
            return Err(invalid("K", "must be a positive integer"));
        }
        if self.big_l < 1 {
            return Err(invalid("L", "must be a positive integer"));
        }
        if !(self.l_ratio > T::zero()) {
            return Err(invalid("l_ratio", "must be positive"));
        }
        if T::from_i64_lossy(self.big_l) > self.l_ratio * T::from_i64_lossy(self.big_k) {
            return Err(invalid(
                "L",
                format!("L = {} exceeds {} * K = {}", self.big_l, self.l_ratio, self.big_k),
            ));
        }
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon", "must be positive"));
        }
        if !(self.lambda0 > T::zero()) {
            return Err(invalid("lambda0", "must be positive"));
        }
        if self.lambda0 > eq.theta0() / T::lit(4.0) {
            return Err(invalid(
                "lambda0",
                format!("{} exceeds theta0/4 = {}", self.lambda0, eq.theta0() / T::lit(4.0)),
            ));
        }
        if self.k_max < 1 {
            return Err(invalid("k_max", "must be at least 1"));
        }
        if self.eta_max < 0 {
            return Err(invalid("eta_max", "must be non-negative"));
        }
        if self.p_max < 1 {
            return Err(invalid("p_max", "must be at least 1"));
        }
        if !(self.prune_floor >= T::zero()) {
            return Err(invalid("prune_floor", "must be non-negative"));
        }
        Ok(())
    }

    /// `R >= K k_max T + L eta_max + 10 / lambda0`: the range over which the
    /// moving evaluation points of layer one stay inside the grid.
    pub fn recommended_range(&self) -> T {
        T::from_i64_lossy(self.big_k * self.k_max) * self.time.horizon()
            + T::from_i64_lossy(self.big_l * self.eta_max)
            + T::lit(10.0) / self.lambda0
    }
}

/// Initial coefficients `f0_hat_{k,eta}(eta')` sampled on the eta' grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData<T> {
    grid: EtaGrid<T>,
    modes: BTreeMap<(i64, i64), Vec<Cx<T>>>,
}

impl<T: Real> InitialData<T> {
    pub fn empty(grid: EtaGrid<T>) -> Self {
        Self {
            grid,
            modes: BTreeMap::new(),
        }
    }

    /// Sparse data `scale * e^{-2 lambda0 <k, eta, eta'>}` for each listed
    /// `(k, eta, scale)`. With `hermitian`, the partner `(-k, -eta)` of
    /// every unlisted conjugate is added so that the data is real.
    pub fn from_modes(
        grid: EtaGrid<T>,
        lambda0: T,
        modes: &[(i64, i64, Cx<T>)],
        hermitian: bool,
    ) -> Result<Self> {
        let mut out = Self::empty(grid);
        for &(k, eta, scale) in modes {
            if k == 0 {
                return Err(invalid("modes", "initial waves need k != 0"));
            }
            if out.modes.contains_key(&(k, eta)) {
                return Err(invalid("modes", format!("duplicate mode ({k}, {eta})")));
            }
            out.modes.insert((k, eta), out.profile(lambda0, k, eta, scale));
        }
        if hermitian {
            if !grid.is_symmetric() {
                return Err(invalid("eta_grid", "Hermitian data needs a symmetric grid"));
            }
            for &(k, eta, scale) in modes {
                out.modes
                    .entry((-k, -eta))
                    .or_insert_with(|| Self::profile_on(&grid, lambda0, -k, -eta, scale.conj()));
            }
        }
        Ok(out)
    }

    /// Every mode with `1 <= |k| <= k_max`, `|eta| <= eta_max`, with
    /// coefficients `scale * e^{-2 lambda0 <k, eta, eta'>}`.
    pub fn uniform(grid: EtaGrid<T>, lambda0: T, k_max: i64, eta_max: i64, scale: T) -> Result<Self> {
        let mut list = Vec::new();
        for k in -k_max..=k_max {
            if k == 0 {
                continue;
            }
            for eta in -eta_max..=eta_max {
                list.push((k, eta, cx(scale, T::zero())));
            }
        }
        Self::from_modes(grid, lambda0, &list, false)
    }

    /// Arbitrary sampled profiles.
    pub fn from_profiles(grid: EtaGrid<T>, modes: BTreeMap<(i64, i64), Vec<Cx<T>>>) -> Result<Self> {
        for ((k, eta), v) in &modes {
            if *k == 0 {
                return Err(invalid("modes", "initial waves need k != 0"));
            }
            if v.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "profile ({k}, {eta}) has {} samples, grid has {}",
                    v.len(),
                    grid.len()
                )));
            }
        }
        Ok(Self { grid, modes })
    }

    fn profile(&self, lambda0: T, k: i64, eta: i64, scale: Cx<T>) -> Vec<Cx<T>> {
        Self::profile_on(&self.grid, lambda0, k, eta, scale)
    }

    fn profile_on(grid: &EtaGrid<T>, lambda0: T, k: i64, eta: i64, scale: Cx<T>) -> Vec<Cx<T>> {
        let (kf, ef) = (T::from_i64_lossy(k), T::from_i64_lossy(eta));
        grid.points()
            .map(|x| scale * (-T::lit(2.0) * lambda0 * bracket(&[kf, ef, x])).exp())
            .collect()
    }

    pub fn grid(&self) -> &EtaGrid<T> {
        &self.grid
    }

    pub fn modes(&self) -> impl Iterator<Item = ((i64, i64), &[Cx<T>])> {
        self.modes.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn max_abs_k(&self) -> i64 {
        self.modes.keys().map(|(k, _)| k.abs()).max().unwrap_or(0)
    }

    pub fn max_abs_eta(&self) -> i64 {
        self.modes.keys().map(|(_, e)| e.abs()).max().unwrap_or(0)
    }

    /// Checks `|f0_hat_{k,eta}(eta')| <= e^{-2 lambda0 <k, eta, eta'>}`.
    pub fn validate(&self, lambda0: T) -> Result<()> {
        let slack = T::one() + T::lit(1e-12);
        for (&(k, eta), v) in &self.modes {
            let (kf, ef) = (T::from_i64_lossy(k), T::from_i64_lossy(eta));
            for (j, val) in v.iter().enumerate() {
                let x = self.grid.point(j);
                let bound = (-T::lit(2.0) * lambda0 * bracket(&[kf, ef, x])).exp();
                if !(val.norm() <= bound * slack) {
                    return Err(Error::BoundViolation {
                        k,
                        eta,
                        eta_prime: x.as_f64(),
                        value: val.norm().as_f64(),
                        bound: bound.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    /// True when `f0_hat_{-k,-eta}(-eta') = conj(f0_hat_{k,eta}(eta'))`.
    pub fn is_hermitian(&self) -> bool {
        if !self.grid.is_symmetric() {
            return false;
        }
        let n = self.grid.len();
        self.modes.iter().all(|(&(k, eta), v)| {
            self.modes.get(&(-k, -eta)).is_some_and(|w| {
                (0..n).all(|j| (w[n - 1 - j] - v[j].conj()).norm() <= T::lit(1e-15) * (T::one() + v[j].norm()))
            })
        })
    }
}
