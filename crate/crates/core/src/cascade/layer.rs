use std::collections::BTreeMap;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::grid::EtaGrid;
use crate::kernel::{apply_resolvent, ResolventKernel};
use crate::quadrature::cumulative_rows;
use crate::scalar::{cx, czero, Cx, Real};

use super::config::CascadeConfig;

/// Index `(k, eta, p)` of one wave of the hierarchy. Ordering is
/// lexicographic in `(k, eta, p)`, which fixes every summation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LayerKey {
    pub k: i64,
    pub eta: i64,
    pub p: u32,
}

impl LayerKey {
    pub const fn new(k: i64, eta: i64, p: u32) -> Self {
        Self { k, eta, p }
    }

    pub fn conjugate(self) -> Self {
        Self::new(-self.k, -self.eta, self.p)
    }

    /// Whether the key lies inside the support `|k| <= p k_max`,
    /// `|eta| <= p eta_max`.
    pub fn within(self, k_max: i64, eta_max: i64) -> bool {
        let p = i64::from(self.p);
        self.k.abs() <= p * k_max && self.eta.abs() <= p * eta_max
    }
}

/// `f_hat_{k,eta,p}(t_i, eta'_j)`, row-major in time.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeProfile<T> {
    pub key: LayerKey,
    pub values: Vec<Cx<T>>,
    pub n_eta: usize,
}

impl<T: Real> ModeProfile<T> {
    pub fn row(&self, i: usize) -> &[Cx<T>] {
        &self.values[i * self.n_eta..(i + 1) * self.n_eta]
    }

    pub fn n_t(&self) -> usize {
        self.values.len() / self.n_eta.max(1)
    }

    pub fn sup(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }
}

/// `rho_hat_{k,eta,p}(t_i)` and `E_hat_{k,eta,p}(t_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldHistory<T> {
    pub key: LayerKey,
    pub rho: Vec<Cx<T>>,
    pub field: Vec<Cx<T>>,
}

/// A completed wave.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub profile: ModeProfile<T>,
    pub history: FieldHistory<T>,
    /// `sup |S_hat|` over the run.
    pub source_sup: T,
    /// Moving or shifted evaluations that left the grid with a
    /// non-negligible edge value.
    pub out_of_range: u64,
}

/// One element `((k1,eta1,p1), (k2,eta2,p2))` of the sextet set.
pub type Sextet = (LayerKey, LayerKey);

/// Elements of `A_{k,eta,p}` available among `layers`, in lexicographic
/// order of the first key. Pairs whose first wave has `k1 = 0` carry no
/// field and are skipped.
pub fn sextets<T>(layers: &BTreeMap<LayerKey, Layer<T>>, key: LayerKey) -> Vec<Sextet> {
    layers
        .keys()
        .filter(|a| a.p < key.p && a.k != 0)
        .filter_map(|a| {
            let b = LayerKey::new(key.k - a.k, key.eta - a.eta, key.p - a.p);
            layers.contains_key(&b).then_some((*a, b))
        })
        .collect()
}

/// `p = 1` sources `S_hat_{k,eta,1}(t, eta') = f0_hat_{k,eta}(eta')` for
/// every mode of the data, one row per time.
pub fn init_layer_one<T: Real>(
    cfg: &CascadeConfig<T>,
    data: &super::InitialData<T>,
) -> Result<BTreeMap<LayerKey, ModeProfile<T>>> {
    data.validate(cfg.lambda0)?;
    if data.grid() != &cfg.eta_grid {
        return Err(Error::GridMismatch("initial data and cascade eta' grids differ".into()));
    }
    let n_t = cfg.time.len();
    Ok(data
        .modes()
        .map(|((k, eta), v)| {
            let key = LayerKey::new(k, eta, 1);
            let mut values = Vec::with_capacity(n_t * v.len());
            for _ in 0..n_t {
                values.extend_from_slice(v);
            }
            (
                key,
                ModeProfile {
                    key,
                    values,
                    n_eta: v.len(),
                },
            )
        })
        .collect())
}

/// `N_hat_{k,eta,p}(t_i, .)`:
///
/// ```text
/// -i sum_A E_hat_1(t) (eta' + L eta - K k t) f_hat_2(t, eta' + L eta1 - K k1 t)
/// ```
///
/// Returns the row and the number of shifted evaluations that truncated a
/// non-negligible edge.
pub fn assemble_source<T: Real>(
    cfg: &CascadeConfig<T>,
    layers: &BTreeMap<LayerKey, Layer<T>>,
    completed: u32,
    key: LayerKey,
    i: usize,
) -> Result<(Vec<Cx<T>>, u64)> {
    let pairs = checked_sextets(layers, completed, key)?;
    let mut row = vec![czero(); cfg.eta_grid.len()];
    let mut scratch = vec![czero(); cfg.eta_grid.len()];
    let cut = source_row(cfg, layers, &pairs, key, i, &mut row, &mut scratch);
    Ok((row, cut))
}

pub(crate) fn checked_sextets<T>(
    layers: &BTreeMap<LayerKey, Layer<T>>,
    completed: u32,
    key: LayerKey,
) -> Result<Vec<Sextet>> {
    if key.p < 2 || key.p - 1 > completed {
        return Err(Error::IncompleteLayer {
            requested: key.p.saturating_sub(1),
            completed,
        });
    }
    Ok(sextets(layers, key))
}

pub(crate) fn source_row<T: Real>(
    cfg: &CascadeConfig<T>,
    layers: &BTreeMap<LayerKey, Layer<T>>,
    pairs: &[Sextet],
    key: LayerKey,
    i: usize,
    row: &mut [Cx<T>],
    scratch: &mut [Cx<T>],
) -> u64 {
    let grid = &cfg.eta_grid;
    let t = cfg.time.time(i);
    let kt = T::from_i64_lossy(cfg.big_k * key.k) * t;
    let le = T::from_i64_lossy(cfg.big_l * key.eta);
    row.iter_mut().for_each(|r| *r = czero());
    let mut cut = 0;
    for (a, b) in pairs {
        let e1 = layers[a].history.field[i];
        if e1 == czero() {
            continue;
        }
        let shift = T::from_i64_lossy(cfg.big_l * a.eta) - T::from_i64_lossy(cfg.big_k * a.k) * t;
        if grid.shift_into(layers[b].profile.row(i), shift, scratch) {
            cut += 1;
        }
        let c = cx(e1.im, -e1.re);
        for (j, (r, f2)) in row.iter_mut().zip(scratch.iter()).enumerate() {
            let w = grid.point(j) + le - kt;
            *r += c * *f2 * w;
        }
    }
    cut
}

/// `S_hat(t) = S_hat(0) + int_0^t N_hat ds` row by row; `initial` is the
/// `p = 1` datum, absent (zero) for `p >= 2`.
pub fn accumulate_source<T: Real>(
    cfg: &CascadeConfig<T>,
    initial: Option<&[Cx<T>]>,
    n_hat: &[Cx<T>],
) -> Result<Vec<Cx<T>>> {
    let n_eta = cfg.eta_grid.len();
    let n_t = cfg.time.len();
    if n_hat.len() != n_t * n_eta {
        return Err(Error::GridMismatch(format!(
            "source history has {} samples, expected {}",
            n_hat.len(),
            n_t * n_eta
        )));
    }
    let mut s = cumulative_rows(cfg.rule, cfg.time.dt(), n_hat, n_t, n_eta);
    if let Some(init) = initial {
        for row in s.chunks_mut(n_eta) {
            for (x, y) in row.iter_mut().zip(init) {
                *x += *y;
            }
        }
    }
    Ok(s)
}

/// `F(t_i) = S_hat(t_i, K k t_i - L eta)` and the count of points that
/// fell outside the grid with a non-negligible edge.
pub fn moving_trace<T: Real>(cfg: &CascadeConfig<T>, key: LayerKey, s_hat: &[Cx<T>]) -> (Vec<Cx<T>>, u64) {
    let grid = &cfg.eta_grid;
    let n_eta = grid.len();
    let mut cut = 0;
    let trace = (0..cfg.time.len())
        .map(|i| {
            let x = T::from_i64_lossy(cfg.big_k * key.k) * cfg.time.time(i)
                - T::from_i64_lossy(cfg.big_l * key.eta);
            let row = &s_hat[i * n_eta..(i + 1) * n_eta];
            let s = grid.interpolate(row, x);
            if !s.in_range && edge_matters(grid, row, x) {
                cut += 1;
            }
            s.value
        })
        .collect();
    (trace, cut)
}

fn edge_matters<T: Real>(grid: &EtaGrid<T>, row: &[Cx<T>], x: T) -> bool {
    let peak = row.iter().map(|v| v.norm()).fold(T::zero(), T::max);
    let edge = if x > grid.end() { row[row.len() - 1] } else { row[0] };
    peak > T::zero() && edge.norm() > peak * T::lit(1e-14)
}

/// `rho_hat(t) = F(t) + int_0^t G_{Kk}(t-s) F(s) ds` with
/// `F(s) = S_hat(s, K k s - L eta)`. For `k = 0` the density is `F`.
pub fn update_density<T: Real>(
    kern: Option<&ResolventKernel<T>>,
    cfg: &CascadeConfig<T>,
    key: LayerKey,
    s_hat: &[Cx<T>],
) -> Result<(Vec<Cx<T>>, u64)> {
    let (trace, cut) = moving_trace(cfg, key, s_hat);
    if key.k == 0 {
        return Ok((trace, cut));
    }
    let kern = kern.ok_or_else(|| Error::GridMismatch(format!("no kernel for mode {}", cfg.big_k * key.k)))?;
    if kern.k() != cfg.big_k * key.k {
        return Err(Error::GridMismatch(format!(
            "kernel for mode {} applied to wavenumber {}",
            kern.k(),
            cfg.big_k * key.k
        )));
    }
    Ok((apply_resolvent(kern, &trace)?, cut))
}

/// `E_hat = rho_hat / (i K k)`, zero for `k = 0`.
pub fn update_field<T: Real>(cfg: &CascadeConfig<T>, key: LayerKey, rho: &[Cx<T>]) -> Vec<Cx<T>> {
    if key.k == 0 {
        return vec![czero(); rho.len()];
    }
    let d = cx(T::zero(), T::from_i64_lossy(cfg.big_k * key.k));
    rho.iter().map(|r| *r / d).collect()
}

/// `f_hat(t, eta') = S_hat(t, eta') - int_0^t E_hat(s) dv_mu_hat(eta' + L eta - K k s) ds`.
pub fn update_profile<T: Real>(
    eq: &Equilibrium<T>,
    cfg: &CascadeConfig<T>,
    key: LayerKey,
    s_hat: Vec<Cx<T>>,
    field: &[Cx<T>],
) -> Result<ModeProfile<T>> {
    let n_eta = cfg.eta_grid.len();
    let n_t = cfg.time.len();
    if s_hat.len() != n_t * n_eta || field.len() != n_t {
        return Err(Error::GridMismatch("profile update inputs".into()));
    }
    let mut values = s_hat;
    if key.k != 0 && !eq.is_vanishing() && field.iter().any(|e| *e != czero()) {
        let le = T::from_i64_lossy(cfg.big_l * key.eta);
        let kk = T::from_i64_lossy(cfg.big_k * key.k);
        let mut integrand = vec![czero(); n_t * n_eta];
        for (i, e) in field.iter().enumerate() {
            let shift = le - kk * cfg.time.time(i);
            for (j, slot) in integrand[i * n_eta..(i + 1) * n_eta].iter_mut().enumerate() {
                *slot = *e * eq.dv_mu_hat(cfg.eta_grid.point(j) + shift);
            }
        }
        let cum = cumulative_rows(cfg.rule, cfg.time.dt(), &integrand, n_t, n_eta);
        for (v, c) in values.iter_mut().zip(cum) {
            *v -= c;
        }
    }
    Ok(ModeProfile { key, values, n_eta })
}
