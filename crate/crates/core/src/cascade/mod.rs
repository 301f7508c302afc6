//! The echo-wave hierarchy: `f = sum_p eps^p f_{k,eta,p}`, built layer by
//! layer, each layer a linear Vlasov-Poisson problem driven by quadratic
//! interactions of lower layers.

mod config;
mod layer;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

pub use config::{CascadeConfig, InitialData};
pub use layer::{
    accumulate_source, assemble_source, init_layer_one, moving_trace, sextets, update_density,
    update_field, update_profile, FieldHistory, Layer, LayerKey, ModeProfile, Sextet,
};

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::field::FieldSeries;
use crate::kernel::{kernel_volterra_with, ResolventKernel};
use crate::scalar::{czero, Cx, Real};

/// All completed layers of a run plus the kernels they used.
#[derive(Clone, Debug)]
pub struct CascadeState<T> {
    cfg: CascadeConfig<T>,
    eq: Equilibrium<T>,
    seeds: BTreeMap<LayerKey, ModeProfile<T>>,
    layers: BTreeMap<LayerKey, Layer<T>>,
    kernels: BTreeMap<i64, ResolventKernel<T>>,
    completed: u32,
    pruned: Vec<LayerKey>,
}

impl<T: Real> CascadeState<T> {
    pub fn new(cfg: CascadeConfig<T>, eq: Equilibrium<T>, data: &InitialData<T>) -> Result<Self> {
        cfg.validate(&eq)?;
        let seeds = init_layer_one(&cfg, data)?;
        Ok(Self {
            cfg,
            eq,
            seeds,
            layers: BTreeMap::new(),
            kernels: BTreeMap::new(),
            completed: 0,
            pruned: Vec::new(),
        })
    }

    /// Builds layers `1..=p_max`.
    pub fn build(cfg: CascadeConfig<T>, eq: Equilibrium<T>, data: &InitialData<T>) -> Result<Self> {
        let p_max = cfg.p_max;
        let mut state = Self::new(cfg, eq, data)?;
        for p in 1..=p_max {
            state.advance_layer(p)?;
        }
        Ok(state)
    }

    pub fn config(&self) -> &CascadeConfig<T> {
        &self.cfg
    }

    pub fn equilibrium(&self) -> &Equilibrium<T> {
        &self.eq
    }

    pub fn completed(&self) -> u32 {
        self.completed
    }

    pub fn layers(&self) -> &BTreeMap<LayerKey, Layer<T>> {
        &self.layers
    }

    pub fn layer(&self, key: LayerKey) -> Option<&Layer<T>> {
        self.layers.get(&key)
    }

    pub fn keys_in_layer(&self, p: u32) -> impl Iterator<Item = LayerKey> + '_ {
        self.layers.keys().copied().filter(move |k| k.p == p)
    }

    pub fn kernels(&self) -> &BTreeMap<i64, ResolventKernel<T>> {
        &self.kernels
    }

    pub fn pruned(&self) -> &[LayerKey] {
        &self.pruned
    }

    /// Total count of truncated shifted or moving evaluations.
    pub fn out_of_range(&self) -> u64 {
        self.layers.values().map(|l| l.out_of_range).sum()
    }

    /// Candidate keys of layer `p`: sums of available lower pairs, inside
    /// the support bounds.
    fn candidates(&self, p: u32) -> Vec<LayerKey> {
        if p == 1 {
            return self.seeds.keys().copied().collect();
        }
        let mut out = BTreeSet::new();
        for a in self.layers.keys().filter(|a| a.p < p && a.k != 0) {
            for b in self.layers.keys().filter(|b| b.p == p - a.p) {
                let key = LayerKey::new(a.k + b.k, a.eta + b.eta, p);
                if key.within(self.cfg.k_max, self.cfg.eta_max) {
                    out.insert(key);
                }
            }
        }
        out.into_iter().collect()
    }

    fn ensure_kernels(&mut self, keys: &[LayerKey]) -> Result<()> {
        let needed: BTreeSet<i64> = keys
            .iter()
            .filter(|k| k.k != 0)
            .map(|k| self.cfg.big_k * k.k)
            .filter(|m| !self.kernels.contains_key(m))
            .collect();
        let built: Vec<(i64, ResolventKernel<T>)> = needed
            .into_par_iter()
            .map(|m| {
                kernel_volterra_with(&self.eq, m, self.cfg.time, self.cfg.rule).map(|g| (m, g))
            })
            .collect::<Result<_>>()?;
        self.kernels.extend(built);
        Ok(())
    }

    /// Completes layer `p` (all keys in parallel, lower layers read-only).
    pub fn advance_layer(&mut self, p: u32) -> Result<()> {
        if p != self.completed + 1 {
            return Err(Error::IncompleteLayer {
                requested: p.saturating_sub(1),
                completed: self.completed,
            });
        }
        let keys = self.candidates(p);
        self.ensure_kernels(&keys)?;
        let results: Vec<Option<Layer<T>>> = keys
            .par_iter()
            .map(|&key| {
                self.solve_key(key).map_err(|e| Error::Layer {
                    k: key.k,
                    eta: key.eta,
                    p: key.p,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        for (key, res) in keys.into_iter().zip(results) {
            match res {
                Some(layer) => {
                    self.layers.insert(key, layer);
                }
                None => self.pruned.push(key),
            }
        }
        self.completed = p;
        Ok(())
    }

    fn solve_key(&self, key: LayerKey) -> Result<Option<Layer<T>>> {
        let cfg = &self.cfg;
        let n_t = cfg.time.len();
        let n_eta = cfg.eta_grid.len();
        let mut cut = 0;
        let s_hat = if key.p == 1 {
            self.seeds[&key].values.clone()
        } else {
            let pairs = layer::checked_sextets(&self.layers, self.completed, key)?;
            let mut n_hat = vec![czero(); n_t * n_eta];
            let mut scratch = vec![czero(); n_eta];
            for i in 0..n_t {
                let row = &mut n_hat[i * n_eta..(i + 1) * n_eta];
                cut += layer::source_row(cfg, &self.layers, &pairs, key, i, row, &mut scratch);
            }
            accumulate_source(cfg, None, &n_hat)?
        };
        let source_sup = s_hat.iter().map(|v| v.norm()).fold(T::zero(), T::max);
        if key.p > 1 && source_sup < cfg.prune_floor {
            return Ok(None);
        }
        let kern = self.kernels.get(&(cfg.big_k * key.k));
        let (rho, moving_cut) = update_density(kern, cfg, key, &s_hat)?;
        let field = update_field(cfg, key, &rho);
        let profile = update_profile(&self.eq, cfg, key, s_hat, &field)?;
        Ok(Some(Layer {
            profile,
            history: FieldHistory { key, rho, field },
            source_sup,
            out_of_range: cut + moving_cut,
        }))
    }

    fn require_complete(&self) -> Result<()> {
        if self.completed < self.cfg.p_max {
            return Err(Error::IncompleteLayer {
                requested: self.cfg.p_max,
                completed: self.completed,
            });
        }
        Ok(())
    }

    /// `f_hat(t_i, k', xi) = sum_{eta,p} eps^p f_hat_{k,eta,p}(t_i, xi - L eta + K k t_i)`
    /// for `k' = K k`; zero for `k'` not a multiple of `K`.
    pub fn synthesize_distribution(&self, i: usize, k_prime: i64, xi: T) -> Result<Cx<T>> {
        self.synthesize_distribution_with(self.cfg.epsilon, i, k_prime, xi)
    }

    pub fn synthesize_distribution_with(&self, eps: T, i: usize, k_prime: i64, xi: T) -> Result<Cx<T>> {
        self.require_complete()?;
        if i >= self.cfg.time.len() {
            return Err(Error::GridMismatch(format!("time index {i} beyond the grid")));
        }
        if k_prime % self.cfg.big_k != 0 {
            return Ok(czero());
        }
        let k = k_prime / self.cfg.big_k;
        let t = self.cfg.time.time(i);
        let mut acc = czero();
        for layer in self.layers.values().filter(|l| l.profile.key.k == k && l.profile.key.p <= self.cfg.p_max) {
            let key = layer.profile.key;
            let x = xi - T::from_i64_lossy(self.cfg.big_l * key.eta) + T::from_i64_lossy(k_prime) * t;
            let v = self.cfg.eta_grid.interpolate(layer.profile.row(i), x).value;
            acc += v * eps.powi(key.p as i32);
        }
        Ok(acc)
    }

    /// `E_hat(t, K k) = sum_{eta,p} eps^p E_hat_{k,eta,p}(t)` for every mode.
    pub fn synthesize_field(&self) -> Result<FieldSeries<T>> {
        self.synthesize_field_with(self.cfg.epsilon, self.cfg.p_max)
    }

    /// Field synthesis with weights `eps^p` and layers `p <= p_max` only.
    pub fn synthesize_field_with(&self, eps: T, p_max: u32) -> Result<FieldSeries<T>> {
        self.require_complete()?;
        let mut out = FieldSeries::new(self.cfg.time.dt(), self.cfg.time.len());
        for layer in self.layers.values().filter(|l| l.history.key.p <= p_max) {
            let key = layer.history.key;
            out.accumulate(self.cfg.big_k * key.k, &layer.history.field, eps.powi(key.p as i32));
        }
        Ok(out)
    }

    /// `max_t |rho_hat(t) - f_hat(t, K k t - L eta)|` for one key.
    pub fn consistency_error(&self, key: LayerKey) -> Option<T> {
        let layer = self.layers.get(&key)?;
        let (trace, _) = moving_trace(&self.cfg, key, &layer.profile.values);
        Some(
            trace
                .iter()
                .zip(&layer.history.rho)
                .map(|(a, b)| (*a - *b).norm())
                .fold(T::zero(), T::max),
        )
    }
}
