//! Post-processing of field histories and layers: echo detection, damping
//! fits and weighted layer bounds.

use std::collections::BTreeMap;

use crate::cascade::{CascadeState, LayerKey};
use crate::error::{invalid, Error, Result};
use crate::field::FieldSeries;
use crate::kernel::least_squares_slope;
use crate::scalar::{bracket, Real};

/// Time-dependent analyticity rate `lambda_p(t) = lambda0 + <t>^-delta + p^-delta`
/// together with the algebraic density weight `<t>^sigma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundProfile<T> {
    pub lambda0: T,
    pub delta: T,
    pub sigma: T,
}

impl<T: Real> BoundProfile<T> {
    pub const DEFAULT_DELTA: f64 = 0.1;

    pub fn new(lambda0: T, delta: T, sigma: T) -> Result<Self> {
        if !(lambda0 > T::zero()) {
            return Err(invalid("lambda0", "must be positive"));
        }
        if !(delta > T::zero() && delta < T::one()) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
        }
        if !(sigma > T::one()) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be finite and exceed 1, got {sigma}")));
        }
        Ok(Self { lambda0, delta, sigma })
    }

    pub fn lambda(&self, p: u32, t: T) -> T {
        self.lambda0 + bracket(&[t]).powf(-self.delta) + T::from_usize_lossy(p as usize).powf(-self.delta)
    }
}

/// One combination of initial waves and the time at which it refocuses.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedEcho<T> {
    /// Spatial frequency `K sum k`.
    pub mode: i64,
    /// `L sum eta / (K sum k)`.
    pub time: T,
    /// Indices into the wave list, with repetition, in increasing order.
    pub members: Vec<usize>,
}

/// Refocusing times of all multisets of at most `depth` waves with
/// `sum k != 0`, sorted by `(time, mode)`. Only the first generating set of
/// each `(mode, time)` pair is kept.
pub fn predicted_echo_times<T: Real>(waves: &[(i64, i64)], big_k: i64, big_l: i64, depth: usize) -> Vec<PredictedEcho<T>> {
    let mut sorted: Vec<(i64, i64)> = waves.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut found: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    let mut stack: Vec<usize> = Vec::new();
    fn walk(
        waves: &[(i64, i64)],
        depth: usize,
        start: usize,
        stack: &mut Vec<usize>,
        found: &mut BTreeMap<(i64, i64, i64), Vec<usize>>,
    ) {
        if !stack.is_empty() {
            let k: i64 = stack.iter().map(|&i| waves[i].0).sum();
            let eta: i64 = stack.iter().map(|&i| waves[i].1).sum();
            if k != 0 {
                // reduce eta/k so equal times share a key
                let g = gcd(eta.abs(), k.abs()).max(1);
                let (num, den) = if k > 0 { (eta / g, k / g) } else { (-eta / g, -k / g) };
                found.entry((k, num, den)).or_insert_with(|| stack.clone());
            }
        }
        if stack.len() == depth {
            return;
        }
        for i in start..waves.len() {
            stack.push(i);
            walk(waves, depth, i, stack, found);
            stack.pop();
        }
    }
    walk(&sorted, depth, 0, &mut stack, &mut found);
    let mut out: Vec<PredictedEcho<T>> = found
        .into_iter()
        .map(|((k, num, den), members)| PredictedEcho {
            mode: big_k * k,
            time: T::from_i64_lossy(big_l * num) / T::from_i64_lossy(big_k * den),
            members: members
                .into_iter()
                .map(|i| waves.iter().position(|w| *w == sorted[i]).unwrap_or(i))
                .collect(),
        })
        .collect();
    out.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap_or(std::cmp::Ordering::Equal).then(a.mode.cmp(&b.mode)));
    out
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Matching tolerance `max(5 dt, 2% of the horizon)`.
pub fn echo_window<T: Real>(dt: T, horizon: T) -> T {
    (T::lit(5.0) * dt).max(T::lit(0.02) * horizon)
}

/// A local maximum of `|E_hat(mode, t)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoEvent<T> {
    pub mode: i64,
    pub time: T,
    pub amplitude: T,
    pub predicted_time: Option<T>,
    /// Nearest integer to `log2` of the amplitude ratio between runs at
    /// `eps` and `eps / 2`, once known.
    pub order: Option<u32>,
    pub ratio: Option<T>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EchoReport<T> {
    pub matched: Vec<EchoEvent<T>>,
    pub unmatched: Vec<EchoEvent<T>>,
}

impl<T: Real> EchoReport<T> {
    pub fn all(&self) -> impl Iterator<Item = &EchoEvent<T>> {
        self.matched.iter().chain(&self.unmatched)
    }

    /// The matched event on `mode` closest to `time`.
    pub fn near(&self, mode: i64, time: T) -> Option<&EchoEvent<T>> {
        self.matched
            .iter()
            .filter(|e| e.mode == mode)
            .min_by(|a, b| {
                let da = (a.time - time).abs();
                let db = (b.time - time).abs();
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            })
    }
}

/// Interior local maxima of `|E_hat(m, .)|` above `noise_floor` on every
/// nonzero mode, refined by a parabola through the three samples around
/// each peak. Peaks within `window` of a predicted time on the same mode
/// are matched to the nearest one.
pub fn detect_echoes<T: Real>(
    field: &FieldSeries<T>,
    predicted: &[PredictedEcho<T>],
    noise_floor: T,
    window: T,
) -> EchoReport<T> {
    let mut report = EchoReport::default();
    let dt = field.dt();
    for (m, values) in field.modes() {
        if m == 0 {
            continue;
        }
        let a: Vec<T> = values.iter().map(|v| v.norm()).collect();
        for i in 1..a.len().saturating_sub(1) {
            if !(a[i] > a[i - 1] && a[i] >= a[i + 1] && a[i] > noise_floor) {
                continue;
            }
            let (offset, amplitude) = parabola_peak(a[i - 1], a[i], a[i + 1]);
            let time = field.time(i) + offset * dt;
            let best = predicted
                .iter()
                .filter(|p| p.mode == m && (p.time - time).abs() <= window)
                .min_by(|x, y| {
                    (x.time - time)
                        .abs()
                        .partial_cmp(&(y.time - time).abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            let event = EchoEvent {
                mode: m,
                time,
                amplitude,
                predicted_time: best.map(|p| p.time),
                order: None,
                ratio: None,
            };
            if event.predicted_time.is_some() {
                report.matched.push(event);
            } else {
                report.unmatched.push(event);
            }
        }
    }
    report
}

/// Vertex of the parabola through `(-1, a), (0, b), (1, c)`, as an offset in
/// samples and the value there.
fn parabola_peak<T: Real>(a: T, b: T, c: T) -> (T, T) {
    let two = T::lit(2.0);
    let curv = a - two * b + c;
    if !(curv < T::zero()) {
        return (T::zero(), b);
    }
    let x = ((a - c) / (two * curv)).max(-T::lit(0.5)).min(T::lit(0.5));
    (x, b - (a - c) * x / T::lit(4.0))
}

/// `|E_hat(mode, t)|` by linear interpolation between samples.
pub fn amplitude_at<T: Real>(field: &FieldSeries<T>, mode: i64, time: T) -> T {
    let Some(values) = field.mode(mode) else {
        return T::zero();
    };
    let u = time / field.dt();
    let i = u.floor().to_usize().unwrap_or(0).min(values.len().saturating_sub(2));
    let s = (u - T::from_usize_lossy(i)).max(T::zero()).min(T::one());
    values[i].norm() * (T::one() - s) + values[(i + 1).min(values.len() - 1)].norm() * s
}

/// Fills `order` and `ratio` of each event from a second run at half the
/// amplitude: `ratio = |E_eps| / |E_{eps/2}|` at the event time.
pub fn assign_orders<T: Real>(report: &mut EchoReport<T>, half: &FieldSeries<T>) {
    for e in report.matched.iter_mut().chain(report.unmatched.iter_mut()) {
        let h = amplitude_at(half, e.mode, e.time);
        if h > T::zero() {
            let ratio = e.amplitude / h;
            e.ratio = Some(ratio);
            let p = ratio.log2().round();
            e.order = (p >= T::one()).then(|| p.to_u32()).flatten();
        }
    }
}

/// Least-squares fit `ln sup_x |E| ~ ln C - rate t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit<T> {
    pub rate: T,
    pub prefactor: T,
    /// Root mean square of the residual of `ln sup_x |E|`.
    pub residual: T,
    pub samples: usize,
}

pub fn fit_field_decay<T: Real>(field: &FieldSeries<T>, start: T, end: T) -> Result<DecayFit<T>> {
    let sup = field.sup_x_series();
    let pts: Vec<(T, T)> = sup
        .iter()
        .enumerate()
        .map(|(i, s)| (field.time(i), *s))
        .filter(|(t, s)| *t >= start && *t <= end && *s > T::zero())
        .map(|(t, s)| (t, s.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientWindow(format!(
            "{} positive samples of sup_x |E| in [{start}, {end}]",
            pts.len()
        )));
    }
    let slope = least_squares_slope(&pts);
    let n = T::from_usize_lossy(pts.len());
    let mean_t = pts.iter().map(|p| p.0).fold(T::zero(), |a, b| a + b) / n;
    let mean_y = pts.iter().map(|p| p.1).fold(T::zero(), |a, b| a + b) / n;
    let intercept = mean_y - slope * mean_t;
    let ss = pts
        .iter()
        .map(|(t, y)| {
            let r = *y - (intercept + slope * *t);
            r * r
        })
        .fold(T::zero(), |a, b| a + b);
    Ok(DecayFit {
        rate: -slope,
        prefactor: intercept.exp(),
        residual: (ss / n).sqrt(),
        samples: pts.len(),
    })
}

/// Per-mode difference between two field histories on the same time grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeDifference<T> {
    pub mode: i64,
    pub max_diff: T,
    pub max_reference: T,
}

impl<T: Real> ModeDifference<T> {
    /// `max_t |a - b| / max_t |reference|`.
    pub fn relative(&self) -> T {
        if self.max_reference > T::zero() {
            self.max_diff / self.max_reference
        } else if self.max_diff > T::zero() {
            T::infinity()
        } else {
            T::zero()
        }
    }
}

/// Differences on every nonzero mode that `candidate` carries with a
/// nonzero amplitude, measured against `reference`. Both histories must
/// share `dt` and length.
pub fn compare_fields<T: Real>(reference: &FieldSeries<T>, candidate: &FieldSeries<T>) -> Result<Vec<ModeDifference<T>>> {
    if reference.len() != candidate.len() || (reference.dt() - candidate.dt()).abs() > T::lit(1e-12) * reference.dt() {
        return Err(Error::GridMismatch(format!(
            "histories differ: {} samples at dt {} vs {} at dt {}",
            reference.len(),
            reference.dt(),
            candidate.len(),
            candidate.dt()
        )));
    }
    let mut out = Vec::new();
    for (m, c) in candidate.modes() {
        if m == 0 || c.iter().all(|v| v.norm() == T::zero()) {
            continue;
        }
        let max_reference = reference
            .mode(m)
            .map(|r| r.iter().map(|v| v.norm()).fold(T::zero(), T::max))
            .unwrap_or(T::zero());
        let max_diff = (0..c.len())
            .map(|i| (c[i] - reference.value(m, i)).norm())
            .fold(T::zero(), T::max);
        out.push(ModeDifference { mode: m, max_diff, max_reference });
    }
    Ok(out)
}

/// Weighted suprema of one layer `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerBound<T> {
    pub p: u32,
    /// `sup |f_hat_{k,eta,p}(t, eta')| e^{lambda0 <k,eta,p,eta'>}`.
    pub m_f: T,
    /// `sup |f_hat_{k,eta,p}(t, eta')| e^{lambda_p(t) <k,eta,p,eta'>} <k>`.
    pub m_f_est: T,
    /// `sup |rho_hat_{k,eta,p}(t)| e^{lambda_p(t) <k,eta,p,L eta - K k t>} <t>^sigma`.
    pub m_rho: T,
    pub keys: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport<T> {
    pub per_p: Vec<LayerBound<T>>,
    /// `M_p^{1/p}` of the `m_f` column.
    pub growth: Vec<T>,
    /// True when `M_p^{1/p} <= slack * M_{p-1}^{1/(p-1)}` for all `p >= 3`
    /// and every `M_p` is finite.
    pub geometric: bool,
}

/// Relative slack of the growth check on `M_p^{1/p}`.
pub const GROWTH_SLACK: f64 = 1.2;

/// Weighted layer constants for `p = 1..=p_max` of a completed cascade.
pub fn verify_layer_bound<T: Real>(state: &CascadeState<T>, profile: &BoundProfile<T>) -> Result<BoundReport<T>> {
    let cfg = state.config();
    if state.completed() < cfg.p_max {
        return Err(Error::IncompleteLayer {
            requested: cfg.p_max,
            completed: state.completed(),
        });
    }
    let grid = cfg.eta_grid;
    let time = cfg.time;
    let mut per_p: Vec<LayerBound<T>> = (1..=cfg.p_max)
        .map(|p| LayerBound {
            p,
            m_f: T::zero(),
            m_f_est: T::zero(),
            m_rho: T::zero(),
            keys: 0,
        })
        .collect();
    let lambda0 = profile.lambda0;
    for (key, layer) in state.layers() {
        let LayerKey { k, eta, p } = *key;
        let slot = &mut per_p[(p - 1) as usize];
        slot.keys += 1;
        let (kf, ef, pf) = (T::from_i64_lossy(k), T::from_i64_lossy(eta), T::from_usize_lossy(p as usize));
        let kb = bracket(&[kf]);
        for i in 0..time.len() {
            let t = time.time(i);
            let lp = profile.lambda(p, t);
            for (j, v) in layer.profile.row(i).iter().enumerate() {
                let a = v.norm();
                if a == T::zero() {
                    continue;
                }
                let br = bracket(&[kf, ef, pf, grid.point(j)]);
                slot.m_f = slot.m_f.max(a * (lambda0 * br).exp());
                slot.m_f_est = slot.m_f_est.max(a * (lp * br).exp() * kb);
            }
            let r = layer.history.rho[i].norm();
            if r > T::zero() {
                let x = T::from_i64_lossy(cfg.big_l * eta) - T::from_i64_lossy(cfg.big_k * k) * t;
                let w = (lp * bracket(&[kf, ef, pf, x])).exp() * bracket(&[t]).powf(profile.sigma);
                slot.m_rho = slot.m_rho.max(r * w);
            }
        }
    }
    let growth: Vec<T> = per_p
        .iter()
        .map(|b| b.m_f.powf(T::one() / T::from_usize_lossy(b.p as usize)))
        .collect();
    let finite = per_p.iter().all(|b| b.m_f.is_finite() && b.m_rho.is_finite());
    let slack = T::lit(GROWTH_SLACK);
    let geometric = finite && growth.windows(2).skip(1).all(|w| w[1] <= slack * w[0]);
    Ok(BoundReport { per_p, growth, geometric })
}

/// Algebraic decay exponent of the weighted layer densities: minus the
/// least-squares slope of `ln(|rho_hat| e^{lambda_p(t) <k,eta,p,L eta - K k t>})`
/// against `ln <t>` over `t >= 1`, pooled over all layers.
pub fn fit_sigma<T: Real>(state: &CascadeState<T>, lambda0: T, delta: T) -> Option<T> {
    let cfg = state.config();
    let profile = BoundProfile {
        lambda0,
        delta,
        sigma: T::lit(2.0),
    };
    let mut pts = Vec::new();
    for (key, layer) in state.layers() {
        let (kf, ef, pf) = (
            T::from_i64_lossy(key.k),
            T::from_i64_lossy(key.eta),
            T::from_usize_lossy(key.p as usize),
        );
        for i in 0..cfg.time.len() {
            let t = cfg.time.time(i);
            let r = layer.history.rho[i].norm();
            if t < T::one() || !(r > T::lit(1e-300)) {
                continue;
            }
            let x = T::from_i64_lossy(cfg.big_l * key.eta) - T::from_i64_lossy(cfg.big_k * key.k) * t;
            let w = profile.lambda(key.p, t) * bracket(&[kf, ef, pf, x]);
            pts.push((bracket(&[t]).ln(), r.ln() + w));
        }
    }
    (pts.len() >= 3).then(|| -least_squares_slope(&pts))
}
