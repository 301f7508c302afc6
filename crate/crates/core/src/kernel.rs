//! Resolvent kernel `G_k(t)` of the linearised density equation
//!
//! ```text
//! rho(t) + int_0^t (t-s) mu_hat(k(t-s)) rho(s) ds = S(t)
//!   <=>  rho(t) = S(t) + int_0^t G_k(t-s) S(s) ds
//! ```
//!
//! computed in the time domain (second-kind Volterra sweep) and, as an
//! independent check, by inverting `-L/(1+L)` along a vertical line in the
//! left half-plane.

use rayon::prelude::*;

use crate::equilibrium::{Equilibrium, QuadratureSpec, SymbolQuadrature};
use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::quadrature::{filon_cubic, TimeRule, WeightTable};
use crate::scalar::{cx, czero, Cx, Real};

/// Sampled `G_k` with a fitted envelope `|G_k(t)| <= c1 e^{-theta1 |k| t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventKernel<T> {
    k: i64,
    grid: TimeGrid<T>,
    rule: TimeRule,
    values: Vec<Cx<T>>,
    fitted_c1: T,
    fitted_rate: T,
    residual: T,
}

impl<T: Real> ResolventKernel<T> {
    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn rule(&self) -> TimeRule {
        self.rule
    }

    pub fn values(&self) -> &[Cx<T>] {
        &self.values
    }

    pub fn fitted_c1(&self) -> T {
        self.fitted_c1
    }

    pub fn fitted_theta1(&self) -> T {
        self.fitted_rate / T::from_i64_lossy(self.k.abs())
    }

    /// Decay rate in `t`, `theta1 * |k|`.
    pub fn fitted_rate(&self) -> T {
        self.fitted_rate
    }

    /// Largest residual of the discrete Volterra equation over the grid.
    pub fn residual(&self) -> T {
        self.residual
    }

    pub fn envelope(&self, t: T) -> T {
        self.fitted_c1 * (-self.fitted_rate() * t).exp()
    }

    /// Kernel for `-k`; equal to the conjugate for a real equilibrium.
    pub fn conjugate(&self) -> Self {
        Self {
            k: -self.k,
            values: self.values.iter().map(|v| v.conj()).collect(),
            ..self.clone()
        }
    }
}

fn forcing<T: Real>(eq: &Equilibrium<T>, k: i64, grid: &TimeGrid<T>) -> Vec<Cx<T>> {
    let kf = T::from_i64_lossy(k);
    grid.times().map(|t| eq.mu_hat(kf * t) * t).collect()
}

/// Solves `G + h * G = -h`, `h(t) = t mu_hat(k t)`, by forward
/// substitution with the default (fourth-order) time rule.
pub fn kernel_volterra<T: Real>(
    eq: &Equilibrium<T>,
    k: i64,
    grid: TimeGrid<T>,
) -> Result<ResolventKernel<T>> {
    kernel_volterra_with(eq, k, grid, TimeRule::default())
}

/// As [`kernel_volterra`] with an explicit time rule.
///
/// Since `h(0) = 0` the diagonal term drops out and every step is
/// explicit. The sweep aborts with [`Error::Unstable`] once `|G|` exceeds
/// `1e6 (1 + sup|h|)(1 + T)`.
pub fn kernel_volterra_with<T: Real>(
    eq: &Equilibrium<T>,
    k: i64,
    grid: TimeGrid<T>,
    rule: TimeRule,
) -> Result<ResolventKernel<T>> {
    if k == 0 {
        return Err(invalid("k", "kernel needs a nonzero mode"));
    }
    let h = forcing(eq, k, &grid);
    let table = WeightTable::new(rule);
    let dt = grid.dt();
    let sup_h = h.iter().map(|v| v.norm()).fold(T::zero(), T::max);
    let bound = T::lit(1e6) * (T::one() + sup_h) * (T::one() + grid.horizon());
    let mut g = vec![czero(); grid.len()];
    for n in 1..grid.len() {
        let mut acc = czero();
        for j in 1..n {
            acc += h[n - j] * g[j] * table.weight(n, j);
        }
        let v = -h[n] - acc * dt;
        if !(v.norm() <= bound) {
            return Err(Error::Unstable {
                step: n,
                magnitude: v.norm().as_f64(),
                bound: bound.as_f64(),
            });
        }
        g[n] = v;
    }
    let residual = discrete_residual(&table, dt, &h, &g);
    let (c1, rate) = fit_envelope(&g, dt);
    Ok(ResolventKernel {
        k,
        grid,
        rule,
        values: g,
        fitted_c1: c1,
        fitted_rate: rate,
        residual,
    })
}

fn discrete_residual<T: Real>(table: &WeightTable<T>, dt: T, h: &[Cx<T>], g: &[Cx<T>]) -> T {
    (0..g.len())
        .map(|n| (g[n] + h[n] + table.convolve(dt, h, g, n)).norm())
        .fold(T::zero(), T::max)
}

/// Exponential envelope `c1 e^{-rate t}` over the samples.
///
/// The rate is a least-squares fit of `ln|G|` at the local maxima of `|G|`
/// (or at every significant sample when there are fewer than two maxima),
/// lowered if needed so that round-off level samples stay under the
/// envelope with a moderate constant. `c1` is then the smallest constant
/// for which the envelope holds at every sample, up to a relative margin
/// of `1e-12` for rounding. A vanishing kernel reports `c1 = 0`, rate 1.
fn fit_envelope<T: Real>(g: &[Cx<T>], dt: T) -> (T, T) {
    let mags: Vec<T> = g.iter().map(|v| v.norm()).collect();
    let peak = mags.iter().copied().fold(T::zero(), T::max);
    if !(peak > T::zero()) {
        return (T::zero(), T::one());
    }
    let floor = peak * T::lit(1e-12);
    let t = |i: usize| T::from_usize_lossy(i) * dt;
    let mut pts: Vec<(T, T)> = (1..mags.len().saturating_sub(1))
        .filter(|&i| mags[i] >= mags[i - 1] && mags[i] > mags[i + 1] && mags[i] > floor)
        .map(|i| (t(i), mags[i].ln()))
        .collect();
    if pts.len() < 2 {
        let top = mags
            .iter()
            .enumerate()
            .fold(0, |best, (i, &m)| if m > mags[best] { i } else { best });
        pts = (top..mags.len())
            .filter(|&i| mags[i] > floor)
            .map(|i| (t(i), mags[i].ln()))
            .collect();
    }
    let mut rate = if pts.len() >= 2 {
        -least_squares_slope(&pts)
    } else {
        T::zero()
    };
    let c_sig = (0..mags.len())
        .filter(|&i| mags[i] > floor)
        .map(|i| mags[i] * (rate * t(i)).exp())
        .fold(T::zero(), T::max);
    for i in 1..mags.len() {
        if mags[i] > T::zero() && mags[i] <= floor {
            let cap = (c_sig.ln() - mags[i].ln()) / t(i);
            rate = rate.min(cap);
        }
    }
    let c1 = (0..mags.len())
        .map(|i| mags[i] * (rate * t(i)).exp())
        .fold(T::zero(), T::max);
    (c1 * (T::one() + T::lit(1e-12)), rate)
}

/// Slope of the least-squares line through `(x, y)` points.
pub(crate) fn least_squares_slope<T: Real>(pts: &[(T, T)]) -> T {
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `rho = S + G * S` on the kernel's grid.
pub fn apply_resolvent<T: Real>(kern: &ResolventKernel<T>, s_history: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
    if s_history.len() != kern.values.len() {
        return Err(Error::GridMismatch(format!(
            "source has {} samples, kernel grid has {}",
            s_history.len(),
            kern.values.len()
        )));
    }
    let table = WeightTable::new(kern.rule);
    let dt = kern.grid.dt();
    Ok((0..s_history.len())
        .map(|n| s_history[n] + table.convolve(dt, &kern.values, s_history, n))
        .collect())
}

/// Largest residual of `rho + int_0^t (t-s) mu_hat(k(t-s)) rho(s) ds = S`
/// under the given time rule.
pub fn density_residual<T: Real>(
    eq: &Equilibrium<T>,
    k: i64,
    grid: &TimeGrid<T>,
    rule: TimeRule,
    rho: &[Cx<T>],
    s_history: &[Cx<T>],
) -> Result<T> {
    if rho.len() != grid.len() || s_history.len() != grid.len() {
        return Err(Error::GridMismatch("density residual inputs".into()));
    }
    let h = forcing(eq, k, grid);
    let table = WeightTable::new(rule);
    Ok((0..rho.len())
        .map(|n| (rho[n] + table.convolve(grid.dt(), &h, rho, n) - s_history[n]).norm())
        .fold(T::zero(), T::max))
}

/// Parameters of the contour route.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec<T> {
    /// Line `Re lambda = -theta1' |k|`. When unset, starts at
    /// `min(theta0/2, 1/2)` and is halved until the line is certified.
    pub theta1: Option<T>,
    pub kappa_floor: T,
    /// Absolute accuracy target; the truncation tail is held below `tol/10`.
    pub tol: T,
    /// Sample spacing in `Im lambda`.
    pub dy: T,
    /// Initial cutoff `|Im lambda| <= Lambda`, doubled as needed.
    pub cutoff: T,
    pub max_cutoff: T,
    pub max_halvings: u32,
}

impl<T: Real> Default for ContourSpec<T> {
    fn default() -> Self {
        Self {
            theta1: None,
            kappa_floor: T::lit(1e-3),
            tol: T::lit(1e-9),
            dy: T::lit(0.005),
            cutoff: T::lit(64.0),
            max_cutoff: T::lit(8192.0),
            max_halvings: 6,
        }
    }
}

/// Samples of `-L/(1+L)` minus its large-`|lambda|` asymptotics along a
/// certified line, ready for evaluation at any `t >= 0`.
#[derive(Clone, Debug)]
pub struct ContourKernel<T> {
    k: i64,
    theta1: T,
    shift: T,
    beta: T,
    coeffs: [Cx<T>; 3],
    cutoff: T,
    dy: T,
    samples: Vec<Cx<T>>,
    min_abs_symbol: T,
    tail_estimate: T,
}

impl<T: Real> ContourKernel<T> {
    pub fn new(eq: &Equilibrium<T>, k: i64, spec: &ContourSpec<T>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "kernel needs a nonzero mode"));
        }
        if eq.is_vanishing() {
            return Ok(Self {
                k,
                theta1: T::zero(),
                shift: T::zero(),
                beta: T::one(),
                coeffs: [czero(); 3],
                cutoff: T::zero(),
                dy: spec.dy,
                samples: Vec::new(),
                min_abs_symbol: T::one(),
                tail_estimate: T::zero(),
            });
        }
        let fixed = spec.theta1.is_some();
        let mut theta1 = spec
            .theta1
            .unwrap_or_else(|| (eq.theta0() / T::lit(2.0)).min(T::lit(0.5)));
        if !(theta1 > T::zero() && theta1 < eq.theta0()) {
            return Err(invalid("theta1", "must lie in (0, theta0)"));
        }
        let mut halvings = 0;
        loop {
            match Self::on_line(eq, k, theta1, spec) {
                Ok(c) => return Ok(c),
                Err(Error::ContourUnsafe(_)) if !fixed && halvings < spec.max_halvings => {
                    theta1 /= T::lit(2.0);
                    halvings += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn on_line(eq: &Equilibrium<T>, k: i64, theta1: T, spec: &ContourSpec<T>) -> Result<Self> {
        let kk = T::from_i64_lossy(k.abs());
        let shift = theta1 * kk;
        let quad = SymbolQuadrature::new(eq, k, -shift, &QuadratureSpec::default())?;
        let beta = T::lit(2.0) * shift + T::one();
        let coeffs = tail_coefficients(eq, k, beta);
        let mut cutoff = spec.cutoff;
        loop {
            let panels = (T::lit(2.0) * cutoff / (T::lit(3.0) * spec.dy))
                .ceil()
                .to_usize()
                .unwrap_or(1)
                .max(1);
            let n = 3 * panels;
            let dy = T::lit(2.0) * cutoff / T::from_usize_lossy(n);
            let lam = |j: usize| cx(-shift, -cutoff + T::from_usize_lossy(j) * dy);
            let symbols: Vec<Cx<T>> = (0..=n)
                .into_par_iter()
                .map(|j| quad.evaluate(lam(j)).map(|v| v.value))
                .collect::<Result<_>>()?;
            let min_abs = symbols.iter().map(|d| d.norm()).fold(T::infinity(), T::min);
            if min_abs < spec.kappa_floor {
                return Err(Error::ContourUnsafe(format!(
                    "|1 + L| = {min_abs:e} below floor {:e} on Re lambda = {}",
                    spec.kappa_floor.as_f64(),
                    -shift
                )));
            }
            let mut arg = T::zero();
            for w in symbols.windows(2) {
                arg += (w[1] / w[0]).arg();
            }
            let zeros = -(arg / (T::lit(2.0) * T::PI())).round().to_i64().unwrap_or(0);
            if zeros != 0 {
                return Err(Error::ContourUnsafe(format!(
                    "{zeros} zero(s) of 1 + L to the right of Re lambda = {}",
                    -shift
                )));
            }
            let samples: Vec<Cx<T>> = symbols
                .iter()
                .enumerate()
                .map(|(j, d)| {
                    let l = lam(j);
                    let g = -(*d - T::one()) / *d;
                    g - asymptotic(&coeffs, beta, l)
                })
                .collect();
            let tail_estimate = (samples[0].norm() + samples[n].norm()) * cutoff
                / (T::lit(6.0) * T::PI());
            if tail_estimate < spec.tol / T::lit(10.0) {
                return Ok(Self {
                    k,
                    theta1,
                    shift,
                    beta,
                    coeffs,
                    cutoff,
                    dy,
                    samples,
                    min_abs_symbol: min_abs,
                    tail_estimate,
                });
            }
            if cutoff * T::lit(2.0) > spec.max_cutoff {
                return Err(Error::Accuracy {
                    tol: spec.tol.as_f64(),
                    reason: format!(
                        "contour tail {:e} at cutoff {}",
                        tail_estimate.as_f64(),
                        cutoff
                    ),
                });
            }
            cutoff *= T::lit(2.0);
        }
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    /// Certified `theta1'` of the line actually used.
    pub fn theta1(&self) -> T {
        self.theta1
    }

    pub fn cutoff(&self) -> T {
        self.cutoff
    }

    pub fn min_abs_symbol(&self) -> T {
        self.min_abs_symbol
    }

    pub fn tail_estimate(&self) -> T {
        self.tail_estimate
    }

    /// `G_k(t)` for `t >= 0`.
    pub fn eval(&self, t: T) -> Cx<T> {
        if self.samples.is_empty() {
            return czero();
        }
        let [a2, a3, a4] = self.coeffs;
        let two = T::lit(2.0);
        let smooth = (a2 * t + a3 * (t * t / two) + a4 * (t * t * t / T::lit(6.0)))
            * (-self.beta * t).exp();
        let body = filon_cubic(&self.samples, self.dy, cx(T::zero(), -t));
        let phase = Cx::from_polar(
            (-self.shift * t).exp() / (two * T::PI()),
            -self.cutoff * t,
        );
        smooth + body * phase
    }
}

/// Coefficients `a2, a3, a4` of `R(lambda) = sum a_j (lambda + beta)^{-j}`
/// matching `-L/(1+L)` through order `lambda^{-4}`.
fn tail_coefficients<T: Real>(eq: &Equilibrium<T>, k: i64, beta: T) -> [Cx<T>; 3] {
    let d = T::lit(1e-3);
    let m0 = eq.mu_hat(T::zero());
    let m1 = (eq.mu_hat(d) - eq.mu_hat(-d)) / (T::lit(2.0) * d);
    let m2 = (eq.mu_hat(d) - m0 * T::lit(2.0) + eq.mu_hat(-d)) / (d * d);
    let kf = T::from_i64_lossy(k);
    let g2 = -m0;
    let g3 = -m1 * (T::lit(2.0) * kf);
    let g4 = -m2 * (T::lit(3.0) * kf * kf) + m0 * m0;
    let a2 = g2;
    let a3 = g3 + a2 * (T::lit(2.0) * beta);
    let a4 = g4 - a2 * (T::lit(3.0) * beta * beta) + a3 * (T::lit(3.0) * beta);
    [a2, a3, a4]
}

fn asymptotic<T: Real>(c: &[Cx<T>; 3], beta: T, lambda: Cx<T>) -> Cx<T> {
    let u = (lambda + beta).inv();
    let u2 = u * u;
    c[0] * u2 + c[1] * u2 * u + c[2] * u2 * u2
}

/// `G_k(t)` by inverse Laplace transform along `Re lambda = -theta1' |k|`.
pub fn kernel_contour<T: Real>(
    eq: &Equilibrium<T>,
    k: i64,
    t: T,
    contour: &ContourSpec<T>,
) -> Result<Cx<T>> {
    if t < T::zero() {
        return Err(invalid("t", "must be non-negative"));
    }
    Ok(ContourKernel::new(eq, k, contour)?.eval(t))
}
