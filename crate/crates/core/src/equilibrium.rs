//! Background equilibria in Fourier space, the dispersion symbol
//! `D(lambda, k) = 1 + L[t mu_hat(k t)](lambda)` and the Penrose margin.
//!
//! Fourier convention throughout: `f_hat(eta) = int f(v) e^{-i eta v} dv`.

use crate::error::{invalid, Error, Result};
use crate::quadrature::filon_cubic;
use crate::scalar::{cx, czero, Cx, Real};

/// Sampled spectrum `mu_hat(eta_j)`, linearly interpolated and zero
/// outside the sampled range.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTable<T> {
    etas: Vec<T>,
    values: Vec<Cx<T>>,
}

impl<T: Real> SpectrumTable<T> {
    pub fn new(mut rows: Vec<(T, Cx<T>)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(invalid("table", "need at least two rows"));
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eta"));
        for w in rows.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(invalid("table", format!("duplicate eta {}", w[0].0)));
            }
        }
        if rows.iter().any(|(e, v)| !e.is_finite() || !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid("table", "non-finite entry"));
        }
        let (etas, values) = rows.into_iter().unzip();
        Ok(Self { etas, values })
    }

    fn raw(&self, eta: T) -> Cx<T> {
        let n = self.etas.len();
        if eta < self.etas[0] || eta > self.etas[n - 1] {
            return czero();
        }
        let j = self.etas.partition_point(|&e| e <= eta).clamp(1, n - 1);
        let (a, b) = (self.etas[j - 1], self.etas[j]);
        let s = (eta - a) / (b - a);
        self.values[j - 1] * (T::one() - s) + self.values[j] * s
    }

    /// Hermitian-symmetrised value `(m(eta) + conj(m(-eta))) / 2`.
    fn value(&self, eta: T) -> Cx<T> {
        (self.raw(eta) + self.raw(-eta).conj()) * T::lit(0.5)
    }

    fn max_abs_eta(&self) -> T {
        self.etas[0].abs().max(self.etas[self.etas.len() - 1].abs())
    }

    fn min_spacing(&self) -> T {
        self.etas
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::infinity(), T::min)
    }

    pub fn rows(&self) -> impl Iterator<Item = (T, Cx<T>)> + '_ {
        self.etas.iter().copied().zip(self.values.iter().copied())
    }
}

/// Which background distribution an [`Equilibrium`] represents.
#[derive(Clone, Debug, PartialEq)]
pub enum EquilibriumKind<T> {
    /// `mu(v) = e^{-v^2/2}`.
    Gaussian,
    /// `mu(v) = (mass / sqrt(2 pi)) * (e^{-(v-a)^2/2} + e^{-(v+a)^2/2}) / 2`.
    TwoStream { separation: T, mass: T },
    /// User-supplied `mu_hat` samples.
    Table(SpectrumTable<T>),
    /// `mu = 0`; used as the identity case of the linear theory.
    Vanishing,
}

/// A real background `mu(v)` represented through `mu_hat`, together with
/// analyticity constants with `|mu_hat(eta)| <= c0 e^{-theta0 |eta|}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium<T> {
    kind: EquilibriumKind<T>,
    c0: T,
    theta0: T,
}

/// The Gaussian `e^{-v^2/2}` with `theta0 = 1`.
pub fn make_gaussian<T: Real>() -> Equilibrium<T> {
    Equilibrium::gaussian()
}

/// Fourier transform of `d mu / dv`: `i eta mu_hat(eta)`.
pub fn dv_mu_hat<T: Real>(eq: &Equilibrium<T>, eta: T) -> Cx<T> {
    eq.dv_mu_hat(eta)
}

fn sqrt_two_pi<T: Real>() -> T {
    (T::lit(2.0) * T::PI()).sqrt()
}

impl<T: Real> Equilibrium<T> {
    pub fn gaussian() -> Self {
        Self::gaussian_with_rate(T::one()).expect("unit rate is valid")
    }

    /// Gaussian with analyticity rate `theta0`. Since `mu_hat` decays like
    /// `e^{-eta^2/2}`, any rate works with `c0 = sqrt(2 pi) e^{theta0^2/2}`.
    pub fn gaussian_with_rate(theta0: T) -> Result<Self> {
        check_rate(theta0)?;
        Ok(Self {
            kind: EquilibriumKind::Gaussian,
            c0: sqrt_two_pi::<T>() * (theta0 * theta0 / T::lit(2.0)).exp(),
            theta0,
        })
    }

    /// Symmetric two-stream background with the Gaussian's mass `sqrt(2 pi)`.
    pub fn two_stream(separation: T) -> Result<Self> {
        Self::two_stream_with(separation, sqrt_two_pi(), T::one())
    }

    pub fn two_stream_with(separation: T, mass: T, theta0: T) -> Result<Self> {
        check_rate(theta0)?;
        if !separation.is_finite() || separation < T::zero() {
            return Err(invalid("a", "separation must be finite and non-negative"));
        }
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(invalid("mass", "must be positive"));
        }
        Ok(Self {
            kind: EquilibriumKind::TwoStream { separation, mass },
            c0: mass * (theta0 * theta0 / T::lit(2.0)).exp(),
            theta0,
        })
    }

    /// Tabulated spectrum. `c0` is the smallest constant that makes the
    /// analytic bound hold on every sample for the given `theta0`.
    pub fn from_table(table: SpectrumTable<T>, theta0: T) -> Result<Self> {
        check_rate(theta0)?;
        let mut c0 = T::min_positive_value();
        for (eta, _) in table.rows() {
            for e in [eta, -eta] {
                c0 = c0.max(table.value(e).norm() * (theta0 * e.abs()).exp());
            }
        }
        Ok(Self {
            kind: EquilibriumKind::Table(table),
            c0,
            theta0,
        })
    }

    pub fn vanishing() -> Self {
        Self {
            kind: EquilibriumKind::Vanishing,
            c0: T::one(),
            theta0: T::one(),
        }
    }

    pub fn kind(&self) -> &EquilibriumKind<T> {
        &self.kind
    }

    pub fn c0(&self) -> T {
        self.c0
    }

    pub fn theta0(&self) -> T {
        self.theta0
    }

    pub fn is_vanishing(&self) -> bool {
        matches!(self.kind, EquilibriumKind::Vanishing)
    }

    pub fn mu_hat(&self, eta: T) -> Cx<T> {
        match &self.kind {
            EquilibriumKind::Gaussian => {
                cx(sqrt_two_pi::<T>() * (-eta * eta / T::lit(2.0)).exp(), T::zero())
            }
            EquilibriumKind::TwoStream { separation, mass } => cx(
                *mass * (-eta * eta / T::lit(2.0)).exp() * (*separation * eta).cos(),
                T::zero(),
            ),
            EquilibriumKind::Table(t) => t.value(eta),
            EquilibriumKind::Vanishing => czero(),
        }
    }

    pub fn dv_mu_hat(&self, eta: T) -> Cx<T> {
        self.mu_hat(eta) * cx(T::zero(), eta)
    }

    /// `c0 e^{-theta0 |eta|}`.
    pub fn analytic_bound(&self, eta: T) -> T {
        self.c0 * (-self.theta0 * eta.abs()).exp()
    }

    /// Natural log of a certified upper bound on `|mu_hat(eta)|` for
    /// `eta >= 0`, and its derivative. The bound is concave in `eta`.
    fn log_envelope(&self, eta: T) -> (T, T) {
        let exp_bound = (self.c0.ln() - self.theta0 * eta, -self.theta0);
        let gauss = |mass: T| (mass.ln() - eta * eta / T::lit(2.0), -eta);
        let pick = |a: (T, T), b: (T, T)| if a.0 <= b.0 { a } else { b };
        match &self.kind {
            EquilibriumKind::Gaussian => pick(exp_bound, gauss(sqrt_two_pi())),
            EquilibriumKind::TwoStream { mass, .. } => pick(exp_bound, gauss(*mass)),
            EquilibriumKind::Table(t) => {
                if eta > t.max_abs_eta() {
                    (T::neg_infinity(), -T::one())
                } else {
                    exp_bound
                }
            }
            EquilibriumKind::Vanishing => (T::neg_infinity(), -T::one()),
        }
    }

    /// Length scale in `eta` on which `mu_hat` varies.
    fn resolution_scale(&self) -> T {
        match &self.kind {
            EquilibriumKind::Gaussian | EquilibriumKind::Vanishing => T::one(),
            EquilibriumKind::TwoStream { separation, .. } => T::one() / (T::one() + *separation),
            EquilibriumKind::Table(t) => (t.min_spacing() * T::lit(4.0)).min(T::one()),
        }
    }

    /// Whether the analytic bound holds at every given `eta`.
    pub fn satisfies_bound(&self, etas: impl IntoIterator<Item = T>) -> bool {
        let slack = T::one() + T::lit(1e-12);
        etas.into_iter()
            .all(|e| self.mu_hat(e).norm() <= self.analytic_bound(e) * slack)
    }

    /// `int_0^inf u |mu_hat(u)| du`; bounds `|L[t mu_hat(kt)](lambda)|` by
    /// this value over `k^2` on `Re lambda >= 0`.
    pub fn first_moment_bound(&self) -> T {
        if self.is_vanishing() {
            return T::zero();
        }
        let mut horizon = T::one();
        while {
            let (lg, _) = self.log_envelope(horizon);
            (horizon.ln() + lg) > T::lit(-40.0)
        } {
            horizon *= T::lit(1.5);
        }
        let n = 6000usize;
        let h = horizon / T::from_usize_lossy(n);
        let mut acc = T::zero();
        for j in 0..=n {
            let u = T::from_usize_lossy(j) * h;
            let w = if j == 0 || j == n {
                T::one()
            } else if j % 2 == 1 {
                T::lit(4.0)
            } else {
                T::lit(2.0)
            };
            acc += w * u * self.mu_hat(u).norm();
        }
        acc * h / T::lit(3.0)
    }
}

fn check_rate<T: Real>(theta0: T) -> Result<()> {
    if !(theta0 > T::zero()) || !theta0.is_finite() {
        return Err(invalid("theta0", "must be positive and finite"));
    }
    Ok(())
}

/// Quadrature controls for the Laplace integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec<T> {
    /// Target absolute accuracy; the truncation tail is held below `tol/10`.
    pub tol: T,
    /// Node spacing; chosen from the equilibrium's resolution scale if unset.
    pub step: Option<T>,
    pub max_nodes: usize,
}

impl<T: Real> Default for QuadratureSpec<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            step: None,
            max_nodes: 4_000_000,
        }
    }
}

/// Value of the dispersion symbol with its error budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolValue<T> {
    pub value: Cx<T>,
    /// Certified bound on the truncated tail `int_T^inf`.
    pub tail_bound: T,
    /// Step-halving (Richardson) estimate of the discretization error.
    pub discretization: T,
    pub horizon: T,
    pub nodes: usize,
}

impl<T: Real> SymbolValue<T> {
    pub fn error_estimate(&self) -> T {
        self.tail_bound + self.discretization
    }
}

/// Prepared nodes for evaluating `D(lambda, k)` at many `lambda` with
/// `Re lambda >= re_floor`.
#[derive(Clone, Debug)]
pub struct SymbolQuadrature<T> {
    k: i64,
    re_floor: T,
    step: T,
    samples: Vec<Cx<T>>,
    coarse: Vec<Cx<T>>,
    tail_bound: T,
    horizon: T,
}

impl<T: Real> SymbolQuadrature<T> {
    pub fn new(eq: &Equilibrium<T>, k: i64, re_floor: T, spec: &QuadratureSpec<T>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "spatial mode must be nonzero"));
        }
        let kk = T::from_i64_lossy(k.abs());
        let decay = eq.theta0() * kk;
        if !matches!(eq.kind(), EquilibriumKind::Vanishing) && re_floor <= -decay {
            return Err(Error::Divergent {
                re: re_floor.as_f64(),
                limit: (-decay).as_f64(),
            });
        }
        let (horizon, tail_bound) = truncation(eq, kk, re_floor, spec.tol / T::lit(10.0))?;
        let step0 = spec
            .step
            .unwrap_or_else(|| T::lit(0.01) * eq.resolution_scale() / kk);
        let mut panels = (horizon / (step0 * T::lit(6.0))).ceil().to_usize().unwrap_or(1).max(1);
        if 6 * panels + 1 > spec.max_nodes {
            if spec.step.is_some() {
                return Err(Error::Accuracy {
                    tol: spec.tol.as_f64(),
                    reason: format!("{} nodes exceed the limit {}", 6 * panels + 1, spec.max_nodes),
                });
            }
            panels = (spec.max_nodes - 1) / 6;
        }
        let n = 6 * panels;
        let step = horizon / T::from_usize_lossy(n);
        let kf = T::from_i64_lossy(k);
        let samples: Vec<Cx<T>> = (0..=n)
            .map(|j| {
                let t = T::from_usize_lossy(j) * step;
                eq.mu_hat(kf * t) * t
            })
            .collect();
        let coarse = samples.iter().step_by(2).copied().collect();
        Ok(Self {
            k,
            re_floor,
            step,
            samples,
            coarse,
            tail_bound,
            horizon,
        })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn nodes(&self) -> usize {
        self.samples.len()
    }

    /// `L[t mu_hat(kt)](lambda)` without the leading 1.
    pub fn transform(&self, lambda: Cx<T>) -> Result<Cx<T>> {
        Ok(self.evaluate(lambda)?.value - cx(T::one(), T::zero()))
    }

    pub fn evaluate(&self, lambda: Cx<T>) -> Result<SymbolValue<T>> {
        if lambda.re < self.re_floor - T::lit(1e-12) {
            return Err(invalid(
                "lambda",
                format!("Re lambda = {} below the prepared floor {}", lambda.re, self.re_floor),
            ));
        }
        let fine = filon_cubic(&self.samples, self.step, lambda);
        let coarse = filon_cubic(&self.coarse, self.step * T::lit(2.0), lambda);
        let tail = self.tail_bound * (-(lambda.re - self.re_floor) * self.horizon).exp();
        Ok(SymbolValue {
            value: fine + cx(T::one(), T::zero()),
            tail_bound: tail,
            discretization: (fine - coarse).norm() / T::lit(15.0),
            horizon: self.horizon,
            nodes: self.samples.len(),
        })
    }
}

/// Smallest horizon with certified tail below `target`, and that tail.
fn truncation<T: Real>(eq: &Equilibrium<T>, kk: T, re: T, target: T) -> Result<(T, T)> {
    if eq.is_vanishing() {
        return Ok((T::one() / kk, T::zero()));
    }
    // g(t) = t e^{-re t} env(k t) is log-concave, so the tail beyond T is
    // at most g(T) / r(T) with r = -(ln g)'(T) once r > 0.
    let log_g = |t: T| {
        let (le, slope) = eq.log_envelope(kk * t);
        (t.ln() - re * t + le, T::one() / t - re + kk * slope)
    };
    let mut t = T::lit(0.5) / kk;
    let dt = T::lit(0.25) / kk;
    for _ in 0..1_000_000 {
        let (lg, dlg) = log_g(t);
        if lg == T::neg_infinity() {
            return Ok((t, T::zero()));
        }
        if dlg < T::zero() {
            let tail = (lg - (-dlg).ln()).exp();
            if tail <= target {
                return Ok((t, tail));
            }
        }
        t += dt;
    }
    Err(Error::Accuracy {
        tol: target.as_f64(),
        reason: "truncation horizon search did not terminate".into(),
    })
}

/// `D(lambda, k) = 1 + int_0^inf e^{-lambda t} t mu_hat(k t) dt`.
///
/// Refines the node spacing until the step-halving estimate is below
/// `quad.tol` or the node budget runs out.
pub fn laplace_symbol<T: Real>(
    eq: &Equilibrium<T>,
    k: i64,
    lambda: Cx<T>,
    quad: &QuadratureSpec<T>,
) -> Result<SymbolValue<T>> {
    let mut spec = *quad;
    loop {
        let q = SymbolQuadrature::new(eq, k, lambda.re, &spec)?;
        let v = q.evaluate(lambda)?;
        if v.discretization <= quad.tol {
            return Ok(v);
        }
        let step = spec.step.unwrap_or(q.step);
        let next = step / T::lit(2.0);
        if q.horizon / next > T::from_usize_lossy(quad.max_nodes) {
            return Err(Error::Accuracy {
                tol: quad.tol.as_f64(),
                reason: format!(
                    "discretization estimate {:e} with {} nodes",
                    v.discretization.as_f64(),
                    v.nodes
                ),
            });
        }
        spec.step = Some(next);
    }
}

/// Sampling of the imaginary axis for the margin search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec<T> {
    pub tau_step: T,
    /// Adjacent samples of `|D|` differing by more than this raise the
    /// resolution warning.
    pub tol: T,
    /// Refine the minimiser by golden-section search.
    pub refine: bool,
}

impl<T: Real> Default for GridSpec<T> {
    fn default() -> Self {
        Self {
            tau_step: T::lit(0.01),
            tol: T::lit(0.05),
            refine: true,
        }
    }
}

/// Outcome of [`penrose_margin`].
#[derive(Clone, Debug, PartialEq)]
pub struct MarginReport<T> {
    /// Infimum of `|D|` over `Re lambda >= 0`, `1 <= |k| <= k_max`; zero
    /// when some mode has a zero in the open right half-plane.
    pub margin: T,
    /// Minimum of `|D(i tau, k)|` over the sampled grid (after refinement).
    pub boundary_min: T,
    pub argmin_k: i64,
    pub argmin_tau: T,
    /// Number of zeros of `D(., k)` in the right half-plane, per `k`,
    /// from the winding of `D` along the imaginary axis.
    pub zeros_right: Vec<(i64, i64)>,
    pub unstable: bool,
    /// Lower bound `1 - C/(k_max+1)^2` on `|D|` for all `|k| > k_max`.
    pub tail_lower_bound: T,
    pub max_adjacent_change: T,
    pub resolution_warning: bool,
}

/// Penrose margin: the infimum of `|D(lambda, k)|` over `Re lambda >= 0`
/// and `1 <= |k| <= k_max`.
///
/// With no zeros in the right half-plane `1/D` is analytic there and
/// tends to 1, so the infimum sits on the imaginary axis; the winding
/// count along the sampled axis certifies that premise.
/// `D(i tau, -k) = conj(D(-i tau, k))` for real `mu`, so only `k > 0` is
/// sampled.
pub fn penrose_margin<T: Real>(
    eq: &Equilibrium<T>,
    k_max: i64,
    tau_max: T,
    grid: &GridSpec<T>,
) -> Result<MarginReport<T>> {
    if k_max < 1 {
        return Err(invalid("k_max", "must be at least 1"));
    }
    if !(tau_max > T::zero()) {
        return Err(invalid("tau_max", "must be positive"));
    }
    if !(grid.tau_step > T::zero()) {
        return Err(invalid("tau_step", "must be positive"));
    }
    let n = (tau_max / grid.tau_step).ceil().to_usize().unwrap_or(1).max(1);
    let spec = QuadratureSpec::default();
    let mut best = (T::infinity(), 0i64, T::zero());
    let mut max_change = T::zero();
    let mut zeros_right = Vec::new();
    for k in 1..=k_max {
        let q = SymbolQuadrature::new(eq, k, T::zero(), &spec)?;
        let mut prev: Option<Cx<T>> = None;
        let mut arg_total = T::zero();
        let mut local = (T::infinity(), T::zero());
        for j in 0..=2 * n {
            let tau = -tau_max + T::from_usize_lossy(j) * tau_max / T::from_usize_lossy(n);
            let d = q.evaluate(cx(T::zero(), tau))?.value;
            let m = d.norm();
            if m < local.0 {
                local = (m, tau);
            }
            if let Some(p) = prev {
                max_change = max_change.max((m - p.norm()).abs());
                arg_total += (d / p).arg();
            }
            prev = Some(d);
        }
        let mut min_k = local;
        if grid.refine {
            let h = tau_max / T::from_usize_lossy(n);
            let f = |tau: T| q.evaluate(cx(T::zero(), tau)).map(|v| v.value.norm());
            let r = golden_min(f, local.1 - h, local.1 + h)?;
            if r.0 < min_k.0 {
                min_k = r;
            }
        }
        if min_k.0 < best.0 {
            best = (min_k.0, k, min_k.1);
        }
        // Upward traversal keeps the right half-plane on the right, so
        // each enclosed zero contributes -2 pi.
        let count = -(arg_total / (T::lit(2.0) * T::PI())).round().to_i64().unwrap_or(0);
        zeros_right.push((k, count));
    }
    let unstable = zeros_right.iter().any(|&(_, c)| c != 0);
    let kk = T::from_i64_lossy(k_max + 1);
    let tail_lower_bound = T::one() - eq.first_moment_bound() / (kk * kk);
    Ok(MarginReport {
        margin: if unstable { T::zero() } else { best.0.min(T::one()) },
        boundary_min: best.0,
        argmin_k: best.1,
        argmin_tau: best.2,
        zeros_right,
        unstable,
        tail_lower_bound,
        max_adjacent_change: max_change,
        resolution_warning: max_change > grid.tol,
    })
}

fn golden_min<T: Real, F: Fn(T) -> Result<T>>(f: F, mut a: T, mut b: T) -> Result<(T, T)> {
    let g = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        if (b - a).abs() < T::lit(1e-10) {
            break;
        }
    }
    let x = (a + b) / T::lit(2.0);
    Ok((f(x)?, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_2PI: f64 = 2.5066282746310002;

    /// Composite Simpson of `int_{-A}^{A} e^{-v^2/2} e^{-i eta v} dv`.
    fn gaussian_transform_oracle(eta: f64) -> Cx<f64> {
        let a = 12.0;
        let n = 20_000;
        let h = 2.0 * a / n as f64;
        let mut acc = czero();
        for j in 0..=n {
            let v = -a + j as f64 * h;
            let w = if j == 0 || j == n { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            acc += Cx::from_polar((-v * v / 2.0).exp(), -eta * v) * w;
        }
        acc * (h / 3.0)
    }

    #[test]
    fn gaussian_values_match_quadrature() {
        let eq = make_gaussian::<f64>();
        assert!((eq.mu_hat(0.0).re - SQRT_2PI).abs() < 1e-15);
        for &eta in &[0.0, 0.7, -1.3, 3.0] {
            let o = gaussian_transform_oracle(eta);
            assert!((eq.mu_hat(eta) - o).norm() < 1e-12, "eta = {eta}");
        }
        let (p, m) = (eq.mu_hat(3.0), eq.mu_hat(-3.0));
        assert_eq!(m, p.conj());
        assert_eq!(p.im, 0.0);
    }

    #[test]
    fn gaussian_bound_example() {
        let eq = make_gaussian::<f64>();
        let v = eq.mu_hat(5.0).norm();
        assert!((v - SQRT_2PI * (-12.5f64).exp()).abs() < 1e-18);
        assert!(v <= 3.0 * (-5.0f64).exp());
        let grid: Vec<f64> = (-400..=400).map(|j| j as f64 * 0.05).collect();
        assert!(eq.satisfies_bound(grid.iter().copied()));
        let eq2 = Equilibrium::gaussian_with_rate(2.5).unwrap();
        assert!(eq2.satisfies_bound(grid.iter().copied()));
    }

    #[test]
    fn dv_mu_hat_closed_form() {
        let eq = make_gaussian::<f64>();
        assert_eq!(dv_mu_hat(&eq, 0.0), czero());
        let v = dv_mu_hat(&eq, 1.0);
        assert!(v.re.abs() < 1e-16);
        assert!((v.im - SQRT_2PI * (-0.5f64).exp()).abs() < 1e-15);
        let ts = Equilibrium::two_stream(1.5).unwrap();
        for &eta in &[0.4, 2.2, 7.0] {
            // real d mu / dv: Hermitian; even mu: odd in eta
            assert!((dv_mu_hat(&eq, -eta) - dv_mu_hat(&eq, eta).conj()).norm() < 1e-16);
            assert!((dv_mu_hat(&eq, -eta) + dv_mu_hat(&eq, eta)).norm() < 1e-16);
            assert!((dv_mu_hat(&ts, -eta) - dv_mu_hat(&ts, eta).conj()).norm() < 1e-16);
        }
    }

    #[test]
    fn two_stream_transform() {
        let eq = Equilibrium::two_stream(3.0).unwrap();
        let eta: f64 = 0.8;
        let expect = SQRT_2PI * (-eta * eta / 2.0).exp() * (3.0 * eta).cos();
        assert!((eq.mu_hat(eta).re - expect).abs() < 1e-15);
        assert!(eq.satisfies_bound((-100..=100).map(|j| j as f64 * 0.1)));
    }

    #[test]
    fn table_symmetrises_and_bounds() {
        let rows = vec![
            (-1.0, cx(0.5, 0.2)),
            (0.0, cx(1.0, 0.0)),
            (1.0, cx(0.5, 0.0)),
            (2.0, cx(0.1, 0.0)),
        ];
        let eq = Equilibrium::from_table(SpectrumTable::new(rows).unwrap(), 0.5).unwrap();
        for &e in &[0.3, 1.0, 1.7, 2.5] {
            assert!((eq.mu_hat(-e) - eq.mu_hat(e).conj()).norm() < 1e-15);
        }
        assert_eq!(eq.mu_hat(1.0), cx(0.5, -0.1));
        assert!(eq.satisfies_bound((-30..=30).map(|j| j as f64 * 0.1)));
        assert!(SpectrumTable::new(vec![(0.0, cx(1.0, 0.0))]).is_err());
    }

    #[test]
    fn symbol_at_origin() {
        let eq = make_gaussian::<f64>();
        let v = laplace_symbol(&eq, 1, cx(0.0, 0.0), &QuadratureSpec::default()).unwrap();
        assert!((v.value.re - (1.0 + SQRT_2PI)).abs() < 1e-10, "{}", v.value);
        assert!(v.value.im.abs() < 1e-12);
        // 1/k^2 scaling of L at lambda = 0
        for k in [5, 10, 20] {
            let v = laplace_symbol(&eq, k, cx(0.0, 0.0), &QuadratureSpec::default()).unwrap();
            let l = v.value.re - 1.0;
            assert!((l * (k * k) as f64 - SQRT_2PI).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn symbol_tends_to_one_and_is_conjugate_symmetric() {
        let eq = make_gaussian::<f64>();
        let spec = QuadratureSpec::default();
        let far = laplace_symbol(&eq, 2, cx(400.0, 3.0), &spec).unwrap();
        assert!((far.value - cx(1.0, 0.0)).norm() < 1e-4);
        let lam = cx(0.3, 1.7);
        let a = laplace_symbol(&eq, 1, lam, &spec).unwrap().value;
        let b = laplace_symbol(&eq, 1, lam.conj(), &spec).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-13);
    }

    #[test]
    fn symbol_divergence_error() {
        let eq = make_gaussian::<f64>();
        let err = laplace_symbol(&eq, 2, cx(-2.5, 0.0), &QuadratureSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Divergent { .. }));
    }

    #[test]
    fn symbol_step_halving_within_estimate() {
        let eq = make_gaussian::<f64>();
        let lam = cx(0.1, 2.5);
        let spec = QuadratureSpec { step: Some(0.02), ..QuadratureSpec::default() };
        let a = SymbolQuadrature::new(&eq, 1, lam.re, &spec).unwrap().evaluate(lam).unwrap();
        let spec = QuadratureSpec { step: Some(0.01), ..spec };
        let b = SymbolQuadrature::new(&eq, 1, lam.re, &spec).unwrap().evaluate(lam).unwrap();
        assert!((a.value - b.value).norm() <= a.error_estimate() + b.error_estimate());
    }

    #[test]
    fn vanishing_symbol_is_one() {
        let eq = Equilibrium::<f64>::vanishing();
        let v = laplace_symbol(&eq, 3, cx(0.0, 1.0), &QuadratureSpec::default()).unwrap();
        assert_eq!(v.value, cx(1.0, 0.0));
    }
}
