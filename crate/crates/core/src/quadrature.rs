//! Time-integration rules shared by every module, and an oscillatory
//! (Filon-type) rule for Laplace and Fourier integrals.

use crate::scalar::{cx, czero, Cx, Real};

/// Rule used for time integrals and convolutions on a uniform grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TimeRule {
    /// Composite trapezoid, second order.
    Trapezoid,
    /// Piecewise-cubic interpolatory rule, fourth order, exact for cubics.
    #[default]
    Cubic,
}

const FIRST: [f64; 4] = [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0];
const CENTER: [f64; 4] = [-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0];
const LAST: [f64; 4] = [1.0 / 24.0, -5.0 / 24.0, 19.0 / 24.0, 9.0 / 24.0];
// Weights of the first (and, mirrored, last) four points once n >= 7.
const HEAD: [f64; 4] = [8.0 / 24.0, 31.0 / 24.0, 20.0 / 24.0, 25.0 / 24.0];

/// Weights (in units of the step) for the integral over `n` intervals
/// using samples `0..=n`.
pub fn composite_weights(rule: TimeRule, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if n == 0 {
        return w;
    }
    match rule {
        TimeRule::Trapezoid => {
            w.iter_mut().for_each(|x| *x = 1.0);
            w[0] = 0.5;
            w[n] = 0.5;
        }
        TimeRule::Cubic => match n {
            1 => {
                w[0] = 0.5;
                w[1] = 0.5;
            }
            2 => {
                w[0] = 1.0 / 3.0;
                w[1] = 4.0 / 3.0;
                w[2] = 1.0 / 3.0;
            }
            _ => {
                for i in 0..n {
                    let (base, stencil) = interval_stencil(i, n);
                    for (o, s) in stencil.iter().enumerate() {
                        w[base + o] += s;
                    }
                }
            }
        },
    }
    w
}

/// Stencil start and weights for the single-interval integral
/// `[t_i, t_{i+1}]` on a grid with `n >= 3` intervals.
#[inline]
fn interval_stencil(i: usize, n: usize) -> (usize, [f64; 4]) {
    if i == 0 {
        (0, FIRST)
    } else if i + 1 == n {
        (n - 3, LAST)
    } else {
        (i - 1, CENTER)
    }
}

/// Cached composite weights for all interval counts up to a limit.
///
/// The hot loops (Volterra sweep, resolvent application) need the weight
/// of sample `j` for an integral over `n` intervals; for `n >= 7` the
/// cubic rule is 1 in the interior with fixed end corrections.
#[derive(Clone, Debug)]
pub struct WeightTable<T> {
    rule: TimeRule,
    small: Vec<Vec<T>>,
}

impl<T: Real> WeightTable<T> {
    pub fn new(rule: TimeRule) -> Self {
        let small = (0..7)
            .map(|n| composite_weights(rule, n).into_iter().map(T::lit).collect())
            .collect();
        Self { rule, small }
    }

    pub fn rule(&self) -> TimeRule {
        self.rule
    }

    /// Weight of sample `j` in the integral over `n` intervals.
    #[inline]
    pub fn weight(&self, n: usize, j: usize) -> T {
        if n < 7 {
            return self.small[n][j];
        }
        match self.rule {
            TimeRule::Trapezoid => {
                if j == 0 || j == n {
                    T::lit(0.5)
                } else {
                    T::one()
                }
            }
            TimeRule::Cubic => {
                if j < 4 {
                    T::lit(HEAD[j])
                } else if j + 4 > n {
                    T::lit(HEAD[n - j])
                } else {
                    T::one()
                }
            }
        }
    }

    /// `dt * sum_j w_j^{(n)} a_{n-j} b_j`: the discrete convolution
    /// `int_0^{t_n} a(t_n - s) b(s) ds`.
    pub fn convolve(&self, dt: T, a: &[Cx<T>], b: &[Cx<T>], n: usize) -> Cx<T> {
        let mut acc = czero();
        for j in 0..=n {
            acc += a[n - j] * b[j] * self.weight(n, j);
        }
        acc * dt
    }
}

/// Running integral `int_0^{t_n} f ds` for every `n`.
///
/// For the cubic rule each interval uses a centred four-point stencil
/// (one-sided at the ends), so all samples must be known in advance.
pub fn cumulative<T: Real>(rule: TimeRule, dt: T, f: &[Cx<T>]) -> Vec<Cx<T>> {
    let len = f.len();
    let mut out = vec![czero(); len];
    for i in 0..len.saturating_sub(1) {
        out[i + 1] = out[i] + interval_integral(rule, dt, len - 1, i, |j| f[j]);
    }
    out
}

/// Integral over the single interval `[t_i, t_{i+1}]` of a grid with
/// `n` intervals, with samples supplied by `f`.
#[inline]
pub fn interval_integral<T: Real, F: Fn(usize) -> Cx<T>>(
    rule: TimeRule,
    dt: T,
    n: usize,
    i: usize,
    f: F,
) -> Cx<T> {
    let half = T::lit(0.5);
    match (rule, n) {
        (TimeRule::Trapezoid, _) | (TimeRule::Cubic, 1) => (f(i) + f(i + 1)) * (half * dt),
        (TimeRule::Cubic, 2) => {
            let (a, b, c) = (f(0), f(1), f(2));
            let w = if i == 0 { [5.0, 8.0, -1.0] } else { [-1.0, 8.0, 5.0] };
            (a * T::lit(w[0]) + b * T::lit(w[1]) + c * T::lit(w[2])) * (dt / T::lit(12.0))
        }
        (TimeRule::Cubic, _) => {
            let (base, s) = interval_stencil(i, n);
            (f(base) * T::lit(s[0])
                + f(base + 1) * T::lit(s[1])
                + f(base + 2) * T::lit(s[2])
                + f(base + 3) * T::lit(s[3]))
                * dt
        }
    }
}

/// Row-wise running time integral of an `n_t x n_eta` row-major array.
pub fn cumulative_rows<T: Real>(
    rule: TimeRule,
    dt: T,
    data: &[Cx<T>],
    n_t: usize,
    n_eta: usize,
) -> Vec<Cx<T>> {
    debug_assert_eq!(data.len(), n_t * n_eta);
    let mut out = vec![czero(); data.len()];
    let n = n_t.saturating_sub(1);
    for i in 0..n {
        let (done, rest) = out.split_at_mut((i + 1) * n_eta);
        let prev = &done[i * n_eta..];
        let next = &mut rest[..n_eta];
        for e in 0..n_eta {
            next[e] = prev[e] + interval_integral(rule, dt, n, i, |j| data[j * n_eta + e]);
        }
    }
    out
}

/// `int_0^3 x^r e^{-z x} dx` for `r = 0..=3`.
fn panel_moments<T: Real>(z: Cx<T>) -> [Cx<T>; 4] {
    let three = T::lit(3.0);
    if z.norm() < T::one() {
        let mut m = [czero(); 4];
        // sum_n (-z)^n 3^{n+r+1} / (n! (n+r+1))
        let mut term = cx(three, T::zero()); // (-3z)^n / n! * 3
        for n in 0..60 {
            let mut small = true;
            let mut pow3 = T::one();
            for (r, slot) in m.iter_mut().enumerate() {
                let c = term * pow3 / T::from_usize_lossy(n + r + 1);
                *slot += c;
                if c.norm() > T::epsilon() * T::lit(1e-3) * slot.norm() {
                    small = false;
                }
                pow3 *= three;
            }
            if small && n > 3 {
                break;
            }
            term = term * (-z * three) / T::from_usize_lossy(n + 1);
        }
        m
    } else {
        let e = (-z * three).exp();
        let mut m = [czero(); 4];
        m[0] = (cx(T::one(), T::zero()) - e) / z;
        let mut pow3 = T::one();
        for r in 1..4 {
            pow3 *= three;
            m[r] = (m[r - 1] * T::from_usize_lossy(r) - e * pow3) / z;
        }
        m
    }
}

const LAGRANGE_MONOMIALS: [[f64; 4]; 4] = [
    [1.0, -11.0 / 6.0, 1.0, -1.0 / 6.0],
    [0.0, 3.0, -2.5, 0.5],
    [0.0, -1.5, 2.0, -0.5],
    [0.0, 1.0 / 3.0, -0.5, 1.0 / 6.0],
];

/// Panel weights of the cubic Filon rule for `int e^{-lambda u} s(u) du`
/// over one panel of three steps of size `tau`.
pub fn filon_panel_weights<T: Real>(lambda: Cx<T>, tau: T) -> [Cx<T>; 4] {
    let m = panel_moments(lambda * tau);
    let mut w = [czero(); 4];
    for (wi, row) in w.iter_mut().zip(LAGRANGE_MONOMIALS.iter()) {
        let mut acc = czero();
        for (mr, c) in m.iter().zip(row) {
            acc += *mr * T::lit(*c);
        }
        *wi = acc * tau;
    }
    w
}

/// Cubic Filon-type quadrature of `int_0^{(n-1) tau} e^{-lambda u} s(u) du`.
///
/// The smooth factor `s` is replaced by its piecewise-cubic interpolant
/// and integrated exactly against the exponential, so the error does not
/// grow with `|Im lambda|`. Requires `samples.len() = 3m + 1`.
pub fn filon_cubic<T: Real>(samples: &[Cx<T>], tau: T, lambda: Cx<T>) -> Cx<T> {
    let n = samples.len();
    assert!(n >= 4 && (n - 1).is_multiple_of(3), "filon_cubic needs 3m+1 samples, got {n}");
    let w = filon_panel_weights(lambda, tau);
    let shift = (-lambda * (tau * T::lit(3.0))).exp();
    let mut phase = cx(T::one(), T::zero());
    let mut acc = czero();
    for p in 0..(n - 1) / 3 {
        let b = 3 * p;
        let panel = samples[b] * w[0]
            + samples[b + 1] * w[1]
            + samples[b + 2] * w[2]
            + samples[b + 3] * w[3];
        acc += phase * panel;
        phase *= shift;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_weights_integrate_cubics_exactly() {
        for n in 1..20 {
            let w = composite_weights(TimeRule::Cubic, n);
            let h = 0.37;
            let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 0.25 * t * t * t;
            let exact = {
                let b = n as f64 * h;
                b - b * b + b * b * b / 6.0 + b.powi(4) / 16.0
            };
            let approx: f64 = w.iter().enumerate().map(|(j, wj)| wj * f(j as f64 * h)).sum::<f64>() * h;
            if n >= 3 {
                assert!((approx - exact).abs() < 1e-11, "n = {n}: {approx} vs {exact}");
            }
            // n = 1, 2 are exact for linear / quadratic parts only
            let g = |t: f64| 1.0 + 3.0 * t;
            let ga: f64 = w.iter().enumerate().map(|(j, wj)| wj * g(j as f64 * h)).sum::<f64>() * h;
            let b = n as f64 * h;
            assert!((ga - (b + 1.5 * b * b)).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_table_matches_explicit_weights() {
        let table = WeightTable::<f64>::new(TimeRule::Cubic);
        for n in 0..30 {
            let w = composite_weights(TimeRule::Cubic, n);
            for (j, wj) in w.iter().enumerate() {
                assert!((table.weight(n, j) - wj).abs() < 1e-15, "n={n} j={j}");
            }
        }
        let table = WeightTable::<f64>::new(TimeRule::Trapezoid);
        for n in 0..12 {
            let w = composite_weights(TimeRule::Trapezoid, n);
            for (j, wj) in w.iter().enumerate() {
                assert_eq!(table.weight(n, j), *wj);
            }
        }
    }

    #[test]
    fn cumulative_constant_is_linear() {
        let f = vec![cx(2.0, -1.0); 11];
        for rule in [TimeRule::Trapezoid, TimeRule::Cubic] {
            let c = cumulative(rule, 0.1, &f);
            for (i, v) in c.iter().enumerate() {
                let t = i as f64 * 0.1;
                assert!((v.re - 2.0 * t).abs() < 1e-13);
                assert!((v.im + t).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cumulative_fourth_order() {
        let err = |n: usize| {
            let dt = 2.0 / n as f64;
            let f: Vec<_> = (0..=n).map(|i| cx((i as f64 * dt).sin(), 0.0)).collect();
            let c = cumulative(TimeRule::Cubic, dt, &f);
            c.iter()
                .enumerate()
                .map(|(i, v)| (v.re - (1.0 - (i as f64 * dt).cos())).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn filon_matches_closed_form_at_high_frequency() {
        // int_0^3 u e^{-lambda u} du, lambda with large imaginary part
        for &lam in &[cx(0.3, 0.0), cx(-0.2, 7.0), cx(0.5, 250.0), cx(0.0, -80.0)] {
            let tau = 0.01;
            let n = 301;
            let s: Vec<_> = (0..n).map(|j| cx(j as f64 * tau, 0.0)).collect();
            let b = 3.0;
            let e = (-lam * b).exp();
            let exact = (cx(1.0, 0.0) - e * (lam * b + 1.0)) / (lam * lam);
            let approx = filon_cubic(&s, tau, lam);
            assert!((approx - exact).norm() < 1e-12 * (1.0 + exact.norm()), "{lam}: {approx} vs {exact}");
        }
    }
}
