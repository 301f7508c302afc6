//! Direct spectral solver for the perturbation `f` of Vlasov-Poisson,
//!
//! ```text
//! d_t f + v d_x f + E d_v f + E d_v mu = 0,   d_x E = rho = int f dv,
//! ```
//!
//! in Fourier variables `(k', eta')`, advanced by Strang splitting of
//! free transport and the field force.

use std::io::{self, Write};
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::cascade::{CascadeConfig, InitialData};
use crate::equilibrium::Equilibrium;
use crate::error::{invalid, Error, Result};
use crate::field::FieldSeries;
use crate::grid::EtaGrid;
use crate::scalar::{cx, czero, Cx, Real};

/// `f_hat(t, k', eta')` for `k' = k_step * m`, `|m| <= modes`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState<T> {
    grid: EtaGrid<T>,
    k_step: i64,
    modes: i64,
    values: Vec<Cx<T>>,
    time: T,
}

impl<T: Real> SpectralState<T> {
    pub fn zeros(grid: EtaGrid<T>, k_step: i64, modes: i64) -> Result<Self> {
        if k_step < 1 || modes < 1 {
            return Err(invalid("modes", "need k_step >= 1 and at least one nonzero mode"));
        }
        if grid.zero_index().is_none() {
            return Err(Error::GridCoverage("eta' = 0 (density sample)".into()));
        }
        let rows = (2 * modes + 1) as usize;
        Ok(Self {
            grid,
            k_step,
            modes,
            values: vec![czero(); rows * grid.len()],
            time: T::zero(),
        })
    }

    pub fn grid(&self) -> &EtaGrid<T> {
        &self.grid
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn k_step(&self) -> i64 {
        self.k_step
    }

    /// Largest `|m|`; modes are `k' = k_step * m`.
    pub fn modes(&self) -> i64 {
        self.modes
    }

    pub fn rows(&self) -> usize {
        (2 * self.modes + 1) as usize
    }

    pub fn values(&self) -> &[Cx<T>] {
        &self.values
    }

    fn row_index(&self, m: i64) -> Option<usize> {
        (m.abs() <= self.modes).then(|| (m + self.modes) as usize)
    }

    /// Row of spatial mode `k' = k_step * m`.
    pub fn row(&self, m: i64) -> &[Cx<T>] {
        let r = self.row_index(m).expect("mode inside the state");
        let n = self.grid.len();
        &self.values[r * n..(r + 1) * n]
    }

    fn row_mut(&mut self, m: i64) -> &mut [Cx<T>] {
        let r = self.row_index(m).expect("mode inside the state");
        let n = self.grid.len();
        &mut self.values[r * n..(r + 1) * n]
    }

    /// `f_hat(k', 0)` for `k' = k_step * m`.
    pub fn density(&self, m: i64) -> Cx<T> {
        let z = self.grid.zero_index().expect("checked at construction");
        self.row(m)[z]
    }

    /// Largest deviation from `f_hat(-k', -eta') = conj(f_hat(k', eta'))`.
    pub fn hermitian_defect(&self) -> T {
        let n = self.grid.len();
        let mut worst = T::zero();
        for m in 0..=self.modes {
            let (a, b) = (self.row(m), self.row(-m));
            for j in 0..n {
                worst = worst.max((a[j] - b[n - 1 - j].conj()).norm());
            }
        }
        worst
    }

    /// Binary snapshot: magic `ECHOSNAP`, then little-endian `u64` rows,
    /// `u64` columns, `i64` k_step, `f64` time, `f64` eta' start, `f64`
    /// eta' step, followed by the row-major `(re, im)` pairs as `f64`.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"ECHOSNAP")?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.len() as u64).to_le_bytes())?;
        w.write_all(&self.k_step.to_le_bytes())?;
        for x in [self.time, self.grid.start(), self.grid.step()] {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.re.as_f64().to_le_bytes())?;
            w.write_all(&v.im.as_f64().to_le_bytes())?;
        }
        Ok(())
    }
}

/// Grid of the direct solver: the cascade's `eta'` grid widened by whole
/// steps to the half-range `K modes T + L eta_max + 10 / lambda0`, so that
/// no mode `|m| <= modes` carries content to the edges before the horizon.
pub fn direct_grid<T: Real>(cfg: &CascadeConfig<T>, modes: i64, eta_max: i64) -> EtaGrid<T> {
    let range = T::from_i64_lossy(cfg.big_k * modes) * cfg.time.horizon()
        + T::from_i64_lossy(cfg.big_l * eta_max)
        + T::lit(10.0) / cfg.lambda0;
    cfg.eta_grid.widened(range)
}

/// `f_hat(0, K k, eta') = eps sum_eta f0_hat_{k,eta}(eta' - L eta)` on
/// [`direct_grid`].
pub fn init_from_modes<T: Real>(
    data: &InitialData<T>,
    cfg: &CascadeConfig<T>,
    modes: i64,
) -> Result<SpectralState<T>> {
    if data.grid() != &cfg.eta_grid {
        return Err(Error::GridMismatch("initial data and cascade eta' grids differ".into()));
    }
    let grid = direct_grid(cfg, modes, data.max_abs_eta());
    let mut state = SpectralState::zeros(grid, cfg.big_k, modes)?;
    for ((k, eta), profile) in data.modes() {
        if k.abs() > modes {
            return Err(Error::GridCoverage(format!("spatial mode {} (|m| = {})", cfg.big_k * k, k.abs())));
        }
        let shift = T::from_i64_lossy(cfg.big_l * eta);
        for (j, slot) in state.row_mut(k).iter_mut().enumerate() {
            let v = cfg.eta_grid.interpolate(profile, grid.point(j) - shift).value;
            *slot += v * cfg.epsilon;
        }
    }
    Ok(state)
}

/// Band-limited shifts of `eta'` rows.
struct Shifter<T: Real> {
    n: usize,
    padded: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    buffer: Vec<Cx<T>>,
    scratch: Vec<Cx<T>>,
}

impl<T: Real> Shifter<T> {
    fn new(n: usize) -> Self {
        let padded = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            padded,
            forward,
            inverse,
            buffer: vec![czero(); padded],
            scratch: vec![czero(); len],
        }
    }

    /// `row[j] <- row(x_j + cells * h)`, zero beyond the grid.
    fn shift(&mut self, row: &mut [Cx<T>], cells: T) {
        if cells == T::zero() {
            return;
        }
        let whole = cells.round();
        if (cells - whole).abs() <= T::lit(1e-12) {
            let d = whole.to_i64().unwrap_or(i64::MAX);
            let n = self.n as i64;
            let src: Vec<Cx<T>> = row.to_vec();
            for (j, slot) in row.iter_mut().enumerate() {
                let i = j as i64 + d;
                *slot = if (0..n).contains(&i) { src[i as usize] } else { czero() };
            }
            return;
        }
        self.buffer[..self.n].copy_from_slice(row);
        self.buffer[self.n..].iter_mut().for_each(|v| *v = czero());
        self.forward.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let np = self.padded;
        let two_pi = T::lit(2.0) * T::PI();
        let scale = T::one() / T::from_usize_lossy(np);
        for (q, c) in self.buffer.iter_mut().enumerate() {
            let factor = if 2 * q == np {
                cx((T::PI() * cells).cos(), T::zero())
            } else {
                let qs = if 2 * q < np { q as i64 } else { q as i64 - np as i64 };
                Cx::from_polar(T::one(), two_pi * T::from_i64_lossy(qs) * cells / T::from_usize_lossy(np))
            };
            *c = *c * factor * scale;
        }
        self.inverse.process_with_scratch(&mut self.buffer, &mut self.scratch);
        row.copy_from_slice(&self.buffer[..self.n]);
    }
}

/// Stepping options of the direct solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Drop `E d_v f`, keeping only the linear coupling `E d_v mu`.
    pub linearized: bool,
    /// Strang steps per recorded step.
    pub substeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            linearized: false,
            substeps: 1,
        }
    }
}

/// Strang-split stepper holding FFT plans for one grid.
pub struct SpectralSolver<T: Real> {
    eq: Equilibrium<T>,
    options: SolverOptions,
    shifter: Shifter<T>,
    mu_hat: Vec<Cx<T>>,
}

impl<T: Real> SpectralSolver<T> {
    pub fn new(eq: Equilibrium<T>, grid: &EtaGrid<T>, options: SolverOptions) -> Result<Self> {
        if options.substeps == 0 {
            return Err(invalid("substeps", "must be at least 1"));
        }
        let mu_hat = grid.points().map(|x| eq.mu_hat(x)).collect();
        Ok(Self {
            eq,
            options,
            shifter: Shifter::new(grid.len()),
            mu_hat,
        })
    }

    pub fn equilibrium(&self) -> &Equilibrium<T> {
        &self.eq
    }

    /// Exact free transport `f_hat(k', eta') <- f_hat(k', eta' + k' dt)`.
    pub fn free_transport(&mut self, state: &mut SpectralState<T>, dt: T) {
        let h = state.grid.step();
        for m in -state.modes..=state.modes {
            let kp = T::from_i64_lossy(state.k_step * m);
            let cells = kp * dt / h;
            let row = state.row_mut(m);
            self.shifter.shift(row, cells);
        }
    }

    /// Applies the field force for `dt` with `E` frozen (it is: the force
    /// does not change `f_hat(., 0)`).
    fn force(&self, state: &mut SpectralState<T>, e: &[Cx<T>], dt: T) -> Result<()> {
        let n = state.grid.len();
        let rows = state.rows();
        let modes = state.modes;
        let max_eta = state.grid.max_abs();
        let sup_e: T = e.iter().map(|v| v.norm()).sum();
        let guard = dt * sup_e * max_eta;
        if !(guard < T::one()) {
            return Err(Error::StabilityGuard { value: guard.as_f64() });
        }
        if self.options.linearized {
            for (r, em) in e.iter().enumerate() {
                if *em == czero() {
                    continue;
                }
                let row = &mut state.values[r * n..(r + 1) * n];
                for (j, v) in row.iter_mut().enumerate() {
                    let xi = state.grid.point(j);
                    *v -= *em * self.mu_hat[j] * cx(T::zero(), xi * dt);
                }
            }
            return Ok(());
        }
        // exp(-i xi dt C) with (C F)_m = sum_m1 E(m1) F(m - m1), applied to
        // F = f + mu e_0 and written as f + sum_{n>=1} A^n F / n!.
        let mut col = vec![czero(); rows];
        let mut term = vec![czero(); rows];
        let mut next = vec![czero(); rows];
        let tiny = T::epsilon() * T::lit(1e-3);
        for j in 0..n {
            let xi = state.grid.point(j);
            if xi == T::zero() {
                continue;
            }
            let a = cx(T::zero(), -xi * dt);
            for (r, c) in col.iter_mut().enumerate() {
                *c = state.values[r * n + j];
            }
            term.copy_from_slice(&col);
            term[modes as usize] += self.mu_hat[j];
            let scale = term.iter().map(|v| v.norm()).fold(T::zero(), T::max);
            if scale == T::zero() {
                continue;
            }
            for order in 1..200 {
                for (out_r, slot) in next.iter_mut().enumerate() {
                    let m = out_r as i64 - modes;
                    let mut acc: Cx<T> = czero();
                    for (r1, em) in e.iter().enumerate() {
                        let m2 = m - (r1 as i64 - modes);
                        if m2.abs() <= modes {
                            acc += *em * term[(m2 + modes) as usize];
                        }
                    }
                    *slot = acc * a / T::from_usize_lossy(order);
                }
                std::mem::swap(&mut term, &mut next);
                let mut size = T::zero();
                for (c, t) in col.iter_mut().zip(&term) {
                    *c += *t;
                    size = size.max(t.norm());
                }
                if size <= tiny * scale {
                    break;
                }
            }
            for (r, c) in col.iter().enumerate() {
                state.values[r * n + j] = *c;
            }
        }
        Ok(())
    }

    /// One Strang step: half transport, force, half transport.
    pub fn step(&mut self, state: &mut SpectralState<T>, dt: T) -> Result<()> {
        let half = dt / T::lit(2.0);
        self.free_transport(state, half);
        let e = field_from_state(state);
        self.force(state, &e, dt)?;
        self.free_transport(state, half);
        state.time += dt;
        Ok(())
    }

    /// Advances to `horizon` in recorded steps of `dt`, recording the field
    /// at every recorded step.
    pub fn run(&mut self, state: SpectralState<T>, horizon: T, dt: T, record: &Record) -> Result<DirectRun<T>> {
        if !(dt > T::zero()) {
            return Err(invalid("dt", "must be positive"));
        }
        let steps = (horizon / dt).round().to_usize().unwrap_or(0);
        let mut state = state;
        let t0 = state.time;
        let mut field = FieldSeries::new(dt, steps + 1);
        let mut columns: Vec<Vec<Cx<T>>> = vec![Vec::with_capacity(steps + 1); state.rows()];
        let mut mass = Vec::with_capacity(steps + 1);
        let mut snapshots = Vec::new();
        let sub = self.options.substeps;
        let h = dt / T::from_usize_lossy(sub);
        for i in 0..=steps {
            if i > 0 {
                for _ in 0..sub {
                    self.step(&mut state, h)?;
                }
                state.time = t0 + T::from_usize_lossy(i) * dt;
            }
            for (col, e) in columns.iter_mut().zip(field_from_state(&state)) {
                col.push(e);
            }
            mass.push(state.density(0));
            if let Some(every) = record.snapshot_every {
                if every > 0 && i % every == 0 {
                    snapshots.push(state.clone());
                }
            }
        }
        for (r, col) in columns.into_iter().enumerate() {
            let m = r as i64 - state.modes;
            field.insert(state.k_step * m, col);
        }
        Ok(DirectRun {
            field,
            mass,
            snapshots,
            final_state: state,
        })
    }
}

/// `E_hat(k') = f_hat(k', 0) / (i k')`, `E_hat(0) = 0`, indexed like the
/// state rows.
pub fn field_from_state<T: Real>(state: &SpectralState<T>) -> Vec<Cx<T>> {
    (-state.modes..=state.modes)
        .map(|m| {
            if m == 0 {
                czero()
            } else {
                state.density(m) / cx(T::zero(), T::from_i64_lossy(state.k_step * m))
            }
        })
        .collect()
}

/// One free-transport step with a freshly planned FFT.
pub fn free_transport_step<T: Real>(state: &mut SpectralState<T>, dt: T) {
    let mut s = Shifter::new(state.grid.len());
    let h = state.grid.step();
    for m in -state.modes..=state.modes {
        let cells = T::from_i64_lossy(state.k_step * m) * dt / h;
        s.shift(state.row_mut(m), cells);
    }
    state.time += dt;
}

/// One nonlinear Strang step.
pub fn nonlinear_step<T: Real>(state: &mut SpectralState<T>, eq: &Equilibrium<T>, dt: T) -> Result<()> {
    SpectralSolver::new(eq.clone(), &state.grid, SolverOptions::default())?.step(state, dt)
}

/// What to keep besides the field history.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Record {
    /// Keep the full state every this many recorded steps.
    pub snapshot_every: Option<usize>,
}

/// Output of [`run`].
#[derive(Clone, Debug)]
pub struct DirectRun<T> {
    pub field: FieldSeries<T>,
    /// `f_hat(t, 0, 0)` at every recorded step.
    pub mass: Vec<Cx<T>>,
    pub snapshots: Vec<SpectralState<T>>,
    pub final_state: SpectralState<T>,
}

impl<T: Real> DirectRun<T> {
    /// `max_t |f_hat(t,0,0) - f_hat(0,0,0)|`.
    pub fn mass_drift(&self) -> T {
        let m0 = self.mass.first().copied().unwrap_or_else(czero);
        self.mass.iter().map(|m| (*m - m0).norm()).fold(T::zero(), T::max)
    }
}

/// Runs the direct solver from `state` to `horizon`.
pub fn run<T: Real>(
    state: SpectralState<T>,
    eq: &Equilibrium<T>,
    horizon: T,
    dt: T,
    options: SolverOptions,
    record: &Record,
) -> Result<DirectRun<T>> {
    let grid = state.grid;
    SpectralSolver::new(eq.clone(), &grid, options)?.run(state, horizon, dt, record)
}
