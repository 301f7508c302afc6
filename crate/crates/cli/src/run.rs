//! Pipelines behind each subcommand. Every `*_results` function returns
//! typed results; [`run_experiment`] writes them out.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use echolab::cascade::CascadeState;
use echolab::diagnostics::{
    assign_orders, compare_fields, detect_echoes, echo_window, fit_field_decay, fit_sigma,
    predicted_echo_times, verify_layer_bound, BoundProfile, BoundReport, DecayFit, EchoEvent,
    ModeDifference, PredictedEcho,
};
use echolab::equilibrium::{penrose_margin, MarginReport};
use echolab::field::FieldSeries;
use echolab::kernel::{kernel_volterra_with, ContourKernel, ResolventKernel};
use echolab::reference::{init_from_modes, run, DirectRun, Record};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, FieldSource};
use crate::error::{CliError, CliResult};
use crate::export::{direct_rows, field_rows, write_csv, write_json, write_snapshot, Cell};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Penrose,
    Kernel,
    Cascade,
    Direct,
    Compare,
    Echoes,
    VerifyBounds,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Penrose,
        Mode::Kernel,
        Mode::Cascade,
        Mode::Direct,
        Mode::Compare,
        Mode::Echoes,
        Mode::VerifyBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Penrose => "penrose",
            Mode::Kernel => "kernel",
            Mode::Cascade => "cascade",
            Mode::Direct => "direct",
            Mode::Compare => "compare",
            Mode::Echoes => "echoes",
            Mode::VerifyBounds => "verify-bounds",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown mode `{s}`")))
    }
}

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

// ====================================================================
// Penrose
// ====================================================================

#[derive(Clone, Debug, Serialize)]
pub struct ZeroCount {
    pub k: i64,
    pub zeros: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PenroseOutput {
    pub k_max: i64,
    pub tau_max: f64,
    pub tau_step: f64,
    pub margin: f64,
    pub boundary_min: f64,
    pub argmin_k: i64,
    pub argmin_tau: f64,
    pub zeros_right: Vec<ZeroCount>,
    pub unstable: bool,
    pub tail_lower_bound: f64,
    pub max_adjacent_change: f64,
    pub resolution_warning: bool,
}

impl PenroseOutput {
    fn new(cfg: &ExperimentConfig, r: MarginReport<f64>) -> Self {
        Self {
            k_max: cfg.penrose.k_max,
            tau_max: cfg.penrose.tau_max,
            tau_step: cfg.penrose.tau_step,
            margin: r.margin,
            boundary_min: r.boundary_min,
            argmin_k: r.argmin_k,
            argmin_tau: r.argmin_tau,
            zeros_right: r.zeros_right.iter().map(|&(k, zeros)| ZeroCount { k, zeros }).collect(),
            unstable: r.unstable,
            tail_lower_bound: r.tail_lower_bound,
            max_adjacent_change: r.max_adjacent_change,
            resolution_warning: r.resolution_warning,
        }
    }
}

pub fn penrose_results(cfg: &ExperimentConfig) -> CliResult<PenroseOutput> {
    let eq = cfg.equilibrium()?;
    let report = penrose_margin(&eq, cfg.penrose.k_max, cfg.penrose.tau_max, &cfg.penrose_grid())?;
    Ok(PenroseOutput::new(cfg, report))
}

// ====================================================================
// Kernel
// ====================================================================

#[derive(Clone, Debug, Serialize)]
pub struct ContourAgreement {
    pub theta1: f64,
    pub cutoff: f64,
    pub max_abs_diff: f64,
    /// `max_t |G_contour - G_volterra| / max_t |G_volterra|`.
    pub max_rel_diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelSummary {
    pub k: i64,
    pub fitted_c1: f64,
    pub fitted_theta1: f64,
    pub fitted_rate: f64,
    pub residual: f64,
    pub sup_abs: f64,
    /// Samples where `|G| > envelope`.
    pub envelope_violations: usize,
    pub contour: Option<ContourAgreement>,
}

pub struct KernelOutput {
    pub kernels: Vec<ResolventKernel<f64>>,
    pub summary: Vec<KernelSummary>,
}

pub fn kernel_results(cfg: &ExperimentConfig) -> CliResult<KernelOutput> {
    let eq = cfg.equilibrium()?;
    let time = cfg.time_grid()?;
    let rule = cfg.rule.into();
    let contour = cfg.contour_spec();
    let built: Vec<(ResolventKernel<f64>, KernelSummary)> = cfg
        .kernel
        .modes
        .par_iter()
        .map(|&k| {
            let g = kernel_volterra_with(&eq, k, time, rule)?;
            let sup_abs = g.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
            let envelope_violations = g
                .values()
                .iter()
                .zip(time.times())
                .filter(|(v, t)| v.norm() > g.envelope(*t))
                .count();
            let agreement = if cfg.kernel.contour {
                let c = ContourKernel::new(&eq, k, &contour)?;
                let max_abs_diff = g
                    .values()
                    .iter()
                    .zip(time.times())
                    .map(|(v, t)| (c.eval(t) - v).norm())
                    .fold(0.0, f64::max);
                Some(ContourAgreement {
                    theta1: c.theta1(),
                    cutoff: c.cutoff(),
                    max_abs_diff,
                    max_rel_diff: if sup_abs > 0.0 { max_abs_diff / sup_abs } else { max_abs_diff },
                })
            } else {
                None
            };
            let summary = KernelSummary {
                k,
                fitted_c1: g.fitted_c1(),
                fitted_theta1: g.fitted_theta1(),
                fitted_rate: g.fitted_rate(),
                residual: g.residual(),
                sup_abs,
                envelope_violations,
                contour: agreement,
            };
            Ok((g, summary))
        })
        .collect::<echolab::Result<_>>()?;
    let (kernels, summary) = built.into_iter().unzip();
    Ok(KernelOutput { kernels, summary })
}

// ====================================================================
// Cascade and direct runs
// ====================================================================

pub fn cascade_results(cfg: &ExperimentConfig) -> CliResult<CascadeState<f64>> {
    let cascade = cfg.cascade_config()?;
    let data = cfg.initial_data(&cascade)?;
    Ok(CascadeState::build(cascade, cfg.equilibrium()?, &data)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerCount {
    pub p: u32,
    pub keys: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CascadeSummary {
    pub layers: Vec<LayerCount>,
    pub pruned: usize,
    pub out_of_range: u64,
    /// `max |Im E(t, x)|` of the synthesized field.
    pub max_imaginary: f64,
}

pub fn cascade_summary(state: &CascadeState<f64>, field: &FieldSeries<f64>) -> CascadeSummary {
    CascadeSummary {
        layers: (1..=state.completed())
            .map(|p| LayerCount {
                p,
                keys: state.keys_in_layer(p).count(),
            })
            .collect(),
        pruned: state.pruned().len(),
        out_of_range: state.out_of_range(),
        max_imaginary: field.max_imaginary(),
    }
}

/// Direct run on the same data as the cascade, with `epsilon` overriding
/// the configured amplitude.
pub fn direct_results_with(cfg: &ExperimentConfig, epsilon: f64) -> CliResult<DirectRun<f64>> {
    let mut cascade = cfg.cascade_config()?;
    cascade.epsilon = epsilon;
    let data = cfg.initial_data(&cascade)?;
    let eq = cfg.equilibrium()?;
    let state = init_from_modes(&data, &cascade, cfg.direct_modes())?;
    let record = Record {
        snapshot_every: cfg.direct.snapshot_every,
    };
    Ok(run(state, &eq, cfg.time.horizon, cfg.time.dt, cfg.solver_options(), &record)?)
}

pub fn direct_results(cfg: &ExperimentConfig) -> CliResult<DirectRun<f64>> {
    direct_results_with(cfg, cfg.epsilon)
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectSummary {
    pub modes: i64,
    pub grid_start: f64,
    pub grid_step: f64,
    pub grid_len: usize,
    pub mass_drift: f64,
    pub hermitian_defect: f64,
    pub max_imaginary: f64,
}

pub fn direct_summary(run: &DirectRun<f64>) -> DirectSummary {
    let g = run.final_state.grid();
    DirectSummary {
        modes: run.final_state.modes(),
        grid_start: g.start(),
        grid_step: g.step(),
        grid_len: g.len(),
        mass_drift: run.mass_drift(),
        hermitian_defect: run.final_state.hermitian_defect(),
        max_imaginary: run.field.max_imaginary(),
    }
}

// ====================================================================
// Compare
// ====================================================================

#[derive(Clone, Debug, Serialize)]
pub struct ModeDiff {
    pub mode: i64,
    pub max_abs_diff: f64,
    pub max_reference: f64,
    pub relative: f64,
}

impl From<ModeDifference<f64>> for ModeDiff {
    fn from(d: ModeDifference<f64>) -> Self {
        Self {
            mode: d.mode,
            max_abs_diff: d.max_diff,
            max_reference: d.max_reference,
            relative: d.relative(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    /// Modes carried by the cascade, against the direct run as reference.
    pub modes: Vec<ModeDiff>,
    pub max_relative: f64,
    pub max_abs_diff: f64,
    pub mass_drift: f64,
}

pub struct CompareOutput {
    pub cascade: CascadeState<f64>,
    pub cascade_field: FieldSeries<f64>,
    pub direct: DirectRun<f64>,
    pub report: CompareReport,
}

pub fn compare_results(cfg: &ExperimentConfig) -> CliResult<CompareOutput> {
    let cascade = cascade_results(cfg)?;
    let cascade_field = cascade.synthesize_field()?;
    let direct = direct_results(cfg)?;
    let diffs: Vec<ModeDiff> = compare_fields(&direct.field, &cascade_field)?
        .into_iter()
        .map(ModeDiff::from)
        .collect();
    let report = CompareReport {
        max_relative: diffs.iter().map(|d| d.relative).fold(0.0, f64::max),
        max_abs_diff: diffs.iter().map(|d| d.max_abs_diff).fold(0.0, f64::max),
        mass_drift: direct.mass_drift(),
        modes: diffs,
    };
    Ok(CompareOutput {
        cascade,
        cascade_field,
        direct,
        report,
    })
}

// ====================================================================
// Echoes, decay and bounds
// ====================================================================

#[derive(Clone, Debug, Serialize)]
pub struct EchoEntry {
    pub mode: i64,
    pub time: f64,
    pub amplitude: f64,
    pub predicted_time: Option<f64>,
    pub order: Option<u32>,
}

impl From<&EchoEvent<f64>> for EchoEntry {
    fn from(e: &EchoEvent<f64>) -> Self {
        Self {
            mode: e.mode,
            time: e.time,
            amplitude: e.amplitude,
            predicted_time: e.predicted_time,
            order: e.order,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayEntry {
    pub rate: f64,
    pub prefactor: f64,
    /// RMS residual of `ln sup_x |E|` about the fitted line.
    pub residual: f64,
    pub start: f64,
    pub end: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundEntry {
    pub p: u32,
    #[serde(rename = "M_f")]
    pub m_f: f64,
    #[serde(rename = "M_rho")]
    pub m_rho: f64,
    #[serde(rename = "M_f_est")]
    pub m_f_est: f64,
    pub keys: usize,
    /// `M_f^{1/p}`.
    pub growth: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsEntry {
    pub per_p: Vec<BoundEntry>,
    pub geometric: bool,
    pub delta: f64,
    pub sigma: f64,
    pub sigma_fitted: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EchoesReport {
    pub echoes: Vec<EchoEntry>,
    pub decay: Option<DecayEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_error: Option<String>,
    pub bounds: BoundsEntry,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub bounds: BoundsEntry,
}

pub fn bounds_results(cfg: &ExperimentConfig, state: &CascadeState<f64>) -> CliResult<(BoundReport<f64>, BoundsEntry)> {
    let delta = cfg.bounds.delta;
    let fitted = fit_sigma(state, cfg.lambda0, delta);
    let sigma = cfg
        .bounds
        .sigma
        .or(fitted.filter(|s| *s > 1.0))
        .unwrap_or(cfg.bounds.fallback_sigma);
    let profile = BoundProfile::new(cfg.lambda0, delta, sigma)?;
    let report = verify_layer_bound(state, &profile)?;
    let entry = BoundsEntry {
        per_p: report
            .per_p
            .iter()
            .zip(&report.growth)
            .map(|(b, g)| BoundEntry {
                p: b.p,
                m_f: b.m_f,
                m_rho: b.m_rho,
                m_f_est: b.m_f_est,
                keys: b.keys,
                growth: *g,
            })
            .collect(),
        geometric: report.geometric,
        delta,
        sigma,
        sigma_fitted: fitted,
    };
    Ok((report, entry))
}

pub struct EchoesOutput {
    pub predicted: Vec<PredictedEcho<f64>>,
    pub field: FieldSeries<f64>,
    pub half_field: FieldSeries<f64>,
    pub decay: echolab::Result<DecayFit<f64>>,
    pub bounds: BoundReport<f64>,
    pub report: EchoesReport,
}

/// Field histories at `epsilon` and `epsilon / 2` from the configured source.
pub fn echo_fields(cfg: &ExperimentConfig, state: &CascadeState<f64>) -> CliResult<(FieldSeries<f64>, FieldSeries<f64>)> {
    match cfg.echoes.source {
        FieldSource::Cascade => Ok((
            state.synthesize_field()?,
            state.synthesize_field_with(cfg.epsilon / 2.0, cfg.p_max)?,
        )),
        FieldSource::Direct => Ok((
            direct_results_with(cfg, cfg.epsilon)?.field,
            direct_results_with(cfg, cfg.epsilon / 2.0)?.field,
        )),
    }
}

pub fn echoes_results(cfg: &ExperimentConfig) -> CliResult<EchoesOutput> {
    let state = cascade_results(cfg)?;
    let (field, half_field) = echo_fields(cfg, &state)?;
    let waves = cfg.initial_data.waves();
    let predicted: Vec<PredictedEcho<f64>> = predicted_echo_times(&waves, cfg.big_k, cfg.big_l, cfg.echo_depth());
    let peak = field.sup_x_series().into_iter().fold(0.0, f64::max);
    let window = echo_window(cfg.time.dt, cfg.time.horizon);
    let mut detected = detect_echoes(&field, &predicted, cfg.echoes.noise_floor * peak, window);
    assign_orders(&mut detected, &half_field);
    let hermitian = cfg.initial_data.is_hermitian();
    let mut echoes: Vec<EchoEntry> = detected
        .all()
        .filter(|e| !hermitian || e.mode > 0)
        .map(EchoEntry::from)
        .collect();
    echoes.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.mode.cmp(&b.mode)));

    let last = predicted.iter().map(|p| p.time).fold(0.0, f64::max);
    let start = cfg.echoes.decay_start.unwrap_or(last);
    let end = cfg.echoes.decay_end.unwrap_or(cfg.time.horizon);
    let decay = fit_field_decay(&field, start, end);
    let (bounds, bounds_entry) = bounds_results(cfg, &state)?;
    let report = EchoesReport {
        echoes,
        decay: decay.as_ref().ok().map(|d| DecayEntry {
            rate: d.rate,
            prefactor: d.prefactor,
            residual: d.residual,
            start,
            end,
            samples: d.samples,
        }),
        decay_error: decay.as_ref().err().map(|e| e.to_string()),
        bounds: bounds_entry,
    };
    Ok(EchoesOutput {
        predicted,
        field,
        half_field,
        decay,
        bounds,
        report,
    })
}

// ====================================================================
// Export
// ====================================================================

pub const KERNEL_HEADER: [&str; 5] = ["k", "t", "re_G", "im_G", "envelope_bound"];
pub const LAYER_HEADER: [&str; 8] = ["k", "eta", "p", "t", "re_rho", "im_rho", "re_E", "im_E"];
pub const FIELD_HEADER: [&str; 5] = ["t", "mode", "re_E", "im_E", "sup_x_E"];
pub const DIRECT_HEADER: [&str; 4] = ["t", "k_prime", "re_E", "im_E"];

fn kernel_rows(kernels: &[ResolventKernel<f64>]) -> Vec<Vec<Cell>> {
    let mut rows = Vec::new();
    for g in kernels {
        for (v, t) in g.values().iter().zip(g.grid().times()) {
            rows.push(vec![g.k().into(), t.into(), v.re.into(), v.im.into(), g.envelope(t).into()]);
        }
    }
    rows
}

fn layer_rows(state: &CascadeState<f64>) -> Vec<Vec<Cell>> {
    let time = state.config().time;
    let mut rows = Vec::new();
    for (key, layer) in state.layers() {
        let h = &layer.history;
        for i in 0..time.len() {
            rows.push(vec![
                key.k.into(),
                key.eta.into(),
                key.p.into(),
                time.time(i).into(),
                h.rho[i].re.into(),
                h.rho[i].im.into(),
                h.field[i].re.into(),
                h.field[i].im.into(),
            ]);
        }
    }
    rows
}

fn write_cascade(dir: &Path, state: &CascadeState<f64>, field: &FieldSeries<f64>, files: &mut Vec<PathBuf>) -> CliResult<()> {
    let layers = dir.join("cascade_layers.csv");
    write_csv(&layers, &LAYER_HEADER, layer_rows(state))?;
    let synth = dir.join("cascade_field.csv");
    write_csv(&synth, &FIELD_HEADER, field_rows(field))?;
    let summary = dir.join("cascade_summary.json");
    write_json(&summary, &cascade_summary(state, field))?;
    files.extend([layers, synth, summary]);
    Ok(())
}

fn write_direct(dir: &Path, run: &DirectRun<f64>, files: &mut Vec<PathBuf>) -> CliResult<()> {
    let csv = dir.join("direct.csv");
    write_csv(&csv, &DIRECT_HEADER, direct_rows(&run.field))?;
    let summary = dir.join("direct_summary.json");
    write_json(&summary, &direct_summary(run))?;
    files.extend([csv, summary]);
    let dt = run.field.dt();
    for snap in &run.snapshots {
        let index = (snap.time() / dt).round() as u64;
        let path = dir.join("snapshots").join(format!("state_{index:06}.bin"));
        write_snapshot(&path, snap)?;
        files.push(path);
    }
    Ok(())
}

/// Runs `mode`, writes its artifacts and the resolved config into `dir`,
/// and returns the written paths.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let resolved = dir.join(RESOLVED_CONFIG);
    write_json(&resolved, cfg)?;
    let mut files = vec![resolved];
    match mode {
        Mode::Penrose => {
            let path = dir.join("penrose.json");
            write_json(&path, &penrose_results(cfg)?)?;
            files.push(path);
        }
        Mode::Kernel => {
            let out = kernel_results(cfg)?;
            let csv = dir.join("kernel.csv");
            write_csv(&csv, &KERNEL_HEADER, kernel_rows(&out.kernels))?;
            let summary = dir.join("kernel_summary.json");
            write_json(&summary, &out.summary)?;
            files.extend([csv, summary]);
        }
        Mode::Cascade => {
            let state = cascade_results(cfg)?;
            let field = state.synthesize_field()?;
            write_cascade(dir, &state, &field, &mut files)?;
        }
        Mode::Direct => {
            let run = direct_results(cfg)?;
            write_direct(dir, &run, &mut files)?;
        }
        Mode::Compare => {
            let out = compare_results(cfg)?;
            write_cascade(dir, &out.cascade, &out.cascade_field, &mut files)?;
            write_direct(dir, &out.direct, &mut files)?;
            let path = dir.join("compare.json");
            write_json(&path, &out.report)?;
            files.push(path);
        }
        Mode::Echoes => {
            let out = echoes_results(cfg)?;
            let path = dir.join("echoes.json");
            write_json(&path, &out.report)?;
            files.push(path);
        }
        Mode::VerifyBounds => {
            let state = cascade_results(cfg)?;
            let (_, bounds) = bounds_results(cfg, &state)?;
            let path = dir.join("bounds.json");
            write_json(&path, &BoundsReport { bounds })?;
            files.push(path);
        }
    }
    Ok(files)
}

/// Seeds for the single-wave control runs: the configured data restricted
/// to one listed wave (and its partner).
pub fn single_wave_configs(cfg: &ExperimentConfig) -> Vec<ExperimentConfig> {
    use crate::config::InitialDataSpec;
    match &cfg.initial_data {
        InitialDataSpec::Modes { waves, hermitian } => waves
            .iter()
            .map(|w| {
                let mut c = cfg.clone();
                c.initial_data = InitialDataSpec::Modes {
                    waves: vec![*w],
                    hermitian: *hermitian,
                };
                c
            })
            .collect(),
        InitialDataSpec::Uniform { .. } => Vec::new(),
    }
}
