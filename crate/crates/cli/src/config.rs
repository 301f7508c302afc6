//! Experiment configuration: JSON in, validated and fully resolved
//! [`ExperimentConfig`] out.

use std::fs;
use std::path::{Path, PathBuf};

use echolab::cascade::{CascadeConfig, InitialData};
use echolab::equilibrium::{Equilibrium, GridSpec, SpectrumTable};
use echolab::grid::{EtaGrid, TimeGrid};
use echolab::kernel::ContourSpec;
use echolab::quadrature::TimeRule;
use echolab::reference::SolverOptions;
use echolab::{Cx, Error};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Background distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EquilibriumSpec {
    Gaussian {
        #[serde(default = "one")]
        theta0: f64,
    },
    TwoStream {
        a: f64,
        /// Defaults to `sqrt(2 pi)`, the mass of `e^{-v^2/2}`.
        #[serde(default)]
        mass: Option<f64>,
        #[serde(default = "one")]
        theta0: f64,
    },
    /// CSV with columns `eta, re_mu_hat, im_mu_hat`; relative paths are
    /// taken from the config file's directory.
    Table {
        path: PathBuf,
        #[serde(default = "one")]
        theta0: f64,
    },
}

impl Default for EquilibriumSpec {
    fn default() -> Self {
        Self::Gaussian { theta0: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaGridSpec {
    /// Half-width of the symmetric `eta'` grid.
    pub range: f64,
    pub step: f64,
}

impl Default for EtaGridSpec {
    fn default() -> Self {
        Self { range: 60.0, step: 0.25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub horizon: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self { dt: 0.05, horizon: 20.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSpec {
    Trapezoid,
    #[default]
    Cubic,
}

impl From<RuleSpec> for TimeRule {
    fn from(r: RuleSpec) -> Self {
        match r {
            RuleSpec::Trapezoid => TimeRule::Trapezoid,
            RuleSpec::Cubic => TimeRule::Cubic,
        }
    }
}

/// One listed initial wave `scale * e^{-2 lambda0 <k, eta, eta'>}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub k: i64,
    pub eta: i64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub scale_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDataSpec {
    /// Every `1 <= |k| <= k_max`, `|eta| <= eta_max` at the bound.
    Uniform {
        #[serde(default = "one_i64")]
        k_max: i64,
        #[serde(default)]
        eta_max: i64,
        #[serde(default = "one")]
        scale: f64,
    },
    Modes {
        waves: Vec<WaveSpec>,
        /// Add the conjugate partner `(-k, -eta)` of every listed wave.
        #[serde(default = "yes")]
        hermitian: bool,
    },
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        Self::Uniform {
            k_max: 1,
            eta_max: 0,
            scale: 1.0,
        }
    }
}

impl InitialDataSpec {
    /// `(k, eta)` of the listed waves and, for Hermitian lists, their partners.
    pub fn waves(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        match self {
            Self::Uniform { k_max, eta_max, .. } => {
                for k in -k_max..=*k_max {
                    if k != 0 {
                        out.extend((-eta_max..=*eta_max).map(|e| (k, e)));
                    }
                }
            }
            Self::Modes { waves, hermitian } => {
                for w in waves {
                    out.push((w.k, w.eta));
                    if *hermitian {
                        out.push((-w.k, -w.eta));
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_hermitian(&self) -> bool {
        match self {
            Self::Uniform { .. } => true,
            Self::Modes { hermitian, .. } => *hermitian,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenroseSpec {
    pub k_max: i64,
    pub tau_max: f64,
    pub tau_step: f64,
    /// Largest tolerated jump of `|D|` between adjacent samples.
    pub jump_tol: f64,
    pub refine: bool,
}

impl Default for PenroseSpec {
    fn default() -> Self {
        Self {
            k_max: 8,
            tau_max: 20.0,
            tau_step: 0.01,
            jump_tol: 0.05,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub modes: Vec<i64>,
    /// Evaluate the contour route at every sample and report the agreement.
    pub contour: bool,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            modes: (1..=5).collect(),
            contour: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectSpec {
    /// Spatial modes `|k| <= modes` (in units of `K`); defaults to `k_max`.
    pub modes: Option<i64>,
    pub substeps: usize,
    pub linearized: bool,
    /// Write a binary snapshot every this many recorded steps.
    pub snapshot_every: Option<usize>,
}

impl Default for DirectSpec {
    fn default() -> Self {
        Self {
            modes: None,
            substeps: 1,
            linearized: false,
            snapshot_every: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    #[default]
    Direct,
    Cascade,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoSpec {
    pub source: FieldSource,
    /// Waves per predicted combination; defaults to `p_max`.
    pub depth: Option<usize>,
    /// Peaks below this fraction of `max_t sup_x |E|` are ignored.
    pub noise_floor: f64,
    /// Decay window; starts after the last predicted echo unless given.
    pub decay_start: Option<f64>,
    pub decay_end: Option<f64>,
}

impl Default for EchoSpec {
    fn default() -> Self {
        Self {
            source: FieldSource::Direct,
            depth: None,
            noise_floor: 1e-6,
            decay_start: None,
            decay_end: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSpec {
    pub delta: f64,
    /// Fitted from the densities when unset; falls back to
    /// `fallback_sigma` if the fit does not exceed 1.
    pub sigma: Option<f64>,
    pub fallback_sigma: f64,
}

impl Default for BoundSpec {
    fn default() -> Self {
        Self {
            delta: 0.1,
            sigma: None,
            fallback_sigma: 1.1,
        }
    }
}

/// Raw file contents: the three physics parameters are required, the
/// rest default.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "K")]
    big_k: Option<i64>,
    #[serde(rename = "L")]
    big_l: Option<i64>,
    epsilon: Option<f64>,
    lambda0: Option<f64>,
    l_ratio: Option<f64>,
    k_max: Option<i64>,
    eta_max: Option<i64>,
    p_max: Option<u32>,
    prune_floor: Option<f64>,
    tol: Option<f64>,
    rule: Option<RuleSpec>,
    equilibrium: Option<EquilibriumSpec>,
    eta_grid: Option<EtaGridSpec>,
    time: Option<TimeSpec>,
    initial_data: Option<InitialDataSpec>,
    penrose: Option<PenroseSpec>,
    kernel: Option<KernelSpec>,
    direct: Option<DirectSpec>,
    echoes: Option<EchoSpec>,
    bounds: Option<BoundSpec>,
    output_dir: Option<PathBuf>,
}

/// Fully resolved experiment. Serializes to the echo written next to the
/// outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(rename = "K")]
    pub big_k: i64,
    #[serde(rename = "L")]
    pub big_l: i64,
    pub epsilon: f64,
    pub lambda0: f64,
    pub l_ratio: f64,
    pub k_max: i64,
    pub eta_max: i64,
    pub p_max: u32,
    pub prune_floor: f64,
    /// Accuracy target of the contour kernel.
    pub tol: f64,
    pub rule: RuleSpec,
    pub equilibrium: EquilibriumSpec,
    pub eta_grid: EtaGridSpec,
    pub time: TimeSpec,
    pub initial_data: InitialDataSpec,
    pub penrose: PenroseSpec,
    pub kernel: KernelSpec,
    pub direct: DirectSpec,
    pub echoes: EchoSpec,
    pub bounds: BoundSpec,
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}

fn one_i64() -> i64 {
    1
}

fn yes() -> bool {
    true
}

/// Reads, resolves and validates a config file.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, path, &base)
}

/// As [`load_config`] on in-memory text; `origin` only labels errors.
pub fn parse_config(text: &str, origin: &Path, base_dir: &Path) -> CliResult<ExperimentConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let cfg = ExperimentConfig {
        big_k: raw.big_k.ok_or_else(|| CliError::validation("K", "required"))?,
        big_l: raw.big_l.ok_or_else(|| CliError::validation("L", "required"))?,
        epsilon: raw.epsilon.ok_or_else(|| CliError::validation("epsilon", "required"))?,
        lambda0: raw.lambda0.unwrap_or(0.25),
        l_ratio: raw.l_ratio.unwrap_or(1.0),
        k_max: raw.k_max.unwrap_or(8),
        eta_max: raw.eta_max.unwrap_or(8),
        p_max: raw.p_max.unwrap_or(4),
        prune_floor: raw.prune_floor.unwrap_or(1e-14),
        tol: raw.tol.unwrap_or(1e-9),
        rule: raw.rule.unwrap_or_default(),
        equilibrium: raw.equilibrium.unwrap_or_default(),
        eta_grid: raw.eta_grid.unwrap_or_default(),
        time: raw.time.unwrap_or_default(),
        initial_data: raw.initial_data.unwrap_or_default(),
        penrose: raw.penrose.unwrap_or_default(),
        kernel: raw.kernel.unwrap_or_default(),
        direct: raw.direct.unwrap_or_default(),
        echoes: raw.echoes.unwrap_or_default(),
        bounds: raw.bounds.unwrap_or_default(),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        base_dir: base_dir.to_path_buf(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(field, format!("must be positive and finite, got {v}")))
    }
}

/// Core parameter errors become validation errors on the same field.
fn as_validation(err: Error) -> CliError {
    match err {
        Error::InvalidParameter { name, reason } => CliError::validation(name, reason),
        other => CliError::Compute(other),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        positive("epsilon", self.epsilon)?;
        positive("lambda0", self.lambda0)?;
        positive("l_ratio", self.l_ratio)?;
        positive("tol", self.tol)?;
        positive("eta_grid.range", self.eta_grid.range)?;
        positive("eta_grid.step", self.eta_grid.step)?;
        positive("time.dt", self.time.dt)?;
        positive("time.horizon", self.time.horizon)?;
        positive("penrose.tau_max", self.penrose.tau_max)?;
        positive("penrose.tau_step", self.penrose.tau_step)?;
        positive("penrose.jump_tol", self.penrose.jump_tol)?;
        positive("echoes.noise_floor", self.echoes.noise_floor)?;
        positive("bounds.delta", self.bounds.delta)?;
        if self.big_l as f64 > self.l_ratio * self.big_k as f64 {
            return Err(CliError::validation(
                "L",
                format!("L = {} exceeds l_ratio * K = {} * {}", self.big_l, self.l_ratio, self.big_k),
            ));
        }
        if self.penrose.k_max < 1 {
            return Err(CliError::validation("penrose.k_max", "must be at least 1"));
        }
        if self.kernel.modes.contains(&0) {
            return Err(CliError::validation("kernel.modes", "mode 0 has no kernel"));
        }
        if self.direct.substeps == 0 {
            return Err(CliError::validation("direct.substeps", "must be at least 1"));
        }
        if self.direct.snapshot_every == Some(0) {
            return Err(CliError::validation("direct.snapshot_every", "must be at least 1"));
        }
        if let Some(m) = self.direct.modes {
            if m < 1 {
                return Err(CliError::validation("direct.modes", "must be at least 1"));
            }
        }
        if let Some(s) = self.bounds.sigma {
            if !(s > 1.0) {
                return Err(CliError::validation("bounds.sigma", "must exceed 1"));
            }
        }
        if !(self.bounds.fallback_sigma > 1.0) {
            return Err(CliError::validation("bounds.fallback_sigma", "must exceed 1"));
        }
        if let (Some(a), Some(b)) = (self.echoes.decay_start, self.echoes.decay_end) {
            if !(b > a) {
                return Err(CliError::validation("echoes.decay_end", "must exceed decay_start"));
            }
        }
        if let InitialDataSpec::Modes { waves, .. } = &self.initial_data {
            if waves.is_empty() {
                return Err(CliError::validation("initial_data.waves", "at least one wave is needed"));
            }
        }
        let eq = self.equilibrium()?;
        let cascade = self.cascade_config()?;
        cascade.validate(&eq).map_err(as_validation)?;
        self.initial_data(&cascade)?;
        Ok(())
    }

    pub fn equilibrium(&self) -> CliResult<Equilibrium<f64>> {
        let eq = match &self.equilibrium {
            EquilibriumSpec::Gaussian { theta0 } => Equilibrium::gaussian_with_rate(*theta0),
            EquilibriumSpec::TwoStream { a, mass, theta0 } => {
                Equilibrium::two_stream_with(*a, mass.unwrap_or((2.0 * std::f64::consts::PI).sqrt()), *theta0)
            }
            EquilibriumSpec::Table { path, theta0 } => {
                let table = read_table(&self.base_dir.join(path))?;
                Equilibrium::from_table(table, *theta0)
            }
        };
        eq.map_err(as_validation)
    }

    pub fn eta_grid(&self) -> CliResult<EtaGrid<f64>> {
        EtaGrid::symmetric(self.eta_grid.range, self.eta_grid.step).map_err(as_validation)
    }

    pub fn time_grid(&self) -> CliResult<TimeGrid<f64>> {
        TimeGrid::new(self.time.dt, self.time.horizon).map_err(as_validation)
    }

    pub fn cascade_config(&self) -> CliResult<CascadeConfig<f64>> {
        let mut c = CascadeConfig::new(
            self.big_k,
            self.big_l,
            self.epsilon,
            self.lambda0,
            self.k_max,
            self.eta_max,
            self.p_max,
            self.eta_grid()?,
            self.time_grid()?,
        );
        c.l_ratio = self.l_ratio;
        c.rule = self.rule.into();
        c.prune_floor = self.prune_floor;
        Ok(c)
    }

    pub fn initial_data(&self, cascade: &CascadeConfig<f64>) -> CliResult<InitialData<f64>> {
        let grid = cascade.eta_grid;
        let data = match &self.initial_data {
            InitialDataSpec::Uniform { k_max, eta_max, scale } => {
                if *k_max < 1 || *eta_max < 0 {
                    return Err(CliError::validation(
                        "initial_data",
                        "uniform data needs k_max >= 1 and eta_max >= 0",
                    ));
                }
                InitialData::uniform(grid, self.lambda0, *k_max, *eta_max, *scale)
            }
            InitialDataSpec::Modes { waves, hermitian } => {
                let list: Vec<(i64, i64, Cx<f64>)> = waves
                    .iter()
                    .map(|w| (w.k, w.eta, Cx::new(w.scale, w.scale_im)))
                    .collect();
                InitialData::from_modes(grid, self.lambda0, &list, *hermitian)
            }
        }
        .map_err(|e| match e {
            Error::InvalidParameter { reason, .. } => CliError::validation("initial_data", reason),
            other => CliError::Compute(other),
        })?;
        data.validate(self.lambda0)?;
        Ok(data)
    }

    pub fn direct_modes(&self) -> i64 {
        self.direct.modes.unwrap_or(self.k_max)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            linearized: self.direct.linearized,
            substeps: self.direct.substeps,
        }
    }

    pub fn contour_spec(&self) -> ContourSpec<f64> {
        ContourSpec {
            tol: self.tol,
            ..ContourSpec::default()
        }
    }

    pub fn penrose_grid(&self) -> GridSpec<f64> {
        GridSpec {
            tau_step: self.penrose.tau_step,
            tol: self.penrose.jump_tol,
            refine: self.penrose.refine,
        }
    }

    pub fn echo_depth(&self) -> usize {
        self.echoes.depth.unwrap_or(self.p_max as usize)
    }
}

#[derive(Deserialize)]
struct TableRow {
    eta: f64,
    re_mu_hat: f64,
    im_mu_hat: f64,
}

fn read_table(path: &Path) -> CliResult<SpectrumTable<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for rec in reader.deserialize::<TableRow>() {
        let r = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            CliError::Parse {
                path: path.to_path_buf(),
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        rows.push((r.eta, Cx::new(r.re_mu_hat, r.im_mu_hat)));
    }
    SpectrumTable::new(rows).map_err(as_validation)
}
