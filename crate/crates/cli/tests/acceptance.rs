//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILING` are run in full and reported as FAIL
//! with their measured values. The binary exits nonzero when any other
//! criterion fails, or when a known-failing one unexpectedly passes.
//!
//! Tolerances are pinned below and never derived from the run itself.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use echolab::diagnostics::{detect_echoes, echo_window, fit_field_decay, predicted_echo_times, EchoReport};
use echolab::field::FieldSeries;
use echolab_cli::run::{
    bounds_results, cascade_results, compare_results, direct_results, direct_results_with, kernel_results, penrose_results, single_wave_configs,
};
use echolab_cli::{parse_config, run_experiment, ExperimentConfig, Mode};

// ====================================================================
// Pinned tolerances
// ====================================================================

const KERNEL_ROUTE_REL: f64 = 1e-5;
const KERNEL_RUNTIME: Duration = Duration::from_secs(60);
const RATE_RATIO_MIN: f64 = 1.5;
const LINEAR_REL: f64 = 1e-4;
const NONLINEAR_REL: f64 = 1e-3;
const NONLINEAR_RUNTIME: Duration = Duration::from_secs(600);
const ECHO_TIME: f64 = 0.5;
const ECHO_MODE: i64 = 2;
const ECHO_RATIO: (f64, f64) = (3.6, 4.4);
/// Ten percent of the signal, as an RMS residual of `ln sup_x |E|`.
const DECAY_RESIDUAL: f64 = 0.095_310_179_804_324_87;
const GROWTH_SLACK: f64 = 1.2;
const KL_CHANGE: f64 = 2.0;
/// `min_tau |D(i tau, 1)|` for `e^{-v^2/2}`, from an independent adaptive
/// quadrature of `1 + int_0^inf e^{-i tau t} t sqrt(2 pi) e^{-t^2/2} dt`
/// minimised over `tau` (minimiser `tau = -2.62746`).
const GAUSSIAN_MARGIN: f64 = 0.484_216_503_46;
const MARGIN_REGRESSION_REL: f64 = 1e-6;
const MARGIN_REFINEMENT_REL: f64 = 0.01;
const TWO_STREAM_MARGIN: f64 = 1e-2;
const MASS_DRIFT: f64 = 1e-10;
const MAX_IMAGINARY: f64 = 1e-12;

const KNOWN_FAILING: [&str; 4] = ["5", "6", "7", "8b"];

// ====================================================================
// Configurations
// ====================================================================

fn config(text: &str) -> ExperimentConfig {
    parse_config(text, Path::new("acceptance.json"), Path::new(".")).expect("acceptance config")
}

fn run4_text(big_k: i64, big_l: i64) -> String {
    format!(
        r#"{{
            "K": {big_k}, "L": {big_l}, "epsilon": 1e-3,
            "lambda0": 0.25, "p_max": 4, "k_max": 8, "eta_max": 8,
            "time": {{"dt": 0.05, "horizon": 20.0}},
            "eta_grid": {{"range": 60.0, "step": 0.25}},
            "initial_data": {{"kind": "modes", "waves": [{{"k": 1, "eta": 2}}, {{"k": 1, "eta": -1}}]}},
            "direct": {{"modes": 8, "substeps": 1}},
            "echoes": {{"source": "direct"}}
        }}"#
    )
}

fn run4() -> ExperimentConfig {
    config(&run4_text(1, 1))
}

// ====================================================================
// Reporting
// ====================================================================

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn report(outcomes: &[Outcome]) -> bool {
    let mut ok = true;
    for o in outcomes {
        let known = KNOWN_FAILING.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (known)",
            (true, true) => "PASS (unexpected)",
        };
        println!("criterion {:<3} {:<17} {}: {}", o.id, tag, o.title, o.detail);
        ok &= o.pass != known;
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    ok
}

// ====================================================================
// Criteria
// ====================================================================

fn kernels() -> Vec<Outcome> {
    let cfg = config(r#"{"K": 1, "L": 1, "epsilon": 1e-3, "time": {"dt": 0.01, "horizon": 10.0}}"#);
    let start = Instant::now();
    let out = kernel_results(&cfg).expect("kernel run");
    let elapsed = start.elapsed();
    let worst = out
        .summary
        .iter()
        .map(|s| s.contour.as_ref().expect("contour route").max_rel_diff)
        .fold(0.0, f64::max);
    let one = Outcome {
        id: "1",
        title: "kernel routes agree",
        pass: worst <= KERNEL_ROUTE_REL && elapsed < KERNEL_RUNTIME,
        detail: format!(
            "max relative difference {worst:.3e} (<= {KERNEL_ROUTE_REL:e}), k = 1..5, {:.1} s (< {} s)",
            elapsed.as_secs_f64(),
            KERNEL_RUNTIME.as_secs()
        ),
    };
    let theta_ok = out.summary.iter().all(|s| s.fitted_theta1 > 0.0);
    let violations: usize = out.summary.iter().map(|s| s.envelope_violations).sum();
    let rate = |k: i64| out.summary.iter().find(|s| s.k == k).expect("mode").fitted_rate;
    let ratio = rate(2) / rate(1);
    let two = Outcome {
        id: "2",
        title: "kernel decay",
        pass: theta_ok && violations == 0 && ratio >= RATE_RATIO_MIN,
        detail: format!(
            "theta1 > 0: {theta_ok}, envelope violations {violations}, rate(2)/rate(1) = {ratio:.3} (>= {RATE_RATIO_MIN})"
        ),
    };
    vec![one, two]
}

fn worst_relative(reference: &FieldSeries<f64>, candidate: &FieldSeries<f64>) -> f64 {
    echolab::diagnostics::compare_fields(reference, candidate)
        .expect("aligned histories")
        .iter()
        .map(|d| d.relative())
        .fold(0.0, f64::max)
}

fn linear(drifts: &mut Vec<f64>) -> Outcome {
    let cfg = config(
        r#"{
            "K": 1, "L": 1, "epsilon": 1e-4, "lambda0": 0.25, "p_max": 1,
            "time": {"dt": 0.05, "horizon": 20.0},
            "initial_data": {"kind": "modes", "waves": [{"k": 1, "eta": 1}]},
            "direct": {"modes": 1, "linearized": true, "substeps": 8}
        }"#,
    );
    let cascade = cascade_results(&cfg).expect("cascade").synthesize_field().expect("field");
    let direct = direct_results(&cfg).expect("direct run");
    drifts.push(direct.mass_drift());
    let rel = worst_relative(&direct.field, &cascade);
    Outcome {
        id: "3",
        title: "linear cross-check",
        pass: rel <= LINEAR_REL,
        detail: format!("relative sup difference {rel:.3e} (<= {LINEAR_REL:e})"),
    }
}

struct Run4 {
    cfg: ExperimentConfig,
    field: FieldSeries<f64>,
    half_field: FieldSeries<f64>,
    cascade: echolab::cascade::CascadeState<f64>,
}

fn nonlinear(drifts: &mut Vec<f64>, imag: &mut f64) -> (Outcome, Run4) {
    let cfg = run4();
    let start = Instant::now();
    let out = compare_results(&cfg).expect("compare run");
    let elapsed = start.elapsed();
    drifts.push(out.direct.mass_drift());
    *imag = imag.max(out.cascade_field.max_imaginary());
    let per_mode: Vec<String> = out
        .report
        .modes
        .iter()
        .filter(|d| d.mode > 0)
        .map(|d| format!("{}:{:.2e}", d.mode, d.relative))
        .collect();
    let outcome = Outcome {
        id: "4",
        title: "nonlinear equivalence",
        pass: out.report.max_relative <= NONLINEAR_REL && elapsed < NONLINEAR_RUNTIME,
        detail: format!(
            "per-mode relative [{}] (<= {NONLINEAR_REL:e}), {:.1} s (< {} s)",
            per_mode.join(" "),
            elapsed.as_secs_f64(),
            NONLINEAR_RUNTIME.as_secs()
        ),
    };
    let half = direct_results_with(&cfg, cfg.epsilon / 2.0).expect("half-amplitude run");
    drifts.push(half.mass_drift());
    let run = Run4 {
        field: out.direct.field,
        half_field: half.field,
        cascade: out.cascade,
        cfg,
    };
    (outcome, run)
}

fn peaks(cfg: &ExperimentConfig, field: &FieldSeries<f64>) -> EchoReport<f64> {
    let waves = cfg.initial_data.waves();
    let predicted = predicted_echo_times(&waves, cfg.big_k, cfg.big_l, cfg.echo_depth());
    let peak = field.sup_x_series().into_iter().fold(0.0, f64::max);
    let window = echo_window(cfg.time.dt, cfg.time.horizon);
    detect_echoes(field, &predicted, cfg.echoes.noise_floor * peak, window)
}

/// Peak on `ECHO_MODE` within `5 dt` of `ECHO_TIME`.
fn echo_near(cfg: &ExperimentConfig, report: &EchoReport<f64>) -> Option<(f64, f64)> {
    report
        .all()
        .filter(|e| e.mode == ECHO_MODE && (e.time - ECHO_TIME).abs() <= 5.0 * cfg.time.dt)
        .map(|e| (e.time, e.amplitude))
        .next()
}

fn mode_peaks(report: &EchoReport<f64>) -> String {
    let mut times: Vec<f64> = report.all().filter(|e| e.mode == ECHO_MODE).map(|e| e.time).collect();
    times.sort_by(f64::total_cmp);
    let list: Vec<String> = times.iter().map(|t| format!("{t:.3}")).collect();
    format!("[{}]", list.join(", "))
}

fn echoes(run: &Run4, drifts: &mut Vec<f64>) -> Outcome {
    let cfg = &run.cfg;
    let full = peaks(cfg, &run.field);
    let half = peaks(cfg, &run.half_field);
    let found = echo_near(cfg, &full);
    let ratio = match (found, echo_near(cfg, &half)) {
        (Some((_, a)), Some((_, b))) if b > 0.0 => Some(a / b),
        _ => None,
    };
    let mut controls = Vec::new();
    for c in single_wave_configs(cfg) {
        let d = direct_results(&c).expect("control run");
        drifts.push(d.mass_drift());
        let r = peaks(&c, &d.field);
        controls.push((echo_near(&c, &r).is_none(), mode_peaks(&r)));
    }
    let controls_clean = controls.iter().all(|c| c.0);
    let ratio_ok = ratio.is_some_and(|r| r >= ECHO_RATIO.0 && r <= ECHO_RATIO.1);
    Outcome {
        id: "5",
        title: "echo phenomenology",
        pass: found.is_some() && controls_clean && ratio_ok,
        detail: format!(
            "mode-{ECHO_MODE} peak within 5 dt of {ECHO_TIME}: {:?}; mode-{ECHO_MODE} peaks {}; controls {}; ratio {:?} (in {ECHO_RATIO:?})",
            found.map(|f| f.0),
            mode_peaks(&full),
            controls.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join(" / "),
            ratio,
        ),
    }
}

fn decay(run: &Run4) -> Outcome {
    let cfg = &run.cfg;
    let predicted = predicted_echo_times::<f64>(&cfg.initial_data.waves(), cfg.big_k, cfg.big_l, cfg.echo_depth());
    let last = predicted.iter().map(|p| p.time).fold(0.0, f64::max);
    match fit_field_decay(&run.field, last, cfg.time.horizon) {
        Ok(fit) => Outcome {
            id: "6",
            title: "Landau damping",
            pass: fit.rate > 0.0 && fit.residual < DECAY_RESIDUAL,
            detail: format!(
                "window [{last}, {}], rate {:.4} (> 0), RMS log residual {:.4} (< {DECAY_RESIDUAL:.4})",
                cfg.time.horizon, fit.rate, fit.residual
            ),
        },
        Err(e) => Outcome {
            id: "6",
            title: "Landau damping",
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn bounds(run: &Run4) -> Outcome {
    let (base, _) = bounds_results(&run.cfg, &run.cascade).expect("bounds");
    let cfg4 = config(&run4_text(4, 4));
    let state4 = cascade_results(&cfg4).expect("K = L = 4 cascade");
    let (other, _) = bounds_results(&cfg4, &state4).expect("bounds");
    let finite = base.per_p.iter().all(|b| b.m_f.is_finite());
    let bounded = base.growth.windows(2).skip(1).all(|w| w[1] <= GROWTH_SLACK * w[0]);
    let changes: Vec<f64> = base
        .per_p
        .iter()
        .zip(&other.per_p)
        .map(|(a, b)| a.m_f.max(b.m_f) / a.m_f.min(b.m_f))
        .collect();
    let stable = changes.iter().all(|c| *c < KL_CHANGE);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    Outcome {
        id: "7",
        title: "bound structure",
        pass: finite && bounded && stable,
        detail: format!(
            "M_p = [{}], M_p^(1/p) = [{}] (slack {GROWTH_SLACK}), K=L=4 change [{}] (< {KL_CHANGE}x)",
            fmt(&base.per_p.iter().map(|b| b.m_f).collect::<Vec<_>>()),
            fmt(&base.growth),
            fmt(&changes),
        ),
    }
}

fn penrose() -> Vec<Outcome> {
    let coarse = penrose_results(&config(r#"{"K": 1, "L": 1, "epsilon": 1e-3}"#)).expect("penrose");
    let fine = penrose_results(&config(
        r#"{"K": 1, "L": 1, "epsilon": 1e-3, "penrose": {"tau_step": 0.005}}"#,
    ))
    .expect("penrose");
    let regression = (coarse.margin - GAUSSIAN_MARGIN).abs() / GAUSSIAN_MARGIN;
    let refinement = (coarse.margin - fine.margin).abs() / coarse.margin;
    let gaussian = Outcome {
        id: "8a",
        title: "Penrose margin (Gaussian)",
        pass: coarse.margin > 0.0 && regression <= MARGIN_REGRESSION_REL && refinement <= MARGIN_REFINEMENT_REL,
        detail: format!(
            "margin {:.10} vs {GAUSSIAN_MARGIN} (rel {regression:.1e}), refinement change {refinement:.1e} (<= {MARGIN_REFINEMENT_REL})",
            coarse.margin
        ),
    };
    let ts = penrose_results(&config(
        r#"{"K": 1, "L": 1, "epsilon": 1e-3, "equilibrium": {"kind": "two_stream", "a": 3.0}}"#,
    ))
    .expect("penrose");
    let two_stream = Outcome {
        id: "8b",
        title: "Penrose margin (two-stream a=3)",
        pass: ts.margin < TWO_STREAM_MARGIN,
        detail: format!("margin {:.4} (< {TWO_STREAM_MARGIN:e}), unstable = {}", ts.margin, ts.unstable),
    };
    vec![gaussian, two_stream]
}

fn conservation(drifts: &[f64], imag: f64) -> Outcome {
    let worst = drifts.iter().copied().fold(0.0, f64::max);
    Outcome {
        id: "9",
        title: "conservation and symmetry",
        pass: worst <= MASS_DRIFT && imag <= MAX_IMAGINARY,
        detail: format!(
            "mass drift {worst:.2e} over {} direct runs (<= {MASS_DRIFT:e}), max Im E {imag:.2e} (<= {MAX_IMAGINARY:e})",
            drifts.len()
        ),
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("output dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).expect("prefix").display().to_string();
                out.push((name, fs::read(&path).expect("output file")));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let cfg = run4();
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    run_experiment(&cfg, Mode::Compare, a.path()).expect("first compare");
    run_experiment(&cfg, Mode::Compare, b.path()).expect("second compare");
    let (fa, fb) = (files(a.path()), files(b.path()));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    Outcome {
        id: "10",
        title: "determinism",
        pass: !fa.is_empty() && fa == fb,
        detail: format!("{} files compared byte for byte: {}", fa.len(), names.join(", ")),
    }
}

fn main() {
    let mut drifts = Vec::new();
    let mut imag = 0.0;
    let mut outcomes = kernels();
    outcomes.push(linear(&mut drifts));
    let (four, run) = nonlinear(&mut drifts, &mut imag);
    outcomes.push(four);
    outcomes.push(echoes(&run, &mut drifts));
    outcomes.push(decay(&run));
    outcomes.push(bounds(&run));
    outcomes.extend(penrose());
    let half = run
        .cascade
        .synthesize_field_with(run.cfg.epsilon / 2.0, run.cfg.p_max)
        .expect("cascade field at eps/2");
    imag = imag.max(half.max_imaginary());
    outcomes.push(conservation(&drifts, imag));
    outcomes.push(determinism());
    if !report(&outcomes) {
        std::process::exit(1);
    }
}
