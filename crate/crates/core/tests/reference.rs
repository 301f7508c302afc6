use echolab::cascade::{CascadeConfig, InitialData};
use echolab::equilibrium::Equilibrium;
use echolab::field::FieldSeries;
use echolab::grid::{EtaGrid, TimeGrid};
use echolab::reference::{init_from_modes, run, Record, SolverOptions, SpectralState};
use echolab::{bracket, Cx};

const LAMBDA0: f64 = 0.25;

fn setup(horizon: f64, eps: f64, waves: &[(i64, i64, Cx<f64>)]) -> (CascadeConfig<f64>, SpectralState<f64>) {
    let grid = EtaGrid::symmetric(30.0, 0.25).unwrap();
    let time = TimeGrid::new(0.05, horizon).unwrap();
    let data = InitialData::from_modes(grid, LAMBDA0, waves, true).unwrap();
    let cfg = CascadeConfig::new(1, 1, eps, LAMBDA0, 4, 4, 2, grid, time);
    let state = init_from_modes(&data, &cfg, 4).unwrap();
    (cfg, state)
}

fn two_waves() -> Vec<(i64, i64, Cx<f64>)> {
    vec![(1, 2, Cx::new(1.0, 0.0)), (1, -1, Cx::new(0.5, -0.5))]
}

fn options(linearized: bool, substeps: usize) -> SolverOptions {
    SolverOptions { linearized, substeps }
}

#[test]
fn mass_and_hermitian_structure_are_preserved() {
    let (_, state) = setup(6.0, 0.05, &two_waves());
    assert!(state.hermitian_defect() <= 1e-15);
    let out = run(state, &Equilibrium::gaussian(), 6.0, 0.05, options(false, 1), &Record::default()).unwrap();
    assert!(out.mass_drift() <= 1e-12, "mass drift {:e}", out.mass_drift());
    let sup = out.final_state.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(out.final_state.hermitian_defect() <= 1e-13 * sup, "{:e}", out.final_state.hermitian_defect());
    assert!(out.field.max_imaginary() <= 1e-14, "{:e}", out.field.max_imaginary());
}

#[test]
fn free_transport_phase_mixes_like_the_exact_solution() {
    let eps = 1e-3;
    let (_, state) = setup(10.0, eps, &[(1, 1, Cx::new(1.0, 0.0))]);
    let out = run(state, &Equilibrium::vanishing(), 10.0, 0.05, options(true, 1), &Record::default()).unwrap();
    let e1 = out.field.mode(1).unwrap();
    for (i, e) in e1.iter().enumerate() {
        let t = out.field.time(i);
        // rho(t) = eps f0(t - 1), E = rho / i.
        let rho = eps * (-2.0 * LAMBDA0 * bracket(&[1.0, 1.0, t - 1.0])).exp();
        let want = Cx::new(0.0, -rho);
        assert!((e - want).norm() <= 1e-9 * eps, "t = {t}: {e} vs {want}");
    }
    let tail: Vec<f64> = e1.iter().skip(40).map(|v| v.norm()).collect();
    assert!(tail.windows(2).all(|w| w[1] <= w[0]), "field must decay after the focus");
}

#[test]
fn snapshots_follow_the_recording_stride() {
    let (_, state) = setup(1.0, 1e-3, &two_waves());
    let record = Record { snapshot_every: Some(5) };
    let out = run(state, &Equilibrium::gaussian(), 1.0, 0.05, options(false, 1), &record).unwrap();
    let times: Vec<f64> = out.snapshots.iter().map(|s| s.time()).collect();
    assert_eq!(times.len(), 5);
    for (j, t) in times.iter().enumerate() {
        assert!((t - 0.25 * j as f64).abs() < 1e-12, "{times:?}");
    }
    let mut bytes = Vec::new();
    out.snapshots[1].write_snapshot(&mut bytes).unwrap();
    assert_eq!(&bytes[..8], b"ECHOSNAP");
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    assert_eq!(rows, out.snapshots[1].rows());
    assert_eq!(bytes.len(), 56 + 16 * rows * cols);
}

fn field_at(horizon: f64, dt: f64) -> FieldSeries<f64> {
    let (_, state) = setup(horizon, 0.05, &two_waves());
    let substeps = (0.2 / dt).round() as usize;
    run(state, &Equilibrium::gaussian(), horizon, 0.2, options(false, substeps), &Record::default())
        .unwrap()
        .field
}

fn max_diff(a: &FieldSeries<f64>, b: &FieldSeries<f64>) -> f64 {
    a.modes()
        .flat_map(|(m, v)| (0..v.len()).map(move |i| (v[i] - b.value(m, i)).norm()))
        .fold(0.0, f64::max)
}

#[test]
fn strang_splitting_converges_at_second_order() {
    let horizon = 4.0;
    let reference = field_at(horizon, 0.2 / 32.0);
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&dt| max_diff(&field_at(horizon, dt), &reference))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..2.3).contains(&order), "errors {errs:?}, observed order {order}");
    }
}
