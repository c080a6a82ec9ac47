use corrsense_core::experiments::{
    derive_seed, emit_csv, emit_plot, linear_fit, mean_std, pairwise_sum, read_csv, render_plot, run_phase_transition,
    run_stability, PhaseTransitionSpec, PlotKind, ResultTable, SolverKind, StabilitySpec, Value,
    PHASE_TRANSITION_COLUMNS, STABILITY_COLUMNS,
};
use corrsense_core::{Family, ModelParams};
use proptest::prelude::*;

fn fraction(table: &ResultTable, s: usize, k: usize) -> f64 {
    let (si, ki, fi) = (
        table.column("s").unwrap(),
        table.column("k").unwrap(),
        table.column("success_fraction").unwrap(),
    );
    table
        .rows
        .iter()
        .find(|r| r[si] == Value::Int(s as i64) && r[ki] == Value::Int(k as i64))
        .and_then(|r| r[fi].as_f64())
        .unwrap()
}

#[test]
fn sparser_corruption_recovers_more_often() {
    let mut spec = PhaseTransitionSpec::new(ModelParams::new(Family::Mtx1, 128, 64, 0), vec![8, 12], vec![4, 8], 50);
    spec.master_seed = 3;
    let table = run_phase_transition(&spec).unwrap();
    assert_eq!(table.columns, PHASE_TRANSITION_COLUMNS.map(String::from).to_vec());
    assert_eq!(table.rows.len(), 4);
    let margin = 2.0 / 50f64.sqrt();
    for s in [8, 12] {
        let f = (fraction(&table, s, 4), fraction(&table, s, 8));
        assert!((0.0..=1.0).contains(&f.0) && (0.0..=1.0).contains(&f.1));
        assert!(f.0 >= f.1 - margin, "s = {s}: {f:?}");
    }
    for k in [4, 8] {
        assert!(fraction(&table, 8, k) >= fraction(&table, 12, k) - 3.0 / 50f64.sqrt());
    }
}

#[test]
fn cells_without_signal_always_succeed() {
    let spec = PhaseTransitionSpec::new(ModelParams::new(Family::Mtx1, 64, 32, 0), vec![0], vec![1, 2], 10);
    let table = run_phase_transition(&spec).unwrap();
    for k in [1, 2] {
        assert_eq!(fraction(&table, 0, k), 1.0);
    }
}

#[test]
fn failing_cells_become_nan() {
    // Mtx-II needs a power-of-two M, so every cell's model build fails.
    let spec = PhaseTransitionSpec::new(ModelParams::new(Family::Mtx2, 64, 24, 0), vec![1, 2], vec![1], 2);
    let table = run_phase_transition(&spec).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.numbers("success_fraction").unwrap().iter().all(|f| f.is_nan()));
}

#[test]
fn files_are_identical_across_pool_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = PhaseTransitionSpec::new(ModelParams::new(Family::PartialCirculant, 64, 32, 0), vec![2, 6], vec![1, 3], 6);
    spec.master_seed = 11;
    let mut stab = StabilitySpec::new(ModelParams::new(Family::Mtx1, 64, 32, 0), 2, 2, vec![0.0, 0.05], 4);
    stab.master_seed = 11;
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let (pt, st) = pool.install(|| (run_phase_transition(&spec).unwrap(), run_stability(&stab).unwrap()));
        let base = dir.path().join(format!("t{threads}"));
        std::fs::create_dir_all(&base).unwrap();
        emit_csv(&pt, &base.join("pt.csv")).unwrap();
        emit_plot(&pt, PlotKind::SuccessVsS, &base.join("pt.svg")).unwrap();
        emit_csv(&st, &base.join("st.csv")).unwrap();
        emit_plot(&st, PlotKind::ErrorVsEps, &base.join("st.svg")).unwrap();
        let read = |f: &str| std::fs::read(base.join(f)).unwrap();
        outputs.push([read("pt.csv"), read("pt.svg"), read("st.csv"), read("st.svg")]);
        assert_eq!(read_csv(&base.join("pt.csv")).unwrap(), pt);
        assert_eq!(read_csv(&base.join("st.csv")).unwrap(), st);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn noiseless_stability_row_is_exact() {
    let mut spec = StabilitySpec::new(ModelParams::new(Family::Mtx1, 128, 64, 0), 2, 2, vec![0.0, 0.01, 0.02], 8);
    spec.master_seed = 5;
    let table = run_stability(&spec).unwrap();
    assert_eq!(table.columns, STABILITY_COLUMNS.map(String::from).to_vec());
    assert_eq!(table.rows.len(), 6);
    assert!(table.provenance.notes.iter().any(|n| n.contains("sqrt(m)")));
    let (eps, mean, std) = (
        table.numbers("eps_amp").unwrap(),
        table.numbers("mean_error").unwrap(),
        table.numbers("std_error").unwrap(),
    );
    let ball = table.numbers("eps_ball").unwrap();
    for i in 0..table.rows.len() {
        assert!(mean[i].is_finite() && mean[i] >= 0.0 && std[i] >= 0.0);
        assert!((ball[i] - eps[i] * 8.0).abs() <= 1e-15);
        if eps[i] == 0.0 {
            assert!(mean[i] <= 1e-5, "row {i}: {}", mean[i]);
        }
    }
    let svg = render_plot(&table, PlotKind::ErrorVsEps).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn specs_are_validated() {
    let p = ModelParams::new(Family::Mtx1, 64, 32, 0);
    assert!(run_phase_transition(&PhaseTransitionSpec::new(p, vec![65], vec![1], 1)).is_err());
    assert!(run_phase_transition(&PhaseTransitionSpec::new(p, vec![1], vec![33], 1)).is_err());
    assert!(run_stability(&StabilitySpec::new(p, 1, 1, vec![0.1, 0.0], 1)).is_err());
    let mut s = StabilitySpec::new(p, 1, 1, vec![0.0], 1);
    s.solvers = vec![];
    assert!(run_stability(&s).is_err());
    assert_eq!("irls".parse::<SolverKind>().unwrap(), SolverKind::IrlsLp);
}

#[test]
fn fit_on_noisy_line() {
    let x: Vec<f64> = (0..=10).map(|i| i as f64 * 0.01).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 3.0 * v + 0.001 + if i % 2 == 0 { 1e-4 } else { -1e-4 }).collect();
    let fit = linear_fit(&x, &y).unwrap();
    assert!((fit.slope - 3.0).abs() < 0.02);
    assert!(fit.r_squared > 0.999);
}

proptest! {
    #[test]
    fn reductions_ignore_thread_layout(v in prop::collection::vec(-1e3..1e3f64, 0..200)) {
        let total = pairwise_sum(&v);
        let naive: f64 = v.iter().sum();
        prop_assert!((total - naive).abs() <= 1e-9 * (1.0 + v.iter().map(|x| x.abs()).sum::<f64>()));
        if !v.is_empty() {
            let (mean, std) = mean_std(&v);
            prop_assert!(std >= 0.0);
            prop_assert!(mean >= v.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-9);
        }
    }

    #[test]
    fn seeds_depend_on_every_path_entry(master in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(master, &[a]), derive_seed(master, &[b]));
        prop_assert_ne!(derive_seed(master, &[a, b]), derive_seed(master, &[b, a]));
        prop_assert_eq!(derive_seed(master, &[a, b]), derive_seed(master, &[a, b]));
    }
}
