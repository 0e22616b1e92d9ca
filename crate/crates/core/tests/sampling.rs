use clocknet::config::{preset, ExperimentConfig};
use clocknet::protocol::NetworkMode;
use clocknet::sampling::{
    estimator_variance, expected_point, generate_points, generate_trace, Sampler, SignalTrace,
};

fn short(name: &str, points: usize, shots: u64, sampler: Sampler) -> ExperimentConfig {
    let mut c = preset(name).unwrap();
    c.trace.total_time = points as f64 / c.trace.sample_rate;
    c.trace.shots_per_point = shots;
    c.trace.sampler = sampler;
    c
}

fn residuals(cfg: &ExperimentConfig, trace: &SignalTrace) -> Vec<f64> {
    let (tc, sc) = (cfg.trace_config(), cfg.scenario());
    trace
        .points
        .iter()
        .map(|pt| pt.p[0] - expected_point(&tc, &sc, pt.t).unwrap().0[0])
        .collect()
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn exact_trace_is_the_ensemble_prediction() {
    let cfg = short("fig4-top", 200, 1, Sampler::ExactExpectation);
    let trace = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap();
    assert_eq!(trace.len(), 200);
    for (k, pt) in trace.points.iter().enumerate() {
        assert_eq!(pt.t, k as f64 / 500.0);
        let (p, null) = expected_point(&cfg.trace_config(), &cfg.scenario(), pt.t).unwrap();
        assert_eq!(pt.p, p);
        assert_eq!(pt.null, null);
        assert!((pt.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn flat_spacetime_always_gives_outcome_zero() {
    for sampler in [
        Sampler::ExactExpectation,
        Sampler::AnalyticBernoulli,
        Sampler::CircuitShots,
    ] {
        let cfg = short("flat", 50, 20, sampler);
        let trace = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap();
        for pt in &trace.points {
            assert!(
                (pt.p[0] - 1.0).abs() < 1e-12,
                "{sampler:?} at t = {}: {:?}",
                pt.t,
                pt.p
            );
        }
    }
}

#[test]
fn circuit_and_bernoulli_samplers_agree() {
    let shots = 10_000;
    let bern = short("fig4-top", 20, shots, Sampler::AnalyticBernoulli);
    let mut circ = short("fig4-top", 20, shots, Sampler::CircuitShots);
    circ.protocol.mode = NetworkMode::Logical;
    let a = generate_trace(&bern.trace_config(), &bern.scenario()).unwrap();
    let b = generate_trace(&circ.trace_config(), &circ.scenario()).unwrap();
    for (pa, pb) in a.points.iter().zip(&b.points) {
        let (p, _) = expected_point(&bern.trace_config(), &bern.scenario(), pa.t).unwrap();
        for x in 0..3 {
            let sigma = estimator_variance(p[x], shots).max(1.0 / shots as f64);
            assert!(
                (pa.p[x] - p[x]).abs() < 5.0 * sigma,
                "bernoulli t={} x={x}",
                pa.t
            );
            assert!(
                (pb.p[x] - p[x]).abs() < 5.0 * sigma,
                "circuit t={} x={x}",
                pb.t
            );
            assert!((pa.p[x] - pb.p[x]).abs() < 5.0 * sigma * 2f64.sqrt());
        }
    }
}

#[test]
fn traces_do_not_depend_on_thread_count() {
    let cfg = short("fig4-top", 300, 100, Sampler::AnalyticBernoulli);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn seeds_change_the_trace() {
    let mut cfg = short("fig4-top", 100, 100, Sampler::AnalyticBernoulli);
    let a = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap();
    cfg.seed = 1;
    let b = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap();
    assert_ne!(a.points, b.points);
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let cfg = short("fig4-top", 100, 100, Sampler::AnalyticBernoulli);
    let trace = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap();
    let parsed = SignalTrace::from_csv(&trace.to_csv()).unwrap();
    assert_eq!(parsed.points, trace.points);
    assert!(parsed.config.is_none());

    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = trace.write(dir.path(), "t").unwrap();
    let back = SignalTrace::read(&csv).unwrap();
    assert_eq!(back, trace);
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(SignalTrace::from_csv("t_s,p0\n0,1\n").is_err());
    let bad = format!(
        "{}\n0,0.5,0.5,0,0,10\n0.1,x,0,0,0,10\n",
        SignalTrace::CSV_HEADER
    );
    let err = SignalTrace::from_csv(&bad).unwrap_err().to_string();
    assert!(err.contains('3'), "{err}");
}

#[test]
fn scatter_matches_binomial_error() {
    // leakage 0.5 on a flat spacetime makes every point Bernoulli(0.5)
    let mut cfg = short("flat", 2000, 100, Sampler::AnalyticBernoulli);
    cfg.protocol.leakage = 0.5;
    let trace = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap();
    let r = residuals(&cfg, &trace);
    let expected = estimator_variance(0.5, 100);
    assert!(
        (std_dev(&r) / expected - 1.0).abs() < 0.1,
        "{} vs {expected}",
        std_dev(&r)
    );
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    assert!(mean.abs() < 5.0 * expected / (r.len() as f64).sqrt());
}

#[test]
fn error_shrinks_as_inverse_root_shots() {
    let s = |m| {
        let cfg = short("fig4-top", 500, m, Sampler::AnalyticBernoulli);
        let trace = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap();
        std_dev(&residuals(&cfg, &trace))
    };
    let ratio = s(100) / s(10_000);
    assert!((ratio / 10.0 - 1.0).abs() < 0.15, "ratio {ratio}");
}

#[test]
fn selected_points_match_full_trace() {
    let cfg = short("fig4-top", 64, 100, Sampler::AnalyticBernoulli);
    let trace = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap();
    let idx = [0, 7, 31, 63];
    let some = generate_points(&cfg.trace_config(), &cfg.scenario(), &idx).unwrap();
    for (k, pt) in idx.iter().zip(&some) {
        assert_eq!(&trace.points[*k], pt);
    }
    assert!(generate_points(&cfg.trace_config(), &cfg.scenario(), &[64]).is_err());
}

#[test]
fn circuit_budget_is_enforced() {
    let mut cfg = preset("fig4-top").unwrap();
    cfg.trace.sampler = Sampler::CircuitShots;
    cfg.protocol.mode = NetworkMode::FullNetwork;
    let err = generate_trace(&cfg.trace_config(), &cfg.scenario()).unwrap_err();
    assert!(err.to_string().contains("analytic_bernoulli"), "{err}");
}
