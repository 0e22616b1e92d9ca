use std::f64::consts::{FRAC_1_SQRT_2, PI};

use clocknet::analytic::{branch_plus_probability, distribution, ObservableParams};
use clocknet::protocol::*;
use clocknet::qsim::{Forced, Level, Register, SiteSpec};
use clocknet::spacetime::{ClockSpec, PhaseSet, SpacetimeConfig};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_phases(rng: &mut impl Rng) -> PhaseSet {
    let mut r = || rng.random_range(-PI..PI);
    PhaseSet::from_phases(vec![r(), r(), r()], vec![r(), r()])
}

/// `(1/√3) Σ_k e^{−iNφ'_k} |g…(|a⟩ + e^{−iNθ_k}|b⟩)/√2…g⟩` on the first
/// three sites of a register with layout `sites`, all other sites in g.
fn evolved_w(sites: Vec<SiteSpec>, phases: &PhaseSet, n: f64) -> Register {
    let mut reg = Register::new(sites.clone()).unwrap();
    let len = reg.len();
    let mut amps = vec![c(0.0, 0.0); len];
    for k in 0..3 {
        let phi = n * phases.node_phi(k);
        let theta = n * phases.theta[k];
        for (lvl, extra) in [(Level::A, 0.0), (Level::B, theta)] {
            let mut labels: Vec<Level> = sites.iter().map(|_| Level::G).collect();
            labels[k] = lvl;
            let idx = reg.index_of(&labels).unwrap();
            amps[idx] = C64::from_polar(INV_SQRT3 * FRAC_1_SQRT_2, -(phi + extra));
        }
    }
    reg = Register::from_amplitudes(sites, amps).unwrap();
    reg
}

fn random_qubit(rng: &mut impl Rng) -> [C64; 2] {
    let a = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let b = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    [a / n, b / n]
}

fn random_qutrit(rng: &mut impl Rng) -> [C64; 3] {
    let v: Vec<C64> = (0..3)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Register whose site `at` holds `state` and every other site is in g.
fn product_with(sites: Vec<SiteSpec>, at: usize, state: &[C64]) -> Register {
    let reg = Register::new(sites.clone()).unwrap();
    let mut amps = vec![c(0.0, 0.0); reg.len()];
    for (l, &amp) in sites[at].levels().iter().zip(state) {
        let mut labels: Vec<Level> = sites.iter().map(|_| Level::G).collect();
        labels[at] = *l;
        amps[reg.index_of(&labels).unwrap()] = amp;
    }
    Register::from_amplitudes(sites, amps).unwrap()
}

/// Fidelity of site `at`'s pure state with `state`, requiring every other
/// site except `ignore` to be in a definite level.
fn site_fidelity(reg: &Register, at: usize, state: &[C64]) -> f64 {
    let rho = reg.reduced_density(at).unwrap();
    let mut f = c(0.0, 0.0);
    for i in 0..state.len() {
        for j in 0..state.len() {
            f += state[i].conj() * rho[i][j] * state[j];
        }
    }
    f.re
}

#[test]
fn bell_pair_state() {
    let mut reg = Register::new(vec![SiteSpec::qubit(), SiteSpec::qutrit()]).unwrap();
    let pair = prepare_bell(&mut reg, 0, 1).unwrap();
    assert!(!pair.is_consumed());
    let ga = reg.amplitude(&[Level::G, Level::A]).unwrap();
    let ag = reg.amplitude(&[Level::A, Level::G]).unwrap();
    assert!((ga - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
    assert!((ag - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
    assert!(prepare_bell(&mut reg, 0, 1).is_err());
}

#[test]
fn bell_pair_no_signalling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let mut reg = Register::new(vec![SiteSpec::qubit(); 2]).unwrap();
        prepare_bell(&mut reg, 0, 1).unwrap();
        let angle = rng.random_range(0.0..6.0);
        reg.apply_sector_unitary(
            0,
            &clocknet::qsim::SectorUnitary::ry(clocknet::qsim::Sector::GA, angle),
        )
        .unwrap();
        reg.apply_phase(0, Level::A, angle * 1.7).unwrap();
        let rho = reg.reduced_density(1).unwrap();
        assert!((rho[0][0].re - 0.5).abs() < 1e-12);
        assert!((rho[1][1].re - 0.5).abs() < 1e-12);
        assert!(rho[0][1].norm() < 1e-12);
    }
}

#[test]
fn w_state() {
    let mut reg = Register::new(vec![SiteSpec::qubit(); 3]).unwrap();
    prepare_w(&mut reg, [0, 1, 2]).unwrap();
    use Level::{A, G};
    for labels in [[A, G, G], [G, A, G], [G, G, A]] {
        let amp = reg.amplitude(&labels).unwrap();
        assert!((amp - c(INV_SQRT3, 0.0)).norm() < 1e-12);
    }
    let captured: f64 = [[A, G, G], [G, A, G], [G, G, A]]
        .iter()
        .map(|l| reg.amplitude(l).unwrap().norm_sqr())
        .sum();
    assert!((1.0 - captured) < 1e-12);
    for s in 0..3 {
        assert!((reg.level_population(s, A).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
    assert!(prepare_w(&mut reg, [0, 1, 2]).is_err());
}

#[test]
fn clock_start_gives_eq3_at_zero_time() {
    let sites = vec![SiteSpec::qutrit(); 3];
    let mut reg = Register::new(sites.clone()).unwrap();
    prepare_w(&mut reg, [0, 1, 2]).unwrap();
    start_clock(&mut reg, &[0, 1, 2]).unwrap();
    let want = evolved_w(
        sites,
        &PhaseSet::from_phases(vec![0.0; 3], vec![0.0; 2]),
        1.0,
    );
    assert!(reg.fidelity(&want).unwrap() > 1.0 - 1e-12);
}

#[test]
fn clock_pulse_properties() {
    let mut reg = Register::new(vec![SiteSpec::qutrit()]).unwrap();
    start_clock(&mut reg, &[0]).unwrap();
    assert_eq!(reg.amplitude(&[Level::G]).unwrap(), c(1.0, 0.0));

    let mut reg = product_with(
        vec![SiteSpec::qutrit()],
        0,
        &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
    );
    start_clock(&mut reg, &[0]).unwrap();
    start_clock(&mut reg, &[0]).unwrap();
    assert!(reg.is_in_level(0, Level::B, 1e-12).unwrap());
}

#[test]
fn free_evolution_reproduces_eq3() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sites = vec![SiteSpec::qutrit(); 3];
    for _ in 0..20 {
        let phases = random_phases(&mut rng);
        let mut reg = Register::new(sites.clone()).unwrap();
        prepare_w(&mut reg, [0, 1, 2]).unwrap();
        start_clock(&mut reg, &[0, 1, 2]).unwrap();
        free_evolve(
            &mut reg,
            [&[0], &[1], &[2]],
            &phases,
            1.0,
            &NoisePhases::default(),
        )
        .unwrap();
        let want = evolved_w(sites.clone(), &phases, 1.0);
        assert!(reg.fidelity(&want).unwrap() > 1.0 - 1e-12);
    }
}

#[test]
fn qubit_teleport_all_branches() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sites = vec![SiteSpec::qubit(), SiteSpec::qubit(), SiteSpec::qutrit()];
    for _ in 0..100 {
        let s = random_qubit(&mut rng);
        for m1 in 0..2 {
            for m2 in 0..2 {
                let mut reg = product_with(sites.clone(), 0, &s);
                let mut pair = prepare_bell(&mut reg, 1, 2).unwrap();
                let log =
                    teleport_qubit(&mut reg, 0, &mut pair, &mut Forced::new([m1, m2])).unwrap();
                assert_eq!(log.x, m2 == 0);
                assert_eq!(log.z, m1 == 1);
                let f = site_fidelity(&reg, 2, &[s[0], s[1], c(0.0, 0.0)]);
                assert!(1.0 - f < 1e-12, "branch ({m1},{m2}): {f}");
                assert!(pair.is_consumed());
                assert!(matches!(
                    teleport_qubit(&mut reg, 0, &mut pair, &mut Forced::new([0, 0])),
                    Err(ProtocolError::ConsumedPair { .. })
                ));
            }
        }
    }
}

#[test]
fn qubit_teleport_ground_state() {
    let sites = vec![SiteSpec::qubit(); 3];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let mut reg = Register::new(sites.clone()).unwrap();
        let mut pair = prepare_bell(&mut reg, 1, 2).unwrap();
        let log = teleport_qubit(&mut reg, 0, &mut pair, &mut rng).unwrap();
        assert!(reg.is_in_level(2, Level::G, 1e-12).unwrap());
        assert_eq!(log.x, log.pair_outcome == Level::G);
    }
}

#[test]
fn qutrit_teleport_all_branches() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // src, helper, f1, f2, dst, aux
    let sites = vec![
        SiteSpec::qutrit(),
        SiteSpec::qubit(),
        SiteSpec::qubit(),
        SiteSpec::qubit(),
        SiteSpec::qutrit(),
        SiteSpec::qubit(),
    ];
    let basis = [
        [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
    ];
    let states: Vec<[C64; 3]> = basis
        .iter()
        .copied()
        .chain((0..100).map(|_| random_qutrit(&mut rng)))
        .collect();
    for s in &states {
        for branch in 0..16usize {
            let outcomes = [
                branch & 1,
                (branch >> 1) & 1,
                (branch >> 2) & 1,
                (branch >> 3) & 1,
            ];
            let mut reg = product_with(sites.clone(), 0, s);
            let p1 = prepare_bell(&mut reg, 2, 4).unwrap();
            let p2 = prepare_bell(&mut reg, 3, 5).unwrap();
            let mut pairs = [p1, p2];
            let mut forced = Forced::new(outcomes);
            let log = match teleport_qutrit(&mut reg, 0, 1, &mut pairs, &mut forced) {
                Ok(l) => l,
                // basis inputs make some branches impossible
                Err(ProtocolError::Qsim(clocknet::qsim::QsimError::ImpossibleOutcome {
                    ..
                })) => continue,
                Err(e) => panic!("{e}"),
            };
            assert_eq!(log.len(), 2);
            let f = site_fidelity(&reg, 4, s);
            assert!(1.0 - f < 1e-12, "branch {branch}: {f}");
            assert!(reg.is_in_level(5, Level::G, 1e-12).unwrap());
        }
    }
}

#[test]
fn qutrit_teleport_needs_two_pairs() {
    let sites = vec![
        SiteSpec::qutrit(),
        SiteSpec::qubit(),
        SiteSpec::qubit(),
        SiteSpec::qutrit(),
    ];
    let mut reg = Register::new(sites).unwrap();
    let p = prepare_bell(&mut reg, 2, 3).unwrap();
    let mut pairs = [p];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(
        teleport_qutrit(&mut reg, 0, 1, &mut pairs, &mut rng),
        Err(ProtocolError::InsufficientPairs { needed: 2, got: 1 })
    ));
}

#[test]
fn teleporting_a_w_arm_preserves_the_w_state() {
    // w0 w1 w2 (local), near, remote
    let sites = vec![
        SiteSpec::qubit(),
        SiteSpec::qubit(),
        SiteSpec::qubit(),
        SiteSpec::qubit(),
        SiteSpec::qubit(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..16 {
        let mut reg = Register::new(sites.clone()).unwrap();
        prepare_w(&mut reg, [0, 1, 2]).unwrap();
        let mut pair = prepare_bell(&mut reg, 3, 4).unwrap();
        teleport_qubit(&mut reg, 2, &mut pair, &mut rng).unwrap();
        reset_sites(&mut reg, &[2, 3]).unwrap();
        use Level::{A, G};
        for labels in [[A, G, G, G, G], [G, A, G, G, G], [G, G, G, G, A]] {
            let amp = reg.amplitude(&labels).unwrap();
            assert!((amp.norm() - INV_SQRT3).abs() < 1e-12);
        }
    }
}

#[test]
fn ghz_trivial_for_single_atom() {
    let mut reg = Register::new(vec![SiteSpec::qutrit()]).unwrap();
    reg.apply_sector_unitary(
        0,
        &clocknet::qsim::SectorUnitary::ry(clocknet::qsim::Sector::GA, 1.0),
    )
    .unwrap();
    let before = reg.clone();
    let node = GhzNode {
        science: 0,
        extras: vec![],
    };
    ghz_build(&mut reg, &node, clocknet::qsim::Sector::GA).unwrap();
    ghz_unbuild(&mut reg, &node, clocknet::qsim::Sector::GA).unwrap();
    assert_eq!(reg, before);
}

#[test]
fn ghz_build_gives_super_atom_state() {
    use clocknet::qsim::Sector;
    use Level::{A, B, G};
    let n = 3;
    let sites = vec![SiteSpec::qutrit(); 3 + (n - 1)];
    let mut reg = Register::new(sites.clone()).unwrap();
    prepare_w(&mut reg, [0, 1, 2]).unwrap();
    // node 1 gets the super atom
    let node = GhzNode {
        science: 1,
        extras: vec![3, 4],
    };
    ghz_build(&mut reg, &node, Sector::GA).unwrap();
    start_clock(&mut reg, &[1]).unwrap();
    ghz_build(&mut reg, &node, Sector::AB).unwrap();
    let amp_a = reg.amplitude(&[G, A, G, A, A]).unwrap();
    let amp_b = reg.amplitude(&[G, B, G, B, B]).unwrap();
    let amp_0 = reg.amplitude(&[A, G, G, G, G]).unwrap();
    assert!((amp_a - c(INV_SQRT3 * FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
    assert!((amp_b - c(INV_SQRT3 * FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
    assert!((amp_0 - c(INV_SQRT3, 0.0)).norm() < 1e-12);
}

fn ghz_round_trip(n: u32, schedule: GhzSchedule, rng: &mut impl Rng) -> f64 {
    let cfg = ProtocolConfig {
        ghz_n: n,
        ghz_path: Some(GhzPath::Circuit),
        ghz_schedule: schedule,
        ..Default::default()
    };
    let layout = Layout::new(&cfg).unwrap();
    let phases = random_phases(rng);
    let (reg, _) = evolve_register(&cfg, &layout, &phases, &NoisePhases::default(), rng).unwrap();
    let want = evolved_w(layout.sites().to_vec(), &phases, n as f64);
    reg.fidelity(&want).unwrap()
}

#[test]
fn ghz_round_trip_multiplies_phases() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 2..=6 {
        for _ in 0..3 {
            let f = ghz_round_trip(n, GhzSchedule::NodeSequential, &mut rng);
            assert!(f > 1.0 - 1e-10, "N = {n}: {f}");
        }
    }
    for n in 2..=3 {
        let f = ghz_round_trip(n, GhzSchedule::Simultaneous, &mut rng);
        assert!(f > 1.0 - 1e-10, "N = {n}: {f}");
    }
}

#[test]
fn fast_phase_matches_circuit() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phases = random_phases(&mut rng);
    let mk = |path| ProtocolConfig {
        ghz_n: 3,
        ghz_path: Some(path),
        ..Default::default()
    };
    let a = outcome_distribution(&mk(GhzPath::Circuit), &phases, &NoisePhases::default()).unwrap();
    let b =
        outcome_distribution(&mk(GhzPath::FastPhase), &phases, &NoisePhases::default()).unwrap();
    for x in 0..3 {
        assert!((a.fourier[x] - b.fourier[x]).abs() < 1e-10);
    }
    assert!((a.branch_plus - b.branch_plus).abs() < 1e-10);
}

#[test]
fn circuit_path_rejected_for_large_n() {
    let cfg = ProtocolConfig {
        ghz_n: 7,
        ghz_path: Some(GhzPath::Circuit),
        ..Default::default()
    };
    assert!(cfg.validate().is_err());
    let auto = ProtocolConfig {
        ghz_n: 100,
        ..Default::default()
    };
    assert_eq!(auto.effective_ghz_path(), GhzPath::FastPhase);
    assert!(auto.validate().is_ok());
    let wide = ProtocolConfig {
        ghz_n: 5,
        ghz_schedule: GhzSchedule::Simultaneous,
        ..Default::default()
    };
    assert!(wide.validate().is_err());
}

#[test]
fn readout_branch_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = ProtocolConfig::default();
    for theta in [[0.0; 3], [PI; 3]] {
        let d = outcome_distribution(
            &cfg,
            &PhaseSet::from_phases(theta.to_vec(), vec![0.0; 2]),
            &NoisePhases::default(),
        )
        .unwrap();
        let want = if theta[0] == 0.0 { 1.0 } else { 0.0 };
        assert!((d.branch_plus - want).abs() < 1e-12);
    }
    for _ in 0..20 {
        let phases = random_phases(&mut rng);
        let d = outcome_distribution(&cfg, &phases, &NoisePhases::default()).unwrap();
        let theta = [phases.theta[0], phases.theta[1], phases.theta[2]];
        assert!((d.branch_plus - branch_plus_probability(theta)).abs() < 1e-12);
    }
}

#[test]
fn measurement_leaves_no_b_population_after_conditional_x() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = ProtocolConfig::default();
    let layout = Layout::new(&cfg).unwrap();
    for _ in 0..20 {
        let phases = random_phases(&mut rng);
        let (mut reg, _) =
            evolve_register(&cfg, &layout, &phases, &NoisePhases::default(), &mut rng).unwrap();
        let b = global_clock_readout(&mut reg, layout.local, layout.ancilla, &mut rng).unwrap();
        conditional_global_x(&mut reg, layout.local, b).unwrap();
        for q in layout.local {
            assert!(reg.level_population(q, Level::B).unwrap() < 1e-12);
        }
        let p = reg
            .projector_probabilities(&fourier_projectors(layout.local))
            .unwrap();
        assert!(p[3] < 1e-12);
    }
}

#[test]
fn fourier_basis_state_is_detected() {
    use Level::{A, G};
    let sites = vec![SiteSpec::qutrit(); 3];
    for realization in [
        FourierRealization::DirectProjector,
        FourierRealization::QftCircuit,
    ] {
        for x in 0..3 {
            let reg0 = Register::new(sites.clone()).unwrap();
            let mut amps = vec![c(0.0, 0.0); 27];
            for (k, labels) in [[A, G, G], [G, A, G], [G, G, A]].iter().enumerate() {
                let w = 2.0 * PI * x as f64 / 3.0;
                amps[reg0.index_of(labels).unwrap()] = C64::from_polar(INV_SQRT3, k as f64 * w);
            }
            let mut reg = Register::from_amplitudes(sites.clone(), amps).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(x as u64);
            let out = fourier_measure(&mut reg, [0, 1, 2], &mut rng, realization).unwrap();
            assert_eq!(out, Some(x));
        }
    }
}

#[test]
fn equal_proper_times_give_outcome_zero() {
    let cfg = ProtocolConfig::default();
    let mut st = SpacetimeConfig::earth(1000.0);
    st.elevations = vec![0.0; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for t in [0.0, 1.0, 37.5] {
        for _ in 0..20 {
            let shot = run_shot(
                &cfg,
                &st,
                &ClockSpec::default(),
                t,
                &Default::default(),
                &mut rng,
            )
            .unwrap();
            assert_eq!(shot.fourier, Some(0));
        }
    }
}

#[test]
fn zero_time_gives_outcome_zero() {
    let cfg = ProtocolConfig {
        mode: NetworkMode::FullNetwork,
        ..Default::default()
    };
    let st = SpacetimeConfig::earth(1000.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let shot = run_shot(
            &cfg,
            &st,
            &ClockSpec::default(),
            0.0,
            &Default::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(shot.fourier, Some(0));
        assert_eq!(shot.branch, Branch::Plus);
        assert_eq!(shot.corrections.len(), 6);
    }
}

#[test]
fn logical_distribution_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for realization in [
        FourierRealization::DirectProjector,
        FourierRealization::QftCircuit,
    ] {
        let cfg = ProtocolConfig {
            measurement: realization,
            ..Default::default()
        };
        for _ in 0..50 {
            let phases = random_phases(&mut rng);
            let d = outcome_distribution(&cfg, &phases, &NoisePhases::default()).unwrap();
            let want = distribution(&ObservableParams::from_phases(&phases).unwrap()).unwrap();
            for x in 0..3 {
                assert!((d.fourier[x] - want[x]).abs() < 1e-10);
            }
            assert!(d.null < 1e-12);
        }
    }
}

#[test]
fn ghz_distribution_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for n in [2, 4] {
        let cfg = ProtocolConfig {
            ghz_n: n,
            ..Default::default()
        };
        let phases = random_phases(&mut rng);
        let d = outcome_distribution(&cfg, &phases, &NoisePhases::default()).unwrap();
        let want =
            distribution(&ObservableParams::from_phases(&phases).unwrap().with_ghz(n)).unwrap();
        for x in 0..3 {
            assert!((d.fourier[x] - want[x]).abs() < 1e-10);
        }
    }
}

#[test]
fn realizations_agree_statistically() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let phases = random_phases(&mut rng);
    let layout = Layout::new(&ProtocolConfig::default()).unwrap();
    let shots = 100_000;
    let mut counts = [[0usize; 4]; 2];
    for (i, realization) in [
        FourierRealization::DirectProjector,
        FourierRealization::QftCircuit,
    ]
    .into_iter()
    .enumerate()
    {
        let cfg = ProtocolConfig {
            measurement: realization,
            ..Default::default()
        };
        for _ in 0..shots {
            let s = run_shot_with_phases(&cfg, &layout, &phases, NoisePhases::default(), &mut rng)
                .unwrap();
            counts[i][s.fourier.unwrap_or(3)] += 1;
        }
    }
    for x in 0..3 {
        let p1 = counts[0][x] as f64 / shots as f64;
        let p2 = counts[1][x] as f64 / shots as f64;
        let p = (p1 + p2) / 2.0;
        let sigma = (2.0 * p * (1.0 - p) / shots as f64).sqrt().max(1e-9);
        assert!((p1 - p2).abs() < 5.0 * sigma, "x = {x}: {p1} vs {p2}");
    }
    assert_eq!(counts[0][3] + counts[1][3], 0);
}

#[test]
fn leakage_produces_null_outcomes() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let phases = random_phases(&mut rng);
    let cfg = ProtocolConfig {
        leakage: 0.1,
        ..Default::default()
    };
    let d = outcome_distribution(&cfg, &phases, &NoisePhases::default()).unwrap();
    assert!((d.null - 0.1).abs() < 1e-12);
    let total: f64 = d.fourier.iter().sum::<f64>() + d.null;
    assert!((total - 1.0).abs() < 1e-12);
    let layout = Layout::new(&cfg).unwrap();
    let mut nulls = 0;
    for _ in 0..2000 {
        let s =
            run_shot_with_phases(&cfg, &layout, &phases, NoisePhases::default(), &mut rng).unwrap();
        if s.fourier.is_none() {
            assert!(s.leaked);
            nulls += 1;
        }
    }
    assert!((100..300).contains(&nulls), "{nulls}");
}

#[test]
fn noiseless_shots_track_closed_form() {
    let cfg = ProtocolConfig::default();
    let layout = Layout::new(&cfg).unwrap();
    let st = SpacetimeConfig::earth(1000.0);
    let clocks = ClockSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for t in [0.0013, 0.0047, 0.0101] {
        let phases = clocknet::spacetime::phases_at(&st, &clocks, t).unwrap();
        let p0 = distribution(&ObservableParams::from_phases(&phases).unwrap()).unwrap()[0];
        let shots = 20_000;
        let hits = (0..shots)
            .filter(|_| {
                run_shot_with_phases(&cfg, &layout, &phases, NoisePhases::default(), &mut rng)
                    .unwrap()
                    .fourier
                    == Some(0)
            })
            .count();
        let est = hits as f64 / shots as f64;
        let sigma = (p0 * (1.0 - p0) / shots as f64).sqrt();
        assert!(
            (est - p0).abs() < 5.0 * sigma + 1e-12,
            "t = {t}: {est} vs {p0}"
        );
    }
}

#[test]
fn full_network_register_size() {
    let cfg = ProtocolConfig {
        mode: NetworkMode::FullNetwork,
        ..Default::default()
    };
    assert_eq!(Layout::new(&cfg).unwrap().amplitude_count(), 3888);
}

#[test]
fn noisy_bell_pairs_still_transfer_populations() {
    let cfg = ProtocolConfig {
        mode: NetworkMode::FullNetwork,
        bell_phase_noise: 0.3,
        ..Default::default()
    };
    let st = SpacetimeConfig::earth(1000.0);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..10 {
        let s = run_shot(
            &cfg,
            &st,
            &ClockSpec::default(),
            0.01,
            &Default::default(),
            &mut rng,
        )
        .unwrap();
        assert!(s.fourier.is_some());
    }
}
