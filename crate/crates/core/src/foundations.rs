//! Higher-order interference (`I₁₂₃`) and product-state linearity tests.
//!
//! Sub-experiments with fewer participating clocks keep every branch at
//! amplitude `1/√3`: the excitation of a non-participating node is moved
//! onto its own flag qubit, which no later operation touches, so the
//! branch ends outside the measured Fourier subspace.
//!
//! Exact mode evaluates Born probabilities of the simulated register.
//! Dephasing is included exactly: each outcome probability contains at
//! most the first harmonic `e^{±i n_k}` of a node's noise phase, so
//! averaging over the two phases `{0, π}` with weights `(1 ± c_k)/2`
//! reproduces the Gaussian ensemble average with coherence `c_k`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{AnalyticError, ObservableParams};
use crate::protocol::{
    conditional_global_x, fourier_measure, fourier_outcome_set, global_clock_readout,
    global_clock_readout_record, prepare_w, start_clock, Branch, FourierRealization, NoisePhases,
    ProtocolError,
};
use crate::qsim::{Control, Forced, Level, QsimError, Register, Sector, SectorUnitary, SiteSpec};
use crate::sampling::estimator_variance;

#[derive(Debug, Error)]
pub enum FoundationsError {
    #[error("subset must name at least one clock")]
    EmptySubset,
    #[error("shots must be at least 1")]
    ZeroShots,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

const QUTRITS: [usize; 3] = [0, 1, 2];
const ANCILLA: usize = 3;
/// Flag qubit of node `k` is site `FLAG0 + k`.
const FLAG0: usize = 4;

/// Fourier statistics of one sub-experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub subset: [bool; 3],
    /// e.g. `"12"` for the first two clocks.
    pub label: String,
    pub p: [f64; 3],
    /// Weight outside the Fourier subspace (shelved branches).
    pub null: f64,
    /// Binomial standard errors, zero in exact mode.
    pub err: [f64; 3],
    pub shots: Option<u64>,
}

fn label(subset: [bool; 3]) -> String {
    (0..3)
        .filter(|&k| subset[k])
        .map(|k| char::from(b'1' + k as u8))
        .collect()
}

/// Phases applied to level `a` and `b` of each qutrit.
fn apply_evolution(
    reg: &mut Register,
    params: &ObservableParams,
    shift: &NoisePhases,
) -> Result<(), QsimError> {
    let th = params.effective_theta();
    let ph = params.effective_phi();
    for k in 0..3 {
        let a = ph[k] + shift.metastable[k];
        reg.apply_phase(k, Level::A, a)?;
        reg.apply_phase(k, Level::B, th[k] + a + shift.clock[k])?;
    }
    Ok(())
}

fn subset_register(
    params: &ObservableParams,
    subset: [bool; 3],
    shift: &NoisePhases,
) -> Result<Register, FoundationsError> {
    let q = SiteSpec::qutrit();
    let f = SiteSpec::qubit();
    let mut reg = Register::new(vec![
        q.clone(),
        q.clone(),
        q,
        f.clone(),
        f.clone(),
        f.clone(),
        f,
    ])?;
    prepare_w(&mut reg, QUTRITS)?;
    let x = SectorUnitary::x(Sector::GA);
    for k in (0..3).filter(|&k| !subset[k]) {
        let flag = FLAG0 + k;
        reg.apply_controlled(&Control::on(k, Level::A), flag, &x)?;
        reg.apply_controlled(&Control::on(flag, Level::A), k, &x)?;
    }
    start_clock(&mut reg, &QUTRITS)?;
    apply_evolution(&mut reg, params, shift)?;
    Ok(reg)
}

fn product_register(
    params: &ObservableParams,
    shift: &NoisePhases,
) -> Result<Register, FoundationsError> {
    let q = SiteSpec::qutrit();
    let mut reg = Register::new(vec![q.clone(), q.clone(), q, SiteSpec::qubit()])?;
    // (|g⟩ + √2|a⟩)/√3, then the clock pulse gives (|g⟩ + √2|c(0)⟩)/√3
    let angle = 2.0 * (1.0 / 3f64.sqrt()).acos();
    let r = SectorUnitary::ry(Sector::GA, angle);
    for &k in &QUTRITS {
        reg.apply_sector_unitary(k, &r)?;
    }
    start_clock(&mut reg, &QUTRITS)?;
    apply_evolution(&mut reg, params, shift)?;
    Ok(reg)
}

/// Born probabilities `[Π_0, Π_1, Π_2, other]` after readout, the
/// conditional X and the Fourier projection.
fn exact_readout(reg: &Register) -> Result<[f64; 4], FoundationsError> {
    let set = fourier_outcome_set(QUTRITS, FourierRealization::DirectProjector);
    let mut out = [0.0; 4];
    for (idx, branch) in [(0usize, Branch::Plus), (1, Branch::Minus)] {
        let mut r = reg.clone();
        let w = match global_clock_readout_record(&mut r, QUTRITS, ANCILLA, &mut Forced::new([idx]))
        {
            Ok((_, rec)) => rec.probability,
            Err(ProtocolError::Qsim(QsimError::ImpossibleOutcome { .. })) => continue,
            Err(e) => return Err(e.into()),
        };
        conditional_global_x(&mut r, QUTRITS, branch)?;
        let p = r.projector_probabilities(&set)?;
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn sampled_readout<R: Rng + ?Sized>(
    mut reg: Register,
    rng: &mut R,
) -> Result<Option<usize>, FoundationsError> {
    let branch = global_clock_readout(&mut reg, QUTRITS, ANCILLA, rng)?;
    conditional_global_x(&mut reg, QUTRITS, branch)?;
    Ok(fourier_measure(
        &mut reg,
        QUTRITS,
        rng,
        FourierRealization::DirectProjector,
    )?)
}

/// Two-point phase quadrature over every partially coherent node.
fn noise_quadrature(params: &ObservableParams) -> Vec<(f64, NoisePhases)> {
    let mut dims = Vec::new();
    for k in 0..3 {
        if params.clock_coherence[k] < 1.0 {
            dims.push((false, k, params.clock_coherence[k]));
        }
        if params.metastable_coherence[k] < 1.0 {
            dims.push((true, k, params.metastable_coherence[k]));
        }
    }
    (0..1usize << dims.len())
        .map(|mask| {
            let mut w = 1.0;
            let mut shift = NoisePhases::default();
            for (d, &(meta, k, c)) in dims.iter().enumerate() {
                let flipped = mask >> d & 1 == 1;
                w *= if flipped {
                    (1.0 - c) / 2.0
                } else {
                    (1.0 + c) / 2.0
                };
                let v = if flipped { PI } else { 0.0 };
                if meta {
                    shift.metastable[k] = v;
                } else {
                    shift.clock[k] = v;
                }
            }
            (w, shift)
        })
        .collect()
}

fn exact_average(
    params: &ObservableParams,
    build: impl Fn(&NoisePhases) -> Result<Register, FoundationsError>,
) -> Result<[f64; 4], FoundationsError> {
    let mut out = [0.0; 4];
    for (w, shift) in noise_quadrature(params) {
        if w == 0.0 {
            continue;
        }
        let p = exact_readout(&build(&shift)?)?;
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn phase_draw<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    if c >= 1.0 {
        0.0
    } else if c <= 0.0 {
        rng.random::<f64>() * 2.0 * PI
    } else {
        // E[cos n] = exp(−σ²/2) = c
        Normal::new(0.0, (-2.0 * c.ln()).sqrt())
            .expect("finite std")
            .sample(rng)
    }
}

fn draw_shift<R: Rng + ?Sized>(params: &ObservableParams, rng: &mut R) -> NoisePhases {
    let mut s = NoisePhases::default();
    for k in 0..3 {
        s.clock[k] = phase_draw(params.clock_coherence[k], rng);
        s.metastable[k] = phase_draw(params.metastable_coherence[k], rng);
    }
    s
}

fn is_coherent(params: &ObservableParams) -> bool {
    params
        .clock_coherence
        .iter()
        .chain(&params.metastable_coherence)
        .all(|&c| c >= 1.0)
}

/// Outcome counts `[x0, x1, x2, other]` of `shots` sampled runs.
fn sample_counts<R: Rng + ?Sized>(
    params: &ObservableParams,
    shots: u64,
    rng: &mut R,
    build: impl Fn(&NoisePhases) -> Result<Register, FoundationsError>,
) -> Result<[u64; 4], FoundationsError> {
    let fixed = if is_coherent(params) {
        Some(build(&NoisePhases::default())?)
    } else {
        None
    };
    let mut counts = [0u64; 4];
    for _ in 0..shots {
        let reg = match &fixed {
            Some(r) => r.clone(),
            None => build(&draw_shift(params, rng))?,
        };
        counts[sampled_readout(reg, rng)?.unwrap_or(3)] += 1;
    }
    Ok(counts)
}

/// Runs the readout on the W state restricted to `subset`; `shots = None`
/// gives exact probabilities.
pub fn born_experiment<R: Rng + ?Sized>(
    params: &ObservableParams,
    subset: [bool; 3],
    shots: Option<u64>,
    rng: &mut R,
) -> Result<SubsetResult, FoundationsError> {
    params.validate()?;
    if !subset.iter().any(|&s| s) {
        return Err(FoundationsError::EmptySubset);
    }
    let build = |s: &NoisePhases| subset_register(params, subset, s);
    let (p, null, err) = match shots {
        None => {
            let e = exact_average(params, build)?;
            ([e[0], e[1], e[2]], e[3], [0.0; 3])
        }
        Some(0) => return Err(FoundationsError::ZeroShots),
        Some(m) => {
            let c = sample_counts(params, m, rng, build)?;
            let mf = m as f64;
            let p = [c[0] as f64 / mf, c[1] as f64 / mf, c[2] as f64 / mf];
            (p, c[3] as f64 / mf, p.map(|v| estimator_variance(v, m)))
        }
    };
    Ok(SubsetResult {
        subset,
        label: label(subset),
        p,
        null,
        err,
        shots,
    })
}

/// Subsets in the order `123, 12, 13, 23, 1, 2, 3`.
pub const BORN_SUBSETS: [[bool; 3]; 7] = [
    [true, true, true],
    [true, true, false],
    [true, false, true],
    [false, true, true],
    [true, false, false],
    [false, true, false],
    [false, false, true],
];

const BORN_SIGNS: [f64; 7] = [1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BornReport {
    /// In [`BORN_SUBSETS`] order.
    pub experiments: Vec<SubsetResult>,
    /// Synthetic term added to every `P123(x)` after the Born rule.
    pub injected: f64,
    pub i123: [f64; 3],
    /// Root-sum-square of the component errors.
    pub i123_err: [f64; 3],
    pub shots: Option<u64>,
}

impl BornReport {
    /// Largest `|I123(x) − injected| / err`, infinite when error bars are
    /// zero and the difference is not.
    pub fn max_deviation_sigma(&self) -> f64 {
        (0..3)
            .map(|x| {
                let d = (self.i123[x] - self.injected).abs();
                if self.i123_err[x] > 0.0 {
                    d / self.i123_err[x]
                } else if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// `I123 = P123 − P12 − P13 − P23 + P1 + P2 + P3` per Fourier outcome.
/// The seven sub-experiments draw independent streams seeded from `rng`
/// and run in parallel.
pub fn born_i123<R: Rng + ?Sized>(
    params: &ObservableParams,
    shots: Option<u64>,
    inject: f64,
    rng: &mut R,
) -> Result<BornReport, FoundationsError> {
    let seeds: Vec<u64> = (0..7).map(|_| rng.random()).collect();
    let mut experiments = BORN_SUBSETS
        .par_iter()
        .zip(seeds)
        .map(|(&s, seed)| born_experiment(params, s, shots, &mut ChaCha8Rng::seed_from_u64(seed)))
        .collect::<Result<Vec<_>, _>>()?;
    for v in &mut experiments[0].p {
        *v += inject;
    }
    let mut i123 = [0.0; 3];
    let mut var = [0.0; 3];
    for (e, sign) in experiments.iter().zip(BORN_SIGNS) {
        for x in 0..3 {
            i123[x] += sign * e.p[x];
            var[x] += e.err[x] * e.err[x];
        }
    }
    Ok(BornReport {
        experiments,
        injected: inject,
        i123,
        i123_err: var.map(f64::sqrt),
        shots,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearityReport {
    /// Exact entangled-protocol distribution over `x`.
    pub entangled: [f64; 3],
    /// Product-state distribution conditioned on the Fourier subspace;
    /// `None` when nothing landed there.
    pub conditional: Option<[f64; 3]>,
    pub success_probability: f64,
    /// Exact unconditioned outcome weights `[x0, x1, x2, other]`.
    pub product_outcomes: [f64; 4],
    /// Weight of the product state with 0, 1, 2 and 3 excited clocks.
    pub excitation_weights: [f64; 4],
    pub tv_distance: Option<f64>,
    /// Five-sigma bound on the TV distance from binomial errors.
    pub tv_bound: Option<f64>,
    pub shots: Option<u64>,
    pub successes: Option<u64>,
}

fn excitation_weights(reg: &Register) -> Result<[f64; 4], FoundationsError> {
    use Level::{A, B, G};
    let mut w = [0.0; 4];
    for l0 in [G, A, B] {
        for l1 in [G, A, B] {
            for l2 in [G, A, B] {
                let n = [l0, l1, l2].iter().filter(|&&l| l != G).count();
                w[n] += reg.amplitude(&[l0, l1, l2, G])?.norm_sqr();
            }
        }
    }
    Ok(w)
}

fn tv(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Exact success probability and conditional distribution of the product
/// protocol, with a phase `common_phase` added to level `a` and `b` of
/// every node (a global phase of the single-excitation component).
pub fn product_state_exact(
    params: &ObservableParams,
    common_phase: f64,
) -> Result<(f64, [f64; 3]), FoundationsError> {
    params.validate()?;
    let p = exact_average(params, |s| {
        let mut shift = *s;
        for k in 0..3 {
            shift.metastable[k] += common_phase;
        }
        product_register(params, &shift)
    })?;
    let success = p[0] + p[1] + p[2];
    Ok((success, [p[0] / success, p[1] / success, p[2] / success]))
}

/// Product-state preparation, identical evolution and readout, then
/// conditioning on the single-excitation Fourier outcomes.
pub fn product_state_protocol<R: Rng + ?Sized>(
    params: &ObservableParams,
    shots: Option<u64>,
    rng: &mut R,
) -> Result<LinearityReport, FoundationsError> {
    params.validate()?;
    let e = exact_average(params, |s| subset_register(params, [true; 3], s))?;
    let entangled = [e[0], e[1], e[2]];
    let product_outcomes = exact_average(params, |s| product_register(params, s))?;
    let excitation = excitation_weights(&product_register(params, &NoisePhases::default())?)?;
    let exact_success = product_outcomes[0] + product_outcomes[1] + product_outcomes[2];
    let mut report = LinearityReport {
        entangled,
        conditional: None,
        success_probability: exact_success,
        product_outcomes,
        excitation_weights: excitation,
        tv_distance: None,
        tv_bound: None,
        shots,
        successes: None,
    };
    match shots {
        None => {
            if exact_success > 0.0 {
                let c = [0, 1, 2].map(|x| product_outcomes[x] / exact_success);
                report.tv_distance = Some(tv(&c, &entangled));
                report.conditional = Some(c);
            }
        }
        Some(0) => return Err(FoundationsError::ZeroShots),
        Some(m) => {
            let counts = sample_counts(params, m, rng, |s| product_register(params, s))?;
            let hits = counts[0] + counts[1] + counts[2];
            report.success_probability = hits as f64 / m as f64;
            report.successes = Some(hits);
            if hits > 0 {
                let hf = hits as f64;
                let c = [0, 1, 2].map(|x| counts[x] as f64 / hf);
                report.tv_distance = Some(tv(&c, &entangled));
                report.tv_bound = Some(
                    5.0 * 0.5
                        * entangled
                            .iter()
                            .map(|&q| estimator_variance(q.clamp(0.0, 1.0), hits))
                            .sum::<f64>(),
                );
                report.conditional = Some(c);
            }
        }
    }
    Ok(report)
}
