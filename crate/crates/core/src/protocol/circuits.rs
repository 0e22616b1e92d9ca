//! Gate-level building blocks of the protocol.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytic::fourier_angle;
use crate::qsim::{
    Control, Level, MeasurementRecord, OutcomeSource, ProjectorSet, Register, Sector, SectorUnitary,
};
use crate::spacetime::PhaseSet;

use super::ProtocolError;

const FRESH_TOL: f64 = 1e-9;

fn require_ground(reg: &Register, sites: &[usize], what: &str) -> Result<(), ProtocolError> {
    for &s in sites {
        if !reg.is_in_level(s, Level::G, FRESH_TOL)? {
            return Err(ProtocolError::Precondition(format!(
                "{what}: site {s} is not in |g⟩"
            )));
        }
    }
    Ok(())
}

fn cnot(
    reg: &mut Register,
    control: usize,
    level: Level,
    target: usize,
    sector: Sector,
) -> Result<(), ProtocolError> {
    reg.apply_controlled(
        &Control::on(control, level),
        target,
        &SectorUnitary::x(sector),
    )?;
    Ok(())
}

/// Two sites holding `(|g,a⟩ + |a,g⟩)/√2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BellPair {
    /// Half kept with the sender.
    pub a: usize,
    /// Half at the receiving node.
    pub b: usize,
    consumed: bool,
}

impl BellPair {
    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// Prepares the Bell resource on two fresh sites.
pub fn prepare_bell(reg: &mut Register, a: usize, b: usize) -> Result<BellPair, ProtocolError> {
    prepare_noisy_bell(reg, a, b, 0.0)
}

/// Bell resource with an extra phase `e^{−i phase}` on the `|a,g⟩` branch
/// (a dephased link).
pub fn prepare_noisy_bell(
    reg: &mut Register,
    a: usize,
    b: usize,
    phase: f64,
) -> Result<BellPair, ProtocolError> {
    if a == b {
        return Err(ProtocolError::Precondition(
            "Bell pair needs two sites".into(),
        ));
    }
    require_ground(reg, &[a, b], "prepare_bell")?;
    reg.apply_sector_unitary(a, &SectorUnitary::ry(Sector::GA, FRAC_PI_2))?;
    cnot(reg, a, Level::A, b, Sector::GA)?;
    reg.apply_sector_unitary(b, &SectorUnitary::x(Sector::GA))?;
    reg.apply_phase(a, Level::A, phase)?;
    Ok(BellPair {
        a,
        b,
        consumed: false,
    })
}

/// Three-site W state `(|a,g,g⟩ + |g,a,g⟩ + |g,g,a⟩)/√3` in the `{ga}` sector.
pub fn prepare_w(reg: &mut Register, sites: [usize; 3]) -> Result<(), ProtocolError> {
    require_ground(reg, &sites, "prepare_w")?;
    let [s0, s1, s2] = sites;
    let phi3 = 2.0 * (1.0 / 3f64.sqrt()).acos();
    reg.apply_sector_unitary(s0, &SectorUnitary::ry(Sector::GA, phi3))?;
    reg.apply_controlled(
        &Control::on(s0, Level::A),
        s1,
        &SectorUnitary::ry(Sector::GA, FRAC_PI_2),
    )?;
    cnot(reg, s1, Level::A, s0, Sector::GA)?;
    reg.apply_sector_unitary(s2, &SectorUnitary::x(Sector::GA))?;
    cnot(reg, s0, Level::A, s2, Sector::GA)?;
    cnot(reg, s1, Level::A, s2, Sector::GA)?;
    Ok(())
}

/// Pauli-frame correction applied after one teleportation round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub src: usize,
    pub dst: usize,
    pub src_outcome: Level,
    pub pair_outcome: Level,
    pub x: bool,
    pub z: bool,
}

/// Transfers the `{ga}` state of `src` onto `pair.b`.
///
/// `src` and `pair.a` are left in their measured levels. The pair is
/// marked consumed.
pub fn teleport_qubit<S: OutcomeSource + ?Sized>(
    reg: &mut Register,
    src: usize,
    pair: &mut BellPair,
    src_of_randomness: &mut S,
) -> Result<Correction, ProtocolError> {
    if pair.consumed {
        return Err(ProtocolError::ConsumedPair {
            a: pair.a,
            b: pair.b,
        });
    }
    if src == pair.a || src == pair.b {
        return Err(ProtocolError::Precondition(
            "source overlaps the Bell pair".into(),
        ));
    }
    pair.consumed = true;
    if reg.site(src)?.contains(Level::B) && reg.level_population(src, Level::B)? > FRESH_TOL {
        return Err(ProtocolError::Precondition(format!(
            "site {src} has population outside the {{ga}} sector"
        )));
    }
    cnot(reg, src, Level::A, pair.a, Sector::GA)?;
    reg.apply_sector_unitary(src, &SectorUnitary::hadamard(Sector::GA))?;
    let m1 = reg.measure_level(src, src_of_randomness)?;
    let m2 = reg.measure_level(pair.a, src_of_randomness)?;
    let src_outcome = m1.level.expect("level measurement");
    let pair_outcome = m2.level.expect("level measurement");
    // The resource is (|ga⟩+|ag⟩)/√2, so an X is needed unless pair.a read a.
    let x = pair_outcome == Level::G;
    let z = src_outcome == Level::A;
    if x {
        reg.apply_sector_unitary(pair.b, &SectorUnitary::x(Sector::GA))?;
    }
    if z {
        reg.apply_sector_unitary(pair.b, &SectorUnitary::z(Sector::GA))?;
    }
    Ok(Correction {
        src,
        dst: pair.b,
        src_outcome,
        pair_outcome,
        x,
        z,
    })
}

/// Transfers the `{gab}` state of qutrit `src` onto qutrit `pairs[0].b`
/// in two `{ga}` rounds.
///
/// The `b` amplitude is first moved onto `helper` (a fresh site at the
/// sending node) so that `src` and `helper` each carry one bit; they are
/// teleported through `pairs[0]` and `pairs[1]` and recombined on the
/// receiving side, where `pairs[1].b` ends back in `|g⟩`.
pub fn teleport_qutrit<S: OutcomeSource + ?Sized>(
    reg: &mut Register,
    src: usize,
    helper: usize,
    pairs: &mut [BellPair],
    rng: &mut S,
) -> Result<Vec<Correction>, ProtocolError> {
    if pairs.len() < 2 {
        return Err(ProtocolError::InsufficientPairs {
            needed: 2,
            got: pairs.len(),
        });
    }
    if pairs[..2].iter().any(|p| p.consumed) {
        let p = pairs.iter().find(|p| p.consumed).expect("found above");
        return Err(ProtocolError::ConsumedPair { a: p.a, b: p.b });
    }
    let dst = pairs[0].b;
    let aux = pairs[1].b;
    for s in [src, dst] {
        if !reg.site(s)?.contains(Level::B) {
            return Err(ProtocolError::Precondition(format!(
                "site {s} is not a qutrit"
            )));
        }
    }
    require_ground(reg, &[helper], "teleport_qutrit helper")?;

    // g → (g,g), a → (a,g), b → (g,a) on (src, helper)
    cnot(reg, src, Level::B, helper, Sector::GA)?;
    cnot(reg, helper, Level::A, src, Sector::GB)?;

    let (first, rest) = pairs.split_at_mut(1);
    let c1 = teleport_qubit(reg, src, &mut first[0], rng)?;
    let c2 = teleport_qubit(reg, helper, &mut rest[0], rng)?;

    // (g,g) → g, (a,g) → a, (g,a) → b on (dst, aux)
    cnot(reg, aux, Level::A, dst, Sector::GB)?;
    cnot(reg, dst, Level::B, aux, Sector::GA)?;
    Ok(vec![c1, c2])
}

/// Returns measured sites to `|g⟩`.
pub fn reset_sites(reg: &mut Register, sites: &[usize]) -> Result<(), ProtocolError> {
    for &s in sites {
        reg.reset(s)?;
    }
    Ok(())
}

/// `π/2` pulse in `{ab}`: `|a⟩ → (|a⟩ + |b⟩)/√2`.
pub fn start_clock(reg: &mut Register, sites: &[usize]) -> Result<(), ProtocolError> {
    let u = SectorUnitary::ry(Sector::AB, FRAC_PI_2);
    for &s in sites {
        reg.apply_sector_unitary(s, &u)?;
    }
    Ok(())
}

/// Per-node stochastic phases of one shot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoisePhases {
    /// Extra phase on level `b` (clock dephasing).
    pub clock: [f64; 3],
    /// Extra phase on levels `a` and `b` (nuclear-spin dephasing).
    pub metastable: [f64; 3],
}

/// Free evolution of the atoms of each node.
///
/// Every site listed for node `k` gains `scale·φ'_k` on level `a` and
/// `scale·(θ_k + φ'_k)` on level `b`; the noise phases of node `k` are
/// applied once, on its first site. Pass `scale = N` for the GHZ fast
/// path and `1` when each atom is simulated.
pub fn free_evolve(
    reg: &mut Register,
    node_sites: [&[usize]; 3],
    phases: &PhaseSet,
    scale: f64,
    noise: &NoisePhases,
) -> Result<(), ProtocolError> {
    for (k, sites) in node_sites.iter().enumerate() {
        free_evolve_node(reg, k, sites, phases, scale, noise)?;
    }
    Ok(())
}

/// [`free_evolve`] restricted to node `k`.
pub fn free_evolve_node(
    reg: &mut Register,
    k: usize,
    sites: &[usize],
    phases: &PhaseSet,
    scale: f64,
    noise: &NoisePhases,
) -> Result<(), ProtocolError> {
    if phases.num_nodes() != 3 || k > 2 {
        return Err(ProtocolError::Precondition(
            "free evolution needs 3 node phases".into(),
        ));
    }
    let theta = scale * phases.theta[k];
    let phi = scale * phases.node_phi(k);
    for (i, &s) in sites.iter().enumerate() {
        let (na, nb) = if i == 0 {
            (noise.metastable[k], noise.metastable[k] + noise.clock[k])
        } else {
            (0.0, 0.0)
        };
        reg.apply_phase(s, Level::A, phi + na)?;
        reg.apply_phase(s, Level::B, theta + phi + nb)?;
    }
    Ok(())
}

/// Outcome of the ancilla in the global clock readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Clock found in `a`.
    Plus,
    /// Clock found in `b`.
    Minus,
}

/// Hadamard in `{ab}` on each qutrit, then a `{ab}`-parity transfer onto
/// `ancilla` (a fresh `{ga}` site), then an ancilla measurement.
/// The ancilla is left in its measured level.
pub fn global_clock_readout<S: OutcomeSource + ?Sized>(
    reg: &mut Register,
    qutrits: [usize; 3],
    ancilla: usize,
    rng: &mut S,
) -> Result<Branch, ProtocolError> {
    Ok(global_clock_readout_record(reg, qutrits, ancilla, rng)?.0)
}

/// [`global_clock_readout`] that also returns the ancilla record.
pub fn global_clock_readout_record<S: OutcomeSource + ?Sized>(
    reg: &mut Register,
    qutrits: [usize; 3],
    ancilla: usize,
    rng: &mut S,
) -> Result<(Branch, MeasurementRecord), ProtocolError> {
    require_ground(reg, &[ancilla], "global_clock_readout ancilla")?;
    let h = SectorUnitary::hadamard(Sector::AB);
    for &q in &qutrits {
        reg.apply_sector_unitary(q, &h)?;
    }
    for &q in &qutrits {
        cnot(reg, q, Level::B, ancilla, Sector::GA)?;
    }
    let rec = reg.measure_level(ancilla, rng)?;
    let branch = match rec.level {
        Some(Level::G) => Branch::Plus,
        _ => Branch::Minus,
    };
    Ok((branch, rec))
}

/// Global `{ab}` X on the branch where the clock was found in `b`.
pub fn conditional_global_x(
    reg: &mut Register,
    qutrits: [usize; 3],
    branch: Branch,
) -> Result<(), ProtocolError> {
    if branch == Branch::Minus {
        let x = SectorUnitary::x(Sector::AB);
        for &q in &qutrits {
            reg.apply_sector_unitary(q, &x)?;
        }
    }
    Ok(())
}

/// How the Fourier-basis measurement is realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierRealization {
    /// Projectors onto `|x⟩` plus their complement.
    #[default]
    DirectProjector,
    /// Compress the excitation onto the first qutrit, apply the 3-point
    /// DFT there, and measure.
    QftCircuit,
}

fn one_hot(levels: [Level; 3]) -> usize {
    levels.iter().fold(0, |acc, l| acc * 3 + *l as usize)
}

/// Projectors `|x⟩⟨x|` on three qutrits in site order.
pub fn fourier_projectors(qutrits: [usize; 3]) -> ProjectorSet {
    use Level::{A, G};
    let basis = [one_hot([A, G, G]), one_hot([G, A, G]), one_hot([G, G, A])];
    let projectors = (0..3)
        .map(|x| {
            let mut v = vec![C64::new(0.0, 0.0); 27];
            for (k, &idx) in basis.iter().enumerate() {
                v[idx] = C64::from_polar(1.0 / 3f64.sqrt(), k as f64 * fourier_angle(x));
            }
            vec![v]
        })
        .collect();
    ProjectorSet::new(qutrits.to_vec(), 27, projectors).expect("Fourier vectors are orthonormal")
}

fn compressed_projectors(qutrits: [usize; 3]) -> ProjectorSet {
    use Level::{A, B, G};
    let projectors = [G, A, B]
        .iter()
        .map(|&l| {
            let mut v = vec![C64::new(0.0, 0.0); 27];
            v[one_hot([l, G, G])] = C64::new(1.0, 0.0);
            vec![v]
        })
        .collect();
    ProjectorSet::new(qutrits.to_vec(), 27, projectors).expect("basis vectors are orthonormal")
}

/// Maps `|agg⟩, |gag⟩, |gga⟩` onto `|ggg⟩, |agg⟩, |bgg⟩` and applies
/// `U[x][k] = e^{−i k w_x}/√3` to the first qutrit.
pub fn qft_compress(reg: &mut Register, qutrits: [usize; 3]) -> Result<(), ProtocolError> {
    let [s0, s1, s2] = qutrits;
    reg.apply_sector_unitary(s0, &SectorUnitary::x(Sector::GA))?;
    cnot(reg, s2, Level::A, s0, Sector::AB)?;
    cnot(reg, s0, Level::A, s1, Sector::GA)?;
    cnot(reg, s0, Level::B, s2, Sector::GA)?;
    let u: Vec<Vec<C64>> = (0..3)
        .map(|x| {
            (0..3)
                .map(|k| C64::from_polar(1.0 / 3f64.sqrt(), -(k as f64) * fourier_angle(x)))
                .collect()
        })
        .collect();
    reg.apply_site_unitary(s0, &u)?;
    Ok(())
}

/// Projector set whose outcome `x` is the Fourier outcome after the
/// chosen realization's preprocessing (see [`prepare_fourier`]).
pub fn fourier_outcome_set(qutrits: [usize; 3], realization: FourierRealization) -> ProjectorSet {
    match realization {
        FourierRealization::DirectProjector => fourier_projectors(qutrits),
        FourierRealization::QftCircuit => compressed_projectors(qutrits),
    }
}

/// Unitary preprocessing before the outcome projectors are measured.
pub fn prepare_fourier(
    reg: &mut Register,
    qutrits: [usize; 3],
    realization: FourierRealization,
) -> Result<(), ProtocolError> {
    match realization {
        FourierRealization::DirectProjector => Ok(()),
        FourierRealization::QftCircuit => qft_compress(reg, qutrits),
    }
}

/// Measures the Fourier outcome; `None` is the complement (null) outcome.
pub fn fourier_measure<S: OutcomeSource + ?Sized>(
    reg: &mut Register,
    qutrits: [usize; 3],
    rng: &mut S,
    realization: FourierRealization,
) -> Result<Option<usize>, ProtocolError> {
    prepare_fourier(reg, qutrits, realization)?;
    let set = fourier_outcome_set(qutrits, realization);
    let rec = reg.measure_projectors(&set, rng)?;
    Ok(if rec.is_complement() {
        None
    } else {
        Some(rec.outcome)
    })
}
