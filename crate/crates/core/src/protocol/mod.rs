//! The distributed-clock circuit: W-state creation, optional
//! teleportation to remote nodes, clock start, GHZ amplification, free
//! evolution, teleportation back, global clock readout and Fourier-basis
//! measurement.
//!
//! Register layout (site-major, site 0 most significant):
//!
//! | mode        | sites                                                |
//! |-------------|------------------------------------------------------|
//! | Logical     | `w0 w1 w2` qutrits, ancilla qubit, GHZ extras        |
//! | FullNetwork | `w0 w1 w2 q1 q2` qutrits, `n f1 f2 h` qubits, extras |
//!
//! In full-network mode `q1, q2` are the remote-node atoms, `n` is the
//! node-0 half of every Bell pair (and later the readout ancilla), `f1, f2`
//! are remote Bell halves and `h` is the qutrit-teleport helper. Measured
//! sites are reset and reused.

mod circuits;
mod ghz;

pub use circuits::{
    conditional_global_x, fourier_measure, fourier_outcome_set, fourier_projectors, free_evolve,
    free_evolve_node, global_clock_readout, global_clock_readout_record, prepare_bell,
    prepare_fourier, prepare_noisy_bell, prepare_w, qft_compress, reset_sites, start_clock,
    teleport_qubit, teleport_qutrit, BellPair, Branch, Correction, FourierRealization, NoisePhases,
};
pub use ghz::{ghz_build, ghz_unbuild, GhzNode, GhzPath, GhzSchedule, MAX_CIRCUIT_GHZ};

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{AnalyticError, NoiseModel};
use crate::qsim::{Forced, QsimError, Register, Sector, SiteSpec, MAX_AMPLITUDES};
use crate::spacetime::{phases_at, ClockSpec, PhaseSet, SpacetimeConfig, SpacetimeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("Bell pair ({a}, {b}) was already consumed")]
    ConsumedPair { a: usize, b: usize },
    #[error("need {needed} Bell pairs, got {got}")]
    InsufficientPairs { needed: usize, got: usize },
    #[error("invalid protocol config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkMode {
    /// All three clock atoms stay at node 0; no teleportation.
    #[default]
    Logical,
    /// W-state arms are teleported to two remote nodes and back.
    FullNetwork,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub mode: NetworkMode,
    /// Atoms per node.
    pub ghz_n: u32,
    /// `None` picks the circuit for `N ≤ 6` and the fast path above.
    pub ghz_path: Option<GhzPath>,
    pub ghz_schedule: GhzSchedule,
    pub measurement: FourierRealization,
    /// Probability that the conditional global X decision is flipped.
    pub leakage: f64,
    /// Standard deviation (rad) of a random phase on each Bell pair.
    pub bell_phase_noise: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            mode: NetworkMode::Logical,
            ghz_n: 1,
            ghz_path: None,
            ghz_schedule: GhzSchedule::NodeSequential,
            measurement: FourierRealization::DirectProjector,
            leakage: 0.0,
            bell_phase_noise: 0.0,
        }
    }
}

impl ProtocolConfig {
    pub fn effective_ghz_path(&self) -> GhzPath {
        self.ghz_path.unwrap_or(if self.ghz_n <= MAX_CIRCUIT_GHZ {
            GhzPath::Circuit
        } else {
            GhzPath::FastPhase
        })
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.ghz_n == 0 {
            return Err(ProtocolError::Config("ghz_n must be at least 1".into()));
        }
        if self.effective_ghz_path() == GhzPath::Circuit && self.ghz_n > MAX_CIRCUIT_GHZ {
            return Err(ProtocolError::Config(format!(
                "the circuit GHZ path supports N ≤ {MAX_CIRCUIT_GHZ}; use fast_phase for N = {}",
                self.ghz_n
            )));
        }
        if !(0.0..=1.0).contains(&self.leakage) {
            return Err(ProtocolError::Config("leakage must lie in [0, 1]".into()));
        }
        if !(self.bell_phase_noise >= 0.0 && self.bell_phase_noise.is_finite()) {
            return Err(ProtocolError::Config(
                "bell_phase_noise must be non-negative".into(),
            ));
        }
        let amps = Layout::new(self)?.amplitude_count();
        if amps > MAX_AMPLITUDES {
            return Err(ProtocolError::Config(format!(
                "register would need {amps} amplitudes; use the node_sequential GHZ schedule \
                 or the fast_phase path"
            )));
        }
        Ok(())
    }

    fn circuit_extras(&self) -> usize {
        if self.effective_ghz_path() == GhzPath::Circuit {
            self.ghz_n as usize - 1
        } else {
            0
        }
    }

    /// Phase multiplier applied in free evolution.
    fn phase_scale(&self) -> f64 {
        match self.effective_ghz_path() {
            GhzPath::FastPhase => self.ghz_n as f64,
            GhzPath::Circuit => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct NetworkSites {
    remote: [usize; 2],
    near: usize,
    far: [usize; 2],
    helper: usize,
}

/// Site assignment for one configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    sites: Vec<SiteSpec>,
    /// Node-0 qutrits that are prepared and finally measured.
    pub local: [usize; 3],
    pub ancilla: usize,
    network: Option<NetworkSites>,
    /// GHZ extras per node (identical lists under the sequential schedule).
    extras: [Vec<usize>; 3],
}

impl Layout {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self, ProtocolError> {
        if cfg.ghz_n == 0 {
            return Err(ProtocolError::Config("ghz_n must be at least 1".into()));
        }
        let mut sites = vec![SiteSpec::qutrit(); 3];
        let mut network = None;
        let ancilla;
        match cfg.mode {
            NetworkMode::Logical => {
                ancilla = 3;
                sites.push(SiteSpec::qubit());
            }
            NetworkMode::FullNetwork => {
                sites.extend([SiteSpec::qutrit(), SiteSpec::qutrit()]);
                sites.extend(vec![SiteSpec::qubit(); 4]);
                network = Some(NetworkSites {
                    remote: [3, 4],
                    near: 5,
                    far: [6, 7],
                    helper: 8,
                });
                ancilla = 5;
            }
        }
        let k = cfg.circuit_extras();
        let alloc = |sites: &mut Vec<SiteSpec>| -> Vec<usize> {
            let start = sites.len();
            sites.extend(vec![SiteSpec::qutrit(); k]);
            (start..start + k).collect()
        };
        let extras = match cfg.ghz_schedule {
            GhzSchedule::NodeSequential => {
                let shared = alloc(&mut sites);
                [shared.clone(), shared.clone(), shared]
            }
            GhzSchedule::Simultaneous => {
                let a = alloc(&mut sites);
                let b = alloc(&mut sites);
                let c = alloc(&mut sites);
                [a, b, c]
            }
        };
        Ok(Layout {
            sites,
            local: [0, 1, 2],
            ancilla,
            network,
            extras,
        })
    }

    pub fn sites(&self) -> &[SiteSpec] {
        &self.sites
    }

    pub fn amplitude_count(&self) -> usize {
        self.sites.iter().map(|s| s.dim()).product()
    }

    /// Sites carrying the clock of each node during free evolution.
    pub fn clock_sites(&self) -> [usize; 3] {
        match self.network {
            Some(n) => [self.local[0], n.remote[0], n.remote[1]],
            None => self.local,
        }
    }

    pub fn ghz_node(&self, node: usize) -> GhzNode {
        GhzNode {
            science: self.clock_sites()[node],
            extras: self.extras[node].clone(),
        }
    }
}

/// Record of one experimental run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotOutcome {
    pub branch: Branch,
    /// Fourier outcome, `None` for the null outcome.
    pub fourier: Option<usize>,
    pub corrections: Vec<Correction>,
    pub noise: NoisePhases,
    /// True when the conditional X decision was flipped.
    pub leaked: bool,
}

/// Draws per-node dephasing phases for evolution time `t`.
pub fn draw_noise<R: Rng + ?Sized>(
    model: &NoiseModel,
    t: f64,
    ghz_n: u32,
    rng: &mut R,
) -> NoisePhases {
    let mut out = NoisePhases::default();
    let sc = model.clock_phase_std(t, ghz_n);
    let sm = model.metastable_phase_std(t, ghz_n);
    if sc > 0.0 {
        let d = Normal::new(0.0, sc).expect("finite std");
        for v in &mut out.clock {
            *v = d.sample(rng);
        }
    }
    if sm > 0.0 {
        let d = Normal::new(0.0, sm).expect("finite std");
        for v in &mut out.metastable {
            *v = d.sample(rng);
        }
    }
    out
}

/// Runs every stage up to (not including) the global clock readout and
/// returns the register, with the clock state back on the node-0 qutrits.
pub fn evolve_register<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    layout: &Layout,
    phases: &PhaseSet,
    noise: &NoisePhases,
    rng: &mut R,
) -> Result<(Register, Vec<Correction>), ProtocolError> {
    let mut reg = Register::new(layout.sites.clone())?;
    let mut log = Vec::new();
    prepare_w(&mut reg, layout.local)?;

    if let Some(net) = layout.network {
        for j in 0..2 {
            let mut pair = bell(cfg, &mut reg, net.near, net.remote[j], rng)?;
            log.push(teleport_qubit(
                &mut reg,
                layout.local[j + 1],
                &mut pair,
                rng,
            )?);
            reset_sites(&mut reg, &[layout.local[j + 1], net.near])?;
        }
    }

    let clocks = layout.clock_sites();
    let scale = cfg.phase_scale();
    if cfg.circuit_extras() == 0 {
        start_clock(&mut reg, &clocks)?;
        free_evolve(
            &mut reg,
            [&[clocks[0]], &[clocks[1]], &[clocks[2]]],
            phases,
            scale,
            noise,
        )?;
    } else {
        match cfg.ghz_schedule {
            GhzSchedule::Simultaneous => {
                let nodes: Vec<GhzNode> = (0..3).map(|k| layout.ghz_node(k)).collect();
                for n in &nodes {
                    ghz_build(&mut reg, n, Sector::GA)?;
                }
                start_clock(&mut reg, &clocks)?;
                for n in &nodes {
                    ghz_build(&mut reg, n, Sector::AB)?;
                }
                let s: Vec<Vec<usize>> = nodes.iter().map(|n| n.sites()).collect();
                free_evolve(&mut reg, [&s[0], &s[1], &s[2]], phases, scale, noise)?;
                for n in &nodes {
                    ghz_unbuild(&mut reg, n, Sector::AB)?;
                    ghz_unbuild(&mut reg, n, Sector::GA)?;
                }
            }
            GhzSchedule::NodeSequential => {
                for k in 0..3 {
                    let n = layout.ghz_node(k);
                    ghz_build(&mut reg, &n, Sector::GA)?;
                    start_clock(&mut reg, &[n.science])?;
                    ghz_build(&mut reg, &n, Sector::AB)?;
                    free_evolve_node(&mut reg, k, &n.sites(), phases, scale, noise)?;
                    ghz_unbuild(&mut reg, &n, Sector::AB)?;
                    ghz_unbuild(&mut reg, &n, Sector::GA)?;
                }
            }
        }
    }

    if let Some(net) = layout.network {
        for j in 0..2 {
            let p1 = bell(cfg, &mut reg, net.far[0], layout.local[j + 1], rng)?;
            let p2 = bell(cfg, &mut reg, net.far[1], net.near, rng)?;
            let mut pairs = [p1, p2];
            log.extend(teleport_qutrit(
                &mut reg,
                net.remote[j],
                net.helper,
                &mut pairs,
                rng,
            )?);
            reset_sites(
                &mut reg,
                &[net.remote[j], net.helper, net.far[0], net.far[1]],
            )?;
        }
    }
    Ok((reg, log))
}

fn bell<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    reg: &mut Register,
    a: usize,
    b: usize,
    rng: &mut R,
) -> Result<BellPair, ProtocolError> {
    if cfg.bell_phase_noise > 0.0 {
        let d = Normal::new(0.0, cfg.bell_phase_noise).expect("validated std");
        prepare_noisy_bell(reg, a, b, d.sample(rng))
    } else {
        prepare_bell(reg, a, b)
    }
}

/// One shot with given phases and noise draws.
pub fn run_shot_with_phases<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    layout: &Layout,
    phases: &PhaseSet,
    noise: NoisePhases,
    rng: &mut R,
) -> Result<ShotOutcome, ProtocolError> {
    let (mut reg, corrections) = evolve_register(cfg, layout, phases, &noise, rng)?;
    let branch = global_clock_readout(&mut reg, layout.local, layout.ancilla, rng)?;
    let leaked = cfg.leakage > 0.0 && rng.random::<f64>() < cfg.leakage;
    let applied = match (branch, leaked) {
        (b, false) => b,
        (Branch::Plus, true) => Branch::Minus,
        (Branch::Minus, true) => Branch::Plus,
    };
    conditional_global_x(&mut reg, layout.local, applied)?;
    let fourier = fourier_measure(&mut reg, layout.local, rng, cfg.measurement)?;
    Ok(ShotOutcome {
        branch,
        fourier,
        corrections,
        noise,
        leaked,
    })
}

/// Full shot at coordinate time `t`, drawing dephasing from `noise`.
pub fn run_shot<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    spacetime: &SpacetimeConfig,
    clocks: &ClockSpec,
    t: f64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ShotOutcome, ProtocolError> {
    cfg.validate()?;
    let layout = Layout::new(cfg)?;
    let phases = phases_at(spacetime, clocks, t)?;
    let draws = draw_noise(noise, t, cfg.ghz_n, rng);
    run_shot_with_phases(cfg, &layout, &phases, draws, rng)
}

/// Exact outcome probabilities of one fixed-noise Logical-mode shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub branch_plus: f64,
    pub fourier: [f64; 3],
    pub null: f64,
}

/// Born probabilities of every readout outcome, from the simulated
/// register with the ancilla branches enumerated. Requires Logical mode,
/// where no other measurement happens before readout.
pub fn outcome_distribution(
    cfg: &ProtocolConfig,
    phases: &PhaseSet,
    noise: &NoisePhases,
) -> Result<OutcomeDistribution, ProtocolError> {
    if cfg.mode != NetworkMode::Logical {
        return Err(ProtocolError::Config(
            "exact outcome enumeration needs logical mode".into(),
        ));
    }
    cfg.validate()?;
    let layout = Layout::new(cfg)?;
    // logical mode performs no measurement before readout
    let mut unused = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let (reg, _) = evolve_register(cfg, &layout, phases, noise, &mut unused)?;
    let mut out = OutcomeDistribution {
        branch_plus: 0.0,
        fourier: [0.0; 3],
        null: 0.0,
    };
    for (idx, branch) in [(0usize, Branch::Plus), (1, Branch::Minus)] {
        let mut r = reg.clone();
        let w = match global_clock_readout_record(
            &mut r,
            layout.local,
            layout.ancilla,
            &mut Forced::new([idx]),
        ) {
            Ok((_, rec)) => rec.probability,
            Err(ProtocolError::Qsim(QsimError::ImpossibleOutcome { .. })) => continue,
            Err(e) => return Err(e),
        };
        if branch == Branch::Plus {
            out.branch_plus = w;
        }
        for (flip, weight) in [(false, 1.0 - cfg.leakage), (true, cfg.leakage)] {
            if weight == 0.0 {
                continue;
            }
            let mut s = r.clone();
            let applied = if flip { other(branch) } else { branch };
            conditional_global_x(&mut s, layout.local, applied)?;
            prepare_fourier(&mut s, layout.local, cfg.measurement)?;
            let p =
                s.projector_probabilities(&fourier_outcome_set(layout.local, cfg.measurement))?;
            for x in 0..3 {
                out.fourier[x] += w * weight * p[x];
            }
            out.null += w * weight * p[3];
        }
    }
    Ok(out)
}

fn other(b: Branch) -> Branch {
    match b {
        Branch::Plus => Branch::Minus,
        Branch::Minus => Branch::Plus,
    }
}
