//! Closed-form expectation values of the Fourier-basis projectors.
//!
//! With node phases `θ_k` (clock, level b) and `φ'_k` (nuclear spin, node
//! 0 has `φ'_0 = 0`), the post-readout statistics are
//!
//! ```text
//! ⟨Π_x⟩ = 1/3 + 1/9 Σ_{i<j} [ cos β_ij + cos(β_ij + θ_j − θ_i) ]
//! β_ij  = (j − i) w_x + φ'_j − φ'_i,      w_x = 2πx/3
//! ```
//!
//! which equals `1/3 + 2/9 Σ |⟨c_i|c_j⟩| cos(λ_ij + β_ij)`. Dephasing damps
//! each cosine by the product of the two nodes' coherences.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spacetime::PhaseSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("Fourier outcome must be 0, 1 or 2, got {0}")]
    BadOutcome(usize),
    #[error("expected 3 nodes, got {0}")]
    NodeCount(usize),
    #[error("GHZ size must be at least 1")]
    ZeroGhz,
    #[error("coherence {0} outside [0, 1]")]
    BadCoherence(f64),
    #[error("T2 must be positive, got {0}")]
    BadT2(f64),
    #[error("subset must name at least one node")]
    EmptySubset,
}

/// `⟨c(θ_i)|c(θ_j)⟩ = |·| e^{−iλ}` for `|c(θ)⟩ = (|a⟩ + e^{−iθ}|b⟩)/√2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    pub magnitude: f64,
    /// In `(−π, π]`.
    pub lambda: f64,
}

impl Overlap {
    pub fn value(&self) -> C64 {
        C64::from_polar(self.magnitude, -self.lambda)
    }
}

pub fn clock_overlap(theta_i: f64, theta_j: f64) -> Overlap {
    let ov = (C64::new(1.0, 0.0) + C64::from_polar(1.0, -(theta_j - theta_i))) / 2.0;
    let magnitude = ov.norm();
    let mut lambda = -ov.arg();
    if lambda <= -std::f64::consts::PI {
        lambda += TAU;
    }
    if magnitude < 1e-300 {
        lambda = 0.0;
    }
    Overlap { magnitude, lambda }
}

/// Per-atom white frequency noise. Each atom's clock coherence decays as
/// `exp(−t/T2)`; an `N`-atom super-atom decays `N` times faster.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Dephasing time of the `{ab}` clock coherence (s).
    #[serde(default)]
    pub clock_t2: Option<f64>,
    /// Dephasing time of the `{ga}` coherence (s); off by default.
    #[serde(default)]
    pub metastable_t2: Option<f64>,
}

impl NoiseModel {
    pub fn clock(t2: f64) -> Self {
        NoiseModel {
            clock_t2: Some(t2),
            metastable_t2: None,
        }
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        for t2 in [self.clock_t2, self.metastable_t2].into_iter().flatten() {
            if !(t2 > 0.0) {
                return Err(AnalyticError::BadT2(t2));
            }
        }
        Ok(())
    }

    pub fn is_off(&self) -> bool {
        self.clock_t2.is_none() && self.metastable_t2.is_none()
    }

    /// Standard deviation of one node's clock phase noise at time `t`.
    pub fn clock_phase_std(&self, t: f64, ghz_n: u32) -> f64 {
        self.clock_t2.map_or(0.0, |t2| phase_std(t, t2, ghz_n))
    }

    pub fn metastable_phase_std(&self, t: f64, ghz_n: u32) -> f64 {
        self.metastable_t2.map_or(0.0, |t2| phase_std(t, t2, ghz_n))
    }
}

/// `sqrt(2Nt/T2)`: Gaussian phase whose mean phasor is `exp(−Nt/T2)`.
pub fn phase_std(t: f64, t2: f64, ghz_n: u32) -> f64 {
    (2.0 * ghz_n as f64 * t / t2).sqrt()
}

/// Single-node coherence `exp(−Nt/T2)`.
pub fn coherence(t: f64, t2: f64, ghz_n: u32) -> f64 {
    (-(ghz_n as f64) * t / t2).exp()
}

/// Decay of one two-node interference term, `exp(−2Nt/T2)`.
pub fn envelope(t: f64, t2: f64, ghz_n: u32) -> Result<f64, AnalyticError> {
    if !(t2 > 0.0) {
        return Err(AnalyticError::BadT2(t2));
    }
    Ok(coherence(t, t2, ghz_n).powi(2))
}

/// Inputs of the closed-form observable for a three-node network.
///
/// Phases are single-atom values; [`expected_pi`] multiplies them by
/// `ghz_n`. Coherences are per node, so the envelope of pair `(i, j)` is
/// `clock_coherence[i] · clock_coherence[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableParams {
    pub theta: [f64; 3],
    /// `φ` of nodes 1 and 2 relative to node 0.
    pub phi: [f64; 2],
    pub ghz_n: u32,
    pub clock_coherence: [f64; 3],
    pub metastable_coherence: [f64; 3],
}

impl ObservableParams {
    pub fn new(theta: [f64; 3], phi: [f64; 2]) -> Self {
        ObservableParams {
            theta,
            phi,
            ghz_n: 1,
            clock_coherence: [1.0; 3],
            metastable_coherence: [1.0; 3],
        }
    }

    pub fn from_phases(phases: &PhaseSet) -> Result<Self, AnalyticError> {
        if phases.theta.len() != 3 || phases.phi.len() != 2 {
            return Err(AnalyticError::NodeCount(phases.theta.len()));
        }
        Ok(Self::new(
            [phases.theta[0], phases.theta[1], phases.theta[2]],
            [phases.phi[0], phases.phi[1]],
        ))
    }

    pub fn with_ghz(mut self, n: u32) -> Self {
        self.ghz_n = n;
        self
    }

    /// Ensemble-averaged coherences after time `t` under `noise`.
    pub fn with_noise(mut self, noise: &NoiseModel, t: f64) -> Self {
        if let Some(t2) = noise.clock_t2 {
            self.clock_coherence = [coherence(t, t2, self.ghz_n); 3];
        }
        if let Some(t2) = noise.metastable_t2 {
            self.metastable_coherence = [coherence(t, t2, self.ghz_n); 3];
        }
        self
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        if self.ghz_n == 0 {
            return Err(AnalyticError::ZeroGhz);
        }
        for &c in self
            .clock_coherence
            .iter()
            .chain(&self.metastable_coherence)
        {
            if !(0.0..=1.0).contains(&c) {
                return Err(AnalyticError::BadCoherence(c));
            }
        }
        Ok(())
    }

    /// Clock phases after GHZ multiplication.
    pub fn effective_theta(&self) -> [f64; 3] {
        let n = self.ghz_n as f64;
        self.theta.map(|t| t * n)
    }

    /// `φ'_k` after GHZ multiplication, with `φ'_0 = 0`.
    pub fn effective_phi(&self) -> [f64; 3] {
        let n = self.ghz_n as f64;
        [0.0, self.phi[0] * n, self.phi[1] * n]
    }

    pub fn clock_envelope(&self, i: usize, j: usize) -> f64 {
        self.clock_coherence[i] * self.clock_coherence[j]
    }

    pub fn metastable_envelope(&self, i: usize, j: usize) -> f64 {
        self.metastable_coherence[i] * self.metastable_coherence[j]
    }
}

pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// `w_x = 2πx/3`.
pub fn fourier_angle(x: usize) -> f64 {
    TAU * x as f64 / 3.0
}

/// `[cos β_ij, cos(β_ij + θ_j − θ_i)]` weighted by the envelopes.
fn pair_terms(x: usize, p: &ObservableParams, i: usize, j: usize) -> (f64, f64) {
    let th = p.effective_theta();
    let ph = p.effective_phi();
    let beta = (j - i) as f64 * fourier_angle(x) + ph[j] - ph[i];
    let m = p.metastable_envelope(i, j);
    let c = p.clock_envelope(i, j) * m;
    (m * beta.cos(), c * (beta + th[j] - th[i]).cos())
}

/// `⟨Π_x⟩` including GHZ scaling and dephasing envelopes.
pub fn expected_pi(x: usize, p: &ObservableParams) -> Result<f64, AnalyticError> {
    expected_pi_subset(x, p, [true; 3])
}

/// Probability of outcome `x` when only the nodes flagged in `subset`
/// carry their `1/√3` branch; the others are shelved and contribute
/// neither population nor interference.
pub fn expected_pi_subset(
    x: usize,
    p: &ObservableParams,
    subset: [bool; 3],
) -> Result<f64, AnalyticError> {
    if x > 2 {
        return Err(AnalyticError::BadOutcome(x));
    }
    p.validate()?;
    let count = subset.iter().filter(|&&s| s).count();
    if count == 0 {
        return Err(AnalyticError::EmptySubset);
    }
    let mut sum = 0.0;
    for (i, j) in PAIRS {
        if subset[i] && subset[j] {
            let (a, b) = pair_terms(x, p, i, j);
            sum += a + b;
        }
    }
    Ok((count as f64 + sum) / 9.0)
}

/// All three outcome probabilities.
pub fn distribution(p: &ObservableParams) -> Result<[f64; 3], AnalyticError> {
    Ok([expected_pi(0, p)?, expected_pi(1, p)?, expected_pi(2, p)?])
}

/// Noiseless `⟨Π_x⟩` written through the clock-state overlaps,
/// `1/3 + 2/9 Σ |⟨c_i|c_j⟩| cos(λ_ij + β_ij)`.
pub fn expected_pi_overlap_form(
    x: usize,
    theta: [f64; 3],
    phi: [f64; 2],
) -> Result<f64, AnalyticError> {
    if x > 2 {
        return Err(AnalyticError::BadOutcome(x));
    }
    let ph = [0.0, phi[0], phi[1]];
    let mut sum = 0.0;
    for (i, j) in PAIRS {
        let ov = clock_overlap(theta[i], theta[j]);
        let beta = (j - i) as f64 * fourier_angle(x) + ph[j] - ph[i];
        sum += ov.magnitude * (ov.lambda + beta).cos();
    }
    Ok(1.0 / 3.0 + 2.0 / 9.0 * sum)
}

/// Probability of the `+` (clock in `a`) readout branch,
/// `Σ_j |1 + e^{−iθ_j}|² / 12 = (3 + Σ cos θ_j)/6`.
///
/// Depends on the absolute clock phases, so use the same frame as the
/// simulated register.
pub fn branch_plus_probability(theta: [f64; 3]) -> f64 {
    (3.0 + theta.iter().map(|t| t.cos()).sum::<f64>()) / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn overlap_examples() {
        let o = clock_overlap(0.3, 0.3);
        assert!((o.magnitude - 1.0).abs() < 1e-15 && o.lambda.abs() < 1e-15);
        assert!(clock_overlap(0.0, PI).magnitude < 1e-15);
        assert!((clock_overlap(0.0, PI / 2.0).magnitude - FRAC_1_SQRT_2).abs() < 1e-15);
        let o = clock_overlap(0.2, 0.2 + 3.0 * PI / 2.0);
        assert!(o.lambda > -PI && o.lambda <= PI);
        let direct = (C64::new(1.0, 0.0) + C64::from_polar(1.0, -3.0 * PI / 2.0)) / 2.0;
        assert!((o.value() - direct).norm() < 1e-15);
    }

    #[test]
    fn coherent_start() {
        let p = ObservableParams::new([0.0; 3], [0.0; 2]);
        let d = distribution(&p).unwrap();
        assert_eq!(d[0], 1.0);
        assert!(d[1].abs() < 1e-15 && d[2].abs() < 1e-15);
    }

    #[test]
    fn envelope_values() {
        assert_eq!(envelope(0.0, 50.0, 1).unwrap(), 1.0);
        // N = 100, T2 = 50 s: single-node coherence time 0.5 s
        let c = coherence(0.5, 50.0, 100);
        assert!((c - (-1.0f64).exp()).abs() < 1e-15);
        assert!((envelope(0.5, 50.0, 100).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!(envelope(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn bad_inputs() {
        let p = ObservableParams::new([0.0; 3], [0.0; 2]);
        assert!(expected_pi(3, &p).is_err());
        assert!(expected_pi(0, &p.clone().with_ghz(0)).is_err());
        assert!(expected_pi_subset(0, &p, [false; 3]).is_err());
    }

    #[test]
    fn single_branch_is_flat() {
        let p = ObservableParams::new([0.4, 1.0, -2.0], [0.1, 0.3]);
        for x in 0..3 {
            let v = expected_pi_subset(x, &p, [true, false, false]).unwrap();
            assert!((v - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn branch_probability_limits() {
        assert!((branch_plus_probability([0.0; 3]) - 1.0).abs() < 1e-15);
        assert!(branch_plus_probability([PI; 3]).abs() < 1e-15);
    }

    fn arb_params() -> impl Strategy<Value = ObservableParams> {
        (
            proptest::array::uniform3(-50.0..50.0f64),
            proptest::array::uniform2(-10.0..10.0f64),
            1u32..8,
            proptest::array::uniform3(0.0..=1.0f64),
            proptest::array::uniform3(0.0..=1.0f64),
        )
            .prop_map(|(theta, phi, n, cc, mc)| ObservableParams {
                theta,
                phi,
                ghz_n: n,
                clock_coherence: cc,
                metastable_coherence: mc,
            })
    }

    proptest! {
        #[test]
        fn outcomes_sum_to_one(p in arb_params()) {
            let d = distribution(&p).unwrap();
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for v in d {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }

        #[test]
        fn ghz_scaling(p in arb_params()) {
            let n = p.ghz_n as f64;
            let mut scaled = p.clone();
            scaled.ghz_n = 1;
            scaled.theta = p.theta.map(|t| t * n);
            scaled.phi = p.phi.map(|t| t * n);
            for x in 0..3 {
                let a = expected_pi(x, &p).unwrap();
                let b = expected_pi(x, &scaled).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn common_clock_shift_invisible(
            theta in proptest::array::uniform3(-20.0..20.0f64),
            phi in proptest::array::uniform2(-5.0..5.0f64),
            delta in -100.0..100.0f64,
        ) {
            let p = ObservableParams::new(theta, phi);
            let q = ObservableParams::new(theta.map(|t| t + delta), phi);
            for x in 0..3 {
                prop_assert!((expected_pi(x, &p).unwrap() - expected_pi(x, &q).unwrap()).abs() < 1e-11);
            }
        }

        #[test]
        fn overlap_form_agrees(
            theta in proptest::array::uniform3(-20.0..20.0f64),
            phi in proptest::array::uniform2(-5.0..5.0f64),
        ) {
            let p = ObservableParams::new(theta, phi);
            for x in 0..3 {
                let a = expected_pi(x, &p).unwrap();
                let b = expected_pi_overlap_form(x, theta, phi).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn subsets_are_probabilities(p in arb_params(), mask in 1u8..8) {
            let subset = [mask & 1 != 0, mask & 2 != 0, mask & 4 != 0];
            let k = subset.iter().filter(|&&s| s).count() as f64;
            let total: f64 = (0..3).map(|x| expected_pi_subset(x, &p, subset).unwrap()).sum();
            prop_assert!((total - k / 3.0).abs() < 1e-12);
        }
    }
}
