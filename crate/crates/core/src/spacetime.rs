//! Proper time, clock phases and beat notes for static nodes at different
//! heights in a spherically symmetric field.
//!
//! Node clock phases at optical frequencies reach ~1e18 rad after minutes,
//! far beyond what an `f64` can resolve to the sub-radian level. Every
//! quantity here is therefore computed from *differences* of time-dilation
//! factors using cancellation-free forms, and [`PhaseSet`] carries clock
//! phases in the frame co-rotating with node 0 (the master-laser node).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpacetimeError {
    #[error("invalid spacetime config: {0}")]
    Invalid(String),
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error("node {node} lies inside the horizon (2GM/rc² = {compactness})")]
    Horizon { node: usize, compactness: f64 },
    #[error("operation needs exactly 3 nodes, config has {0}")]
    NeedThreeNodes(usize),
    #[error("nodes are not equally spaced ({lower} m vs {upper} m)")]
    UnequalSpacing { lower: f64, upper: f64 },
    #[error("curvature split is zero; wall time is unbounded")]
    ZeroSplit,
    #[error("coordinate time must be non-negative and finite, got {0}")]
    BadTime(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// `dτ/dt = sqrt(1 − 2GM/(r c²))`
    Exact,
    /// `dτ/dt = 1 − GM/(r c²)`
    #[default]
    WeakField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpacetimeConfig {
    /// Gravitational parameter GM (m³/s²).
    pub gm: f64,
    /// Reference radius R (m); node `j` sits at `R + elevations[j]`.
    pub radius_ref: f64,
    pub light_speed: f64,
    /// Node heights above the reference radius (m), in node order.
    pub elevations: Vec<f64>,
    pub metric_mode: MetricMode,
}

pub const EARTH_GM: f64 = 3.986004418e14;
pub const EARTH_RADIUS: f64 = 6.371e6;
pub const LIGHT_SPEED: f64 = 299_792_458.0;

impl Default for SpacetimeConfig {
    fn default() -> Self {
        SpacetimeConfig::earth(1000.0)
    }
}

impl SpacetimeConfig {
    /// Earth parameters with three nodes at `0, d, 2d`.
    pub fn earth(spacing: f64) -> Self {
        SpacetimeConfig {
            gm: EARTH_GM,
            radius_ref: EARTH_RADIUS,
            light_speed: LIGHT_SPEED,
            elevations: vec![0.0, spacing, 2.0 * spacing],
            metric_mode: MetricMode::WeakField,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.elevations.len()
    }

    pub fn validate(&self) -> Result<(), SpacetimeError> {
        let bad = |m: &str| Err(SpacetimeError::Invalid(m.to_string()));
        if !(self.gm >= 0.0 && self.gm.is_finite()) {
            return bad("gm must be finite and non-negative");
        }
        if !(self.radius_ref > 0.0 && self.radius_ref.is_finite()) {
            return bad("radius_ref must be positive");
        }
        if !(self.light_speed > 0.0 && self.light_speed.is_finite()) {
            return bad("light_speed must be positive");
        }
        if self.elevations.len() < 3 {
            return bad("at least 3 node elevations are required");
        }
        for (node, &d) in self.elevations.iter().enumerate() {
            if !d.is_finite() || self.radius_ref + d <= 0.0 {
                return bad(&format!("elevation of node {node} is not usable"));
            }
            let compactness = self.compactness(node);
            if compactness >= 1.0 {
                return Err(SpacetimeError::Horizon { node, compactness });
            }
        }
        Ok(())
    }

    fn radius(&self, node: usize) -> f64 {
        self.radius_ref + self.elevations[node]
    }

    /// `GM/c²` in metres.
    fn grav_length(&self) -> f64 {
        self.gm / (self.light_speed * self.light_speed)
    }

    /// `2GM/(r c²)` at `node`.
    fn compactness(&self, node: usize) -> f64 {
        2.0 * self.grav_length() / self.radius(node)
    }

    fn check_node(&self, node: usize) -> Result<(), SpacetimeError> {
        if node >= self.elevations.len() {
            return Err(SpacetimeError::NodeOutOfRange(node));
        }
        let compactness = self.compactness(node);
        if self.metric_mode == MetricMode::Exact && compactness >= 1.0 {
            return Err(SpacetimeError::Horizon { node, compactness });
        }
        Ok(())
    }
}

/// Sign of an energy difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Clock and nuclear-spin energy scales.
///
/// `clock_sign` is the sign of `E_b − E_a` and `metastable_sign` that of
/// `E_g − E_a`. In Yb-171 `|b⟩` is the ground ¹S₀ state, so both default
/// to negative, which makes the lower node's beat notes positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClockSpec {
    /// |E_b − E_a| / h (Hz).
    pub clock_freq: f64,
    /// |E_g − E_a| / h (Hz).
    pub metastable_freq: f64,
    pub clock_sign: Sign,
    pub metastable_sign: Sign,
}

impl Default for ClockSpec {
    fn default() -> Self {
        ClockSpec {
            clock_freq: 5.2e14,
            metastable_freq: 1.0e5,
            clock_sign: Sign::Negative,
            metastable_sign: Sign::Negative,
        }
    }
}

impl ClockSpec {
    pub fn validate(&self) -> Result<(), SpacetimeError> {
        if !(self.clock_freq > 0.0 && self.clock_freq.is_finite()) {
            return Err(SpacetimeError::Invalid(
                "clock_freq must be positive".into(),
            ));
        }
        if !(self.metastable_freq >= 0.0 && self.metastable_freq.is_finite()) {
            return Err(SpacetimeError::Invalid(
                "metastable_freq must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Signed angular clock frequency `(E_b − E_a)/ħ`.
    pub fn clock_angular(&self) -> f64 {
        self.clock_sign.value() * TAU * self.clock_freq
    }

    /// Signed angular nuclear-spin frequency `(E_g − E_a)/ħ`.
    pub fn metastable_angular(&self) -> f64 {
        self.metastable_sign.value() * TAU * self.metastable_freq
    }
}

/// Proper-time rate `dτ/dt` of a static clock at `node`.
pub fn proper_time_rate(cfg: &SpacetimeConfig, node: usize) -> Result<f64, SpacetimeError> {
    cfg.check_node(node)?;
    Ok(match cfg.metric_mode {
        MetricMode::Exact => (1.0 - cfg.compactness(node)).sqrt(),
        MetricMode::WeakField => 1.0 - cfg.grav_length() / cfg.radius(node),
    })
}

/// `1 − dτ/dt` at `node`, without cancellation.
pub fn dilation(cfg: &SpacetimeConfig, node: usize) -> Result<f64, SpacetimeError> {
    cfg.check_node(node)?;
    Ok(match cfg.metric_mode {
        MetricMode::Exact => {
            let a = cfg.compactness(node);
            a / (1.0 + (1.0 - a).sqrt())
        }
        MetricMode::WeakField => cfg.grav_length() / cfg.radius(node),
    })
}

/// `rate(i) − rate(j)` evaluated from the elevation difference directly.
pub fn rate_difference(cfg: &SpacetimeConfig, i: usize, j: usize) -> Result<f64, SpacetimeError> {
    cfg.check_node(i)?;
    cfg.check_node(j)?;
    let (ri, rj) = (cfg.radius(i), cfg.radius(j));
    let dr = cfg.elevations[i] - cfg.elevations[j];
    // 1/r_j − 1/r_i
    let inv_diff = dr / (ri * rj);
    Ok(match cfg.metric_mode {
        MetricMode::WeakField => cfg.grav_length() * inv_diff,
        MetricMode::Exact => {
            let si = (1.0 - cfg.compactness(i)).sqrt();
            let sj = (1.0 - cfg.compactness(j)).sqrt();
            2.0 * cfg.grav_length() * inv_diff / (si + sj)
        }
    })
}

/// Evolved phases of every node at one coordinate time.
///
/// `theta[j]` is node `j`'s clock phase `(E_b − E_a)τ_j/ħ` minus node 0's,
/// so `theta[0] == 0`; the dropped common part is `reference_theta`. Only
/// differences between clock phases are observable in the interference
/// signal. `phi[j-1]` is `(E_g − E_a)(τ_0 − τ_j)/ħ` for `j ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSet {
    pub coordinate_time: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Accumulated clock phase of node 0 (lossy for large times).
    pub reference_theta: f64,
    /// `λ_ij` for pairs `(0,1), (0,2), …, (1,2), …` in lexicographic order,
    /// with `⟨c(τ_i)|c(τ_j)⟩ = |·| e^{−iλ_ij}` and `λ ∈ (−π, π]`.
    pub lambda: Vec<f64>,
}

impl PhaseSet {
    /// Phase tuple not tied to a spacetime (coordinate time 0).
    pub fn from_phases(theta: Vec<f64>, phi: Vec<f64>) -> Self {
        let lambda = pair_lambdas(&theta);
        PhaseSet {
            coordinate_time: 0.0,
            theta,
            phi,
            reference_theta: 0.0,
            lambda,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.theta.len()
    }

    /// Clock phases including the common node-0 part.
    pub fn accumulated_theta(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|t| t + self.reference_theta)
            .collect()
    }

    /// Copy with clock and nuclear-spin phases reduced to `(−π, π]`.
    pub fn reduced(&self) -> PhaseSet {
        let theta: Vec<f64> = self.theta.iter().map(|&t| wrap_phase(t)).collect();
        PhaseSet {
            coordinate_time: self.coordinate_time,
            lambda: pair_lambdas(&theta),
            phi: self.phi.iter().map(|&p| wrap_phase(p)).collect(),
            reference_theta: wrap_phase(self.reference_theta),
            theta,
        }
    }

    /// Every phase multiplied by `n` (an `n`-atom GHZ super-atom).
    pub fn scaled(&self, n: f64) -> PhaseSet {
        let theta: Vec<f64> = self.theta.iter().map(|t| t * n).collect();
        PhaseSet {
            coordinate_time: self.coordinate_time,
            lambda: pair_lambdas(&theta),
            phi: self.phi.iter().map(|p| p * n).collect(),
            reference_theta: self.reference_theta * n,
            theta,
        }
    }

    /// `φ` offset of node `j` relative to node 0 (zero for node 0).
    pub fn node_phi(&self, node: usize) -> f64 {
        if node == 0 {
            0.0
        } else {
            self.phi[node - 1]
        }
    }
}

/// Reduces an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn pair_lambdas(theta: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..theta.len() {
        for j in i + 1..theta.len() {
            out.push(crate::analytic::clock_overlap(theta[i], theta[j]).lambda);
        }
    }
    out
}

/// Node phases after coordinate time `t` (seconds of node-0 wall time).
pub fn phases_at(
    cfg: &SpacetimeConfig,
    clocks: &ClockSpec,
    t: f64,
) -> Result<PhaseSet, SpacetimeError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SpacetimeError::BadTime(t));
    }
    cfg.validate()?;
    let n = cfg.num_nodes();
    let wc = clocks.clock_angular();
    let wm = clocks.metastable_angular();
    let mut theta = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n - 1);
    for j in 0..n {
        // τ_j − τ_0 = (rate_j − rate_0) t
        let dtau = rate_difference(cfg, j, 0)? * t;
        theta.push(wc * dtau);
        if j > 0 {
            phi.push(-wm * dtau);
        }
    }
    let lambda = pair_lambdas(&theta);
    Ok(PhaseSet {
        coordinate_time: t,
        theta,
        phi,
        reference_theta: wc * proper_time_rate(cfg, 0)? * t,
        lambda,
    })
}

/// Angular beat frequencies `ω_ij = d(θ_i − θ_j)/dt` (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatFrequencies {
    pub w12: f64,
    pub w23: f64,
    pub w13: f64,
}

impl BeatFrequencies {
    /// Same beats in Hz.
    pub fn hz(&self) -> [f64; 3] {
        [self.w12 / TAU, self.w23 / TAU, self.w13 / TAU]
    }

    pub fn scaled(&self, n: f64) -> BeatFrequencies {
        BeatFrequencies {
            w12: self.w12 * n,
            w23: self.w23 * n,
            w13: self.w13 * n,
        }
    }
}

fn require_three(cfg: &SpacetimeConfig) -> Result<(), SpacetimeError> {
    cfg.validate()?;
    if cfg.num_nodes() != 3 {
        return Err(SpacetimeError::NeedThreeNodes(cfg.num_nodes()));
    }
    Ok(())
}

pub fn beat_frequencies(
    cfg: &SpacetimeConfig,
    clocks: &ClockSpec,
) -> Result<BeatFrequencies, SpacetimeError> {
    require_three(cfg)?;
    let wc = clocks.clock_angular();
    Ok(BeatFrequencies {
        w12: wc * rate_difference(cfg, 0, 1)?,
        w23: wc * rate_difference(cfg, 1, 2)?,
        w13: wc * rate_difference(cfg, 0, 2)?,
    })
}

/// Curvature-induced beat splitting `ω12 − ω23` (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSplit {
    /// From the full rate differences.
    pub exact: f64,
    /// `2 (ΔE/ħ) GM d² / (c² R³)` with `R` the radius of node 0.
    pub leading_order: f64,
    pub residual: f64,
}

fn equal_spacing(cfg: &SpacetimeConfig) -> Result<f64, SpacetimeError> {
    let lower = cfg.elevations[1] - cfg.elevations[0];
    let upper = cfg.elevations[2] - cfg.elevations[1];
    let scale = lower.abs().max(upper.abs()).max(1e-300);
    if (lower - upper).abs() > 1e-9 * scale {
        return Err(SpacetimeError::UnequalSpacing { lower, upper });
    }
    Ok(lower)
}

/// Exact `ω12 − ω23` for any three elevations.
pub fn exact_split(cfg: &SpacetimeConfig, clocks: &ClockSpec) -> Result<f64, SpacetimeError> {
    require_three(cfg)?;
    let wc = clocks.clock_angular();
    Ok(match cfg.metric_mode {
        MetricMode::WeakField => {
            // rate_0 − 2 rate_1 + rate_2 = −(GM/c²)(1/r0 − 2/r1 + 1/r2), and
            // the bracket equals (r1 (a − b) + 2ab)/(r0 r1 r2) with
            // a = r1 − r0, b = r2 − r1.
            let a = cfg.elevations[1] - cfg.elevations[0];
            let b = cfg.elevations[2] - cfg.elevations[1];
            let (r0, r1, r2) = (cfg.radius(0), cfg.radius(1), cfg.radius(2));
            let second = (r1 * (a - b) + 2.0 * a * b) / (r0 * r1 * r2);
            -wc * cfg.grav_length() * second
        }
        MetricMode::Exact => wc * (rate_difference(cfg, 0, 1)? - rate_difference(cfg, 1, 2)?),
    })
}

pub fn curvature_split(
    cfg: &SpacetimeConfig,
    clocks: &ClockSpec,
) -> Result<CurvatureSplit, SpacetimeError> {
    require_three(cfg)?;
    let d = equal_spacing(cfg)?;
    let exact = exact_split(cfg, clocks)?;
    let r = cfg.radius(0);
    let leading_order = 2.0 * TAU * clocks.clock_freq * cfg.grav_length() * d * d / (r * r * r);
    Ok(CurvatureSplit {
        exact,
        leading_order,
        residual: exact - leading_order,
    })
}

/// Interrogation time needed to resolve the curvature split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallTime {
    /// `1/Δω` with Δω the leading-order angular split.
    pub inverse_split: f64,
    /// `2π/Δω`, the time whose FFT bin equals the split in Hz.
    pub fft_resolution: f64,
}

/// Wall time for the leading-order split of an `ghz_n`-atom super-atom
/// network (use 1 for single atoms).
pub fn required_wall_time(
    cfg: &SpacetimeConfig,
    clocks: &ClockSpec,
    ghz_n: u32,
) -> Result<WallTime, SpacetimeError> {
    let split = curvature_split(cfg, clocks)?;
    let dw = split.leading_order * ghz_n.max(1) as f64;
    if !(dw > 0.0) {
        return Err(SpacetimeError::ZeroSplit);
    }
    Ok(WallTime {
        inverse_split: 1.0 / dw,
        fft_resolution: TAU / dw,
    })
}

/// Least-squares fit of the split residual to
/// `(ΔE/ħ)(GM/c²)(c3 d³/R⁴ + c4 d⁴/R⁵)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicFit {
    pub cubic: f64,
    pub quartic: f64,
}

/// Fits the cubic residual coefficient from exact splits at several
/// equal spacings (metres), keeping every other setting of `cfg`.
pub fn fit_cubic_coefficient(
    cfg: &SpacetimeConfig,
    clocks: &ClockSpec,
    spacings: &[f64],
) -> Result<CubicFit, SpacetimeError> {
    if spacings.len() < 2 {
        return Err(SpacetimeError::Invalid("need at least two spacings".into()));
    }
    let r = cfg.radius_ref + cfg.elevations.first().copied().unwrap_or(0.0);
    let k = TAU * clocks.clock_freq * cfg.grav_length();
    // normalized residual y = residual / (k d³/R⁴) = c3 + c4 (d/R)
    let mut pts = Vec::with_capacity(spacings.len());
    for &d in spacings {
        let mut c = cfg.clone();
        let base = c.elevations.first().copied().unwrap_or(0.0);
        c.elevations = vec![base, base + d, base + 2.0 * d];
        let split = curvature_split(&c, clocks)?;
        let x = d / r;
        pts.push((x, split.residual / (k * d.powi(3) / r.powi(4))));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let quartic = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let cubic = (sy - quartic * sx) / n;
    Ok(CubicFit { cubic, quartic })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn flat_spacetime_has_unit_rate() {
        let mut cfg = SpacetimeConfig::earth(1000.0);
        cfg.gm = 0.0;
        for mode in [MetricMode::Exact, MetricMode::WeakField] {
            cfg.metric_mode = mode;
            for node in 0..3 {
                assert_eq!(proper_time_rate(&cfg, node).unwrap(), 1.0);
            }
        }
        let b = beat_frequencies(&cfg, &ClockSpec::default()).unwrap();
        assert_eq!((b.w12, b.w23, b.w13), (0.0, 0.0, 0.0));
        assert_eq!(
            curvature_split(&cfg, &ClockSpec::default()).unwrap().exact,
            0.0
        );
    }

    // Reference values below were evaluated at 50 significant digits.

    #[test]
    fn earth_surface_dilation() {
        let cfg = SpacetimeConfig::earth(1000.0);
        let off = dilation(&cfg, 0).unwrap();
        assert!(rel(off, 6.961_274_586_591_855e-10) < 1e-14);
        let rate = proper_time_rate(&cfg, 0).unwrap();
        assert!(((1.0 - rate) - 6.961_274_586_591_855e-10).abs() < 2.0 * f64::EPSILON);
        let d = rate_difference(&cfg, 1, 0).unwrap();
        assert!(rel(d, 1.092_478_748_680_454_3e-13) < 1e-13);
    }

    #[test]
    fn exact_and_weak_rates_agree() {
        let mut cfg = SpacetimeConfig::earth(1000.0);
        for node in 0..3 {
            cfg.metric_mode = MetricMode::WeakField;
            let w = proper_time_rate(&cfg, node).unwrap();
            cfg.metric_mode = MetricMode::Exact;
            let e = proper_time_rate(&cfg, node).unwrap();
            assert!(rel(e, w) < 1e-9);
        }
        let d = rate_difference(&cfg, 1, 0).unwrap();
        assert!(rel(d, 1.092_478_749_440_899e-13) < 1e-12);
    }

    #[test]
    fn horizon_rejected_in_exact_mode() {
        let mut cfg = SpacetimeConfig::earth(1000.0);
        cfg.metric_mode = MetricMode::Exact;
        cfg.gm = 1e24;
        assert!(matches!(
            proper_time_rate(&cfg, 0),
            Err(SpacetimeError::Horizon { .. })
        ));
    }

    #[test]
    fn earth_beat_frequencies() {
        let b = beat_frequencies(&SpacetimeConfig::earth(1000.0), &ClockSpec::default()).unwrap();
        let [f12, f23, f13] = b.hz();
        assert!(rel(f12, 56.808_894_931_383_624) < 1e-12);
        assert!(rel(f23, 56.791_066_939_878_404) < 1e-12);
        assert!(rel(b.w13, b.w12 + b.w23) < 4.0 * f64::EPSILON);
        assert!(f13 > 113.0);
    }

    #[test]
    fn curvature_split_matches_reference() {
        let cfg = SpacetimeConfig::earth(1000.0);
        let s = curvature_split(&cfg, &ClockSpec::default()).unwrap();
        assert!(rel(s.exact, 0.112_016_574_282_120_97) < 1e-12);
        assert!(rel(s.leading_order, 0.112_069_326_579_619_8) < 1e-14);
        assert!(rel(s.leading_order / TAU, 0.017_836_387_294_126_42) < 1e-14);
        assert!(rel(s.residual, -5.275_229_749_883_086e-5) < 1e-7);
        assert!(rel(s.exact, s.leading_order) < 1e-2);
    }

    #[test]
    fn split_rejects_unequal_spacing() {
        let mut cfg = SpacetimeConfig::earth(1000.0);
        cfg.elevations = vec![0.0, 1000.0, 2500.0];
        assert!(matches!(
            curvature_split(&cfg, &ClockSpec::default()),
            Err(SpacetimeError::UnequalSpacing { .. })
        ));
        // exact difference is still available
        let b = beat_frequencies(&cfg, &ClockSpec::default()).unwrap();
        let e = exact_split(&cfg, &ClockSpec::default()).unwrap();
        assert!(rel(e, b.w12 - b.w23) < 1e-9);
    }

    #[test]
    fn residual_vanishes_faster_than_d_squared() {
        let clocks = ClockSpec::default();
        let mut last = f64::INFINITY;
        for d in [4000.0, 2000.0, 1000.0, 500.0, 250.0] {
            let s = curvature_split(&SpacetimeConfig::earth(d), &clocks).unwrap();
            let ratio = (s.residual / (d * d)).abs();
            assert!(ratio < last * 0.55, "d = {d}: {ratio} vs {last}");
            last = ratio;
        }
    }

    #[test]
    fn cubic_coefficient_fit() {
        let fit = fit_cubic_coefficient(
            &SpacetimeConfig::earth(1000.0),
            &ClockSpec::default(),
            &[500.0, 1000.0, 2000.0, 4000.0],
        )
        .unwrap();
        assert!((fit.cubic + 6.0).abs() < 1e-4, "{fit:?}");
    }

    #[test]
    fn wall_time() {
        let cfg = SpacetimeConfig::earth(1000.0);
        let clocks = ClockSpec::default();
        let t = required_wall_time(&cfg, &clocks, 1).unwrap();
        assert!(rel(t.inverse_split, 8.923_048_174_912_952) < 1e-13);
        assert!(rel(t.fft_resolution, 56.065_165_187_868_68) < 1e-13);
        let t2 = required_wall_time(&SpacetimeConfig::earth(2000.0), &clocks, 1).unwrap();
        assert!(rel(t2.inverse_split, t.inverse_split / 4.0) < 1e-12);
        let tn = required_wall_time(&cfg, &clocks, 100).unwrap();
        assert!(rel(tn.inverse_split, t.inverse_split / 100.0) < 1e-12);
        assert!(matches!(
            required_wall_time(&SpacetimeConfig::earth(0.0), &clocks, 1),
            Err(SpacetimeError::ZeroSplit)
        ));
    }

    #[test]
    fn phases_basic() {
        let cfg = SpacetimeConfig::earth(1000.0);
        let clocks = ClockSpec::default();
        let p0 = phases_at(&cfg, &clocks, 0.0).unwrap();
        assert!(p0.theta.iter().chain(&p0.phi).all(|&x| x == 0.0));
        let p1 = phases_at(&cfg, &clocks, 1.0).unwrap();
        let cycles = (p1.theta[0] - p1.theta[1]) / TAU;
        assert!(rel(cycles, 56.808_894_931_383_624) < 1e-12);
        let p2 = phases_at(&cfg, &clocks, 2.0).unwrap();
        for (a, b) in p2.theta.iter().zip(&p1.theta) {
            assert!((a - 2.0 * b).abs() <= 1e-15 * a.abs());
        }
        for (a, b) in p2.phi.iter().zip(&p1.phi) {
            assert!((a - 2.0 * b).abs() <= 1e-15 * a.abs());
        }
        let p500 = phases_at(&cfg, &clocks, 500.0).unwrap();
        assert!(rel(p500.phi[0], 3.432_123_211_057_485_3e-5) < 1e-12);
        assert!(phases_at(&cfg, &clocks, -1.0).is_err());
    }

    #[test]
    fn equal_elevations_give_equal_phases() {
        let mut cfg = SpacetimeConfig::earth(1000.0);
        cfg.elevations = vec![300.0; 3];
        let p = phases_at(&cfg, &ClockSpec::default(), 123.0).unwrap();
        assert!(p.theta.iter().all(|&x| x == 0.0));
        assert!(p.phi.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(7.0) - (7.0 - TAU)).abs() < 1e-15);
        let p = PhaseSet::from_phases(vec![0.0, 10.0, -20.0], vec![0.1, 7.0]).reduced();
        assert!(p.theta.iter().chain(&p.phi).all(|x| *x > -PI && *x <= PI));
    }
}
