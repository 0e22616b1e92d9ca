//! Experiment configuration, presets and `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytic::{NoiseModel, ObservableParams};
use crate::protocol::ProtocolConfig;
use crate::sampling::{Sampler, Scenario, TraceConfig};
use crate::spacetime::{phases_at, ClockSpec, PhaseSet, SpacetimeConfig};
use crate::spectra::{expected_lines, split_band, Window, DEFAULT_THRESHOLD};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraConfig {
    pub window: Window,
    /// Peak threshold as a multiple of the median power.
    pub threshold: f64,
    /// Fourier outcome whose estimate is transformed; 3 is the null rate.
    pub outcome: usize,
    /// Split search band (Hz); `None` derives it from the predicted lines.
    pub band: Option<[f64; 2]>,
    /// Padding of the derived band, in frequency bins.
    pub band_margin_bins: f64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        SpectraConfig {
            window: Window::None,
            threshold: DEFAULT_THRESHOLD,
            outcome: 0,
            band: None,
            band_margin_bins: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoundationsConfig {
    /// Coordinate time (s) whose phases and coherences feed the tests.
    pub time: f64,
    /// Explicit clock phases, overriding `time`.
    pub theta: Option<[f64; 3]>,
    /// Explicit nuclear-spin phases of nodes 1 and 2 (with `theta`).
    pub phi: Option<[f64; 2]>,
    pub shots: u64,
    /// Born probabilities instead of sampled shots.
    pub exact: bool,
    /// Synthetic term added to `P123`.
    pub inject: f64,
}

impl Default for FoundationsConfig {
    fn default() -> Self {
        FoundationsConfig {
            time: 0.01,
            theta: None,
            phi: None,
            shots: 1_000_000,
            exact: false,
            inject: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    /// Master seed; overrides `trace.master_seed`.
    pub seed: u64,
    pub output_dir: String,
    pub spacetime: SpacetimeConfig,
    pub clocks: ClockSpec,
    pub protocol: ProtocolConfig,
    pub trace: TraceConfig,
    pub spectra: SpectraConfig,
    pub foundations: FoundationsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: None,
            seed: 0,
            output_dir: "out".into(),
            spacetime: SpacetimeConfig::default(),
            clocks: ClockSpec::default(),
            protocol: ProtocolConfig::default(),
            trace: TraceConfig::default(),
            spectra: SpectraConfig::default(),
            foundations: FoundationsConfig::default(),
        }
    }
}

/// Shipped presets and a one-line description of each.
pub const PRESETS: [(&str, &str); 5] = [
    (
        "fig4-top",
        "d = 1 km, 500 Hz sampling for 500 s, 100 shots/point, T2 = 50 s",
    ),
    (
        "fig4-bottom",
        "as fig4-top with N = 100 GHZ atoms per node, 10 kHz for 5 s",
    ),
    (
        "fig4-bottom-20k",
        "fig4-bottom sampled at 20 kHz, above the beat-note Nyquist rate",
    ),
    (
        "flat",
        "no gravity (GM = 0): every clock ticks at the same rate",
    ),
    (
        "two-node",
        "third node co-located with the first: a single 1 km baseline",
    ),
];

/// Configuration of a shipped preset.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let mut c = ExperimentConfig {
        preset: Some(name.to_string()),
        ..Default::default()
    };
    c.trace = TraceConfig {
        sample_rate: 500.0,
        total_time: 500.0,
        shots_per_point: 100,
        sampler: Sampler::AnalyticBernoulli,
        noise: NoiseModel::clock(50.0),
        ..TraceConfig::default()
    };
    match name {
        "fig4-top" => {}
        "fig4-bottom" | "fig4-bottom-20k" => {
            c.protocol.ghz_n = 100;
            c.trace.sample_rate = if name == "fig4-bottom" {
                10_000.0
            } else {
                20_000.0
            };
            c.trace.total_time = 5.0;
        }
        "flat" => {
            c.spacetime.gm = 0.0;
            c.trace.total_time = 20.0;
            c.trace.noise = NoiseModel::default();
        }
        "two-node" => {
            c.spacetime.elevations = vec![0.0, 1000.0, 0.0];
            c.trace.total_time = 20.0;
            c.trace.noise = NoiseModel::default();
        }
        _ => return None,
    }
    Some(c)
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Applies `a.b.c=value`; the value is parsed as JSON, else taken as a
/// string.
pub fn apply_override(cfg: &mut Value, assignment: &str) -> Result<(), Error> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    let value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut slot = cfg;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match slot {
            Value::Object(m) => m,
            Value::Null => {
                *slot = Value::Object(Default::default());
                slot.as_object_mut().expect("just set")
            }
            _ => {
                return Err(Error::Config(format!(
                    "override `{key}`: `{}` is not a section",
                    parts[..i].join(".")
                )))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        slot = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

impl ExperimentConfig {
    /// Layers defaults or a preset, a JSON config file, `--set`
    /// overrides and a seed, then validates. A preset given here wins
    /// over one named in the file.
    pub fn resolve(
        preset_name: Option<&str>,
        file: Option<&Path>,
        overrides: &[String],
        seed: Option<u64>,
    ) -> Result<Self, Error> {
        let file_value = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Some(
                    serde_json::from_str::<Value>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                )
            }
            None => None,
        };
        let file_preset = file_value
            .as_ref()
            .and_then(|v| v.get("preset"))
            .and_then(|v| v.as_str())
            .map(str::to_string);
        let name = preset_name.map(str::to_string).or(file_preset);
        let base = match &name {
            Some(n) => preset(n).ok_or_else(|| {
                let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
                Error::Config(format!(
                    "unknown preset `{n}` (known: {})",
                    known.join(", ")
                ))
            })?,
            None => ExperimentConfig::default(),
        };
        let mut v = serde_json::to_value(&base)?;
        if let Some(f) = file_value {
            merge(&mut v, f);
        }
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        if let Some(s) = seed {
            v["seed"] = Value::from(s);
        }
        v["preset"] = name.map(Value::String).unwrap_or(Value::Null);
        let cfg: ExperimentConfig =
            serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let wrap = |e: String| Error::Config(e);
        self.scenario()
            .validate()
            .map_err(|e| wrap(e.to_string()))?;
        self.trace_config()
            .validate()
            .map_err(|e| wrap(e.to_string()))?;
        let s = &self.spectra;
        if !(s.threshold > 0.0) {
            return Err(wrap(format!(
                "spectra.threshold must be positive, got {}",
                s.threshold
            )));
        }
        if s.outcome > 3 {
            return Err(wrap(format!(
                "spectra.outcome must be 0..=3, got {}",
                s.outcome
            )));
        }
        if let Some([lo, hi]) = s.band {
            if !(lo < hi && lo >= 0.0) {
                return Err(wrap(format!(
                    "spectra.band [{lo}, {hi}] is empty or negative"
                )));
            }
        }
        if !(s.band_margin_bins >= 0.0) {
            return Err(wrap("spectra.band_margin_bins must be non-negative".into()));
        }
        let f = &self.foundations;
        if f.shots == 0 {
            return Err(wrap("foundations.shots must be at least 1".into()));
        }
        if !(f.time >= 0.0 && f.time.is_finite()) {
            return Err(wrap("foundations.time must be non-negative".into()));
        }
        if f.phi.is_some() && f.theta.is_none() {
            return Err(wrap("foundations.phi needs foundations.theta".into()));
        }
        if !f.inject.is_finite() {
            return Err(wrap("foundations.inject must be finite".into()));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            spacetime: self.spacetime.clone(),
            clocks: self.clocks,
            protocol: self.protocol.clone(),
        }
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            master_seed: self.seed,
            ..self.trace.clone()
        }
    }

    /// Split search band: explicit, or around the predicted adjacent-pair
    /// lines (alias-folded) padded by `band_margin_bins`.
    pub fn split_band(&self) -> Result<(f64, f64), Error> {
        if let Some([lo, hi]) = self.spectra.band {
            return Ok((lo, hi));
        }
        let lines = expected_lines(
            &self.spacetime,
            &self.clocks,
            self.protocol.ghz_n,
            self.trace.sample_rate,
        )?;
        let margin = self.spectra.band_margin_bins / self.trace.total_time;
        split_band(&lines, margin).ok_or_else(|| Error::Config("no adjacent-pair lines".into()))
    }

    /// Observable inputs of the foundations tests.
    pub fn observable_params(&self) -> Result<ObservableParams, Error> {
        let f = &self.foundations;
        let phases = match f.theta {
            Some(theta) => {
                PhaseSet::from_phases(theta.to_vec(), f.phi.unwrap_or([0.0; 2]).to_vec())
            }
            None => phases_at(&self.spacetime, &self.clocks, f.time)?,
        };
        Ok(ObservableParams::from_phases(&phases)?
            .with_ghz(self.protocol.ghz_n)
            .with_noise(&self.trace.noise, f.time))
    }
}
