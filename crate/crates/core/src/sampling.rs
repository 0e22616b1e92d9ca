//! Sampled time series of the Fourier outcome frequencies.
//!
//! Every shot owns a ChaCha8 stream: seeded by the master seed, stream id
//! = point index, word position = shot index << 16. A point or shot can
//! therefore be regenerated alone and the result does not depend on how
//! points are spread over threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{distribution, AnalyticError, NoiseModel, ObservableParams};
use crate::protocol::{
    draw_noise, run_shot_with_phases, Layout, NoisePhases, ProtocolConfig, ProtocolError,
};
use crate::spacetime::{phases_at, ClockSpec, PhaseSet, SpacetimeConfig, SpacetimeError};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid trace config: {0}")]
    Config(String),
    #[error(
        "circuit sampling needs ~{work:.3e} amplitude updates (budget {budget:.3e}); \
         use the analytic_bernoulli sampler, which draws from the same distribution, \
         or audit a subsampled grid with generate_points"
    )]
    ResourceBound { work: f64, budget: f64 },
    #[error("point index {index} outside trace of {points} points")]
    PointOutOfRange { index: usize, points: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Full register simulation of every shot.
    CircuitShots,
    /// Categorical draws from the closed-form probabilities.
    #[default]
    AnalyticBernoulli,
    /// The probabilities themselves, no shot noise.
    ExactExpectation,
}

/// Sampling grid and shot settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    /// Hz.
    pub sample_rate: f64,
    /// s.
    pub total_time: f64,
    pub shots_per_point: u64,
    pub sampler: Sampler,
    pub master_seed: u64,
    pub noise: NoiseModel,
    /// Largest `points · shots · amplitudes` accepted by the circuit sampler.
    pub circuit_budget: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            sample_rate: 500.0,
            total_time: 500.0,
            shots_per_point: 100,
            sampler: Sampler::AnalyticBernoulli,
            master_seed: 0,
            noise: NoiseModel::default(),
            circuit_budget: 1e9,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), SamplingError> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(SamplingError::Config(format!(
                "sample_rate {} must be positive",
                self.sample_rate
            )));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(SamplingError::Config(format!(
                "total_time {} must be positive",
                self.total_time
            )));
        }
        let n = self.sample_rate * self.total_time;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) || n.round() < 1.0 {
            return Err(SamplingError::Config(format!(
                "sample_rate × total_time = {n} is not a positive integer point count"
            )));
        }
        if self.shots_per_point == 0 {
            return Err(SamplingError::Config(
                "shots_per_point must be at least 1".into(),
            ));
        }
        if !(self.circuit_budget > 0.0) {
            return Err(SamplingError::Config(
                "circuit_budget must be positive".into(),
            ));
        }
        self.noise.validate()?;
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        (self.sample_rate * self.total_time).round() as usize
    }

    /// `t_k = k / f_s`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate
    }
}

/// Physics shared by every point of a trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub spacetime: SpacetimeConfig,
    pub clocks: ClockSpec,
    pub protocol: ProtocolConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SamplingError> {
        self.spacetime.validate()?;
        if self.spacetime.num_nodes() != 3 {
            return Err(SpacetimeError::NeedThreeNodes(self.spacetime.num_nodes()).into());
        }
        self.clocks.validate()?;
        self.protocol.validate()?;
        Ok(())
    }
}

/// Outcome fractions at one sample time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub t: f64,
    pub p: [f64; 3],
    pub null: f64,
    /// 0 for expectation values.
    pub shots: u64,
}

/// What produced a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEcho {
    pub trace: TraceConfig,
    pub scenario: Scenario,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalTrace {
    pub points: Vec<PointEstimate>,
    pub seed: u64,
    /// Absent when loaded from a bare CSV.
    pub config: Option<TraceEcho>,
}

impl SignalTrace {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// Estimate sequence of outcome `x`.
    pub fn series(&self, x: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.p[x]).collect()
    }

    pub fn null_series(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.null).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub const CSV_HEADER: &'static str = "t_s,p0,p1,p2,p_null,shots";

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 120);
        s.push_str(Self::CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                p.t, p.p[0], p.p[1], p.p[2], p.null, p.shots
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, SamplingError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == Self::CSV_HEADER => {}
            Some((_, h)) => {
                return Err(SamplingError::Parse {
                    line: 1,
                    msg: format!("expected header `{}`, found `{h}`", Self::CSV_HEADER),
                })
            }
            None => {
                return Err(SamplingError::Parse {
                    line: 1,
                    msg: "empty file".into(),
                })
            }
        }
        let mut points = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(SamplingError::Parse {
                    line: line_no,
                    msg: format!("expected 6 columns, found {}", cols.len()),
                });
            }
            let num = |k: usize| -> Result<f64, SamplingError> {
                cols[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| SamplingError::Parse {
                        line: line_no,
                        msg: format!("column {}: {e}", k + 1),
                    })
            };
            let shots = cols[5]
                .trim()
                .parse::<u64>()
                .map_err(|e| SamplingError::Parse {
                    line: line_no,
                    msg: format!("column 6: {e}"),
                })?;
            points.push(PointEstimate {
                t: num(0)?,
                p: [num(1)?, num(2)?, num(3)?],
                null: num(4)?,
                shots,
            });
        }
        Ok(SignalTrace {
            points,
            seed: 0,
            config: None,
        })
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), SamplingError> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        fs::write(&csv, self.to_csv())?;
        let side = Sidecar {
            seed: self.seed,
            points: self.points.len(),
            config: self.config.clone(),
        };
        fs::write(&json, serde_json::to_string_pretty(&side)? + "\n")?;
        Ok((csv, json))
    }

    /// Reads a trace CSV, picking up the sidecar next to it when present.
    pub fn read(csv: &Path) -> Result<Self, SamplingError> {
        let mut trace = Self::from_csv(&fs::read_to_string(csv)?)?;
        let side = csv.with_extension("json");
        if side.exists() {
            let s: Sidecar = serde_json::from_str(&fs::read_to_string(side)?)?;
            trace.seed = s.seed;
            trace.config = s.config;
        }
        Ok(trace)
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    seed: u64,
    points: usize,
    config: Option<TraceEcho>,
}

/// `sqrt(p(1 − p) / M)`, the standard error of a binomial fraction.
pub fn estimator_variance(p: f64, shots: u64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p) && shots >= 1);
    (p * (1.0 - p) / shots as f64).max(0.0).sqrt()
}

/// Stream for shot `shot` of point `point`.
pub fn shot_rng(master_seed: u64, point: usize, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(point as u64);
    rng.set_word_pos((shot as u128) << 16);
    rng
}

/// Closed-form parameters for one shot: GHZ-scaled phases plus the drawn
/// dephasing phases, with unit coherences.
pub fn shot_params(
    phases: &PhaseSet,
    ghz_n: u32,
    noise: &NoisePhases,
) -> Result<ObservableParams, SamplingError> {
    let base = ObservableParams::from_phases(phases)?.with_ghz(ghz_n);
    let th = base.effective_theta();
    let ph = base.effective_phi();
    let m = noise.metastable;
    let c = noise.clock;
    Ok(ObservableParams::new(
        [th[0] + c[0], th[1] + c[1], th[2] + c[2]],
        [ph[1] + m[1] - m[0], ph[2] + m[2] - m[0]],
    ))
}

/// Ensemble probabilities `(Π_0, Π_1, Π_2, null)` at time `t`.
pub fn expected_point(
    trace: &TraceConfig,
    scenario: &Scenario,
    t: f64,
) -> Result<([f64; 3], f64), SamplingError> {
    let phases = phases_at(&scenario.spacetime, &scenario.clocks, t)?;
    let p = ObservableParams::from_phases(&phases)?
        .with_ghz(scenario.protocol.ghz_n)
        .with_noise(&trace.noise, t);
    let d = distribution(&p)?;
    let eps = scenario.protocol.leakage;
    Ok((d.map(|v| v * (1.0 - eps)), eps))
}

fn draw_index<R: Rng + ?Sized>(probs: &[f64; 3], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < probs[0] {
        0
    } else if u < probs[0] + probs[1] {
        1
    } else {
        2
    }
}

/// A validated trace request, reusable across points.
struct Plan<'a> {
    trace: &'a TraceConfig,
    scenario: &'a Scenario,
    layout: Option<Layout>,
}

impl<'a> Plan<'a> {
    fn new(
        trace: &'a TraceConfig,
        scenario: &'a Scenario,
        points: usize,
    ) -> Result<Self, SamplingError> {
        trace.validate()?;
        scenario.validate()?;
        let layout = if trace.sampler == Sampler::CircuitShots {
            let layout = Layout::new(&scenario.protocol)?;
            let work =
                points as f64 * trace.shots_per_point as f64 * layout.amplitude_count() as f64;
            if work > trace.circuit_budget {
                return Err(SamplingError::ResourceBound {
                    work,
                    budget: trace.circuit_budget,
                });
            }
            Some(layout)
        } else {
            None
        };
        Ok(Plan {
            trace,
            scenario,
            layout,
        })
    }

    fn point(&self, k: usize) -> Result<PointEstimate, SamplingError> {
        let t = self.trace.time(k);
        if self.trace.sampler == Sampler::ExactExpectation {
            let (p, null) = expected_point(self.trace, self.scenario, t)?;
            return Ok(PointEstimate {
                t,
                p,
                null,
                shots: 0,
            });
        }
        let proto = &self.scenario.protocol;
        let phases = phases_at(&self.scenario.spacetime, &self.scenario.clocks, t)?;
        let m = self.trace.shots_per_point;
        let mut counts = [0u64; 4];
        let noiseless = self.trace.noise.is_off();
        let fixed = if noiseless && self.layout.is_none() {
            Some(distribution(&shot_params(
                &phases,
                proto.ghz_n,
                &NoisePhases::default(),
            )?)?)
        } else {
            None
        };
        for shot in 0..m {
            let mut rng = shot_rng(self.trace.master_seed, k, shot);
            let noise = if noiseless {
                NoisePhases::default()
            } else {
                draw_noise(&self.trace.noise, t, proto.ghz_n, &mut rng)
            };
            let outcome = match &self.layout {
                Some(layout) => {
                    run_shot_with_phases(proto, layout, &phases, noise, &mut rng)?.fourier
                }
                None => {
                    let probs = match fixed {
                        Some(d) => d,
                        None => distribution(&shot_params(&phases, proto.ghz_n, &noise)?)?,
                    };
                    let x = draw_index(&probs, &mut rng);
                    let leaked = proto.leakage > 0.0 && rng.random::<f64>() < proto.leakage;
                    (!leaked).then_some(x)
                }
            };
            counts[outcome.unwrap_or(3)] += 1;
        }
        let mf = m as f64;
        Ok(PointEstimate {
            t,
            p: [
                counts[0] as f64 / mf,
                counts[1] as f64 / mf,
                counts[2] as f64 / mf,
            ],
            null: counts[3] as f64 / mf,
            shots: m,
        })
    }
}

/// Samples every point of the grid in parallel; results are ordered by
/// point index.
pub fn generate_trace(
    trace: &TraceConfig,
    scenario: &Scenario,
) -> Result<SignalTrace, SamplingError> {
    let n = {
        trace.validate()?;
        trace.num_points()
    };
    let plan = Plan::new(trace, scenario, n)?;
    let points = (0..n)
        .into_par_iter()
        .map(|k| plan.point(k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SignalTrace {
        points,
        seed: trace.master_seed,
        config: Some(TraceEcho {
            trace: trace.clone(),
            scenario: scenario.clone(),
        }),
    })
}

/// Regenerates selected points of the grid; each equals the corresponding
/// point of the full trace.
pub fn generate_points(
    trace: &TraceConfig,
    scenario: &Scenario,
    indices: &[usize],
) -> Result<Vec<PointEstimate>, SamplingError> {
    trace.validate()?;
    let n = trace.num_points();
    if let Some(&index) = indices.iter().find(|&&i| i >= n) {
        return Err(SamplingError::PointOutOfRange { index, points: n });
    }
    let plan = Plan::new(trace, scenario, indices.len())?;
    indices.par_iter().map(|&k| plan.point(k)).collect()
}
