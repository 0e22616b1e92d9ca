//! Power spectra of outcome traces and beat-note line analysis.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::SignalTrace;
use crate::spacetime::{beat_frequencies, ClockSpec, SpacetimeConfig, SpacetimeError};

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("trace needs at least 4 points, got {0}")]
    TooShort(usize),
    #[error("time grid is not uniform at point {index} (t = {t}, expected {expected})")]
    NonUniform { index: usize, t: f64, expected: f64 },
    #[error("outcome index must be 0, 1, 2 or 3 (null), got {0}")]
    BadOutcome(usize),
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("band [{0}, {1}] Hz is empty or reversed")]
    BadBand(f64, f64),
    #[error("no peak above threshold in band [{lo}, {hi}] Hz")]
    NoPeakInBand { lo: f64, hi: f64 },
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// A local maximum of the power spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    /// Frequency of the bin (Hz).
    pub frequency: f64,
    pub power: f64,
    /// Three-bin parabolic estimate of the line centre (Hz).
    pub centroid: f64,
}

/// Outcome of a two-line resolution test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitVerdict {
    pub band: (f64, f64),
    pub resolvable: bool,
    /// Centroid distance of the two strongest in-band peaks (Hz).
    pub delta_f: Option<f64>,
    /// The two strongest in-band peaks, in frequency order.
    pub peaks: Option<(Peak, Peak)>,
    /// Smallest power strictly between the two peaks.
    pub dip: Option<f64>,
    pub reason: String,
}

/// One-sided power spectrum of a mean-subtracted sequence.
///
/// With `Window::None` the powers sum to the mean square of the
/// mean-subtracted signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub window: Window,
    pub sample_rate: f64,
    /// `1 / total_time` (Hz).
    pub resolution: f64,
    pub peaks: Vec<Peak>,
    pub split: Option<SplitVerdict>,
}

/// Default peak threshold as a multiple of the median power.
pub const DEFAULT_THRESHOLD: f64 = 20.0;

/// Spectrum of a uniformly sampled real sequence.
pub fn power_spectrum(
    samples: &[f64],
    sample_rate: f64,
    window: Window,
) -> Result<Spectrum, SpectraError> {
    let n = samples.len();
    if n < 4 {
        return Err(SpectraError::TooShort(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = match window {
        Window::None => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos())
            .collect(),
    };
    let mut buf: Vec<C64> = samples
        .iter()
        .zip(&w)
        .map(|(&x, &wk)| C64::new((x - mean) * wk, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // |X_k|² / (n Σw²) makes the total equal the mean square for w = 1
    let norm = n as f64 * w.iter().map(|v| v * v).sum::<f64>();
    let half = n / 2;
    let resolution = sample_rate / n as f64;
    let mut frequencies = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, x) in buf.iter().enumerate().take(half + 1) {
        let twice = k != 0 && !(n % 2 == 0 && k == half);
        let p = x.norm_sqr() / norm * if twice { 2.0 } else { 1.0 };
        frequencies.push(k as f64 * resolution);
        power.push(p);
    }
    Ok(Spectrum {
        frequencies,
        power,
        window,
        sample_rate,
        resolution,
        peaks: Vec::new(),
        split: None,
    })
}

/// Spectrum of outcome `x` (3 selects the null rate) of a trace.
pub fn fft_power(trace: &SignalTrace, x: usize, window: Window) -> Result<Spectrum, SpectraError> {
    if x > 3 {
        return Err(SpectraError::BadOutcome(x));
    }
    let t = trace.times();
    if t.len() < 4 {
        return Err(SpectraError::TooShort(t.len()));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(SpectraError::NonUniform {
            index: 1,
            t: t[1],
            expected: t[0],
        });
    }
    for (k, &tk) in t.iter().enumerate() {
        let expected = t[0] + k as f64 * dt;
        if (tk - expected).abs() > 1e-6 * dt {
            return Err(SpectraError::NonUniform {
                index: k,
                t: tk,
                expected,
            });
        }
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let series = if x == 3 {
        trace.null_series()
    } else {
        trace.series(x)
    };
    power_spectrum(&series, 1.0 / dt, window)
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    let mid = s.len() / 2;
    let (_, m, _) = s.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Local maxima (DC excluded) above `threshold × median power`, sorted by
/// frequency. Maxima more than 120 dB below the strongest bin are
/// rounding noise and are ignored.
pub fn find_peaks(spec: &Spectrum, threshold: f64) -> Result<Vec<Peak>, SpectraError> {
    if !(threshold > 0.0) {
        return Err(SpectraError::BadThreshold(threshold));
    }
    let p = &spec.power;
    if p.len() < 3 {
        return Ok(Vec::new());
    }
    let strongest = p[1..].iter().copied().fold(0.0, f64::max);
    let floor = (threshold * median(&p[1..])).max(strongest * 1e-12);
    let mut out = Vec::new();
    for k in 1..p.len() - 1 {
        if p[k] > floor && p[k] > p[k - 1] && p[k] >= p[k + 1] {
            out.push(Peak {
                bin: k,
                frequency: spec.frequencies[k],
                power: p[k],
                centroid: spec.frequencies[k]
                    + interpolate(p[k - 1], p[k], p[k + 1]) * spec.resolution,
            });
        }
    }
    Ok(out)
}

/// Vertex offset (bins) of the parabola through three amplitude samples.
fn interpolate(left: f64, centre: f64, right: f64) -> f64 {
    let (a, b, c) = (left.sqrt(), centre.sqrt(), right.sqrt());
    let den = a - 2.0 * b + c;
    if den.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

/// Two-line resolution test in `band`: the two strongest peaks must be
/// at least 2 bins apart with a dip below both between them.
pub fn measure_split(
    spec: &Spectrum,
    band: (f64, f64),
    threshold: f64,
) -> Result<SplitVerdict, SpectraError> {
    let (lo, hi) = band;
    if !(lo < hi) {
        return Err(SpectraError::BadBand(lo, hi));
    }
    let mut peaks: Vec<Peak> = find_peaks(spec, threshold)?
        .into_iter()
        .filter(|p| p.frequency >= lo && p.frequency <= hi)
        .collect();
    if peaks.is_empty() {
        return Err(SpectraError::NoPeakInBand { lo, hi });
    }
    let unresolved = |reason: String| SplitVerdict {
        band,
        resolvable: false,
        delta_f: None,
        peaks: None,
        dip: None,
        reason,
    };
    if peaks.len() < 2 {
        return Ok(unresolved("only one peak in band".into()));
    }
    peaks.sort_by(|a, b| b.power.total_cmp(&a.power));
    let (mut p, mut q) = (peaks[0], peaks[1]);
    if q.bin < p.bin {
        std::mem::swap(&mut p, &mut q);
    }
    let dip = spec.power[p.bin + 1..q.bin]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let apart = q.bin - p.bin;
    let (resolvable, reason) = if apart < 2 {
        (false, format!("peaks only {apart} bin apart"))
    } else if !(dip < p.power && dip < q.power) {
        (false, "no dip between peaks".into())
    } else {
        (true, format!("peaks {apart} bins apart with dip"))
    };
    Ok(SplitVerdict {
        band,
        resolvable,
        delta_f: Some(q.centroid - p.centroid),
        peaks: Some((p, q)),
        dip: dip.is_finite().then_some(dip),
        reason,
    })
}

/// Apparent frequency of a tone at `f` sampled at `fs`, in `[0, fs/2]`.
pub fn fold_frequency(f: f64, fs: f64) -> f64 {
    let r = f.abs().rem_euclid(fs);
    if r > fs / 2.0 {
        fs - r
    } else {
        r
    }
}

/// A predicted beat line and where sampling places it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedLine {
    pub pair: (usize, usize),
    pub true_hz: f64,
    pub observed_hz: f64,
    pub aliased: bool,
}

/// The three GHZ-scaled beat notes and their folded positions.
pub fn expected_lines(
    spacetime: &SpacetimeConfig,
    clocks: &ClockSpec,
    ghz_n: u32,
    sample_rate: f64,
) -> Result<Vec<ExpectedLine>, SpectraError> {
    let [f12, f23, f13] = beat_frequencies(spacetime, clocks)?
        .scaled(ghz_n as f64)
        .hz();
    Ok([((0, 1), f12), ((1, 2), f23), ((0, 2), f13)]
        .into_iter()
        .map(|(pair, f)| {
            let observed = fold_frequency(f, sample_rate);
            ExpectedLine {
                pair,
                true_hz: f.abs(),
                observed_hz: observed,
                aliased: f.abs() > sample_rate / 2.0,
            }
        })
        .collect())
}

/// Band around the observed adjacent-pair lines, padded by `margin` Hz.
pub fn split_band(lines: &[ExpectedLine], margin: f64) -> Option<(f64, f64)> {
    let adj: Vec<f64> = lines
        .iter()
        .filter(|l| l.pair == (0, 1) || l.pair == (1, 2))
        .map(|l| l.observed_hz)
        .collect();
    let lo = adj.iter().copied().reduce(f64::min)?;
    let hi = adj.iter().copied().reduce(f64::max)?;
    Some(((lo - margin).max(0.0), hi + margin))
}

impl Spectrum {
    /// Fills `peaks` and, with a band, `split`.
    pub fn analyse(
        &mut self,
        threshold: f64,
        band: Option<(f64, f64)>,
    ) -> Result<(), SpectraError> {
        self.peaks = find_peaks(self, threshold)?;
        self.split = match band {
            Some(b) => Some(measure_split(self, b, threshold)?),
            None => None,
        };
        Ok(())
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.power.len() * 48);
        s.push_str("freq_hz,power\n");
        for (f, p) in self.frequencies.iter().zip(&self.power) {
            let _ = writeln!(s, "{f:.16e},{p:.16e}");
        }
        s
    }

    /// Whitespace-separated `x y` columns.
    pub fn to_plot_data(&self) -> String {
        let mut s = String::from("# freq_hz power\n");
        for (f, p) in self.frequencies.iter().zip(&self.power) {
            let _ = writeln!(s, "{f:.10e} {p:.10e}");
        }
        s
    }

    /// Writes `<stem>.csv` and the `<stem>_peaks.json` report.
    pub fn write(
        &self,
        dir: &Path,
        stem: &str,
        extra: serde_json::Value,
    ) -> Result<(PathBuf, PathBuf), SpectraError> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}_peaks.json"));
        fs::write(&csv, self.to_csv())?;
        let report = serde_json::json!({
            "window": self.window,
            "sample_rate": self.sample_rate,
            "resolution": self.resolution,
            "bins": self.power.len(),
            "peaks": self.peaks,
            "split": self.split,
            "context": extra,
        });
        fs::write(&json, serde_json::to_string_pretty(&report)? + "\n")?;
        Ok((csv, json))
    }
}
