use std::collections::VecDeque;

use num_complex::Complex64 as C64;
use rand::Rng;

use super::{Level, QsimError, Register};

/// Outcome chosen by an [`OutcomeSource`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Draw {
    pub index: usize,
    /// Uniform variate consumed for the choice, `None` when forced.
    pub uniform: Option<f64>,
}

/// Chooses a measurement outcome given Born weights.
///
/// Every `rand::Rng` samples; [`Forced`] replays a fixed outcome list,
/// which is how individual measurement branches are exercised.
pub trait OutcomeSource {
    fn pick(&mut self, weights: &[f64]) -> Result<Draw, QsimError>;
}

/// Index of the outcome selected by `u ∈ [0, 1)` from unnormalised weights.
/// Zero-weight outcomes are never returned.
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

impl<R: Rng + ?Sized> OutcomeSource for R {
    fn pick(&mut self, weights: &[f64]) -> Result<Draw, QsimError> {
        let u: f64 = self.random();
        Ok(Draw {
            index: sample_index(weights, u),
            uniform: Some(u),
        })
    }
}

/// Replays predetermined outcomes in order.
#[derive(Clone, Debug, Default)]
pub struct Forced {
    queue: VecDeque<usize>,
}

impl Forced {
    pub fn new(outcomes: impl IntoIterator<Item = usize>) -> Self {
        Forced {
            queue: outcomes.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

/// Forced outcomes below this weight cannot be post-selected.
const FORCE_MIN_WEIGHT: f64 = 1e-14;

impl OutcomeSource for Forced {
    fn pick(&mut self, weights: &[f64]) -> Result<Draw, QsimError> {
        let index = self.queue.pop_front().ok_or(QsimError::ForcedExhausted)?;
        let total: f64 = weights.iter().sum();
        match weights.get(index) {
            Some(&w) if w > FORCE_MIN_WEIGHT * total.max(1.0) => Ok(Draw {
                index,
                uniform: None,
            }),
            Some(&w) => Err(QsimError::ImpossibleOutcome { index, weight: w }),
            None => Err(QsimError::ImpossibleOutcome { index, weight: 0.0 }),
        }
    }
}

/// What a measurement looked at.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Site(usize),
    Projectors { sites: Vec<usize>, count: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub target: Target,
    /// Basis-vector index, or projector index; equals the projector count
    /// for the complement outcome.
    pub outcome: usize,
    /// Level label for level-basis measurements.
    pub level: Option<Level>,
    /// Born weight of the outcome before collapse.
    pub probability: f64,
    pub uniform: Option<f64>,
}

impl MeasurementRecord {
    pub fn is_complement(&self) -> bool {
        matches!(self.target, Target::Projectors { count, .. } if self.outcome == count)
    }
}

/// Measurement basis for one site.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    Levels,
    /// Orthonormal vectors in the site's level order.
    Vectors(Vec<Vec<C64>>),
}

const ORTHO_TOL: f64 = 1e-10;

fn check_orthonormal(vectors: &[&[C64]]) -> Result<(), QsimError> {
    for (i, u) in vectors.iter().enumerate() {
        for (j, v) in vectors.iter().enumerate().skip(i) {
            let dot: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot - want).norm() > ORTHO_TOL {
                return Err(if i == j {
                    QsimError::NotOrthonormal
                } else {
                    QsimError::NotOrthogonal
                });
            }
        }
    }
    Ok(())
}

/// Mutually orthogonal projectors on the joint space of `sites`, each given
/// by an orthonormal vector list. Joint indices are site-major in the
/// order of `sites`. The complement of their span is an implicit outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorSet {
    sites: Vec<usize>,
    local_dim: usize,
    /// Nonzero `(local index, value)` entries of each projector's vectors.
    projectors: Vec<Vec<Vec<(usize, C64)>>>,
}

fn sparse(v: &[C64]) -> Vec<(usize, C64)> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.norm_sqr() > 0.0)
        .map(|(i, &x)| (i, x))
        .collect()
}

impl ProjectorSet {
    pub fn new(
        sites: Vec<usize>,
        local_dim: usize,
        projectors: Vec<Vec<Vec<C64>>>,
    ) -> Result<Self, QsimError> {
        let all: Vec<&[C64]> = projectors.iter().flatten().map(|v| v.as_slice()).collect();
        if all.iter().any(|v| v.len() != local_dim) {
            return Err(QsimError::DimensionMismatch {
                expected: local_dim,
                got: all
                    .iter()
                    .map(|v| v.len())
                    .find(|&l| l != local_dim)
                    .unwrap_or(0),
            });
        }
        check_orthonormal(&all)?;
        Ok(ProjectorSet {
            sites,
            local_dim,
            projectors: projectors
                .iter()
                .map(|p| p.iter().map(|v| sparse(v)).collect())
                .collect(),
        })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }
}

/// Flat-index layout of a group of sites: `bases` have digit 0 on every
/// chosen site, `offsets[j]` adds joint local index `j`.
struct Fibers {
    bases: Vec<usize>,
    offsets: Vec<usize>,
}

impl Register {
    fn fibers(&self, sites: &[usize]) -> Result<Fibers, QsimError> {
        for (i, &s) in sites.iter().enumerate() {
            self.site(s)?;
            if sites[..i].contains(&s) {
                return Err(QsimError::SameSite(s));
            }
        }
        let dims: Vec<usize> = sites.iter().map(|&s| self.sites()[s].dim()).collect();
        let local: usize = dims.iter().product();
        let offsets = (0..local)
            .map(|mut j| {
                let mut off = 0;
                for (k, &s) in sites.iter().enumerate().rev() {
                    off += (j % dims[k]) * self.stride(s);
                    j /= dims[k];
                }
                off
            })
            .collect();
        let mut bases = vec![0usize];
        for s in 0..self.num_sites() {
            if sites.contains(&s) {
                continue;
            }
            let st = self.stride(s);
            let d = self.sites()[s].dim();
            bases = bases
                .iter()
                .flat_map(|&b| (0..d).map(move |k| b + k * st))
                .collect();
        }
        Ok(Fibers { bases, offsets })
    }

    /// Projective measurement of one site in the level basis or a supplied
    /// orthonormal basis; the register collapses onto the outcome.
    pub fn measure<S: OutcomeSource + ?Sized>(
        &mut self,
        site: usize,
        basis: &Basis,
        src: &mut S,
    ) -> Result<MeasurementRecord, QsimError> {
        let d = self.site(site)?.dim();
        let Basis::Vectors(v) = basis else {
            return self.measure_levels_fast(site, src);
        };
        if v.len() != d || v.iter().any(|x| x.len() != d) {
            return Err(QsimError::NotOrthonormal);
        }
        let refs: Vec<&[C64]> = v.iter().map(|x| x.as_slice()).collect();
        check_orthonormal(&refs)?;
        let set = ProjectorSet {
            sites: vec![site],
            local_dim: d,
            projectors: v.iter().map(|x| vec![sparse(x)]).collect(),
        };
        let mut rec = self.collapse_onto(&set, src, false)?;
        rec.target = Target::Site(site);
        Ok(rec)
    }

    fn measure_levels_fast<S: OutcomeSource + ?Sized>(
        &mut self,
        site: usize,
        src: &mut S,
    ) -> Result<MeasurementRecord, QsimError> {
        let probs = self.populations(site)?;
        let draw = src.pick(&probs)?;
        let p = probs[draw.index];
        let d = probs.len();
        let scale = 1.0 / p.sqrt();
        for k in 0..d {
            let runs = self.runs(&[(site, k)]);
            let amps = self.amps_mut();
            for (start, n) in runs {
                let part = &mut amps[start..start + n];
                if k == draw.index {
                    part.iter_mut().for_each(|a| *a *= scale);
                } else {
                    part.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
                }
            }
        }
        if draw.index == 0 {
            self.mark_ground(site);
        }
        Ok(MeasurementRecord {
            target: Target::Site(site),
            outcome: draw.index,
            level: Some(self.sites()[site].levels()[draw.index]),
            probability: p,
            uniform: draw.uniform,
        })
    }

    /// Level-basis measurement shorthand.
    pub fn measure_level<S: OutcomeSource + ?Sized>(
        &mut self,
        site: usize,
        src: &mut S,
    ) -> Result<MeasurementRecord, QsimError> {
        self.measure(site, &Basis::Levels, src)
    }

    fn check_set(&self, set: &ProjectorSet) -> Result<(), QsimError> {
        let dim: usize = set
            .sites
            .iter()
            .map(|&s| self.site(s).map(|x| x.dim()))
            .product::<Result<usize, _>>()?;
        if dim != set.local_dim {
            return Err(QsimError::DimensionMismatch {
                expected: dim,
                got: set.local_dim,
            });
        }
        Ok(())
    }

    /// Born weights of every projector followed by the complement.
    pub fn projector_probabilities(&self, set: &ProjectorSet) -> Result<Vec<f64>, QsimError> {
        self.check_set(set)?;
        let fib = self.fibers(&set.sites)?;
        let mut probs = self.weights(set, &fib);
        let captured: f64 = probs.iter().sum();
        probs.push((self.norm_sqr() - captured).max(0.0));
        Ok(probs)
    }

    fn weights(&self, set: &ProjectorSet, fib: &Fibers) -> Vec<f64> {
        let amps = self.amplitudes();
        set.projectors
            .iter()
            .map(|proj| {
                let mut w = 0.0;
                for &base in &fib.bases {
                    for v in proj {
                        let c: C64 = v
                            .iter()
                            .map(|&(k, x)| x.conj() * amps[base + fib.offsets[k]])
                            .sum();
                        w += c.norm_sqr();
                    }
                }
                w
            })
            .collect()
    }

    /// Measures `set` (plus its complement) and collapses the register.
    pub fn measure_projectors<S: OutcomeSource + ?Sized>(
        &mut self,
        set: &ProjectorSet,
        src: &mut S,
    ) -> Result<MeasurementRecord, QsimError> {
        self.check_set(set)?;
        self.collapse_onto(set, src, true)
    }

    fn collapse_onto<S: OutcomeSource + ?Sized>(
        &mut self,
        set: &ProjectorSet,
        src: &mut S,
        with_complement: bool,
    ) -> Result<MeasurementRecord, QsimError> {
        let fib = self.fibers(&set.sites)?;
        let mut probs = self.weights(set, &fib);
        if with_complement {
            let captured: f64 = probs.iter().sum();
            probs.push((self.norm_sqr() - captured).max(0.0));
        }
        let draw = src.pick(&probs)?;
        let p = probs[draw.index];
        let n = set.projectors.len();
        let norm = p.sqrt();
        for &s in &set.sites {
            self.touch(s);
        }
        let offsets = &fib.offsets;
        let amps = self.amps_mut();
        let mut local = vec![C64::new(0.0, 0.0); offsets.len()];
        let chosen: Vec<&Vec<Vec<(usize, C64)>>> = if draw.index < n {
            vec![&set.projectors[draw.index]]
        } else {
            set.projectors.iter().collect()
        };
        for &base in &fib.bases {
            // component of the fibre inside the chosen projector (or inside
            // the span of all projectors, for the complement)
            local.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
            for proj in &chosen {
                for v in proj.iter() {
                    let c: C64 = v
                        .iter()
                        .map(|&(k, x)| x.conj() * amps[base + offsets[k]])
                        .sum();
                    for &(k, x) in v {
                        local[k] += x * c;
                    }
                }
            }
            for (l, &o) in local.iter().zip(offsets) {
                let a = &mut amps[base + o];
                *a = if draw.index < n { *l } else { *a - *l } / norm;
            }
        }
        Ok(MeasurementRecord {
            target: Target::Projectors {
                sites: set.sites.clone(),
                count: n,
            },
            outcome: draw.index,
            level: None,
            probability: p,
            uniform: draw.uniform,
        })
    }
}
