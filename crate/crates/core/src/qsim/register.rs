use num_complex::Complex64 as C64;

use super::{Level, QsimError, SectorUnitary, SiteSpec};

/// Upper bound on dense amplitude storage (256 MiB of `Complex64`).
pub const MAX_AMPLITUDES: usize = 1 << 24;

/// Control condition: `site` must occupy one of `levels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Control {
    pub site: usize,
    pub levels: Vec<Level>,
}

impl Control {
    pub fn on(site: usize, level: Level) -> Self {
        Control {
            site,
            levels: vec![level],
        }
    }

    pub fn any_of(site: usize, levels: &[Level]) -> Self {
        Control {
            site,
            levels: levels.to_vec(),
        }
    }
}

/// Dense pure state over an ordered list of qubit/qutrit sites.
///
/// Amplitudes are stored site-major: site 0 is the most significant digit
/// of the flat index, so `|a, g, g⟩` on three qutrits sits at index
/// `1·9 + 0·3 + 0`. Global phase is not tracked.
///
/// Sites known to sit exactly in their first level are flagged, and the
/// hot loops skip every index with a nonzero digit on them.
#[derive(Clone, Debug)]
pub struct Register {
    sites: Vec<SiteSpec>,
    strides: Vec<usize>,
    amps: Vec<C64>,
    ground: Vec<bool>,
}

impl PartialEq for Register {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites && self.amps == other.amps
    }
}

impl Register {
    /// Product state with every site in its first level.
    pub fn new(sites: Vec<SiteSpec>) -> Result<Self, QsimError> {
        let len = Self::checked_len(&sites)?;
        let mut amps = vec![C64::new(0.0, 0.0); len];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Register {
            strides: Self::strides_for(&sites),
            ground: vec![true; sites.len()],
            sites,
            amps,
        })
    }

    /// Builds a register from raw amplitudes, normalising them.
    pub fn from_amplitudes(sites: Vec<SiteSpec>, amps: Vec<C64>) -> Result<Self, QsimError> {
        let len = Self::checked_len(&sites)?;
        if amps.len() != len {
            return Err(QsimError::DimensionMismatch {
                expected: len,
                got: amps.len(),
            });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(QsimError::ZeroState);
        }
        Ok(Register {
            strides: Self::strides_for(&sites),
            ground: vec![false; sites.len()],
            sites,
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    fn checked_len(sites: &[SiteSpec]) -> Result<usize, QsimError> {
        if sites.is_empty() {
            return Err(QsimError::BadSite(
                "register needs at least one site".into(),
            ));
        }
        let mut len: usize = 1;
        for s in sites {
            len = len
                .checked_mul(s.dim())
                .filter(|&l| l <= MAX_AMPLITUDES)
                .ok_or(QsimError::TooLarge(MAX_AMPLITUDES))?;
        }
        Ok(len)
    }

    fn strides_for(sites: &[SiteSpec]) -> Vec<usize> {
        let mut strides = vec![1; sites.len()];
        for i in (0..sites.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sites[i + 1].dim();
        }
        strides
    }

    pub fn sites(&self) -> &[SiteSpec] {
        &self.sites
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, site: usize) -> Result<&SiteSpec, QsimError> {
        self.sites.get(site).ok_or(QsimError::SiteOutOfRange(site))
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub(crate) fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    /// Forgets that `site` is known to be in its first level.
    pub(crate) fn touch(&mut self, site: usize) {
        self.ground[site] = false;
    }

    pub(crate) fn mark_ground(&mut self, site: usize) {
        self.ground[site] = true;
    }

    /// Contiguous `(start, len)` index runs with the given digits fixed and
    /// every flagged ground site at digit 0. Empty when a fixed digit
    /// contradicts a ground flag.
    pub(crate) fn runs(&self, fixed: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let n = self.sites.len();
        let mut fix: [Option<usize>; 64] = [None; 64];
        if n > 64 {
            let mut out = Vec::new();
            self.slow_runs(fixed, &mut out);
            return out;
        }
        for &(s, d) in fixed {
            if self.ground[s] && d != 0 {
                return Vec::new();
            }
            fix[s] = Some(d);
        }
        for s in 0..n {
            if self.ground[s] && fix[s].is_none() {
                fix[s] = Some(0);
            }
        }
        let Some(last) = (0..n).rev().find(|&s| fix[s].is_some()) else {
            return vec![(0, self.amps.len())];
        };
        let run = self.strides[last];
        let base: usize = (0..n)
            .filter_map(|s| fix[s].map(|d| d * self.strides[s]))
            .sum();
        let mut out = vec![(base, run)];
        for s in 0..last {
            if fix[s].is_none() {
                let st = self.strides[s];
                let d = self.sites[s].dim();
                let k = out.len();
                for digit in 1..d {
                    for j in 0..k {
                        out.push((out[j].0 + digit * st, run));
                    }
                }
            }
        }
        out
    }

    /// Unoptimised fallback: one run per matching index.
    fn slow_runs(&self, fixed: &[(usize, usize)], out: &mut Vec<(usize, usize)>) {
        'outer: for i in 0..self.amps.len() {
            for &(s, d) in fixed {
                if (i / self.strides[s]) % self.sites[s].dim() != d {
                    continue 'outer;
                }
            }
            out.push((i, 1));
        }
    }

    pub(crate) fn level_index(&self, site: usize, level: Level) -> Result<usize, QsimError> {
        self.site(site)?
            .index_of(level)
            .ok_or(QsimError::LevelAbsent { site, level })
    }

    /// Flat index of a computational basis state given one level per site.
    pub fn index_of(&self, levels: &[Level]) -> Result<usize, QsimError> {
        if levels.len() != self.sites.len() {
            return Err(QsimError::DimensionMismatch {
                expected: self.sites.len(),
                got: levels.len(),
            });
        }
        levels.iter().enumerate().try_fold(0, |acc, (s, &l)| {
            Ok(acc + self.level_index(s, l)? * self.strides[s])
        })
    }

    pub fn amplitude(&self, levels: &[Level]) -> Result<C64, QsimError> {
        Ok(self.amps[self.index_of(levels)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn same_shape(&self, other: &Register) -> Result<(), QsimError> {
        if self.sites != other.sites {
            return Err(QsimError::DimensionMismatch {
                expected: self.amps.len(),
                got: other.amps.len(),
            });
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Register) -> Result<C64, QsimError> {
        self.same_shape(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &Register) -> Result<f64, QsimError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    fn check_distinct(&self, a: usize, b: usize) -> Result<(), QsimError> {
        self.site(a)?;
        self.site(b)?;
        if a == b {
            return Err(QsimError::SameSite(a));
        }
        Ok(())
    }

    /// Offsets (in flat-index units) of the two sector levels on `site`.
    fn sector_offsets(&self, site: usize, u: &SectorUnitary) -> Result<(usize, usize), QsimError> {
        let sector = u.sector();
        let i0 = self.level_index(site, sector.0)?;
        let i1 = self.level_index(site, sector.1)?;
        let st = self.strides[site];
        Ok((i0 * st, i1 * st))
    }

    /// Calls `f(base)` for every flat index whose digit at `site` is 0.
    #[inline]
    fn for_each_base(&self, site: usize, mut f: impl FnMut(usize)) {
        let st = self.strides[site];
        let block = st * self.sites[site].dim();
        let mut start = 0;
        while start < self.amps.len() {
            for base in start..start + st {
                f(base);
            }
            start += block;
        }
    }

    pub fn apply_sector_unitary(
        &mut self,
        site: usize,
        u: &SectorUnitary,
    ) -> Result<(), QsimError> {
        let (o0, o1) = self.sector_offsets(site, u)?;
        let runs = self.runs(&[(site, 0)]);
        PairOp::of(u.matrix()).run(&mut self.amps, o0, o1, runs.into_iter());
        self.ground[site] = false;
        Ok(())
    }

    /// Applies `u` on `target` wherever `control` holds one of its levels.
    pub fn apply_controlled(
        &mut self,
        control: &Control,
        target: usize,
        u: &SectorUnitary,
    ) -> Result<(), QsimError> {
        self.check_distinct(control.site, target)?;
        let mut mask = [false; 3];
        for &l in &control.levels {
            mask[self.level_index(control.site, l)?] = true;
        }
        let (o0, o1) = self.sector_offsets(target, u)?;
        let op = PairOp::of(u.matrix());
        for (digit, &on) in mask.iter().enumerate() {
            if on {
                let runs = self.runs(&[(control.site, digit), (target, 0)]);
                if !runs.is_empty() {
                    op.run(&mut self.amps, o0, o1, runs.into_iter());
                    self.ground[target] = false;
                }
            }
        }
        Ok(())
    }

    /// Multiplies every amplitude with `site` in `level` by `exp(-i·phase)`.
    pub fn apply_phase(&mut self, site: usize, level: Level, phase: f64) -> Result<(), QsimError> {
        let li = self.level_index(site, level)?;
        if phase == 0.0 {
            return Ok(());
        }
        let factor = C64::from_polar(1.0, -phase);
        for (start, n) in self.runs(&[(site, li)]) {
            for a in &mut self.amps[start..start + n] {
                *a *= factor;
            }
        }
        Ok(())
    }

    /// Applies a full `dim × dim` unitary (row-major, `matrix[r][c]`) to `site`.
    pub fn apply_site_unitary(
        &mut self,
        site: usize,
        matrix: &[Vec<C64>],
    ) -> Result<(), QsimError> {
        let d = self.site(site)?.dim();
        if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
            return Err(QsimError::DimensionMismatch {
                expected: d,
                got: matrix.len(),
            });
        }
        for r in 0..d {
            for c in 0..d {
                let dot: C64 = (0..d).map(|k| matrix[k][r].conj() * matrix[k][c]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                if (dot - want).norm() > 1e-12 {
                    return Err(QsimError::NotUnitary);
                }
            }
        }
        self.ground[site] = false;
        let st = self.strides[site];
        let mut bases = Vec::with_capacity(self.amps.len() / d);
        self.for_each_base(site, |b| bases.push(b));
        let mut local = [C64::new(0.0, 0.0); 3];
        for base in bases {
            for (k, v) in local.iter_mut().enumerate().take(d) {
                *v = self.amps[base + k * st];
            }
            for (r, row) in matrix.iter().enumerate() {
                self.amps[base + r * st] = row.iter().zip(&local).map(|(m, v)| m * v).sum();
            }
        }
        Ok(())
    }

    /// Probability of finding `site` in each of its levels.
    pub fn populations(&self, site: usize) -> Result<Vec<f64>, QsimError> {
        let d = self.site(site)?.dim();
        let mut p = vec![0.0; d];
        for (k, v) in p.iter_mut().enumerate() {
            for (start, n) in self.runs(&[(site, k)]) {
                *v += self.amps[start..start + n]
                    .iter()
                    .map(|a| a.norm_sqr())
                    .sum::<f64>();
            }
        }
        Ok(p)
    }

    pub fn level_population(&self, site: usize, level: Level) -> Result<f64, QsimError> {
        let li = self.level_index(site, level)?;
        Ok(self.populations(site)?[li])
    }

    /// Single-site reduced density matrix `ρ[r][c]`.
    pub fn reduced_density(&self, site: usize) -> Result<Vec<Vec<C64>>, QsimError> {
        let d = self.site(site)?.dim();
        let st = self.strides[site];
        let mut rho = vec![vec![C64::new(0.0, 0.0); d]; d];
        self.for_each_base(site, |base| {
            for (r, row) in rho.iter_mut().enumerate() {
                let ar = self.amps[base + r * st];
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell += ar * self.amps[base + c * st].conj();
                }
            }
        });
        Ok(rho)
    }

    /// Returns `site` to its first level. The site must be in a definite
    /// level (e.g. just measured); the move is a level permutation.
    pub fn reset(&mut self, site: usize) -> Result<(), QsimError> {
        let pops = self.populations(site)?;
        let (idx, &p) = pops
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("site has at least two levels");
        if (p - 1.0).abs() > 1e-9 {
            return Err(QsimError::NotDefinite {
                site,
                max_population: p,
            });
        }
        if idx != 0 {
            let levels = self.sites[site].levels();
            let swap = SectorUnitary::x(super::Sector(levels[0], levels[idx]));
            self.apply_sector_unitary(site, &swap)?;
        }
        if pops.iter().enumerate().all(|(k, &q)| k == idx || q == 0.0) {
            self.ground[site] = true;
        }
        Ok(())
    }

    /// True if `site` holds `level` with population 1 (within `tol`).
    pub fn is_in_level(&self, site: usize, level: Level, tol: f64) -> Result<bool, QsimError> {
        Ok((self.level_population(site, level)? - 1.0).abs() <= tol)
    }
}


/// Two-level update specialised on the matrix structure.
#[derive(Clone, Copy)]
enum PairOp {
    Swap,
    Real([[f64; 2]; 2]),
    General([[C64; 2]; 2]),
}

impl PairOp {
    fn of(m: &[[C64; 2]; 2]) -> Self {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        if m[0][0] == zero && m[1][1] == zero && m[0][1] == one && m[1][0] == one {
            PairOp::Swap
        } else if m.iter().flatten().all(|c| c.im == 0.0) {
            PairOp::Real([[m[0][0].re, m[0][1].re], [m[1][0].re, m[1][1].re]])
        } else {
            PairOp::General(*m)
        }
    }

    /// Applies the pair map to `(i + o0, i + o1)` for every `i` in the runs.
    #[inline]
    fn run(
        self,
        amps: &mut [C64],
        o0: usize,
        o1: usize,
        runs: impl Iterator<Item = (usize, usize)>,
    ) {
        match self {
            PairOp::Swap => {
                for (s, n) in runs {
                    for b in s..s + n {
                        amps.swap(b + o0, b + o1);
                    }
                }
            }
            PairOp::Real(m) => {
                for (s, n) in runs {
                    for b in s..s + n {
                        let (x, y) = (amps[b + o0], amps[b + o1]);
                        amps[b + o0] = x * m[0][0] + y * m[0][1];
                        amps[b + o1] = x * m[1][0] + y * m[1][1];
                    }
                }
            }
            PairOp::General(m) => {
                for (s, n) in runs {
                    for b in s..s + n {
                        let (x, y) = (amps[b + o0], amps[b + o1]);
                        amps[b + o0] = m[0][0] * x + m[0][1] * y;
                        amps[b + o1] = m[1][0] * x + m[1][1] * y;
                    }
                }
            }
        }
    }
}
