use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::QsimError;

/// Atomic level label. `G` and `A` span the nuclear-spin qubit in the
/// metastable manifold, `B` is the optical clock partner of `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    G,
    A,
    B,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Level::G => "g",
            Level::A => "a",
            Level::B => "b",
        };
        f.write_str(c)
    }
}

/// Ordered level labels of one register site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteSpec {
    levels: Vec<Level>,
}

impl SiteSpec {
    pub fn new(levels: &[Level]) -> Result<Self, QsimError> {
        if !(2..=3).contains(&levels.len()) {
            return Err(QsimError::BadSite(format!(
                "site dimension must be 2 or 3, got {}",
                levels.len()
            )));
        }
        for (i, l) in levels.iter().enumerate() {
            if levels[..i].contains(l) {
                return Err(QsimError::BadSite(format!("duplicate level label {l}")));
            }
        }
        Ok(SiteSpec {
            levels: levels.to_vec(),
        })
    }

    /// `{g, a}` qubit.
    pub fn qubit() -> Self {
        SiteSpec {
            levels: vec![Level::G, Level::A],
        }
    }

    /// `{g, a, b}` qutrit.
    pub fn qutrit() -> Self {
        SiteSpec {
            levels: vec![Level::G, Level::A, Level::B],
        }
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn index_of(&self, level: Level) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }

    pub fn contains(&self, level: Level) -> bool {
        self.index_of(level).is_some()
    }
}

/// Ordered pair of levels on which a 2×2 block acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Sector(pub Level, pub Level);

impl Sector {
    pub const GA: Sector = Sector(Level::G, Level::A);
    pub const AB: Sector = Sector(Level::A, Level::B);
    pub const GB: Sector = Sector(Level::G, Level::B);
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}{}}}", self.0, self.1)
    }
}

const UNITARY_TOL: f64 = 1e-12;

/// A 2×2 unitary embedded into one sector of a site; the remaining level
/// is left untouched.
///
/// `matrix[r][c]` maps the sector's `c`-th level onto its `r`-th level,
/// where level 0 is `sector.0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectorUnitary {
    sector: Sector,
    matrix: [[C64; 2]; 2],
}

impl SectorUnitary {
    pub fn new(sector: Sector, matrix: [[C64; 2]; 2]) -> Result<Self, QsimError> {
        if sector.0 == sector.1 {
            return Err(QsimError::BadSector(sector));
        }
        let m = &matrix;
        for r in 0..2 {
            for c in 0..2 {
                let dot: C64 = (0..2).map(|k| m[k][r].conj() * m[k][c]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                if (dot - want).norm() > UNITARY_TOL {
                    return Err(QsimError::NotUnitary);
                }
            }
        }
        Ok(SectorUnitary { sector, matrix })
    }

    fn known(sector: Sector, matrix: [[C64; 2]; 2]) -> Self {
        SectorUnitary { sector, matrix }
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn matrix(&self) -> &[[C64; 2]; 2] {
        &self.matrix
    }

    pub fn identity(sector: Sector) -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Self::known(sector, [[o, z], [z, o]])
    }

    pub fn x(sector: Sector) -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Self::known(sector, [[z, o], [o, z]])
    }

    /// `diag(1, -1)` on the sector.
    pub fn z(sector: Sector) -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Self::known(sector, [[o, z], [z, -o]])
    }

    pub fn hadamard(sector: Sector) -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::known(sector, [[h, h], [h, -h]])
    }

    /// Real rotation `exp(-i angle Y / 2)`: maps level 0 to
    /// `cos(angle/2)|0⟩ + sin(angle/2)|1⟩`.
    pub fn ry(sector: Sector, angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        let c = C64::new(c, 0.0);
        let s = C64::new(s, 0.0);
        Self::known(sector, [[c, -s], [s, c]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.matrix;
        Self::known(
            self.sector,
            [
                [m[0][0].conj(), m[1][0].conj()],
                [m[0][1].conj(), m[1][1].conj()],
            ],
        )
    }
}
