//! Cascaded-CNOT construction of per-node GHZ super-atoms.

use serde::{Deserialize, Serialize};

use crate::qsim::{Control, Level, Register, Sector, SectorUnitary};

use super::ProtocolError;

/// How GHZ phase multiplication is realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GhzPath {
    /// Explicit extra atoms and cascades (small `N` only).
    Circuit,
    /// Multiply every evolved phase by `N` on the single science atom.
    #[default]
    FastPhase,
}

/// When several nodes are built with explicit circuits: all at once with
/// their own extras, or one node at a time on a shared pool of extras
/// (valid because operations on different nodes commute).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GhzSchedule {
    Simultaneous,
    #[default]
    NodeSequential,
}

/// Largest `N` accepted by the explicit circuit path.
pub const MAX_CIRCUIT_GHZ: u32 = 6;

/// A science atom and the `N − 1` extra atoms of its node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GhzNode {
    pub science: usize,
    pub extras: Vec<usize>,
}

impl GhzNode {
    /// Science atom followed by the extras.
    pub fn sites(&self) -> Vec<usize> {
        let mut v = vec![self.science];
        v.extend(&self.extras);
        v
    }

    fn chain(&self) -> Vec<usize> {
        self.sites()
    }
}

fn check_sector(sector: Sector) -> Result<(), ProtocolError> {
    if sector != Sector::GA && sector != Sector::AB {
        return Err(ProtocolError::Precondition(format!(
            "GHZ cascades run in {{ga}} or {{ab}}, not {sector}"
        )));
    }
    Ok(())
}

/// Copies the science atom's sector state down the chain of extras:
/// `{ga}` maps `|a⟩|g…g⟩ → |a…a⟩`, `{ab}` maps `|b⟩|a…a⟩ → |b…b⟩`.
pub fn ghz_build(reg: &mut Register, node: &GhzNode, sector: Sector) -> Result<(), ProtocolError> {
    check_sector(sector)?;
    if sector == Sector::GA {
        for &e in &node.extras {
            if !reg.is_in_level(e, Level::G, 1e-9)? {
                return Err(ProtocolError::Precondition(format!(
                    "GHZ extra site {e} is not fresh"
                )));
            }
        }
    }
    let x = SectorUnitary::x(sector);
    let chain = node.chain();
    for w in chain.windows(2) {
        reg.apply_controlled(&Control::on(w[0], sector.1), w[1], &x)?;
    }
    Ok(())
}

/// Inverse of [`ghz_build`]. In `{ga}` the first link is controlled on the
/// science atom holding either `a` or `b`, so it also undoes a build that
/// was followed by a clock pulse and the `{ab}` round trip.
pub fn ghz_unbuild(
    reg: &mut Register,
    node: &GhzNode,
    sector: Sector,
) -> Result<(), ProtocolError> {
    check_sector(sector)?;
    let x = SectorUnitary::x(sector);
    let chain = node.chain();
    for (i, w) in chain.windows(2).enumerate().rev() {
        let control = if sector == Sector::GA && i == 0 {
            Control::any_of(w[0], &[Level::A, Level::B])
        } else {
            Control::on(w[0], sector.1)
        };
        reg.apply_controlled(&control, w[1], &x)?;
    }
    Ok(())
}
