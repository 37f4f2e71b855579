//! Sweep configuration: a scenario template plus the grid to vary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use flexprot_core::rsa::ProtectionMode;
use flexprot_core::sim::{Scenario, TopologySource};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub avg_availability: Vec<f64>,
    pub a_th: Vec<f64>,
    pub load: Vec<f64>,
    pub modes: Vec<ProtectionMode>,
}

impl Default for Grid {
    fn default() -> Self {
        Self { avg_availability: vec![0.99], a_th: vec![0.999], load: vec![15.0], modes: vec![ProtectionMode::Dsbpss] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Topology file; the built-in NSFNET when absent. Relative paths are
    /// resolved against the config file's directory.
    pub topology: Option<PathBuf>,
    /// Values not varied by the grid. Its own availability, threshold, load,
    /// mode and seed are ignored.
    pub scenario: Scenario,
    pub grid: Grid,
    pub repetitions: u32,
    /// Repetition `r` runs with seed `base_seed + r`.
    pub base_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { topology: None, scenario: Scenario::default(), grid: Grid::default(), repetitions: 1, base_seed: 1 }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub mode: ProtectionMode,
    pub load_erlang: f64,
    pub avg_avail: f64,
    pub a_th: f64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut spec = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let (Some(t), Some(dir)) = (&spec.topology, path.parent()) {
            if t.is_relative() {
                spec.topology = Some(dir.join(t));
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let g = &self.grid;
        if g.avg_availability.is_empty() || g.a_th.is_empty() || g.load.is_empty() || g.modes.is_empty() {
            bail!("every grid axis needs at least one value");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        Ok(())
    }

    /// Scenario template with the topology file read in.
    pub fn resolved_template(&self) -> anyhow::Result<Scenario> {
        let mut sc = self.scenario.clone();
        if let Some(path) = &self.topology {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            sc.topology = TopologySource::Inline(text);
        }
        Ok(sc)
    }

    pub fn cell_count(&self) -> usize {
        let g = &self.grid;
        g.modes.len() * g.load.len() * g.avg_availability.len() * g.a_th.len() * self.repetitions as usize
    }

    /// Cells in output order: mode, load, availability, threshold, seed.
    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(self.cell_count());
        for &mode in &g.modes {
            for &load_erlang in &g.load {
                for &avg_avail in &g.avg_availability {
                    for &a_th in &g.a_th {
                        for r in 0..self.repetitions {
                            out.push(Cell { mode, load_erlang, avg_avail, a_th, seed: self.base_seed + r as u64 });
                        }
                    }
                }
            }
        }
        out
    }
}
