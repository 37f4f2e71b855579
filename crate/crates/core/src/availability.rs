//! Availability of links, paths and protected systems.
//!
//! Links are independent repairable components, each up with probability
//! `A = MTTF / (MTTF + MTTR)`. A path is a series system; protection turns
//! it into a parallel (whole-path backups) or series-parallel (per-link
//! backups) system. [`monte_carlo_availability`] estimates the same
//! quantities by sampling link states, and is what the closed forms are
//! tested against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack for threshold comparisons, absorbing rounding in products.
pub const THRESHOLD_EPS: f64 = 1e-12;

/// `a >= a_th`, up to [`THRESHOLD_EPS`].
pub fn meets_threshold(a: f64, a_th: f64) -> bool {
    a >= a_th - THRESHOLD_EPS
}

/// Series structure function: 1 iff every link is working.
pub fn structure_series(x: &[bool]) -> bool {
    x.iter().all(|&up| up)
}

/// Parallel structure function: 1 iff at least one branch is working.
pub fn structure_parallel(x: &[bool]) -> bool {
    x.iter().any(|&up| up)
}

pub fn link_availability(mttf_h: f64, mttr_h: f64) -> f64 {
    mttf_h / (mttf_h + mttr_h)
}

/// Product of the link availabilities; 1 for an empty path.
pub fn series_availability(links: &[f64]) -> f64 {
    links.iter().product()
}

/// `1 - prod(1 - A_i)` over independent branches.
pub fn parallel_availability(paths: &[f64]) -> f64 {
    1.0 - paths.iter().map(|a| 1.0 - a).product::<f64>()
}

/// Working path where each `protected` link `(A_e, A'_e)` has a backup of
/// availability `A'_e` and the remaining links are unprotected.
pub fn series_parallel_availability(protected: &[(f64, f64)], unprotected: &[f64]) -> f64 {
    protected
        .iter()
        .map(|&(a, b)| parallel_availability(&[a, b]))
        .product::<f64>()
        * series_availability(unprotected)
}

/// Path availability after adding one more whole-path backup.
pub fn ava_dsbpss_update(a_pp: f64, a_bp: f64) -> f64 {
    1.0 - (1.0 - a_pp) * (1.0 - a_bp)
}

/// Path availability after protecting one of its links.
///
/// `a_l` is the availability of the protected link, which must be a factor
/// of `a_pp`. Returns the new path availability and the availability of the
/// protected link.
pub fn ava_dcyc_update(a_pp: f64, a_l: f64, a_bp: f64) -> Result<(f64, f64)> {
    if a_l == 0.0 {
        return Err(Error::ZeroAvailability);
    }
    let a_pl = 1.0 - (1.0 - a_l) * (1.0 - a_bp);
    Ok((a_pp * a_pl / a_l, a_pl))
}

/// A system of independent components, for the sampling oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum System {
    Link(f64),
    Series(Vec<System>),
    Parallel(Vec<System>),
}

impl System {
    pub fn series_of(links: &[f64]) -> Self {
        System::Series(links.iter().map(|&a| System::Link(a)).collect())
    }

    /// Parallel branches, each a series of links.
    pub fn parallel_of(branches: &[Vec<f64>]) -> Self {
        System::Parallel(branches.iter().map(|b| System::series_of(b)).collect())
    }

    /// Working links in series; protected ones have a parallel backup route.
    pub fn series_parallel_of(protected: &[(f64, Vec<f64>)], unprotected: &[f64]) -> Self {
        let mut parts: Vec<System> = protected
            .iter()
            .map(|(a, backup)| System::Parallel(vec![System::Link(*a), System::series_of(backup)]))
            .collect();
        parts.extend(unprotected.iter().map(|&a| System::Link(a)));
        System::Series(parts)
    }

    fn leaves(&self, out: &mut Vec<f64>) {
        match self {
            System::Link(a) => out.push(*a),
            System::Series(parts) | System::Parallel(parts) => parts.iter().for_each(|p| p.leaves(out)),
        }
    }

    /// Evaluates the structure function on a state vector laid out in
    /// depth-first leaf order, advancing `cursor` past this subsystem.
    fn evaluate(&self, x: &[bool], cursor: &mut usize) -> bool {
        match self {
            System::Link(_) => {
                *cursor += 1;
                x[*cursor - 1]
            }
            // No short-circuit: every component must advance the cursor.
            System::Series(parts) => parts.iter().fold(true, |all, p| p.evaluate(x, cursor) & all),
            System::Parallel(parts) => parts.iter().fold(false, |any, p| p.evaluate(x, cursor) | any),
        }
    }

    pub fn structure(&self, x: &[bool]) -> bool {
        let mut cursor = 0;
        self.evaluate(x, &mut cursor)
    }

    pub fn component_count(&self) -> usize {
        let mut v = Vec::new();
        self.leaves(&mut v);
        v.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Estimates `P{structure(x) = 1}` with independent link draws.
pub fn monte_carlo_availability(system: &System, samples: u64, seed: u64) -> McEstimate {
    let mut probs = Vec::new();
    system.leaves(&mut probs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![false; probs.len()];
    let mut up = 0u64;
    let samples = samples.max(1);
    for _ in 0..samples {
        for (xi, &p) in x.iter_mut().zip(&probs) {
            *xi = rng.random::<f64>() < p;
        }
        if system.structure(&x) {
            up += 1;
        }
    }
    let n = samples as f64;
    let p = up as f64 / n;
    McEstimate { estimate: p, stderr: (p * (1.0 - p) / n).sqrt(), samples }
}
