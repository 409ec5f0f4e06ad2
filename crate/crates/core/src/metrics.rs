//! Aggregation diagnostics: crowding indices, neighborhood frequency
//! tables, drift/diffusion estimates and list overlap.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::WorldState;
use crate::lattice::{Lattice, Position};
use crate::model::{Model, PopulationId};

/// Minimum number of single-tick displacements for a drift/diffusion estimate.
pub const MIN_DISPLACEMENTS: usize = 1_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("population {0:?} not found")]
    UnknownPopulation(String),
    #[error("need at least {need} displacements, got {got}")]
    InsufficientSamples { got: usize, need: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrowdingIndices {
    /// `N_p = A²`.
    pub patch_count: u64,
    /// `d_c = (n − ¾n) / N_p`.
    pub critical_density: f64,
    /// `n_c = ⌊N_p / 4⌋`.
    pub critical_count: u64,
}

pub fn crowding_indices(lattice: &Lattice, agents: u64) -> CrowdingIndices {
    let patch_count = lattice.patch_count();
    CrowdingIndices {
        patch_count,
        critical_density: agents as f64 / 4.0 / patch_count as f64,
        critical_count: patch_count / 4,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationCount {
    pub name: String,
    pub count: u64,
}

/// Neighbor frequencies of every non-target population around a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodReport {
    pub target: String,
    pub distance: f64,
    pub tick: u64,
    pub counts: Vec<PopulationCount>,
    pub global_average: f64,
}

impl NeighborhoodReport {
    /// Build a report whose average is the mean of `counts`.
    pub fn from_counts(
        target: impl Into<String>,
        distance: f64,
        tick: u64,
        counts: Vec<PopulationCount>,
    ) -> Self {
        let total: u64 = counts.iter().map(|c| c.count).sum();
        let global_average = if counts.is_empty() {
            0.0
        } else {
            total as f64 / counts.len() as f64
        };
        Self {
            target: target.into(),
            distance,
            tick,
            counts,
            global_average,
        }
    }

    /// Rows by descending count, ties by name.
    pub fn ranked(&self) -> Vec<&PopulationCount> {
        let mut rows: Vec<_> = self.counts.iter().collect();
        rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.name.cmp(&b.name)));
        rows
    }

    /// The set `S_i`: populations with at least one agent in the neighborhood.
    pub fn neighborhood_set(&self) -> BTreeSet<&str> {
        self.counts
            .iter()
            .filter(|c| c.count > 0)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn count_of(&self, name: &str) -> Option<u64> {
        self.counts.iter().find(|c| c.name == name).map(|c| c.count)
    }
}

/// Patches within `d` of any agent of `target`.
fn coverage(state: &WorldState, lattice: &Lattice, target: PopulationId, d: f64) -> Vec<bool> {
    let disc = lattice.disc_offsets(d);
    let mut covered = vec![false; lattice.patch_count() as usize];
    let mut seen = vec![false; lattice.patch_count() as usize];
    for a in state.agents.iter().filter(|a| a.population == target) {
        let origin = lattice.index(a.position);
        if std::mem::replace(&mut seen[origin], true) {
            continue;
        }
        for &(dx, dy) in &disc {
            covered[lattice.index(lattice.shift(a.position, dx, dy))] = true;
        }
    }
    covered
}

fn counts_around(state: &WorldState, model: &Model, target: PopulationId, d: f64) -> Vec<u64> {
    let covered = coverage(state, &model.lattice, target, d);
    let mut counts = vec![0u64; model.populations.len()];
    for a in &state.agents {
        if a.population != target && covered[model.lattice.index(a.position)] {
            counts[a.population.index()] += 1;
        }
    }
    counts
}

/// For each non-target population, the number of its agents within `d`
/// of at least one agent of `target`.
pub fn neighborhood_counts(
    state: &WorldState,
    model: &Model,
    target: &str,
    d: f64,
) -> Result<NeighborhoodReport, MetricsError> {
    let tid = model
        .population_id(target)
        .ok_or_else(|| MetricsError::UnknownPopulation(target.to_string()))?;
    let counts = counts_around(state, model, tid, d);
    let rows = model
        .populations
        .iter()
        .zip(counts)
        .enumerate()
        .filter(|(i, _)| *i != tid.index())
        .map(|(_, (p, count))| PopulationCount {
            name: p.name.clone(),
            count,
        })
        .collect();
    Ok(NeighborhoodReport::from_counts(target, d, state.tick, rows))
}

/// Per population, whether its neighborhood set holds every other population.
pub fn equidistribution_check(state: &WorldState, model: &Model, d: f64) -> Vec<(String, bool)> {
    (0..model.populations.len())
        .map(|i| {
            let id = PopulationId(i as u32);
            let counts = counts_around(state, model, id, d);
            let full = counts.iter().enumerate().all(|(k, &c)| k == i || c > 0);
            (model.populations[i].name.clone(), full)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftDiffusion {
    /// Mean single-tick displacement (first jump moment).
    pub drift: [f64; 2],
    pub drift_stderr: [f64; 2],
    /// Mean squared single-tick displacement (second jump moment).
    pub diffusion: f64,
    pub diffusion_stderr: f64,
    pub samples: usize,
}

#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn stderr(&self) -> f64 {
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Estimate the first two jump moments from per-agent position series.
/// Displacements are unwrapped with the minimum-image convention.
pub fn estimate_drift_diffusion(
    lattice: &Lattice,
    trajectories: &[Vec<Position>],
) -> Result<DriftDiffusion, MetricsError> {
    let (mut mx, mut my, mut m2) = (Moments::default(), Moments::default(), Moments::default());
    for path in trajectories {
        for w in path.windows(2) {
            let (dx, dy) = lattice.displacement(w[0], w[1]);
            let (dx, dy) = (dx as f64, dy as f64);
            mx.push(dx);
            my.push(dy);
            m2.push(dx * dx + dy * dy);
        }
    }
    if m2.n < MIN_DISPLACEMENTS {
        return Err(MetricsError::InsufficientSamples {
            got: m2.n,
            need: MIN_DISPLACEMENTS,
        });
    }
    Ok(DriftDiffusion {
        drift: [mx.mean(), my.mean()],
        drift_stderr: [mx.stderr(), my.stderr()],
        diffusion: m2.mean(),
        diffusion_stderr: m2.stderr(),
        samples: m2.n,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// Lower-cased common names, sorted.
    pub intersection: Vec<String>,
    pub hits: usize,
    pub reference: usize,
}

/// Case-insensitive exact-token intersection of two name lists. Sizes
/// count distinct names after case folding.
pub fn overlap_report<S: AsRef<str>>(hits: &[S], reference: &[S]) -> OverlapReport {
    let fold = |xs: &[S]| -> BTreeSet<String> {
        xs.iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .collect()
    };
    let h = fold(hits);
    let r = fold(reference);
    OverlapReport {
        intersection: h.intersection(&r).cloned().collect(),
        hits: h.len(),
        reference: r.len(),
    }
}

/// Populations whose count reaches `factor` times the report's global
/// average, by descending count then name.
pub fn significant_populations(report: &NeighborhoodReport, factor: f64) -> Vec<PopulationCount> {
    // relative slack absorbs rounding of the average at exact equality
    let threshold = factor * report.global_average * (1.0 - 1e-12);
    report
        .ranked()
        .into_iter()
        .filter(|c| c.count as f64 >= threshold)
        .cloned()
        .collect()
}
