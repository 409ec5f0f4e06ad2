//! Model configuration: populations, interaction rules, the interaction
//! matrix and simulation parameters.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lattice::Lattice;
use crate::metrics::crowding_indices;

/// Default bias strength of the field-driven walk.
pub const DEFAULT_BETA: f64 = 1.0;

/// Dense index of a population inside a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PopulationId(pub u32);

impl PopulationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub name: String,
    pub size: u32,
}

impl PopulationSpec {
    pub fn new(name: impl Into<String>, size: u32) -> Self {
        Self {
            name: name.into(),
            size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Movement {
    RandomWalk,
    FollowPath,
}

impl Movement {
    pub fn token(self) -> &'static str {
        match self {
            Movement::RandomWalk => "random-walk",
            Movement::FollowPath => "follow-path",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "random-walk" => Some(Movement::RandomWalk),
            "follow-path" => Some(Movement::FollowPath),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Deactivation {
    None,
    Source,
}

impl Deactivation {
    pub fn token(self) -> &'static str {
        match self {
            Deactivation::None => "deactivate-none",
            Deactivation::Source => "deactivate-source",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "deactivate-none" => Some(Deactivation::None),
            "deactivate-source" => Some(Deactivation::Source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRule {
    pub name: String,
    pub movement: Movement,
    pub deactivation: Deactivation,
}

impl InteractionRule {
    pub fn new(name: impl Into<String>, movement: Movement, deactivation: Deactivation) -> Self {
        Self {
            name: name.into(),
            movement,
            deactivation,
        }
    }

    /// The `walk` rule: unbiased random walk, never deactivates.
    pub fn walk() -> Self {
        Self::new("walk", Movement::RandomWalk, Deactivation::None)
    }

    /// The `cooc` rule: field-biased walk, source freezes next to its target.
    pub fn cooc() -> Self {
        Self::new("cooc", Movement::FollowPath, Deactivation::Source)
    }
}

/// Target family and interaction distance of a directed matrix entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryTarget {
    pub family: String,
    pub distance: f64,
}

/// One line of an interaction matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub source: String,
    pub rule: String,
    pub priority: u32,
    pub cardinality: u32,
    pub target: Option<EntryTarget>,
}

impl MatrixEntry {
    pub fn targetless(
        source: impl Into<String>,
        rule: impl Into<String>,
        priority: u32,
        cardinality: u32,
    ) -> Self {
        Self {
            source: source.into(),
            rule: rule.into(),
            priority,
            cardinality,
            target: None,
        }
    }

    pub fn targeted(
        source: impl Into<String>,
        rule: impl Into<String>,
        priority: u32,
        cardinality: u32,
        family: impl Into<String>,
        distance: f64,
    ) -> Self {
        Self {
            source: source.into(),
            rule: rule.into(),
            priority,
            cardinality,
            target: Some(EntryTarget {
                family: family.into(),
                distance,
            }),
        }
    }
}

/// Run parameters. Step length (1 patch per tick) and the 8 directions are
/// fixed by the lattice and are not configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub beta: f64,
    pub seed: u64,
    pub max_ticks: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            seed: 0,
            max_ticks: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub lattice: Lattice,
    pub populations: Vec<PopulationSpec>,
    pub rules: Vec<InteractionRule>,
    pub matrix: Vec<MatrixEntry>,
    pub params: SimParams,
}

impl Model {
    pub fn population_id(&self, name: &str) -> Option<PopulationId> {
        self.populations
            .iter()
            .position(|p| p.name == name)
            .map(|i| PopulationId(i as u32))
    }

    pub fn population_name(&self, id: PopulationId) -> &str {
        &self.populations[id.index()].name
    }

    pub fn rule(&self, name: &str) -> Option<&InteractionRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn total_agents(&self) -> u64 {
        self.populations.iter().map(|p| u64::from(p.size)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
        }
    }

    fn warning(message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

/// Check every invariant and cross-reference of `model`.
///
/// The model is runnable iff no returned diagnostic is an error.
pub fn validate(model: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut names = HashSet::new();
    for p in &model.populations {
        if !is_token(&p.name) {
            out.push(Diagnostic::error(format!(
                "population name {:?} is not a token",
                p.name
            )));
        }
        if !names.insert(p.name.as_str()) {
            out.push(Diagnostic::error(format!(
                "duplicate population {:?}",
                p.name
            )));
        }
        if p.size == 0 {
            out.push(Diagnostic::error(format!(
                "population {:?} has size 0",
                p.name
            )));
        }
    }

    let mut rule_names = HashSet::new();
    for r in &model.rules {
        if !is_token(&r.name) {
            out.push(Diagnostic::error(format!(
                "rule name {:?} is not a token",
                r.name
            )));
        }
        if !rule_names.insert(r.name.as_str()) {
            out.push(Diagnostic::error(format!("duplicate rule {:?}", r.name)));
        }
    }

    let beta = model.params.beta;
    if !beta.is_finite() || beta < 0.0 {
        out.push(Diagnostic::error(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }

    for (i, e) in model.matrix.iter().enumerate() {
        let line = i + 1;
        if !names.contains(e.source.as_str()) {
            out.push(Diagnostic::error(format!(
                "matrix entry {line}: unresolved source population {:?}",
                e.source
            )));
        }
        let rule = model.rule(&e.rule);
        if rule.is_none() {
            out.push(Diagnostic::error(format!(
                "matrix entry {line}: unresolved rule {:?}",
                e.rule
            )));
        }
        if let Some(t) = &e.target {
            if !names.contains(t.family.as_str()) {
                out.push(Diagnostic::error(format!(
                    "matrix entry {line}: unresolved target population {:?}",
                    t.family
                )));
            }
            if !t.distance.is_finite() || t.distance <= 0.0 {
                out.push(Diagnostic::error(format!(
                    "matrix entry {line}: distance must be positive, got {}",
                    t.distance
                )));
            }
        }
        match (rule.map(|r| r.movement), &e.target) {
            (Some(Movement::FollowPath), None) => out.push(Diagnostic::error(format!(
                "matrix entry {line}: follow-path rule {:?} needs a target family and distance",
                e.rule
            ))),
            (Some(Movement::RandomWalk), Some(_)) => out.push(Diagnostic::error(format!(
                "matrix entry {line}: random-walk rule {:?} cannot take a target",
                e.rule
            ))),
            _ => {}
        }
        if e.cardinality > 1 {
            out.push(Diagnostic::warning(format!(
                "matrix entry {line}: cardinality {} > 1 is accepted but has no multi-target meaning",
                e.cardinality
            )));
        }
    }

    for p in &model.populations {
        if !model.matrix.iter().any(|e| e.source == p.name) {
            out.push(Diagnostic::warning(format!(
                "population {:?} has no matrix entry and is inert",
                p.name
            )));
        }
    }

    let crowd = crowding_indices(&model.lattice, model.total_agents());
    if model.total_agents() > crowd.critical_count {
        out.push(Diagnostic::warning(format!(
            "{} agents exceed the critical count n_c = {} on {} patches",
            model.total_agents(),
            crowd.critical_count,
            crowd.patch_count
        )));
    }

    out
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}
