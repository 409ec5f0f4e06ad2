//! Co-occurrence edge lists and the relation models built around a target.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{content_lines, ParseError};
use crate::lattice::Lattice;
use crate::model::{InteractionRule, MatrixEntry, Model, PopulationSpec, SimParams};

/// Interaction distance of generated follow-path entries.
pub const DEFAULT_DISTANCE: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelationError {
    #[error("target {0:?} does not appear in the edge list")]
    UnknownTarget(String),
}

/// Undirected relations without self-loops or duplicates. Each pair is
/// stored with the lexicographically smaller name first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    edges: BTreeSet<(String, String)>,
}

impl EdgeList {
    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            let (a, b) = (a.into(), b.into());
            if a == b {
                continue;
            }
            edges.insert(if a < b { (a, b) } else { (b, a) });
        }
        Self { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn names(&self) -> BTreeSet<&str> {
        self.edges().flat_map(|(a, b)| [a, b]).collect()
    }

    fn adjacency(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (a, b) in self.edges() {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
        adj
    }

    pub fn neighbors(&self, name: &str) -> BTreeSet<&str> {
        self.adjacency().remove(name).unwrap_or_default()
    }
}

/// One `name name` pair per line; `#` starts a comment line.
pub fn parse_edge_list(text: &str) -> Result<EdgeList, ParseError> {
    let pairs = content_lines(text, '#')
        .map(|(line, f)| match f.as_slice() {
            [a, b] => Ok(((*a).to_string(), (*b).to_string())),
            _ => Err(ParseError::Malformed {
                line,
                message: format!("expected `name name`, found {} field(s)", f.len()),
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EdgeList::from_pairs(pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationSetKind {
    /// The target and its direct neighbors; only edges incident to the target.
    Restricted,
    /// Neighbors up to two hops; every edge among them.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationOptions {
    pub distance: f64,
    /// Emit both directions of every edge instead of smaller→larger only.
    pub symmetric: bool,
}

impl Default for RelationOptions {
    fn default() -> Self {
        Self {
            distance: DEFAULT_DISTANCE,
            symmetric: false,
        }
    }
}

/// Populations, rules and matrix generated from an edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationModel {
    /// Target first, then the rest in name order.
    pub populations: Vec<String>,
    pub rules: Vec<InteractionRule>,
    pub matrix: Vec<MatrixEntry>,
}

impl RelationModel {
    /// Number of follow-path entries.
    pub fn relation_count(&self) -> usize {
        self.matrix.iter().filter(|e| e.target.is_some()).count()
    }

    pub fn into_model(self, lattice: Lattice, size: u32, params: SimParams) -> Model {
        Model {
            lattice,
            populations: self
                .populations
                .into_iter()
                .map(|n| PopulationSpec::new(n, size))
                .collect(),
            rules: self.rules,
            matrix: self.matrix,
            params,
        }
    }
}

pub fn build_relation_model(
    edges: &EdgeList,
    target: &str,
    kind: RelationSetKind,
    options: RelationOptions,
) -> Result<RelationModel, RelationError> {
    let adj = edges.adjacency();
    let first = adj
        .get(target)
        .ok_or_else(|| RelationError::UnknownTarget(target.to_string()))?;

    let mut members: BTreeSet<&str> = first.clone();
    members.insert(target);
    if kind == RelationSetKind::Extended {
        for n in first {
            members.extend(adj[n].iter().copied());
        }
    }

    let relations: Vec<(&str, &str)> = match kind {
        RelationSetKind::Restricted => edges
            .edges()
            .filter(|(a, b)| *a == target || *b == target)
            .collect(),
        RelationSetKind::Extended => edges
            .edges()
            .filter(|(a, b)| members.contains(a) && members.contains(b))
            .collect(),
    };

    let populations: Vec<String> = std::iter::once(target)
        .chain(members.iter().copied().filter(|n| *n != target))
        .map(str::to_string)
        .collect();

    let walk = InteractionRule::walk();
    let cooc = InteractionRule::cooc();
    let mut matrix: Vec<MatrixEntry> = populations
        .iter()
        .map(|p| MatrixEntry::targetless(p.clone(), walk.name.clone(), 0, 0))
        .collect();
    for (a, b) in relations {
        matrix.push(MatrixEntry::targeted(
            a,
            cooc.name.clone(),
            1,
            1,
            b,
            options.distance,
        ));
        if options.symmetric {
            matrix.push(MatrixEntry::targeted(
                b,
                cooc.name.clone(),
                1,
                1,
                a,
                options.distance,
            ));
        }
    }

    Ok(RelationModel {
        populations,
        rules: vec![walk, cooc],
        matrix,
    })
}
