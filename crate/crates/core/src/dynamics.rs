//! The stepping kernel.
//!
//! Each tick every active agent picks a matrix entry, draws one of the 8
//! neighbor offsets (uniformly for `random-walk`, from the field-biased law
//! for `follow-path`) and all moves are applied at once. Agents whose rule
//! deactivates the source then freeze if enough active target agents
//! surround their new patch.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{offset_length, opposite, Lattice, Position, DIRECTIONS};
use crate::model::{
    has_errors, validate, Deactivation, Diagnostic, MatrixEntry, Model, Movement, PopulationId,
};
use crate::rng::{agent_stream, Purpose};
use crate::spatial::PatchIndex;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("model has {} validation error(s): {}", .0.len(), join_messages(.0))]
    InvalidModel(Vec<Diagnostic>),
    #[error("no matrix entry applies to population {population:?}")]
    NoApplicableRule { population: String },
}

fn join_messages(d: &[Diagnostic]) -> String {
    d.iter()
        .map(|d| d.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Agent {
    pub id: u32,
    pub population: PopulationId,
    pub position: Position,
    pub active: bool,
}

/// All agents at one tick. `agents[i].id == i` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub agents: Vec<Agent>,
}

impl WorldState {
    pub fn population_counts(&self, populations: usize) -> Vec<u64> {
        let mut counts = vec![0u64; populations];
        for a in &self.agents {
            counts[a.population.index()] += 1;
        }
        counts
    }

    pub fn positions(&self) -> Vec<Position> {
        self.agents.iter().map(|a| a.position).collect()
    }
}

/// Probabilities over the 8 neighbor offsets, in lattice offset order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionDistribution {
    probabilities: [f64; DIRECTIONS],
}

impl TransitionDistribution {
    pub fn uniform() -> Self {
        Self {
            probabilities: [1.0 / DIRECTIONS as f64; DIRECTIONS],
        }
    }

    /// Biased law from field values `field[k] = h(r + Δr_k)`.
    ///
    /// Raw weight of offset `k` is `(1/8)·[1 + β·(h(r+Δr) − h(r−Δr)) / |2Δr|]`.
    /// Negative weights are clamped to zero and the result renormalized;
    /// if nothing survives the law falls back to uniform.
    pub fn from_field(field: &[f64; DIRECTIONS], beta: f64) -> Self {
        let d = DIRECTIONS as f64;
        let mut raw = [0.0; DIRECTIONS];
        for (k, w) in raw.iter_mut().enumerate() {
            let gradient = (field[k] - field[opposite(k)]) / (2.0 * offset_length(k));
            *w = ((1.0 + beta * gradient) / d).max(0.0);
        }
        let total: f64 = raw.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Self::uniform();
        }
        for w in &mut raw {
            *w /= total;
        }
        Self { probabilities: raw }
    }

    pub fn probabilities(&self) -> &[f64; DIRECTIONS] {
        &self.probabilities
    }

    /// Offset index for a uniform draw `u` in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &p) in self.probabilities.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
        last
    }
}

#[derive(Debug, Clone)]
struct CompiledEntry {
    matrix_index: usize,
    movement: Movement,
    deactivation: Deactivation,
    cardinality: u64,
    target: Option<(PopulationId, f64)>,
}

/// Immutable tick-`t` view shared by all per-agent computations.
pub struct Snapshot<'s> {
    pub state: &'s WorldState,
    index: PatchIndex,
    family_counts: Vec<u64>,
}

/// Outcome of one agent's move decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedMove {
    pub to: Position,
    /// Matrix index of the selected entry; `None` for frozen agents.
    pub entry: Option<usize>,
}

/// A validated model compiled for stepping.
#[derive(Debug, Clone)]
pub struct Engine {
    model: Model,
    /// Per source population, candidate entries by descending priority then file order.
    candidates: Vec<Vec<CompiledEntry>>,
    /// Per source population, `(target, largest interaction distance)` sorted by target.
    links: Vec<Vec<(PopulationId, f64)>>,
    /// Per source population, Chebyshev reach covering every linked target.
    reach: Vec<u32>,
}

impl Engine {
    pub fn new(model: Model) -> Result<Self, DynamicsError> {
        let diagnostics = validate(&model);
        if has_errors(&diagnostics) {
            return Err(DynamicsError::InvalidModel(
                diagnostics
                    .into_iter()
                    .filter(Diagnostic::is_error)
                    .collect(),
            ));
        }
        let k = model.populations.len();
        let mut candidates: Vec<Vec<CompiledEntry>> = vec![Vec::new(); k];
        let mut links: Vec<Vec<(PopulationId, f64)>> = vec![Vec::new(); k];
        for (i, e) in model.matrix.iter().enumerate() {
            let src = model.population_id(&e.source).expect("validated source");
            let rule = model.rule(&e.rule).expect("validated rule");
            let target = e.target.as_ref().map(|t| {
                (
                    model.population_id(&t.family).expect("validated target"),
                    t.distance,
                )
            });
            if let (Movement::FollowPath, Some((tgt, dist))) = (rule.movement, target) {
                let l = &mut links[src.index()];
                match l.iter_mut().find(|(p, _)| *p == tgt) {
                    Some(slot) => slot.1 = slot.1.max(dist),
                    None => l.push((tgt, dist)),
                }
            }
            candidates[src.index()].push(CompiledEntry {
                matrix_index: i,
                movement: rule.movement,
                deactivation: rule.deactivation,
                cardinality: u64::from(e.cardinality),
                target,
            });
        }
        for c in &mut candidates {
            // stable sort keeps file order among equal priorities
            c.sort_by_key(|e| std::cmp::Reverse(model.matrix[e.matrix_index].priority));
        }
        for l in &mut links {
            l.sort_by_key(|(p, _)| *p);
        }
        let reach = links
            .iter()
            .map(|l| l.iter().map(|(_, d)| d.ceil() as u32).max().unwrap_or(0))
            .collect();
        Ok(Self {
            model,
            candidates,
            links,
            reach,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn lattice(&self) -> &Lattice {
        &self.model.lattice
    }

    /// Place every agent on an independent uniformly random patch.
    pub fn initialize(&self, seed: u64) -> WorldState {
        let side = self.model.lattice.side();
        let mut agents = Vec::with_capacity(self.model.total_agents() as usize);
        for (pi, p) in self.model.populations.iter().enumerate() {
            for _ in 0..p.size {
                let id = agents.len() as u32;
                let mut rng = agent_stream(seed, Purpose::Placement, id, 0);
                let position = Position::new(rng.gen_range(0..side), rng.gen_range(0..side));
                agents.push(Agent {
                    id,
                    population: PopulationId(pi as u32),
                    position,
                    active: true,
                });
            }
        }
        WorldState { tick: 0, agents }
    }

    pub fn snapshot<'s>(&self, state: &'s WorldState) -> Snapshot<'s> {
        let index = PatchIndex::build(
            self.model.lattice,
            state.agents.iter().map(|a| (a.id, a.position)),
        );
        Snapshot {
            state,
            index,
            family_counts: state.population_counts(self.model.populations.len()),
        }
    }

    #[inline]
    fn link_distance(&self, source: PopulationId, target: PopulationId) -> Option<f64> {
        let l = &self.links[source.index()];
        l.binary_search_by_key(&target, |(p, _)| *p)
            .ok()
            .map(|i| l[i].1)
    }

    /// Number of agents linked to `agent` by a follow-path entry that lie
    /// within that entry's distance of `candidate`.
    pub fn potential_at(&self, snap: &Snapshot<'_>, agent: u32, candidate: Position) -> u32 {
        let me = &snap.state.agents[agent as usize];
        let src = me.population;
        if self.links[src.index()].is_empty() {
            return 0;
        }
        let lattice = &self.model.lattice;
        let mut h = 0;
        snap.index
            .for_each_in_square(candidate, self.reach[src.index()], |b| {
                if b == agent {
                    return;
                }
                let other = &snap.state.agents[b as usize];
                if let Some(d) = self.link_distance(src, other.population) {
                    if lattice.within(candidate, other.position, d) {
                        h += 1;
                    }
                }
            });
        h
    }

    /// Field values `h(r + Δr_k)` at the 8 neighbors of `agent`'s patch.
    pub fn field_around(&self, snap: &Snapshot<'_>, agent: u32) -> [f64; DIRECTIONS] {
        let me = &snap.state.agents[agent as usize];
        let src = me.population;
        let mut field = [0.0; DIRECTIONS];
        if self.links[src.index()].is_empty() {
            return field;
        }
        let lattice = &self.model.lattice;
        let probes: [Position; DIRECTIONS] =
            std::array::from_fn(|k| lattice.neighbor(me.position, k));
        snap.index
            .for_each_in_square(me.position, self.reach[src.index()] + 1, |b| {
                if b == agent {
                    return;
                }
                let other = &snap.state.agents[b as usize];
                if let Some(d) = self.link_distance(src, other.population) {
                    for (k, probe) in probes.iter().enumerate() {
                        if lattice.within(*probe, other.position, d) {
                            field[k] += 1.0;
                        }
                    }
                }
            });
        field
    }

    pub fn transition_distribution(
        &self,
        snap: &Snapshot<'_>,
        agent: u32,
    ) -> TransitionDistribution {
        TransitionDistribution::from_field(&self.field_around(snap, agent), self.model.params.beta)
    }

    fn select(&self, snap: &Snapshot<'_>, agent: u32) -> Result<&CompiledEntry, DynamicsError> {
        let pop = snap.state.agents[agent as usize].population;
        self.candidates[pop.index()]
            .iter()
            .find(|e| match (e.movement, e.target) {
                (Movement::FollowPath, Some((tgt, _))) => {
                    snap.family_counts[tgt.index()] >= e.cardinality
                }
                _ => true,
            })
            .ok_or_else(|| DynamicsError::NoApplicableRule {
                population: self.model.population_name(pop).to_string(),
            })
    }

    /// Highest-priority applicable matrix entry for `agent`.
    pub fn select_rule(
        &self,
        snap: &Snapshot<'_>,
        agent: u32,
    ) -> Result<&MatrixEntry, DynamicsError> {
        self.select(snap, agent)
            .map(|e| &self.model.matrix[e.matrix_index])
    }

    /// Decide where `agent` moves this tick. Depends only on the snapshot,
    /// the root seed, the agent id and the tick.
    pub fn plan_move(
        &self,
        snap: &Snapshot<'_>,
        agent: u32,
        root: u64,
    ) -> Result<PlannedMove, DynamicsError> {
        let me = &snap.state.agents[agent as usize];
        if !me.active {
            return Ok(PlannedMove {
                to: me.position,
                entry: None,
            });
        }
        let entry = self.select(snap, agent)?;
        let mut rng = agent_stream(root, Purpose::Move, agent, snap.state.tick);
        let k = match entry.movement {
            Movement::RandomWalk => rng.gen_range(0..DIRECTIONS),
            Movement::FollowPath => self
                .transition_distribution(snap, agent)
                .sample_index(rng.gen()),
        };
        Ok(PlannedMove {
            to: self.model.lattice.neighbor(me.position, k),
            entry: Some(entry.matrix_index),
        })
    }

    /// Apply a full set of planned moves and the deactivation pass.
    pub fn apply_moves(&self, state: &WorldState, moves: &[PlannedMove]) -> WorldState {
        let moved: Vec<Agent> = state
            .agents
            .iter()
            .zip(moves)
            .map(|(a, m)| Agent {
                position: m.to,
                ..*a
            })
            .collect();
        let next = WorldState {
            tick: state.tick + 1,
            agents: moved,
        };
        let index = PatchIndex::build(
            self.model.lattice,
            next.agents.iter().map(|a| (a.id, a.position)),
        );
        let lattice = &self.model.lattice;
        let frozen: Vec<bool> = next
            .agents
            .par_iter()
            .zip(moves.par_iter())
            .map(|(a, m)| {
                let Some(ei) = m.entry else { return false };
                let entry = self.candidates[a.population.index()]
                    .iter()
                    .find(|e| e.matrix_index == ei)
                    .expect("planned entry belongs to the agent's population");
                let (Deactivation::Source, Some((tgt, dist))) = (entry.deactivation, entry.target)
                else {
                    return false;
                };
                let mut near = 0u64;
                index.for_each_in_square(a.position, dist.ceil() as u32, |b| {
                    let other = &next.agents[b as usize];
                    if b != a.id
                        && other.active
                        && other.population == tgt
                        && lattice.within(a.position, other.position, dist)
                    {
                        near += 1;
                    }
                });
                near >= entry.cardinality
            })
            .collect();
        let agents = next
            .agents
            .iter()
            .zip(frozen)
            .map(|(a, f)| Agent {
                active: a.active && !f,
                ..*a
            })
            .collect();
        WorldState {
            tick: next.tick,
            agents,
        }
    }

    /// One synchronous tick.
    pub fn step(&self, state: &WorldState, root: u64) -> Result<WorldState, DynamicsError> {
        let snap = self.snapshot(state);
        let moves = state
            .agents
            .par_iter()
            .map(|a| self.plan_move(&snap, a.id, root))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.apply_moves(state, &moves))
    }

    /// Initialize from the model seed and step to `max_ticks`, calling
    /// `observer` on the state at every tick listed in `report_ticks`.
    pub fn run<F>(&self, report_ticks: &[u64], mut observer: F) -> Result<WorldState, DynamicsError>
    where
        F: FnMut(&WorldState),
    {
        let seed = self.model.params.seed;
        let mut state = self.initialize(seed);
        loop {
            if report_ticks.contains(&state.tick) {
                observer(&state);
            }
            if state.tick >= self.model.params.max_ticks {
                return Ok(state);
            }
            state = self.step(&state, seed)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{neighbor_offsets, Lattice};
    use crate::model::fixtures::toy_model;
    use crate::model::{InteractionRule, PopulationSpec, SimParams};

    fn place(spots: &[(u32, (u32, u32))]) -> WorldState {
        WorldState {
            tick: 0,
            agents: spots
                .iter()
                .enumerate()
                .map(|(i, &(pop, (x, y)))| Agent {
                    id: i as u32,
                    population: PopulationId(pop),
                    position: Position::new(x, y),
                    active: true,
                })
                .collect(),
        }
    }

    fn toy() -> Engine {
        Engine::new(toy_model(3, 3, 31)).unwrap()
    }

    #[test]
    fn potential_is_zero_without_links() {
        let e = toy();
        // walkers have only a walk entry
        let s = place(&[(1, (5, 5)), (0, (5, 6)), (1, (5, 7))]);
        let snap = e.snapshot(&s);
        for p in e.lattice().positions().take(100) {
            assert_eq!(e.potential_at(&snap, 0, p), 0);
        }
    }

    #[test]
    fn potential_counts_linked_targets_in_range() {
        let e = toy();
        let s = place(&[(0, (10, 10)), (1, (12, 10)), (1, (10, 12)), (1, (14, 10))]);
        let snap = e.snapshot(&s);
        // one walker at distance 1 from the candidate
        assert_eq!(e.potential_at(&snap, 0, Position::new(13, 10)), 2);
        assert_eq!(e.potential_at(&snap, 0, Position::new(11, 10)), 1);
        assert_eq!(e.potential_at(&snap, 0, Position::new(10, 10)), 2);
        assert_eq!(e.potential_at(&snap, 0, Position::new(20, 20)), 0);
        let one = place(&[(0, (0, 0)), (1, (3, 0))]);
        assert_eq!(e.potential_at(&e.snapshot(&one), 0, Position::new(2, 0)), 1);
    }

    #[test]
    fn zero_beta_and_flat_field_are_uniform() {
        let u = TransitionDistribution::uniform();
        assert_eq!(
            TransitionDistribution::from_field(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0], 0.0),
            u
        );
        assert_eq!(TransitionDistribution::from_field(&[2.0; 8], 5.0), u);
        assert!(u.probabilities().iter().all(|&p| p == 0.125));
    }

    #[test]
    fn single_east_target_biases_east() {
        let e = toy();
        let s = place(&[(0, (10, 10)), (1, (12, 10))]);
        let snap = e.snapshot(&s);
        let field = e.field_around(&snap, 0);
        // brute force: h at each neighbor of (10,10) for a walker at (12,10) with d = 2
        let l = Lattice::new(31).unwrap();
        let expected: Vec<f64> = neighbor_offsets()
            .iter()
            .map(|&(dx, dy)| {
                let p = l.shift(Position::new(10, 10), dx, dy);
                f64::from(u8::from(
                    l.toroidal_distance(p, Position::new(12, 10)) <= 2.0,
                ))
            })
            .collect();
        assert_eq!(field.to_vec(), expected);
        let p = e.transition_distribution(&snap, 0);
        let offs = neighbor_offsets();
        for (k, &(dx, _)) in offs.iter().enumerate() {
            for (j, &(dx2, _)) in offs.iter().enumerate() {
                if dx == 1 && dx2 == -1 {
                    assert!(p.probabilities()[k] > p.probabilities()[j]);
                }
            }
        }
    }

    #[test]
    fn large_beta_clamps_and_renormalizes() {
        let d =
            TransitionDistribution::from_field(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 0.0], 100.0);
        let p = d.probabilities();
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
        assert_eq!(d.sample_index(0.999_999), 7);
        assert_eq!(d.sample_index(0.0), 0);
    }

    #[test]
    fn select_prefers_priority_then_file_order() {
        let e = toy();
        let s = place(&[(0, (0, 0)), (1, (5, 5))]);
        let snap = e.snapshot(&s);
        assert_eq!(e.select_rule(&snap, 0).unwrap().rule, "cooc");
        assert_eq!(e.select_rule(&snap, 1).unwrap().rule, "walk");

        let mut m = toy_model(1, 1, 31);
        m.populations.push(PopulationSpec::new("others", 1));
        m.matrix
            .push(MatrixEntry::targetless("others", "walk", 0, 0));
        m.matrix.push(MatrixEntry::targeted(
            "particles",
            "cooc",
            1,
            1,
            "others",
            2.0,
        ));
        let e = Engine::new(m).unwrap();
        let s = place(&[(0, (0, 0)), (1, (5, 5)), (2, (9, 9))]);
        let sel = e.select_rule(&e.snapshot(&s), 0).unwrap();
        assert_eq!(sel.target.as_ref().unwrap().family, "walkers");
    }

    #[test]
    fn select_falls_back_when_target_family_too_small() {
        let mut m = toy_model(1, 1, 31);
        m.matrix[2].cardinality = 2;
        let e = Engine::new(m).unwrap();
        let s = e.initialize(3);
        assert_eq!(e.select_rule(&e.snapshot(&s), 0).unwrap().rule, "walk");
    }

    #[test]
    fn inert_population_is_a_fault() {
        let mut m = toy_model(1, 1, 31);
        m.matrix.remove(1);
        let e = Engine::new(m).unwrap();
        let s = e.initialize(3);
        assert!(
            matches!(e.step(&s, 1), Err(DynamicsError::NoApplicableRule { population }) if population == "walkers")
        );
    }

    #[test]
    fn invalid_model_is_rejected() {
        let mut m = toy_model(1, 1, 31);
        m.matrix
            .push(MatrixEntry::targetless("ghost", "walk", 0, 0));
        assert!(matches!(Engine::new(m), Err(DynamicsError::InvalidModel(d)) if d.len() == 1));
    }

    fn walk_only(n: u32, side: u32) -> Engine {
        Engine::new(Model {
            lattice: Lattice::new(side).unwrap(),
            populations: vec![PopulationSpec::new("w", n)],
            rules: vec![InteractionRule::walk()],
            matrix: vec![MatrixEntry::targetless("w", "walk", 0, 0)],
            params: SimParams {
                beta: 1.0,
                seed: 11,
                max_ticks: 1,
            },
        })
        .unwrap()
    }

    #[test]
    fn every_agent_moves_one_offset() {
        let e = walk_only(10_000, 31);
        let s0 = e.initialize(5);
        let s1 = e.step(&s0, 5).unwrap();
        assert_eq!(s1.tick, 1);
        for (a, b) in s0.agents.iter().zip(&s1.agents) {
            let d = e.lattice().displacement(a.position, b.position);
            assert!(neighbor_offsets().contains(&(d.0 as i32, d.1 as i32)));
        }
    }

    #[test]
    fn initialize_is_reproducible_and_seed_sensitive() {
        let e = walk_only(1000, 31);
        assert_eq!(e.initialize(9), e.initialize(9));
        assert_ne!(e.initialize(9), e.initialize(10));
        assert!(e
            .initialize(9)
            .agents
            .iter()
            .all(|a| a.position.x < 31 && a.position.y < 31 && a.active));
    }

    #[test]
    fn particle_freezes_next_to_walker() {
        let e = Engine::new(toy_model(1, 1, 31)).unwrap();
        let s = place(&[(0, (10, 10)), (1, (11, 10))]);
        let next = e.step(&s, 77).unwrap();
        let (p, w) = (next.agents[0], next.agents[1]);
        let landed_near = e.lattice().within(p.position, w.position, 2.0);
        assert_eq!(p.active, !landed_near);
        assert!(w.active);
        if !p.active {
            let later = e.step(&next, 77).unwrap();
            assert_eq!(later.agents[0].position, p.position);
            assert!(!later.agents[0].active);
        }
    }

    #[test]
    fn frozen_targets_attract_but_do_not_freeze() {
        let e = Engine::new(toy_model(1, 1, 31)).unwrap();
        let mut s = place(&[(0, (10, 10)), (1, (11, 10))]);
        s.agents[1].active = false;
        let snap = e.snapshot(&s);
        assert!(e.field_around(&snap, 0).iter().any(|&h| h > 0.0));
        let next = e.step(&s, 77).unwrap();
        assert!(next.agents[0].active);
        assert_eq!(next.agents[1].position, Position::new(11, 10));
    }

    #[test]
    fn step_is_deterministic_and_order_independent() {
        let e = Engine::new(toy_model(150, 150, 21)).unwrap();
        let s = e.initialize(4);
        let a = e.step(&s, 99).unwrap();
        assert_eq!(a, e.step(&s, 99).unwrap());
        let snap = e.snapshot(&s);
        let mut order: Vec<u32> = (0..s.agents.len() as u32).collect();
        order.reverse();
        order.rotate_left(37);
        let mut moves = vec![
            PlannedMove {
                to: Position::new(0, 0),
                entry: None
            };
            s.agents.len()
        ];
        for id in order {
            moves[id as usize] = e.plan_move(&snap, id, 99).unwrap();
        }
        assert_eq!(e.apply_moves(&s, &moves), a);
    }

    #[test]
    fn run_reports_requested_ticks() {
        let mut m = toy_model(20, 20, 31);
        m.params.max_ticks = 10;
        let e = Engine::new(m).unwrap();
        let mut seen = Vec::new();
        let last = e.run(&[0, 3, 10], |s| seen.push(s.tick)).unwrap();
        assert_eq!(seen, vec![0, 3, 10]);
        assert_eq!(last.tick, 10);
        let again = e.run(&[], |_| panic!("no observers")).unwrap();
        assert_eq!(again, last);
        let counts = last.population_counts(2);
        assert_eq!(counts, vec![20, 20]);
    }
}
