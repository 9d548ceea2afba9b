//! The topology-expansion environment.
//!
//! Per query entity the agent keeps a *core* (quadruples already
//! traversed, empty at reset) and a *periphery* (quadruples incident to
//! the core's entities, not in the core, within temporal-kNN proximity
//! of the query time). Actions are relation types drawn from the union
//! of both peripheries; one action expands both topologies at once. The
//! terminal reward is 1 when the two cores share an entity.

use serde::{Deserialize, Serialize};

use crate::store::{
    incident_candidates, temporal_knn_filter, EntityId, QuadId, Quadruple, RelationId, TemporalKG,
    TimeId, TIME_NONE,
};
use crate::{Error, Result};

/// A predicate-prediction query `(subject, ?, object, time)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub subject: EntityId,
    pub object: EntityId,
    pub since: TimeId,
    pub until: TimeId,
    /// Ground-truth relation, when known (training / evaluation).
    pub r_true: Option<RelationId>,
}

impl Query {
    pub fn point(subject: EntityId, object: EntityId, time: TimeId) -> Self {
        Self {
            subject,
            object,
            since: time,
            until: time,
            r_true: None,
        }
    }

    pub fn from_quad(q: &Quadruple) -> Self {
        Self {
            subject: q.subject,
            object: q.object,
            since: q.since,
            until: q.until,
            r_true: Some(q.relation),
        }
    }

    /// Scalar anchor for temporal-kNN distances.
    pub fn anchor(&self) -> TimeId {
        if self.since != TIME_NONE {
            self.since
        } else {
            self.until
        }
    }
}

/// Core + periphery around one query entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyState {
    pub origin: EntityId,
    /// Traversed quads, ascending quad id.
    pub core: Vec<QuadId>,
    /// Expandable quads in (time distance, quad id) order.
    pub periphery: Vec<QuadId>,
    /// Entities of the core plus the origin, ascending. This is the
    /// frontier that periphery candidates must touch.
    pub core_entities: Vec<EntityId>,
}

impl TopologyState {
    fn new(kg: &TemporalKG, origin: EntityId, anchor: TimeId, tknn: usize) -> Self {
        let core_entities = vec![origin];
        let candidates = incident_candidates(kg, &core_entities, &[]);
        let periphery = temporal_knn_filter(kg, &candidates, anchor, tknn);
        Self {
            origin,
            core: Vec::new(),
            periphery,
            core_entities,
        }
    }

    /// Merged core ∪ periphery, ascending quad id — the state set fed to
    /// the fingerprint network.
    pub fn state_quads(&self) -> Vec<QuadId> {
        let mut all: Vec<QuadId> = self.core.iter().chain(&self.periphery).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Move periphery quads matching `action` into the core and rebuild
    /// the periphery. Returns the number of quads absorbed.
    fn expand(&mut self, kg: &TemporalKG, action: RelationId, anchor: TimeId, tknn: usize) -> usize {
        let matched: Vec<QuadId> = self
            .periphery
            .iter()
            .copied()
            .filter(|&q| kg.quad(q).relation == action)
            .collect();
        if matched.is_empty() {
            return 0;
        }
        for &q in &matched {
            let quad = kg.quad(q);
            insert_sorted(&mut self.core_entities, quad.subject);
            insert_sorted(&mut self.core_entities, quad.object);
            insert_sorted(&mut self.core, q);
        }
        let candidates = incident_candidates(kg, &self.core_entities, &self.core);
        self.periphery = temporal_knn_filter(kg, &candidates, anchor, tknn);
        matched.len()
    }
}

fn insert_sorted<T: Ord + Copy>(v: &mut Vec<T>, x: T) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

/// Entities appearing as subject or object of the given quads, ascending.
pub fn ent(kg: &TemporalKG, quads: &[QuadId]) -> Vec<EntityId> {
    let mut out = Vec::with_capacity(quads.len() * 2);
    for &q in quads {
        let quad = kg.quad(q);
        out.push(quad.subject);
        out.push(quad.object);
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn sorted_intersects(a: &[EntityId], b: &[EntityId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Binary vector over relation types marking currently traversable ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMask {
    pub bits: Vec<bool>,
}

impl ActionMask {
    pub fn zeros(n_relations: usize) -> Self {
        Self {
            bits: vec![false; n_relations],
        }
    }

    pub fn is_set(&self, r: RelationId) -> bool {
        self.bits[r as usize]
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn set_ids(&self) -> Vec<RelationId> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i as RelationId)
            .collect()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }
}

/// Full episode state for one query.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub query: Query,
    pub subject_topo: TopologyState,
    pub object_topo: TopologyState,
    pub step: u32,
    pub max_steps: u32,
    pub tknn: usize,
    pub action_history: Vec<RelationId>,
    pub done: bool,
    pub reward: f64,
}

impl EpisodeState {
    pub fn topologies(&self) -> [&TopologyState; 2] {
        [&self.subject_topo, &self.object_topo]
    }
}

/// Start an episode: empty cores, peripheries from the temporal-kNN
/// filtered incident facts of each query entity. A query with both
/// peripheries empty is stranded: done immediately with reward 0.
pub fn reset(kg: &TemporalKG, query: Query, tknn: usize, max_steps: u32) -> EpisodeState {
    let anchor = query.anchor();
    let subject_topo = TopologyState::new(kg, query.subject, anchor, tknn);
    let object_topo = TopologyState::new(kg, query.object, anchor, tknn);
    let stranded = subject_topo.periphery.is_empty() && object_topo.periphery.is_empty();
    EpisodeState {
        query,
        subject_topo,
        object_topo,
        step: 0,
        max_steps,
        tknn,
        action_history: Vec::new(),
        done: stranded,
        reward: 0.0,
    }
}

/// Relation types traversable in the current state: the union of both
/// peripheries' relation types.
pub fn legal_actions(kg: &TemporalKG, state: &EpisodeState) -> Result<ActionMask> {
    if state.done {
        return Err(Error::EpisodeDone);
    }
    let mut mask = ActionMask::zeros(kg.relations.len());
    for topo in state.topologies() {
        for &q in &topo.periphery {
            mask.bits[kg.quad(q).relation as usize] = true;
        }
    }
    Ok(mask)
}

/// Outcome of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

/// Apply one action: each topology independently absorbs its periphery
/// quads of the chosen relation type (possibly none) and rebuilds its
/// periphery. Terminal reward 1 when the cores' entity sets overlap.
pub fn step(kg: &TemporalKG, state: &mut EpisodeState, action: RelationId) -> Result<StepOutcome> {
    if state.done {
        return Err(Error::EpisodeDone);
    }
    let legal = state.topologies().iter().any(|topo| {
        topo.periphery
            .iter()
            .any(|&q| kg.quad(q).relation == action)
    });
    if !legal {
        return Err(Error::MaskedAction(action));
    }

    let anchor = state.query.anchor();
    let tknn = state.tknn;
    state.subject_topo.expand(kg, action, anchor, tknn);
    state.object_topo.expand(kg, action, anchor, tknn);

    let overlap = sorted_intersects(
        &ent(kg, &state.subject_topo.core),
        &ent(kg, &state.object_topo.core),
    );
    state.step += 1;
    state.action_history.push(action);
    state.reward = if overlap { 1.0 } else { 0.0 };
    let exhausted =
        state.subject_topo.periphery.is_empty() && state.object_topo.periphery.is_empty();
    state.done = overlap || state.step >= state.max_steps || exhausted;
    Ok(StepOutcome {
        reward: state.reward,
        done: state.done,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{TimeMode, Vocab};

    /// Build a point-mode graph from (subject, relation, object, time)
    /// tuples over small integer universes.
    pub(crate) fn graph(n_entities: u32, n_relations: u32, n_times: u32, facts: &[(u32, u32, u32, u32)]) -> TemporalKG {
        let mut entities = Vocab::default();
        for e in 0..n_entities {
            entities.intern(&format!("e{e}"));
        }
        let mut relations = Vocab::default();
        for r in 0..n_relations {
            relations.intern(&format!("r{r}"));
        }
        let mut times = Vocab::default();
        for t in 0..n_times {
            times.intern(&format!("t{t:04}"));
        }
        let quads = facts
            .iter()
            .map(|&(s, r, o, t)| Quadruple::point(s, r, o, t))
            .collect();
        TemporalKG::new(entities, relations, times, TimeMode::Point, quads)
    }

    #[test]
    fn reset_single_edge() {
        let kg = graph(2, 2, 4, &[(0, 1, 1, 2)]);
        let state = reset(&kg, Query::point(0, 1, 2), 5, 5);
        assert_eq!(state.subject_topo.periphery, vec![0]);
        assert_eq!(state.object_topo.periphery, vec![0]);
        assert!(!state.done);
        let mask = legal_actions(&kg, &state).unwrap();
        assert_eq!(mask.set_ids(), vec![1]);
    }

    #[test]
    fn reset_stranded_query() {
        let kg = graph(4, 1, 2, &[(0, 0, 1, 0)]);
        let state = reset(&kg, Query::point(2, 3, 0), 5, 5);
        assert!(state.done);
        assert_eq!(state.reward, 0.0);
        assert!(matches!(
            legal_actions(&kg, &state),
            Err(Error::EpisodeDone)
        ));
    }

    #[test]
    fn direct_edge_rewards_at_step_one() {
        let kg = graph(2, 1, 1, &[(0, 0, 1, 0)]);
        let mut state = reset(&kg, Query::point(0, 1, 0), 5, 5);
        let out = step(&kg, &mut state, 0).unwrap();
        assert_eq!(out.reward, 1.0);
        assert!(out.done);
        assert_eq!(state.subject_topo.core, vec![0]);
        assert_eq!(state.object_topo.core, vec![0]);
    }

    #[test]
    fn chain_connects_in_two_steps() {
        // u -r0- a -r1- v, all at time 0
        let kg = graph(3, 2, 1, &[(0, 0, 1, 0), (1, 1, 2, 0)]);
        let mut state = reset(&kg, Query::point(0, 2, 0), 5, 5);
        let out = step(&kg, &mut state, 0).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(!out.done);
        let out = step(&kg, &mut state, 1).unwrap();
        assert_eq!(out.reward, 1.0);
        // subject core walked both edges; object core took the r1 edge
        assert_eq!(state.subject_topo.core, vec![0, 1]);
        assert_eq!(state.object_topo.core, vec![1]);
        assert_eq!(state.action_history, vec![0, 1]);
    }

    #[test]
    fn one_sided_action_leaves_other_core_unchanged() {
        // r0 incident only to the subject side
        let kg = graph(4, 2, 1, &[(0, 0, 2, 0), (1, 1, 3, 0)]);
        let mut state = reset(&kg, Query::point(0, 1, 0), 5, 5);
        step(&kg, &mut state, 0).unwrap();
        assert_eq!(state.subject_topo.core, vec![0]);
        assert!(state.object_topo.core.is_empty());
    }

    #[test]
    fn masked_action_is_a_contract_violation() {
        let kg = graph(2, 3, 1, &[(0, 0, 1, 0)]);
        let mut state = reset(&kg, Query::point(0, 1, 0), 5, 5);
        assert!(matches!(
            step(&kg, &mut state, 2),
            Err(Error::MaskedAction(2))
        ));
    }

    #[test]
    fn episode_caps_at_max_steps() {
        // two disjoint stars so the cores never meet
        let kg = graph(
            8,
            2,
            1,
            &[
                (0, 0, 2, 0),
                (2, 1, 3, 0),
                (3, 0, 4, 0),
                (1, 1, 5, 0),
                (5, 0, 6, 0),
                (6, 1, 7, 0),
            ],
        );
        let mut state = reset(&kg, Query::point(0, 1, 0), 10, 2);
        let mask = legal_actions(&kg, &state).unwrap();
        let a = mask.set_ids()[0];
        step(&kg, &mut state, a).unwrap();
        if !state.done {
            let mask = legal_actions(&kg, &state).unwrap();
            let out = step(&kg, &mut state, mask.set_ids()[0]).unwrap();
            assert!(out.done);
        }
        assert!(state.step <= 2);
        assert_eq!(state.action_history.len(), state.step as usize);
    }

    #[test]
    fn knn_cap_limits_step_one_actions() {
        // Four relations incident to the origin at increasing time
        // distance; tknn=2 keeps the two nearest, so two actions remain.
        let kg = graph(
            6,
            4,
            10,
            &[
                (0, 0, 1, 5),
                (0, 1, 2, 6),
                (0, 2, 3, 9),
                (0, 3, 4, 0),
                (5, 0, 1, 5),
            ],
        );
        let state = reset(&kg, Query::point(0, 5, 5), 2, 5);
        let mask = legal_actions(&kg, &state).unwrap();
        assert_eq!(mask.count_set(), 2);
        assert_eq!(state.subject_topo.periphery.len(), 2);
    }

    #[test]
    fn ent_of_empty_is_empty() {
        let kg = graph(2, 1, 1, &[(0, 0, 1, 0)]);
        assert!(ent(&kg, &[]).is_empty());
        assert_eq!(ent(&kg, &[0]), vec![0, 1]);
    }

    #[test]
    fn core_grows_monotonically_and_stays_disjoint() {
        let kg = graph(
            5,
            3,
            4,
            &[
                (0, 0, 1, 0),
                (1, 1, 2, 1),
                (2, 2, 3, 2),
                (3, 0, 4, 3),
                (0, 1, 4, 2),
            ],
        );
        let mut state = reset(&kg, Query::point(0, 4, 1), 3, 5);
        let mut prev_cores = [state.subject_topo.core.clone(), state.object_topo.core.clone()];
        while !state.done {
            let mask = legal_actions(&kg, &state).unwrap();
            let a = mask.set_ids()[0];
            step(&kg, &mut state, a).unwrap();
            for (topo, prev) in state.topologies().iter().zip(&prev_cores) {
                assert!(prev.iter().all(|q| topo.core.contains(q)), "core shrank");
                assert!(
                    topo.periphery.iter().all(|q| !topo.core.contains(q)),
                    "core and periphery overlap"
                );
            }
            prev_cores = [state.subject_topo.core.clone(), state.object_topo.core.clone()];
        }
    }
}
