//! Conflict detection between timed paths and full solution validation.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, AgentId, Instance, Path, Role, VertexId};
use crate::time::{Interval, Time};

/// Which of the two actions performs the incoming move.
///
/// `i` always names the agent entering the vertex. For two entries the
/// lower agent id plays `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConflictKind {
    InIn,
    OutIn,
    WaitIn,
}

impl ConflictKind {
    pub fn name(self) -> &'static str {
        match self {
            ConflictKind::InIn => "in-in",
            ConflictKind::OutIn => "out-in",
            ConflictKind::WaitIn => "wait-in",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub vertex: VertexId,
    /// Infimum of the overlap of the two occupancies.
    pub time: Time,
    pub action_i: Action,
    pub action_j: Action,
    pub index_i: usize,
    pub index_j: usize,
}

impl Conflict {
    pub fn agent_i(&self) -> AgentId {
        self.action_i.agent
    }

    pub fn agent_j(&self) -> AgentId {
        self.action_j.agent
    }

    fn key(&self) -> (Time, AgentId, AgentId, VertexId, ConflictKind, usize, usize) {
        (self.time, self.agent_i(), self.agent_j(), self.vertex, self.kind, self.index_i, self.index_j)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("action does not touch vertex {0:?}")]
    NotAtVertex(VertexId),
    #[error("neither action enters vertex {0:?}")]
    NoIncomingMove(VertexId),
}

/// Classifies two overlapping actions at `v`. The flag is true when `a1`
/// plays the role of `i`.
pub fn classify(a1: &Action, a2: &Action, v: VertexId) -> Result<(ConflictKind, bool), ClassifyError> {
    let r1 = a1.role_at(v).ok_or(ClassifyError::NotAtVertex(v))?;
    let r2 = a2.role_at(v).ok_or(ClassifyError::NotAtVertex(v))?;
    classify_roles(r1, a1.agent, r2, a2.agent).ok_or(ClassifyError::NoIncomingMove(v))
}

fn classify_roles(r1: Role, ag1: AgentId, r2: Role, ag2: AgentId) -> Option<(ConflictKind, bool)> {
    match (r1, r2) {
        (Role::In, Role::In) => Some((ConflictKind::InIn, ag1 <= ag2)),
        (Role::In, Role::Out) => Some((ConflictKind::OutIn, true)),
        (Role::In, Role::Wait) => Some((ConflictKind::WaitIn, true)),
        (Role::Out, Role::In) => Some((ConflictKind::OutIn, false)),
        (Role::Wait, Role::In) => Some((ConflictKind::WaitIn, false)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    agent: AgentId,
    index: usize,
    interval: Interval,
    role: Role,
}

fn buckets<P: Borrow<Path>>(paths: &[P]) -> HashMap<VertexId, Vec<Entry>> {
    let mut map: HashMap<VertexId, Vec<Entry>> = HashMap::new();
    for p in paths {
        let p = p.borrow();
        for (index, a) in p.actions.iter().enumerate() {
            for (v, interval, role) in a.occupancy() {
                map.entry(v).or_default().push(Entry { agent: p.agent, index, interval, role });
            }
        }
    }
    for list in map.values_mut() {
        list.sort_by(|a, b| {
            (a.interval.lo(), !a.interval.lo_closed()).cmp(&(b.interval.lo(), !b.interval.lo_closed()))
        });
    }
    map
}

/// Calls `f` for every overlapping pair of entries of different agents.
fn for_each_overlap<P: Borrow<Path>>(paths: &[P], mut f: impl FnMut(VertexId, &Entry, &Entry, Interval)) {
    let mut by_vertex: Vec<_> = buckets(paths).into_iter().collect();
    by_vertex.sort_by_key(|(v, _)| *v);
    for (v, list) in &by_vertex {
        for (p, e) in list.iter().enumerate() {
            for g in &list[p + 1..] {
                if g.interval.lo() > e.interval.hi() {
                    break;
                }
                if g.agent == e.agent {
                    continue;
                }
                if let Some(common) = e.interval.intersect(&g.interval) {
                    f(*v, e, g, common);
                }
            }
        }
    }
}

/// Earliest conflict and the number of agent pairs in conflict.
///
/// Conflicts are ordered by the infimum of the overlap, then agent ids,
/// vertex, kind and action indices.
pub fn detect<P: Borrow<Path>>(paths: &[P]) -> (Option<Conflict>, usize) {
    let mut best: Option<Conflict> = None;
    let mut pairs = BTreeSet::new();
    for_each_overlap(paths, |v, e, g, common| {
        pairs.insert((e.agent.min(g.agent), e.agent.max(g.agent)));
        let Some((kind, e_is_i)) = classify_roles(e.role, e.agent, g.role, g.agent) else {
            return;
        };
        let (ei, ej) = if e_is_i { (e, g) } else { (g, e) };
        let c = Conflict {
            kind,
            vertex: v,
            time: common.lo(),
            action_i: paths[ei.agent.index()].borrow().actions[ei.index],
            action_j: paths[ej.agent.index()].borrow().actions[ej.index],
            index_i: ei.index,
            index_j: ej.index,
        };
        if best.as_ref().is_none_or(|b| c.key() < b.key()) {
            best = Some(c);
        }
    });
    (best, pairs.len())
}

/// Earliest conflict among the paths, or `None` when no two occupancies overlap.
///
/// Paths are indexed by agent id.
pub fn detect_earliest_conflict(paths: &[Path]) -> Option<Conflict> {
    detect(paths).0
}

/// Number of agent pairs whose paths overlap somewhere.
pub fn count_conflicting_pairs(paths: &[Path]) -> usize {
    detect(paths).1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Violation {
    AgentCount { expected: usize, found: usize },
    AgentMismatch { position: usize, found: AgentId },
    EmptyPath { agent: AgentId },
    WrongStart { agent: AgentId, expected: String, found: String },
    StartTime { agent: AgentId, found: Time },
    Discontinuity { agent: AgentId, index: usize },
    NotAnEdge { agent: AgentId, index: usize, from: String, to: String },
    MoveDuration { agent: AgentId, index: usize, expected: Time, found: Time },
    BadWait { agent: AgentId, index: usize },
    NoTerminalWait { agent: AgentId },
    WrongGoal { agent: AgentId, expected: String, found: String },
    Conflict {
        agent_a: AgentId,
        agent_b: AgentId,
        vertex: String,
        time: Time,
        action_a: usize,
        action_b: usize,
        roles: (Role, Role),
        kind: Option<ConflictKind>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn conflicts(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| matches!(v, Violation::Conflict { .. }))
    }
}

fn check_path(inst: &Instance, agent: AgentId, path: &Path, out: &mut Vec<Violation>) {
    let label = |v: VertexId| {
        if v.index() < inst.num_vertices() {
            inst.label(v).to_string()
        } else {
            format!("#{}", v.0)
        }
    };
    let Some(first) = path.actions.first() else {
        out.push(Violation::EmptyPath { agent });
        return;
    };
    if first.from != inst.start(agent) {
        out.push(Violation::WrongStart { agent, expected: label(inst.start(agent)), found: label(first.from) });
    }
    if first.start != Time::ZERO {
        out.push(Violation::StartTime { agent, found: first.start });
    }
    let n = path.actions.len();
    for (index, a) in path.actions.iter().enumerate() {
        if index > 0 {
            let prev = &path.actions[index - 1];
            if prev.to != a.from || prev.end != a.start {
                out.push(Violation::Discontinuity { agent, index });
            }
        }
        if a.is_move() {
            match inst.duration_between(agent, a.from, a.to) {
                None => out.push(Violation::NotAnEdge { agent, index, from: label(a.from), to: label(a.to) }),
                Some(d) => {
                    if a.end.checked_sub(a.start) != Some(d) {
                        out.push(Violation::MoveDuration {
                            agent,
                            index,
                            expected: d,
                            found: a.end.saturating_sub(a.start),
                        });
                    }
                }
            }
        } else {
            let infinite_too_early = !a.end.is_finite() && index + 1 != n;
            if a.from != a.to || a.end < a.start || infinite_too_early {
                out.push(Violation::BadWait { agent, index });
            }
        }
    }
    let last = path.actions[n - 1];
    if !(last.is_wait() && !last.end.is_finite()) {
        out.push(Violation::NoTerminalWait { agent });
    }
    if last.to != inst.goal(agent) {
        out.push(Violation::WrongGoal { agent, expected: label(inst.goal(agent)), found: label(last.to) });
    }
}

/// Checks every structural requirement and lists every overlapping pair.
pub fn validate(inst: &Instance, paths: &[Path]) -> ValidationReport {
    let mut violations = Vec::new();
    if paths.len() != inst.num_agents() {
        violations.push(Violation::AgentCount { expected: inst.num_agents(), found: paths.len() });
    }
    let mut structurally_sound = true;
    for (position, p) in paths.iter().enumerate() {
        if p.agent.index() != position {
            violations.push(Violation::AgentMismatch { position, found: p.agent });
            structurally_sound = false;
            continue;
        }
        if position < inst.num_agents() {
            check_path(inst, p.agent, p, &mut violations);
        }
    }
    if !structurally_sound {
        return ValidationReport { violations };
    }
    // Occupancy is only meaningful for well-formed actions.
    let well_formed = paths.iter().all(|p| {
        p.actions.iter().all(|a| a.end >= a.start && (a.is_wait() || a.end > a.start))
    });
    if well_formed {
        for_each_overlap(paths, |v, e, g, common| {
            let label = if v.index() < inst.num_vertices() { inst.label(v).to_string() } else { format!("#{}", v.0) };
            violations.push(Violation::Conflict {
                agent_a: e.agent,
                agent_b: g.agent,
                vertex: label,
                time: common.lo(),
                action_a: e.index,
                action_b: g.index,
                roles: (e.role, g.role),
                kind: classify_roles(e.role, e.agent, g.role, g.agent).map(|(k, _)| k),
            });
        });
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InstanceBuilder, PathBuilder};

    fn t(s: &str) -> Time {
        s.parse().unwrap()
    }

    fn mv(agent: u32, from: u32, to: u32, start: &str, end: &str) -> Action {
        let s = t(start);
        Action::travel(AgentId(agent), VertexId(from), VertexId(to), s, t(end) - s)
    }

    fn wt(agent: u32, at: u32, start: &str, end: &str) -> Action {
        Action::wait(AgentId(agent), VertexId(at), t(start), t(end))
    }

    #[test]
    fn classification() {
        let a = mv(0, 0, 2, "0", "1");
        let b = mv(1, 1, 2, "0.5", "1.5");
        assert_eq!(classify(&a, &b, VertexId(2)), Ok((ConflictKind::InIn, true)));
        assert_eq!(classify(&b, &a, VertexId(2)), Ok((ConflictKind::InIn, false)));
        let out = mv(1, 2, 3, "0", "1");
        assert_eq!(classify(&out, &a, VertexId(2)), Ok((ConflictKind::OutIn, false)));
        let w = wt(1, 2, "0", "inf");
        assert_eq!(classify(&a, &w, VertexId(2)), Ok((ConflictKind::WaitIn, true)));
        assert_eq!(classify(&w, &out, VertexId(2)), Err(ClassifyError::NoIncomingMove(VertexId(2))));
        assert_eq!(classify(&a, &w, VertexId(5)), Err(ClassifyError::NotAtVertex(VertexId(5))));
    }

    fn toy() -> (Instance, [VertexId; 5]) {
        let mut b = InstanceBuilder::new();
        let v: Vec<_> = ["A", "B", "C", "D", "E"].iter().map(|l| b.add_vertex(*l).unwrap()).collect();
        for (x, y) in [(2, 3), (3, 0), (3, 4), (4, 1)] {
            b.add_edge(v[x], v[y]).unwrap();
        }
        for (k, (s, g)) in [(4, 1), (3, 3), (2, 0)].into_iter().enumerate() {
            let a = b.add_agent(v[s], v[g]).unwrap();
            b.set_uniform_duration(a, Time::from_int(k as i64 + 1));
        }
        (b.build().unwrap(), [v[0], v[1], v[2], v[3], v[4]])
    }

    #[test]
    fn earliest_conflict_in_toy_root() {
        let (inst, [a, b, c, d, e]) = toy();
        let paths = vec![
            PathBuilder::new(AgentId(0), e).step(&inst, b).finish(),
            Path::stay(AgentId(1), d),
            PathBuilder::new(AgentId(2), c).step(&inst, d).step(&inst, a).finish(),
        ];
        let (first, pairs) = detect(&paths);
        let first = first.unwrap();
        assert_eq!(first.kind, ConflictKind::WaitIn);
        assert_eq!(first.vertex, d);
        assert_eq!(first.agent_i(), AgentId(2));
        assert_eq!(first.agent_j(), AgentId(1));
        assert_eq!(first.time, Time::ZERO);
        assert_eq!(pairs, 1);
    }

    #[test]
    fn swap_reports_both_endpoints() {
        let mut b = InstanceBuilder::new();
        let u = b.add_vertex("u").unwrap();
        let w = b.add_vertex("w").unwrap();
        b.add_edge(u, w).unwrap();
        let a0 = b.add_agent(u, w).unwrap();
        let a1 = b.add_agent(w, u).unwrap();
        b.set_uniform_duration(a0, t("1"));
        b.set_uniform_duration(a1, t("1"));
        let inst = b.build().unwrap();
        let paths = vec![
            PathBuilder::new(a0, u).step(&inst, w).finish(),
            PathBuilder::new(a1, w).step(&inst, u).finish(),
        ];
        let report = validate(&inst, &paths);
        let at: BTreeSet<_> = report
            .conflicts()
            .map(|c| match c {
                Violation::Conflict { vertex, kind, .. } => (vertex.clone(), *kind),
                _ => unreachable!(),
            })
            .collect();
        assert!(at.contains(&("u".to_string(), Some(ConflictKind::OutIn))));
        assert!(at.contains(&("w".to_string(), Some(ConflictKind::OutIn))));
        assert!(!report.is_valid());
    }

    #[test]
    fn structural_violations() {
        let (inst, [a, b, _c, d, e]) = toy();
        let good = vec![
            PathBuilder::new(AgentId(0), e).step(&inst, b).finish(),
            Path::stay(AgentId(1), d),
            Path::new(AgentId(2), vec![mv(2, 2, 3, "0", "2"), wt(2, 0, "2", "inf")]),
        ];
        let report = validate(&inst, &good);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::MoveDuration { .. })));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Discontinuity { .. })));
        let mut bad_goal = good.clone();
        bad_goal[2] = PathBuilder::new(AgentId(2), VertexId(2)).finish();
        assert!(validate(&inst, &bad_goal)
            .violations
            .iter()
            .any(|v| matches!(v, Violation::WrongGoal { .. })));
        let mut no_edge = good;
        no_edge[0] = Path::new(AgentId(0), vec![mv(0, 4, 0, "0", "1"), wt(0, 0, "1", "inf")]);
        assert!(validate(&inst, &no_edge)
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NotAnEdge { .. })));
        let _ = a;
    }

    #[test]
    fn touching_occupancies_do_not_conflict() {
        // j leaves v over [0, 1); i enters v over (1, 2].
        let paths = vec![
            Path::new(AgentId(0), vec![wt(0, 0, "0", "1"), mv(0, 0, 1, "1", "2"), wt(0, 1, "2", "inf")]),
            Path::new(AgentId(1), vec![mv(1, 1, 2, "0", "1"), wt(1, 2, "1", "inf")]),
        ];
        assert_eq!(detect_earliest_conflict(&paths), None);
        assert_eq!(count_conflicting_pairs(&paths), 0);
    }

    #[test]
    fn tie_breaks_are_deterministic() {
        // Both agents enter v=2 over the same interval; agent 0 plays i.
        let paths = vec![
            Path::new(AgentId(0), vec![mv(0, 0, 2, "0", "1"), wt(0, 2, "1", "inf")]),
            Path::new(AgentId(1), vec![mv(1, 1, 2, "0", "1"), wt(1, 2, "1", "inf")]),
        ];
        let c = detect_earliest_conflict(&paths).unwrap();
        assert_eq!((c.kind, c.agent_i(), c.time), (ConflictKind::InIn, AgentId(0), Time::ZERO));
        let mut rev = paths.clone();
        rev.reverse();
        for (k, p) in rev.iter_mut().enumerate() {
            p.agent = AgentId(k as u32);
            for a in &mut p.actions {
                a.agent = AgentId(k as u32);
            }
        }
        let c2 = detect_earliest_conflict(&rev).unwrap();
        assert_eq!(c2.agent_i(), AgentId(0));
        assert_eq!(c2.action_i.from, VertexId(1));
    }
}
