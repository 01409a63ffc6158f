//! Constraints, the two branching strategies and the disjunctiveness probe.

use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflict::{Conflict, ConflictKind};
use crate::model::{Action, AgentId, EdgeId, Instance, InstanceBuilder, ModelError, Path, Task, VertexId, VertexTiming};
use crate::time::{Interval, Rational, Time};

/// A restriction on one agent's actions.
///
/// `Motion` endpoints set to `None` match any vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    /// No move matching the endpoints may start within `range`.
    Motion { agent: AgentId, from: Option<VertexId>, to: Option<VertexId>, range: Interval },
    /// No wait at `vertex`, including an instantaneous one, may intersect `range`.
    Wait { agent: AgentId, vertex: VertexId, range: Interval },
    /// No action may hold `vertex` at instant `at`.
    Occupancy { agent: AgentId, vertex: VertexId, at: Time },
}

impl Constraint {
    pub fn agent(&self) -> AgentId {
        match *self {
            Constraint::Motion { agent, .. } | Constraint::Wait { agent, .. } | Constraint::Occupancy { agent, .. } => agent,
        }
    }

    /// Whether `action` is ruled out. Agents are not compared.
    pub fn forbids(&self, action: &Action) -> bool {
        match *self {
            Constraint::Motion { from, to, range, .. } => {
                action.is_move()
                    && from.is_none_or(|f| f == action.from)
                    && to.is_none_or(|t| t == action.to)
                    && range.contains(action.start)
            }
            Constraint::Wait { vertex, range, .. } => {
                action.is_wait()
                    && action.from == vertex
                    && Interval::closed(action.start, action.end).is_ok_and(|w| w.overlaps(&range))
            }
            Constraint::Occupancy { vertex, at, .. } => action.occupancy_at(vertex).is_some_and(|i| i.contains(at)),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = |v: Option<VertexId>| v.map_or("*".to_string(), |v| v.0.to_string());
        match self {
            Constraint::Motion { agent, from, to, range } => {
                write!(f, "motion(agent {agent}, {}->{}, {range})", end(*from), end(*to))
            }
            Constraint::Wait { agent, vertex, range } => write!(f, "wait(agent {agent}, {}, {range})", vertex.0),
            Constraint::Occupancy { agent, vertex, at } => write!(f, "occupancy(agent {agent}, {}, {at})", vertex.0),
        }
    }
}

/// First action of `path` (with instantaneous waits made explicit) that one
/// of `constraints` forbids.
pub fn first_violation(path: &Path, constraints: &[Constraint]) -> Option<(Action, Constraint)> {
    for a in path.with_explicit_waits() {
        if let Some(c) = constraints.iter().find(|c| c.agent() == path.agent && c.forbids(&a)) {
            return Some((a, *c));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Csa,
    Cma,
}

/// Constraints added to one agent in one child node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub agent: AgentId,
    pub constraints: Vec<Constraint>,
    pub strategy: Strategy,
}

impl Branch {
    pub fn new(agent: AgentId, constraints: Vec<Constraint>, strategy: Strategy) -> Branch {
        Branch { agent, constraints, strategy }
    }

    pub fn forbids(&self, action: &Action) -> bool {
        self.constraints.iter().any(|c| c.forbids(action))
    }
}

fn motion(agent: AgentId, from: Option<VertexId>, to: Option<VertexId>, lo: Time, hi: Time) -> Option<Constraint> {
    Interval::closed_open(lo, hi).ok().map(|range| Constraint::Motion { agent, from, to, range })
}

fn wait(agent: AgentId, vertex: VertexId, lo: Time, hi: Time) -> Option<Constraint> {
    Interval::closed_open(lo, hi).ok().map(|range| Constraint::Wait { agent, vertex, range })
}

/// Single-action branching: each child forbids a minimal slice around the
/// conflicting action.
pub fn gen_csa(conflict: &Conflict) -> (Branch, Branch) {
    let (ai, aj) = (conflict.action_i, conflict.action_j);
    let (i, j, v) = (ai.agent, aj.agent, conflict.vertex);
    let oc = |t: Time| {
        (
            Branch::new(i, vec![Constraint::Occupancy { agent: i, vertex: v, at: t }], Strategy::Csa),
            Branch::new(j, vec![Constraint::Occupancy { agent: j, vertex: v, at: t }], Strategy::Csa),
        )
    };
    match conflict.kind {
        ConflictKind::InIn | ConflictKind::OutIn => {
            let ci = motion(i, Some(ai.from), Some(ai.to), ai.start, aj.end);
            let cj = motion(j, Some(aj.from), Some(aj.to), aj.start, ai.end);
            match (ci, cj) {
                (Some(ci), Some(cj)) => (Branch::new(i, vec![ci], Strategy::Csa), Branch::new(j, vec![cj], Strategy::Csa)),
                // j leaves exactly when i arrives: the overlap is one instant.
                _ => oc(ai.end),
            }
        }
        ConflictKind::WaitIn => oc(ai.end.min(aj.end)),
    }
}

fn cma_candidate(conflict: &Conflict, timing: &VertexTiming) -> Option<(Branch, Branch)> {
    let (ai, aj) = (conflict.action_i, conflict.action_j);
    let (i, j, v) = (ai.agent, aj.agent, conflict.vertex);
    let in_i = timing.tau_in(i, v)?;
    let out_i = timing.tau_out(i, v)?;
    let in_j = timing.tau_in(j, v)?;
    let out_j = timing.tau_out(j, v)?;
    let (t1i, t1j, t2j) = (ai.start, aj.start, aj.end);
    let (ci, cj) = match conflict.kind {
        ConflictKind::InIn => (
            vec![motion(i, None, Some(v), t1i, t1j + in_j + out_j)?],
            vec![motion(j, None, Some(v), t1j, t1i + in_i + out_i)?],
        ),
        ConflictKind::OutIn => {
            let hi = t1i + in_i + out_i + in_j;
            (
                vec![motion(i, None, Some(v), t1i, t1j + out_j)?],
                vec![wait(j, v, t1j, hi)?, motion(j, Some(v), None, t1j, hi)?],
            )
        }
        ConflictKind::WaitIn => {
            let r = t1i + in_i + out_i + in_j;
            if t2j < r {
                (vec![motion(i, None, Some(v), t1i, t2j + out_j)?], vec![wait(j, v, t2j, r)?])
            } else {
                (
                    vec![motion(i, None, Some(v), t1i, t1i + in_i + out_i + out_j)?],
                    vec![wait(j, v, t1i + in_i + out_i, r)?],
                )
            }
        }
    };
    Some((Branch::new(i, ci, Strategy::Cma), Branch::new(j, cj, Strategy::Cma)))
}

/// Multi-action branching: each child forbids a whole window of entries or
/// stays at the conflict vertex.
///
/// When either window comes out empty or misses the agent's own conflicting
/// action, both children fall back to single-action constraints. Mixing one
/// multi-action child with one single-action child can lose solutions.
pub fn gen_cma(conflict: &Conflict, timing: &VertexTiming) -> (Branch, Branch) {
    match cma_candidate(conflict, timing) {
        Some((bi, bj)) if forbids_own_action(&bi, conflict) && forbids_own_action(&bj, conflict) => (bi, bj),
        _ => gen_csa(conflict),
    }
}

/// Whether the branch rules out its own agent's side of the conflict.
pub fn forbids_own_action(branch: &Branch, conflict: &Conflict) -> bool {
    let own = if branch.agent == conflict.agent_i() { conflict.action_i } else { conflict.action_j };
    branch.forbids(&own)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubdivideError {
    #[error("edge {0} is not an integer multiple of agent {1}'s shortest edge")]
    NotMultiple(u32, AgentId),
    #[error("edge {0} has different multiples for different agents")]
    AgentDependentMultiple(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("agent {0} stops inside a subdivided edge")]
    StopsInsideEdge(AgentId),
}

/// An instance whose long edges were cut into unit pieces.
#[derive(Debug, Clone)]
pub struct Subdivision {
    pub instance: Instance,
    original_vertices: usize,
}

impl Subdivision {
    pub fn is_original(&self, v: VertexId) -> bool {
        v.index() < self.original_vertices
    }

    /// Merges runs of moves through inserted vertices back into single moves.
    pub fn lift(&self, original: &Instance, paths: &[Path]) -> Result<Vec<Path>, SubdivideError> {
        let mut out = Vec::with_capacity(paths.len());
        for p in paths {
            let mut actions = Vec::new();
            let mut pending: Option<(VertexId, Time)> = None;
            for a in &p.actions {
                if a.is_wait() {
                    if !self.is_original(a.from) {
                        return Err(SubdivideError::StopsInsideEdge(p.agent));
                    }
                    actions.push(*a);
                    continue;
                }
                let (origin, start) = pending.unwrap_or((a.from, a.start));
                if self.is_original(a.to) {
                    if origin == a.to || original.edge_between(origin, a.to).is_none() {
                        return Err(SubdivideError::StopsInsideEdge(p.agent));
                    }
                    actions.push(Action { from: origin, start, ..*a });
                    pending = None;
                } else {
                    pending = Some((origin, start));
                }
            }
            if pending.is_some() {
                return Err(SubdivideError::StopsInsideEdge(p.agent));
            }
            out.push(Path::new(p.agent, actions));
        }
        Ok(out)
    }
}

/// Replaces every edge whose traversal takes `k` times an agent's shortest
/// edge by a chain of `k` unit edges.
///
/// `k` must be an integer and the same for all agents.
pub fn subdivide_edges(inst: &Instance) -> Result<Subdivision, SubdivideError> {
    let bases: Vec<Time> = inst
        .agents()
        .map(|a| (0..inst.num_edges()).map(|e| inst.duration(a, EdgeId(e as u32))).min().unwrap_or(Time::from_int(1)))
        .collect();
    let mut multiples = Vec::with_capacity(inst.num_edges());
    for e in 0..inst.num_edges() as u32 {
        let mut k_edge: Option<i64> = None;
        for a in inst.agents() {
            let ratio = inst.duration(a, EdgeId(e)).value() / bases[a.index()].value();
            if !ratio.is_integer() {
                return Err(SubdivideError::NotMultiple(e, a));
            }
            let k = ratio.to_integer();
            if k_edge.is_some_and(|prev| prev != k) {
                return Err(SubdivideError::AgentDependentMultiple(e));
            }
            k_edge = Some(k);
        }
        multiples.push(k_edge.unwrap_or(1));
    }

    let mut b = InstanceBuilder::new();
    for v in inst.vertices() {
        b.add_vertex(inst.label(v))?;
    }
    for (e, &(u, w)) in inst.edges().iter().enumerate() {
        let k = multiples[e];
        let mut prev = u;
        for step in 1..k {
            let mid = b.add_vertex(format!("{}~{}#{step}", inst.label(u), inst.label(w)))?;
            b.add_edge(prev, mid)?;
            prev = mid;
        }
        b.add_edge(prev, w)?;
    }
    for a in inst.agents() {
        let Task { start, goal } = inst.task(a);
        let id = b.add_agent(start, goal)?;
        b.set_uniform_duration(id, bases[a.index()]);
    }
    Ok(Subdivision { instance: b.build()?, original_vertices: inst.num_vertices() })
}

/// Which vertices one agent can come from and go to around the probed vertex.
#[derive(Debug, Clone)]
pub struct ProbeAgent {
    pub agent: AgentId,
    pub neighbors: Vec<(VertexId, Time)>,
}

/// Exhaustive check of mutual disjunctiveness on a time grid.
///
/// Every single stay at `vertex` is enumerated: arriving from a neighbour or
/// starting there, waiting for any grid duration, then leaving to a
/// neighbour or staying forever. Two branches are mutually disjunctive when
/// every stay violating the first overlaps every stay violating the second.
#[derive(Debug, Clone)]
pub struct MdProbe {
    pub vertex: VertexId,
    pub i: ProbeAgent,
    pub j: ProbeAgent,
}

/// A stay that violates a branch, kept for reporting counterexamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeStay {
    pub from: Option<VertexId>,
    pub entered: Time,
    pub departure: Time,
    pub to: Option<VertexId>,
    pub occupancy: Interval,
}

fn rational_gcd(a: Rational, b: Rational) -> Rational {
    let n = (a.numer() * b.denom()).gcd(&(b.numer() * a.denom()));
    Rational::new(n, a.denom() * b.denom())
}

impl MdProbe {
    pub fn around(inst: &Instance, vertex: VertexId, i: AgentId, j: AgentId) -> MdProbe {
        let side = |a: AgentId| ProbeAgent {
            agent: a,
            neighbors: inst.neighbors(vertex).iter().map(|&(w, e)| (w, inst.duration(a, e))).collect(),
        };
        MdProbe { vertex, i: side(i), j: side(j) }
    }

    fn grid(&self, bi: &Branch, bj: &Branch) -> (Time, Time) {
        let mut values: Vec<Time> = Vec::new();
        for c in bi.constraints.iter().chain(&bj.constraints) {
            match *c {
                Constraint::Motion { range, .. } | Constraint::Wait { range, .. } => {
                    values.push(range.lo());
                    values.push(range.hi());
                }
                Constraint::Occupancy { at, .. } => values.push(at),
            }
        }
        let taus: Vec<Time> = self.i.neighbors.iter().chain(&self.j.neighbors).map(|&(_, d)| d).collect();
        let finite: Vec<Rational> = values.iter().chain(&taus).filter_map(|t| t.finite()).filter(|r| *r != Rational::from_integer(0)).collect();
        let g = finite.iter().copied().reduce(rational_gcd).unwrap_or(Rational::from_integer(1));
        let step = Time::from(g / Rational::from_integer(2));
        let latest = values.iter().filter(|t| t.is_finite()).max().copied().unwrap_or(Time::ZERO);
        let longest = taus.iter().max().copied().unwrap_or(Time::ZERO);
        (step, latest + longest + longest + step + step)
    }

    /// Calls `f` on every stay of `side` that violates `branch`.
    fn violating(&self, side: &ProbeAgent, branch: &Branch, step: Time, horizon: Time, f: &mut dyn FnMut(ProbeStay)) {
        let v = self.vertex;
        let a = side.agent;
        let mut grid = Vec::new();
        let mut t = Time::ZERO;
        while t <= horizon {
            grid.push(t);
            t = t + step;
        }
        let mut entries: Vec<Option<(VertexId, Time)>> = vec![None];
        entries.extend(side.neighbors.iter().copied().map(Some));
        let mut exits: Vec<Option<(VertexId, Time)>> = vec![None];
        exits.extend(side.neighbors.iter().copied().map(Some));
        for entry in &entries {
            let starts: &[Time] = if entry.is_some() { &grid } else { &grid[..1] };
            for &x in starts {
                let (in_move, arrival) = match entry {
                    Some((u, d)) => (Some(Action::travel(a, *u, v, x, *d)), x + *d),
                    None => (None, Time::ZERO),
                };
                let in_bad = in_move.is_some_and(|m| branch.forbids(&m));
                for exit in &exits {
                    let departures: Vec<Time> = match exit {
                        None => vec![Time::Infinity],
                        Some(_) => grid.iter().map(|&w| arrival + w).filter(|&d| d <= horizon + horizon).collect(),
                    };
                    for dep in departures {
                        let stay = Action::wait(a, v, arrival, dep);
                        let out_move = exit.map(|(w, d)| Action::travel(a, v, w, dep, d));
                        let bad = in_bad || branch.forbids(&stay) || out_move.is_some_and(|m| branch.forbids(&m));
                        if !bad {
                            continue;
                        }
                        let left = out_move.map_or(Time::Infinity, |m| m.end);
                        let occupancy = match entry {
                            None => Interval::new(Time::ZERO, left, true, false),
                            Some(_) => Interval::open(x, left),
                        }
                        .expect("stay has positive length");
                        f(ProbeStay {
                            from: entry.map(|(u, _)| u),
                            entered: x,
                            departure: dep,
                            to: exit.map(|(w, _)| w),
                            occupancy,
                        });
                    }
                }
            }
        }
    }

    /// A pair of violating stays that do not overlap, if one exists.
    pub fn counterexample(&self, bi: &Branch, bj: &Branch) -> Option<(ProbeStay, ProbeStay)> {
        let (step, horizon) = self.grid(bi, bj);
        let mut earliest_end: Option<ProbeStay> = None;
        let mut latest_start: Option<ProbeStay> = None;
        self.violating(&self.j, bj, step, horizon, &mut |s| {
            if earliest_end.is_none_or(|e| s.occupancy.hi() < e.occupancy.hi()) {
                earliest_end = Some(s);
            }
            let later = |e: ProbeStay| {
                (s.occupancy.lo(), !s.occupancy.lo_closed()) > (e.occupancy.lo(), !e.occupancy.lo_closed())
            };
            if latest_start.is_none_or(later) {
                latest_start = Some(s);
            }
        });
        let (ee, ls) = (earliest_end?, latest_start?);
        let mut found = None;
        self.violating(&self.i, bi, step, horizon, &mut |s| {
            if found.is_some() {
                return;
            }
            for other in [ee, ls] {
                if !s.occupancy.overlaps(&other.occupancy) {
                    found = Some((s, other));
                    return;
                }
            }
        });
        found
    }

    pub fn is_mutually_disjunctive(&self, bi: &Branch, bj: &Branch) -> bool {
        self.counterexample(bi, bj).is_none()
    }
}
