//! Exhaustive reference solvers on a discrete time lattice.
//!
//! When every duration is a multiple of a common step, optimal schedules
//! exist whose events all fall on multiples of that step, so searching the
//! lattice is exact.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Duration;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::constraint::Constraint;
use crate::lowlevel::heuristic;
use crate::model::{Action, AgentId, EdgeId, Instance, Path, VertexId};
use crate::time::{Rational, Time};

/// Largest common divisor of the given positive rationals.
pub fn time_step(values: impl IntoIterator<Item = Rational>) -> Option<Rational> {
    values.into_iter().filter(|r| *r > Rational::from_integer(0)).reduce(|a, b| {
        let d = a.denom().lcm(b.denom());
        let n = (a.numer() * (d / a.denom())).gcd(&(b.numer() * (d / b.denom())));
        Rational::new(n, d)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleOutcome {
    Solved,
    /// No start-goal connection for some agent.
    Unsolvable,
    /// Every schedule within the horizon was explored.
    UnsolvableWithinHorizon,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub outcome: OracleOutcome,
    pub paths: Option<Vec<Path>>,
    pub soc: Option<Time>,
    pub expanded: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleLimits {
    /// Latest lattice step considered; derived from the instance when unset.
    pub horizon_steps: Option<u32>,
    pub time_limit: Option<Duration>,
}

const NONE16: u64 = 0xFFFF;

/// One agent packed as `pos | target << 16 | remaining << 32 | goal_since << 48`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct AgentSlot {
    pos: u32,
    target: u32,
    remaining: u32,
    goal_since: Option<u32>,
}

impl AgentSlot {
    fn pack(self) -> u64 {
        self.pos as u64
            | (self.target as u64) << 16
            | (self.remaining as u64) << 32
            | (self.goal_since.map_or(NONE16, |g| g as u64)) << 48
    }

    fn unpack(x: u64) -> Self {
        let gs = (x >> 48) & 0xFFFF;
        AgentSlot {
            pos: (x & 0xFFFF) as u32,
            target: ((x >> 16) & 0xFFFF) as u32,
            remaining: ((x >> 32) & 0xFFFF) as u32,
            goal_since: (gs != NONE16).then_some(gs as u32),
        }
    }
}

struct Record {
    step: u32,
    agents: Box<[u64]>,
    parent: Option<u32>,
}

#[derive(PartialEq, Eq)]
struct Open {
    f: u64,
    g: u64,
    seq: u64,
    record: u32,
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.cmp(&self.f).then(self.g.cmp(&other.g)).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Optimal sum of costs by A* over joint states on the duration lattice.
///
/// Each agent is either idle at a vertex or part-way along an edge; two
/// agents conflict when they hold a common vertex during a lattice cell.
/// Intended for desk-scale instances only.
pub fn solve_joint(inst: &Instance, limits: OracleLimits) -> OracleResult {
    let started = Instant::now();
    let done = |outcome, paths: Option<Vec<Path>>, expanded| {
        let soc = paths.as_ref().map(|p: &Vec<Path>| p.iter().fold(Time::ZERO, |a, p| a + p.cost()));
        OracleResult { outcome, paths, soc, expanded, wall: started.elapsed() }
    };
    if !inst.unreachable_agents().is_empty() {
        return done(OracleOutcome::Unsolvable, None, 0);
    }
    assert!(inst.num_vertices() < NONE16 as usize, "oracle supports fewer than 65535 vertices");
    let n = inst.num_agents();
    let durations: Vec<Rational> = inst
        .agents()
        .flat_map(|a| (0..inst.num_edges()).map(move |e| (a, e)))
        .map(|(a, e)| inst.duration(a, EdgeId(e as u32)).value())
        .collect();
    let step = time_step(durations).unwrap_or(Rational::from_integer(1));
    let steps_of = |t: Time| -> u32 {
        let r = t.value() / step;
        debug_assert!(r.is_integer());
        r.to_integer() as u32
    };
    let dist: Vec<Vec<u32>> = inst
        .agents()
        .map(|a| {
            let h = heuristic(inst, a);
            inst.vertices().map(|v| if h.get(v).is_finite() { steps_of(h.get(v)) } else { u32::MAX }).collect()
        })
        .collect();
    let edge_steps: Vec<Vec<u32>> =
        inst.agents().map(|a| (0..inst.num_edges()).map(|e| steps_of(inst.duration(a, EdgeId(e as u32)))).collect()).collect();
    let longest = edge_steps.iter().flatten().copied().max().unwrap_or(1);
    let total: u32 = inst.agents().map(|a| dist[a.index()][inst.start(a).index()]).sum();
    let horizon = limits
        .horizon_steps
        .unwrap_or_else(|| (4 * (total + n as u32 * longest) + inst.num_vertices() as u32 * longest).min(NONE16 as u32 - 1));
    let goals: Vec<u32> = inst.agents().map(|a| inst.goal(a).0).collect();

    let h_of = |slots: &[AgentSlot]| -> u64 {
        slots
            .iter()
            .enumerate()
            .map(|(a, s)| {
                if s.remaining > 0 {
                    (s.remaining + dist[a][s.target as usize]) as u64
                } else {
                    dist[a][s.pos as usize] as u64
                }
            })
            .sum()
    };
    let g_of = |step: u32, slots: &[AgentSlot]| -> u64 {
        slots.iter().map(|s| s.goal_since.unwrap_or(step) as u64).sum()
    };

    let root: Vec<AgentSlot> = inst
        .agents()
        .map(|a| {
            let s = inst.start(a).0;
            AgentSlot { pos: s, target: s, remaining: 0, goal_since: (s == goals[a.index()]).then_some(0) }
        })
        .collect();
    let mut records = vec![Record { step: 0, agents: root.iter().map(|s| s.pack()).collect(), parent: None }];
    let mut seen: HashSet<(u32, Box<[u64]>)> = HashSet::new();
    seen.insert((0, records[0].agents.clone()));
    let mut open = BinaryHeap::new();
    open.push(Open { f: h_of(&root), g: 0, seq: 0, record: 0 });
    let mut seq = 1u64;
    let mut expanded = 0u64;

    while let Some(Open { record, .. }) = open.pop() {
        if limits.time_limit.is_some_and(|l| started.elapsed() >= l) {
            return done(OracleOutcome::Timeout, None, expanded);
        }
        expanded += 1;
        let step_now = records[record as usize].step;
        let slots: Vec<AgentSlot> = records[record as usize].agents.iter().map(|&x| AgentSlot::unpack(x)).collect();
        if slots.iter().enumerate().all(|(a, s)| s.remaining == 0 && s.pos == goals[a]) {
            let paths = reconstruct(inst, &records, record, step);
            return done(OracleOutcome::Solved, Some(paths), expanded);
        }
        if step_now >= horizon {
            continue;
        }
        let next = step_now + 1;
        let mut successors = Vec::new();
        let mut chosen: Vec<AgentSlot> = Vec::with_capacity(n);
        let mut held: Vec<u32> = Vec::with_capacity(2 * n);
        enumerate(inst, &edge_steps, &goals, &slots, next, 0, &mut chosen, &mut held, &mut successors);
        for succ in successors {
            let packed: Box<[u64]> = succ.iter().map(|s| s.pack()).collect();
            if !seen.insert((next, packed.clone())) {
                continue;
            }
            let g = g_of(next, &succ);
            let f = g + h_of(&succ);
            records.push(Record { step: next, agents: packed, parent: Some(record) });
            open.push(Open { f, g, seq, record: (records.len() - 1) as u32 });
            seq += 1;
        }
    }
    done(OracleOutcome::UnsolvableWithinHorizon, None, expanded)
}

/// Depth-first enumeration of conflict-free joint decisions for one cell.
#[allow(clippy::too_many_arguments)]
fn enumerate(
    inst: &Instance,
    edge_steps: &[Vec<u32>],
    goals: &[u32],
    slots: &[AgentSlot],
    next: u32,
    a: usize,
    chosen: &mut Vec<AgentSlot>,
    held: &mut Vec<u32>,
    out: &mut Vec<Vec<AgentSlot>>,
) {
    if a == slots.len() {
        out.push(chosen.clone());
        return;
    }
    let s = slots[a];
    let mut try_option = |hold: &[u32], result: AgentSlot, chosen: &mut Vec<AgentSlot>, held: &mut Vec<u32>| {
        if hold.iter().any(|v| held.contains(v)) {
            return;
        }
        let before = held.len();
        held.extend_from_slice(hold);
        chosen.push(result);
        enumerate(inst, edge_steps, goals, slots, next, a + 1, chosen, held, out);
        chosen.pop();
        held.truncate(before);
    };
    let arrive = |target: u32| AgentSlot {
        pos: target,
        target,
        remaining: 0,
        goal_since: (target == goals[a]).then_some(next),
    };
    if s.remaining > 0 {
        let result = if s.remaining == 1 { arrive(s.target) } else { AgentSlot { remaining: s.remaining - 1, ..s } };
        try_option(&[s.pos, s.target], result, chosen, held);
        return;
    }
    // Stay idle for one more cell.
    try_option(&[s.pos], s, chosen, held);
    for &(w, e) in inst.neighbors(VertexId(s.pos)) {
        let m = edge_steps[a][e.index()];
        let result = if m == 1 {
            arrive(w.0)
        } else {
            AgentSlot { pos: s.pos, target: w.0, remaining: m - 1, goal_since: None }
        };
        try_option(&[s.pos, w.0], result, chosen, held);
    }
}

fn reconstruct(inst: &Instance, records: &[Record], last: u32, step: Rational) -> Vec<Path> {
    let mut chain = vec![last];
    while let Some(p) = records[*chain.last().unwrap() as usize].parent {
        chain.push(p);
    }
    chain.reverse();
    let at = |k: u32| Time::from(step * Rational::from_integer(k as i64));
    let mut paths = Vec::with_capacity(inst.num_agents());
    for agent in inst.agents() {
        let a = agent.index();
        let mut actions = Vec::new();
        let mut idle_since = 0u32;
        for pair in chain.windows(2) {
            let prev = AgentSlot::unpack(records[pair[0] as usize].agents[a]);
            let cur = AgentSlot::unpack(records[pair[1] as usize].agents[a]);
            let k = records[pair[0] as usize].step;
            let started_move = prev.remaining == 0 && (cur.remaining > 0 || cur.pos != prev.pos);
            if started_move {
                let to = VertexId(cur.target);
                let from = VertexId(prev.pos);
                if k > idle_since {
                    actions.push(Action::wait(agent, from, at(idle_since), at(k)));
                }
                let tau = inst.duration_between(agent, from, to).expect("lattice moves follow edges");
                actions.push(Action::travel(agent, from, to, at(k), tau));
            }
            if cur.remaining == 0 && (prev.remaining > 0 || started_move) {
                idle_since = records[pair[1] as usize].step;
            }
        }
        let end = AgentSlot::unpack(records[last as usize].agents[a]).pos;
        actions.push(Action::wait(agent, VertexId(end), at(idle_since), Time::Infinity));
        paths.push(Path::new(agent, actions));
    }
    paths
}

/// Optimal single-agent cost under `constraints` by breadth-first search
/// over `(vertex, k * step)` for `k <= horizon_steps`.
///
/// Every action, including instantaneous waits at each arrival and the
/// final infinite wait, is checked directly against the constraints.
pub fn single_agent_lattice(
    inst: &Instance,
    agent: AgentId,
    constraints: &[Constraint],
    step: Rational,
    horizon_steps: u32,
) -> Option<Time> {
    let own: Vec<&Constraint> = constraints.iter().filter(|c| c.agent() == agent).collect();
    let ok = |a: &Action| !own.iter().any(|c| c.forbids(a));
    let at = |k: u32| Time::from(step * Rational::from_integer(k as i64));
    let goal = inst.goal(agent);
    let nv = inst.num_vertices();
    let edge_steps: Vec<Option<u32>> = (0..inst.num_edges())
        .map(|e| {
            let r = inst.duration(agent, EdgeId(e as u32)).value() / step;
            r.is_integer().then(|| r.to_integer() as u32)
        })
        .collect();
    assert!(edge_steps.iter().all(|s| s.is_some()), "step must divide every duration");
    // reached[k][v]: the agent can be at v at time k*step, present legally.
    let mut reached = vec![vec![false; nv]; horizon_steps as usize + 1];
    let start = inst.start(agent);
    if ok(&Action::wait(agent, start, Time::ZERO, Time::ZERO)) {
        reached[0][start.index()] = true;
    }
    for k in 0..=horizon_steps {
        for v in inst.vertices() {
            if !reached[k as usize][v.index()] {
                continue;
            }
            let t = at(k);
            if v == goal && ok(&Action::wait(agent, v, t, Time::Infinity)) {
                return Some(t);
            }
            if k < horizon_steps && ok(&Action::wait(agent, v, t, at(k + 1))) {
                reached[k as usize + 1][v.index()] = true;
            }
            for &(w, e) in inst.neighbors(v) {
                let m = edge_steps[e.index()].unwrap();
                let arrive = k + m;
                if arrive > horizon_steps {
                    continue;
                }
                let mv = Action::travel(agent, v, w, t, inst.duration(agent, e));
                if ok(&mv) && ok(&Action::wait(agent, w, mv.end, mv.end)) {
                    reached[arrive as usize][w.index()] = true;
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict::validate;
    use crate::model::InstanceBuilder;

    fn t(s: &str) -> Time {
        s.parse().unwrap()
    }

    #[test]
    fn step_is_common_divisor() {
        let r = |n, d| Rational::new(n, d);
        assert_eq!(time_step([r(1, 2), r(1, 3)]), Some(r(1, 6)));
        assert_eq!(time_step([r(3, 1), r(2, 1)]), Some(r(1, 1)));
        assert_eq!(time_step([r(3, 4), r(3, 2)]), Some(r(3, 4)));
    }

    #[test]
    fn toy_optimum() {
        let mut b = InstanceBuilder::new();
        let v: Vec<_> = ["A", "B", "C", "D", "E"].iter().map(|l| b.add_vertex(*l).unwrap()).collect();
        for (x, y) in [(2, 3), (3, 0), (3, 4), (4, 1)] {
            b.add_edge(v[x], v[y]).unwrap();
        }
        for (k, (s, g)) in [(4, 1), (3, 3), (2, 0)].into_iter().enumerate() {
            let a = b.add_agent(v[s], v[g]).unwrap();
            b.set_uniform_duration(a, Time::from_int(k as i64 + 1));
        }
        let inst = b.build().unwrap();
        let r = solve_joint(&inst, OracleLimits::default());
        assert_eq!(r.outcome, OracleOutcome::Solved);
        assert_eq!(r.soc, Some(t("21")));
        assert!(validate(&inst, r.paths.as_ref().unwrap()).is_valid());
    }

    #[test]
    fn corridor_swap_exhausts_the_horizon() {
        let mut b = InstanceBuilder::new();
        let u = b.add_vertex("u").unwrap();
        let w = b.add_vertex("w").unwrap();
        b.add_edge(u, w).unwrap();
        let a0 = b.add_agent(u, w).unwrap();
        let a1 = b.add_agent(w, u).unwrap();
        b.set_uniform_duration(a0, t("1"));
        b.set_uniform_duration(a1, t("1"));
        let inst = b.build().unwrap();
        let r = solve_joint(&inst, OracleLimits { horizon_steps: Some(20), time_limit: None });
        assert_eq!(r.outcome, OracleOutcome::UnsolvableWithinHorizon);
    }

    #[test]
    fn lattice_single_agent() {
        let mut b = InstanceBuilder::new();
        let [x, y, z] = ["x", "y", "z"].map(|l| b.add_vertex(l).unwrap());
        b.add_edge(x, y).unwrap();
        b.add_edge(y, z).unwrap();
        let a = b.add_agent(x, z).unwrap();
        b.set_uniform_duration(a, t("1"));
        let inst = b.build().unwrap();
        let half = Rational::new(1, 2);
        assert_eq!(single_agent_lattice(&inst, a, &[], half, 40), Some(t("2")));
        let cs = [Constraint::Occupancy { agent: a, vertex: y, at: t("1.5") }];
        // y is held over (d, d + 2) by a pass-through departing x at d.
        assert_eq!(single_agent_lattice(&inst, a, &cs, half, 40), Some(t("3.5")));
    }
}
