//! Single-agent planning over safe intervals.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::Serialize;

use crate::constraint::Constraint;
use crate::model::{Action, AgentId, Instance, Path, VertexId, VertexTiming};
use crate::time::{Interval, IntervalSet, Time};

/// Exact constraint-free travel time from every vertex to one agent's goal.
#[derive(Debug, Clone)]
pub struct Heuristic {
    pub goal: VertexId,
    dist: Vec<Time>,
}

impl Heuristic {
    pub fn get(&self, v: VertexId) -> Time {
        self.dist[v.index()]
    }
}

pub fn heuristic(inst: &Instance, agent: AgentId) -> Heuristic {
    let goal = inst.goal(agent);
    let mut dist = vec![Time::Infinity; inst.num_vertices()];
    let mut heap = BinaryHeap::new();
    dist[goal.index()] = Time::ZERO;
    heap.push(std::cmp::Reverse((Time::ZERO, goal)));
    while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
        if d > dist[u.index()] {
            continue;
        }
        for &(w, e) in inst.neighbors(u) {
            let nd = d + inst.duration(agent, e);
            if nd < dist[w.index()] {
                dist[w.index()] = nd;
                heap.push(std::cmp::Reverse((nd, w)));
            }
        }
    }
    Heuristic { goal, dist }
}

/// Instance data shared by every low-level call.
#[derive(Debug, Clone)]
pub struct PlanContext<'a> {
    pub inst: &'a Instance,
    pub timing: VertexTiming,
    pub heuristics: Vec<Heuristic>,
}

impl<'a> PlanContext<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        PlanContext {
            inst,
            timing: VertexTiming::new(inst),
            heuristics: inst.agents().map(|a| heuristic(inst, a)).collect(),
        }
    }
}

/// Where one agent may stay, and when it may not set off along an edge.
#[derive(Debug, Clone)]
pub struct SafeIntervalTable {
    agent: AgentId,
    safe: HashMap<VertexId, Vec<Interval>>,
    entry: HashMap<VertexId, Vec<Interval>>,
    exit: HashMap<VertexId, Vec<Interval>>,
    edge: HashMap<(VertexId, VertexId), Vec<Interval>>,
    occupied: HashMap<VertexId, Vec<Time>>,
}

const UNCONSTRAINED: [Interval; 1] = [Interval::ALL];

impl SafeIntervalTable {
    /// Builds the table from the constraints that concern `agent`.
    pub fn build(inst: &Instance, timing: &VertexTiming, agent: AgentId, constraints: &[Constraint]) -> Self {
        let mut forbidden: HashMap<VertexId, IntervalSet> = HashMap::new();
        let mut table = SafeIntervalTable {
            agent,
            safe: HashMap::new(),
            entry: HashMap::new(),
            exit: HashMap::new(),
            edge: HashMap::new(),
            occupied: HashMap::new(),
        };
        for c in constraints.iter().filter(|c| c.agent() == agent) {
            match *c {
                Constraint::Wait { vertex, range, .. } => forbidden.entry(vertex).or_default().insert(range),
                Constraint::Occupancy { vertex, at, .. } => {
                    // Being at `vertex` within this window means holding it at `at`.
                    let before = timing.tau_out(agent, vertex).unwrap_or(Time::ZERO);
                    let after = timing.tau_in(agent, vertex).unwrap_or(Time::ZERO);
                    let window = if before == Time::ZERO && after == Time::ZERO {
                        Interval::point(at)
                    } else {
                        match at.checked_sub(before) {
                            Some(lo) => Interval::new(lo, at + after, before == Time::ZERO, after == Time::ZERO)
                                .expect("non-empty window"),
                            None => Interval::new(Time::ZERO, at + after, true, after == Time::ZERO).expect("non-empty window"),
                        }
                    };
                    forbidden.entry(vertex).or_default().insert(window);
                    table.occupied.entry(vertex).or_default().push(at);
                }
                Constraint::Motion { from, to, range, .. } => match (from, to) {
                    (Some(u), Some(w)) => table.edge.entry((u, w)).or_default().push(range),
                    (None, Some(w)) => table.entry.entry(w).or_default().push(range),
                    (Some(u), None) => table.exit.entry(u).or_default().push(range),
                    (None, None) => {
                        for v in inst.vertices() {
                            table.exit.entry(v).or_default().push(range);
                        }
                    }
                },
            }
        }
        for (v, set) in forbidden {
            table.safe.insert(v, set.complement().parts().to_vec());
        }
        table
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    /// Maximal intervals during which the agent may be at `v`.
    pub fn safe_intervals(&self, v: VertexId) -> &[Interval] {
        self.safe.get(&v).map_or(&UNCONSTRAINED[..], |s| s.as_slice())
    }

    /// Departure times at which the move `u -> w` taking `tau` is ruled out.
    pub fn blocked_departures(&self, u: VertexId, w: VertexId, tau: Time) -> Vec<Interval> {
        let mut out = Vec::new();
        for key in [u, w] {
            let windows = if key == u { self.exit.get(&u) } else { self.entry.get(&w) };
            out.extend(windows.into_iter().flatten().copied());
        }
        out.extend(self.edge.get(&(u, w)).into_iter().flatten().copied());
        for &t in self.occupied.get(&u).into_iter().flatten() {
            // Leaving at d holds u over [d, d + tau).
            let w = match t.checked_sub(tau) {
                Some(lo) => Interval::new(lo, t, false, true),
                None => Interval::closed(Time::ZERO, t),
            };
            out.extend(w.ok());
        }
        for &t in self.occupied.get(&w).into_iter().flatten() {
            // Leaving at d holds w over (d, d + tau].
            let w = Interval::closed_open(t.saturating_sub(tau), t);
            out.extend(w.ok());
        }
        out
    }

    /// Departure times from `u` towards `w` that keep the agent inside
    /// `stay` from `arrival` on and land it inside `target`.
    pub fn feasible_departures(
        &self,
        u: VertexId,
        w: VertexId,
        tau: Time,
        arrival: Time,
        stay: &Interval,
        target: &Interval,
    ) -> Vec<Interval> {
        let Ok(window) = Interval::new(arrival, stay.hi(), true, stay.hi_closed()) else {
            return Vec::new();
        };
        let Some(landing) = target.shift_earlier(tau) else {
            return Vec::new();
        };
        let Some(base) = window.intersect(&landing) else {
            return Vec::new();
        };
        let mut set = IntervalSet::from_parts(vec![base]);
        for b in self.blocked_departures(u, w, tau) {
            set.remove(&b);
        }
        set.parts().to_vec()
    }

    pub fn dump(&self, inst: &Instance) -> SafeIntervalDump {
        let render = |v: &[Interval]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>();
        let mut vertices = BTreeMap::new();
        for (v, s) in &self.safe {
            vertices.insert(inst.label(*v).to_string(), render(s));
        }
        let mut entry = BTreeMap::new();
        for (v, s) in &self.entry {
            entry.insert(inst.label(*v).to_string(), render(s));
        }
        let mut exit = BTreeMap::new();
        for (v, s) in &self.exit {
            exit.insert(inst.label(*v).to_string(), render(s));
        }
        let mut edges = BTreeMap::new();
        for ((u, w), s) in &self.edge {
            edges.insert(format!("{}->{}", inst.label(*u), inst.label(*w)), render(s));
        }
        let mut occupied = BTreeMap::new();
        for (v, ts) in &self.occupied {
            occupied.insert(inst.label(*v).to_string(), ts.iter().map(|t| t.to_string()).collect());
        }
        SafeIntervalDump { agent: self.agent, safe_intervals: vertices, entry_windows: entry, exit_windows: exit, edge_windows: edges, occupancy_points: occupied }
    }
}

/// Readable form of a [`SafeIntervalTable`]; vertices not listed are
/// unconstrained.
#[derive(Debug, Clone, Serialize)]
pub struct SafeIntervalDump {
    pub agent: AgentId,
    pub safe_intervals: BTreeMap<String, Vec<String>>,
    pub entry_windows: BTreeMap<String, Vec<String>>,
    pub exit_windows: BTreeMap<String, Vec<String>>,
    pub edge_windows: BTreeMap<String, Vec<String>>,
    pub occupancy_points: BTreeMap<String, Vec<String>>,
}

pub fn build_safe_intervals(inst: &Instance, agent: AgentId, constraints: &[Constraint]) -> SafeIntervalTable {
    SafeIntervalTable::build(inst, &VertexTiming::new(inst), agent, constraints)
}

/// Earliest member of the first part that has one.
fn earliest_at_or_after(parts: &[Interval], from: Time) -> Option<Time> {
    parts.iter().find_map(|p| {
        let lo = Interval::new(from, Time::Infinity, true, false).ok()?;
        p.intersect(&lo)?.earliest()
    })
}

#[derive(Debug, Clone, Copy)]
struct Node {
    vertex: VertexId,
    interval: usize,
    arrival: Time,
    entered: Option<Time>,
    soft: u32,
    wait_soft: u32,
    parent: Option<usize>,
    terminal: bool,
}

#[derive(Debug, PartialEq, Eq)]
struct OpenEntry {
    f: Time,
    soft: u32,
    g: Time,
    vertex: VertexId,
    seq: u64,
    node: usize,
}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the greatest: smallest f, fewest soft conflicts,
        // deepest, lowest vertex id, oldest.
        other
            .f
            .cmp(&self.f)
            .then(other.soft.cmp(&self.soft))
            .then(self.g.cmp(&other.g))
            .then(other.vertex.cmp(&self.vertex))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A low-level result with search statistics.
#[derive(Debug, Clone)]
pub struct Plan {
    pub path: Path,
    pub soft_conflicts: u32,
    pub expansions: u64,
}

struct Search<'t> {
    nodes: Vec<Node>,
    open: BinaryHeap<OpenEntry>,
    seq: u64,
    heuristic: &'t Heuristic,
}

impl<'t> Search<'t> {
    fn push(&mut self, node: Node) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(node);
        let h = if node.terminal { Time::ZERO } else { self.heuristic.get(node.vertex) };
        self.open.push(OpenEntry { f: node.arrival + h, soft: node.soft, g: node.arrival, vertex: node.vertex, seq: self.seq, node: idx });
        self.seq += 1;
        idx
    }

    fn path(&self, inst: &Instance, agent: AgentId, last: usize) -> Path {
        let mut chain = vec![last];
        while let Some(p) = self.nodes[*chain.last().unwrap()].parent {
            chain.push(p);
        }
        chain.reverse();
        let mut actions = Vec::new();
        let mut now = Time::ZERO;
        for pair in chain.windows(2) {
            let (a, b) = (self.nodes[pair[0]], self.nodes[pair[1]]);
            if a.vertex == b.vertex {
                continue;
            }
            let tau = inst.duration_between(agent, a.vertex, b.vertex).expect("moves follow edges");
            let depart = b.arrival - tau;
            if depart > now {
                actions.push(Action::wait(agent, a.vertex, now, depart));
            }
            actions.push(Action::travel(agent, a.vertex, b.vertex, depart, tau));
            now = b.arrival;
        }
        let end = self.nodes[last].vertex;
        actions.push(Action::wait(agent, end, now, Time::Infinity));
        Path::new(agent, actions)
    }
}

fn start_node(table: &SafeIntervalTable, start: VertexId) -> Option<Node> {
    let interval = table.safe_intervals(start).iter().position(|i| i.contains(Time::ZERO))?;
    Some(Node {
        vertex: start,
        interval,
        arrival: Time::ZERO,
        entered: None,
        soft: 0,
        wait_soft: 0,
        parent: None,
        terminal: false,
    })
}

/// Minimum-cost path for `agent` that satisfies `constraints`.
pub fn sipp_plan(inst: &Instance, agent: AgentId, constraints: &[Constraint]) -> Option<Path> {
    let ctx = PlanContext::new(inst);
    sipp_plan_with(&ctx, agent, constraints).map(|p| p.path)
}

pub fn sipp_plan_with(ctx: &PlanContext<'_>, agent: AgentId, constraints: &[Constraint]) -> Option<Plan> {
    let inst = ctx.inst;
    let table = SafeIntervalTable::build(inst, &ctx.timing, agent, constraints);
    let heuristic = &ctx.heuristics[agent.index()];
    let goal = inst.goal(agent);
    if !heuristic.get(inst.start(agent)).is_finite() {
        return None;
    }
    let mut search = Search { nodes: Vec::new(), open: BinaryHeap::new(), seq: 0, heuristic };
    let mut best: HashMap<(VertexId, usize), Time> = HashMap::new();
    let root = start_node(&table, inst.start(agent))?;
    best.insert((root.vertex, root.interval), Time::ZERO);
    search.push(root);
    let mut expansions = 0;
    while let Some(entry) = search.open.pop() {
        let node = search.nodes[entry.node];
        if best.get(&(node.vertex, node.interval)).is_some_and(|&b| b < node.arrival) {
            continue;
        }
        expansions += 1;
        let stay = table.safe_intervals(node.vertex)[node.interval];
        if node.vertex == goal && !stay.hi().is_finite() {
            return Some(Plan { path: search.path(inst, agent, entry.node), soft_conflicts: 0, expansions });
        }
        for &(w, e) in inst.neighbors(node.vertex) {
            let tau = inst.duration(agent, e);
            if !heuristic.get(w).is_finite() {
                continue;
            }
            for (k, target) in table.safe_intervals(w).iter().enumerate() {
                if target.hi() < node.arrival + tau {
                    continue;
                }
                if stay.hi() + tau < target.lo() {
                    break;
                }
                let parts = table.feasible_departures(node.vertex, w, tau, node.arrival, &stay, target);
                let Some(d) = earliest_at_or_after(&parts, Time::ZERO) else {
                    continue;
                };
                let arrival = d + tau;
                if best.get(&(w, k)).is_some_and(|&b| b <= arrival) {
                    continue;
                }
                best.insert((w, k), arrival);
                search.push(Node {
                    vertex: w,
                    interval: k,
                    arrival,
                    entered: Some(d),
                    soft: 0,
                    wait_soft: 0,
                    parent: Some(entry.node),
                    terminal: false,
                });
            }
        }
    }
    None
}

/// Maximal occupancy intervals of the other agents, per vertex.
#[derive(Debug, Clone, Default)]
pub struct SoftTable {
    per_vertex: HashMap<VertexId, Vec<Interval>>,
}

impl SoftTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Occupancies of every path except `exclude`'s.
    pub fn from_paths(paths: &[Path], exclude: AgentId) -> Self {
        let mut table = SoftTable::new();
        for p in paths.iter().filter(|p| p.agent != exclude) {
            for (v, i) in p.merged_occupancy() {
                table.add(v, i);
            }
        }
        table
    }

    pub fn add(&mut self, v: VertexId, occupancy: Interval) {
        self.per_vertex.entry(v).or_default().push(occupancy);
    }

    /// Number of foreign occupancies at `v` that overlap `window`.
    pub fn count(&self, v: VertexId, window: &Interval) -> u32 {
        self.per_vertex.get(&v).map_or(0, |list| list.iter().filter(|i| i.overlaps(window)).count() as u32)
    }

    fn ends(&self, v: VertexId) -> impl Iterator<Item = Time> + '_ {
        self.per_vertex.get(&v).into_iter().flatten().map(|i| i.hi()).filter(|t| t.is_finite())
    }

    pub fn is_empty(&self) -> bool {
        self.per_vertex.values().all(|l| l.is_empty())
    }
}

/// A search state of the soft-conflict-aware planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WcState {
    pub vertex: VertexId,
    pub arrival: Time,
    /// Index of the safe interval that contains `arrival`.
    pub interval: usize,
    /// Start of the move that brought the agent here; `None` at the start.
    pub entered: Option<Time>,
    /// Soft conflicts of the stays completed so far.
    pub soft_total: u32,
    /// Soft conflicts this stay would incur if it lasted to the end of its
    /// safe interval.
    pub wait_soft: u32,
}

fn stay_window(entered: Option<Time>, until: &Interval) -> Interval {
    let end = until.hi();
    match entered {
        None => Interval::new(Time::ZERO, end, true, false),
        Some(e) => Interval::open(e, end),
    }
    .unwrap_or_else(|_| Interval::point(entered.unwrap_or(Time::ZERO)))
}

/// Successors of `state`: for each edge and target safe interval, the
/// earliest arrival plus later arrivals that strictly reduce the soft count.
pub fn wc_successors(
    inst: &Instance,
    table: &SafeIntervalTable,
    soft: &SoftTable,
    state: &WcState,
) -> Vec<WcState> {
    let agent = table.agent();
    let u = state.vertex;
    let stay = table.safe_intervals(u)[state.interval];
    let mut out = Vec::new();
    for &(w, e) in inst.neighbors(u) {
        let tau = inst.duration(agent, e);
        for (k, target) in table.safe_intervals(w).iter().enumerate() {
            if target.hi() < state.arrival + tau {
                continue;
            }
            if stay.hi() + tau < target.lo() {
                break;
            }
            let parts = table.feasible_departures(u, w, tau, state.arrival, &stay, target);
            let Some(first) = earliest_at_or_after(&parts, Time::ZERO) else {
                continue;
            };
            let mut candidates = vec![first];
            candidates.extend(soft.ends(w).filter(|&t| t > first).filter_map(|t| earliest_at_or_after(&parts, t)));
            candidates.sort();
            candidates.dedup();
            let mut best_score = u32::MAX;
            for d in candidates {
                let arrival = d + tau;
                let left = Interval::new(Time::ZERO, arrival, true, false).expect("arrival > 0");
                let here = match state.entered {
                    None => left,
                    Some(en) => Interval::open(en, arrival).expect("stay has positive length"),
                };
                let completed = soft.count(u, &here);
                let wait_soft = soft.count(w, &stay_window(Some(d), target));
                let score = completed + wait_soft;
                if score >= best_score {
                    continue;
                }
                best_score = score;
                out.push(WcState {
                    vertex: w,
                    arrival,
                    interval: k,
                    entered: Some(d),
                    soft_total: state.soft_total + completed,
                    wait_soft,
                });
            }
        }
    }
    out
}

/// Options of [`sipps_wc_plan_with`].
#[derive(Debug, Clone, Copy)]
pub struct WcOptions {
    pub prune_dominated: bool,
}

impl Default for WcOptions {
    fn default() -> Self {
        WcOptions { prune_dominated: true }
    }
}

/// Minimum-cost path that, among those, tries to avoid the occupancies in `soft`.
pub fn sipps_wc_plan(inst: &Instance, agent: AgentId, constraints: &[Constraint], soft: &SoftTable) -> Option<Path> {
    let ctx = PlanContext::new(inst);
    sipps_wc_plan_with(&ctx, agent, constraints, soft, WcOptions::default()).map(|p| p.path)
}

pub fn sipps_wc_plan_with(
    ctx: &PlanContext<'_>,
    agent: AgentId,
    constraints: &[Constraint],
    soft: &SoftTable,
    options: WcOptions,
) -> Option<Plan> {
    let inst = ctx.inst;
    let table = SafeIntervalTable::build(inst, &ctx.timing, agent, constraints);
    let heuristic = &ctx.heuristics[agent.index()];
    let goal = inst.goal(agent);
    if !heuristic.get(inst.start(agent)).is_finite() {
        return None;
    }
    let mut search = Search { nodes: Vec::new(), open: BinaryHeap::new(), seq: 0, heuristic };
    let mut frontier: HashMap<(VertexId, usize, u32), Vec<(Time, u32)>> = HashMap::new();
    let mut root = start_node(&table, inst.start(agent))?;
    root.wait_soft = soft.count(root.vertex, &stay_window(None, &table.safe_intervals(root.vertex)[root.interval]));
    search.push(root);
    let mut expansions = 0;
    while let Some(entry) = search.open.pop() {
        let node = search.nodes[entry.node];
        if node.terminal {
            return Some(Plan { path: search.path(inst, agent, entry.node), soft_conflicts: node.soft, expansions });
        }
        expansions += 1;
        let stay = table.safe_intervals(node.vertex)[node.interval];
        if node.vertex == goal && !stay.hi().is_finite() {
            // Staying is never worse than leaving and coming back later.
            search.push(Node { soft: node.soft + node.wait_soft, terminal: true, parent: Some(entry.node), ..node });
            continue;
        }
        let state = WcState {
            vertex: node.vertex,
            arrival: node.arrival,
            interval: node.interval,
            entered: node.entered,
            soft_total: node.soft,
            wait_soft: node.wait_soft,
        };
        for child in wc_successors(inst, &table, soft, &state) {
            if !heuristic.get(child.vertex).is_finite() {
                continue;
            }
            if options.prune_dominated {
                let list = frontier.entry((child.vertex, child.interval, child.wait_soft)).or_default();
                if list.iter().any(|&(t, s)| t <= child.arrival && s <= child.soft_total) {
                    continue;
                }
                list.retain(|&(t, s)| !(child.arrival <= t && child.soft_total <= s));
                list.push((child.arrival, child.soft_total));
            }
            search.push(Node {
                vertex: child.vertex,
                interval: child.interval,
                arrival: child.arrival,
                entered: child.entered,
                soft: child.soft_total,
                wait_soft: child.wait_soft,
                parent: Some(entry.node),
                terminal: false,
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::first_violation;
    use crate::model::InstanceBuilder;

    fn t(s: &str) -> Time {
        s.parse().unwrap()
    }

    fn iv(s: &str) -> Interval {
        s.parse().unwrap()
    }

    fn abc() -> (Instance, [VertexId; 3]) {
        let mut b = InstanceBuilder::new();
        let [a, bb, c] = ["A", "B", "C"].map(|l| b.add_vertex(l).unwrap());
        b.add_edge(a, bb).unwrap();
        b.add_edge(bb, c).unwrap();
        let ag = b.add_agent(a, c).unwrap();
        b.set_uniform_duration(ag, t("1"));
        (b.build().unwrap(), [a, bb, c])
    }

    #[test]
    fn occupancy_cuts_a_window() {
        let (inst, [_, b, _]) = abc();
        let c = [Constraint::Occupancy { agent: AgentId(0), vertex: b, at: t("5") }];
        let table = build_safe_intervals(&inst, AgentId(0), &c);
        assert_eq!(table.safe_intervals(b), &[iv("[0, 4]"), iv("[6, inf)")]);
    }

    #[test]
    fn wait_and_motion_rules() {
        let (inst, [a, b, _]) = abc();
        let w = [Constraint::Wait { agent: AgentId(0), vertex: b, range: iv("[2, 7)") }];
        let table = build_safe_intervals(&inst, AgentId(0), &w);
        assert_eq!(table.safe_intervals(b), &[iv("[0, 2)"), iv("[7, inf)")]);
        let m = [Constraint::Motion { agent: AgentId(0), from: Some(a), to: Some(b), range: iv("[1, 3)") }];
        let table = build_safe_intervals(&inst, AgentId(0), &m);
        assert_eq!(table.safe_intervals(b), &[Interval::ALL]);
        let free = table.feasible_departures(a, b, t("1"), Time::ZERO, &Interval::ALL, &Interval::ALL);
        assert_eq!(free, vec![iv("[0, 1)"), iv("[3, inf)")]);
        let none = build_safe_intervals(&inst, AgentId(0), &[]);
        assert!(inst.vertices().all(|v| none.safe_intervals(v) == [Interval::ALL]));
        let other = [Constraint::Wait { agent: AgentId(3), vertex: b, range: iv("[2, 7)") }];
        assert_eq!(build_safe_intervals(&inst, AgentId(0), &other).safe_intervals(b), &[Interval::ALL]);
    }

    #[test]
    fn heuristic_is_shortest_time() {
        let (inst, [a, b, c]) = abc();
        let h = heuristic(&inst, AgentId(0));
        assert_eq!((h.get(a), h.get(b), h.get(c)), (t("2"), t("1"), Time::ZERO));
    }

    #[test]
    fn plans_respect_constraints() {
        let (inst, [a, b, c]) = abc();
        let cs = [
            Constraint::Motion { agent: AgentId(0), from: None, to: Some(b), range: iv("[0, 2)") },
            Constraint::Occupancy { agent: AgentId(0), vertex: c, at: t("3.5") },
        ];
        let p = sipp_plan(&inst, AgentId(0), &cs).unwrap();
        assert!(first_violation(&p, &cs).is_none());
        // Enter B at 2, then C may only be entered after 3.5.
        assert_eq!(p.cost(), t("4.5"));
        assert_eq!(p.actions.first().unwrap().from, a);
        let q = sipps_wc_plan(&inst, AgentId(0), &cs, &SoftTable::new()).unwrap();
        assert_eq!(q.cost(), p.cost());
    }

    #[test]
    fn blocked_start_has_no_plan() {
        let (inst, [a, ..]) = abc();
        let cs = [Constraint::Wait { agent: AgentId(0), vertex: a, range: iv("[0, 1)") }];
        assert!(sipp_plan(&inst, AgentId(0), &cs).is_none());
    }

    #[test]
    fn two_children_with_soft_counts() {
        let mut b = InstanceBuilder::new();
        let v = b.add_vertex("v").unwrap();
        let v2 = b.add_vertex("v'").unwrap();
        b.add_edge(v, v2).unwrap();
        let ag = b.add_agent(v, v2).unwrap();
        b.set_uniform_duration(ag, t("1"));
        let inst = b.build().unwrap();
        let timing = VertexTiming::new(&inst);
        let cs = [Constraint::Wait { agent: ag, vertex: v, range: iv("[8.29, 20)") }];
        let table = SafeIntervalTable::build(&inst, &timing, ag, &cs);
        assert_eq!(table.safe_intervals(v)[0], iv("[0, 8.29)"));
        let mut soft = SoftTable::new();
        soft.add(v2, iv("[2, 5.37]"));
        soft.add(v2, iv("[10, 11]"));
        let parent = WcState { vertex: v, arrival: Time::ZERO, interval: 0, entered: None, soft_total: 0, wait_soft: 0 };
        let kids = wc_successors(&inst, &table, &soft, &parent);
        let summary: Vec<_> = kids
            .iter()
            .map(|k| (Interval::from(k.arrival), k.wait_soft))
            .collect();
        assert_eq!(summary, vec![(iv("[1, inf)"), 2), (iv("[6.37, inf)"), 1)]);
    }
}
