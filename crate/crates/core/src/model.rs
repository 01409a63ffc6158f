//! Problem instances, timed actions and paths under duration occupancy.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Interval, Time, MAX_DENOMINATOR};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u32);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown vertex {0:?}")]
    UnknownVertex(VertexId),
    #[error("duplicate vertex label {0:?}")]
    DuplicateLabel(String),
    #[error("edge {0:?}-{1:?} is a self loop")]
    SelfLoop(VertexId, VertexId),
    #[error("edge {0:?}-{1:?} is declared twice")]
    DuplicateEdge(VertexId, VertexId),
    #[error("agent {agent} has non-positive or infinite duration on edge {edge}")]
    BadDuration { agent: AgentId, edge: u32 },
    #[error("agent {agent} has no duration for edge {edge}")]
    MissingDuration { agent: AgentId, edge: u32 },
    #[error("agents {0} and {1} share a start vertex")]
    SharedStart(AgentId, AgentId),
    #[error("agents {0} and {1} share a goal vertex")]
    SharedGoal(AgentId, AgentId),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("common time denominator {0} exceeds the supported bound")]
    DenominatorTooLarge(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub start: VertexId,
    pub goal: VertexId,
}

/// Undirected graph, agents' tasks and per-agent edge traversal times.
#[derive(Debug, Clone)]
pub struct Instance {
    labels: Vec<String>,
    label_index: HashMap<String, VertexId>,
    edges: Vec<(VertexId, VertexId)>,
    adjacency: Vec<Vec<(VertexId, EdgeId)>>,
    durations: Vec<Vec<Time>>,
    tasks: Vec<Task>,
    unreachable: Vec<AgentId>,
    time_denominator: i64,
}

impl Instance {
    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_agents(&self) -> usize {
        self.tasks.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.tasks.len() as u32).map(AgentId)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.labels.len() as u32).map(VertexId)
    }

    pub fn task(&self, agent: AgentId) -> Task {
        self.tasks[agent.index()]
    }

    pub fn start(&self, agent: AgentId) -> VertexId {
        self.tasks[agent.index()].start
    }

    pub fn goal(&self, agent: AgentId) -> VertexId {
        self.tasks[agent.index()].goal
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v.index()]
    }

    pub fn vertex(&self, label: &str) -> Option<VertexId> {
        self.label_index.get(label).copied()
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adjacency[v.index()]
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.adjacency
            .get(u.index())?
            .iter()
            .find(|(w, _)| *w == v)
            .map(|&(_, e)| e)
    }

    pub fn duration(&self, agent: AgentId, edge: EdgeId) -> Time {
        self.durations[agent.index()][edge.index()]
    }

    pub fn duration_between(&self, agent: AgentId, u: VertexId, v: VertexId) -> Option<Time> {
        self.edge_between(u, v).map(|e| self.duration(agent, e))
    }

    /// Agents whose goal is not reachable from their start.
    pub fn unreachable_agents(&self) -> &[AgentId] {
        &self.unreachable
    }

    /// Least common denominator of every duration in the instance.
    pub fn time_denominator(&self) -> i64 {
        self.time_denominator
    }

    /// The agent's single edge duration when every edge takes it equally long.
    pub fn uniform_duration(&self, agent: AgentId) -> Option<Time> {
        let ds = &self.durations[agent.index()];
        let first = *ds.first()?;
        ds.iter().all(|&d| d == first).then_some(first)
    }

    /// Every agent traverses every edge in one agent-specific constant time.
    pub fn has_uniform_durations(&self) -> bool {
        self.agents().all(|a| self.uniform_duration(a).is_some() || self.edges.is_empty())
    }

    /// Whether `v` can be reached from `from` in the undirected graph.
    pub fn connected(&self, from: VertexId, to: VertexId) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.num_vertices()];
        let mut queue = VecDeque::from([from]);
        seen[from.index()] = true;
        while let Some(u) = queue.pop_front() {
            for &(w, _) in self.neighbors(u) {
                if w == to {
                    return true;
                }
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    queue.push_back(w);
                }
            }
        }
        false
    }

    /// A copy of this instance with different tasks and per-agent durations.
    pub fn with_agents(&self, tasks: Vec<Task>, durations: Vec<Vec<Time>>) -> Result<Instance, ModelError> {
        let mut b = InstanceBuilder::new();
        for l in &self.labels {
            b.add_vertex(l.clone())?;
        }
        for &(u, v) in &self.edges {
            b.add_edge(u, v)?;
        }
        for (task, ds) in tasks.into_iter().zip(durations) {
            let a = b.add_agent(task.start, task.goal)?;
            for (e, d) in ds.into_iter().enumerate() {
                b.set_duration(a, EdgeId(e as u32), d);
            }
        }
        b.build()
    }
}

/// Incremental construction of an [`Instance`].
#[derive(Debug, Default, Clone)]
pub struct InstanceBuilder {
    labels: Vec<String>,
    label_index: HashMap<String, VertexId>,
    edges: Vec<(VertexId, VertexId)>,
    edge_index: HashMap<(VertexId, VertexId), EdgeId>,
    tasks: Vec<Task>,
    durations: Vec<HashMap<EdgeId, Time>>,
    uniform: Vec<Option<Time>>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, label: impl Into<String>) -> Result<VertexId, ModelError> {
        let label = label.into();
        if self.label_index.contains_key(&label) {
            return Err(ModelError::DuplicateLabel(label));
        }
        let id = VertexId(self.labels.len() as u32);
        self.label_index.insert(label.clone(), id);
        self.labels.push(label);
        Ok(id)
    }

    pub fn vertex(&self, label: &str) -> Option<VertexId> {
        self.label_index.get(label).copied()
    }

    fn check_vertex(&self, v: VertexId) -> Result<(), ModelError> {
        if v.index() < self.labels.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownVertex(v))
        }
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId, ModelError> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(ModelError::SelfLoop(u, v));
        }
        let key = (u.min(v), u.max(v));
        if self.edge_index.contains_key(&key) {
            return Err(ModelError::DuplicateEdge(u, v));
        }
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push((u, v));
        self.edge_index.insert(key, id);
        Ok(id)
    }

    pub fn edge(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.edge_index.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn add_agent(&mut self, start: VertexId, goal: VertexId) -> Result<AgentId, ModelError> {
        self.check_vertex(start)?;
        self.check_vertex(goal)?;
        let id = AgentId(self.tasks.len() as u32);
        self.tasks.push(Task { start, goal });
        self.durations.push(HashMap::new());
        self.uniform.push(None);
        Ok(id)
    }

    /// Default duration for every edge without an explicit one.
    pub fn set_uniform_duration(&mut self, agent: AgentId, duration: Time) {
        self.uniform[agent.index()] = Some(duration);
    }

    pub fn set_duration(&mut self, agent: AgentId, edge: EdgeId, duration: Time) {
        self.durations[agent.index()].insert(edge, duration);
    }

    pub fn build(self) -> Result<Instance, ModelError> {
        let n = self.labels.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            adjacency[u.index()].push((v, EdgeId(i as u32)));
            adjacency[v.index()].push((u, EdgeId(i as u32)));
        }
        for list in &mut adjacency {
            list.sort();
        }

        let mut durations = Vec::with_capacity(self.tasks.len());
        let mut denominator: i64 = 1;
        for (a, explicit) in self.durations.iter().enumerate() {
            let agent = AgentId(a as u32);
            let mut row = Vec::with_capacity(self.edges.len());
            for e in 0..self.edges.len() as u32 {
                let d = explicit
                    .get(&EdgeId(e))
                    .copied()
                    .or(self.uniform[a])
                    .ok_or(ModelError::MissingDuration { agent, edge: e })?;
                if !d.is_finite() || d == Time::ZERO {
                    return Err(ModelError::BadDuration { agent, edge: e });
                }
                denominator = denominator.lcm(d.value().denom());
                if denominator > MAX_DENOMINATOR {
                    return Err(ModelError::DenominatorTooLarge(format!("> {MAX_DENOMINATOR}")));
                }
                row.push(d);
            }
            durations.push(row);
        }

        let mut starts: HashMap<VertexId, AgentId> = HashMap::new();
        let mut goals: HashMap<VertexId, AgentId> = HashMap::new();
        for (a, t) in self.tasks.iter().enumerate() {
            let a = AgentId(a as u32);
            if let Some(&other) = starts.get(&t.start) {
                return Err(ModelError::SharedStart(other, a));
            }
            if let Some(&other) = goals.get(&t.goal) {
                return Err(ModelError::SharedGoal(other, a));
            }
            starts.insert(t.start, a);
            goals.insert(t.goal, a);
        }

        let mut inst = Instance {
            labels: self.labels,
            label_index: self.label_index,
            edges: self.edges,
            adjacency,
            durations,
            tasks: self.tasks,
            unreachable: Vec::new(),
            time_denominator: denominator,
        };
        inst.unreachable = inst
            .agents()
            .filter(|&a| !inst.connected(inst.start(a), inst.goal(a)))
            .collect();
        Ok(inst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Move,
    Wait,
}

/// How an action relates to one of the vertices it occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    In,
    Out,
    Wait,
}

/// A timed state transition `((from, start), (to, end))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub agent: AgentId,
    pub from: VertexId,
    pub to: VertexId,
    pub start: Time,
    pub end: Time,
    pub kind: ActionKind,
}

impl Action {
    pub fn travel(agent: AgentId, from: VertexId, to: VertexId, start: Time, duration: Time) -> Action {
        Action { agent, from, to, start, end: start + duration, kind: ActionKind::Move }
    }

    pub fn wait(agent: AgentId, at: VertexId, start: Time, end: Time) -> Action {
        Action { agent, from: at, to: at, start, end, kind: ActionKind::Wait }
    }

    pub fn is_move(&self) -> bool {
        self.kind == ActionKind::Move
    }

    pub fn is_wait(&self) -> bool {
        self.kind == ActionKind::Wait
    }

    pub fn duration(&self) -> Time {
        self.end - self.start
    }

    /// Role of this action at `v`, if it touches `v` at all.
    pub fn role_at(&self, v: VertexId) -> Option<Role> {
        match self.kind {
            ActionKind::Wait if self.from == v => Some(Role::Wait),
            ActionKind::Move if self.to == v => Some(Role::In),
            ActionKind::Move if self.from == v => Some(Role::Out),
            _ => None,
        }
    }

    /// Vertices held by this action and for how long.
    ///
    /// A move holds its source over `[start, end)` and its destination over
    /// `(start, end]`; a wait holds its vertex over `[start, end]`.
    pub fn occupancy(&self) -> impl Iterator<Item = (VertexId, Interval, Role)> {
        let parts = match self.kind {
            ActionKind::Move => [
                Some((self.from, Interval::closed_open(self.start, self.end).expect("move duration > 0"), Role::Out)),
                Some((self.to, Interval::open_closed(self.start, self.end).expect("move duration > 0"), Role::In)),
            ],
            ActionKind::Wait => [
                Some((self.from, Interval::closed(self.start, self.end).expect("wait end >= start"), Role::Wait)),
                None,
            ],
        };
        parts.into_iter().flatten()
    }

    pub fn occupancy_at(&self, v: VertexId) -> Option<Interval> {
        self.occupancy().find(|(w, _, _)| *w == v).map(|(_, i, _)| i)
    }
}

/// One stay of an agent at a vertex: from the start of the move that brought
/// it there (if any) to the end of the move that takes it away (if any).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub vertex: VertexId,
    /// Start of the incoming move; `None` for the stay at the start vertex.
    pub entered: Option<Time>,
    pub arrival: Time,
    /// Infinity for the final stay.
    pub departure: Time,
    /// End of the outgoing move; infinity for the final stay.
    pub left: Time,
}

impl Visit {
    /// Everything the visit holds of its vertex.
    pub fn occupancy(&self) -> Interval {
        match self.entered {
            None => Interval::new(Time::ZERO, self.left, true, false).expect("visit ends after it starts"),
            Some(e) => Interval::open(e, self.left).expect("visit ends after it starts"),
        }
    }

    /// The wait part `[arrival, departure]`, possibly a single point.
    pub fn stay(&self) -> Interval {
        Interval::closed(self.arrival, self.departure).expect("departure >= arrival")
    }
}

/// A single agent's timed plan ending in an infinite wait at its goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub agent: AgentId,
    pub actions: Vec<Action>,
}

impl Path {
    pub fn new(agent: AgentId, actions: Vec<Action>) -> Path {
        Path { agent, actions }
    }

    /// A path that never leaves `at`.
    pub fn stay(agent: AgentId, at: VertexId) -> Path {
        Path::new(agent, vec![Action::wait(agent, at, Time::ZERO, Time::Infinity)])
    }

    /// Time at which the agent reaches its goal for good.
    pub fn cost(&self) -> Time {
        self.actions.last().map_or(Time::ZERO, |a| a.start)
    }

    pub fn start_vertex(&self) -> Option<VertexId> {
        self.actions.first().map(|a| a.from)
    }

    pub fn end_vertex(&self) -> Option<VertexId> {
        self.actions.last().map(|a| a.to)
    }

    /// Actions with an explicit zero-length wait wherever the agent arrives
    /// somewhere and leaves at the same instant.
    pub fn with_explicit_waits(&self) -> Vec<Action> {
        let mut out = Vec::with_capacity(self.actions.len() * 2);
        let mut prev_was_move = true;
        let mut here = self.start_vertex();
        let mut now = Time::ZERO;
        for a in &self.actions {
            if a.is_move() && prev_was_move {
                if let Some(v) = here {
                    out.push(Action::wait(self.agent, v, now, now));
                }
            }
            prev_was_move = a.is_move();
            here = Some(a.to);
            now = a.end;
            out.push(*a);
        }
        out
    }

    pub fn visits(&self) -> Vec<Visit> {
        let mut out = Vec::new();
        let Some(first) = self.actions.first() else {
            return out;
        };
        let mut current = Visit {
            vertex: first.from,
            entered: None,
            arrival: Time::ZERO,
            departure: Time::Infinity,
            left: Time::Infinity,
        };
        for a in &self.actions {
            if a.is_move() {
                current.departure = a.start;
                current.left = a.end;
                out.push(current);
                current = Visit {
                    vertex: a.to,
                    entered: Some(a.start),
                    arrival: a.end,
                    departure: Time::Infinity,
                    left: Time::Infinity,
                };
            }
        }
        out.push(current);
        out
    }

    /// Maximal intervals during which the agent holds each vertex.
    pub fn merged_occupancy(&self) -> Vec<(VertexId, Interval)> {
        self.visits().iter().map(|v| (v.vertex, v.occupancy())).collect()
    }
}

/// One path per agent, indexed by agent id.
pub type Solution = Vec<Path>;

/// Exact sum of the paths' costs.
pub fn sum_of_costs(paths: &[Path]) -> Time {
    paths.iter().fold(Time::ZERO, |acc, p| acc + p.cost())
}

pub fn path_cost(path: &Path) -> Time {
    path.cost()
}

/// Step-by-step construction of a [`Path`].
#[derive(Debug, Clone)]
pub struct PathBuilder {
    agent: AgentId,
    at: VertexId,
    now: Time,
    actions: Vec<Action>,
}

impl PathBuilder {
    pub fn new(agent: AgentId, start: VertexId) -> Self {
        PathBuilder { agent, at: start, now: Time::ZERO, actions: Vec::new() }
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn at(&self) -> VertexId {
        self.at
    }

    /// Waits in place until `t`; no-op when `t` is not later than now.
    pub fn wait_until(mut self, t: Time) -> Self {
        if t > self.now {
            self.actions.push(Action::wait(self.agent, self.at, self.now, t));
            self.now = t;
        }
        self
    }

    pub fn move_to(mut self, to: VertexId, duration: Time) -> Self {
        self.actions.push(Action::travel(self.agent, self.at, to, self.now, duration));
        self.now = self.now + duration;
        self.at = to;
        self
    }

    /// Moves along `(at, to)` with the agent's duration from `inst`.
    pub fn step(self, inst: &Instance, to: VertexId) -> Self {
        let d = inst
            .duration_between(self.agent, self.at, to)
            .unwrap_or_else(|| panic!("no edge {:?}-{:?}", self.at, to));
        self.move_to(to, d)
    }

    /// Appends the terminal infinite wait.
    pub fn finish(mut self) -> Path {
        self.actions.push(Action::wait(self.agent, self.at, self.now, Time::Infinity));
        Path::new(self.agent, self.actions)
    }
}

/// Per-agent minimum incoming and outgoing traversal times of each vertex.
#[derive(Debug, Clone)]
pub struct VertexTiming {
    tau_in: Vec<Vec<Option<Time>>>,
    tau_out: Vec<Vec<Option<Time>>>,
}

impl VertexTiming {
    pub fn new(inst: &Instance) -> VertexTiming {
        let mut tau_in = Vec::with_capacity(inst.num_agents());
        for a in inst.agents() {
            let row: Vec<Option<Time>> = inst
                .vertices()
                .map(|v| inst.neighbors(v).iter().map(|&(_, e)| inst.duration(a, e)).min())
                .collect();
            tau_in.push(row);
        }
        // Edges are undirected with symmetric durations, so both minima coincide.
        let tau_out = tau_in.clone();
        VertexTiming { tau_in, tau_out }
    }

    pub fn tau_in(&self, agent: AgentId, v: VertexId) -> Option<Time> {
        self.tau_in[agent.index()][v.index()]
    }

    pub fn tau_out(&self, agent: AgentId, v: VertexId) -> Option<Time> {
        self.tau_out[agent.index()][v.index()]
    }
}

pub fn vertex_timing(inst: &Instance) -> VertexTiming {
    VertexTiming::new(inst)
}
