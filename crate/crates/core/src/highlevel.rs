//! Best-first search over constraint trees.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::conflict::{detect, Conflict};
use crate::constraint::{gen_cma, gen_csa, Branch, Constraint};
use crate::lowlevel::{sipp_plan_with, sipps_wc_plan_with, PlanContext, SoftTable, WcOptions};
use crate::model::{sum_of_costs, AgentId, Instance, Path};
use crate::time::Time;

/// Branching strategy and low-level planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Single-action constraints, plain safe-interval planner.
    Csa,
    /// Multi-action constraints, plain safe-interval planner.
    Cma,
    /// Multi-action constraints, soft-conflict-aware planner.
    Cmas,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Csa, Mode::Cma, Mode::Cmas];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Csa => "csa",
            Mode::Cma => "cma",
            Mode::Cmas => "cmas",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csa" => Ok(Mode::Csa),
            "cma" => Ok(Mode::Cma),
            "cmas" => Ok(Mode::Cmas),
            other => Err(format!("unknown mode {other:?} (expected csa, cma or cmas)")),
        }
    }
}

/// Search limits; `None` means unlimited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Budget {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
}

impl Budget {
    pub fn time(limit: Duration) -> Self {
        Budget { time_limit: Some(limit), node_limit: None }
    }

    pub fn nodes(limit: u64) -> Self {
        Budget { time_limit: None, node_limit: Some(limit) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Solved,
    Unsolvable,
    Timeout,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Solved => "solved",
            Outcome::Unsolvable => "unsolvable",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    /// Nodes popped from the open list.
    pub expansions: u64,
    /// Nodes created, the root included.
    pub generations: u64,
    pub lowlevel_calls: u64,
    #[serde(with = "millis")]
    pub wall: Duration,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub outcome: Outcome,
    /// Present iff solved; indexed by agent id.
    pub paths: Option<Vec<Path>>,
    pub soc: Option<Time>,
    pub stats: Stats,
}

/// A constraint-tree node. Per-agent data is shared with the parent until
/// that agent is replanned.
#[derive(Debug, Clone)]
pub struct Node {
    pub paths: Vec<Arc<Path>>,
    pub constraints: Vec<Arc<Vec<Constraint>>>,
    pub soc: Time,
    pub conflict: Option<Conflict>,
    pub conflicting_pairs: usize,
    pub depth: u32,
}

impl Node {
    fn new(paths: Vec<Arc<Path>>, constraints: Vec<Arc<Vec<Constraint>>>, depth: u32) -> Node {
        let (conflict, conflicting_pairs) = detect(&paths);
        let soc = paths.iter().fold(Time::ZERO, |acc, p| acc + p.cost());
        Node { paths, constraints, soc, conflict, conflicting_pairs, depth }
    }

    pub fn owned_paths(&self) -> Vec<Path> {
        self.paths.iter().map(|p| (**p).clone()).collect()
    }
}

struct Queued {
    soc: Time,
    pairs: usize,
    depth: u32,
    seq: u64,
    node: Node,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: cheapest, fewest conflicts, deepest, oldest first.
        other
            .soc
            .cmp(&self.soc)
            .then(other.pairs.cmp(&self.pairs))
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable search state for one instance.
pub struct Solver<'a> {
    ctx: PlanContext<'a>,
    mode: Mode,
    stats: Stats,
}

impl<'a> Solver<'a> {
    pub fn new(inst: &'a Instance, mode: Mode) -> Self {
        Solver { ctx: PlanContext::new(inst), mode, stats: Stats::default() }
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    fn plan(&mut self, agent: AgentId, constraints: &[Constraint], paths: &[Arc<Path>]) -> Option<Path> {
        self.stats.lowlevel_calls += 1;
        match self.mode {
            Mode::Csa | Mode::Cma => sipp_plan_with(&self.ctx, agent, constraints).map(|p| p.path),
            Mode::Cmas => {
                let mut soft = SoftTable::new();
                for p in paths.iter().filter(|p| p.agent != agent) {
                    for (v, i) in p.merged_occupancy() {
                        soft.add(v, i);
                    }
                }
                sipps_wc_plan_with(&self.ctx, agent, constraints, &soft, WcOptions::default()).map(|p| p.path)
            }
        }
    }

    /// Root node with every agent planned independently.
    pub fn root(&mut self) -> Option<Node> {
        let inst = self.ctx.inst;
        let mut paths: Vec<Arc<Path>> = Vec::with_capacity(inst.num_agents());
        for a in inst.agents() {
            let p = self.plan(a, &[], &paths)?;
            paths.push(Arc::new(p));
        }
        self.stats.generations += 1;
        Some(Node::new(paths, vec![Arc::new(Vec::new()); inst.num_agents()], 0))
    }

    /// The two branches that resolve `conflict` under the solver's mode.
    pub fn branches(&self, conflict: &Conflict) -> (Branch, Branch) {
        match self.mode {
            Mode::Csa => gen_csa(conflict),
            Mode::Cma | Mode::Cmas => gen_cma(conflict, &self.ctx.timing),
        }
    }

    /// Children of a node with a conflict. Branches whose agent cannot be
    /// replanned are dropped.
    pub fn expand(&mut self, node: &Node) -> Vec<Node> {
        let Some(conflict) = node.conflict else {
            return Vec::new();
        };
        let (bi, bj) = self.branches(&conflict);
        let mut children = Vec::with_capacity(2);
        for branch in [bi, bj] {
            let agent = branch.agent;
            let mut constraints = node.constraints.clone();
            let mut own = (*constraints[agent.index()]).clone();
            own.extend(branch.constraints.iter().copied());
            let Some(path) = self.plan(agent, &own, &node.paths) else {
                continue;
            };
            constraints[agent.index()] = Arc::new(own);
            let mut paths = node.paths.clone();
            paths[agent.index()] = Arc::new(path);
            self.stats.generations += 1;
            children.push(Node::new(paths, constraints, node.depth + 1));
        }
        children
    }

    pub fn solve(mut self, budget: Budget) -> SolveResult {
        let started = Instant::now();
        let finish = |outcome: Outcome, paths: Option<Vec<Path>>, mut stats: Stats| {
            stats.wall = started.elapsed();
            let soc = paths.as_deref().map(sum_of_costs);
            SolveResult { outcome, paths, soc, stats }
        };
        if !self.ctx.inst.unreachable_agents().is_empty() {
            return finish(Outcome::Unsolvable, None, self.stats);
        }
        let Some(root) = self.root() else {
            return finish(Outcome::Unsolvable, None, self.stats);
        };
        let mut open = BinaryHeap::new();
        let mut seq = 0u64;
        open.push(Queued { soc: root.soc, pairs: root.conflicting_pairs, depth: 0, seq, node: root });
        while let Some(Queued { node, .. }) = open.pop() {
            if budget.time_limit.is_some_and(|l| started.elapsed() >= l)
                || budget.node_limit.is_some_and(|l| self.stats.expansions >= l)
            {
                return finish(Outcome::Timeout, None, self.stats);
            }
            self.stats.expansions += 1;
            if node.conflict.is_none() {
                let paths = node.owned_paths();
                return finish(Outcome::Solved, Some(paths), self.stats);
            }
            for child in self.expand(&node) {
                seq += 1;
                open.push(Queued { soc: child.soc, pairs: child.conflicting_pairs, depth: child.depth, seq, node: child });
            }
        }
        finish(Outcome::Unsolvable, None, self.stats)
    }
}

/// Solves `inst` to optimal sum of costs within `budget`.
pub fn solve(inst: &Instance, mode: Mode, budget: Budget) -> SolveResult {
    Solver::new(inst, mode).solve(budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict::validate;
    use crate::model::{InstanceBuilder, VertexId};

    fn toy() -> Instance {
        let mut b = InstanceBuilder::new();
        let v: Vec<_> = ["A", "B", "C", "D", "E"].iter().map(|l| b.add_vertex(*l).unwrap()).collect();
        for (x, y) in [(2, 3), (3, 0), (3, 4), (4, 1)] {
            b.add_edge(v[x], v[y]).unwrap();
        }
        for (k, (s, g)) in [(4, 1), (3, 3), (2, 0)].into_iter().enumerate() {
            let a = b.add_agent(v[s], v[g]).unwrap();
            b.set_uniform_duration(a, Time::from_int(k as i64 + 1));
        }
        b.build().unwrap()
    }

    #[test]
    fn modes_agree_on_the_toy() {
        let inst = toy();
        let mut socs = Vec::new();
        for mode in Mode::ALL {
            let r = solve(&inst, mode, Budget::default());
            assert_eq!(r.outcome, Outcome::Solved, "{mode}");
            let paths = r.paths.unwrap();
            assert!(validate(&inst, &paths).is_valid(), "{mode}");
            socs.push(r.soc.unwrap());
        }
        assert!(socs.windows(2).all(|w| w[0] == w[1]), "{socs:?}");
        // Agent 1 reaches B at 1, agent 3 passes D at 6 and reaches A at 9,
        // agent 2 steps aside to E and comes back.
        assert_eq!(socs[0], Time::from_int(1 + 9 + 11));
    }

    #[test]
    fn single_agent_needs_one_expansion() {
        let mut b = InstanceBuilder::new();
        let u = b.add_vertex("u").unwrap();
        let w = b.add_vertex("w").unwrap();
        b.add_edge(u, w).unwrap();
        let a = b.add_agent(u, w).unwrap();
        b.set_uniform_duration(a, Time::from_int(1));
        let inst = b.build().unwrap();
        let r = solve(&inst, Mode::Cma, Budget::default());
        assert_eq!(r.soc, Some(Time::from_int(1)));
        assert_eq!((r.stats.expansions, r.stats.generations, r.stats.lowlevel_calls), (1, 1, 1));
    }

    #[test]
    fn swapping_in_a_corridor_is_unsolvable() {
        let mut b = InstanceBuilder::new();
        let u = b.add_vertex("u").unwrap();
        let w = b.add_vertex("w").unwrap();
        b.add_edge(u, w).unwrap();
        let a0 = b.add_agent(u, w).unwrap();
        let a1 = b.add_agent(w, u).unwrap();
        b.set_uniform_duration(a0, Time::from_int(1));
        b.set_uniform_duration(a1, Time::from_int(1));
        let inst = b.build().unwrap();
        let r = solve(&inst, Mode::Cma, Budget::nodes(500));
        assert_ne!(r.outcome, Outcome::Solved);
        assert_eq!(VertexId(0), u);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("cbs".parse::<Mode>().is_err());
    }
}
