//! JSON files for solutions and run statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::RunResult;
use crate::model::{Action, ActionKind, AgentId, Instance, ModelError, Path};
use crate::movingai::{parse_cell_label, GridGraph};
use crate::time::Time;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("unknown vertex label {0:?}")]
    UnknownLabel(String),
    #[error("agent {0} has no uniform edge duration")]
    NoDuration(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub kind: ActionKind,
    pub from: String,
    pub to: String,
    pub start: Time,
    pub end: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPlan {
    pub agent: u32,
    pub start: String,
    pub goal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<u32>,
    /// Time to cross one edge, when it is the same for every edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Time>,
    pub cost: Time,
    pub actions: Vec<ActionRecord>,
}

/// A solution with vertices referenced by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    pub soc: Time,
    pub agents: Vec<AgentPlan>,
}

impl SolutionFile {
    pub fn new(inst: &Instance, paths: &[Path], map: Option<String>, speeds: Option<&[u32]>) -> SolutionFile {
        let label = |v| inst.label(v).to_string();
        let agents = paths
            .iter()
            .map(|p| {
                let a = p.agent;
                AgentPlan {
                    agent: a.0,
                    start: label(inst.start(a)),
                    goal: label(inst.goal(a)),
                    speed: speeds.and_then(|s| s.get(a.index()).copied()),
                    duration: inst.uniform_duration(a),
                    cost: p.cost(),
                    actions: p
                        .actions
                        .iter()
                        .map(|x| ActionRecord {
                            kind: x.kind,
                            from: label(x.from),
                            to: label(x.to),
                            start: x.start,
                            end: x.end,
                        })
                        .collect(),
                }
            })
            .collect();
        SolutionFile { map, soc: paths.iter().map(Path::cost).fold(Time::ZERO, |s, c| s + c), agents }
    }

    /// Paths against `inst`, resolving labels. Nothing is checked beyond
    /// label lookup; use `validate` for that.
    pub fn paths(&self, inst: &Instance) -> Result<Vec<Path>, FileError> {
        let vertex = |l: &str| inst.vertex(l).ok_or_else(|| FileError::UnknownLabel(l.to_string()));
        self.agents
            .iter()
            .map(|p| {
                let agent = AgentId(p.agent);
                let actions = p
                    .actions
                    .iter()
                    .map(|x| {
                        Ok(Action {
                            agent,
                            from: vertex(&x.from)?,
                            to: vertex(&x.to)?,
                            start: x.start,
                            end: x.end,
                            kind: x.kind,
                        })
                    })
                    .collect::<Result<_, FileError>>()?;
                Ok(Path::new(agent, actions))
            })
            .collect()
    }

    /// Rebuilds the grid instance the solution claims to solve.
    pub fn grid_instance(&self, graph: &GridGraph) -> Result<Instance, FileError> {
        let cell = |l: &str| parse_cell_label(l).ok_or_else(|| FileError::UnknownLabel(l.to_string()));
        let mut tasks = Vec::new();
        let mut durations = Vec::new();
        for (k, p) in self.agents.iter().enumerate() {
            tasks.push((cell(&p.start)?, cell(&p.goal)?));
            let d = p.duration.or(p.speed.map(|s| Time::new(1, s.max(1) as i64)));
            durations.push(d.ok_or(FileError::NoDuration(k))?);
        }
        Ok(graph.instance_with_durations(&tasks, &durations)?)
    }
}

/// Statistics of one solver run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsFile {
    pub algo: String,
    pub outcome: String,
    pub soc: Option<Time>,
    pub expansions: u64,
    pub generations: u64,
    pub lowlevel_calls: u64,
    pub wall_ms: u64,
}

impl StatsFile {
    pub fn new(algo: impl Into<String>, run: &RunResult) -> StatsFile {
        StatsFile {
            algo: algo.into(),
            outcome: run.outcome.to_string(),
            soc: run.soc,
            expansions: run.expansions,
            generations: run.generations,
            lowlevel_calls: run.lowlevel_calls,
            wall_ms: run.wall.as_millis() as u64,
        }
    }
}
