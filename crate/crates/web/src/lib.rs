//! WebAssembly entry points. Every function takes and returns JSON text so
//! the page needs no bindings beyond strings.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use mapf_aa::bench::{run_one, scenario_for, Algo, MapEntry, Scenario};
use mapf_aa::constraint::{gen_csa, Branch, Constraint};
use mapf_aa::highlevel::{Budget, Mode, Solver};
use mapf_aa::io::{SolutionFile, StatsFile};
use mapf_aa::lowlevel::build_safe_intervals;
use mapf_aa::model::{AgentId, Instance, VertexId};
use mapf_aa::movingai::parse_map;
use mapf_aa::time::{Interval, Time};

/// Grid problem shared by every call.
#[derive(Debug, Clone, Deserialize)]
pub struct Problem {
    pub map: String,
    pub agents: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_speed")]
    pub max_speed: u32,
}

fn default_speed() -> u32 {
    mapf_aa::bench::MAX_SPEED
}

fn load(p: &Problem) -> Result<(Instance, Scenario), String> {
    let map = parse_map(&p.map).map_err(|e| e.to_string())?;
    let entry = MapEntry { name: "web".into(), map, scen: None };
    let scenario = scenario_for(&entry, p.agents, p.seed, p.max_speed, None).map_err(|e| e.to_string())?;
    let inst = scenario.instance(&entry.map.graph()).map_err(|e| e.to_string())?;
    Ok((inst, scenario))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn to_text<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Deserialize)]
pub struct SolveRequest {
    #[serde(flatten)]
    pub problem: Problem,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_nodes")]
    pub node_limit: u64,
}

fn default_mode() -> String {
    "cmas".into()
}

fn default_nodes() -> u64 {
    20_000
}

pub fn solve_json(request: &str) -> Result<String, String> {
    let req: SolveRequest = parse(request)?;
    let algo: Algo = req.mode.parse()?;
    let (inst, scenario) = load(&req.problem)?;
    let run = run_one(&inst, algo, Budget::nodes(req.node_limit));
    let solution = run
        .paths
        .as_ref()
        .filter(|_| run.outcome == "solved")
        .map(|p| SolutionFile::new(&inst, p, None, Some(&scenario.speeds())));
    to_text(&json!({ "stats": StatsFile::new(algo.to_string(), &run), "solution": solution }))
}

/// Constraint with vertices named by their `x,y` label.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintSpec {
    Motion { from: Option<String>, to: Option<String>, range: Interval },
    Wait { vertex: String, range: Interval },
    Occupancy { vertex: String, at: Time },
}

#[derive(Debug, Clone, Deserialize)]
pub struct IntervalRequest {
    #[serde(flatten)]
    pub problem: Problem,
    pub agent: u32,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
}

fn resolve(inst: &Instance, agent: AgentId, c: &ConstraintSpec) -> Result<Constraint, String> {
    let v = |l: &str| inst.vertex(l).ok_or_else(|| format!("no vertex {l:?}"));
    let opt = |l: &Option<String>| l.as_deref().map(v).transpose();
    Ok(match c {
        ConstraintSpec::Motion { from, to, range } => Constraint::Motion { agent, from: opt(from)?, to: opt(to)?, range: *range },
        ConstraintSpec::Wait { vertex, range } => Constraint::Wait { agent, vertex: v(vertex)?, range: *range },
        ConstraintSpec::Occupancy { vertex, at } => Constraint::Occupancy { agent, vertex: v(vertex)?, at: *at },
    })
}

pub fn safe_intervals_json(request: &str) -> Result<String, String> {
    let req: IntervalRequest = parse(request)?;
    let (inst, _) = load(&req.problem)?;
    if req.agent as usize >= inst.num_agents() {
        return Err(format!("agent {} out of range", req.agent));
    }
    let agent = AgentId(req.agent);
    let cs = req.constraints.iter().map(|c| resolve(&inst, agent, c)).collect::<Result<Vec<_>, _>>()?;
    to_text(&build_safe_intervals(&inst, agent, &cs).dump(&inst))
}

fn describe(inst: &Instance, c: &Constraint) -> String {
    let name = |v: VertexId| inst.label(v).to_string();
    let end = |v: Option<VertexId>| v.map_or("*".to_string(), name);
    match *c {
        Constraint::Motion { agent, from, to, range } => format!("motion(agent {agent}, {}->{}, {range})", end(from), end(to)),
        Constraint::Wait { agent, vertex, range } => format!("wait(agent {agent}, {}, {range})", name(vertex)),
        Constraint::Occupancy { agent, vertex, at } => format!("occupancy(agent {agent}, {}, {at})", name(vertex)),
    }
}

fn branch_json(inst: &Instance, b: &Branch) -> Value {
    json!({
        "agent": b.agent,
        "strategy": b.strategy,
        "constraints": b.constraints.iter().map(|c| describe(inst, c)).collect::<Vec<_>>(),
    })
}

/// Earliest conflict of the unconstrained plans and how each strategy
/// would split it.
pub fn root_branches_json(request: &str) -> Result<String, String> {
    let problem: Problem = parse(request)?;
    let (inst, _) = load(&problem)?;
    let mut solver = Solver::new(&inst, Mode::Cma);
    let root = solver.root().ok_or("some agent cannot reach its goal")?;
    let Some(c) = root.conflict else {
        return to_text(&json!({ "conflict": null, "soc": root.soc }));
    };
    let action = |a: &mapf_aa::model::Action| {
        json!({
            "agent": a.agent,
            "from": inst.label(a.from),
            "to": inst.label(a.to),
            "start": a.start,
            "end": a.end,
        })
    };
    let (ci, cj) = gen_csa(&c);
    let (mi, mj) = solver.branches(&c);
    to_text(&json!({
        "soc": root.soc,
        "conflicting_pairs": root.conflicting_pairs,
        "conflict": {
            "kind": c.kind.name(),
            "vertex": inst.label(c.vertex),
            "time": c.time,
            "i": action(&c.action_i),
            "j": action(&c.action_j),
        },
        "csa": [branch_json(&inst, &ci), branch_json(&inst, &cj)],
        "cma": [branch_json(&inst, &mi), branch_json(&inst, &mj)],
    }))
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Solves a grid problem; see [`SolveRequest`] for the fields.
#[wasm_bindgen]
pub fn solve(request: &str) -> Result<String, JsError> {
    js(solve_json(request))
}

/// Safe intervals of one agent under label-based constraints.
#[wasm_bindgen]
pub fn safe_intervals(request: &str) -> Result<String, JsError> {
    js(safe_intervals_json(request))
}

#[wasm_bindgen]
pub fn root_branches(request: &str) -> Result<String, JsError> {
    js(root_branches_json(request))
}
