//! Scenario generation and benchmark sweeps.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflict::validate;
use crate::highlevel::{solve, Budget, Mode, Outcome};
use crate::model::{Instance, ModelError, Path};
use crate::movingai::{Cell, GridGraph, GridMap, ScenTask};
use crate::oracle::{solve_joint, OracleLimits, OracleOutcome};
use crate::time::Time;

pub const MAX_SPEED: u32 = 20;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("at least one agent is required")]
    NoAgents,
    #[error("speed bound must be in 1..={MAX_SPEED}, got {0}")]
    SpeedBound(u32),
    #[error("map {map} has room for {available} agents, {requested} requested")]
    TooManyAgents { map: String, available: usize, requested: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Solver selected for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Search(Mode),
    Oracle,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algo::Search(m) => write!(f, "{m}"),
            Algo::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("oracle") {
            Ok(Algo::Oracle)
        } else {
            s.parse().map(Algo::Search)
        }
    }
}

/// Speeds drawn uniformly from `1..=20`.
pub fn gen_speeds(n: usize, seed: u64) -> Result<Vec<u32>, BenchError> {
    gen_speeds_up_to(n, seed, MAX_SPEED)
}

/// Speeds drawn uniformly from `1..=max`.
pub fn gen_speeds_up_to(n: usize, seed: u64, max: u32) -> Result<Vec<u32>, BenchError> {
    if n == 0 {
        return Err(BenchError::NoAgents);
    }
    if !(1..=MAX_SPEED).contains(&max) {
        return Err(BenchError::SpeedBound(max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| rng.gen_range(1..=max)).collect())
}

fn components(graph: &GridGraph, map: &GridMap) -> Vec<usize> {
    let n = graph.num_vertices();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let (x, y) = graph.cell(crate::model::VertexId(u as u32));
            let around = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
            for c in around {
                if !map.passable(c) {
                    continue;
                }
                let w = graph.vertex(c).unwrap().index();
                if label[w] == usize::MAX {
                    label[w] = next;
                    queue.push_back(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Distinct random starts and distinct random goals, each goal reachable
/// from its start and different from it.
pub fn random_tasks(map: &GridMap, n: usize, seed: u64) -> Result<Vec<(Cell, Cell)>, BenchError> {
    if n == 0 {
        return Err(BenchError::NoAgents);
    }
    let graph = map.graph();
    let comp = components(&graph, map);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut starts: Vec<usize> = (0..graph.num_vertices()).collect();
    starts.shuffle(&mut rng);
    let mut goals = starts.clone();
    goals.shuffle(&mut rng);
    let mut used = vec![false; graph.num_vertices()];
    let mut out = Vec::with_capacity(n);
    for &s in &starts {
        if out.len() == n {
            break;
        }
        let Some(pos) = goals.iter().position(|&g| g != s && !used[g] && comp[g] == comp[s]) else {
            continue;
        };
        let g = goals.remove(pos);
        used[g] = true;
        let cell = |v: usize| graph.cell(crate::model::VertexId(v as u32));
        out.push((cell(s), cell(g)));
    }
    if out.len() < n {
        return Err(BenchError::TooManyAgents { map: "grid".into(), available: out.len(), requested: n });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub start: Cell,
    pub goal: Cell,
    pub speed: u32,
}

/// Agents with tasks and integer speeds on a named grid map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub map: String,
    pub seed: u64,
    pub agents: Vec<AgentRecord>,
}

impl Scenario {
    pub fn tasks(&self) -> Vec<(Cell, Cell)> {
        self.agents.iter().map(|a| (a.start, a.goal)).collect()
    }

    pub fn speeds(&self) -> Vec<u32> {
        self.agents.iter().map(|a| a.speed).collect()
    }

    /// Each agent crosses every unit edge in `1 / speed`.
    pub fn instance(&self, graph: &GridGraph) -> Result<Instance, ModelError> {
        graph.instance(&self.tasks(), &self.speeds())
    }
}

/// A map with an optional list of scenario tasks.
#[derive(Debug, Clone)]
pub struct MapEntry {
    pub name: String,
    pub map: GridMap,
    pub scen: Option<Vec<ScenTask>>,
}

/// Tasks for `n` agents: the first `n` scenario rows (optionally shuffled
/// first), or random tasks when there is no scenario.
pub fn select_tasks(entry: &MapEntry, n: usize, seed: u64, shuffle: Option<u64>) -> Result<Vec<(Cell, Cell)>, BenchError> {
    match &entry.scen {
        Some(rows) => {
            let mut rows: Vec<(Cell, Cell)> = rows.iter().map(|r| (r.start, r.goal)).collect();
            if let Some(s) = shuffle {
                rows.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
            }
            if rows.len() < n {
                return Err(BenchError::TooManyAgents { map: entry.name.clone(), available: rows.len(), requested: n });
            }
            rows.truncate(n);
            Ok(rows)
        }
        None => random_tasks(&entry.map, n, seed).map_err(|e| match e {
            BenchError::TooManyAgents { available, requested, .. } => {
                BenchError::TooManyAgents { map: entry.name.clone(), available, requested }
            }
            other => other,
        }),
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub maps: Vec<MapEntry>,
    pub agents: Vec<usize>,
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
    pub budget: Budget,
    /// Speeds are drawn from `1..=max_speed`.
    pub max_speed: u32,
    pub shuffle_tasks: Option<u64>,
    /// When false, `wall_ms` is left empty so that reruns are byte-identical.
    pub record_timing: bool,
    pub threads: Option<usize>,
}

impl BenchConfig {
    pub fn new(maps: Vec<MapEntry>, agents: Vec<usize>, algos: Vec<Algo>, seeds: u64) -> Self {
        BenchConfig {
            maps,
            agents,
            algos,
            seeds: (0..seeds).collect(),
            budget: Budget::time(Duration::from_secs(30)),
            max_speed: MAX_SPEED,
            shuffle_tasks: None,
            record_timing: true,
            threads: None,
        }
    }
}

/// One row of the runs table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub map: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub mode: String,
    pub seed: u64,
    pub outcome: String,
    pub soc: Option<Time>,
    pub expansions: u64,
    pub lowlevel_calls: u64,
    pub wall_ms: Option<u64>,
}

impl RunRecord {
    pub fn solved(&self) -> bool {
        self.outcome == "solved"
    }
}

/// Result of a single solver run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: &'static str,
    pub paths: Option<Vec<Path>>,
    pub soc: Option<Time>,
    pub expansions: u64,
    pub generations: u64,
    pub lowlevel_calls: u64,
    pub wall: Duration,
}

/// Runs one solver and checks any solution it returns.
pub fn run_one(inst: &Instance, algo: Algo, budget: Budget) -> RunResult {
    let mut r = match algo {
        Algo::Search(mode) => {
            let r = solve(inst, mode, budget);
            RunResult {
                outcome: r.outcome.name(),
                paths: r.paths,
                soc: r.soc,
                expansions: r.stats.expansions,
                generations: r.stats.generations,
                lowlevel_calls: r.stats.lowlevel_calls,
                wall: r.stats.wall,
            }
        }
        Algo::Oracle => {
            let r = solve_joint(inst, OracleLimits { horizon_steps: None, time_limit: budget.time_limit });
            let outcome = match r.outcome {
                OracleOutcome::Solved => Outcome::Solved.name(),
                OracleOutcome::Unsolvable => Outcome::Unsolvable.name(),
                OracleOutcome::UnsolvableWithinHorizon => "horizon",
                OracleOutcome::Timeout => Outcome::Timeout.name(),
            };
            RunResult { outcome, paths: r.paths, soc: r.soc, expansions: r.expanded, generations: r.expanded, lowlevel_calls: 0, wall: r.wall }
        }
    };
    if let Some(paths) = &r.paths {
        if !validate(inst, paths).is_valid() {
            r.outcome = "invalid";
        }
    }
    r
}

struct Job<'a> {
    entry: &'a MapEntry,
    graph: &'a GridGraph,
    n: usize,
    seed: u64,
    algo: Algo,
}

/// Builds the scenario of one `(map, N, seed)` cell of the sweep.
pub fn scenario_for(entry: &MapEntry, n: usize, seed: u64, max_speed: u32, shuffle: Option<u64>) -> Result<Scenario, BenchError> {
    let tasks = select_tasks(entry, n, seed, shuffle)?;
    let speeds = gen_speeds_up_to(n, seed, max_speed)?;
    Ok(Scenario {
        map: entry.name.clone(),
        seed,
        agents: tasks.into_iter().zip(speeds).map(|((start, goal), speed)| AgentRecord { start, goal, speed }).collect(),
    })
}

/// Runs every `(map, N, seed, algo)` combination. Rows come back in that
/// order whatever the thread count.
pub fn run_bench(cfg: &BenchConfig) -> Vec<RunRecord> {
    let graphs: Vec<GridGraph> = cfg.maps.iter().map(|m| m.map.graph()).collect();
    let mut jobs = Vec::new();
    for (entry, graph) in cfg.maps.iter().zip(&graphs) {
        for &n in &cfg.agents {
            for &seed in &cfg.seeds {
                for &algo in &cfg.algos {
                    jobs.push(Job { entry, graph, n, seed, algo });
                }
            }
        }
    }
    let run = |job: &Job<'_>| -> RunRecord {
        let mut rec = RunRecord {
            map: job.entry.name.clone(),
            n: job.n,
            mode: job.algo.to_string(),
            seed: job.seed,
            outcome: "error".into(),
            soc: None,
            expansions: 0,
            lowlevel_calls: 0,
            wall_ms: None,
        };
        let inst = scenario_for(job.entry, job.n, job.seed, cfg.max_speed, cfg.shuffle_tasks)
            .and_then(|s| s.instance(job.graph).map_err(BenchError::from));
        match inst {
            Err(e) => log::warn!("{} N={} seed={}: {e}", job.entry.name, job.n, job.seed),
            Ok(inst) => {
                let r = run_one(&inst, job.algo, cfg.budget);
                rec.outcome = r.outcome.to_string();
                rec.soc = r.soc.filter(|_| r.outcome == "solved");
                rec.expansions = r.expansions;
                rec.lowlevel_calls = r.lowlevel_calls;
                rec.wall_ms = cfg.record_timing.then_some(r.wall.as_millis() as u64);
            }
        }
        rec
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(|| jobs.par_iter().map(run).collect()),
        None => jobs.par_iter().map(run).collect(),
    }
}

/// Per `(map, N, mode)` success rate and expansion statistics over the
/// instances that every mode solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub map: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub mode: String,
    pub runs: usize,
    pub solved: usize,
    pub success_rate: f64,
    pub common_solved: usize,
    pub min_expansions: Option<u64>,
    pub avg_expansions: Option<f64>,
    pub max_expansions: Option<u64>,
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.map.clone(), r.n)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((map, n), rows) in groups {
        let modes: Vec<String> = {
            let mut seen = Vec::new();
            for r in &rows {
                if !seen.contains(&r.mode) {
                    seen.push(r.mode.clone());
                }
            }
            seen
        };
        let seeds: BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
        let common: BTreeSet<u64> = seeds
            .into_iter()
            .filter(|s| modes.iter().all(|m| rows.iter().any(|r| r.seed == *s && &r.mode == m && r.solved())))
            .collect();
        for mode in modes {
            let mine: Vec<&&RunRecord> = rows.iter().filter(|r| r.mode == mode).collect();
            let solved = mine.iter().filter(|r| r.solved()).count();
            let exp: Vec<u64> = mine.iter().filter(|r| common.contains(&r.seed)).map(|r| r.expansions).collect();
            out.push(SummaryRow {
                map: map.clone(),
                n,
                mode,
                runs: mine.len(),
                solved,
                success_rate: if mine.is_empty() { 0.0 } else { solved as f64 / mine.len() as f64 },
                common_solved: exp.len(),
                min_expansions: exp.iter().min().copied(),
                avg_expansions: (!exp.is_empty()).then(|| exp.iter().sum::<u64>() as f64 / exp.len() as f64),
                max_expansions: exp.iter().max().copied(),
            });
        }
    }
    out
}

pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Header written even when there are no rows.
pub const RUNS_HEADER: &str = "map,N,mode,seed,outcome,soc,expansions,lowlevel_calls,wall_ms";

pub fn runs_csv(records: &[RunRecord]) -> Result<String, BenchError> {
    if records.is_empty() {
        return Ok(format!("{RUNS_HEADER}\n"));
    }
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

pub fn read_runs_csv(text: &str) -> Result<Vec<RunRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}
