use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use mapf_aa::bench::{self, Algo, BenchConfig, MapEntry, Scenario};
use mapf_aa::conflict::validate;
use mapf_aa::constraint::subdivide_edges;
use mapf_aa::highlevel::Budget;
use mapf_aa::io::{SolutionFile, StatsFile};
use mapf_aa::model::sum_of_costs;
use mapf_aa::movingai::{parse_map, parse_scen, GridMap};

#[derive(Parser)]
#[command(name = "mapf-aa", version, about = "Optimal MAPF with asynchronous actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Check a solution file; prints a JSON report and exits 0 iff it is empty.
    Validate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Same as `solve --algo oracle`.
    Oracle(ProblemArgs),
    /// Sweep maps, agent counts, algorithms and seeds.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    map: PathBuf,
    /// MovingAI scenario; random tasks are drawn when omitted.
    #[arg(long)]
    scen: Option<PathBuf>,
    #[arg(long)]
    agents: usize,
    /// Seed for speeds and, without a scenario, for tasks.
    #[arg(long, default_value_t = 0)]
    speeds_seed: u64,
    /// File of whitespace or comma separated integer speeds, one per agent.
    #[arg(long)]
    speeds: Option<PathBuf>,
    #[arg(long, default_value_t = bench::MAX_SPEED)]
    max_speed: u32,
    /// Shuffle scenario rows with this seed before taking the first N.
    #[arg(long)]
    shuffle_tasks: Option<u64>,
    /// Seconds.
    #[arg(long, default_value_t = 30.0)]
    time_limit: f64,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "cmas")]
    algo: Algo,
    /// Split long edges into unit pieces before solving.
    #[arg(long)]
    subdivide: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    maps: Vec<PathBuf>,
    /// One scenario per map, in the same order.
    #[arg(long, value_delimiter = ',')]
    scens: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    agents: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "csa,cma,cmas")]
    algos: Vec<Algo>,
    /// Number of seeds, run as 0..K.
    #[arg(long, default_value_t = 25)]
    seeds: u64,
    #[arg(long, default_value_t = 30.0)]
    time_limit: f64,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long, default_value_t = bench::MAX_SPEED)]
    max_speed: u32,
    #[arg(long)]
    shuffle_tasks: Option<u64>,
    /// Leave wall_ms empty so reruns produce identical files.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn read(path: &FsPath) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn map_name(path: &FsPath) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_entry(map: &FsPath, scen: Option<&FsPath>) -> Result<MapEntry> {
    let grid: GridMap = parse_map(&read(map)?).with_context(|| format!("parsing {}", map.display()))?;
    let scen = match scen {
        Some(p) => Some(parse_scen(&read(p)?, &grid).with_context(|| format!("parsing {}", p.display()))?),
        None => None,
    };
    Ok(MapEntry { name: map_name(map), map: grid, scen })
}

fn budget(time_limit: f64, node_limit: Option<u64>) -> Result<Budget> {
    if !(time_limit > 0.0) {
        bail!("time limit must be positive");
    }
    Ok(Budget { time_limit: Some(Duration::from_secs_f64(time_limit)), node_limit })
}

fn parse_speeds(text: &str) -> Result<Vec<u32>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u32>().with_context(|| format!("bad speed {s:?}")))
        .collect()
}

fn run_solve(p: &ProblemArgs, algo: Algo, subdivide: bool) -> Result<ExitCode> {
    let entry = load_entry(&p.map, p.scen.as_deref())?;
    let mut scenario: Scenario = bench::scenario_for(&entry, p.agents, p.speeds_seed, p.max_speed, p.shuffle_tasks)?;
    if let Some(file) = &p.speeds {
        let speeds = parse_speeds(&read(file)?)?;
        if speeds.len() != p.agents {
            bail!("{} lists {} speeds for {} agents", file.display(), speeds.len(), p.agents);
        }
        if let Some(s) = speeds.iter().find(|s| !(1..=bench::MAX_SPEED).contains(*s)) {
            bail!("speed {s} outside 1..={}", bench::MAX_SPEED);
        }
        for (a, s) in scenario.agents.iter_mut().zip(speeds) {
            a.speed = s;
        }
    }
    let graph = entry.map.graph();
    let inst = scenario.instance(&graph)?;
    let budget = budget(p.time_limit, p.node_limit)?;
    info!("{} agents on {} ({} cells), algo {algo}", inst.num_agents(), entry.name, graph.num_vertices());

    let mut run = if subdivide && algo != Algo::Oracle {
        let sub = subdivide_edges(&inst)?;
        let mut run = bench::run_one(&sub.instance, algo, budget);
        if let Some(paths) = run.paths.take() {
            let lifted = sub.lift(&inst, &paths)?;
            run.soc = Some(sum_of_costs(&lifted));
            run.paths = Some(lifted);
        }
        run
    } else {
        bench::run_one(&inst, algo, budget)
    };
    if let Some(paths) = &run.paths {
        if !validate(&inst, paths).is_valid() {
            run.outcome = "invalid";
        }
    }

    let soc = run.soc.map_or_else(|| "-".to_string(), |s| s.to_string());
    println!("{} soc={} expansions={} lowlevel_calls={}", run.outcome, soc, run.expansions, run.lowlevel_calls);
    if let Some(path) = &p.stats {
        let stats = StatsFile::new(algo.to_string(), &run);
        fs::write(path, serde_json::to_string_pretty(&stats)? + "\n")?;
    }
    match (&p.out, &run.paths) {
        (Some(out), Some(paths)) if run.outcome == "solved" => {
            let file = SolutionFile::new(&inst, paths, Some(entry.name.clone()), Some(&scenario.speeds()));
            fs::write(out, serde_json::to_string_pretty(&file)? + "\n")?;
        }
        _ => {}
    }
    Ok(if run.outcome == "solved" { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run_validate(map: &FsPath, solution: &FsPath) -> Result<ExitCode> {
    let grid = parse_map(&read(map)?).with_context(|| format!("parsing {}", map.display()))?;
    let file: SolutionFile =
        serde_json::from_str(&read(solution)?).with_context(|| format!("parsing {}", solution.display()))?;
    let inst = file.grid_instance(&grid.graph())?;
    let paths = file.paths(&inst)?;
    let report = validate(&inst, &paths);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run_bench(b: &BenchArgs) -> Result<ExitCode> {
    if !b.scens.is_empty() && b.scens.len() != b.maps.len() {
        bail!("--scens needs one entry per map");
    }
    let maps = b
        .maps
        .iter()
        .enumerate()
        .map(|(k, m)| load_entry(m, b.scens.get(k).map(PathBuf::as_path)))
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = BenchConfig::new(maps, b.agents.clone(), b.algos.clone(), b.seeds);
    cfg.budget = budget(b.time_limit, b.node_limit)?;
    cfg.max_speed = b.max_speed;
    cfg.shuffle_tasks = b.shuffle_tasks;
    cfg.record_timing = !b.no_timing;
    cfg.threads = b.threads;
    let records = bench::run_bench(&cfg);
    fs::write(&b.out, bench::runs_csv(&records)?).with_context(|| format!("writing {}", b.out.display()))?;
    if let Some(path) = &b.summary {
        let mut buf = Vec::new();
        bench::write_csv(&bench::summarize(&records), &mut buf)?;
        fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    let solved = records.iter().filter(|r| r.solved()).count();
    println!("{solved}/{} runs solved", records.len());
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Solve(a) => run_solve(&a.problem, a.algo, a.subdivide),
        Command::Oracle(p) => run_solve(&p, Algo::Oracle, false),
        Command::Validate { map, solution } => run_validate(&map, &solution),
        Command::Bench(b) => run_bench(&b),
    }
}
