use proptest::prelude::*;

use mapf_aa::conflict::{detect, validate, Violation};
use mapf_aa::constraint::{first_violation, forbids_own_action, gen_cma, gen_csa, Constraint, MdProbe};
use mapf_aa::highlevel::{solve, Budget, Mode, Outcome, Solver};
use mapf_aa::lowlevel::{sipp_plan, sipps_wc_plan_with, PlanContext, SoftTable, WcOptions};
use mapf_aa::model::{vertex_timing, Action, AgentId, Instance, InstanceBuilder, Path, PathBuilder, VertexId};
use mapf_aa::movingai::GridMap;
use mapf_aa::oracle::{single_agent_lattice, solve_joint, OracleLimits, OracleOutcome};
use mapf_aa::time::{Interval, IntervalSet, Rational, Time};

fn half(k: i64) -> Time {
    Time::new(k, 2)
}

fn interval() -> impl Strategy<Value = Interval> {
    (0i64..20, 1i64..10, any::<bool>(), any::<bool>(), prop::bool::weighted(0.1)).prop_map(|(lo, len, lc, hc, inf)| {
        let hi = if inf { Time::Infinity } else { half(lo + len) };
        Interval::new(half(lo), hi, lc, hc && !inf).unwrap()
    })
}

/// Sample points on a quarter grid, which sees every open or closed end.
fn probes() -> impl Iterator<Item = Time> {
    (0..=64).map(|k| Time::new(k, 4))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn interval_ops_agree_with_membership(a in interval(), b in interval()) {
        let inter = a.intersect(&b);
        let diff = a.subtract(&b);
        for x in probes() {
            let both = a.contains(x) && b.contains(x);
            prop_assert_eq!(inter.is_some_and(|i| i.contains(x)), both);
            prop_assert_eq!(diff.iter().any(|d| d.contains(x)), a.contains(x) && !b.contains(x));
        }
        prop_assert_eq!(a.overlaps(&b), inter.is_some());
    }

    #[test]
    fn interval_set_complement(parts in prop::collection::vec(interval(), 0..5)) {
        let mut set = IntervalSet::new();
        for p in &parts {
            set.insert(*p);
        }
        let comp = set.complement();
        for x in probes() {
            prop_assert_eq!(set.contains(x), parts.iter().any(|p| p.contains(x)));
            prop_assert_eq!(comp.contains(x), !set.contains(x));
        }
        for w in set.parts().windows(2) {
            prop_assert!(w[0].hi() <= w[1].lo());
            prop_assert!(!w[0].overlaps(&w[1]));
        }
    }
}

fn line(n: usize, durations: &[Time]) -> Instance {
    let mut b = InstanceBuilder::new();
    let vs: Vec<VertexId> = (0..n).map(|k| b.add_vertex(format!("{k}")).unwrap()).collect();
    for w in vs.windows(2) {
        b.add_edge(w[0], w[1]).unwrap();
    }
    for (k, &d) in durations.iter().enumerate() {
        let a = b.add_agent(vs[k], vs[n - 1 - k]).unwrap();
        b.set_uniform_duration(a, d);
    }
    b.build().unwrap()
}

/// A random walk on a line with random waits, ending in a stay.
fn walk(inst: &Instance, agent: AgentId, steps: &[(bool, i64)]) -> Path {
    let n = inst.num_vertices() as u32;
    let mut pb = PathBuilder::new(agent, inst.start(agent));
    for &(right, wait) in steps {
        let now = pb.now();
        pb = pb.wait_until(now + half(wait));
        let at = pb.at().0;
        let next = if right { (at + 1).min(n - 1) } else { at.saturating_sub(1) };
        if next != at {
            pb = pb.step(inst, VertexId(next));
        }
    }
    pb.finish()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn visits_cover_time_without_gaps(taus in prop::collection::vec(1i64..5, 1..3), steps in prop::collection::vec((any::<bool>(), 0i64..4), 0..8)) {
        let durations: Vec<Time> = taus.iter().map(|&t| half(t)).collect();
        let inst = line(6, &durations);
        let p = walk(&inst, AgentId(0), &steps);
        let occ = p.merged_occupancy();
        for x in probes() {
            let holders: Vec<_> = occ.iter().filter(|(_, i)| i.contains(x)).collect();
            // At most two vertices at once (mid move), at least one always.
            prop_assert!(!holders.is_empty() && holders.len() <= 2, "t={x} {holders:?}");
        }
        let last = occ.last().unwrap();
        prop_assert_eq!(last.1.hi(), Time::Infinity);
    }

    #[test]
    fn detection_matches_validation(taus in prop::collection::vec(1i64..5, 2..4), s in prop::collection::vec(prop::collection::vec((any::<bool>(), 0i64..4), 0..6), 4)) {
        let durations: Vec<Time> = taus.iter().map(|&t| half(t)).collect();
        let inst = line(7, &durations);
        let paths: Vec<Path> = inst.agents().map(|a| walk(&inst, a, &s[a.index()])).collect();
        let (first, pairs) = detect(&paths);
        let report = validate(&inst, &paths);
        let conflicts: Vec<&Violation> = report.conflicts().collect();
        prop_assert_eq!(first.is_some(), !conflicts.is_empty());
        prop_assert_eq!(pairs == 0, conflicts.is_empty());
    }

    #[test]
    fn branches_are_disjunctive_and_make_progress(taus in prop::collection::vec(1i64..5, 2..3), s in prop::collection::vec(prop::collection::vec((any::<bool>(), 0i64..3), 1..4), 2)) {
        let durations: Vec<Time> = taus.iter().map(|&t| half(t)).collect();
        let inst = line(4, &durations);
        let paths: Vec<Path> = inst.agents().map(|a| walk(&inst, a, &s[a.index()])).collect();
        let Some(c) = detect(&paths).0 else { return Ok(()) };
        let timing = vertex_timing(&inst);
        let probe = MdProbe::around(&inst, c.vertex, c.agent_i(), c.agent_j());
        for (bi, bj) in [gen_csa(&c), gen_cma(&c, &timing)] {
            prop_assert!(forbids_own_action(&bi, &c) && forbids_own_action(&bj, &c));
            prop_assert!(probe.counterexample(&bi, &bj).is_none(), "{c:?}");
        }
    }
}

fn random_problem() -> impl Strategy<Value = (Instance, Vec<Constraint>)> {
    let edges = prop::collection::vec((0usize..6, 0usize..6, 1i64..5), 0..5);
    let cons = prop::collection::vec((0u8..4, 0usize..6, 0usize..6, 0i64..14, 1i64..8), 0..=6);
    (3usize..7, edges, 0usize..6, cons, prop::collection::vec(1i64..5, 6)).prop_map(|(n, extra, goal, cons, tree)| {
        let mut b = InstanceBuilder::new();
        let vs: Vec<VertexId> = (0..n).map(|k| b.add_vertex(format!("{k}")).unwrap()).collect();
        let mut es = Vec::new();
        for k in 1..n {
            es.push((b.add_edge(vs[k], vs[(k * 7 + 3) % k]).unwrap(), half(tree[k])));
        }
        for (x, y, d) in extra {
            let (x, y) = (x % n, y % n);
            if x != y && b.edge(vs[x], vs[y]).is_none() {
                es.push((b.add_edge(vs[x], vs[y]).unwrap(), half(d)));
            }
        }
        let ag = b.add_agent(vs[0], vs[goal % n]).unwrap();
        for (e, d) in es {
            b.set_duration(ag, e, d);
        }
        let inst = b.build().unwrap();
        let cs = cons
            .into_iter()
            .map(|(kind, x, y, lo, len)| {
                let range = Interval::closed_open(half(lo), half(lo + len)).unwrap();
                let (x, y) = (vs[x % n], vs[y % n]);
                match kind {
                    0 => Constraint::Motion { agent: ag, from: Some(x), to: Some(y), range },
                    1 => Constraint::Motion { agent: ag, from: None, to: Some(y), range },
                    2 => Constraint::Wait { agent: ag, vertex: x, range },
                    _ => Constraint::Occupancy { agent: ag, vertex: x, at: half(lo + 1) },
                }
            })
            .collect();
        (inst, cs)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn sipp_is_optimal_on_the_lattice((inst, cs) in random_problem()) {
        let ag = AgentId(0);
        let p = sipp_plan(&inst, ag, &cs);
        let lattice = single_agent_lattice(&inst, ag, &cs, Rational::new(1, 4), 400);
        prop_assert_eq!(p.as_ref().map(Path::cost), lattice);
        if let Some(p) = p {
            prop_assert!(first_violation(&p, &cs).is_none());
        }
    }

    #[test]
    fn dominance_pruning_keeps_cost((inst, cs) in random_problem(), soft in prop::collection::vec((0usize..6, 0i64..12, 1i64..6), 0..4)) {
        let ag = AgentId(0);
        let mut table = SoftTable::new();
        for (v, lo, len) in soft {
            let v = VertexId((v % inst.num_vertices()) as u32);
            table.add(v, Interval::closed(half(lo), half(lo + len)).unwrap());
        }
        let ctx = PlanContext::new(&inst);
        let on = sipps_wc_plan_with(&ctx, ag, &cs, &table, WcOptions { prune_dominated: true });
        let off = sipps_wc_plan_with(&ctx, ag, &cs, &table, WcOptions { prune_dominated: false });
        let cost = |p: &Option<mapf_aa::lowlevel::Plan>| p.as_ref().map(|p| p.path.cost());
        prop_assert_eq!(cost(&on), cost(&off));
        prop_assert_eq!(cost(&on), sipp_plan(&inst, ag, &cs).map(|p| p.cost()));
        if let (Some(a), Some(b)) = (on, off) {
            prop_assert_eq!(a.soft_conflicts, b.soft_conflicts);
        }
    }
}

fn grid_instance(seed: u64, n: usize) -> Instance {
    let entry = mapf_aa::bench::MapEntry { name: "g".into(), map: GridMap::open(5, 5), scen: None };
    mapf_aa::bench::scenario_for(&entry, n, seed, 3, None).unwrap().instance(&entry.map.graph()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn children_never_get_cheaper(seed in 0u64..1000, n in 2usize..5) {
        let inst = grid_instance(seed, n);
        let mut solver = Solver::new(&inst, Mode::Csa);
        let mut frontier = vec![solver.root().unwrap()];
        for _ in 0..6 {
            let Some(node) = frontier.pop() else { break };
            for child in solver.expand(&node) {
                prop_assert!(child.soc >= node.soc);
                prop_assert_eq!(child.depth, node.depth + 1);
                frontier.push(child);
            }
        }
    }

    #[test]
    fn modes_agree_with_the_oracle(seed in 0u64..1000, n in 2usize..4) {
        let inst = grid_instance(seed, n);
        let oracle = solve_joint(&inst, OracleLimits::default());
        prop_assume!(oracle.outcome == OracleOutcome::Solved);
        for mode in Mode::ALL {
            let r = solve(&inst, mode, Budget::nodes(5_000));
            prop_assert_eq!(r.outcome, Outcome::Solved);
            prop_assert_eq!(r.soc, oracle.soc);
            prop_assert!(validate(&inst, r.paths.as_ref().unwrap()).is_valid());
        }
    }
}

#[test]
fn late_occupancy_at_goal_delays_arrival() {
    let mut b = InstanceBuilder::new();
    let [x, y, z] = ["x", "y", "z"].map(|l| b.add_vertex(l).unwrap());
    b.add_edge(x, y).unwrap();
    b.add_edge(y, z).unwrap();
    let a = b.add_agent(x, z).unwrap();
    b.set_uniform_duration(a, Time::from_int(1));
    let inst = b.build().unwrap();
    // The final stay would cover 50, so the agent waits at y and enters z
    // over [50, 51].
    let cs = [Constraint::Occupancy { agent: a, vertex: z, at: Time::from_int(50) }];
    let p = sipp_plan(&inst, a, &cs).unwrap();
    assert_eq!(p.cost(), Time::from_int(51));
    assert_eq!(single_agent_lattice(&inst, a, &cs, Rational::new(1, 1), 200), Some(Time::from_int(51)));
    let early = Action::travel(a, y, z, Time::from_int(2), Time::from_int(1));
    assert!(!cs[0].forbids(&early));
    assert!(first_violation(&p, &cs).is_none());
}
