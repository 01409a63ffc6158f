use mapf_aa_web::{root_branches_json, safe_intervals_json, solve_json};
use serde_json::{json, Value};

const MAP: &str = "type octile\nheight 4\nwidth 4\nmap\n....\n.@@.\n....\n....\n";

fn call(f: fn(&str) -> Result<String, String>, req: Value) -> Value {
    serde_json::from_str(&f(&req.to_string()).unwrap()).unwrap()
}

#[test]
fn modes_report_the_same_cost() {
    let soc = |mode: &str| {
        let v = call(solve_json, json!({ "map": MAP, "agents": 3, "seed": 2, "max_speed": 3, "mode": mode }));
        assert_eq!(v["stats"]["outcome"], "solved", "{mode}: {v}");
        assert_eq!(v["solution"]["agents"].as_array().unwrap().len(), 3);
        v["solution"]["soc"].clone()
    };
    let reference = soc("oracle");
    for mode in ["csa", "cma", "cmas"] {
        assert_eq!(soc(mode), reference, "{mode}");
    }
}

#[test]
fn bad_requests_are_errors() {
    assert!(solve_json("{").is_err());
    assert!(solve_json(&json!({ "map": MAP, "agents": 2, "mode": "dfs" }).to_string()).is_err());
    assert!(solve_json(&json!({ "map": "nonsense", "agents": 2 }).to_string()).is_err());
    let req = json!({ "map": MAP, "agents": 2, "agent": 5 });
    assert!(safe_intervals_json(&req.to_string()).is_err());
    let req = json!({ "map": MAP, "agents": 2, "agent": 0,
        "constraints": [{ "type": "wait", "vertex": "1,1", "range": "[0,1]" }] });
    assert!(safe_intervals_json(&req.to_string()).unwrap_err().contains("1,1"));
}

#[test]
fn wait_constraint_splits_safe_intervals() {
    let free = call(safe_intervals_json, json!({ "map": MAP, "agents": 1, "agent": 0 }));
    // Only constrained vertices are listed.
    assert_eq!(free["safe_intervals"], json!({}));

    let req = json!({ "map": MAP, "agents": 1, "agent": 0,
        "constraints": [{ "type": "wait", "vertex": "0,0", "range": "[2,5]" }] });
    let v = call(safe_intervals_json, req);
    assert_eq!(v["safe_intervals"]["0,0"], json!(["[0, 2)", "(5, inf)"]), "{v}");
}

#[test]
fn root_branches_describe_both_strategies() {
    let mut found = false;
    for seed in 0..20 {
        let v = call(root_branches_json, json!({ "map": MAP, "agents": 4, "seed": seed, "max_speed": 4 }));
        if v["conflict"].is_null() {
            continue;
        }
        found = true;
        assert!(["in-in", "out-in", "wait-in"].contains(&v["conflict"]["kind"].as_str().unwrap()));
        for strategy in ["csa", "cma"] {
            let pair = v[strategy].as_array().unwrap();
            assert_eq!(pair.len(), 2);
            assert_ne!(pair[0]["agent"], pair[1]["agent"]);
            assert!(pair.iter().all(|b| !b["constraints"].as_array().unwrap().is_empty()));
        }
    }
    assert!(found, "no seed produced a root conflict");
}
