//! Small hand-built instances used by tests and demos.

use crate::model::{Instance, InstanceBuilder};
use crate::time::Time;

/// Five vertices `A..E` with edges `C-D`, `D-A`, `D-E`, `E-B`.
/// Agent 0 goes `E -> B` at duration 1, agent 1 stays on `D` with
/// duration 2, agent 2 goes `C -> A` at duration 3. The optimal sum of
/// costs is 21.
pub fn toy() -> Instance {
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
