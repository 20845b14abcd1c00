use std::collections::VecDeque;

use super::{Flow, Init, Instantaneous, Stochastic, Tdsha};

/// Restricts `t` to the modes reachable from the initial mode along
/// instantaneous and stochastic edges, ignoring guards. Surviving modes keep
/// their relative order.
pub fn prune_unreachable(t: &Tdsha) -> Tdsha {
    let n = t.modes.len();
    let mut succ = vec![Vec::new(); n];
    for d in &t.instantaneous {
        succ[d.src].push(d.tgt);
    }
    for s in &t.stochastic {
        succ[s.src].push(s.tgt);
    }
    let mut reached = vec![false; n];
    reached[t.init.mode] = true;
    let mut queue = VecDeque::from([t.init.mode]);
    while let Some(q) = queue.pop_front() {
        for &r in &succ[q] {
            if !reached[r] {
                reached[r] = true;
                queue.push_back(r);
            }
        }
    }

    let mut index = vec![usize::MAX; n];
    let mut modes = Vec::new();
    for (q, label) in t.modes.iter().enumerate() {
        if reached[q] {
            index[q] = modes.len();
            modes.push(label.clone());
        }
    }
    // an edge from a reachable mode always ends in a reachable mode
    Tdsha {
        modes,
        variables: t.variables.clone(),
        flows: t
            .flows
            .iter()
            .filter(|f| reached[f.mode])
            .map(|f| Flow {
                mode: index[f.mode],
                ..f.clone()
            })
            .collect(),
        instantaneous: t
            .instantaneous
            .iter()
            .filter(|d| reached[d.src])
            .map(|d| Instantaneous {
                src: index[d.src],
                tgt: index[d.tgt],
                ..d.clone()
            })
            .collect(),
        stochastic: t
            .stochastic
            .iter()
            .filter(|s| reached[s.src])
            .map(|s| Stochastic {
                src: index[s.src],
                tgt: index[s.tgt],
                ..s.clone()
            })
            .collect(),
        events_d: t.events_d.clone(),
        events_s: t.events_s.clone(),
        init: Init {
            mode: index[t.init.mode],
            point: t.init.point.clone(),
        },
    }
}
