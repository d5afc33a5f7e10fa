//! Seeded random instance generation for the cross-validation suites:
//! Wait-Only and Single-Wait-Only protocols, small counter systems, and
//! families of complete automata.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::protocol::Protocol;
use crate::reductions::Dfa;
use crate::vass::{LocId, Vass};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random Wait-Only protocol: states are split into senders and receivers
/// up front; the initial state is always a sender so that executions exist.
pub fn random_wait_only(r: &mut StdRng, max_states: usize, max_msgs: usize) -> Protocol {
    let ns = r.random_range(2..=max_states.max(2));
    let nm = r.random_range(1..=max_msgs.max(1));
    let states: Vec<String> = (0..ns).map(|i| format!("s{i}")).collect();
    let msgs: Vec<String> = (0..nm).map(|i| format!("m{i}")).collect();
    // state 0 is the action-state initial
    let waiting: Vec<bool> = (0..ns).map(|i| i != 0 && r.random_bool(0.5)).collect();
    let mut rows: Vec<(String, bool, String, String)> = Vec::new();
    for s in 0..ns {
        let out = r.random_range(0..=3);
        for _ in 0..out {
            let m = &msgs[r.random_range(0..nm)];
            let d = r.random_range(0..ns);
            let row = (states[s].clone(), !waiting[s], m.clone(), states[d].clone());
            if !rows.contains(&row) {
                rows.push(row);
            }
        }
    }
    // make sure every waiting state has at least one reception
    for s in 0..ns {
        if waiting[s] && !rows.iter().any(|(a, snd, _, _)| a == &states[s] && !snd) {
            let m = &msgs[r.random_range(0..nm)];
            let d = r.random_range(0..ns);
            rows.push((states[s].clone(), false, m.clone(), states[d].clone()));
        }
    }
    let refs: Vec<(&str, bool, &str, &str)> = rows
        .iter()
        .map(|(a, s, m, b)| (a.as_str(), *s, m.as_str(), b.as_str()))
        .collect();
    let state_refs: Vec<&str> = states.iter().map(|s| s.as_str()).collect();
    Protocol::from_parts("random", &states[0], &state_refs, &refs).expect("deduplicated rows")
}

/// Random Single-Wait-Only protocol: every waiting state gets exactly one
/// reception.
pub fn random_single_wait_only(r: &mut StdRng, max_states: usize, max_msgs: usize) -> Protocol {
    let ns = r.random_range(2..=max_states.max(2));
    let nm = r.random_range(1..=max_msgs.max(1));
    let states: Vec<String> = (0..ns).map(|i| format!("s{i}")).collect();
    let msgs: Vec<String> = (0..nm).map(|i| format!("m{i}")).collect();
    let waiting: Vec<bool> = (0..ns).map(|i| i != 0 && r.random_bool(0.5)).collect();
    let mut rows: Vec<(String, bool, String, String)> = Vec::new();
    for s in 0..ns {
        if waiting[s] {
            let m = &msgs[r.random_range(0..nm)];
            let d = r.random_range(0..ns);
            rows.push((states[s].clone(), false, m.clone(), states[d].clone()));
        } else {
            let out = r.random_range(0..=2);
            for _ in 0..out {
                let m = &msgs[r.random_range(0..nm)];
                let d = r.random_range(0..ns);
                let row = (states[s].clone(), true, m.clone(), states[d].clone());
                if !rows.contains(&row) {
                    rows.push(row);
                }
            }
        }
    }
    let refs: Vec<(&str, bool, &str, &str)> = rows
        .iter()
        .map(|(a, s, m, b)| (a.as_str(), *s, m.as_str(), b.as_str()))
        .collect();
    let state_refs: Vec<&str> = states.iter().map(|s| s.as_str()).collect();
    let p = Protocol::from_parts("randomswo", &states[0], &state_refs, &refs)
        .expect("deduplicated rows");
    debug_assert!(p.check_single_wait_only().0);
    p
}

/// Random counter system with unit-or-smaller updates and small size.
pub fn random_vass(r: &mut StdRng, max_locs: usize, max_counters: usize, max_delta: i64) -> Vass {
    let nl = r.random_range(1..=max_locs.max(1));
    let nc = r.random_range(1..=max_counters.max(1));
    let locs: Vec<String> = (0..nl).map(|i| format!("l{i}")).collect();
    let counters: Vec<String> = (0..nc).map(|i| format!("c{i}")).collect();
    let mut v = Vass::new("random", locs, counters, "l0");
    let nt = r.random_range(1..=(2 * nl + 2));
    for _ in 0..nt {
        let a = LocId(r.random_range(0..nl) as u32);
        let b = LocId(r.random_range(0..nl) as u32);
        let mut delta = Vec::new();
        for c in 0..nc {
            if r.random_bool(0.5) {
                let d = r.random_range(-max_delta..=max_delta);
                if d != 0 {
                    delta.push((c, d));
                }
            }
        }
        v.add_transition(a, delta, b);
    }
    v
}

/// Family of random complete automata over a shared alphabet.
pub fn random_dfa_family(
    r: &mut StdRng,
    count: usize,
    max_states: usize,
    alphabet_size: usize,
) -> Vec<Dfa> {
    let alphabet: Vec<String> = (0..alphabet_size).map(|i| format!("t{i}")).collect();
    (0..count)
        .map(|k| {
            let ns = r.random_range(1..=max_states.max(1));
            let states: Vec<String> = (0..ns).map(|i| format!("q{i}")).collect();
            let mut table = Vec::new();
            for s in 0..ns {
                for a in &alphabet {
                    let t = r.random_range(0..ns);
                    table.push((states[s].clone(), a.clone(), states[t].clone()));
                }
            }
            let accept = r.random_range(0..ns);
            Dfa::new(
                &format!("r{k}"),
                alphabet.clone(),
                states.clone(),
                &states[0],
                &states[accept],
                &table,
            )
            .expect("complete by construction")
        })
        .collect()
}
