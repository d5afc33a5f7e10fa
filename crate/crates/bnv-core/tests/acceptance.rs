//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; a failing criterion fails its test.

use std::collections::BTreeSet;

use bnv_core::explicit::{
    from_multiset, repcover_explicit, synchro_explicit, Bounds, MultisetConfig, RepcoverVerdict,
    SynchroVerdict,
};
use bnv_core::protocol::{fig1, Protocol, StateId, Transition};
use bnv_core::random::{
    random_dfa_family, random_single_wait_only, random_vass, random_wait_only, rng,
};
use bnv_core::reductions::{
    dfa_product_nonempty, gen_dfa_repcover_protocol, gen_dfa_swo_synchro_protocol,
    gen_minsky_protocol, parse_minsky,
};
use bnv_core::semantics::{
    broadcast_step, example2_trace, future_index_set, is_well_formed, validate_lasso,
    validate_trace, well_formize, well_formize_all, IndexedConfig, SemanticsKind, Step, Trace,
};
use bnv_core::solvers::{
    solve_repcover, solve_repcover_swo, solve_synchro, Answer, SolveCaps, Witness,
};
use bnv_core::summary::{
    apply_edge, check_implementation, check_representative, summary_successors,
    translate_execution_to_run, CoherentSet, ReprOutcome, SLoc, SimState, Summary, SummaryOutcome,
    SummarySystem, Variant, WitnessMap,
};
use bnv_core::vass::{
    bounded_reachability_sys, concrete_lasso, karp_miller_sys, lift, repeated_coverability_vass,
    run_length_bound, run_length_bound_log2, validate_self_covering, LocId, ReachCaps,
    RepcovCaps, RepcovOutcome, Vass, VassSys,
};
use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;

fn pass(line: &str) {
    println!("[PASS] {line}");
}

fn prepared_fig1() -> (Protocol, SummarySystem) {
    let (p, _) = fig1().normalize_self_loops().add_uncoverable_state();
    let q1 = p.state_by_name("q1").unwrap();
    let sys = SummarySystem::new(&p, Variant::Synchro { q_f: q1 }, false).unwrap();
    (p, sys)
}

fn q(p: &Protocol, n: &str) -> StateId {
    p.state_by_name(n).unwrap()
}

fn send(p: &Protocol, src: &str, msg: &str) -> Transition {
    p.transitions()
        .iter()
        .copied()
        .find(|t| t.op.is_send() && p.state_name(t.src) == src && p.msg_name(t.op.msg()) == msg)
        .unwrap()
}

#[test]
fn criterion_01_fig1_golden_suite() {
    let p = fig1();
    let cls = p.classify();
    let waiting: Vec<&str> = cls.waiting.iter().map(|&s| p.state_name(s)).collect();
    assert_eq!(waiting, vec!["q1", "q2", "q5", "q6", "q7"]);
    let recv: Vec<&str> = cls.receivable[q(&p, "q5").ix()]
        .iter()
        .map(|&m| p.msg_name(m))
        .collect();
    assert_eq!(recv, vec!["b", "c"]);

    // the five-step execution replays to the printed configurations
    let tr = example2_trace(&p);
    let configs = tr.configs(&p, SemanticsKind::Broadcast);
    let names = |i: usize| -> Vec<&str> {
        configs[i].states().iter().map(|&s| p.state_name(s)).collect()
    };
    assert_eq!(names(3), vec!["q5", "q2", "q_in"]);
    assert_eq!(names(5), vec!["q3", "q3", "q7"]);

    // the rewriting produces the printed execution verbatim
    let (pu, _) = p.add_uncoverable_state();
    let tr = example2_trace(&pu);
    let rho2 = well_formize(&pu, &tr, 2, 1, 2).unwrap();
    let got: Vec<Vec<String>> = rho2
        .configs(&pu, SemanticsKind::Broadcast)
        .iter()
        .map(|c| c.states().iter().map(|&s| pu.state_name(s).to_string()).collect())
        .collect();
    let expect = vec![
        vec!["q_in", "q_in", "q_in"],
        vec!["q1", "q_in", "q_in"],
        vec!["q1", "q1", "q_in"],
        vec!["q5", "q5", "q_in"],
        vec!["q3", "q3", "q_in"],
        vec!["q3", "q3", "q7"],
    ];
    assert_eq!(got, expect);
    pass("criterion 1: running-example golden suite (classification, replay, rewriting)");
}

#[test]
fn criterion_02_summary_golden_suite() {
    let (p, sys) = prepared_fig1();
    // the four summary-evolution facts
    let s0 = Summary::new([q(&p, "q1")], q(&p, "q3"), 1);
    let steps = summary_successors(&p, &s0, send(&p, "q_in", "a"));
    let prints: BTreeSet<BTreeSet<StateId>> = steps
        .iter()
        .filter_map(|s| match &s.outcome {
            SummaryOutcome::Plain(s2) => Some(s2.print.clone()),
            _ => None,
        })
        .collect();
    let set = |names: &[&str]| -> BTreeSet<StateId> { names.iter().map(|n| q(&p, n)).collect() };
    assert!(prints.contains(&set(&["q2"])));
    assert!(prints.contains(&set(&["q5"])));
    assert!(!prints.contains(&set(&["q2", "q5"])));
    let done = summary_successors(
        &p,
        &Summary::new([q(&p, "q2")], q(&p, "q3"), 1),
        send(&p, "q_in", "b"),
    );
    assert!(done.iter().any(|s| matches!(s.outcome, SummaryOutcome::Done)));
    let joined = summary_successors(
        &p,
        &Summary::new([q(&p, "q5")], q(&p, "q4"), 1),
        send(&p, "q_in", "b"),
    );
    let j = Summary::new([q(&p, "q6"), q(&p, "q7")], q(&p, "q4"), 1);
    assert!(joined.iter().any(|s| s.outcome == SummaryOutcome::Joined(j.clone())));

    // the printed machine locations with their counter updates
    let vals = lift(&vec![0; sys.counter_count()]);
    let single = CoherentSet::new([Summary::new([q(&p, "q2")], q(&p, "q3"), 1)]).unwrap();
    let d = send(&p, "q_in", "d");
    let x_qin = sys.x_action(q(&p, "q_in"));
    let edges = sys.edges_from(&SLoc::co(single.clone()), &vals);
    let has = |set2: &CoherentSet, delta: &mut Vec<(usize, i64)>| {
        delta.sort_by_key(|&(i, _)| i);
        let want = delta.clone();
        edges.iter().any(|e| {
            matches!(&e.meta, bnv_core::summary::EdgeInfo::Trans(te) if te.t == d)
                && matches!(&e.dst, SLoc::Co { set, .. } if set == set2)
                && e.delta == want
        })
    };
    let joined_loc =
        CoherentSet::new([Summary::new([q(&p, "q1"), q(&p, "q2")], q(&p, "q3"), 1)]).unwrap();
    assert!(has(&joined_loc, &mut vec![(x_qin, -1), (sys.x_pair(q(&p, "q3"), 1), 1)]));
    let fresh_q4 = CoherentSet::new([
        Summary::new([q(&p, "q2")], q(&p, "q3"), 1),
        Summary::new([q(&p, "q1")], q(&p, "q4"), 1),
    ])
    .unwrap();
    assert!(has(&fresh_q4, &mut vec![(x_qin, -1), (sys.x_pair(q(&p, "q4"), 1), 1)]));
    let fresh_q3 = CoherentSet::new([
        Summary::new([q(&p, "q2")], q(&p, "q3"), 1),
        Summary::new([q(&p, "q1")], q(&p, "q3"), 2),
    ])
    .unwrap();
    assert!(has(&fresh_q3, &mut vec![(x_qin, -1), (sys.x_pair(q(&p, "q3"), 2), 1)]));

    // deletion location and the transfer loop after it
    let three = CoherentSet::new([
        Summary::new([q(&p, "q2")], q(&p, "q3"), 1),
        Summary::new([q(&p, "q1")], q(&p, "q3"), 2),
        Summary::new([q(&p, "q1"), q(&p, "q5")], q(&p, "q4"), 1),
    ])
    .unwrap();
    let expect = CoherentSet::new([
        Summary::new([q(&p, "q1")], q(&p, "q3"), 2),
        Summary::new([q(&p, "q1"), q(&p, "q6"), q(&p, "q7")], q(&p, "q4"), 1),
    ])
    .unwrap();
    let b = send(&p, "q_in", "b");
    let mut want = vec![(x_qin, -1), (sys.x_pair(q(&p, "q4"), 1), 1)];
    want.sort_by_key(|&(i, _)| i);
    let found = sys
        .edges_from(&SLoc::co(three), &vals)
        .into_iter()
        .any(|e| {
            matches!(&e.meta, bnv_core::summary::EdgeInfo::Trans(te) if te.t == b)
                && matches!(&e.dst, SLoc::Co { set, .. } if *set == expect)
                && e.delta == want
        });
    assert!(found);
    let q3 = q(&p, "q3");
    let mut drain = vec![(sys.x_action(q3), 1), (sys.x_pair(q3, 1), -1)];
    drain.sort_by_key(|&(i, _)| i);
    let loop_found = sys
        .edges_from(&SLoc::co(expect.clone()), &vals)
        .into_iter()
        .any(|e| e.dst == SLoc::co(expect.clone()) && e.delta == drain);
    assert!(loop_found);

    // counter count identity
    let na = sys.cls.action.len();
    let nw = sys.cls.waiting.len();
    assert_eq!(sys.counter_count(), na * (nw + 2));
    pass("criterion 2: summary golden suite (evolution facts, printed locations, transfers)");
}

/// Drives the simulation state along every machine edge reachable within
/// the given depth, checking the implementation conditions after each step.
fn simulate_depth(sys: &SummarySystem, n: usize, depth: usize) -> usize {
    let p = &sys.protocol;
    let mut st = SimState {
        set: CoherentSet::empty(),
        vals: vec![0; sys.counter_count()],
        config: IndexedConfig::grounded(p, n),
        map: WitnessMap::new(vec![sys.x_action(p.initial); n]),
        witness: None,
    };
    st.vals[sys.x_action(p.initial)] = n as i64;
    assert!(check_implementation(sys, &st.set, &st.vals, &st.config).is_ok());
    let mut frontier = vec![st];
    let mut seen: BTreeSet<(SLoc, Vec<i64>)> = BTreeSet::new();
    let mut edges_checked = 0usize;
    for _ in 0..depth {
        let mut next = Vec::new();
        for st in &frontier {
            for e in sys.edges_from(&SLoc::co(st.set.clone()), &lift(&st.vals)) {
                if matches!(e.meta, bnv_core::summary::EdgeInfo::ToFinal) {
                    continue;
                }
                let mut feasible = true;
                let mut v2 = st.vals.clone();
                for &(i, d) in &e.delta {
                    v2[i] += d;
                    if v2[i] < 0 {
                        feasible = false;
                        break;
                    }
                }
                if !feasible {
                    continue;
                }
                let (st2, _) = apply_edge(sys, st, &e).expect("simulation step applies");
                // the produced configuration implements the successor
                check_implementation(sys, &st2.set, &st2.vals, &st2.config)
                    .expect("implementation conditions hold after the step");
                edges_checked += 1;
                if seen.insert((SLoc::co(st2.set.clone()), st2.vals.clone())) {
                    next.push(st2);
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    edges_checked
}

#[test]
fn criterion_03_simulation_property() {
    let mut r = rng(1003);
    let mut protocols = 0usize;
    let mut edges = 0usize;
    while protocols < 200 {
        let p = random_wait_only(&mut r, 6, 3);
        let cls = p.classify();
        if cls.waiting.is_empty() {
            continue;
        }
        let norm = p.normalize_self_loops();
        let (norm, _) = norm.add_uncoverable_state();
        let q_f = *norm.classify().waiting.iter().next().unwrap();
        let sys = SummarySystem::new(&norm, Variant::Synchro { q_f }, true).unwrap();
        edges += simulate_depth(&sys, 3, 4);
        protocols += 1;
    }
    assert!(edges > 10_000, "checked only {edges} edges");
    pass(&format!(
        "criterion 3: simulation property on 200 protocols ({edges} machine edges checked)"
    ));
}

#[test]
fn criterion_04_cosimulation_property() {
    let mut r = rng(1004);
    let mut protocols = 0usize;
    let mut translated = 0usize;
    while protocols < 200 {
        let p = random_wait_only(&mut r, 6, 3);
        let cls = p.classify();
        if cls.waiting.is_empty() {
            continue;
        }
        protocols += 1;
        let norm = p.normalize_self_loops();
        let (norm, _) = norm.add_uncoverable_state();
        for &q_f in norm.classify().waiting.iter() {
            if norm.state_name(q_f).starts_with("__") {
                continue;
            }
            let bounds = Bounds {
                max_processes: 3,
                max_depth: 40,
                max_states: 40_000,
            };
            let res = synchro_explicit(&norm, q_f, bounds);
            let SynchroVerdict::Yes { witness, .. } = res.verdict else {
                continue;
            };
            let wf = well_formize_all(&norm, &witness).expect("synchronizing traces rewrite");
            let sys = SummarySystem::new(&norm, Variant::Synchro { q_f }, true).unwrap();
            // translate_execution_to_run checks every intermediate
            // representative internally and ends at (s_f, 0)
            let run = translate_execution_to_run(&sys, &wf).expect("translation succeeds");
            let (_, last_loc, last_vals) = run.last().unwrap();
            assert_eq!(*last_loc, SLoc::Sf);
            assert!(last_vals.iter().all(|&v| v == 0));
            // explicitly re-check one intermediate as a spot check
            let configs = wf.configs(&norm, SemanticsKind::Broadcast);
            let mid = run
                .iter()
                .filter_map(|(info, loc, vals)| match (info, loc) {
                    (bnv_core::summary::EdgeInfo::Trans(_), SLoc::Co { set, .. }) => {
                        Some((set.clone(), vals.clone()))
                    }
                    _ => None,
                })
                .next();
            if let Some((set, vals)) = mid {
                match check_representative(&sys, &configs, 1, &set, &vals) {
                    ReprOutcome::Representative(_) => {}
                    ReprOutcome::Not(w) => panic!("first intermediate not representative: {w}"),
                }
            }
            translated += 1;
        }
    }
    assert!(translated >= 50, "translated only {translated} executions");
    pass(&format!(
        "criterion 4: co-simulation property on 200 protocols ({translated} executions translated)"
    ));
}

#[test]
fn criterion_05_synchro_cross_validation() {
    let mut r = rng(1005);
    let mut protocols = 0usize;
    let mut agreed = 0usize;
    while protocols < 200 {
        let p = random_wait_only(&mut r, 6, 3);
        protocols += 1;
        for q_f in p.state_ids() {
            let bounds = Bounds {
                max_processes: 5,
                max_depth: 10_000,
                max_states: 60_000,
            };
            let res = synchro_explicit(&p, q_f, bounds);
            let SynchroVerdict::Yes { .. } = res.verdict else {
                continue;
            };
            let verdict = solve_synchro(&p, q_f, SolveCaps::default()).unwrap();
            assert_eq!(
                verdict.answer,
                Answer::Yes,
                "explicit yes but solver {:?} on target {} of\n{}",
                verdict.answer,
                p.state_name(q_f),
                p.serialize()
            );
            match verdict.witness {
                Some(Witness::Trace(tr)) => {
                    validate_trace(&p, &tr, SemanticsKind::Broadcast).expect("witness replays");
                    let last = tr.configs(&p, SemanticsKind::Broadcast);
                    assert!(last[last.len() - 1].states().iter().all(|&s| s == q_f));
                }
                _ => panic!("yes verdict must carry a trace"),
            }
            agreed += 1;
        }
    }
    assert!(agreed >= 100, "only {agreed} yes-instances cross-validated");
    pass(&format!(
        "criterion 5: synchronization cross-validation on 200 protocols ({agreed} yes-instances)"
    ));
}

/// Random grounded execution with random reception resolutions.
fn random_trace(
    r: &mut rand::rngs::StdRng,
    p: &Protocol,
    n: usize,
    len: usize,
) -> Trace {
    let mut steps = Vec::new();
    let mut cur = IndexedConfig::grounded(p, n);
    for _ in 0..len {
        let enabled: Vec<(usize, Transition)> = cur
            .iter()
            .flat_map(|(e, st)| {
                p.transitions()
                    .iter()
                    .copied()
                    .filter(move |t| t.op.is_send() && t.src == st)
                    .map(move |t| (e, t))
            })
            .collect();
        if enabled.is_empty() {
            break;
        }
        let (sender, t) = enabled[r.random_range(0..enabled.len())];
        let msg = t.op.msg();
        let mut choices = std::collections::BTreeMap::new();
        for (e, st) in cur.iter() {
            if e == sender {
                continue;
            }
            let targets: Vec<StateId> = p.receptions(st, msg).map(|x| x.dst).collect();
            if targets.len() > 1 {
                choices.insert(e, targets[r.random_range(0..targets.len())]);
            }
        }
        let step = Step {
            sender,
            transition: t,
            receivers: BTreeSet::new(),
            choices,
        };
        cur = broadcast_step(p, &cur, sender, t, &step.choices).unwrap();
        steps.push(step);
    }
    Trace {
        initial: IndexedConfig::grounded(p, n),
        steps,
    }
}

#[test]
fn criterion_06_future_set_bound() {
    let mut r = rng(1006);
    let mut outputs = 0usize;
    while outputs < 10_000 {
        let p = random_wait_only(&mut r, 6, 3);
        let (p, _) = p.add_uncoverable_state();
        let qw = p.classify().waiting.len();
        let n = r.random_range(1..=4);
        let len = r.random_range(0..=8);
        let tr = random_trace(&mut r, &p, n, len);
        let Ok(wf) = well_formize_all(&p, &tr) else {
            // processes that never act and end apart cannot be merged
            continue;
        };
        let configs = wf.configs(&p, SemanticsKind::Broadcast);
        assert!(is_well_formed(&p, &configs).is_ok());
        for j in 0..configs.len() {
            for q_a in p.classify().action.iter().copied() {
                let fut = future_index_set(&p, &configs, j, q_a);
                assert!(
                    fut.len() <= qw,
                    "future set exceeded the waiting-state count"
                );
            }
        }
        outputs += 1;
    }
    pass("criterion 6: future-index-set bound on 10000 rewritten executions");
}

#[test]
fn criterion_07_dfa_generators_end_to_end() {
    let mut r = rng(1007);
    let mut nonempty_cases = 0usize;
    let mut empty_cases = 0usize;
    for _ in 0..100 {
        let count = r.random_range(1..=3usize);
        let alphabet = r.random_range(1..=3);
        let fam = random_dfa_family(&mut r, count, 4, alphabet);
        let word = dfa_product_nonempty(&fam).unwrap();
        let nonempty = word.is_some();

        // repeated-coverability gadget vs oracle at n+2 processes
        let (p, t_f, _) = gen_dfa_repcover_protocol(&fam);
        let bounds = Bounds {
            max_processes: count + 2,
            max_depth: 0,
            max_states: 600_000,
        };
        let explicit = repcover_explicit(&p, t_f, bounds, SemanticsKind::Broadcast);
        assert_eq!(
            matches!(explicit.verdict, RepcoverVerdict::Yes { .. }),
            nonempty,
            "oracle mismatch on recurrence gadget"
        );
        let caps = SolveCaps {
            repcov: RepcovCaps {
                concrete: ReachCaps {
                    counter_cap: (count + 2) as i64,
                    step_cap: 30_000,
                    state_cap: 300_000,
                },
                km_nodes: 150_000,
                boost: 1,
            },
            ..SolveCaps::default()
        };
        let verdict = solve_repcover(&p, t_f, caps).unwrap();
        if nonempty {
            assert_eq!(verdict.answer, Answer::Yes, "solver missed a recurrence");
            match verdict.witness {
                Some(Witness::Lasso(l)) => {
                    validate_lasso(&p, &l, SemanticsKind::Broadcast).expect("lasso replays")
                }
                _ => panic!("yes verdict must carry a lasso"),
            }
        } else {
            assert_ne!(verdict.answer, Answer::Yes, "solver affirmed an empty family");
        }

        // synchronization gadget vs oracle at n+1 processes; the gadget is
        // sound for populations up to n+1, so the solver runs in that window
        let (p, q_f) = gen_dfa_swo_synchro_protocol(&fam);
        assert!(p.check_single_wait_only().0);
        let q_f = p.state_by_name(&q_f).unwrap();
        let bounds = Bounds {
            max_processes: count + 1,
            max_depth: 10_000,
            max_states: 600_000,
        };
        let explicit = synchro_explicit(&p, q_f, bounds);
        assert_eq!(
            matches!(explicit.verdict, SynchroVerdict::Yes { .. }),
            nonempty,
            "oracle mismatch on synchronization gadget"
        );
        let caps = SolveCaps {
            reach: ReachCaps {
                counter_cap: (count + 1) as i64,
                step_cap: 30_000,
                state_cap: 300_000,
            },
            ..SolveCaps::default()
        };
        let verdict = solve_synchro(&p, q_f, caps).unwrap();
        if nonempty {
            assert_eq!(verdict.answer, Answer::Yes, "solver missed a synchronization");
        } else {
            assert_ne!(verdict.answer, Answer::Yes, "solver affirmed an empty family");
        }
        if nonempty {
            nonempty_cases += 1;
        } else {
            empty_cases += 1;
        }
    }
    assert!(nonempty_cases >= 10 && empty_cases >= 10, "unbalanced corpus");
    pass(&format!(
        "criterion 7: automata generators end-to-end on 100 families \
         ({nonempty_cases} intersecting, {empty_cases} empty)"
    ));
}

#[test]
fn criterion_08_single_wait_only_equivalence() {
    let mut r = rng(1008);
    let mut protocols = 0usize;
    let mut checks = 0usize;
    while protocols < 200 {
        let p = random_single_wait_only(&mut r, 6, 3);
        protocols += 1;
        for &t_f in p.transitions() {
            let bounds = Bounds {
                max_processes: 6,
                max_depth: 0,
                max_states: 150_000,
            };
            let b = matches!(
                repcover_explicit(&p, t_f, bounds, SemanticsKind::Broadcast).verdict,
                RepcoverVerdict::Yes { .. }
            );
            let rbn = matches!(
                repcover_explicit(&p, t_f, bounds, SemanticsKind::Rbn).verdict,
                RepcoverVerdict::Yes { .. }
            );
            let fast = solve_repcover_swo(&p, t_f).unwrap().answer == Answer::Yes;
            assert_eq!(b, rbn, "semantics disagree on\n{}", p.serialize());
            assert_eq!(
                rbn,
                fast,
                "fast algorithm disagrees with the oracle on transition {:?} of\n{}",
                t_f,
                p.serialize()
            );
            checks += 1;
        }
    }
    assert!(checks >= 400, "only {checks} transitions checked");
    pass(&format!(
        "criterion 8: Single-Wait-Only equivalence on 200 protocols ({checks} transitions)"
    ));
}

/// Exhaustive bounded enumeration of reachable configurations.
fn brute_reachable(v: &Vass, value_cap: i64, state_cap: usize) -> Vec<(LocId, Vec<i64>)> {
    let start = (v.initial, vec![0i64; v.num_counters()]);
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some((loc, vals)) = queue.pop_front() {
        if seen.len() >= state_cap {
            break;
        }
        for e in v.edges_from(&loc, &lift(&vals)) {
            let mut nv = vals.clone();
            let mut ok = true;
            for &(i, d) in &e.delta {
                nv[i] += d;
                if nv[i] < 0 || nv[i] > value_cap {
                    ok = false;
                    break;
                }
            }
            if ok && seen.insert((e.dst, nv.clone())) {
                queue.push_back((e.dst, nv));
            }
        }
    }
    seen.into_iter().collect()
}

#[test]
fn criterion_09_vass_engine_oracles() {
    let mut r = rng(1009);
    for _ in 0..100 {
        let v = random_vass(&mut r, 4, 3, 2);
        let tree = karp_miller_sys(&v, (v.initial, lift(&vec![0; v.num_counters()])), 60_000);
        assert!(tree.complete, "tree must close on these sizes");
        let reach = brute_reachable(&v, 40, 150_000);
        // soundness: everything reachable is covered
        for (loc, vals) in &reach {
            let capped: Vec<i64> = vals.iter().map(|&x| x.min(4)).collect();
            assert!(tree.covers(loc, &capped), "reachable but not covered");
        }
        // exactness on small targets: covered implies coverable by a run
        for li in 0..v.num_locations() {
            let loc = LocId(li as u32);
            for target in [vec![0, 0, 0], vec![1, 0, 0], vec![2, 1, 0], vec![4, 4, 4]] {
                let t: Vec<i64> = target.iter().copied().take(v.num_counters()).collect();
                let claimed = tree.covers(&loc, &t);
                let witnessed = reach
                    .iter()
                    .any(|(l, vals)| *l == loc && vals.iter().zip(&t).all(|(a, b)| a >= b));
                assert_eq!(
                    claimed, witnessed,
                    "cover disagreement at {} target {t:?} of\n{}",
                    v.loc_name(loc),
                    v.serialize()
                );
            }
        }
        // repeated coverability agrees with the bounded lasso search
        for li in 0..v.num_locations() {
            let loc = LocId(li as u32);
            let pipeline = repeated_coverability_vass(&v, loc, RepcovCaps::default());
            let (explicit, _) = concrete_lasso(
                &v,
                (v.initial, vec![0; v.num_counters()]),
                &|l: &LocId| *l == loc,
                ReachCaps {
                    counter_cap: 10,
                    step_cap: 4_000,
                    state_cap: 60_000,
                },
            );
            match (&pipeline, &explicit) {
                (RepcovOutcome::No, Some(_)) => panic!(
                    "pipeline refuted a witnessed location {} of\n{}",
                    v.loc_name(loc),
                    v.serialize()
                ),
                (RepcovOutcome::Yes(l), _) => {
                    assert!(validate_self_covering(&v, loc, l), "witness must replay");
                    assert!(
                        explicit.is_some(),
                        "pipeline found a lasso the bounded search missed at {} of\n{}",
                        v.loc_name(loc),
                        v.serialize()
                    );
                }
                _ => {}
            }
        }
    }
    pass("criterion 9: counter-system engines agree with brute-force oracles on 100 systems");
}

#[test]
fn criterion_10_run_length_bound_formula() {
    // frozen value at the origin, re-derived with plain repeated products
    let b = run_length_bound(0, 0);
    let mut nine_pow = BigUint::one();
    for _ in 0..3645 {
        nine_pow *= 9u32;
    }
    assert_eq!(b, BigUint::from(153u32) * nine_pow);
    // exact monotonicity where the values are materializable
    for c in 0..=1u64 {
        for l in 0..4u64 {
            assert!(run_length_bound(c, l + 1) > run_length_bound(c, l));
        }
    }
    for l in 0..=4u64 {
        assert!(run_length_bound(1, l) > run_length_bound(0, l));
    }
    // monotonicity over the full grid in the log domain
    for c in 0..5u64 {
        for l in 0..5u64 {
            let here = run_length_bound_log2(c, l);
            assert!(run_length_bound_log2(c + 1, l) > here);
            assert!(run_length_bound_log2(c, l + 1) > here);
        }
    }
    pass("criterion 10: run-length bound exact at the origin and monotone on the grid");
}

#[test]
fn criterion_11_minsky_generator() {
    let halting = [
        // max(x1+x2) = 1
        ("machine a\ninit s\nfinal f\ntrans s inc x1 t\ntrans t dec x1 f\n", 2),
        // max(x1+x2) = 2
        (
            "machine b\ninit s\nfinal f\n\
             trans s inc x1 t\ntrans t inc x2 u\ntrans u dec x2 w\ntrans w dec x1 f\n",
            3,
        ),
        // zero-test on the way out, max(x1+x2) = 1
        (
            "machine c\ninit s\nfinal f\n\
             trans s inc x2 t\ntrans t dec x2 u\ntrans u zero x2 v\ntrans v zero x1 f\n",
            2,
        ),
    ];
    for (text, population) in halting {
        let m = parse_minsky(text).unwrap();
        let (p, q_f) = gen_minsky_protocol(&m);
        let q_f = p.state_by_name(&q_f).unwrap();
        let res = synchro_explicit(
            &p,
            q_f,
            Bounds {
                max_processes: population,
                max_depth: 400,
                max_states: 400_000,
            },
        );
        match res.verdict {
            SynchroVerdict::Yes { n, .. } => assert_eq!(n, population),
            other => panic!("expected yes at population {population}, got {other:?}"),
        }
    }
    let non_halting = parse_minsky(
        "machine d\ninit s\nfinal f\ntrans s inc x1 t\ntrans t dec x1 s\n",
    )
    .unwrap();
    let (p, q_f) = gen_minsky_protocol(&non_halting);
    let q_f = p.state_by_name(&q_f).unwrap();
    let res = synchro_explicit(
        &p,
        q_f,
        Bounds {
            max_processes: 5,
            max_depth: 60,
            max_states: 200_000,
        },
    );
    assert!(matches!(res.verdict, SynchroVerdict::NoWithinBounds));
    pass("criterion 11: machine generator labelled correctly on three halting and one looping machine");
}

// keep rarely-exercised helpers honest
#[test]
fn oracle_multiset_round_trip() {
    let p = fig1();
    let m = MultisetConfig::grounded(&p, 3, false);
    assert_eq!(from_multiset(&m).len(), 3);
    let out = bounded_reachability_sys(
        &fig1_vass(),
        (fig1_vass().initial, vec![0]),
        &|_, vals| vals[0] == 2,
        ReachCaps::default(),
    );
    assert!(matches!(
        out,
        bnv_core::vass::BoundedOutcome::Reached(_)
    ));
}

fn fig1_vass() -> Vass {
    bnv_core::vass::parse_vass("vass toy\ninit l0\ncounters x\ntrans l0 x+=1 l0\n").unwrap()
}
