//! Top-level decision procedures: synchronization and repeated coverability
//! through the summary machines, and the polynomial-time reconfigurable
//! algorithm for Single-Wait-Only repeated coverability. Yes answers carry
//! replayable witnesses on the original protocol; No answers come only from
//! complete procedures; bounded searches answer Unknown when their caps run
//! out.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::explicit::rbn_reachable_states;
use crate::protocol::{Op, Protocol, StateId, Transition};
use crate::semantics::{validate_lasso, validate_trace, IndexedConfig, Lasso, SemanticsKind, Trace};
use crate::summary::{
    apply_edge, collapsed_graph, translate_run_to_execution, BuildError, Collapsed, EdgeInfo,
    SLoc, SimState, SummarySystem, TranslateError, Variant, WitnessMap,
};
use crate::vass::{
    bounded_reachability_sys, concrete_lasso, nonneg_walk_exists, BoundedOutcome, ReachCaps,
    RepcovCaps, SysEdge, VassSys,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

#[derive(Debug)]
pub enum Witness {
    Trace(Trace),
    Lasso(Lasso),
}

#[derive(Debug)]
pub struct Verdict {
    pub answer: Answer,
    pub method: String,
    pub witness: Option<Witness>,
    pub bounds: Option<String>,
}

impl Verdict {
    fn yes(method: &str, witness: Witness) -> Verdict {
        Verdict {
            answer: Answer::Yes,
            method: method.into(),
            witness: Some(witness),
            bounds: None,
        }
    }

    fn no(method: &str) -> Verdict {
        Verdict {
            answer: Answer::No,
            method: method.into(),
            witness: None,
            bounds: None,
        }
    }

    fn unknown(method: &str, bounds: String) -> Verdict {
        Verdict {
            answer: Answer::Unknown,
            method: method.into(),
            witness: None,
            bounds: Some(bounds),
        }
    }

    pub fn to_json(&self, p: &Protocol) -> Value {
        let mut v = json!({
            "format": 1,
            "answer": match self.answer {
                Answer::Yes => "yes",
                Answer::No => "no",
                Answer::Unknown => "unknown",
            },
            "method": self.method,
        });
        if let Some(w) = &self.witness {
            v["witness"] = match w {
                Witness::Trace(t) => t.to_json(p),
                Witness::Lasso(l) => l.to_json(p),
            };
        }
        if let Some(b) = &self.bounds {
            v["bounds"] = json!(b);
        }
        v
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error("target state `{0}` does not exist")]
    NoSuchState(String),
    #[error("protocol is not Single-Wait-Only (offending states: {0:?})")]
    NotSingleWaitOnly(Vec<String>),
}

#[derive(Debug, Clone, Copy)]
pub struct SolveCaps {
    pub reach: ReachCaps,
    pub repcov: RepcovCaps,
    pub km_nodes: usize,
}

impl Default for SolveCaps {
    fn default() -> Self {
        SolveCaps {
            reach: ReachCaps {
                counter_cap: 6,
                step_cap: 30_000,
                state_cap: 60_000,
            },
            repcov: RepcovCaps::default(),
            km_nodes: 100_000,
        }
    }
}

/// Maps a transition of the original protocol onto the normalized one
/// (broadcast self-loops were split through a fresh state).
fn map_transition(orig: &Protocol, norm: &Protocol, t: Transition) -> Transition {
    let src = norm.state_by_name(orig.state_name(t.src)).unwrap();
    let msg = match t.op {
        Op::Send(m) => norm.msg_by_name(orig.msg_name(m)).unwrap(),
        Op::Receive(m) => norm.msg_by_name(orig.msg_name(m)).unwrap(),
    };
    if t.op.is_send() && t.src == t.dst {
        // the rewritten loop: (q, !!a, p) for the unique fresh p
        return *norm
            .transitions()
            .iter()
            .find(|u| {
                u.src == src
                    && u.op == Op::Send(msg)
                    && norm.state_name(u.dst).starts_with("__p")
            })
            .expect("normalized loop exists");
    }
    let dst = norm.state_by_name(orig.state_name(t.dst)).unwrap();
    let op = if t.op.is_send() {
        Op::Send(msg)
    } else {
        Op::Receive(msg)
    };
    Transition { src, op, dst }
}

/// Rewrites a trace over the normalized/extended protocol back onto the
/// original: intermediate loop states collapse onto their source and the
/// fresh pause broadcasts disappear.
fn contract_trace(orig: &Protocol, norm: &Protocol, tr: &Trace) -> (Trace, Vec<usize>) {
    // state map: fresh loop states go back to their loop source
    let mut state_map: BTreeMap<StateId, StateId> = BTreeMap::new();
    for q in norm.state_ids() {
        let name = norm.state_name(q);
        let target = if name.starts_with("__p") {
            let back = norm
                .transitions()
                .iter()
                .find(|t| t.src == q && t.op.is_send())
                .expect("fresh loop state broadcasts the pause message");
            orig.state_by_name(norm.state_name(back.dst)).unwrap()
        } else if let Some(o) = orig.state_by_name(name) {
            o
        } else {
            continue; // the uncoverable state: never populated
        };
        state_map.insert(q, target);
    }
    let map_cfg = |c: &IndexedConfig| {
        IndexedConfig::new(c.states().iter().map(|q| state_map[q]).collect())
    };
    let pause = norm.msg_by_name("__dollar");
    let mut steps = Vec::new();
    let mut kept_positions = Vec::new();
    for (i, s) in tr.steps.iter().enumerate() {
        if Some(s.transition.op.msg()) == pause {
            continue; // nobody receives the pause message
        }
        let t = Transition {
            src: state_map[&s.transition.src],
            op: match s.transition.op {
                Op::Send(m) => Op::Send(orig.msg_by_name(norm.msg_name(m)).unwrap()),
                Op::Receive(m) => Op::Receive(orig.msg_by_name(norm.msg_name(m)).unwrap()),
            },
            dst: state_map[&s.transition.dst],
        };
        steps.push(crate::semantics::Step {
            sender: s.sender,
            transition: t,
            receivers: s.receivers.clone(),
            choices: s.choices.iter().map(|(&e, q)| (e, state_map[q])).collect(),
        });
        kept_positions.push(i);
    }
    (
        Trace {
            initial: map_cfg(&tr.initial),
            steps,
        },
        kept_positions,
    )
}

fn degenerate_waiting_initial(p: &Protocol, q_f: StateId) -> Verdict {
    // a waiting initial state never fires a single broadcast: the initial
    // configurations are the only reachable ones
    if q_f == p.initial {
        Verdict::yes(
            "degenerate",
            Witness::Trace(Trace {
                initial: IndexedConfig::grounded(p, 1),
                steps: vec![],
            }),
        )
    } else {
        Verdict::no("degenerate")
    }
}

/// Decides synchronization on `q_f` for a Wait-Only protocol through the
/// summary machine: waiting targets go through the final-summary
/// construction, action targets through the pre-final handshake.
pub fn solve_synchro(p: &Protocol, q_f: StateId, caps: SolveCaps) -> Result<Verdict, SolveError> {
    let (wo, bad) = p.check_wait_only();
    if !wo {
        return Err(BuildError::NotWaitOnly(
            bad.iter().map(|&q| p.state_name(q).to_string()).collect(),
        )
        .into());
    }
    if q_f == p.initial {
        return Ok(Verdict::yes(
            "trivial",
            Witness::Trace(Trace {
                initial: IndexedConfig::grounded(p, 1),
                steps: vec![],
            }),
        ));
    }
    let cls = p.classify();
    if cls.waiting.contains(&p.initial) {
        return Ok(degenerate_waiting_initial(p, q_f));
    }
    if cls.action.contains(&q_f) {
        return solve_synchro_action(p, q_f, caps);
    }
    let norm = p.normalize_self_loops();
    let (norm, _) = norm.add_uncoverable_state();
    let q_f_n = norm.state_by_name(p.state_name(q_f)).unwrap();
    let sys = SummarySystem::new(&norm, Variant::Synchro { q_f: q_f_n }, true)?;
    Ok(solve_with_summary_reach(p, &sys, caps, "synchro-vass")?.0)
}

/// Decides synchronization on an action state: the modified machine makes
/// `(s_f, 0)` mutually reachable with the start exactly when the network
/// synchronizes, and the reset edge makes the back direction one step.
pub fn solve_synchro_action(
    p: &Protocol,
    q_f: StateId,
    caps: SolveCaps,
) -> Result<Verdict, SolveError> {
    let cls = p.classify();
    if cls.waiting.contains(&p.initial) {
        return Ok(degenerate_waiting_initial(p, q_f));
    }
    let norm = p.normalize_self_loops();
    let (norm, _) = norm.add_uncoverable_state();
    let q_f_n = norm.state_by_name(p.state_name(q_f)).unwrap();
    let sys = SummarySystem::new(&norm, Variant::Action { q_f: q_f_n }, true)?;
    let (mut verdict, loc_slice) = solve_with_summary_reach(p, &sys, caps, "action-vass")?;
    if verdict.answer == Answer::Yes {
        // the mutual-reachability back direction is the reset edge
        verdict.method = "action-vass mutual-reachability".into();
    }
    let theoretical =
        crate::vass::run_length_bound_log2(sys.counter_count() as u64, loc_slice as u64);
    let note = format!(
        "practical caps: counters<={}, steps<={}; theoretically sufficient run length over the \
         {}-location slice: 2^{:.3e}",
        caps.reach.counter_cap, caps.reach.step_cap, loc_slice, theoretical
    );
    verdict.bounds = Some(match verdict.bounds {
        Some(b) => format!("{b}; {note}"),
        None => note,
    });
    Ok(verdict)
}

fn solve_with_summary_reach(
    orig: &Protocol,
    sys: &SummarySystem,
    caps: SolveCaps,
    method: &str,
) -> Result<(Verdict, usize), SolveError> {
    // cheap completeness: if the identifier-collapsed location graph closes
    // without the final location, the target is unreachable outright; if a
    // run to (s_f, 0) exists, it projects onto a conserving path flow with
    // zero total effect there, so flow infeasibility is also a definitive no
    let graph = collapsed_graph(sys, caps.km_nodes);
    let loc_slice = graph.locs.len();
    if graph.complete {
        if !graph.locs.contains(&SLoc::Sf) {
            return Ok((
                Verdict::no(&format!("{method} final-location-unreachable")),
                loc_slice,
            ));
        }
        if !zero_path_flow_feasible(sys, &graph) {
            return Ok((
                Verdict::no(&format!("{method} no-conserving-path")),
                loc_slice,
            ));
        }
    }
    // climb the counter cap so that small witnesses are found in small
    // state spaces
    let start = (sys.initial_loc(), vec![0i64; sys.counter_count()]);
    let mut cap = 2i64;
    let verdict = loop {
        let rung = ReachCaps {
            counter_cap: cap.min(caps.reach.counter_cap),
            ..caps.reach
        };
        let cap_next = if cap == 2 { 4 } else { cap + 2 };
        let out = bounded_reachability_sys(
            sys,
            start.clone(),
            &|loc, vals| *loc == SLoc::Sf && vals.iter().all(|&x| x == 0),
            rung,
        );
        match out {
            BoundedOutcome::Reached(run) => {
                let tr = translate_run_to_execution(sys, &run)?;
                let (contracted, _) = contract_trace(orig, &sys.protocol, &tr);
                validate_trace(orig, &contracted, SemanticsKind::Broadcast)
                    .map_err(|e| TranslateError::BadTrace(e.to_string()))?;
                break Verdict::yes(method, Witness::Trace(contracted));
            }
            BoundedOutcome::NotReached { exhaustive } => {
                if exhaustive && cap >= caps.reach.counter_cap {
                    break Verdict::no(&format!("{method} exhausted"));
                }
                if cap >= caps.reach.counter_cap {
                    break Verdict::unknown(
                        method,
                        format!(
                            "counter cap {}, step cap {}, state cap {}",
                            caps.reach.counter_cap, caps.reach.step_cap, caps.reach.state_cap
                        ),
                    );
                }
                cap = cap_next;
            }
        }
    };
    Ok((verdict, loc_slice))
}

/// Decides repeated coverability of `t_f` for a Wait-Only protocol: the
/// designated transition is routed through tagged machine locations, and the
/// question becomes whether a tagged location recurs, decided by the
/// self-covering-cycle analysis. Both Yes and No are definitive; Unknown
/// reports exhausted caps.
pub fn solve_repcover(p: &Protocol, t_f: Transition, caps: SolveCaps) -> Result<Verdict, SolveError> {
    let (wo, bad) = p.check_wait_only();
    if !wo {
        return Err(BuildError::NotWaitOnly(
            bad.iter().map(|&q| p.state_name(q).to_string()).collect(),
        )
        .into());
    }
    let cls = p.classify();
    if cls.waiting.contains(&p.initial) {
        // no broadcast ever fires, so there is no infinite execution at all
        return Ok(Verdict::no("degenerate"));
    }
    let norm = p.normalize_self_loops();
    let (norm, _) = norm.add_uncoverable_state();
    let t_f_n = map_transition(p, &norm, t_f);
    let track_witness = !t_f.op.is_send();
    let sys = SummarySystem::new(
        &norm,
        Variant::Smiley {
            t_f: t_f_n,
            track_witness,
        },
        true,
    )?;
    let method = "smiley-vass self-covering";

    // concrete self-covering search first, climbing the population: most
    // positive instances cycle with small populations
    let start = (sys.initial_loc(), vec![0i64; sys.counter_count()]);
    for cap in [3, 4, 6] {
        if cap > caps.repcov.concrete.counter_cap {
            break;
        }
        let rung = ReachCaps {
            counter_cap: cap,
            step_cap: caps.repcov.concrete.step_cap,
            state_cap: caps.repcov.concrete.state_cap.min(30_000 * cap as usize),
        };
        let (lasso, exhaustive) =
            concrete_lasso(&sys, start.clone(), &|loc: &SLoc| loc.is_smiley(), rung);
        if let Some(l) = lasso {
            let witness = smiley_lasso_to_protocol(p, &sys, &l.prefix, &l.cycle)?;
            return Ok(Verdict::yes(method, Witness::Lasso(witness)));
        }
        if exhaustive {
            return Ok(Verdict::no(&format!("{method} exhausted")));
        }
    }

    // identifier-collapsed cycle analysis: every self-covering cycle of the
    // machine projects to a conserving nonnegative-effect flow through a
    // tagged location here, so flow infeasibility is a definitive no
    let graph = collapsed_graph(&sys, caps.km_nodes);
    if !graph.complete {
        return Ok(Verdict::unknown(
            method,
            format!(
                "collapsed location graph exceeded {} locations",
                caps.km_nodes
            ),
        ));
    }
    let n = graph.locs.len();
    let targets: Vec<usize> = (0..n).filter(|&i| graph.locs[i].is_smiley()).collect();
    if targets.is_empty() {
        return Ok(Verdict::no(&format!("{method} tag-unreachable")));
    }
    let edges: Vec<(usize, usize, crate::vass::Delta)> = graph
        .edges
        .iter()
        .map(|(u, v, d, _)| (*u, *v, d.clone()))
        .collect();
    let adj: Vec<Vec<(usize, usize)>> = {
        let mut a = vec![Vec::new(); n];
        for (ei, (u, v, _)) in edges.iter().enumerate() {
            a[*u].push((*v, ei));
        }
        a
    };
    let comp = crate::vass::scc(&adj, n);
    let mut feasible_somewhere = false;
    let mut comps: Vec<usize> = targets.iter().map(|&t| comp[t]).collect();
    comps.sort_unstable();
    comps.dedup();
    for c in comps {
        let candidate: Vec<usize> = (0..edges.len())
            .filter(|&e| comp[edges[e].0] == c && comp[edges[e].1] == c)
            .collect();
        if candidate.is_empty() {
            continue;
        }
        let targets_in: Vec<usize> = targets.iter().copied().filter(|&t| comp[t] == c).collect();
        let collapsed_counters = Collapsed::new(&sys).num_counters();
        match nonneg_walk_exists(collapsed_counters, &edges, &candidate, &targets_in) {
            Some(true) => {
                feasible_somewhere = true;
                break;
            }
            Some(false) => {}
            None => {
                return Ok(Verdict::unknown(
                    method,
                    "collapsed cycle-space analysis exceeded the size limit".into(),
                ))
            }
        }
    }
    if !feasible_somewhere {
        return Ok(Verdict::no(&format!("{method} no-conserving-cycle")));
    }

    // a flow exists: climb the concrete caps looking for a witness
    let mut cap = 4i64;
    let max_cap = caps.repcov.concrete.counter_cap * caps.repcov.boost;
    loop {
        let rung = ReachCaps {
            counter_cap: cap.min(max_cap),
            step_cap: caps.repcov.concrete.step_cap,
            state_cap: caps.repcov.concrete.state_cap,
        };
        let (lasso, exhaustive) =
            concrete_lasso(&sys, start.clone(), &|loc: &SLoc| loc.is_smiley(), rung);
        if let Some(l) = lasso {
            let witness = smiley_lasso_to_protocol(p, &sys, &l.prefix, &l.cycle)?;
            return Ok(Verdict::yes(method, Witness::Lasso(witness)));
        }
        if exhaustive && cap >= max_cap {
            return Ok(Verdict::no(&format!("{method} exhausted")));
        }
        if cap >= max_cap {
            return Ok(Verdict::unknown(
                method,
                "a conserving tagged flow exists in the collapsed graph, but no concrete \
                 witness was found within the boosted caps"
                    .into(),
            ));
        }
        cap *= 2;
    }
}

/// Whether the collapsed graph admits a nonnegative flow from `s0` to the
/// final location with zero net counter effect: one unit of imbalance at the
/// endpoints, conservation elsewhere. Any run from `(s0, 0)` to `(s_f, 0)`
/// projects onto such a flow, so infeasibility refutes reachability.
fn zero_path_flow_feasible(sys: &SummarySystem, graph: &crate::summary::CollapsedGraph) -> bool {
    use crate::vass::lp::{feasible, Cmp, Constraint};
    let s0 = graph.locs.iter().position(|l| *l == SLoc::S0).unwrap();
    let Some(sf) = graph.locs.iter().position(|l| *l == SLoc::Sf) else {
        return false;
    };
    let num_counters = Collapsed::new(sys).num_counters();
    let nloc = graph.locs.len();
    let mut live: Vec<usize> = (0..graph.edges.len()).collect();
    let d_of = |e: usize, x: usize| -> i64 {
        graph.edges[e]
            .2
            .iter()
            .filter(|&&(c, _)| c == x)
            .map(|&(_, v)| v)
            .sum()
    };
    // prune by reachability and by counter signs until stable
    loop {
        let mut fwd = vec![false; nloc];
        let mut bwd = vec![false; nloc];
        fwd[s0] = true;
        bwd[sf] = true;
        loop {
            let mut changed = false;
            for &e in &live {
                let (u, v, _, _) = &graph.edges[e];
                if fwd[*u] && !fwd[*v] {
                    fwd[*v] = true;
                    changed = true;
                }
                if bwd[*v] && !bwd[*u] {
                    bwd[*u] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !fwd[sf] {
            return false;
        }
        let before = live.len();
        live.retain(|&e| {
            let (u, v, _, _) = &graph.edges[e];
            fwd[*u] && fwd[*v] && bwd[*u] && bwd[*v]
        });
        for x in 0..num_counters {
            let any_pos = live.iter().any(|&e| d_of(e, x) > 0);
            let any_neg = live.iter().any(|&e| d_of(e, x) < 0);
            // total effect must be exactly zero
            if any_pos && !any_neg {
                live.retain(|&e| d_of(e, x) <= 0);
            } else if any_neg && !any_pos {
                live.retain(|&e| d_of(e, x) >= 0);
            }
        }
        if live.len() == before {
            break;
        }
    }
    if live.len() > 4_000 {
        return true; // too large for the exact solver; stay inconclusive
    }
    let mut touched: Vec<usize> = live
        .iter()
        .flat_map(|&e| [graph.edges[e].0, graph.edges[e].1])
        .collect();
    touched.push(s0);
    touched.push(sf);
    touched.sort_unstable();
    touched.dedup();
    let mut constraints: Vec<Constraint> = Vec::new();
    for &n in &touched {
        let mut coeffs: Vec<(usize, i64)> = Vec::new();
        for (i, &e) in live.iter().enumerate() {
            let (u, v, _, _) = &graph.edges[e];
            let mut c = 0i64;
            if *u == n {
                c += 1;
            }
            if *v == n {
                c -= 1;
            }
            if c != 0 {
                coeffs.push((i, c));
            }
        }
        let rhs = i64::from(n == s0) - i64::from(n == sf);
        constraints.push(Constraint {
            coeffs,
            cmp: Cmp::Eq,
            rhs,
        });
    }
    for x in 0..num_counters {
        let coeffs: Vec<(usize, i64)> = live
            .iter()
            .enumerate()
            .filter_map(|(i, &e)| {
                let v = d_of(e, x);
                (v != 0).then_some((i, v))
            })
            .collect();
        if !coeffs.is_empty() {
            constraints.push(Constraint {
                coeffs,
                cmp: Cmp::Eq,
                rhs: 0,
            });
        }
    }
    feasible(live.len(), &constraints).is_some()
}

/// Expands a machine lasso of the tagged construction into a protocol lasso.
/// The machine cycle repeats with effect zero, so iterating it drives the
/// concrete simulation state back to a previous value; the repeating part
/// becomes the protocol cycle.
fn smiley_lasso_to_protocol(
    orig: &Protocol,
    sys: &SummarySystem,
    prefix: &[(EdgeInfo, SLoc, Vec<i64>)],
    cycle: &[(EdgeInfo, SLoc, Vec<i64>)],
) -> Result<Lasso, SolveError> {
    let t_f = match sys.variant {
        Variant::Smiley { t_f, .. } => t_f,
        _ => unreachable!("smiley system"),
    };
    let n_pumps = prefix
        .iter()
        .take_while(|(i, _, _)| matches!(i, EdgeInfo::Pump))
        .count();
    let witness = sys.initial_witness().map(|_| 1usize);
    let total = n_pumps + usize::from(witness.is_some());
    if total == 0 {
        return Err(TranslateError::BadRun("population is empty".into()).into());
    }
    let x_init = sys.x_action(sys.protocol.initial);
    let mut map = vec![x_init; total];
    if witness.is_some() {
        map[0] = usize::MAX; // the witness is tracked by the location
    }
    let mut st = SimState {
        set: crate::summary::CoherentSet::empty(),
        vals: vec![0; sys.counter_count()],
        config: IndexedConfig::grounded(&sys.protocol, total),
        map: WitnessMap::new(map),
        witness,
    };
    st.vals[x_init] = n_pumps as i64;
    let mut steps: Vec<crate::semantics::Step> = Vec::new();
    let drive =
        |st: &mut SimState, seq: &[(EdgeInfo, SLoc, Vec<i64>)], steps: &mut Vec<crate::semantics::Step>| -> Result<(), SolveError> {
            for (info, loc, vals) in seq {
                match info {
                    EdgeInfo::Pump | EdgeInfo::Enter => continue,
                    _ => {}
                }
                let mut delta: Vec<(usize, i64)> = Vec::new();
                for (i, &v) in vals.iter().enumerate() {
                    let d = v - st.vals[i];
                    if d != 0 {
                        delta.push((i, d));
                    }
                }
                let edge = SysEdge {
                    delta,
                    dst: loc.clone(),
                    meta: info.clone(),
                };
                let (next, step) = apply_edge(sys, st, &edge)?;
                if let Some(s) = step {
                    steps.push(s);
                }
                *st = next;
            }
            Ok(())
        };
    drive(&mut st, prefix, &mut steps)?;
    // iterate the machine cycle until the simulation state recurs
    let mut seen: Vec<(SimState, usize)> = vec![(st.clone(), steps.len())];
    let cycle_start;
    loop {
        drive(&mut st, cycle, &mut steps)?;
        if let Some((_, at)) = seen.iter().find(|(s, _)| *s == st) {
            cycle_start = *at;
            break;
        }
        seen.push((st.clone(), steps.len()));
        if seen.len() > 100_000 {
            return Err(TranslateError::BadRun("cycle closure did not converge".into()).into());
        }
    }
    // the tracked process: the witness, or a sender of the designated
    // broadcast inside the cycle
    let tracked = match witness {
        Some(w) => w,
        None => steps[cycle_start..]
            .iter()
            .find(|s| s.transition == t_f)
            .map(|s| s.sender)
            .ok_or_else(|| TranslateError::BadRun("cycle misses the designated transition".into()))?,
    };
    let norm_trace = Trace {
        initial: IndexedConfig::grounded(&sys.protocol, total),
        steps,
    };
    let (contracted, kept) = contract_trace(orig, &sys.protocol, &norm_trace);
    // the cycle seam in contracted coordinates
    let new_cycle_start = kept.iter().filter(|&&i| i < cycle_start).count();
    let lasso = Lasso {
        trace: contracted,
        cycle_start: new_cycle_start,
        tracked,
    };
    validate_lasso(orig, &lasso, SemanticsKind::Broadcast)
        .map_err(|e| TranslateError::BadTrace(e.to_string()))?;
    Ok(lasso)
}


/// States reachable under reconfigurable semantics; the saturation of the
/// explicit oracle re-exported for the solver pipeline.
pub fn rbn_saturate(p: &Protocol) -> BTreeSet<StateId> {
    rbn_reachable_states(p)
}

/// The greatest set of transitions, over reconfigurable-reachable states,
/// in which every reception is supplied by a broadcast of the same message
/// and every transition lies on a cycle.
pub fn swo_live_transitions(p: &Protocol) -> BTreeSet<Transition> {
    let reach = rbn_saturate(p);
    let mut live: BTreeSet<Transition> = p
        .transitions()
        .iter()
        .copied()
        .filter(|t| reach.contains(&t.src) && reach.contains(&t.dst))
        .collect();
    loop {
        let supplied: BTreeSet<_> = live
            .iter()
            .filter(|t| t.op.is_send())
            .map(|t| t.op.msg())
            .collect();
        let kept: BTreeSet<Transition> = live
            .iter()
            .copied()
            .filter(|t| match t.op {
                Op::Send(_) => true,
                Op::Receive(m) => supplied.contains(&m),
            })
            .collect();
        // keep only transitions on a cycle of the kept graph
        let comp = state_scc(p, &kept);
        let cyclic: BTreeSet<Transition> = kept
            .iter()
            .copied()
            .filter(|t| comp[t.src.ix()] == comp[t.dst.ix()])
            .collect();
        if cyclic == live {
            return live;
        }
        live = cyclic;
    }
}

fn state_scc(p: &Protocol, edges: &BTreeSet<Transition>) -> Vec<usize> {
    // Tarjan over protocol states restricted to the given edges
    let n = p.num_states();
    let adj: Vec<Vec<usize>> = {
        let mut a = vec![Vec::new(); n];
        for t in edges {
            a[t.src.ix()].push(t.dst.ix());
        }
        a
    };
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call = vec![(root, 0usize)];
        while let Some(&(u, cursor)) = call.last() {
            if cursor == 0 {
                index[u] = next_index;
                low[u] = next_index;
                next_index += 1;
                stack.push(u);
                on_stack[u] = true;
            }
            if cursor < adj[u].len() {
                call.last_mut().unwrap().1 += 1;
                let v = adj[u][cursor];
                if index[v] == usize::MAX {
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                if low[u] == index[u] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == u {
                            break;
                        }
                    }
                    next_comp += 1;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
            }
        }
    }
    comp
}

/// Polynomial-time repeated coverability for Single-Wait-Only protocols:
/// under reconfigurable semantics (equivalent for this class), a transition
/// recurs iff it belongs to the greatest supplied-and-cyclic transition set.
pub fn solve_repcover_swo(p: &Protocol, t_f: Transition) -> Result<Verdict, SolveError> {
    let (swo, bad) = p.check_single_wait_only();
    if !swo {
        return Err(SolveError::NotSingleWaitOnly(
            bad.iter().map(|&q| p.state_name(q).to_string()).collect(),
        ));
    }
    let live = swo_live_transitions(p);
    if live.contains(&t_f) {
        Ok(Verdict {
            answer: Answer::Yes,
            method: "rbn-live-set".into(),
            witness: None,
            bounds: None,
        })
    } else {
        Ok(Verdict::no("rbn-live-set"))
    }
}
