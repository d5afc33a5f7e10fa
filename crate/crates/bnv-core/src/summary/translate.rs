//! Translation between runs of the constructed counter machines and
//! executions of the protocol. One direction simulates machine edges on a
//! concrete configuration equipped with a process-to-counter assignment
//! (the implementation relation); the other replays a well-formed
//! synchronizing execution inside the machine through representative
//! configurations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::protocol::{Op, StateId};
use crate::semantics::{
    next_action, validate_trace, IndexedConfig, SemanticsKind, Step, Trace,
};
use crate::vass::{lift, SysEdge, VassSys};

use super::build::{EdgeInfo, SLoc, SummarySystem, Variant};
use super::{CoherentSet, Summary, SummaryOutcome};

/// Assignment of processes (1-based) to counters, witnessing the
/// implementation relation between a machine configuration and a protocol
/// configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessMap(Vec<usize>);

impl WitnessMap {
    /// Raw assignment; entry `e-1` is process `e`'s counter. A tracked
    /// witness uses `usize::MAX` as a placeholder.
    pub fn new(v: Vec<usize>) -> WitnessMap {
        WitnessMap(v)
    }

    pub fn counter_of(&self, e: usize) -> usize {
        self.0[e - 1]
    }

    pub fn set(&mut self, e: usize, x: usize) {
        self.0[e - 1] = x;
    }

    pub fn assigned(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == x)
            .map(|(i, _)| i + 1)
    }
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("counter total {vals} does not match the population {procs}")]
    CountMismatch { vals: i64, procs: usize },
    #[error("no process-to-counter assignment satisfies the implementation conditions")]
    Infeasible,
    #[error("{0}")]
    BadRun(String),
    #[error("{0}")]
    BadTrace(String),
}

/// Searches for an assignment satisfying the implementation conditions:
/// action counters hold processes on that state, live summary counters hold
/// processes on the print or the exit, dead summary counters hold processes
/// on the exit. Solved as a transportation feasibility problem between
/// state populations and counter demands.
pub fn check_implementation(
    sys: &SummarySystem,
    set: &CoherentSet,
    vals: &[i64],
    c: &IndexedConfig,
) -> Result<WitnessMap, TranslateError> {
    let total: i64 = vals.iter().sum();
    if total != c.len() as i64 {
        return Err(TranslateError::CountMismatch {
            vals: total,
            procs: c.len(),
        });
    }
    let nc = sys.counter_count();
    let admissible = |q: StateId, x: usize| -> bool {
        let na = sys.actions_len();
        if x < na {
            return sys.action_at(x) == q;
        }
        let (exit, k) = sys.pair_at(x);
        match set.by_label((exit, k)) {
            Some(s) => s.print.contains(&q) || q == exit,
            None => q == exit,
        }
    };
    // group processes by state
    let mut by_state: BTreeMap<StateId, Vec<usize>> = BTreeMap::new();
    for (e, q) in c.iter() {
        by_state.entry(q).or_default().push(e);
    }
    // bipartite feasibility by augmenting paths (state groups -> counters)
    let states: Vec<StateId> = by_state.keys().copied().collect();
    let supply: Vec<usize> = states.iter().map(|q| by_state[q].len()).collect();
    let mut flow: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); states.len()];
    let mut counter_used = vec![0i64; nc];
    for (si, &q) in states.iter().enumerate() {
        let mut remaining = supply[si];
        while remaining > 0 {
            // BFS for an augmenting path from this state group to a counter
            // with spare demand
            let mut prev: BTreeMap<usize, (usize, usize)> = BTreeMap::new(); // counter -> (state, via counter?)
            let mut seen_states = vec![false; states.len()];
            seen_states[si] = true;
            let mut queue: VecDeque<usize> = VecDeque::new();
            let mut entry: BTreeMap<usize, usize> = BTreeMap::new(); // counter -> state that reaches it
            for x in 0..nc {
                if admissible(q, x) && vals[x] > 0 {
                    entry.insert(x, si);
                    queue.push_back(x);
                }
            }
            let mut target: Option<usize> = None;
            while let Some(x) = queue.pop_front() {
                if counter_used[x] < vals[x] {
                    target = Some(x);
                    break;
                }
                // move a unit of some other state off x
                for (sj, st) in states.iter().enumerate() {
                    if seen_states[sj] || flow[sj].get(&x).copied().unwrap_or(0) == 0 {
                        continue;
                    }
                    seen_states[sj] = true;
                    for y in 0..nc {
                        if y != x && admissible(*st, y) && vals[y] > 0 && !entry.contains_key(&y) {
                            entry.insert(y, sj);
                            prev.insert(y, (sj, x));
                            queue.push_back(y);
                        }
                    }
                }
            }
            let Some(mut x) = target else {
                return Err(TranslateError::Infeasible);
            };
            // unwind the augmenting path
            loop {
                match prev.get(&x).copied() {
                    Some((sj, via)) => {
                        *flow[sj].entry(x).or_insert(0) += 1;
                        *flow[sj].get_mut(&via).unwrap() -= 1;
                        x = via;
                    }
                    None => {
                        let s_here = entry[&x];
                        *flow[s_here].entry(x).or_insert(0) += 1;
                        counter_used[x] += 1;
                        break;
                    }
                }
            }
            remaining -= 1;
        }
    }
    if (0..nc).any(|x| counter_used[x] != vals[x]) {
        return Err(TranslateError::Infeasible);
    }
    // materialize the assignment
    let mut map = vec![usize::MAX; c.len()];
    for (si, &q) in states.iter().enumerate() {
        let mut procs = by_state[&q].clone();
        for (&x, &amount) in &flow[si] {
            for _ in 0..amount {
                let e = procs.pop().expect("flow conserves supply");
                map[e - 1] = x;
            }
        }
        debug_assert!(procs.is_empty());
    }
    Ok(WitnessMap(map))
}

/// Concrete simulation state carried along a machine run: the location's
/// summary set, the counter valuation, the protocol configuration, the
/// process-to-counter assignment, and the tracked witness if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    pub set: CoherentSet,
    pub vals: Vec<i64>,
    pub config: IndexedConfig,
    pub map: WitnessMap,
    pub witness: Option<usize>,
}

/// Applies one machine edge to the simulation state, producing the protocol
/// step it corresponds to (transfers and handshakes produce none). This is
/// the constructive heart of the soundness direction: a machine step always
/// yields zero or one broadcast steps preserving the implementation
/// conditions.
pub fn apply_edge(
    sys: &SummarySystem,
    st: &SimState,
    edge: &SysEdge<SLoc, EdgeInfo>,
) -> Result<(SimState, Option<Step>), TranslateError> {
    let p = &sys.protocol;
    let mut next = st.clone();
    // counter arithmetic
    for &(i, d) in &edge.delta {
        next.vals[i] += d;
        if next.vals[i] < 0 {
            return Err(TranslateError::BadRun("negative counter".into()));
        }
    }
    match &edge.meta {
        EdgeInfo::Drain { exit, id } => {
            let x_from = sys.x_pair(*exit, *id);
            let x_to = sys.x_action(*exit);
            let e = st
                .map
                .assigned(x_from)
                .next()
                .ok_or_else(|| TranslateError::BadRun("drain from empty counter".into()))?;
            if st.config.get(e) != *exit {
                return Err(TranslateError::BadRun(
                    "drained process is not on the exit state".into(),
                ));
            }
            next.map.set(e, x_to);
            Ok((next, None))
        }
        EdgeInfo::Trans(te) => {
            let Op::Send(msg) = te.t.op else {
                return Err(TranslateError::BadRun("broadcast expected".into()));
            };
            match &edge.dst {
                SLoc::Co { set, .. } => next.set = set.clone(),
                _ => return Err(TranslateError::BadRun("broadcast edge leaves CoSets".into())),
            }
            // pick the sender
            let sender = if te.sender_witness {
                st.witness
                    .ok_or_else(|| TranslateError::BadRun("no witness to send".into()))?
            } else {
                st.map
                    .assigned(sys.x_action(te.t.src))
                    .find(|&e| Some(e) != st.witness && st.config.get(e) == te.t.src)
                    .ok_or_else(|| TranslateError::BadRun("no process can send".into()))?
            };
            let mut choices: BTreeMap<usize, StateId> = BTreeMap::new();
            let labels = st.set.labels();
            next.config.set(sender, te.t.dst);
            for (e, q) in st.config.iter() {
                if e == sender {
                    continue;
                }
                if !sys.cls.receivable[q.ix()].contains(&msg) {
                    continue;
                }
                // a receiving process sits in a live summary or is the witness
                let target = if Some(e) == st.witness {
                    te.witness_move.ok_or_else(|| {
                        TranslateError::BadRun("witness must receive the message".into())
                    })?
                } else {
                    let x = st.map.counter_of(e);
                    let (exit, k) = sys.pair_at(x);
                    if !labels.contains(&(exit, k)) {
                        return Err(TranslateError::BadRun(
                            "receiving process mapped to a dead summary".into(),
                        ));
                    }
                    let (_, step) = te
                        .resolutions
                        .iter()
                        .find(|(s, _)| s.label() == (exit, k))
                        .ok_or_else(|| TranslateError::BadRun("missing resolution".into()))?;
                    *step.targets.get(&q).ok_or_else(|| {
                        TranslateError::BadRun("state missing from resolution print".into())
                    })?
                };
                next.config.set(e, target);
                if p.receptions(q, msg).count() > 1 {
                    choices.insert(e, target);
                }
            }
            // the sender's new counter
            if !te.sender_witness {
                let x = if sys.cls.action.contains(&te.t.dst) {
                    sys.x_action(te.t.dst)
                } else if let Some(lab) = te.joined {
                    sys.x_pair(lab.0, lab.1)
                } else if let Some(fresh) = &te.new_summary {
                    sys.x_pair(fresh.exit, fresh.id)
                } else {
                    return Err(TranslateError::BadRun(
                        "sender entered a waiting state without a summary".into(),
                    ));
                };
                next.map.set(sender, x);
            }
            let step = Step {
                sender,
                transition: te.t,
                receivers: BTreeSet::new(),
                choices,
            };
            Ok((next, Some(step)))
        }
        EdgeInfo::SmileyBack | EdgeInfo::ToFinal | EdgeInfo::Pump | EdgeInfo::Enter => {
            if let SLoc::Co { set, .. } = &edge.dst {
                next.set = set.clone();
            }
            Ok((next, None))
        }
        EdgeInfo::ToPreFinal | EdgeInfo::PreToFinal | EdgeInfo::FinalDrain | EdgeInfo::Reset => {
            Ok((next, None))
        }
    }
}

/// Expands a machine run from `s0` with zero counters to `(s_f, 0)` into a
/// grounded protocol execution ending with every process on the target
/// state. The run must be reset-free (shortest runs are).
pub fn translate_run_to_execution(
    sys: &SummarySystem,
    run: &[(EdgeInfo, SLoc, Vec<i64>)],
) -> Result<Trace, TranslateError> {
    let q_f = match sys.variant {
        Variant::Synchro { q_f } | Variant::Action { q_f } => q_f,
        Variant::Smiley { .. } => {
            return Err(TranslateError::BadRun(
                "synchronization run expected".into(),
            ))
        }
    };
    let n = run
        .iter()
        .take_while(|(i, _, _)| matches!(i, EdgeInfo::Pump))
        .count();
    if n == 0 {
        return Err(TranslateError::BadRun(
            "runs must add at least one process".into(),
        ));
    }
    if run.iter().any(|(i, _, _)| matches!(i, EdgeInfo::Reset)) {
        return Err(TranslateError::BadRun("resetting run".into()));
    }
    let mut st = SimState {
        set: CoherentSet::empty(),
        vals: vec![0; sys.counter_count()],
        config: IndexedConfig::grounded(&sys.protocol, n),
        map: WitnessMap(vec![sys.x_action(sys.protocol.initial); n]),
        witness: None,
    };
    st.vals[sys.x_action(sys.protocol.initial)] = n as i64;
    let mut steps: Vec<Step> = Vec::new();
    for (info, loc, vals) in run.iter().skip(n) {
        match info {
            EdgeInfo::Pump => {
                return Err(TranslateError::BadRun(
                    "pump after the initial phase".into(),
                ))
            }
            EdgeInfo::Enter => continue,
            _ => {}
        }
        let edge = SysEdge {
            delta: vec![],
            dst: loc.clone(),
            meta: info.clone(),
        };
        // recompute the delta from the recorded valuations
        let mut delta: Vec<(usize, i64)> = Vec::new();
        for (i, &v) in vals.iter().enumerate() {
            let d = v - st.vals[i];
            if d != 0 {
                delta.push((i, d));
            }
        }
        let edge = SysEdge { delta, ..edge };
        let (next, step) = apply_edge(sys, &st, &edge)?;
        if let Some(s) = step {
            steps.push(s);
        }
        st = next;
    }
    if !st.config.states().iter().all(|&q| q == q_f) {
        return Err(TranslateError::BadRun(
            "run does not gather every process on the target".into(),
        ));
    }
    let trace = Trace {
        initial: IndexedConfig::grounded(&sys.protocol, n),
        steps,
    };
    validate_trace(&sys.protocol, &trace, SemanticsKind::Broadcast)
        .map_err(|e| TranslateError::BadTrace(e.to_string()))?;
    Ok(trace)
}

#[derive(Debug)]
pub enum ReprOutcome {
    /// The configuration is a representative; per exit state, the arrival
    /// index of each group and the identifier assigned to it.
    Representative(BTreeMap<(StateId, usize), u32>),
    Not(String),
}

/// Checks the representative conditions of a machine configuration against
/// index `i` of a well-formed execution, deriving the (forced) injection
/// from arrival indices to summary identifiers.
pub fn check_representative(
    sys: &SummarySystem,
    configs: &[IndexedConfig],
    i: usize,
    set: &CoherentSet,
    vals: &[i64],
) -> ReprOutcome {
    let p = &sys.protocol;
    // counters of action states count their population exactly
    for &q in sys.cls.action.iter() {
        let have = vals[sys.x_action(q)];
        let want = configs[i].iter().filter(|&(_, s)| s == q).count() as i64;
        if have != want {
            return ReprOutcome::Not(format!(
                "counter of action state {} is {have}, population is {want}",
                p.state_name(q)
            ));
        }
    }
    // group waiting processes by (next action state, arrival index)
    let mut groups: BTreeMap<(StateId, usize), BTreeSet<usize>> = BTreeMap::new();
    for (e, q) in configs[i].iter() {
        if !sys.cls.waiting.contains(&q) {
            continue;
        }
        let na = next_action(p, configs, i, e).expect("waiting process");
        let state = na.state.unwrap_or(sys.q_u);
        groups.entry((state, na.index)).or_default().insert(e);
    }
    let mut r: BTreeMap<(StateId, usize), u32> = BTreeMap::new();
    let mut matched: BTreeSet<(StateId, u32)> = BTreeSet::new();
    for ((q_a, j), procs) in &groups {
        let print: BTreeSet<StateId> = procs.iter().map(|&e| configs[i].get(e)).collect();
        let summary = set
            .iter()
            .find(|s| s.exit == *q_a && s.print == print);
        let Some(summary) = summary else {
            return ReprOutcome::Not(format!(
                "no summary with exit {} and the group print",
                p.state_name(*q_a)
            ));
        };
        if vals[sys.x_pair(*q_a, summary.id)] != procs.len() as i64 {
            return ReprOutcome::Not(format!(
                "summary counter ({}, {}) does not count its group",
                p.state_name(*q_a),
                summary.id
            ));
        }
        r.insert((*q_a, *j), summary.id);
        matched.insert(summary.label());
    }
    // no extra summaries, and unused counters are zero
    for s in set.iter() {
        if !matched.contains(&s.label()) {
            return ReprOutcome::Not(format!("extra summary {}", s.render(p)));
        }
    }
    for &q in sys.cls.action.iter() {
        for k in 1..=sys.max_id() {
            if !matched.contains(&(q, k)) && vals[sys.x_pair(q, k)] != 0 {
                return ReprOutcome::Not(format!(
                    "unused counter ({}, {k}) is nonzero",
                    p.state_name(q)
                ));
            }
        }
    }
    ReprOutcome::Representative(r)
}

/// Replays a well-formed grounded synchronizing execution inside the
/// machine: one broadcast edge per protocol step followed by the transfers
/// of every group that exited, ending in `(s_f, 0)`. Every intermediate
/// machine configuration is a representative of its trace index.
pub fn translate_execution_to_run(
    sys: &SummarySystem,
    tr: &Trace,
) -> Result<Vec<(EdgeInfo, SLoc, Vec<i64>)>, TranslateError> {
    let Variant::Synchro { q_f } = sys.variant else {
        return Err(TranslateError::BadTrace(
            "waiting-state synchronization expected".into(),
        ));
    };
    let p = &sys.protocol;
    let configs = tr
        .try_configs(p, SemanticsKind::Broadcast)
        .map_err(|e| TranslateError::BadTrace(e.to_string()))?;
    if crate::semantics::is_well_formed(p, &configs).is_err() {
        return Err(TranslateError::BadTrace("execution is not well-formed".into()));
    }
    if configs[0].states().iter().any(|&q| q != p.initial) {
        return Err(TranslateError::BadTrace("execution is not grounded".into()));
    }
    let last = configs.len() - 1;
    if configs[last].states().iter().any(|&q| q != q_f) {
        return Err(TranslateError::BadTrace(
            "execution does not synchronize on the target".into(),
        ));
    }
    let n = configs[0].len();
    let mut run: Vec<(EdgeInfo, SLoc, Vec<i64>)> = Vec::new();
    let mut vals = vec![0i64; sys.counter_count()];
    for _ in 0..n {
        vals[sys.x_action(p.initial)] += 1;
        run.push((EdgeInfo::Pump, SLoc::S0, vals.clone()));
    }
    let mut set = CoherentSet::empty();
    run.push((EdgeInfo::Enter, SLoc::co(set.clone()), vals.clone()));
    // r: (exit, arrival index) -> identifier
    let mut r: BTreeMap<(StateId, usize), u32> = BTreeMap::new();

    for i in 0..tr.steps.len() {
        let step = &tr.steps[i];
        let t = step.transition;
        let msg = t.op.msg();
        // evolve every summary according to the trace
        let mut resolutions: Vec<(Summary, super::SummaryStep)> = Vec::new();
        let mut survivors: Vec<Summary> = Vec::new();
        let mut died: Vec<Summary> = Vec::new();
        for s in set.iter() {
            // the arrival index of this summary's group
            let (&(_, j), _) = r
                .iter()
                .find(|(&(q_a, _), &k)| q_a == s.exit && k == s.id)
                .ok_or_else(|| TranslateError::BadTrace("identifier map out of sync".into()))?;
            // reception target per print state, read off the group members
            // (well-formedness makes members on one state move identically)
            let mut targets: BTreeMap<StateId, StateId> = BTreeMap::new();
            for &w in &s.print {
                let tgt = if sys.cls.receivable[w.ix()].contains(&msg) {
                    let e = configs[i]
                        .iter()
                        .find(|&(e, q)| {
                            q == w && {
                                let na = next_action(p, &configs, i, e).unwrap();
                                (na.state.unwrap_or(sys.q_u), na.index) == (s.exit, j)
                            }
                        })
                        .map(|(e, _)| e)
                        .ok_or_else(|| {
                            TranslateError::BadTrace("group member missing on a print state".into())
                        })?;
                    configs[i + 1].get(e)
                } else {
                    w
                };
                targets.insert(w, tgt);
            }
            let print2: BTreeSet<StateId> = targets.values().copied().collect();
            if print2.len() == 1 && print2.iter().next() == Some(&s.exit) {
                died.push(s.clone());
                resolutions.push((
                    s.clone(),
                    super::SummaryStep {
                        targets,
                        outcome: SummaryOutcome::Done,
                    },
                ));
            } else {
                let s2 = Summary {
                    exit: s.exit,
                    id: s.id,
                    print: print2,
                };
                survivors.push(s2.clone());
                resolutions.push((
                    s.clone(),
                    super::SummaryStep {
                        targets,
                        outcome: SummaryOutcome::Plain(s2),
                    },
                ));
            }
        }
        // classify the sender
        let e_q = step.sender;
        let dst = t.dst;
        let mut joined: Option<(StateId, u32)> = None;
        let mut fresh: Option<Summary> = None;
        if sys.cls.waiting.contains(&dst) {
            let na = next_action(p, &configs, i + 1, e_q).unwrap();
            let key = (na.state.unwrap_or(sys.q_u), na.index);
            if let Some(&k) = r.get(&key) {
                // join the existing group
                let lab = (key.0, k);
                let pos = survivors
                    .iter()
                    .position(|s| s.label() == lab)
                    .ok_or_else(|| TranslateError::BadTrace("joined group vanished".into()))?;
                let mut s2 = survivors[pos].clone();
                s2.print.insert(dst);
                // fix up the resolution to a join
                let orig = resolutions
                    .iter_mut()
                    .find(|(s, _)| s.label() == lab)
                    .unwrap();
                orig.1.outcome = SummaryOutcome::Joined(s2.clone());
                survivors[pos] = s2;
                joined = Some(lab);
            } else {
                // open a fresh group with the smallest unused identifier
                let labels = set.labels();
                let k = (1..=sys.max_id())
                    .find(|&k| {
                        !labels.contains(&(key.0, k)) && vals[sys.x_pair(key.0, k)] == 0
                    })
                    .ok_or_else(|| TranslateError::BadTrace("identifiers exhausted".into()))?;
                let s2 = Summary::new([dst], key.0, k);
                survivors.push(s2.clone());
                fresh = Some(s2);
                r.insert(key, k);
            }
        }
        let set2 = CoherentSet::new(survivors)
            .ok_or_else(|| TranslateError::BadTrace("incoherent successor".into()))?;
        // counter updates of the broadcast edge
        vals[sys.x_action(t.src)] -= 1;
        if vals[sys.x_action(t.src)] < 0 {
            return Err(TranslateError::BadTrace("sender counter underflow".into()));
        }
        if sys.cls.action.contains(&dst) {
            vals[sys.x_action(dst)] += 1;
        } else if let Some(lab) = joined {
            vals[sys.x_pair(lab.0, lab.1)] += 1;
        } else if let Some(f) = &fresh {
            vals[sys.x_pair(f.exit, f.id)] += 1;
        }
        let info = EdgeInfo::Trans(super::build::TransEdge {
            t,
            sender_witness: false,
            resolutions,
            joined,
            new_summary: fresh,
            witness_move: None,
        });
        set = set2;
        run.push((info, SLoc::co(set.clone()), vals.clone()));
        // transfers for the groups that exited at this step
        for s in died {
            r.remove(&(s.exit, i + 1));
            let x_from = sys.x_pair(s.exit, s.id);
            let x_to = sys.x_action(s.exit);
            while vals[x_from] > 0 {
                vals[x_from] -= 1;
                vals[x_to] += 1;
                run.push((
                    EdgeInfo::Drain {
                        exit: s.exit,
                        id: s.id,
                    },
                    SLoc::co(set.clone()),
                    vals.clone(),
                ));
            }
        }
        // intermediate machine configurations are representatives
        match check_representative(sys, &configs, i + 1, &set, &vals) {
            ReprOutcome::Representative(_) => {}
            ReprOutcome::Not(why) => {
                return Err(TranslateError::BadTrace(format!(
                    "intermediate configuration at {} is not a representative: {why}",
                    i + 1
                )))
            }
        }
    }
    // the final location must be the singleton final summary
    let sf = sys.final_summary().expect("synchronization variant");
    if !(set.len() == 1 && set.iter().next() == Some(&sf)) {
        return Err(TranslateError::BadTrace(
            "execution does not end in the final summary".into(),
        ));
    }
    run.push((EdgeInfo::ToFinal, SLoc::Sf, vals.clone()));
    let x = sys.x_pair(sys.q_u, 1);
    while vals[x] > 0 {
        vals[x] -= 1;
        run.push((EdgeInfo::FinalDrain, SLoc::Sf, vals.clone()));
    }
    if vals.iter().any(|&v| v != 0) {
        return Err(TranslateError::BadTrace(
            "run does not end with empty counters".into(),
        ));
    }
    Ok(run)
}

/// Replays a run produced by [`translate_execution_to_run`] or by the
/// bounded searches against the machine's own successor relation.
pub fn replay_run(
    sys: &SummarySystem,
    run: &[(EdgeInfo, SLoc, Vec<i64>)],
) -> Result<(), TranslateError> {
    let mut loc = sys.initial_loc();
    let mut vals = vec![0i64; sys.counter_count()];
    for (step_no, (info, want_loc, want_vals)) in run.iter().enumerate() {
        let edges = sys.edges_from(&loc, &lift(&vals));
        let mut found = false;
        for e in edges {
            if e.dst != *want_loc {
                continue;
            }
            let mut v2 = vals.clone();
            let mut ok = true;
            for &(i, d) in &e.delta {
                v2[i] += d;
                if v2[i] < 0 {
                    ok = false;
                    break;
                }
            }
            if !ok || &v2 != want_vals {
                continue;
            }
            if std::mem::discriminant(&e.meta) != std::mem::discriminant(info) {
                continue;
            }
            vals = v2;
            loc = e.dst;
            found = true;
            break;
        }
        if !found {
            return Err(TranslateError::BadRun(format!(
                "step {step_no} does not match any machine edge"
            )));
        }
    }
    Ok(())
}

impl SummarySystem {
    pub(super) fn actions_len(&self) -> usize {
        self.cls.action.len()
    }

    pub(super) fn action_at(&self, i: usize) -> StateId {
        *self.cls.action.iter().nth(i).expect("action index")
    }

    pub(super) fn pair_at(&self, x: usize) -> (StateId, u32) {
        let na = self.actions_len();
        assert!(x >= na, "not a summary counter");
        let j = x - na;
        let w = self.max_id() as usize;
        (self.action_at(j / w), (j % w) as u32 + 1)
    }
}
