//! Ground-truth bounded explicit-state search over the multiset counting
//! abstraction. Processes are anonymous, so a configuration is a multiset of
//! states; for repeated coverability one distinguished process is tracked
//! separately. Every Yes witness is replayed through the semantics module
//! before it is returned.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::protocol::{Op, Protocol, StateId, Transition};
use crate::semantics::{
    validate_lasso, validate_trace, IndexedConfig, Lasso, SemanticsKind, Step, Trace,
};

/// Anonymous counting abstraction of a configuration, with an optional
/// tracked process held outside the counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultisetConfig {
    counts: Vec<u32>,
    tracked: Option<StateId>,
}

impl MultisetConfig {
    pub fn new(p: &Protocol, counts: &[(StateId, u32)], tracked: Option<StateId>) -> MultisetConfig {
        let mut v = vec![0u32; p.num_states()];
        for &(q, k) in counts {
            v[q.ix()] += k;
        }
        let m = MultisetConfig { counts: v, tracked };
        assert!(m.total() >= 1, "configurations have at least one process");
        m
    }

    pub fn grounded(p: &Protocol, n: usize, track_one: bool) -> MultisetConfig {
        let mut v = vec![0u32; p.num_states()];
        let tracked = if track_one {
            assert!(n >= 1);
            v[p.initial.ix()] = (n - 1) as u32;
            Some(p.initial)
        } else {
            v[p.initial.ix()] = n as u32;
            None
        };
        MultisetConfig { counts: v, tracked }
    }

    pub fn count(&self, q: StateId) -> u32 {
        self.counts[q.ix()]
    }

    pub fn tracked(&self) -> Option<StateId> {
        self.tracked
    }

    /// Total number of processes including the tracked one.
    pub fn total(&self) -> u32 {
        self.counts.iter().sum::<u32>() + u32::from(self.tracked.is_some())
    }

    /// True when every process (tracked included) sits on `q_f`.
    pub fn all_on(&self, q_f: StateId) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(i, &c)| c == 0 || i == q_f.ix())
            && self.tracked.map_or(true, |t| t == q_f)
    }
}

/// Converts an indexed configuration to its multiset of states.
pub fn to_multiset(p: &Protocol, c: &IndexedConfig) -> MultisetConfig {
    let mut v = vec![0u32; p.num_states()];
    for (_, q) in c.iter() {
        v[q.ix()] += 1;
    }
    MultisetConfig {
        counts: v,
        tracked: None,
    }
}

/// Expands a multiset back to an indexed configuration. The tracked process,
/// when present, becomes process 1; the rest follow in state order.
pub fn from_multiset(m: &MultisetConfig) -> IndexedConfig {
    let mut states = Vec::new();
    if let Some(t) = m.tracked {
        states.push(t);
    }
    for (i, &c) in m.counts.iter().enumerate() {
        for _ in 0..c {
            states.push(StateId(i as u32));
        }
    }
    IndexedConfig::new(states)
}

/// One abstract step between multisets: which transition fired, whether the
/// tracked process sent, how each receiving state's population distributed
/// over its reception targets, and where the tracked process moved if it
/// received.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractStep {
    pub transition: Transition,
    pub sender_tracked: bool,
    /// Per source state: number of processes moving to each reception target.
    pub moves: BTreeMap<StateId, BTreeMap<StateId, u32>>,
    /// Reception taken by the tracked process, if it moved.
    pub tracked_move: Option<StateId>,
}

fn weak_compositions(n: u32, buckets: usize) -> Vec<Vec<u32>> {
    if buckets == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; buckets];
    fn rec(n: u32, i: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() - 1 {
            cur[i] = n;
            out.push(cur.clone());
            return;
        }
        for k in 0..=n {
            cur[i] = k;
            rec(n - k, i + 1, cur, out);
        }
    }
    rec(n, 0, &mut cur, &mut out);
    out
}

/// Enumerates every successor of `m` under one broadcast, together with the
/// abstract step that produces it. Under broadcast semantics every able
/// process receives; under reconfigurable semantics each receiving state
/// additionally chooses how many of its processes receive.
pub fn successors(
    p: &Protocol,
    m: &MultisetConfig,
    kind: SemanticsKind,
) -> Vec<(MultisetConfig, AbstractStep)> {
    let cls = p.classify();
    let mut out = Vec::new();
    for &t in p.transitions() {
        let Op::Send(msg) = t.op else { continue };
        let mut sender_options = Vec::new();
        if m.count(t.src) >= 1 {
            sender_options.push(false);
        }
        if m.tracked == Some(t.src) {
            sender_options.push(true);
        }
        for sender_tracked in sender_options {
            // population left to receive, after the sender steps out
            let mut base = m.counts.clone();
            if !sender_tracked {
                base[t.src.ix()] -= 1;
            }

            // receiving states and their reception targets
            let mut recv_states: Vec<(StateId, Vec<StateId>, u32)> = Vec::new();
            for (i, &c) in base.iter().enumerate() {
                let s = StateId(i as u32);
                if c == 0 || !cls.receivable[i].contains(&msg) {
                    continue;
                }
                let targets: Vec<StateId> = p.receptions(s, msg).map(|r| r.dst).collect();
                recv_states.push((s, targets, c));
            }

            // tracked process as a receiver
            let tracked_targets: Option<Vec<StateId>> = match (sender_tracked, m.tracked) {
                (false, Some(tq)) if cls.receivable[tq.ix()].contains(&msg) => {
                    Some(p.receptions(tq, msg).map(|r| r.dst).collect())
                }
                _ => None,
            };

            // all distributions of each receiving population over its targets;
            // reconfigurable semantics adds a "stay" bucket
            let mut dist_options: Vec<Vec<BTreeMap<StateId, u32>>> = Vec::new();
            for (s, targets, c) in &recv_states {
                let mut opts = Vec::new();
                match kind {
                    SemanticsKind::Broadcast => {
                        for comp in weak_compositions(*c, targets.len()) {
                            let mut mv = BTreeMap::new();
                            for (j, &k) in comp.iter().enumerate() {
                                if k > 0 {
                                    *mv.entry(targets[j]).or_insert(0) += k;
                                }
                            }
                            opts.push(mv);
                        }
                    }
                    SemanticsKind::Rbn => {
                        for comp in weak_compositions(*c, targets.len() + 1) {
                            // last bucket stays at s
                            let mut mv = BTreeMap::new();
                            for (j, &k) in comp.iter().take(targets.len()).enumerate() {
                                if k > 0 {
                                    *mv.entry(targets[j]).or_insert(0) += k;
                                }
                            }
                            opts.push(mv);
                        }
                    }
                }
                opts.sort();
                opts.dedup();
                let _ = s;
                dist_options.push(opts);
            }

            let tracked_options: Vec<Option<StateId>> = match &tracked_targets {
                None => vec![None],
                Some(targets) => match kind {
                    SemanticsKind::Broadcast => targets.iter().map(|&q| Some(q)).collect(),
                    SemanticsKind::Rbn => std::iter::once(None)
                        .chain(targets.iter().map(|&q| Some(q)))
                        .collect(),
                },
            };

            // cartesian product over receiving states
            let mut combos: Vec<Vec<usize>> = vec![vec![]];
            for opts in &dist_options {
                let mut next = Vec::new();
                for c in &combos {
                    for i in 0..opts.len() {
                        let mut c2 = c.clone();
                        c2.push(i);
                        next.push(c2);
                    }
                }
                combos = next;
            }

            for combo in combos {
                for &tmove in &tracked_options {
                    let mut counts = base.clone();
                    let mut moves = BTreeMap::new();
                    for (ri, &oi) in combo.iter().enumerate() {
                        let (s, _, _) = &recv_states[ri];
                        let mv = &dist_options[ri][oi];
                        let moved: u32 = mv.values().sum();
                        counts[s.ix()] -= moved;
                        for (&dst, &k) in mv {
                            counts[dst.ix()] += k;
                        }
                        if moved > 0 {
                            moves.insert(*s, mv.clone());
                        }
                    }
                    let tracked = if sender_tracked {
                        Some(t.dst)
                    } else if let Some(q2) = tmove {
                        Some(q2)
                    } else {
                        m.tracked
                    };
                    if !sender_tracked {
                        counts[t.dst.ix()] += 1;
                    }
                    out.push((
                        MultisetConfig { counts, tracked },
                        AbstractStep {
                            transition: t,
                            sender_tracked,
                            moves,
                            tracked_move: tmove,
                        },
                    ));
                }
            }
        }
    }
    out
}

/// Least set of states reachable under reconfigurable semantics: closed
/// under broadcast targets and under receptions whose message is sent from
/// some reachable state.
pub fn rbn_reachable_states(p: &Protocol) -> BTreeSet<StateId> {
    let mut reach: BTreeSet<StateId> = [p.initial].into_iter().collect();
    loop {
        let mut changed = false;
        let sendable: BTreeSet<_> = p
            .sends()
            .filter(|t| reach.contains(&t.src))
            .map(|t| t.op.msg())
            .collect();
        for t in p.transitions() {
            let add = match t.op {
                Op::Send(_) => reach.contains(&t.src),
                Op::Receive(m) => reach.contains(&t.src) && sendable.contains(&m),
            };
            if add && reach.insert(t.dst) {
                changed = true;
            }
        }
        if !changed {
            return reach;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchStats {
    pub explored: usize,
    pub frontier_peak: usize,
}

/// Search caps. `NoWithinBounds` answers are relative to these.
#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub max_processes: usize,
    pub max_depth: usize,
    pub max_states: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_processes: 5,
            max_depth: 10_000,
            max_states: 2_000_000,
        }
    }
}

#[derive(Debug)]
pub enum SynchroVerdict {
    Yes { n: usize, witness: Trace },
    NoWithinBounds,
}

#[derive(Debug)]
pub struct SynchroSearch {
    pub verdict: SynchroVerdict,
    pub bounds: Bounds,
    pub stats: SearchStats,
}

/// Decides bounded synchronization: for each `n <= max_processes`, BFS over
/// multisets from the grounded configuration, looking for all processes on
/// `q_f`. The witness is expanded to an indexed trace and replayed.
pub fn synchro_explicit(p: &Protocol, q_f: StateId, bounds: Bounds) -> SynchroSearch {
    let mut stats = SearchStats {
        explored: 0,
        frontier_peak: 0,
    };
    for n in 1..=bounds.max_processes {
        let init = MultisetConfig::grounded(p, n, false);
        if init.all_on(q_f) {
            let witness = Trace {
                initial: from_multiset(&init),
                steps: vec![],
            };
            return SynchroSearch {
                verdict: SynchroVerdict::Yes { n, witness },
                bounds,
                stats,
            };
        }
        let mut parent: HashMap<MultisetConfig, (MultisetConfig, AbstractStep)> = HashMap::new();
        let mut depth: HashMap<MultisetConfig, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        depth.insert(init.clone(), 0);
        queue.push_back(init.clone());
        let mut found: Option<MultisetConfig> = None;
        while let Some(cur) = queue.pop_front() {
            stats.frontier_peak = stats.frontier_peak.max(queue.len() + 1);
            stats.explored += 1;
            let d = depth[&cur];
            if d >= bounds.max_depth || depth.len() >= bounds.max_states {
                continue;
            }
            for (next, step) in successors(p, &cur, SemanticsKind::Broadcast) {
                if depth.contains_key(&next) {
                    continue;
                }
                depth.insert(next.clone(), d + 1);
                parent.insert(next.clone(), (cur.clone(), step));
                if next.all_on(q_f) {
                    found = Some(next);
                    break;
                }
                queue.push_back(next);
            }
            if found.is_some() {
                break;
            }
        }
        if let Some(target) = found {
            let mut chain = Vec::new();
            let mut cur = target;
            while let Some((prev, step)) = parent.get(&cur) {
                chain.push((prev.clone(), step.clone()));
                cur = prev.clone();
            }
            chain.reverse();
            let witness = concretize(p, &init, &chain.into_iter().map(|(_, s)| s).collect::<Vec<_>>());
            validate_trace(p, &witness, SemanticsKind::Broadcast).expect("oracle witness replays");
            return SynchroSearch {
                verdict: SynchroVerdict::Yes { n, witness },
                bounds,
                stats,
            };
        }
    }
    SynchroSearch {
        verdict: SynchroVerdict::NoWithinBounds,
        bounds,
        stats,
    }
}

/// Expands a sequence of abstract steps into a concrete indexed trace. The
/// tracked process, when present, is process 1.
fn concretize(p: &Protocol, init: &MultisetConfig, steps: &[AbstractStep]) -> Trace {
    let initial = from_multiset(init);
    let mut cur = initial.clone();
    let mut out_steps = Vec::new();
    for a in steps {
        let (step, next) = concretize_step(p, &cur, a, init.tracked.is_some());
        out_steps.push(step);
        cur = next;
    }
    Trace {
        initial,
        steps: out_steps,
    }
}

fn concretize_step(
    p: &Protocol,
    cur: &IndexedConfig,
    a: &AbstractStep,
    has_tracked: bool,
) -> (Step, IndexedConfig) {
    let tracked_ix = 1usize;
    let mut next = cur.clone();
    // pick the sender
    let sender = if a.sender_tracked {
        tracked_ix
    } else {
        cur.iter()
            .find(|&(e, q)| q == a.transition.src && (!has_tracked || e != tracked_ix))
            .map(|(e, _)| e)
            .expect("abstract step has a sender")
    };
    next.set(sender, a.transition.dst);
    let mut receivers: BTreeSet<usize> = BTreeSet::new();
    let mut choices: BTreeMap<usize, StateId> = BTreeMap::new();
    let msg = a.transition.op.msg();
    // anonymous receivers, lowest indices first per source state
    for (src, mv) in &a.moves {
        let mut pool: Vec<usize> = cur
            .iter()
            .filter(|&(e, q)| q == *src && e != sender && (!has_tracked || e != tracked_ix))
            .map(|(e, _)| e)
            .collect();
        for (&dst, &k) in mv {
            for _ in 0..k {
                let e = pool.remove(0);
                next.set(e, dst);
                receivers.insert(e);
                if p.receptions(*src, msg).count() > 1 {
                    choices.insert(e, dst);
                }
            }
        }
    }
    // tracked receiver
    if let Some(dst) = a.tracked_move {
        next.set(tracked_ix, dst);
        receivers.insert(tracked_ix);
        if p.receptions(cur.get(tracked_ix), msg).count() > 1 {
            choices.insert(tracked_ix, dst);
        }
    }
    (
        Step {
            sender,
            transition: a.transition,
            receivers,
            choices,
        },
        next,
    )
}

#[derive(Debug)]
pub enum RepcoverVerdict {
    Yes { n: usize, witness: Lasso },
    NoWithinBounds,
}

#[derive(Debug)]
pub struct RepcoverSearch {
    pub verdict: RepcoverVerdict,
    pub bounds: Bounds,
    pub stats: SearchStats,
}

/// Whether the abstract step makes the tracked process take `t_f`.
fn tracked_takes(a: &AbstractStep, prev_tracked: StateId, t_f: Transition) -> bool {
    match t_f.op {
        Op::Send(_) => a.sender_tracked && a.transition == t_f,
        Op::Receive(m) => {
            a.tracked_move == Some(t_f.dst)
                && prev_tracked == t_f.src
                && a.transition.op.msg() == m
                && !a.sender_tracked
        }
    }
}

/// Decides bounded repeated coverability: for each `n`, builds the reachable
/// (multiset, tracked-state) graph and looks for a cycle containing a step
/// where the tracked process takes `t_f`. Complete for each fixed `n` within
/// the state cap.
pub fn repcover_explicit(
    p: &Protocol,
    t_f: Transition,
    bounds: Bounds,
    kind: SemanticsKind,
) -> RepcoverSearch {
    let mut stats = SearchStats {
        explored: 0,
        frontier_peak: 0,
    };
    for n in 1..=bounds.max_processes {
        if let Some(witness) = repcover_for_n(p, t_f, n, kind, bounds.max_states, &mut stats) {
            validate_lasso(p, &witness, kind).expect("oracle lasso replays");
            return RepcoverSearch {
                verdict: RepcoverVerdict::Yes { n, witness },
                bounds,
                stats,
            };
        }
    }
    RepcoverSearch {
        verdict: RepcoverVerdict::NoWithinBounds,
        bounds,
        stats,
    }
}

fn repcover_for_n(
    p: &Protocol,
    t_f: Transition,
    n: usize,
    kind: SemanticsKind,
    max_states: usize,
    stats: &mut SearchStats,
) -> Option<Lasso> {
    let init = MultisetConfig::grounded(p, n, true);
    // explore the full reachable graph
    let mut index: HashMap<MultisetConfig, usize> = HashMap::new();
    let mut nodes: Vec<MultisetConfig> = Vec::new();
    let mut edges: Vec<Vec<(usize, bool, AbstractStep)>> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(init.clone(), 0);
    nodes.push(init.clone());
    edges.push(Vec::new());
    queue.push_back(0usize);
    while let Some(u) = queue.pop_front() {
        stats.explored += 1;
        stats.frontier_peak = stats.frontier_peak.max(queue.len() + 1);
        let cur = nodes[u].clone();
        for (next, step) in successors(p, &cur, kind) {
            let flag = tracked_takes(&step, cur.tracked().unwrap(), t_f);
            let v = match index.get(&next) {
                Some(&v) => v,
                None => {
                    if nodes.len() >= max_states {
                        continue;
                    }
                    let v = nodes.len();
                    index.insert(next.clone(), v);
                    nodes.push(next.clone());
                    edges.push(Vec::new());
                    queue.push_back(v);
                    v
                }
            };
            edges[u].push((v, flag, step));
        }
    }
    // strongly connected components (iterative Tarjan)
    let scc = tarjan_scc(&edges);
    // a flagged edge inside one component closes the lasso
    for u in 0..nodes.len() {
        for (v, flag, _) in &edges[u] {
            if *flag && scc[u] == scc[*v] {
                return Some(build_lasso(p, &nodes, &edges, &scc, u, *v));
            }
        }
    }
    None
}

fn tarjan_scc(edges: &[Vec<(usize, bool, AbstractStep)>]) -> Vec<usize> {
    let n = edges.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next_index = 0usize;
    let mut next_comp = 0usize;
    // explicit DFS stack: (node, child cursor)
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&(u, cursor)) = call.last() {
            if cursor == 0 {
                index[u] = next_index;
                low[u] = next_index;
                next_index += 1;
                stack.push(u);
                on_stack[u] = true;
            }
            if cursor < edges[u].len() {
                call.last_mut().unwrap().1 += 1;
                let v = edges[u][cursor].0;
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

/// Shortest abstract path `from -> to` through the edge list, restricted to
/// one component when `within` is set.
fn bfs_path(
    edges: &[Vec<(usize, bool, AbstractStep)>],
    scc: &[usize],
    from: usize,
    to: usize,
    within: Option<usize>,
) -> Vec<(usize, AbstractStep)> {
    if from == to {
        return vec![];
    }
    let mut prev: HashMap<usize, (usize, AbstractStep)> = HashMap::new();
    let mut queue = VecDeque::new();
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        for (v, _, step) in &edges[u] {
            if let Some(c) = within {
                if scc[*v] != c {
                    continue;
                }
            }
            if *v != from && !prev.contains_key(v) {
                prev.insert(*v, (u, step.clone()));
                if *v == to {
                    let mut path = Vec::new();
                    let mut cur = to;
                    while cur != from {
                        let (pu, step) = prev[&cur].clone();
                        path.push((cur, step));
                        cur = pu;
                    }
                    path.reverse();
                    return path;
                }
                queue.push_back(*v);
            }
        }
    }
    panic!("path must exist inside the component");
}

fn build_lasso(
    p: &Protocol,
    nodes: &[MultisetConfig],
    edges: &[Vec<(usize, bool, AbstractStep)>],
    scc: &[usize],
    u: usize,
    v: usize,
) -> Lasso {
    // stem to u, then the flagged edge u -> v, then back from v to u
    let stem: Vec<AbstractStep> = bfs_path(edges, scc, 0, u, None)
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let flag_step = edges[u]
        .iter()
        .find(|(w, f, _)| *w == v && *f)
        .map(|(_, _, s)| s.clone())
        .unwrap();
    let mut cycle: Vec<AbstractStep> = vec![flag_step];
    cycle.extend(
        bfs_path(edges, scc, v, u, Some(scc[u]))
            .into_iter()
            .map(|(_, s)| s),
    );

    // Expand concretely. One multiset cycle maps indexed configurations
    // deterministically, so iterating it eventually revisits an indexed
    // configuration; the revisited segment is the concrete cycle and earlier
    // iterations join the stem.
    let init = nodes[0].clone();
    let initial = from_multiset(&init);
    let mut cur = initial.clone();
    let mut steps: Vec<Step> = Vec::new();
    for a in &stem {
        let (s, next) = concretize_step(p, &cur, a, true);
        steps.push(s);
        cur = next;
    }
    let mut seen: HashMap<IndexedConfig, usize> = HashMap::new();
    seen.insert(cur.clone(), steps.len());
    let cycle_start;
    loop {
        for a in &cycle {
            let (s, next) = concretize_step(p, &cur, a, true);
            steps.push(s);
            cur = next;
        }
        if let Some(&at) = seen.get(&cur) {
            cycle_start = at;
            break;
        }
        seen.insert(cur.clone(), steps.len());
    }
    Lasso {
        trace: Trace { initial, steps },
        cycle_start,
        tracked: 1,
    }
}
