//! The counter machines simulating a Wait-Only broadcast network, built
//! lazily over coherent summary sets. Three variants share the core:
//! synchronization onto a waiting state (with final summary and drain),
//! synchronization onto an action state (pre-final handshake and reset), and
//! repeated coverability (transitions of the designated broadcast routed
//! through tagged locations).

use std::collections::{BTreeSet, HashMap};
use std::sync::RwLock;

use thiserror::Error;

use crate::protocol::{Classification, Op, Protocol, StateId, Transition};
use crate::vass::{Delta, OmegaVal, OmegaVals, SysEdge, Vass, VassSys};

use super::{summary_successors, CoherentSet, Summary, SummaryOutcome, SummaryStep};

/// Per-summary evolution attached to a constructed edge; the original
/// summary together with the reception choices and the outcome.
pub type SummaryResolution = (Summary, SummaryStep);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// All processes must gather on a waiting state.
    Synchro { q_f: StateId },
    /// All processes must gather on an action state.
    Action { q_f: StateId },
    /// A designated transition must recur; `track_witness` switches on the
    /// location product with the witness process state, needed when the
    /// transition is a reception.
    Smiley { t_f: Transition, track_witness: bool },
}

/// Locations of the constructed machine.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SLoc {
    S0,
    Co {
        set: CoherentSet,
        witness: Option<StateId>,
        smiley: bool,
    },
    SfPrime,
    Sf,
}

impl SLoc {
    pub fn co(set: CoherentSet) -> SLoc {
        SLoc::Co {
            set,
            witness: None,
            smiley: false,
        }
    }

    pub fn is_smiley(&self) -> bool {
        matches!(self, SLoc::Co { smiley: true, .. })
    }

    pub fn render(&self, p: &Protocol) -> String {
        match self {
            SLoc::S0 => "s0".into(),
            SLoc::Sf => "s_f".into(),
            SLoc::SfPrime => "s_fprime".into(),
            SLoc::Co {
                set,
                witness,
                smiley,
            } => {
                let mut s = String::new();
                if *smiley {
                    s.push_str("SMILEY");
                }
                s.push_str(&set.render(p));
                if let Some(w) = witness {
                    s.push('@');
                    s.push_str(p.state_name(*w));
                }
                s
            }
        }
    }
}

/// Bookkeeping attached to each constructed edge, sufficient to rebuild
/// protocol steps from machine runs.
#[derive(Debug, Clone)]
pub enum EdgeInfo {
    /// `s0` self-loop adding one process to the initial state.
    Pump,
    /// `s0` to the empty summary set.
    Enter,
    /// One broadcast.
    Trans(TransEdge),
    /// Transfer of one unit from a disappeared summary's counter to its
    /// exit-state counter.
    Drain { exit: StateId, id: u32 },
    /// Final-summary location to the final location.
    ToFinal,
    /// Drain loop at the final location.
    FinalDrain,
    /// Empty set to the pre-final location (action-state target).
    ToPreFinal,
    /// Pre-final to final (action-state target).
    PreToFinal,
    /// Reset edge from the final location back to `s0`.
    Reset,
    /// Zero edge leaving a tagged location.
    SmileyBack,
}

#[derive(Debug, Clone)]
pub struct TransEdge {
    pub t: Transition,
    /// The tracked witness process is the sender.
    pub sender_witness: bool,
    /// Evolution of every summary of the source location, in set order.
    pub resolutions: Vec<SummaryResolution>,
    /// Label of the summary the sender joins, when it does.
    pub joined: Option<(StateId, u32)>,
    /// Fresh summary the sender opens, when it does.
    pub new_summary: Option<Summary>,
    /// Reception taken by the witness, when it receives.
    pub witness_move: Option<StateId>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("protocol is not Wait-Only (offending states: {0:?})")]
    NotWaitOnly(Vec<String>),
    #[error("protocol still has broadcast self-loops; normalize first")]
    SelfLoops,
    #[error("protocol has no designated uncoverable state")]
    NoUncoverable,
    #[error("initial state must be an action state")]
    WaitingInitial,
    #[error("target `{0}` is not a waiting state")]
    TargetNotWaiting(String),
    #[error("target `{0}` is not an action state")]
    TargetNotAction(String),
    #[error("designated transition is not in the protocol")]
    NoSuchTransition,
    #[error("designated transition must be a broadcast unless the witness is tracked")]
    NotABroadcast,
}

/// A lazily materialized summary machine.
pub struct SummarySystem {
    pub protocol: Protocol,
    pub cls: Classification,
    pub q_u: StateId,
    pub variant: Variant,
    /// When set, prunes summary identifiers and exits that no representative
    /// of a well-formed execution can use. Full mode enumerates the entire
    /// transition relation of the underlying machine.
    pub reduced: bool,
    actions: Vec<StateId>,
    action_pos: Vec<Option<usize>>,
    wplus1: u32,
    /// Per state: action states reachable through receptions only.
    reach_actions: Vec<BTreeSet<StateId>>,
    /// Summary evolutions recur across millions of machine states; memoize
    /// them per (summary, transition).
    step_cache: RwLock<HashMap<(Summary, Transition), std::sync::Arc<Vec<SummaryStep>>>>,
}

impl SummarySystem {
    pub fn new(p: &Protocol, variant: Variant, reduced: bool) -> Result<SummarySystem, BuildError> {
        let (wait_only, bad) = p.check_wait_only();
        if !wait_only {
            return Err(BuildError::NotWaitOnly(
                bad.iter().map(|&q| p.state_name(q).to_string()).collect(),
            ));
        }
        if p.transitions().iter().any(|t| t.op.is_send() && t.src == t.dst) {
            return Err(BuildError::SelfLoops);
        }
        let q_u = p.uncoverable().ok_or(BuildError::NoUncoverable)?;
        let cls = p.classify();
        if cls.waiting.contains(&p.initial) {
            return Err(BuildError::WaitingInitial);
        }
        match variant {
            Variant::Synchro { q_f } => {
                if !cls.waiting.contains(&q_f) {
                    return Err(BuildError::TargetNotWaiting(p.state_name(q_f).to_string()));
                }
            }
            Variant::Action { q_f } => {
                if !cls.action.contains(&q_f) {
                    return Err(BuildError::TargetNotAction(p.state_name(q_f).to_string()));
                }
            }
            Variant::Smiley { t_f, track_witness } => {
                if !p.transitions().contains(&t_f) {
                    return Err(BuildError::NoSuchTransition);
                }
                if !t_f.op.is_send() && !track_witness {
                    return Err(BuildError::NotABroadcast);
                }
            }
        }
        let actions: Vec<StateId> = cls.action.iter().copied().collect();
        let mut action_pos = vec![None; p.num_states()];
        for (i, &q) in actions.iter().enumerate() {
            action_pos[q.ix()] = Some(i);
        }
        let wplus1 = cls.waiting.len() as u32 + 1;
        let reach_actions = receive_reachable_actions(p, &cls);
        Ok(SummarySystem {
            protocol: p.clone(),
            cls,
            q_u,
            variant,
            reduced,
            actions,
            action_pos,
            wplus1,
            reach_actions,
            step_cache: RwLock::new(HashMap::new()),
        })
    }

    /// Memoized [`summary_successors`].
    pub(super) fn steps_of(&self, s: &Summary, t: Transition) -> std::sync::Arc<Vec<SummaryStep>> {
        let key = (s.clone(), t);
        if let Some(hit) = self.step_cache.read().unwrap().get(&key) {
            return hit.clone();
        }
        let val = std::sync::Arc::new(summary_successors(&self.protocol, s, t));
        self.step_cache.write().unwrap().insert(key, val.clone());
        val
    }

    /// Identifier range for summaries: `[1, |Q_W| + 1]`.
    pub fn max_id(&self) -> u32 {
        self.wplus1
    }

    pub fn counter_count(&self) -> usize {
        self.actions.len() * (1 + self.wplus1 as usize)
    }

    pub fn x_action(&self, q: StateId) -> usize {
        self.action_pos[q.ix()].expect("action state")
    }

    pub fn x_pair(&self, q: StateId, k: u32) -> usize {
        debug_assert!((1..=self.wplus1).contains(&k));
        self.actions.len()
            + self.action_pos[q.ix()].expect("action state") * self.wplus1 as usize
            + (k - 1) as usize
    }

    pub fn counter_name(&self, i: usize) -> String {
        let na = self.actions.len();
        if i < na {
            format!("xs_{}", self.protocol.state_name(self.actions[i]))
        } else {
            let j = i - na;
            let q = self.actions[j / self.wplus1 as usize];
            let k = (j % self.wplus1 as usize) + 1;
            format!("xp_{}__{}", self.protocol.state_name(q), k)
        }
    }

    /// The final summary of the waiting-target construction.
    pub fn final_summary(&self) -> Option<Summary> {
        match self.variant {
            Variant::Synchro { q_f } => Some(Summary::new([q_f], self.q_u, 1)),
            _ => None,
        }
    }

    pub fn initial_witness(&self) -> Option<StateId> {
        match self.variant {
            Variant::Smiley {
                track_witness: true,
                ..
            } => Some(self.protocol.initial),
            _ => None,
        }
    }

    fn creation_ids(&self, set: &CoherentSet, q_a: StateId, vals: &OmegaVals) -> Vec<u32> {
        let labels = set.labels();
        let unused: Vec<u32> = (1..=self.wplus1)
            .filter(|&k| !labels.contains(&(q_a, k)))
            .collect();
        if !self.reduced {
            return unused;
        }
        // zero-valued identifiers are interchangeable: keep the smallest;
        // accelerated counters must stay available for simulation
        let mut out = Vec::new();
        let mut took_zero = false;
        for &k in &unused {
            match vals[self.x_pair(q_a, k)] {
                OmegaVal::Fin(0) if !took_zero => {
                    out.push(k);
                    took_zero = true;
                }
                OmegaVal::Omega => out.push(k),
                _ => {}
            }
        }
        out
    }

    fn creation_exits(&self, entered: StateId) -> Vec<StateId> {
        if !self.reduced {
            return self.actions.clone();
        }
        let mut out: Vec<StateId> = self.reach_actions[entered.ix()].iter().copied().collect();
        if !out.contains(&self.q_u) {
            out.push(self.q_u);
        }
        out
    }

    fn summary_viable(&self, s: &Summary) -> bool {
        if !self.reduced || s.exit == self.q_u {
            return true;
        }
        s.print
            .iter()
            .all(|w| self.reach_actions[w.ix()].contains(&s.exit))
    }

    /// Broadcast edges from a plain summary-set location.
    fn trans_edges(
        &self,
        set: &CoherentSet,
        witness: Option<StateId>,
        vals: &OmegaVals,
    ) -> Vec<SysEdge<SLoc, EdgeInfo>> {
        let p = &self.protocol;
        let mut out = Vec::new();
        for &t in p.transitions() {
            if !t.op.is_send() {
                continue;
            }
            let msg = t.op.msg();
            // per-summary options, in set order
            let summaries: Vec<&Summary> = set.iter().collect();
            let options: Vec<std::sync::Arc<Vec<SummaryStep>>> = summaries
                .iter()
                .map(|s| self.steps_of(s, t))
                .collect();
            if options.iter().any(|o| o.is_empty()) {
                continue;
            }
            let mut combos: Vec<Vec<usize>> = vec![vec![]];
            for opts in &options {
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

            // witness reception branches
            let witness_branches: Vec<Option<StateId>> = match witness {
                Some(w) if self.cls.receivable[w.ix()].contains(&msg) => {
                    p.receptions(w, msg).map(|r| Some(r.dst)).collect()
                }
                _ => vec![None],
            };

            // senders: one anonymous process, and the witness when placed
            // at the source
            let mut sender_kinds = vec![false];
            if witness == Some(t.src) {
                sender_kinds.push(true);
            }

            for combo in &combos {
                let mut resolutions: Vec<SummaryResolution> = Vec::new();
                let mut joined_count = 0usize;
                let mut joined: Option<(StateId, u32)> = None;
                let mut survivors: Vec<Summary> = Vec::new();
                for (si, &oi) in combo.iter().enumerate() {
                    let step = options[si][oi].clone();
                    match &step.outcome {
                        SummaryOutcome::Plain(s2) => survivors.push(s2.clone()),
                        SummaryOutcome::Joined(s2) => {
                            joined_count += 1;
                            joined = Some(summaries[si].label());
                            survivors.push(s2.clone());
                        }
                        SummaryOutcome::Done => {}
                    }
                    resolutions.push((summaries[si].clone(), step));
                }
                if joined_count > 1 {
                    continue;
                }
                if !survivors.iter().all(|s| self.summary_viable(s)) {
                    continue;
                }

                for &sender_witness in &sender_kinds {
                    for &wmove in &witness_branches {
                        let (wmove, new_witness) = if sender_witness {
                            (None, Some(t.dst))
                        } else {
                            (wmove, wmove.or(witness))
                        };
                        let smiley = self.edge_is_tagged(t, sender_witness, witness, wmove);

                        let base_delta: Delta = if sender_witness {
                            vec![]
                        } else {
                            vec![(self.x_action(t.src), -1)]
                        };

                        if self.cls.action.contains(&t.dst) {
                            // the sender lands on an action state
                            if joined_count > 0 {
                                continue;
                            }
                            let Some(set2) = CoherentSet::new(survivors.clone()) else {
                                continue;
                            };
                            let mut delta = base_delta.clone();
                            if !sender_witness {
                                delta.push((self.x_action(t.dst), 1));
                            }
                            out.push(self.make_trans_edge(
                                t,
                                sender_witness,
                                resolutions.clone(),
                                None,
                                None,
                                wmove,
                                delta,
                                set2,
                                new_witness,
                                smiley,
                            ));
                        } else if sender_witness {
                            // the witness enters a waiting state but is
                            // tracked in the location, not in a summary
                            if joined_count > 0 {
                                continue;
                            }
                            let Some(set2) = CoherentSet::new(survivors.clone()) else {
                                continue;
                            };
                            out.push(self.make_trans_edge(
                                t,
                                true,
                                resolutions.clone(),
                                None,
                                None,
                                wmove,
                                base_delta.clone(),
                                set2,
                                new_witness,
                                smiley,
                            ));
                        } else if joined_count == 1 {
                            // the sender joins the summary that advertised it
                            let Some(set2) = CoherentSet::new(survivors.clone()) else {
                                continue;
                            };
                            let lab = joined.unwrap();
                            let mut delta = base_delta.clone();
                            delta.push((self.x_pair(lab.0, lab.1), 1));
                            out.push(self.make_trans_edge(
                                t,
                                false,
                                resolutions.clone(),
                                Some(lab),
                                None,
                                wmove,
                                delta,
                                set2,
                                new_witness,
                                smiley,
                            ));
                        } else {
                            // the sender opens a fresh summary; never-acting
                            // groups all share one arrival class, so a second
                            // group with the uncoverable exit is never needed
                            let has_qu = self.reduced
                                && survivors.iter().any(|s| s.exit == self.q_u);
                            for q_a in self.creation_exits(t.dst) {
                                if q_a == self.q_u && has_qu {
                                    continue;
                                }
                                for k in self.creation_ids(set, q_a, vals) {
                                    let fresh = Summary::new([t.dst], q_a, k);
                                    if !self.summary_viable(&fresh) {
                                        continue;
                                    }
                                    let mut all = survivors.clone();
                                    all.push(fresh.clone());
                                    let Some(set2) = CoherentSet::new(all) else {
                                        continue;
                                    };
                                    let mut delta = base_delta.clone();
                                    delta.push((self.x_pair(q_a, k), 1));
                                    out.push(self.make_trans_edge(
                                        t,
                                        false,
                                        resolutions.clone(),
                                        None,
                                        Some(fresh),
                                        wmove,
                                        delta,
                                        set2,
                                        new_witness,
                                        smiley,
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Whether a broadcast edge carries the designated transition of the
    /// repeated-coverability variant.
    pub(super) fn tagged(
        &self,
        t: Transition,
        sender_witness: bool,
        witness: Option<StateId>,
        wmove: Option<StateId>,
    ) -> bool {
        self.edge_is_tagged(t, sender_witness, witness, wmove)
    }

    /// Feasible exit states for a summary opened in `entered`.
    pub(super) fn exits_for(&self, entered: StateId) -> Vec<StateId> {
        self.creation_exits(entered)
    }

    /// Whether `exit` is reception-reachable from the waiting state `w`.
    pub(super) fn reachable_exit(&self, w: StateId, exit: StateId) -> bool {
        self.reach_actions[w.ix()].contains(&exit)
    }

    fn edge_is_tagged(
        &self,
        t: Transition,
        sender_witness: bool,
        witness: Option<StateId>,
        wmove: Option<StateId>,
    ) -> bool {
        match self.variant {
            Variant::Smiley { t_f, track_witness } => match t_f.op {
                Op::Send(_) if !track_witness => t == t_f,
                Op::Send(_) => sender_witness && t == t_f,
                Op::Receive(m) => {
                    !sender_witness
                        && witness == Some(t_f.src)
                        && wmove == Some(t_f.dst)
                        && t.op.msg() == m
                }
            },
            _ => false,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn make_trans_edge(
        &self,
        t: Transition,
        sender_witness: bool,
        resolutions: Vec<SummaryResolution>,
        joined: Option<(StateId, u32)>,
        new_summary: Option<Summary>,
        witness_move: Option<StateId>,
        delta: Delta,
        set2: CoherentSet,
        witness: Option<StateId>,
        smiley: bool,
    ) -> SysEdge<SLoc, EdgeInfo> {
        SysEdge {
            delta,
            dst: SLoc::Co {
                set: set2,
                witness,
                smiley,
            },
            meta: EdgeInfo::Trans(TransEdge {
                t,
                sender_witness,
                resolutions,
                joined,
                new_summary,
                witness_move,
            }),
        }
    }

    /// Materializes the location-reachable slice as an explicit VASS, using
    /// the full (valuation-independent) transition relation. Returns whether
    /// the location cap sufficed.
    pub fn materialize(&self, max_locs: usize) -> (Vass, bool) {
        use std::collections::{HashMap, VecDeque};
        let all_omega: OmegaVals = vec![OmegaVal::Omega; self.counter_count()];
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<SLoc, usize> = HashMap::new();
        let mut order: Vec<SLoc> = Vec::new();
        let mut queue = VecDeque::new();
        let mut complete = true;
        let start = SLoc::S0;
        index.insert(start.clone(), 0);
        order.push(start.clone());
        names.push(start.render(&self.protocol));
        queue.push_back(start);
        let mut edges: Vec<(usize, Delta, usize)> = Vec::new();
        while let Some(loc) = queue.pop_front() {
            let u = index[&loc];
            for e in self.edges_from(&loc, &all_omega) {
                let v = match index.get(&e.dst) {
                    Some(&v) => v,
                    None => {
                        if order.len() >= max_locs {
                            complete = false;
                            continue;
                        }
                        let v = order.len();
                        index.insert(e.dst.clone(), v);
                        order.push(e.dst.clone());
                        names.push(e.dst.render(&self.protocol));
                        queue.push_back(e.dst.clone());
                        v
                    }
                };
                if !edges.contains(&(u, e.delta.clone(), v)) {
                    edges.push((u, e.delta, v));
                }
            }
        }
        let counters: Vec<String> = (0..self.counter_count())
            .map(|i| self.counter_name(i))
            .collect();
        let init_name = names[0].clone();
        let mut v = Vass::new(&self.protocol.name, names, counters, &init_name);
        for (a, d, b) in edges {
            v.add_transition(crate::vass::LocId(a as u32), d, crate::vass::LocId(b as u32));
        }
        (v, complete)
    }
}

/// For every state, the action states reachable by following receptions.
fn receive_reachable_actions(p: &Protocol, cls: &Classification) -> Vec<BTreeSet<StateId>> {
    let mut reach: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); p.num_states()];
    for q in p.state_ids() {
        if cls.action.contains(&q) {
            reach[q.ix()].insert(q);
        }
    }
    loop {
        let mut changed = false;
        for t in p.transitions() {
            if let Op::Receive(_) = t.op {
                let add: Vec<StateId> = reach[t.dst.ix()].iter().copied().collect();
                for a in add {
                    if reach[t.src.ix()].insert(a) {
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return reach;
        }
    }
}

impl VassSys for SummarySystem {
    type Loc = SLoc;
    type Meta = EdgeInfo;

    fn initial_loc(&self) -> SLoc {
        SLoc::S0
    }

    fn num_counters(&self) -> usize {
        self.counter_count()
    }

    fn edges_from(&self, loc: &SLoc, vals: &OmegaVals) -> Vec<SysEdge<SLoc, EdgeInfo>> {
        let mut out: Vec<SysEdge<SLoc, EdgeInfo>> = Vec::new();
        match loc {
            SLoc::S0 => {
                out.push(SysEdge {
                    delta: vec![(self.x_action(self.protocol.initial), 1)],
                    dst: SLoc::S0,
                    meta: EdgeInfo::Pump,
                });
                out.push(SysEdge {
                    delta: vec![],
                    dst: SLoc::Co {
                        set: CoherentSet::empty(),
                        witness: self.initial_witness(),
                        smiley: false,
                    },
                    meta: EdgeInfo::Enter,
                });
            }
            SLoc::SfPrime => {
                if let Variant::Action { q_f } = self.variant {
                    out.push(SysEdge {
                        delta: vec![(self.x_action(q_f), 1)],
                        dst: SLoc::Sf,
                        meta: EdgeInfo::PreToFinal,
                    });
                }
            }
            SLoc::Sf => match self.variant {
                Variant::Synchro { .. } => {
                    out.push(SysEdge {
                        delta: vec![(self.x_pair(self.q_u, 1), -1)],
                        dst: SLoc::Sf,
                        meta: EdgeInfo::FinalDrain,
                    });
                }
                Variant::Action { q_f } => {
                    out.push(SysEdge {
                        delta: vec![(self.x_action(q_f), -1)],
                        dst: SLoc::Sf,
                        meta: EdgeInfo::FinalDrain,
                    });
                    out.push(SysEdge {
                        delta: vec![],
                        dst: SLoc::S0,
                        meta: EdgeInfo::Reset,
                    });
                }
                Variant::Smiley { .. } => {}
            },
            SLoc::Co {
                set,
                witness,
                smiley,
            } => {
                if *smiley {
                    return vec![SysEdge {
                        delta: vec![],
                        dst: SLoc::Co {
                            set: set.clone(),
                            witness: *witness,
                            smiley: false,
                        },
                        meta: EdgeInfo::SmileyBack,
                    }];
                }
                out.extend(self.trans_edges(set, *witness, vals));
                // counter transfers for disappeared summaries
                let labels = set.labels();
                for &q_a in &self.actions {
                    for k in 1..=self.wplus1 {
                        if labels.contains(&(q_a, k)) {
                            continue;
                        }
                        if self.reduced && vals[self.x_pair(q_a, k)] == OmegaVal::Fin(0) {
                            continue;
                        }
                        out.push(SysEdge {
                            delta: vec![(self.x_action(q_a), 1), (self.x_pair(q_a, k), -1)],
                            dst: loc.clone(),
                            meta: EdgeInfo::Drain { exit: q_a, id: k },
                        });
                    }
                }
                match self.variant {
                    Variant::Synchro { .. } => {
                        let sf = self.final_summary().unwrap();
                        if set.len() == 1 && set.iter().next() == Some(&sf) {
                            out.push(SysEdge {
                                delta: vec![],
                                dst: SLoc::Sf,
                                meta: EdgeInfo::ToFinal,
                            });
                        }
                    }
                    Variant::Action { q_f } => {
                        if set.is_empty() {
                            out.push(SysEdge {
                                delta: vec![(self.x_action(q_f), -1)],
                                dst: SLoc::SfPrime,
                                meta: EdgeInfo::ToPreFinal,
                            });
                        }
                    }
                    Variant::Smiley { .. } => {}
                }
            }
        }
        out
    }
}
