//! Operational semantics on process-indexed configurations, in the full
//! broadcast model and in the reconfigurable (subset-reception) model,
//! together with trace-level analyses: next-action lookups, well-formedness,
//! and the rewriting that merges co-located processes onto a common
//! reception path.
//!
//! Process indices are 1-based throughout the public API, matching the
//! configuration vectors `C(e)` with `e in [1,n]`.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::protocol::{MsgId, Op, Protocol, StateId, Transition};

/// States of the `n` processes; entry `e` (1-based) is process `e`'s state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexedConfig(Vec<StateId>);

impl IndexedConfig {
    pub fn new(states: Vec<StateId>) -> IndexedConfig {
        assert!(!states.is_empty(), "configurations have at least one process");
        IndexedConfig(states)
    }

    pub fn grounded(p: &Protocol, n: usize) -> IndexedConfig {
        IndexedConfig::new(vec![p.initial; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// State of process `e`, 1-based.
    pub fn get(&self, e: usize) -> StateId {
        self.0[e - 1]
    }

    pub fn set(&mut self, e: usize, q: StateId) {
        self.0[e - 1] = q;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, StateId)> + '_ {
        self.0.iter().enumerate().map(|(i, &q)| (i + 1, q))
    }

    pub fn states(&self) -> &[StateId] {
        &self.0
    }
}

/// Which reception rule is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticsKind {
    /// Every able process receives the broadcast.
    Broadcast,
    /// An arbitrary subset of the able processes receives it.
    Rbn,
}

/// One step: a sender fires a broadcast transition; `choices` resolves the
/// target for receivers with several receptions of the message, and
/// `receivers` names the receiving subset under reconfigurable semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub sender: usize,
    pub transition: Transition,
    /// Reconfigurable semantics only; ignored under broadcast semantics.
    pub receivers: BTreeSet<usize>,
    pub choices: BTreeMap<usize, StateId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub initial: IndexedConfig,
    pub steps: Vec<Step>,
}

/// Finite representation of an infinite execution: a stem followed by a
/// cycle whose configurations match at the seams, plus the process whose
/// recurring transition is being witnessed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub trace: Trace,
    /// Index of the configuration where the cycle starts (and ends).
    pub cycle_start: usize,
    pub tracked: usize,
}

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("sender {sender} is not at the source of the transition")]
    SenderNotAtSource { sender: usize },
    #[error("process {proc} has several receptions of the message; a choice is required")]
    UnresolvedReception { proc: usize },
    #[error("choice for process {proc} is not a reception of the broadcast message")]
    InvalidChoice { proc: usize },
    #[error("process {proc} cannot receive the message")]
    ReceiverUnable { proc: usize },
    #[error("sender {sender} listed among the receivers")]
    SenderInReceivers { sender: usize },
    #[error("transition is not a broadcast")]
    NotASend,
    #[error("step {index} invalid: {source}")]
    InvalidStep {
        index: usize,
        source: Box<SemanticsError>,
    },
    #[error("{0}")]
    Precondition(String),
}

/// Applies one broadcast step: the sender moves along `t` and every process
/// able to receive the message moves along one of its receptions, resolved
/// through `choices` when ambiguous.
pub fn broadcast_step(
    p: &Protocol,
    c: &IndexedConfig,
    sender: usize,
    t: Transition,
    choices: &BTreeMap<usize, StateId>,
) -> Result<IndexedConfig, SemanticsError> {
    let Op::Send(msg) = t.op else {
        return Err(SemanticsError::NotASend);
    };
    if c.get(sender) != t.src {
        return Err(SemanticsError::SenderNotAtSource { sender });
    }
    let mut next = c.clone();
    next.set(sender, t.dst);
    for (e, q) in c.iter() {
        if e == sender {
            continue;
        }
        if let Some(q2) = resolve_reception(p, q, msg, e, choices)? {
            next.set(e, q2);
        }
    }
    Ok(next)
}

/// Applies one reconfigurable step: only the listed receivers move.
pub fn rbn_step(
    p: &Protocol,
    c: &IndexedConfig,
    sender: usize,
    t: Transition,
    receivers: &BTreeSet<usize>,
    choices: &BTreeMap<usize, StateId>,
) -> Result<IndexedConfig, SemanticsError> {
    let Op::Send(msg) = t.op else {
        return Err(SemanticsError::NotASend);
    };
    if c.get(sender) != t.src {
        return Err(SemanticsError::SenderNotAtSource { sender });
    }
    if receivers.contains(&sender) {
        return Err(SemanticsError::SenderInReceivers { sender });
    }
    let mut next = c.clone();
    next.set(sender, t.dst);
    for &e in receivers {
        match resolve_reception(p, c.get(e), msg, e, choices)? {
            Some(q2) => next.set(e, q2),
            None => return Err(SemanticsError::ReceiverUnable { proc: e }),
        }
    }
    Ok(next)
}

/// Returns the target state for process `e` at state `q` receiving `msg`,
/// or `None` when `q` has no reception of `msg`.
fn resolve_reception(
    p: &Protocol,
    q: StateId,
    msg: MsgId,
    e: usize,
    choices: &BTreeMap<usize, StateId>,
) -> Result<Option<StateId>, SemanticsError> {
    let targets: Vec<StateId> = p.receptions(q, msg).map(|t| t.dst).collect();
    if targets.is_empty() {
        return Ok(None);
    }
    if let Some(&chosen) = choices.get(&e) {
        if targets.contains(&chosen) {
            return Ok(Some(chosen));
        }
        return Err(SemanticsError::InvalidChoice { proc: e });
    }
    if targets.len() == 1 {
        return Ok(Some(targets[0]));
    }
    Err(SemanticsError::UnresolvedReception { proc: e })
}

impl Trace {
    pub fn num_configs(&self) -> usize {
        self.steps.len() + 1
    }

    /// Replays the steps, returning every configuration. Panics on invalid
    /// traces; run [`validate_trace`] first on untrusted input.
    pub fn configs(&self, p: &Protocol, kind: SemanticsKind) -> Vec<IndexedConfig> {
        self.try_configs(p, kind).expect("trace replays")
    }

    pub fn try_configs(
        &self,
        p: &Protocol,
        kind: SemanticsKind,
    ) -> Result<Vec<IndexedConfig>, SemanticsError> {
        let mut out = vec![self.initial.clone()];
        for (i, s) in self.steps.iter().enumerate() {
            let cur = out.last().unwrap();
            let next = match kind {
                SemanticsKind::Broadcast => {
                    broadcast_step(p, cur, s.sender, s.transition, &s.choices)
                }
                SemanticsKind::Rbn => {
                    rbn_step(p, cur, s.sender, s.transition, &s.receivers, &s.choices)
                }
            }
            .map_err(|e| SemanticsError::InvalidStep {
                index: i,
                source: Box::new(e),
            })?;
            out.push(next);
        }
        Ok(out)
    }
}

/// Checks that every step of the trace replays under the given semantics.
pub fn validate_trace(
    p: &Protocol,
    tr: &Trace,
    kind: SemanticsKind,
) -> Result<(), SemanticsError> {
    tr.try_configs(p, kind).map(|_| ())
}

/// Checks a lasso: the trace replays, the cycle is nonempty, its first and
/// last configurations agree, and the tracked process index is in range.
pub fn validate_lasso(p: &Protocol, l: &Lasso, kind: SemanticsKind) -> Result<(), SemanticsError> {
    let configs = l.trace.try_configs(p, kind)?;
    if l.cycle_start + 1 >= configs.len() {
        return Err(SemanticsError::Precondition("empty lasso cycle".into()));
    }
    if configs[l.cycle_start] != configs[configs.len() - 1] {
        return Err(SemanticsError::Precondition(
            "cycle endpoints do not match".into(),
        ));
    }
    if l.tracked == 0 || l.tracked > l.trace.initial.len() {
        return Err(SemanticsError::Precondition("tracked process out of range".into()));
    }
    Ok(())
}

/// Next action state and index of a process, or `state: None` when the
/// process never reaches an action state before the trace ends (the caller
/// may substitute the designated uncoverable state; the index is then the
/// number of configurations).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NextAction {
    pub state: Option<StateId>,
    pub index: usize,
}

/// First moment `k >= j` at which process `e` is in an action state.
/// Precondition: the process is in a waiting state at index `j`.
pub fn next_action(
    p: &Protocol,
    configs: &[IndexedConfig],
    j: usize,
    e: usize,
) -> Result<NextAction, SemanticsError> {
    let cls = p.classify();
    if !cls.waiting.contains(&configs[j].get(e)) {
        return Err(SemanticsError::Precondition(format!(
            "process {e} is not in a waiting state at index {j}"
        )));
    }
    for (k, c) in configs.iter().enumerate().skip(j) {
        if cls.action.contains(&c.get(e)) {
            return Ok(NextAction {
                state: Some(c.get(e)),
                index: k,
            });
        }
    }
    Ok(NextAction {
        state: None,
        index: configs.len(),
    })
}

/// Resolves the never-acts case of [`next_action`] to the designated
/// uncoverable state of the protocol.
pub fn next_action_state(p: &Protocol, na: NextAction) -> StateId {
    na.state
        .or_else(|| p.uncoverable())
        .expect("protocol has a designated uncoverable state")
}

/// Indices at which processes waiting at `j` reach `q_a` as their next
/// action state. `q_a` may be the designated uncoverable state, collecting
/// the processes that never act.
pub fn future_index_set(
    p: &Protocol,
    configs: &[IndexedConfig],
    j: usize,
    q_a: StateId,
) -> BTreeSet<usize> {
    let cls = p.classify();
    let qu = p.uncoverable();
    let mut out = BTreeSet::new();
    for (e, q) in configs[j].iter() {
        if !cls.waiting.contains(&q) {
            continue;
        }
        let na = next_action(p, configs, j, e).expect("process is waiting");
        let state = match na.state {
            Some(s) => s,
            None => match qu {
                Some(u) => u,
                None => continue,
            },
        };
        if state == q_a {
            out.insert(na.index);
        }
    }
    out
}

/// A well-formedness violation: at index `i`, processes `e1` and `e2` share
/// a waiting state and a next action state but do not follow the same path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub e1: usize,
    pub e2: usize,
}

/// An execution is well-formed when any two processes sharing a waiting
/// state and the same next action state follow identical state sequences up
/// to the earlier arrival. Returns the lexicographically first violation.
pub fn is_well_formed(p: &Protocol, configs: &[IndexedConfig]) -> Result<(), Violation> {
    let cls = p.classify();
    let n = configs[0].len();
    let last = configs.len() - 1;
    for i in 0..configs.len() {
        for e1 in 1..=n {
            if !cls.waiting.contains(&configs[i].get(e1)) {
                continue;
            }
            let na1 = next_action(p, configs, i, e1).unwrap();
            for e2 in (e1 + 1)..=n {
                if configs[i].get(e2) != configs[i].get(e1) {
                    continue;
                }
                let na2 = next_action(p, configs, i, e2).unwrap();
                if na1.state != na2.state {
                    continue;
                }
                let upto = na1.index.min(na2.index).min(last);
                if (i..=upto).any(|k| configs[k].get(e1) != configs[k].get(e2)) {
                    return Err(Violation { index: i, e1, e2 });
                }
            }
        }
    }
    Ok(())
}

/// Rewrites the trace so that `e2` follows `e1`'s reception path from index
/// `j` until `e1` reaches the shared next action state, then waits there
/// until its own arrival index. Endpoints and all other processes are
/// preserved pointwise. `e1` must arrive no later than `e2`.
pub fn well_formize(
    p: &Protocol,
    tr: &Trace,
    j: usize,
    e1: usize,
    e2: usize,
) -> Result<Trace, SemanticsError> {
    if e1 == e2 {
        return Ok(tr.clone());
    }
    let configs = tr.try_configs(p, SemanticsKind::Broadcast)?;
    let cls = p.classify();
    let q0 = configs[j].get(e1);
    if configs[j].get(e2) != q0 || !cls.waiting.contains(&q0) {
        return Err(SemanticsError::Precondition(
            "processes do not share a waiting state at j".into(),
        ));
    }
    let na1 = next_action(p, &configs, j, e1)?;
    let na2 = next_action(p, &configs, j, e2)?;
    if na1.state != na2.state {
        return Err(SemanticsError::Precondition(
            "processes head to different next action states".into(),
        ));
    }
    if na1.index > na2.index {
        return Err(SemanticsError::Precondition(
            "first process must reach the action state no later".into(),
        ));
    }
    let last = configs.len() - 1;
    if na1.state.is_none() && configs[last].get(e1) != configs[last].get(e2) {
        return Err(SemanticsError::Precondition(
            "never-acting processes end in different states".into(),
        ));
    }
    let j2 = na2.index.min(last);
    let mut new_configs = configs.clone();
    for k in (j + 1)..=j2 {
        let v = if k <= na1.index {
            configs[k].get(e1)
        } else {
            na1.state.expect("parked state exists when j1 < j2")
        };
        new_configs[k].set(e2, v);
    }
    let out = rebuild_trace(p, tr, &new_configs)?;
    debug_assert!(validate_trace(p, &out, SemanticsKind::Broadcast).is_ok());
    Ok(out)
}

/// Reconstructs step choice maps from an edited configuration sequence,
/// keeping each step's sender and transition.
fn rebuild_trace(
    p: &Protocol,
    tr: &Trace,
    configs: &[IndexedConfig],
) -> Result<Trace, SemanticsError> {
    let mut steps = Vec::with_capacity(tr.steps.len());
    for (i, s) in tr.steps.iter().enumerate() {
        let msg = s.transition.op.msg();
        let mut choices = BTreeMap::new();
        for (e, q) in configs[i].iter() {
            if e == s.sender {
                continue;
            }
            let targets: Vec<StateId> = p.receptions(q, msg).map(|t| t.dst).collect();
            if targets.len() > 1 {
                choices.insert(e, configs[i + 1].get(e));
            }
        }
        steps.push(Step {
            sender: s.sender,
            transition: s.transition,
            receivers: BTreeSet::new(),
            choices,
        });
    }
    let out = Trace {
        initial: configs[0].clone(),
        steps,
    };
    let replayed = out.try_configs(p, SemanticsKind::Broadcast)?;
    if replayed != configs {
        return Err(SemanticsError::Precondition(
            "edited configurations do not replay".into(),
        ));
    }
    Ok(out)
}

/// Repeatedly repairs the earliest well-formedness violation until the trace
/// is well-formed. First and last configurations are preserved. Fails only
/// when two processes that never act end in different states, which no
/// rewriting with the same endpoints can reconcile.
pub fn well_formize_all(p: &Protocol, tr: &Trace) -> Result<Trace, SemanticsError> {
    let mut cur = tr.clone();
    // Termination: merging toward the earlier arrival strictly shrinks the
    // total waiting distance, and tie merges replace a reception path by a
    // lexicographically smaller one.
    let cap = 4 * (tr.num_configs() + 2) * tr.initial.len() * tr.initial.len() * (p.num_states() + 2);
    for _ in 0..cap {
        let configs = cur.try_configs(p, SemanticsKind::Broadcast)?;
        let Err(v) = is_well_formed(p, &configs) else {
            return Ok(cur);
        };
        let na1 = next_action(p, &configs, v.index, v.e1)?;
        let na2 = next_action(p, &configs, v.index, v.e2)?;
        let (lead, follow) = if na1.index < na2.index {
            (v.e1, v.e2)
        } else if na2.index < na1.index {
            (v.e2, v.e1)
        } else {
            // Same arrival: merge onto the lexicographically smaller path so
            // repeated merges cannot oscillate.
            let upto = na1.index.min(configs.len() - 1);
            let path = |e: usize| -> Vec<StateId> {
                (v.index..=upto).map(|k| configs[k].get(e)).collect()
            };
            if path(v.e1) <= path(v.e2) {
                (v.e1, v.e2)
            } else {
                (v.e2, v.e1)
            }
        };
        cur = well_formize(p, &cur, v.index, lead, follow)?;
    }
    Err(SemanticsError::Precondition(
        "well-formization did not converge".into(),
    ))
}

fn op_json(p: &Protocol, op: Op) -> (&'static str, String) {
    match op {
        Op::Send(m) => ("send", p.msg_name(m).to_string()),
        Op::Receive(m) => ("recv", p.msg_name(m).to_string()),
    }
}

impl Trace {
    pub fn to_json(&self, p: &Protocol) -> Value {
        trace_json(p, self, None, None)
    }

    pub fn from_json(p: &Protocol, v: &Value) -> Result<Trace, SemanticsError> {
        let (tr, _, _) = trace_from_json(p, v)?;
        Ok(tr)
    }
}

impl Lasso {
    pub fn to_json(&self, p: &Protocol) -> Value {
        trace_json(p, &self.trace, Some(self.cycle_start), Some(self.tracked))
    }

    pub fn from_json(p: &Protocol, v: &Value) -> Result<Lasso, SemanticsError> {
        let (trace, cycle_start, tracked) = trace_from_json(p, v)?;
        match (cycle_start, tracked) {
            (Some(cycle_start), Some(tracked)) => Ok(Lasso {
                trace,
                cycle_start,
                tracked,
            }),
            _ => Err(SemanticsError::Precondition(
                "lasso requires cycle_start and tracked".into(),
            )),
        }
    }
}

fn trace_json(p: &Protocol, tr: &Trace, cycle_start: Option<usize>, tracked: Option<usize>) -> Value {
    let initial: Vec<&str> = tr.initial.states().iter().map(|&q| p.state_name(q)).collect();
    let steps: Vec<Value> = tr
        .steps
        .iter()
        .map(|s| {
            let (opk, msg) = op_json(p, s.transition.op);
            let mut o = json!({
                "sender": s.sender,
                "t": {
                    "src": p.state_name(s.transition.src),
                    "op": opk,
                    "msg": msg,
                    "dst": p.state_name(s.transition.dst),
                },
            });
            if !s.receivers.is_empty() {
                o["receivers"] = json!(s.receivers.iter().collect::<Vec<_>>());
            }
            if !s.choices.is_empty() {
                let m: BTreeMap<String, &str> = s
                    .choices
                    .iter()
                    .map(|(&e, &q)| (e.to_string(), p.state_name(q)))
                    .collect();
                o["choices"] = json!(m);
            }
            o
        })
        .collect();
    let mut out = json!({
        "format": 1,
        "initial": initial,
        "steps": steps,
    });
    if let Some(cs) = cycle_start {
        out["cycle_start"] = json!(cs);
    }
    if let Some(t) = tracked {
        out["tracked"] = json!(t);
    }
    out
}

fn trace_from_json(
    p: &Protocol,
    v: &Value,
) -> Result<(Trace, Option<usize>, Option<usize>), SemanticsError> {
    let bad = |m: &str| SemanticsError::Precondition(m.to_string());
    let state = |name: &str| {
        p.state_by_name(name)
            .ok_or_else(|| bad(&format!("unknown state `{name}`")))
    };
    let initial = v["initial"]
        .as_array()
        .ok_or_else(|| bad("missing initial"))?
        .iter()
        .map(|s| state(s.as_str().unwrap_or_default()))
        .collect::<Result<Vec<_>, _>>()?;
    if initial.is_empty() {
        return Err(bad("empty initial configuration"));
    }
    let mut steps = Vec::new();
    for s in v["steps"].as_array().ok_or_else(|| bad("missing steps"))? {
        let sender = s["sender"].as_u64().ok_or_else(|| bad("missing sender"))? as usize;
        let t = &s["t"];
        let src = state(t["src"].as_str().ok_or_else(|| bad("missing t.src"))?)?;
        let dst = state(t["dst"].as_str().ok_or_else(|| bad("missing t.dst"))?)?;
        let msg_name = t["msg"].as_str().ok_or_else(|| bad("missing t.msg"))?;
        let msg = p
            .msg_by_name(msg_name)
            .ok_or_else(|| bad(&format!("unknown message `{msg_name}`")))?;
        let op = match t["op"].as_str() {
            Some("send") => Op::Send(msg),
            Some("recv") => Op::Receive(msg),
            _ => return Err(bad("t.op must be send or recv")),
        };
        let transition = Transition { src, op, dst };
        if !p.transitions().contains(&transition) {
            return Err(bad("step transition is not in the protocol"));
        }
        let mut receivers = BTreeSet::new();
        if let Some(arr) = s.get("receivers").and_then(|r| r.as_array()) {
            for r in arr {
                receivers.insert(r.as_u64().ok_or_else(|| bad("bad receiver"))? as usize);
            }
        }
        let mut choices = BTreeMap::new();
        if let Some(map) = s.get("choices").and_then(|c| c.as_object()) {
            for (k, val) in map {
                let e: usize = k.parse().map_err(|_| bad("bad choice key"))?;
                choices.insert(e, state(val.as_str().ok_or_else(|| bad("bad choice value"))?)?);
            }
        }
        steps.push(Step {
            sender,
            transition,
            receivers,
            choices,
        });
    }
    let cycle_start = v.get("cycle_start").and_then(|x| x.as_u64()).map(|x| x as usize);
    let tracked = v.get("tracked").and_then(|x| x.as_u64()).map(|x| x as usize);
    Ok((
        Trace {
            initial: IndexedConfig::new(initial),
            steps,
        },
        cycle_start,
        tracked,
    ))
}

/// Builds the five-step execution of the running example with three
/// processes, used as a golden trace by the test suite.
pub fn example2_trace(p: &Protocol) -> Trace {
    let t = |src: &str, msg: &str, dst: &str| Transition {
        src: p.state_by_name(src).unwrap(),
        op: Op::Send(p.msg_by_name(msg).unwrap()),
        dst: p.state_by_name(dst).unwrap(),
    };
    let q = |name: &str| p.state_by_name(name).unwrap();
    let step = |sender: usize, tr: Transition, choices: Vec<(usize, StateId)>| Step {
        sender,
        transition: tr,
        receivers: BTreeSet::new(),
        choices: choices.into_iter().collect(),
    };
    Trace {
        initial: IndexedConfig::grounded(p, 3),
        steps: vec![
            step(1, t("q_in", "d", "q1"), vec![]),
            step(2, t("q_in", "d", "q1"), vec![]),
            step(3, t("q_in", "a", "q_in"), vec![(1, q("q5")), (2, q("q2"))]),
            step(3, t("q_in", "c", "q_in"), vec![]),
            step(3, t("q_in", "b", "q7"), vec![]),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::fig1;

    fn names(p: &Protocol, c: &IndexedConfig) -> Vec<String> {
        c.states().iter().map(|&q| p.state_name(q).to_string()).collect()
    }

    #[test]
    fn example2_replays() {
        let p = fig1();
        let tr = example2_trace(&p);
        let configs = tr.configs(&p, SemanticsKind::Broadcast);
        assert_eq!(names(&p, &configs[3]), vec!["q5", "q2", "q_in"]);
        assert_eq!(names(&p, &configs[4]), vec!["q3", "q2", "q_in"]);
        assert_eq!(names(&p, &configs[5]), vec!["q3", "q3", "q7"]);
    }

    #[test]
    fn broadcast_step_no_receivers() {
        let p = fig1();
        let c = IndexedConfig::grounded(&p, 2);
        let t = Transition {
            src: p.state_by_name("q_in").unwrap(),
            op: Op::Send(p.msg_by_name("b").unwrap()),
            dst: p.state_by_name("q7").unwrap(),
        };
        let next = broadcast_step(&p, &c, 1, t, &BTreeMap::new()).unwrap();
        assert_eq!(names(&p, &next), vec!["q7", "q_in"]);
    }

    #[test]
    fn broadcast_step_requires_choice() {
        let p = fig1();
        let mut c = IndexedConfig::grounded(&p, 2);
        c.set(1, p.state_by_name("q1").unwrap());
        let t = Transition {
            src: p.state_by_name("q_in").unwrap(),
            op: Op::Send(p.msg_by_name("a").unwrap()),
            dst: p.state_by_name("q_in").unwrap(),
        };
        let err = broadcast_step(&p, &c, 2, t, &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, SemanticsError::UnresolvedReception { proc: 1 }));
    }

    #[test]
    fn broadcast_step_wrong_source() {
        let p = fig1();
        let c = IndexedConfig::grounded(&p, 2);
        let t = Transition {
            src: p.state_by_name("q3").unwrap(),
            op: Op::Send(p.msg_by_name("d").unwrap()),
            dst: p.state_by_name("q4").unwrap(),
        };
        assert!(matches!(
            broadcast_step(&p, &c, 1, t, &BTreeMap::new()),
            Err(SemanticsError::SenderNotAtSource { sender: 1 })
        ));
    }

    #[test]
    fn rbn_step_subset() {
        let p = fig1();
        let mut c = IndexedConfig::grounded(&p, 3);
        c.set(1, p.state_by_name("q1").unwrap());
        c.set(2, p.state_by_name("q1").unwrap());
        let t = Transition {
            src: p.state_by_name("q_in").unwrap(),
            op: Op::Send(p.msg_by_name("a").unwrap()),
            dst: p.state_by_name("q_in").unwrap(),
        };
        let mut choices = BTreeMap::new();
        choices.insert(1, p.state_by_name("q2").unwrap());
        let receivers: BTreeSet<usize> = [1].into_iter().collect();
        let next = rbn_step(&p, &c, 3, t, &receivers, &choices).unwrap();
        assert_eq!(names(&p, &next), vec!["q2", "q1", "q_in"]);
        // empty receiver set moves only the sender
        let next = rbn_step(&p, &c, 3, t, &BTreeSet::new(), &BTreeMap::new()).unwrap();
        assert_eq!(names(&p, &next), vec!["q1", "q1", "q_in"]);
    }

    #[test]
    fn validate_rejects_tampered_sender() {
        let p = fig1();
        let mut tr = example2_trace(&p);
        tr.steps[1].sender = 1; // process 1 is already on q1, not q_in
        let err = validate_trace(&p, &tr, SemanticsKind::Broadcast).unwrap_err();
        assert!(matches!(err, SemanticsError::InvalidStep { index: 1, .. }));
    }

    #[test]
    fn next_action_examples() {
        let (p, _) = fig1().add_uncoverable_state();
        let tr = example2_trace(&p);
        let configs = tr.configs(&p, SemanticsKind::Broadcast);
        let na1 = next_action(&p, &configs, 2, 1).unwrap();
        assert_eq!(na1.index, 4);
        assert_eq!(p.state_name(na1.state.unwrap()), "q3");
        let na2 = next_action(&p, &configs, 2, 2).unwrap();
        assert_eq!(na2.index, 5);
        assert_eq!(p.state_name(na2.state.unwrap()), "q3");
    }

    #[test]
    fn next_action_never_acts() {
        let (p, qu) = fig1().add_uncoverable_state();
        // one process parks on q7 forever
        let tr = Trace {
            initial: IndexedConfig::grounded(&p, 2),
            steps: vec![Step {
                sender: 1,
                transition: Transition {
                    src: p.state_by_name("q_in").unwrap(),
                    op: Op::Send(p.msg_by_name("b").unwrap()),
                    dst: p.state_by_name("q7").unwrap(),
                },
                receivers: BTreeSet::new(),
                choices: BTreeMap::new(),
            }],
        };
        let configs = tr.configs(&p, SemanticsKind::Broadcast);
        let na = next_action(&p, &configs, 1, 1).unwrap();
        assert_eq!(na.state, None);
        assert_eq!(na.index, configs.len());
        assert_eq!(next_action_state(&p, na), qu);
    }

    #[test]
    fn future_set_example() {
        let (p, _) = fig1().add_uncoverable_state();
        let tr = example2_trace(&p);
        let configs = tr.configs(&p, SemanticsKind::Broadcast);
        let q3 = p.state_by_name("q3").unwrap();
        let fut = future_index_set(&p, &configs, 2, q3);
        assert_eq!(fut.into_iter().collect::<Vec<_>>(), vec![4, 5]);
    }

    #[test]
    fn example2_not_well_formed() {
        let (p, _) = fig1().add_uncoverable_state();
        let tr = example2_trace(&p);
        let configs = tr.configs(&p, SemanticsKind::Broadcast);
        let v = is_well_formed(&p, &configs).unwrap_err();
        assert_eq!((v.index, v.e1, v.e2), (2, 1, 2));
    }

    #[test]
    fn one_process_trace_is_well_formed() {
        let (p, _) = fig1().add_uncoverable_state();
        let tr = Trace {
            initial: IndexedConfig::grounded(&p, 1),
            steps: vec![],
        };
        let configs = tr.configs(&p, SemanticsKind::Broadcast);
        assert!(is_well_formed(&p, &configs).is_ok());
    }

    #[test]
    fn well_formize_example3() {
        let (p, _) = fig1().add_uncoverable_state();
        let tr = example2_trace(&p);
        let out = well_formize(&p, &tr, 2, 1, 2).unwrap();
        let configs = out.configs(&p, SemanticsKind::Broadcast);
        let printed: Vec<Vec<String>> = configs.iter().map(|c| names(&p, c)).collect();
        assert_eq!(
            printed,
            vec![
                vec!["q_in", "q_in", "q_in"],
                vec!["q1", "q_in", "q_in"],
                vec!["q1", "q1", "q_in"],
                vec!["q5", "q5", "q_in"],
                vec!["q3", "q3", "q_in"],
                vec!["q3", "q3", "q7"],
            ]
        );
        assert!(is_well_formed(&p, &configs).is_ok());
    }

    #[test]
    fn well_formize_identity_on_same_process() {
        let (p, _) = fig1().add_uncoverable_state();
        let tr = example2_trace(&p);
        assert_eq!(well_formize(&p, &tr, 2, 1, 1).unwrap(), tr);
    }

    #[test]
    fn well_formize_rejects_different_targets() {
        // rho'' of the running example: processes 1 and 2 leave q1 towards
        // different next action states (q3 and q4).
        let (p, _) = fig1().add_uncoverable_state();
        let q = |n: &str| p.state_by_name(n).unwrap();
        let t = |src: &str, msg: &str, dst: &str| Transition {
            src: q(src),
            op: Op::Send(p.msg_by_name(msg).unwrap()),
            dst: q(dst),
        };
        let tr = Trace {
            initial: IndexedConfig::grounded(&p, 3),
            steps: vec![
                Step { sender: 1, transition: t("q_in", "d", "q1"), receivers: BTreeSet::new(), choices: BTreeMap::new() },
                Step { sender: 2, transition: t("q_in", "d", "q1"), receivers: BTreeSet::new(), choices: BTreeMap::new() },
                Step {
                    sender: 3,
                    transition: t("q_in", "a", "q_in"),
                    receivers: BTreeSet::new(),
                    choices: [(1, q("q2")), (2, q("q5"))].into_iter().collect(),
                },
                Step { sender: 3, transition: t("q_in", "b", "q7"), receivers: BTreeSet::new(), choices: BTreeMap::new() },
                Step { sender: 1, transition: t("q3", "d", "q4"), receivers: BTreeSet::new(), choices: BTreeMap::new() },
            ],
        };
        let configs = tr.configs(&p, SemanticsKind::Broadcast);
        assert_eq!(names(&p, &configs[5]), vec!["q4", "q4", "q4"]);
        let err = well_formize(&p, &tr, 2, 1, 2).unwrap_err();
        assert!(matches!(err, SemanticsError::Precondition(_)));
    }

    #[test]
    fn well_formize_all_example2() {
        let (p, _) = fig1().add_uncoverable_state();
        let tr = example2_trace(&p);
        let out = well_formize_all(&p, &tr).unwrap();
        let configs = out.configs(&p, SemanticsKind::Broadcast);
        assert!(is_well_formed(&p, &configs).is_ok());
        let orig = tr.configs(&p, SemanticsKind::Broadcast);
        assert_eq!(configs[0], orig[0]);
        assert_eq!(configs[configs.len() - 1], orig[orig.len() - 1]);
        // already well-formed input is returned unchanged
        assert_eq!(well_formize_all(&p, &out).unwrap(), out);
    }

    #[test]
    fn trace_json_round_trip() {
        let p = fig1();
        let tr = example2_trace(&p);
        let v = tr.to_json(&p);
        assert_eq!(v["format"], 1);
        let back = Trace::from_json(&p, &v).unwrap();
        assert_eq!(back, tr);
    }
}
