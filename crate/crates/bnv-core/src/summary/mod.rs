//! The waiting-region abstraction: summaries, coherent summary sets, and the
//! counter machines built from them. A summary groups the processes sitting
//! in a region of waiting states that will reach the same action state
//! simultaneously; coherent sets of summaries are the locations of the
//! constructed counter machines.

mod build;
mod collapsed;
mod translate;

pub use build::{
    BuildError, EdgeInfo, SLoc, SummaryResolution, SummarySystem, TransEdge, Variant,
};
pub use collapsed::{collapsed_graph, Collapsed, CollapsedGraph, CollapsedKind};
pub use translate::{
    apply_edge, check_implementation, check_representative, replay_run,
    translate_execution_to_run, translate_run_to_execution, ReprOutcome, SimState,
    TranslateError, WitnessMap,
};

use std::collections::{BTreeMap, BTreeSet};

use crate::protocol::{Op, Protocol, StateId, Transition};

/// A group of waiting processes: the set of states they currently occupy
/// (the print), the action state they will exit to, and a disambiguating
/// identifier in `[1, |Q_W|+1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Summary {
    pub exit: StateId,
    pub id: u32,
    pub print: BTreeSet<StateId>,
}

impl Summary {
    pub fn new(print: impl IntoIterator<Item = StateId>, exit: StateId, id: u32) -> Summary {
        let print: BTreeSet<StateId> = print.into_iter().collect();
        assert!(!print.is_empty(), "summary prints are nonempty");
        Summary { exit, id, print }
    }

    pub fn label(&self) -> (StateId, u32) {
        (self.exit, self.id)
    }

    pub fn render(&self, p: &Protocol) -> String {
        let print: Vec<&str> = self.print.iter().map(|&q| p.state_name(q)).collect();
        format!("{}>{}#{}", print.join("+"), p.state_name(self.exit), self.id)
    }
}

/// A set of summaries where any two sharing an exit state have distinct
/// identifiers and disjoint prints.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CoherentSet {
    summaries: BTreeSet<Summary>,
}

impl CoherentSet {
    pub fn empty() -> CoherentSet {
        CoherentSet::default()
    }

    /// Builds the set if it is coherent.
    pub fn new(summaries: impl IntoIterator<Item = Summary>) -> Option<CoherentSet> {
        let summaries: BTreeSet<Summary> = summaries.into_iter().collect();
        let v: Vec<&Summary> = summaries.iter().collect();
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                if v[i].exit == v[j].exit {
                    if v[i].id == v[j].id {
                        return None;
                    }
                    if v[i].print.intersection(&v[j].print).next().is_some() {
                        return None;
                    }
                }
            }
        }
        Some(CoherentSet { summaries })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Summary> {
        self.summaries.iter()
    }

    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    pub fn labels(&self) -> BTreeSet<(StateId, u32)> {
        self.summaries.iter().map(|s| s.label()).collect()
    }

    pub fn by_label(&self, label: (StateId, u32)) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.label() == label)
    }

    pub fn render(&self, p: &Protocol) -> String {
        let parts: Vec<String> = self.summaries.iter().map(|s| s.render(p)).collect();
        format!("{{{}}}", parts.join(","))
    }
}

/// How one summary evolves when transition `t` is broadcast: the chosen
/// reception target for every print state, and the resulting summary (or its
/// disappearance when the whole group reaches the exit).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryStep {
    /// Reception target per print state; states unable to receive stay.
    pub targets: BTreeMap<StateId, StateId>,
    pub outcome: SummaryOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SummaryOutcome {
    /// The group stays in waiting states.
    Plain(Summary),
    /// As `Plain`, with the sending process joining the print.
    Joined(Summary),
    /// Every print state reached the exit simultaneously.
    Done,
}

/// Enumerates the evolutions of a summary under a broadcast. Requires a
/// Wait-Only protocol without broadcast self-loops.
pub fn summary_successors(p: &Protocol, s: &Summary, t: Transition) -> Vec<SummaryStep> {
    assert!(
        p.check_wait_only().0,
        "summaries are defined for Wait-Only protocols"
    );
    assert!(
        !p.transitions().iter().any(|t| t.op.is_send() && t.src == t.dst),
        "broadcast self-loops must be normalized away"
    );
    let Op::Send(msg) = t.op else {
        panic!("summaries evolve under broadcasts");
    };
    let cls = p.classify();
    let print: Vec<StateId> = s.print.iter().copied().collect();
    // per print state: possible targets (the state itself when it cannot
    // receive the message)
    let choices: Vec<Vec<StateId>> = print
        .iter()
        .map(|&w| {
            let ts: Vec<StateId> = p.receptions(w, msg).map(|r| r.dst).collect();
            if ts.is_empty() {
                vec![w]
            } else {
                ts
            }
        })
        .collect();
    let mut combos: Vec<Vec<StateId>> = vec![vec![]];
    for c in &choices {
        let mut next = Vec::new();
        for base in &combos {
            for &tgt in c {
                let mut b = base.clone();
                b.push(tgt);
                next.push(b);
            }
        }
        combos = next;
    }
    let mut out: Vec<SummaryStep> = Vec::new();
    let mut seen: BTreeSet<(BTreeSet<StateId>, u8)> = BTreeSet::new();
    for combo in combos {
        let targets: BTreeMap<StateId, StateId> =
            print.iter().copied().zip(combo.iter().copied()).collect();
        let reached: BTreeSet<StateId> = combo.iter().copied().collect();
        if reached.iter().all(|q| cls.waiting.contains(q)) {
            if seen.insert((reached.clone(), 0)) {
                out.push(SummaryStep {
                    targets: targets.clone(),
                    outcome: SummaryOutcome::Plain(Summary {
                        exit: s.exit,
                        id: s.id,
                        print: reached.clone(),
                    }),
                });
            }
            if cls.waiting.contains(&t.dst) {
                let mut joined = reached.clone();
                joined.insert(t.dst);
                if seen.insert((joined.clone(), 1)) {
                    out.push(SummaryStep {
                        targets,
                        outcome: SummaryOutcome::Joined(Summary {
                            exit: s.exit,
                            id: s.id,
                            print: joined,
                        }),
                    });
                }
            }
        } else if reached.len() == 1 && reached.iter().next() == Some(&s.exit) {
            if seen.insert((reached, 2)) {
                out.push(SummaryStep {
                    targets,
                    outcome: SummaryOutcome::Done,
                });
            }
        }
        // mixed outcomes (some processes in action states, not all on the
        // exit) do not correspond to any summary evolution
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::fig1;

    fn norm_fig1() -> Protocol {
        let (p, _) = fig1().normalize_self_loops().add_uncoverable_state();
        p
    }

    fn send(p: &Protocol, src: &str, msg: &str) -> Transition {
        p.transitions()
            .iter()
            .copied()
            .find(|t| {
                t.op.is_send()
                    && p.state_name(t.src) == src
                    && p.msg_name(t.op.msg()) == msg
            })
            .unwrap()
    }

    fn q(p: &Protocol, n: &str) -> StateId {
        p.state_by_name(n).unwrap()
    }

    #[test]
    fn example_two_plain_successors() {
        let p = norm_fig1();
        let s0 = Summary::new([q(&p, "q1")], q(&p, "q3"), 1);
        let t = send(&p, "q_in", "a");
        let steps = summary_successors(&p, &s0, t);
        let plains: BTreeSet<BTreeSet<StateId>> = steps
            .iter()
            .filter_map(|s| match &s.outcome {
                SummaryOutcome::Plain(s) => Some(s.print.clone()),
                _ => None,
            })
            .collect();
        let expect = |names: &[&str]| -> BTreeSet<StateId> {
            names.iter().map(|n| q(&p, n)).collect()
        };
        assert!(plains.contains(&expect(&["q2"])));
        assert!(plains.contains(&expect(&["q5"])));
        // the merged print {q2, q5} must not appear
        assert!(!plains.contains(&expect(&["q2", "q5"])));
    }

    #[test]
    fn example_done_step() {
        let p = norm_fig1();
        let s = Summary::new([q(&p, "q2")], q(&p, "q3"), 1);
        let t = send(&p, "q_in", "b");
        let steps = summary_successors(&p, &s, t);
        assert!(steps
            .iter()
            .any(|s| matches!(s.outcome, SummaryOutcome::Done)));
    }

    #[test]
    fn example_wrong_exit_is_not_done() {
        // from {q2} under !!b the group reaches q3, not the exit q4
        let p = norm_fig1();
        let s = Summary::new([q(&p, "q2")], q(&p, "q4"), 1);
        let t = send(&p, "q_in", "b");
        let steps = summary_successors(&p, &s, t);
        assert!(steps.is_empty());
    }

    #[test]
    fn example_joined_chain() {
        let p = norm_fig1();
        // ({q1},q4,1) -!!a-> ({q5},q4,1) -!!b,+q7-> ({q6,q7},q4,1) -!!d-> Done
        let s = Summary::new([q(&p, "q1")], q(&p, "q4"), 1);
        let steps = summary_successors(&p, &s, send(&p, "q_in", "a"));
        let s1 = Summary::new([q(&p, "q5")], q(&p, "q4"), 1);
        assert!(steps
            .iter()
            .any(|st| st.outcome == SummaryOutcome::Plain(s1.clone())));

        let steps = summary_successors(&p, &s1, send(&p, "q_in", "b"));
        let s2 = Summary::new([q(&p, "q6"), q(&p, "q7")], q(&p, "q4"), 1);
        assert!(steps
            .iter()
            .any(|st| st.outcome == SummaryOutcome::Joined(s2.clone())));

        let steps = summary_successors(&p, &s2, send(&p, "q_in", "d"));
        assert!(steps
            .iter()
            .any(|st| matches!(st.outcome, SummaryOutcome::Done)));
    }

    #[test]
    fn coherence_rejects_overlap() {
        let p = norm_fig1();
        let a = Summary::new([q(&p, "q1")], q(&p, "q3"), 1);
        let b = Summary::new([q(&p, "q1")], q(&p, "q3"), 2);
        assert!(CoherentSet::new([a.clone(), b]).is_none());
        let c = Summary::new([q(&p, "q2")], q(&p, "q3"), 1);
        assert!(CoherentSet::new([a.clone(), c]).is_none()); // same label
        let d = Summary::new([q(&p, "q2")], q(&p, "q3"), 2);
        assert!(CoherentSet::new([a.clone(), d]).is_some());
        let e = Summary::new([q(&p, "q1")], q(&p, "q4"), 1);
        assert!(CoherentSet::new([a, e]).is_some()); // different exits may share prints
    }

    #[test]
    fn render_is_canonical() {
        let p = norm_fig1();
        let s = Summary::new([q(&p, "q7"), q(&p, "q6")], q(&p, "q4"), 1);
        assert_eq!(s.render(&p), "q6+q7>q4#1");
        let set = CoherentSet::new([s]).unwrap();
        assert_eq!(set.render(&p), "{q6+q7>q4#1}");
        assert_eq!(CoherentSet::empty().render(&p), "{}");
    }
}
