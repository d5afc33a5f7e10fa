//! Identifier-collapsed view of a summary machine, used for fast sound
//! analyses. Locations keep the summary structure but renumber identifiers
//! canonically per exit state, and the counters are collapsed to one per
//! action state plus one per exit state (the sum of that exit's summary
//! counters). Every run of the precise machine projects onto a run here
//! with the same location cycle structure and collapsed counter effects,
//! so unreachability and cycle-flow infeasibility in this view are
//! definitive for the precise machine.

use std::collections::{HashMap, VecDeque};

use crate::protocol::StateId;
use crate::vass::{Delta, OmegaVals, SysEdge, VassSys};

use super::build::{SLoc, SummarySystem, Variant};
use super::{CoherentSet, Summary, SummaryOutcome};

pub struct Collapsed<'a> {
    pub sys: &'a SummarySystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapsedKind {
    Pump,
    Enter,
    /// A broadcast; `tagged` marks the designated transition of the
    /// repeated-coverability variant.
    Trans { tagged: bool },
    Drain,
    ToFinal,
    FinalDrain,
    ToPreFinal,
    PreToFinal,
    Reset,
    SmileyBack,
}

impl<'a> Collapsed<'a> {
    pub fn new(sys: &'a SummarySystem) -> Collapsed<'a> {
        Collapsed { sys }
    }

    fn x_action(&self, q: StateId) -> usize {
        self.sys.x_action(q)
    }

    /// Collapsed counter for all summaries exiting at `q`.
    fn y_exit(&self, q: StateId) -> usize {
        self.sys.actions_len() + self.sys.x_action(q)
    }

    /// Renumbers identifiers per exit in print order, making the location a
    /// canonical representative of its identifier orbit.
    fn canonical(&self, parts: Vec<(std::collections::BTreeSet<StateId>, StateId)>) -> Option<CoherentSet> {
        let mut sorted = parts;
        sorted.sort();
        let mut next: HashMap<StateId, u32> = HashMap::new();
        let mut out = Vec::new();
        for (print, exit) in sorted {
            let k = next.entry(exit).or_insert(0);
            *k += 1;
            if *k > self.sys.max_id() {
                return None;
            }
            out.push(Summary {
                exit,
                id: *k,
                print,
            });
        }
        CoherentSet::new(out)
    }

    fn trans_edges(
        &self,
        set: &CoherentSet,
        witness: Option<StateId>,
    ) -> Vec<SysEdge<SLoc, CollapsedKind>> {
        let sys = self.sys;
        let p = &sys.protocol;
        let mut out = Vec::new();
        for &t in p.transitions() {
            if !t.op.is_send() {
                continue;
            }
            let msg = t.op.msg();
            let summaries: Vec<&Summary> = set.iter().collect();
            let options: Vec<std::sync::Arc<Vec<super::SummaryStep>>> = summaries
                .iter()
                .map(|s| sys.steps_of(s, t))
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
            let witness_branches: Vec<Option<StateId>> = match witness {
                Some(w) if sys.cls.receivable[w.ix()].contains(&msg) => {
                    p.receptions(w, msg).map(|r| Some(r.dst)).collect()
                }
                _ => vec![None],
            };
            let mut sender_kinds = vec![false];
            if witness == Some(t.src) {
                sender_kinds.push(true);
            }
            for combo in &combos {
                let mut joined_exit: Option<StateId> = None;
                let mut joined_count = 0;
                let mut parts: Vec<(std::collections::BTreeSet<StateId>, StateId)> = Vec::new();
                for (si, &oi) in combo.iter().enumerate() {
                    match &options[si][oi].outcome {
                        SummaryOutcome::Plain(s2) => parts.push((s2.print.clone(), s2.exit)),
                        SummaryOutcome::Joined(s2) => {
                            joined_count += 1;
                            joined_exit = Some(s2.exit);
                            parts.push((s2.print.clone(), s2.exit));
                        }
                        SummaryOutcome::Done => {}
                    }
                }
                if joined_count > 1 {
                    continue;
                }
                if !parts
                    .iter()
                    .all(|(print, exit)| exit == &sys.q_u || print.iter().all(|w| sys.reachable_exit(*w, *exit)))
                {
                    continue;
                }
                for &sender_witness in &sender_kinds {
                    for &wb in &witness_branches {
                        let (wmove, new_witness) = if sender_witness {
                            (None, Some(t.dst))
                        } else {
                            (wb, wb.or(witness))
                        };
                        let tagged = self.sys.tagged(t, sender_witness, witness, wmove);
                        let mut delta: Delta = Vec::new();
                        if !sender_witness {
                            delta.push((self.x_action(t.src), -1));
                        }
                        if sys.cls.action.contains(&t.dst) {
                            if joined_count > 0 {
                                continue;
                            }
                            if !sender_witness {
                                delta.push((self.x_action(t.dst), 1));
                            }
                            let Some(set2) = self.canonical(parts.clone()) else {
                                continue;
                            };
                            out.push(self.mk(delta, set2, new_witness, tagged, t));
                        } else if sender_witness {
                            if joined_count > 0 {
                                continue;
                            }
                            let Some(set2) = self.canonical(parts.clone()) else {
                                continue;
                            };
                            out.push(self.mk(delta, set2, new_witness, tagged, t));
                        } else if joined_count == 1 {
                            let exit = joined_exit.unwrap();
                            let mut parts2 = parts.clone();
                            // the join target already carries the sender
                            let pos = parts2
                                .iter()
                                .position(|(_, e)| *e == exit)
                                .expect("joined part present");
                            parts2[pos].0.insert(t.dst);
                            delta.push((self.y_exit(exit), 1));
                            if let Some(set2) = self.canonical(parts2) {
                                out.push(self.mk(delta.clone(), set2, new_witness, tagged, t));
                            }
                        } else {
                            // never-acting groups share one arrival class: a
                            // second group with the uncoverable exit is never
                            // needed by any representative run
                            let has_qu = parts.iter().any(|(_, e)| *e == sys.q_u);
                            for q_a in self.sys.exits_for(t.dst) {
                                if q_a == sys.q_u && has_qu {
                                    continue;
                                }
                                let mut parts2 = parts.clone();
                                parts2.push(([t.dst].into_iter().collect(), q_a));
                                let mut d2 = delta.clone();
                                d2.push((self.y_exit(q_a), 1));
                                if let Some(set2) = self.canonical(parts2) {
                                    out.push(self.mk(d2, set2, new_witness, tagged, t));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn mk(
        &self,
        delta: Delta,
        set: CoherentSet,
        witness: Option<StateId>,
        tagged: bool,
        _t: crate::protocol::Transition,
    ) -> SysEdge<SLoc, CollapsedKind> {
        let mut d = delta;
        d.sort_by_key(|&(i, _)| i);
        SysEdge {
            delta: d,
            dst: SLoc::Co {
                set,
                witness,
                smiley: tagged,
            },
            meta: CollapsedKind::Trans { tagged },
        }
    }
}

impl<'a> VassSys for Collapsed<'a> {
    type Loc = SLoc;
    type Meta = CollapsedKind;

    fn initial_loc(&self) -> SLoc {
        SLoc::S0
    }

    fn num_counters(&self) -> usize {
        2 * self.sys.actions_len()
    }

    fn edges_from(&self, loc: &SLoc, _vals: &OmegaVals) -> Vec<SysEdge<SLoc, CollapsedKind>> {
        let sys = self.sys;
        let mut out: Vec<SysEdge<SLoc, CollapsedKind>> = Vec::new();
        match loc {
            SLoc::S0 => {
                out.push(SysEdge {
                    delta: vec![(self.x_action(sys.protocol.initial), 1)],
                    dst: SLoc::S0,
                    meta: CollapsedKind::Pump,
                });
                out.push(SysEdge {
                    delta: vec![],
                    dst: SLoc::Co {
                        set: CoherentSet::empty(),
                        witness: sys.initial_witness(),
                        smiley: false,
                    },
                    meta: CollapsedKind::Enter,
                });
            }
            SLoc::SfPrime => {
                if let Variant::Action { q_f } = sys.variant {
                    out.push(SysEdge {
                        delta: vec![(self.x_action(q_f), 1)],
                        dst: SLoc::Sf,
                        meta: CollapsedKind::PreToFinal,
                    });
                }
            }
            SLoc::Sf => match sys.variant {
                Variant::Synchro { .. } => out.push(SysEdge {
                    delta: vec![(self.y_exit(sys.q_u), -1)],
                    dst: SLoc::Sf,
                    meta: CollapsedKind::FinalDrain,
                }),
                Variant::Action { q_f } => {
                    out.push(SysEdge {
                        delta: vec![(self.x_action(q_f), -1)],
                        dst: SLoc::Sf,
                        meta: CollapsedKind::FinalDrain,
                    });
                    out.push(SysEdge {
                        delta: vec![],
                        dst: SLoc::S0,
                        meta: CollapsedKind::Reset,
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
                        meta: CollapsedKind::SmileyBack,
                    }];
                }
                out.extend(self.trans_edges(set, *witness));
                // collapsed transfers: any exit's pooled counter may move to
                // its action counter (an over-approximation of the dead-label
                // condition of the precise machine)
                for q in sys.cls.action.iter().copied() {
                    let mut d = vec![(self.x_action(q), 1), (self.y_exit(q), -1)];
                    d.sort_by_key(|&(i, _)| i);
                    out.push(SysEdge {
                        delta: d,
                        dst: loc.clone(),
                        meta: CollapsedKind::Drain,
                    });
                }
                match sys.variant {
                    Variant::Synchro { q_f } => {
                        let want: Option<CoherentSet> = self.canonical(vec![(
                            [q_f].into_iter().collect(),
                            sys.q_u,
                        )]);
                        if Some(set) == want.as_ref() {
                            out.push(SysEdge {
                                delta: vec![],
                                dst: SLoc::Sf,
                                meta: CollapsedKind::ToFinal,
                            });
                        }
                    }
                    Variant::Action { q_f } => {
                        if set.is_empty() {
                            out.push(SysEdge {
                                delta: vec![(self.x_action(q_f), -1)],
                                dst: SLoc::SfPrime,
                                meta: CollapsedKind::ToPreFinal,
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

/// Exploration of the collapsed location graph.
pub struct CollapsedGraph {
    pub locs: Vec<SLoc>,
    /// `(src, dst, delta, tagged)` edges over location indices.
    pub edges: Vec<(usize, usize, Delta, bool)>,
    pub complete: bool,
}

pub fn collapsed_graph(sys: &SummarySystem, max_locs: usize) -> CollapsedGraph {
    let c = Collapsed::new(sys);
    let dummy: OmegaVals = Vec::new();
    let mut index: HashMap<SLoc, usize> = HashMap::new();
    let mut locs: Vec<SLoc> = Vec::new();
    let mut edges: Vec<(usize, usize, Delta, bool)> = Vec::new();
    let mut complete = true;
    index.insert(SLoc::S0, 0);
    locs.push(SLoc::S0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let loc = locs[u].clone();
        for e in c.edges_from(&loc, &dummy) {
            let v = match index.get(&e.dst) {
                Some(&v) => v,
                None => {
                    if locs.len() >= max_locs {
                        complete = false;
                        continue;
                    }
                    let v = locs.len();
                    index.insert(e.dst.clone(), v);
                    locs.push(e.dst.clone());
                    queue.push_back(v);
                    v
                }
            };
            let tagged = matches!(e.meta, CollapsedKind::Trans { tagged: true });
            edges.push((u, v, e.delta, tagged));
        }
    }
    CollapsedGraph {
        locs,
        edges,
        complete,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::fig1;

    #[test]
    fn collapsed_graph_closes_on_fig1() {
        let (p, _) = fig1().normalize_self_loops().add_uncoverable_state();
        let q1 = p.state_by_name("q1").unwrap();
        let sys = SummarySystem::new(&p, Variant::Synchro { q_f: q1 }, true).unwrap();
        let g = collapsed_graph(&sys, 100_000);
        assert!(g.complete, "collapsed location space is finite and small");
        assert!(g.locs.contains(&SLoc::Sf));
        assert!(g.locs.len() < 50_000, "got {}", g.locs.len());
    }
}
