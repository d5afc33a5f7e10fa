//! Broadcast protocol model: states, messages, send/receive transitions,
//! the waiting/action classification, and the source-level protocol format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Index of a state in [`Protocol::states`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

/// Index of a message in [`Protocol::messages`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MsgId(pub u32);

impl StateId {
    pub fn ix(self) -> usize {
        self.0 as usize
    }
}

impl MsgId {
    pub fn ix(self) -> usize {
        self.0 as usize
    }
}

/// A transition action: broadcast a message or receive one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Send(MsgId),
    Receive(MsgId),
}

impl Op {
    pub fn msg(self) -> MsgId {
        match self {
            Op::Send(m) | Op::Receive(m) => m,
        }
    }

    pub fn is_send(self) -> bool {
        matches!(self, Op::Send(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub src: StateId,
    pub op: Op,
    pub dst: StateId,
}

/// A finite-state broadcast protocol executed by every process of a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Protocol {
    pub name: String,
    states: Vec<String>,
    messages: Vec<String>,
    pub initial: StateId,
    transitions: Vec<Transition>,
}

/// Partition of the states into waiting states (at least one outgoing
/// reception) and action states, plus the receivable-message map.
#[derive(Debug, Clone)]
pub struct Classification {
    pub waiting: BTreeSet<StateId>,
    pub action: BTreeSet<StateId>,
    /// For each state, the set of messages it can receive.
    pub receivable: Vec<BTreeSet<MsgId>>,
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("missing init declaration")]
    MissingInit,
    #[error("missing protocol declaration")]
    MissingName,
    #[error("duplicate transition at line {line}: {text}")]
    DuplicateTransition { line: usize, text: String },
    #[error("identifier `{0}` uses the reserved `__` prefix")]
    ReservedIdentifier(String),
    #[error("unknown state `{0}` in transition")]
    UnknownState(String),
    #[error("unknown state `{0}`")]
    NoSuchState(String),
}

impl Protocol {
    /// Builds a protocol from raw parts, interning names in sorted order.
    /// Duplicate transitions are rejected. Reserved (`__`) names are allowed
    /// here; the source-text parser is the layer that refuses them.
    pub fn from_parts(
        name: &str,
        initial: &str,
        states: &[&str],
        transitions: &[(&str, bool, &str, &str)],
    ) -> Result<Protocol, ProtocolError> {
        let mut state_names: BTreeSet<String> = states.iter().map(|s| s.to_string()).collect();
        state_names.insert(initial.to_string());
        let mut msg_names: BTreeSet<String> = BTreeSet::new();
        for (src, _, msg, dst) in transitions {
            state_names.insert(src.to_string());
            state_names.insert(dst.to_string());
            msg_names.insert(msg.to_string());
        }
        let states: Vec<String> = state_names.into_iter().collect();
        let messages: Vec<String> = msg_names.into_iter().collect();
        let state_ix = |n: &str| StateId(states.iter().position(|s| s == n).unwrap() as u32);
        let msg_ix = |n: &str| MsgId(messages.iter().position(|s| s == n).unwrap() as u32);

        let mut trans = Vec::new();
        for (src, is_send, msg, dst) in transitions {
            let t = Transition {
                src: state_ix(src),
                op: if *is_send {
                    Op::Send(msg_ix(msg))
                } else {
                    Op::Receive(msg_ix(msg))
                },
                dst: state_ix(dst),
            };
            if trans.contains(&t) {
                return Err(ProtocolError::DuplicateTransition {
                    line: 0,
                    text: format!("{} {}{} {}", src, if *is_send { "!!" } else { "?" }, msg, dst),
                });
            }
            trans.push(t);
        }
        trans.sort();
        let initial = state_ix(initial);
        Ok(Protocol {
            name: name.to_string(),
            states,
            messages,
            initial,
            transitions: trans,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_messages(&self) -> usize {
        self.messages.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q.ix()]
    }

    pub fn msg_name(&self, m: MsgId) -> &str {
        &self.messages[m.ix()]
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.states
            .binary_search_by(|s| s.as_str().cmp(name))
            .ok()
            .map(|i| StateId(i as u32))
    }

    pub fn msg_by_name(&self, name: &str) -> Option<MsgId> {
        self.messages
            .binary_search_by(|s| s.as_str().cmp(name))
            .ok()
            .map(|i| MsgId(i as u32))
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Receive transitions from `q` labelled with message `m`.
    pub fn receptions(&self, q: StateId, m: MsgId) -> impl Iterator<Item = &Transition> {
        self.transitions
            .iter()
            .filter(move |t| t.src == q && t.op == Op::Receive(m))
    }

    pub fn sends(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.op.is_send())
    }

    /// Partitions states into waiting and action states and records
    /// the receivable messages of every state.
    pub fn classify(&self) -> Classification {
        let mut receivable = vec![BTreeSet::new(); self.states.len()];
        for t in &self.transitions {
            if let Op::Receive(m) = t.op {
                receivable[t.src.ix()].insert(m);
            }
        }
        let mut waiting = BTreeSet::new();
        let mut action = BTreeSet::new();
        for q in self.state_ids() {
            if receivable[q.ix()].is_empty() {
                action.insert(q);
            } else {
                waiting.insert(q);
            }
        }
        Classification {
            waiting,
            action,
            receivable,
        }
    }

    /// A protocol is Wait-Only when no state has both an outgoing send and an
    /// outgoing reception. Returns the offending states otherwise.
    pub fn check_wait_only(&self) -> (bool, Vec<StateId>) {
        let cls = self.classify();
        let mut bad = BTreeSet::new();
        for t in &self.transitions {
            if t.op.is_send() && cls.waiting.contains(&t.src) {
                bad.insert(t.src);
            }
        }
        (bad.is_empty(), bad.into_iter().collect())
    }

    /// Single-Wait-Only: Wait-Only and every waiting state has exactly one
    /// outgoing transition. The definition is reconstructed from how the
    /// uniqueness of the outgoing reception is used; see the README.
    pub fn check_single_wait_only(&self) -> (bool, Vec<StateId>) {
        let (wait_only, mut bad) = self.check_wait_only();
        let cls = self.classify();
        for &q in &cls.waiting {
            let out = self.transitions.iter().filter(|t| t.src == q).count();
            if out != 1 {
                bad.push(q);
            }
        }
        bad.sort();
        bad.dedup();
        (wait_only && bad.is_empty(), bad)
    }

    fn fresh_state_name(&self, prefix: &str) -> String {
        let mut i = 0usize;
        loop {
            let cand = format!("{prefix}{i}");
            if !self.states.contains(&cand) {
                return cand;
            }
            i += 1;
        }
    }

    /// Rewrites every broadcast self-loop `(q, !!a, q)` into `(q, !!a, p)`,
    /// `(p, !!$, q)` with a fresh intermediate state per loop and one fresh
    /// message. Receive self-loops are left alone.
    pub fn normalize_self_loops(&self) -> Protocol {
        let loops: Vec<Transition> = self
            .transitions
            .iter()
            .copied()
            .filter(|t| t.op.is_send() && t.src == t.dst)
            .collect();
        if loops.is_empty() {
            return self.clone();
        }
        let mut names: Vec<(String, bool, String, String)> = Vec::new();
        for t in &self.transitions {
            if loops.contains(t) {
                continue;
            }
            names.push((
                self.state_name(t.src).to_string(),
                t.op.is_send(),
                self.msg_name(t.op.msg()).to_string(),
                self.state_name(t.dst).to_string(),
            ));
        }
        let pause = "__dollar".to_string();
        let mut extra_states: Vec<String> = Vec::new();
        let mut used: BTreeSet<String> = self.states.iter().cloned().collect();
        for (i, t) in loops.iter().enumerate() {
            let mut cand = format!("__p{i}");
            while used.contains(&cand) {
                cand = format!("__p{}_{}", i, used.len());
            }
            used.insert(cand.clone());
            names.push((
                self.state_name(t.src).to_string(),
                true,
                self.msg_name(t.op.msg()).to_string(),
                cand.clone(),
            ));
            names.push((cand.clone(), true, pause.clone(), self.state_name(t.src).to_string()));
            extra_states.push(cand);
        }
        let name_refs: Vec<(&str, bool, &str, &str)> = names
            .iter()
            .map(|(a, s, m, b)| (a.as_str(), *s, m.as_str(), b.as_str()))
            .collect();
        let all_states: Vec<String> = self.states.iter().cloned().chain(extra_states).collect();
        let state_refs: Vec<&str> = all_states.iter().map(|s| s.as_str()).collect();
        Protocol::from_parts(
            &self.name,
            self.state_name(self.initial),
            &state_refs,
            &name_refs,
        )
        .expect("normalization cannot introduce duplicates")
    }

    /// Adds a fresh isolated state (no incident transitions, distinct from the
    /// initial state) and returns it together with the extended protocol.
    pub fn add_uncoverable_state(&self) -> (Protocol, StateId) {
        let name = self.fresh_state_name("__qu");
        let mut all_states: Vec<String> = self.states.clone();
        all_states.push(name.clone());
        let state_refs: Vec<&str> = all_states.iter().map(|s| s.as_str()).collect();
        let names: Vec<(String, bool, String, String)> = self
            .transitions
            .iter()
            .map(|t| {
                (
                    self.state_name(t.src).to_string(),
                    t.op.is_send(),
                    self.msg_name(t.op.msg()).to_string(),
                    self.state_name(t.dst).to_string(),
                )
            })
            .collect();
        let name_refs: Vec<(&str, bool, &str, &str)> = names
            .iter()
            .map(|(a, s, m, b)| (a.as_str(), *s, m.as_str(), b.as_str()))
            .collect();
        let p = Protocol::from_parts(
            &self.name,
            self.state_name(self.initial),
            &state_refs,
            &name_refs,
        )
        .expect("adding an isolated state cannot introduce duplicates");
        let q = p.state_by_name(&name).unwrap();
        (p, q)
    }

    /// The designated uncoverable state, if one has been added.
    pub fn uncoverable(&self) -> Option<StateId> {
        self.states
            .iter()
            .position(|s| {
                s.starts_with("__qu")
                    && self
                        .transitions
                        .iter()
                        .all(|t| self.state_name(t.src) != s && self.state_name(t.dst) != s)
            })
            .map(|i| StateId(i as u32))
    }

    /// Deterministic source form; `parse_protocol` of the output yields the
    /// same protocol.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("protocol {}\n", self.name));
        out.push_str(&format!("init {}\n", self.state_name(self.initial)));
        for s in &self.states {
            out.push_str(&format!("state {s}\n"));
        }
        let mut lines: Vec<String> = self
            .transitions
            .iter()
            .map(|t| {
                let op = match t.op {
                    Op::Send(m) => format!("!!{}", self.msg_name(m)),
                    Op::Receive(m) => format!("?{}", self.msg_name(m)),
                };
                format!(
                    "trans {} {} {}",
                    self.state_name(t.src),
                    op,
                    self.state_name(t.dst)
                )
            })
            .collect();
        lines.sort();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.serialize())
    }
}

fn valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses the line-oriented protocol format. `#` starts a comment. State
/// declarations are optional: when at least one `state` line is present the
/// declaration set is authoritative and transitions may only use declared
/// states.
pub fn parse_protocol(text: &str) -> Result<Protocol, ProtocolError> {
    parse_protocol_inner(text, false)
}

/// Like [`parse_protocol`] but accepts identifiers with the reserved `__`
/// prefix, for reading back files produced by the tool itself.
pub fn parse_protocol_trusted(text: &str) -> Result<Protocol, ProtocolError> {
    parse_protocol_inner(text, true)
}

fn parse_protocol_inner(text: &str, trusted: bool) -> Result<Protocol, ProtocolError> {
    let mut name: Option<String> = None;
    let mut init: Option<String> = None;
    let mut declared: BTreeSet<String> = BTreeSet::new();
    let mut has_decls = false;
    let mut raw_trans: Vec<(usize, String, bool, String, String)> = Vec::new();

    let check_ident = |s: &str, line: usize, col: usize| -> Result<(), ProtocolError> {
        if !valid_identifier(s) {
            return Err(ProtocolError::Syntax {
                line,
                col,
                msg: format!("invalid identifier `{s}`"),
            });
        }
        if !trusted && s.starts_with("__") {
            return Err(ProtocolError::ReservedIdentifier(s.to_string()));
        }
        Ok(())
    };

    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let mut toks = content.split_whitespace();
        let Some(head) = toks.next() else { continue };
        let rest: Vec<&str> = toks.collect();
        match head {
            "protocol" => {
                let [n] = rest[..] else {
                    return Err(ProtocolError::Syntax {
                        line,
                        col: 1,
                        msg: "expected `protocol <name>`".into(),
                    });
                };
                check_ident(n, line, 1)?;
                if name.replace(n.to_string()).is_some() {
                    return Err(ProtocolError::Syntax {
                        line,
                        col: 1,
                        msg: "duplicate protocol declaration".into(),
                    });
                }
            }
            "init" => {
                let [q] = rest[..] else {
                    return Err(ProtocolError::Syntax {
                        line,
                        col: 1,
                        msg: "expected `init <state>`".into(),
                    });
                };
                check_ident(q, line, 1)?;
                if init.replace(q.to_string()).is_some() {
                    return Err(ProtocolError::Syntax {
                        line,
                        col: 1,
                        msg: "duplicate init declaration".into(),
                    });
                }
            }
            "state" => {
                if rest.is_empty() {
                    return Err(ProtocolError::Syntax {
                        line,
                        col: 1,
                        msg: "expected `state <id>...`".into(),
                    });
                }
                has_decls = true;
                for q in rest {
                    check_ident(q, line, 1)?;
                    declared.insert(q.to_string());
                }
            }
            "trans" => {
                let [src, op, dst] = rest[..] else {
                    return Err(ProtocolError::Syntax {
                        line,
                        col: 1,
                        msg: "expected `trans <src> !!<msg>|?<msg> <dst>`".into(),
                    });
                };
                check_ident(src, line, 1)?;
                check_ident(dst, line, 1)?;
                let (is_send, msg) = if let Some(m) = op.strip_prefix("!!") {
                    (true, m)
                } else if let Some(m) = op.strip_prefix('?') {
                    (false, m)
                } else {
                    return Err(ProtocolError::Syntax {
                        line,
                        col: 1,
                        msg: format!("expected `!!<msg>` or `?<msg>`, got `{op}`"),
                    });
                };
                check_ident(msg, line, 1)?;
                raw_trans.push((
                    line,
                    src.to_string(),
                    is_send,
                    msg.to_string(),
                    dst.to_string(),
                ));
            }
            other => {
                return Err(ProtocolError::Syntax {
                    line,
                    col: 1,
                    msg: format!("unknown directive `{other}`"),
                });
            }
        }
    }

    let name = name.ok_or(ProtocolError::MissingName)?;
    let init = init.ok_or(ProtocolError::MissingInit)?;
    if has_decls {
        if !declared.contains(&init) {
            return Err(ProtocolError::UnknownState(init));
        }
        for (_, src, _, _, dst) in &raw_trans {
            for q in [src, dst] {
                if !declared.contains(q) {
                    return Err(ProtocolError::UnknownState(q.clone()));
                }
            }
        }
    }

    let mut seen: BTreeMap<(String, bool, String, String), usize> = BTreeMap::new();
    for (line, src, is_send, msg, dst) in &raw_trans {
        let key = (src.clone(), *is_send, msg.clone(), dst.clone());
        if seen.insert(key, *line).is_some() {
            return Err(ProtocolError::DuplicateTransition {
                line: *line,
                text: format!("{} {}{} {}", src, if *is_send { "!!" } else { "?" }, msg, dst),
            });
        }
    }

    let decl_refs: Vec<&str> = declared.iter().map(|s| s.as_str()).collect();
    let tr_refs: Vec<(&str, bool, &str, &str)> = raw_trans
        .iter()
        .map(|(_, s, is_send, m, d)| (s.as_str(), *is_send, m.as_str(), d.as_str()))
        .collect();
    Protocol::from_parts(&name, &init, &decl_refs, &tr_refs)
}

/// The running example protocol used throughout the test suite: eight states,
/// four messages, thirteen transitions.
pub fn fig1() -> Protocol {
    parse_protocol(
        "protocol fig1\n\
         init q_in\n\
         trans q_in !!a q_in\n\
         trans q_in !!c q_in\n\
         trans q_in !!d q1\n\
         trans q_in !!b q7\n\
         trans q1 ?a q5\n\
         trans q1 ?a q2\n\
         trans q2 ?b q3\n\
         trans q5 ?b q6\n\
         trans q5 ?c q3\n\
         trans q3 !!d q4\n\
         trans q7 ?d q4\n\
         trans q6 ?d q4\n\
         trans q7 ?b q_in\n",
    )
    .expect("fig1 parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_shape() {
        let p = fig1();
        assert_eq!(p.num_states(), 8);
        assert_eq!(p.num_messages(), 4);
        assert_eq!(p.transitions().len(), 13);
        assert_eq!(p.state_name(p.initial), "q_in");
    }

    #[test]
    fn fig1_classification() {
        let p = fig1();
        let cls = p.classify();
        let waiting: Vec<&str> = cls.waiting.iter().map(|&q| p.state_name(q)).collect();
        assert_eq!(waiting, vec!["q1", "q2", "q5", "q6", "q7"]);
        let q5 = p.state_by_name("q5").unwrap();
        let recv: Vec<&str> = cls.receivable[q5.ix()]
            .iter()
            .map(|&m| p.msg_name(m))
            .collect();
        assert_eq!(recv, vec!["b", "c"]);
    }

    #[test]
    fn classify_no_receives() {
        let p = parse_protocol("protocol p\ninit s\ntrans s !!a t\n").unwrap();
        assert!(p.classify().waiting.is_empty());
    }

    #[test]
    fn fig1_is_wait_only_but_not_single() {
        let p = fig1();
        assert_eq!(p.check_wait_only(), (true, vec![]));
        let (swo, bad) = p.check_single_wait_only();
        assert!(!swo);
        // q1 has two ?a transitions, q5 has two receptions, q7 has two
        let names: Vec<&str> = bad.iter().map(|&q| p.state_name(q)).collect();
        assert!(names.contains(&"q1"));
    }

    #[test]
    fn send_self_loop_is_wait_only() {
        let p = parse_protocol("protocol p\ninit s\ntrans s !!a s\n").unwrap();
        assert_eq!(p.check_wait_only(), (true, vec![]));
    }

    #[test]
    fn zero_waiting_states_is_single_wait_only() {
        let p = parse_protocol("protocol p\ninit s\ntrans s !!a t\n").unwrap();
        assert!(p.check_single_wait_only().0);
    }

    #[test]
    fn empty_transition_protocol() {
        let p = parse_protocol("protocol p\ninit s\n").unwrap();
        assert_eq!(p.num_states(), 1);
        assert_eq!(p.transitions().len(), 0);
    }

    #[test]
    fn missing_init_is_an_error() {
        let err = parse_protocol("protocol p\ntrans s !!a t\n").unwrap_err();
        assert!(matches!(err, ProtocolError::MissingInit));
    }

    #[test]
    fn duplicate_transition_is_an_error() {
        let err =
            parse_protocol("protocol p\ninit s\ntrans s !!a t\ntrans s !!a t\n").unwrap_err();
        assert!(matches!(err, ProtocolError::DuplicateTransition { .. }));
    }

    #[test]
    fn reserved_prefix_rejected() {
        let err = parse_protocol("protocol p\ninit __s\n").unwrap_err();
        assert!(matches!(err, ProtocolError::ReservedIdentifier(_)));
    }

    #[test]
    fn undeclared_state_with_decls_is_an_error() {
        let err = parse_protocol("protocol p\ninit s\nstate s\ntrans s !!a t\n").unwrap_err();
        assert!(matches!(err, ProtocolError::UnknownState(_)));
    }

    #[test]
    fn normalize_fig1_self_loops() {
        let p = fig1();
        let n = p.normalize_self_loops();
        // fig1 has exactly two broadcast self-loops: (q_in,!!a,q_in), (q_in,!!c,q_in)
        assert_eq!(n.num_states(), p.num_states() + 2);
        assert_eq!(n.num_messages(), p.num_messages() + 1);
        assert_eq!(n.transitions().len(), p.transitions().len() + 2);
        assert!(!n
            .transitions()
            .iter()
            .any(|t| t.op.is_send() && t.src == t.dst));
    }

    #[test]
    fn normalize_is_identity_without_loops() {
        let p = parse_protocol("protocol p\ninit s\ntrans s !!a t\ntrans t ?a t\n").unwrap();
        // receive self-loop stays
        let n = p.normalize_self_loops();
        assert_eq!(p, n);
    }

    #[test]
    fn uncoverable_state_is_isolated() {
        let p = fig1();
        let (q, qu) = p.add_uncoverable_state();
        assert_eq!(q.num_states(), 9);
        assert_ne!(qu, q.initial);
        assert!(q
            .transitions()
            .iter()
            .all(|t| t.src != qu && t.dst != qu));
        assert_eq!(q.uncoverable(), Some(qu));
        assert_eq!(q.check_wait_only().0, p.check_wait_only().0);
        // calling twice adds two fresh states
        let (q2, qu2) = q.add_uncoverable_state();
        assert_eq!(q2.num_states(), 10);
        assert_ne!(q2.state_name(qu2), q.state_name(qu));
    }

    #[test]
    fn serialize_round_trip() {
        let p = fig1();
        let text = p.serialize();
        let q = parse_protocol(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(text, q.serialize());
    }

    #[test]
    fn serialize_round_trip_with_isolated_state() {
        let (p, _) = fig1().add_uncoverable_state();
        let q = parse_protocol_trusted(&p.serialize()).unwrap();
        assert_eq!(p, q);
    }
}
