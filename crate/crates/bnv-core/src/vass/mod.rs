//! Vector addition systems with states: the explicit model, its source
//! format, stepping, bounded reachability, Karp-Miller coverability,
//! repeated coverability through self-covering cycles, and the
//! mutual-reachability run-length bound.

mod algo;
pub mod lp;
mod repcover;

pub use algo::{
    bounded_reachability_sys, karp_miller_sys, BoundedOutcome, KmTree, ReachCaps, SysEdge,
    VassSys,
};
pub use algo::{lift, OmegaVal, OmegaVals};
pub use repcover::{
    bounded_reachability, concrete_lasso, mutual_reachability, nonneg_walk_exists,
    repeated_coverability_sys, repeated_coverability_vass, scc, validate_self_covering,
    MutualOutcome, RepcovCaps, RepcovOutcome, SelfCoveringLasso,
};

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use serde_json::{json, Value};
use thiserror::Error;

/// Index of a location in [`Vass::locations`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocId(pub u32);

impl LocId {
    pub fn ix(self) -> usize {
        self.0 as usize
    }
}

/// A counter update, sparse over counter indices.
pub type Delta = Vec<(usize, i64)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VassTransition {
    pub src: LocId,
    pub delta: Delta,
    pub dst: LocId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vass {
    pub name: String,
    locations: Vec<String>,
    counters: Vec<String>,
    pub initial: LocId,
    transitions: Vec<VassTransition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VassConfig {
    pub loc: LocId,
    pub vals: Vec<i64>,
}

#[derive(Debug, Error)]
pub enum VassError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("unknown counter `{0}`")]
    UnknownCounter(String),
    #[error("transition source does not match the configuration location")]
    WrongLocation,
    #[error("counter `{0}` would become negative")]
    NegativeCounter(String),
}

impl Vass {
    pub fn new(name: &str, locations: Vec<String>, counters: Vec<String>, initial: &str) -> Vass {
        let initial = LocId(
            locations
                .iter()
                .position(|l| l == initial)
                .expect("initial location exists") as u32,
        );
        Vass {
            name: name.to_string(),
            locations,
            counters,
            initial,
            transitions: Vec::new(),
        }
    }

    pub fn add_transition(&mut self, src: LocId, delta: Delta, dst: LocId) {
        let mut d = delta;
        d.sort_by_key(|&(i, _)| i);
        d.retain(|&(_, v)| v != 0);
        self.transitions.push(VassTransition { src, delta: d, dst });
    }

    pub fn num_counters(&self) -> usize {
        self.counters.len()
    }

    pub fn num_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn loc_name(&self, l: LocId) -> &str {
        &self.locations[l.ix()]
    }

    pub fn counter_name(&self, i: usize) -> &str {
        &self.counters[i]
    }

    pub fn loc_by_name(&self, name: &str) -> Option<LocId> {
        self.locations
            .iter()
            .position(|l| l == name)
            .map(|i| LocId(i as u32))
    }

    pub fn counter_by_name(&self, name: &str) -> Option<usize> {
        self.counters.iter().position(|c| c == name)
    }

    pub fn transitions(&self) -> &[VassTransition] {
        &self.transitions
    }

    pub fn initial_config(&self) -> VassConfig {
        VassConfig {
            loc: self.initial,
            vals: vec![0; self.counters.len()],
        }
    }

    /// Fires one transition; counters must stay nonnegative.
    pub fn step(&self, c: &VassConfig, t: &VassTransition) -> Result<VassConfig, VassError> {
        if c.loc != t.src {
            return Err(VassError::WrongLocation);
        }
        let mut vals = c.vals.clone();
        for &(i, d) in &t.delta {
            let v = vals[i] + d;
            if v < 0 {
                return Err(VassError::NegativeCounter(self.counters[i].clone()));
            }
            vals[i] = v;
        }
        Ok(VassConfig { loc: t.dst, vals })
    }

    /// Replays a run given as a transition-index sequence from the initial
    /// configuration.
    pub fn replay(&self, steps: &[usize]) -> Result<Vec<VassConfig>, VassError> {
        let mut out = vec![self.initial_config()];
        for &i in steps {
            let t = &self.transitions[i];
            let next = self.step(out.last().unwrap(), t)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("vass {}\n", self.name));
        out.push_str(&format!("init {}\n", self.loc_name(self.initial)));
        if !self.counters.is_empty() {
            out.push_str(&format!("counters {}\n", self.counters.join(" ")));
        }
        for l in &self.locations {
            out.push_str(&format!("loc {l}\n"));
        }
        for t in &self.transitions {
            out.push_str("trans ");
            out.push_str(self.loc_name(t.src));
            for &(i, d) in &t.delta {
                if d >= 0 {
                    out.push_str(&format!(" {}+={}", self.counters[i], d));
                } else {
                    out.push_str(&format!(" {}-={}", self.counters[i], -d));
                }
            }
            out.push(' ');
            out.push_str(self.loc_name(t.dst));
            out.push('\n');
        }
        out
    }

    pub fn run_to_json(&self, steps: &[usize]) -> Value {
        let arr: Vec<Value> = steps
            .iter()
            .map(|&i| {
                let t = &self.transitions[i];
                let delta: BTreeMap<&str, i64> = t
                    .delta
                    .iter()
                    .map(|&(c, d)| (self.counters[c].as_str(), d))
                    .collect();
                json!({
                    "src": self.loc_name(t.src),
                    "delta": delta,
                    "dst": self.loc_name(t.dst),
                })
            })
            .collect();
        json!({ "format": 1, "steps": arr })
    }
}

impl fmt::Display for Vass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.serialize())
    }
}

/// Parses the line-oriented VASS format: `vass <name>`, `init <loc>`,
/// `counters x y ...`, optional `loc <name>` declarations, and
/// `trans <src> [x+=k|x-=k ...] <dst>`. Location tokens may use the brace
/// syntax produced when dumping constructed systems.
pub fn parse_vass(text: &str) -> Result<Vass, VassError> {
    let mut name = None;
    let mut init = None;
    let mut counters: Vec<String> = Vec::new();
    let mut locs: Vec<String> = Vec::new();
    let mut raw_trans: Vec<(usize, Vec<String>)> = Vec::new();

    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        // `#` comments: only a `#` that starts a token opens a comment, so
        // summary-location tokens like {q2>q3#1} survive.
        let mut kept: Vec<String> = Vec::new();
        for tok in raw_line.split_whitespace() {
            if tok.starts_with('#') {
                break;
            }
            kept.push(tok.to_string());
        }
        let Some((head, rest)) = kept.split_first() else {
            continue;
        };
        let rest = rest.to_vec();
        match head.as_str() {
            "vass" => {
                name = Some(rest.first().cloned().ok_or(VassError::Syntax {
                    line,
                    msg: "expected `vass <name>`".into(),
                })?)
            }
            "init" => {
                init = Some(rest.first().cloned().ok_or(VassError::Syntax {
                    line,
                    msg: "expected `init <loc>`".into(),
                })?)
            }
            "counters" => counters.extend(rest),
            "loc" => locs.extend(rest),
            "trans" => {
                if rest.len() < 2 {
                    return Err(VassError::Syntax {
                        line,
                        msg: "expected `trans <src> [updates] <dst>`".into(),
                    });
                }
                raw_trans.push((line, rest));
            }
            other => {
                return Err(VassError::Syntax {
                    line,
                    msg: format!("unknown directive `{other}`"),
                });
            }
        }
    }

    let name = name.ok_or(VassError::Syntax {
        line: 0,
        msg: "missing vass declaration".into(),
    })?;
    let init = init.ok_or(VassError::Syntax {
        line: 0,
        msg: "missing init declaration".into(),
    })?;

    let mut all_locs: Vec<String> = locs;
    let ensure_loc = |l: &str, all: &mut Vec<String>| {
        if !all.iter().any(|x| x == l) {
            all.push(l.to_string());
        }
    };
    ensure_loc(&init, &mut all_locs);
    for (_, toks) in &raw_trans {
        ensure_loc(&toks[0], &mut all_locs);
        ensure_loc(&toks[toks.len() - 1], &mut all_locs);
    }

    let mut v = Vass::new(&name, all_locs, counters, &init);
    for (line, toks) in raw_trans {
        let src = v
            .loc_by_name(&toks[0])
            .ok_or_else(|| VassError::UnknownLocation(toks[0].clone()))?;
        let dst = v
            .loc_by_name(&toks[toks.len() - 1])
            .ok_or_else(|| VassError::UnknownLocation(toks[toks.len() - 1].clone()))?;
        let mut delta: BTreeMap<usize, i64> = BTreeMap::new();
        for upd in &toks[1..toks.len() - 1] {
            let (c, d) = if let Some(p) = upd.find("+=") {
                (&upd[..p], upd[p + 2..].parse::<i64>())
            } else if let Some(p) = upd.find("-=") {
                (&upd[..p], upd[p + 2..].parse::<i64>().map(|x| -x))
            } else {
                return Err(VassError::Syntax {
                    line,
                    msg: format!("expected `<counter>+=k` or `<counter>-=k`, got `{upd}`"),
                });
            };
            let d = d.map_err(|_| VassError::Syntax {
                line,
                msg: format!("bad update amount in `{upd}`"),
            })?;
            let ci = v
                .counter_by_name(c)
                .ok_or_else(|| VassError::UnknownCounter(c.to_string()))?;
            *delta.entry(ci).or_insert(0) += d;
        }
        v.add_transition(src, delta.into_iter().collect(), dst);
    }
    Ok(v)
}

/// Length bound for mutual-reachability runs:
/// `17 (|X|+3)^2 x^(15 (|X|+3)^(|X|+5))` with `x = (1 + 2 (|Loc|+1)^2)^2`.
/// Exact value; astronomically large already for a handful of counters.
pub fn run_length_bound(num_counters: u64, num_locations: u64) -> BigUint {
    let xs = BigUint::from(num_counters) + 3u32;
    let x = {
        let l1 = BigUint::from(num_locations) + 1u32;
        let inner = BigUint::from(1u32) + 2u32 * l1.clone() * l1;
        inner.clone() * inner
    };
    let exp = 15u32 * xs.pow(num_counters as u32 + 5);
    let exp_u32: u32 = exp
        .try_into()
        .expect("exponent too large to materialize; use run_length_bound_log2");
    BigUint::from(17u32) * xs.clone() * xs * x.pow(exp_u32)
}

/// Base-2 logarithm of the bound, for monotonicity checks on inputs whose
/// exact value would not fit in memory.
pub fn run_length_bound_log2(num_counters: u64, num_locations: u64) -> f64 {
    let xs = num_counters as f64 + 3.0;
    let l1 = num_locations as f64 + 1.0;
    let x = (1.0 + 2.0 * l1 * l1).powi(2);
    let exp = 15.0 * xs.powf(num_counters as f64 + 5.0);
    (17.0 * xs * xs).log2() + exp * x.log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn two_counter_vass() -> Vass {
        parse_vass(
            "vass toy\ninit l0\ncounters x y\n\
             trans l0 x+=1 l0\n\
             trans l0 x-=1 y+=1 l1\n\
             trans l1 y-=1 l0\n",
        )
        .unwrap()
    }

    #[test]
    fn step_examples() {
        let v = two_counter_vass();
        let c0 = v.initial_config();
        let inc = &v.transitions()[0];
        let c1 = v.step(&c0, inc).unwrap();
        assert_eq!(c1.vals, vec![1, 0]);
        // decrement below zero is rejected
        let dec = &v.transitions()[1];
        assert!(matches!(
            v.step(&c0, dec),
            Err(VassError::NegativeCounter(_))
        ));
        // zero delta changes only the location
        let mut v2 = two_counter_vass();
        let l0 = v2.loc_by_name("l0").unwrap();
        let l1 = v2.loc_by_name("l1").unwrap();
        v2.add_transition(l0, vec![], l1);
        let t = v2.transitions().last().unwrap().clone();
        let c = v2.step(&c0, &t).unwrap();
        assert_eq!(c.loc, l1);
        assert_eq!(c.vals, vec![0, 0]);
    }

    #[test]
    fn serialize_round_trip() {
        let v = two_counter_vass();
        let text = v.serialize();
        let w = parse_vass(&text).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn bound_at_origin() {
        // x = 9, bound = 17 * 9 * 9^3645
        let b = run_length_bound(0, 0);
        let expected = BigUint::from(153u32) * BigUint::from(9u32).pow(3645);
        assert_eq!(b, expected);
    }

    #[test]
    fn bound_one_one() {
        // x = (1 + 2*4)^2 = 81, exponent 15 * 4^6
        let b = run_length_bound(1, 1);
        let expected = BigUint::from(17u32 * 16u32) * BigUint::from(81u32).pow(15 * 4096u32);
        assert_eq!(b, expected);
    }

    #[test]
    fn bound_is_positive() {
        assert!(run_length_bound(0, 0) > BigUint::one());
    }

    #[test]
    fn bound_log_monotone() {
        for c in 0..5u64 {
            for l in 0..5u64 {
                let here = run_length_bound_log2(c, l);
                assert!(run_length_bound_log2(c + 1, l) > here);
                assert!(run_length_bound_log2(c, l + 1) > here);
            }
        }
    }
}
