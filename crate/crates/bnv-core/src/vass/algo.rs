//! Search engines shared by explicit and lazily-constructed systems:
//! bounded breadth-first reachability and the Karp-Miller coverability tree
//! with equal-label folding.

use std::collections::{HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use super::{Delta, LocId, Vass};

/// Valuation entry with the absorbing top element used by accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OmegaVal {
    Fin(i64),
    Omega,
}

impl OmegaVal {
    pub fn plus(self, d: i64) -> OmegaVal {
        match self {
            OmegaVal::Fin(v) => OmegaVal::Fin(v + d),
            OmegaVal::Omega => OmegaVal::Omega,
        }
    }

    pub fn is_zero(self) -> bool {
        self == OmegaVal::Fin(0)
    }

    pub fn covers(self, other: OmegaVal) -> bool {
        match (self, other) {
            (OmegaVal::Omega, _) => true,
            (OmegaVal::Fin(_), OmegaVal::Omega) => false,
            (OmegaVal::Fin(a), OmegaVal::Fin(b)) => a >= b,
        }
    }
}

pub type OmegaVals = Vec<OmegaVal>;

pub fn lift(vals: &[i64]) -> OmegaVals {
    vals.iter().map(|&v| OmegaVal::Fin(v)).collect()
}

/// An edge offered by a system: sparse counter update, destination, and
/// caller-defined bookkeeping used to rebuild witnesses.
#[derive(Debug, Clone)]
pub struct SysEdge<L, M> {
    pub delta: Delta,
    pub dst: L,
    pub meta: M,
}

/// A VASS presented as a successor function. Constructed systems materialize
/// locations lazily and may consult the valuation to prune symmetric or
/// infeasible branches; the plain model ignores it.
pub trait VassSys {
    type Loc: Clone + Eq + Hash + Ord + Debug;
    type Meta: Clone + Debug;

    fn initial_loc(&self) -> Self::Loc;
    fn num_counters(&self) -> usize;
    fn edges_from(&self, loc: &Self::Loc, vals: &OmegaVals) -> Vec<SysEdge<Self::Loc, Self::Meta>>;
}

impl VassSys for Vass {
    type Loc = LocId;
    type Meta = usize;

    fn initial_loc(&self) -> LocId {
        self.initial
    }

    fn num_counters(&self) -> usize {
        self.num_counters()
    }

    fn edges_from(&self, loc: &LocId, _vals: &OmegaVals) -> Vec<SysEdge<LocId, usize>> {
        self.transitions()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.src == *loc)
            .map(|(i, t)| SysEdge {
                delta: t.delta.clone(),
                dst: t.dst,
                meta: i,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReachCaps {
    /// Per-counter value ceiling during the search.
    pub counter_cap: i64,
    /// Maximum number of steps (BFS depth).
    pub step_cap: usize,
    /// Maximum number of distinct states stored.
    pub state_cap: usize,
}

impl Default for ReachCaps {
    fn default() -> Self {
        ReachCaps {
            counter_cap: 8,
            step_cap: 100_000,
            state_cap: 2_000_000,
        }
    }
}

#[derive(Debug)]
pub enum BoundedOutcome<L, M> {
    /// A run, as `(meta, destination location, destination valuation)`
    /// triples from the start configuration.
    Reached(Vec<(M, L, Vec<i64>)>),
    /// Not reached. `exhaustive` is true when every reachable state was
    /// enumerated without hitting any cap, making this a definitive answer.
    NotReached { exhaustive: bool },
}

/// Breadth-first search from `start` for a state satisfying `target`,
/// restricted to valuations below the counter cap.
pub fn bounded_reachability_sys<S: VassSys>(
    sys: &S,
    start: (S::Loc, Vec<i64>),
    target: &dyn Fn(&S::Loc, &[i64]) -> bool,
    caps: ReachCaps,
) -> BoundedOutcome<S::Loc, S::Meta> {
    type Key<S> = (<S as VassSys>::Loc, Vec<i64>);
    if target(&start.0, &start.1) {
        return BoundedOutcome::Reached(vec![]);
    }
    let mut parent: HashMap<Key<S>, (Key<S>, S::Meta)> = HashMap::new();
    let mut depth: HashMap<Key<S>, usize> = HashMap::new();
    let mut queue: VecDeque<Key<S>> = VecDeque::new();
    let mut exhaustive = true;
    depth.insert(start.clone(), 0);
    queue.push_back(start.clone());
    let mut hit: Option<Key<S>> = None;
    'outer: while let Some(cur) = queue.pop_front() {
        let d = depth[&cur];
        if d >= caps.step_cap {
            exhaustive = false;
            continue;
        }
        let ovals = lift(&cur.1);
        for e in sys.edges_from(&cur.0, &ovals) {
            let mut vals = cur.1.clone();
            let mut ok = true;
            for &(i, dd) in &e.delta {
                vals[i] += dd;
                if vals[i] < 0 {
                    ok = false;
                    break;
                }
                if vals[i] > caps.counter_cap {
                    ok = false;
                    exhaustive = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let key = (e.dst.clone(), vals);
            if depth.contains_key(&key) {
                continue;
            }
            if depth.len() >= caps.state_cap {
                exhaustive = false;
                continue;
            }
            depth.insert(key.clone(), d + 1);
            parent.insert(key.clone(), (cur.clone(), e.meta.clone()));
            if target(&key.0, &key.1) {
                hit = Some(key);
                break 'outer;
            }
            queue.push_back(key);
        }
    }
    match hit {
        Some(mut cur) => {
            let mut path = Vec::new();
            while let Some((prev, meta)) = parent.get(&cur) {
                path.push((meta.clone(), cur.0.clone(), cur.1.clone()));
                cur = prev.clone();
            }
            path.reverse();
            BoundedOutcome::Reached(path)
        }
        None => BoundedOutcome::NotReached { exhaustive },
    }
}

/// One node of the coverability tree. `fold` points at the earlier node with
/// the same label when this node was closed without expansion.
#[derive(Debug, Clone)]
pub struct KmNode<L, M> {
    pub loc: L,
    pub vals: OmegaVals,
    pub parent: Option<(usize, M, Delta)>,
    pub fold: Option<usize>,
}

#[derive(Debug)]
pub struct KmTree<L, M> {
    pub nodes: Vec<KmNode<L, M>>,
    /// False when the node cap stopped construction; coverability answers
    /// are then only sound in the positive direction.
    pub complete: bool,
}

impl<L: Clone + Eq, M> KmTree<L, M> {
    /// True when some reachable configuration at `loc` dominates `want`.
    pub fn covers(&self, loc: &L, want: &[i64]) -> bool {
        self.nodes.iter().any(|n| {
            n.loc == *loc
                && want
                    .iter()
                    .enumerate()
                    .all(|(i, &w)| n.vals[i].covers(OmegaVal::Fin(w)))
        })
    }

    /// Tree path from the root to `node` (edge metas with their deltas).
    pub fn path_to(&self, node: usize) -> Vec<(M, Delta)>
    where
        M: Clone,
    {
        let mut out = Vec::new();
        let mut cur = node;
        while let Some((p, m, d)) = &self.nodes[cur].parent {
            out.push((m.clone(), d.clone()));
            cur = *p;
        }
        out.reverse();
        out
    }
}

/// Builds the Karp-Miller tree with ancestor acceleration, closing nodes
/// whose label already occurs elsewhere. `max_nodes` bounds construction;
/// the `complete` flag records whether it sufficed.
pub fn karp_miller_sys<S: VassSys>(
    sys: &S,
    start: (S::Loc, OmegaVals),
    max_nodes: usize,
) -> KmTree<S::Loc, S::Meta> {
    let mut nodes: Vec<KmNode<S::Loc, S::Meta>> = vec![KmNode {
        loc: start.0,
        vals: start.1,
        parent: None,
        fold: None,
    }];
    let mut label_index: HashMap<(S::Loc, OmegaVals), usize> = HashMap::new();
    label_index.insert((nodes[0].loc.clone(), nodes[0].vals.clone()), 0);
    let mut queue = VecDeque::from([0usize]);
    let mut complete = true;
    while let Some(u) = queue.pop_front() {
        let (loc, vals) = (nodes[u].loc.clone(), nodes[u].vals.clone());
        for e in sys.edges_from(&loc, &vals) {
            let mut child = vals.clone();
            let mut ok = true;
            for &(i, d) in &e.delta {
                child[i] = child[i].plus(d);
                if let OmegaVal::Fin(v) = child[i] {
                    if v < 0 {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            // accelerate against ancestors with the same location
            loop {
                let mut changed = false;
                let mut a = u;
                loop {
                    if nodes[a].loc == e.dst {
                        let av = &nodes[a].vals;
                        let dominates = av
                            .iter()
                            .zip(child.iter())
                            .all(|(&x, &y)| y.covers(x));
                        if dominates {
                            for i in 0..child.len() {
                                if child[i] != av[i] && child[i] != OmegaVal::Omega {
                                    child[i] = OmegaVal::Omega;
                                    changed = true;
                                }
                            }
                        }
                    }
                    match nodes[a].parent {
                        Some((p, _, _)) => a = p,
                        None => break,
                    }
                }
                if !changed {
                    break;
                }
            }
            if nodes.len() >= max_nodes {
                complete = false;
                continue;
            }
            let id = nodes.len();
            nodes.push(KmNode {
                loc: e.dst.clone(),
                vals: child.clone(),
                parent: Some((u, e.meta.clone(), e.delta.clone())),
                fold: None,
            });
            match label_index.get(&(e.dst.clone(), child.clone())) {
                Some(&w) => {
                    nodes[id].fold = Some(w);
                }
                None => {
                    label_index.insert((e.dst.clone(), child), id);
                    queue.push_back(id);
                }
            }
        }
    }
    KmTree { nodes, complete }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vass::parse_vass;

    #[test]
    fn bounded_reach_finds_runs() {
        let v = parse_vass(
            "vass toy\ninit l0\ncounters x\n\
             trans l0 x+=1 l0\n\
             trans l0 x-=1 l1\n",
        )
        .unwrap();
        let l1 = v.loc_by_name("l1").unwrap();
        let out = bounded_reachability_sys(
            &v,
            (v.initial, vec![0]),
            &|loc, vals| *loc == l1 && vals.iter().all(|&x| x == 0),
            ReachCaps::default(),
        );
        match out {
            BoundedOutcome::Reached(path) => assert_eq!(path.len(), 2),
            other => panic!("expected a run, got {other:?}"),
        }
    }

    #[test]
    fn bounded_reach_cap_awareness() {
        // reaching l1 requires x = 5 in between
        let v = parse_vass(
            "vass toy\ninit l0\ncounters x\n\
             trans l0 x+=1 l0\n\
             trans l0 x-=5 l1\n",
        )
        .unwrap();
        let l1 = v.loc_by_name("l1").unwrap();
        let tight = ReachCaps {
            counter_cap: 3,
            ..ReachCaps::default()
        };
        match bounded_reachability_sys(&v, (v.initial, vec![0]), &|loc, _| *loc == l1, tight) {
            BoundedOutcome::NotReached { exhaustive } => assert!(!exhaustive),
            other => panic!("unexpected {other:?}"),
        }
        let wide = ReachCaps {
            counter_cap: 5,
            ..ReachCaps::default()
        };
        assert!(matches!(
            bounded_reachability_sys(&v, (v.initial, vec![0]), &|loc, _| *loc == l1, wide),
            BoundedOutcome::Reached(_)
        ));
    }

    #[test]
    fn bounded_reach_exhaustive_no() {
        let v = parse_vass("vass toy\ninit l0\ncounters x\ntrans l0 x+=0 l1\n").unwrap();
        let missing = v.loc_by_name("l0").unwrap();
        let out = bounded_reachability_sys(
            &v,
            (v.loc_by_name("l1").unwrap(), vec![0]),
            &|loc, _| *loc == missing && false,
            ReachCaps::default(),
        );
        assert!(matches!(out, BoundedOutcome::NotReached { exhaustive: true }));
    }

    #[test]
    fn km_accelerates_pump_loop() {
        let v = parse_vass("vass toy\ninit l0\ncounters x\ntrans l0 x+=1 l0\n").unwrap();
        let tree = karp_miller_sys(&v, (v.initial, lift(&[0])), 1000);
        assert!(tree.complete);
        let l0 = v.initial;
        assert!(tree.covers(&l0, &[7]));
        assert!(tree.covers(&l0, &[1_000_000]));
        assert!(tree
            .nodes
            .iter()
            .any(|n| n.vals == vec![OmegaVal::Omega]));
    }

    #[test]
    fn km_covers_matches_reachability() {
        let v = parse_vass(
            "vass toy\ninit l0\ncounters x y\n\
             trans l0 x+=1 l0\n\
             trans l0 x-=1 y+=1 l1\n\
             trans l1 y-=1 l1\n",
        )
        .unwrap();
        let tree = karp_miller_sys(&v, (v.initial, lift(&[0, 0])), 10_000);
        assert!(tree.complete);
        let l1 = v.loc_by_name("l1").unwrap();
        assert!(tree.covers(&l1, &[0, 1]));
        // y is bounded by 1 at l1 even though x is unbounded at l0
        assert!(!tree.covers(&l1, &[0, 2]));
    }
}
