//! Loop classes of the transition graph, transition paths between them,
//! positivity certificates and incidence spectral radii.

use crate::matrix::RatMatrix;
use crate::net::{NetError, TransitionGraph};
use crate::perron::{scc, spectral_radius_sparse, Enclosure, SparseMatrix};
use crate::poly::{ln_rat, Rat};
use num_traits::{One, Signed};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoopError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("expected exactly one sink component, found {0}")]
    SinkCount(usize),
    #[error("vertex set contains no loop class")]
    NoLoop,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopClassInfo {
    pub members: Vec<usize>,
    /// Strongly connected components with an edge are always maximal.
    pub maximal: bool,
    pub essential: bool,
    pub simple: bool,
    pub admits_interior: bool,
    /// Closed in-class path starting at the smallest member, for simple classes.
    pub cycle: Option<Vec<usize>>,
}

impl LoopClassInfo {
    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }
}

#[derive(Clone, Debug)]
pub struct LoopStructure {
    pub classes: Vec<LoopClassInfo>,
    /// Index of the essential class in `classes`.
    pub essential: usize,
    /// Condensation components, reverse topological order.
    pub components: Vec<Vec<usize>>,
    class_of: Vec<Option<usize>>,
}

impl LoopStructure {
    pub fn class_of(&self, v: usize) -> Option<usize> {
        self.class_of[v]
    }

    pub fn essential_class(&self) -> &LoopClassInfo {
        &self.classes[self.essential]
    }

    /// Indices of the maximal classes other than the essential one.
    pub fn non_essential(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.classes.len()).filter(move |&c| c != self.essential)
    }
}

pub fn loop_classes(g: &TransitionGraph) -> Result<LoopStructure, LoopError> {
    g.require_finite_type()?;
    let n = g.len();
    let comps = scc(n, &|v| g.edges(v).iter().map(|e| e.child).collect());
    let mut comp_of = vec![0; n];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let sinks: Vec<usize> = (0..comps.len())
        .filter(|&c| {
            comps[c]
                .iter()
                .all(|&v| g.edges(v).iter().all(|e| comp_of[e.child] == c))
        })
        .collect();
    if sinks.len() != 1 {
        return Err(LoopError::SinkCount(sinks.len()));
    }
    let sink = sinks[0];

    // Classes are listed by smallest member for stable numbering.
    let mut order: Vec<usize> = (0..comps.len())
        .filter(|&c| {
            comps[c]
                .iter()
                .any(|&v| g.edges(v).iter().any(|e| comp_of[e.child] == c))
        })
        .collect();
    order.sort_by_key(|&c| comps[c][0]);
    if !order.contains(&sink) {
        return Err(LoopError::NoLoop);
    }

    let mut class_of = vec![None; n];
    let mut classes = Vec::new();
    let mut essential = 0;
    for (k, &c) in order.iter().enumerate() {
        for &v in &comps[c] {
            class_of[v] = Some(k);
        }
        if c == sink {
            essential = k;
        }
        let members = comps[c].clone();
        let (simple, cycle) = simple_cycle(g, &members);
        classes.push(LoopClassInfo {
            admits_interior: admits_interior(g, &members),
            members,
            maximal: true,
            essential: c == sink,
            simple,
            cycle,
        });
    }
    Ok(LoopStructure {
        classes,
        essential,
        components: comps,
        class_of,
    })
}

/// A boundary path always takes the left-most child or always the right-most
/// one; in a strongly connected class a non-boundary path exists exactly when
/// some in-class edge is not left-most and some (possibly other) is not right-most.
fn admits_interior(g: &TransitionGraph, members: &[usize]) -> bool {
    let mut not_left = false;
    let mut not_right = false;
    for &v in members {
        let es = g.edges(v);
        for e in es {
            if members.binary_search(&e.child).is_ok() {
                not_left |= e.ordinal != 0;
                not_right |= e.ordinal + 1 != es.len();
            }
        }
    }
    not_left && not_right
}

fn simple_cycle(g: &TransitionGraph, members: &[usize]) -> (bool, Option<Vec<usize>>) {
    let inside = |v: usize| -> Vec<usize> {
        g.edges(v)
            .iter()
            .map(|e| e.child)
            .filter(|c| members.binary_search(c).is_ok())
            .collect()
    };
    if !members.iter().all(|&v| inside(v).len() == 1) {
        return (false, None);
    }
    let start = members[0];
    let mut cycle = vec![start];
    let mut v = inside(start)[0];
    while v != start {
        cycle.push(v);
        v = inside(v)[0];
    }
    cycle.push(start);
    (true, Some(cycle))
}

/// Paths from class `from` to class `to` whose interior avoids every maximal class.
pub fn transition_paths(g: &TransitionGraph, ls: &LoopStructure, from: usize, to: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if from == to {
        return out;
    }
    for &start in &ls.classes[from].members {
        let mut stack = vec![vec![start]];
        while let Some(p) = stack.pop() {
            let last = *p.last().unwrap();
            for e in g.edges(last).iter().rev() {
                let mut q = p.clone();
                q.push(e.child);
                match ls.class_of(e.child) {
                    Some(c) if c == to => out.push(q),
                    Some(_) => {}
                    None => stack.push(q),
                }
            }
        }
    }
    out.sort();
    out
}

/// Closed walks of `len` edges inside `class` from `v` back to `v`.
fn in_class_cycles(g: &TransitionGraph, class: &LoopClassInfo, v: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack = vec![vec![v]];
    while let Some(p) = stack.pop() {
        let last = *p.last().unwrap();
        if p.len() == len + 1 {
            if last == v {
                out.push(p);
            }
            continue;
        }
        for e in g.edges(last).iter().rev() {
            if class.contains(e.child) {
                let mut q = p.clone();
                q.push(e.child);
                stack.push(q);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathCheck {
    pub path: Vec<usize>,
    /// Minimal entry of the plain product.
    pub min_entry: Rat,
    pub repair: Option<Repair>,
}

impl PathCheck {
    pub fn positive(&self) -> bool {
        self.min_entry.is_positive()
    }

    pub fn certified(&self) -> bool {
        self.positive() || self.repair.is_some()
    }
}

/// A failing path made positive by in-class cycles glued at its ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Repair {
    /// Edges inserted before the path (a closed walk in the source class).
    pub prefix: usize,
    /// Edges inserted after the path (a closed walk in the target class).
    pub suffix: usize,
    /// Full repaired vertex sequence.
    pub path: Vec<usize>,
    pub min_entry: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCertificate {
    pub from: usize,
    pub to: usize,
    pub paths: Vec<PathCheck>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertVerdict {
    Certified,
    /// First transition path that neither is positive nor could be repaired.
    Unproven {
        path: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositivityCertificate {
    pub pairs: Vec<PairCertificate>,
    pub verdict: CertVerdict,
    pub budget: usize,
}

impl PositivityCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == CertVerdict::Certified
    }

    pub fn repairs(&self) -> impl Iterator<Item = (&PathCheck, &Repair)> {
        self.pairs
            .iter()
            .flat_map(|p| &p.paths)
            .filter_map(|c| c.repair.as_ref().map(|r| (c, r)))
    }
}

pub const DEFAULT_REPAIR_BUDGET: usize = 4;

/// Checks every transition-path product for strict positivity; failures are
/// retried with in-class cycles inserted at the start, then at the end, then
/// at both ends, by increasing total inserted length up to `budget`.
pub fn certify_min_formula(
    g: &TransitionGraph,
    ls: &LoopStructure,
    budget: usize,
) -> Result<PositivityCertificate, LoopError> {
    let mut pairs = Vec::new();
    let mut verdict = CertVerdict::Certified;
    for from in 0..ls.classes.len() {
        for to in 0..ls.classes.len() {
            let paths = transition_paths(g, ls, from, to);
            if paths.is_empty() {
                continue;
            }
            let mut checks = Vec::new();
            for p in paths {
                let min_entry = g.path_product(&p)?.min_entry();
                let repair = if min_entry.is_positive() {
                    None
                } else {
                    repair(g, ls, from, to, &p, budget)?
                };
                let c = PathCheck {
                    path: p,
                    min_entry,
                    repair,
                };
                if !c.certified() && verdict == CertVerdict::Certified {
                    verdict = CertVerdict::Unproven { path: c.path.clone() };
                }
                checks.push(c);
            }
            pairs.push(PairCertificate {
                from,
                to,
                paths: checks,
            });
        }
    }
    Ok(PositivityCertificate { pairs, verdict, budget })
}

fn repair(
    g: &TransitionGraph,
    ls: &LoopStructure,
    from: usize,
    to: usize,
    path: &[usize],
    budget: usize,
) -> Result<Option<Repair>, LoopError> {
    let first = path[0];
    let last = *path.last().unwrap();
    let (cf, ct) = (&ls.classes[from], &ls.classes[to]);
    let try_glue = |pre: &[usize], suf: &[usize]| -> Result<Option<Repair>, LoopError> {
        let mut full: Vec<usize> = pre.to_vec();
        if full.is_empty() {
            full.push(first);
        }
        full.extend_from_slice(&path[1..]);
        if !suf.is_empty() {
            full.extend_from_slice(&suf[1..]);
        }
        let m = g.path_product(&full)?.min_entry();
        Ok(m.is_positive().then(|| Repair {
            prefix: pre.len().saturating_sub(1),
            suffix: suf.len().saturating_sub(1),
            path: full,
            min_entry: m,
        }))
    };
    for total in 1..=budget {
        for c in in_class_cycles(g, cf, first, total) {
            if let Some(r) = try_glue(&c, &[])? {
                return Ok(Some(r));
            }
        }
        for c in in_class_cycles(g, ct, last, total) {
            if let Some(r) = try_glue(&[], &c)? {
                return Ok(Some(r));
            }
        }
        for a in 1..total {
            for pre in in_class_cycles(g, cf, first, a) {
                for suf in in_class_cycles(g, ct, last, total - a) {
                    if let Some(r) = try_glue(&pre, &suf)? {
                        return Ok(Some(r));
                    }
                }
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceData {
    pub members: Vec<usize>,
    /// Vertices with a descendant in the set, ascending; indexes `j`.
    pub ancestors: Vec<usize>,
    pub i: RatMatrix,
    pub j: RatMatrix,
    pub sp_i: Enclosure,
    pub sp_j: Enclosure,
    /// Enclosure of `ln sp(J) / |ln ρ_min|`.
    pub box_dim: (f64, f64),
}

pub fn incidence(g: &TransitionGraph, set: &[usize]) -> Result<IncidenceData, LoopError> {
    let mut members: Vec<usize> = set.to_vec();
    members.sort_unstable();
    members.dedup();
    let n = g.len();
    let has_loop = members.iter().any(|&v| scc_contains_loop(g, &members, v));
    if !has_loop {
        return Err(LoopError::NoLoop);
    }
    // Reverse reachability from the set.
    let mut parents = vec![Vec::new(); n];
    for v in 0..n {
        for e in g.edges(v) {
            parents[e.child].push(v);
        }
    }
    let mut seen: BTreeSet<usize> = members.iter().copied().collect();
    let mut stack = members.clone();
    while let Some(v) = stack.pop() {
        for &p in &parents[v] {
            if seen.insert(p) {
                stack.push(p);
            }
        }
    }
    let ancestors: Vec<usize> = seen.into_iter().collect();
    let build = |verts: &[usize]| -> (RatMatrix, SparseMatrix) {
        let mut m = RatMatrix::zeros(verts.len(), verts.len());
        let mut s = SparseMatrix::new(verts.len());
        for (a, &v) in verts.iter().enumerate() {
            for e in g.edges(v) {
                if let Ok(b) = verts.binary_search(&e.child) {
                    m.set(a, b, Rat::one());
                    s.push(a, b, Rat::one());
                }
            }
        }
        (m, s)
    };
    let (i, si) = build(&members);
    let (j, sj) = build(&ancestors);
    let sp_i = spectral_radius_sparse(&si);
    let sp_j = spectral_radius_sparse(&sj);
    let scale = g.ln_rho_min().abs();
    let box_dim = (ln_rat(&sp_j.lo) / scale, ln_rat(&sp_j.hi) / scale);
    Ok(IncidenceData {
        members,
        ancestors,
        i,
        j,
        sp_i,
        sp_j,
        box_dim,
    })
}

/// Whether `v` lies on a cycle that stays inside `set`.
fn scc_contains_loop(g: &TransitionGraph, set: &[usize], v: usize) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for e in g.edges(u) {
            if set.binary_search(&e.child).is_err() {
                continue;
            }
            if e.child == v {
                return true;
            }
            if seen.insert(e.child) {
                stack.push(e.child);
            }
        }
    }
    false
}
