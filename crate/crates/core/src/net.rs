//! Net intervals, neighbor sets, characteristic vectors and the transition
//! graph they generate.
//!
//! Children of a net interval are derived locally: every level-`(n+1)` word
//! whose image of `K` meets the interval extends one of its level-`n`
//! neighbors, so extending the neighbor maps is enough to find the child
//! grid, the child neighbor sets and the primitive transition matrices.

use crate::field::FieldElement;
use crate::ifs::{AffineMap, Ifs, IfsError, LayerCache};
use crate::matrix::RatMatrix;
use crate::poly::Rat;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("could not decide whether K meets ({u}, {v}) within depth {depth}")]
    Undecided { u: String, v: String, depth: usize },
    #[error(transparent)]
    Ifs(#[from] IfsError),
    #[error("representatives of vector {vertex} disagree: {detail}")]
    Consistency { vertex: usize, detail: String },
    #[error("point {0} is not in the attractor")]
    NotInAttractor(String),
    #[error("point {0} lies outside [0,1]")]
    OutsideUnitInterval(String),
    #[error("the transition graph is not closed ({0})")]
    NotCertified(String),
    #[error("path step {from} -> {to} is not an edge")]
    NotAnEdge { from: usize, to: usize },
    #[error("path must start at the root vector")]
    NotFromRoot,
    #[error("empty path")]
    EmptyPath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
    Undecided,
}

/// Normalized offset `a_i` and ratio `L_i` of one neighbor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Neighbor {
    pub a: FieldElement,
    pub l: FieldElement,
}

/// `(ℓ, V, t)`: normalized length, neighbor set, sibling index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CharacteristicVector {
    pub length: FieldElement,
    pub neighbors: Vec<Neighbor>,
    pub sibling: usize,
}

/// A concrete net interval together with the neighbor maps `S_σ`, listed in
/// neighbor order.
#[derive(Clone, Debug)]
pub struct NetInterval {
    pub level: usize,
    pub a: FieldElement,
    pub b: FieldElement,
    pub length: FieldElement,
    pub neighbors: Vec<Neighbor>,
    pub sibling: usize,
    pub maps: Vec<AffineMap>,
}

impl NetInterval {
    pub fn root(ifs: &Ifs) -> Self {
        let f = ifs.field();
        NetInterval {
            level: 0,
            a: f.zero(),
            b: f.one(),
            length: f.one(),
            neighbors: vec![Neighbor {
                a: f.zero(),
                l: f.one(),
            }],
            sibling: 1,
            maps: vec![AffineMap::identity(f)],
        }
    }

    pub fn cv(&self) -> CharacteristicVector {
        CharacteristicVector {
            length: self.length.clone(),
            neighbors: self.neighbors.clone(),
            sibling: self.sibling,
        }
    }

    fn shape(&self) -> (&FieldElement, &Vec<Neighbor>) {
        (&self.length, &self.neighbors)
    }
}

/// Shared machinery: cached powers of `ρ_min` and memoized attractor queries.
pub struct NetContext<'a> {
    ifs: &'a Ifs,
    depth: usize,
    rho_pow: Vec<FieldElement>,
    rho_inv_pow: Vec<FieldElement>,
    memo: HashMap<(FieldElement, FieldElement), Decision>,
}

impl<'a> NetContext<'a> {
    pub fn new(ifs: &'a Ifs, depth: usize) -> Self {
        let f = ifs.field();
        NetContext {
            ifs,
            depth,
            rho_pow: vec![f.one()],
            rho_inv_pow: vec![f.one()],
            memo: HashMap::new(),
        }
    }

    pub fn ifs(&self) -> &'a Ifs {
        self.ifs
    }

    pub fn rho_pow(&mut self, n: usize) -> FieldElement {
        while self.rho_pow.len() <= n {
            let next = self.rho_pow.last().unwrap() * self.ifs.rho_min();
            self.rho_pow.push(next);
        }
        self.rho_pow[n].clone()
    }

    pub fn rho_inv_pow(&mut self, n: usize) -> FieldElement {
        if self.rho_inv_pow.len() <= n {
            let inv = self.ifs.rho_min().recip().expect("ρ_min is nonzero");
            while self.rho_inv_pow.len() <= n {
                let next = self.rho_inv_pow.last().unwrap() * &inv;
                self.rho_inv_pow.push(next);
            }
        }
        self.rho_inv_pow[n].clone()
    }

    /// Does `K` meet the open interval `(u, v)`?
    pub fn k_intersects(&mut self, u: &FieldElement, v: &FieldElement) -> Decision {
        let key = (u.clone(), v.clone());
        if let Some(d) = self.memo.get(&key) {
            return *d;
        }
        let d = self.k_intersects_uncached(u, v);
        self.memo.insert(key, d);
        d
    }

    fn k_intersects_uncached(&self, u: &FieldElement, v: &FieldElement) -> Decision {
        let mut frontier = vec![AffineMap::identity(self.ifs.field())];
        for _ in 0..=self.depth {
            let mut next = Vec::new();
            let mut seen = HashSet::new();
            for g in &frontier {
                let (lo, hi) = g.hull();
                if hi <= *u || lo >= *v {
                    continue;
                }
                // Hull endpoints are points of K.
                if (*u < lo && lo < *v) || (*u < hi && hi < *v) {
                    return Decision::Yes;
                }
                for s in self.ifs.maps() {
                    let h = g.compose(s);
                    if seen.insert(h.clone()) {
                        next.push(h);
                    }
                }
            }
            if next.is_empty() {
                return Decision::No;
            }
            frontier = next;
        }
        Decision::Undecided
    }

    fn meets(&mut self, u: &FieldElement, v: &FieldElement) -> Result<bool, NetError> {
        match self.k_intersects(u, v) {
            Decision::Yes => Ok(true),
            Decision::No => Ok(false),
            Decision::Undecided => Err(NetError::Undecided {
                u: u.to_string(),
                v: v.to_string(),
                depth: self.depth,
            }),
        }
    }

    /// Does `h(K)` meet `(u, v)`, given that the hull of `h` covers `[u, v]`?
    fn image_meets(&mut self, h: &AffineMap, u: &FieldElement, v: &FieldElement) -> Result<bool, NetError> {
        let (p, q) = h.preimage(u, v);
        self.meets(&p, &q)
    }

    /// Children of `parent`, left to right, with their primitive transition matrices.
    pub fn children(&mut self, parent: &NetInterval) -> Result<Vec<(NetInterval, RatMatrix)>, NetError> {
        let level = parent.level + 1;
        let threshold = self.rho_pow(level);
        let scale = self.rho_inv_pow(level);
        let mut ext: Vec<(usize, AffineMap, Rat)> = Vec::new();
        for (i, g) in parent.maps.iter().enumerate() {
            for (_, h, p) in self.ifs.extend_below(g, &threshold) {
                ext.push((i, h, p));
            }
        }
        let mut distinct: Vec<(AffineMap, FieldElement, FieldElement)> = Vec::new();
        let mut seen = HashSet::new();
        for (_, h, _) in &ext {
            if seen.insert(h.clone()) {
                let (lo, hi) = h.hull();
                distinct.push((h.clone(), lo, hi));
            }
        }
        let mut pts = vec![parent.a.clone(), parent.b.clone()];
        for (_, lo, hi) in &distinct {
            for x in [lo, hi] {
                if parent.a < *x && *x < parent.b {
                    pts.push(x.clone());
                }
            }
        }
        pts.sort();
        pts.dedup();

        let mut out: Vec<(NetInterval, RatMatrix)> = Vec::new();
        for w in pts.windows(2) {
            let (u, v) = (&w[0], &w[1]);
            let mut members: Vec<(Neighbor, AffineMap)> = Vec::new();
            for (h, lo, hi) in &distinct {
                if lo <= u && hi >= v && self.image_meets(h, u, v)? {
                    let a = &(u - &h.offset) * &scale;
                    let l = &h.ratio * &scale;
                    members.push((Neighbor { a, l }, h.clone()));
                }
            }
            if members.is_empty() {
                continue;
            }
            members.sort_by(|x, y| x.0.cmp(&y.0));
            let mut t = RatMatrix::zeros(parent.maps.len(), members.len());
            for (i, h, p) in &ext {
                if let Some(j) = members.iter().position(|m| &m.1 == h) {
                    t.add_to(*i, j, p);
                }
            }
            let (neighbors, maps): (Vec<_>, Vec<_>) = members.into_iter().unzip();
            let child = NetInterval {
                level,
                a: u.clone(),
                b: v.clone(),
                length: &(v - u) * &scale,
                neighbors,
                sibling: 1,
                maps,
            };
            out.push((child, t));
        }
        for i in 0..out.len() {
            let same = (0..i).filter(|&k| out[k].0.shape() == out[i].0.shape()).count();
            out[i].0.sibling = same + 1;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Caps {
    pub max_vertices: usize,
    pub max_level: usize,
    /// Depth cap for attractor-intersection queries.
    pub depth: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_vertices: 10_000,
            max_level: 64,
            depth: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Closure reached: finitely many characteristic vectors.
    FiniteType,
    CapExceeded(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub child: usize,
    /// Left-to-right position among the parent's children.
    pub ordinal: usize,
    pub matrix: usize,
}

/// Interned characteristic vectors with parent-to-child edges.
#[derive(Clone, Debug)]
pub struct TransitionGraph {
    vectors: Vec<CharacteristicVector>,
    reps: Vec<NetInterval>,
    edges: Vec<Vec<Edge>>,
    matrices: Vec<RatMatrix>,
    index: HashMap<CharacteristicVector, usize>,
    verdict: Verdict,
    caps: Caps,
    checked: usize,
    ln_rho_min: f64,
}

impl TransitionGraph {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn verdict(&self) -> &Verdict {
        &self.verdict
    }

    pub fn is_finite_type(&self) -> bool {
        self.verdict == Verdict::FiniteType
    }

    pub fn require_finite_type(&self) -> Result<(), NetError> {
        match &self.verdict {
            Verdict::FiniteType => Ok(()),
            Verdict::CapExceeded(r) => Err(NetError::NotCertified(r.clone())),
        }
    }

    pub fn caps(&self) -> &Caps {
        &self.caps
    }

    pub fn ln_rho_min(&self) -> f64 {
        self.ln_rho_min
    }

    pub fn vector(&self, v: usize) -> &CharacteristicVector {
        &self.vectors[v]
    }

    pub fn representative(&self, v: usize) -> &NetInterval {
        &self.reps[v]
    }

    pub fn lookup(&self, cv: &CharacteristicVector) -> Option<usize> {
        self.index.get(cv).copied()
    }

    pub fn edges(&self, v: usize) -> &[Edge] {
        &self.edges[v]
    }

    pub fn children(&self, v: usize) -> impl Iterator<Item = (usize, &RatMatrix)> + '_ {
        self.edges[v].iter().map(|e| (e.child, &self.matrices[e.matrix]))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(|e| e.len()).sum()
    }

    pub fn matrix(&self, id: usize) -> &RatMatrix {
        &self.matrices[id]
    }

    pub fn matrices(&self) -> &[RatMatrix] {
        &self.matrices
    }

    /// Number of vectors whose children were re-derived from a second representative.
    pub fn consistency_checked(&self) -> usize {
        self.checked
    }

    pub fn dim(&self, v: usize) -> usize {
        self.vectors[v].neighbors.len()
    }

    pub fn edge_matrix(&self, from: usize, to: usize) -> Option<&RatMatrix> {
        self.edges[from]
            .iter()
            .find(|e| e.child == to)
            .map(|e| &self.matrices[e.matrix])
    }

    /// Product of primitive matrices along `path` (at least two vertices).
    pub fn path_product(&self, path: &[usize]) -> Result<RatMatrix, NetError> {
        if path.len() < 2 {
            return Err(NetError::EmptyPath);
        }
        let mut acc: Option<RatMatrix> = None;
        for w in path.windows(2) {
            let m = self
                .edge_matrix(w[0], w[1])
                .ok_or(NetError::NotAnEdge { from: w[0], to: w[1] })?;
            acc = Some(match acc {
                None => m.clone(),
                Some(a) => a.mul(m),
            });
        }
        Ok(acc.unwrap())
    }

    /// `[1]` pushed along a path that starts at the root.
    pub fn measure_vector(&self, path: &[usize]) -> Result<Vec<Rat>, NetError> {
        match path.first() {
            None => return Err(NetError::EmptyPath),
            Some(&0) => {}
            Some(_) => return Err(NetError::NotFromRoot),
        }
        let mut v = vec![Rat::from_integer(1.into())];
        for w in path.windows(2) {
            let m = self
                .edge_matrix(w[0], w[1])
                .ok_or(NetError::NotAnEdge { from: w[0], to: w[1] })?;
            v = m.left_mul(&v);
        }
        Ok(v)
    }

    /// All root paths with `level` edges, in left-to-right order.
    pub fn root_paths(&self, level: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![0usize]];
        while let Some(p) = stack.pop() {
            if p.len() == level + 1 {
                out.push(p);
                continue;
            }
            let last = *p.last().unwrap();
            for e in self.edges[last].iter().rev() {
                let mut q = p.clone();
                q.push(e.child);
                stack.push(q);
            }
        }
        out
    }

    /// Graphviz rendering; vertex labels show id, normalized length and
    /// neighbor count, edge labels the left-to-right ordinal.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph transitions {\n  node [shape=box];\n");
        for (i, cv) in self.vectors.iter().enumerate() {
            let _ = writeln!(
                s,
                "  v{i} [label=\"γ{i}\\nℓ={}\\n|V|={} t={}\"];",
                cv.length,
                cv.neighbors.len(),
                cv.sibling
            );
        }
        for (i, es) in self.edges.iter().enumerate() {
            for e in es {
                let _ = writeln!(s, "  v{i} -> v{} [label=\"{}\"];", e.child, e.ordinal);
            }
        }
        s.push_str("}\n");
        s
    }
}

fn same_children(g: &TransitionGraph, v: usize, kids: &[(NetInterval, RatMatrix)]) -> Result<(), String> {
    let es = &g.edges[v];
    if es.len() != kids.len() {
        return Err(format!("{} children vs {}", es.len(), kids.len()));
    }
    for (e, (k, t)) in es.iter().zip(kids) {
        match g.lookup(&k.cv()) {
            Some(id) if id == e.child => {}
            other => return Err(format!("child {} maps to {:?}", e.ordinal, other)),
        }
        if &g.matrices[e.matrix] != t {
            return Err(format!("matrix of child {} differs", e.ordinal));
        }
    }
    Ok(())
}

/// Breadth-first interning of characteristic vectors from the root.
pub fn explore(ifs: &Ifs, caps: &Caps) -> Result<TransitionGraph, NetError> {
    let mut ctx = NetContext::new(ifs, caps.depth);
    let root = NetInterval::root(ifs);
    let mut g = TransitionGraph {
        vectors: vec![root.cv()],
        reps: vec![root.clone()],
        edges: vec![Vec::new()],
        matrices: Vec::new(),
        index: HashMap::from([(root.cv(), 0)]),
        verdict: Verdict::FiniteType,
        caps: caps.clone(),
        checked: 0,
        ln_rho_min: ifs.ln_rho_min(),
    };
    let mut second: Vec<Option<NetInterval>> = vec![None];
    let mut matrix_ids: HashMap<RatMatrix, usize> = HashMap::new();
    let mut queue = VecDeque::from([0usize]);
    'bfs: while let Some(v) = queue.pop_front() {
        let rep = g.reps[v].clone();
        if rep.level >= caps.max_level {
            g.verdict = Verdict::CapExceeded(format!("level cap {} reached", caps.max_level));
            break;
        }
        let kids = ctx.children(&rep)?;
        for (ordinal, (child, t)) in kids.into_iter().enumerate() {
            let cv = child.cv();
            let id = match g.index.get(&cv) {
                Some(&id) => {
                    if second[id].is_none() && g.reps[id].a != child.a {
                        second[id] = Some(child);
                    }
                    id
                }
                None => {
                    if g.vectors.len() >= caps.max_vertices {
                        g.verdict = Verdict::CapExceeded(format!("vertex cap {} reached", caps.max_vertices));
                        break 'bfs;
                    }
                    let id = g.vectors.len();
                    g.index.insert(cv.clone(), id);
                    g.vectors.push(cv);
                    g.reps.push(child);
                    g.edges.push(Vec::new());
                    second.push(None);
                    queue.push_back(id);
                    id
                }
            };
            let next = matrix_ids.len();
            let m = *matrix_ids.entry(t.clone()).or_insert_with(|| {
                g.matrices.push(t);
                next
            });
            g.edges[v].push(Edge {
                child: id,
                ordinal,
                matrix: m,
            });
        }
    }
    if g.is_finite_type() {
        for (v, rep) in second.iter().enumerate() {
            if let Some(rep) = rep {
                let kids = ctx.children(rep)?;
                same_children(&g, v, &kids).map_err(|detail| NetError::Consistency { vertex: v, detail })?;
                g.checked += 1;
            }
        }
    }
    Ok(g)
}

/// Level-`n` net intervals computed globally from `Λ_n`, with sibling indices
/// taken relative to the containing level-`(n-1)` interval.
pub fn net_layers(ifs: &Ifs, upto: usize, depth: usize) -> Result<Vec<Vec<NetInterval>>, NetError> {
    let mut ctx = NetContext::new(ifs, depth);
    let mut layers = LayerCache::new(ifs, 1_000_000);
    let mut out: Vec<Vec<NetInterval>> = vec![vec![NetInterval::root(ifs)]];
    for n in 1..=upto {
        let scale = ctx.rho_inv_pow(n);
        let words: Vec<AffineMap> = layers.layer(n)?.words.iter().map(|w| w.map.clone()).collect();
        let hulls: Vec<_> = words.iter().map(|m| m.hull()).collect();
        let mut pts: Vec<FieldElement> = hulls.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
        pts.sort();
        pts.dedup();
        let mut level = Vec::new();
        for w in pts.windows(2) {
            let (u, v) = (&w[0], &w[1]);
            let mut members: Vec<(Neighbor, AffineMap)> = Vec::new();
            let mut seen = HashSet::new();
            for (m, (lo, hi)) in words.iter().zip(&hulls) {
                if lo <= u && hi >= v && !seen.contains(m) && ctx.image_meets(m, u, v)? {
                    seen.insert(m.clone());
                    let a = &(u - &m.offset) * &scale;
                    let l = &m.ratio * &scale;
                    members.push((Neighbor { a, l }, m.clone()));
                }
            }
            if members.is_empty() {
                continue;
            }
            members.sort_by(|x, y| x.0.cmp(&y.0));
            let (neighbors, maps): (Vec<_>, Vec<_>) = members.into_iter().unzip();
            level.push(NetInterval {
                level: n,
                a: u.clone(),
                b: v.clone(),
                length: &(v - u) * &scale,
                neighbors,
                sibling: 1,
                maps,
            });
        }
        let parents = &out[n - 1];
        for i in 0..level.len() {
            let p = parents
                .iter()
                .position(|p| p.a <= level[i].a && level[i].b <= p.b)
                .expect("every net interval has a parent");
            let same = (0..i)
                .filter(|&k| {
                    let pk = &parents[p];
                    pk.a <= level[k].a && level[k].b <= pk.b && level[k].shape() == level[i].shape()
                })
                .count();
            level[i].sibling = same + 1;
        }
        out.push(level);
    }
    Ok(out)
}

/// One symbolic representation of a point: the vectors of the nested net
/// intervals containing it, with the detected period if the
/// (vector, relative position) state repeats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicRep {
    pub path: Vec<usize>,
    /// `(start, len)`: `path[start..=start+len]` is a cycle and the
    /// representation repeats it forever.
    pub period: Option<(usize, usize)>,
}

impl SymbolicRep {
    pub fn cycle(&self) -> Option<&[usize]> {
        self.period.map(|(s, l)| &self.path[s..=s + l])
    }
}

/// Symbolic representations of `x` down to `depth` levels (one or two).
pub fn locate(ifs: &Ifs, g: &TransitionGraph, x: &FieldElement, depth: usize) -> Result<Vec<SymbolicRep>, NetError> {
    g.require_finite_type()?;
    let f = ifs.field();
    if *x < f.zero() || *x > f.one() {
        return Err(NetError::OutsideUnitInterval(x.to_string()));
    }
    let mut ctx = NetContext::new(ifs, g.caps.depth);
    struct Chain {
        rep: NetInterval,
        path: Vec<usize>,
        seen: HashMap<(usize, FieldElement), usize>,
        period: Option<(usize, usize)>,
    }
    let root = NetInterval::root(ifs);
    let mut chains = vec![Chain {
        path: vec![0],
        seen: HashMap::from([((0, x.clone()), 0)]),
        rep: root,
        period: None,
    }];
    for _ in 0..depth {
        if chains.iter().all(|c| c.period.is_some()) {
            break;
        }
        let mut next = Vec::new();
        for c in chains {
            if c.period.is_some() {
                next.push(c);
                continue;
            }
            let kids = ctx.children(&c.rep)?;
            for (k, _) in kids {
                if k.a <= *x && *x <= k.b {
                    let id = g.lookup(&k.cv()).ok_or_else(|| NetError::Consistency {
                        vertex: *c.path.last().unwrap(),
                        detail: "child vector missing from the graph".into(),
                    })?;
                    let pos = &(x - &k.a) * &ctx.rho_inv_pow(k.level);
                    let mut path = c.path.clone();
                    path.push(id);
                    let mut seen = c.seen.clone();
                    let here = path.len() - 1;
                    let period = match seen.get(&(id, pos.clone())) {
                        Some(&s) => Some((s, here - s)),
                        None => {
                            seen.insert((id, pos), here);
                            None
                        }
                    };
                    next.push(Chain {
                        rep: k,
                        path,
                        seen,
                        period,
                    });
                }
            }
        }
        if next.is_empty() {
            return Err(NetError::NotInAttractor(x.to_string()));
        }
        chains = next;
    }
    Ok(chains
        .into_iter()
        .map(|c| SymbolicRep {
            path: c.path,
            period: c.period,
        })
        .collect())
}
