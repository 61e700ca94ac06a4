//! Cone-containment certificates for norm lower bounds.
//!
//! Each vertex `i` of a region carries a finite generator set `V_i` of
//! nonnegative row vectors and the truncated cone
//! `K_i = {Σ a_j v_j : a_j ≥ 0, Σ a_j ≥ 1}`. If `v T(i,j) ∈ c K_j` for every
//! generator `v ∈ V_i` and every edge, then by convexity and superadditivity of
//! the truncation the whole of `K_i` maps into `c K_j`. Starting from an entry
//! vector in some `K_i`, a path of `n` edges lands in `c^n K_j`, and every
//! element of `K_j` has sum norm at least the smallest generator norm (≥ 1).

use crate::expr::parse_rational;
use crate::lp::feasible_point;
use crate::matrix::RatMatrix;
use crate::net::TransitionGraph;
use crate::poly::{ln_rat, Rat};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct FixtureError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConeError {
    #[error("dimension mismatch: vector of length {got}, generators of length {want}")]
    Dimension { got: usize, want: usize },
    #[error("vertex {0} has no cone")]
    MissingCone(usize),
    #[error("cone of vertex {0} is invalid: {1}")]
    BadCone(usize, String),
    #[error("matrix {from}->{to} is {rows}x{cols}, cones need {want_rows}x{want_cols}")]
    MatrixShape {
        from: usize,
        to: usize,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("contraction factor must lie in (0,1)")]
    Factor,
}

/// Generator sets per vertex and the contraction factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeSpec {
    pub c: Rat,
    pub cones: BTreeMap<usize, Vec<Vec<Rat>>>,
}

impl ConeSpec {
    pub fn dim(&self, v: usize) -> Option<usize> {
        self.cones.get(&v).map(|g| g[0].len())
    }

    /// Checks that generators are nonempty, nonnegative, of equal length and
    /// of sum norm at least one, and that `0 < c < 1`.
    pub fn validate(&self) -> Result<(), ConeError> {
        if !self.c.is_positive() || self.c >= Rat::one() {
            return Err(ConeError::Factor);
        }
        for (&v, gens) in &self.cones {
            let bad = |m: &str| Err(ConeError::BadCone(v, m.to_string()));
            let Some(first) = gens.first() else {
                return bad("no generators");
            };
            for g in gens {
                if g.len() != first.len() || g.is_empty() {
                    return bad("generators of different lengths");
                }
                if g.iter().any(Signed::is_negative) {
                    return bad("negative generator entry");
                }
                if g.iter().sum::<Rat>() < Rat::one() {
                    return bad("generator sum norm below 1");
                }
            }
        }
        Ok(())
    }
}

/// Cone data, transition matrices and entry vectors read from a fixture file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeFixture {
    pub spec: ConeSpec,
    pub matrices: Vec<(usize, usize, RatMatrix)>,
    /// Entry vectors anchoring the induction. When the file has none, the
    /// all-ones vector of every cone vertex is used.
    pub entries: Vec<(usize, Vec<Rat>)>,
}

/// Reads `T <from> <to> <rows> <cols>` blocks only.
pub fn parse_matrix_fixture(text: &str) -> Result<Vec<(usize, usize, RatMatrix)>, FixtureError> {
    let blocks = parse_blocks(text)?;
    let mut out = Vec::new();
    for b in blocks {
        match b {
            Block::T(i, j, m) => out.push((i, j, m)),
            Block::Other(line) => {
                return Err(FixtureError {
                    line,
                    msg: "only T blocks are allowed in a matrix fixture".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Reads a cone fixture: a factor line `c p/q`, `V <vertex> <count> <dim>`
/// blocks, `T` blocks and optional `E <vertex> <dim>` entry vectors.
/// Blank lines and `#` comments are ignored.
pub fn parse_cone_fixture(text: &str) -> Result<ConeFixture, FixtureError> {
    let mut lines = Lines::new(text);
    let mut c: Option<Rat> = None;
    let mut cones = BTreeMap::new();
    let mut matrices = Vec::new();
    let mut entries = Vec::new();
    while let Some((no, words)) = lines.next_words() {
        match words[0] {
            "c" => {
                expect_len(no, &words, 2)?;
                if c.is_some() {
                    return Err(err(no, "factor given twice"));
                }
                c = Some(rational(no, words[1])?);
            }
            "V" => {
                expect_len(no, &words, 4)?;
                let v = int(no, words[1])?;
                let count = int(no, words[2])?;
                let dim = int(no, words[3])?;
                let rows = lines.rows(no, count, dim)?;
                if cones.insert(v, rows).is_some() {
                    return Err(err(no, &format!("cone for vertex {v} given twice")));
                }
            }
            "T" => {
                let (i, j, m) = read_matrix(&mut lines, no, &words)?;
                matrices.push((i, j, m));
            }
            "E" => {
                expect_len(no, &words, 3)?;
                let v = int(no, words[1])?;
                let dim = int(no, words[2])?;
                let mut rows = lines.rows(no, 1, dim)?;
                entries.push((v, rows.pop().unwrap()));
            }
            other => return Err(err(no, &format!("unknown record '{other}'"))),
        }
    }
    let c = c.ok_or_else(|| err(lines.last, "missing factor line 'c p/q'"))?;
    if entries.is_empty() {
        for (&v, g) in &cones {
            entries.push((v, vec![Rat::one(); g[0].len()]));
        }
    }
    Ok(ConeFixture {
        spec: ConeSpec { c, cones },
        matrices,
        entries,
    })
}

enum Block {
    T(usize, usize, RatMatrix),
    Other(usize),
}

fn parse_blocks(text: &str) -> Result<Vec<Block>, FixtureError> {
    let mut lines = Lines::new(text);
    let mut out = Vec::new();
    while let Some((no, words)) = lines.next_words() {
        if words[0] == "T" {
            let (i, j, m) = read_matrix(&mut lines, no, &words)?;
            out.push(Block::T(i, j, m));
        } else {
            out.push(Block::Other(no));
        }
    }
    Ok(out)
}

fn read_matrix(lines: &mut Lines, no: usize, words: &[&str]) -> Result<(usize, usize, RatMatrix), FixtureError> {
    expect_len(no, words, 5)?;
    let i = int(no, words[1])?;
    let j = int(no, words[2])?;
    let r = int(no, words[3])?;
    let c = int(no, words[4])?;
    if r == 0 || c == 0 {
        return Err(err(no, "empty matrix"));
    }
    Ok((i, j, RatMatrix::from_rows(lines.rows(no, r, c)?)))
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            it: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_words(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, l) in self.it.by_ref() {
            self.last = i + 1;
            let l = l.split('#').next().unwrap_or("");
            let words: Vec<&str> = l.split_whitespace().collect();
            if !words.is_empty() {
                return Some((i + 1, words));
            }
        }
        None
    }

    fn rows(&mut self, header: usize, count: usize, dim: usize) -> Result<Vec<Vec<Rat>>, FixtureError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let Some((no, words)) = self.next_words() else {
                return Err(err(header, &format!("expected {count} rows, found {}", out.len())));
            };
            if words.len() != dim {
                return Err(err(no, &format!("expected {dim} entries, found {}", words.len())));
            }
            out.push(words.iter().map(|w| rational(no, w)).collect::<Result<_, _>>()?);
        }
        Ok(out)
    }
}

fn err(line: usize, msg: &str) -> FixtureError {
    FixtureError {
        line,
        msg: msg.to_string(),
    }
}

fn expect_len(no: usize, words: &[&str], n: usize) -> Result<(), FixtureError> {
    if words.len() == n {
        Ok(())
    } else {
        Err(err(
            no,
            &format!("'{}' takes {} fields, found {}", words[0], n - 1, words.len() - 1),
        ))
    }
}

fn int(no: usize, w: &str) -> Result<usize, FixtureError> {
    w.parse()
        .map_err(|_| err(no, &format!("expected a nonnegative integer, found '{w}'")))
}

fn rational(no: usize, w: &str) -> Result<Rat, FixtureError> {
    parse_rational(w).map_err(|e| err(no, &e.to_string()))
}

/// Decides `w / c ∈ K` for the truncated cone over `gens`, returning
/// coefficients `a ≥ 0` with `Σ a ≥ 1` and `a · gens = w / c` when feasible.
pub fn cone_member(w: &[Rat], gens: &[Vec<Rat>], c: &Rat) -> Result<Option<Vec<Rat>>, ConeError> {
    let k = gens.len();
    let dim = gens.first().map_or(w.len(), Vec::len);
    if w.len() != dim || gens.iter().any(|g| g.len() != dim) {
        return Err(ConeError::Dimension {
            got: w.len(),
            want: dim,
        });
    }
    // Unknowns: a_1..a_k and a surplus s with Σ a - s = 1.
    let mut a = Vec::with_capacity(dim + 1);
    let mut b = Vec::with_capacity(dim + 1);
    for d in 0..dim {
        let mut row: Vec<Rat> = gens.iter().map(|g| g[d].clone()).collect();
        row.push(Rat::zero());
        a.push(row);
        b.push(&w[d] / c);
    }
    let mut row = vec![Rat::one(); k];
    row.push(-Rat::one());
    a.push(row);
    b.push(Rat::one());
    Ok(feasible_point(&a, &b).map(|mut x| {
        x.truncate(k);
        x
    }))
}

/// One membership to establish.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Obligation {
    /// Generator `generator` of `V_from` pushed through `T(from, to)`.
    Edge { from: usize, to: usize, generator: usize },
    /// The `index`-th entry vector, which must lie in `K_vertex` itself.
    Entry { vertex: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub obligation: Obligation,
    /// Cone the image must land in.
    pub target: usize,
    pub image: Vec<Rat>,
    /// Scale of the target cone: `c` for edges, 1 for entry vectors.
    pub factor: Rat,
    pub coeffs: Vec<Rat>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConeVerdict {
    Certified,
    Failed { first: Obligation },
}

#[derive(Clone, Debug)]
pub struct ConeCertificate {
    pub c: Rat,
    pub witnesses: Vec<Witness>,
    pub failures: Vec<Obligation>,
    pub verdict: ConeVerdict,
    /// `ln(1/c) / |ln ρ_min|`, an upper bound for the local dimension of
    /// points whose symbolic path stays in the region.
    pub bound: f64,
}

impl ConeCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == ConeVerdict::Certified
    }

    /// Recomputes every stored witness in exact arithmetic.
    pub fn verify(&self, spec: &ConeSpec) -> bool {
        self.witnesses.iter().all(|w| {
            let Some(gens) = spec.cones.get(&w.target) else {
                return false;
            };
            if w.coeffs.len() != gens.len() || w.coeffs.iter().any(Signed::is_negative) {
                return false;
            }
            if w.coeffs.iter().sum::<Rat>() < Rat::one() {
                return false;
            }
            (0..w.image.len()).all(|d| {
                let s: Rat = w.coeffs.iter().zip(gens).map(|(a, g)| a * &g[d]).sum();
                s * &w.factor == w.image[d]
            })
        })
    }
}

/// Checks every (edge, generator) pair and every entry vector.
pub fn certify_cone_system(
    spec: &ConeSpec,
    matrices: &[(usize, usize, RatMatrix)],
    entries: &[(usize, Vec<Rat>)],
    ln_rho_min: f64,
) -> Result<ConeCertificate, ConeError> {
    spec.validate()?;
    for (i, j, m) in matrices {
        let di = spec.dim(*i).ok_or(ConeError::MissingCone(*i))?;
        let dj = spec.dim(*j).ok_or(ConeError::MissingCone(*j))?;
        if m.rows() != di || m.cols() != dj {
            return Err(ConeError::MatrixShape {
                from: *i,
                to: *j,
                rows: m.rows(),
                cols: m.cols(),
                want_rows: di,
                want_cols: dj,
            });
        }
    }
    let mut jobs = Vec::new();
    for (i, j, m) in matrices {
        for (g, v) in spec.cones[i].iter().enumerate() {
            let ob = Obligation::Edge {
                from: *i,
                to: *j,
                generator: g,
            };
            jobs.push((ob, *j, m.left_mul(v), spec.c.clone()));
        }
    }
    for (index, (v, e)) in entries.iter().enumerate() {
        spec.cones.get(v).ok_or(ConeError::MissingCone(*v))?;
        jobs.push((Obligation::Entry { vertex: *v, index }, *v, e.clone(), Rat::one()));
    }
    let mut witnesses = Vec::new();
    let mut failures = Vec::new();
    for (obligation, target, image, factor) in jobs {
        match cone_member(&image, &spec.cones[&target], &factor)? {
            Some(coeffs) => witnesses.push(Witness {
                obligation,
                target,
                image,
                factor,
                coeffs,
            }),
            None => failures.push(obligation),
        }
    }
    let verdict = match failures.first() {
        None => ConeVerdict::Certified,
        Some(f) => ConeVerdict::Failed { first: f.clone() },
    };
    Ok(ConeCertificate {
        bound: -ln_rat(&spec.c) / ln_rho_min.abs(),
        c: spec.c.clone(),
        witnesses,
        failures,
        verdict,
    })
}

/// Result of checking `‖T(σ)‖ ≥ c^(|σ|-1)` on random paths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleReport {
    pub checked: usize,
    pub violations: Vec<Vec<usize>>,
    pub longest: usize,
}

/// Random walks along the fixture edges with between 2 and `max_vertices`
/// vertices; each path product is compared with `c^(edges)` exactly.
pub fn sample_norm_bound<R: Rng>(
    spec: &ConeSpec,
    matrices: &[(usize, usize, RatMatrix)],
    rng: &mut R,
    count: usize,
    max_vertices: usize,
) -> SampleReport {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, (i, _, _)) in matrices.iter().enumerate() {
        out.entry(*i).or_default().push(k);
    }
    let starts: Vec<usize> = out.keys().copied().collect();
    let mut report = SampleReport {
        checked: 0,
        violations: Vec::new(),
        longest: 0,
    };
    if starts.is_empty() || max_vertices < 2 {
        return report;
    }
    for _ in 0..count {
        let len = rng.gen_range(2..=max_vertices);
        let mut path = vec![starts[rng.gen_range(0..starts.len())]];
        let mut prod: Option<RatMatrix> = None;
        while path.len() < len {
            let Some(choices) = out.get(path.last().unwrap()) else {
                break;
            };
            let (_, j, m) = &matrices[choices[rng.gen_range(0..choices.len())]];
            prod = Some(match prod {
                None => m.clone(),
                Some(p) => p.mul(m),
            });
            path.push(*j);
        }
        let Some(p) = prod else { continue };
        let edges = path.len() - 1;
        let floor = num_traits::pow(spec.c.clone(), edges);
        if p.sum_norm() < floor {
            report.violations.push(path.clone());
        }
        report.checked += 1;
        report.longest = report.longest.max(path.len());
    }
    report
}

/// How fixture vertices correspond to graph vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixtureMatch {
    /// Fixture vertex to (graph vertex, coordinate permutation). Row `r` of a
    /// fixture matrix is row `perm[r]` of the graph matrix.
    pub mapping: Option<BTreeMap<usize, (usize, Vec<usize>)>>,
    /// Fixture edges with no graph edge equal up to row and column permutation.
    pub unmatched: Vec<(usize, usize)>,
    /// Graph edges between mapped vertices that the fixture omits.
    pub missing: Vec<(usize, usize)>,
}

impl FixtureMatch {
    pub fn is_complete(&self) -> bool {
        self.mapping.is_some() && self.unmatched.is_empty()
    }
}

/// Looks for a vertex relabeling, with a coordinate permutation per vertex,
/// under which every fixture matrix is the corresponding graph edge matrix.
pub fn match_fixture(g: &TransitionGraph, matrices: &[(usize, usize, RatMatrix)]) -> FixtureMatch {
    let mut dims: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, j, m) in matrices {
        dims.insert(*i, m.rows());
        dims.insert(*j, m.cols());
    }
    let unmatched: Vec<(usize, usize)> = matrices
        .iter()
        .filter(|(_, _, m)| !any_edge_matches(g, m))
        .map(|(i, j, _)| (*i, *j))
        .collect();
    let order: Vec<usize> = dims.keys().copied().collect();
    let mut state = Search {
        g,
        matrices,
        dims: &dims,
        order: &order,
        assign: BTreeMap::new(),
        used: BTreeSet::new(),
    };
    let mapping = if unmatched.is_empty() && state.run(0) {
        Some(state.assign)
    } else {
        None
    };
    let mut missing = Vec::new();
    if let Some(map) = &mapping {
        let inv: BTreeMap<usize, usize> = map.iter().map(|(f, (v, _))| (*v, *f)).collect();
        let have: BTreeSet<(usize, usize)> = matrices.iter().map(|(i, j, _)| (*i, *j)).collect();
        for (&v, &fi) in &inv {
            for (w, _) in g.children(v) {
                if let Some(&fj) = inv.get(&w) {
                    if !have.contains(&(fi, fj)) {
                        missing.push((fi, fj));
                    }
                }
            }
        }
        missing.sort_unstable();
        missing.dedup();
    }
    FixtureMatch {
        mapping,
        unmatched,
        missing,
    }
}

fn any_edge_matches(g: &TransitionGraph, m: &RatMatrix) -> bool {
    let rp = permutations(m.rows());
    let cp = permutations(m.cols());
    g.matrices().iter().any(|e| {
        e.rows() == m.rows() && e.cols() == m.cols() && rp.iter().any(|p| cp.iter().any(|q| permuted_eq(m, e, p, q)))
    })
}

fn permuted_eq(fix: &RatMatrix, gm: &RatMatrix, p: &[usize], q: &[usize]) -> bool {
    (0..fix.rows()).all(|r| (0..fix.cols()).all(|s| fix.get(r, s) == gm.get(p[r], q[s])))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![(0..n).collect::<Vec<_>>()];
    let mut p: Vec<usize> = (0..n).collect();
    // Heap's algorithm, iterative.
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            out.push(p.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

struct Search<'a> {
    g: &'a TransitionGraph,
    matrices: &'a [(usize, usize, RatMatrix)],
    dims: &'a BTreeMap<usize, usize>,
    order: &'a [usize],
    assign: BTreeMap<usize, (usize, Vec<usize>)>,
    used: BTreeSet<usize>,
}

impl Search<'_> {
    fn run(&mut self, k: usize) -> bool {
        let Some(&f) = self.order.get(k) else {
            return true;
        };
        let d = self.dims[&f];
        // Try the same label first; fixtures usually keep the graph numbering.
        let mut cands: Vec<usize> = (0..self.g.len()).filter(|&v| self.g.dim(v) == d).collect();
        cands.sort_by_key(|&v| (v != f, v));
        for v in cands {
            if self.used.contains(&v) {
                continue;
            }
            for p in permutations(d) {
                self.assign.insert(f, (v, p));
                if self.consistent(f) {
                    self.used.insert(v);
                    if self.run(k + 1) {
                        return true;
                    }
                    self.used.remove(&v);
                }
                self.assign.remove(&f);
            }
        }
        false
    }

    fn consistent(&self, f: usize) -> bool {
        self.matrices.iter().all(|(i, j, m)| {
            if *i != f && *j != f {
                return true;
            }
            let (Some((vi, pi)), Some((vj, pj))) = (self.assign.get(i), self.assign.get(j)) else {
                return true;
            };
            self.g.children(*vi).any(|(w, e)| w == *vj && permuted_eq(m, e, pi, pj))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat, rat_int};

    fn v(x: &[i64]) -> Vec<Rat> {
        x.iter().map(|&a| rat_int(a)).collect()
    }

    #[test]
    fn scaled_generator_is_a_member() {
        let gens = vec![v(&[1, 1, 1]), v(&[4, 0, 0])];
        let c = rat(2, 17);
        let w: Vec<Rat> = gens[1].iter().map(|x| x * &c).collect();
        let a = cone_member(&w, &gens, &c).unwrap().unwrap();
        let s: Rat = a.iter().sum();
        assert!(s >= Rat::one());
    }

    #[test]
    fn zero_is_not_a_member() {
        let gens = vec![v(&[1, 1]), v(&[2, 0])];
        assert_eq!(cone_member(&v(&[0, 0]), &gens, &rat(1, 2)).unwrap(), None);
    }

    #[test]
    fn dimension_mismatch() {
        let gens = vec![v(&[1, 1])];
        assert!(matches!(
            cone_member(&v(&[1, 1, 1]), &gens, &rat(1, 2)),
            Err(ConeError::Dimension { got: 3, want: 2 })
        ));
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
        let set: BTreeSet<_> = permutations(4).into_iter().collect();
        assert_eq!(set.len(), 24);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_cone_fixture("c 1/2\nV 1 1 2\n1 1\nT 1 1 1 2\n1 x\n").unwrap_err();
        assert_eq!(e.line, 5);
        let e = parse_cone_fixture("c 1/2\nV 1 2 2\n1 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_cone_fixture("V 1 1 1\n1\n").unwrap_err();
        assert!(e.msg.contains("factor"));
        let e = parse_cone_fixture("c 1/2\nQ 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_matrix_fixture("c 1/2\n").is_err());
    }
}
