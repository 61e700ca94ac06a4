//! Exhaustive enumeration of admissible paths, accumulating `Σ ‖T(σ)‖^q` per level.
//!
//! Transition matrices are rescaled to integers by the least common
//! denominator `D` of their entries, so a level-`k` product is an integer
//! matrix divided by `D^k`. Norms stay exact; only their logarithms are
//! rounded. The integers fit in `u128` for all practical depths, with a
//! `BigUint` fallback when the bound `‖x₀‖·D^k` could overflow.

use crate::net::TransitionGraph;
use crate::poly::{ln_bigint, Rat};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

/// Where enumeration starts: a vertex and the rows multiplying its first edge.
#[derive(Clone, Debug)]
pub struct Start {
    pub vertex: usize,
    /// Each row has the vertex's neighbor count as length; `‖T‖` sums all rows.
    pub rows: Vec<Vec<Rat>>,
}

#[derive(Clone, Debug)]
pub struct LevelStats {
    /// Edges taken beyond the start.
    pub k: usize,
    pub paths: u128,
    /// `ln Σ ‖T(σ)‖^q`, one entry per requested `q`.
    pub ln_sum: Vec<f64>,
    pub ln_norm_min: f64,
    pub ln_norm_max: f64,
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub q: Vec<f64>,
    pub levels: Vec<LevelStats>,
    pub requested: usize,
    /// The node budget cut the depth below `requested`.
    pub partial: bool,
    pub nodes: u128,
}

/// Number of paths with exactly `k` edges, `k = 0..=k_max`, as floats.
pub fn path_counts(g: &TransitionGraph, starts: &[usize], allowed: Option<&[bool]>, k_max: usize) -> Vec<f64> {
    let n = g.len();
    let ok = |v: usize| allowed.is_none_or(|a| a[v]);
    let mut cur = vec![0.0f64; n];
    for &s in starts {
        cur[s] += 1.0;
    }
    let mut out = vec![starts.len() as f64];
    for _ in 0..k_max {
        let mut next = vec![0.0; n];
        for v in 0..n {
            if cur[v] == 0.0 {
                continue;
            }
            for e in g.edges(v) {
                if ok(e.child) {
                    next[e.child] += cur[v];
                }
            }
        }
        out.push(next.iter().sum());
        cur = next;
    }
    out
}

trait Acc: Clone + Zero {
    fn mac(&mut self, a: &Self, b: &Self);
    fn ln(&self) -> f64;
    /// The value as a float, when it is finite.
    fn approx(&self) -> Option<f64>;
    fn from_big(b: &BigUint) -> Self;
}

impl Acc for u128 {
    #[inline]
    fn mac(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    #[inline]
    fn ln(&self) -> f64 {
        (*self as f64).ln()
    }
    #[inline]
    fn approx(&self) -> Option<f64> {
        // Two native conversions beat the generic 128-bit one; the result is
        // within an ulp or two of the correctly rounded value.
        let hi = (*self >> 64) as u64;
        let lo = *self as u64;
        Some(if hi == 0 {
            lo as f64
        } else {
            hi as f64 * 18446744073709551616.0 + lo as f64
        })
    }
    fn from_big(b: &BigUint) -> Self {
        b.to_u128().expect("bounded by the overflow check")
    }
}

impl Acc for BigUint {
    fn mac(&mut self, a: &Self, b: &Self) {
        if !a.is_zero() && !b.is_zero() {
            *self += a * b;
        }
    }
    fn ln(&self) -> f64 {
        ln_bigint(&BigInt::from(self.clone()))
    }
    fn approx(&self) -> Option<f64> {
        (self.bits() < 1000).then(|| self.to_f64()).flatten()
    }
    fn from_big(b: &BigUint) -> Self {
        b.clone()
    }
}

struct IntEdge<W> {
    child: usize,
    cols: usize,
    /// Row-major scaled matrix.
    m: Vec<W>,
    row_sums: Vec<W>,
}

/// `Σ exp(q·l)` for every `q` of a grid. Terms near a per-level anchor are
/// summed directly as powers of the ratio to the anchor norm
/// (Neumaier-compensated); on an arithmetic grid consecutive powers differ by
/// a fixed factor, which for the usual steps needs no transcendental call.
/// Terms far from the anchor go to a per-`q` log-sum-exp so nothing overflows.
struct LevelAcc {
    q: Vec<f64>,
    ladder: Ladder,
    /// Ratios to the anchor inside `[lo, hi]` are summed directly.
    lo: f64,
    hi: f64,
    /// `(raw anchor norm, ln of the normalized anchor norm)`.
    anchor: Option<(f64, f64)>,
    inv_anchor: f64,
    offset: f64,
    sum: Vec<f64>,
    comp: Vec<f64>,
    far: Vec<(f64, f64)>,
    paths: u128,
    rmin: f64,
    rmax: f64,
}

#[derive(Clone, Copy)]
enum Power {
    Int(i32),
    Real(f64),
}

impl Power {
    fn of(q: f64) -> Power {
        let r = q.round();
        if (q - r).abs() < 1e-12 && r.abs() <= 64.0 {
            Power::Int(r as i32)
        } else {
            Power::Real(q)
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Power::Int(n) => x.powi(n),
            Power::Real(q) => x.powf(q),
        }
    }
}

#[derive(Clone, Copy)]
enum Step {
    One,
    Half,
    Quarter,
    Other(f64),
}

#[derive(Clone, Copy)]
enum Ladder {
    Arithmetic(Power, Step),
    Scattered,
}

const SAFE_EXP: f64 = 600.0;

impl LevelAcc {
    fn new(q: &[f64], offset: f64) -> Self {
        let ladder = if q.len() >= 2 {
            let d = q[1] - q[0];
            let arithmetic = q
                .iter()
                .enumerate()
                .all(|(i, &x)| (x - (q[0] + d * i as f64)).abs() <= 1e-12 * (1.0 + x.abs()));
            let step = if (d - 1.0).abs() < 1e-15 {
                Step::One
            } else if (d - 0.5).abs() < 1e-15 {
                Step::Half
            } else if (d - 0.25).abs() < 1e-15 {
                Step::Quarter
            } else {
                Step::Other(d)
            };
            if arithmetic {
                Ladder::Arithmetic(Power::of(q[0]), step)
            } else {
                Ladder::Scattered
            }
        } else if q.len() == 1 {
            Ladder::Arithmetic(Power::of(q[0]), Step::One)
        } else {
            Ladder::Scattered
        };
        let qmax = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let span = if qmax > 0.0 { SAFE_EXP / qmax } else { f64::INFINITY };
        LevelAcc {
            q: q.to_vec(),
            ladder,
            lo: (-span).exp(),
            hi: span.exp(),
            anchor: None,
            inv_anchor: 1.0,
            offset,
            sum: vec![0.0; q.len()],
            comp: vec![0.0; q.len()],
            far: vec![(f64::NEG_INFINITY, 0.0); q.len()],
            paths: 0,
            rmin: f64::INFINITY,
            rmax: f64::NEG_INFINITY,
        }
    }

    /// `raw` is the integer norm as a float; the true norm is `raw·e^{-offset}`.
    #[inline]
    fn push(&mut self, raw: f64) {
        self.paths += 1;
        if self.anchor.is_none() {
            self.anchor = Some((raw, raw.ln() - self.offset));
            self.inv_anchor = 1.0 / raw;
        }
        let x = raw * self.inv_anchor;
        self.rmin = self.rmin.min(x);
        self.rmax = self.rmax.max(x);
        if x >= self.lo && x <= self.hi {
            match self.ladder {
                Ladder::Arithmetic(p0, step) => {
                    let r = match step {
                        Step::One => x,
                        Step::Half => x.sqrt(),
                        Step::Quarter => x.sqrt().sqrt(),
                        Step::Other(d) => x.powf(d),
                    };
                    let mut t = p0.apply(x);
                    for i in 0..self.q.len() {
                        neumaier(&mut self.sum[i], &mut self.comp[i], t);
                        t *= r;
                    }
                }
                Ladder::Scattered => {
                    for i in 0..self.q.len() {
                        neumaier(&mut self.sum[i], &mut self.comp[i], x.powf(self.q[i]));
                    }
                }
            }
        } else {
            let l = x.ln() + self.anchor.unwrap().1;
            self.push_far(l);
        }
    }

    /// Adds a term given by its logarithm (used when the norm overflows `f64`).
    fn push_ln(&mut self, l: f64) {
        self.paths += 1;
        let a = self.anchor.get_or_insert((1.0, l)).1;
        self.rmin = self.rmin.min((l - a).exp());
        self.rmax = self.rmax.max((l - a).exp());
        self.push_far(l);
    }

    fn push_far(&mut self, l: f64) {
        for i in 0..self.q.len() {
            let e = self.q[i] * l;
            let (m, s) = &mut self.far[i];
            if e <= *m {
                *s += (e - *m).exp();
            } else {
                *s = *s * (*m - e).exp() + 1.0;
                *m = e;
            }
        }
    }

    fn finish(self, k: usize) -> LevelStats {
        let a = self.anchor.map_or(0.0, |x| x.1);
        let ln_sum = (0..self.q.len())
            .map(|i| {
                let near = self.sum[i] + self.comp[i];
                let x = if near > 0.0 {
                    self.q[i] * a + near.ln()
                } else {
                    f64::NEG_INFINITY
                };
                let (m, s) = self.far[i];
                let y = if s > 0.0 { m + s.ln() } else { f64::NEG_INFINITY };
                log_add(x, y)
            })
            .collect();
        LevelStats {
            k,
            paths: self.paths,
            ln_sum,
            ln_norm_min: self.rmin.ln() + a,
            ln_norm_max: self.rmax.ln() + a,
        }
    }
}

#[inline]
fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

fn log_add(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Enumerates every path from `starts` with at most `k_max` edges whose
/// vertices after the start satisfy `allowed`, capped at `budget` nodes.
pub fn enumerate(
    g: &TransitionGraph,
    starts: &[Start],
    allowed: Option<&[bool]>,
    q: &[f64],
    k_max: usize,
    budget: u64,
) -> Enumeration {
    let svs: Vec<usize> = starts.iter().map(|s| s.vertex).collect();
    let counts = path_counts(g, &svs, allowed, k_max);
    let mut depth = 0;
    let mut total = 0.0;
    for (k, c) in counts.iter().enumerate().skip(1) {
        total += c;
        if total > budget as f64 && k > 1 {
            break;
        }
        depth = k;
    }

    // Common denominators of the edge matrices and of the start rows.
    let mut den = BigInt::one();
    for m in g.matrices() {
        for x in m.entries() {
            den = den.lcm(x.denom());
        }
    }
    let mut den0 = BigInt::one();
    for s in starts {
        for r in &s.rows {
            for x in r {
                den0 = den0.lcm(x.denom());
            }
        }
    }
    let scale =
        |x: &Rat, d: &BigInt| -> BigUint { (x.numer() * (d / x.denom())).to_biguint().expect("nonnegative entries") };
    let mut start_mass = BigUint::zero();
    for s in starts {
        for r in &s.rows {
            for x in r {
                start_mass += scale(x, &den0);
            }
        }
    }
    let bound = start_mass * den.to_biguint().unwrap().pow(depth as u32) * 4u32;
    let fits = bound.bits() < 127;

    let ln_den = ln_bigint(&den);
    let ln_den0 = ln_bigint(&den0);
    let levels = if fits {
        run::<u128>(g, starts, allowed, q, depth, &den, &den0, ln_den, ln_den0)
    } else {
        run::<BigUint>(g, starts, allowed, q, depth, &den, &den0, ln_den, ln_den0)
    };
    Enumeration {
        q: q.to_vec(),
        nodes: levels.iter().map(|l| l.paths).sum(),
        levels,
        requested: k_max,
        partial: depth < k_max,
    }
}

#[allow(clippy::too_many_arguments)]
fn run<W: Acc>(
    g: &TransitionGraph,
    starts: &[Start],
    allowed: Option<&[bool]>,
    q: &[f64],
    depth: usize,
    den: &BigInt,
    den0: &BigInt,
    ln_den: f64,
    ln_den0: f64,
) -> Vec<LevelStats> {
    let scale = |x: &Rat, d: &BigInt| -> W {
        W::from_big(&(x.numer() * (d / x.denom())).to_biguint().expect("nonnegative entries"))
    };
    let ok = |v: usize| allowed.is_none_or(|a| a[v]);
    let edges: Vec<Vec<IntEdge<W>>> = (0..g.len())
        .map(|v| {
            g.children(v)
                .filter(|(c, _)| ok(*c))
                .map(|(c, m)| {
                    let data: Vec<W> = m.entries().iter().map(|x| scale(x, den)).collect();
                    let row_sums = (0..m.rows())
                        .map(|i| {
                            let mut s = W::zero();
                            for x in &data[i * m.cols()..(i + 1) * m.cols()] {
                                s.mac(x, &one::<W>());
                            }
                            s
                        })
                        .collect();
                    IntEdge {
                        child: c,
                        cols: m.cols(),
                        m: data,
                        row_sums,
                    }
                })
                .collect()
        })
        .collect();
    let mut accs: Vec<LevelAcc> = (0..=depth)
        .map(|k| LevelAcc::new(q, ln_den0 + k as f64 * ln_den))
        .collect();
    let mut walker = Walker {
        edges: &edges,
        accs: &mut accs,
        depth,
        bufs: vec![Vec::new(); depth + 1],
    };
    if depth > 0 {
        for s in starts {
            let x: Vec<W> = s.rows.iter().flatten().map(|v| scale(v, den0)).collect();
            walker.visit(s.vertex, s.rows.len(), &x, 0);
        }
    }
    accs.into_iter().enumerate().skip(1).map(|(k, a)| a.finish(k)).collect()
}

fn one<W: Acc>() -> W {
    W::from_big(&BigUint::one())
}

struct Walker<'a, W> {
    edges: &'a [Vec<IntEdge<W>>],
    accs: &'a mut [LevelAcc],
    depth: usize,
    bufs: Vec<Vec<W>>,
}

impl<W: Acc> Walker<'_, W> {
    #[inline]
    fn record(&mut self, k: usize, n: &W) {
        let acc = &mut self.accs[k];
        match n.approx() {
            Some(x) => acc.push(x),
            None => {
                let l = n.ln() - acc.offset;
                acc.push_ln(l)
            }
        }
    }

    /// `x` is the `rows × dim(v)` block reached after `k` edges.
    fn visit(&mut self, v: usize, rows: usize, x: &[W], k: usize) {
        let dim = x.len() / rows;
        let edges = self.edges;
        if k + 1 == self.depth {
            // Leaf norms need only the row sums of the last matrix.
            for e in &edges[v] {
                let mut n = W::zero();
                for r in 0..rows {
                    for i in 0..dim {
                        n.mac(&x[r * dim + i], &e.row_sums[i]);
                    }
                }
                self.record(k + 1, &n);
            }
            return;
        }
        let mut buf = std::mem::take(&mut self.bufs[k + 1]);
        for e in &edges[v] {
            let c = e.cols;
            buf.clear();
            buf.resize(rows * c, W::zero());
            let mut n = W::zero();
            for r in 0..rows {
                for i in 0..dim {
                    let a = &x[r * dim + i];
                    if a.is_zero() {
                        continue;
                    }
                    for j in 0..c {
                        buf[r * c + j].mac(a, &e.m[i * c + j]);
                    }
                    n.mac(a, &e.row_sums[i]);
                }
            }
            self.record(k + 1, &n);
            self.visit(e.child, rows, &buf, k + 1);
        }
        self.bufs[k + 1] = buf;
    }
}
