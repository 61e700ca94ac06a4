//! Local dimensions, `L^q`-spectrum estimates and the min-formula.
//!
//! Estimates use `s_k(q) = ln Σ_σ ‖T(σ)‖^q / (k ln ρ_min)` over paths with
//! `k` edges. The limit is a liminf, so the reported value is the minimum of
//! `s_k` over the last third of the computed levels.

use crate::enumerate::{enumerate, Start};
use crate::field::FieldElement;
use crate::ifs::Ifs;
use crate::loops::{LoopError, LoopStructure, PositivityCertificate};
use crate::matrix::RatMatrix;
use crate::net::{locate, NetError, SymbolicRep, TransitionGraph};
use crate::perron::{spectral_radius, spectral_radius_sparse, Enclosure, SparseMatrix};
use crate::poly::{fmt_f64, fmt_rat, ln_rat, Rat};
use num_traits::{One, Zero};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpectraError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error("no periodic representation of {0} within the search depth")]
    NotPeriodic(String),
    #[error("integer q must lie in 1..=6, got {0}")]
    QOutOfRange(u32),
    #[error("block operator would hold {0} nonzero entries")]
    BlockTooLarge(usize),
    #[error("selected interval ends at vector {0}, which is not essential")]
    NotEssential(usize),
    #[error("selection is empty or mixes levels")]
    BadSelection,
    #[error("cycle must start and end at the same vertex")]
    NotACycle,
    #[error("class index {0} out of range")]
    NoSuchClass(usize),
}

/// Which paths an estimate sums over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scope {
    /// Paths from the root vector.
    Root,
    /// Paths staying inside one maximal loop class, from every member.
    Class(usize),
    /// Paths staying inside an arbitrary vertex set, from every member; the
    /// whole vertex set gives the sum over all admissible paths.
    Set(Vec<usize>),
    /// Paths below the given net intervals, each a root path of one common length.
    Restriction(Vec<Vec<usize>>),
}

impl Scope {
    /// Every vertex: all admissible paths, from any start.
    pub fn omega(g: &TransitionGraph) -> Scope {
        Scope::Set((0..g.len()).collect())
    }

    fn members<'a>(&'a self, ls: &'a LoopStructure) -> Result<Option<&'a [usize]>, SpectraError> {
        match self {
            Scope::Class(c) => Ok(Some(&ls.classes.get(*c).ok_or(SpectraError::NoSuchClass(*c))?.members)),
            Scope::Set(v) => Ok(Some(v)),
            _ => Ok(None),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Scope::Root => "root".into(),
            Scope::Class(c) => format!("class{c}"),
            Scope::Set(_) => "set".into(),
            Scope::Restriction(p) => format!("restriction{}", p.len()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumEstimate {
    pub scope: String,
    pub q: Vec<f64>,
    /// Levels `k` for which `s_k` was computed.
    pub levels: Vec<usize>,
    /// `s[i][j]` is `s_{levels[j]}(q[i])`.
    pub s: Vec<Vec<f64>>,
    pub reported: Vec<f64>,
    pub envelope: Vec<(f64, f64)>,
    pub window: usize,
    pub requested: usize,
    /// Node budget stopped the enumeration early.
    pub partial: bool,
    /// Per level, extremes of `ln ‖T(σ)‖`.
    pub ln_norm: Vec<(f64, f64)>,
}

impl SpectrumEstimate {
    pub fn k_max(&self) -> usize {
        self.levels.last().copied().unwrap_or(0)
    }

    /// Reported value at `q`, if `q` is on the grid.
    pub fn at(&self, q: f64) -> Option<f64> {
        self.q
            .iter()
            .position(|x| (x - q).abs() < 1e-9)
            .map(|i| self.reported[i])
    }

    /// `s_k(q)` at the last computed level.
    pub fn last(&self, qi: usize) -> f64 {
        *self.s[qi].last().expect("at least one level")
    }
}

fn tail_window(levels: usize) -> usize {
    levels.div_ceil(3).max(1)
}

pub fn tau_estimate(
    g: &TransitionGraph,
    ls: &LoopStructure,
    scope: &Scope,
    q: &[f64],
    k_max: usize,
    budget: u64,
) -> Result<SpectrumEstimate, SpectraError> {
    g.require_finite_type()?;
    let (starts, allowed, offset) = match scope {
        Scope::Root => (
            vec![Start {
                vertex: 0,
                rows: vec![vec![Rat::one()]],
            }],
            None,
            0,
        ),
        Scope::Class(_) | Scope::Set(_) => {
            let members = scope.members(ls)?.unwrap_or_default();
            if members.is_empty() || members.iter().any(|&v| v >= g.len()) {
                return Err(SpectraError::BadSelection);
            }
            let mut mask = vec![false; g.len()];
            let starts = members
                .iter()
                .map(|&v| {
                    mask[v] = true;
                    let d = g.dim(v);
                    Start {
                        vertex: v,
                        rows: (0..d)
                            .map(|i| (0..d).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect())
                            .collect(),
                    }
                })
                .collect();
            (starts, Some(mask), 0)
        }
        Scope::Restriction(paths) => {
            let n = paths.first().map(|p| p.len()).ok_or(SpectraError::BadSelection)?;
            if n < 2 || paths.iter().any(|p| p.len() != n) {
                return Err(SpectraError::BadSelection);
            }
            let mut starts = Vec::new();
            for p in paths {
                let v = *p.last().unwrap();
                if ls.class_of(v) != Some(ls.essential) {
                    return Err(SpectraError::NotEssential(v));
                }
                starts.push(Start {
                    vertex: v,
                    rows: vec![g.measure_vector(p)?],
                });
            }
            (starts, None, n - 1)
        }
    };
    let extra = k_max.saturating_sub(offset);
    let e = enumerate(g, &starts, allowed.as_deref(), q, extra, budget);
    let ln_rho = g.ln_rho_min();
    let levels: Vec<usize> = e.levels.iter().map(|l| l.k + offset).collect();
    let s: Vec<Vec<f64>> = (0..q.len())
        .map(|i| {
            e.levels
                .iter()
                .zip(&levels)
                .map(|(l, &k)| l.ln_sum[i] / (k as f64 * ln_rho))
                .collect()
        })
        .collect();
    let window = tail_window(levels.len());
    let (reported, envelope) = s
        .iter()
        .map(|row| {
            let tail = &row[row.len().saturating_sub(window)..];
            let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, (lo, hi))
        })
        .unzip();
    Ok(SpectrumEstimate {
        scope: scope.label(),
        q: q.to_vec(),
        ln_norm: e.levels.iter().map(|l| (l.ln_norm_min, l.ln_norm_max)).collect(),
        levels,
        s,
        reported,
        envelope,
        window,
        requested: k_max,
        partial: e.partial,
    })
}

/// Restriction of the measure to a union of essential net intervals of one level.
pub fn tau_restricted(
    g: &TransitionGraph,
    ls: &LoopStructure,
    selection: &[Vec<usize>],
    q: &[f64],
    k_max: usize,
    budget: u64,
) -> Result<SpectrumEstimate, SpectraError> {
    tau_estimate(g, ls, &Scope::Restriction(selection.to_vec()), q, k_max, budget)
}

/// Local dimension carried by a cycle of the transition graph.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicDimension {
    pub cycle: Vec<usize>,
    pub sp: Enclosure,
    pub lo: f64,
    pub hi: f64,
    /// Closed form when the cycle product is a scalar.
    pub symbolic: Option<String>,
}

impl PeriodicDimension {
    pub fn value(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

pub fn periodic_dimension(ifs: &Ifs, g: &TransitionGraph, cycle: &[usize]) -> Result<PeriodicDimension, SpectraError> {
    if cycle.len() < 2 || cycle[0] != *cycle.last().unwrap() {
        return Err(SpectraError::NotACycle);
    }
    let t = g.path_product(cycle)?;
    let sp = spectral_radius(&t);
    let n = (cycle.len() - 1) as f64;
    let ln_rho = g.ln_rho_min();
    // ln ρ < 0 flips the order.
    let lo = ln_rat(&sp.hi) / (n * ln_rho);
    let hi = ln_rat(&sp.lo) / (n * ln_rho);
    let symbolic = (t.rows() == 1 && t.cols() == 1).then(|| {
        let inv = Rat::one() / t.get(0, 0);
        let rho = ifs.rho_min();
        let den = match rho.as_rational() {
            Some(r) => format!("log({})", fmt_rat(&(Rat::one() / r))),
            None => format!("log(1/({}))", rho.render()),
        };
        let steps = cycle.len() - 1;
        if steps == 1 {
            format!("log({})/{den}", fmt_rat(&inv))
        } else {
            format!("log({})/({steps}*{den})", fmt_rat(&inv))
        }
    });
    Ok(PeriodicDimension {
        cycle: cycle.to_vec(),
        sp,
        lo,
        hi,
        symbolic,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointDimension {
    pub representations: Vec<(SymbolicRep, PeriodicDimension)>,
    /// Minimum over the representations.
    pub value: f64,
}

pub fn point_dimension(
    ifs: &Ifs,
    g: &TransitionGraph,
    x: &FieldElement,
    depth: usize,
) -> Result<PointDimension, SpectraError> {
    let reps = locate(ifs, g, x, depth)?;
    let mut out = Vec::new();
    for r in reps {
        let cycle = r.cycle().ok_or_else(|| SpectraError::NotPeriodic(x.render()))?.to_vec();
        let d = periodic_dimension(ifs, g, &cycle)?;
        out.push((r, d));
    }
    let value = out.iter().map(|(_, d)| d.value()).fold(f64::INFINITY, f64::min);
    Ok(PointDimension {
        representations: out,
        value,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimBounds {
    pub class: usize,
    pub d_min: (f64, f64),
    pub d_max: (f64, f64),
    /// Singleton or simple class: both pairs hold the cycle value.
    pub exact: bool,
    pub cycles_checked: usize,
    pub method: String,
}

/// Bounds for the extreme local dimensions along paths in a class.
///
/// Cycle values are rigorous: each lies between `d_min` and `d_max`. The
/// opposite sides come from the extreme path norms at `path_depth`, which
/// converge without a known rate, so they are tagged heuristic.
pub fn dim_bounds(
    ifs: &Ifs,
    g: &TransitionGraph,
    ls: &LoopStructure,
    class: usize,
    cycle_budget: usize,
    path_depth: usize,
    budget: u64,
) -> Result<DimBounds, SpectraError> {
    let cl = ls.classes.get(class).ok_or(SpectraError::NoSuchClass(class))?;
    if let Some(theta) = &cl.cycle {
        let d = periodic_dimension(ifs, g, theta)?;
        return Ok(DimBounds {
            class,
            d_min: (d.lo, d.hi),
            d_max: (d.lo, d.hi),
            exact: true,
            cycles_checked: 1,
            method: "exact: simple class cycle".into(),
        });
    }
    let mut dmax_lo = f64::NEG_INFINITY;
    let mut dmin_hi = f64::INFINITY;
    let mut checked = 0;
    for &v in &cl.members {
        // Closed walks through `v` whose other vertices are larger, so each
        // cyclic class of walks is seen from its smallest vertex only.
        let mut stack = vec![vec![v]];
        while let Some(p) = stack.pop() {
            let last = *p.last().unwrap();
            for e in g.edges(last) {
                if !cl.contains(e.child) {
                    continue;
                }
                let mut w = p.clone();
                w.push(e.child);
                if e.child == v {
                    let d = periodic_dimension(ifs, g, &w)?;
                    checked += 1;
                    dmax_lo = dmax_lo.max(d.lo);
                    dmin_hi = dmin_hi.min(d.hi);
                } else if e.child > v && w.len() <= cycle_budget {
                    stack.push(w);
                }
            }
        }
    }
    let e = tau_estimate(g, ls, &Scope::Class(class), &[], path_depth, budget)?;
    let k = e.k_max();
    let (lmin, lmax) = *e.ln_norm.last().expect("class has paths");
    let scale = k as f64 * g.ln_rho_min();
    let dmax_est = (lmin / scale).max(dmax_lo);
    let dmin_est = (lmax / scale).min(dmin_hi);
    Ok(DimBounds {
        class,
        d_min: (dmin_est, dmin_hi),
        d_max: (dmax_lo, dmax_est),
        exact: false,
        cycles_checked: checked,
        method: format!(
            "cycles up to length {cycle_budget}; path-norm extremes at depth {k} (heuristic, o(1)-corrected)"
        ),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactTau {
    pub q: u32,
    pub states: usize,
    pub sp: Enclosure,
    /// Enclosure of `ln sp / ln ρ_min`.
    pub lo: f64,
    pub hi: f64,
}

impl ExactTau {
    pub fn value(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

const BLOCK_ENTRY_CAP: usize = 4_000_000;

/// `τ(q)` for integer `q` from the block operator whose `(u, v)` block is the
/// `q`-fold Kronecker power of `T(u, v)`: sums of `(𝟙ᵀT(σ)𝟙)^q` over paths
/// are sums of `𝟙ᵀ T(σ)^{⊗q} 𝟙`, whose growth rate is its spectral radius.
pub fn tau_exact_integer(
    g: &TransitionGraph,
    ls: &LoopStructure,
    q: u32,
    scope: &Scope,
) -> Result<ExactTau, SpectraError> {
    g.require_finite_type()?;
    if !(1..=6).contains(&q) {
        return Err(SpectraError::QOutOfRange(q));
    }
    let n = g.len();
    let mut allowed = vec![true; n];
    if let Some(m) = scope.members(ls)? {
        allowed = vec![false; n];
        for &v in m {
            *allowed.get_mut(v).ok_or(SpectraError::BadSelection)? = true;
        }
    }
    let mut base = vec![0; n + 1];
    for v in 0..n {
        base[v + 1] = base[v] + if allowed[v] { g.dim(v).pow(q) } else { 0 };
    }
    let mut entries = 0usize;
    for v in (0..n).filter(|&v| allowed[v]) {
        for (c, m) in g.children(v) {
            if allowed[c] {
                let nz = m.entries().iter().filter(|x| !x.is_zero()).count();
                entries = entries.saturating_add(nz.saturating_pow(q));
            }
        }
    }
    if entries > BLOCK_ENTRY_CAP {
        return Err(SpectraError::BlockTooLarge(entries));
    }
    let mut op = SparseMatrix::new(base[n]);
    let mut powers: HashMap<*const RatMatrix, RatMatrix> = HashMap::new();
    for v in (0..n).filter(|&v| allowed[v]) {
        for (c, m) in g.children(v) {
            if !allowed[c] {
                continue;
            }
            let k = powers.entry(m as *const RatMatrix).or_insert_with(|| {
                let mut k = m.clone();
                for _ in 1..q {
                    k = k.kron(m);
                }
                k
            });
            for i in 0..k.rows() {
                for j in 0..k.cols() {
                    let x = k.get(i, j);
                    if !x.is_zero() {
                        op.push(base[v] + i, base[c] + j, x.clone());
                    }
                }
            }
        }
    }
    let starts: Vec<usize> = match scope {
        Scope::Root => vec![0],
        Scope::Class(_) | Scope::Set(_) => (0..base[n]).collect(),
        Scope::Restriction(paths) => {
            let mut s = Vec::new();
            for p in paths {
                let v = *p.last().ok_or(SpectraError::BadSelection)?;
                let mv = g.measure_vector(p)?;
                let mut t = vec![Rat::one()];
                for _ in 0..q {
                    t = t.iter().flat_map(|a| mv.iter().map(move |b| a * b)).collect();
                }
                s.extend((0..t.len()).filter(|&i| !t[i].is_zero()).map(|i| base[v] + i));
            }
            s
        }
    };
    let keep = op.reachable(&starts);
    let sp = spectral_radius_sparse(&op.restrict(&keep));
    let ln_rho = g.ln_rho_min();
    Ok(ExactTau {
        q,
        states: keep.len(),
        lo: ln_rat(&sp.hi) / ln_rho,
        hi: ln_rat(&sp.lo) / ln_rho,
        sp,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinFormulaLabel {
    /// Every transition path is positive (possibly after repair).
    Equality,
    /// Positivity unproven: only `τ ≤ min τ_L` is claimed.
    UpperBoundOnly,
}

impl MinFormulaLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            MinFormulaLabel::Equality => "equality",
            MinFormulaLabel::UpperBoundOnly => "upper bound only",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassSpectrum {
    pub class: usize,
    pub bounds: DimBounds,
    /// `τ_L` on the grid: an exact line for simple classes, else an estimate.
    pub tau: Vec<f64>,
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct MinFormulaResult {
    pub q: Vec<f64>,
    /// Largest `d_max` over the non-essential maximal classes.
    pub d: Option<f64>,
    pub d_max_essential: f64,
    pub q0: Option<(Rat, Rat)>,
    pub composed: Vec<f64>,
    pub tau_essential: Vec<f64>,
    pub classes: Vec<ClassSpectrum>,
    pub label: MinFormulaLabel,
}

#[derive(Clone, Copy, Debug)]
pub struct MinFormulaSettings {
    pub k_max: usize,
    pub budget: u64,
    pub cycle_budget: usize,
    pub path_depth: usize,
}

impl Default for MinFormulaSettings {
    fn default() -> Self {
        MinFormulaSettings {
            k_max: 18,
            budget: 50_000_000,
            cycle_budget: 6,
            path_depth: 12,
        }
    }
}

pub fn min_formula(
    ifs: &Ifs,
    g: &TransitionGraph,
    ls: &LoopStructure,
    cert: &PositivityCertificate,
    q: &[f64],
    set: &MinFormulaSettings,
) -> Result<MinFormulaResult, SpectraError> {
    let mut classes = Vec::new();
    for c in 0..ls.classes.len() {
        let bounds = dim_bounds(ifs, g, ls, c, set.cycle_budget, set.path_depth, set.budget)?;
        let (tau, exact) = if bounds.exact {
            let d = 0.5 * (bounds.d_max.0 + bounds.d_max.1);
            (q.iter().map(|x| x * d).collect(), true)
        } else {
            let e = tau_estimate(g, ls, &Scope::Class(c), q, set.k_max, set.budget)?;
            (e.reported, false)
        };
        classes.push(ClassSpectrum {
            class: c,
            bounds,
            tau,
            exact,
        });
    }
    let composed: Vec<f64> = (0..q.len())
        .map(|i| classes.iter().map(|c| c.tau[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let ess = &classes[ls.essential];
    let d_max_essential = ess.bounds.d_max.0;
    let tau_essential = ess.tau.clone();
    let d = ls
        .non_essential()
        .map(|c| {
            let b = &classes[c].bounds;
            if b.exact {
                0.5 * (b.d_max.0 + b.d_max.1)
            } else {
                b.d_max.0
            }
        })
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let q0 = match d {
        Some(d) if d > d_max_essential => solve_q0(q, &tau_essential, d, d_max_essential),
        _ => None,
    };
    Ok(MinFormulaResult {
        q: q.to_vec(),
        d,
        d_max_essential,
        q0,
        composed,
        tau_essential,
        classes,
        label: if cert.is_certified() {
            MinFormulaLabel::Equality
        } else {
            MinFormulaLabel::UpperBoundOnly
        },
    })
}

/// Piecewise-linear interpolation on a sorted grid, clamped at the ends.
fn interpolate(q: &[f64], y: &[f64], x: f64) -> f64 {
    if x <= q[0] {
        return y[0];
    }
    let n = q.len();
    if x >= q[n - 1] {
        return y[n - 1];
    }
    let i = q.partition_point(|&v| v <= x) - 1;
    let t = (x - q[i]) / (q[i + 1] - q[i]);
    y[i] + t * (y[i + 1] - y[i])
}

/// Root of `τ̂_E(q) − q·d` on the negative axis, by 60 bisection steps.
fn solve_q0(q: &[f64], tau_e: &[f64], d: f64, d_max_e: f64) -> Option<(Rat, Rat)> {
    if q.len() < 2 || q[0] >= 0.0 {
        return None;
    }
    let f = |x: f64| interpolate(q, tau_e, x) - x * d;
    let mut hi = 0.0f64.min(q[q.len() - 1]);
    if f(hi) >= 0.0 {
        return None;
    }
    let mut lo = (-1.0 / (d - d_max_e)).max(q[0]);
    if f(lo) < 0.0 {
        // The estimate sits below its asymptote; look further left on the grid.
        lo = *q.iter().filter(|&&x| x < lo).rev().find(|&&x| f(x) >= 0.0)?;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((Rat::from_float(lo)?, Rat::from_float(hi)?))
}

/// Grid infimum of `qα − τ(q)`; `None` where it is attained only at a grid end
/// (the true infimum may then be unbounded).
pub fn legendre(q: &[f64], tau: &[f64], alpha: &[f64]) -> Vec<Option<f64>> {
    alpha
        .iter()
        .map(|&a| {
            let vals: Vec<f64> = q.iter().zip(tau).map(|(x, t)| x * a - t).collect();
            let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let tol = 1e-12 * (1.0 + m.abs());
            let interior = vals
                .iter()
                .enumerate()
                .any(|(i, v)| i > 0 && i + 1 < vals.len() && *v <= m + tol);
            interior.then_some(m)
        })
        .collect()
}

/// CSV lines `scope,q,k,s_k,reported_value,env_lo,env_hi`, one per `(q, k)`.
pub fn csv_rows(est: &SpectrumEstimate) -> Vec<String> {
    let mut out = Vec::new();
    for (i, q) in est.q.iter().enumerate() {
        for (j, k) in est.levels.iter().enumerate() {
            out.push(format!(
                "{},{},{},{},{},{},{}",
                est.scope,
                fmt_f64(*q),
                k,
                fmt_f64(est.s[i][j]),
                fmt_f64(est.reported[i]),
                fmt_f64(est.envelope[i].0),
                fmt_f64(est.envelope[i].1)
            ));
        }
    }
    out
}

pub const CSV_HEADER: &str = "scope,q,k,s_k,reported_value,env_lo,env_hi";
