//! Certified enclosures of the spectral radius of nonnegative rational matrices.
//!
//! The support graph is split into strongly connected components. A
//! component of size one contributes its diagonal entry exactly; larger
//! components are irreducible, and for a positive vector `x` the row
//! quotients `(Ax)_i / x_i` bracket the Perron root (Collatz–Wielandt). The
//! vector comes from floating-point power and inverse iteration, the quotients
//! are evaluated exactly.

use crate::matrix::RatMatrix;
use crate::poly::{rat_to_f64, Rat};
use nalgebra::DMatrix;
use num_traits::{Signed, Zero};

/// Sparse square matrix, row-major.
#[derive(Clone, Debug, Default)]
pub struct SparseMatrix {
    pub n: usize,
    pub rows: Vec<Vec<(usize, Rat)>>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        SparseMatrix {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn from_dense(m: &RatMatrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "spectral radius needs a square matrix");
        let mut s = SparseMatrix::new(m.rows());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let v = m.get(i, j);
                if !v.is_zero() {
                    s.rows[i].push((j, v.clone()));
                }
            }
        }
        s
    }

    pub fn push(&mut self, i: usize, j: usize, v: Rat) {
        if !v.is_zero() {
            self.rows[i].push((j, v));
        }
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn restrict(&self, keep: &[usize]) -> SparseMatrix {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let mut s = SparseMatrix::new(keep.len());
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in &self.rows[i] {
                if pos[*j] != usize::MAX {
                    s.rows[k].push((pos[*j], v.clone()));
                }
            }
        }
        s
    }

    /// Indices reachable from `starts` along nonzero entries (starts included).
    pub fn reachable(&self, starts: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut stack: Vec<usize> = starts.to_vec();
        for &s in starts {
            seen[s] = true;
        }
        while let Some(i) = stack.pop() {
            for (j, _) in &self.rows[i] {
                if !seen[*j] {
                    seen[*j] = true;
                    stack.push(*j);
                }
            }
        }
        (0..self.n).filter(|&i| seen[i]).collect()
    }
}

/// Rational bounds `lo ≤ sp ≤ hi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enclosure {
    pub lo: Rat,
    pub hi: Rat,
}

impl Enclosure {
    pub fn exact(r: Rat) -> Self {
        Enclosure { lo: r.clone(), hi: r }
    }

    pub fn width(&self) -> f64 {
        rat_to_f64(&(&self.hi - &self.lo))
    }

    pub fn contains(&self, x: &Rat) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_f64(&self, x: f64, slack: f64) -> bool {
        rat_to_f64(&self.lo) - slack <= x && x <= rat_to_f64(&self.hi) + slack
    }

    pub fn mid(&self) -> f64 {
        0.5 * (rat_to_f64(&self.lo) + rat_to_f64(&self.hi))
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

/// Strongly connected components (Tarjan, iterative), in reverse topological order.
pub fn scc(n: usize, adj: &dyn Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, adj(root), 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, succ, pos)) = call.last_mut() {
            let v = *v;
            if *pos < succ.len() {
                let w = succ[*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let s = adj(w);
                    call.push((w, s, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some((p, _, _)) = call.last() {
                    low[*p] = low[*p].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

pub fn spectral_radius(m: &RatMatrix) -> Enclosure {
    spectral_radius_sparse(&SparseMatrix::from_dense(m))
}

pub fn spectral_radius_sparse(m: &SparseMatrix) -> Enclosure {
    let comps = scc(m.n, &|i| m.rows[i].iter().map(|(j, _)| *j).collect());
    let mut best = Enclosure::exact(Rat::zero());
    for c in comps {
        let e = if c.len() == 1 {
            let i = c[0];
            let d = m.rows[i]
                .iter()
                .find(|(j, _)| *j == i)
                .map_or_else(Rat::zero, |(_, v)| v.clone());
            Enclosure::exact(d)
        } else {
            irreducible(&m.restrict(&c))
        };
        if e.lo > best.lo {
            best.lo = e.lo.clone();
        }
        if e.hi > best.hi {
            best.hi = e.hi;
        }
    }
    best
}

fn irreducible(m: &SparseMatrix) -> Enclosure {
    let n = m.n;
    let fm: Vec<Vec<(usize, f64)>> = m
        .rows
        .iter()
        .map(|r| r.iter().map(|(j, v)| (*j, rat_to_f64(v))).collect())
        .collect();
    let apply = |x: &[f64]| -> Vec<f64> { fm.iter().map(|r| r.iter().map(|(j, v)| v * x[*j]).sum()).collect() };
    // Power iteration on A + I (primitive when A is irreducible).
    let mut x = vec![1.0; n];
    let steps = if n <= 2000 { 200 } else { 2000 };
    for _ in 0..steps {
        let y = apply(&x);
        let mut z: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a + b).collect();
        let s: f64 = z.iter().sum();
        z.iter_mut().for_each(|v| *v /= s);
        x = z;
    }
    // Inverse iteration with a shift just above the Perron root keeps the
    // iterate positive (the resolvent is a positive matrix) and converges fast.
    let rounds = if n <= 2000 { 3 } else { 0 };
    for round in 0..rounds {
        let y = apply(&x);
        let hi_est = y.iter().zip(&x).map(|(a, b)| a / b).fold(0.0f64, f64::max);
        let shift = hi_est * (1.0 + 1e-7 / (1 + round) as f64) + 1e-300;
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for (i, r) in fm.iter().enumerate() {
            for (j, v) in r {
                dense[(i, *j)] -= v;
            }
            dense[(i, i)] += shift;
        }
        let lu = dense.lu();
        for _ in 0..4 {
            let b = nalgebra::DVector::from_column_slice(&x);
            match lu.solve(&b) {
                Some(z) if z.iter().all(|v| v.is_finite() && *v > 0.0) => {
                    let s: f64 = z.iter().sum();
                    x = z.iter().map(|v| v / s).collect();
                }
                _ => break,
            }
        }
    }
    collatz_wielandt(m, &x)
}

/// Exact min/max row quotients of `A x / x` for the positive vector `x`.
pub fn collatz_wielandt(m: &SparseMatrix, x: &[f64]) -> Enclosure {
    let floor = x.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let xr: Vec<Rat> = x
        .iter()
        .map(|&v| {
            let v = if v > 0.0 && v.is_finite() { v } else { floor * 1e-3 };
            Rat::from_float(v).expect("finite")
        })
        .collect();
    let mut lo: Option<Rat> = None;
    let mut hi: Option<Rat> = None;
    for (i, r) in m.rows.iter().enumerate() {
        let mut acc = Rat::zero();
        for (j, v) in r {
            acc += v * &xr[*j];
        }
        let q = acc / &xr[i];
        if lo.as_ref().is_none_or(|l| &q < l) {
            lo = Some(q.clone());
        }
        if hi.as_ref().is_none_or(|h| &q > h) {
            hi = Some(q);
        }
    }
    let lo = lo.unwrap_or_else(Rat::zero);
    let hi = hi.unwrap_or_else(Rat::zero);
    debug_assert!(!lo.is_negative());
    Enclosure { lo, hi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    fn m(rows: &[&[i64]], d: i64) -> RatMatrix {
        RatMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| rat(x, d)).collect()).collect())
    }

    #[test]
    fn triangular_is_exact() {
        let e = spectral_radius(&m(&[&[4, 4], &[0, 1]], 17));
        assert_eq!(e, Enclosure::exact(rat(4, 17)));
    }

    #[test]
    fn integer_eigenvalue() {
        // Eigenvector (2,1,1) with eigenvalue 2.
        let e = spectral_radius(&m(&[&[1, 1, 1], &[1, 0, 0], &[0, 1, 1]], 1));
        assert!(e.contains(&rat(2, 1)));
        assert!(e.width() < 1e-12);
    }

    #[test]
    fn fibonacci_matrix() {
        let e = spectral_radius(&m(&[&[1, 1], &[1, 0]], 1));
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(e.contains_f64(phi, 1e-15));
        assert!(e.width() < 1e-12);
    }

    #[test]
    fn periodic_component() {
        // Irreducible but imprimitive: eigenvalues ±1.
        let e = spectral_radius(&m(&[&[0, 1], &[1, 0]], 1));
        assert!(e.contains(&rat(1, 1)));
        assert!(e.width() < 1e-12);
    }

    #[test]
    fn nilpotent_is_zero() {
        let e = spectral_radius(&m(&[&[0, 1], &[0, 0]], 1));
        assert_eq!(e, Enclosure::exact(rat(0, 1)));
    }

    #[test]
    fn scc_order_is_reverse_topological() {
        let adj = |i: usize| match i {
            0 => vec![1],
            1 => vec![2],
            2 => vec![1],
            _ => vec![],
        };
        let c = scc(3, &adj);
        assert_eq!(c, vec![vec![1, 2], vec![0]]);
    }
}
