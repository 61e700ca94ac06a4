//! Exact feasibility for small linear programs.
//!
//! Phase I of the simplex method on a dense rational tableau, with Bland's
//! rule so that degenerate pivots cannot cycle.

use crate::poly::Rat;
use num_traits::{One, Signed, Zero};

/// Finds `x ≥ 0` with `A x = b`, or `None` when the system is infeasible.
///
/// `a` is row-major with one row per equation; all rows must have the same
/// length.
pub fn feasible_point(a: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    assert_eq!(a.len(), b.len(), "one right-hand side per row");
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    assert!(a.iter().all(|r| r.len() == n), "ragged constraint matrix");
    if m == 0 {
        return Some(vec![Rat::zero(); n]);
    }
    // Columns: n originals, m artificials, then the right-hand side.
    let width = n + m + 1;
    let mut t: Vec<Vec<Rat>> = Vec::with_capacity(m + 1);
    for (i, (row, rhs)) in a.iter().zip(b).enumerate() {
        let flip = rhs.is_negative();
        let mut r = vec![Rat::zero(); width];
        for (j, v) in row.iter().enumerate() {
            r[j] = if flip { -v.clone() } else { v.clone() };
        }
        r[n + i] = Rat::one();
        r[width - 1] = if flip { -rhs.clone() } else { rhs.clone() };
        t.push(r);
    }
    // Objective: minimize the artificial sum, written in reduced form.
    let mut z = vec![Rat::zero(); width];
    for r in &t {
        for j in 0..n {
            z[j] -= &r[j];
        }
        z[width - 1] -= &r[width - 1];
    }
    t.push(z);
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let obj = &t[m];
        let Some(enter) = (0..n + m).find(|&j| obj[j].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, Rat)> = None;
        for i in 0..m {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width - 1] / &t[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase I is bounded below by zero, so an entering column always has a pivot.
        let (p, _) = leave.expect("phase one objective is bounded");
        pivot(&mut t, p, enter);
        basis[p] = enter;
    }

    if !t[m][width - 1].is_zero() {
        return None;
    }
    let mut x = vec![Rat::zero(); n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1].clone();
        }
    }
    Some(x)
}

fn pivot(t: &mut [Vec<Rat>], p: usize, q: usize) {
    let inv = t[p][q].recip();
    for v in t[p].iter_mut() {
        *v *= &inv;
    }
    let prow = t[p].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == p || row[q].is_zero() {
            continue;
        }
        let f = row[q].clone();
        for (v, pv) in row.iter_mut().zip(&prow) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    }
}
