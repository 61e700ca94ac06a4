mod common;

use common::analysis;
use finitype::loops::certify_min_formula;
use finitype::net::net_layers;
use finitype::poly::rat;
use finitype::spectra::*;

const BUDGET: u64 = 50_000_000;

fn grid(lo: i32, hi: i32, per_unit: i32) -> Vec<f64> {
    (lo * per_unit..=hi * per_unit)
        .map(|i| i as f64 / per_unit as f64)
        .collect()
}

fn phi() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

#[test]
fn periodic_dimensions_of_loops() {
    let (c, g, ls) = analysis("nineteen.toml");
    let want17 = 17f64.ln() / 3f64.ln();
    let want174 = (17.0f64 / 4.0).ln() / 3f64.ln();
    let mut values = Vec::new();
    for k in ls.non_essential() {
        let cl = &ls.classes[k];
        let d = periodic_dimension(&c.ifs, &g, cl.cycle.as_ref().unwrap()).unwrap();
        assert!(d.hi - d.lo < 1e-12);
        values.push(d.value());
    }
    values.sort_by(f64::total_cmp);
    assert!((values[0] - want174).abs() < 1e-12);
    assert!((values[2] - want174).abs() < 1e-12);
    assert!((values[3] - want17).abs() < 1e-12);
    // A scalar loop has a closed form.
    let k = ls
        .non_essential()
        .find(|&k| g.dim(ls.classes[k].members[0]) == 1)
        .unwrap();
    let d = periodic_dimension(&c.ifs, &g, ls.classes[k].cycle.as_ref().unwrap()).unwrap();
    assert!(d.symbolic.as_deref().unwrap().starts_with("log(17"));
}

#[test]
fn golden_point_dimension_at_zero() {
    let (c, g, _) = analysis("golden_uniform.toml");
    let f = c.ifs.field().clone();
    let d = point_dimension(&c.ifs, &g, &f.zero(), 64).unwrap();
    assert_eq!(d.representations.len(), 1);
    assert!((d.value - 2f64.ln() / phi().ln()).abs() < 1e-12);
    assert_eq!(d.representations[0].1.symbolic.as_deref(), Some("log(2)/log(1/(t))"));

    let (c, g, _) = analysis("golden_biased.toml");
    let d = point_dimension(&c.ifs, &g, &c.ifs.field().zero(), 64).unwrap();
    assert!((d.value - 3f64.ln() / phi().ln()).abs() < 1e-12);
}

#[test]
fn nineteen_point_dimension_at_half() {
    let (c, g, _) = analysis("nineteen.toml");
    let half = c.ifs.field().from_rational(rat(1, 2));
    let d = point_dimension(&c.ifs, &g, &half, 64).unwrap();
    assert_eq!(d.representations.len(), 2);
    let mut vals: Vec<f64> = d.representations.iter().map(|(_, p)| p.value()).collect();
    vals.sort_by(f64::total_cmp);
    assert!((vals[0] - (17.0f64 / 4.0).ln() / 3f64.ln()).abs() < 1e-12);
    assert!((vals[1] - 17f64.ln() / 3f64.ln()).abs() < 1e-12);
    assert_eq!(d.value, vals[0]);
}

#[test]
fn dim_bounds_are_ordered() {
    for name in ["golden_uniform.toml", "cantor33.toml", "nineteen.toml"] {
        let (c, g, ls) = analysis(name);
        for k in 0..ls.classes.len() {
            let b = dim_bounds(&c.ifs, &g, &ls, k, 5, 8, BUDGET).unwrap();
            assert!(b.d_min.0 <= b.d_min.1 && b.d_max.0 <= b.d_max.1, "{name} {b:?}");
            if ls.classes[k].is_singleton() {
                assert!(b.exact && b.d_min == b.d_max);
            }
        }
    }
    // The essential class of the golden-mean convolution reaches log 2/log φ by cycles.
    let (c, g, ls) = analysis("golden_uniform.toml");
    let b = dim_bounds(&c.ifs, &g, &ls, ls.essential, 4, 8, BUDGET).unwrap();
    assert!(b.d_max.0 >= 2f64.ln() / phi().ln() - 1e-6);
}

#[test]
fn golden_estimates() {
    let (_, g, ls) = analysis("golden_uniform.toml");
    let e = tau_estimate(&g, &ls, &Scope::Root, &[0.0, 1.0], 20, BUDGET).unwrap();
    assert!(!e.partial && e.k_max() == 20);
    assert!((e.last(0) + 1.0).abs() <= 0.1, "{}", e.last(0));
    assert!(e.last(1).abs() <= 0.1);
    // |s_k(1)| shrinks with k.
    assert!(e.s[1].windows(2).all(|w| w[1].abs() < w[0].abs()));
    for i in 0..2 {
        let (lo, hi) = e.envelope[i];
        assert!(lo <= e.reported[i] && e.reported[i] <= hi);
        assert!(e.s[i].iter().all(|x| x.is_finite()));
    }
}

#[test]
fn singleton_class_estimate_is_a_line() {
    let (_, g, ls) = analysis("golden_uniform.toml");
    let k = ls.class_of(1).unwrap();
    let e = tau_estimate(&g, &ls, &Scope::Class(k), &[-2.0, 3.0], 12, BUDGET).unwrap();
    let d = 2f64.ln() / phi().ln();
    for (i, q) in [-2.0, 3.0].iter().enumerate() {
        for s in &e.s[i] {
            assert!((s - q * d).abs() < 1e-9);
        }
    }
}

#[test]
fn exact_integer_pressure() {
    for name in ["golden_uniform.toml", "cantor33.toml", "nineteen.toml"] {
        let (_, g, ls) = analysis(name);
        let one = tau_exact_integer(&g, &ls, 1, &Scope::Root).unwrap();
        assert!(one.sp.contains_f64(1.0, 1e-9) && one.value().abs() < 1e-9, "{name}");
        let vals: Vec<f64> = (1..=4)
            .map(|q| tau_exact_integer(&g, &ls, q, &Scope::Root).unwrap().value())
            .collect();
        // Increasing and concave.
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!(vals.windows(3).all(|w| w[1] >= 0.5 * (w[0] + w[2]) - 1e-9));
    }
    let (_, g, ls) = analysis("golden_uniform.toml");
    let e = tau_exact_integer(&g, &ls, 2, &Scope::Root).unwrap();
    let est = tau_estimate(&g, &ls, &Scope::Root, &[2.0], 18, BUDGET).unwrap();
    assert!((est.last(0) - e.value()).abs() <= 3.0 / 18.0);
    // A scalar loop p gives q log p / log ρ.
    let k = ls.class_of(1).unwrap();
    let t = tau_exact_integer(&g, &ls, 3, &Scope::Class(k)).unwrap();
    assert!((t.value() - 3.0 * 2f64.ln() / phi().ln()).abs() < 1e-9);
    assert!(tau_exact_integer(&g, &ls, 7, &Scope::Root).is_err());
}

#[test]
fn omega_is_below_every_class() {
    let q = grid(-5, 5, 2);
    for name in ["golden_uniform.toml", "cantor33.toml", "nineteen.toml"] {
        let (_, g, ls) = analysis(name);
        let omega = tau_estimate(&g, &ls, &Scope::omega(&g), &q, 10, BUDGET).unwrap();
        for k in 0..ls.classes.len() {
            let e = tau_estimate(&g, &ls, &Scope::Class(k), &q, 10, BUDGET).unwrap();
            for j in 0..omega.levels.len() {
                for i in 0..q.len() {
                    assert!(omega.s[i][j] <= e.s[i][j] + 1e-12, "{name} class {k} q {}", q[i]);
                }
            }
        }
    }
}

#[test]
fn min_formula_on_biased_golden() {
    let (c, g, ls) = analysis("golden_biased.toml");
    let cert = certify_min_formula(&g, &ls, 4).unwrap();
    let q = grid(-10, 10, 4);
    let set = MinFormulaSettings {
        k_max: 14,
        ..Default::default()
    };
    let mf = min_formula(&c.ifs, &g, &ls, &cert, &q, &set).unwrap();
    assert_eq!(mf.label, MinFormulaLabel::Equality);
    let d = 3f64.ln() / phi().ln();
    assert!((mf.d.unwrap() - d).abs() < 1e-12);
    let (lo, hi) = mf.q0.clone().unwrap();
    assert!(lo <= hi && hi < rat(0, 1));
    let q0 = finitype::poly::rat_to_f64(&lo);
    assert!(q0 >= -1.0 / (d - mf.d_max_essential) - 1e-12);
    for (i, x) in q.iter().enumerate() {
        if *x < q0 {
            assert!((mf.composed[i] - x * d).abs() < 1e-9);
        }
        if *x >= 0.0 {
            assert_eq!(mf.composed[i], mf.tau_essential[i]);
        }
    }
}

#[test]
fn restriction_tracks_the_measure() {
    let (c, g, ls) = analysis("cantor33.toml");
    let layers = net_layers(&c.ifs, 1, 64).unwrap();
    let f = c.ifs.field().clone();
    let mut sel = Vec::new();
    let (mut lo, mut hi) = (f.one(), f.zero());
    for (path, iv) in g.root_paths(1).into_iter().zip(&layers[1]) {
        let v = path[1];
        assert_eq!(g.lookup(&iv.cv()), Some(v));
        if ls.class_of(v) == Some(ls.essential) {
            lo = lo.min(iv.a.clone());
            hi = hi.max(iv.b.clone());
            sel.push(path);
        }
    }
    assert_eq!(lo, f.from_rational(rat(2, 9)));
    // The right-most of the three siblings sharing a neighbor set gets sibling
    // index 3, which never recurs, so it sits outside the essential class.
    assert_eq!(hi, f.from_rational(rat(2, 3)));
    let q = grid(0, 5, 2);
    let all = tau_restricted(&g, &ls, &sel, &q, 16, BUDGET).unwrap();
    // Intervals carrying a single measure coordinate; the left-most selection
    // splits its mass 3:1 over two vertices and converges more slowly.
    let scalar: Vec<Vec<usize>> = sel
        .iter()
        .filter(|p| g.measure_vector(p).unwrap().len() == 1)
        .cloned()
        .collect();
    assert_eq!(scalar.len(), 2);
    let one = tau_restricted(&g, &ls, &scalar[..1], &q, 16, BUDGET).unwrap();
    let two = tau_restricted(&g, &ls, &scalar, &q, 16, BUDGET).unwrap();
    let root = tau_estimate(&g, &ls, &Scope::Root, &q, 16, BUDGET).unwrap();
    for i in 0..q.len() {
        assert!(
            (one.last(i) - two.last(i)).abs() <= 0.1,
            "q={} one={} two={}",
            q[i],
            one.last(i),
            two.last(i)
        );
        assert!((all.reported[i] - root.reported[i]).abs() <= 0.15, "q={}", q[i]);
    }
    let mut bad = sel[0].clone();
    bad[1] = ls.classes[ls.non_essential().next().unwrap()].members[0];
    assert!(tau_restricted(&g, &ls, &[bad], &q, 8, BUDGET).is_err());
}

#[test]
fn legendre_of_a_line() {
    let q = grid(-4, 4, 4);
    let d = 1.5;
    let tau: Vec<f64> = q.iter().map(|x| x * d).collect();
    let f = legendre(&q, &tau, &[1.0, 1.5, 2.0]);
    assert_eq!(f[0], None);
    assert!(f[1].unwrap().abs() < 1e-12);
    assert_eq!(f[2], None);
}

#[test]
fn legendre_is_concave_on_its_domain() {
    let (_, g, ls) = analysis("cantor33.toml");
    let q = grid(-6, 6, 4);
    let e = tau_estimate(&g, &ls, &Scope::Root, &q, 12, BUDGET).unwrap();
    let alpha: Vec<f64> = (0..=60).map(|i| 0.5 + i as f64 * 0.025).collect();
    let f = legendre(&q, &e.reported, &alpha);
    let pts: Vec<(f64, f64)> = alpha.iter().zip(&f).filter_map(|(a, v)| v.map(|v| (*a, v))).collect();
    assert!(pts.len() > 5);
    for w in pts.windows(3) {
        let t = (w[1].0 - w[0].0) / (w[2].0 - w[0].0);
        assert!(w[1].1 >= (1.0 - t) * w[0].1 + t * w[2].1 - 1e-9);
    }
}

#[test]
fn legendre_matches_brute_force_between_integer_points() {
    let (_, g, ls) = analysis("golden_uniform.toml");
    let tau: Vec<f64> = (1..=3)
        .map(|q| tau_exact_integer(&g, &ls, q, &Scope::Root).unwrap().value())
        .collect();
    let q = [1.0, 2.0, 3.0];
    let alpha = tau[1] - tau[0];
    let f = legendre(&q, &tau, &[alpha])[0].unwrap();
    let brute = q
        .iter()
        .zip(&tau)
        .map(|(x, t)| x * alpha - t)
        .fold(f64::INFINITY, f64::min);
    assert!((f - brute).abs() < 1e-12);
}

#[test]
fn csv_has_one_row_per_q_and_level() {
    let (_, g, ls) = analysis("golden_uniform.toml");
    let e = tau_estimate(&g, &ls, &Scope::Root, &[1.0, 2.0], 6, BUDGET).unwrap();
    let rows = csv_rows(&e);
    assert_eq!(rows.len(), 12);
    assert!(rows[0].starts_with("root,1,1,"));
    assert_eq!(rows[0].split(',').count(), CSV_HEADER.split(',').count());
}

/// `d̂_min` and `d̂_max` read off the same enumeration, level by level.
fn path_extremes(g: &finitype::net::TransitionGraph, e: &SpectrumEstimate, j: usize) -> (f64, f64) {
    let scale = e.levels[j] as f64 * g.ln_rho_min();
    let (lmin, lmax) = e.ln_norm[j];
    (lmax / scale, lmin / scale)
}

#[test]
fn class_estimates_sit_between_the_box_bounds() {
    let q = grid(0, 5, 1);
    // The count of starting members adds ln(#members)/(k ln 1/ρ) at level k,
    // so each fixture goes as deep as its path growth allows.
    let runs = [
        ("golden_uniform.toml", 34),
        ("cantor33.toml", 15),
        ("nineteen.toml", 15),
        ("three_singletons.toml", 14),
    ];
    for (name, k) in runs {
        let (_, g, ls) = analysis(name);
        for l in 0..ls.classes.len() {
            let boxdim = finitype::loops::incidence(&g, &ls.classes[l].members)
                .unwrap()
                .box_dim
                .1;
            let e = tau_estimate(&g, &ls, &Scope::Class(l), &q, k, 200_000_000).unwrap();
            assert_eq!(e.k_max(), k, "{name} L{l}");
            for j in e.levels.len() - e.window..e.levels.len() {
                let (dmin, _) = path_extremes(&g, &e, j);
                for (i, &qi) in q.iter().enumerate() {
                    let s = e.s[i][j];
                    assert!(s.is_finite());
                    assert!(
                        qi * dmin >= s - 1e-9,
                        "{name} L{l} k={} q={qi}: {s} > {}",
                        e.levels[j],
                        qi * dmin
                    );
                }
            }
            let j = e.levels.len() - 1;
            let (dmin, _) = path_extremes(&g, &e, j);
            for (i, &qi) in q.iter().enumerate() {
                let s = e.s[i][j];
                assert!(
                    s >= qi * dmin - boxdim - 0.15,
                    "{name} L{l} q={qi}: {s} < {} - {boxdim}",
                    qi * dmin
                );
            }
        }
    }
}

#[test]
fn end_slopes_approach_the_extreme_dimensions() {
    let q = grid(-5, 5, 2);
    let n = q.len();
    for name in ["golden_uniform.toml", "cantor33.toml", "nineteen.toml"] {
        let (_, g, ls) = analysis(name);
        for l in 0..ls.classes.len() {
            let e = tau_estimate(&g, &ls, &Scope::Class(l), &q, 14, BUDGET).unwrap();
            assert!(e.s.iter().flatten().all(|x| x.is_finite()));
            let (dmin, dmax) = path_extremes(&g, &e, e.levels.len() - 1);
            let high = (e.reported[n - 1] - e.reported[n - 2]) / (q[n - 1] - q[n - 2]);
            let low = (e.reported[1] - e.reported[0]) / (q[1] - q[0]);
            assert!((high - dmin).abs() <= 0.1, "{name} L{l}: slope {high} vs {dmin}");
            assert!((low - dmax).abs() <= 0.1, "{name} L{l}: slope {low} vs {dmax}");
        }
    }
}

#[test]
fn essential_estimate_is_the_least_class_estimate() {
    let q = grid(0, 5, 2);
    for name in ["golden_uniform.toml", "cantor33.toml", "nineteen.toml"] {
        let (_, g, ls) = analysis(name);
        let per: Vec<SpectrumEstimate> = (0..ls.classes.len())
            .map(|l| tau_estimate(&g, &ls, &Scope::Class(l), &q, 14, BUDGET).unwrap())
            .collect();
        for i in 0..q.len() {
            let least = per.iter().map(|e| e.reported[i]).fold(f64::INFINITY, f64::min);
            let ess = per[ls.essential].reported[i];
            assert!((ess - least).abs() <= 0.15, "{name} q={}: {ess} vs {least}", q[i]);
        }
    }
}
