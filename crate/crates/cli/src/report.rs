//! JSON, CSV and DOT output. Keys are sorted and floats carry twelve
//! significant digits, so identical inputs give byte-identical files.

use crate::Failure;
use finitype::cone::{certify_cone_system, match_fixture, parse_cone_fixture, ConeVerdict, Obligation};
use finitype::config::AnalysisConfig;
use finitype::loops::{
    certify_min_formula, incidence, loop_classes, CertVerdict, LoopStructure, PositivityCertificate,
};
use finitype::net::{explore, TransitionGraph, Verdict};
use finitype::perron::Enclosure;
use finitype::poly::{fmt_f64, fmt_rat, ln_rat, rat_to_f64, Rat};
use finitype::spectra::{
    csv_rows, dim_bounds, min_formula as compose, periodic_dimension, point_dimension, tau_estimate, DimBounds,
    MinFormulaResult, MinFormulaSettings, Scope, CSV_HEADER,
};
use serde_json::{json, Value};
use std::path::Path;

fn fail(e: impl std::fmt::Display) -> Failure {
    Failure::Analysis(e.to_string())
}

/// A float rounded to twelve significant digits; non-finite values as strings.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(fmt_f64(x).parse::<f64>().expect("formatted float parses"))
    } else {
        json!(fmt_f64(x))
    }
}

/// Rounds to twelve significant digits, stepping outward so the printed
/// value still bounds `r` from the requested side.
fn outward(r: &Rat, up: bool) -> f64 {
    let x: f64 = fmt_f64(rat_to_f64(r)).parse().expect("formatted float parses");
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let ulp = 10f64.powi(x.abs().log10().floor() as i32 - 11);
    let Some(xr) = Rat::from_float(x) else { return x };
    match (up, xr.cmp(r)) {
        (true, std::cmp::Ordering::Less) => x + ulp,
        (false, std::cmp::Ordering::Greater) => x - ulp,
        _ => x,
    }
}

fn enclosure(e: &Enclosure) -> Value {
    let mut v = json!({ "lo": num(outward(&e.lo, false)), "hi": num(outward(&e.hi, true)) });
    if e.is_exact() && e.lo.denom().bits() <= 64 {
        v["exact"] = json!(fmt_rat(&e.lo));
    }
    v
}

fn interval(lo: f64, hi: f64, tag: &str) -> Value {
    json!({ "lo": num(lo), "hi": num(hi), "tag": tag })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn tool() -> Value {
    json!({ "name": "finitype", "version": env!("CARGO_PKG_VERSION") })
}

fn graph(cfg: &AnalysisConfig) -> Result<TransitionGraph, Failure> {
    explore(&cfg.ifs, &cfg.caps).map_err(fail)
}

fn finite(cfg: &AnalysisConfig) -> Result<(TransitionGraph, LoopStructure), Failure> {
    let g = graph(cfg)?;
    if let Verdict::CapExceeded(m) = g.verdict() {
        return Err(Failure::Analysis(format!("not of finite type within the caps ({m})")));
    }
    let ls = loop_classes(&g).map_err(fail)?;
    Ok((g, ls))
}

fn settings(cfg: &AnalysisConfig) -> MinFormulaSettings {
    MinFormulaSettings {
        k_max: cfg.spectra.k_max,
        budget: cfg.spectra.node_budget,
        ..Default::default()
    }
}

fn bounds_json(b: &DimBounds) -> Value {
    let tag = if b.exact { "exact" } else { "bracket" };
    json!({
        "d_min": interval(b.d_min.0, b.d_min.1, tag),
        "d_max": interval(b.d_max.0, b.d_max.1, tag),
        "exact": b.exact,
        "cycles_checked": b.cycles_checked,
        "method": b.method,
    })
}

fn classes_json(cfg: &AnalysisConfig, g: &TransitionGraph, ls: &LoopStructure) -> Result<Vec<Value>, Failure> {
    let set = settings(cfg);
    let mut out = Vec::new();
    for (k, c) in ls.classes.iter().enumerate() {
        let b = dim_bounds(&cfg.ifs, g, ls, k, set.cycle_budget, set.path_depth, set.budget).map_err(fail)?;
        let inc = incidence(g, &c.members).map_err(fail)?;
        let mut v = json!({
            "index": k,
            "members": c.members,
            "size": c.members.len(),
            "matrix_dim": c.members.iter().map(|&m| g.dim(m)).collect::<Vec<_>>(),
            "maximal": c.maximal,
            "essential": c.essential,
            "simple": c.simple,
            "admits_interior": c.admits_interior,
            "dimension_bounds": bounds_json(&b),
            "incidence": {
                "sp_i": enclosure(&inc.sp_i),
                "sp_j": enclosure(&inc.sp_j),
                "box_dimension": interval(inc.box_dim.0, inc.box_dim.1, "enclosure"),
            },
        });
        if let Some(cy) = &c.cycle {
            let p = periodic_dimension(&cfg.ifs, g, cy).map_err(fail)?;
            v["cycle"] = json!(cy);
            v["periodic_dimension"] = json!({
                "value": interval(p.lo, p.hi, "enclosure"),
                "spectral_radius": enclosure(&p.sp),
                "symbolic": p.symbolic,
            });
        }
        out.push(v);
    }
    Ok(out)
}

fn certificate_json(cert: &PositivityCertificate) -> Value {
    let verdict = match &cert.verdict {
        CertVerdict::Certified => json!("certified"),
        CertVerdict::Unproven { path } => json!({ "unproven": path }),
    };
    let repairs: Vec<Value> = cert
        .repairs()
        .map(|(p, r)| {
            json!({
                "path": p.path,
                "repaired": r.path,
                "prefix_edges": r.prefix,
                "suffix_edges": r.suffix,
                "min_entry": fmt_rat(&r.min_entry),
            })
        })
        .collect();
    let pairs: Vec<Value> = cert
        .pairs
        .iter()
        .map(|p| {
            json!({
                "from": p.from,
                "to": p.to,
                "paths": p.paths.len(),
                "positive": p.paths.iter().filter(|c| c.positive()).count(),
            })
        })
        .collect();
    json!({
        "verdict": verdict,
        "repair_budget": cert.budget,
        "transition_paths": cert.pairs.iter().map(|p| p.paths.len()).sum::<usize>(),
        "pairs": pairs,
        "repairs": repairs,
    })
}

pub fn analyze(cfg: &AnalysisConfig) -> Result<(String, Option<String>), Failure> {
    let g = graph(cfg)?;
    let mut r = json!({
        "tool": tool(),
        "config": cfg.to_toml(),
        "vertices": g.len(),
        "edges": g.edge_count(),
        "distinct_matrices": g.matrices().len(),
        "consistency_checks": g.consistency_checked(),
    });
    match g.verdict() {
        Verdict::CapExceeded(m) => {
            r["verdict"] = json!("cap exceeded");
            r["detail"] = json!(m);
            r["finite_type"] = json!(false);
            return Ok((pretty(&r), Some(g.to_dot())));
        }
        Verdict::FiniteType => {
            r["verdict"] = json!("finite type");
            r["finite_type"] = json!(true);
        }
    }
    let ls = loop_classes(&g).map_err(fail)?;
    let cert = certify_min_formula(&g, &ls, cfg.certify_budget).map_err(fail)?;
    let all: Vec<usize> = (0..g.len()).collect();
    let support = incidence(&g, &all).map_err(fail)?;
    r["essential_class"] = json!(ls.essential);
    r["maximal_classes"] = json!(ls.classes.len());
    r["classes"] = Value::Array(classes_json(cfg, &g, &ls)?);
    r["min_formula_certificate"] = certificate_json(&cert);
    r["support_box_dimension"] = interval(support.box_dim.0, support.box_dim.1, "enclosure");
    Ok((pretty(&r), Some(g.to_dot())))
}

fn parse_scope(s: &str, g: &TransitionGraph, ls: &LoopStructure) -> Result<Scope, Failure> {
    match s {
        "root" => Ok(Scope::Root),
        "omega" => Ok(Scope::omega(g)),
        "essential" => Ok(Scope::Class(ls.essential)),
        _ => {
            let idx = s
                .strip_prefix("class:")
                .and_then(|x| x.parse::<usize>().ok())
                .ok_or_else(|| Failure::Usage(format!("unknown scope '{s}'")))?;
            if idx >= ls.classes.len() {
                return Err(Failure::Usage(format!(
                    "class {idx} out of range (0..{})",
                    ls.classes.len()
                )));
            }
            Ok(Scope::Class(idx))
        }
    }
}

fn composed_result(
    cfg: &AnalysisConfig,
    g: &TransitionGraph,
    ls: &LoopStructure,
) -> Result<(PositivityCertificate, MinFormulaResult), Failure> {
    let cert = certify_min_formula(g, ls, cfg.certify_budget).map_err(fail)?;
    let q = cfg.spectra.q_grid();
    let mf = compose(&cfg.ifs, g, ls, &cert, &q, &settings(cfg)).map_err(fail)?;
    Ok((cert, mf))
}

pub fn spectrum(cfg: &AnalysisConfig, scope: &str, composed: bool) -> Result<String, Failure> {
    let (g, ls) = finite(cfg)?;
    let scope = parse_scope(scope, &g, &ls)?;
    let q = cfg.spectra.q_grid();
    let est = tau_estimate(&g, &ls, &scope, &q, cfg.spectra.k_max, cfg.spectra.node_budget).map_err(fail)?;
    let extra = if composed {
        Some(composed_result(cfg, &g, &ls)?.1.composed)
    } else {
        None
    };
    let mut out = String::from(CSV_HEADER);
    if extra.is_some() {
        out.push_str(",composed");
    }
    out.push('\n');
    let per_q = est.levels.len();
    for (n, row) in csv_rows(&est).into_iter().enumerate() {
        out.push_str(&row);
        if let Some(c) = &extra {
            out.push(',');
            out.push_str(&fmt_f64(c[n / per_q]));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn dims(cfg: &AnalysisConfig, point: Option<&str>) -> Result<String, Failure> {
    let (g, ls) = finite(cfg)?;
    let mut r = json!({
        "tool": tool(),
        "config": cfg.to_toml(),
        "classes": classes_json(cfg, &g, &ls)?,
    });
    if let Some(p) = point {
        let x = cfg
            .ifs
            .field()
            .parse(p)
            .map_err(|e| Failure::Usage(format!("--point: {e}")))?;
        let d = point_dimension(&cfg.ifs, &g, &x, cfg.caps.depth).map_err(fail)?;
        let reps: Vec<Value> = d
            .representations
            .iter()
            .map(|(rep, pd)| {
                json!({
                    "path": rep.path,
                    "cycle": pd.cycle,
                    "value": interval(pd.lo, pd.hi, "enclosure"),
                    "symbolic": pd.symbolic,
                })
            })
            .collect();
        r["point"] = json!({ "x": x.render(), "local_dimension": num(d.value), "representations": reps });
    }
    Ok(pretty(&r))
}

pub fn min_formula(cfg: &AnalysisConfig) -> Result<String, Failure> {
    let (g, ls) = finite(cfg)?;
    let (cert, mf) = composed_result(cfg, &g, &ls)?;
    let grid: Vec<Value> = mf
        .q
        .iter()
        .enumerate()
        .map(|(i, q)| json!({ "q": num(*q), "composed": num(mf.composed[i]), "tau_essential": num(mf.tau_essential[i]) }))
        .collect();
    let r = json!({
        "tool": tool(),
        "config": cfg.to_toml(),
        "certificate": certificate_json(&cert),
        "label": mf.label.as_str(),
        "d": mf.d.map(num),
        "d_max_essential": { "value": num(mf.d_max_essential), "tag": "lower bound" },
        "q0": mf.q0.as_ref().map(|(lo, hi)| json!({ "lo": num(rat_to_f64(lo)), "hi": num(rat_to_f64(hi)), "tag": "bisection" })),
        "grid": grid,
    });
    Ok(pretty(&r))
}

fn obligation_json(o: &Obligation) -> Value {
    match o {
        Obligation::Edge { from, to, generator } => json!({ "edge": [from, to], "generator": generator }),
        Obligation::Entry { vertex, index } => json!({ "entry": index, "vertex": vertex }),
    }
}

pub fn cones(text: &str, path: &Path, cfg: Option<&AnalysisConfig>, rho: Option<&Rat>) -> Result<String, Failure> {
    let fx = parse_cone_fixture(text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let g = cfg.map(finite).transpose()?;
    let ln_rho = match (cfg, rho) {
        (Some(c), _) => Some(c.ifs.ln_rho_min()),
        (None, Some(r)) => Some(ln_rat(r)),
        (None, None) => None,
    };
    let cert = certify_cone_system(&fx.spec, &fx.matrices, &fx.entries, ln_rho.unwrap_or(f64::NAN)).map_err(fail)?;
    let verdict = match &cert.verdict {
        ConeVerdict::Certified => json!("certified"),
        ConeVerdict::Failed { first } => json!({ "failed": obligation_json(first) }),
    };
    let witnesses: Vec<Value> = cert
        .witnesses
        .iter()
        .map(|w| {
            json!({
                "obligation": obligation_json(&w.obligation),
                "target": w.target,
                "coeffs": w.coeffs.iter().map(fmt_rat).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut r = json!({
        "tool": tool(),
        "factor": fmt_rat(&cert.c),
        "verdict": verdict,
        "cones": fx.spec.cones.len(),
        "matrices": fx.matrices.len(),
        "entry_vectors": fx.entries.len(),
        "witnesses": witnesses,
        "failures": cert.failures.iter().map(obligation_json).collect::<Vec<_>>(),
        "reverified": cert.verify(&fx.spec),
    });
    if ln_rho.is_some() && cert.is_certified() {
        r["dimension_bound"] = json!({ "value": num(cert.bound), "tag": "upper bound, float evaluation" });
    }
    if let Some((g, _)) = &g {
        let m = match_fixture(g, &fx.matrices);
        r["cross_check"] = json!({
            "complete": m.is_complete(),
            "mapping": m.mapping.as_ref().map(|mp| mp.iter().map(|(f, (v, p))| json!({ "fixture": f, "vertex": v, "permutation": p })).collect::<Vec<_>>()),
            "unmatched": m.unmatched,
            "missing": m.missing,
        });
    }
    Ok(pretty(&r))
}

pub fn dot(cfg: &AnalysisConfig) -> Result<String, Failure> {
    Ok(graph(cfg)?.to_dot())
}
