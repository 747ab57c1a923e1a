use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::ExperimentConfig;
use crate::auxmetric::{agmon_field, aux_field, AuxKind};
use crate::classes::{certify, cross_checks, default_nc_centers, nc_critical, CertReport, Class};
use crate::cubature::Cube;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ineqlab::{envelope_fit, fp_failure, fp_library, nc_decay, poincare_ratio, small_scale_fit, Projector};
use crate::linalg::SymMat;
use crate::pde::{assemble, green_field, landscape, sandwich_constants, Boundary};
use crate::report::{write_aux_binary, write_distance_binary, write_green_binary, Bundle, Report, Row};
use crate::weights::MatrixWeight;

fn grid_for(cfg: &ExperimentConfig, w: &MatrixWeight) -> Result<Grid> {
    Grid::new(w.n(), cfg.grid.l, cfg.grid.n)
}

/// Grid indices from the config, or the node nearest the origin.
fn pole_for(cfg: &ExperimentConfig, g: &Grid) -> Result<usize> {
    match &cfg.field.pole {
        None => Ok(g.nearest(&vec![0.0; g.dim])),
        Some(idx) => {
            if idx.len() != g.dim || idx.iter().any(|&i| i >= g.npa) {
                return Err(Error::Config(format!("pole {idx:?} is not a node index of a {}-dimensional grid with {} nodes per axis", g.dim, g.npa)));
            }
            Ok(g.index(idx))
        }
    }
}

fn parse_class(name: &str, p: f64) -> Result<Class> {
    Ok(match name {
        "bp" => Class::Bp { p },
        "bp-det" | "bp_det" => Class::BpDet { p },
        "nd" => Class::Nd,
        "ainf" => Class::Ainf,
        "a2inf" => Class::A2inf,
        "apinf" => Class::Apinf { p },
        "nc" => Class::Nc,
        "rbm" => Class::Rbm,
        other => {
            return Err(Error::Config(format!(
                "unknown class '{other}' (expected bp, bp-det, nd, ainf, a2inf, apinf, nc, rbm or cross)"
            )))
        }
    })
}

fn cert_rows(rows: &mut Vec<Row>, label: &str, r: &CertReport) {
    let q = format!("{}_cube", r.class_name);
    for c in &r.records {
        let mut x = c.center.clone();
        x.push(c.r);
        x.push(c.refinement as f64);
        rows.push(Row::new("certify", label, &q, &x, c.value));
    }
    for (k, v) in r.history.iter().enumerate() {
        rows.push(Row::new("certify", label, &format!("{}_history", r.class_name), &[k as f64], *v));
    }
    rows.push(Row::scalar("certify", label, &format!("{}_estimate", r.class_name), r.constant_estimate));
    rows.push(Row::flag("certify", label, &format!("{}_pass", r.class_name), r.pass));
}

pub fn certify_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let params = &cfg.certify;
    let mut rows = Vec::new();
    let mut out = serde_json::Map::new();
    for (label, w) in cfg.resolve_weights()? {
        eprintln!("certify {} on {label}", params.class);
        let value = match params.class.as_str() {
            "cross" => {
                let r = cross_checks(&w, params.p, &cfg.family, &cfg.cert);
                for o in &r.outcomes {
                    rows.push(Row::flag("certify", &label, &format!("{}_pass", o.label), o.pass));
                    rows.push(Row::scalar("certify", &label, &format!("{}_estimate", o.label), o.estimate.unwrap_or(f64::NAN)));
                }
                for a in &r.agreements {
                    rows.push(Row::flag("certify", &label, &format!("agreement_{}", a.name), a.holds));
                }
                rows.push(Row::scalar("certify", &label, "disagreements", r.disagreements as f64));
                json!(r)
            }
            "nc" if !params.nc_all_cubes => {
                let r = nc_critical(&w, &default_nc_centers(w.n(), params.nc_centers), &cfg.cert)?;
                cert_rows(&mut rows, &label, &r);
                json!(r)
            }
            other => {
                let r = certify(&parse_class(other, params.p)?, &w, &cfg.family, &cfg.cert)?;
                cert_rows(&mut rows, &label, &r);
                json!(r)
            }
        };
        out.insert(label, value);
    }
    bundle.csv("certify.csv", &rows)?;
    report.section("certify", &out)
}

pub fn aux_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    let mut out = serde_json::Map::new();
    for (label, w) in cfg.resolve_weights()? {
        let g = grid_for(cfg, &w)?;
        eprintln!("aux {:?} on {label}: {} nodes", cfg.field.kind, g.len());
        let f = aux_field(&w, &g, &cfg.field.kind.kind(&w), &cfg.aux)?;
        write_aux_binary(&bundle.path(&format!("aux_{label}.bin")), &f)?;
        for (k, v) in f.values.iter().enumerate() {
            rows.push(Row::new("aux", &label, f.kind.label(), &g.point(k), *v));
        }
        let (lo, hi) = f.values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        out.insert(label, json!({"kind": f.kind, "nodes": g.len(), "h": g.h(), "min": lo, "max": hi}));
    }
    bundle.csv("aux.csv", &rows)?;
    report.section("aux", &out)
}

pub fn agmon_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    let mut out = serde_json::Map::new();
    for (label, w) in cfg.resolve_weights()? {
        let g = grid_for(cfg, &w)?;
        let source = pole_for(cfg, &g)?;
        eprintln!("agmon {:?} on {label}: {} nodes", cfg.field.kind, g.len());
        let f = aux_field(&w, &g, &cfg.field.kind.kind(&w), &cfg.aux)?;
        let d = agmon_field(&f, source, cfg.field.path_norm);
        write_distance_binary(&bundle.path(&format!("agmon_{label}.bin")), &d, &f)?;
        for (k, v) in d.values.iter().enumerate() {
            rows.push(Row::new("agmon", &label, &format!("distance_{}", d.kind), &g.point(k), *v));
        }
        let max = d.values.iter().cloned().fold(0.0, f64::max);
        out.insert(label, json!({"source": g.point(source), "norm": d.norm, "kind": d.kind, "max_distance": max}));
    }
    bundle.csv("agmon.csv", &rows)?;
    report.section("agmon", &out)
}

pub fn green_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    let mut out = serde_json::Map::new();
    for (label, w) in cfg.resolve_weights()? {
        let g = grid_for(cfg, &w)?;
        let pole = pole_for(cfg, &g)?;
        eprintln!("green on {label}: {} nodes, d = {}", g.len(), w.d());
        let op = assemble(&w, &cfg.field.coefficient, &g, &cfg.field.boundary)?;
        let gf = green_field(&op, pole)?;
        write_green_binary(&bundle.path(&format!("green_{label}.bin")), &gf)?;
        // CSV slice: the coordinate plane through the pole orthogonal to the last axis.
        let last = g.multi(pole)[g.dim - 1];
        for k in (0..g.len()).filter(|&k| g.multi(k)[g.dim - 1] == last) {
            let x = g.point(k);
            rows.push(Row::new("green", &label, "norm", &x, gf.norm(k)));
            for i in 0..gf.d {
                for j in 0..gf.d {
                    rows.push(Row::new("green", &label, &format!("g{i}{j}"), &x, gf.entry(k, i, j)));
                }
            }
        }
        out.insert(label, json!({"pole": g.multi(pole), "pole_point": g.point(pole), "residual": gf.residual, "boundary": cfg.field.boundary}));
    }
    bundle.csv("green.csv", &rows)?;
    report.section("green", &out)
}

pub fn decay_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    let mut out = serde_json::Map::new();
    for (label, w) in cfg.resolve_weights()? {
        let g = grid_for(cfg, &w)?;
        let pole = pole_for(cfg, &g)?;
        eprintln!("decay on {label}: {} nodes", g.len());
        let f = aux_field(&w, &g, &cfg.field.kind.kind(&w), &cfg.aux)?;
        let gv = green_field(&assemble(&w, &cfg.field.coefficient, &g, &cfg.field.boundary)?, pole)?;
        let fit = envelope_fit(&gv, &agmon_field(&f, pole, cfg.decay.path_norm), &Projector::Norm)?;
        for s in &fit.samples {
            rows.push(Row::new("decay", &label, "green_norm", &[s.sep, s.dist], s.value));
        }
        rows.push(Row::scalar("decay", &label, "eps_hat", fit.eps_hat));
        rows.push(Row::scalar("decay", &label, "r2", fit.r2));
        let mut entry = json!({"envelope": {
            "eps_hat": fit.eps_hat, "c_hat": fit.c_hat, "r2": fit.r2, "dist_range": fit.dist_range,
            "samples": fit.samples.len(), "nonpositive": fit.nonpositive,
            "lower_c_hat": fit.lower_c_hat, "coverage": fit.coverage,
        }});
        if cfg.decay.small_scale {
            let gs = Grid::new(w.n(), cfg.decay.small_scale_grid.l, cfg.decay.small_scale_grid.n)?;
            let ps = gs.nearest(&vec![0.0; gs.dim]);
            let boundary = Boundary::Radiation { center: gs.point(ps) };
            let zero = MatrixWeight::constant(w.n(), SymMat::zeros(w.d()))?;
            let upper = aux_field(&w, &gs, &AuxKind::Upper, &cfg.aux)?;
            let sv = green_field(&assemble(&w, &cfg.field.coefficient, &gs, &boundary)?, ps)?;
            let s0 = green_field(&assemble(&zero, &cfg.field.coefficient, &gs, &boundary)?, ps)?;
            let ss = small_scale_fit(&sv, &s0, &upper, cfg.decay.p)?;
            for (t, v) in &ss.samples {
                rows.push(Row::new("decay", &label, "small_scale_difference", &[*t], *v));
            }
            rows.push(Row::scalar("decay", &label, "small_scale_slope", ss.slope));
            entry["small_scale"] = json!({
                "p": ss.p, "q": ss.q, "alpha": ss.alpha, "slope": ss.slope, "beta": ss.beta,
                "c_hat": ss.c_hat, "coverage": ss.coverage, "samples": ss.samples.len(), "pass": ss.pass,
            });
        }
        out.insert(label, entry);
    }
    bundle.csv("decay.csv", &rows)?;
    report.section("decay", &out)
}

pub fn fp_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    let mut out = serde_json::Map::new();
    for (label, w) in cfg.resolve_weights()? {
        let g = grid_for(cfg, &w)?;
        let mut forms = serde_json::Map::new();
        for &form in &cfg.fp.forms {
            eprintln!("fp {} on {label}", form.label());
            let r = fp_library(&w, &g, form, &cfg.aux)?;
            for q in &r.ratios {
                rows.push(Row::scalar("fp", &label, &format!("{}_{}", form.label(), q.label), q.ratio));
            }
            forms.insert(form.label().into(), json!({"max": r.max, "min": r.min, "ratios": r.ratios}));
        }
        out.insert(label, forms.into());
    }
    bundle.csv("fp.csv", &rows)?;
    report.section("fp", &out)
}

/// Fixed test functions for the Poincaré harness; each has `d` components.
fn poincare_tests(d: usize) -> Vec<(&'static str, Box<dyn Fn(&[f64]) -> Vec<f64>>)> {
    let last = d - 1;
    vec![
        (
            "linear",
            Box::new(move |x: &[f64]| {
                let mut u = vec![0.0; d];
                u[0] = x[0];
                u
            }),
        ),
        (
            "quadratic",
            Box::new(move |x: &[f64]| {
                let mut u = vec![0.0; d];
                u[last] = x.iter().map(|v| v * v).sum();
                u
            }),
        ),
        (
            "oscillating",
            Box::new(move |x: &[f64]| {
                let mut u = vec![0.0; d];
                u[0] += x[0].sin() * x[1].cos();
                u[last] += x[x.len() - 1];
                u
            }),
        ),
    ]
}

pub fn poincare_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    let mut out = serde_json::Map::new();
    for (label, w) in cfg.resolve_weights()? {
        eprintln!("poincare on {label}");
        let mut entries = Vec::new();
        for (center, r) in &cfg.poincare.cubes {
            if center.len() != w.n() {
                return Err(Error::Config(format!("poincare cube center {center:?} has the wrong dimension")));
            }
            let q = Cube::new(center.clone(), *r);
            let mut x = center.clone();
            x.push(*r);
            for (name, u) in poincare_tests(w.d()) {
                let pr = poincare_ratio(&w, &q, u.as_ref(), cfg.poincare.level)?;
                rows.push(Row::new("poincare", &label, name, &x, pr.ratio));
                entries.push(json!({"center": center, "r": r, "test": name, "lhs": pr.lhs, "rhs": pr.rhs, "ratio": pr.ratio}));
            }
        }
        out.insert(label, entries.into());
    }
    bundle.csv("poincare.csv", &rows)?;
    report.section("poincare", &out)
}

pub fn counterexample_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let params = &cfg.counterexample;
    let mut rows = Vec::new();
    if params.fp {
        let mut out = serde_json::Map::new();
        for (label, w) in cfg.resolve_weights()? {
            eprintln!("fefferman-phong ratio on {label}");
            let f = fp_failure(&w, &params.radii, &cfg.aux)?;
            for r in &f.rows {
                rows.push(Row::new("counterexample_fp", &label, "ratio", &[r.r], r.ratio));
            }
            rows.push(Row::scalar("counterexample_fp", &label, "slope", f.slope));
            out.insert(label, json!(f));
        }
        report.section("counterexample_fp", &out)?;
    }
    if params.nc {
        eprintln!("nc witness along critical cubes");
        let nc = nc_decay(&params.masses, &cfg.cert.rule)?;
        for r in &nc {
            rows.push(Row::new("counterexample_nc", "appendix_a", "witness", &[r.m], r.witness));
        }
        report.section("counterexample_nc", &nc)?;
    }
    bundle.csv("counterexample.csv", &rows)
}

pub fn landscape_cmd(cfg: &ExperimentConfig, bundle: &mut Bundle, report: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    let mut out = serde_json::Map::new();
    for (label, w) in cfg.resolve_weights()? {
        let g = grid_for(cfg, &w)?;
        let probes: Vec<Vec<f64>> = if cfg.landscape.points.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let l = cfg.grid.l;
            (0..cfg.landscape.probes).map(|_| (0..g.dim).map(|_| rng.random_range(-0.5 * l..0.5 * l)).collect()).collect()
        } else {
            cfg.landscape.points.clone()
        };
        if probes.iter().any(|p| p.len() != g.dim) {
            return Err(Error::Config("landscape probe has the wrong dimension".into()));
        }
        eprintln!("landscape on {label}: {} probes", probes.len());
        let op = assemble(&w, &cfg.field.coefficient, &g, &cfg.field.boundary)?;
        let ls = probes.iter().map(|p| landscape(&op, &w, g.nearest(p), &cfg.aux)).collect::<Result<Vec<_>>>()?;
        for l in &ls {
            rows.push(Row::new("landscape", &label, "u", &l.point, l.u));
            rows.push(Row::new("landscape", &label, "lower_inv2", &l.point, l.lower_inv2));
            rows.push(Row::new("landscape", &label, "upper_inv2", &l.point, l.upper_inv2));
        }
        let (c1, c2) = sandwich_constants(&ls);
        rows.push(Row::scalar("landscape", &label, "c1", c1));
        rows.push(Row::scalar("landscape", &label, "c2", c2));
        out.insert(label, json!({"c1": c1, "c2": c2, "probes": ls}));
    }
    bundle.csv("landscape.csv", &rows)?;
    report.section("landscape", &out)
}
