use serde::Serialize;

use super::{certify, CertReport, CertSettings, Class};
use crate::cubature::{CubeFamily, QUAD_TOL};
use crate::weights::{MatrixWeight, ScalarWeight};

/// A certifier run reduced to pass/fail; errors count as failure and keep their message.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub label: String,
    pub pass: bool,
    pub estimate: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub report: Option<CertReport>,
}

/// One implication of the class matrix and whether the data agree with it.
#[derive(Clone, Debug, Serialize)]
pub struct Agreement {
    pub name: String,
    pub statement: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossReport {
    pub p: f64,
    pub outcomes: Vec<Outcome>,
    pub agreements: Vec<Agreement>,
    pub disagreements: usize,
}

impl CrossReport {
    pub fn outcome(&self, label: &str) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }
}

fn run(label: &str, class: Class, w: &MatrixWeight, family: &CubeFamily, s: &CertSettings) -> Outcome {
    match certify(&class, w, family, s) {
        Ok(r) => Outcome { label: label.into(), pass: r.pass, estimate: Some(r.constant_estimate), error: None, report: Some(r) },
        Err(e) => Outcome { label: label.into(), pass: false, estimate: None, error: Some(e.to_string()), report: None },
    }
}

/// Runs the implied-membership matrix on `w`:
/// (i) B_p gives scalar B_p of λ_max with constant ≤ d^{3−1/p} C_V;
/// (ii) B_p ∩ A∞ gives scalar B_p of λ_min;
/// (iii) for ND weights A_{2,∞} ⇔ A∞ ⇔ (RBM ∧ scalar A∞ of det^{1/d});
/// (iv) A_{2p,∞} of W^p ⇔ (A_{2,∞} ∧ B_p).
pub fn cross_checks(w: &MatrixWeight, p: f64, family: &CubeFamily, s: &CertSettings) -> CrossReport {
    let n = w.n();
    let d = w.d() as f64;
    let of = Box::new(w.clone());
    let scalar = |sw: ScalarWeight| MatrixWeight::scalar(n, sw).expect("derived scalar weight is valid");
    let lmax = scalar(ScalarWeight::MaxEigen { of: of.clone() });
    let lmin = scalar(ScalarWeight::MinEigen { of: of.clone() });
    let droot = scalar(ScalarWeight::DetRoot { of });

    let outcomes = vec![
        run("bp", Class::Bp { p }, w, family, s),
        run("nd", Class::Nd, w, family, s),
        run("ainf", Class::Ainf, w, family, s),
        run("a2inf", Class::A2inf, w, family, s),
        run("rbm", Class::Rbm, w, family, s),
        run("apinf", Class::Apinf { p }, w, family, s),
        run("bp_lambda_max", Class::Bp { p }, &lmax, family, s),
        run("bp_lambda_min", Class::Bp { p }, &lmin, family, s),
        run("scalar_ainf_det_root", Class::ScalarAinf, &droot, family, s),
    ];
    let get = |l: &str| outcomes.iter().find(|o| o.label == l).expect("outcome present");
    let (bp, nd, ainf, a2inf, rbm, apinf) = (get("bp"), get("nd"), get("ainf"), get("a2inf"), get("rbm"), get("apinf"));
    let (bmax, bmin, sdet) = (get("bp_lambda_max"), get("bp_lambda_min"), get("scalar_ainf_det_root"));

    let mut agreements = Vec::new();
    let factor = d.powf(3.0 - 1.0 / p);
    let (holds, detail) = match (bp.pass, bp.estimate, bmax.estimate) {
        (true, Some(cv), Some(cmax)) => {
            (bmax.pass && cmax <= factor * cv * (1.0 + QUAD_TOL), format!("C(lambda_max) = {cmax:.6}, bound = {:.6}", factor * cv))
        }
        (true, _, _) => (false, "scalar certifier failed".into()),
        _ => (true, "premise fails".into()),
    };
    agreements.push(Agreement {
        name: "i".into(),
        statement: "B_p implies scalar B_p of lambda_max with constant <= d^(3-1/p) C_V".into(),
        holds,
        detail,
    });
    let premise = bp.pass && ainf.pass;
    agreements.push(Agreement {
        name: "ii".into(),
        statement: "B_p and A_inf imply scalar B_p of lambda_min".into(),
        holds: !premise || bmin.pass,
        detail: if premise { format!("scalar B_p of lambda_min pass = {}", bmin.pass) } else { "premise fails".into() },
    });
    let rhs = rbm.pass && sdet.pass;
    agreements.push(Agreement {
        name: "iii".into(),
        statement: "for ND weights A_2inf <=> A_inf <=> (RBM and scalar A_inf of det^(1/d))".into(),
        holds: !nd.pass || (a2inf.pass == ainf.pass && ainf.pass == rhs),
        detail: format!("nd={}, a2inf={}, ainf={}, rbm={}, scalar_ainf={}", nd.pass, a2inf.pass, ainf.pass, rbm.pass, sdet.pass),
    });
    agreements.push(Agreement {
        name: "iv".into(),
        statement: "A_(2p,inf) of W^p <=> (A_2inf and B_p)".into(),
        holds: apinf.pass == (a2inf.pass && bp.pass),
        detail: format!("apinf={}, a2inf={}, bp={}", apinf.pass, a2inf.pass, bp.pass),
    });
    let disagreements = agreements.iter().filter(|a| !a.holds).count();
    CrossReport { p, outcomes, agreements, disagreements }
}
