use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::auxmetric::{AuxKind, AuxSettings, PathNorm};
use crate::classes::CertSettings;
use crate::cubature::{CubeFamily, QuadratureRule};
use crate::error::{Error, Result};
use crate::ineqlab::FpForm;
use crate::pde::{Boundary, Coefficient};
use crate::suite::{GridSpec, SuiteConfig};
use crate::weights::{MatrixWeight, WeightDoc};

/// A weight given by catalog name, by path to a JSON weight document, or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightRef {
    Name(String),
    Inline(MatrixWeight),
}

impl WeightRef {
    /// Catalog names win over file paths.
    pub fn resolve(&self, n: usize) -> Result<(String, MatrixWeight)> {
        match self {
            WeightRef::Inline(w) => Ok(("inline".into(), w.clone())),
            WeightRef::Name(s) => {
                if let Some((name, w)) = MatrixWeight::catalog(n).into_iter().find(|(k, _)| k == s) {
                    return Ok((name.into(), w));
                }
                let path = Path::new(s);
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("weight '{s}' is neither a catalog name nor a readable file: {e}")))?;
                let doc: WeightDoc = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("weight file {}: {e}", path.display())))?;
                let label = path.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| s.clone());
                Ok((label, MatrixWeight::try_from(doc)?))
            }
        }
    }
}

/// Which auxiliary function `aux`, `agmon` and `decay` use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AuxChoice {
    Lower,
    Upper,
    /// m(·, |V|).
    Norm,
}

impl AuxChoice {
    pub fn kind(self, w: &MatrixWeight) -> AuxKind {
        match self {
            AuxChoice::Lower => AuxKind::Lower,
            AuxChoice::Upper => AuxKind::Upper,
            AuxChoice::Norm => FpForm::Norm.aux_kind(w),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyParams {
    /// bp, bp-det, nd, ainf, a2inf, apinf, nc, rbm or cross.
    pub class: String,
    pub p: f64,
    /// NC on critical-scale cubes (default) or on every family cube.
    pub nc_all_cubes: bool,
    pub nc_centers: usize,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams { class: "bp".into(), p: 2.0, nc_all_cubes: false, nc_centers: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldParams {
    pub kind: AuxChoice,
    pub path_norm: PathNorm,
    /// Source (agmon, decay) or pole (green) in grid indices; default is the node nearest the origin.
    pub pole: Option<Vec<usize>>,
    pub boundary: Boundary,
    pub coefficient: Coefficient,
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams {
            kind: AuxChoice::Lower,
            path_norm: PathNorm::Linf,
            pole: None,
            boundary: Boundary::Dirichlet,
            coefficient: Coefficient::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayParams {
    /// B_p exponent of the weight; the small-scale bound uses q = min(p, 2.9), so any p ≥ 2.9 is equivalent.
    pub p: f64,
    /// Path length for the fitted distance; ℓ₂ tracks the isotropic decay of Γ.
    pub path_norm: PathNorm,
    /// Also fit the small-scale difference bound on a radiation-boundary grid.
    pub small_scale: bool,
    pub small_scale_grid: GridSpec,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams { p: 3.0, path_norm: PathNorm::L2, small_scale: true, small_scale_grid: GridSpec { l: 1.5, n: 48 } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpParams {
    pub forms: Vec<FpForm>,
}

impl Default for FpParams {
    fn default() -> Self {
        FpParams { forms: vec![FpForm::Lower, FpForm::Norm, FpForm::Upper] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareParams {
    /// Cubes as (center, half side).
    pub cubes: Vec<(Vec<f64>, f64)>,
    /// Gauss nodes per axis are 4·2^level.
    pub level: u32,
}

impl Default for PoincareParams {
    fn default() -> Self {
        PoincareParams { cubes: vec![(vec![0.0; 3], 0.5), (vec![1.0, 0.0, 0.0], 0.5), (vec![2.0, 1.0, -1.0], 1.0)], level: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleParams {
    pub fp: bool,
    pub nc: bool,
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        CounterexampleParams { fp: true, nc: true, radii: vec![10.0, 20.0, 40.0, 80.0], masses: vec![4.0, 9.0, 16.0, 25.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeParams {
    /// Probe points; when empty, `probes` points are drawn in [−L/2, L/2]ⁿ from the seed.
    pub points: Vec<Vec<f64>>,
    pub probes: usize,
}

impl Default for LandscapeParams {
    fn default() -> Self {
        LandscapeParams { points: Vec::new(), probes: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllParams {
    /// Check ids to run; `None` runs all twelve.
    pub only: Option<Vec<u32>>,
    /// Reduced sizes for smoke runs.
    pub quick: bool,
    /// Seconds per stage; a stage that exceeds it aborts the run.
    pub stage_budget: f64,
}

impl Default for AllParams {
    fn default() -> Self {
        AllParams { only: None, quick: false, stage_budget: 900.0 }
    }
}

/// Everything a run depends on; the resolved value is embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub weights: Vec<WeightRef>,
    /// Space dimension used for catalog weights.
    pub n: usize,
    pub family: CubeFamily,
    pub grid: GridSpec,
    /// Overrides the rules inside `cert` and `aux` when present.
    pub quadrature: Option<QuadratureRule>,
    pub cert: CertSettings,
    pub aux: AuxSettings,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; `None` uses every logical core.
    pub threads: Option<usize>,
    pub certify: CertifyParams,
    pub field: FieldParams,
    pub decay: DecayParams,
    pub fp: FpParams,
    pub poincare: PoincareParams,
    pub counterexample: CounterexampleParams,
    pub landscape: LandscapeParams,
    pub all: AllParams,
    pub suite: Option<SuiteConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            weights: vec![WeightRef::Name("appendix_a".into())],
            n: 3,
            family: CubeFamily::Dyadic { half_width: 2.0, depth: 0 },
            grid: GridSpec { l: 3.0, n: 48 },
            quadrature: None,
            cert: CertSettings::default(),
            aux: AuxSettings::default(),
            seed: 2024,
            out: PathBuf::from("out"),
            threads: None,
            certify: CertifyParams::default(),
            field: FieldParams::default(),
            decay: DecayParams::default(),
            fp: FpParams::default(),
            poincare: PoincareParams::default(),
            counterexample: CounterexampleParams::default(),
            landscape: LandscapeParams::default(),
            all: AllParams::default(),
            suite: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    /// Pushes shared settings into the nested ones: the quadrature override and the seed.
    pub fn normalize(&mut self) {
        if let Some(rule) = self.quadrature {
            self.cert.rule = rule;
            self.cert.aux.rule = rule;
            self.aux.rule = rule;
        }
        self.cert.seed = self.seed;
        if let Some(s) = self.suite.as_mut() {
            s.seed = self.seed;
        }
    }

    pub fn resolve_weights(&self) -> Result<Vec<(String, MatrixWeight)>> {
        if self.weights.is_empty() {
            return Err(Error::Config("no weight given".into()));
        }
        let mut out: Vec<(String, MatrixWeight)> = Vec::new();
        for (i, r) in self.weights.iter().enumerate() {
            let (mut label, w) = r.resolve(self.n)?;
            if out.iter().any(|(l, _)| *l == label) {
                label = format!("{label}_{i}");
            }
            out.push((label, w));
        }
        Ok(out)
    }

    /// The suite settings `all` runs with.
    pub fn suite_config(&self) -> SuiteConfig {
        let mut s = self.suite.clone().unwrap_or_else(|| if self.all.quick { SuiteConfig::quick() } else { SuiteConfig::default() });
        s.seed = self.seed;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sed": 3}"#).is_err());
        let c: ExperimentConfig = serde_json::from_str(r#"{"seed": 3, "weights": ["identity"]}"#).unwrap();
        assert_eq!((c.seed, c.resolve_weights().unwrap()[0].0.as_str()), (3, "identity"));
    }

    #[test]
    fn inline_weight_resolves() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"weights": [{"kind": "appendix_a", "n": 3, "d": 2}, "appendix_a"]}"#).unwrap();
        let ws = c.resolve_weights().unwrap();
        assert_eq!(ws[0].1, ws[1].1);
        assert!(WeightRef::Name("no_such_weight".into()).resolve(3).is_err());
    }
}
