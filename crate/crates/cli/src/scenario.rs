//! Scenario files: a TOML description of the equation parameters, the
//! forcing, and per-experiment settings.
//!
//! A scenario must pass parameter derivation before any run; scenarios with
//! beta > 0 must additionally satisfy the forcing hypotheses. beta = 0 is
//! the designated unperturbed baseline and is exempt from the hypothesis
//! gate.

use plaposc::dynamics::{ForcingSpec, Harmonic};
use plaposc::jumping::JumpingParams;
use plaposc::reduction::{self, EstimateKind};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub forcing: ForcingTable,
    #[serde(default)]
    pub simulate: SimulateTable,
    #[serde(default)]
    pub poincare: PoincareTable,
    #[serde(default)]
    pub rotation: RotationTable,
    #[serde(default)]
    pub twist: TwistTable,
    #[serde(default)]
    pub curves: CurvesTable,
    #[serde(default)]
    pub bounded: BoundedTable,
    #[serde(default)]
    pub scan: ScanTable,
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ForcingTable {
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub harmonics: Vec<HarmonicTable>,
}

fn default_gamma() -> f64 {
    0.4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicTable {
    pub k: u32,
    pub c: f64,
    #[serde(default)]
    pub phi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTable {
    pub periods: usize,
    pub samples_per_period: usize,
    /// Initial amplitude |x| + |x'|.
    pub amp0: f64,
    pub theta0: f64,
}

impl Default for SimulateTable {
    fn default() -> Self {
        Self {
            periods: 20,
            samples_per_period: 64,
            amp0: 100.0,
            theta0: 0.9,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareTable {
    pub iterates: usize,
    pub amp0: f64,
    pub theta0: f64,
}

impl Default for PoincareTable {
    fn default() -> Self {
        Self {
            iterates: 500,
            amp0: 100.0,
            theta0: 0.9,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationTable {
    pub iterates: usize,
    pub amp0: f64,
    pub theta0: f64,
}

impl Default for RotationTable {
    fn default() -> Self {
        Self {
            iterates: 1000,
            amp0: 100.0,
            theta0: 0.9,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistTable {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    pub theta_count: usize,
    pub window: usize,
}

impl Default for TwistTable {
    fn default() -> Self {
        Self {
            r_min: 1e2,
            r_max: 1e4,
            points: 9,
            theta_count: 4,
            window: 8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesTable {
    pub iterates: usize,
    pub count: usize,
    pub amp_min: f64,
    pub amp_max: f64,
    pub degree: usize,
    pub residual_threshold: f64,
}

impl Default for CurvesTable {
    fn default() -> Self {
        Self {
            iterates: 1000,
            count: 10,
            amp_min: 1e2,
            amp_max: 1e3,
            degree: 16,
            residual_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundedTable {
    pub ics: usize,
    pub periods: usize,
    pub amp_min: f64,
    pub amp_max: f64,
}

impl Default for BoundedTable {
    fn default() -> Self {
        Self {
            ics: 20,
            periods: 500,
            amp_min: 1e2,
            amp_max: 1e3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanTable {
    pub which: Vec<String>,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ScanTable {
    fn default() -> Self {
        Self {
            which: vec![
                "potential-scaling-k0".into(),
                "h-linearity".into(),
                "inversion-remainder".into(),
            ],
            lo: 1e2,
            hi: 1e5,
        }
    }
}

/// A scenario validated against the model: derived parameters, constructed
/// forcing, and (for beta > 0) a hypothesis report.
pub struct ValidatedScenario {
    pub scenario: Scenario,
    pub params: JumpingParams,
    pub forcing: ForcingSpec,
    pub hypothesis: Option<reduction::HypothesisReport>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("scenario parse error: {e}"))
    }

    pub fn validate(self) -> Result<ValidatedScenario, plaposc::Error> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(plaposc::Error::Parameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        let params = JumpingParams::derive(self.a, self.b, self.p)?;
        let harmonics: Vec<Harmonic> = self
            .forcing
            .harmonics
            .iter()
            .map(|h| Harmonic {
                k: h.k,
                amplitude: h.c,
                phase: h.phi,
            })
            .collect();
        let forcing = ForcingSpec::new(self.forcing.beta, self.forcing.gamma, harmonics)?;
        let hypothesis = if forcing.beta() > 0.0 {
            Some(reduction::hypothesis_check(&forcing, self.p)?)
        } else {
            None
        };
        Ok(ValidatedScenario {
            scenario: self,
            params,
            forcing,
            hypothesis,
        })
    }
}

pub fn parse_scan_kinds(tags: &[String]) -> Result<Vec<EstimateKind>, plaposc::Error> {
    tags.iter()
        .map(|t| {
            EstimateKind::parse(t).ok_or_else(|| {
                plaposc::Error::Parameter(format!(
                    "unknown scan kind `{t}`; expected one of potential-scaling-k0/1/2, \
                     g-scaling, h-linearity, inversion-remainder, inverse-derivative-k1/2"
                ))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"
p = 3.0
a = 8.0
b = 1.0
tol = 1e-10
seed = 42

[forcing]
beta = 1.0
gamma = 0.4
harmonics = [ { k = 1, c = 0.5 } ]
"#;

    #[test]
    fn reference_scenario_validates() {
        let sc = Scenario::parse(REFERENCE).unwrap();
        let v = sc.validate().unwrap();
        assert!((v.params.omega() - 4.0 / 3.0).abs() < 1e-14);
        assert!(v.hypothesis.is_some());
    }

    #[test]
    fn baseline_without_forcing_is_exempt() {
        let sc = Scenario::parse("p = 3.0\na = 8.0\nb = 1.0\n").unwrap();
        let v = sc.validate().unwrap();
        assert!(v.forcing.is_zero());
        assert!(v.hypothesis.is_none());
    }

    #[test]
    fn hypothesis_gate_rejects_bad_gamma() {
        let text = "p = 3.0\na = 8.0\nb = 1.0\n[forcing]\nbeta = 1.0\ngamma = 0.5\n";
        let sc = Scenario::parse(text).unwrap();
        assert!(matches!(sc.validate(), Err(plaposc::Error::Hypothesis(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(Scenario::parse("p = 3.0\na = 8.0\nb = 1.0\nbogus = 1\n").is_err());
    }
}
