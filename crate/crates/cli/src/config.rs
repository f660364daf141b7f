//! Experiment configuration: the JSON file format and its validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use debiasot::io::{CostJson, MeasureJson};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CheckDebias,
    Sinkhorn,
    Divergence,
    Uot,
    Mmd,
    Decompose,
    Interpolate,
    GaussianIdentity,
    SaddleCheck,
    KlLemmas,
    NegdefRoundtrip,
    Counterexample,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::CheckDebias => "check-debias",
            Self::Sinkhorn => "sinkhorn",
            Self::Divergence => "divergence",
            Self::Uot => "uot",
            Self::Mmd => "mmd",
            Self::Decompose => "decompose",
            Self::Interpolate => "interpolate",
            Self::GaussianIdentity => "gaussian-identity",
            Self::SaddleCheck => "saddle-check",
            Self::KlLemmas => "kl-lemmas",
            Self::NegdefRoundtrip => "negdef-roundtrip",
            Self::Counterexample => "counterexample",
        }
    }

    fn needs_instance(self) -> bool {
        matches!(
            self,
            Self::CheckDebias
                | Self::Sinkhorn
                | Self::Divergence
                | Self::Uot
                | Self::Mmd
                | Self::Decompose
                | Self::SaddleCheck
                | Self::NegdefRoundtrip
        )
    }

    fn needs_epsilon(self) -> bool {
        matches!(
            self,
            Self::Sinkhorn
                | Self::Divergence
                | Self::Uot
                | Self::Decompose
                | Self::Interpolate
                | Self::GaussianIdentity
                | Self::SaddleCheck
                | Self::NegdefRoundtrip
        )
    }

    fn has_table(self) -> bool {
        matches!(
            self,
            Self::Divergence | Self::Uot | Self::Mmd | Self::Interpolate | Self::Counterexample
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Random instance: points uniform in `[0,1]^d`, Dirichlet(1) weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    #[serde(default = "uniform")]
    pub kind: String,
    pub n_points: usize,
    #[serde(default = "one")]
    pub dimension: usize,
    /// `squared`, `distance` or `power:<p>`.
    #[serde(default = "squared")]
    pub cost: String,
    /// Size of Z for decompositions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_points: Option<usize>,
}

fn uniform() -> String {
    "uniform".into()
}

fn one() -> usize {
    1
}

fn squared() -> String {
    "squared".into()
}

impl Generator {
    pub fn exponent(&self) -> Result<f64, String> {
        match self.cost.as_str() {
            "squared" => Ok(2.0),
            "distance" => Ok(1.0),
            other => other
                .strip_prefix("power:")
                .and_then(|p| p.parse::<f64>().ok())
                .filter(|p| *p > 0.0)
                .ok_or_else(|| format!("unknown cost {other:?}; use squared, distance or power:<p>")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MeasureJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<MeasureJson>,
    /// Table on X×Z for decompositions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Stopping tolerance of the iterative solvers.
    #[serde(default = "solver_tol")]
    pub solver: f64,
    /// Slack of the debiasability scan.
    #[serde(default)]
    pub debias: f64,
    /// Band around the row minimum when collecting argmin sets.
    #[serde(default = "argmin_tol")]
    pub argmin: f64,
    /// Relative duality gap.
    #[serde(default = "duality_tol")]
    pub duality: f64,
    /// Relative gap of the decomposition identity.
    #[serde(default = "decomposition_tol")]
    pub decomposition: f64,
    /// Monte-Carlo band in standard errors.
    #[serde(default = "mc_band")]
    pub mc_band: f64,
}

fn solver_tol() -> f64 {
    1e-12
}

fn argmin_tol() -> f64 {
    1e-9
}

fn duality_tol() -> f64 {
    1e-8
}

fn decomposition_tol() -> f64 {
    1e-6
}

fn mc_band() -> f64 {
    4.0
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: solver_tol(),
            debias: 0.0,
            argmin: argmin_tol(),
            duality: duality_tol(),
            decomposition: decomposition_tol(),
            mc_band: mc_band(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, alias = "epsilon", skip_serializing_if = "Vec::is_empty")]
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Instance>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    /// Grid step; defaults to `sqrt(eps) / 20`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub include_plan: bool,
}

/// Validation failure with the config line it refers to, when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn locate(text: Option<&str>, key: &str) -> Option<usize> {
    let text = text?;
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: None,
            epsilons: Vec::new(),
            rho: None,
            instance: None,
            tolerances: Tolerances::default(),
            output: None,
            x: None,
            y: None,
            t: None,
            step: None,
            n_samples: None,
            instances: None,
            strict: false,
            include_plan: false,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
        })?;
        cfg.validate(Some(text))?;
        Ok(cfg)
    }

    fn fail(text: Option<&str>, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: locate(text, key),
            column: None,
            message: message.into(),
        }
    }

    /// Whether the run draws random numbers.
    pub fn is_stochastic(&self) -> bool {
        let generated = self.instance.as_ref().is_some_and(|i| i.generator.is_some());
        generated || matches!(self.experiment, Experiment::KlLemmas | Experiment::NegdefRoundtrip)
    }

    pub fn validate(&self, text: Option<&str>) -> Result<(), ConfigError> {
        let e = self.experiment;
        if self.is_stochastic() && self.seed.is_none() {
            return Err(Self::fail(
                text,
                "experiment",
                format!("{} draws random numbers and needs a seed", e.name()),
            ));
        }
        if e.needs_epsilon() && self.epsilons.is_empty() && e != Experiment::Counterexample {
            return Err(Self::fail(text, "experiment", format!("{} needs epsilon", e.name())));
        }
        if let Some(bad) = self.epsilons.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Self::fail(
                text,
                "epsilon",
                format!("epsilon must be positive and finite, got {bad}"),
            ));
        }
        if e == Experiment::Uot && !self.rho.is_some_and(|r| r > 0.0 && r.is_finite()) {
            return Err(Self::fail(text, "rho", "uot needs a positive rho"));
        }
        if e.needs_instance() {
            let inst = self
                .instance
                .as_ref()
                .ok_or_else(|| Self::fail(text, "experiment", format!("{} needs an instance", e.name())))?;
            match (&inst.generator, e) {
                (Some(g), _) => {
                    if g.kind != "uniform" {
                        return Err(Self::fail(text, "kind", format!("unknown generator kind {:?}", g.kind)));
                    }
                    if g.n_points == 0 || g.dimension == 0 {
                        return Err(Self::fail(
                            text,
                            "n_points",
                            "generator needs n_points and dimension >= 1",
                        ));
                    }
                    g.exponent().map_err(|m| Self::fail(text, "cost", m))?;
                }
                (None, Experiment::Decompose) => {
                    if inst.psi.is_none() || inst.lambda.is_none() || inst.mu.is_none() || inst.nu.is_none() {
                        return Err(Self::fail(text, "instance", "decompose needs psi, lambda, mu and nu"));
                    }
                }
                (None, _) => {
                    if inst.cost.is_none() {
                        return Err(Self::fail(text, "instance", "instance needs a cost or a generator"));
                    }
                }
            }
        }
        if matches!(e, Experiment::Interpolate | Experiment::GaussianIdentity) {
            let (x, y) = (self.x.as_ref(), self.y.as_ref());
            match (x, y) {
                (Some(x), Some(y)) if x.len() == y.len() && matches!(x.len(), 1 | 2) => {}
                _ => {
                    return Err(Self::fail(
                        text,
                        "x",
                        "x and y must be points of equal dimension 1 or 2",
                    ))
                }
            }
        }
        if e == Experiment::Interpolate {
            let t = self.t.as_deref().unwrap_or_default();
            if t.is_empty() || t.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
                return Err(Self::fail(text, "t", "t values must lie in (0, 1)"));
            }
        }
        if let Some(step) = self.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Self::fail(text, "step", "step must be positive"));
            }
        }
        if self.n_samples == Some(0) || self.instances == Some(0) {
            return Err(Self::fail(
                text,
                "n_samples",
                "sample and instance counts must be positive",
            ));
        }
        if let Some(Format::Csv) = self.output.as_ref().and_then(|o| o.format) {
            if !e.has_table() {
                return Err(Self::fail(text, "format", format!("{} emits json only", e.name())));
            }
        }
        Ok(())
    }

    pub fn format(&self) -> Format {
        match self.output.as_ref().and_then(|o| o.format) {
            Some(f) => f,
            None if self.experiment.has_table() => Format::Csv,
            None => Format::Json,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("serializable config");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_has_position() {
        let err = ExperimentConfig::parse("{\n  \"experiment\": \"sinkhorm\"\n}").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("unknown variant"));
    }

    #[test]
    fn missing_seed_is_located() {
        let text = "{\n \"experiment\": \"kl-lemmas\"\n}";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("seed"));
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = ExperimentConfig::parse(r#"{"experiment":"counterexample","epsilon":[1.0]}"#).unwrap();
        let b = ExperimentConfig::parse("{\n  \"epsilon\": [1],\n  \"experiment\": \"counterexample\"\n}").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn generator_cost_names() {
        let mut g = Generator {
            kind: uniform(),
            n_points: 3,
            dimension: 1,
            cost: "power:1.5".into(),
            z_points: None,
        };
        assert_eq!(g.exponent(), Ok(1.5));
        g.cost = "cubic".into();
        assert!(g.exponent().is_err());
    }
}
