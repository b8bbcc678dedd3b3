//! Scenario files: schema, parsing and validation.

use std::path::Path;

use levy_potential::bocher::{GridSpec, Mu0Spec, ProblemSpec};
use levy_potential::levy::{kappa0_on, Domain, DriftField, DriftKind, JumpSpec, LevyTriplet, Operator, Shape};
use levy_potential::path::{default_horizon, PathConfig, Scheme};
use levy_potential::polarity::{Target, Verdict};
use levy_potential::potential::{MeasureSpec, ScalarField, SignedMeasure};
use serde::{Deserialize, Serialize};

/// A configuration that could not be read, parsed or validated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Dotted path of the offending field, when known.
    pub field: Option<String>,
    /// 1-based line of the offending text, when known.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            field: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn at(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.into()),
            line: None,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

/// One scenario: an operator, a geometry, a budget and a list of tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub operator: OperatorConfig,
    pub geometry: Geometry,
    pub budget: Budget,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

/// Diffusion matrix given as `q·I` or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diffusion {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

fn no_jump() -> JumpSpec {
    JumpSpec::None
}

fn zero_drift() -> DriftKind {
    DriftKind::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub dim: usize,
    #[serde(default)]
    pub l: Option<Vec<f64>>,
    #[serde(default)]
    pub q: Option<Diffusion>,
    #[serde(default = "no_jump")]
    pub jump: JumpSpec,
    #[serde(default = "zero_drift")]
    pub drift: DriftKind,
    #[serde(default)]
    pub kappa: f64,
    /// Sets `κ = κ₀ + value`, with `κ₀ = sup |div b|` over `V`.
    #[serde(default)]
    pub kappa_above_kappa0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub v: Shape,
    #[serde(default)]
    pub outer: Option<Shape>,
    #[serde(default)]
    pub singular_set: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    #[default]
    Euler,
    Wos,
}

fn default_draws() -> u32 {
    1
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub n: u64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Euler time cap; defaults to [`default_horizon`].
    #[serde(default)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest accepted z-score between two estimates.
    pub z_max: f64,
    /// Largest accepted relative error against a closed form.
    pub rel: f64,
    /// Smallest accepted goodness-of-fit p-value.
    pub p_min: f64,
    /// Standard errors allowed below zero (or around a target).
    pub k_sigma: f64,
    /// Largest accepted decomposition residual relative to the scale of `u`.
    pub residual_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            z_max: 3.0,
            rel: 0.05,
            p_min: 0.01,
            k_sigma: 3.0,
            residual_rel: 0.03,
        }
    }
}

fn default_bins() -> usize {
    20
}

fn default_cell() -> f64 {
    0.1
}

fn default_n_outer() -> u64 {
    1000
}

fn default_n_inner() -> u64 {
    100
}

fn default_per_dim() -> usize {
    12
}

fn default_beta() -> f64 {
    1.0
}

fn default_resolvent_inner() -> u64 {
    50
}

fn default_exponent_tol() -> f64 {
    0.1
}

fn default_problem_cell() -> f64 {
    0.05
}

/// Measures and right-hand side of a decomposition problem; the domains and
/// singular set come from the scenario geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub u: ScalarField,
    #[serde(default)]
    pub lambda: SignedMeasure,
    #[serde(default)]
    pub mu0: Mu0Spec,
    #[serde(default)]
    pub sigma: MeasureSpec,
    #[serde(default)]
    pub kappa1: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_problem_cell")]
    pub cell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LilCase {
    pub dim: usize,
    pub jump: JumpSpec,
    pub polar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperplaneCase {
    pub dim: usize,
    pub codim: usize,
    pub jump: JumpSpec,
    pub verdict: Verdict,
}

/// What to compute. Every task with paths accepts `n` to override the
/// scenario budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// Chi-square test of `|X_{τ_V}|` against the ball exit law.
    Poisson {
        x: Vec<f64>,
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default)]
        n: Option<u64>,
    },
    /// Cell averages of the Green function against the ball closed form.
    Green {
        x: Vec<f64>,
        #[serde(default = "default_cell")]
        cell: f64,
        /// Cells closer than this to the pole or to `∂V` are not compared.
        #[serde(default = "default_cell")]
        margin: f64,
        /// Occupation points per walk-on-spheres ball.
        #[serde(default = "default_draws")]
        draws: u32,
        #[serde(default)]
        n: Option<u64>,
    },
    /// Direct and Ikeda–Watanabe estimates of `E_x[e^{−κτ} 1_{D^c} u(X_τ)]`.
    ExteriorHit {
        x: Vec<f64>,
        u_ext: ScalarField,
        #[serde(default)]
        n: Option<u64>,
    },
    Dynkin {
        x: Vec<f64>,
        b: Shape,
        mu: MeasureSpec,
        #[serde(default = "default_n_outer")]
        n_outer: u64,
        #[serde(default = "default_n_inner")]
        n_inner: u64,
        #[serde(default)]
        n: Option<u64>,
    },
    /// Weighted against per-step-killed paths, once per rate.
    Killing {
        x: Vec<f64>,
        f: ScalarField,
        kappas: Vec<f64>,
        #[serde(default)]
        n: Option<u64>,
    },
    Duality {
        f: ScalarField,
        g: ScalarField,
        #[serde(default = "default_per_dim")]
        per_dim: usize,
        #[serde(default)]
        n: Option<u64>,
    },
    Decompose {
        problem: Problem,
        /// Expected coefficient of the first atom.
        #[serde(default)]
        expected_atom: Option<f64>,
        /// Expect no atom: every coefficient within `k_sigma` of zero.
        #[serde(default)]
        removable: bool,
        #[serde(default)]
        n: Option<u64>,
    },
    Representation {
        problem: Problem,
        #[serde(default)]
        n: Option<u64>,
    },
    /// Maximum-principle margins, once per drift (the operator's when empty).
    Maxprin {
        problem: Problem,
        #[serde(default)]
        drifts: Vec<DriftKind>,
        #[serde(default)]
        n: Option<u64>,
    },
    Wv {
        x: Vec<f64>,
        /// Also require the direct estimate to equal one (local operators).
        #[serde(default)]
        expect_one: bool,
        #[serde(default)]
        n: Option<u64>,
    },
    LilSingleton {
        cases: Vec<LilCase>,
    },
    Hyperplane {
        cases: Vec<HyperplaneCase>,
    },
    /// Hitting ladder of shrinking targets and its extrapolated verdict,
    /// once per killing rate (the operator's when empty).
    PolarityLadder {
        target: Target,
        x: Vec<f64>,
        expect: Verdict,
        #[serde(default)]
        eps: Option<Vec<f64>>,
        #[serde(default)]
        exponent: Option<f64>,
        #[serde(default = "default_exponent_tol")]
        exponent_tol: f64,
        #[serde(default)]
        kappas: Vec<f64>,
        #[serde(default)]
        n: Option<u64>,
    },
    ResolventIdentity {
        x: Vec<f64>,
        f: ScalarField,
        #[serde(default)]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_resolvent_inner")]
        n_inner: u64,
        #[serde(default)]
        n: Option<u64>,
    },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Poisson { .. } => "poisson",
            Task::Green { .. } => "green",
            Task::ExteriorHit { .. } => "exterior_hit",
            Task::Dynkin { .. } => "dynkin",
            Task::Killing { .. } => "killing",
            Task::Duality { .. } => "duality",
            Task::Decompose { .. } => "decompose",
            Task::Representation { .. } => "representation",
            Task::Maxprin { .. } => "maxprin",
            Task::Wv { .. } => "wv",
            Task::LilSingleton { .. } => "lil_singleton",
            Task::Hyperplane { .. } => "hyperplane",
            Task::PolarityLadder { .. } => "polarity_ladder",
            Task::ResolventIdentity { .. } => "resolvent_identity",
        }
    }

    fn n(&self) -> Option<u64> {
        match self {
            Task::Poisson { n, .. }
            | Task::Green { n, .. }
            | Task::ExteriorHit { n, .. }
            | Task::Dynkin { n, .. }
            | Task::Killing { n, .. }
            | Task::Duality { n, .. }
            | Task::Decompose { n, .. }
            | Task::Representation { n, .. }
            | Task::Maxprin { n, .. }
            | Task::Wv { n, .. }
            | Task::PolarityLadder { n, .. }
            | Task::ResolventIdentity { n, .. } => *n,
            Task::LilSingleton { .. } | Task::Hyperplane { .. } => None,
        }
    }

    fn n_mut(&mut self) -> Option<&mut Option<u64>> {
        match self {
            Task::Poisson { n, .. }
            | Task::Green { n, .. }
            | Task::ExteriorHit { n, .. }
            | Task::Dynkin { n, .. }
            | Task::Killing { n, .. }
            | Task::Duality { n, .. }
            | Task::Decompose { n, .. }
            | Task::Representation { n, .. }
            | Task::Maxprin { n, .. }
            | Task::Wv { n, .. }
            | Task::PolarityLadder { n, .. }
            | Task::ResolventIdentity { n, .. } => Some(n),
            Task::LilSingleton { .. } | Task::Hyperplane { .. } => None,
        }
    }

    fn point(&self) -> Option<&[f64]> {
        match self {
            Task::Poisson { x, .. }
            | Task::Green { x, .. }
            | Task::ExteriorHit { x, .. }
            | Task::Dynkin { x, .. }
            | Task::Killing { x, .. }
            | Task::Wv { x, .. }
            | Task::ResolventIdentity { x, .. } => Some(x),
            _ => None,
        }
    }
}

/// Command-line overrides of budget fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub dt: Option<f64>,
}

impl Scenario {
    /// Applies overrides; `n` replaces the budget and every per-task count.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.budget.seed = seed;
        }
        if let Some(dt) = o.dt {
            self.budget.dt = dt;
        }
        if let Some(n) = o.n {
            self.budget.n = n;
            for t in &mut self.tasks {
                if let Some(slot) = t.n_mut() {
                    *slot = None;
                }
            }
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            let mut de = serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(&mut de).map_err(|e| {
                let line = e.inner().line();
                ConfigError {
                    field: path_of(e.path()),
                    line: (line > 0).then_some(line),
                    message: e.inner().to_string(),
                }
            })
        } else {
            let de = toml::de::Deserializer::parse(text).map_err(|e| toml_error(text, &e, None))?;
            serde_path_to_error::deserialize(de).map_err(|e| {
                let field = path_of(e.path());
                toml_error(text, e.inner(), field)
            })
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical JSON: object keys sorted, no insignificant whitespace.
    pub fn canonical_json(&self) -> String {
        serde_json::to_value(self).expect("scenario serialises").to_string()
    }

    pub fn path_count(&self, task: &Task) -> u64 {
        task.n().unwrap_or(self.budget.n)
    }

    /// Builds the operator and checks the configuration for consistency.
    pub fn validate(&self) -> Result<Built, ConfigError> {
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id.starts_with('.') {
            return Err(ConfigError::at("id", "must be a non-empty file name"));
        }
        let d = self.operator.dim;
        if d == 0 {
            return Err(ConfigError::at("operator.dim", "must be positive"));
        }
        let op = self.operator.build(&self.geometry.v)?;
        self.geometry.v.validate().map_err(|e| ConfigError::at("geometry.v", e.to_string()))?;
        if self.geometry.v.dim() != d {
            return Err(ConfigError::at("geometry.v", "dimension differs from operator.dim"));
        }
        if let Some(o) = &self.geometry.outer {
            o.validate().map_err(|e| ConfigError::at("geometry.outer", e.to_string()))?;
            if o.dim() != d || !o.compactly_contains(&self.geometry.v) {
                return Err(ConfigError::at("geometry.outer", "must contain the closure of V"));
            }
        }
        for p in &self.geometry.singular_set {
            if p.len() != d || !self.geometry.v.contains(p) {
                return Err(ConfigError::at("geometry.singular_set", "points must lie in V"));
            }
        }
        if self.budget.n == 0 {
            return Err(ConfigError::at("budget.n", "must be positive"));
        }
        let cfg = self.path_config(&op);
        cfg.validate().map_err(|e| ConfigError::at("budget", e.to_string()))?;
        for (i, t) in self.tasks.iter().enumerate() {
            let field = format!("tasks[{i}]");
            if let Some(x) = t.point() {
                if x.len() != d || !self.geometry.v.contains(x) {
                    return Err(ConfigError::at(format!("{field}.x"), "must be a point of V"));
                }
            }
            if self.path_count(t) == 0 {
                return Err(ConfigError::at(format!("{field}.n"), "must be positive"));
            }
            let needs_outer = matches!(
                t,
                Task::ExteriorHit { .. }
                    | Task::Wv { .. }
                    | Task::Decompose { .. }
                    | Task::Representation { .. }
                    | Task::Maxprin { .. }
            );
            if needs_outer && self.geometry.outer.is_none() {
                return Err(ConfigError::at("geometry.outer", format!("required by task {i} ({})", t.kind())));
            }
            if let Task::Decompose { problem, .. } | Task::Representation { problem, .. } | Task::Maxprin { problem, .. } = t {
                self.problem(problem)
                    .validate(d)
                    .map_err(|e| ConfigError::at(format!("{field}.problem"), e.to_string()))?;
            }
            if let Task::Maxprin { drifts, .. } = t {
                for (k, kind) in drifts.iter().enumerate() {
                    DriftField::builtin(d, kind.clone())
                        .map_err(|e| ConfigError::at(format!("{field}.drifts[{k}]"), e.to_string()))?;
                }
            }
            if let Task::Killing { kappas, .. } = t {
                if kappas.is_empty() || kappas.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
                    return Err(ConfigError::at(format!("{field}.kappas"), "need finite non-negative rates"));
                }
            }
            if let Task::Green { draws: 0, .. } = t {
                return Err(ConfigError::at(format!("{field}.draws"), "need at least one draw"));
            }
            if let Task::Poisson { bins, .. } = t {
                if *bins < 2 {
                    return Err(ConfigError::at(format!("{field}.bins"), "need at least two bins"));
                }
            }
        }
        Ok(Built { op, cfg })
    }

    pub fn path_config(&self, op: &Operator) -> PathConfig {
        let mut cfg = PathConfig::euler(self.budget.dt, 1.0, self.budget.seed);
        cfg.scheme = match self.budget.scheme {
            SchemeName::Euler => Scheme::Euler,
            SchemeName::Wos => Scheme::WalkOnSpheres,
        };
        cfg.horizon = match (self.budget.scheme, self.budget.horizon) {
            (_, Some(h)) => h,
            (SchemeName::Wos, None) => f64::INFINITY,
            (SchemeName::Euler, None) => {
                default_horizon(&op.triplet, &op.drift, &Domain::new(self.geometry.v.clone())).max(self.budget.dt)
            }
        };
        cfg
    }

    /// The decomposition problem of a task on the scenario geometry.
    pub fn problem(&self, p: &Problem) -> ProblemSpec {
        let outer = self
            .geometry
            .outer
            .clone()
            .unwrap_or_else(|| self.geometry.v.clone());
        let mut spec = ProblemSpec::new(p.u.clone(), outer, self.geometry.v.clone(), self.geometry.singular_set.clone());
        spec.lambda = p.lambda.clone();
        spec.mu0 = p.mu0.clone();
        spec.sigma = p.sigma.clone();
        spec.kappa1 = p.kappa1;
        spec.grid = p.grid.clone();
        spec.cell = p.cell;
        spec
    }
}

/// The operator and path configuration of a validated scenario.
#[derive(Debug, Clone)]
pub struct Built {
    pub op: Operator,
    pub cfg: PathConfig,
}

impl OperatorConfig {
    /// The operator with its killing rate resolved against `v`.
    pub fn build(&self, v: &Shape) -> Result<Operator, ConfigError> {
        let d = self.dim;
        let l = self.l.clone().unwrap_or_else(|| vec![0.0; d]);
        let q = match &self.q {
            None => vec![vec![0.0; d]; d],
            Some(Diffusion::Scalar(c)) => (0..d).map(|i| (0..d).map(|j| if i == j { *c } else { 0.0 }).collect()).collect(),
            Some(Diffusion::Matrix(m)) => m.clone(),
        };
        let triplet = LevyTriplet::new(l, q, self.jump.clone()).map_err(|e| ConfigError::at("operator", e.to_string()))?;
        let drift =
            DriftField::builtin(d, self.drift.clone()).map_err(|e| ConfigError::at("operator.drift", e.to_string()))?;
        let kappa = match self.kappa_above_kappa0 {
            Some(extra) => {
                if self.kappa != 0.0 {
                    return Err(ConfigError::at("operator.kappa", "give either kappa or kappa_above_kappa0"));
                }
                let k0 = kappa0_on(&drift, v).map_err(|e| ConfigError::at("operator.drift", e.to_string()))?;
                k0 + extra
            }
            None => self.kappa,
        };
        Operator::new(triplet, drift, kappa).map_err(|e| ConfigError::at("operator", e.to_string()))
    }
}

fn path_of(p: &serde_path_to_error::Path) -> Option<String> {
    let s = p.to_string();
    (s != "." && !s.is_empty()).then_some(s)
}

fn toml_error(text: &str, e: &toml::de::Error, field: Option<String>) -> ConfigError {
    let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    ConfigError {
        field,
        line,
        message: e.message().to_string(),
    }
}
