//! Scenario configuration: a single JSON document with strict validation.
//!
//! Every section is optional and falls back to its defaults; unknown keys
//! are rejected at every level.

use serde::{Deserialize, Serialize};

use crate::collision_core::{CollisionParams, Normalization, VelocityGrid};
use crate::error::{Error, Result};
use crate::expansion_builder::FluidField;
use crate::layer_geometry::LayerGeometry;
use crate::milne_solver::EtaGridSpec;

/// Top-level scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Velocity grid and collision parameters.
    pub operator: OperatorConfig,
    /// Thresholds and sizes of `operator-check`.
    pub operator_check: OperatorCheckConfig,
    /// Boundary-layer geometry.
    pub geometry: GeometryConfig,
    /// Milne problem data.
    pub milne: MilneConfig,
    /// Characteristic trace.
    pub trace: TraceConfig,
    /// Stochastic cycles.
    pub cycles: CyclesConfig,
    /// Hilbert-expansion scenario.
    pub expansion: ExpansionConfig,
    /// Output location and formats.
    pub output: OutputConfig,
}

/// Operator section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorConfig {
    /// Hard-sphere constant.
    pub q0: f64,
    /// Grid truncation parameter.
    pub v_max: f64,
    /// Gauss–Hermite points per axis.
    pub per_axis_count: usize,
    /// Maxwellian prefactor convention.
    pub normalization: Normalization,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self { q0: 1.0, v_max: 6.0, per_axis_count: 24, normalization: Normalization::UnitMass }
    }
}

impl OperatorConfig {
    /// Collision parameters of this section.
    pub fn params(&self) -> Result<CollisionParams> {
        CollisionParams::new(self.q0, self.normalization)
    }

    /// Builds the (possibly truncated) velocity grid.
    pub fn grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.per_axis_count, self.v_max)
    }

    /// The same section with another per-axis count.
    pub fn with_per_axis_count(&self, n: usize) -> Self {
        Self { per_axis_count: n, ..self.clone() }
    }
}

/// Thresholds of `operator-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorCheckConfig {
    /// Maximum Gaussian-moment error.
    pub moment_tol: f64,
    /// Maximum relative null residual `‖L e_k‖/‖e_k‖`.
    pub null_residual_tol: f64,
    /// Maximum Gram-matrix defect.
    pub gram_tol: f64,
    /// Maximum relative adjointness defect.
    pub adjointness_tol: f64,
    /// Lanczos steps for the spectral gap.
    pub lanczos_steps: usize,
    /// Points per axis of the (full tensor) grid used for `Γ`.
    pub gamma_per_axis_count: usize,
    /// Number of random pairs for the `Γ` orthogonality check.
    pub gamma_pairs: usize,
    /// Relative tolerance of the `Γ` orthogonality check.
    pub gamma_tol: f64,
}

impl Default for OperatorCheckConfig {
    fn default() -> Self {
        Self {
            moment_tol: 1e-6,
            null_residual_tol: 1e-4,
            gram_tol: 1e-8,
            adjointness_tol: 1e-10,
            lanczos_steps: 60,
            gamma_per_axis_count: 6,
            gamma_pairs: 10,
            gamma_tol: 1e-6,
        }
    }
}

/// Geometry section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// First principal radius.
    pub r1: f64,
    /// Second principal radius.
    pub r2: f64,
    /// Knudsen number for single runs.
    pub epsilon: f64,
    /// Knudsen numbers for sweeps (`milne-corrector`); empty means `[epsilon]`.
    pub epsilons: Vec<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { r1: 1.0, r2: 2.0, epsilon: 0.01, epsilons: Vec::new() }
    }
}

impl GeometryConfig {
    /// The ε values of a sweep.
    pub fn sweep(&self) -> Vec<f64> {
        if self.epsilons.is_empty() {
            vec![self.epsilon]
        } else {
            self.epsilons.clone()
        }
    }

    /// Geometry at a given ε.
    pub fn at(&self, epsilon: f64) -> Result<LayerGeometry> {
        LayerGeometry::new(self.r1, self.r2, epsilon)
    }
}

/// In-flow data selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySelector {
    /// The basis function `e_k`.
    BasisK {
        /// Basis index `0..=4`.
        k: usize,
    },
    /// `amplitude · exp(−|v − center|²/(2 width²))`.
    GaussianBump {
        /// Bump center.
        center: [f64; 3],
        /// Bump width.
        width: f64,
        /// Bump amplitude.
        amplitude: f64,
    },
    /// Explicit values on the velocity grid.
    CustomTable {
        /// One value per grid node.
        values: Vec<f64>,
    },
}

/// Source selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSelector {
    /// `S = 0`.
    None,
    /// `S(η) = amplitude · e^{−rate η} (I − P)[μ^{1/2}(v_η v_φ + 0.3(v_η² − 1) + 0.1 v_ψ³)]`.
    Exponential {
        /// Amplitude.
        amplitude: f64,
        /// Decay rate `K`.
        rate: f64,
    },
}

/// Milne section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MilneConfig {
    /// Points per axis of the (full tensor, even) velocity grid; the other
    /// operator settings come from the operator section.
    pub per_axis_count: usize,
    /// In-flow data.
    pub boundary: BoundarySelector,
    /// Source.
    pub source: SourceSelector,
    /// Solver tolerance.
    pub tol: f64,
    /// Krylov iteration budget (in restarts of the inner GMRES).
    pub max_iter: usize,
    /// η grid.
    pub eta_grid: EtaGridSpec,
}

impl Default for MilneConfig {
    fn default() -> Self {
        Self {
            per_axis_count: 8,
            boundary: BoundarySelector::BasisK { k: 0 },
            source: SourceSelector::None,
            tol: crate::milne_solver::DEFAULT_TOL,
            max_iter: crate::milne_solver::DEFAULT_MAX_ITER,
            eta_grid: EtaGridSpec::default(),
        }
    }
}

/// Trace section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    /// Start position η.
    pub eta: f64,
    /// Start velocity `(v_η, v_φ, v_ψ)`.
    pub v: [f64; 3],
    /// Step in the arc parameter.
    pub ds: f64,
    /// Number of steps.
    pub n_steps: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { eta: 1.0, v: [0.5, 1.0, -0.7], ds: 0.01, n_steps: 1000 }
    }
}

/// Cycles section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CyclesConfig {
    /// Ball radius (centred at the origin).
    pub radius: f64,
    /// Start position.
    pub x: [f64; 3],
    /// Start velocity.
    pub v: [f64; 3],
    /// Time horizon `T₀`.
    pub t0: f64,
    /// Cycle lengths.
    pub k: Vec<usize>,
    /// Samples per estimate.
    pub n_samples: usize,
    /// RNG seed (overridden by `--seed`).
    pub seed: u64,
}

impl Default for CyclesConfig {
    fn default() -> Self {
        Self { radius: 1.0, x: [0.0; 3], v: [1.0, 0.0, 0.0], t0: 4.0, k: vec![2, 4, 8], n_samples: 20_000, seed: 0 }
    }
}

/// Fluid-field selector for `expand`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluidSelector {
    /// Uniform rest state `ρ = 1`, `u = 0`, `θ = 0`.
    Trivial,
    /// `θ = a sin(k x)`, `ρ = −θ`, `u = (u₁, b sin(k x), b cos(k x))`: satisfies
    /// `∂ₓu₁ = 0` and `∂ₓ(ρ + θ) = 0`.
    Boussinesq {
        /// Temperature amplitude `a`.
        amplitude: f64,
        /// Wavenumber `k`.
        wavenumber: f64,
        /// Constant normal velocity `u₁`.
        u1: f64,
        /// Shear amplitude `b`.
        shear: f64,
    },
    /// Explicit nodal values on a uniform grid.
    Table {
        /// Nodes.
        x: Vec<f64>,
        /// Density.
        rho: Vec<f64>,
        /// Velocity.
        u: Vec<[f64; 3]>,
        /// Temperature.
        theta: Vec<f64>,
        /// Pressure.
        p: Vec<f64>,
    },
}

/// Expansion section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    /// Points per axis of the (full tensor) velocity grid; the other operator
    /// settings come from the operator section.
    pub per_axis_count: usize,
    /// Fluid field.
    pub fluid: FluidSelector,
    /// Slab interval (ignored for tables).
    pub x0: f64,
    /// Slab interval end (ignored for tables).
    pub x1: f64,
    /// Slab nodes (ignored for tables).
    pub nodes: usize,
    /// Relative CG tolerance of the `C₂` solves.
    pub cg_tol: f64,
    /// CG iteration budget.
    pub max_iter: usize,
    /// Maximum order-two identity residual for the check to pass.
    pub identity_tol: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self { per_axis_count: 6, fluid: FluidSelector::Trivial, x0: 0.0, x1: 1.0, nodes: 11, cg_tol: 1e-10, max_iter: 1000, identity_tol: 1e-5 }
    }
}

impl ExpansionConfig {
    /// Builds the fluid field.
    pub fn fluid_field(&self) -> Result<FluidField> {
        use crate::expansion_builder::FluidState;
        match &self.fluid {
            FluidSelector::Trivial => FluidField::from_fn(self.x0, self.x1, self.nodes, |_| FluidState { rho: 1.0, ..Default::default() }),
            FluidSelector::Boussinesq { amplitude, wavenumber, u1, shear } => FluidField::from_fn(self.x0, self.x1, self.nodes, |x| {
                let (s, c) = (wavenumber * x).sin_cos();
                FluidState { rho: -amplitude * s, u: [*u1, shear * s, shear * c], theta: amplitude * s, p: 0.0 }
            }),
            FluidSelector::Table { x, rho, u, theta, p } => FluidField::new(x.clone(), rho.clone(), u.clone(), theta.clone(), p.clone()),
        }
    }
}

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// CSV tables plus a summary JSON.
    Csv,
    /// A single JSON report including the tables.
    Json,
}

/// Output section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; `None` writes nothing but stdout.
    pub directory: Option<String>,
    /// Formats to write.
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, formats: vec![OutputFormat::Csv] }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

fn finite(name: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite")))
    }
}

impl ScenarioConfig {
    /// Parses a JSON document (unknown keys rejected) and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every numeric field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        let o = &self.operator;
        positive("operator.q0", o.q0)?;
        positive("operator.v_max", o.v_max)?;
        if o.per_axis_count < 2 {
            return Err(Error::Config("operator.per_axis_count must be at least 2".into()));
        }
        let c = &self.operator_check;
        for (n, x) in [("moment_tol", c.moment_tol), ("null_residual_tol", c.null_residual_tol), ("gram_tol", c.gram_tol), ("adjointness_tol", c.adjointness_tol), ("gamma_tol", c.gamma_tol)] {
            positive(&format!("operator_check.{n}"), x)?;
        }
        if c.lanczos_steps < 2 || c.gamma_per_axis_count < 2 || c.gamma_pairs == 0 {
            return Err(Error::Config("operator_check sizes must be at least 2 (lanczos_steps, gamma_per_axis_count) and 1 (gamma_pairs)".into()));
        }
        let g = &self.geometry;
        for eps in g.sweep() {
            g.at(eps).map_err(|e| Error::Config(format!("geometry: {e}")))?;
        }
        let m = &self.milne;
        positive("milne.tol", m.tol)?;
        if m.max_iter == 0 {
            return Err(Error::Config("milne.max_iter must be positive".into()));
        }
        if m.per_axis_count < 2 || m.per_axis_count % 2 != 0 {
            return Err(Error::Config("milne.per_axis_count must be even and at least 2".into()));
        }
        m.eta_grid.build(10.0).map_err(|e| Error::Config(format!("milne.eta_grid: {e}")))?;
        match &m.boundary {
            BoundarySelector::BasisK { k } if *k > 4 => return Err(Error::Config(format!("milne.boundary.k must be in 0..=4, got {k}"))),
            BoundarySelector::GaussianBump { center, width, amplitude } => {
                positive("milne.boundary.width", *width)?;
                finite("milne.boundary", &[center[0], center[1], center[2], *amplitude])?;
            }
            BoundarySelector::CustomTable { values } => finite("milne.boundary.values", values)?,
            BoundarySelector::BasisK { .. } => {}
        }
        if let SourceSelector::Exponential { amplitude, rate } = m.source {
            finite("milne.source.amplitude", &[amplitude])?;
            positive("milne.source.rate", rate)?;
        }
        let t = &self.trace;
        finite("trace", &[t.eta, t.v[0], t.v[1], t.v[2]])?;
        positive("trace.ds", t.ds)?;
        let y = &self.cycles;
        positive("cycles.radius", y.radius)?;
        finite("cycles.x", &y.x)?;
        finite("cycles.v", &y.v)?;
        if !(y.t0 >= 0.0 && y.t0.is_finite()) {
            return Err(Error::Config("cycles.t0 must be nonnegative".into()));
        }
        if y.k.is_empty() || y.k.contains(&0) {
            return Err(Error::Config("cycles.k must be a nonempty list of positive integers".into()));
        }
        if y.n_samples < 1000 {
            return Err(Error::Config("cycles.n_samples must be at least 1000".into()));
        }
        let x = &self.expansion;
        if x.per_axis_count < 2 {
            return Err(Error::Config("expansion.per_axis_count must be at least 2".into()));
        }
        positive("expansion.cg_tol", x.cg_tol)?;
        positive("expansion.identity_tol", x.identity_tol)?;
        if x.max_iter == 0 {
            return Err(Error::Config("expansion.max_iter must be positive".into()));
        }
        x.fluid_field().map_err(|e| Error::Config(format!("expansion: {e}")))?;
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats must not be empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(ScenarioConfig::from_json("{}").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ScenarioConfig::from_json(r#"{"operator": {"q1": 1.0}}"#), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_json(r#"{"extra": 1}"#), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ScenarioConfig::from_json(r#"{"operator": {"q0": -1.0}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"geometry": {"epsilon": 2.0}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"milne": {"boundary": {"kind": "basis_k", "k": 7}}}"#).is_err());
    }

    #[test]
    fn selectors_round_trip() {
        let text = r#"{"milne": {"boundary": {"kind": "gaussian_bump", "center": [1, 0, 0], "width": 0.5, "amplitude": 2},
                       "source": {"kind": "exponential", "amplitude": 1, "rate": 1}},
                       "expansion": {"fluid": {"kind": "boussinesq", "amplitude": 0.1, "wavenumber": 2, "u1": 0.2, "shear": 0.3}}}"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        let again = ScenarioConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
