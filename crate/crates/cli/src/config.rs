//! Experiment configs. Everything is parsed and validated here, before any
//! output is written.

use std::path::PathBuf;
use std::sync::Arc;

use loopsol::algebra::{catalog, AlgebraContext};
use loopsol::birkhoff::GoursatOptions;
use loopsol::dressing::{Dressing, DressingSpec, Hierarchy, JsonComplex};
use loopsol::elliptic::{EllipticContext, Splitting};
use loopsol::geometry::ImmersionKind;
use loopsol::grid::{Axis, SolutionGrid};
use loopsol::laurent::LaurentLoop;
use loopsol::laxflow::Equation;
use loopsol::matrix::*;
use loopsol::tolerances::Tolerances;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl From<loopsol::Error> for ConfigError {
    fn from(e: loopsol::Error) -> Self {
        ConfigError(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ComputeQ,
    FlowRhs,
    Dress,
    Goursat,
    FiniteType,
    Verify,
    Extract,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ComputeQ => "compute-q",
            Command::FlowRhs => "flow-rhs",
            Command::Dress => "dress",
            Command::Goursat => "goursat",
            Command::FiniteType => "finite-type",
            Command::Verify => "verify",
            Command::Extract => "extract",
        }
    }
}

/// The file format. `params` is checked against the command's own schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub context: String,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub params: Value,
}

pub type JsonMatrix = Vec<Vec<JsonComplex>>;

pub fn matrix(m: &JsonMatrix, n: usize, what: &str) -> Result<ComplexMatrix, ConfigError> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return err(format!("{what} must be {n}x{n}"));
    }
    let rows: Vec<Vec<C64>> = m.iter().map(|r| r.iter().map(|z| z.value()).collect()).collect();
    let out = from_rows(&rows);
    if !is_finite(&out) {
        return err(format!("{what} has non-finite entries"));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisSpec {
    fn build(&self, what: &str) -> Result<Axis, ConfigError> {
        if !(2..=4097).contains(&self.n) {
            return err(format!("{what}: n must lie in 2..=4097"));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return err(format!("{what}: need finite lo < hi"));
        }
        Ok(Axis::linspace(self.lo, self.hi, self.n)?)
    }
}

/// The second axis is t, or y for finite-type runs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: AxisSpec,
    pub t: AxisSpec,
}

impl GridSpec {
    fn build(&self) -> Result<(Axis, Axis), ConfigError> {
        Ok((self.x.build("grid.x")?, self.t.build("grid.t")?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HierarchySpec {
    Flow {
        #[serde(default)]
        b: Option<JsonMatrix>,
        j: i32,
    },
    Minus1,
    Uu0,
    Elliptic,
}

impl HierarchySpec {
    fn build(&self, ctx: &AlgebraContext) -> Result<Hierarchy, ConfigError> {
        Ok(match self {
            HierarchySpec::Flow { b, j } => {
                if !(1..=8).contains(j) {
                    return err("flow index j must lie in 1..=8");
                }
                let b = b_or_default(ctx, b.as_ref())?;
                Hierarchy::Flow { b, j: *j }
            }
            HierarchySpec::Minus1 => Hierarchy::Minus1,
            HierarchySpec::Uu0 => Hierarchy::Uu0,
            HierarchySpec::Elliptic => Hierarchy::Elliptic,
        })
    }
}

fn b_or_default(ctx: &AlgebraContext, b: Option<&JsonMatrix>) -> Result<ComplexMatrix, ConfigError> {
    match b {
        None => Ok(ctx.a.clone()),
        Some(m) => {
            let b = matrix(m, ctx.dim, "b")?;
            if !ctx.centralizes(&b) {
                return err("b must commute with a");
            }
            Ok(b)
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SubstitutionTag {
    Su2,
    So2,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComputeQParams {
    j: usize,
    #[serde(default)]
    b: Option<JsonMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowRhsParams {
    j: usize,
    #[serde(default)]
    b: Option<JsonMatrix>,
    #[serde(default)]
    substitution: Option<SubstitutionTag>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DressParams {
    hierarchy: HierarchySpec,
    chain: Vec<DressingSpec>,
    grid: GridSpec,
    #[serde(default)]
    equation: Option<String>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Const,
    Cos,
    Sech,
}

impl Profile {
    pub fn eval(self, s: f64) -> f64 {
        match self {
            Profile::Const => 1.0,
            Profile::Cos => s.cos(),
            Profile::Sech => 1.0 / s.cosh(),
        }
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum GoursatDataSpec {
    /// ξ(x) = profile(scale·x)·M and η(t) = exp(−rate·t·Y) b exp(rate·t·Y).
    Profile {
        xi: JsonMatrix,
        profile: Profile,
        scale: f64,
        eta_generator: JsonMatrix,
        rate: f64,
    },
    /// Axis data of a dressed −1-flow solution, with cross-validation on the interior.
    Dressed { chain: Vec<DressingSpec> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GoursatOptionsSpec {
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    tail_tol: Option<f64>,
    #[serde(default)]
    spectrum_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GoursatParams {
    grid: GridSpec,
    data: GoursatDataSpec,
    #[serde(default)]
    options: Option<GoursatOptionsSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopSpec {
    min: i32,
    coeffs: Vec<JsonMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteTypeParams {
    m: usize,
    d: usize,
    #[serde(default)]
    splitting: Splitting,
    potential: LoopSpec,
    grid: GridSpec,
    #[serde(default)]
    substeps: Option<usize>,
}

#[derive(Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
enum VerifyParams {
    /// Residuals of fields read from CSV files (paths relative to the config file).
    Equation {
        equation: String,
        inputs: Vec<PathBuf>,
        #[serde(default)]
        b: Option<JsonMatrix>,
        #[serde(default)]
        j: Option<usize>,
    },
    /// Factor random near-identity loops drawn from `--seed`.
    Birkhoff { count: usize, k: usize, amplitude: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractParams {
    hierarchy: HierarchySpec,
    #[serde(default)]
    chain: Vec<DressingSpec>,
    grid: GridSpec,
    kind: ImmersionKind,
}

/// A validated experiment, ready to run.
#[derive(Debug)]
pub enum Experiment {
    ComputeQ { b: ComplexMatrix, j: usize },
    FlowRhs { b: ComplexMatrix, j: usize, substitution: Option<SubstitutionTag> },
    Dress { hierarchy: Hierarchy, chain: Vec<Dressing>, x: Axis, t: Axis, equation: Equation },
    Goursat { x: Axis, t: Axis, data: GoursatData, options: GoursatOptions },
    FiniteType { ec: EllipticContext, potential: LaurentLoop, x: Axis, y: Axis, substeps: usize },
    VerifyEquation { equation: Equation, fields: Vec<SolutionGrid>, input_bytes: Vec<Vec<u8>> },
    VerifyBirkhoff { count: usize, k: usize, amplitude: f64 },
    Extract { hierarchy: Hierarchy, chain: Vec<Dressing>, x: Axis, t: Axis, kind: ImmersionKind },
}

#[derive(Debug)]
pub enum GoursatData {
    Profile { xi: ComplexMatrix, profile: Profile, scale: f64, generator: ComplexMatrix, rate: f64 },
    Dressed { chain: Vec<Dressing> },
}

#[derive(Debug)]
pub struct Validated {
    pub config: ExperimentConfig,
    /// Canonical JSON of the config (sorted keys), the basis of the inputs digest.
    pub canonical: String,
    pub ctx: Arc<AlgebraContext>,
    pub experiment: Experiment,
}

const MAX_CHAIN: usize = 8;

fn params<T: serde::de::DeserializeOwned>(v: &Value, cmd: Command) -> Result<T, ConfigError> {
    serde_json::from_value(v.clone()).map_err(|e| ConfigError(format!("params for {}: {e}", cmd.name())))
}

fn build_chain(ctx: &AlgebraContext, chain: &[DressingSpec]) -> Result<Vec<Dressing>, ConfigError> {
    if chain.len() > MAX_CHAIN {
        return err(format!("dressing chains are limited to {MAX_CHAIN} factors"));
    }
    chain.iter().enumerate().map(|(i, s)| s.build(ctx).map_err(|e| ConfigError(format!("chain[{i}]: {e}")))).collect()
}

fn equation_for(tag: Option<&str>, hierarchy: &Hierarchy) -> Result<Equation, ConfigError> {
    match (tag, hierarchy) {
        (None | Some("flow"), Hierarchy::Flow { b, j }) if *j > 0 => Ok(Equation::Flow { b: b.clone(), j: *j as usize }),
        (Some("flow"), _) => err("equation `flow` needs a flow hierarchy with j > 0"),
        (None, Hierarchy::Flow { .. }) => err("negative flows need an explicit equation"),
        (None, Hierarchy::Minus1) => Ok(Equation::Minus1),
        (None, Hierarchy::Uu0) => Ok(Equation::Uu0),
        (None, Hierarchy::Elliptic) => Ok(Equation::Harmonic),
        (Some(t), _) => Ok(Equation::from_tag(t)?),
    }
}

/// Does `eq` read its fields off the given hierarchy?
fn compatible(eq: &Equation, h: &Hierarchy) -> bool {
    match eq {
        Equation::Nls => matches!(h, Hierarchy::Flow { j: 2, .. }),
        Equation::Mkdv => matches!(h, Hierarchy::Flow { j: 3, .. }),
        Equation::Flow { .. } => matches!(h, Hierarchy::Flow { .. }),
        Equation::Sge | Equation::Tzitzeica | Equation::Minus1 => *h == Hierarchy::Minus1,
        Equation::Uu0 | Equation::Grassmann => *h == Hierarchy::Uu0,
        Equation::Harmonic => *h == Hierarchy::Elliptic,
    }
}

/// Parse and validate a config. `base_dir` resolves relative input paths.
pub fn validate(text: &str, base_dir: &std::path::Path) -> Result<Validated, ConfigError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| ConfigError(format!("malformed JSON: {e}")))?;
    let config: ExperimentConfig =
        serde_json::from_value(raw.clone()).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    if !config.tolerances.is_valid() {
        return err("tolerances must be finite and positive");
    }
    let canonical = serde_json::to_string(&raw).map_err(|e| ConfigError(e.to_string()))?;
    let ctx = Arc::new(catalog(&config.context)?);
    let n = ctx.dim;
    let cmd = config.command;
    let p = &config.params;
    let experiment = match cmd {
        Command::ComputeQ => {
            let q: ComputeQParams = params(p, cmd)?;
            if !(1..=8).contains(&q.j) {
                return err("j must lie in 1..=8");
            }
            Experiment::ComputeQ { b: b_or_default(&ctx, q.b.as_ref())?, j: q.j }
        }
        Command::FlowRhs => {
            let q: FlowRhsParams = params(p, cmd)?;
            if !(1..=8).contains(&q.j) {
                return err("j must lie in 1..=8");
            }
            if q.substitution.is_some() && n != 2 {
                return err("substitutions apply to sl(2) contexts");
            }
            Experiment::FlowRhs { b: b_or_default(&ctx, q.b.as_ref())?, j: q.j, substitution: q.substitution }
        }
        Command::Dress => {
            let q: DressParams = params(p, cmd)?;
            let hierarchy = q.hierarchy.build(&ctx)?;
            let equation = equation_for(q.equation.as_deref(), &hierarchy)?;
            if !compatible(&equation, &hierarchy) {
                return err(format!("equation `{}` does not fit the chosen hierarchy", equation.tag()));
            }
            let chain = build_chain(&ctx, &q.chain)?;
            let (x, t) = q.grid.build()?;
            Experiment::Dress { hierarchy, chain, x, t, equation }
        }
        Command::Goursat => {
            let q: GoursatParams = params(p, cmd)?;
            let (x, t) = q.grid.build()?;
            if x.node(0.0).is_none() || t.node(0.0).is_none() {
                return err("both axes must contain 0 as a node");
            }
            let mut options = GoursatOptions::default();
            if let Some(o) = q.options {
                options.n = o.n.unwrap_or(options.n);
                options.k = o.k.unwrap_or(options.k);
                options.tail_tol = o.tail_tol.unwrap_or(options.tail_tol);
                options.spectrum_tol = o.spectrum_tol.unwrap_or(options.spectrum_tol);
            }
            if !(8..=1024).contains(&options.n) || options.k == 0 || 2 * options.k >= options.n {
                return err("options need 8 ≤ n ≤ 1024 and 0 < 2k < n");
            }
            let data = match q.data {
                GoursatDataSpec::Profile { xi, profile, scale, eta_generator, rate } => {
                    let xi = matrix(&xi, n, "xi")?;
                    let generator = matrix(&eta_generator, n, "eta_generator")?;
                    if !(scale.is_finite() && rate.is_finite()) {
                        return err("scale and rate must be finite");
                    }
                    let back = ctx.from_perp_coordinates(&ctx.perp_coordinates(&xi)?);
                    if dist(&back, &xi) > 1e-10 * (1.0 + norm(&xi)) {
                        return err("xi must lie in the orthogonal complement of the centralizer of a");
                    }
                    GoursatData::Profile { xi, profile, scale, generator, rate }
                }
                GoursatDataSpec::Dressed { chain } => GoursatData::Dressed { chain: build_chain(&ctx, &chain)? },
            };
            Experiment::Goursat { x, t, data, options }
        }
        Command::FiniteType => {
            let q: FiniteTypeParams = params(p, cmd)?;
            if q.m > 4 || q.d > 6 {
                return err("finite-type runs need m ≤ 4 and d ≤ 6");
            }
            let ec = EllipticContext::new(ctx.clone(), q.m, q.d, q.splitting)?;
            if q.potential.coeffs.is_empty() || q.potential.coeffs.len() > 13 || q.potential.min.abs() > 6 {
                return err("potential needs 1..=13 coefficients starting at |min| ≤ 6");
            }
            let coeffs = q
                .potential
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, m)| matrix(m, n, &format!("potential.coeffs[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let potential = LaurentLoop::new(n, q.potential.min, coeffs);
            ec.validate_potential(&potential)?;
            let (x, y) = q.grid.build()?;
            let substeps = q.substeps.unwrap_or(loopsol::elliptic::DEFAULT_SUBSTEPS);
            if !(1..=64).contains(&substeps) {
                return err("substeps must lie in 1..=64");
            }
            Experiment::FiniteType { ec, potential, x, y, substeps }
        }
        Command::Verify => match params::<VerifyParams>(p, cmd)? {
            VerifyParams::Equation { equation, inputs, b, j } => {
                let equation = match equation.as_str() {
                    "flow" => {
                        let j = j.ok_or_else(|| ConfigError("equation `flow` needs j".into()))?;
                        Equation::Flow { b: b_or_default(&ctx, b.as_ref())?, j }
                    }
                    t => Equation::from_tag(t)?,
                };
                if inputs.len() != equation.arity() {
                    return err(format!("`{}` takes {} input file(s)", equation.tag(), equation.arity()));
                }
                let mut fields = Vec::new();
                let mut input_bytes = Vec::new();
                for path in &inputs {
                    let full = base_dir.join(path);
                    let bytes = std::fs::read(&full).map_err(|e| ConfigError(format!("{}: {e}", full.display())))?;
                    let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError(format!("{}: not UTF-8", full.display())))?;
                    let tag = path.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
                    fields.push(SolutionGrid::from_csv(&text, tag, &ctx.id).map_err(|e| ConfigError(format!("{}: {e}", full.display())))?);
                    input_bytes.push(bytes);
                }
                Experiment::VerifyEquation { equation, fields, input_bytes }
            }
            VerifyParams::Birkhoff { count, k, amplitude } => {
                if !(1..=1000).contains(&count) || !(1..=32).contains(&k) || !(amplitude.is_finite() && amplitude > 0.0) {
                    return err("birkhoff check needs 1 ≤ count ≤ 1000, 1 ≤ k ≤ 32 and a positive amplitude");
                }
                Experiment::VerifyBirkhoff { count, k, amplitude }
            }
        },
        Command::Extract => {
            let q: ExtractParams = params(p, cmd)?;
            let hierarchy = q.hierarchy.build(&ctx)?;
            match (q.kind, &hierarchy) {
                (ImmersionKind::Harmonic, Hierarchy::Minus1) => {}
                (ImmersionKind::Harmonic, _) => return err("harmonic extraction needs the minus1 hierarchy"),
                (ImmersionKind::Cartan, _) if ctx.sigma.is_none() => return err("the Cartan map needs a context with σ"),
                (_, Hierarchy::Uu0) => {}
                _ => return err("curved-flat and Cartan extraction need the uu0 hierarchy"),
            }
            let chain = build_chain(&ctx, &q.chain)?;
            let (x, t) = q.grid.build()?;
            Experiment::Extract { hierarchy, chain, x, t, kind: q.kind }
        }
    };
    Ok(Validated { config, canonical, ctx, experiment })
}
