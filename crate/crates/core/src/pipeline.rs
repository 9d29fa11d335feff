//! The end-to-end run: ball → program → pre-solve → constrained solve →
//! certificate, with every stage callable on its own.
//!
//! A run that does not end in a positive certified bound produces a
//! [`FailureReport`] naming the stage, instead of a certificate.

use std::path::PathBuf;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};

use crate::certify::{certify, Certificate, CertifySettings};
use crate::error::{Error, Result};
use crate::group::{elementary_generators, BallBundle, BallOptions, GeneratingSet, Ring};
use crate::sdp::svec::svec;
use crate::sdp::{build_constrained, build_unconstrained, ConicProgram, SolverSolution, SolverStatus, SosInstance};
use crate::solver::{
    polish, project_slack, solve_on_faces, sos_faces, IterationLog, PolishSettings, Settings, SolveReport, SolverState,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupFamily {
    #[default]
    SL,
}

fn default_delta() -> f64 {
    0.01
}

fn default_bits() -> u32 {
    CertifySettings::default().denominator_bits
}

/// Fields given in the input replace those of `base`; the rest keep its values.
fn overlay<'de, D: Deserializer<'de>>(d: D, base: Settings) -> std::result::Result<Settings, D::Error> {
    let given = Value::deserialize(d)?;
    let Value::Object(fields) = given else {
        return Err(D::Error::custom("solver settings must be a table"));
    };
    let mut merged = serde_json::to_value(base).map_err(D::Error::custom)?;
    for (k, v) in fields {
        merged[k] = v;
    }
    serde_json::from_value(merged).map_err(D::Error::custom)
}

fn presolve_overlay<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Settings, D::Error> {
    overlay(d, Settings::presolve())
}

fn solve_overlay<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Settings, D::Error> {
    overlay(d, Settings::constrained())
}

/// Where artifacts go. Unset paths are not written.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub certificate: Option<PathBuf>,
    /// Failure report, written instead of a certificate.
    pub report: Option<PathBuf>,
    /// Iteration log, one JSON object per line.
    pub log: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub family: GroupFamily,
    pub n: usize,
    pub ring: Ring,
    /// Radius `d` of the basis ball.
    pub d: u32,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "Settings::presolve", deserialize_with = "presolve_overlay")]
    pub presolve: Settings,
    #[serde(default = "Settings::constrained", deserialize_with = "solve_overlay")]
    pub solve: Settings,
    #[serde(default)]
    pub polish: PolishSettings,
    #[serde(default = "default_bits")]
    pub denominator_bits: u32,
    #[serde(default)]
    pub ball: BallOptions,
    #[serde(default)]
    pub output: OutputPaths,
}

impl RunConfig {
    pub fn new(n: usize, ring: Ring, d: u32) -> RunConfig {
        RunConfig {
            family: GroupFamily::SL,
            n,
            ring,
            d,
            delta: default_delta(),
            presolve: Settings::presolve(),
            solve: Settings::constrained(),
            polish: PolishSettings::default(),
            denominator_bits: default_bits(),
            ball: BallOptions::default(),
            output: OutputPaths::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument("n must be at least 2".into()));
        }
        if self.d < 1 {
            return Err(Error::InvalidArgument("d must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument("delta must lie in (0, 1)".into()));
        }
        if !(1..=200).contains(&self.denominator_bits) {
            return Err(Error::InvalidArgument("denominator_bits must lie in 1..=200".into()));
        }
        self.presolve.validate()?;
        self.solve.validate()
    }

    /// TOML when the text starts like a table, JSON otherwise.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let config: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn generators(&self) -> Result<GeneratingSet> {
        match self.family {
            GroupFamily::SL => elementary_generators(self.n, self.ring),
        }
    }

    pub fn certify_settings(&self) -> CertifySettings {
        CertifySettings { denominator_bits: self.denominator_bits }
    }

    /// The solver part of the configuration, as recorded in certificates.
    pub fn solver_settings(&self) -> Result<Value> {
        Ok(json!({
            "delta": self.delta,
            "presolve": serde_json::to_value(&self.presolve)?,
            "solve": serde_json::to_value(&self.solve)?,
            "polish": serde_json::to_value(&self.polish)?,
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Ball,
    Presolve,
    Solve,
    Certify,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Input => "input",
            Stage::Ball => "ball",
            Stage::Presolve => "presolve",
            Stage::Solve => "solve",
            Stage::Certify => "certify",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The bound came out (or would come out) non-positive.
    NonPositive,
    /// Stall, iteration limit or infeasibility in a solve.
    Solver,
    InvalidInput,
    Other,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::NonPositive => 2,
            FailureKind::Solver => 3,
            FailureKind::InvalidInput => 4,
            FailureKind::Other => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
    pub diagnostics: Value,
}

impl FailureReport {
    pub fn from_error(stage: Stage, err: &Error) -> FailureReport {
        let kind = match err {
            Error::Io(_) | Error::Numerical(_) => FailureKind::Other,
            _ => FailureKind::InvalidInput,
        };
        FailureReport { stage, kind, message: err.to_string(), diagnostics: Value::Null }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Result of the two solves, everything the certifier needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveArtifact {
    /// Optimal value estimate from the pre-solve.
    pub lambda0: f64,
    pub delta: f64,
    pub presolve: SolveReport,
    pub solve: SolveReport,
    /// Rank of the polished face and the residuals after polishing.
    pub polish: Option<(usize, (f64, f64, f64))>,
    /// Constrained solution; its status accounts for polishing.
    pub solution: SolverSolution,
    /// Recorded verbatim in the certificate.
    pub solver_settings: Value,
}

impl SolveArtifact {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<SolveArtifact> {
        let a: SolveArtifact = serde_json::from_str(text)?;
        // re-validate the embedded solution
        SolverSolution::from_json(&serde_json::to_string(&a.solution)?)?;
        Ok(a)
    }
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Certified(Box<Certificate>),
    Failed(FailureReport),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Certified(_) => 0,
            Outcome::Failed(r) => r.exit_code(),
        }
    }
}

/// Previously published analytic bounds `(lower, upper)` on the Kazhdan
/// constant of SL(n, R) for its elementary generators, where known.
pub fn kazhdan_baselines(n: usize, ring: Ring) -> Option<(f64, f64)> {
    let lower = match (n, ring) {
        (2, Ring::IntegersModP(_)) => 0.0013444,
        (3, Ring::IntegersModP(_)) => 0.0013268,
        (4, Ring::IntegersModP(_)) => 0.0013123,
        (5, Ring::IntegersModP(_)) => 0.0012999,
        (3, Ring::Integers) => 0.0010721,
        (4, Ring::Integers) => 0.0010593,
        (5, Ring::Integers) => 0.0010483,
        _ => return None,
    };
    let upper = match n {
        2 => 1.0,
        3 => 0.81650,
        4 => 0.70711,
        _ => 0.63246,
    };
    Some((lower, upper))
}

pub fn build_stage(config: &RunConfig) -> Result<BallBundle> {
    BallBundle::generate(&config.generators()?, config.d, &config.ball)
}

/// `G_Δ = ½ Σ_s (e − s)(e − s)ᵀ` on the basis, whose Gram image is `Δ`.
fn laplacian_gram(inst: &SosInstance) -> Result<Vec<f64>> {
    let basis = inst.basis();
    let side = basis.len();
    let e = basis.elements().position(|g| g.is_identity()).ok_or_else(|| Error::MissingElement("identity".into()))?;
    let mut g = vec![0.0; side * side];
    for s in inst.generators().elements() {
        let k = basis.index_of(s).ok_or_else(|| Error::MissingElement("generator".into()))?;
        g[e * side + e] += 0.5;
        g[k * side + k] += 0.5;
        g[e * side + k] -= 0.5;
        g[k * side + e] -= 0.5;
    }
    Ok(g)
}

/// Warm start for the constrained program from a pre-solve state. Adding
/// `(λ − u)·G_Δ` to `P` and setting `λ = u` keeps the equality rows exactly
/// as satisfied as before; the dual is the unit multiplier on `λ ≤ u`.
pub fn constrained_warm_start(
    inst: &SosInstance,
    from: &ConicProgram,
    to: &ConicProgram,
    state: &SolverState,
) -> Result<SolverState> {
    let mut warm = state.constrained_warm_start(from, to)?;
    let (lam, p) = match (to.variable("lambda"), to.variable("P")) {
        (Some(l), Some(p)) => (l.offset, p.clone()),
        _ => return Err(Error::Schema("program has no lambda/P variables".into())),
    };
    let u = to.b()[to.zero_rows() + 1];
    let shift = warm.x[lam] - u;
    let g = svec(&laplacian_gram(inst)?, inst.basis().len());
    if g.len() != p.len {
        return Err(Error::Mismatch("basis differs from the Gram block".into()));
    }
    for (x, gv) in warm.x[p.offset..p.offset + p.len].iter_mut().zip(&g) {
        *x += shift * gv;
    }
    warm.x[lam] = u;
    warm.s = to.b().iter().zip(to.apply(&warm.x)).map(|(b, a)| b - a).collect();
    warm.s[..to.zero_rows()].fill(0.0);
    project_slack(to, &mut warm.s)?;
    Ok(warm)
}

/// Pre-solve, constrained solve and polish. A failure report comes back
/// when the pre-solve value is not positive or the final status is not
/// optimal.
pub fn solve_stage(
    inst: &SosInstance,
    config: &RunConfig,
    observer: &mut dyn FnMut(Stage, &IterationLog),
) -> Result<std::result::Result<SolveArtifact, FailureReport>> {
    let unconstrained = build_unconstrained(inst);
    let (pre, pre_state) =
        solve_on_faces(&unconstrained, &config.presolve, None, &sos_faces(&unconstrained), &mut |l| {
            observer(Stage::Presolve, l)
        })?;
    let lam = unconstrained.variable("lambda").map(|v| v.offset).unwrap_or(0);
    let lambda0 = pre_state.x[lam];
    let diag = |extra: Value| -> Value {
        let mut v = json!({ "lambda0": lambda0, "presolve": pre });
        if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
            m.extend(e);
        }
        v
    };
    if let SolverStatus::InfeasibleCertificate { .. } = pre.status {
        return Ok(Err(FailureReport {
            stage: Stage::Presolve,
            kind: FailureKind::Solver,
            message: format!("pre-solve ended with status {}", pre.status),
            diagnostics: diag(json!({})),
        }));
    }
    if !(lambda0 > 0.0) {
        return Ok(Err(FailureReport {
            stage: Stage::Presolve,
            kind: FailureKind::NonPositive,
            message: format!("pre-solve value {lambda0} is not positive"),
            diagnostics: diag(json!({})),
        }));
    }

    let constrained = build_constrained(inst, lambda0, config.delta)?;
    let warm = constrained_warm_start(inst, &unconstrained, &constrained, &pre_state)?;
    let faces = sos_faces(&constrained);
    let (main, mut state) =
        solve_on_faces(&constrained, &config.solve, Some(&warm), &faces, &mut |l| observer(Stage::Solve, l))?;
    let mut res = (main.primal_residual, main.dual_residual, main.gap);
    let merit = |r: (f64, f64, f64)| r.0.max(r.1).max(r.2);
    let mut polished = None;
    if config.polish.enabled && !matches!(main.status, SolverStatus::InfeasibleCertificate { .. }) {
        let kernel: Vec<Vec<f64>> = faces.iter().flat_map(|f| f.kernel.clone()).collect();
        if let Some(p) = polish(&constrained, &state, &kernel, std::slice::from_ref(&warm.y), &config.polish)? {
            polished = Some((p.rank, p.residuals));
            if merit(p.residuals) < merit(res) {
                res = p.residuals;
                state = p.state;
            }
        }
    }
    let eps = config.solve.eps;
    let status = if merit(res) <= eps { SolverStatus::Optimal { eps } } else { main.status };
    let solution = SolverSolution::from_primal(&constrained, &state.x, res, status, main.iterations)?;
    if !status.is_optimal() {
        return Ok(Err(FailureReport {
            stage: Stage::Solve,
            kind: FailureKind::Solver,
            message: format!("constrained solve ended with status {status}"),
            diagnostics: diag(json!({ "solve": main, "polish": polished })),
        }));
    }
    Ok(Ok(SolveArtifact {
        lambda0,
        delta: config.delta,
        presolve: pre,
        solve: main,
        polish: polished,
        solution,
        solver_settings: config.solver_settings()?,
    }))
}

/// Certifies a solve artifact. A non-positive bound becomes a failure report
/// carrying the would-be certificate values.
pub fn certify_stage(
    inst: &SosInstance,
    artifact: &SolveArtifact,
    settings: &CertifySettings,
) -> Result<std::result::Result<Certificate, FailureReport>> {
    let cert = certify(
        inst,
        artifact.lambda0,
        artifact.delta,
        &artifact.solution,
        settings,
        artifact.solver_settings.clone(),
    )?;
    if cert.lambda_certified > 0.0 {
        return Ok(Ok(cert));
    }
    Ok(Err(FailureReport {
        stage: Stage::Certify,
        kind: FailureKind::NonPositive,
        message: format!("certified bound {} is not positive", cert.lambda_certified),
        diagnostics: json!({
            "lambda0": artifact.lambda0,
            "r_l1_upper": cert.r_l1_upper,
            "m": cert.m,
            "lambda_certified": cert.lambda_certified,
        }),
    }))
}

/// Runs every stage. Errors inside a stage become failure reports tagged
/// with that stage.
pub fn pipeline(config: &RunConfig, observer: &mut dyn FnMut(Stage, &IterationLog)) -> Outcome {
    let fail = |stage, e: Error| Outcome::Failed(FailureReport::from_error(stage, &e));
    if let Err(e) = config.validate() {
        return fail(Stage::Input, e);
    }
    let inst = match build_stage(config).and_then(SosInstance::from_bundle) {
        Ok(i) => i,
        Err(e) => return fail(Stage::Ball, e),
    };
    let artifact = match solve_stage(&inst, config, observer) {
        Ok(Ok(a)) => a,
        Ok(Err(r)) => return Outcome::Failed(r),
        Err(e) => return fail(Stage::Solve, e),
    };
    match certify_stage(&inst, &artifact, &config.certify_settings()) {
        Ok(Ok(c)) => Outcome::Certified(Box::new(c)),
        Ok(Err(r)) => Outcome::Failed(r),
        Err(e) => fail(Stage::Certify, e),
    }
}
