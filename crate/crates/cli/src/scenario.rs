//! Scenario files: JSON definitions of an algebra, hyperstates, an optional
//! inclusion and channel, the analyses to run and tolerance overrides.

use std::path::Path;
use std::sync::Arc;

use ncpb_core::algebra::{GnsSpace, TracialAlgebra, Weights};
use ncpb_core::concrete::ConcreteAlgebra;
use ncpb_core::dilation::UcpMap;
use ncpb_core::entropy::{stationary_state_solve, Inclusion, InclusionState};
use ncpb_core::hyperstate::Hyperstate;
use ncpb_core::linalg::{c, Mat};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Failure to read, parse or validate a scenario. Maps to exit code 3.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{origin}: {path} at line {line}, column {column}: {message}")]
    Syntax {
        origin: String,
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: {field}: {message}")]
    Invalid {
        origin: String,
        field: String,
        message: String,
    },
}

/// Complex matrix written as rows of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(pub Mat);

impl TryFrom<Vec<Vec<[f64; 2]>>> for CMatrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> Result<Self, String> {
        let n = rows.len();
        if n == 0 {
            return Err("matrix has no rows".into());
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(format!("matrix must be square: row {i} has {} entries, expected {n}", rows[i].len()));
        }
        if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err("matrix entries must be finite".into());
        }
        Ok(Self(Mat::from_shape_fn((n, n), |(i, j)| {
            let [re, im] = rows[i][j];
            c(re, im)
        })))
    }
}

impl From<CMatrix> for Vec<Vec<[f64; 2]>> {
    fn from(m: CMatrix) -> Self {
        m.0.outer_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect()
    }
}

impl Serialize for CMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Vec::<Vec<[f64; 2]>>::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        CMatrix::try_from(rows).map_err(serde::de::Error::custom)
    }
}

/// Strictly positive finite weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Weight(pub f64);

impl TryFrom<f64> for Weight {
    type Error = String;

    fn try_from(w: f64) -> Result<Self, String> {
        if w > 0.0 && w.is_finite() {
            Ok(Self(w))
        } else {
            Err(format!("weight must be positive, got {w}"))
        }
    }
}

impl From<Weight> for f64 {
    fn from(w: Weight) -> f64 {
        w.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub blocks: Vec<usize>,
    /// Defaults to uniform weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausTerm {
    pub matrix: CMatrix,
    pub weight: Weight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperstateSpec {
    /// φ(T) = Σ w ⟨T (x*)^, (x*)^⟩ with Σ w x*x = 1.
    Kraus(Vec<KrausTerm>),
    /// A density on L²(M,τ), taken as given and checked by the analyses.
    Density(CMatrix),
    /// φ_e.
    Identity,
}

/// Second hyperstate for the tensor analysis, on its own algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartnerSpec {
    pub algebra: AlgebraSpec,
    pub hyperstate: HyperstateSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSpec {
    /// A = M.
    Identity,
    /// A = B(L²(M,τ)) through the left action.
    Gns,
    /// Ambient block j holds ⊕_i x_i ⊗ 1_{m[j][i]}.
    Multiplicities(Vec<Vec<usize>>),
    /// Images of M's matrix units in the order of its GNS basis.
    Units(Vec<CMatrix>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoRule {
    /// The φ-stationary state of maximal entropy.
    SolveStationary,
    /// Trace density spread over the multiplicities.
    Default,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Rule(RhoRule),
    Density(CMatrix),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionSpec {
    /// Block sizes of A; implied by `identity` and `gns`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<Vec<usize>>,
    pub embedding: EmbeddingSpec,
    pub rho: RhoSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelSpec {
    /// P_φ on B(L²(M,τ)).
    Poisson,
    /// x ↦ Σ z_n* x z_n on M for the standard form of φ.
    Restriction,
    /// x ↦ Σ K* x K on the full matrix algebra.
    Kraus(Vec<CMatrix>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Classify,
    Harmonic,
    Boundary,
    DoubleErgodicity,
    Mv,
    Foguel,
    Tensor,
    Entropy,
    Furstenberg,
    Gap,
    Dilate,
    VerifyAll,
}

impl Verb {
    pub const ANALYSES: [Verb; 11] = [
        Verb::Classify,
        Verb::Harmonic,
        Verb::Boundary,
        Verb::DoubleErgodicity,
        Verb::Mv,
        Verb::Foguel,
        Verb::Tensor,
        Verb::Entropy,
        Verb::Furstenberg,
        Verb::Gap,
        Verb::Dilate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Classify => "classify",
            Verb::Harmonic => "harmonic",
            Verb::Boundary => "boundary",
            Verb::DoubleErgodicity => "double-ergodicity",
            Verb::Mv => "mv",
            Verb::Foguel => "foguel",
            Verb::Tensor => "tensor",
            Verb::Entropy => "entropy",
            Verb::Furstenberg => "furstenberg",
            Verb::Gap => "gap",
            Verb::Dilate => "dilate",
            Verb::VerifyAll => "verify-all",
        }
    }
}

/// Tolerance overrides; unset fields keep the defaults of [`Tolerances`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cstar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub additivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subadditivity: Option<f64>,
}

impl ToleranceSpec {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Identities that hold exactly in exact arithmetic.
    pub residual: f64,
    /// Sine of subspace angles.
    pub angle: f64,
    /// Choi-Effros C*-axioms.
    pub cstar: f64,
    pub mv: f64,
    /// |λ − Monte-Carlo mean|.
    pub monte_carlo: f64,
    /// Agreement of the entropy routes.
    pub route: f64,
    pub additivity: f64,
    pub gap: f64,
    pub subadditivity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-10,
            angle: 1e-8,
            cstar: 1e-9,
            mv: 1e-8,
            monte_carlo: 1e-3,
            route: 1e-8,
            additivity: 1e-7,
            gap: 1e-8,
            subadditivity: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn resolve(spec: &ToleranceSpec, residual_flag: Option<f64>) -> Self {
        let d = Self::default();
        Self {
            residual: residual_flag.or(spec.residual).unwrap_or(d.residual),
            angle: spec.angle.unwrap_or(d.angle),
            cstar: spec.cstar.unwrap_or(d.cstar),
            mv: spec.mv.unwrap_or(d.mv),
            monte_carlo: spec.monte_carlo.unwrap_or(d.monte_carlo),
            route: spec.route.unwrap_or(d.route),
            additivity: spec.additivity.unwrap_or(d.additivity),
            gap: spec.gap.unwrap_or(d.gap),
            subadditivity: spec.subadditivity.unwrap_or(d.subadditivity),
        }
    }
}

/// Values predicted independently of the code; each one becomes a check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regular: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generating: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strongly_generating: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonic_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_blocks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decays: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilation_dims: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub algebra: AlgebraSpec,
    pub hyperstate: HyperstateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<PartnerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclusion: Option<InclusionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    /// Analyses for `verify-all`; empty means every applicable one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub analyses: Vec<Verb>,
    #[serde(default, skip_serializing_if = "ToleranceSpec::is_empty")]
    pub tolerances: ToleranceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Parses and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, InputError> {
    crate::run::load(path).map(|(sc, _)| sc)
}

/// Structural parse; semantic validation happens in [`Scenario::build`].
pub fn parse_str(text: &str, origin: &str) -> Result<Scenario, InputError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        InputError::Syntax {
            origin: origin.to_string(),
            path,
            line: inner.line(),
            column: inner.column(),
            message: strip_position(&inner.to_string()),
        }
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(k) => msg[..k].to_string(),
        None => msg.to_string(),
    }
}

pub fn emit(sc: &Scenario) -> String {
    serde_json::to_string_pretty(sc).expect("scenarios serialize")
}

/// SHA-256 of the canonical compact serialization.
pub fn scenario_hash(sc: &Scenario) -> String {
    let canonical = serde_json::to_string(sc).expect("scenarios serialize");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Module inputs assembled from a scenario.
pub struct Built {
    pub gns: Arc<GnsSpace>,
    pub phi: Hyperstate,
    pub partner: Option<Hyperstate>,
    pub inclusion: Option<InclusionBuild>,
    pub channel: Option<UcpMap>,
}

pub enum InclusionBuild {
    State(InclusionState),
    /// Stationary solve failed or no state could be formed.
    Unavailable { inclusion: Inclusion, reason: String },
}

fn invalid(field: impl Into<String>, message: impl std::fmt::Display) -> InputError {
    InputError::Invalid {
        origin: String::new(),
        field: field.into(),
        message: message.to_string(),
    }
}

fn core_invalid(prefix: &str, e: ncpb_core::Error) -> InputError {
    match e {
        ncpb_core::Error::Validation { field, message } => invalid(format!("{prefix}.{field}"), message),
        other => invalid(prefix, other),
    }
}

fn build_algebra(spec: &AlgebraSpec, field: &str) -> Result<TracialAlgebra, InputError> {
    let weights = spec.weights.clone().unwrap_or(Weights::Named(ncpb_core::algebra::WeightRule::Uniform));
    TracialAlgebra::new(spec.blocks.clone(), weights).map_err(|e| core_invalid(field, e))
}

fn build_hyperstate(gns: &Arc<GnsSpace>, spec: &HyperstateSpec, field: &str) -> Result<Hyperstate, InputError> {
    match spec {
        HyperstateSpec::Identity => Ok(Hyperstate::identity(gns.clone())),
        HyperstateSpec::Density(m) => {
            Hyperstate::from_density_unchecked(gns.clone(), m.0.clone()).map_err(|e| core_invalid(field, e))
        }
        HyperstateSpec::Kraus(terms) => {
            let fam: Vec<(Mat, f64)> = terms.iter().map(|t| (t.matrix.0.clone(), t.weight.0)).collect();
            Hyperstate::from_kraus(gns.clone(), &fam).map_err(|e| core_invalid(field, e))
        }
    }
}

impl Scenario {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "unnamed".into())
    }

    pub fn build(&self) -> Result<Built, InputError> {
        let alg = build_algebra(&self.algebra, "algebra")?;
        let gns = GnsSpace::new(alg.clone());
        let phi = build_hyperstate(&gns, &self.hyperstate, "hyperstate")?;
        let partner = match &self.partner {
            None => None,
            Some(p) => {
                let a = build_algebra(&p.algebra, "partner.algebra")?;
                Some(build_hyperstate(&GnsSpace::new(a), &p.hyperstate, "partner.hyperstate")?)
            }
        };
        let inclusion = match &self.inclusion {
            None => None,
            Some(spec) => Some(build_inclusion(&gns, &phi, spec)?),
        };
        let channel = match &self.channel {
            None => None,
            Some(ChannelSpec::Poisson) => Some(UcpMap::poisson(&phi).map_err(|e| core_invalid("channel", e))?),
            Some(ChannelSpec::Restriction) => {
                let units: Vec<Mat> = alg.units().into_iter().map(|(b, i, j)| alg.unit(b, i, j)).collect();
                let m = ConcreteAlgebra::from_spanning(&units, alg.rep_dim()).map_err(|e| core_invalid("channel", e))?;
                let kraus = phi.standard_form().family.clone();
                Some(UcpMap::from_kraus(m, kraus).map_err(|e| core_invalid("channel", e))?)
            }
            Some(ChannelSpec::Kraus(ks)) => {
                let d = ks.first().map(|k| k.0.nrows()).ok_or_else(|| invalid("channel.kraus", "no operators"))?;
                if let Some(i) = ks.iter().position(|k| k.0.nrows() != d) {
                    return Err(invalid(format!("channel.kraus[{i}]"), format!("expected {d}×{d}")));
                }
                let kraus = ks.iter().map(|k| k.0.clone()).collect();
                Some(UcpMap::from_kraus(ConcreteAlgebra::full(d), kraus).map_err(|e| core_invalid("channel", e))?)
            }
        };
        Ok(Built {
            gns,
            phi,
            partner,
            inclusion,
            channel,
        })
    }
}

fn build_inclusion(gns: &Arc<GnsSpace>, phi: &Hyperstate, spec: &InclusionSpec) -> Result<InclusionBuild, InputError> {
    let m = gns.algebra();
    let inc = match &spec.embedding {
        EmbeddingSpec::Identity => Inclusion::identity(m),
        EmbeddingSpec::Gns => Inclusion::gns(gns),
        EmbeddingSpec::Multiplicities(mult) => {
            let a = spec
                .ambient
                .clone()
                .ok_or_else(|| invalid("inclusion.ambient", "required with explicit multiplicities"))?;
            Inclusion::with_multiplicities(m, a, mult).map_err(|e| core_invalid("inclusion", e))?
        }
        EmbeddingSpec::Units(us) => {
            let a = spec
                .ambient
                .clone()
                .ok_or_else(|| invalid("inclusion.ambient", "required with explicit unit images"))?;
            Inclusion::new(m.clone(), a, us.iter().map(|u| u.0.clone()).collect())
                .map_err(|e| core_invalid("inclusion", e))?
        }
    };
    if let Some(a) = &spec.ambient {
        if a.as_slice() != inc.ambient_blocks() {
            return Err(invalid(
                "inclusion.ambient",
                format!("embedding implies blocks {:?}", inc.ambient_blocks()),
            ));
        }
    }
    match &spec.rho {
        RhoSpec::Density(r) => InclusionState::new(inc, r.0.clone())
            .map(InclusionBuild::State)
            .map_err(|e| core_invalid("inclusion.rho", e)),
        RhoSpec::Rule(RhoRule::Default) => InclusionState::with_default_rho(inc)
            .map(InclusionBuild::State)
            .map_err(|e| core_invalid("inclusion.rho", e)),
        RhoSpec::Rule(RhoRule::SolveStationary) => match stationary_state_solve(phi, &inc) {
            Ok(s) => match InclusionState::new(inc.clone(), s.rho) {
                Ok(st) => Ok(InclusionBuild::State(st)),
                Err(e) => Ok(InclusionBuild::Unavailable {
                    inclusion: inc,
                    reason: e.to_string(),
                }),
            },
            Err(e) => Ok(InclusionBuild::Unavailable {
                inclusion: inc,
                reason: e.to_string(),
            }),
        },
    }
}
