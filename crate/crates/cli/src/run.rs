//! Verbs: each analysis delegates to the core operations and turns their
//! residuals into checks.

use std::path::Path;
use std::time::Instant;

use ncpb_core::dilation::{bhat_dilate, har_stability_check, UcpMap, DEFAULT_DIM_CAP};
use ncpb_core::entropy::{
    entropy_additivity_check, entropy_bounds_check, entropy_gap_bound, entropy_sequence,
    furstenberg_entropy, modular_data, stationarity_residual, vn_entropy, zero_entropy_check,
    InclusionState,
};
use ncpb_core::harmonic::{
    boundary_build, cesaro_expectation, double_ergodicity, expectation_residuals, fixed_space,
    foguel_test, mv_monte_carlo, random_operator, relative_commutant, tensor_split_check, Decay,
    MvProjector,
};
use ncpb_core::hyperstate::{
    classify, orthogonality_residual, poisson_superop, reconstruction_residual, Classification,
};
use ncpb_core::linalg::*;
use ncpb_core::{random, Error};
use serde_json::json;

use crate::report::{AnalysisReport, Check, Report, Summary, Verdict, SCHEMA};
use crate::scenario::{
    parse_str, scenario_hash, Built, HyperstateSpec, InclusionBuild, InputError, Scenario, Tolerances, Verb,
};

pub const DEFAULT_SEED: u64 = 0x5eed;
pub const DEFAULT_DEPTH: usize = 3;
/// Iterations of the lazy walk in the decay test.
pub const FOGUEL_STEPS: usize = 500;
pub const MV_OPERATORS: usize = 20;
pub const MC_WORD_LENGTH: usize = 8;
pub const MC_CHUNK: usize = 100_000;
pub const MC_MAX_SAMPLES: usize = 3_200_000;
pub const ENTROPY_POWERS: usize = 6;
/// Modular operator identities.
pub const MODULAR_TOL: f64 = 1e-9;
/// Central-difference flow form against the commutator form.
pub const FLOW_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Default)]
pub struct Flags {
    pub tol: Option<f64>,
    pub depth: Option<usize>,
    pub seed: Option<u64>,
    pub dim_cap: Option<usize>,
}

type Out = std::result::Result<AnalysisReport, Error>;

struct Ctx<'a> {
    sc: &'a Scenario,
    b: &'a Built,
    tol: Tolerances,
    seed: u64,
    depth: usize,
    dim_cap: usize,
    class: Classification,
    /// Part of `verify-all`: inapplicable analyses are skipped quietly.
    all: bool,
}

/// Reads, validates and builds a scenario file.
pub fn load(path: &Path) -> Result<(Scenario, Built), InputError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: origin.clone(),
        source,
    })?;
    let sc = parse_str(&text, &origin)?;
    let built = sc.build().map_err(|e| with_origin(e, &origin))?;
    Ok((sc, built))
}

fn with_origin(e: InputError, origin: &str) -> InputError {
    match e {
        InputError::Invalid { field, message, .. } => InputError::Invalid {
            origin: origin.to_string(),
            field,
            message,
        },
        other => other,
    }
}

pub fn run_file(verb: Verb, path: &Path, flags: &Flags) -> Result<Report, InputError> {
    let (sc, built) = load(path)?;
    let mut report = run(verb, &sc, &built, flags).map_err(|e| with_origin(e, &path.display().to_string()))?;
    if report.scenario == "unnamed" {
        report.scenario = path.display().to_string();
    }
    Ok(report)
}

pub fn run(verb: Verb, sc: &Scenario, b: &Built, flags: &Flags) -> Result<Report, InputError> {
    let start = Instant::now();
    let class = classify(&b.phi).map_err(|e| InputError::Invalid {
        origin: String::new(),
        field: "hyperstate".into(),
        message: e.to_string(),
    })?;
    let ctx = Ctx {
        sc,
        b,
        tol: Tolerances::resolve(&sc.tolerances, flags.tol),
        seed: flags.seed.or(sc.seed).unwrap_or(DEFAULT_SEED),
        depth: flags.depth.unwrap_or(DEFAULT_DEPTH),
        dim_cap: flags.dim_cap.unwrap_or(DEFAULT_DIM_CAP),
        class,
        all: verb == Verb::VerifyAll,
    };
    let verbs: Vec<Verb> = match verb {
        Verb::VerifyAll => {
            let listed: Vec<Verb> = sc.analyses.iter().copied().filter(|v| *v != Verb::VerifyAll).collect();
            if listed.is_empty() {
                Verb::ANALYSES.to_vec()
            } else {
                let mut v = vec![Verb::Classify];
                v.extend(listed.into_iter().filter(|v| *v != Verb::Classify));
                v
            }
        }
        v => vec![v],
    };
    let analyses = verbs.into_iter().map(|v| timed(v, &ctx)).collect();
    let mut report = Report {
        schema: SCHEMA,
        library_version: env!("CARGO_PKG_VERSION"),
        scenario: sc.label(),
        scenario_hash: scenario_hash(sc),
        verb,
        seed: ctx.seed,
        tolerances: ctx.tol,
        analyses,
        summary: Summary::default(),
        verdict: Verdict::Skipped,
        wall_clock_s: 0.0,
    };
    report.summarize();
    report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(report)
}

fn timed(v: Verb, ctx: &Ctx) -> AnalysisReport {
    let t = Instant::now();
    let out = match v {
        Verb::Classify => classify_analysis(ctx),
        Verb::Harmonic => harmonic_analysis(ctx),
        Verb::Boundary => boundary_analysis(ctx),
        Verb::DoubleErgodicity => double_ergodicity_analysis(ctx),
        Verb::Mv => mv_analysis(ctx),
        Verb::Foguel => foguel_analysis(ctx),
        Verb::Tensor => tensor_analysis(ctx),
        Verb::Entropy => entropy_analysis(ctx),
        Verb::Furstenberg => furstenberg_analysis(ctx),
        Verb::Gap => gap_analysis(ctx),
        Verb::Dilate => dilate_analysis(ctx),
        Verb::VerifyAll => unreachable!("expanded by run"),
    };
    let mut rep = out.unwrap_or_else(|e| from_error(v, e));
    rep.wall_clock_s = t.elapsed().as_secs_f64();
    rep
}

fn from_error(v: Verb, e: Error) -> AnalysisReport {
    let check = match e {
        Error::SpectralGap { .. }
        | Error::DimensionCap { .. }
        | Error::IllConditioned { .. }
        | Error::NoFaithfulStationary { .. }
        | Error::Precondition { .. }
        | Error::NotRegular { .. }
        | Error::NotBiNormalized { .. }
        | Error::NotStationary { .. } => Check::inconclusive("error", e.to_string()),
        other => Check::holds("error", false, other.to_string()),
    };
    AnalysisReport::new(v, vec![check], serde_json::Value::Null, None)
}

fn value<T: serde::Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).unwrap_or(serde_json::Value::Null)
}

fn regular_strong(ctx: &Ctx) -> Option<String> {
    if ctx.class.regular && ctx.class.strongly_generating {
        None
    } else {
        Some("needs a regular strongly generating hyperstate".into())
    }
}

fn inclusion_state<'a>(ctx: &'a Ctx) -> std::result::Result<&'a InclusionState, AnalysisReport> {
    match &ctx.b.inclusion {
        None => Err(AnalysisReport::skipped(Verb::Furstenberg, "scenario has no inclusion")),
        Some(InclusionBuild::State(s)) => Ok(s),
        Some(InclusionBuild::Unavailable { reason, .. }) => Err(AnalysisReport::new(
            Verb::Furstenberg,
            vec![Check::inconclusive("inclusion.rho", reason.clone())],
            serde_json::Value::Null,
            None,
        )),
    }
}

fn retag(mut r: AnalysisReport, v: Verb) -> AnalysisReport {
    r.analysis = v;
    r
}

fn classify_analysis(ctx: &Ctx) -> Out {
    let phi = &ctx.b.phi;
    let tol = ctx.tol.residual;
    let res = phi.residuals()?;
    let mut checks = vec![
        Check::at_most("hyperstate.hermitian", res.hermitian, tol),
        Check::at_least("hyperstate.min-eigenvalue", res.min_eigenvalue, -tol),
        Check::at_most("hyperstate.trace", res.trace, tol),
        Check::at_most("hyperstate.restriction-to-m", res.extension, tol),
    ];
    let sf = phi.standard_form();
    checks.push(Check::at_most("standard-form.reconstruction", reconstruction_residual(phi), tol));
    checks.push(Check::at_most("standard-form.partition", sf.partition_residual(), tol));
    checks.push(Check::at_most("standard-form.orthogonality", orthogonality_residual(phi), tol));
    let gns = &ctx.b.gns;
    let p = poisson_superop(phi);
    let one = gns.one_hat();
    let mut rng = random::rng(ctx.seed);
    let mut corr: f64 = 0.0;
    for _ in 0..8 {
        let t = random_operator(gns, &mut rng);
        let via_p = vdot(&one, &p.apply(&t).dot(&one));
        corr = corr.max((phi.evaluate(&t) - via_p).norm() / fro_norm(&t).max(1.0));
    }
    checks.push(Check::at_most("correspondence", corr, tol));
    checks.push(Check::at_most("poisson.bimodular", p.bimodular_residual(), tol));
    checks.push(Check::at_most("poisson.unital", p.unital_residual(), tol));
    let cl = &ctx.class;
    if let Some(e) = &ctx.sc.expect {
        let pairs = [
            ("expect.regular", e.regular, cl.regular),
            ("expect.generating", e.generating, cl.generating),
            ("expect.strongly-generating", e.strongly_generating, cl.strongly_generating),
            ("expect.symmetric", e.symmetric, cl.symmetric),
        ];
        for (name, want, got) in pairs {
            if let Some(w) = want {
                checks.push(Check::equal(name, got, w));
            }
        }
    }
    let result = json!({
        "classification": value(cl),
        "residuals": value(&res),
        "standard_form_size": sf.len(),
        "standard_form_weights": sf.weights,
    });
    Ok(AnalysisReport::new(Verb::Classify, checks, result, None))
}

fn harmonic_analysis(ctx: &Ctx) -> Out {
    let phi = &ctx.b.phi;
    let p = poisson_superop(phi);
    let har = fixed_space(&p)?;
    let e = cesaro_expectation(&p)?;
    let er = expectation_residuals(&p, &e, &har)?;
    let t = ctx.tol.cstar;
    let mut checks = vec![
        Check::at_most("harmonic.contains-m", har.contains_m_residual, ctx.tol.angle),
        Check::at_most("expectation.idempotent", er.idempotence, t),
        Check::at_most("expectation.unital", er.unital, t),
        Check::at_least("expectation.choi-min-eigenvalue", er.choi_min_eigenvalue, -t),
        Check::at_most("expectation.absorbs-p", er.absorbs_p, t),
        Check::at_most("expectation.range", er.range, t),
    ];
    let alg = ctx.b.gns.algebra();
    if alg.is_abelian() && ctx.class.strongly_generating && ctx.class.symmetric {
        checks.push(Check::equal("choquet-deny", har.dim(), ctx.b.gns.dim()));
    }
    if let Some(d) = ctx.sc.expect.as_ref().and_then(|e| e.harmonic_dim) {
        checks.push(Check::equal("expect.harmonic-dim", har.dim(), d));
    }
    let result = json!({
        "harmonic_dim": har.dim(),
        "algebra_dim": ctx.b.gns.dim(),
        "spectral_gap": har.spectral_gap,
        "contains_m_residual": har.contains_m_residual,
        "expectation": value(&er),
    });
    Ok(AnalysisReport::new(Verb::Harmonic, checks, result, None))
}

fn boundary_analysis(ctx: &Ctx) -> Out {
    let bd = boundary_build(&ctx.b.phi)?;
    let r = bd.residuals;
    let t = ctx.tol.cstar;
    let mut checks = vec![
        Check::at_most("cstar.associativity", r.associativity, t),
        Check::at_most("cstar.involution", r.involution, t),
        Check::at_most("cstar.positivity", r.positivity, t),
        Check::at_most("expectation.idempotent", r.idempotence, t),
        Check::at_most("expectation.unital", r.unital, t),
        Check::at_least("expectation.choi-min-eigenvalue", r.choi_min_eigenvalue, -t),
        Check::at_most("blocks.decomposition", r.block_decomposition, t),
    ];
    let rep = bd.report();
    if let Some(want) = ctx.sc.expect.as_ref().and_then(|e| e.boundary_blocks.clone()) {
        let mut got = rep.boundary_blocks.clone();
        let mut want = want;
        got.sort_unstable();
        want.sort_unstable();
        checks.push(Check::equal("expect.boundary-blocks", got, want));
    }
    let rc = relative_commutant(&bd)?;
    let result = json!({ "boundary": value(&rep), "relative_commutant": value(&rc) });
    Ok(AnalysisReport::new(Verb::Boundary, checks, result, None))
}

fn double_ergodicity_analysis(ctx: &Ctx) -> Out {
    if let Some(why) = regular_strong(ctx) {
        return Ok(AnalysisReport::skipped(Verb::DoubleErgodicity, why));
    }
    let de = double_ergodicity(&ctx.b.phi)?;
    let checks = vec![
        Check::equal("intersection-dim", de.intersection_dim, de.center_dim),
        Check::at_most("intersection.subspace-sin", de.subspace_sin, ctx.tol.angle),
        Check::at_most("intersection.contains-center", de.contains_center_residual, ctx.tol.angle),
    ];
    Ok(AnalysisReport::new(Verb::DoubleErgodicity, checks, value(&de), None))
}

/// The scenario's own Kraus family when every member is unitary.
fn unitary_family(ctx: &Ctx) -> Option<(Vec<Mat>, Vec<f64>)> {
    let HyperstateSpec::Kraus(terms) = &ctx.sc.hyperstate else {
        return None;
    };
    let d = ctx.b.gns.algebra().rep_dim();
    let unitary = terms
        .iter()
        .all(|t| fro_norm(&(dagger(&t.matrix.0).dot(&t.matrix.0) - eye(d))) <= 1e-10);
    unitary.then(|| {
        (
            terms.iter().map(|t| t.matrix.0.clone()).collect(),
            terms.iter().map(|t| t.weight.0).collect(),
        )
    })
}

fn mv_analysis(ctx: &Ctx) -> Out {
    if let Some(why) = regular_strong(ctx) {
        return Ok(AnalysisReport::skipped(Verb::Mv, why));
    }
    let gns = &ctx.b.gns;
    let proj = MvProjector::new(&ctx.b.phi)?;
    let mut rng = random::rng(ctx.seed ^ 0x6d76);
    let factor = gns.algebra().is_factor();
    let family = unitary_family(ctx);
    let (mut center, mut commute, mut scalar): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut checks = vec![];
    let mut estimate = None;
    for _ in 0..MV_OPERATORS {
        let t = hermitian_part(&random_operator(gns, &mut rng));
        let t = t.mapv(|z| z / op_norm(&t).unwrap_or(1.0).max(1e-300));
        let r = proj.project(&t);
        center = center.max(r.center_residual);
        commute = commute.max(r.commutation_residual);
        if let Some(s) = r.scalar_residual {
            scalar = scalar.max(s);
        }
    }
    if let (true, Some((us, ws))) = (factor, &family) {
        // T = projection onto the cyclic vector
        let one = gns.hat(&eye(gns.algebra().rep_dim()));
        let p = Mat::from_shape_fn((one.len(), one.len()), |(i, j)| one[i] * one[j].conj());
        let lam = proj.project(&p).scalar.map_or(f64::NAN, |l| l.re);
        let target = ctx.tol.monte_carlo;
        let mut est = mv_monte_carlo(gns, us, ws, &p, MC_CHUNK, MC_WORD_LENGTH, ctx.seed);
        let mut chunk = 1;
        while 3.0 * est.std_error > target && est.samples < MC_MAX_SAMPLES {
            let more = mv_monte_carlo(gns, us, ws, &p, MC_CHUNK, MC_WORD_LENGTH, ctx.seed.wrapping_add(chunk));
            est = est.pool(&more);
            chunk += 1;
        }
        if 3.0 * est.std_error > target {
            checks.push(Check::inconclusive(
                "monte-carlo",
                format!("standard error {:.2e} too large for tolerance {target:.0e}", est.std_error),
            ));
        } else {
            checks.push(Check::at_most("monte-carlo", (est.mean - lam).abs(), target));
        }
        estimate = Some(json!({ "lambda": lam, "estimate": value(&est) }));
    }
    checks.insert(0, Check::at_most("projection.center", center, ctx.tol.mv));
    checks.insert(1, Check::at_most("projection.commutes-with-m", commute, ctx.tol.mv));
    if factor {
        checks.insert(2, Check::at_most("projection.scalar", scalar, ctx.tol.mv));
    }
    let note = match (factor, family.is_some()) {
        (true, true) => None,
        (false, _) => Some("Monte-Carlo oracle needs a factor".to_string()),
        (true, false) => Some("Monte-Carlo oracle needs a unitary Kraus family".to_string()),
    };
    let result = json!({
        "operators": MV_OPERATORS,
        "center_residual": center,
        "commutation_residual": commute,
        "scalar_residual": factor.then_some(scalar),
        "monte_carlo": estimate,
    });
    Ok(AnalysisReport::new(Verb::Mv, checks, result, note))
}

fn foguel_analysis(ctx: &Ctx) -> Out {
    let gns = &ctx.b.gns;
    let probes: Vec<Mat> = (0..gns.dim()).map(|k| gns.basis_element(k)).collect();
    let mut r = foguel_test(&ctx.b.phi, &probes, FOGUEL_STEPS)?;
    let mut checks = vec![];
    match r.agree {
        None => checks.push(Check::inconclusive(
            "decay-verdict",
            format!("final commutator norm {:.3e} between thresholds", r.final_norm),
        )),
        Some(a) => checks.push(Check::holds(
            "decay-matches-fixed-space",
            a,
            format!("{:?}, harmonic dim {} of {}", r.decay, r.harmonic_dim, r.algebra_dim),
        )),
    }
    if let Some(want) = ctx.sc.expect.as_ref().and_then(|e| e.decays) {
        if r.decay != Decay::Inconclusive {
            checks.push(Check::equal("expect.decays", r.decay == Decay::Decays, want));
        }
    }
    // the full trajectory is large; keep its endpoints
    for n in r.norms.iter_mut() {
        let last = n.last().copied();
        let first = n.first().copied();
        n.clear();
        n.extend(first.into_iter().chain(last));
    }
    Ok(AnalysisReport::new(Verb::Foguel, checks, value(&r), None))
}

fn tensor_analysis(ctx: &Ctx) -> Out {
    let Some(psi) = &ctx.b.partner else {
        return Ok(AnalysisReport::skipped(Verb::Tensor, "scenario has no partner hyperstate"));
    };
    if let Some(why) = regular_strong(ctx) {
        return Ok(AnalysisReport::skipped(Verb::Tensor, why));
    }
    let s = tensor_split_check(&ctx.b.phi, psi)?;
    let mut checks = vec![
        Check::equal("dim-product", s.dim_product, s.dim_first * s.dim_second),
        Check::at_most("product.subspace-sin", s.subspace_sin, ctx.tol.angle),
    ];
    if let Some(d) = ctx.sc.expect.as_ref().and_then(|e| e.tensor_dim) {
        checks.push(Check::equal("expect.tensor-dim", s.dim_product, d));
    }
    Ok(AnalysisReport::new(Verb::Tensor, checks, value(&s), None))
}

fn entropy_analysis(ctx: &Ctx) -> Out {
    let phi = &ctx.b.phi;
    let h = vn_entropy(phi)?;
    let eigs = eigvalsh(phi.density())?;
    let top = eigs.iter().copied().fold(0.0, f64::max);
    let rank = eigs.iter().filter(|&&l| l > 1e-12 * top).count();
    let mut checks = vec![
        Check::at_least("entropy.nonnegative", h, 0.0),
        Check::holds("entropy.zero-iff-rank-one", (h == 0.0) == (rank == 1), format!("H = {h:.3e}, rank {rank}")),
    ];
    if let Some(want) = ctx.sc.expect.as_ref().and_then(|e| e.entropy) {
        checks.push(Check::at_most("expect.entropy", (h - want).abs(), ctx.tol.residual));
    }
    let mut result = json!({ "entropy": h, "density_rank": rank });
    if ctx.class.regular {
        let seq = entropy_sequence(phi, ENTROPY_POWERS)?;
        checks.push(Check::at_most("subadditivity", seq.subadditivity_excess, ctx.tol.subadditivity));
        result["sequence"] = value(&seq);
    }
    if let Some(InclusionBuild::State(st)) = &ctx.b.inclusion {
        let b = entropy_bounds_check(phi, st, ENTROPY_POWERS)?;
        checks.push(Check::holds("furstenberg.nonnegative", b.nonnegative, format!("{:.3e}", b.furstenberg)));
        // the upper bound needs a stationary state
        if b.stationary {
            checks.push(Check::holds(
                "furstenberg.below-entropy",
                b.below_entropy,
                format!("{:.6} vs {:.6}", b.furstenberg, b.entropy),
            ));
        }
        if let Some(below) = b.below_asymptotic {
            checks.push(Check::holds("furstenberg.below-asymptotic", below, format!("{:?}", b.asymptotic_bound)));
        }
        result["bounds"] = value(&b);
    }
    if ctx.class.regular && ctx.class.strongly_generating {
        let bd = boundary_build(phi)?;
        if bd.faithful {
            let z = zero_entropy_check(phi, &bd)?;
            checks.push(Check::holds(
                "zero-entropy-biconditional",
                z.agree,
                format!("h = {:.3e}, harmonic dim {} of {}", z.furstenberg, z.harmonic_dim, z.algebra_dim),
            ));
            if z.harmonic_equals_m {
                checks.push(Check::at_most("zero-entropy.value", z.furstenberg.abs(), ctx.tol.route));
            }
            result["zero_entropy"] = value(&z);
        } else {
            result["zero_entropy"] = json!("stationary boundary state is not faithful");
        }
    }
    Ok(AnalysisReport::new(Verb::Entropy, checks, result, None))
}

fn furstenberg_analysis(ctx: &Ctx) -> Out {
    let st = match inclusion_state(ctx) {
        Ok(s) => s,
        Err(r) => return Ok(retag(r, Verb::Furstenberg)),
    };
    let phi = &ctx.b.phi;
    let fe = furstenberg_entropy(phi, st)?;
    let md = modular_data(st)?;
    let m = md.residuals;
    let mut checks = vec![
        Check::at_most("routes.spectral", (fe.spectral - fe.commutator).abs(), ctx.tol.route),
        Check::at_most("routes.flow", (fe.flow - fe.commutator).abs(), FLOW_TOL),
        Check::at_most("value.imaginary", fe.imaginary_part.abs(), ctx.tol.route),
        Check::at_least("value.nonnegative", fe.value, -ctx.tol.residual),
        Check::at_most("modular.s-star-s", m.delta_from_s, MODULAR_TOL),
        Check::at_most("modular.j-involution", m.j_involution, MODULAR_TOL),
        Check::at_most("modular.j-isometry", m.j_isometry, MODULAR_TOL),
        Check::at_most("modular.vacuum", m.vacuum, MODULAR_TOL),
        Check::at_least("modular.positive", m.min_eigenvalue, 0.0),
        Check::at_most("modular.flow-multiplicative", m.flow_multiplicative, MODULAR_TOL),
        Check::at_most("modular.flow-invariance", m.flow_invariance, MODULAR_TOL),
        Check::at_most("modular.log-delta", m.log_delta, MODULAR_TOL),
    ];
    let stat = stationarity_residual(phi, st)?;
    let mut result = json!({
        "furstenberg": value(&fe),
        "modular": value(&m),
        "stationarity_residual": stat,
        "rho_condition": st.condition(),
    });
    if ctx.class.regular && stat <= 1e-9 {
        let a = entropy_additivity_check(phi, phi, st, 4)?;
        checks.push(Check::at_most("additivity.convolution", a.additivity_residual, ctx.tol.additivity));
        checks.push(Check::at_most("additivity.powers", a.power_residual, ctx.tol.additivity));
        result["additivity"] = value(&a);
    }
    Ok(AnalysisReport::new(Verb::Furstenberg, checks, result, None))
}

fn gap_analysis(ctx: &Ctx) -> Out {
    let st = match inclusion_state(ctx) {
        Ok(s) => s,
        Err(r) => return Ok(retag(r, Verb::Gap)),
    };
    if !ctx.class.regular {
        return Ok(AnalysisReport::skipped(Verb::Gap, "family is not bi-normalized"));
    }
    let g = entropy_gap_bound(&ctx.b.phi, st)?;
    let checks = vec![
        Check::at_least("gap.inequality", g.furstenberg - g.bound, -ctx.tol.gap),
        Check::at_most("gap.contraction", g.pairing, 1.0 + ctx.tol.residual),
        Check::at_least("gap.pairing-nonnegative", g.pairing, 0.0),
        Check::at_most("gap.pairing-routes", (g.pairing - g.pairing_oracle).abs(), ctx.tol.residual),
    ];
    Ok(AnalysisReport::new(Verb::Gap, checks, value(&g), None))
}

fn dilate_analysis(ctx: &Ctx) -> Out {
    let explicit;
    let phi0: &UcpMap = match &ctx.b.channel {
        Some(c) => c,
        None if ctx.all => return Ok(AnalysisReport::skipped(Verb::Dilate, "scenario has no channel")),
        None => {
            explicit = UcpMap::poisson(&ctx.b.phi)?;
            &explicit
        }
    };
    let dil = bhat_dilate(phi0, ctx.depth, ctx.dim_cap)?;
    let rep = &dil.report;
    let tol = ctx.tol.residual;
    let mut checks = vec![];
    if let Some(t) = &rep.truncation {
        checks.push(Check::inconclusive("depth", t.clone()));
    }
    for s in &rep.stages {
        let r = &s.residuals;
        let i = s.index;
        checks.push(Check::at_most(format!("stage[{i}].isometry"), r.isometry, tol));
        checks.push(Check::at_most(format!("stage[{i}].homomorphism"), r.homomorphism, tol));
        checks.push(Check::at_most(format!("stage[{i}].compression"), r.compression, tol));
        if let Some(c) = r.corner {
            checks.push(Check::at_most(format!("stage[{i}].corner"), c, tol));
        }
        if let Some(m) = r.corner_dim_match {
            checks.push(Check::holds(format!("stage[{i}].corner-dim"), m, "corner dimension equals the previous stage"));
        }
        checks.push(Check::at_most(format!("stage[{i}].intertwining"), r.intertwining, tol));
        checks.push(Check::equal(format!("stage[{i}].central-support"), r.central_support_deficiency, 0));
        if let Some(c) = r.algebra_closure {
            checks.push(Check::at_most(format!("stage[{i}].algebra-closure"), c, ctx.tol.angle));
        }
    }
    for l in &rep.links {
        checks.push(Check::at_most(format!("link[{}].bimodule", l.from), l.bimodule, tol));
        checks.push(Check::at_most(format!("link[{}].monotone", l.from), l.monotone, tol));
    }
    for (k, r) in rep.bhat.iter().enumerate() {
        checks.push(Check::at_most(format!("bhat[{k}]"), *r, tol));
    }
    checks.push(Check::at_most("projections-increasing", rep.projections_increasing, tol));
    let hs = har_stability_check(&dil)?;
    checks.push(Check::holds(
        "fixed-space-stable",
        hs.stable,
        hs.detail.clone().unwrap_or_else(|| {
            let dims: Vec<String> = hs.dims.iter().map(|d| d.map_or("?".into(), |d| d.to_string())).collect();
            format!("fixed-space dims {}", dims.join(", "))
        }),
    ));
    if let Some(mut want) = ctx.sc.expect.as_ref().and_then(|e| e.dilation_dims.clone()) {
        // stages beyond the requested depth are not built
        let got = rep.dims();
        want.truncate(got.len().max(ctx.depth));
        checks.push(Check::equal("expect.dilation-dims", got, want));
    }
    let result = json!({ "dilation": value(rep), "fixed_spaces": value(&hs) });
    Ok(AnalysisReport::new(Verb::Dilate, checks, result, None))
}
