//! Seeded scenario generators.

use ncpb_core::algebra::{cyclic_table, group_algebra, symmetric3_table, TracialAlgebra, Weights};
use ncpb_core::linalg::{dagger, eye, pauli_x, Mat};
use ncpb_core::random;

use crate::scenario::{AlgebraSpec, CMatrix, Expectations, HyperstateSpec, InputError, KrausTerm, Scenario, Weight};

#[derive(Clone, Debug)]
pub enum GenerateKind {
    /// {u₁, u₁*, …, u_k, u_k*} with uniform weights on ⊕ M_{n_i}.
    RandomRegular { blocks: Vec<usize>, pairs: usize },
    /// z_γ = √μ(γ)·u_γ in L(Γ).
    GroupWalk {
        name: String,
        table: Vec<Vec<usize>>,
        measure: Vec<f64>,
        symmetric: bool,
    },
    /// {1/√2, X/√2} on M₂.
    NonGeneratingControl,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

fn invalid(field: &str, message: impl Into<String>) -> InputError {
    InputError::Invalid {
        origin: "generate".into(),
        field: field.into(),
        message: message.into(),
    }
}

fn bare(name: String, algebra: AlgebraSpec, terms: Vec<KrausTerm>) -> Scenario {
    Scenario {
        name: Some(name),
        description: None,
        algebra,
        hyperstate: HyperstateSpec::Kraus(terms),
        partner: None,
        inclusion: None,
        channel: None,
        analyses: vec![],
        tolerances: Default::default(),
        expect: None,
        seed: None,
    }
}

fn term(m: Mat, w: f64) -> KrausTerm {
    KrausTerm {
        matrix: CMatrix(m),
        weight: Weight(w),
    }
}

/// Smallest subgroup containing `support`.
fn generated_subgroup(table: &[Vec<usize>], identity: usize, support: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; table.len()];
    seen[identity] = true;
    let mut frontier = vec![identity];
    while let Some(g) = frontier.pop() {
        for &s in support {
            let h = table[g][s];
            if !seen[h] {
                seen[h] = true;
                frontier.push(h);
            }
        }
    }
    seen
}

pub fn generate_scenario(kind: &GenerateKind, seed: u64) -> Result<Generated, InputError> {
    let mut warnings = vec![];
    let scenario = match kind {
        GenerateKind::RandomRegular { blocks, pairs } => {
            if *pairs == 0 {
                return Err(invalid("pairs", "at least one unitary pair is required"));
            }
            let alg = TracialAlgebra::new(blocks.clone(), Weights::Named(ncpb_core::algebra::WeightRule::Uniform))
                .map_err(|e| invalid("blocks", e.to_string()))?;
            let mut rng = random::rng(seed);
            let w = 0.5 / *pairs as f64;
            let mut terms = vec![];
            for _ in 0..*pairs {
                let u = alg.random_unitary(&mut rng);
                terms.push(term(dagger(&u), w));
                terms.push(term(u, w));
            }
            let mut sc = bare(
                format!("random-regular-{seed}"),
                AlgebraSpec {
                    blocks: blocks.clone(),
                    weights: None,
                },
                terms,
            );
            sc.seed = Some(seed);
            sc.expect = Some(Expectations {
                regular: Some(true),
                symmetric: Some(true),
                ..Default::default()
            });
            sc
        }
        GenerateKind::GroupWalk {
            name,
            table,
            measure,
            symmetric,
        } => {
            let ga = group_algebra(table).map_err(|e| invalid("group", e.to_string()))?;
            let n = table.len();
            if measure.len() != n {
                return Err(invalid("measure", format!("expected {n} masses, got {}", measure.len())));
            }
            if let Some(i) = measure.iter().position(|&m| !(m >= 0.0) || !m.is_finite()) {
                return Err(invalid(&format!("measure[{i}]"), "masses must be non-negative"));
            }
            let total: f64 = measure.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(invalid("measure", format!("masses sum to {total}, not 1")));
            }
            let support: Vec<usize> = (0..n).filter(|&g| measure[g] > 0.0).collect();
            let is_symmetric = (0..n).all(|g| (measure[g] - measure[ga.inverses[g]]).abs() <= 1e-12);
            if *symmetric {
                if support.len() < n {
                    warnings.push(format!("measure has no full support ({} of {n} elements)", support.len()));
                }
                if !is_symmetric {
                    warnings.push("measure is not symmetric under inversion".into());
                }
            }
            let terms = support
                .iter()
                .map(|&g| term(ga.unitaries[g].clone(), measure[g]))
                .collect();
            let mut sc = bare(
                format!("group-walk-{name}"),
                AlgebraSpec {
                    blocks: ga.algebra.blocks().to_vec(),
                    weights: Some(Weights::Explicit(ga.algebra.weights().to_vec())),
                },
                terms,
            );
            let abelian = (0..n).all(|a| (0..n).all(|b| table[a][b] == table[b][a]));
            let generates = generated_subgroup(table, ga.identity, &support).into_iter().all(|x| x);
            let mut ex = Expectations {
                regular: Some(true),
                symmetric: Some(is_symmetric),
                ..Default::default()
            };
            if abelian && generates && is_symmetric {
                // Choquet-Deny
                ex.harmonic_dim = Some(n);
            }
            sc.expect = Some(ex);
            sc
        }
        GenerateKind::NonGeneratingControl => {
            let mut sc = bare(
                "non-generating-control".into(),
                AlgebraSpec {
                    blocks: vec![2],
                    weights: None,
                },
                vec![term(eye(2), 0.5), term(pauli_x(), 0.5)],
            );
            sc.expect = Some(Expectations {
                regular: Some(true),
                generating: Some(false),
                strongly_generating: Some(false),
                symmetric: Some(true),
                ..Default::default()
            });
            sc
        }
    };
    Ok(Generated { scenario, warnings })
}

/// `cyclic:N` or `s3`.
pub fn parse_group(s: &str) -> Option<Vec<Vec<usize>>> {
    match s {
        "s3" => Some(symmetric3_table()),
        _ => {
            let n: usize = s.strip_prefix("cyclic:")?.parse().ok()?;
            (n > 0).then(|| cyclic_table(n))
        }
    }
}
