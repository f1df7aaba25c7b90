//! Points on the joint zero variety `{Q_A = 0} ∩ {Q_B = 0}`.
//!
//! All searches work on Frobenius-normalised copies of the forms and on unit
//! vectors, so every threshold here is scale free. A witness is only returned
//! when a Newton–Kantorovich bound shows that an exact point of the variety
//! lies close enough to the computed one for the margin to survive the move.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dissipativity;
use crate::error::{Error, Result};
use crate::forms::{self, SymmetricForm, SymplecticStructure};
use crate::linalg;
use crate::pencil;
use crate::rng;

pub const TAU_ZERO: f64 = 1e-9;
/// Transversality threshold, relative to `‖A‖ + ‖B‖`.
pub const TAU_TRANS_REL: f64 = 1e-6;
/// Bracket threshold, relative to `‖C‖`.
pub const TAU_BRK_REL: f64 = 1e-6;
pub const DEFAULT_RESTARTS: usize = 200;
pub const MAX_NEWTON_ITERS: usize = 100;
pub const HILL_CLIMB_STEPS: usize = 50;

const POLISH_TOL: f64 = 1e-15;
const MAX_HALVINGS: usize = 40;
// Lipschitz constant of z ↦ 2[Âz; B̂z] for unit-Frobenius Â, B̂.
const JACOBIAN_LIPSCHITZ: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct JointZero {
    pub point: DVector<f64>,
    pub iterations: usize,
    pub residual_a: f64,
    pub residual_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessResult {
    pub point: Vec<f64>,
    /// `|Q_Â(z)|` with `Â = A/‖A‖`.
    pub residual_a: f64,
    pub residual_b: f64,
    pub margin: f64,
    pub threshold: f64,
    /// Lower bound for the margin at a nearby exact point of the variety.
    pub certified_margin: f64,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WitnessOutcome {
    Found(WitnessResult),
    /// Search budget exhausted. Not a proof that no witness exists.
    NoneFound {
        attempts: usize,
    },
}

impl WitnessOutcome {
    pub fn witness(&self) -> Option<&WitnessResult> {
        match self {
            WitnessOutcome::Found(w) => Some(w),
            WitnessOutcome::NoneFound { .. } => None,
        }
    }

    pub fn is_found(&self) -> bool {
        self.witness().is_some()
    }
}

struct Pair {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl Pair {
    fn new(a: &SymmetricForm, b: &SymmetricForm) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                what: "form pair",
                expected: a.dim(),
                found: b.dim(),
            });
        }
        if a.is_zero() && b.is_zero() {
            return Err(Error::ZeroPair);
        }
        Ok(Self {
            a: a.normalized().into_matrix(),
            b: b.normalized().into_matrix(),
        })
    }

    fn residual(&self, z: &DVector<f64>) -> (f64, f64) {
        (z.dot(&(&self.a * z)), z.dot(&(&self.b * z)))
    }

    /// Columns `Âz`, `B̂z`.
    fn gradients(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(z.len(), 2);
        g.set_column(0, &(&self.a * z));
        g.set_column(1, &(&self.b * z));
        g
    }

    fn project(&self, z0: &DVector<f64>) -> Result<JointZero> {
        let norm = z0.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroStart);
        }
        let mut z = z0 / norm;
        let (mut ra, mut rb) = self.residual(&z);
        let mut rn = ra.hypot(rb);
        let mut iterations = 0;
        if rn > TAU_ZERO {
            while iterations < MAX_NEWTON_ITERS && rn > POLISH_TOL {
                iterations += 1;
                let Some(step) = self.newton_step(&z, ra, rb) else {
                    break;
                };
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..MAX_HALVINGS {
                    let trial = &z + &step * t;
                    let tn = trial.norm();
                    if tn > 0.0 {
                        let trial = trial / tn;
                        let (ta, tb) = self.residual(&trial);
                        if ta.hypot(tb) < rn {
                            z = trial;
                            (ra, rb) = (ta, tb);
                            rn = ta.hypot(tb);
                            accepted = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
        if rn > TAU_ZERO {
            return Err(Error::NoConvergence {
                iterations,
                residual: rn,
            });
        }
        Ok(JointZero {
            point: z,
            iterations,
            residual_a: ra.abs(),
            residual_b: rb.abs(),
        })
    }

    /// Minimal-norm Gauss–Newton step for `(Q_Â, Q_B̂)(z + s) = 0`, or a
    /// gradient step on `Q_Â² + Q_B̂²` when the Jacobian is rank deficient.
    fn newton_step(&self, z: &DVector<f64>, ra: f64, rb: f64) -> Option<DVector<f64>> {
        let jac_t = self.gradients(z) * 2.0;
        let r = DVector::from_vec(vec![ra, rb]);
        let m = jac_t.transpose() * &jac_t;
        let sv = linalg::sym_singular_values(&m);
        if sv[1] > 1e-24 * sv[0].max(f64::MIN_POSITIVE) {
            let y = m.lu().solve(&r)?;
            return Some(-(&jac_t * y));
        }
        let grad = &jac_t * &r;
        let jg = jac_t.transpose() * &grad;
        let denom = jg.norm_squared();
        if denom == 0.0 {
            return None;
        }
        let alpha = r.dot(&jg) / denom;
        Some(-grad * alpha)
    }

    /// Distance to an exact zero guaranteed by the Kantorovich condition for
    /// the underdetermined Newton iteration, or `None` if the condition fails.
    fn certified_distance(&self, z: &DVector<f64>) -> Option<f64> {
        let (ra, rb) = self.residual(z);
        let r = ra.hypot(rb);
        if r > TAU_ZERO {
            return None;
        }
        if r == 0.0 {
            return Some(0.0);
        }
        let sigma = 2.0 * second_singular_value(&self.gradients(z));
        if sigma == 0.0 {
            return None;
        }
        if JACOBIAN_LIPSCHITZ * r / (sigma * sigma) > 0.5 {
            return None;
        }
        Some(2.0 * r / sigma)
    }

    /// Certified lower bound for a margin functional of Lipschitz constant at
    /// most `2(1 + dist)` on the ball of radius `1 + dist`, evaluated after
    /// rescaling the exact zero to unit length.
    fn certified_margin(&self, z: &DVector<f64>, margin: f64) -> Option<f64> {
        let dist = self.certified_distance(z)?;
        let grown = 1.0 + dist;
        Some((margin - 2.0 * grown * dist) / (grown * grown))
    }

    fn transversal_margin(&self, z: &DVector<f64>) -> f64 {
        second_singular_value(&self.gradients(z))
    }
}

fn second_singular_value(m: &DMatrix<f64>) -> f64 {
    linalg::singular_values(m).get(1).copied().unwrap_or(0.0)
}

/// Projects `z0` onto the unit-sphere part of `{Q_A = 0} ∩ {Q_B = 0}`.
pub fn project_to_joint_zero(a: &SymmetricForm, b: &SymmetricForm, z0: &DVector<f64>) -> Result<JointZero> {
    let pair = Pair::new(a, b)?;
    if z0.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            what: "starting point",
            expected: a.dim(),
            found: z0.len(),
        });
    }
    pair.project(z0)
}

fn found(
    z: &DVector<f64>,
    pair: &Pair,
    margin: f64,
    threshold: f64,
    certified: f64,
    attempts: usize,
) -> WitnessOutcome {
    let (ra, rb) = pair.residual(z);
    WitnessOutcome::Found(WitnessResult {
        point: z.iter().copied().collect(),
        residual_a: ra.abs(),
        residual_b: rb.abs(),
        margin,
        threshold,
        certified_margin: certified,
        attempts,
    })
}

/// Searches for a point where `∂Γ_A` and `∂Γ_B` meet transversally, that is
/// `Q_A(z) = Q_B(z) = 0` with `Az`, `Bz` independent.
pub fn transversality_witness(
    a: &SymmetricForm,
    b: &SymmetricForm,
    restarts: usize,
    seed: u64,
) -> Result<WitnessOutcome> {
    let pair = Pair::new(a, b)?;
    let threshold = 2.0 * TAU_TRANS_REL;
    let n = a.dim();
    for i in 0..restarts {
        let mut rng = rng::stream(seed, i as u64);
        let Ok(jz) = pair.project(&rng::unit_vector(&mut rng, n)) else {
            continue;
        };
        let margin = pair.transversal_margin(&jz.point);
        if let Some(lb) = pair.certified_margin(&jz.point, margin) {
            if lb > threshold {
                return Ok(found(&jz.point, &pair, margin, threshold, lb, i + 1));
            }
        }
    }
    Ok(WitnessOutcome::NoneFound { attempts: restarts })
}

/// Searches for `z` with `Q_A(z) = Q_B(z) = 0` and `Q_C(z) ≠ 0`. `C` is
/// arbitrary, so counterexamples with a hand-picked `C` can be replayed.
pub fn bracket_witness(
    a: &SymmetricForm,
    b: &SymmetricForm,
    c: &SymmetricForm,
    restarts: usize,
    seed: u64,
) -> Result<WitnessOutcome> {
    let pair = Pair::new(a, b)?;
    if c.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            what: "bracket form",
            expected: a.dim(),
            found: c.dim(),
        });
    }
    if c.is_zero() {
        return Ok(WitnessOutcome::NoneFound { attempts: 0 });
    }
    let cn = c.normalized().into_matrix();
    let qc = |z: &DVector<f64>| z.dot(&(&cn * z));
    let threshold = TAU_BRK_REL;
    let n = a.dim();

    for i in 0..restarts {
        let mut rng = rng::stream(seed, i as u64);
        let Ok(jz) = pair.project(&rng::unit_vector(&mut rng, n)) else {
            continue;
        };
        let mut z = jz.point;
        let mut value = qc(&z);
        let accept = |z: &DVector<f64>, value: f64| -> Option<f64> {
            pair.certified_margin(z, value.abs()).filter(|&lb| lb > threshold)
        };
        if let Some(lb) = accept(&z, value) {
            return Ok(found(&z, &pair, value.abs(), threshold, lb, i + 1));
        }

        let mut step = 0.1;
        for _ in 0..HILL_CLIMB_STEPS {
            let Some(dir) = tangent_ascent(&pair, &cn, &z, value) else {
                break;
            };
            let mut moved = false;
            while step > 1e-8 {
                if let Ok(next) = pair.project(&(&z + &dir * step)) {
                    let v = qc(&next.point);
                    if v.abs() > value.abs() {
                        z = next.point;
                        value = v;
                        moved = true;
                        step = (step * 2.0).min(0.5);
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
            if let Some(lb) = accept(&z, value) {
                return Ok(found(&z, &pair, value.abs(), threshold, lb, i + 1));
            }
        }
    }
    Ok(WitnessOutcome::NoneFound { attempts: restarts })
}

/// Unit ascent direction for `|Q_C|` tangent to the variety and the sphere.
fn tangent_ascent(pair: &Pair, cn: &DMatrix<f64>, z: &DVector<f64>, value: f64) -> Option<DVector<f64>> {
    let mut normals = pair.gradients(z).insert_column(2, 0.0);
    normals.set_column(2, z);
    let basis = linalg::column_basis(&normals);
    let grad = cn * z * 2.0;
    let proj = &grad - &basis * (basis.transpose() * &grad);
    let norm = proj.norm();
    if norm < 1e-14 {
        return None;
    }
    let sign = if value < 0.0 { -1.0 } else { 1.0 };
    Some(proj * (sign / norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RadicalStatus {
    Trivial,
    Symplectic,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    I,
    II,
    #[serde(rename = "NONE")]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub nondissipative: bool,
    #[serde(rename = "independent_ABC")]
    pub independent_abc: bool,
    pub minrank: usize,
    pub maxrank: usize,
    pub radical_dim: usize,
    pub radical_status: RadicalStatus,
    pub branch: Branch,
    /// Some rank decision sat within a factor ten of the cut.
    pub marginal_rank: bool,
}

pub fn classify_branch(minrank: usize, maxrank: usize, radical: RadicalStatus) -> Branch {
    if minrank >= 3 && maxrank >= 17 {
        Branch::I
    } else if minrank == 2 && maxrank >= 9 && radical != RadicalStatus::Degenerate {
        Branch::II
    } else {
        Branch::None
    }
}

pub fn radical_status(a: &SymmetricForm, b: &SymmetricForm, s: &SymplecticStructure) -> Result<(usize, RadicalStatus)> {
    let radical = forms::joint_radical(a, b)?;
    if radical.is_empty() {
        return Ok((0, RadicalStatus::Trivial));
    }
    let check = forms::is_symplectic_subspace(&radical, s)?;
    let status = if check.symplectic {
        RadicalStatus::Symplectic
    } else {
        RadicalStatus::Degenerate
    };
    Ok((radical.dim(), status))
}

/// Hypotheses of the existence result for `Q_A = Q_B = 0 ≠ Q_C`, with `C` the
/// Poisson bracket of `A` and `B` under `s`.
pub fn hypothesis_report(a: &SymmetricForm, b: &SymmetricForm, s: &SymplecticStructure) -> Result<HypothesisReport> {
    let c = forms::poisson_bracket(a, b, s)?;
    hypothesis_report_with(a, b, &c, s)
}

/// As [`hypothesis_report`] with an explicit third form.
pub fn hypothesis_report_with(
    a: &SymmetricForm,
    b: &SymmetricForm,
    c: &SymmetricForm,
    s: &SymplecticStructure,
) -> Result<HypothesisReport> {
    if a.dim() != s.dim() || b.dim() != s.dim() || c.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            what: "forms and symplectic structure",
            expected: s.dim(),
            found: a.dim().max(b.dim()).max(c.dim()),
        });
    }
    let nondissipative = if a.is_zero() && b.is_zero() {
        false
    } else {
        dissipativity::is_non_dissipative(a, b)?.is_non_dissipative()
    };
    let independent_abc = linalg::independent_count(&[a.matrix(), b.matrix(), c.matrix()]) == 3;

    let (minrank, maxrank, marginal_rank) = if pencil::check_independent(a, b).is_ok() {
        let p = pencil::rank_profile(a, b)?;
        (p.minrank, p.maxrank, p.is_marginal())
    } else {
        // one-dimensional (or zero) span: every nonzero element has one rank
        let r = if a.norm() >= b.norm() { a.rank() } else { b.rank() };
        (r, r, false)
    };
    let (radical_dim, radical_status) = radical_status(a, b, s)?;
    Ok(HypothesisReport {
        nondissipative,
        independent_abc,
        minrank,
        maxrank,
        radical_dim,
        radical_status,
        branch: classify_branch(minrank, maxrank, radical_status),
        marginal_rank,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContainmentOutcome {
    /// No sampled point separated the regions; evidence only.
    ContainedEvidence { samples: usize },
    SeparatingPoint {
        point: Vec<f64>,
        q_a: f64,
        q_b: f64,
        sample: usize,
    },
}

/// Samples seeded unit vectors looking for `z` with `Q_A(z) ≤ 0 < Q_B(z)`,
/// which refutes `Γ_A ⊆ Γ_B`.
pub fn containment_probe(
    a: &SymmetricForm,
    b: &SymmetricForm,
    samples: usize,
    seed: u64,
) -> Result<ContainmentOutcome> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "form pair",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut rng = rng::stream(seed, 0);
    for i in 0..samples {
        let z = rng::unit_vector(&mut rng, a.dim());
        let (qa, qb) = (a.eval(&z), b.eval(&z));
        if qa <= 0.0 && qb > 0.0 {
            return Ok(ContainmentOutcome::SeparatingPoint {
                point: z.iter().copied().collect(),
                q_a: qa,
                q_b: qb,
                sample: i + 1,
            });
        }
    }
    Ok(ContainmentOutcome::ContainedEvidence { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split_rank4() -> (SymmetricForm, SymmetricForm) {
        (
            SymmetricForm::from_monomials(4, &[(0, 3, 1.0), (1, 2, 1.0)]),
            SymmetricForm::from_monomials(4, &[(0, 2, 1.0), (1, 3, -1.0)]),
        )
    }

    #[test]
    fn fixed_point_is_returned_unchanged() {
        let (a, b) = split_rank4();
        let z = DVector::from_vec(vec![0.6, 0.8, 0.0, 0.0]);
        let jz = project_to_joint_zero(&a, &b, &z).unwrap();
        assert_eq!(jz.iterations, 0);
        assert_eq!(jz.point, z);
    }

    #[test]
    fn split_rank4_projection_lands_on_a_coordinate_plane() {
        let (a, b) = split_rank4();
        let eps = 0.1;
        let jz = project_to_joint_zero(&a, &b, &DVector::from_vec(vec![1.0, 1.0, eps, eps])).unwrap();
        let p = &jz.point;
        let xi = p[0].hypot(p[1]);
        let eta = p[2].hypot(p[3]);
        assert!(xi.min(eta) < 1e-6, "{p}");
        assert!(jz.residual_a.max(jz.residual_b) <= 1e-10);
    }

    #[test]
    fn degenerate_pair_projection() {
        let a = SymmetricForm::from_diagonal(&[1.0, -1.0, 0.0]);
        let b = SymmetricForm::from_monomials(3, &[(0, 2, 1.0), (1, 1, 0.5)]);
        let mut rng = rng::stream(7, 0);
        for _ in 0..10 {
            let jz = project_to_joint_zero(&a, &b, &rng::gaussian_vector(&mut rng, 3)).unwrap();
            assert!(jz.residual_a.max(jz.residual_b) <= 1e-10);
            assert!((jz.point.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_start_rejected() {
        let (a, b) = split_rank4();
        assert_eq!(
            project_to_joint_zero(&a, &b, &DVector::zeros(4)).unwrap_err(),
            Error::ZeroStart
        );
    }

    #[test]
    fn hyperbolic_plane_has_no_transversal_point() {
        let a = SymmetricForm::from_diagonal(&[1.0, -1.0]);
        let b = SymmetricForm::from_monomials(2, &[(0, 1, 1.0)]);
        for seed in 0..5 {
            let out = transversality_witness(&a, &b, 50, seed).unwrap();
            assert_eq!(out, WitnessOutcome::NoneFound { attempts: 50 });
        }
    }

    #[test]
    fn dissipative_pair_has_no_transversal_point() {
        let a = SymmetricForm::from_diagonal(&[1.0, 0.0]);
        let b = SymmetricForm::from_diagonal(&[0.0, 1.0]);
        assert!(!transversality_witness(&a, &b, 50, 1).unwrap().is_found());
    }

    #[test]
    fn transversal_witness_in_signature_two_two() {
        let a = SymmetricForm::from_diagonal(&[1.0, 1.0, -1.0, -1.0]);
        let b = SymmetricForm::from_monomials(4, &[(0, 2, 0.1), (1, 1, 0.05), (3, 3, -0.05)]);
        let out = transversality_witness(&a, &b, DEFAULT_RESTARTS, 42).unwrap();
        let w = out.witness().expect("witness");
        let z = DVector::from_vec(w.point.clone());
        assert!(a.normalized().eval(&z).abs() <= TAU_ZERO);
        assert!(b.normalized().eval(&z).abs() <= TAU_ZERO);
        assert!(w.margin > w.threshold && w.certified_margin > w.threshold);
    }

    #[test]
    fn split_rank4_bracket_vanishes_on_variety() {
        let (a, b) = split_rank4();
        let c = forms::poisson_bracket(&a, &b, &SymplecticStructure::canonical(2)).unwrap();
        for seed in 0..5 {
            assert!(!bracket_witness(&a, &b, &c, 40, seed).unwrap().is_found());
        }
    }

    #[test]
    fn bracket_witness_for_generic_triple() {
        let a = SymmetricForm::from_diagonal(&[1.0, 1.0, -1.0, -1.0]);
        let b = SymmetricForm::from_monomials(4, &[(0, 2, 1.0), (1, 3, 1.0)]);
        let c = SymmetricForm::from_monomials(4, &[(0, 0, 1.0), (3, 3, -2.0)]);
        let w = bracket_witness(&a, &b, &c, 50, 3).unwrap();
        let w = w.witness().expect("witness");
        let z = DVector::from_vec(w.point.clone());
        assert!((c.normalized().eval(&z).abs() - w.margin).abs() < 1e-14);
    }

    #[test]
    fn hypothesis_report_split_rank4() {
        let (a, b) = split_rank4();
        let r = hypothesis_report(&a, &b, &SymplecticStructure::canonical(2)).unwrap();
        assert!(r.nondissipative && r.independent_abc);
        assert_eq!((r.minrank, r.maxrank), (4, 4));
        assert_eq!(r.radical_status, RadicalStatus::Trivial);
        assert_eq!(r.branch, Branch::None);
    }

    #[test]
    fn branch_rules() {
        use RadicalStatus::*;
        assert_eq!(classify_branch(3, 17, Degenerate), Branch::I);
        assert_eq!(classify_branch(3, 16, Trivial), Branch::None);
        assert_eq!(classify_branch(2, 9, Trivial), Branch::II);
        assert_eq!(classify_branch(2, 9, Symplectic), Branch::II);
        assert_eq!(classify_branch(2, 30, Degenerate), Branch::None);
        assert_eq!(classify_branch(2, 8, Trivial), Branch::None);
    }

    #[test]
    fn containment_examples() {
        let a = SymmetricForm::from_diagonal(&[1.0, -1.0]);
        let b = SymmetricForm::from_monomials(2, &[(0, 1, 1.0)]);
        match containment_probe(&a, &b, 10_000, 1).unwrap() {
            ContainmentOutcome::SeparatingPoint { q_a, q_b, .. } => assert!(q_a <= 0.0 && q_b > 0.0),
            other => panic!("{other:?}"),
        }
        let three_a = a.scale(3.0);
        assert_eq!(
            containment_probe(&a, &three_a, 1000, 1).unwrap(),
            ContainmentOutcome::ContainedEvidence { samples: 1000 }
        );
        let i = SymmetricForm::identity(3);
        assert_eq!(
            containment_probe(&i, &i.scale(-1.0), 500, 1).unwrap(),
            ContainmentOutcome::ContainedEvidence { samples: 500 }
        );
    }
}
