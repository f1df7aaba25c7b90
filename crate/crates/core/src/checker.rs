//! Operator-level verdicts. Each operator specification is reduced to a pair
//! of real forms `(Ã, B̃) = (Re 𝒜, Im 𝒜)` on a space with a symplectic
//! structure; the non-solvability hypotheses are then evaluated on that pair
//! and its Poisson bracket.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::dissipativity::{self, DissipativityVerdict, EIG_TOL};
use crate::error::{Error, Result};
use crate::forms::{self, canonical_j, serialize_rows, Subspace, SymmetricForm, SymplecticStructure};
use crate::linalg;
use crate::rng;
use crate::witness::{self, Branch, HypothesisReport, WitnessOutcome};

pub const MU_SEARCH_BUDGET: usize = 500;
pub const JACOBI_TOL: f64 = 1e-10;
pub const PLUMBING_TOL: f64 = 1e-10;
const RANK_PROBES: usize = 8;
const SIGMA_PROBES: usize = 20;

pub const INCONCLUSIVE_NOTE: &str = "non-solvability hypotheses not established; no claim about solvability is made";
pub const NOT_SOLVABLE_NOTE: &str =
    "the necessary condition for local solvability fails: not locally solvable at the point";
pub const NOWHERE_NOTE: &str =
    "on a 2-step nilpotent group the conclusion holds at every point: nowhere locally solvable";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    pub seed: u64,
    /// Restart budget for the corroborating bracket witness; 0 skips it.
    pub restarts: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            seed: rng::DEFAULT_SEED,
            restarts: witness::DEFAULT_RESTARTS,
        }
    }
}

fn check_pair(a_re: &SymmetricForm, a_im: &SymmetricForm, m: usize) -> Result<()> {
    for f in [a_re, a_im] {
        if f.dim() != m {
            return Err(Error::DimensionMismatch {
                what: "coefficient form",
                expected: m,
                found: f.dim(),
            });
        }
    }
    Ok(())
}

/// Left-invariant operator on the Heisenberg group `ℍ_d` (`m = 2d` fields).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeisenbergOperatorSpec {
    pub d: usize,
    #[serde(rename = "A_re")]
    pub a_re: SymmetricForm,
    #[serde(rename = "A_im")]
    pub a_im: SymmetricForm,
}

impl HeisenbergOperatorSpec {
    pub fn new(d: usize, a_re: SymmetricForm, a_im: SymmetricForm) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("d must be positive".into()));
        }
        check_pair(&a_re, &a_im, 2 * d)?;
        Ok(Self { d, a_re, a_im })
    }

    pub fn as_two_step(&self) -> TwoStepGroupSpec {
        TwoStepGroupSpec {
            m: 2 * self.d,
            j_list: vec![canonical_j(self.d)],
            a_re: self.a_re.clone(),
            a_im: self.a_im.clone(),
            mu0: None,
            note: None,
        }
    }
}

fn serialize_matrix_list<S: Serializer>(list: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<Vec<f64>>> = list.iter().map(forms::matrix_rows).collect();
    rows.serialize(s)
}

/// Operator on a 2-step nilpotent group with brackets `[X_j, X_k] = Σ_i J⁽ⁱ⁾_{jk} U_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStepGroupSpec {
    pub m: usize,
    #[serde(rename = "J_list", serialize_with = "serialize_matrix_list")]
    pub j_list: Vec<DMatrix<f64>>,
    #[serde(rename = "A_re")]
    pub a_re: SymmetricForm,
    #[serde(rename = "A_im")]
    pub a_im: SymmetricForm,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TwoStepGroupSpec {
    pub fn new(
        m: usize,
        j_list: Vec<DMatrix<f64>>,
        a_re: SymmetricForm,
        a_im: SymmetricForm,
        mu0: Option<Vec<f64>>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("m must be positive".into()));
        }
        if j_list.is_empty() {
            return Err(Error::Invalid("J_list must not be empty".into()));
        }
        for j in &j_list {
            if j.nrows() != m || j.ncols() != m {
                return Err(Error::DimensionMismatch {
                    what: "J matrix",
                    expected: m,
                    found: if j.nrows() != m { j.nrows() } else { j.ncols() },
                });
            }
            let skew = (j + j.transpose()).norm();
            if skew > 1e-9 * j.norm().max(1.0) {
                return Err(Error::Invalid(format!(
                    "J matrix is not skew-symmetric (defect {skew:e})"
                )));
            }
        }
        if let Some(mu) = &mu0 {
            if mu.len() != j_list.len() {
                return Err(Error::DimensionMismatch {
                    what: "mu0",
                    expected: j_list.len(),
                    found: mu.len(),
                });
            }
        }
        check_pair(&a_re, &a_im, m)?;
        Ok(Self {
            m,
            j_list,
            a_re,
            a_im,
            mu0,
            note: None,
        })
    }

    pub fn ell(&self) -> usize {
        self.j_list.len()
    }

    pub fn j_mu(&self, mu: &[f64]) -> DMatrix<f64> {
        self.j_list
            .iter()
            .zip(mu)
            .fold(DMatrix::zeros(self.m, self.m), |acc, (j, &c)| acc + j * c)
    }
}

/// Operator data at a point: `T = Dq(z) : ℝ^{2n} → ℝ^m` and the coefficient
/// forms on `ℝ^m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSymbolSpec {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "T", serialize_with = "serialize_rows")]
    pub t: DMatrix<f64>,
    #[serde(rename = "A_re")]
    pub a_re: SymmetricForm,
    #[serde(rename = "A_im")]
    pub a_im: SymmetricForm,
}

impl PointSymbolSpec {
    pub fn new(n: usize, m: usize, t: DMatrix<f64>, a_re: SymmetricForm, a_im: SymmetricForm) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Invalid("n and m must be positive".into()));
        }
        if t.nrows() != m || t.ncols() != 2 * n {
            return Err(Error::DimensionMismatch {
                what: "T (expected m x 2n)",
                expected: if t.nrows() != m { m } else { 2 * n },
                found: if t.nrows() != m { t.nrows() } else { t.ncols() },
            });
        }
        check_pair(&a_re, &a_im, m)?;
        Ok(Self { n, m, t, a_re, a_im })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    NotLocallySolvable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub condition_a: bool,
    pub condition_b: bool,
    pub condition_c: Branch,
    pub hypothesis: HypothesisReport,
    /// The space on which the forms and the symplectic structure live.
    pub formulation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plumbing: Option<PlumbingReport>,
    pub notes: Vec<String>,
}

impl Verdict {
    /// Same decision and hypothesis data, ignoring notes and attachments.
    pub fn same_decision(&self, other: &Verdict) -> bool {
        self.outcome == other.outcome
            && self.condition_a == other.condition_a
            && self.condition_b == other.condition_b
            && self.condition_c == other.condition_c
            && self.hypothesis == other.hypothesis
    }
}

/// Runs conditions (a)–(c) on `(Ã, B̃)` with the bracket taken in `s`.
fn assemble(
    a: &SymmetricForm,
    b: &SymmetricForm,
    s: &SymplecticStructure,
    formulation: String,
    opts: &CheckOptions,
) -> Result<Verdict> {
    let c = forms::poisson_bracket(a, b, s)?;
    let hypothesis = witness::hypothesis_report_with(a, b, &c, s)?;
    let condition_a = hypothesis.nondissipative;
    let condition_b = hypothesis.independent_abc;
    let condition_c = hypothesis.branch;
    let outcome = if condition_a && condition_b && condition_c != Branch::None {
        Outcome::NotLocallySolvable
    } else {
        Outcome::Inconclusive
    };

    let mut notes = Vec::new();
    if !(a.is_zero() && b.is_zero()) {
        if let DissipativityVerdict::NonDissipative { max_min_eig, .. } = dissipativity::is_non_dissipative(a, b)? {
            if max_min_eig > -10.0 * EIG_TOL {
                notes.push(format!(
                    "condition (a) margin {max_min_eig:e} within a factor 10 of the eigenvalue tolerance"
                ));
            }
        }
    }
    let spectrum = linalg::independence_spectrum(&[a.matrix(), b.matrix(), c.matrix()]);
    let third = spectrum[2];
    if third > linalg::RANK_RTOL && third <= 10.0 * linalg::RANK_RTOL {
        notes.push(format!(
            "condition (b) relative singular value {third:e} within a factor 10 of the cut"
        ));
    }
    if hypothesis.marginal_rank {
        notes.push("a pencil rank decision was within a factor 10 of the rank cut".into());
    }

    let witness = if outcome == Outcome::NotLocallySolvable && opts.restarts > 0 {
        let w = witness::bracket_witness(a, b, &c, opts.restarts, opts.seed)?;
        if !w.is_found() {
            notes.push("corroborating bracket witness not found within the restart budget".into());
        }
        Some(w)
    } else {
        None
    };
    notes.push(match outcome {
        Outcome::NotLocallySolvable => NOT_SOLVABLE_NOTE.into(),
        Outcome::Inconclusive => INCONCLUSIVE_NOTE.into(),
    });

    Ok(Verdict {
        outcome,
        condition_a,
        condition_b,
        condition_c,
        hypothesis,
        formulation,
        mu0: None,
        witness,
        plumbing: None,
        notes,
    })
}

pub fn heisenberg_verdict(spec: &HeisenbergOperatorSpec) -> Result<Verdict> {
    heisenberg_verdict_with(spec, &CheckOptions::default())
}

pub fn heisenberg_verdict_with(spec: &HeisenbergOperatorSpec, opts: &CheckOptions) -> Result<Verdict> {
    let s = SymplecticStructure::canonical(spec.d);
    let formulation = format!(
        "forms on R^{} (the m-space) with the canonical structure J = [[0, I], [-I, 0]]",
        2 * spec.d
    );
    assemble(&spec.a_re, &spec.a_im, &s, formulation, opts)
}

fn is_nondegenerate(j: &DMatrix<f64>) -> bool {
    let sv = linalg::singular_values(j);
    sv[0] > 0.0 && linalg::rank_from_sorted(&sv, j.nrows()) == j.nrows()
}

/// Finds `μ` with `J^μ = Σ μ_i J⁽ⁱ⁾` non-degenerate: coordinate directions
/// first, then seeded Gaussian directions on the unit sphere.
pub fn find_nondegenerate_mu(spec: &TwoStepGroupSpec, seed: u64) -> Result<Vec<f64>> {
    let ell = spec.ell();
    let mut tried = 0;
    for i in 0..ell.min(MU_SEARCH_BUDGET) {
        tried += 1;
        let mut mu = vec![0.0; ell];
        mu[i] = 1.0;
        if is_nondegenerate(&spec.j_mu(&mu)) {
            return Ok(mu);
        }
    }
    let mut r = rng::stream(seed, u64::MAX);
    while tried < MU_SEARCH_BUDGET {
        tried += 1;
        let mu: Vec<f64> = rng::unit_vector(&mut r, ell).iter().copied().collect();
        if is_nondegenerate(&spec.j_mu(&mu)) {
            return Ok(mu);
        }
    }
    Err(Error::NondegenerateMuNotFound {
        budget: MU_SEARCH_BUDGET,
    })
}

pub fn two_step_verdict(spec: &TwoStepGroupSpec) -> Result<Verdict> {
    two_step_verdict_with(spec, &CheckOptions::default())
}

pub fn two_step_verdict_with(spec: &TwoStepGroupSpec, opts: &CheckOptions) -> Result<Verdict> {
    let mu = match &spec.mu0 {
        Some(mu) => {
            let j = spec.j_mu(mu);
            if !is_nondegenerate(&j) {
                let sigma_min = *linalg::singular_values(&j).last().expect("m > 0");
                return Err(Error::DegenerateJ { sigma_min });
            }
            mu.clone()
        }
        None => find_nondegenerate_mu(spec, opts.seed)?,
    };
    let s = SymplecticStructure::from_structure_matrix(spec.j_mu(&mu))?;
    let formulation = format!("forms on R^{} (the m-space) with the structure J^mu0", spec.m);
    let mut v = assemble(&spec.a_re, &spec.a_im, &s, formulation, opts)?;
    if v.outcome == Outcome::NotLocallySolvable {
        v.notes.push(NOWHERE_NOTE.into());
    }
    v.mu0 = Some(mu);
    Ok(v)
}

/// Identities relating the `m`-space data to the lifted forms on `ℝ^{2n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlumbingReport {
    #[serde(serialize_with = "serialize_rows")]
    pub j_z: DMatrix<f64>,
    /// `T J Tᵗ` against `−{q_j, q_k}` for the linear coordinates `q_j`,
    /// relative to `‖T‖²`.
    pub structure_residual: f64,
    /// `‖T R − I‖`.
    pub right_inverse_residual: f64,
    /// `‖P² − P‖`, `P = R T`.
    pub projector_residual: f64,
    /// Largest `|σ(X, PY) − σ(PX, Y)|` over the probe pairs, relative.
    pub sigma_symmetry_residual: f64,
    /// Lifted bracket against `4 Tᵗ C(z) T`, relative.
    pub bracket_lift_residual: f64,
    pub rank_checks: Vec<RankCheck>,
    /// Subspace symplecticity in `ℝ^m` against that of `R(V) ⊕ Ker T`.
    pub symplectic_checks: Vec<SymplecticPullbackCheck>,
    /// The hypotheses evaluated on the lifted forms agree with the `m`-space ones.
    pub lifted_agrees: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankCheck {
    pub alpha: f64,
    pub beta: f64,
    pub rank_lifted: usize,
    pub rank_m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymplecticPullbackCheck {
    pub subspace: String,
    pub dim: usize,
    pub symplectic_m: bool,
    pub symplectic_lifted: bool,
}

fn relative(residual: f64, scale: f64) -> f64 {
    residual / scale.max(f64::MIN_POSITIVE)
}

pub fn point_symbol_verdict(spec: &PointSymbolSpec) -> Result<Verdict> {
    point_symbol_verdict_with(spec, &CheckOptions::default())
}

pub fn point_symbol_verdict_with(spec: &PointSymbolSpec, opts: &CheckOptions) -> Result<Verdict> {
    let (n, m, t) = (spec.n, spec.m, &spec.t);
    let rank = linalg::numerical_rank(t);
    if rank != m {
        return Err(Error::RankDeficient { rank, expected: m });
    }
    let j2n = canonical_j(n);
    let j_z = t * &j2n * t.transpose();
    let sv = linalg::singular_values(&j_z);
    if linalg::rank_from_sorted(&sv, m) < m {
        return Err(Error::DegenerateJ {
            sigma_min: *sv.last().expect("m > 0"),
        });
    }
    let omega_z = SymplecticStructure::from_structure_matrix(j_z.clone())?;
    let sigma = SymplecticStructure::canonical(n);
    let t_scale = t.norm().powi(2);

    // {a, b} = −∇aᵗ J ∇b, so −{q_j, q_k} = t_jᵗ J t_k for the rows t_j of T.
    let structure_residual = {
        let mut worst: f64 = 0.0;
        for j in 0..m {
            for k in 0..m {
                let tj = t.row(j).transpose();
                let tk = t.row(k).transpose();
                let bracket = -tj.dot(&(&j2n * tk));
                worst = worst.max((j_z[(j, k)] + bracket).abs());
            }
        }
        relative(worst, t_scale)
    };

    let j_z_inv = omega_z.pairing_matrix();
    let r = &j2n * t.transpose() * j_z_inv;
    let right_inverse_residual = (t * &r - DMatrix::identity(m, m)).norm();
    let p = &r * t;
    let projector_residual = (&p * &p - &p).norm();

    let mut probes = rng::stream(opts.seed, 0x706c);
    let mut sigma_sym: f64 = 0.0;
    for _ in 0..SIGMA_PROBES {
        let x = rng::gaussian_vector(&mut probes, 2 * n);
        let y = rng::gaussian_vector(&mut probes, 2 * n);
        let lhs = sigma.omega(&x, &(&p * &y));
        let rhs = sigma.omega(&(&p * &x), &y);
        sigma_sym = sigma_sym.max(relative((lhs - rhs).abs(), x.norm() * y.norm() * p.norm()));
    }

    let lift = |f: &SymmetricForm| forms::congruence(f, t).map(|g| g.scale(2.0));
    let a_lift = lift(&spec.a_re)?;
    let b_lift = lift(&spec.a_im)?;
    let c_m = forms::poisson_bracket(&spec.a_re, &spec.a_im, &omega_z)?;
    let c_lift = forms::poisson_bracket(&a_lift, &b_lift, &sigma)?;
    let c_pull = forms::congruence(&c_m, t)?.scale(4.0);
    let bracket_lift_residual = relative(
        (c_lift.matrix() - c_pull.matrix()).norm(),
        c_lift.norm().max(c_pull.norm()).max(f64::MIN_POSITIVE),
    );
    let bracket_lift_residual = if c_lift.is_zero() && c_pull.is_zero() {
        0.0
    } else {
        bracket_lift_residual
    };

    let mut rank_checks = Vec::with_capacity(RANK_PROBES);
    for _ in 0..RANK_PROBES {
        let alpha: f64 = probes.random_range(-1.0..1.0);
        let beta: f64 = probes.random_range(-1.0..1.0);
        let lifted = a_lift.matrix() * alpha + b_lift.matrix() * beta;
        let base = spec.a_re.matrix() * alpha + spec.a_im.matrix() * beta;
        rank_checks.push(RankCheck {
            alpha,
            beta,
            rank_lifted: linalg::sym_rank(&lifted),
            rank_m: linalg::sym_rank(&base),
        });
    }

    let kernel_t = linalg::null_space(t);
    let pull_back = |v: &Subspace| -> DMatrix<f64> {
        let image = &r * &v.basis;
        let mut cols = DMatrix::zeros(2 * n, image.ncols() + kernel_t.ncols());
        cols.view_mut((0, 0), (2 * n, image.ncols())).copy_from(&image);
        cols.view_mut((0, image.ncols()), (2 * n, kernel_t.ncols()))
            .copy_from(&kernel_t);
        cols
    };
    let mut subspaces = vec![(
        "joint radical".to_string(),
        forms::joint_radical(&spec.a_re, &spec.a_im)?,
    )];
    for k in 1..=m.min(3) {
        let basis = rng::gaussian_matrix(&mut probes, m, k);
        subspaces.push((format!("random subspace of dimension {k}"), Subspace::span_of(&basis)));
    }
    let mut symplectic_checks = Vec::new();
    for (label, v) in &subspaces {
        let in_m = forms::is_symplectic_subspace(v, &omega_z)?.symplectic;
        let lifted = Subspace::span_of(&pull_back(v));
        let in_2n = forms::is_symplectic_subspace(&lifted, &sigma)?.symplectic;
        symplectic_checks.push(SymplecticPullbackCheck {
            subspace: label.clone(),
            dim: v.dim(),
            symplectic_m: in_m,
            symplectic_lifted: in_2n,
        });
    }

    let formulation = format!(
        "forms on R^{m} (the m-space) with the structure J_z = T J_{} T^t; lifted forms 2 T^t A T on R^{}",
        2 * n,
        2 * n
    );
    let mut v = assemble(&spec.a_re, &spec.a_im, &omega_z, formulation, opts)?;
    let lifted_report = witness::hypothesis_report_with(&a_lift, &b_lift, &c_lift, &sigma)?;
    let lifted_agrees = lifted_report.nondissipative == v.hypothesis.nondissipative
        && lifted_report.independent_abc == v.hypothesis.independent_abc
        && lifted_report.minrank == v.hypothesis.minrank
        && lifted_report.maxrank == v.hypothesis.maxrank
        && lifted_report.branch == v.hypothesis.branch;

    let passed = structure_residual <= PLUMBING_TOL
        && right_inverse_residual <= PLUMBING_TOL
        && projector_residual <= PLUMBING_TOL
        && sigma_sym <= PLUMBING_TOL
        && bracket_lift_residual <= PLUMBING_TOL
        && rank_checks.iter().all(|c| c.rank_lifted == c.rank_m)
        && symplectic_checks.iter().all(|c| c.symplectic_m == c.symplectic_lifted)
        && lifted_agrees;
    if !passed {
        v.notes.push("a pullback identity check failed; see plumbing".into());
    }
    v.plumbing = Some(PlumbingReport {
        j_z,
        structure_residual,
        right_inverse_residual,
        projector_residual,
        sigma_symmetry_residual: sigma_sym,
        bracket_lift_residual,
        rank_checks,
        symplectic_checks,
        lifted_agrees,
        passed,
    });
    Ok(v)
}

/// Structure constants of a graded nilpotent Lie algebra, `c[i][j][k]` being
/// the coefficient of `e_k` in `[e_i, e_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    c: Vec<f64>,
    grading: Vec<usize>,
}

impl StructureConstants {
    /// Builds from sparse entries `(i, j, k, value)`; the mirror entry
    /// `c[j][i][k] = −value` is implied.
    pub fn from_triplets(dim: usize, entries: &[(usize, usize, usize, f64)], grading: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("dim must be positive".into()));
        }
        if grading.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "grading",
                expected: dim,
                found: grading.len(),
            });
        }
        if grading.contains(&0) {
            return Err(Error::Invalid("layers are numbered from 1".into()));
        }
        let mut c = vec![0.0; dim * dim * dim];
        let mut set = vec![false; dim * dim * dim];
        let idx = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
        for &(i, j, k, v) in entries {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::Invalid(format!(
                    "index ({i}, {j}, {k}) out of range for dim {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Invalid(format!("non-finite constant at ({i}, {j}, {k})")));
            }
            if i == j && v != 0.0 {
                return Err(Error::AntisymmetryViolation { i, j, k });
            }
            for (p, q, val) in [(i, j, v), (j, i, -v)] {
                let at = idx(p, q, k);
                if set[at] && c[at] != val {
                    return Err(Error::AntisymmetryViolation { i, j, k });
                }
                c[at] = val;
                set[at] = true;
            }
        }
        Self::validated(dim, c, grading)
    }

    /// Builds from a dense `dim³` array in `[i][j][k]` order.
    pub fn from_dense(dim: usize, c: Vec<f64>, grading: Vec<usize>) -> Result<Self> {
        if c.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                what: "structure constant array",
                expected: dim * dim * dim,
                found: c.len(),
            });
        }
        if grading.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "grading",
                expected: dim,
                found: grading.len(),
            });
        }
        Self::validated(dim, c, grading)
    }

    fn validated(dim: usize, c: Vec<f64>, grading: Vec<usize>) -> Result<Self> {
        let sc = Self { dim, c, grading };
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let v = sc.get(i, j, k);
                    if v != -sc.get(j, i, k) {
                        return Err(Error::AntisymmetryViolation { i, j, k });
                    }
                    let min_layer = sc.grading[i] + sc.grading[j];
                    if v != 0.0 && sc.grading[k] < min_layer {
                        return Err(Error::GradingViolation {
                            i,
                            j,
                            k,
                            layer: sc.grading[k],
                            min_layer,
                        });
                    }
                }
            }
        }
        let residual = sc.jacobi_residual();
        let scale = sc.c.iter().fold(0.0_f64, |m, v| m.max(v.abs())).powi(2).max(1.0);
        if residual > JACOBI_TOL * scale {
            return Err(Error::JacobiViolation { residual });
        }
        Ok(sc)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grading(&self) -> &[usize] {
        &self.grading
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    /// Largest `|[[e_i, e_j], e_k] + [[e_j, e_k], e_i] + [[e_k, e_i], e_j]|` component.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for p in 0..n {
                            s += self.get(i, j, p) * self.get(p, k, l)
                                + self.get(j, k, p) * self.get(p, i, l)
                                + self.get(k, i, p) * self.get(p, j, l);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Quotient by the layers of degree ≥ 3, repackaged as a 2-step spec with one
/// `J⁽ⁱ⁾` per retained degree-2 basis vector, `J⁽ⁱ⁾_{jk} = c[j][k][i]`.
pub fn step_reduction(sc: &StructureConstants, a_re: SymmetricForm, a_im: SymmetricForm) -> Result<TwoStepGroupSpec> {
    let layer = |g: usize| -> Vec<usize> { (0..sc.dim).filter(|&i| sc.grading[i] == g).collect() };
    let first = layer(1);
    let second = layer(2);
    let m = first.len();
    if m == 0 {
        return Err(Error::Invalid("no basis vectors in layer 1".into()));
    }
    let mut j_list: Vec<DMatrix<f64>> = second
        .iter()
        .map(|&i| DMatrix::from_fn(m, m, |r, c| sc.get(first[r], first[c], i)))
        .collect();
    if j_list.is_empty() {
        j_list.push(DMatrix::zeros(m, m));
    }
    let dropped = sc.grading.iter().filter(|&&g| g >= 3).count();
    let mut spec = TwoStepGroupSpec::new(m, j_list, a_re, a_im, None)?;
    spec.note = Some(if dropped == 0 {
        "input is already 2-step; reduction is the identity".into()
    } else {
        format!(
            "quotient by the {dropped} basis vectors of degree >= 3; the operator factors through the quotient group, \
             so a not-locally-solvable verdict for this spec means the original operator is nowhere locally solvable"
        )
    });
    Ok(spec)
}

/// Rotates `(Ã, B̃)` to `(Re, Im)` of `e^{iθ}(Ã + iB̃)`.
pub fn rotate_coefficients(
    a_re: &SymmetricForm,
    a_im: &SymmetricForm,
    theta: f64,
) -> Result<(SymmetricForm, SymmetricForm)> {
    let (c, s) = (theta.cos(), theta.sin());
    Ok((a_re.combine(c, a_im, -s)?, a_re.combine(s, a_im, c)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn split_rank4() -> (SymmetricForm, SymmetricForm) {
        (
            SymmetricForm::from_monomials(4, &[(0, 3, 1.0), (1, 2, 1.0)]),
            SymmetricForm::from_monomials(4, &[(0, 2, 1.0), (1, 3, -1.0)]),
        )
    }

    fn fast() -> CheckOptions {
        CheckOptions { seed: 42, restarts: 20 }
    }

    #[test]
    fn split_rank4_is_inconclusive() {
        let (a, b) = split_rank4();
        let spec = HeisenbergOperatorSpec::new(2, a, b).unwrap();
        let v = heisenberg_verdict_with(&spec, &fast()).unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
        assert!(v.condition_a && v.condition_b);
        assert_eq!(v.condition_c, Branch::None);
        assert!(v.notes.iter().any(|n| n == INCONCLUSIVE_NOTE));
    }

    #[test]
    fn dissipative_operator_fails_condition_a() {
        let spec = HeisenbergOperatorSpec::new(2, SymmetricForm::identity(4), SymmetricForm::zeros(4)).unwrap();
        let v = heisenberg_verdict_with(&spec, &fast()).unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
        assert!(!v.condition_a);
    }

    #[test]
    fn branch_i_heisenberg_is_not_solvable() {
        let mut r = rng::stream(9, 0);
        let (a, b) = synth::branch_i_pair(&mut r, 18);
        let spec = HeisenbergOperatorSpec::new(9, a, b).unwrap();
        let v = heisenberg_verdict_with(&spec, &fast()).unwrap();
        assert_eq!(v.outcome, Outcome::NotLocallySolvable);
        assert_eq!(v.condition_c, Branch::I);
        assert!(v.witness.as_ref().unwrap().is_found());
        let w = two_step_verdict_with(&spec.as_two_step(), &fast()).unwrap();
        assert!(v.same_decision(&w));
        assert_eq!(w.mu0, Some(vec![1.0]));
        assert!(w.notes.iter().any(|n| n == NOWHERE_NOTE));
    }

    #[test]
    fn mu_search_prefers_nondegenerate_coordinate() {
        let mut j1 = DMatrix::zeros(4, 4);
        j1[(0, 1)] = 1.0;
        j1[(1, 0)] = -1.0;
        let (a, b) = split_rank4();
        let spec = TwoStepGroupSpec::new(4, vec![j1, canonical_j(2)], a, b, None).unwrap();
        assert_eq!(find_nondegenerate_mu(&spec, 1).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn abelian_has_no_mu() {
        let (a, b) = split_rank4();
        let spec = TwoStepGroupSpec::new(4, vec![DMatrix::zeros(4, 4); 2], a, b, None).unwrap();
        assert_eq!(
            two_step_verdict(&spec).unwrap_err(),
            Error::NondegenerateMuNotFound {
                budget: MU_SEARCH_BUDGET
            }
        );
    }

    #[test]
    fn identity_pullback_matches_heisenberg() {
        let (a, b) = split_rank4();
        let mut t = DMatrix::zeros(4, 6);
        // T = [I_{2d} | 0] in (x, ξ) order for n = 3, d = 2: keep x1, x2, ξ1, ξ2
        t[(0, 0)] = 1.0;
        t[(1, 1)] = 1.0;
        t[(2, 3)] = 1.0;
        t[(3, 4)] = 1.0;
        let spec = PointSymbolSpec::new(3, 4, t, a.clone(), b.clone()).unwrap();
        let v = point_symbol_verdict_with(&spec, &fast()).unwrap();
        let plumbing = v.plumbing.as_ref().unwrap();
        assert!(plumbing.passed, "{plumbing:?}");
        assert_eq!(plumbing.j_z, canonical_j(2));
        let h = heisenberg_verdict_with(&HeisenbergOperatorSpec::new(2, a, b).unwrap(), &fast()).unwrap();
        assert!(v.same_decision(&h));
    }

    #[test]
    fn random_pullback_identities() {
        let mut r = rng::stream(5, 0);
        let (a, b) = split_rank4();
        let t = synth::surjective_map(&mut r, 4, 4);
        let spec = PointSymbolSpec::new(4, 4, t, a, b).unwrap();
        let v = point_symbol_verdict_with(&spec, &fast()).unwrap();
        assert!(v.plumbing.as_ref().unwrap().passed, "{:?}", v.plumbing);
        assert_eq!(v.outcome, Outcome::Inconclusive);
    }

    #[test]
    fn rank_deficient_t_rejected() {
        let (a, b) = split_rank4();
        let mut t = DMatrix::zeros(4, 8);
        for i in 0..3 {
            t[(i, i)] = 1.0;
        }
        let spec = PointSymbolSpec::new(4, 4, t, a, b).unwrap();
        assert_eq!(
            point_symbol_verdict(&spec).unwrap_err(),
            Error::RankDeficient { rank: 3, expected: 4 }
        );
    }

    fn free_three_step() -> StructureConstants {
        StructureConstants::from_triplets(
            5,
            &[(0, 1, 2, 1.0), (2, 0, 3, 1.0), (2, 1, 4, 1.0)],
            vec![1, 1, 2, 3, 3],
        )
        .unwrap()
    }

    #[test]
    fn free_three_step_reduces_to_heisenberg() {
        let sc = free_three_step();
        let spec = step_reduction(
            &sc,
            SymmetricForm::from_diagonal(&[1.0, -1.0]),
            SymmetricForm::from_monomials(2, &[(0, 1, 1.0)]),
        )
        .unwrap();
        assert_eq!(spec.m, 2);
        assert_eq!(spec.j_list, vec![canonical_j(1)]);
        two_step_verdict(&spec).unwrap();
    }

    #[test]
    fn two_step_reduction_is_identity() {
        let sc = StructureConstants::from_triplets(3, &[(0, 1, 2, 1.0)], vec![1, 1, 2]).unwrap();
        let (a, b) = (SymmetricForm::identity(2), SymmetricForm::zeros(2));
        let spec = step_reduction(&sc, a.clone(), b.clone()).unwrap();
        assert_eq!(spec.j_list, vec![canonical_j(1)]);
        assert_eq!((spec.a_re, spec.a_im), (a, b));
    }

    #[test]
    fn invalid_structure_constants() {
        assert!(matches!(
            StructureConstants::from_triplets(3, &[(0, 1, 2, 1.0), (1, 0, 2, 1.0)], vec![1, 1, 2]),
            Err(Error::AntisymmetryViolation { .. })
        ));
        assert!(matches!(
            StructureConstants::from_triplets(3, &[(0, 1, 2, 1.0)], vec![1, 1, 1]),
            Err(Error::GradingViolation { .. })
        ));
        let mut dense = vec![0.0; 27];
        dense[5] = 1.0; // c[0][1][2] without its mirror
        assert!(matches!(
            StructureConstants::from_dense(3, dense, vec![1, 1, 2]),
            Err(Error::AntisymmetryViolation { .. })
        ));
    }

    #[test]
    fn jacobi_violation_detected() {
        // [e0, e1] = e3, [e3, e2] = e4 and nothing else: the cyclic sum over
        // (e0, e1, e2) is e4
        let r = StructureConstants::from_triplets(5, &[(0, 1, 3, 1.0), (3, 2, 4, 1.0)], vec![1, 1, 1, 2, 3]);
        assert!(matches!(r, Err(Error::JacobiViolation { .. })));
    }

    #[test]
    fn semisimple_constants_violate_grading() {
        let mut c = vec![0.0; 27];
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(i * 3 + j) * 3 + k] = 1.0;
            c[(j * 3 + i) * 3 + k] = -1.0;
        }
        let r = StructureConstants::from_dense(3, c, vec![1, 1, 1]);
        assert!(matches!(r, Err(Error::GradingViolation { .. })));
    }

    #[test]
    fn rotation_keeps_outcome() {
        let (a, b) = split_rank4();
        let (ra, rb) = rotate_coefficients(&a, &b, 0.7).unwrap();
        let v1 = heisenberg_verdict_with(&HeisenbergOperatorSpec::new(2, a, b).unwrap(), &fast()).unwrap();
        let v2 = heisenberg_verdict_with(&HeisenbergOperatorSpec::new(2, ra, rb).unwrap(), &fast()).unwrap();
        assert_eq!(v1.outcome, v2.outcome);
        assert_eq!(
            (v1.condition_a, v1.condition_b, v1.condition_c),
            (v2.condition_a, v2.condition_b, v2.condition_c)
        );
    }
}
