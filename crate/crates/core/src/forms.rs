//! Quadratic forms on a symplectic vector space, their Hamilton maps, and
//! Poisson brackets.
//!
//! Conventions: coordinates are ordered position-first, `z = (x, ξ)`. A
//! [`SymplecticStructure`] is described by its structure matrix `J` (the
//! Poisson tensor). The Hamilton map of a form `F` is `S_F = J F`, the pairing
//! is `ω(u, v) = uᵀ J⁻¹ v`, and the bracket of two functions is
//! `{a, b} = −∇aᵀ J ∇b`. For the canonical `J = [[0, I], [−I, 0]]` the pairing
//! is `σ = Σ dξ_j ∧ dx_j` and the bracket is the usual coordinate formula
//! `Σ (∂a/∂ξ_j ∂b/∂x_j − ∂a/∂x_j ∂b/∂ξ_j)`, which gives
//! `C = 2(BJA − AJB)` for `{Q_A, Q_B} = Q_C`.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;

/// Real symmetric matrix `M` standing for the quadratic form `Q(z) = zᵀ M z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricForm {
    m: DMatrix<f64>,
}

impl SymmetricForm {
    /// Builds a form from a square matrix, keeping only its symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare("form"));
        }
        if m.nrows() == 0 {
            return Err(Error::Invalid("form of dimension zero".into()));
        }
        Ok(Self {
            m: linalg::symmetrize(&m),
        })
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "form entries",
                expected: n * n,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "form row length",
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_slice(n, &data)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    /// Form given by a list of monomials `(i, j, c)` meaning `c · z_i z_j`.
    pub fn from_monomials(n: usize, terms: &[(usize, usize, f64)]) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, c) in terms {
            if i == j {
                m[(i, i)] += c;
            } else {
                m[(i, j)] += c / 2.0;
                m[(j, i)] += c / 2.0;
            }
        }
        Self { m }
    }

    /// Largest entry of `|M − Mᵀ|`, useful for warning about asymmetric input.
    pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
        linalg::max_abs(&(m - m.transpose()))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|v| *v == 0.0)
    }

    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.m * z))
    }

    /// The associated symmetric bilinear form `Q(u, v) = uᵀ M v`.
    pub fn bilinear(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.m * v))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * s }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self {
            m: &self.m * alpha + &other.m * beta,
        })
    }

    /// The form divided by its Frobenius norm (unchanged when zero).
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scale(1.0 / n)
        }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn rank(&self) -> usize {
        linalg::sym_rank(&self.m)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.m)
    }
}

impl Serialize for SymmetricForm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Serde helper for serialising a dense matrix row-major.
pub fn serialize_rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

fn check_same_dim(a: &SymmetricForm, b: &SymmetricForm) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "form pair",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Linear symplectic structure on `ℝ^{2d}` given by its structure matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticStructure {
    j: DMatrix<f64>,
    pairing: DMatrix<f64>,
}

impl SymplecticStructure {
    /// `J = [[0, I_d], [−I_d, 0]]`.
    pub fn canonical(d: usize) -> Self {
        let j = canonical_j(d);
        // J⁻¹ = −J for the canonical matrix
        let pairing = -&j;
        Self { j, pairing }
    }

    /// Structure from an arbitrary skew matrix acting as Poisson tensor. The
    /// input is antisymmetrised; a degenerate result is rejected.
    pub fn from_structure_matrix(j: DMatrix<f64>) -> Result<Self> {
        let (j, pairing) = skew_and_inverse(j)?;
        Ok(Self { j, pairing })
    }

    /// Structure from a pairing matrix `Ω` with `ω(u, v) = uᵀ Ω v`.
    pub fn from_pairing(omega: DMatrix<f64>) -> Result<Self> {
        let (pairing, j) = skew_and_inverse(omega)?;
        Ok(Self { j, pairing })
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn structure_matrix(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn pairing_matrix(&self) -> &DMatrix<f64> {
        &self.pairing
    }

    pub fn is_canonical(&self) -> bool {
        self.dim().is_multiple_of(2) && self.j == canonical_j(self.dim() / 2)
    }

    pub fn omega(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.pairing * v))
    }

    fn check_form(&self, f: &SymmetricForm) -> Result<()> {
        if f.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "form vs symplectic structure",
                expected: self.dim(),
                found: f.dim(),
            });
        }
        Ok(())
    }
}

pub fn canonical_j(d: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = 1.0;
        j[(d + i, i)] = -1.0;
    }
    j
}

fn skew_and_inverse(m: DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::NotSquare("structure matrix"));
    }
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::OddDimension(n));
    }
    let skew = (&m - m.transpose()) * 0.5;
    let sv = linalg::singular_values(&skew);
    let smax = sv[0];
    let smin = *sv.last().expect("nonempty spectrum");
    if smax == 0.0 || smin <= linalg::rank_tolerance(smax, n) {
        return Err(Error::DegenerateStructure { sigma_min: smin });
    }
    let inv = skew
        .clone()
        .try_inverse()
        .ok_or(Error::DegenerateStructure { sigma_min: smin })?;
    let inv = (&inv - inv.transpose()) * 0.5;
    Ok((skew, inv))
}

/// Hamilton map `S` of a real form: the unique endomorphism with
/// `ω(u, S v) = Q(u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonMap {
    #[serde(serialize_with = "serialize_rows")]
    pub matrix: DMatrix<f64>,
    pub form: SymmetricForm,
}

impl HamiltonMap {
    /// Largest `|ω(Sv, w) + ω(v, Sw)|` over the given probe pairs, relative to
    /// `‖S‖·‖Ω‖·|v|·|w|`.
    pub fn sp_defect(&self, structure: &SymplecticStructure, probes: &[(DVector<f64>, DVector<f64>)]) -> f64 {
        let scale = self.matrix.norm() * structure.pairing_matrix().norm();
        probes
            .iter()
            .map(|(v, w)| {
                let lhs = structure.omega(&(&self.matrix * v), w) + structure.omega(v, &(&self.matrix * w));
                let denom = scale * v.norm() * w.norm();
                if denom == 0.0 {
                    lhs.abs()
                } else {
                    lhs.abs() / denom
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn hamilton_map(f: &SymmetricForm, structure: &SymplecticStructure) -> Result<HamiltonMap> {
    structure.check_form(f)?;
    // Ω S = F with Ω = J⁻¹
    let matrix = structure.structure_matrix() * f.matrix();
    Ok(HamiltonMap {
        matrix,
        form: f.clone(),
    })
}

/// Form whose Hamilton map is `s`, i.e. `F = Ω S`, symmetrised.
pub fn form_of_hamilton_map(s: &DMatrix<f64>, structure: &SymplecticStructure) -> Result<SymmetricForm> {
    if s.nrows() != structure.dim() || s.ncols() != structure.dim() {
        return Err(Error::DimensionMismatch {
            what: "Hamilton map vs symplectic structure",
            expected: structure.dim(),
            found: s.nrows(),
        });
    }
    SymmetricForm::new(structure.pairing_matrix() * s)
}

/// `{Q_A, Q_B}` from the gradient pairing `−(2Az)ᵀ J (2Bz)`, symmetrised.
pub fn poisson_bracket(a: &SymmetricForm, b: &SymmetricForm, structure: &SymplecticStructure) -> Result<SymmetricForm> {
    check_same_dim(a, b)?;
    structure.check_form(a)?;
    let j = structure.structure_matrix();
    let (am, bm) = (a.matrix(), b.matrix());
    let c = (am * j * bm + bm * j.transpose() * am) * -2.0;
    SymmetricForm::new(c)
}

/// `{Q_A, Q_B}` through the Lie algebra isomorphism `Q^S ↦ −2S`: the result
/// is the form whose Hamilton map is `−2[S_A, S_B]`.
pub fn bracket_via_hamilton(
    a: &SymmetricForm,
    b: &SymmetricForm,
    structure: &SymplecticStructure,
) -> Result<SymmetricForm> {
    check_same_dim(a, b)?;
    let sa = hamilton_map(a, structure)?.matrix;
    let sb = hamilton_map(b, structure)?.matrix;
    let commutator = &sa * &sb - &sb * &sa;
    form_of_hamilton_map(&(commutator * -2.0), structure)
}

/// Subspace of `ℝⁿ` held by an orthonormal column basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subspace {
    pub ambient_dim: usize,
    #[serde(serialize_with = "serialize_rows")]
    pub basis: DMatrix<f64>,
}

impl Subspace {
    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    /// Orthonormal basis of the span of the given columns.
    pub fn span_of(columns: &DMatrix<f64>) -> Self {
        Self {
            ambient_dim: columns.nrows(),
            basis: linalg::column_basis(columns),
        }
    }

    pub fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        Self {
            ambient_dim: basis.nrows(),
            basis,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    /// Largest distance of `v` from the subspace relative to `|v|`.
    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        let proj = &self.basis * (self.basis.transpose() * v);
        (v - proj).norm() <= tol * v.norm().max(f64::MIN_POSITIVE)
    }
}

/// `ker A ∩ ker B`, the null space of the stacked `2n × n` matrix `[A; B]`.
pub fn joint_radical(a: &SymmetricForm, b: &SymmetricForm) -> Result<Subspace> {
    check_same_dim(a, b)?;
    let n = a.dim();
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(a.matrix());
    stacked.view_mut((n, 0), (n, n)).copy_from(b.matrix());
    Ok(Subspace::from_orthonormal(linalg::null_space(&stacked)))
}

/// Outcome of the symplectic-subspace test together with its certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymplecticCheck {
    pub symplectic: bool,
    /// Smallest singular value of the restricted pairing `VᵀΩV`; absent for
    /// the zero subspace.
    pub sigma_min: Option<f64>,
    /// The pairing vanishes identically on the subspace.
    pub isotropic: bool,
}

pub fn is_symplectic_subspace(v: &Subspace, structure: &SymplecticStructure) -> Result<SymplecticCheck> {
    if v.ambient_dim != structure.dim() {
        return Err(Error::DimensionMismatch {
            what: "subspace vs symplectic structure",
            expected: structure.dim(),
            found: v.ambient_dim,
        });
    }
    if v.is_empty() {
        return Ok(SymplecticCheck {
            symplectic: true,
            sigma_min: None,
            isotropic: true,
        });
    }
    let omega = structure.pairing_matrix();
    let restricted = v.basis.transpose() * omega * &v.basis;
    let sv = linalg::singular_values(&restricted);
    let omega_norm = linalg::singular_values(omega)[0];
    let tol = linalg::rank_tolerance(omega_norm, structure.dim());
    let sigma_min = *sv.last().expect("nonempty restriction");
    Ok(SymplecticCheck {
        symplectic: sigma_min > tol,
        sigma_min: Some(sigma_min),
        isotropic: sv[0] <= tol,
    })
}

/// `Tᵀ F T`, symmetrised. `T` may be rectangular with `F.dim()` rows.
pub fn congruence(f: &SymmetricForm, t: &DMatrix<f64>) -> Result<SymmetricForm> {
    if t.nrows() != f.dim() {
        return Err(Error::DimensionMismatch {
            what: "congruence transform rows",
            expected: f.dim(),
            found: t.nrows(),
        });
    }
    if t.ncols() == 0 {
        return Err(Error::Invalid("congruence transform with no columns".into()));
    }
    SymmetricForm::new(t.transpose() * f.matrix() * t)
}
