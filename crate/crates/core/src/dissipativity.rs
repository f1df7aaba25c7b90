//! Non-dissipativity of a pair of symmetric matrices: the only
//! positive-semidefinite element of `span{A, B}` is zero.
//!
//! Two independent routes are provided. The directional route scans the
//! smallest eigenvalue of the unit pencil element over the circle and refines
//! every grid maximum. The certificate route looks for `Q ≻ 0` with
//! `tr(QAQ) = tr(QBQ) = 0`, which exists exactly for non-dissipative spans.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{serialize_rows, SymmetricForm};
use crate::linalg;

/// Eigenvalue slack for semidefiniteness of a unit-Frobenius pencil element.
pub const EIG_TOL: f64 = 1e-9;
/// Relative trace-residual tolerance of a certificate.
pub const CERT_RTOL: f64 = 1e-8;
pub const DEFAULT_GRID: usize = 1024;
const REFINE_ITERS: usize = 60;
const MAX_ITERATIONS: usize = 10_000;
const LEVEL_ITERATIONS: usize = 1_000;
const INTERIOR_LEVELS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalProfile {
    pub thetas: Vec<f64>,
    pub min_eigs: Vec<f64>,
}

impl DirectionalProfile {
    /// Largest scanned value and the angle attaining it.
    pub fn max(&self) -> (f64, f64) {
        self.thetas
            .iter()
            .zip(&self.min_eigs)
            .fold(
                (f64::NAN, f64::NEG_INFINITY),
                |best, (&t, &v)| if v > best.1 { (t, v) } else { best },
            )
    }
}

/// Smallest eigenvalue of `cosθ·A + sinθ·B` on a uniform grid over `[0, 2π)`.
pub fn min_eig_scan(a: &SymmetricForm, b: &SymmetricForm, grid_size: usize) -> Result<DirectionalProfile> {
    check_pair(a, b)?;
    if grid_size < 8 {
        return Err(Error::Invalid(format!("grid size {grid_size} is below 8")));
    }
    let thetas: Vec<f64> = (0..grid_size).map(|i| TAU * i as f64 / grid_size as f64).collect();
    let min_eigs = thetas
        .iter()
        .map(|&t| linalg::min_eigenvalue(&combination(a.matrix(), b.matrix(), t)))
        .collect();
    Ok(DirectionalProfile { thetas, min_eigs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DissipativityVerdict {
    /// Every nonzero element of the span has a negative eigenvalue;
    /// `max_min_eig` is the best smallest eigenvalue over unit elements,
    /// attained in direction `theta`.
    NonDissipative { max_min_eig: f64, theta: f64 },
    /// `cosθ·A + sinθ·B` is positive semidefinite within the slack. The
    /// witness is that element scaled to unit Frobenius norm.
    Dissipative {
        theta: f64,
        min_eig: f64,
        witness: SymmetricForm,
    },
}

impl DissipativityVerdict {
    pub fn is_non_dissipative(&self) -> bool {
        matches!(self, Self::NonDissipative { .. })
    }
}

/// Orthonormal (Frobenius) basis of `span{A, B}` plus the data needed to
/// express its elements back in terms of `A` and `B`.
struct SpanFrame {
    e1: DMatrix<f64>,
    e2: Option<DMatrix<f64>>,
    // element cosφ·e1 + sinφ·e2 = α A + β B with
    // α = cosφ·p + sinφ·q, β = cosφ·r + sinφ·s
    p: f64,
    q: f64,
    r: f64,
    s: f64,
}

impl SpanFrame {
    fn new(a: &SymmetricForm, b: &SymmetricForm) -> Result<Self> {
        let (na, nb) = (a.norm(), b.norm());
        if na == 0.0 && nb == 0.0 {
            return Err(Error::ZeroPair);
        }
        if na == 0.0 {
            return Ok(Self {
                e1: b.matrix() / nb,
                e2: None,
                p: 0.0,
                q: 0.0,
                r: 1.0 / nb,
                s: 0.0,
            });
        }
        let e1 = a.matrix() / na;
        if nb == 0.0 {
            return Ok(Self {
                e1,
                e2: None,
                p: 1.0 / na,
                q: 0.0,
                r: 0.0,
                s: 0.0,
            });
        }
        let bh = b.matrix() / nb;
        let k = linalg::frobenius_dot(&bh, &e1);
        let rest = &bh - &e1 * k;
        let rn = rest.norm();
        if rn <= linalg::RANK_RTOL {
            return Ok(Self {
                e1,
                e2: None,
                p: 1.0 / na,
                q: 0.0,
                r: 0.0,
                s: 0.0,
            });
        }
        Ok(Self {
            e1,
            e2: Some(rest / rn),
            p: 1.0 / na,
            q: -k / (rn * na),
            r: 0.0,
            s: 1.0 / (rn * nb),
        })
    }

    fn element(&self, phi: f64) -> DMatrix<f64> {
        match &self.e2 {
            Some(e2) => &self.e1 * phi.cos() + e2 * phi.sin(),
            None => &self.e1 * phi.cos(),
        }
    }

    fn original_angle(&self, phi: f64) -> f64 {
        let (c, s) = (phi.cos(), phi.sin());
        let alpha = c * self.p + s * self.q;
        let beta = c * self.r + s * self.s;
        linalg::wrap_angle(beta.atan2(alpha))
    }
}

fn combination(a: &DMatrix<f64>, b: &DMatrix<f64>, theta: f64) -> DMatrix<f64> {
    a * theta.cos() + b * theta.sin()
}

fn check_pair(a: &SymmetricForm, b: &SymmetricForm) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "form pair",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

pub fn is_non_dissipative(a: &SymmetricForm, b: &SymmetricForm) -> Result<DissipativityVerdict> {
    is_non_dissipative_with_grid(a, b, DEFAULT_GRID)
}

pub fn is_non_dissipative_with_grid(a: &SymmetricForm, b: &SymmetricForm, grid: usize) -> Result<DissipativityVerdict> {
    check_pair(a, b)?;
    if grid < 8 {
        return Err(Error::Invalid(format!("grid size {grid} is below 8")));
    }
    let frame = SpanFrame::new(a, b)?;
    let (phi, value) = if frame.e2.is_none() {
        // one-dimensional span: only ±generator are candidates
        let ev = linalg::sym_eigenvalues(&frame.e1);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo >= -hi {
            (0.0, lo)
        } else {
            (std::f64::consts::PI, -hi)
        }
    } else {
        let f = |phi: f64| linalg::min_eigenvalue(&frame.element(phi));
        let step = TAU / grid as f64;
        let values: Vec<f64> = (0..grid).map(|i| f(step * i as f64)).collect();
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..grid {
            let prev = values[(i + grid - 1) % grid];
            let next = values[(i + 1) % grid];
            if values[i] >= prev && values[i] >= next {
                let centre = step * i as f64;
                let cand = linalg::golden_max(f, centre - step, centre + step, REFINE_ITERS);
                if cand.1 > best.1 {
                    best = cand;
                }
            }
        }
        best
    };
    if value >= -EIG_TOL {
        let theta = frame.original_angle(phi);
        let witness = SymmetricForm::new(combination(a.matrix(), b.matrix(), theta))?.normalized();
        let min_eig = linalg::min_eigenvalue(witness.matrix());
        Ok(DissipativityVerdict::Dissipative {
            theta,
            min_eig,
            witness,
        })
    } else {
        Ok(DissipativityVerdict::NonDissipative {
            max_min_eig: value,
            theta: frame.original_angle(phi),
        })
    }
}

/// Positive-definite `Q` with `tr(QFQ) = 0` for every form of the span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceCertificate {
    #[serde(serialize_with = "serialize_rows")]
    pub q: DMatrix<f64>,
    /// `|tr(QF_iQ)|` for each input form, in input order.
    pub residuals: Vec<f64>,
    pub min_eig_q: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

impl TraceCertificate {
    pub fn residual_a(&self) -> f64 {
        self.residuals[0]
    }

    pub fn residual_b(&self) -> f64 {
        self.residuals.get(1).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertificateOutcome {
    Certified(TraceCertificate),
    Infeasible {
        theta: f64,
        min_eig: f64,
        witness: SymmetricForm,
    },
}

/// Certificate for a pair; `Infeasible` when the pair is dissipative and
/// `Err(NumericalInconclusive)` when the solver runs out of iterations.
pub fn trace_certificate(a: &SymmetricForm, b: &SymmetricForm) -> Result<CertificateOutcome> {
    match is_non_dissipative(a, b)? {
        DissipativityVerdict::Dissipative {
            theta,
            min_eig,
            witness,
        } => Ok(CertificateOutcome::Infeasible {
            theta,
            min_eig,
            witness,
        }),
        DissipativityVerdict::NonDissipative { .. } => {
            certify_span(&[a.clone(), b.clone()]).map(CertificateOutcome::Certified)
        }
    }
}

/// Alternating projections between `{P ⪰ δI, tr P = 1}` and the affine plane
/// `{tr(P F_i) = 0, tr P = 1}` with a decreasing interior margin `δ`; the
/// first plane iterate that is positive definite gives `Q = P^{1/2}`.
pub fn certify_span(forms: &[SymmetricForm]) -> Result<TraceCertificate> {
    let n = forms.first().ok_or(Error::Invalid("empty form list".into()))?.dim();
    if let Some(f) = forms.iter().find(|f| f.dim() != n) {
        return Err(Error::DimensionMismatch {
            what: "form list",
            expected: n,
            found: f.dim(),
        });
    }
    let basis = orthonormal_span(forms);
    if basis.is_empty() {
        return Err(Error::ZeroPair);
    }
    let identity = DMatrix::<f64>::identity(n, n);
    let mut constraints: Vec<&DMatrix<f64>> = basis.iter().collect();
    constraints.push(&identity);
    let g = linalg::gram(&constraints);
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or(Error::NumericalInconclusive { iterations: 0 })?;
    let k = constraints.len();
    let project_plane = |p: &DMatrix<f64>| -> DMatrix<f64> {
        let rhs = nalgebra::DVector::from_fn(k, |i, _| {
            linalg::frobenius_dot(constraints[i], p) - if i + 1 == k { 1.0 } else { 0.0 }
        });
        let mu = &g_inv * rhs;
        let mut out = p.clone();
        for (i, c) in constraints.iter().enumerate() {
            out -= *c * mu[i];
        }
        linalg::symmetrize(&out)
    };

    let mut p = &identity / n as f64;
    let mut iterations = 0;
    'levels: for level in 0..INTERIOR_LEVELS {
        let delta = 0.5 / n as f64 * 10f64.powi(-(level as i32));
        for _ in 0..LEVEL_ITERATIONS {
            let pl = project_plane(&p);
            if linalg::min_eigenvalue(&pl) > 1e-12 {
                return finish_certificate(forms, &pl, iterations);
            }
            if iterations >= MAX_ITERATIONS {
                break 'levels;
            }
            let pk = project_trace_one_psd(&pl, delta);
            let moved = (&pk - &p).norm();
            p = pk;
            iterations += 1;
            if moved < 1e-15 {
                break;
            }
        }
    }
    Err(Error::NumericalInconclusive { iterations })
}

fn finish_certificate(forms: &[SymmetricForm], p: &DMatrix<f64>, iterations: usize) -> Result<TraceCertificate> {
    let q = linalg::psd_sqrt(p);
    let residuals: Vec<f64> = forms
        .iter()
        .map(|f| (q.transpose() * f.matrix() * &q).trace().abs())
        .collect();
    let tolerance = CERT_RTOL * forms.iter().map(SymmetricForm::norm).sum::<f64>();
    let min_eig_q = linalg::min_eigenvalue(&q);
    if min_eig_q <= 0.0 || residuals.iter().any(|r| *r > tolerance) {
        return Err(Error::NumericalInconclusive { iterations });
    }
    Ok(TraceCertificate {
        q,
        residuals,
        min_eig_q,
        tolerance,
        iterations,
    })
}

fn orthonormal_span(forms: &[SymmetricForm]) -> Vec<DMatrix<f64>> {
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    for f in forms {
        if f.norm() == 0.0 {
            continue;
        }
        let mut v = f.matrix() / f.norm();
        for e in &basis {
            let c = linalg::frobenius_dot(&v, e);
            v -= e * c;
        }
        let vn = v.norm();
        if vn > linalg::RANK_RTOL {
            basis.push(v / vn);
        }
    }
    basis
}

/// Nearest point of `{P : eigenvalues ≥ δ, tr P = 1}` in Frobenius norm.
fn project_trace_one_psd(p: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let (values, vectors) = linalg::sym_eigen_sorted(p);
    let n = values.len();
    let budget = 1.0 - delta * n as f64;
    let shifted: Vec<f64> = values.iter().map(|v| v - delta).collect();
    let projected = project_simplex(&shifted, budget);
    let d = nalgebra::DVector::from_iterator(n, projected.iter().map(|v| v + delta));
    &vectors * DMatrix::from_diagonal(&d) * vectors.transpose()
}

/// Euclidean projection onto `{x ≥ 0, Σx = radius}`.
fn project_simplex(y: &[f64], radius: f64) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            shift = t;
        }
    }
    y.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Congruence by a certificate so that both forms become traceless.
pub fn trace_normalize(a: &SymmetricForm, b: &SymmetricForm) -> Result<(SymmetricForm, SymmetricForm, DMatrix<f64>)> {
    match trace_certificate(a, b)? {
        CertificateOutcome::Infeasible { theta, .. } => Err(Error::Dissipative { theta }),
        CertificateOutcome::Certified(cert) => {
            let a2 = crate::forms::congruence(a, &cert.q)?;
            let b2 = crate::forms::congruence(b, &cert.q)?;
            Ok((a2, b2, cert.q))
        }
    }
}
