//! Rank structure of the pencil `span{A, B}`: generic rank (maxrank),
//! smallest nonzero rank (minrank) and the directions where the rank drops.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::SymmetricForm;
use crate::linalg;
use crate::rng;

pub const SCAN_POINTS: usize = 512;
const REFINE_ITERS: usize = 80;
const GENERIC_PROBES: usize = 9;
const PENCIL_SEED: u64 = 0x70656e63696c;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DropPoint {
    /// Angle of `cosθ·A + sinθ·B`, in `[0, 2π)`.
    pub theta: f64,
    pub rank: usize,
    /// The maxrank-th singular value of the unit element at `theta`.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PencilReport {
    pub maxrank: usize,
    pub minrank: usize,
    pub drop_points: Vec<DropPoint>,
    pub generic_theta: f64,
    /// Angles where the deciding singular value landed within a factor ten
    /// of the rank cut.
    pub marginal_thetas: Vec<f64>,
}

impl PencilReport {
    pub fn is_marginal(&self) -> bool {
        !self.marginal_thetas.is_empty()
    }
}

/// Numerical rank of `cosθ·A + sinθ·B`. `tol` overrides the default relative
/// singular-value cut with an absolute one.
pub fn rank_at(a: &SymmetricForm, b: &SymmetricForm, theta: f64, tol: Option<f64>) -> Result<usize> {
    check_dims(a, b)?;
    let m = a.matrix() * theta.cos() + b.matrix() * theta.sin();
    let scale = a.norm().max(b.norm());
    let norm = m.norm();
    if norm == 0.0 || norm <= 1e-12 * scale {
        return Err(Error::ZeroElement { theta });
    }
    let sv = linalg::sym_singular_values(&m);
    Ok(match tol {
        Some(t) => sv.iter().filter(|&&s| s > t).count(),
        None => linalg::rank_from_sorted(&sv, m.nrows()),
    })
}

fn check_dims(a: &SymmetricForm, b: &SymmetricForm) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "form pair",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Fails with `DependentPair` unless `A` and `B` span a plane.
pub fn check_independent(a: &SymmetricForm, b: &SymmetricForm) -> Result<()> {
    check_dims(a, b)?;
    if linalg::independent_count(&[a.matrix(), b.matrix()]) < 2 {
        return Err(Error::DependentPair);
    }
    Ok(())
}

/// The pencil in normalised coordinates `cosφ·Â + sinφ·B̂`.
struct UnitPencil {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    na: f64,
    nb: f64,
}

impl UnitPencil {
    fn new(a: &SymmetricForm, b: &SymmetricForm) -> Self {
        Self {
            a: a.matrix() / a.norm(),
            b: b.matrix() / b.norm(),
            na: a.norm(),
            nb: b.norm(),
        }
    }

    fn element(&self, phi: f64) -> DMatrix<f64> {
        &self.a * phi.cos() + &self.b * phi.sin()
    }

    fn theta(&self, phi: f64) -> f64 {
        linalg::wrap_angle((phi.sin() / self.nb).atan2(phi.cos() / self.na))
    }

    fn spectrum(&self, phi: f64) -> Vec<f64> {
        linalg::sym_singular_values(&self.element(phi))
    }
}

pub fn rank_profile(a: &SymmetricForm, b: &SymmetricForm) -> Result<PencilReport> {
    check_independent(a, b)?;
    let n = a.dim();
    let pencil = UnitPencil::new(a, b);

    let mut rng = rng::stream(PENCIL_SEED, n as u64);
    let mut maxrank = 0;
    let mut generic_phi = 0.0;
    for _ in 0..GENERIC_PROBES {
        let phi = rng.random::<f64>() * TAU;
        let r = linalg::rank_from_sorted(&pencil.spectrum(phi), n);
        if r > maxrank {
            maxrank = r;
            generic_phi = phi;
        }
    }

    // rank is invariant under negation, so half a turn suffices
    let k = maxrank - 1;
    let sigma_k = |phi: f64| -> f64 { pencil.spectrum(phi)[k] };
    let step = PI / SCAN_POINTS as f64;
    let values: Vec<f64> = (0..SCAN_POINTS).map(|i| sigma_k(step * i as f64)).collect();

    let mut drops: Vec<DropPoint> = Vec::new();
    let mut marginal = Vec::new();
    for i in 0..SCAN_POINTS {
        let prev = values[(i + SCAN_POINTS - 1) % SCAN_POINTS];
        let next = values[(i + 1) % SCAN_POINTS];
        if !(values[i] <= prev && values[i] <= next) {
            continue;
        }
        let centre = step * i as f64;
        let (phi, _) = linalg::golden_min(sigma_k, centre - step, centre + step, REFINE_ITERS);
        let phi = phi.rem_euclid(PI);
        let sv = pencil.spectrum(phi);
        let tol = linalg::rank_tolerance(sv[0], n);
        if sv[k] >= tol && sv[k] <= 10.0 * tol {
            marginal.push(pencil.theta(phi));
        }
        let rank = linalg::rank_from_sorted(&sv, n);
        if rank < maxrank {
            for p in [phi, phi + PI] {
                let theta = pencil.theta(p);
                if !drops.iter().any(|d| angle_distance(d.theta, theta) < 1e-7) {
                    drops.push(DropPoint {
                        theta,
                        rank,
                        sigma: sv[k],
                    });
                }
            }
        }
    }
    drops.sort_by(|x, y| x.theta.total_cmp(&y.theta));
    marginal.sort_by(f64::total_cmp);
    let minrank = drops.iter().map(|d| d.rank).min().unwrap_or(maxrank).min(maxrank);
    Ok(PencilReport {
        maxrank,
        minrank,
        drop_points: drops,
        generic_theta: pencil.theta(generic_phi),
        marginal_thetas: marginal,
    })
}

fn angle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

/// A pencil element of maximal rank, normalised to unit Frobenius norm.
pub fn max_rank_element(a: &SymmetricForm, b: &SymmetricForm) -> Result<(f64, SymmetricForm)> {
    let report = rank_profile(a, b)?;
    let theta = report.generic_theta;
    let f = a.combine(theta.cos(), b, theta.sin())?.normalized();
    Ok((theta, f))
}

/// A basis `(Ã, B̃)` of the same span with `rank Ã = maxrank` and
/// `‖B̃ − Ã‖_F = eps`.
pub fn nearby_basis(a: &SymmetricForm, b: &SymmetricForm, eps: f64) -> Result<(SymmetricForm, SymmetricForm)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    let (_, at) = max_rank_element(a, b)?;
    let complement = [a.normalized(), b.normalized()]
        .into_iter()
        .map(|f| {
            let c = linalg::frobenius_dot(f.matrix(), at.matrix());
            f.matrix() - at.matrix() * c
        })
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .expect("two candidates");
    let e = &complement / complement.norm();
    let bt = SymmetricForm::new(at.matrix() + e * eps)?;
    Ok((at, bt))
}
