//! Seeded generators for test instances with known structure.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::forms::{self, canonical_j, SymmetricForm, SymplecticStructure};
use crate::linalg;
use crate::rng::{gaussian_matrix, gaussian_symmetric, gaussian_vector};

/// `I + s·G/√n`, redrawn until well conditioned.
pub fn near_identity<R: Rng>(rng: &mut R, n: usize, s: f64) -> DMatrix<f64> {
    loop {
        let m = DMatrix::identity(n, n) + gaussian_matrix(rng, n, n) * (s / (n as f64).sqrt());
        let sv = linalg::singular_values(&m);
        if sv[n - 1] > 0.2 * sv[0] {
            return m;
        }
    }
}

fn traceless<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut m = gaussian_symmetric(rng, n);
    let t = m.trace() / n as f64;
    for i in 0..n {
        m[(i, i)] -= t;
    }
    m
}

fn form(m: DMatrix<f64>) -> SymmetricForm {
    SymmetricForm::new(m).expect("square by construction")
}

fn congruent(m: &DMatrix<f64>, t: &DMatrix<f64>) -> SymmetricForm {
    form(t.transpose() * m * t)
}

/// Independent traceless pair moved by a random congruence. Non-dissipative
/// because congruence preserves the existence of a trace certificate.
pub fn traceless_pair<R: Rng>(rng: &mut R, n: usize) -> (SymmetricForm, SymmetricForm) {
    let t = near_identity(rng, n, 0.5);
    (congruent(&traceless(rng, n), &t), congruent(&traceless(rng, n), &t))
}

/// Pair whose span contains a nonzero PSD form of random rank.
pub fn dissipative_pair<R: Rng>(rng: &mut R, n: usize) -> (SymmetricForm, SymmetricForm) {
    let k = rng.random_range(1..=n);
    let l = gaussian_matrix(rng, n, k);
    let p = &l * l.transpose() / k as f64;
    let r = gaussian_symmetric(rng, n);
    let mix = loop {
        let m = gaussian_matrix(rng, 2, 2);
        if m.determinant().abs() > 0.2 {
            break m;
        }
    };
    let a = &p * mix[(0, 0)] + &r * mix[(0, 1)];
    let b = &p * mix[(1, 0)] + &r * mix[(1, 1)];
    let t = near_identity(rng, n, 0.5);
    (congruent(&a, &t), congruent(&b, &t))
}

/// `J = M·J₀·Mᵗ` with `M` a random perturbation of the identity.
pub fn random_structure<R: Rng>(rng: &mut R, d: usize) -> SymplecticStructure {
    let m = near_identity(rng, 2 * d, 0.3);
    let j = &m * canonical_j(d) * m.transpose();
    SymplecticStructure::from_structure_matrix(j).expect("congruent to canonical")
}

/// A random element of `Sp(2d)`, product of two symmetric shears.
pub fn random_symplectic<R: Rng>(rng: &mut R, d: usize, s: f64) -> DMatrix<f64> {
    let shear = |rng: &mut R| gaussian_symmetric(rng, d) * (s / (d as f64).sqrt());
    let (s1, s2) = (shear(rng), shear(rng));
    let mut upper = DMatrix::identity(2 * d, 2 * d);
    upper.view_mut((0, d), (d, d)).copy_from(&s1);
    let mut lower = DMatrix::identity(2 * d, 2 * d);
    lower.view_mut((d, 0), (d, d)).copy_from(&s2);
    upper * lower
}

fn rank_two_traceless<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let u = gaussian_vector(rng, n);
    let w = gaussian_vector(rng, n);
    let v = &w - &u * (u.dot(&w) / u.norm_squared());
    &u * v.transpose() + &v * u.transpose()
}

/// Full-rank traceless pair in dimension `n`: minrank ≥ n − 1, maxrank n.
pub fn branch_i_pair<R: Rng>(rng: &mut R, n: usize) -> (SymmetricForm, SymmetricForm) {
    traceless_pair(rng, n)
}

/// Traceless full-rank `A` with a rank-two traceless `B`, after congruence:
/// minrank 2, maxrank `n`, trivial joint radical.
pub fn branch_ii_trivial<R: Rng>(rng: &mut R, n: usize) -> (SymmetricForm, SymmetricForm) {
    let t = near_identity(rng, n, 0.5);
    (
        congruent(&traceless(rng, n), &t),
        congruent(&rank_two_traceless(rng, n), &t),
    )
}

/// Branch-(ii) pair on `ℝ^{2d}` whose joint radical is the symplectic plane
/// spanned by `e_d, f_d`, moved by a random symplectic congruence.
pub fn branch_ii_symplectic<R: Rng>(rng: &mut R, d: usize) -> (SymmetricForm, SymmetricForm) {
    assert!(d >= 2);
    let n = 2 * d;
    let keep: Vec<usize> = (0..n).filter(|&i| i != d - 1 && i != n - 1).collect();
    let embed = |m: &DMatrix<f64>| {
        let mut full = DMatrix::zeros(n, n);
        for (r, &i) in keep.iter().enumerate() {
            for (c, &j) in keep.iter().enumerate() {
                full[(i, j)] = m[(r, c)];
            }
        }
        full
    };
    let t = near_identity(rng, n - 2, 0.5);
    let a = embed(&(t.transpose() * traceless(rng, n - 2) * &t));
    let b = embed(&(t.transpose() * rank_two_traceless(rng, n - 2) * &t));
    let s = random_symplectic(rng, d, 0.3);
    (congruent(&a, &s), congruent(&b, &s))
}

/// Surjective `T : ℝ^{2n} → ℝ^m` with `T·J·Tᵗ` non-degenerate.
pub fn surjective_map<R: Rng>(rng: &mut R, m: usize, n: usize) -> DMatrix<f64> {
    assert!(m <= 2 * n && m.is_multiple_of(2));
    loop {
        let t = gaussian_matrix(rng, m, 2 * n);
        let jz = &t * canonical_j(n) * t.transpose();
        let sv = linalg::singular_values(&jz);
        let st = linalg::singular_values(&t);
        if sv[m - 1] > 1e-3 * sv[0] && st[m - 1] > 1e-3 * st[0] {
            return t;
        }
    }
}

pub fn random_form<R: Rng>(rng: &mut R, n: usize) -> SymmetricForm {
    form(gaussian_symmetric(rng, n))
}

pub fn random_scalar<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Pulls a pair back along a linear map, `Tᵗ·F·T`.
pub fn pullback(f: &SymmetricForm, t: &DMatrix<f64>) -> SymmetricForm {
    forms::congruence(f, t).expect("compatible shapes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::rank_profile;
    use crate::rng::stream;
    use crate::witness::{radical_status, RadicalStatus};

    #[test]
    fn symplectic_shear_preserves_j() {
        let mut rng = stream(1, 0);
        let s = random_symplectic(&mut rng, 3, 0.5);
        let j = canonical_j(3);
        assert!((s.transpose() * &j * &s - j).norm() < 1e-12);
    }

    #[test]
    fn branch_ii_symplectic_structure() {
        let mut rng = stream(2, 0);
        let (a, b) = branch_ii_symplectic(&mut rng, 6);
        let p = rank_profile(&a, &b).unwrap();
        assert_eq!((p.minrank, p.maxrank), (2, 10));
        let (dim, status) = radical_status(&a, &b, &SymplecticStructure::canonical(6)).unwrap();
        assert_eq!((dim, status), (2, RadicalStatus::Symplectic));
    }

    #[test]
    fn branch_ii_trivial_ranks() {
        let mut rng = stream(3, 0);
        let (a, b) = branch_ii_trivial(&mut rng, 10);
        let p = rank_profile(&a, &b).unwrap();
        assert_eq!((p.minrank, p.maxrank), (2, 10));
    }
}
