//! Built-in counterexample corpus: small form pairs whose bracket, ranks and
//! radical are known in closed form, and on which the joint zero variety
//! carries no witness even though some hypotheses hold.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::Result;
use crate::forms::{self, SymmetricForm, SymplecticStructure};
use crate::pencil;
use crate::rng;
use crate::witness::{self, RadicalStatus};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub a: SymmetricForm,
    pub b: SymmetricForm,
    /// Third form; the Poisson bracket unless the example prescribes one.
    pub c: SymmetricForm,
    pub structure: SymplecticStructure,
    pub expect: Expectations,
}

#[derive(Debug, Clone, Default)]
pub struct Expectations {
    /// Closed-form bracket, compared up to a global sign.
    pub bracket: Option<SymmetricForm>,
    pub rank_a: Option<usize>,
    pub rank_b: Option<usize>,
    pub maxrank: Option<usize>,
    pub minrank: Option<usize>,
    pub radical_dim: Option<usize>,
    pub radical_status: Option<RadicalStatus>,
    /// Basis index spanning the radical when it is a line.
    pub radical_axis: Option<usize>,
    pub nondissipative: bool,
    pub independent_abc: bool,
    pub bracket_none_found: bool,
    pub transversal_none_found: bool,
    /// The variety is `{ξ = 0} ∪ {η = 0}` for the two coordinate halves.
    pub split_variety: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub fixture: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureReport {
    pub seeds: Vec<u64>,
    pub restarts: usize,
    pub checks: Vec<CheckLine>,
    pub passed: bool,
}

fn mono(n: usize, terms: &[(usize, usize, f64)]) -> SymmetricForm {
    SymmetricForm::from_monomials(n, terms)
}

fn bracket(a: &SymmetricForm, b: &SymmetricForm, s: &SymplecticStructure) -> SymmetricForm {
    forms::poisson_bracket(a, b, s).expect("dimensions agree by construction")
}

/// `Q_A = x1 y2 + x2 y1`, `Q_B = x1 y1 − x2 y2` on `ℝ⁴`.
pub fn split_rank4() -> Fixture {
    let s = SymplecticStructure::canonical(2);
    let a = mono(4, &[(0, 3, 1.0), (1, 2, 1.0)]);
    let b = mono(4, &[(0, 2, 1.0), (1, 3, -1.0)]);
    let c = bracket(&a, &b, &s);
    Fixture {
        name: "split-rank4".into(),
        description: "x1y2 + x2y1 and x1y1 - x2y2 on R^4: variety is two coordinate planes".into(),
        a,
        b,
        c,
        structure: s,
        expect: Expectations {
            bracket: Some(mono(4, &[(0, 3, 2.0), (1, 2, -2.0)])),
            rank_a: Some(4),
            rank_b: Some(4),
            maxrank: Some(4),
            minrank: Some(4),
            radical_dim: Some(0),
            radical_status: Some(RadicalStatus::Trivial),
            nondissipative: true,
            independent_abc: true,
            bracket_none_found: true,
            split_variety: true,
            ..Default::default()
        },
    }
}

/// `Q_A = x1² − (y1² + … + y_{d−1}² + x2² + … + x_{d−1}²)`, `Q_B = x1 x_d`.
pub fn isotropic_radical(d: usize) -> Fixture {
    assert!(d >= 2);
    let n = 2 * d;
    let s = SymplecticStructure::canonical(d);
    let mut terms = vec![(0, 0, 1.0)];
    terms.extend((0..d - 1).map(|i| (d + i, d + i, -1.0)));
    terms.extend((1..d - 1).map(|i| (i, i, -1.0)));
    let a = mono(n, &terms);
    let b = mono(n, &[(0, d - 1, 1.0)]);
    let c = bracket(&a, &b, &s);
    Fixture {
        name: format!("isotropic-radical-d{d}"),
        description: format!("radical is the isotropic line spanned by f_{d}; bracket vanishes on the variety"),
        a,
        b,
        c,
        structure: s,
        expect: Expectations {
            bracket: Some(mono(n, &[(d, d - 1, -2.0)])),
            rank_a: Some(2 * (d - 1)),
            rank_b: Some(2),
            maxrank: Some(2 * d - 1),
            minrank: Some(2),
            radical_dim: Some(1),
            radical_status: Some(RadicalStatus::Degenerate),
            radical_axis: Some(2 * d - 1),
            nondissipative: true,
            independent_abc: true,
            bracket_none_found: true,
            ..Default::default()
        },
    }
}

/// Same `Q_B` with all `y` in `Q_A`, and the prescribed `Q_C = y_j x_d`.
/// With `flat` the term `x_d²` joins `Q_A`, so the variety lies in `{x_d = 0}`.
pub fn prescribed_third_form(d: usize, j: usize, flat: bool) -> Fixture {
    assert!(d >= 2 && (1..=d).contains(&j));
    let n = 2 * d;
    let s = SymplecticStructure::canonical(d);
    let mut terms = vec![(0, 0, 1.0)];
    terms.extend((0..d).map(|i| (d + i, d + i, -1.0)));
    let last = if flat { d } else { d - 1 };
    terms.extend((1..last).map(|i| (i, i, -1.0)));
    let a = mono(n, &terms);
    let b = mono(n, &[(0, d - 1, 1.0)]);
    let c = mono(n, &[(d + j - 1, d - 1, 1.0)]);
    let tag = if flat { "flat-" } else { "" };
    Fixture {
        name: format!("prescribed-c-{tag}d{d}-j{j}"),
        description: format!(
            "trivial radical, Q_C = y{j} x{d} prescribed rather than bracketed; Q_C vanishes on the variety"
        ),
        a,
        b,
        c,
        structure: s,
        expect: Expectations {
            maxrank: Some(2 * d),
            minrank: Some(2),
            rank_b: Some(2),
            radical_dim: Some(0),
            radical_status: Some(RadicalStatus::Trivial),
            nondissipative: true,
            independent_abc: true,
            bracket_none_found: true,
            ..Default::default()
        },
    }
}

/// `Q_A = x² − y²`, `Q_B = x² − 2εxy − y²` on `ℝ²`.
pub fn signature_one(eps: f64) -> Fixture {
    let s = SymplecticStructure::canonical(1);
    let a = SymmetricForm::from_diagonal(&[1.0, -1.0]);
    let b = mono(2, &[(0, 0, 1.0), (0, 1, -2.0 * eps), (1, 1, -1.0)]);
    let c = bracket(&a, &b, &s);
    Fixture {
        name: format!("signature-one-eps{eps}"),
        description: "x^2 - y^2 and x^2 - 2 eps xy - y^2: only the origin is a joint zero".into(),
        a,
        b,
        c,
        structure: s,
        expect: Expectations {
            bracket: Some(SymmetricForm::identity(2).scale(4.0 * eps)),
            rank_a: Some(2),
            rank_b: Some(2),
            maxrank: Some(2),
            minrank: Some(2),
            radical_dim: Some(0),
            radical_status: Some(RadicalStatus::Trivial),
            nondissipative: true,
            independent_abc: true,
            bracket_none_found: true,
            transversal_none_found: true,
            ..Default::default()
        },
    }
}

/// `Q_A = x² − y²`, `Q_B = xy` on `ℝ²`.
pub fn hyperbolic_plane() -> Fixture {
    let s = SymplecticStructure::canonical(1);
    let a = SymmetricForm::from_diagonal(&[1.0, -1.0]);
    let b = mono(2, &[(0, 1, 1.0)]);
    let c = bracket(&a, &b, &s);
    Fixture {
        name: "hyperbolic-plane".into(),
        description: "x^2 - y^2 and xy: maxrank 2 and no transversal joint zero".into(),
        a,
        b,
        c,
        structure: s,
        expect: Expectations {
            bracket: Some(SymmetricForm::identity(2).scale(2.0)),
            rank_a: Some(2),
            rank_b: Some(2),
            maxrank: Some(2),
            minrank: Some(2),
            radical_dim: Some(0),
            radical_status: Some(RadicalStatus::Trivial),
            nondissipative: true,
            independent_abc: true,
            bracket_none_found: true,
            transversal_none_found: true,
            ..Default::default()
        },
    }
}

pub fn corpus() -> Vec<Fixture> {
    vec![
        split_rank4(),
        isotropic_radical(3),
        isotropic_radical(5),
        prescribed_third_form(3, 1, false),
        prescribed_third_form(3, 3, false),
        prescribed_third_form(3, 1, true),
        prescribed_third_form(3, 3, true),
        signature_one(0.5),
        hyperbolic_plane(),
    ]
}

struct Lines<'a> {
    fixture: &'a str,
    out: Vec<CheckLine>,
}

impl Lines<'_> {
    fn push(&mut self, check: &str, passed: bool, detail: String) {
        self.out.push(CheckLine {
            fixture: self.fixture.to_string(),
            check: check.to_string(),
            passed,
            detail,
        });
    }

    fn expect_eq<T: PartialEq + std::fmt::Debug>(&mut self, check: &str, expected: Option<T>, got: T) {
        if let Some(e) = expected {
            let passed = e == got;
            self.push(check, passed, format!("expected {e:?}, got {got:?}"));
        }
    }
}

/// Runs every stated check of one fixture; witness searches use each seed.
pub fn run_fixture(f: &Fixture, seeds: &[u64], restarts: usize) -> Result<Vec<CheckLine>> {
    let mut lines = Lines {
        fixture: &f.name,
        out: Vec::new(),
    };
    let e = &f.expect;

    if let Some(stated) = &e.bracket {
        let c = bracket(&f.a, &f.b, &f.structure);
        let scale = stated.norm().max(1.0);
        let plus = (c.matrix() - stated.matrix()).norm() / scale;
        let minus = (c.matrix() + stated.matrix()).norm() / scale;
        let sign = if plus <= minus { "+" } else { "-" };
        lines.push(
            "bracket matches stated value up to sign",
            plus.min(minus) <= 1e-12,
            format!("relative deviation {:e} with sign {sign}", plus.min(minus)),
        );
        let via = forms::bracket_via_hamilton(&f.a, &f.b, &f.structure)?;
        let dev = (via.matrix() - c.matrix()).norm() / c.norm().max(1.0);
        lines.push(
            "bracket equals the Hamilton-map commutator form",
            dev <= 1e-12,
            format!("relative deviation {dev:e}"),
        );
    }

    lines.expect_eq("rank A", e.rank_a, f.a.rank());
    lines.expect_eq("rank B", e.rank_b, f.b.rank());
    let profile = pencil::rank_profile(&f.a, &f.b)?;
    lines.expect_eq("maxrank", e.maxrank, profile.maxrank);
    lines.expect_eq("minrank", e.minrank, profile.minrank);

    let report = witness::hypothesis_report_with(&f.a, &f.b, &f.c, &f.structure)?;
    lines.expect_eq("radical dimension", e.radical_dim, report.radical_dim);
    lines.expect_eq("radical status", e.radical_status, report.radical_status);
    if let Some(axis) = e.radical_axis {
        let radical = forms::joint_radical(&f.a, &f.b)?;
        let mut v = DVector::zeros(f.a.dim());
        v[axis] = 1.0;
        lines.push(
            "radical is the stated coordinate line",
            radical.dim() == 1 && radical.contains(&v, 1e-10),
            format!("radical dimension {}, axis index {axis}", radical.dim()),
        );
    }
    lines.expect_eq("non-dissipative", Some(e.nondissipative), report.nondissipative);
    lines.expect_eq("A, B, C independent", Some(e.independent_abc), report.independent_abc);

    if e.bracket_none_found {
        let found: Vec<u64> = seeds
            .iter()
            .copied()
            .filter(|&s| {
                witness::bracket_witness(&f.a, &f.b, &f.c, restarts, s)
                    .map(|o| o.is_found())
                    .unwrap_or(true)
            })
            .collect();
        lines.push(
            "no bracket witness",
            found.is_empty(),
            format!(
                "{} seeds x {restarts} restarts; witnesses for seeds {found:?}",
                seeds.len()
            ),
        );
    }
    if e.transversal_none_found {
        let found: Vec<u64> = seeds
            .iter()
            .copied()
            .filter(|&s| {
                witness::transversality_witness(&f.a, &f.b, restarts, s)
                    .map(|o| o.is_found())
                    .unwrap_or(true)
            })
            .collect();
        lines.push(
            "no transversal witness",
            found.is_empty(),
            format!(
                "{} seeds x {restarts} restarts; witnesses for seeds {found:?}",
                seeds.len()
            ),
        );
    }
    if e.split_variety {
        let half = f.a.dim() / 2;
        let mut r = rng::stream(seeds.first().copied().unwrap_or(0), 0x7370);
        let mut worst: f64 = 0.0;
        let mut projected = 0;
        for _ in 0..20 {
            if let Ok(jz) = witness::project_to_joint_zero(&f.a, &f.b, &rng::gaussian_vector(&mut r, f.a.dim())) {
                let p = &jz.point;
                let xi = p.rows(0, half).norm();
                let eta = p.rows(half, half).norm();
                worst = worst.max(xi.min(eta));
                projected += 1;
            }
        }
        lines.push(
            "projected points lie on a coordinate half",
            projected > 0 && worst <= 1e-6,
            format!("{projected} projections, largest distance {worst:e}"),
        );
    }
    Ok(lines.out)
}

pub fn run_all(seeds: &[u64], restarts: usize) -> Result<FixtureReport> {
    let mut checks = Vec::new();
    for f in corpus() {
        checks.extend(run_fixture(&f, seeds, restarts)?);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(FixtureReport {
        seeds: seeds.to_vec(),
        restarts,
        checks,
        passed,
    })
}
