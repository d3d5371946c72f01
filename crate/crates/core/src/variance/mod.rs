//! Exact limiting variances of normalized traces and the zero-variance
//! classification.
//!
//! For p(x) = Σ a_k x^k the centered statistic
//! (Tr p(H_L) − E Tr p(H_L)) / (2L+1)^{d/2} has limiting variance
//!
//! ```text
//! σ(p)² = Σ_{k,ℓ} a_k a_ℓ C(k, ℓ),
//! C(k, ℓ) = Σ_{β,γ canonical} p^k(β) p^ℓ(γ) Σ_{j ∈ Z^d} Cov(X^β, X^{γ^j}).
//! ```
//!
//! Everything is computed in exact rational arithmetic so a zero variance is
//! detected exactly.

mod oracle;
mod poly;

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

pub use oracle::sigma_squared_via_w;
pub use poly::Poly;

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, MultiIndex};
use crate::moments::{int, rational, MomentModel, Rational, SupportClass};
use crate::walks::path_counts;

/// Σ_j Cov(X^β, X^{γ^j}) over the finitely many offsets j where supp β and
/// supp γ^j meet; every other term vanishes by independence.
pub fn offset_cov_sum(
    model: &MomentModel,
    beta: &MultiIndex,
    gamma: &MultiIndex,
) -> Result<Rational> {
    if beta.dim() != gamma.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            beta.dim(),
            gamma.dim()
        )));
    }
    let offsets: BTreeSet<LatticePoint> = beta
        .support()
        .flat_map(|b| gamma.support().map(move |g| b - g))
        .collect();
    let mut acc = Rational::zero();
    for j in &offsets {
        acc += model.monomial_covariance(beta, gamma, j)?;
    }
    Ok(acc)
}

/// C(k, ℓ): limit of Cov of the normalized centered traces of H_L^k and H_L^ℓ.
pub fn limiting_covariance(
    k: usize,
    l: usize,
    d: usize,
    model: &MomentModel,
    budget: Budget,
) -> Result<Rational> {
    model.require_order(k + l)?;
    let tk = path_counts(k, d, budget)?;
    let tl = path_counts(l, d, budget)?;
    let mut acc = Rational::zero();
    for (beta, pb) in tk.iter() {
        for (gamma, pg) in tl.iter() {
            let s = offset_cov_sum(model, beta, gamma)?;
            if !s.is_zero() {
                acc += s * Rational::from_integer((pb * pg).into());
            }
        }
    }
    Ok(acc)
}

/// The symmetric matrix [C(k, ℓ)] for k, ℓ = 1..=m.
pub fn covariance_matrix(
    m: usize,
    d: usize,
    model: &MomentModel,
    budget: Budget,
) -> Result<Vec<Vec<Rational>>> {
    let mut c = vec![vec![Rational::zero(); m]; m];
    for k in 1..=m {
        for l in k..=m {
            let v = limiting_covariance(k, l, d, model, budget)?;
            c[k - 1][l - 1] = v.clone();
            c[l - 1][k - 1] = v;
        }
    }
    Ok(c)
}

/// σ(p)² for non-constant p. Does not depend on the constant term.
pub fn sigma_squared(p: &Poly, d: usize, model: &MomentModel, budget: Budget) -> Result<Rational> {
    let m = p.require_nonconstant()?;
    model.require_order(2 * m)?;
    let mut acc = Rational::zero();
    for k in 1..=m {
        let ak = p.coeff(k);
        if ak.is_zero() {
            continue;
        }
        for l in k..=m {
            let al = p.coeff(l);
            if al.is_zero() {
                continue;
            }
            let c = limiting_covariance(k, l, d, model, budget)?;
            let weight = if k == l { int(1) } else { int(2) };
            acc += weight * &ak * &al * c;
        }
    }
    if acc.is_negative() {
        return Err(Error::Integrity(format!(
            "negative limiting variance {acc} for p = {p}"
        )));
    }
    Ok(acc)
}

/// Polynomials spanning (together with constants) the zero-variance set.
///
/// Two-point support {a, b}: [q̄₂, q̄₃, q̄₅]; three-point {a, b, c}: [q̃₃];
/// larger support: empty.
pub fn degenerate_basis(model: &MomentModel, d: usize) -> Vec<Poly> {
    let dd = int(d as i64);
    match model.support_class() {
        SupportClass::TwoPoint(a, b) => {
            let sum = &a + &b;
            let q2 = Poly::new(vec![int(0), -sum.clone(), int(1)]);
            let q3 = Poly::new(vec![
                int(0),
                -(&a * &a + &a * &b + &b * &b + int(6) * &dd),
                int(0),
                int(1),
            ]);
            let pw = |x: &Rational, e: usize| num_traits::pow(x.clone(), e);
            let bracket = int(3) * (pw(&a, 4) + pw(&b, 4))
                + int(8) * (pw(&a, 3) * &b + pw(&a, 2) * pw(&b, 2) + &a * pw(&b, 3))
                + int(20) * &dd * (pw(&a, 2) + pw(&b, 2))
                + int(80) * &dd * &a * &b
                - int(120) * &dd * &dd
                + int(60) * &dd;
            let q5 = Poly::new(vec![
                int(0),
                bracket * rational(1, 2),
                int(0),
                int(0),
                -rational(5, 2) * sum,
                int(1),
            ]);
            vec![q2, q3, q5]
        }
        SupportClass::ThreePoint(a, b, c) => {
            vec![Poly::new(vec![
                int(0),
                &a * &b + &a * &c + &b * &c - int(6) * dd,
                -(&a + &b + &c),
                int(1),
            ])]
        }
        SupportClass::Many => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Degenerate,
    Nondegenerate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifyOutcome {
    pub class: Classification,
    pub sigma2: Rational,
}

/// Degenerate iff σ(p)² = 0. The answer is cross-checked against exact
/// membership of p in span{1, degenerate_basis}; disagreement is an
/// integrity error.
pub fn classify(
    p: &Poly,
    model: &MomentModel,
    d: usize,
    budget: Budget,
) -> Result<ClassifyOutcome> {
    p.require_nonconstant()?;
    let sigma2 = sigma_squared(p, d, model, budget)?;
    let mut span = vec![Poly::constant(int(1))];
    span.extend(degenerate_basis(model, d));
    let in_span = in_span(p, &span);
    if in_span != sigma2.is_zero() {
        return Err(Error::Integrity(format!(
            "σ² = {sigma2} but span membership says {in_span} for p = {p} under {model}"
        )));
    }
    let class = if in_span {
        Classification::Degenerate
    } else {
        Classification::Nondegenerate
    };
    Ok(ClassifyOutcome { class, sigma2 })
}

/// Whether p is a linear combination of `basis`.
pub fn in_span(p: &Poly, basis: &[Poly]) -> bool {
    let n = basis
        .iter()
        .chain(std::iter::once(p))
        .filter_map(Poly::degree)
        .max()
        .map_or(0, |m| m + 1);
    let rows = |ps: &[&Poly]| -> Vec<Vec<Rational>> {
        ps.iter()
            .map(|q| (0..n).map(|k| q.coeff(k)).collect())
            .collect()
    };
    let base: Vec<&Poly> = basis.iter().collect();
    let mut with_p = base.clone();
    with_p.push(p);
    rank(rows(&base)) == rank(rows(&with_p))
}

/// Rank by exact Gaussian elimination.
pub fn rank(mut rows: Vec<Vec<Rational>>) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for col in 0..ncols {
        let Some(pivot) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, pivot);
        let inv = Rational::one() / &rows[r][col];
        let pivot_row: Vec<Rational> = rows[r].iter().map(|x| x * &inv).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
        rows[r] = pivot_row;
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const B: Budget = Budget::DEFAULT;

    fn mi(s: &str) -> MultiIndex {
        s.parse().unwrap()
    }

    fn model(s: &str) -> MomentModel {
        s.parse().unwrap()
    }

    fn models() -> Vec<MomentModel> {
        vec![
            model("uniform:1"),
            model("gaussian:1"),
            model("discrete:2@1/3,-1@2/3"),
            model("discrete:-1@1/4,0@1/2,1@1/4"),
            model("discrete:-2@1/4,-1@1/4,1@1/4,2@1/4"),
        ]
    }

    #[test]
    fn offset_cov_sum_examples() {
        for m in models() {
            let m2 = m.moment(2).unwrap().clone();
            assert_eq!(offset_cov_sum(&m, &mi("0:1"), &mi("0:1")).unwrap(), m2);
            assert_eq!(
                offset_cov_sum(&m, &mi("0:1"), &mi("0:3")).unwrap(),
                m.moment(4).unwrap().clone()
            );
        }
        // offsets −1, 0, 1 overlap; only j = 0 contributes m_2²
        let u = model("uniform:1");
        assert_eq!(
            offset_cov_sum(&u, &mi("0:1;1:1"), &mi("0:1;1:1")).unwrap(),
            rational(1, 9)
        );
    }

    #[test]
    fn limiting_covariance_examples() {
        for m in models() {
            for d in 1..=3 {
                assert_eq!(
                    limiting_covariance(1, 1, d, &m, B).unwrap(),
                    *m.moment(2).unwrap()
                );
                assert_eq!(
                    limiting_covariance(1, 2, d, &m, B).unwrap(),
                    *m.moment(3).unwrap()
                );
            }
        }
        let u = model("uniform:1");
        assert_eq!(
            limiting_covariance(2, 2, 1, &u, B).unwrap(),
            rational(4, 45)
        );
    }

    #[test]
    fn sigma_squared_examples() {
        for m in models() {
            assert_eq!(
                sigma_squared(&Poly::monomial(1), 2, &m, B).unwrap(),
                *m.moment(2).unwrap()
            );
        }
        let two = MomentModel::two_point(int(2), int(-1)).unwrap();
        let q2 = Poly::from_ints(&[0, -1, 1]);
        assert!(sigma_squared(&q2, 1, &two, B).unwrap().is_zero());
        let u = model("uniform:1");
        assert_eq!(
            sigma_squared(&Poly::monomial(3), 1, &u, B).unwrap(),
            rational(509, 35)
        );
        assert!(sigma_squared(&Poly::constant(int(3)), 1, &u, B).is_err());
        let shallow = model("uniform:1").with_max_order(4);
        assert!(matches!(
            sigma_squared(&Poly::monomial(3), 1, &shallow, B),
            Err(Error::OutOfRange { requested: 6, .. })
        ));
    }

    #[test]
    fn sigma_squared_cubic_matches_moment_formula() {
        // x³: T₃ = Z³ + 6dZ, so σ² = Var(Z³) + 12d m₄ + 36d² m₂.
        for m in models() {
            for d in 1..=3i64 {
                let mo = |j| m.moment(j).unwrap().clone();
                let expect = mo(6) - mo(3) * mo(3) + int(12 * d) * mo(4) + int(36 * d * d) * mo(2);
                assert_eq!(
                    sigma_squared(&Poly::monomial(3), d as usize, &m, B).unwrap(),
                    expect
                );
            }
        }
    }

    #[test]
    fn degenerate_basis_examples() {
        let three = model("discrete:-1@1/4,0@1/2,1@1/4");
        assert_eq!(
            degenerate_basis(&three, 1),
            vec![Poly::from_ints(&[0, -7, 0, 1])]
        );
        let two = MomentModel::two_point(int(2), int(-1)).unwrap();
        for d in 1..=3 {
            assert_eq!(degenerate_basis(&two, d)[0], Poly::from_ints(&[0, -1, 1]));
        }
        // {±1}, d = 1: Z² ≡ 1 collapses W₅ to (60d² − 10d + 1)·W₁ = 51·W₁
        let pm = model("discrete:1@1/2,-1@1/2");
        assert_eq!(
            degenerate_basis(&pm, 1)[2],
            Poly::from_ints(&[0, -51, 0, 0, 0, 1])
        );
        assert!(degenerate_basis(&model("gaussian:1"), 2).is_empty());
    }

    #[test]
    fn zero_certificates() {
        for d in 1..=3 {
            for m in [
                model("discrete:1@1/2,-1@1/2"),
                model("discrete:2@1/3,-1@2/3"),
                model("discrete:-3/2@2/5,1@3/5"),
                model("discrete:-1@1/4,0@1/2,1@1/4"),
                model("discrete:-2@1/4,1/2@1/2,1@1/4"),
            ] {
                for q in degenerate_basis(&m, d) {
                    assert!(
                        sigma_squared(&q, d, &m, B).unwrap().is_zero(),
                        "{q} {m} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn quintic_with_100_dab_coefficient_is_not_degenerate() {
        // Bracket with 100·d·ab instead of 80·d·ab: for {±1}, d = 1 that is
        // x⁵ − 61x, which keeps a positive variance on both routes.
        let pm = model("discrete:1@1/2,-1@1/2");
        let p = Poly::from_ints(&[0, -61, 0, 0, 0, 1]);
        let s = sigma_squared(&p, 1, &pm, B).unwrap();
        assert!(s > int(0));
        assert_eq!(sigma_squared_via_w(&p, &pm, 1).unwrap(), s);
        assert_eq!(
            classify(&p, &pm, 1, B).unwrap().class,
            Classification::Nondegenerate
        );
    }

    #[test]
    fn classify_examples() {
        let g = model("gaussian:1");
        let out = classify(&Poly::monomial(1), &g, 1, B).unwrap();
        assert_eq!(out.class, Classification::Nondegenerate);
        assert_eq!(out.sigma2, int(1));

        let pm = model("discrete:1@1/2,-1@1/2");
        let basis = degenerate_basis(&pm, 2);
        let p = &(&basis[1] + &basis[0].scale(&int(5))) + &Poly::constant(int(7));
        assert_eq!(
            classify(&p, &pm, 2, B).unwrap().class,
            Classification::Degenerate
        );

        let out = classify(&Poly::monomial(4), &pm, 1, B).unwrap();
        assert_eq!(out.class, Classification::Nondegenerate);
        assert!(out.sigma2 > int(0));
        assert!(classify(&Poly::constant(int(1)), &pm, 1, B).is_err());
    }

    #[test]
    fn positivity_spot_checks() {
        let two = model("discrete:2@1/3,-1@2/3");
        for m in [1, 4, 6, 7] {
            for d in 1..=2 {
                assert!(sigma_squared(&Poly::monomial(m), d, &two, B).unwrap() > int(0));
            }
        }
        for mdl in [model("gaussian:1"), model("uniform:2")] {
            for m in 1..=7 {
                assert!(sigma_squared(&Poly::monomial(m), 1, &mdl, B).unwrap() > int(0));
            }
        }
    }

    #[test]
    fn rank_and_span() {
        assert_eq!(rank(vec![vec![int(1), int(2)], vec![int(2), int(4)]]), 1);
        assert_eq!(rank(vec![vec![int(0), int(1)], vec![int(1), int(0)]]), 2);
        let basis = vec![Poly::constant(int(1)), Poly::from_ints(&[0, -1, 1])];
        assert!(in_span(&Poly::from_ints(&[4, -3, 3]), &basis));
        assert!(!in_span(&Poly::monomial(2), &basis));
    }

    fn arb_poly(max_deg: usize) -> impl Strategy<Value = Poly> {
        prop::collection::vec(-4i64..5, 2..=max_deg + 1).prop_map(|c| Poly::from_ints(&c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scaling_shift_and_quadratic_form(p in arb_poly(5), c in -5i64..6, s in -3i64..4, mi in 0usize..5, d in 1usize..3) {
            prop_assume!(!p.is_constant());
            let m = &models()[mi];
            let base = sigma_squared(&p, d, m, B).unwrap();
            prop_assert!(base >= int(0));
            let shifted = &p + &Poly::constant(int(c));
            prop_assert_eq!(sigma_squared(&shifted, d, m, B).unwrap(), base.clone());
            if s != 0 {
                let scaled = p.scale(&int(s));
                prop_assert_eq!(sigma_squared(&scaled, d, m, B).unwrap(), int(s * s) * base.clone());
            }
            let deg = p.degree().unwrap();
            let cm = covariance_matrix(deg, d, m, B).unwrap();
            let mut q = Rational::zero();
            for k in 1..=deg {
                for l in 1..=deg {
                    prop_assert_eq!(&cm[k - 1][l - 1], &cm[l - 1][k - 1]);
                    q += p.coeff(k) * p.coeff(l) * &cm[k - 1][l - 1];
                }
            }
            prop_assert_eq!(q, base);
        }
    }
}
