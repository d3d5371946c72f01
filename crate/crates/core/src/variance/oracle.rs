//! Independent route to σ(p)² for deg p ≤ 5.
//!
//! Take 3^d iid copies Z_n of the potential, n ∈ Λ_1^d, and the edge set E of
//! unordered pairs {n, m} differing in exactly one coordinate (the 3-cycle
//! torus in each direction, so every site has 2d neighbours). With the bulk
//! path counts for k ≤ 5 written out explicitly,
//!
//! ```text
//! W₁ = Σ Z_n
//! W₂ = Σ Z_n²
//! W₃ = Σ (Z_n³ + 6d Z_n)
//! W₄ = Σ (Z_n⁴ + 8d Z_n²) + Σ_E 4 Z_n Z_m
//! W₅ = Σ (Z_n⁵ + 10d Z_n³ + (60d² − 30d) Z_n) + Σ_E 5 (Z_n² Z_m + Z_n Z_m²)
//! ```
//!
//! (each scaled by 3^{−d/2}) reproduce the limiting covariances, so
//! σ(p)² = Var(Σ a_k W_k). The variance is expanded monomial by monomial.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, MultiIndex};
use crate::moments::{int, MomentModel, Rational};

use super::Poly;

type Sparse = BTreeMap<MultiIndex, Rational>;

fn add_term(acc: &mut Sparse, mono: MultiIndex, c: Rational) {
    let slot = acc.entry(mono).or_insert_with(Rational::zero);
    *slot += c;
}

fn cube_points(d: usize) -> Vec<LatticePoint> {
    let mut out: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-1..=1).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|c| LatticePoint::new(c).expect("d ≥ 1"))
        .collect()
}

fn edges(points: &[LatticePoint]) -> Vec<(LatticePoint, LatticePoint)> {
    let mut out = Vec::new();
    for (i, n) in points.iter().enumerate() {
        for m in &points[i + 1..] {
            let differing = n
                .coords()
                .iter()
                .zip(m.coords())
                .filter(|(a, b)| a != b)
                .count();
            if differing == 1 {
                out.push((n.clone(), m.clone()));
            }
        }
    }
    out
}

/// Σ a_k W̃_k as a sparse polynomial in the Z_n, without the 3^{−d/2} factor.
fn combined_statistic(p: &Poly, d: usize) -> Sparse {
    let points = cube_points(d);
    let es = edges(&points);
    let dd = d as i64;
    let mono = |terms: &[(&LatticePoint, u32)]| {
        MultiIndex::from_entries(d, terms.iter().map(|(p, e)| ((*p).clone(), *e)))
            .expect("points have dimension d")
    };
    let mut acc = Sparse::new();
    // single-site parts: W̃_k ∋ Σ_n Σ_e c_{k,e} Z_n^e
    let site_terms: [&[(u32, i64)]; 5] = [
        &[(1, 1)],
        &[(2, 1)],
        &[(3, 1), (1, 6 * dd)],
        &[(4, 1), (2, 8 * dd)],
        &[(5, 1), (3, 10 * dd), (1, 60 * dd * dd - 30 * dd)],
    ];
    for (k, terms) in site_terms.iter().enumerate() {
        let a = p.coeff(k + 1);
        if a.is_zero() {
            continue;
        }
        for n in &points {
            for &(e, c) in *terms {
                add_term(&mut acc, mono(&[(n, e)]), &a * int(c));
            }
        }
    }
    let a4 = p.coeff(4);
    let a5 = p.coeff(5);
    for (n, m) in &es {
        if !a4.is_zero() {
            add_term(&mut acc, mono(&[(n, 1), (m, 1)]), &a4 * int(4));
        }
        if !a5.is_zero() {
            add_term(&mut acc, mono(&[(n, 2), (m, 1)]), &a5 * int(5));
            add_term(&mut acc, mono(&[(n, 1), (m, 2)]), &a5 * int(5));
        }
    }
    acc.retain(|_, c| !c.is_zero());
    acc
}

/// σ(p)² via Var(Σ a_k W_k). Must agree exactly with
/// [`super::sigma_squared`].
pub fn sigma_squared_via_w(p: &Poly, model: &MomentModel, d: usize) -> Result<Rational> {
    let m = p.require_nonconstant()?;
    if m > 5 {
        return Err(Error::InvalidArgument(format!(
            "the W construction covers degree ≤ 5, got degree {m}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    model.require_order(2 * m)?;
    let terms: Vec<(MultiIndex, Rational)> = combined_statistic(p, d).into_iter().collect();
    let expectations = terms
        .iter()
        .map(|(t, _)| model.monomial_expectation(t))
        .collect::<Result<Vec<_>>>()?;
    let mut var = Rational::zero();
    for (i, (t, ct)) in terms.iter().enumerate() {
        for (j, (u, cu)) in terms.iter().enumerate().skip(i) {
            if !t.supports_intersect(u) {
                continue;
            }
            let cov = model.monomial_expectation(&t.add(u))? - &expectations[i] * &expectations[j];
            if cov.is_zero() {
                continue;
            }
            let w = if i == j { int(1) } else { int(2) };
            var += w * ct * cu * cov;
        }
    }
    Ok(var / int(3i64.pow(d as u32)))
}
