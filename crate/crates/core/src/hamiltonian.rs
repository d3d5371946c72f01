//! Finite-volume Anderson Hamiltonians H_L on the cube Λ_L^d.
//!
//! (H_L u)_n = Σ_{m ∼ n, m ∈ Λ_L^d} u_m + X_n u_n for n ∈ Λ_L^d. Sampled
//! traces are floating point; expectations are exact rationals.

use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;
use rayon::prelude::*;

use crate::budget::{saturating_pow, Budget};
use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, MultiIndex};
use crate::moments::{int, to_f64, MomentModel, Rational};
use crate::variance::Poly;
use crate::walks::for_each_balanced;

/// The cube Λ_L^d = [−L, L]^d. Sites are numbered row-major with the first
/// coordinate most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxSpec {
    pub d: usize,
    pub radius: usize,
}

impl BoxSpec {
    pub fn new(d: usize, radius: usize) -> Result<Self> {
        if d == 0 || radius == 0 {
            return Err(Error::InvalidArgument(format!(
                "need d ≥ 1 and L ≥ 1, got d={d}, L={radius}"
            )));
        }
        Ok(Self { d, radius })
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn volume(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    fn volume_u128(&self) -> u128 {
        saturating_pow(self.side() as u128, self.d)
    }

    pub fn check(&self, budget: Budget) -> Result<()> {
        budget.check(
            &format!("box of radius {} in dimension {}", self.radius, self.d),
            self.volume_u128(),
        )
    }

    pub fn coords(&self, mut index: usize) -> Vec<i64> {
        let side = self.side();
        let mut c = vec![0i64; self.d];
        for v in (0..self.d).rev() {
            c[v] = (index % side) as i64 - self.radius as i64;
            index /= side;
        }
        c
    }

    /// Index of an in-box point; None outside Λ_L^d.
    pub fn index(&self, coords: &[i64]) -> Option<usize> {
        let r = self.radius as i64;
        let mut idx = 0usize;
        for &c in coords {
            if c < -r || c > r {
                return None;
            }
            idx = idx * self.side() + (c + r) as usize;
        }
        Some(idx)
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.volume()).map(|i| LatticePoint::new(self.coords(i)).expect("d ≥ 1"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledHamiltonian {
    pub bx: BoxSpec,
    /// X_n in site order.
    pub potential: Vec<f64>,
}

pub fn sample_hamiltonian(
    bx: BoxSpec,
    model: &MomentModel,
    seed: u64,
    budget: Budget,
) -> Result<SampledHamiltonian> {
    bx.check(budget)?;
    Ok(SampledHamiltonian {
        bx,
        potential: model.sample(seed, bx.volume()),
    })
}

/// Cells of the cube [−r, r]^d around a site, with neighbour links.
struct Window {
    d: usize,
    offsets: Vec<Vec<i64>>,
    // neighbours[c] lists the in-window neighbour cells of c
    neighbours: Vec<Vec<usize>>,
    center: usize,
}

impl Window {
    fn new(d: usize, r: usize) -> Self {
        let shape = BoxSpec { d, radius: r };
        let n = (2 * r + 1).pow(d as u32);
        let offsets: Vec<Vec<i64>> = (0..n).map(|i| shape.coords(i)).collect();
        let neighbours = offsets
            .iter()
            .map(|o| {
                let mut out = Vec::with_capacity(2 * d);
                for v in 0..d {
                    for delta in [-1i64, 1] {
                        let mut q = o.clone();
                        q[v] += delta;
                        if let Some(j) = shape.index(&q) {
                            out.push(j);
                        }
                    }
                }
                out
            })
            .collect();
        let center = shape.index(&vec![0; d]).expect("origin is inside");
        Self {
            d,
            offsets,
            neighbours,
            center,
        }
    }
}

/// Σ_k a_k Tr H_L^k (including a_0 · volume), evaluated site by site: the
/// diagonal entry (H_L^k)_{ii} only involves sites within distance k of i,
/// so k applications of H_L restricted to that window are exact.
pub fn trace_poly_numeric(h: &SampledHamiltonian, p: &Poly) -> Result<f64> {
    let m = p.require_nonconstant()?;
    let coeffs = p.coeffs_f64();
    let diag_sums = diagonal_power_sums(h, m);
    let mut total = coeffs[0] * h.bx.volume() as f64;
    for k in 1..=m {
        total += coeffs[k] * diag_sums[k - 1];
    }
    Ok(total)
}

/// Tr H_L^k for k = 1..=m.
pub fn trace_powers(h: &SampledHamiltonian, m: usize) -> Vec<f64> {
    diagonal_power_sums(h, m)
}

fn diagonal_power_sums(h: &SampledHamiltonian, m: usize) -> Vec<f64> {
    let bx = h.bx;
    let window = Window::new(bx.d, m);
    let per_site: Vec<Vec<f64>> = (0..bx.volume())
        .into_par_iter()
        .map_init(
            || {
                let n = window.offsets.len();
                (
                    vec![0.0; n],
                    vec![0.0; n],
                    vec![f64::NAN; n],
                    vec![0i64; window.d],
                )
            },
            |(cur, next, pot, scratch), site| {
                let base = bx.coords(site);
                for (c, o) in window.offsets.iter().enumerate() {
                    for v in 0..window.d {
                        scratch[v] = base[v] + o[v];
                    }
                    pot[c] = match bx.index(scratch) {
                        Some(i) => h.potential[i],
                        None => f64::NAN,
                    };
                }
                cur.iter_mut().for_each(|x| *x = 0.0);
                cur[window.center] = 1.0;
                let mut diag = Vec::with_capacity(m);
                for _ in 0..m {
                    for c in 0..cur.len() {
                        if pot[c].is_nan() {
                            next[c] = 0.0;
                            continue;
                        }
                        let mut acc = pot[c] * cur[c];
                        for &nb in &window.neighbours[c] {
                            acc += cur[nb];
                        }
                        next[c] = acc;
                    }
                    std::mem::swap(cur, next);
                    diag.push(cur[window.center]);
                }
                diag
            },
        )
        .collect();
    (0..m)
        .map(|k| per_site.iter().map(|d| d[k]).sum())
        .collect()
}

/// E[Tr H_L^k] = Σ_{balanced s} anchors(s) · E[X^{φ(s)}], where
/// anchors(s) = ∏_v max(0, (2L+1) − span_v(s)) counts the translates of the
/// walk that stay inside the box.
pub fn mean_trace_exact(
    k: usize,
    bx: BoxSpec,
    model: &MomentModel,
    budget: Budget,
) -> Result<Rational> {
    model.require_order(k)?;
    // (canonical φ or zero, per-axis spans) → number of strings
    let classes = for_each_balanced(
        k,
        bx.d,
        budget,
        HashMap::<(MultiIndex, Vec<i64>), u64>::new,
        |acc, w| {
            let phi = w.phi();
            let phi = if phi.is_zero() {
                phi
            } else {
                phi.canonicalize().expect("non-zero").0
            };
            let spans = (0..bx.d)
                .map(|v| {
                    let (lo, hi) = w.extent(v);
                    hi - lo
                })
                .collect();
            *acc.entry((phi, spans)).or_insert(0) += 1;
        },
        |mut a, b| {
            for (key, c) in b {
                *a.entry(key).or_insert(0) += c;
            }
            a
        },
    )?;
    let side = bx.side() as i64;
    let mut total = Rational::zero();
    for ((phi, spans), count) in classes {
        let anchors: i64 = spans.iter().map(|s| (side - s).max(0)).product();
        if anchors == 0 {
            continue;
        }
        total += model.monomial_expectation(&phi)? * int(anchors) * int(count as i64);
    }
    Ok(total)
}

/// E[Tr p(H_L)] = a_0·volume + Σ_k a_k E[Tr H_L^k].
pub fn mean_trace_poly(
    p: &Poly,
    bx: BoxSpec,
    model: &MomentModel,
    budget: Budget,
) -> Result<Rational> {
    let mut total = p.coeff(0) * int(bx.volume() as i64);
    for k in 1..=p.degree().unwrap_or(0) {
        let a = p.coeff(k);
        if !a.is_zero() {
            total += a * mean_trace_exact(k, bx, model, budget)?;
        }
    }
    Ok(total)
}

/// Tr H_L^k as a polynomial in the X_n, n ∈ Λ_L^d.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicTrace {
    pub k: usize,
    /// Coefficient of X^β for every non-constant monomial.
    pub terms: BTreeMap<MultiIndex, u64>,
    /// Potential-free part (pure hopping walks).
    pub constant: u64,
}

impl SymbolicTrace {
    pub fn coefficient(&self, beta: &MultiIndex) -> u64 {
        self.terms.get(beta).copied().unwrap_or(0)
    }

    /// E[Tr H_L^k] from the expansion.
    pub fn expectation(&self, model: &MomentModel) -> Result<Rational> {
        let mut total = int(self.constant as i64);
        for (beta, c) in &self.terms {
            total += model.monomial_expectation(beta)? * int(*c as i64);
        }
        Ok(total)
    }

    pub fn evaluate(&self, h: &SampledHamiltonian) -> f64 {
        let mut total = self.constant as f64;
        for (beta, c) in &self.terms {
            let mut term = *c as f64;
            for (n, e) in beta.entries() {
                let i = h.bx.index(n.coords()).expect("monomials live in the box");
                term *= h.potential[i].powi(*e as i32);
            }
            total += term;
        }
        total
    }
}

/// Expands every (balanced string, anchor) pair whose walk stays in the box.
pub fn symbolic_trace(k: usize, bx: BoxSpec, budget: Budget) -> Result<SymbolicTrace> {
    bx.check(budget)?;
    budget.check(
        &format!(
            "symbolic trace for k={k} on a box of volume {}",
            bx.volume()
        ),
        saturating_pow(2 * bx.d as u128 + 1, k).saturating_mul(bx.volume_u128()),
    )?;
    let anchors: Vec<Vec<i64>> = (0..bx.volume()).map(|i| bx.coords(i)).collect();
    let radius = bx.radius as i64;
    let (terms, constant) = for_each_balanced(
        k,
        bx.d,
        budget,
        || (BTreeMap::<MultiIndex, u64>::new(), 0u64),
        |acc, w| {
            let phi = w.phi();
            for a in &anchors {
                if !w.fits_in_box(a, radius) {
                    continue;
                }
                if phi.is_zero() {
                    acc.1 += 1;
                } else {
                    let i = LatticePoint::new(a.clone()).expect("d ≥ 1");
                    *acc.0
                        .entry(phi.shift(&i).expect("same dimension"))
                        .or_insert(0) += 1;
                }
            }
        },
        |mut a, b| {
            for (key, c) in b.0 {
                *a.0.entry(key).or_insert(0) += c;
            }
            (a.0, a.1 + b.1)
        },
    )?;
    Ok(SymbolicTrace { k, terms, constant })
}

/// Mean of Tr p(H_L) as f64, for centering sampled traces.
pub fn mean_trace_poly_f64(
    p: &Poly,
    bx: BoxSpec,
    model: &MomentModel,
    budget: Budget,
) -> Result<f64> {
    Ok(to_f64(&mean_trace_poly(p, bx, model, budget)?))
}
