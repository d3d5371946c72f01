//! The single-site potential law dρ: exact rational moments, monomial
//! expectations and covariances, and seeded sampling.
//!
//! CLI grammar: `discrete:v1@w1,v2@w2,...` (values and weights as integers or
//! `p/q`), `uniform:w` (uniform on [−w, w]) and `gaussian:v` (centered normal
//! with variance v). Every model has mean exactly zero.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, MultiIndex};

pub type Rational = BigRational;

/// Moments 0..=DEFAULT_MAX_ORDER are precomputed unless a model asks for more.
pub const DEFAULT_MAX_ORDER: usize = 24;

pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `p/q` or an integer.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = |e: &dyn fmt::Display| Error::Parse(format!("bad rational {s:?}: {e}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|e| bad(&e))?;
            let q: BigInt = q.trim().parse().map_err(|e| bad(&e))?;
            if q.is_zero() {
                return Err(bad(&"zero denominator"));
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|e| bad(&e))?)),
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Distribution {
    /// Atoms (value, weight), distinct values sorted ascending.
    Discrete(Vec<(Rational, Rational)>),
    UniformSymmetric {
        half_width: Rational,
    },
    Gaussian {
        variance: Rational,
    },
}

/// Cardinality class of supp(dρ).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupportClass {
    TwoPoint(Rational, Rational),
    ThreePoint(Rational, Rational, Rational),
    Many,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentModel {
    dist: Distribution,
    moments: Vec<Rational>,
}

impl MomentModel {
    /// Finite mean-zero law. Repeated values are merged; weights must be
    /// positive and sum to one, and at least two distinct values are needed.
    pub fn discrete(atoms: Vec<(Rational, Rational)>) -> Result<Self> {
        let mut merged: Vec<(Rational, Rational)> = Vec::new();
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        for (v, w) in sorted {
            if !w.is_positive() {
                return Err(Error::InvalidArgument(format!(
                    "atom {v} has non-positive weight {w}"
                )));
            }
            match merged.last_mut() {
                Some((u, acc)) if *u == v => *acc += w,
                _ => merged.push((v, w)),
            }
        }
        let total: Rational = merged.iter().map(|(_, w)| w.clone()).sum();
        if !total.is_one() {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let mean: Rational = merged.iter().map(|(v, w)| v * w).sum();
        if !mean.is_zero() {
            return Err(Error::InvalidArgument(format!(
                "the potential must have mean zero, got {mean}"
            )));
        }
        if merged.len() < 2 {
            return Err(Error::InvalidArgument(
                "a deterministic potential is not supported; give at least two distinct values"
                    .into(),
            ));
        }
        Self::build(Distribution::Discrete(merged), DEFAULT_MAX_ORDER)
    }

    /// Mean-zero two-point law on {a, b}, a < 0 < b.
    pub fn two_point(a: Rational, b: Rational) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidArgument(
                "two-point values must differ".into(),
            ));
        }
        let span = &b - &a;
        Self::discrete(vec![(a.clone(), &b / &span), (b, -a / span)])
    }

    pub fn uniform(half_width: Rational) -> Result<Self> {
        if !half_width.is_positive() {
            return Err(Error::InvalidArgument("half-width must be positive".into()));
        }
        Self::build(
            Distribution::UniformSymmetric { half_width },
            DEFAULT_MAX_ORDER,
        )
    }

    pub fn gaussian(variance: Rational) -> Result<Self> {
        if !variance.is_positive() {
            return Err(Error::InvalidArgument("variance must be positive".into()));
        }
        Self::build(Distribution::Gaussian { variance }, DEFAULT_MAX_ORDER)
    }

    /// Same law carrying moments up to order `max_order`.
    pub fn with_max_order(self, max_order: usize) -> Self {
        Self::build(self.dist, max_order).expect("already validated")
    }

    fn build(dist: Distribution, max_order: usize) -> Result<Self> {
        let moments = (0..=max_order).map(|j| exact_moment(&dist, j)).collect();
        Ok(Self { dist, moments })
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn max_order(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn require_order(&self, order: usize) -> Result<()> {
        if order > self.max_order() {
            return Err(Error::OutOfRange {
                requested: order,
                available: self.max_order(),
            });
        }
        Ok(())
    }

    pub fn support_class(&self) -> SupportClass {
        match &self.dist {
            Distribution::Discrete(atoms) => match atoms.as_slice() {
                [(a, _), (b, _)] => SupportClass::TwoPoint(a.clone(), b.clone()),
                [(a, _), (b, _), (c, _)] => {
                    SupportClass::ThreePoint(a.clone(), b.clone(), c.clone())
                }
                _ => SupportClass::Many,
            },
            _ => SupportClass::Many,
        }
    }

    /// Symmetric under X → −X.
    pub fn is_symmetric(&self) -> bool {
        self.moments.iter().skip(1).step_by(2).all(Zero::is_zero)
    }

    /// m_j = E[X^j].
    pub fn moment(&self, j: usize) -> Result<&Rational> {
        self.moments.get(j).ok_or(Error::OutOfRange {
            requested: j,
            available: self.max_order(),
        })
    }

    /// E[X^β] = ∏_n m_{β_n}.
    pub fn monomial_expectation(&self, beta: &MultiIndex) -> Result<Rational> {
        let mut acc = Rational::one();
        for (_, e) in beta.entries() {
            let m = self.moment(*e as usize)?;
            if m.is_zero() {
                self.require_order(beta.max_exponent() as usize)?;
                return Ok(Rational::zero());
            }
            acc *= m;
        }
        Ok(acc)
    }

    /// Cov(X^β, X^{γ^j}); exactly zero when the supports are disjoint.
    pub fn monomial_covariance(
        &self,
        beta: &MultiIndex,
        gamma: &MultiIndex,
        j: &LatticePoint,
    ) -> Result<Rational> {
        let shifted = gamma.shift(j)?;
        if !beta.supports_intersect(&shifted) {
            self.require_order(beta.max_exponent().max(gamma.max_exponent()) as usize)?;
            return Ok(Rational::zero());
        }
        let joint = self.monomial_expectation(&beta.add(&shifted))?;
        Ok(joint - self.monomial_expectation(beta)? * self.monomial_expectation(&shifted)?)
    }

    /// `count` iid draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        match &self.dist {
            Distribution::Discrete(atoms) => {
                let mut cum = Vec::with_capacity(atoms.len());
                let mut acc = Rational::zero();
                for (_, w) in atoms {
                    acc += w;
                    cum.push(to_f64(&acc));
                }
                let values: Vec<f64> = atoms.iter().map(|(v, _)| to_f64(v)).collect();
                for _ in 0..count {
                    let u: f64 = rng.random();
                    let idx = cum.iter().position(|&c| u < c).unwrap_or(values.len() - 1);
                    out.push(values[idx]);
                }
            }
            Distribution::UniformSymmetric { half_width } => {
                let w = to_f64(half_width);
                for _ in 0..count {
                    out.push(rng.random_range(-w..=w));
                }
            }
            Distribution::Gaussian { variance } => {
                let normal = Normal::new(0.0, to_f64(variance).sqrt()).expect("positive variance");
                for _ in 0..count {
                    out.push(normal.sample(&mut rng));
                }
            }
        }
        out
    }
}

fn exact_moment(dist: &Distribution, j: usize) -> Rational {
    let pow = |x: &Rational, e: usize| -> Rational { num_traits::pow(x.clone(), e) };
    match dist {
        Distribution::Discrete(atoms) => atoms.iter().map(|(v, w)| pow(v, j) * w).sum(),
        Distribution::UniformSymmetric { half_width } => {
            if j % 2 == 1 {
                Rational::zero()
            } else {
                pow(half_width, j) / int(j as i64 + 1)
            }
        }
        Distribution::Gaussian { variance } => {
            if j % 2 == 1 {
                Rational::zero()
            } else {
                // (j−1)!! · v^{j/2}
                let double_factorial: BigInt =
                    (1..j).step_by(2).map(|i| BigInt::from(i as u64)).product();
                Rational::from_integer(double_factorial) * pow(variance, j / 2)
            }
        }
    }
}

impl FromStr for MomentModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected kind:parameters, got {s:?}")))?;
        match kind {
            "discrete" => {
                let atoms = rest
                    .split(',')
                    .map(|a| {
                        let (v, w) = a.split_once('@').ok_or_else(|| {
                            Error::Parse(format!("expected value@weight, got {a:?}"))
                        })?;
                        Ok((parse_rational(v)?, parse_rational(w)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                MomentModel::discrete(atoms)
            }
            "uniform" => MomentModel::uniform(parse_rational(rest)?),
            "gaussian" => MomentModel::gaussian(parse_rational(rest)?),
            other => Err(Error::Parse(format!(
                "unknown distribution kind {other:?} (expected discrete, uniform or gaussian)"
            ))),
        }
    }
}

impl fmt::Display for MomentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.dist {
            Distribution::Discrete(atoms) => {
                f.write_str("discrete:")?;
                for (i, (v, w)) in atoms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}@{w}")?;
                }
                Ok(())
            }
            Distribution::UniformSymmetric { half_width } => write!(f, "uniform:{half_width}"),
            Distribution::Gaussian { variance } => write!(f, "gaussian:{variance}"),
        }
    }
}
