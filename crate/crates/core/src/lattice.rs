//! Points of Z^d and finitely supported exponent maps over them.
//!
//! A [`MultiIndex`] β assigns a positive exponent to finitely many lattice
//! points and stands for the monomial X^β = ∏ X_n^{β_n}. Multi-indices that
//! differ by a translation are equivalent; [`MultiIndex::canonicalize`] picks
//! the representative whose lexicographically smallest support point is the
//! origin.
//!
//! Text grammar (used by the CLI and JSON output): `"p1:e1;p2:e2;..."` where
//! each point is `c1,c2,...,cd` and each exponent a positive integer, e.g.
//! `0,0:1;1,1:2`. The zero multi-index is written as the empty string.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use crate::error::{Error, Result};

/// A point of Z^d. Ordering is lexicographic, first coordinate most significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument(
                "lattice points need at least one coordinate".into(),
            ));
        }
        Ok(Self(coords))
    }

    pub fn origin(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        Self(vec![0; d])
    }

    /// The unit vector e_axis, with `axis` counted from 0.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut c = vec![0; d];
        c[axis] = 1;
        Self(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    /// ℓ∞ norm; a point lies in Λ_L^d iff this is at most L.
    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn in_box(&self, radius: i64) -> bool {
        self.sup_norm() <= radius
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::InvalidArgument(format!(
                "point {self} has dimension {} but {d} was expected",
                self.dim()
            )));
        }
        Ok(())
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|c| -c).collect())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for LatticePoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let coords = s
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::Parse(format!("bad coordinate {c:?} in {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        LatticePoint::new(coords)
    }
}

/// Finitely supported map Z^d → positive integers, stored as an association
/// list sorted by point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    dim: usize,
    entries: Vec<(LatticePoint, u32)>,
}

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        Self {
            dim: d,
            entries: Vec::new(),
        }
    }

    /// Builds a multi-index from (point, exponent) pairs. Repeated points add
    /// up and zero exponents are dropped.
    pub fn from_entries<I>(d: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (LatticePoint, u32)>,
    {
        let mut v: Vec<(LatticePoint, u32)> = Vec::new();
        for (p, e) in entries {
            p.check_dim(d)?;
            if e > 0 {
                v.push((p, e));
            }
        }
        Ok(Self::from_unsorted(d, v))
    }

    fn from_unsorted(d: usize, mut v: Vec<(LatticePoint, u32)>) -> Self {
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut entries: Vec<(LatticePoint, u32)> = Vec::with_capacity(v.len());
        for (p, e) in v {
            match entries.last_mut() {
                Some((q, f)) if *q == p => *f += e,
                _ => entries.push((p, e)),
            }
        }
        Self { dim: d, entries }
    }

    /// Multi-index counting how often each point occurs in `points`.
    pub fn from_points(d: usize, points: impl IntoIterator<Item = LatticePoint>) -> Self {
        Self::from_unsorted(d, points.into_iter().map(|p| (p, 1)).collect())
    }

    /// m·δ^i: exponent `m` at `i`, zero elsewhere.
    pub fn delta(d: usize, i: LatticePoint, m: u32) -> Result<Self> {
        i.check_dim(d)?;
        if m == 0 {
            return Err(Error::InvalidArgument(
                "delta exponent must be positive".into(),
            ));
        }
        Ok(Self {
            dim: d,
            entries: vec![(i, m)],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(LatticePoint, u32)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = &LatticePoint> {
        self.entries.iter().map(|(p, _)| p)
    }

    pub fn get(&self, n: &LatticePoint) -> u32 {
        self.entries
            .binary_search_by(|(p, _)| p.cmp(n))
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Σ_n β_n.
    pub fn total(&self) -> u32 {
        self.entries.iter().map(|(_, e)| e).sum()
    }

    pub fn max_exponent(&self) -> u32 {
        self.entries.iter().map(|(_, e)| *e).max().unwrap_or(0)
    }

    /// Lexicographically smallest point of the support.
    pub fn lex_min(&self) -> Option<&LatticePoint> {
        self.entries.first().map(|(p, _)| p)
    }

    /// β^i, i.e. γ with γ_n = β_{n−i}.
    pub fn shift(&self, i: &LatticePoint) -> Result<Self> {
        i.check_dim(self.dim)?;
        Ok(self.shifted(i))
    }

    // Translation preserves lexicographic order, so no re-sort is needed.
    pub(crate) fn shifted(&self, i: &LatticePoint) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|(p, e)| (p + i, *e)).collect(),
        }
    }

    /// Returns (β*, i) with β* = β^i and lex-min of supp β* at the origin.
    pub fn canonicalize(&self) -> Result<(Self, LatticePoint)> {
        let first = self.lex_min().ok_or_else(|| {
            Error::InvalidArgument("the zero multi-index has no canonical representative".into())
        })?;
        let i = -first;
        Ok((self.shifted(&i), i))
    }

    pub fn is_canonical(&self) -> bool {
        self.lex_min()
            .is_some_and(|p| p.coords().iter().all(|&c| c == 0))
    }

    /// Pointwise sum β + γ.
    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        loop {
            match (a.peek(), b.peek()) {
                (Some((p, e)), Some((q, f))) => match p.cmp(q) {
                    std::cmp::Ordering::Less => {
                        out.push((p.clone(), *e));
                        a.next();
                    }
                    std::cmp::Ordering::Greater => {
                        out.push((q.clone(), *f));
                        b.next();
                    }
                    std::cmp::Ordering::Equal => {
                        out.push((p.clone(), e + f));
                        a.next();
                        b.next();
                    }
                },
                (Some(x), None) => {
                    out.push((*x).clone());
                    a.next();
                }
                (None, Some(y)) => {
                    out.push((*y).clone());
                    b.next();
                }
                (None, None) => break,
            }
        }
        Self {
            dim: self.dim,
            entries: out,
        }
    }

    pub fn supports_intersect(&self, other: &Self) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            match self.entries[i].0.cmp(&other.entries[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Parses the text grammar, checking every point has dimension `d`.
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        let beta: MultiIndex = s.parse()?;
        if !beta.is_zero() && beta.dim != d {
            return Err(Error::InvalidArgument(format!(
                "multi-index {s:?} has dimension {} but {d} was expected",
                beta.dim
            )));
        }
        Ok(Self { dim: d, ..beta })
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, e)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{p}:{e}")?;
        }
        Ok(())
    }
}

/// Parses the text grammar; the dimension is taken from the first point.
/// The empty string parses as the zero multi-index of dimension 1.
impl FromStr for MultiIndex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::zero(1));
        }
        let mut entries = Vec::new();
        for item in s.split(';') {
            let (p, e) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected point:exponent, got {item:?}")))?;
            let p: LatticePoint = p.parse()?;
            let e: u32 = e
                .trim()
                .parse()
                .map_err(|err| Error::Parse(format!("bad exponent {e:?}: {err}")))?;
            if e == 0 {
                return Err(Error::Parse(format!(
                    "exponent must be positive in {item:?}"
                )));
            }
            entries.push((p, e));
        }
        let d = entries[0].0.dim();
        Self::from_entries(d, entries)
    }
}
