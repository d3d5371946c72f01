//! Strings over {V, U_1..U_d, D_1..D_d}, their lattice walks, and the path
//! counts p^k(β) that give the bulk coefficients of Tr H_L^k.
//!
//! A string s of length k defines a walk y_0 = 0, y_1, ..., y_k: `Up(v)` moves
//! by +e_v, `Down(v)` by −e_v and `Pot` stays put. The string is balanced when
//! the walk returns to the origin, and φ(s) counts the `Pot` symbols per site.
//! p^k(β) is the number of balanced strings whose φ is a translate of β.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::budget::{saturating_pow, Budget};
use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, MultiIndex};

/// One letter of the alphabet. Axes are counted from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepSymbol {
    Pot,
    Up(usize),
    Down(usize),
}

impl StepSymbol {
    fn axis(self) -> Option<usize> {
        match self {
            StepSymbol::Pot => None,
            StepSymbol::Up(v) | StepSymbol::Down(v) => Some(v),
        }
    }

    /// All 2d+1 symbols: `Pot`, then `Up`/`Down` per axis.
    pub fn alphabet(d: usize) -> Vec<StepSymbol> {
        let mut out = vec![StepSymbol::Pot];
        for v in 0..d {
            out.push(StepSymbol::Up(v));
            out.push(StepSymbol::Down(v));
        }
        out
    }
}

impl fmt::Display for StepSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSymbol::Pot => write!(f, "V"),
            StepSymbol::Up(v) => write!(f, "U{}", v + 1),
            StepSymbol::Down(v) => write!(f, "D{}", v + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepString {
    d: usize,
    symbols: Vec<StepSymbol>,
}

impl StepString {
    pub fn new(d: usize, symbols: Vec<StepSymbol>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "dimension must be at least 1".into(),
            ));
        }
        if symbols.is_empty() {
            return Err(Error::InvalidArgument(
                "strings must have length ≥ 1".into(),
            ));
        }
        if let Some(s) = symbols.iter().find(|s| s.axis().is_some_and(|v| v >= d)) {
            return Err(Error::InvalidArgument(format!(
                "symbol {s} uses an axis outside 1..{d}"
            )));
        }
        Ok(Self { d, symbols })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn symbols(&self) -> &[StepSymbol] {
        &self.symbols
    }

    /// y_0 .. y_k.
    pub fn trajectory(&self) -> Vec<LatticePoint> {
        let mut y = vec![0i64; self.d];
        let mut out = Vec::with_capacity(self.symbols.len() + 1);
        out.push(LatticePoint::origin(self.d));
        for s in &self.symbols {
            step(&mut y, *s);
            out.push(LatticePoint::new(y.clone()).expect("d ≥ 1"));
        }
        out
    }

    pub fn is_balanced(&self) -> bool {
        let mut y = vec![0i64; self.d];
        for s in &self.symbols {
            step(&mut y, *s);
        }
        y.iter().all(|&c| c == 0)
    }

    /// φ(s): number of `Pot` symbols per visited site. Zero when s has no `Pot`.
    pub fn phi(&self) -> MultiIndex {
        let mut y = vec![0i64; self.d];
        let mut pots = Vec::new();
        for s in &self.symbols {
            step(&mut y, *s);
            if *s == StepSymbol::Pot {
                pots.push(LatticePoint::new(y.clone()).expect("d ≥ 1"));
            }
        }
        MultiIndex::from_points(self.d, pots)
    }
}

#[inline]
fn step(y: &mut [i64], s: StepSymbol) {
    match s {
        StepSymbol::Pot => {}
        StepSymbol::Up(v) => y[v] += 1,
        StepSymbol::Down(v) => y[v] -= 1,
    }
}

/// A balanced string reached by [`for_each_balanced`], with its trajectory.
pub struct BalancedWalk<'a> {
    d: usize,
    symbols: &'a [StepSymbol],
    // y_0..y_k flattened, d coordinates per point
    traj: &'a [i64],
}

impl BalancedWalk<'_> {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[StepSymbol] {
        self.symbols
    }

    /// Coordinates of y_j.
    pub fn point(&self, j: usize) -> &[i64] {
        &self.traj[j * self.d..(j + 1) * self.d]
    }

    pub fn has_pot(&self) -> bool {
        self.symbols.contains(&StepSymbol::Pot)
    }

    pub fn phi(&self) -> MultiIndex {
        let pots = self
            .symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == StepSymbol::Pot)
            .map(|(j, _)| LatticePoint::new(self.point(j + 1).to_vec()).expect("d ≥ 1"));
        MultiIndex::from_points(self.d, pots)
    }

    /// (min_j y_j[axis], max_j y_j[axis]).
    pub fn extent(&self, axis: usize) -> (i64, i64) {
        (0..=self.len())
            .map(|j| self.point(j)[axis])
            .fold((i64::MAX, i64::MIN), |(lo, hi), c| (lo.min(c), hi.max(c)))
    }

    /// Whether y_j + anchor ∈ Λ_L^d for every j.
    pub fn fits_in_box(&self, anchor: &[i64], radius: i64) -> bool {
        (0..self.d).all(|v| {
            let (lo, hi) = self.extent(v);
            anchor[v] + lo >= -radius && anchor[v] + hi <= radius
        })
    }

    pub fn to_step_string(&self) -> StepString {
        StepString {
            d: self.d,
            symbols: self.symbols.to_vec(),
        }
    }
}

/// Depth-first enumeration of all balanced strings of length k over the
/// d-dimensional alphabet.
///
/// Prefixes whose current point is farther (ℓ¹) from the origin than the
/// remaining length are pruned. Work is split on the first symbol; each
/// branch folds into its own accumulator from `init` and the partial results
/// are combined with `merge`, which must be associative and commutative.
pub fn for_each_balanced<A, I, F, M>(
    k: usize,
    d: usize,
    budget: Budget,
    init: I,
    visit: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &BalancedWalk<'_>) + Sync,
    M: Fn(A, A) -> A + Sync,
{
    if k == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "need k ≥ 1 and d ≥ 1, got k={k}, d={d}"
        )));
    }
    budget.check(
        &format!("enumerating strings of length {k} in dimension {d}"),
        saturating_pow(2 * d as u128 + 1, k),
    )?;
    let alphabet = StepSymbol::alphabet(d);
    let partials: Vec<A> = alphabet
        .par_iter()
        .map(|&first| {
            let mut acc = init();
            let mut symbols = Vec::with_capacity(k);
            let mut traj = vec![0i64; (k + 1) * d];
            symbols.push(first);
            traj.copy_within(0..d, d);
            step(&mut traj[d..2 * d], first);
            if l1(&traj[d..2 * d]) <= (k - 1) as i64 {
                descend(k, d, &alphabet, &mut symbols, &mut traj, &mut acc, &visit);
            }
            acc
        })
        .collect();
    Ok(partials
        .into_iter()
        .reduce(&merge)
        .expect("alphabet is non-empty"))
}

fn l1(y: &[i64]) -> i64 {
    y.iter().map(|c| c.abs()).sum()
}

fn descend<A, F>(
    k: usize,
    d: usize,
    alphabet: &[StepSymbol],
    symbols: &mut Vec<StepSymbol>,
    traj: &mut [i64],
    acc: &mut A,
    visit: &F,
) where
    F: Fn(&mut A, &BalancedWalk<'_>),
{
    let j = symbols.len();
    if j == k {
        if traj[k * d..(k + 1) * d].iter().all(|&c| c == 0) {
            visit(acc, &BalancedWalk { d, symbols, traj });
        }
        return;
    }
    let remaining = (k - j - 1) as i64;
    for &s in alphabet {
        traj.copy_within((j * d)..((j + 1) * d), (j + 1) * d);
        step(&mut traj[(j + 1) * d..(j + 2) * d], s);
        if l1(&traj[(j + 1) * d..(j + 2) * d]) > remaining {
            continue;
        }
        symbols.push(s);
        descend(k, d, alphabet, symbols, traj, acc, visit);
        symbols.pop();
    }
}

/// The family {p^k(β)} over canonical β, for one (k, d).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCountTable {
    pub k: usize,
    pub d: usize,
    counts: BTreeMap<MultiIndex, u64>,
}

impl PathCountTable {
    /// p^k(β) for any non-zero β (canonicalized first).
    pub fn get(&self, beta: &MultiIndex) -> Result<u64> {
        let (c, _) = beta.canonicalize()?;
        Ok(self.counts.get(&c).copied().unwrap_or(0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, u64)> {
        self.counts.iter().map(|(b, c)| (b, *c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

fn merge_counts<K: Ord>(mut a: BTreeMap<K, u64>, b: BTreeMap<K, u64>) -> BTreeMap<K, u64> {
    for (key, c) in b {
        *a.entry(key).or_insert(0) += c;
    }
    a
}

type TableCache = Mutex<HashMap<(usize, usize), Arc<PathCountTable>>>;

fn table_cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// p^k(β) for all canonical β, memoized per (k, d) for the life of the process.
pub fn path_counts(k: usize, d: usize, budget: Budget) -> Result<Arc<PathCountTable>> {
    if k == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "need k ≥ 1 and d ≥ 1, got k={k}, d={d}"
        )));
    }
    budget.check(
        &format!("path counts for k={k}, d={d}"),
        saturating_pow(2 * d as u128 + 1, k),
    )?;
    if let Some(t) = table_cache().lock().unwrap().get(&(k, d)) {
        return Ok(Arc::clone(t));
    }
    let counts = for_each_balanced(
        k,
        d,
        budget,
        BTreeMap::new,
        |acc: &mut BTreeMap<MultiIndex, u64>, w| {
            if w.has_pot() {
                let (c, _) = w.phi().canonicalize().expect("walk has a Pot symbol");
                *acc.entry(c).or_insert(0) += 1;
            }
        },
        merge_counts,
    )?;
    let table = Arc::new(PathCountTable { k, d, counts });
    table_cache()
        .lock()
        .unwrap()
        .insert((k, d), Arc::clone(&table));
    Ok(table)
}

/// a^k_L(β): the coefficient of X^β in Tr H_L^k, i.e. the number of pairs
/// (s, i) with s balanced, φ(s)^i = β and y_j(s) + i ∈ Λ_L^d for all j.
pub fn truncated_coefficient(
    beta: &MultiIndex,
    k: usize,
    radius: usize,
    budget: Budget,
) -> Result<u64> {
    let (target, _) = beta.canonicalize()?;
    let anchor_point = beta.lex_min().expect("non-zero").clone();
    let d = beta.dim();
    let radius = radius as i64;
    for_each_balanced(
        k,
        d,
        budget,
        || 0u64,
        |acc, w| {
            if !w.has_pot() {
                return;
            }
            let phi = w.phi();
            let (c, _) = phi.canonicalize().expect("walk has a Pot symbol");
            if c != target {
                return;
            }
            // φ(s)^i = β pins i to the difference of the lex-min points.
            let i = &anchor_point - phi.lex_min().expect("non-zero");
            if w.fits_in_box(i.coords(), radius) {
                *acc += 1;
            }
        },
        |a, b| a + b,
    )
}

/// (number of balanced strings, number of those containing a `Pot`).
pub fn balanced_census(k: usize, d: usize, budget: Budget) -> Result<(u64, u64)> {
    for_each_balanced(
        k,
        d,
        budget,
        || (0u64, 0u64),
        |acc, w| {
            acc.0 += 1;
            if w.has_pot() {
                acc.1 += 1;
            }
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    )
}
