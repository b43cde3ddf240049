//! Sequence-space smoothness scales.
//!
//! A scale is generated by a nondecreasing sequence `b_1 <= b_2 <= ...` with
//! `b_1 >= 1` and `b_i -> ∞`. For a coefficient vector `f` (coefficients in an
//! orthonormal basis `φ_i` of `H_0`),
//!
//! ```text
//! ‖f‖_s = (Σ_i b_i^{2s} f_i²)^{1/2},      δ(j, s) = b_j^{-s},
//! ```
//!
//! and `V_j = span{φ_i : i < j}` is the (j−1)-dimensional approximation space.
//! All vectors are finitely truncated, so every norm is exact.
//!
//! Math-facing indices (`i`, `j`) are 1-based throughout this module; slices
//! are 0-based, so coordinate `i` lives at `coeffs()[i - 1]`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finite vector of coefficients `(f_1, ..., f_J)`. `J = 0` is the zero element.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientVector<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> CoefficientVector<T> {
    /// Wraps coefficients, rejecting non-finite entries.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("coefficient vector"));
        }
        Ok(Self { coeffs })
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            coeffs: vec![T::zero(); len],
        }
    }

    /// Unit vector `e_i` of length `len` (requires `1 <= i <= len`).
    pub fn basis(i: usize, len: usize) -> Self {
        assert!(i >= 1 && i <= len, "basis index {i} outside 1..={len}");
        let mut v = Self::zeros(len);
        v.coeffs[i - 1] = T::one();
        v
    }

    /// Builds `f_i = rule(i)` for `i = 1..=len`.
    pub fn from_fn(len: usize, rule: impl Fn(usize) -> T) -> Result<Self> {
        Self::new((1..=len).map(rule).collect())
    }

    /// Truncation length `J`.
    #[inline]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[inline]
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient `f_i` (1-based), zero beyond the truncation.
    #[inline]
    pub fn coord(&self, i: usize) -> T {
        self.coeffs.get(i.wrapping_sub(1)).copied().unwrap_or_else(T::zero)
    }

    /// Index of the last nonzero coordinate (1-based), 0 for the zero element.
    pub fn support_len(&self) -> usize {
        self.coeffs.iter().rposition(|x| *x != T::zero()).map_or(0, |p| p + 1)
    }

    /// Zero-pads or truncates to `len` coordinates.
    pub fn resized(&self, len: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(len, T::zero());
        Self { coeffs: c }
    }

    /// `⟨f, g⟩_0` over the common support.
    pub fn dot(&self, other: &Self) -> T {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    /// Euclidean (`H_0`) norm.
    pub fn l2(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }

    /// `α·self + β·other`, padded to the longer length.
    pub fn lincomb(&self, alpha: T, other: &Self, beta: T) -> Self {
        let n = self.len().max(other.len());
        Self {
            coeffs: (1..=n).map(|i| alpha * self.coord(i) + beta * other.coord(i)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.lincomb(T::one(), other, -T::one())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.lincomb(T::one(), other, T::one())
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&x| c * x).collect(),
        }
    }
}

/// Enumeration of index pairs `(k, l) ∈ ℕ²` for two-dimensional tensor scales,
/// ordered by the product `k·l` with ties broken by smaller `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairIndex {
    table: Arc<[(u32, u32)]>,
}

impl PairIndex {
    /// Precomputes the first `capacity` pairs; later pairs are computed on demand.
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        // Smallest product bound P with at least `capacity` pairs k·l <= P.
        let mut bound = 1u64;
        while divisor_summatory(bound) < capacity as u64 {
            bound *= 2;
        }
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(divisor_summatory(bound) as usize);
        for k in 1..=bound {
            for l in 1..=bound / k {
                pairs.push((k as u32, l as u32));
            }
        }
        pairs.sort_by_key(|&(k, l)| (k as u64 * l as u64, k));
        pairs.truncate(capacity);
        Self { table: pairs.into() }
    }

    pub fn capacity(&self) -> usize {
        self.table.len()
    }

    /// The `i`-th pair (1-based).
    pub fn pair(&self, i: usize) -> (usize, usize) {
        assert!(i >= 1, "pair index is 1-based");
        match self.table.get(i - 1) {
            Some(&(k, l)) => (k as usize, l as usize),
            None => nth_pair(i),
        }
    }
}

/// Number of pairs with `k·l <= m`.
fn divisor_summatory(m: u64) -> u64 {
    (1..=m).map(|k| m / k).sum()
}

fn nth_pair(i: usize) -> (usize, usize) {
    let i = i as u64;
    let (mut lo, mut hi) = (1u64, 1u64);
    while divisor_summatory(hi) < i {
        lo = hi;
        hi *= 2;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if divisor_summatory(mid) >= i {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let product = lo;
    let rank = i - divisor_summatory(product - 1);
    let k = (1..=product)
        .filter(|k| product % k == 0)
        .nth(rank as usize - 1)
        .expect("rank within divisor count");
    (k as usize, (product / k) as usize)
}

/// Generator of the sequence `b_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator<T> {
    /// `b_i = i^{1/d}`.
    Power,
    /// `b_i = k·l·π²` for the `i`-th pair of the product ordering: the square
    /// root of the Dirichlet eigenvalues of `∂⁴/∂x²∂y²` on the unit square.
    Tensor2D(PairIndex),
    /// Explicit finite table; indices beyond it are rejected.
    Table(Arc<[T]>),
}

/// Smoothness scale `(H_s)` generated by `b`, with effective dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScale<T> {
    generator: Generator<T>,
    d: T,
}

impl<T: Scalar> SequenceScale<T> {
    /// `b_i = i^{1/d}`, so that `δ(j, s) = j^{-s/d}`.
    pub fn power(d: T) -> Result<Self> {
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::InvalidArgument(format!("dimension d must be positive, got {d}")));
        }
        Ok(Self {
            generator: Generator::Power,
            d,
        })
    }

    /// Scale of the two-dimensional Volterra example, `b = k·l·π²`. Counting
    /// pairs with `kl <= x` grows like `x log x`, so the effective dimension
    /// is 1 up to a logarithm.
    pub fn volterra2d(capacity: usize) -> Self {
        Self {
            generator: Generator::Tensor2D(PairIndex::with_capacity(capacity)),
            d: T::one(),
        }
    }

    /// Explicit generator table. Must satisfy `b_1 >= 1` and be nondecreasing.
    pub fn from_table(b: Vec<T>, d: T) -> Result<Self> {
        if b.is_empty() || b[0] < T::one() || b.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(
                "generator table must start at >= 1 and be nondecreasing".into(),
            ));
        }
        if !(d > T::zero()) {
            return Err(Error::InvalidArgument("dimension d must be positive".into()));
        }
        Ok(Self {
            generator: Generator::Table(b.into()),
            d,
        })
    }

    pub fn generator(&self) -> &Generator<T> {
        &self.generator
    }

    /// Effective dimension `d`.
    pub fn dim(&self) -> T {
        self.d
    }

    /// Index pair of coordinate `i` for two-dimensional scales.
    pub fn pair(&self, i: usize) -> Option<(usize, usize)> {
        match &self.generator {
            Generator::Tensor2D(idx) => Some(idx.pair(i)),
            _ => None,
        }
    }

    /// Generator value `b_i` (1-based).
    pub fn b(&self, i: usize) -> T {
        assert!(i >= 1, "scale index is 1-based");
        match &self.generator {
            Generator::Power => T::of_usize(i).powf(T::one() / self.d),
            Generator::Tensor2D(idx) => {
                let (k, l) = idx.pair(i);
                T::of_usize(k * l) * T::pi() * T::pi()
            }
            Generator::Table(t) => *t
                .get(i - 1)
                .unwrap_or_else(|| panic!("index {i} beyond generator table of length {}", t.len())),
        }
    }

    /// Weights `b_i^{p}` for `i = 1..=len`.
    pub fn weights(&self, len: usize, p: T) -> Vec<T> {
        (1..=len).map(|i| self.b(i).powf(p)).collect()
    }
}

/// `‖f‖_s = (Σ b_i^{2s} f_i²)^{1/2}`, exact on the truncation. Negative `s`
/// gives the dual norm.
pub fn norm<T: Scalar>(f: &CoefficientVector<T>, s: T, scale: &SequenceScale<T>) -> Result<T> {
    let two_s = s + s;
    let sum = f
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, x)| **x != T::zero())
        .fold(T::zero(), |acc, (i, &x)| acc + scale.b(i + 1).powf(two_s) * x * x);
    let out = sum.sqrt();
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite("scale norm"))
    }
}

/// Orthogonal projection `P_j` onto `V_j`: keeps coordinates `i < j`.
pub fn project<T: Scalar>(f: &CoefficientVector<T>, j: usize) -> CoefficientVector<T> {
    assert!(j >= 1, "projection level j must be >= 1");
    let mut c = f.coeffs().to_vec();
    for x in c.iter_mut().skip(j - 1) {
        *x = T::zero();
    }
    CoefficientVector::from_vec_unchecked(c)
}

/// Approximation number `δ(j, s) = b_j^{-s}`.
pub fn approx_number<T: Scalar>(j: usize, s: T, scale: &SequenceScale<T>) -> T {
    scale.b(j).powf(-s)
}

/// `‖f‖_{-s}` in closed form, `(Σ b_i^{-2s} f_i²)^{1/2}`.
pub fn dual_norm<T: Scalar>(f: &CoefficientVector<T>, s: T, scale: &SequenceScale<T>) -> Result<T> {
    norm(f, -s, scale)
}

/// The maximizer `g` of `⟨f, g⟩_0` over `‖g‖_s <= 1`: `g_i ∝ b_i^{-2s} f_i`,
/// normalized to `‖g‖_s = 1`. Returns the zero vector for `f = 0`.
pub fn dual_maximizer<T: Scalar>(
    f: &CoefficientVector<T>,
    s: T,
    scale: &SequenceScale<T>,
) -> Result<CoefficientVector<T>> {
    let raw: Vec<T> = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, &x)| scale.b(i + 1).powf(-(s + s)) * x)
        .collect();
    let raw = CoefficientVector::new(raw)?;
    let nrm = norm(&raw, s, scale)?;
    if nrm == T::zero() {
        return Ok(raw);
    }
    Ok(raw.scaled(T::one() / nrm))
}
