//! Forward operators acting on coefficient vectors.
//!
//! Every operator is described by the images `Aφ_k` of the domain basis,
//! written in an orthonormal basis `(w_r)` of the range. Images are sparse
//! for all built-in kinds, so Gram matrices and applications are exact and
//! cheap.
//!
//! Range layouts:
//! * `Diagonal`, `PoissonSine`: `w_r` pairs with `φ_r` (same index).
//! * `Volterra2D`: slot 0 is the constant function; for `m >= 1` slots
//!   `3m-2`, `3m-1`, `3m` hold `ĉ_m = 2cos(kπx)cos(lπy)` for the m-th index
//!   pair `(k, l)`, `√2cos(mπx)` and `√2cos(mπy)` respectively. Both variants
//!   share this layout, so their images differ only in the boundary slots.
//! * `DenseMatrix`: the rows of the matrix.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::scalar::Scalar;
use crate::scales::{dual_norm, CoefficientVector, PairIndex, SequenceScale};

/// Sparse image of a basis vector: `(range slot, coefficient)` pairs, sorted by slot.
pub type SparseImage<T> = Vec<(usize, T)>;

/// Singular values `a_i` of a diagonal operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum<T> {
    /// `a_i = i^{-exponent}`.
    Power { exponent: T },
    /// Finite explicit list; the domain is limited to its length.
    Explicit(Arc<[T]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolterraVariant {
    /// `Af(x,y) = ∫_0^x ∫_0^y f`, with boundary terms in the range.
    A,
    /// `A` minus its projection onto functions `g1(x) + g2(y)`.
    A0,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind<T> {
    Diagonal(Spectrum<T>),
    /// Solution operator of `(Af)'' = f` with Dirichlet boundary values, in the
    /// basis `√2 sin(kπx)`: `A φ_k = -(kπ)^{-2} φ_k`.
    PoissonSine,
    Volterra2D {
        variant: VolterraVariant,
        index: PairIndex,
    },
    DenseMatrix(DenseMatrix<T>),
}

/// Role of a range slot, for labelling and masking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeCoordinate {
    /// Orthonormal range vector paired with domain index `i`.
    Basis(usize),
    /// `2cos(kπx)cos(lπy)` for the m-th pair.
    Pair(usize),
    CosX(usize),
    CosY(usize),
    Constant,
}

/// Bounded injective operator `A` with declared smoothing order `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator<T> {
    kind: OperatorKind<T>,
    gamma: T,
    label: String,
}

impl<T: Scalar> ForwardOperator<T> {
    fn build(kind: OperatorKind<T>, gamma: T, label: String) -> Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "smoothing order must be positive, got {gamma}"
            )));
        }
        Ok(Self { kind, gamma, label })
    }

    /// Diagonal operator with `a_i = i^{-exponent}` and smoothing order `gamma`.
    pub fn diagonal_power(exponent: T, gamma: T) -> Result<Self> {
        Self::build(
            OperatorKind::Diagonal(Spectrum::Power { exponent }),
            gamma,
            format!("diagonal(i^-{exponent})"),
        )
    }

    /// Diagonal operator with explicit singular values; all must be nonzero.
    pub fn diagonal(values: Vec<T>, gamma: T) -> Result<Self> {
        if values.iter().any(|a| *a == T::zero() || !a.is_finite()) {
            return Err(Error::Singular {
                j: values.len() + 1,
                detail: "zero or non-finite singular value".into(),
            });
        }
        let n = values.len();
        Self::build(
            OperatorKind::Diagonal(Spectrum::Explicit(values.into())),
            gamma,
            format!("diagonal(explicit, {n})"),
        )
    }

    /// Diagonal operator `a_i = b_i^{-γ}`, an isometry from `H_{-γ}` onto its
    /// range. Power scales keep an infinite domain; other generators are
    /// tabulated up to `len`.
    pub fn diagonal_for_scale(scale: &SequenceScale<T>, gamma: T, len: usize) -> Result<Self> {
        match scale.generator() {
            crate::scales::Generator::Power => Self::diagonal_power(gamma / scale.dim(), gamma),
            _ => Self::diagonal(scale.weights(len, -gamma), gamma),
        }
    }

    pub fn poisson_sine() -> Self {
        Self {
            kind: OperatorKind::PoissonSine,
            gamma: T::of(2.0),
            label: "poisson".into(),
        }
    }

    /// Two-dimensional Volterra operator on the unit square (smoothing order 1).
    /// The pair ordering must match the scale used with it.
    pub fn volterra2d(variant: VolterraVariant, index: PairIndex) -> Self {
        let label = match variant {
            VolterraVariant::A => "volterra2d-A",
            VolterraVariant::A0 => "volterra2d-A0",
        };
        Self {
            kind: OperatorKind::Volterra2D { variant, index },
            gamma: T::one(),
            label: label.into(),
        }
    }

    pub fn dense(matrix: DenseMatrix<T>, gamma: T) -> Result<Self> {
        let label = format!("matrix({}x{})", matrix.rows(), matrix.cols());
        Self::build(OperatorKind::DenseMatrix(matrix), gamma, label)
    }

    pub fn kind(&self) -> &OperatorKind<T> {
        &self.kind
    }

    /// Smoothing order `γ`.
    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, OperatorKind::Diagonal(_) | OperatorKind::PoissonSine)
    }

    /// Number of admissible domain coordinates (`usize::MAX` if unbounded).
    pub fn domain_dim(&self) -> usize {
        match &self.kind {
            OperatorKind::Diagonal(Spectrum::Explicit(a)) => a.len(),
            OperatorKind::DenseMatrix(m) => m.cols(),
            _ => usize::MAX,
        }
    }

    /// Diagonal entry `a_i` (1-based) for diagonal kinds.
    pub fn singular_value(&self, i: usize) -> Option<T> {
        match &self.kind {
            OperatorKind::Diagonal(Spectrum::Power { exponent }) => Some(T::of_usize(i).powf(-*exponent)),
            OperatorKind::Diagonal(Spectrum::Explicit(a)) => a.get(i - 1).copied(),
            OperatorKind::PoissonSine => {
                let kpi = T::of_usize(i) * T::pi();
                Some(-T::one() / (kpi * kpi))
            }
            _ => None,
        }
    }

    /// Image `Aφ_k` (1-based `k`) as sparse range coefficients.
    pub fn image(&self, k: usize) -> Result<SparseImage<T>> {
        if k == 0 || k > self.domain_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain_dim(),
                got: k,
            });
        }
        Ok(match &self.kind {
            OperatorKind::Diagonal(_) | OperatorKind::PoissonSine => {
                vec![(k - 1, self.singular_value(k).expect("diagonal kind"))]
            }
            OperatorKind::Volterra2D { variant, index } => {
                let (p, q) = index.pair(k);
                let c = T::one() / (T::of_usize(p * q) * T::pi() * T::pi());
                match variant {
                    VolterraVariant::A0 => vec![(pair_slot(k), c)],
                    VolterraVariant::A => {
                        let r2 = T::of(2.0).sqrt();
                        let mut img = vec![(0, T::of(2.0) * c), (pair_slot(k), c)];
                        img.push((cos_x_slot(p), -r2 * c));
                        img.push((cos_y_slot(q), -r2 * c));
                        img.sort_by_key(|e| e.0);
                        merge_sorted(img)
                    }
                }
            }
            OperatorKind::DenseMatrix(m) => (0..m.rows())
                .map(|r| (r, m[(r, k - 1)]))
                .filter(|(_, v)| *v != T::zero())
                .collect(),
        })
    }

    /// Range length needed to hold the images of `φ_1..φ_j`.
    pub fn range_len(&self, j: usize) -> usize {
        match &self.kind {
            OperatorKind::Diagonal(_) | OperatorKind::PoissonSine => j,
            OperatorKind::DenseMatrix(m) => m.rows(),
            OperatorKind::Volterra2D { variant, index } => {
                if j == 0 {
                    return 0;
                }
                match variant {
                    VolterraVariant::A0 => pair_slot(j) + 1,
                    VolterraVariant::A => {
                        let top = (1..=j).fold(j, |acc, m| {
                            let (p, q) = index.pair(m);
                            acc.max(p).max(q)
                        });
                        cos_y_slot(top) + 1
                    }
                }
            }
        }
    }

    /// Role of range slot `r` (0-based).
    pub fn range_coordinate(&self, r: usize) -> RangeCoordinate {
        match &self.kind {
            OperatorKind::Volterra2D { .. } => {
                if r == 0 {
                    RangeCoordinate::Constant
                } else {
                    let m = (r - 1) / 3 + 1;
                    match (r - 1) % 3 {
                        0 => RangeCoordinate::Pair(m),
                        1 => RangeCoordinate::CosX(m),
                        _ => RangeCoordinate::CosY(m),
                    }
                }
            }
            _ => RangeCoordinate::Basis(r + 1),
        }
    }

    /// True for range slots spanned by the boundary part `Φ = A − A₀` of the
    /// Volterra pair.
    pub fn is_boundary_slot(&self, r: usize) -> bool {
        matches!(
            self.range_coordinate(r),
            RangeCoordinate::Constant | RangeCoordinate::CosX(_) | RangeCoordinate::CosY(_)
        )
    }

    /// Coefficients of `Af` in the range basis.
    pub fn apply(&self, f: &CoefficientVector<T>) -> Result<CoefficientVector<T>> {
        let support = f.support_len();
        if support > self.domain_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain_dim(),
                got: support,
            });
        }
        let len = f.len().min(self.domain_dim());
        match &self.kind {
            OperatorKind::Diagonal(_) | OperatorKind::PoissonSine => {
                let out = f.coeffs()[..len]
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| x * self.singular_value(i + 1).expect("diagonal kind"))
                    .collect();
                CoefficientVector::new(out)
            }
            OperatorKind::DenseMatrix(m) => CoefficientVector::new(m.mul_vec(&f.coeffs()[..len])?),
            OperatorKind::Volterra2D { .. } => {
                let mut out = vec![T::zero(); self.range_len(len)];
                for (k, &x) in f.coeffs()[..len].iter().enumerate() {
                    if x == T::zero() {
                        continue;
                    }
                    for (r, v) in self.image(k + 1)? {
                        out[r] += x * v;
                    }
                }
                CoefficientVector::new(out)
            }
        }
    }
}

fn pair_slot(m: usize) -> usize {
    3 * (m - 1) + 1
}

fn cos_x_slot(k: usize) -> usize {
    3 * (k - 1) + 2
}

fn cos_y_slot(l: usize) -> usize {
    3 * (l - 1) + 3
}

fn merge_sorted<T: Scalar>(img: Vec<(usize, T)>) -> Vec<(usize, T)> {
    let mut out: Vec<(usize, T)> = Vec::with_capacity(img.len());
    for (r, v) in img {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 += v,
            _ => out.push((r, v)),
        }
    }
    out
}

/// `⟨u, v⟩` for sorted sparse vectors.
pub fn sparse_dot<T: Scalar>(u: &[(usize, T)], v: &[(usize, T)]) -> T {
    let (mut i, mut j, mut acc) = (0, 0, T::zero());
    while i < u.len() && j < v.len() {
        match u[i].0.cmp(&v[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += u[i].1 * v[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// `⟨g, u⟩` for a dense range vector `g` and sparse `u`; slots beyond `g` are zero.
pub fn dense_sparse_dot<T: Scalar>(g: &[T], u: &[(usize, T)]) -> T {
    u.iter()
        .filter_map(|&(r, v)| g.get(r).map(|&x| x * v))
        .fold(T::zero(), |a, b| a + b)
}

/// Images `Aφ_1..Aφ_{j-1}`.
pub(crate) fn images<T: Scalar>(op: &ForwardOperator<T>, j: usize) -> Result<Vec<SparseImage<T>>> {
    (1..j).map(|k| op.image(k)).collect()
}

pub(crate) fn gram_from_images<T: Scalar>(cols: &[SparseImage<T>]) -> DenseMatrix<T> {
    let n = cols.len();
    let mut g = DenseMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let v = sparse_dot(&cols[a], &cols[b]);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

/// Gram matrix `G_kl = ⟨Aφ_k, Aφ_l⟩` for `k, l < j`, verified positive definite.
pub fn gram_matrix<T: Scalar>(op: &ForwardOperator<T>, j: usize) -> Result<DenseMatrix<T>> {
    if j < 2 {
        return Err(Error::InvalidArgument(format!("Gram matrix needs j >= 2, got {j}")));
    }
    if j - 1 > op.domain_dim() {
        return Err(Error::DimensionMismatch {
            expected: op.domain_dim(),
            got: j - 1,
        });
    }
    let g = gram_from_images(&images(op, j)?);
    Cholesky::new(&g).map_err(|e| match e {
        Error::Singular { detail, .. } => Error::Singular { j, detail },
        other => other,
    })?;
    Ok(g)
}

/// Extremes of `‖Af‖ / ‖f‖_{-γ}` over the probes.
pub fn smoothing_ratio<T: Scalar>(
    op: &ForwardOperator<T>,
    scale: &SequenceScale<T>,
    probes: &[CoefficientVector<T>],
) -> Result<(T, T)> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probes supplied".into()));
    }
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for f in probes {
        let den = dual_norm(f, op.gamma(), scale)?;
        if den == T::zero() {
            return Err(Error::InvalidArgument("zero probe vector".into()));
        }
        let r = op.apply(f)?.l2() / den;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}
