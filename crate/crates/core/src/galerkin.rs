//! Galerkin least-squares inversion.
//!
//! For a level `j`, the Galerkin solution `f^{(j)} ∈ V_j` is characterized by
//! `⟨A f^{(j)}, w⟩ = ⟨g, w⟩` for all `w ∈ W_j = A V_j`. Writing
//! `f^{(j)} = Σ_{k<j} c_k φ_k`, this is the normal system `G c = r` with
//! `G_kl = ⟨Aφ_k, Aφ_l⟩` and `r_k = ⟨g, Aφ_k⟩`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, Cholesky, DenseMatrix};
use crate::operators::{dense_sparse_dot, gram_from_images, images, ForwardOperator, SparseImage};
use crate::priors::GaussianPrior;
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::scales::CoefficientVector;

/// Gram systems with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Factorized normal equations for one operator and level `j`.
#[derive(Debug, Clone)]
pub struct GalerkinSystem<'a, T> {
    op: &'a ForwardOperator<T>,
    j: usize,
    images: Vec<SparseImage<T>>,
    gram: DenseMatrix<T>,
    chol: Cholesky<T>,
}

impl<'a, T: Scalar> GalerkinSystem<'a, T> {
    pub fn new(op: &'a ForwardOperator<T>, j: usize) -> Result<Self> {
        if j < 2 {
            return Err(Error::InvalidArgument(format!("Galerkin level must be >= 2, got {j}")));
        }
        if j - 1 > op.domain_dim() {
            return Err(Error::DimensionMismatch {
                expected: op.domain_dim(),
                got: j - 1,
            });
        }
        let images = images(op, j)?;
        let gram = gram_from_images(&images);
        let chol = Cholesky::new(&gram).map_err(|e| match e {
            Error::Singular { detail, .. } => Error::Singular { j, detail },
            other => other,
        })?;
        let cond = chol.condition_estimate();
        if !(cond.as_f64() <= MAX_CONDITION) {
            return Err(Error::Singular {
                j,
                detail: format!("Gram condition number {:e} exceeds {MAX_CONDITION:e}", cond.as_f64()),
            });
        }
        Ok(Self {
            op,
            j,
            images,
            gram,
            chol,
        })
    }

    pub fn level(&self) -> usize {
        self.j
    }

    pub fn operator(&self) -> &ForwardOperator<T> {
        self.op
    }

    pub fn gram(&self) -> &DenseMatrix<T> {
        &self.gram
    }

    pub fn images(&self) -> &[SparseImage<T>] {
        &self.images
    }

    /// `‖L Lᵀ − G‖_max / ‖G‖_max`.
    pub fn factorization_error(&self) -> T {
        let scale = self.gram.as_slice().iter().fold(T::zero(), |m, x| m.max(x.abs()));
        self.chol.reconstruct().max_abs_diff(&self.gram) / scale
    }

    /// Right-hand side `r_k = ⟨g, Aφ_k⟩`.
    pub fn projected_data(&self, g: &CoefficientVector<T>) -> Vec<T> {
        self.images
            .iter()
            .map(|img| dense_sparse_dot(g.coeffs(), img))
            .collect()
    }

    /// Galerkin solution `f^{(j)} = R_j g`, as `j − 1` coefficients.
    pub fn solve(&self, g: &CoefficientVector<T>) -> Result<CoefficientVector<T>> {
        if g.coeffs().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Galerkin data"));
        }
        let c = self.chol.solve(&self.projected_data(g))?;
        CoefficientVector::new(c)
    }

    /// `max_k |⟨A f^{(j)} − g, Aφ_k⟩|`, computed through `apply`.
    pub fn orthogonality_residual(&self, g: &CoefficientVector<T>, solution: &CoefficientVector<T>) -> Result<T> {
        let af = self.op.apply(solution)?;
        let diff = af.sub(g);
        Ok(self
            .images
            .iter()
            .map(|img| dense_sparse_dot(diff.coeffs(), img).abs())
            .fold(T::zero(), T::max))
    }

    /// Dense `range × (j−1)` matrix whose columns are the images `Aφ_k`.
    pub fn image_matrix(&self) -> DenseMatrix<T> {
        let rows = self.op.range_len(self.j - 1);
        let mut m = DenseMatrix::zeros(rows, self.j - 1);
        for (k, img) in self.images.iter().enumerate() {
            for &(r, v) in img {
                m[(r, k)] = v;
            }
        }
        m
    }

    /// `‖R_j‖ = 1 / σ_min` of the image matrix.
    pub fn operator_norm(&self) -> Result<T> {
        let sv = singular_values(&self.image_matrix());
        let smallest = *sv.last().expect("j >= 2 gives at least one column");
        if smallest == T::zero() {
            return Err(Error::Singular {
                j: self.j,
                detail: "zero singular value".into(),
            });
        }
        Ok(T::one() / smallest)
    }
}

pub fn galerkin_solve<T: Scalar>(
    sys: &GalerkinSystem<'_, T>,
    g: &CoefficientVector<T>,
) -> Result<CoefficientVector<T>> {
    sys.solve(g)
}

pub fn operator_norm_rj<T: Scalar>(sys: &GalerkinSystem<'_, T>) -> Result<T> {
    sys.operator_norm()
}

/// `(j, ‖f^{(j)} − f₀‖_0)` with noiseless data `g = A f₀`.
pub fn galerkin_error_curve<T: Scalar>(
    op: &ForwardOperator<T>,
    f0: &CoefficientVector<T>,
    levels: &[usize],
) -> Result<Vec<(usize, T)>> {
    let g = op.apply(f0)?;
    levels
        .iter()
        .map(|&j| {
            let sys = GalerkinSystem::new(op, j)?;
            let c = sys.solve(&g)?;
            Ok((j, c.sub(f0).l2()))
        })
        .collect()
}

/// Galerkin inversion for a pair `A = A₀ + Φ` sharing an inverse: the
/// range of `Φ` (the boundary slots) is masked out of the data, then the
/// `A₀` normal equations are solved.
pub fn modified_galerkin_solve<T: Scalar>(
    op_a: &ForwardOperator<T>,
    op_a0: &ForwardOperator<T>,
    j: usize,
    g: &CoefficientVector<T>,
) -> Result<CoefficientVector<T>> {
    let sys = GalerkinSystem::new(op_a0, j)?;
    modified_galerkin_solve_with(&sys, op_a, g)
}

/// As [`modified_galerkin_solve`], reusing a factorized `A₀` system.
pub fn modified_galerkin_solve_with<T: Scalar>(
    sys_a0: &GalerkinSystem<'_, T>,
    op_a: &ForwardOperator<T>,
    g: &CoefficientVector<T>,
) -> Result<CoefficientVector<T>> {
    for (k, img0) in sys_a0.images().iter().enumerate() {
        let cleaned: Vec<(usize, T)> = op_a
            .image(k + 1)?
            .into_iter()
            .filter(|(r, _)| !op_a.is_boundary_slot(*r))
            .collect();
        if cleaned != *img0 {
            return Err(Error::Unsupported(format!(
                "{} and {} do not differ by a boundary-slot operator at basis vector {}",
                op_a.label(),
                sys_a0.operator().label(),
                k + 1
            )));
        }
    }
    let masked: Vec<T> = g
        .coeffs()
        .iter()
        .enumerate()
        .map(|(r, &x)| if op_a.is_boundary_slot(r) { T::zero() } else { x })
        .collect();
    sys_a0.solve(&CoefficientVector::new(masked)?)
}

const RESIDUAL_BLOCK: usize = 64;

/// `(j, E‖f^{(j)} − f‖_0)` for `f` drawn from a Gaussian prior and noiseless
/// data `A f`, estimated from `n_draws` draws.
pub fn prior_galerkin_residual_curve<T: Scalar>(
    prior: &GaussianPrior<T>,
    op: &ForwardOperator<T>,
    levels: &[usize],
    n_draws: usize,
    seed: u64,
) -> Result<Vec<(usize, T)>> {
    if n_draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let systems: Vec<GalerkinSystem<'_, T>> = levels
        .iter()
        .map(|&j| GalerkinSystem::new(op, j))
        .collect::<Result<_>>()?;
    let blocks = n_draws.div_ceil(RESIDUAL_BLOCK);
    let sums: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, &[b as u64]);
            let mut acc = vec![T::zero(); systems.len()];
            for _ in 0..RESIDUAL_BLOCK.min(n_draws - b * RESIDUAL_BLOCK) {
                let f = prior.sample(&mut rng);
                let g = op.apply(&f)?;
                for (slot, sys) in acc.iter_mut().zip(&systems) {
                    *slot += sys.solve(&g)?.sub(&f).l2();
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let nf = T::of_usize(n_draws);
    Ok(levels
        .iter()
        .enumerate()
        .map(|(i, &j)| (j, sums.iter().fold(T::zero(), |a, s| a + s[i]) / nf))
        .collect())
}
