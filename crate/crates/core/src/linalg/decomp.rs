use super::eigen::{sym_eigen, EigenPair};
use super::matrix::{dot, Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Smallest admissible eigenvalue, relative to `max(1, λmax)`, for SPD input.
pub const PD_THRESHOLD: f64 = 1e-12;

/// Diagonal loadings tried in order when a factorisation fails.
pub const JITTER_LADDER: [f64; 4] = [1e-12, 1e-10, 1e-8, 1e-6];

fn checked_spd_eigen(a: &SymMatrix) -> Result<EigenPair> {
    let e = sym_eigen(a)?;
    let largest = e.values[0];
    let smallest = *e.values.last().expect("order >= 1");
    let threshold = PD_THRESHOLD * largest.max(1.0);
    if smallest <= threshold {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: smallest,
            threshold,
        });
    }
    Ok(e)
}

/// Symmetric square root `A^{1/2}` of a positive definite matrix.
pub fn spd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(checked_spd_eigen(a)?.reconstruct_with(f64::sqrt))
}

/// Symmetric inverse square root `A^{-1/2}` of a positive definite matrix.
pub fn spd_inv_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(checked_spd_eigen(a)?.reconstruct_with(|l| 1.0 / l.sqrt()))
}

/// Both `A^{1/2}` and `A^{-1/2}` from one eigendecomposition.
pub fn spd_sqrt_pair(a: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let e = checked_spd_eigen(a)?;
    Ok((e.reconstruct_with(f64::sqrt), e.reconstruct_with(|l| 1.0 / l.sqrt())))
}

/// Sweep limit for [`column_svd`].
pub const SVD_MAX_SWEEPS: usize = 60;

/// Singular values and right singular vectors of `A = U·diag(σ)·Vᵀ`.
#[derive(Clone, Debug)]
pub struct ColumnSvd {
    /// Descending.
    pub values: Vec<f64>,
    /// `V`, one column per singular value.
    pub vectors: Matrix,
}

impl ColumnSvd {
    /// `V·diag(f(σ))·Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let v = &self.vectors;
        let scaled: Vec<f64> = self.values.iter().map(|&s| f(s)).collect();
        let p = v.rows();
        let m = Matrix::from_fn(p, p, |a, b| (0..p).map(|k| v[(a, k)] * scaled[k] * v[(b, k)]).sum());
        SymMatrix::symmetrize(m).expect("square")
    }
}

/// One-sided Jacobi SVD of a matrix with at least as many rows as columns.
/// Small singular values keep their relative accuracy, which is lost when
/// `AᵀA` is formed and eigendecomposed.
pub fn column_svd(a: &Matrix) -> Result<ColumnSvd> {
    let (n, p) = (a.rows(), a.cols());
    if n < p {
        return Err(Error::DimensionMismatch(format!(
            "column SVD needs rows >= columns, got {n}x{p}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput("SVD input has non-finite entries".into()));
    }
    // columns of A as rows, so rotations touch contiguous memory
    let mut cols = a.transpose();
    let mut v = Matrix::identity(p);
    let tol = (n as f64).sqrt() * f64::EPSILON;
    let mut sweeps = 0;
    loop {
        let mut worst = 0.0_f64;
        for i in 0..p {
            for j in i + 1..p {
                let (ci, cj) = (cols.row(i), cols.row(j));
                let alpha = dot(ci, ci);
                let beta = dot(cj, cj);
                let gamma = dot(ci, cj);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let off = gamma.abs() / (alpha * beta).sqrt();
                worst = worst.max(off);
                if off <= tol {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let (x, y) = (cols[(i, k)], cols[(j, k)]);
                    cols[(i, k)] = c * x - s * y;
                    cols[(j, k)] = s * x + c * y;
                }
                for k in 0..p {
                    let (x, y) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * x - s * y;
                    v[(k, j)] = s * x + c * y;
                }
            }
        }
        if worst <= tol {
            break;
        }
        sweeps += 1;
        if sweeps >= SVD_MAX_SWEEPS {
            return Err(Error::Convergence {
                iterations: sweeps,
                residual: worst,
            });
        }
    }
    let norms: Vec<f64> = (0..p).map(|j| dot(cols.row(j), cols.row(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    Ok(ColumnSvd {
        values: order.iter().map(|&j| norms[j]).collect(),
        vectors: v.select_cols(&order),
    })
}

/// `Σ^{1/2}` and `Σ^{−1/2}` for `Σ = n⁻¹AᵀA`, taken from the SVD of `A`.
/// Errors if an eigenvalue of `Σ` falls below [`PD_THRESHOLD`].
pub fn gram_sqrt_pair(a: &Matrix) -> Result<(SymMatrix, SymMatrix)> {
    let svd = column_svd(a)?;
    let root_n = (a.rows() as f64).sqrt();
    let largest = (svd.values[0] / root_n).powi(2);
    let smallest = (svd.values.last().expect("p >= 1") / root_n).powi(2);
    let threshold = PD_THRESHOLD * largest.max(1.0);
    if smallest <= threshold {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: smallest,
            threshold,
        });
    }
    Ok((
        svd.reconstruct_with(|s| s / root_n),
        svd.reconstruct_with(|s| root_n / s),
    ))
}

#[derive(Clone, Debug)]
pub struct Cholesky {
    /// Lower-triangular `L` with `L·Lᵀ = A + jitter·I`.
    pub factor: Matrix,
    pub jitter: f64,
}

/// Cholesky factorisation. With `allow_jitter`, a failed attempt is retried
/// with each loading of [`JITTER_LADDER`] added to the diagonal.
pub fn cholesky(a: &SymMatrix, allow_jitter: bool) -> Result<Cholesky> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("cholesky input has non-finite entries".into()));
    }
    let ladder: &[f64] = if allow_jitter { &JITTER_LADDER } else { &[] };
    let mut last_pivot = match factor_lower(a, 0.0) {
        Ok(l) => return Ok(Cholesky { factor: l, jitter: 0.0 }),
        Err(pivot) => pivot,
    };
    for &jitter in ladder {
        match factor_lower(a, jitter) {
            Ok(l) => return Ok(Cholesky { factor: l, jitter }),
            Err(pivot) => last_pivot = pivot,
        }
    }
    Err(Error::NotPositiveDefinite {
        eigenvalue: last_pivot,
        threshold: 0.0,
    })
}

/// Row-oriented Cholesky–Crout; returns the failing pivot on error.
fn factor_lower(a: &SymMatrix, jitter: f64) -> std::result::Result<Matrix, f64> {
    let n = a.order();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (ri, rj) = if i == j {
                let r = l.row(i);
                (r, r)
            } else {
                let s = l.as_slice();
                (&s[i * n..i * n + j], &s[j * n..j * n + j])
            };
            let s = dot(&ri[..j], &rj[..j]);
            if i == j {
                let pivot = a[(i, i)] + jitter - s;
                if !(pivot > 0.0) || !pivot.is_finite() {
                    return Err(pivot);
                }
                l[(i, i)] = pivot.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// LU factorisation with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if lu[(i, k)].abs() > lu[(piv, k)].abs() {
                    piv = i;
                }
            }
            let pv = lu[(piv, k)];
            if pv.abs() <= f64::EPSILON * scale * n as f64 || pv == 0.0 || !pv.is_finite() {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / pv;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    /// Solves `A·X = B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n);
        let mut x = Matrix::from_fn(n, b.cols(), |i, j| b[(self.perm[i], j)]);
        for c in 0..b.cols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        x
    }
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    Ok(Lu::new(a)?.solve(&Matrix::identity(a.rows())))
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    let gram = if a.rows() >= a.cols() {
        a.t_matmul(a)
    } else {
        a.matmul_t(a)
    };
    let e = sym_eigen(&SymMatrix::symmetrize(gram)?)?;
    Ok(e.values[0].max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn column_svd_matches_gram_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let p = rng.random_range(1..6);
            let n = rng.random_range(p..20);
            let a = Matrix::from_fn(n, p, |_, _| rng.random_range(-3.0..3.0));
            let svd = column_svd(&a).unwrap();
            let e = sym_eigen(&SymMatrix::symmetrize(a.t_matmul(&a)).unwrap()).unwrap();
            for (s, l) in svd.values.iter().zip(&e.values) {
                assert!((s * s - l).abs() <= 1e-10 * e.values[0].max(1.0));
            }
            assert!(svd.vectors.t_matmul(&svd.vectors).max_abs_diff(&Matrix::identity(p)) < 1e-12);
            assert!(svd.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn gram_pair_whitens_ill_conditioned_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 200;
        // column scales spanning five orders of magnitude, plus mixing
        let z = Matrix::from_fn(n, 4, |_, j| rng.random_range(-1.0..1.0) * 10f64.powi(-(j as i32) * 5 / 3));
        let mix = Matrix::from_rows(&[
            [1.0, 0.5, 0.2, 0.1],
            [0.0, 1.0, 0.3, 0.2],
            [0.0, 0.0, 1.0, 0.4],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let x = z.matmul(&mix);
        let (sq, inv) = gram_sqrt_pair(&x).unwrap();
        let y = x.matmul(inv.as_matrix());
        let yy = y.t_matmul(&y).scale(1.0 / n as f64);
        assert!(yy.max_abs_diff(&Matrix::identity(4)) < 1e-11);
        let sigma = x.t_matmul(&x).scale(1.0 / n as f64);
        assert!(sq.matmul(&sq).max_abs_diff(&sigma) < 1e-14 * sigma.max_abs().max(1.0));
    }

    #[test]
    fn gram_pair_rejects_collinear_columns() {
        let x = Matrix::from_fn(10, 2, |i, _| i as f64);
        assert!(matches!(gram_sqrt_pair(&x), Err(Error::NotPositiveDefinite { .. })));
        assert!(column_svd(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let i3 = SymMatrix::identity(3);
        assert_eq!(spd_sqrt(&i3).unwrap(), i3);
        assert_eq!(spd_inv_sqrt(&i3).unwrap(), i3);
        let d = SymMatrix::from_diag(&[4.0, 9.0]);
        let r = spd_sqrt(&d).unwrap();
        assert!(r.max_abs_diff(&Matrix::from_diag(&[2.0, 3.0])) < 1e-15);
        let r = spd_inv_sqrt(&d).unwrap();
        assert!(r.max_abs_diff(&Matrix::from_diag(&[0.5, 1.0 / 3.0])) < 1e-15);
    }

    #[test]
    fn sqrt_of_integer_gram() {
        let b = Matrix::from_rows(&[[2.0, -1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]]).unwrap();
        let a = SymMatrix::symmetrize(b.t_matmul(&b)).unwrap();
        let r = spd_sqrt(&a).unwrap();
        assert!(r.matmul(&r).max_abs_diff(&a) <= 1e-9 * a.max_abs());
        let ri = spd_inv_sqrt(&a).unwrap();
        assert!(ri.matmul(&a).matmul(&ri).max_abs_diff(&Matrix::identity(3)) <= 1e-9);
    }

    #[test]
    fn singular_reports_eigenvalue() {
        let a = SymMatrix::new(Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap()).unwrap();
        match spd_sqrt(&a) {
            Err(Error::NotPositiveDefinite { eigenvalue, .. }) => assert!(eigenvalue.abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cholesky_examples() {
        let c = cholesky(&SymMatrix::identity(3), false).unwrap();
        assert_eq!(c.factor, Matrix::identity(3));
        assert_eq!(c.jitter, 0.0);

        let a = SymMatrix::new(Matrix::from_rows(&[[4.0, 2.0], [2.0, 5.0]]).unwrap()).unwrap();
        let c = cholesky(&a, false).unwrap();
        assert_eq!(c.factor, Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]).unwrap());

        let a = SymMatrix::new(Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap()).unwrap();
        assert!(cholesky(&a, false).is_err());
        let c = cholesky(&a, true).unwrap();
        assert!(c.jitter > 0.0 && c.jitter <= 1e-6);
        let recon = c.factor.matmul_t(&c.factor);
        assert!(recon.max_abs_diff(&a) <= c.jitter + 1e-9);
    }

    #[test]
    fn cholesky_gives_up_on_indefinite() {
        let a = SymMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(cholesky(&a, true), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn inverse_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Matrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let ai = inverse(&a).unwrap();
        assert!(a.matmul(&ai).max_abs_diff(&Matrix::identity(5)) < 1e-10);
        assert!(inverse(&Matrix::zeros(2, 2)).is_err());

        let m = Matrix::from_rows(&[[3.0, 0.0], [0.0, -4.0], [0.0, 0.0]]).unwrap();
        assert!((spectral_norm(&m).unwrap() - 4.0).abs() < 1e-12);
    }
}
