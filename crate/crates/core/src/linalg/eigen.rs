//! Symmetric eigendecomposition.
//!
//! Orders up to [`JACOBI_MAX_ORDER`] use cyclic Jacobi rotations; larger
//! matrices are reduced to tridiagonal form by Householder reflections and
//! diagonalised with the implicit-shift QL iteration.

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

pub const JACOBI_MAX_ORDER: usize = 64;

const MAX_SWEEPS: usize = 100;
const MAX_QL_ITERATIONS: usize = 60;

/// Relative gap below which adjacent eigenvalues count as a cluster.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
///
/// Each eigenvector column has its largest-magnitude entry non-negative
/// (first such entry on ties), so the decomposition is unique whenever the
/// eigenvalues are simple.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    /// Some adjacent eigenvalues are closer than [`DEGENERACY_GAP`] (scaled by
    /// `max(1, |λ|max)`); eigenvectors inside such a cluster are not unique.
    pub degenerate: bool,
}

impl EigenPair {
    /// `U diag(f(λ)) Uᵀ`, exactly symmetric.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.values.len();
        let u = &self.vectors;
        let mut out = Matrix::zeros(p, p);
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        for i in 0..p {
            for j in 0..=i {
                let mut s = 0.0;
                for (k, &w) in fl.iter().enumerate() {
                    s += u[(i, k)] * w * u[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        SymMatrix::new(out).expect("mirrored construction is symmetric")
    }
}

/// Eigendecomposition of a symmetric matrix.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenPair> {
    if !a.is_finite() {
        return Err(Error::InvalidInput(
            "eigendecomposition input has non-finite entries".into(),
        ));
    }
    let (values, vectors) = if a.order() <= JACOBI_MAX_ORDER {
        jacobi(a)?
    } else {
        tridiagonal_ql(a)?
    };
    Ok(finalize(values, vectors))
}

fn finalize(values: Vec<f64>, vectors: Matrix) -> EigenPair {
    let p = values.len();
    let mut order: Vec<usize> = (0..p).collect();
    // Stable sort keeps the solver's order for exact ties.
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut vectors = vectors.select_cols(&order);

    for j in 0..p {
        let mut lead = 0;
        for i in 1..p {
            if vectors[(i, j)].abs() > vectors[(lead, j)].abs() {
                lead = i;
            }
        }
        if vectors[(lead, j)] < 0.0 {
            for i in 0..p {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }

    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let degenerate = values
        .windows(2)
        .any(|w| w[0] - w[1] < DEGENERACY_GAP * scale);
    EigenPair {
        values,
        vectors,
        degenerate,
    }
}

fn jacobi(a: &SymMatrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.order();
    let mut a = a.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let mut d = a.diag();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    #[inline]
    fn rotate(m: &mut Matrix, s: f64, tau: f64, (i, j): (usize, usize), (k, l): (usize, usize)) {
        let g = m[(i, j)];
        let h = m[(k, l)];
        m[(i, j)] = g - s * (h + g * tau);
        m[(k, l)] = h + s * (g - h * tau);
    }

    let mut residual = 0.0;
    for sweep in 1..=MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].abs();
            }
        }
        residual = off;
        if off == 0.0 {
            return Ok((d, v));
        }
        let threshold = if sweep < 4 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let g = 100.0 * apq.abs();
                if sweep > 4 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a[(p, q)] = 0.0;
                } else if apq.abs() > threshold {
                    let h = d[q] - d[p];
                    let t = if h.abs() + g == h.abs() {
                        apq / h
                    } else {
                        let theta = 0.5 * h / apq;
                        let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                        if theta < 0.0 {
                            -t
                        } else {
                            t
                        }
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let h = t * apq;
                    z[p] -= h;
                    z[q] += h;
                    d[p] -= h;
                    d[q] += h;
                    a[(p, q)] = 0.0;
                    for j in 0..p {
                        rotate(&mut a, s, tau, (j, p), (j, q));
                    }
                    for j in p + 1..q {
                        rotate(&mut a, s, tau, (p, j), (j, q));
                    }
                    for j in q + 1..n {
                        rotate(&mut a, s, tau, (p, j), (q, j));
                    }
                    for j in 0..n {
                        rotate(&mut v, s, tau, (j, p), (j, q));
                    }
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
    }
    Err(Error::Convergence {
        iterations: MAX_SWEEPS,
        residual,
    })
}

/// Householder tridiagonalisation followed by implicit QL.
fn tridiagonal_ql(a: &SymMatrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.order();
    let mut v = a.as_matrix().clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiagonalize(&mut v, &mut d, &mut e);
    // QL rotates columns of V; work on the transpose so each rotation walks
    // contiguous rows.
    let mut vt = v.transpose();
    implicit_ql(&mut d, &mut e, &mut vt)?;
    Ok((d, vt.transpose()))
}

fn householder_tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[(j, i)] = f;
                let mut g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// `vt` holds eigenvectors as rows.
fn implicit_ql(d: &mut [f64], e: &mut [f64], vt: &mut Matrix) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::Convergence {
                        iterations: MAX_QL_ITERATIONS,
                        residual: e[l].abs(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let cols = vt.cols();
                    let (lo, hi) = vt.as_mut_slice().split_at_mut((i + 1) * cols);
                    let row_i = &mut lo[i * cols..];
                    let row_i1 = &mut hi[..cols];
                    for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(p: usize, rng: &mut impl Rng) -> SymMatrix {
        let m = Matrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrize(m).unwrap()
    }

    fn check(a: &SymMatrix, e: &EigenPair) {
        let p = a.order();
        let recon = e.reconstruct_with(|l| l);
        let tol = 1e-9 * a.max_abs().max(1.0);
        assert!(recon.max_abs_diff(a) <= tol, "reconstruction {}", recon.max_abs_diff(a));
        let utu = e.vectors.t_matmul(&e.vectors);
        assert!(utu.max_abs_diff(&Matrix::identity(p)) <= 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn identity_and_diagonal() {
        let e = sym_eigen(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        assert!(e.degenerate);
        let e = sym_eigen(&SymMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_eq!(
            e.vectors,
            Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()
        );
        let e = sym_eigen(&SymMatrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(e.vectors, Matrix::identity(2));
        assert!(!e.degenerate);
    }

    #[test]
    fn sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sym(5, &mut rng);
        let e = sym_eigen(&a).unwrap();
        for j in 0..5 {
            let col = e.vectors.col(j);
            let lead = col
                .iter()
                .copied()
                .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(lead >= 0.0);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let m = Matrix::from_rows(&[[1.0, f64::NAN], [f64::NAN, 1.0]]).unwrap();
        let a = SymMatrix::symmetrize(m).unwrap();
        assert!(matches!(sym_eigen(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn jacobi_random_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in 1..=20 {
            let a = random_sym(p, &mut rng);
            check(&a, &sym_eigen(&a).unwrap());
        }
    }

    #[test]
    fn ql_path_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [2, 3, 7, 30, 65, 120] {
            let a = random_sym(p, &mut rng);
            let (dj, vj) = jacobi(&a).unwrap();
            let (dq, vq) = tridiagonal_ql(&a).unwrap();
            let ej = finalize(dj, vj);
            let eq = finalize(dq, vq);
            check(&a, &eq);
            for (x, y) in ej.values.iter().zip(&eq.values) {
                assert!((x - y).abs() < 1e-11, "p={p}: {x} vs {y}");
            }
            assert!(ej.vectors.max_abs_diff(&eq.vectors) < 1e-8);
        }
    }

    #[test]
    fn large_order_uses_ql() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_sym(100, &mut rng);
        check(&a, &sym_eigen(&a).unwrap());
    }

    #[test]
    fn deterministic_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_sym(8, &mut rng);
        let e1 = sym_eigen(&a).unwrap();
        let e2 = sym_eigen(&a).unwrap();
        assert_eq!(e1.values, e2.values);
        assert_eq!(e1.vectors, e2.vectors);
    }
}
