//! Reference implementations written directly from the defining formulas.
//! They share no numerical code with the library beyond the `Matrix` type.

#![allow(dead_code)]

use spatial_bss::{LocationSet, Matrix};

pub fn distance(locs: &LocationSet, i: usize, j: usize) -> f64 {
    locs.site(i)
        .iter()
        .zip(locs.site(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `c_h = d_(⌈hP/k⌉)` for `h < k`, `c_0 = 0`, `c_k = ∞`; valid when all
/// pair distances are distinct.
pub fn ring_boundaries(locs: &LocationSet, k: usize) -> Vec<f64> {
    let n = locs.len();
    let mut d = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            d.push(distance(locs, i, j));
        }
    }
    d.sort_by(f64::total_cmp);
    let total = d.len();
    let mut c = vec![0.0];
    for h in 1..k {
        c.push(d[(h * total).div_ceil(k) - 1]);
    }
    c.push(f64::INFINITY);
    c
}

fn centred(x: &Matrix) -> Vec<Vec<f64>> {
    let (n, p) = (x.rows(), x.cols());
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for a in 0..p {
            mean[a] += x[(i, a)] / n as f64;
        }
    }
    (0..n).map(|i| (0..p).map(|a| x[(i, a)] - mean[a]).collect()).collect()
}

/// `n⁻¹ Σ_i Σ_j 1(c_lo < ‖s_i − s_j‖ ≤ c_hi) x̃_i x̃_jᵀ`, literally.
pub fn local_cov(locs: &LocationSet, x: &Matrix, c_lo: f64, c_hi: f64) -> Vec<Vec<f64>> {
    let xc = centred(x);
    let (n, p) = (x.rows(), x.cols());
    let mut m = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            for i in 0..n {
                for j in 0..n {
                    let d = distance(locs, i, j);
                    if c_lo < d && d <= c_hi {
                        m[a][b] += xc[i][a] * xc[j][b];
                    }
                }
            }
            m[a][b] /= n as f64;
        }
    }
    m
}

pub fn covariance(x: &Matrix) -> Vec<Vec<f64>> {
    let xc = centred(x);
    let (n, p) = (x.rows(), x.cols());
    let mut s = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            for row in &xc {
                s[a][b] += row[a] * row[b];
            }
            s[a][b] /= n as f64;
        }
    }
    s
}

pub fn mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = a.len();
    let q = b[0].len();
    (0..p)
        .map(|i| (0..q).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Gauss–Jordan inverse with full pivoting.
pub fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != col {
                let f = m[r][col];
                let pivot_row = m[col].clone();
                for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[p..].to_vec()).collect()
}

/// `A^{−1/2}` of a symmetric positive definite matrix by the Denman–Beavers
/// iteration.
pub fn inv_sqrt(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = a.len();
    let mut y = a.to_vec();
    let mut z: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..100 {
        let yi = inverse(&y);
        let zi = inverse(&z);
        let y_next: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| 0.5 * (y[i][j] + zi[i][j])).collect())
            .collect();
        let z_next: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| 0.5 * (z[i][j] + yi[i][j])).collect())
            .collect();
        let change = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| (z_next[i][j] - z[i][j]).abs())
            .fold(0.0, f64::max);
        y = y_next;
        z = z_next;
        if change < 1e-15 {
            break;
        }
    }
    // symmetrise away rounding
    (0..p)
        .map(|i| (0..p).map(|j| 0.5 * (z[i][j] + z[j][i])).collect())
        .collect()
}

/// Brute-force `M̂(f_h)` for every ring and the pooled `Ŵ`.
pub fn pooled(locs: &LocationSet, x: &Matrix, boundaries: &[f64]) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let p = x.cols();
    let w_inv = inv_sqrt(&covariance(x));
    let k = boundaries.len() - 1;
    let mut m_hats = Vec::new();
    let mut w = vec![vec![0.0; p]; p];
    for h in 0..k {
        let m = local_cov(locs, x, boundaries[h], boundaries[h + 1]);
        let m_hat = mul(&mul(&w_inv, &m), &w_inv);
        let sq = mul(&m_hat, &transpose(&m_hat));
        for a in 0..p {
            for b in 0..p {
                w[a][b] += sq[a][b] / k as f64;
            }
        }
        m_hats.push(m_hat);
    }
    (m_hats, w)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &Matrix) -> f64 {
    let mut max = 0.0_f64;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            max = max.max((v - b[(i, j)]).abs());
        }
    }
    max
}

/// Eigenvalues of a symmetric 3×3 matrix, descending, by bisection on
/// `det(λI − A)` between the critical points of the cubic.
pub fn eigenvalues_3x3(a: &Matrix) -> [f64; 3] {
    let tr = a[(0, 0)] + a[(1, 1)] + a[(2, 2)];
    let minors = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]
        + a[(0, 0)] * a[(2, 2)] - a[(0, 2)] * a[(2, 0)]
        + a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)];
    let det = a[(0, 0)] * (a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)])
        - a[(0, 1)] * (a[(1, 0)] * a[(2, 2)] - a[(1, 2)] * a[(2, 0)])
        + a[(0, 2)] * (a[(1, 0)] * a[(2, 1)] - a[(1, 1)] * a[(2, 0)]);
    let f = |l: f64| ((l - tr) * l + minors) * l - det;
    // f'(λ) = 3λ² − 2tr·λ + minors
    let disc = (tr * tr - 3.0 * minors).max(0.0).sqrt();
    let (r1, r2) = ((tr - disc) / 3.0, (tr + disc) / 3.0);
    let bound = (0..3)
        .map(|i| (0..3).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let bisect = |mut lo: f64, mut hi: f64| {
        let increasing = f(hi) >= f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (f(mid) >= 0.0) == increasing {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut l = [bisect(-bound, r1), bisect(r1, r2), bisect(r2, bound)];
    l.sort_by(|x, y| y.total_cmp(x));
    l
}
