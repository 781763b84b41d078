//! Performance index, eigengaps and block-recovery diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Lu, Matrix};

fn check_square_pair(a: &Matrix, b: &Matrix, what: &str) -> Result<usize> {
    if !a.is_square() || a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} against {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(a.rows())
}

/// Performance index `D(Ω, Ω̂)` of `d = Ω⁻¹Ω̂`:
/// `(2p(√p−1))⁻¹ Σ_j (‖col_j‖₂/max|col_j| + ‖row_j‖₂/max|row_j| − 2)`.
///
/// Zero exactly when `Ω̂ = ΩPS` for a permutation `P` and sign matrix `S`,
/// one for the most even spread. Defined as 0 for `p = 1`.
pub fn d_index(omega: &Matrix, omega_hat: &Matrix) -> Result<f64> {
    let p = check_square_pair(omega, omega_hat, "d_index")?;
    if !omega_hat.is_finite() {
        return Err(Error::InvalidInput("estimated mixing matrix is not finite".into()));
    }
    let d = Lu::new(omega)
        .map_err(|_| Error::Singular("true mixing matrix is singular".into()))?
        .solve(omega_hat);
    if p == 1 {
        if d[(0, 0)] == 0.0 {
            return Err(Error::DegenerateInput("Ω⁻¹Ω̂ is zero".into()));
        }
        return Ok(0.0);
    }
    let ratio = |v: &[f64], what: &str, j: usize| -> Result<f64> {
        let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if max == 0.0 {
            return Err(Error::DegenerateInput(format!(
                "{what} {} of Ω⁻¹Ω̂ is zero",
                j + 1
            )));
        }
        let norm = v.iter().map(|x| (x / max).powi(2)).sum::<f64>().sqrt();
        Ok(norm)
    };
    let mut total = 0.0;
    for j in 0..p {
        total += ratio(&d.col(j), "column", j)? + ratio(d.row(j), "row", j)? - 2.0;
    }
    let pf = p as f64;
    Ok(total / (2.0 * pf * (pf.sqrt() - 1.0)))
}

/// Adjacent eigengaps of a descending spectrum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    /// `Δ_i = λ̂_{i−1} − λ̂_i`, `i = 2..=p`.
    pub gaps: Vec<f64>,
    /// Minimum pairwise difference; `None` for a single eigenvalue.
    pub v_gap: Option<f64>,
}

impl GapReport {
    /// Index pairs `(i, i+1)` (1-based) whose gap is at most `tol`.
    pub fn ties(&self, tol: f64) -> Vec<(usize, usize)> {
        self.gaps
            .iter()
            .enumerate()
            .filter(|(_, &g)| g <= tol)
            .map(|(i, _)| (i + 1, i + 2))
            .collect()
    }
}

/// Ordering slack when checking that eigenvalues are sorted.
const SORT_SLACK: f64 = 1e-10;

pub fn gap_report(lambda_hat: &[f64]) -> Result<GapReport> {
    if lambda_hat.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidInput("eigenvalues must be finite".into()));
    }
    let gaps: Vec<f64> = lambda_hat.windows(2).map(|w| w[0] - w[1]).collect();
    if let Some(i) = gaps.iter().position(|&g| g < -SORT_SLACK) {
        return Err(Error::InvalidInput(format!(
            "eigenvalues are not in descending order at positions {} and {}",
            i + 1,
            i + 2
        )));
    }
    let v_gap = gaps.iter().copied().reduce(f64::min);
    Ok(GapReport { gaps, v_gap })
}

/// Partition of `1..=p` into consecutive blocks `(p_{i−1}, p_i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockStructure {
    cuts: Vec<usize>,
}

impl BlockStructure {
    /// `cuts` must run `0 = p₀ < p₁ < … < p_m = p`.
    pub fn new(cuts: Vec<usize>, p: usize) -> Result<Self> {
        if cuts.len() < 2 || cuts[0] != 0 || *cuts.last().unwrap() != p {
            return Err(Error::InvalidConfig(format!(
                "blocks: cuts must start at 0 and end at p = {p}, got {cuts:?}"
            )));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "blocks: cuts must be strictly increasing, got {cuts:?}"
            )));
        }
        Ok(Self { cuts })
    }

    /// Each index in its own block.
    pub fn singletons(p: usize) -> Result<Self> {
        Self::new((0..=p).collect(), p)
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    pub fn p(&self) -> usize {
        *self.cuts.last().unwrap()
    }

    pub fn m(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.cuts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Half-open index range of block `i` (0-based).
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.cuts[i]..self.cuts[i + 1]
    }
}

/// Cuts after the `m − 1` largest gaps, a starting point for choosing blocks
/// from an eigengap plot. Ties go to the earlier gap.
pub fn suggest_blocks(report: &GapReport, m: usize) -> Result<BlockStructure> {
    let p = report.gaps.len() + 1;
    if m == 0 || m > p {
        return Err(Error::InvalidConfig(format!(
            "blocks: cannot form {m} blocks from {p} eigenvalues"
        )));
    }
    let mut order: Vec<usize> = (0..report.gaps.len()).collect();
    order.sort_by(|&a, &b| report.gaps[b].total_cmp(&report.gaps[a]).then(a.cmp(&b)));
    let mut cuts: Vec<usize> = order[..m - 1].iter().map(|&i| i + 1).collect();
    cuts.push(0);
    cuts.push(p);
    cuts.sort_unstable();
    BlockStructure::new(cuts, p)
}

/// Block norms of `Γ̂_Ω = Ω̂⁻¹Ω`.
#[derive(Clone, Debug, Serialize)]
pub struct GammaDiagnostics {
    pub blocks: BlockStructure,
    /// `‖Γ̂_{Ω,ij}‖₂` for every block pair, `m × m`, row-major.
    pub block_norms: Vec<Vec<f64>>,
    /// `‖Γ̂_{Ω,ii} − I‖₂` per diagonal block.
    pub diag_deviation: Vec<f64>,
}

impl GammaDiagnostics {
    /// Largest off-diagonal block norm (0 for a single block).
    pub fn max_off_diagonal(&self) -> f64 {
        let mut max = 0.0_f64;
        for (i, row) in self.block_norms.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i != j {
                    max = max.max(v);
                }
            }
        }
        max
    }
}

/// Spectral norms of the blocks of `Ω̂⁻¹Ω`.
///
/// The estimate is compared as given; use [`align_columns`] first when the
/// column order and signs of `Ω̂` are arbitrary.
pub fn gamma_diagnostics(
    omega: &Matrix,
    omega_hat: &Matrix,
    blocks: &BlockStructure,
) -> Result<GammaDiagnostics> {
    let p = check_square_pair(omega, omega_hat, "gamma_diagnostics")?;
    if blocks.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "block cuts end at {}, matrices have order {p}",
            blocks.p()
        )));
    }
    let gamma = Lu::new(omega_hat)
        .map_err(|_| Error::Singular("estimated mixing matrix is singular".into()))?
        .solve(omega);
    let m = blocks.m();
    let mut block_norms = vec![vec![0.0; m]; m];
    let mut diag_deviation = vec![0.0; m];
    for i in 0..m {
        let ri = blocks.range(i);
        for j in 0..m {
            let rj = blocks.range(j);
            let b = gamma.block(ri.start, ri.end, rj.start, rj.end);
            block_norms[i][j] = spectral_norm(&b)?;
            if i == j {
                diag_deviation[i] = spectral_norm(&b.sub(&Matrix::identity(ri.len())))?;
            }
        }
    }
    Ok(GammaDiagnostics {
        blocks: blocks.clone(),
        block_norms,
        diag_deviation,
    })
}

/// Reorders and re-signs the columns of `Ω̂` to best match `Ω`.
///
/// Greedy on `|Ω⁻¹Ω̂|` with columns scaled to unit norm: the largest remaining
/// entry `(i, j)` sends estimated column `j` to position `i`, signed so the
/// entry is non-negative. `D` is unchanged by the result.
pub fn align_columns(omega: &Matrix, omega_hat: &Matrix) -> Result<Matrix> {
    let p = check_square_pair(omega, omega_hat, "align_columns")?;
    let d = Lu::new(omega)
        .map_err(|_| Error::Singular("true mixing matrix is singular".into()))?
        .solve(omega_hat);
    let norms: Vec<f64> = (0..p)
        .map(|j| d.col(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut candidates = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let w = if norms[j] > 0.0 { d[(i, j)].abs() / norms[j] } else { 0.0 };
            candidates.push((w, i, j));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut target = vec![usize::MAX; p];
    let mut used = vec![false; p];
    for (_, i, j) in candidates {
        if target[i] == usize::MAX && !used[j] {
            target[i] = j;
            used[j] = true;
        }
    }
    Ok(Matrix::from_fn(p, p, |r, i| {
        let j = target[i];
        let s = if d[(i, j)] < 0.0 { -1.0 } else { 1.0 };
        s * omega_hat[(r, j)]
    }))
}

/// `|corr(a[:, i], b[:, j])|` for every column pair.
pub fn abs_corr_match(scores_a: &Matrix, scores_b: &Matrix) -> Result<Matrix> {
    let n = scores_a.rows();
    if scores_b.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "score sets have {n} and {} rows",
            scores_b.rows()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("correlation needs at least two rows".into()));
    }
    let standardized = |m: &Matrix, which: &'static str| -> Result<Vec<Vec<f64>>> {
        (0..m.cols())
            .map(|j| {
                let col = m.col(j);
                let mean = col.iter().sum::<f64>() / n as f64;
                let centred: Vec<f64> = col.iter().map(|x| x - mean).collect();
                let ss = centred.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(ss > 0.0) || !ss.is_finite() {
                    return Err(Error::UndefinedCorrelation { which, column: j + 1 });
                }
                Ok(centred.into_iter().map(|x| x / ss).collect())
            })
            .collect()
    };
    let a = standardized(scores_a, "a")?;
    let b = standardized(scores_b, "b")?;
    Ok(Matrix::from_fn(a.len(), b.len(), |i, j| {
        crate::linalg::dot(&a[i], &b[j]).abs().min(1.0)
    }))
}

/// Traces of `Ω̂ᵀΩ̂` and of its leading diagonal blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSummary {
    /// `tr(Ω̂ᵀΩ̂)`, equal to the total variance `tr(Σ̂)`.
    pub total: f64,
    /// Trace of each diagonal block of `Ω̂ᵀΩ̂`.
    pub blocks: Vec<f64>,
}

impl TraceSummary {
    /// Share of the total carried by the first block.
    pub fn leading_share(&self) -> f64 {
        self.blocks[0] / self.total
    }
}

pub fn trace_summary(omega_hat: &Matrix, blocks: &BlockStructure) -> Result<TraceSummary> {
    if !omega_hat.is_square() || omega_hat.rows() != blocks.p() {
        return Err(Error::DimensionMismatch(format!(
            "block cuts end at {}, matrix is {}x{}",
            blocks.p(),
            omega_hat.rows(),
            omega_hat.cols()
        )));
    }
    // diagonal of Ω̂ᵀΩ̂ holds the squared column norms
    let col_sq: Vec<f64> = (0..omega_hat.cols())
        .map(|j| omega_hat.col(j).iter().map(|x| x * x).sum())
        .collect();
    let blocks = (0..blocks.m())
        .map(|i| blocks.range(i).map(|j| col_sq[j]).sum())
        .collect();
    Ok(TraceSummary {
        total: col_sq.iter().sum(),
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rotation(theta: f64) -> Matrix {
        let (s, c) = theta.sin_cos();
        Matrix::from_rows(&[[c, -s], [s, c]]).unwrap()
    }

    #[test]
    fn d_index_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(d_index(&i2, &i2).unwrap(), 0.0);
        let r = rotation(std::f64::consts::FRAC_PI_4);
        assert!((d_index(&i2, &r).unwrap() - 1.0).abs() < 1e-12);
        let swapped = Matrix::from_rows(&[[0.0, -3.0], [2.0, 0.0]]).unwrap();
        assert_eq!(d_index(&i2, &swapped).unwrap(), 0.0);
        assert_eq!(d_index(&Matrix::identity(1), &Matrix::from_rows(&[[-4.0]]).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn d_index_errors() {
        let i2 = Matrix::identity(2);
        let singular = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(d_index(&singular, &i2), Err(Error::Singular(_))));
        let zero_col = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(d_index(&i2, &zero_col), Err(Error::DegenerateInput(_))));
        assert!(d_index(&i2, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn gap_examples() {
        let r = gap_report(&[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.gaps, vec![1.0, 1.0]);
        assert_eq!(r.v_gap, Some(1.0));
        let r = gap_report(&[5.0, 5.0, 1.0]).unwrap();
        assert_eq!(r.v_gap, Some(0.0));
        assert_eq!(r.ties(0.0), vec![(1, 2)]);
        let r = gap_report(&[2.0]).unwrap();
        assert!(r.gaps.is_empty() && r.v_gap.is_none());
        assert!(gap_report(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn table_one_gaps() {
        let r = gap_report(&[1136.50, 877.59, 444.21, 161.34, 126.16, 81.13]).unwrap();
        let want = [258.91, 433.38, 282.87, 35.18, 45.03];
        for (g, w) in r.gaps.iter().zip(want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
        assert!((r.v_gap.unwrap() - 35.18).abs() < 1e-10);
        let b = suggest_blocks(&r, 2).unwrap();
        assert_eq!(b.cuts(), &[0, 2, 6]);
    }

    #[test]
    fn block_structure_validation() {
        assert_eq!(BlockStructure::new(vec![0, 12, 30], 30).unwrap().sizes(), vec![12, 18]);
        assert!(BlockStructure::new(vec![0, 12, 29], 30).is_err());
        assert!(BlockStructure::new(vec![0, 5, 5, 30], 30).is_err());
        assert!(BlockStructure::new(vec![1, 30], 30).is_err());
        assert_eq!(BlockStructure::singletons(3).unwrap().m(), 3);
    }

    #[test]
    fn gamma_diagnostics_identity_and_block_diagonal() {
        let omega = Matrix::from_rows(&[[2.0, 1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 3.0]]).unwrap();
        let blocks = BlockStructure::new(vec![0, 2, 3], 3).unwrap();
        let g = gamma_diagnostics(&omega, &omega, &blocks).unwrap();
        assert!(g.max_off_diagonal() < 1e-14);
        assert!(g.diag_deviation.iter().all(|&v| v < 1e-14));

        // Ω̂ = Ω·B⁻¹ with B block-diagonal gives Γ̂_Ω = B
        let b = Matrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -2.0]]).unwrap();
        let omega_hat = omega.matmul(&crate::linalg::inverse(&b).unwrap());
        let g = gamma_diagnostics(&omega, &omega_hat, &blocks).unwrap();
        assert_eq!(g.block_norms[0][1], 0.0);
        assert_eq!(g.block_norms[1][0], 0.0);
        assert!((g.block_norms[1][1] - 2.0).abs() < 1e-14);
        assert!((g.diag_deviation[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn alignment_undoes_permutation_and_sign() {
        let omega = Matrix::from_rows(&[[1.0, 0.5, 0.2], [0.1, 2.0, 0.0], [0.3, 0.0, 1.5]]).unwrap();
        let mixed = Matrix::from_fn(3, 3, |r, c| match c {
            0 => -omega[(r, 2)],
            1 => omega[(r, 0)],
            _ => -omega[(r, 1)],
        });
        let aligned = align_columns(&omega, &mixed).unwrap();
        assert!(aligned.max_abs_diff(&omega) < 1e-12);
    }

    #[test]
    fn correlation_matching() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0], [3.0, 0.0], [4.0, 2.0]]).unwrap();
        let c = abs_corr_match(&a, &a).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12 && (c[(1, 1)] - 1.0).abs() < 1e-12);
        let flipped = Matrix::from_fn(4, 2, |i, j| -a[(i, 1 - j)]);
        let cf = abs_corr_match(&a, &flipped).unwrap();
        assert!((cf[(0, 1)] - c[(0, 0)]).abs() < 1e-15);
        let constant = Matrix::from_rows(&[[1.0], [1.0], [1.0], [1.0]]).unwrap();
        assert!(matches!(
            abs_corr_match(&a, &constant),
            Err(Error::UndefinedCorrelation { which: "b", column: 1 })
        ));
    }

    #[test]
    fn traces() {
        let o = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        let t = trace_summary(&o, &BlockStructure::new(vec![0, 1, 2], 2).unwrap()).unwrap();
        assert_eq!(t.total, 6.0);
        assert_eq!(t.blocks, vec![1.0, 5.0]);
        assert!((t.leading_share() - 1.0 / 6.0).abs() < 1e-15);
    }

    fn invertible(p: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-1.0..1.0f64, p * p).prop_map(move |v| {
            // diagonal dominance keeps the matrix comfortably invertible
            let mut m = Matrix::from_vec(p, p, v).unwrap();
            for i in 0..p {
                m.as_mut_slice()[i * p + i] += p as f64 * if i % 2 == 0 { 1.0 } else { -1.0 };
            }
            m
        })
    }

    fn pair(max_p: usize) -> impl Strategy<Value = (Matrix, Matrix, Vec<usize>, Vec<bool>)> {
        (2..=max_p).prop_flat_map(|p| {
            (
                invertible(p),
                prop::collection::vec(-3.0..3.0f64, p * p)
                    .prop_map(move |v| Matrix::from_vec(p, p, v).unwrap()),
                Just((0..p).collect::<Vec<_>>()).prop_shuffle(),
                prop::collection::vec(any::<bool>(), p),
            )
        })
    }

    proptest! {
        #[test]
        fn d_index_in_unit_interval((omega, omega_hat, _, _) in pair(10)) {
            if let Ok(d) = d_index(&omega, &omega_hat) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d), "{}", d);
            }
        }

        #[test]
        fn d_index_ignores_permutation_and_sign((omega, omega_hat, perm, signs) in pair(8)) {
            let p = omega.rows();
            let mixed = Matrix::from_fn(p, p, |r, c| {
                let s = if signs[c] { -1.0 } else { 1.0 };
                s * omega_hat[(r, perm[c])]
            });
            if let (Ok(a), Ok(b)) = (d_index(&omega, &omega_hat), d_index(&omega, &mixed)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let exact = Matrix::from_fn(p, p, |r, c| {
                let s = if signs[c] { -1.0 } else { 1.0 };
                s * omega[(r, perm[c])]
            });
            prop_assert!(d_index(&omega, &exact).unwrap().abs() < 1e-12);
        }

        #[test]
        fn d_index_left_multiplication((omega, omega_hat, _, _) in pair(6), a in invertible(6)) {
            let p = omega.rows();
            let a = a.block(0, p, 0, p);
            if let (Ok(x), Ok(y)) = (
                d_index(&omega, &omega_hat),
                d_index(&a.matmul(&omega), &a.matmul(&omega_hat)),
            ) {
                prop_assert!((x - y).abs() < 1e-10, "{} vs {}", x, y);
            }
        }

        #[test]
        fn gaps_sum_to_range(mut l in prop::collection::vec(-100.0..100.0f64, 1..20)) {
            l.sort_by(|a, b| b.total_cmp(a));
            let r = gap_report(&l).unwrap();
            prop_assert!(r.gaps.iter().all(|&g| g >= 0.0));
            if let Some(v) = r.v_gap {
                prop_assert_eq!(v, r.gaps.iter().copied().fold(f64::INFINITY, f64::min));
            }
        }
    }
}
