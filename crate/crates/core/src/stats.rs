//! Small numerical statistics used by the Monte Carlo checks.

use alloc::vec::Vec;

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how a caller chunked the work.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    libm::sqrt(sample_variance(xs))
}

/// First four moments of a sample plus the standard errors of the mean and of
/// the sample variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Standard error of `mean`.
    pub mean_std_error: f64,
    /// Normal-approximation standard error of `variance`:
    /// `sqrt((mu4 - sigma^4) / T)` with sample central moments.
    pub variance_std_error: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let t = xs.len();
        let m = mean(xs);
        let d2: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
        let d4: Vec<f64> = d2.iter().map(|v| v * v).collect();
        let m2 = pairwise_sum(&d2) / t as f64;
        let m4 = pairwise_sum(&d4) / t as f64;
        let variance = if t > 1 {
            pairwise_sum(&d2) / (t - 1) as f64
        } else {
            f64::NAN
        };
        Moments {
            count: t,
            mean: m,
            variance,
            mean_std_error: libm::sqrt(variance / t as f64),
            variance_std_error: libm::sqrt(((m4 - m2 * m2) / t as f64).max(0.0)),
        }
    }
}

/// Pearson chi-square test of independence on a 2x2 contingency table
/// (no continuity correction, one degree of freedom). Returns
/// `(statistic, p_value)`.
pub fn chi_square_2x2(table: [[u64; 2]; 2]) -> (f64, f64) {
    let total = (table[0][0] + table[0][1] + table[1][0] + table[1][1]) as f64;
    let rows = [
        (table[0][0] + table[0][1]) as f64,
        (table[1][0] + table[1][1]) as f64,
    ];
    let cols = [
        (table[0][0] + table[1][0]) as f64,
        (table[0][1] + table[1][1]) as f64,
    ];
    let mut stat = 0.0;
    for (r, row_total) in rows.iter().enumerate() {
        for (c, col_total) in cols.iter().enumerate() {
            let expected = row_total * col_total / total;
            if expected > 0.0 {
                let diff = table[r][c] as f64 - expected;
                stat += diff * diff / expected;
            }
        }
    }
    // chi2(1) survival function: P(X > x) = erfc(sqrt(x / 2))
    (stat, libm::erfc(libm::sqrt(stat / 2.0)))
}
