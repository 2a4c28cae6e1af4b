//! Spectral-radius bounds for entrywise nonnegative matrices.

use alloc::vec::Vec;
use core::fmt;

use crate::math::{abs, cos, exp, ln, powf};

/// Iteration cap for power iteration.
pub const MAX_POWER_ITERATIONS: usize = 10_000;
/// Squaring cap for the Gelfand sequence.
pub const MAX_SQUARINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralError {
    DimensionMismatch { n: usize, len: usize },
    NegativeEntry { row: usize, col: usize },
    NonFiniteEntry { row: usize, col: usize },
    NonpositiveEpsilon,
    NonpositiveTolerance,
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { n, len } => write!(f, "{len} entries do not form a {n}x{n} matrix"),
            Self::NegativeEntry { row, col } => write!(f, "entry ({}, {}) is negative", row + 1, col + 1),
            Self::NonFiniteEntry { row, col } => write!(f, "entry ({}, {}) is not finite", row + 1, col + 1),
            Self::NonpositiveEpsilon => write!(f, "epsilon must be positive"),
            Self::NonpositiveTolerance => write!(f, "tolerance must be positive"),
        }
    }
}

impl core::error::Error for SpectralError {}

/// Square row-major matrix with finite, nonnegative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegativeMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl NonnegativeMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self, SpectralError> {
        if entries.len() != n * n {
            return Err(SpectralError::DimensionMismatch { n, len: entries.len() });
        }
        for (k, v) in entries.iter().enumerate() {
            let (row, col) = (k / n.max(1), k % n.max(1));
            if !v.is_finite() {
                return Err(SpectralError::NonFiniteEntry { row, col });
            }
            if *v < 0.0 {
                return Err(SpectralError::NegativeEntry { row, col });
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectralError> {
        let n = rows.len();
        let entries: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        if rows.iter().any(|r| r.len() != n) {
            return Err(SpectralError::DimensionMismatch { n, len: entries.len() });
        }
        Self::new(n, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = alloc::vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    /// Tridiagonal Toeplitz matrix with constant diagonal and off-diagonals.
    pub fn tridiagonal(n: usize, diag: f64, off: f64) -> Result<Self, SpectralError> {
        let mut entries = alloc::vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = diag;
            if i + 1 < n {
                entries[i * n + i + 1] = off;
                entries[(i + 1) * n + i] = off;
            }
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn scaled(&self, c: f64) -> Result<Self, SpectralError> {
        Self::new(self.n, self.entries.iter().map(|v| v * c).collect())
    }

    /// `M v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }
}

/// `max_i sum_j m_ij`, an upper bound on the spectral radius.
pub fn row_sum_bound(m: &NonnegativeMatrix) -> f64 {
    m.row_sums().into_iter().fold(0.0, f64::max)
}

/// `max_i sum_j (eps + m_ij) sum_k (eps + m_jk) / (n eps + sum_j m_ij)`.
///
/// A value below one proves `rho(M) < 1`. It is a sufficient test only.
pub fn epsilon_refined_bound(m: &NonnegativeMatrix, eps: f64) -> Result<f64, SpectralError> {
    if !(eps > 0.0) {
        return Err(SpectralError::NonpositiveEpsilon);
    }
    let n = m.n();
    let padded_rows: Vec<f64> = (0..n).map(|j| n as f64 * eps + m.row(j).iter().sum::<f64>()).collect();
    let mut best = 0.0f64;
    for i in 0..n {
        let num: f64 = (0..n).map(|j| (eps + m.get(i, j)) * padded_rows[j]).sum();
        best = best.max(num / padded_rows[i]);
    }
    Ok(best)
}

/// Best [`epsilon_refined_bound`] over a log grid on `[1e-8, 1]`.
pub fn best_epsilon_refined(m: &NonnegativeMatrix) -> (f64, f64) {
    let steps = 200;
    let mut best = (1.0, f64::INFINITY);
    for k in 0..=steps {
        let eps = powf(10.0, -8.0 + 8.0 * k as f64 / steps as f64);
        let value = epsilon_refined_bound(m, eps).expect("grid epsilon is positive");
        if value < best.1 {
            best = (eps, value);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoMethod {
    PowerIteration,
    Gelfand,
}

/// Spectral radius estimate with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    pub value: f64,
    pub method: RhoMethod,
    /// Set when power iteration stalled and disagreed with the Gelfand
    /// estimate. The value is then an upper bound.
    pub fallback: bool,
    pub iterations: usize,
    /// Collatz-Wielandt bracket from the last power iterate.
    pub lower: f64,
    pub upper: f64,
}

/// Spectral radius by power iteration on `M + I` from the all-ones vector,
/// with a Gelfand upper bound when the iteration stalls.
pub fn spectral_radius(m: &NonnegativeMatrix, tol: f64) -> Result<SpectralRadius, SpectralError> {
    if !(tol > 0.0) {
        return Err(SpectralError::NonpositiveTolerance);
    }
    let n = m.n();
    if n == 0 {
        return Ok(SpectralRadius { value: 0.0, method: RhoMethod::PowerIteration, fallback: false, iterations: 0, lower: 0.0, upper: 0.0 });
    }
    let mut x = alloc::vec![1.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for it in 1..=MAX_POWER_ITERATIONS {
        let mut y = m.apply(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
        }
        lo = f64::INFINITY;
        hi = 0.0f64;
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= tol {
            return Ok(SpectralRadius {
                value: 0.5 * (lo + hi) - 1.0,
                method: RhoMethod::PowerIteration,
                fallback: false,
                iterations: it,
                lower: (lo - 1.0).max(0.0),
                upper: hi - 1.0,
            });
        }
        let top = y.iter().fold(0.0f64, |acc, v| acc.max(*v));
        x = y.into_iter().map(|v| v / top).collect();
    }
    let estimate = 0.5 * (lo + hi) - 1.0;
    let gelfand = gelfand_bound(m);
    let agree = abs(gelfand - estimate) <= 10.0 * tol;
    Ok(SpectralRadius {
        value: if agree { estimate } else { gelfand },
        method: if agree { RhoMethod::PowerIteration } else { RhoMethod::Gelfand },
        fallback: !agree,
        iterations: MAX_POWER_ITERATIONS,
        lower: (lo - 1.0).max(0.0),
        upper: hi - 1.0,
    })
}

/// `||M^(2^k)||_inf^(1/2^k)` after at most [`MAX_SQUARINGS`] normalized
/// squarings. Every term upper-bounds the spectral radius.
pub fn gelfand_bound(m: &NonnegativeMatrix) -> f64 {
    let n = m.n();
    let s0 = row_sum_bound(m);
    if s0 == 0.0 {
        return 0.0;
    }
    let mut a: Vec<f64> = m.entries().iter().map(|v| v / s0).collect();
    let mut log_scale = ln(s0);
    let mut best = s0;
    let mut power = 1.0f64;
    for _ in 0..MAX_SQUARINGS {
        let mut sq = alloc::vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    sq[i * n + j] += aik * a[k * n + j];
                }
            }
        }
        let norm = (0..n).map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>()).fold(0.0, f64::max);
        if norm == 0.0 {
            return 0.0;
        }
        power *= 2.0;
        log_scale = 2.0 * log_scale + ln(norm);
        a = sq.into_iter().map(|v| v / norm).collect();
        best = best.min(exp(log_scale / power));
    }
    best
}

/// Spectral radius of the symmetric tridiagonal Toeplitz matrix with the
/// given diagonal and off-diagonal: `max_i |diag + 2 off cos(i pi / (n + 1))|`.
pub fn tridiagonal_toeplitz_rho(n: usize, diag: f64, off: f64) -> f64 {
    (1..=n)
        .map(|i| abs(diag + 2.0 * off * cos(i as f64 * core::f64::consts::PI / (n as f64 + 1.0))))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn printed_gamma() -> NonnegativeMatrix {
        NonnegativeMatrix::from_rows(&[
            vec![0.7905, 0.0281, 0.11, 0.0, 0.0],
            vec![0.11, 0.8166, 0.0281, 0.0, 0.0298],
            vec![0.0548, 0.11, 0.7905, 0.028, 0.0],
            vec![0.0, 0.0, 0.055, 0.7869, 0.0],
            vec![0.0, 0.055, 0.0, 0.0, 0.7869],
        ])
        .unwrap()
    }

    #[test]
    fn row_sum_trivial_cases() {
        assert_eq!(row_sum_bound(&NonnegativeMatrix::identity(3)), 1.0);
        assert_eq!(row_sum_bound(&NonnegativeMatrix::new(2, vec![0.0; 4]).unwrap()), 0.0);
    }

    #[test]
    fn row_sum_of_printed_network_matrix() {
        assert!((row_sum_bound(&printed_gamma()) - 0.9845).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_entries() {
        assert_eq!(
            NonnegativeMatrix::new(2, vec![0.0, -1.0, 0.0, 0.0]).unwrap_err(),
            SpectralError::NegativeEntry { row: 0, col: 1 }
        );
    }

    #[test]
    fn epsilon_bound_on_zero_matrix() {
        // Every row gives (n eps * n eps) / (n eps) = n eps.
        let z = NonnegativeMatrix::new(3, vec![0.0; 9]).unwrap();
        assert!((epsilon_refined_bound(&z, 0.01).unwrap() - 0.03).abs() < 1e-15);
        assert_eq!(epsilon_refined_bound(&z, 0.0).unwrap_err(), SpectralError::NonpositiveEpsilon);
    }

    #[test]
    fn epsilon_bound_beats_row_sum() {
        let m = NonnegativeMatrix::from_rows(&[vec![0.5, 0.6], vec![0.1, 0.3]]).unwrap();
        let rho = spectral_radius(&m, 1e-12).unwrap().value;
        assert!(row_sum_bound(&m) >= 1.0);
        assert!((rho - (0.8 + 0.28f64.sqrt()) / 2.0).abs() < 1e-10);
        let (_, refined) = best_epsilon_refined(&m);
        assert!(refined < 1.0 && refined >= rho - 1e-12);
    }

    #[test]
    fn epsilon_bound_on_printed_matrix() {
        let (_, v) = best_epsilon_refined(&printed_gamma());
        assert!(v < 1.0);
    }

    #[test]
    fn identity_radius() {
        let r = spectral_radius(&NonnegativeMatrix::identity(4), 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10 && !r.fallback);
    }

    #[test]
    fn heat_matrix_radius() {
        let m = NonnegativeMatrix::tridiagonal(10, 0.0, 0.5).unwrap();
        let want = (core::f64::consts::PI / 11.0).cos();
        assert!((want - 0.9594929736).abs() < 1e-10);
        assert!((spectral_radius(&m, 1e-10).unwrap().value - want).abs() < 1e-8);
        assert!((tridiagonal_toeplitz_rho(10, 0.0, 0.5) - want).abs() < 1e-15);
    }

    #[test]
    fn toeplitz_closed_forms() {
        let want = 0.5 + 0.5 * (core::f64::consts::PI / 4.0).cos();
        assert!((tridiagonal_toeplitz_rho(3, 0.5, 0.25) - want).abs() < 1e-15);
        assert!((want - 0.853553).abs() < 1e-6);
        assert_eq!(tridiagonal_toeplitz_rho(7, 0.3, 0.0), 0.3);
    }

    #[test]
    fn printed_matrix_radius_below_row_sum() {
        let m = printed_gamma();
        let r = spectral_radius(&m, 1e-10).unwrap();
        assert!(r.value < 0.9845);
        assert!((gelfand_bound(&m) - r.value).abs() < 1e-6);
    }

    #[test]
    fn nilpotent_radius_is_zero() {
        let m = NonnegativeMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(gelfand_bound(&m), 0.0);
        assert!(spectral_radius(&m, 1e-10).unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn reducible_block_radius() {
        let m = NonnegativeMatrix::from_rows(&[vec![0.5, 1.0, 0.0], vec![0.0, 0.3, 0.0], vec![0.0, 0.0, 0.7]]).unwrap();
        let r = spectral_radius(&m, 1e-10).unwrap();
        assert!((r.value - 0.7).abs() < 1e-8);
    }
}
