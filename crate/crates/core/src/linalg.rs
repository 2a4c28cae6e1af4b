//! Dense LU with partial pivoting for the small systems used here.

use alloc::vec::Vec;

/// Solves `m x = rhs` for a row-major `n x n` matrix.
///
/// Returns `None` when a pivot falls below `1e-12` times the largest entry.
pub fn solve(n: usize, m: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(m.len(), n * n);
    debug_assert_eq!(rhs.len(), n);
    let mut a = m.to_vec();
    let mut b = rhs.to_vec();
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(crate::math::abs(*v)));
    if scale == 0.0 {
        return if n == 0 { Some(Vec::new()) } else { None };
    }
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if crate::math::abs(a[row * n + col]) > crate::math::abs(a[piv * n + col]) {
                piv = row;
            }
        }
        if crate::math::abs(a[piv * n + col]) <= 1e-12 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let m = [2.0, 1.0, 1.0, 3.0];
        let x = solve(2, &m, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn detects_singular() {
        assert!(solve(2, &[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]).is_none());
    }
}
