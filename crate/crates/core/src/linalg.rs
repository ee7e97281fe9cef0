//! Dense LU with partial pivoting, sized for the MDP state spaces here
//! (a few hundred unknowns at most).

/// Pivots below this magnitude (relative to the largest entry) are treated
/// as zero.
const PIVOT_TOL: f64 = 1e-12;

/// Solves `a x = rhs` where `a` is row-major `n x n`. Returns `None` when the
/// matrix is numerically singular.
pub(crate) fn solve(mut a: Vec<f64>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for k in 0..n {
        let (piv, piv_abs) = (k..n)
            .map(|r| (r, a[r * n + k].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if piv_abs <= PIVOT_TOL * scale {
            return None;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            rhs.swap(k, piv);
        }
        let pivot = a[k * n + k];
        for r in k + 1..n {
            let factor = a[r * n + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[r * n + k] = 0.0;
            for c in k + 1..n {
                a[r * n + c] -= factor * a[k * n + c];
            }
            rhs[r] -= factor * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let tail: f64 = (k + 1..n).map(|c| a[k * n + c] * x[c]).sum();
        x[k] = (rhs[k] - tail) / a[k * n + k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // needs a row swap: first pivot is zero
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 2.0, 0.0, 3.0];
        let x = solve(a, vec![7.0, 3.0, 11.0]).unwrap();
        let expect = [1.0, 2.0, 3.0];
        for (xi, ei) in x.iter().zip(expect) {
            assert!((xi - ei).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_singular() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(solve(a, vec![1.0, 2.0]).is_none());
    }
}
