use super::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Largest matrix order accepted by [`permanent`].
pub const MAX_ORDER: usize = 16;

/// Matrix permanent via Ryser's formula with Gray-code subset ordering.
///
/// Runs in `O(2^n n)`. The permanent of the empty matrix is 1.
pub fn permanent(m: &ComplexMatrix) -> Result<C64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::dim(
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if n > MAX_ORDER {
        return Err(Error::param(
            "matrix",
            format!("order {n} exceeds the supported maximum {MAX_ORDER}"),
        ));
    }
    match n {
        0 => return Ok(C64::new(1.0, 0.0)),
        1 => return Ok(m[(0, 0)]),
        2 => return Ok(m[(0, 0)] * m[(1, 1)] + m[(0, 1)] * m[(1, 0)]),
        _ => {}
    }

    // row_sums[i] = sum of a[i][j] over columns j in the current subset
    let mut row_sums = vec![ZERO; n];
    let mut in_subset = vec![false; n];
    let mut total = ZERO;
    let mut subset_size = 0usize;
    for k in 1u32..(1u32 << n) {
        let col = k.trailing_zeros() as usize;
        if in_subset[col] {
            in_subset[col] = false;
            subset_size -= 1;
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= m[(i, col)];
            }
        } else {
            in_subset[col] = true;
            subset_size += 1;
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += m[(i, col)];
            }
        }
        let prod = row_sums.iter().fold(C64::new(1.0, 0.0), |acc, s| acc * s);
        if subset_size.is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct sum over all n! permutations.
    fn naive_permanent(m: &ComplexMatrix) -> C64 {
        fn rec(m: &ComplexMatrix, row: usize, used: &mut Vec<bool>) -> C64 {
            let n = m.nrows();
            if row == n {
                return C64::new(1.0, 0.0);
            }
            let mut acc = ZERO;
            for col in 0..n {
                if !used[col] {
                    used[col] = true;
                    acc += m[(row, col)] * rec(m, row + 1, used);
                    used[col] = false;
                }
            }
            acc
        }
        rec(m, 0, &mut vec![false; m.nrows()])
    }

    fn matrix_strategy(n: usize) -> impl Strategy<Value = ComplexMatrix> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            ComplexMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| C64::new(re, im)))
        })
    }

    #[test]
    fn small_cases() {
        let id = ComplexMatrix::identity(2, 2);
        assert!((permanent(&id).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let ones2 = ComplexMatrix::from_element(2, 2, C64::new(1.0, 0.0));
        assert!((permanent(&ones2).unwrap() - C64::new(2.0, 0.0)).norm() < 1e-15);
        let ones3 = ComplexMatrix::from_element(3, 3, C64::new(1.0, 0.0));
        let expected = naive_permanent(&ones3);
        assert!((expected - C64::new(6.0, 0.0)).norm() < 1e-15);
        assert!((permanent(&ones3).unwrap() - expected).norm() < 1e-12);
        let ones5 = ComplexMatrix::from_element(5, 5, C64::new(1.0, 0.0));
        assert!((permanent(&ones5).unwrap() - C64::new(120.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn rejects_non_square() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(permanent(&m), Err(Error::Dimension { .. })));
        let big = ComplexMatrix::zeros(17, 17);
        assert!(permanent(&big).is_err());
    }

    proptest! {
        #[test]
        fn matches_factorial_expansion(m in (1usize..=5).prop_flat_map(matrix_strategy)) {
            let fast = permanent(&m).unwrap();
            let slow = naive_permanent(&m);
            prop_assert!((fast - slow).norm() <= 1e-12 * slow.norm().max(1.0));
        }

        #[test]
        fn multilinear_in_rows(m in matrix_strategy(4), row in 0usize..4, re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let c = C64::new(re, im);
            let mut scaled = m.clone();
            for j in 0..4 {
                scaled[(row, j)] *= c;
            }
            let lhs = permanent(&scaled).unwrap();
            let rhs = c * permanent(&m).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }
    }
}
