//! Small numeric kernels shared by the oracle and the learners.

/// `log(sum(exp(x)))` without overflow. Empty input gives `-inf`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.into_iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Index of the arg-extremum of `row`, lowest index on ties.
///
/// `maximize = true` picks the largest entry, otherwise the smallest.
pub fn arg_extremum(row: &[f64], maximize: bool) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        let better = if maximize { x > row[best] } else { x < row[best] };
        if better {
            best = i;
        }
    }
    best
}

/// Index of the entry maximizing `(1/beta) * ln(g)`, i.e. the largest `g`
/// for `beta > 0` and the smallest for `beta < 0`.
#[inline]
pub fn entropic_argmax(exp_row: &[f64], beta: f64) -> usize {
    arg_extremum(exp_row, beta > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_and_survives_large_inputs() {
        let xs = [0.1, -2.0, 3.5];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs) - naive).abs() < 1e-14);
        let big = [1000.0, 1000.0];
        assert!((log_sum_exp(big) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, 0.0]), 0.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(arg_extremum(&[1.0, 1.0, 1.0], true), 0);
        assert_eq!(arg_extremum(&[1.0, 1.0, 1.0], false), 0);
        assert_eq!(arg_extremum(&[0.2, 0.7], true), 1);
        assert_eq!(arg_extremum(&[0.9, 0.5], false), 1);
    }
}
