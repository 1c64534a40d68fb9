use alloc::vec;
use alloc::vec::Vec;

/// Stationary distribution of a continuous-time Markov chain.
///
/// `rate[j * n + i]` is the transition rate from state `j` to state `i`
/// (diagonal entries are ignored). Solves the global balance equations
/// `sum_j p_j q_ji = p_i sum_k q_ik` with one equation replaced by
/// `sum_i p_i = 1`. Returns `None` when the system is singular, which
/// happens when the chain is not irreducible.
pub(crate) fn ctmc_stationary(rate: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(rate.len(), n * n);
    if n == 1 {
        return Some(vec![1.0]);
    }
    // a[i][j] = q_ji for j != i, a[i][i] = -out_rate(i)
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let mut out = 0.0;
        for j in 0..n {
            if i != j {
                a[i * n + j] = rate[j * n + i];
                out += rate[i * n + j];
            }
        }
        a[i * n + i] = -out;
    }
    let mut b = vec![0.0; n];
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    b[n - 1] = 1.0;
    let p = solve_in_place(&mut a, &mut b, n)?;
    if p.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return None;
    }
    Some(p)
}

/// Gaussian elimination with partial pivoting on a dense row-major system.
fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0_f64, |m, &v| m.max(libm::fabs(v)));
    let eps = scale * 1e-14 * n as f64;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| libm::fabs(a[r * n + col]).total_cmp(&libm::fabs(a[s * n + col])))?;
        if libm::fabs(a[pivot * n + col]) <= eps {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r * n + k] * x[k];
        }
        x[r] = s / a[r * n + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_chain() {
        // 0 -> 1 at rate 1, 1 -> 0 at rate 2: p = (2/3, 1/3)
        let p = ctmc_stationary(&[0.0, 1.0, 2.0, 0.0], 2).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reducible_chain_is_rejected() {
        // 0 -> 1 only; all mass ends in 1, p_0 = 0
        assert!(ctmc_stationary(&[0.0, 1.0, 0.0, 0.0], 2).is_none());
    }

    #[test]
    fn balance_holds_on_a_random_dense_chain() {
        let n = 6;
        let rate: Vec<f64> = (0..n * n).map(|k| 0.1 + ((k * 37 % 11) as f64) / 7.0).collect();
        let p = ctmc_stationary(&rate, n).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..n {
            let inflow: f64 = (0..n).filter(|&j| j != i).map(|j| p[j] * rate[j * n + i]).sum();
            let outflow: f64 = (0..n).filter(|&j| j != i).map(|j| p[i] * rate[i * n + j]).sum();
            assert!((inflow - outflow).abs() < 1e-12);
        }
    }
}
