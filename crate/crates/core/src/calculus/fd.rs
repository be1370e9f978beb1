//! Finite-difference weights on arbitrary nodes.

/// Weights `c[k][j]` such that `sum_j c[k][j] f(x_j)` approximates the
/// `k`-th derivative of `f` at `x0`, for `k = 0..=max_order`.
///
/// Fornberg's recursion (Math. Comp. 51, 1988); exact for polynomials of
/// degree below `nodes.len()`.
pub(crate) fn weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}
