//! Exact discrete optimal transport: a transportation-simplex solver for
//! small dense problems and the monotone (quantile) coupling on the line.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Largest support the dense simplex solver accepts on either side.
pub const LP_MAX_ATOMS: usize = 64;

#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub cost: f64,
    pub mass: Matrix,
}

/// Minimizes `sum_ij P_ij C_ij` over couplings of `supply` and `demand`.
///
/// Transportation simplex: north-west corner start, MODI potentials for
/// pricing (most negative reduced cost enters), pivots along the unique
/// cycle of the basis tree. The basis always holds `m + n - 1` cells,
/// degenerate ones included, so it stays a spanning tree.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &Matrix) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.shape() != (m, n) {
        return Err(Error::Dimension("transport problem shapes disagree".into()));
    }
    if m > LP_MAX_ATOMS || n > LP_MAX_ATOMS {
        return Err(Error::Size { len: m.max(n), cap: LP_MAX_ATOMS });
    }
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if !(total_a > 0.0 && total_b > 0.0) {
        return Err(Error::InvalidMeasure("transport marginals need positive mass".into()));
    }
    let mut rem_a = supply.to_vec();
    let mut rem_b: Vec<f64> = demand.iter().map(|b| b * total_a / total_b).collect();

    let mut flow = Matrix::zeros(m, n);
    let mut basic = vec![vec![false; n]; m];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let q = rem_a[i].min(rem_b[j]);
        flow[(i, j)] = q;
        basic[i][j] = true;
        basis.push((i, j));
        rem_a[i] -= q;
        rem_b[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || rem_a[i] <= rem_b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let scale = cost.amax().max(1.0);
    let tol = 1e-13 * scale;
    let max_pivots = 50 * m * n + 1000;
    let nodes = m + n;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];

    for pivot in 0..=max_pivots {
        for a in adj.iter_mut() {
            a.clear();
        }
        for (k, &(r, c)) in basis.iter().enumerate() {
            adj[r].push((m + c, k));
            adj[m + c].push((r, k));
        }
        // potentials: u_r + v_c = C_rc on basic cells
        let mut seen = vec![false; nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &(next, k) in &adj[node] {
                if seen[next] {
                    continue;
                }
                let (r, c) = basis[k];
                if next >= m {
                    v[c] = cost[(r, c)] - u[r];
                } else {
                    u[r] = cost[(r, c)] - v[c];
                }
                seen[next] = true;
                stack.push(next);
            }
        }

        let mut entering = None;
        let mut best = -tol;
        for r in 0..m {
            for c in 0..n {
                if !basic[r][c] {
                    let red = cost[(r, c)] - u[r] - v[c];
                    if red < best {
                        best = red;
                        entering = Some((r, c));
                    }
                }
            }
        }
        let Some((er, ec)) = entering else {
            let total: f64 = flow.iter().zip(cost.iter()).map(|(f, c)| f * c).sum();
            return Ok(TransportPlan { cost: total, mass: flow });
        };
        if pivot == max_pivots {
            break;
        }

        // tree path from row node er to column node m + ec
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
        let mut seen = vec![false; nodes];
        let mut queue = std::collections::VecDeque::from([er]);
        seen[er] = true;
        while let Some(node) = queue.pop_front() {
            if node == m + ec {
                break;
            }
            for &(next, k) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = m + ec;
        while node != er {
            let (prev, k) = parent[node].expect("basis is a spanning tree");
            path.push(k);
            node = prev;
        }
        path.reverse();
        // along the path from the entering row, odd edges lose mass
        let mut theta = f64::INFINITY;
        let mut leave = 0;
        for (t, &k) in path.iter().enumerate() {
            if t % 2 == 0 {
                let (r, c) = basis[k];
                if flow[(r, c)] < theta {
                    theta = flow[(r, c)];
                    leave = k;
                }
            }
        }
        for (t, &k) in path.iter().enumerate() {
            let (r, c) = basis[k];
            if t % 2 == 0 {
                flow[(r, c)] = (flow[(r, c)] - theta).max(0.0);
            } else {
                flow[(r, c)] += theta;
            }
        }
        let (lr, lc) = basis[leave];
        flow[(lr, lc)] = 0.0;
        basic[lr][lc] = false;
        flow[(er, ec)] = theta;
        basic[er][ec] = true;
        basis[leave] = (er, ec);
    }
    Err(Error::Convergence { iterations: max_pivots, residual: f64::NAN })
}

/// Monotone coupling of two weighted point sets on the real line; optimal
/// for every convex cost of `x - y`, in particular the squared distance.
pub fn quantile_coupling(xs: &[f64], a: &[f64], ys: &[f64], b: &[f64]) -> Result<TransportPlan> {
    if xs.len() != a.len() || ys.len() != b.len() || xs.is_empty() || ys.is_empty() {
        return Err(Error::Dimension("quantile coupling inputs disagree".into()));
    }
    let sorted = |pts: &[f64], w: &[f64]| {
        let mut idx: Vec<usize> = (0..pts.len()).filter(|&k| w[k] > 0.0).collect();
        idx.sort_by(|&p, &q| pts[p].total_cmp(&pts[q]));
        idx
    };
    let ia = sorted(xs, a);
    let ib = sorted(ys, b);
    let total_a: f64 = a.iter().sum();
    let total_b: f64 = b.iter().sum();
    let mut mass = Matrix::zeros(xs.len(), ys.len());
    let (mut p, mut q) = (0, 0);
    let mut ra = ia.first().map_or(0.0, |&k| a[k]);
    let mut rb = ib.first().map_or(0.0, |&k| b[k] * total_a / total_b);
    let mut cost = 0.0;
    while p < ia.len() && q < ib.len() {
        let (i, j) = (ia[p], ib[q]);
        let t = ra.min(rb);
        mass[(i, j)] += t;
        cost += t * (xs[i] - ys[j]).powi(2);
        ra -= t;
        rb -= t;
        if ra <= rb {
            p += 1;
            if p < ia.len() {
                ra = a[ia[p]];
            }
        } else {
            q += 1;
            if q < ib.len() {
                rb = b[ib[q]] * total_a / total_b;
            }
        }
    }
    Ok(TransportPlan { cost, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sq_cost(xs: &[f64], ys: &[f64]) -> Matrix {
        Matrix::from_fn(xs.len(), ys.len(), |i, j| (xs[i] - ys[j]).powi(2))
    }

    fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }

    #[test]
    fn plans_have_requested_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (m, n) = (rng.random_range(1..12), rng.random_range(1..12));
            let a = random_weights(&mut rng, m);
            let b = random_weights(&mut rng, n);
            let c = Matrix::from_fn(m, n, |_, _| rng.random_range(0.0..5.0));
            let plan = solve_transport(&a, &b, &c).unwrap();
            for i in 0..m {
                assert_abs_diff_eq!(plan.mass.row(i).sum(), a[i], epsilon = 1e-12);
            }
            for j in 0..n {
                assert_abs_diff_eq!(plan.mass.column(j).sum(), b[j], epsilon = 1e-12);
            }
            assert!(plan.mass.iter().all(|v| *v >= 0.0));
        }
    }

    /// Brute force over permutation matrices: for uniform weights on n atoms
    /// an optimal plan is a permutation (Birkhoff).
    #[test]
    fn matches_assignment_brute_force() {
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in permutations(n - 1) {
                for k in 0..n {
                    let mut q = p.clone();
                    q.insert(k, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let n = rng.random_range(1..6);
            let c = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..3.0));
            let w = vec![1.0 / n as f64; n];
            let best = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum::<f64>() / n as f64)
                .fold(f64::INFINITY, f64::min);
            let plan = solve_transport(&w, &w, &c).unwrap();
            assert_abs_diff_eq!(plan.cost, best, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantile_equals_simplex_on_the_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (m, n) = (rng.random_range(1..21), rng.random_range(1..21));
            let xs: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = random_weights(&mut rng, m);
            let b = random_weights(&mut rng, n);
            let lp = solve_transport(&a, &b, &sq_cost(&xs, &ys)).unwrap();
            let qt = quantile_coupling(&xs, &a, &ys, &b).unwrap();
            assert_abs_diff_eq!(lp.cost, qt.cost, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs() {
        // equal supports and weights: zero cost, many ties in the corner rule
        let xs = [0.0, 1.0, 2.0, 3.0];
        let w = [0.25; 4];
        let plan = solve_transport(&w, &w, &sq_cost(&xs, &xs)).unwrap();
        assert_abs_diff_eq!(plan.cost, 0.0, epsilon = 1e-15);
        let c = Matrix::zeros(65, 2);
        assert!(matches!(
            solve_transport(&[1.0 / 65.0; 65], &[0.5, 0.5], &c),
            Err(Error::Size { .. })
        ));
    }
}
