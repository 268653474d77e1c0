//! Exact discrete transport: assignment for uniform square problems and a
//! transportation simplex for general weights.

/// Square assignment minimising `Σ c[i][σ(i)]`, with dual potentials `u, v`
/// (`u_i + v_j ≤ c_ij`, equality on the assignment).
pub(crate) fn hungarian(c: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = c.len();
    // 1-based shortest augmenting path formulation; index 0 is a sentinel column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    (assignment, u[1..].to_vec(), v[1..].to_vec())
}

/// Solution of the transportation problem.
pub(crate) struct Simplex {
    pub flow: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

/// Transportation simplex with MODI pricing and Bland's rule for both the
/// entering and the leaving cell.
pub(crate) fn transportation_simplex(c: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Simplex {
    let (m, n) = (supply.len(), demand.len());
    let mut flow = vec![vec![0.0; n]; m];
    let mut basic = vec![vec![false; n]; m];
    // north-west corner start: exactly m + n - 1 basic cells
    let (mut s, mut d) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]);
        flow[i][j] = x;
        basic[i][j] = true;
        s[i] -= x;
        d[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 || (j < n - 1 && s[i] > 0.0) {
            j += 1;
        } else {
            i += 1;
        }
    }
    let scale = c
        .iter()
        .flatten()
        .fold(0.0f64, |a, b| a.max(b.abs()))
        .max(1.0);
    let tol = 1e-12 * scale;
    let mut pivots = 0;
    loop {
        let (u, v) = potentials(c, &basic);
        let entering = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| !basic[i][j] && c[i][j] - u[i] - v[j] < -tol);
        let Some((ei, ej)) = entering else {
            return Simplex { flow, u, v, pivots };
        };
        let cycle = cycle_through(&basic, ei, ej);
        // odd positions lose mass; Bland: smallest index among the minimal ones leaves
        let (li, lj) = cycle
            .iter()
            .skip(1)
            .step_by(2)
            .copied()
            .min_by(|a, b| flow[a.0][a.1].total_cmp(&flow[b.0][b.1]).then(a.cmp(b)))
            .expect("cycle has a losing cell");
        let theta = flow[li][lj];
        for (k, &(ci, cj)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                flow[ci][cj] += theta;
            } else {
                flow[ci][cj] = (flow[ci][cj] - theta).max(0.0);
            }
        }
        flow[li][lj] = 0.0;
        basic[li][lj] = false;
        basic[ei][ej] = true;
        pivots += 1;
    }
}

/// Row and column potentials with `u_i + v_j = c_ij` on the basis tree, `u_0 = 0`.
fn potentials(c: &[Vec<f64>], basic: &[Vec<bool>]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (basic.len(), basic[0].len());
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut stack = vec![(true, 0)];
    while let Some((is_row, k)) = stack.pop() {
        if is_row {
            for j in 0..n {
                if basic[k][j] && v[j].is_nan() {
                    v[j] = c[k][j] - u[k];
                    stack.push((false, j));
                }
            }
        } else {
            for i in 0..m {
                if basic[i][k] && u[i].is_nan() {
                    u[i] = c[i][k] - v[k];
                    stack.push((true, i));
                }
            }
        }
    }
    (u, v)
}

/// Cells of the cycle formed by adding `(ei, ej)` to the basis tree, starting
/// with the entering cell and alternating row and column moves.
fn cycle_through(basic: &[Vec<bool>], ei: usize, ej: usize) -> Vec<(usize, usize)> {
    let (m, n) = (basic.len(), basic[0].len());
    // tree nodes: rows 0..m, columns m..m+n; search from column ej to row ei
    let mut parent = vec![usize::MAX; m + n];
    let start = m + ej;
    parent[start] = start;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == ei {
            break;
        }
        let neighbours: Vec<usize> = if node < m {
            (0..n).filter(|&j| basic[node][j]).map(|j| m + j).collect()
        } else {
            (0..m).filter(|&i| basic[i][node - m]).collect()
        };
        for next in neighbours {
            if parent[next] == usize::MAX {
                parent[next] = node;
                queue.push_back(next);
            }
        }
    }
    // walk back from row ei to column ej; consecutive nodes give the cells
    let mut nodes = vec![ei];
    let mut node = ei;
    while node != start {
        node = parent[node];
        nodes.push(node);
    }
    let mut cycle = vec![(ei, ej)];
    for pair in nodes.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        cycle.push(if a < m { (a, b - m) } else { (b, a - m) });
    }
    cycle
}
