//! Cost-minimising assignment: exact bipartite frame-to-frame pairing with a
//! non-assignment option, and the greedy 3-frame triplet selection used to
//! initialise new tracks.

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Dense rectangular cost matrix. `f64::INFINITY` marks a gated-out pair;
/// `null_cost` is charged once for every row and every column left
/// unassigned.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n_rows: usize,
    n_cols: usize,
    costs: Vec<f64>,
    pub null_cost: f64,
}

impl CostMatrix {
    pub fn new(n_rows: usize, n_cols: usize, null_cost: f64) -> Result<Self> {
        if null_cost <= 0.0 || !null_cost.is_finite() {
            return Err(Error::Data(format!(
                "null_cost must be positive and finite, got {null_cost}"
            )));
        }
        Ok(CostMatrix {
            n_rows,
            n_cols,
            costs: vec![f64::INFINITY; n_rows * n_cols],
            null_cost,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.n_cols + col]
    }

    /// Sets one entry; must be positive (possibly `+∞` for a gated pair).
    pub fn set(&mut self, row: usize, col: usize, cost: f64) -> Result<()> {
        if cost <= 0.0 || cost.is_nan() {
            return Err(Error::Data(format!(
                "pair cost must be positive, got {cost} at ({row}, {col})"
            )));
        }
        self.costs[row * self.n_cols + col] = cost;
        Ok(())
    }
}

/// Result of [`solve_bipartite`]: chosen (row, col) pairs and the objective
/// value including null charges.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Globally optimal solution of
/// `min Σ chosen costs + null_cost · (#unassigned rows + #unassigned cols)`.
///
/// The matrix is extended with one dummy column per row and one dummy row
/// per column (the escape at `null_cost`), making the square problem solvable
/// exactly by the shortest-augmenting-path Hungarian method.
pub fn solve_bipartite(m: &CostMatrix) -> Assignment {
    let (n, c) = (m.n_rows, m.n_cols);
    if n == 0 || c == 0 {
        return Assignment {
            pairs: Vec::new(),
            total_cost: m.null_cost * (n + c) as f64,
        };
    }

    // Forbidden entries become a finite sentinel that dominates every
    // feasible total, keeping the dual arithmetic finite.
    let finite_sum: f64 = m.costs.iter().filter(|v| v.is_finite()).sum();
    let big = finite_sum + m.null_cost * (n + c) as f64 + 1.0;

    let size = n + c;
    let cost = |i: usize, j: usize| -> f64 {
        match (i < n, j < c) {
            (true, true) => {
                let v = m.get(i, j);
                if v.is_finite() {
                    v
                } else {
                    big
                }
            }
            // Row i escapes through its own dummy column c + i.
            (true, false) => {
                if j - c == i {
                    m.null_cost
                } else {
                    big
                }
            }
            // Column j escapes through its own dummy row n + j.
            (false, true) => {
                if i - n == j {
                    m.null_cost
                } else {
                    big
                }
            }
            (false, false) => 0.0,
        }
    };

    let row_of_col = hungarian_square(size, cost);

    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (j, &i) in row_of_col.iter().enumerate() {
        if i < n && j < c {
            let v = m.get(i, j);
            if v.is_finite() {
                pairs.push((i, j));
                total += v;
            }
        }
    }
    let unassigned = (n - pairs.len()) + (c - pairs.len());
    total += m.null_cost * unassigned as f64;
    pairs.sort_unstable();
    Assignment {
        pairs,
        total_cost: total,
    }
}

/// Exact Hungarian algorithm with potentials on a square matrix
/// (O(size³), minimisation). Returns, per column, the assigned row.
fn hungarian_square(size: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let none = usize::MAX;
    // 1-based columns; column 0 is the virtual start of each augmenting path.
    let mut u = vec![0.0f64; size + 1]; // row potentials (index = row + 1)
    let mut v = vec![0.0f64; size + 1];
    let mut matched_row = vec![0usize; size + 1]; // row+1 assigned to column, 0 = free
    let mut way = vec![0usize; size + 1];

    for row in 1..=size {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = none;
            for j in 1..=size {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=size).map(|j| matched_row[j] - 1).collect()
}

/// A candidate 3-frame pairing with its smoothness cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub cost: f64,
}

/// Normalised vector-difference cost of a 3-point candidate:
/// `‖L23 − L12‖ / (‖L23‖ + ‖L12‖)` with `L12 = p2 − p1`, `L23 = p3 − p2`.
/// Zero for equal steps, up to 2 in general; undefined when all three points
/// coincide.
pub fn triplet_cost(p1: Vector2<f64>, p2: Vector2<f64>, p3: Vector2<f64>) -> Result<f64> {
    let l12 = p2 - p1;
    let l23 = p3 - p2;
    let denom = l12.norm() + l23.norm();
    if denom == 0.0 {
        return Err(Error::Data(
            "triplet cost undefined: all three points coincide".into(),
        ));
    }
    Ok((l23 - l12).norm() / denom)
}

/// Selects mutually disjoint triplets across three consecutive frames.
///
/// Candidates are every (i, j, k) whose both links fit within `gate_um` and
/// whose cost is at most `cost_max`; they are accepted greedily in ascending
/// (cost, i, j, k) order, skipping any candidate that reuses a detection.
pub fn solve_triplets(
    f1: &[Vector2<f64>],
    f2: &[Vector2<f64>],
    f3: &[Vector2<f64>],
    gate_um: f64,
    cost_max: f64,
) -> Vec<Triplet> {
    let mut candidates: Vec<Triplet> = Vec::new();
    for (j, &p2) in f2.iter().enumerate() {
        let firsts: Vec<usize> = f1
            .iter()
            .enumerate()
            .filter(|(_, &p1)| (p2 - p1).norm() <= gate_um)
            .map(|(i, _)| i)
            .collect();
        if firsts.is_empty() {
            continue;
        }
        for (k, &p3) in f3.iter().enumerate() {
            if (p3 - p2).norm() > gate_um {
                continue;
            }
            for &i in &firsts {
                if let Ok(cost) = triplet_cost(f1[i], p2, p3) {
                    if cost <= cost_max {
                        candidates.push(Triplet { i, j, k, cost });
                    }
                }
            }
        }
    }

    candidates.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
            .then(a.k.cmp(&b.k))
    });

    let mut used1 = vec![false; f1.len()];
    let mut used2 = vec![false; f2.len()];
    let mut used3 = vec![false; f3.len()];
    let mut chosen = Vec::new();
    for t in candidates {
        if used1[t.i] || used2[t.j] || used3[t.k] {
            continue;
        }
        used1[t.i] = true;
        used2[t.j] = true;
        used3[t.k] = true;
        chosen.push(t);
    }
    chosen
}
