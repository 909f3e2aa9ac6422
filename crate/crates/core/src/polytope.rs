//! Vertex enumeration for small polytopes {x ≥ 0 : Ax = b}.
//!
//! Every vertex is a basic feasible solution: some set of coordinates is
//! zero and the equality system has a unique solution in the rest. With a
//! handful of variables all zero-sets can be tried directly.

const PIVOT_TOLERANCE: f64 = 1e-12;
const FEASIBILITY_TOLERANCE: f64 = 1e-12;

/// All vertices of {x ≥ 0 : Ax = b}, deduplicated. Empty when infeasible.
/// Intended for up to ~16 variables.
pub fn enumerate_vertices(a: &[Vec<f64>], b: &[f64], n_vars: usize) -> Vec<Vec<f64>> {
    assert!(n_vars <= 16, "exhaustive enumeration is limited to 16 variables");
    assert_eq!(a.len(), b.len());
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for mask in 0u32..(1 << n_vars) {
        let free: Vec<usize> = (0..n_vars).filter(|i| mask & (1 << i) != 0).collect();
        let Some(values) = solve_unique(a, b, &free) else {
            continue;
        };
        if values.iter().any(|v| *v < -FEASIBILITY_TOLERANCE) {
            continue;
        }
        let mut x = vec![0.0; n_vars];
        for (i, v) in free.iter().zip(values) {
            x[*i] = v.max(0.0);
        }
        if !vertices.iter().any(|w| max_abs_diff(w, &x) < 1e-12) {
            vertices.push(x);
        }
    }
    vertices
}

/// max_i |(Ax − b)_i|.
pub fn residual(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, bi)| (row.iter().zip(x).map(|(r, xi)| r * xi).sum::<f64>() - bi).abs())
        .fold(0.0, f64::max)
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

// Solves A[:, free]·y = b when the solution exists and is unique.
fn solve_unique(a: &[Vec<f64>], b: &[f64], free: &[usize]) -> Option<Vec<f64>> {
    let k = free.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| free.iter().map(|j| row[*j]).chain(std::iter::once(*bi)).collect())
        .collect();
    let rows = m.len();
    let mut pivot_row = 0;
    let mut pivot_cols = Vec::with_capacity(k);
    for col in 0..k {
        let best = (pivot_row..rows).max_by(|x, y| m[*x][col].abs().total_cmp(&m[*y][col].abs()));
        let Some(best) = best else { break };
        if m[best][col].abs() < PIVOT_TOLERANCE {
            continue;
        }
        m.swap(pivot_row, best);
        let p = m[pivot_row][col];
        for entry in m[pivot_row].iter_mut() {
            *entry /= p;
        }
        let pivot = m[pivot_row].clone();
        for (r, row) in m.iter_mut().enumerate() {
            let factor = row[col];
            if r != pivot_row && factor != 0.0 {
                for (entry, p) in row.iter_mut().zip(&pivot) {
                    *entry -= factor * p;
                }
            }
        }
        pivot_cols.push(col);
        pivot_row += 1;
    }
    if pivot_cols.len() < k {
        return None;
    }
    if m[pivot_row..].iter().any(|row| row[k].abs() > 1e-10) {
        return None;
    }
    let mut y = vec![0.0; k];
    for (r, col) in pivot_cols.iter().enumerate() {
        y[*col] = m[r][k];
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_vertices_are_unit_vectors() {
        let vs = enumerate_vertices(&[vec![1.0, 1.0, 1.0]], &[1.0], 3);
        assert_eq!(vs.len(), 3);
        for v in &vs {
            assert_eq!(v.iter().filter(|x| **x == 1.0).count(), 1);
        }
    }

    #[test]
    fn segment_has_two_endpoints() {
        // x0 + x1 + x2 + x3 = 1, x1 + x3 = 0.5, x0 + x3 = 0.7
        let a = vec![
            vec![1.0, 1.0, 1.0, 1.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0],
        ];
        let b = [1.0, 0.5, 0.7];
        let vs = enumerate_vertices(&a, &b, 4);
        assert_eq!(vs.len(), 2);
        for v in &vs {
            assert!(residual(&a, &b, v) < 1e-12);
        }
    }

    #[test]
    fn infeasible_system_has_no_vertices() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(enumerate_vertices(&a, &[1.0, 0.5], 2).is_empty());
        assert!(enumerate_vertices(&[vec![1.0, 1.0]], &[-1.0], 2).is_empty());
    }

    #[test]
    fn vertices_match_brute_force_extremes() {
        // independent oracle: maximize x1 over a fine grid of the feasible set
        let a = vec![vec![1.0, 1.0, 1.0], vec![1.0, -2.0, 0.0]];
        let b = [1.0, 0.0];
        let vs = enumerate_vertices(&a, &b, 3);
        let best_vertex = vs.iter().map(|v| v[1]).fold(f64::MIN, f64::max);
        let mut best_grid = f64::MIN;
        let n = 3000;
        for i in 0..=n {
            let x1 = i as f64 / n as f64;
            let x0 = 2.0 * x1;
            let x2 = 1.0 - x0 - x1;
            if x2 >= -1e-12 {
                best_grid = best_grid.max(x1);
            }
        }
        assert!((best_vertex - 1.0 / 3.0).abs() < 1e-12);
        assert!((best_grid - best_vertex).abs() < 1e-3);
    }
}
