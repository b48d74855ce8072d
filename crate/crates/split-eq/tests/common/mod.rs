//! Shared fixtures and oracles for the acceptance suite. The oracles work on
//! plain `Vec<f64>` data and recompute every answer from first principles
//! (exhaustive active-set enumeration, tiny dense solves); none of them call
//! the crate's iterative machinery.

use split_eq::{generate_instance, InstanceBundle};

/// Shapes shared by the seeded roster: (sources, images, d1, d2).
pub const ROSTER_SHAPES: [(usize, usize, usize, usize); 10] = [
    (1, 1, 1, 1),
    (2, 1, 3, 2),
    (1, 2, 2, 3),
    (3, 4, 10, 7),
    (4, 2, 8, 10),
    (2, 2, 5, 5),
    (4, 4, 6, 6),
    (1, 4, 9, 3),
    (3, 3, 4, 8),
    (2, 3, 7, 4),
];

/// Ten general instances followed by ten with a unique solution, all seeded.
pub fn roster() -> Vec<InstanceBundle> {
    let mut out = Vec::with_capacity(20);
    for (k, &(n, m, d1, d2)) in ROSTER_SHAPES.iter().enumerate() {
        out.push(generate_instance(n, m, d1, d2, 1000 + k as u64, false).unwrap());
    }
    for (k, &(n, m, d1, d2)) in ROSTER_SHAPES.iter().enumerate() {
        out.push(generate_instance(n, m, d1, d2, 2000 + k as u64, true).unwrap());
    }
    out
}

/// The ten instances whose solution set is exactly the origin.
pub fn unique_roster() -> Vec<InstanceBundle> {
    roster().split_off(10)
}

/// Drops the trailing wall-clock column from every CSV line; timing is the
/// one legitimately nondeterministic field.
pub fn strip_elapsed(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').map(|(head, _)| head).unwrap_or(line))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Partial-pivot Gaussian elimination; None when the pivot underflows.
pub fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|r| r.clone()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

const KKT_TOL: f64 = 1e-9;

/// Minimizes 0.5 y'Hy + g'y over the box [lo, hi] by enumerating the 3^d
/// lower/free/upper patterns and checking the KKT signs. H must be positive
/// definite so the valid pattern pins the unique minimizer.
pub fn qp_box_oracle(h: &[Vec<f64>], g: &[f64], lo: &[f64], hi: &[f64]) -> Option<Vec<f64>> {
    let d = g.len();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let pattern: Vec<u8> = (0..d)
            .map(|_| {
                let p = (c % 3) as u8;
                c /= 3;
                p
            })
            .collect();

        let mut y = vec![0.0; d];
        for i in 0..d {
            y[i] = match pattern[i] {
                0 => lo[i],
                2 => hi[i],
                _ => 0.0,
            };
        }
        let free: Vec<usize> = (0..d).filter(|&i| pattern[i] == 1).collect();
        if !free.is_empty() {
            let sub: Vec<Vec<f64>> =
                free.iter().map(|&i| free.iter().map(|&j| h[i][j]).collect()).collect();
            let rhs: Vec<f64> = free
                .iter()
                .map(|&i| {
                    -(g[i]
                        + (0..d)
                            .filter(|&j| pattern[j] != 1)
                            .map(|j| h[i][j] * y[j])
                            .sum::<f64>())
                })
                .collect();
            match solve_small(&sub, &rhs) {
                Some(sol) => {
                    for (k, &i) in free.iter().enumerate() {
                        y[i] = sol[k];
                    }
                }
                None => continue,
            }
        }

        let grad: Vec<f64> =
            (0..d).map(|i| g[i] + (0..d).map(|j| h[i][j] * y[j]).sum::<f64>()).collect();
        let ok = (0..d).all(|i| match pattern[i] {
            0 => grad[i] >= -KKT_TOL,
            2 => grad[i] <= KKT_TOL,
            _ => y[i] >= lo[i] - KKT_TOL && y[i] <= hi[i] + KKT_TOL,
        });
        if ok {
            return Some(y);
        }
    }
    None
}

/// Projects x onto { y : a_k . y <= b_k for all k } by enumerating subsets of
/// active constraints and solving each KKT system. Needs the active set at
/// the optimum to be linearly independent, which random instances are.
pub fn polyhedron_projection_oracle(
    x: &[f64],
    constraints: &[(Vec<f64>, f64)],
) -> Option<Vec<f64>> {
    let m = constraints.len();
    let d = x.len();
    assert!(m < 31);
    for mask in 0u32..1 << m {
        let active: Vec<usize> = (0..m).filter(|&k| mask >> k & 1 == 1).collect();
        if active.len() > d {
            continue;
        }
        let mut y = x.to_vec();
        if !active.is_empty() {
            let gram: Vec<Vec<f64>> = active
                .iter()
                .map(|&k| active.iter().map(|&l| dot(&constraints[k].0, &constraints[l].0)).collect())
                .collect();
            let rhs: Vec<f64> =
                active.iter().map(|&k| dot(&constraints[k].0, x) - constraints[k].1).collect();
            let Some(nu) = solve_small(&gram, &rhs) else { continue };
            if nu.iter().any(|&v| v < -KKT_TOL) {
                continue;
            }
            for (idx, &k) in active.iter().enumerate() {
                for j in 0..d {
                    y[j] -= nu[idx] * constraints[k].0[j];
                }
            }
        }
        if constraints.iter().all(|(a, b)| dot(a, &y) <= b + 1e-8) {
            return Some(y);
        }
    }
    None
}

/// Projects x onto { y >= 0, sum y = 1 } by enumerating the support set.
pub fn simplex_projection_oracle(x: &[f64]) -> Option<Vec<f64>> {
    let d = x.len();
    assert!(d < 31);
    for mask in 1u32..1 << d {
        let support: Vec<usize> = (0..d).filter(|&i| mask >> i & 1 == 1).collect();
        let tau = (support.iter().map(|&i| x[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let on_ok = support.iter().all(|&i| x[i] - tau >= -KKT_TOL);
        let off_ok = (0..d).filter(|i| mask >> i & 1 == 0).all(|i| x[i] - tau <= KKT_TOL);
        if on_ok && off_ok {
            let mut y = vec![0.0; d];
            for &i in &support {
                y[i] = (x[i] - tau).max(0.0);
            }
            return Some(y);
        }
    }
    None
}
