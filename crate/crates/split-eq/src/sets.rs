//! Closed convex sets and Euclidean projections onto them.
//!
//! The solver only ever touches sets through `project` / `contains`, so the enum
//! covers exactly the shapes the algorithms and the outer-approximation step need:
//! boxes, balls, the probability simplex, halfspaces, finite intersections of a base
//! set with halfspaces, and the whole space. Projection onto an intersection runs
//! Dykstra's alternating method with correction vectors, which converges to the
//! exact projection (not merely a feasible point) for this class of sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Norms below this make a halfspace normal meaningless; callers treat the
/// would-be halfspace as the whole space.
pub const DEGENERATE_NORMAL: f64 = 1e-14;

/// Default Dykstra cycle-displacement tolerance.
pub const INTERSECTION_TOL: f64 = 1e-10;
/// Default Dykstra sweep cap.
pub const INTERSECTION_MAX_SWEEPS: usize = 10_000;

/// Closed halfspace { v : <normal, v> <= offset }. The normal is not normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    normal: Point,
    offset: f64,
}

impl Halfspace {
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::NonFinite("halfspace offset".into()));
        }
        if normal.norm() < DEGENERATE_NORMAL {
            return Err(Error::InvalidSet("halfspace normal is degenerate".into()));
        }
        Ok(Self { normal, offset })
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance from x to the boundary plane; <= 0 inside.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        (self.normal.dot(x) - self.offset) / self.normal.norm()
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.signed_distance(x) <= tol
    }
}

/// x clamped into [lo, hi] componentwise.
pub fn project_box(x: &Point, lo: &Point, hi: &Point) -> Result<Point> {
    if x.dim() != lo.dim() || lo.dim() != hi.dim() {
        return Err(Error::DimensionMismatch("project_box: x, lo, hi".into()));
    }
    if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
        return Err(Error::InvalidSet("box has lo > hi in some coordinate".into()));
    }
    Ok(Point::raw(
        x.iter()
            .zip(lo.iter().zip(hi.iter()))
            .map(|(&v, (&l, &h))| v.clamp(l, h))
            .collect(),
    ))
}

/// Radial projection onto the closed ball B(center, radius), radius > 0.
pub fn project_ball(x: &Point, center: &Point, radius: f64) -> Point {
    assert!(radius > 0.0, "project_ball: radius must be positive");
    debug_assert_eq!(x.dim(), center.dim());
    let d = x.dist(center);
    if d <= radius {
        x.clone()
    } else {
        center.add_scaled(radius / d, &(x - center))
    }
}

/// Projection onto the probability simplex { v >= 0, sum v = 1 } by sort and threshold.
pub fn project_simplex(x: &Point) -> Point {
    let d = x.dim();
    let mut u: Vec<f64> = x.coords().to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            tau = candidate;
        }
    }
    let _ = d;
    Point::raw(x.iter().map(|&v| (v - tau).max(0.0)).collect())
}

/// Projection onto a halfspace: identity inside, otherwise one reflection step
/// x - ((<a,x> - b) / ||a||^2) a onto the boundary plane.
pub fn project_halfspace(x: &Point, h: &Halfspace) -> Point {
    debug_assert_eq!(x.dim(), h.normal.dim());
    let excess = h.normal.dot(x) - h.offset;
    if excess <= 0.0 {
        x.clone()
    } else {
        x.add_scaled(-excess / h.normal.norm_sq(), &h.normal)
    }
}

/// Halfspace of points at least as close to `near` as to `far`:
/// { v : ||near - v|| <= ||far - v|| }. Degenerates to the whole space (None)
/// when the two anchors coincide.
pub fn halfspace_from_bisector(near: &Point, far: &Point) -> Option<Halfspace> {
    debug_assert_eq!(near.dim(), far.dim());
    let normal = far - near;
    if normal.norm() < DEGENERATE_NORMAL {
        return None;
    }
    let offset = 0.5 * (far.norm_sq() - near.norm_sq());
    Some(Halfspace { normal, offset })
}

/// Result of a Dykstra projection.
#[derive(Clone, Debug)]
pub struct ProjectionOutcome {
    pub point: Point,
    pub sweeps: usize,
    /// Cycle displacement dropped below tol before the sweep cap.
    pub converged: bool,
    /// Worst constraint violation of the returned point (0 when feasible).
    pub max_violation: f64,
}

/// Projection of x onto base ∩ halfspaces by Dykstra's algorithm.
///
/// A stalled, still-infeasible run signals an empty (or numerically empty)
/// intersection; callers inspect `converged` and `max_violation`.
pub fn project_intersection(
    x: &Point,
    base: &ConvexSet,
    halfspaces: &[Halfspace],
    tol: f64,
    max_sweeps: usize,
) -> ProjectionOutcome {
    // one correction vector per set, base first
    let mut corrections = vec![Point::zeros(x.dim()); 1 + halfspaces.len()];
    project_intersection_resumed(x, base, halfspaces, tol, max_sweeps, &mut corrections)
}

/// Dykstra projection that picks up from a previous run's corrections.
///
/// The sweep maintains current = x - sum(corrections), so replaying stored
/// corrections restores the iterate exactly and further sweeps continue the
/// same dual ascent. New trailing sets enter with zero corrections, which is
/// how a growing halfspace list (same x, same leading sets) is resumed
/// cheaply instead of restarted.
pub(crate) fn project_intersection_resumed(
    x: &Point,
    base: &ConvexSet,
    halfspaces: &[Halfspace],
    tol: f64,
    max_sweeps: usize,
    corrections: &mut Vec<Point>,
) -> ProjectionOutcome {
    assert!(tol > 0.0);
    corrections.resize(1 + halfspaces.len(), Point::zeros(x.dim()));
    let mut current = x.clone();
    for c in corrections.iter() {
        current = &current - c;
    }
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < max_sweeps {
        sweeps += 1;
        let mut displacement = 0.0;
        for (i, correction) in corrections.iter_mut().enumerate() {
            let shifted = &current + correction;
            let projected = if i == 0 {
                base.project(&shifted)
            } else {
                project_halfspace(&shifted, &halfspaces[i - 1])
            };
            *correction = &shifted - &projected;
            displacement += current.dist(&projected);
            current = projected;
        }
        if displacement <= tol {
            converged = true;
            break;
        }
    }

    let mut max_violation = base.violation(&current);
    for h in halfspaces {
        max_violation = max_violation.max(h.signed_distance(&current).max(0.0));
    }
    ProjectionOutcome { point: current, sweeps, converged, max_violation }
}

/// Flattens a set into inequality rows <a, v> <= b with unit normals, when the
/// set is polyhedral. None for balls and the simplex.
pub(crate) fn polyhedral_rows(set: &ConvexSet) -> Option<Vec<(Point, f64)>> {
    match set {
        ConvexSet::WholeSpace { .. } => Some(Vec::new()),
        ConvexSet::Box { lo, hi } => {
            let d = lo.dim();
            let mut rows = Vec::with_capacity(2 * d);
            for i in 0..d {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                rows.push((Point::raw(e.clone()), hi[i]));
                e[i] = -1.0;
                rows.push((Point::raw(e), -lo[i]));
            }
            Some(rows)
        }
        ConvexSet::Halfspace(h) => Some(vec![unit_row(h)]),
        ConvexSet::Intersection { base, halfspaces } => {
            let mut rows = polyhedral_rows(base)?;
            rows.extend(halfspaces.iter().map(unit_row));
            Some(rows)
        }
        _ => None,
    }
}

pub(crate) fn unit_row(h: &Halfspace) -> (Point, f64) {
    let n = h.normal.norm();
    (h.normal.scale(1.0 / n), h.offset / n)
}

/// A row is considered satisfied below this (rows carry unit normals, so
/// violations are distances).
const ACTIVE_SET_FEAS_TOL: f64 = 1e-11;
/// The reconstructed point must pass a full feasibility scan at this level.
const ACTIVE_SET_VERIFY_TOL: f64 = 1e-9;
/// ||z||^2 below this means the candidate normal is dependent on the working
/// set and only multiplier exchanges can make progress.
const ACTIVE_SET_DEP_TOL: f64 = 1e-13;
const ACTIVE_SET_MAX_STEPS: usize = 5_000;

/// Gaussian elimination with partial pivoting on a q x q system, q small.
fn solve_dense_small(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let q = rhs.len();
    for col in 0..q {
        let pivot = (col..q).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..q {
            let f = m[row][col] / m[col][col];
            for k in col..q {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for col in (0..q).rev() {
        let mut s = rhs[col];
        for k in col + 1..q {
            s -= m[col][k] * rhs[k];
        }
        rhs[col] = s / m[col][col];
    }
    Some(rhs)
}

/// Splits a candidate normal against the working rows: r solves
/// (N^T N) r = N^T a and z = a - N r is the part orthogonal to the working
/// normals.
fn split_against_working(
    a: &Point,
    working: &[usize],
    rows: &[(Point, f64)],
) -> Option<(Vec<f64>, Point)> {
    let q = working.len();
    if q == 0 {
        return Some((Vec::new(), a.clone()));
    }
    let gram: Vec<Vec<f64>> = working
        .iter()
        .map(|&i| working.iter().map(|&j| rows[i].0.dot(&rows[j].0)).collect())
        .collect();
    let rhs: Vec<f64> = working.iter().map(|&i| rows[i].0.dot(a)).collect();
    let r = solve_dense_small(gram, rhs)?;
    let mut z = a.clone();
    for (j, &i) in working.iter().enumerate() {
        z = z.add_scaled(-r[j], &rows[i].0);
    }
    Some((r, z))
}

/// Exact projection of p onto { v : <a_i, v> <= b_i }, rows with unit normals,
/// by a dual active-set method for the identity-Hessian QP. The iterate keeps
/// the form v = p - sum mu_i a_i with mu >= 0 and the working rows tight; a
/// step either activates the most violated row or swaps out a row whose
/// multiplier would turn negative, so near-parallel rows are exchanged rather
/// than zigzagged between, which is the failure mode of cyclic projection
/// schemes on accumulated outer-approximation cuts. Finite in exact
/// arithmetic. Returns None on numerical breakdown or when the KKT
/// reconstruction fails its feasibility scan; callers then fall back to
/// Dykstra.
pub(crate) fn project_polyhedron(p: &Point, rows: &[(Point, f64)]) -> Option<Point> {
    let mut v = p.clone();
    let mut working: Vec<usize> = Vec::new();
    let mut mu: Vec<f64> = Vec::new();
    let mut steps = 0usize;

    'outer: loop {
        let mut k = usize::MAX;
        let mut worst = ACTIVE_SET_FEAS_TOL;
        for (i, (a, b)) in rows.iter().enumerate() {
            let s = a.dot(&v) - b;
            if s > worst {
                worst = s;
                k = i;
            }
        }
        if k == usize::MAX {
            break;
        }
        let (a_k, b_k) = &rows[k];
        // The candidate's multiplier accumulates over every partial step in
        // this inner loop; v = p - N mu - mu_k a_k must hold throughout.
        let mut mu_k = 0.0f64;

        loop {
            steps += 1;
            if steps > ACTIVE_SET_MAX_STEPS {
                return None;
            }
            let s_k = a_k.dot(&v) - b_k;
            if s_k <= ACTIVE_SET_FEAS_TOL {
                // drop steps made the candidate tight; record its multiplier
                if mu_k > 0.0 {
                    working.push(k);
                    mu.push(mu_k);
                }
                continue 'outer;
            }
            let (r, z) = split_against_working(a_k, &working, rows)?;
            let zz = z.norm_sq();
            let t_full = if zz > ACTIVE_SET_DEP_TOL { s_k / zz } else { f64::INFINITY };
            let mut t_drop = f64::INFINITY;
            let mut blocker = usize::MAX;
            for (j, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let cand = mu[j] / rj;
                    if cand < t_drop {
                        t_drop = cand;
                        blocker = j;
                    }
                }
            }
            let t = t_full.min(t_drop);
            if !t.is_finite() || t > 1e14 {
                // dependent candidate with nothing to drop: inconsistent rows
                return None;
            }
            if zz > ACTIVE_SET_DEP_TOL {
                v = v.add_scaled(-t, &z);
            }
            for (j, m) in mu.iter_mut().enumerate() {
                *m -= t * r[j];
            }
            mu_k += t;
            if t_full <= t_drop {
                working.push(k);
                mu.push(mu_k);
                continue 'outer;
            }
            working.remove(blocker);
            mu.remove(blocker);
        }
    }

    // Rebuild from the dual certificate so the result is KKT-exact, then
    // verify it against every row.
    let mut exact = p.clone();
    for (j, &i) in working.iter().enumerate() {
        if mu[j] < -1e-12 {
            return None;
        }
        exact = exact.add_scaled(-mu[j].max(0.0), &rows[i].0);
    }
    let mut residual = 0.0f64;
    for (a, b) in rows {
        residual = residual.max(a.dot(&exact) - b);
    }
    for &i in &working {
        residual = residual.max((rows[i].0.dot(&exact) - rows[i].1).abs());
    }
    if residual > ACTIVE_SET_VERIFY_TOL {
        return None;
    }
    Some(exact)
}

/// Drops halfspaces whose predicate is implied by the remaining ones on every
/// probe point. Probabilistic: a kept halfspace is certainly needed, a dropped one
/// is only very likely redundant. Callers that need exactness keep the full list.
pub fn prune_redundant_halfspaces(
    halfspaces: &[Halfspace],
    probe_center: &Point,
    probe_radius: f64,
    probes: usize,
    rng: &mut impl Rng,
) -> Vec<Halfspace> {
    let dim = probe_center.dim();
    let points: Vec<Point> = (0..probes)
        .map(|_| {
            Point::raw(
                (0..dim)
                    .map(|i| probe_center[i] + rng.gen_range(-probe_radius..probe_radius))
                    .collect(),
            )
        })
        .collect();

    let mut kept: Vec<Halfspace> = Vec::with_capacity(halfspaces.len());
    for (i, h) in halfspaces.iter().enumerate() {
        let others_satisfied = |p: &Point| {
            halfspaces
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .all(|(_, o)| o.contains(p, 0.0))
                && kept.iter().all(|o| o.contains(p, 0.0))
        };
        // h is binding if some probe passes every other constraint but fails h
        let binding = points.iter().any(|p| others_satisfied(p) && !h.contains(p, 0.0));
        if binding {
            kept.push(h.clone());
        }
    }
    kept
}

/// A closed convex set with a computable projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexSet {
    Box { lo: Point, hi: Point },
    Ball { center: Point, radius: f64 },
    /// Probability simplex { v >= 0, sum v = 1 } in R^dim.
    Simplex { dim: usize },
    Halfspace(Halfspace),
    Intersection { base: Box<ConvexSet>, halfspaces: Vec<Halfspace> },
    WholeSpace { dim: usize },
}

impl ConvexSet {
    pub fn box_set(lo: Point, hi: Point) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch("box lo/hi".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidSet("box has lo > hi in some coordinate".into()));
        }
        Ok(ConvexSet::Box { lo, hi })
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidSet("ball radius must be positive and finite".into()));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    /// Structural validity check, used when a set arrives from a file.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Box { lo, hi } => {
                if lo.dim() != hi.dim() {
                    return Err(Error::DimensionMismatch("box lo/hi".into()));
                }
                if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
                    return Err(Error::InvalidSet("box has lo > hi in some coordinate".into()));
                }
            }
            ConvexSet::Ball { radius, .. } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidSet("ball radius must be positive and finite".into()));
                }
            }
            ConvexSet::Simplex { dim } | ConvexSet::WholeSpace { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidSet("dimension must be >= 1".into()));
                }
            }
            ConvexSet::Halfspace(h) => {
                if h.normal.norm() < DEGENERATE_NORMAL {
                    return Err(Error::InvalidSet("halfspace normal is degenerate".into()));
                }
            }
            ConvexSet::Intersection { base, halfspaces } => {
                base.validate()?;
                for h in halfspaces {
                    if h.normal.dim() != base.dim() {
                        return Err(Error::DimensionMismatch("intersection halfspace".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lo, .. } => lo.dim(),
            ConvexSet::Ball { center, .. } => center.dim(),
            ConvexSet::Simplex { dim } | ConvexSet::WholeSpace { dim } => *dim,
            ConvexSet::Halfspace(h) => h.normal.dim(),
            ConvexSet::Intersection { base, .. } => base.dim(),
        }
    }

    pub fn project(&self, x: &Point) -> Point {
        debug_assert_eq!(x.dim(), self.dim());
        match self {
            ConvexSet::Box { lo, hi } => project_box(x, lo, hi).expect("validated box"),
            ConvexSet::Ball { center, radius } => project_ball(x, center, *radius),
            ConvexSet::Simplex { .. } => project_simplex(x),
            ConvexSet::Halfspace(h) => project_halfspace(x, h),
            ConvexSet::Intersection { base, halfspaces } => {
                project_intersection(x, base, halfspaces, INTERSECTION_TOL, INTERSECTION_MAX_SWEEPS)
                    .point
            }
            ConvexSet::WholeSpace { .. } => x.clone(),
        }
    }

    /// Worst-case constraint violation, 0 for feasible points. Distances for
    /// box/ball/halfspace; algebraic residuals for the simplex equality part.
    pub fn violation(&self, x: &Point) -> f64 {
        match self {
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(&v, (&l, &h))| (l - v).max(v - h).max(0.0))
                .fold(0.0, f64::max),
            ConvexSet::Ball { center, radius } => (x.dist(center) - radius).max(0.0),
            ConvexSet::Simplex { .. } => {
                let neg = x.iter().fold(0.0f64, |acc, &v| acc.max(-v));
                let sum_gap = (x.iter().sum::<f64>() - 1.0).abs();
                neg.max(sum_gap)
            }
            ConvexSet::Halfspace(h) => h.signed_distance(x).max(0.0),
            ConvexSet::Intersection { base, halfspaces } => {
                let mut v = base.violation(x);
                for h in halfspaces {
                    v = v.max(h.signed_distance(x).max(0.0));
                }
                v
            }
            ConvexSet::WholeSpace { .. } => 0.0,
        }
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Random feasible point, used by the sampling checkers. Uniform on boxes,
    /// rejection-free constructions elsewhere; unbounded sets sample a bounded
    /// probe region and project.
    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        match self {
            ConvexSet::Box { lo, hi } => Point::raw(
                lo.iter()
                    .zip(hi.iter())
                    .map(|(&l, &h)| if l < h { rng.gen_range(l..h) } else { l })
                    .collect(),
            ),
            ConvexSet::Ball { center, radius } => {
                let dim = center.dim();
                let dir = Point::raw((0..dim).map(|_| standard_normal(rng)).collect());
                let n = dir.norm();
                if n == 0.0 {
                    return center.clone();
                }
                let r = radius * rng.gen_range(0.0..1.0f64).powf(1.0 / dim as f64);
                center.add_scaled(r / n, &dir)
            }
            ConvexSet::Simplex { dim } => {
                let raw: Vec<f64> = (0..*dim)
                    .map(|_| -(rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln()))
                    .collect();
                let total: f64 = raw.iter().sum();
                Point::raw(raw.into_iter().map(|v| v / total).collect())
            }
            ConvexSet::Halfspace(h) => {
                let scale = 1.0 + h.offset.abs() / h.normal.norm();
                let probe =
                    Point::raw((0..self.dim()).map(|_| rng.gen_range(-scale..scale)).collect());
                project_halfspace(&probe, h)
            }
            ConvexSet::Intersection { .. } => {
                let probe =
                    Point::raw((0..self.dim()).map(|_| rng.gen_range(-5.0..5.0)).collect());
                self.project(&probe)
            }
            ConvexSet::WholeSpace { dim } => {
                Point::raw((0..*dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
            }
        }
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; u1 bounded away from 0 so the log is finite.
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[f64]) -> Point {
        Point::from_slice(coords).unwrap()
    }

    #[test]
    fn box_projection_clamps() {
        let lo = pt(&[-1.0, -1.0]);
        let hi = pt(&[1.0, 1.0]);
        assert_eq!(project_box(&pt(&[2.0, -3.0]), &lo, &hi).unwrap(), pt(&[1.0, -1.0]));
        assert_eq!(project_box(&pt(&[0.2, 0.9]), &lo, &hi).unwrap(), pt(&[0.2, 0.9]));
        assert!(project_box(&pt(&[0.0]), &pt(&[1.0]), &pt(&[-1.0])).is_err());
    }

    #[test]
    fn ball_projection_is_radial() {
        let c = pt(&[0.0, 0.0]);
        assert_eq!(project_ball(&pt(&[2.0, 0.0]), &c, 1.0), pt(&[1.0, 0.0]));
        assert_eq!(project_ball(&pt(&[0.3, 0.1]), &c, 1.0), pt(&[0.3, 0.1]));
        // center projects to itself
        assert_eq!(project_ball(&c, &c, 2.0), c);
    }

    #[test]
    fn simplex_projection_known_values() {
        assert_eq!(project_simplex(&pt(&[2.0, 0.0])), pt(&[1.0, 0.0]));
        let p = project_simplex(&pt(&[0.3, 0.3]));
        assert!(p.dist(&pt(&[0.5, 0.5])) < 1e-15);
        let q = project_simplex(&pt(&[-1.0, -2.0, 0.5]));
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(q.iter().all(|&v| v >= 0.0));
        // d=1 simplex is the single point {1}
        assert_eq!(project_simplex(&pt(&[-3.0])), pt(&[1.0]));
    }

    #[test]
    fn halfspace_projection_formula() {
        let h = Halfspace::new(pt(&[1.0, 0.0]), 1.0).unwrap();
        assert_eq!(project_halfspace(&pt(&[2.0, 5.0]), &h), pt(&[1.0, 5.0]));
        assert_eq!(project_halfspace(&pt(&[0.5, -1.0]), &h), pt(&[0.5, -1.0]));
        assert!(Halfspace::new(pt(&[0.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn bisector_halfspace_example() {
        let h = halfspace_from_bisector(&pt(&[0.0, 0.0]), &pt(&[2.0, 0.0])).unwrap();
        assert_eq!(h.normal(), &pt(&[2.0, 0.0]));
        assert_eq!(h.offset(), 2.0);
        // the cut is { v1 <= 1 }
        assert!(h.contains(&pt(&[0.99, 7.0]), 0.0));
        assert!(!h.contains(&pt(&[1.01, -7.0]), 0.0));
        assert!(halfspace_from_bisector(&pt(&[1.0, 1.0]), &pt(&[1.0, 1.0])).is_none());
    }

    #[test]
    fn bisector_agrees_with_distance_predicate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let near = pt(&[0.3, -1.2, 0.7]);
        let far = pt(&[-0.4, 0.9, 1.5]);
        let h = halfspace_from_bisector(&near, &far).unwrap();
        for _ in 0..1000 {
            let v = Point::raw((0..3).map(|_| rng.gen_range(-4.0..4.0)).collect());
            let by_distance = near.dist(&v) <= far.dist(&v);
            let by_halfspace = h.contains(&v, 0.0);
            // points essentially on the bisector can land either way
            if (near.dist(&v) - far.dist(&v)).abs() > 1e-9 {
                assert_eq!(by_distance, by_halfspace);
            }
        }
    }

    #[test]
    fn dykstra_box_and_halfspace() {
        let base = ConvexSet::box_set(pt(&[-1.0, -1.0]), pt(&[1.0, 1.0])).unwrap();
        let h = Halfspace::new(pt(&[1.0, 1.0]), 0.0).unwrap();
        let out = project_intersection(&pt(&[1.0, 1.0]), &base, &[h], 1e-12, 10_000);
        assert!(out.converged);
        assert!(out.point.dist(&pt(&[0.0, 0.0])) < 1e-9);
        assert!(out.max_violation <= 1e-10);
    }

    #[test]
    fn dykstra_without_halfspaces_is_plain_projection() {
        let base = ConvexSet::box_set(pt(&[0.0, 0.0]), pt(&[1.0, 1.0])).unwrap();
        let out = project_intersection(&pt(&[3.0, -2.0]), &base, &[], 1e-12, 100);
        assert!(out.converged);
        assert_eq!(out.point, pt(&[1.0, 0.0]));
    }

    #[test]
    fn dykstra_flags_empty_intersection() {
        let base = ConvexSet::box_set(pt(&[0.0, 0.0]), pt(&[1.0, 1.0])).unwrap();
        let h = Halfspace::new(pt(&[1.0, 0.0]), -1.0).unwrap(); // v1 <= -1, disjoint from box
        let out = project_intersection(&pt(&[0.5, 0.5]), &base, &[h], 1e-10, 500);
        assert!(!out.converged || out.max_violation > 1e-9);
        assert!(out.max_violation > 0.4);
    }

    #[test]
    fn intersection_set_projects_through_enum() {
        let set = ConvexSet::Intersection {
            base: Box::new(ConvexSet::box_set(pt(&[-2.0, -2.0]), pt(&[2.0, 2.0])).unwrap()),
            halfspaces: vec![Halfspace::new(pt(&[0.0, 1.0]), 0.5).unwrap()],
        };
        let p = set.project(&pt(&[0.3, 3.0]));
        assert!(p.dist(&pt(&[0.3, 0.5])) < 1e-8);
        assert!(set.contains(&p, 1e-9));
    }

    #[test]
    fn prune_drops_dominated_halfspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let tight = Halfspace::new(pt(&[1.0, 0.0]), 1.0).unwrap();
        let slack = Halfspace::new(pt(&[1.0, 0.0]), 3.0).unwrap(); // implied by tight
        let kept = prune_redundant_halfspaces(
            &[tight.clone(), slack],
            &pt(&[0.0, 0.0]),
            5.0,
            1000,
            &mut rng,
        );
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0], tight);
    }

    #[test]
    fn serde_kinds_match_schema() {
        let b = ConvexSet::box_set(pt(&[0.0]), pt(&[1.0])).unwrap();
        assert_eq!(
            serde_json::to_string(&b).unwrap(),
            r#"{"kind":"box","lo":[0.0],"hi":[1.0]}"#
        );
        let w = ConvexSet::WholeSpace { dim: 3 };
        assert_eq!(serde_json::to_string(&w).unwrap(), r#"{"kind":"whole-space","dim":3}"#);
        let parsed: ConvexSet =
            serde_json::from_str(r#"{"kind":"ball","center":[0.0,0.0],"radius":2.0}"#).unwrap();
        assert_eq!(parsed, ConvexSet::ball(pt(&[0.0, 0.0]), 2.0).unwrap());
    }

    #[test]
    fn samples_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sets = vec![
            ConvexSet::box_set(pt(&[-1.0, 0.0]), pt(&[2.0, 0.5])).unwrap(),
            ConvexSet::ball(pt(&[1.0, -1.0]), 0.7).unwrap(),
            ConvexSet::Simplex { dim: 4 },
            ConvexSet::Halfspace(Halfspace::new(pt(&[1.0, 2.0]), -1.0).unwrap()),
            ConvexSet::WholeSpace { dim: 2 },
        ];
        for set in &sets {
            for _ in 0..200 {
                let p = set.sample(&mut rng);
                assert!(set.contains(&p, 1e-9), "sample escaped {set:?}");
            }
        }
    }

    #[test]
    fn active_set_projection_matches_simple_projections() {
        let lo = pt(&[-1.0, -1.0, -1.0]);
        let hi = pt(&[1.0, 2.0, 0.5]);
        let base = ConvexSet::box_set(lo.clone(), hi.clone()).unwrap();
        let x = pt(&[3.0, -2.5, 0.1]);
        let rows = polyhedral_rows(&base).unwrap();
        let got = project_polyhedron(&x, &rows).unwrap();
        assert!(got.dist(&project_box(&x, &lo, &hi).unwrap()) <= 1e-12);

        let h = Halfspace::new(pt(&[1.0, 1.0, 0.0]), 0.5).unwrap();
        let got = project_polyhedron(&x, &[unit_row(&h)]).unwrap();
        assert!(got.dist(&project_halfspace(&x, &h)) <= 1e-12);

        // no rows: the anchor itself
        assert_eq!(project_polyhedron(&x, &[]).unwrap(), x);
    }

    #[test]
    fn active_set_projection_agrees_with_dykstra_on_random_polyhedra() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..40 {
            let d = 2 + trial % 3;
            let lo = Point::raw((0..d).map(|_| -rng.gen_range(0.5..2.0)).collect());
            let hi = Point::raw((0..d).map(|_| rng.gen_range(0.5..2.0)).collect());
            let base = ConvexSet::box_set(lo, hi).unwrap();
            let halfspaces: Vec<Halfspace> = (0..trial % 5)
                .map(|_| {
                    let mut n: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    n[0] += 1.5;
                    // offset keeps the origin inside, so the polyhedron is nonempty
                    Halfspace::new(Point::raw(n), rng.gen_range(0.1..1.0)).unwrap()
                })
                .collect();
            let x = Point::raw((0..d).map(|_| rng.gen_range(-4.0..4.0)).collect());

            let mut rows = polyhedral_rows(&base).unwrap();
            rows.extend(halfspaces.iter().map(unit_row));
            let exact = project_polyhedron(&x, &rows).unwrap();

            let dykstra = project_intersection(&x, &base, &halfspaces, 1e-12, 200_000);
            assert!(dykstra.converged, "trial {trial}");
            assert!(
                exact.dist(&dykstra.point) <= 1e-8,
                "trial {trial}: {exact:?} vs {:?}",
                dykstra.point
            );
        }
    }

    #[test]
    fn active_set_projection_exchanges_near_parallel_rows() {
        // Two almost identical halfspaces; only the deeper one binds. Cyclic
        // schemes crawl on this geometry, the exchange logic must not.
        let a1 = pt(&[1.0, 0.0]);
        let a2 = pt(&[1.0, 1e-9]).scale(1.0 / (1.0f64 + 1e-18).sqrt());
        let rows = vec![(a1, 0.5), (a2, 0.5 - 1e-9)];
        let x = pt(&[4.0, 0.3]);
        let got = project_polyhedron(&x, &rows).unwrap();
        for (a, b) in &rows {
            assert!(a.dot(&got) - b <= 1e-10);
        }
        // the projection moves essentially along the first coordinate
        assert!((got[1] - 0.3).abs() <= 1e-6, "{got:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Projections are idempotent and nonexpansive, and satisfy the two
        // classical projection inequalities.
        #[test]
        fn projection_properties(
            xs in prop::collection::vec(-5.0f64..5.0, 3),
            ys in prop::collection::vec(-5.0f64..5.0, 3),
            which in 0usize..4,
        ) {
            let x = Point::raw(xs);
            let y_seed = Point::raw(ys);
            let set = match which {
                0 => ConvexSet::box_set(pt(&[-1.0, -0.5, 0.0]), pt(&[1.0, 2.0, 0.25])).unwrap(),
                1 => ConvexSet::ball(pt(&[0.5, -0.5, 1.0]), 1.5).unwrap(),
                2 => ConvexSet::Simplex { dim: 3 },
                _ => ConvexSet::Halfspace(Halfspace::new(pt(&[1.0, -2.0, 0.5]), 0.75).unwrap()),
            };
            let px = set.project(&x);
            let py = set.project(&y_seed);

            prop_assert!(set.contains(&px, 1e-9));
            // idempotence
            prop_assert!(set.project(&px).dist(&px) <= 1e-9);
            // nonexpansiveness
            prop_assert!(px.dist(&py) <= x.dist(&y_seed) + 1e-9);
            // strengthened Pythagoras against the feasible point py:
            // ||y - Px||^2 + ||Px - x||^2 <= ||y - x||^2
            let lhs = py.dist(&px).powi(2) + px.dist(&x).powi(2);
            prop_assert!(lhs <= x.dist(&py).powi(2) + 1e-8);
            // variational characterization: <x - Px, Px - y> >= 0
            prop_assert!((&x - &px).dot(&(&px - &py)) >= -1e-8);
        }
    }
}
