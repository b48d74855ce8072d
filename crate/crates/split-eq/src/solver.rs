//! Outer iterations: the weak-convergence extragradient loop and the hybrid
//! outer-approximation variant that projects the anchor onto accumulated
//! bisector cuts.

use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{validate_config, SolverConfig};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::SplitProblem;
use crate::prox::{prox_step, resolvent};
use crate::sets::{
    halfspace_from_bisector, project_intersection, prune_redundant_halfspaces, ConvexSet,
    Halfspace,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Plain loop: the corrected point becomes the next iterate.
    Weak,
    /// Anchored loop: the next iterate is the projection of x0 onto the
    /// feasible set cut down by two bisector halfspaces per iteration.
    Hybrid,
}

/// Complete record of one outer iteration. Every field refers to iteration n:
/// `x` is the iterate the step started from and `x_next` the one it produced.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub n: usize,
    pub x: Point,
    pub y_list: Vec<Point>,
    pub z_list: Vec<Point>,
    /// Lowest index attaining max_i ||z_list[i] - x||.
    pub i_star: usize,
    pub z_bar: Point,
    pub a_zbar: Point,
    pub w_list: Vec<Point>,
    /// Lowest index attaining max_j ||w_list[j] - a_zbar||.
    pub j_star: usize,
    pub w_bar: Point,
    /// The projected corrected point; equals `x_next` in weak mode.
    pub t: Point,
    pub x_next: Point,
    pub residual: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

/// Anchor and accumulated cuts for the hybrid loop. Each iteration records
/// exactly two entries; a degenerate bisector (coincident points, whole-space
/// condition) is kept as a None marker so the list holds 2n entries at the
/// start of iteration n.
#[derive(Clone, Debug)]
pub struct HybridState {
    pub x0: Point,
    pub cuts: Vec<Option<Halfspace>>,
    /// Dykstra corrections from the last anchor projection. The anchor is
    /// fixed and the active cut list only appends, so each projection resumes
    /// the previous one instead of starting cold.
    corrections: Vec<Point>,
}

impl HybridState {
    pub fn new(x0: Point) -> Self {
        Self { x0, cuts: Vec::new(), corrections: Vec::new() }
    }

    /// The non-degenerate cuts, in insertion order.
    pub fn active_cuts(&self) -> Vec<Halfspace> {
        self.cuts.iter().flatten().cloned().collect()
    }
}

pub struct FamilySweep {
    pub y_list: Vec<Point>,
    pub z_list: Vec<Point>,
    pub i_star: usize,
    pub z_bar: Point,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

pub struct ResolventSweep {
    pub a_zbar: Point,
    pub w_list: Vec<Point>,
    pub j_star: usize,
    pub w_bar: Point,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

/// Lowest index of the point furthest from `origin`.
fn furthest_from(points: &[Point], origin: &Point) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = p.dist(origin);
        if d > best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Runs the N prox pairs in parallel: y_i minimizes
/// lambda f_i(x, .) + 0.5 ||. - x||^2, z_i the same with f_i(y_i, .), both
/// anchored at x, then picks the z furthest from x (ties to the lowest
/// index). Selection happens after the join, so the result is independent of
/// worker scheduling.
pub fn extragradient_sweep(
    prob: &SplitProblem,
    x: &Point,
    cfg: &SolverConfig,
) -> Result<FamilySweep> {
    let pairs: Vec<(Point, Point, usize, bool)> = prob
        .f_c()
        .par_iter()
        .map(|f| {
            let y = prox_step(
                f.as_ref(),
                x,
                x,
                cfg.lambda,
                prob.c(),
                cfg.inner_tol,
                cfg.inner_max_iter,
            )?;
            let z = prox_step(
                f.as_ref(),
                &y.point,
                x,
                cfg.lambda,
                prob.c(),
                cfg.inner_tol,
                cfg.inner_max_iter,
            )?;
            Ok((
                y.point,
                z.point,
                y.inner_iterations + z.inner_iterations,
                y.converged && z.converged,
            ))
        })
        .collect::<Result<_>>()?;

    let mut y_list = Vec::with_capacity(pairs.len());
    let mut z_list = Vec::with_capacity(pairs.len());
    let mut inner_iterations = 0;
    let mut inner_converged = true;
    for (y, z, iters, ok) in pairs {
        y_list.push(y);
        z_list.push(z);
        inner_iterations += iters;
        inner_converged &= ok;
    }
    let i_star = furthest_from(&z_list, x);
    let z_bar = z_list[i_star].clone();
    Ok(FamilySweep { y_list, z_list, i_star, z_bar, inner_iterations, inner_converged })
}

/// Applies the M resolvents to A z_bar in parallel and picks the value
/// furthest from A z_bar, ties to the lowest index.
pub fn resolvent_sweep(
    prob: &SplitProblem,
    z_bar: &Point,
    r_n: f64,
    cfg: &SolverConfig,
) -> Result<ResolventSweep> {
    let a_zbar = prob.a().apply(z_bar);
    let outs: Vec<(Point, usize, bool)> = prob
        .f_q()
        .par_iter()
        .map(|f| {
            let w = resolvent(
                f.as_ref(),
                &a_zbar,
                r_n,
                prob.q(),
                cfg.inner_tol,
                cfg.inner_max_iter,
            )?;
            Ok((w.point, w.inner_iterations, w.converged))
        })
        .collect::<Result<_>>()?;

    let mut w_list = Vec::with_capacity(outs.len());
    let mut inner_iterations = 0;
    let mut inner_converged = true;
    for (w, iters, ok) in outs {
        w_list.push(w);
        inner_iterations += iters;
        inner_converged &= ok;
    }
    let j_star = furthest_from(&w_list, &a_zbar);
    let w_bar = w_list[j_star].clone();
    Ok(ResolventSweep { a_zbar, w_list, j_star, w_bar, inner_iterations, inner_converged })
}

/// max over the y and z displacements from x and the image-side residual.
/// All three vanish exactly at a split solution.
pub fn residual(state: &SolverState) -> f64 {
    let mut r = state.w_bar.dist(&state.a_zbar);
    for y in &state.y_list {
        r = r.max(y.dist(&state.x));
    }
    for z in &state.z_list {
        r = r.max(z.dist(&state.x));
    }
    r
}

/// Projection onto the feasible set C, honoring config tolerances when C is
/// itself an intersection.
fn project_onto_c(prob: &SplitProblem, p: &Point, cfg: &SolverConfig, n: usize) -> Result<Point> {
    match prob.c() {
        ConvexSet::Intersection { base, halfspaces } => {
            let out = project_intersection(
                p,
                base,
                halfspaces,
                cfg.projection_tol,
                cfg.projection_max_sweeps,
            );
            if !out.converged && out.max_violation > cfg.projection_tol.sqrt() {
                return Err(Error::EmptyIntersection {
                    iteration: n,
                    detail: format!(
                        "projection onto C stalled with violation {}",
                        out.max_violation
                    ),
                });
            }
            Ok(out.point)
        }
        other => Ok(other.project(p)),
    }
}

/// One weak-mode step at iterate x: both sweeps, then the corrected point
/// z_bar + mu A'(w_bar - A z_bar) projected back onto C.
pub fn algorithm1_step(
    prob: &SplitProblem,
    x: &Point,
    n: usize,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    let es = extragradient_sweep(prob, x, cfg)?;
    let rs = resolvent_sweep(prob, &es.z_bar, cfg.r_schedule.at(n), cfg)?;
    let correction = prob.a().apply_adjoint(&(&rs.w_bar - &rs.a_zbar));
    let t = project_onto_c(prob, &es.z_bar.add_scaled(cfg.mu, &correction), cfg, n)?;
    let mut state = SolverState {
        n,
        x: x.clone(),
        y_list: es.y_list,
        z_list: es.z_list,
        i_star: es.i_star,
        z_bar: es.z_bar,
        a_zbar: rs.a_zbar,
        w_list: rs.w_list,
        j_star: rs.j_star,
        w_bar: rs.w_bar,
        x_next: t.clone(),
        t,
        residual: 0.0,
        inner_iterations: es.inner_iterations + rs.inner_iterations,
        inner_converged: es.inner_converged && rs.inner_converged,
    };
    state.residual = residual(&state);
    Ok(state)
}

/// One hybrid step: the weak-mode candidate becomes t_n, two bisector cuts
/// are appended ({v: ||t-v|| <= ||z_bar-v||} and {v: ||z_bar-v|| <= ||x-v||}),
/// and the next iterate is the projection of the anchor onto C intersected
/// with every cut so far. A stalled projection with substantial remaining
/// violation is reported as an empty intersection, which a solvable problem
/// cannot produce.
pub fn algorithm2_step(
    prob: &SplitProblem,
    x: &Point,
    n: usize,
    hybrid: &mut HybridState,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    let mut state = algorithm1_step(prob, x, n, cfg)?;
    hybrid.cuts.push(halfspace_from_bisector(&state.t, &state.z_bar));
    hybrid.cuts.push(halfspace_from_bisector(&state.z_bar, x));

    let mut active = hybrid.active_cuts();
    if cfg.prune_cuts && active.len() > 16 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0FFEE ^ n as u64);
        let radius = 4.0 * (1.0 + hybrid.x0.norm());
        active = prune_redundant_halfspaces(&active, &hybrid.x0, radius, 256, &mut rng);
    }

    // Polyhedral C admits an exact finite projection; the dual active-set
    // method exchanges near-parallel cuts instead of cycling between them,
    // which Dykstra does slower and slower as the cuts crowd the solution.
    if let Some(mut rows) = crate::sets::polyhedral_rows(prob.c()) {
        rows.extend(active.iter().map(crate::sets::unit_row));
        if let Some(x_next) = crate::sets::project_polyhedron(&hybrid.x0, &rows) {
            state.x_next = x_next;
            return Ok(state);
        }
    }

    let (base, mut halfspaces) = match prob.c() {
        ConvexSet::Intersection { base, halfspaces } => (base.as_ref(), halfspaces.clone()),
        other => (other, Vec::new()),
    };
    halfspaces.extend(active);
    let out = if cfg.prune_cuts {
        // Pruning reshuffles the list, so stored corrections do not apply.
        project_intersection(
            &hybrid.x0,
            base,
            &halfspaces,
            cfg.projection_tol,
            cfg.projection_max_sweeps,
        )
    } else {
        crate::sets::project_intersection_resumed(
            &hybrid.x0,
            base,
            &halfspaces,
            cfg.projection_tol,
            cfg.projection_max_sweeps,
            &mut hybrid.corrections,
        )
    };
    if !out.converged {
        if out.max_violation > cfg.projection_tol.sqrt() {
            return Err(Error::EmptyIntersection {
                iteration: n,
                detail: format!(
                    "projection onto the accumulated cuts stalled with violation {}",
                    out.max_violation
                ),
            });
        }
        state.inner_converged = false;
    }
    state.x_next = out.point;
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

/// Final outcome plus the config that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    pub algorithm: Algorithm,
    pub x: Point,
    pub a_zbar: Point,
    pub w_bar: Point,
    pub residual: f64,
    /// Completed outer steps (equals the number of trace rows).
    pub iterations: usize,
    pub status: SolveStatus,
    /// False when the starting point had to be projected onto C first.
    pub started_inside: bool,
    pub config: SolverConfig,
}

#[derive(Clone, Debug)]
pub struct TraceRow {
    pub n: usize,
    /// Iterate the step started from.
    pub x: Point,
    pub residual: f64,
    pub dist_to_known: Option<f64>,
    pub norm_zbar_minus_x: f64,
    pub norm_wbar_minus_azbar: f64,
    pub inner_iters_total: usize,
    /// Accumulated cut entries at the start of the iteration: 2n in hybrid
    /// mode, 0 in weak mode.
    pub halfspace_count: usize,
    pub elapsed_ms: f64,
}

impl TraceRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.residual,
            self.dist_to_known.map(|d| d.to_string()).unwrap_or_default(),
            self.norm_zbar_minus_x,
            self.norm_wbar_minus_azbar,
            self.inner_iters_total,
            self.halfspace_count,
            self.elapsed_ms
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub const CSV_HEADER: &'static str = "n,residual,dist_to_known_solution,norm_zbar_minus_x,norm_wbar_minus_Azbar,inner_iters_total,halfspace_count,elapsed_ms";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.csv_line());
            s.push('\n');
        }
        s
    }
}

pub struct SolveOptions<'a> {
    /// Skip the admissibility gate (the CLI --force path).
    pub skip_validation: bool,
    /// Fills the trace's distance column.
    pub known_solution: Option<&'a Point>,
    /// Called once per completed iteration, before the row is stored.
    pub observer: Option<&'a mut (dyn FnMut(&TraceRow) + Send)>,
}

impl Default for SolveOptions<'_> {
    fn default() -> Self {
        Self { skip_validation: false, known_solution: None, observer: None }
    }
}

pub fn solve(
    prob: &SplitProblem,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    x0: &Point,
) -> Result<(Solution, Trace)> {
    solve_with(prob, cfg, algorithm, x0, SolveOptions::default())
}

/// Iterates the chosen step until the residual reaches tol_residual or the
/// budget runs out. A starting point outside C is projected first and the
/// fact recorded on the solution. `workers` pins the rayon pool used for the
/// family sweeps; iterates are bitwise independent of that choice.
pub fn solve_with(
    prob: &SplitProblem,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    x0: &Point,
    opts: SolveOptions<'_>,
) -> Result<(Solution, Trace)> {
    if !opts.skip_validation {
        let report = validate_config(prob, cfg);
        if !report.passed() {
            return Err(Error::ConfigRejected(report.to_string()));
        }
    }
    if x0.dim() != prob.d1() {
        return Err(Error::DimensionMismatch(format!(
            "starting point dim {} vs problem dim {}",
            x0.dim(),
            prob.d1()
        )));
    }

    match cfg.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            pool.install(|| run_loop(prob, cfg, algorithm, x0, opts))
        }
        None => run_loop(prob, cfg, algorithm, x0, opts),
    }
}

fn run_loop(
    prob: &SplitProblem,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    x0: &Point,
    mut opts: SolveOptions<'_>,
) -> Result<(Solution, Trace)> {
    let started_inside = prob.c().contains(x0, 1e-9);
    let mut x = if started_inside { x0.clone() } else { project_onto_c(prob, x0, cfg, 0)? };

    let mut hybrid = match algorithm {
        Algorithm::Hybrid => Some(HybridState::new(x.clone())),
        Algorithm::Weak => None,
    };

    let mut trace = Trace::default();
    let mut status = SolveStatus::MaxIterations;
    let mut last: Option<SolverState> = None;
    for n in 0..cfg.max_iter {
        let clock = Instant::now();
        let halfspace_count = hybrid.as_ref().map_or(0, |h| h.cuts.len());
        let state = match hybrid.as_mut() {
            None => algorithm1_step(prob, &x, n, cfg)?,
            Some(h) => algorithm2_step(prob, &x, n, h, cfg)?,
        };
        let row = TraceRow {
            n,
            x: state.x.clone(),
            residual: state.residual,
            dist_to_known: opts.known_solution.map(|k| state.x.dist(k)),
            norm_zbar_minus_x: state.z_bar.dist(&state.x),
            norm_wbar_minus_azbar: state.w_bar.dist(&state.a_zbar),
            inner_iters_total: state.inner_iterations,
            halfspace_count,
            elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
        };
        if let Some(obs) = opts.observer.as_mut() {
            obs(&row);
        }
        trace.rows.push(row);
        x = state.x_next.clone();
        let hit_tol = state.residual <= cfg.tol_residual;
        last = Some(state);
        if hit_tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    let last = last.ok_or_else(|| {
        Error::InvalidParameter("max_iter must be at least 1".into())
    })?;
    let solution = Solution {
        algorithm,
        x,
        a_zbar: last.a_zbar,
        w_bar: last.w_bar,
        residual: last.residual,
        iterations: trace.rows.len(),
        status,
        started_inside,
        config: cfg.clone(),
    };
    Ok((solution, trace))
}
