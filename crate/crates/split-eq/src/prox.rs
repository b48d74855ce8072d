//! Proximal subproblems and resolvent operators.
//!
//! `prox_step` minimizes lambda * f(base, y) + 0.5 ||y - anchor||^2 over a
//! convex set. `resolvent` evaluates the regularized operator T_r: the unique
//! z in the set with f(z, y) + (1/r) <y - z, z - x> >= 0 for all feasible y.

use crate::bifunction::{AffineForm, Bifunction, BifunctionClass};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, solve_dense, Matrix};
use crate::point::Point;
use crate::sets::ConvexSet;

/// Slack for the firm-nonexpansiveness falsifier.
pub const FIRM_NONEXPANSIVE_SLACK: f64 = 1e-8;
/// Slack for the two-radius continuity falsifier.
pub const CONTINUITY_SLACK: f64 = 1e-8;

const NORM_TOL: f64 = 1e-10;
const NORM_MAX_ITER: usize = 10_000;
/// Inflation applied to a freshly estimated operator norm before it enters a
/// step-size formula; the power iteration approaches the norm from below.
const NORM_INFLATION: f64 = 1.01;

#[derive(Clone, Debug)]
pub struct ProxResult {
    pub point: Point,
    pub inner_iterations: usize,
    /// Termination-test value at exit. Bounds the distance to the exact
    /// subproblem solution on the smooth and affine paths, and the objective
    /// gap on the subgradient path.
    pub residual: f64,
    pub converged: bool,
}

fn check_dims(f: &dyn Bifunction, set: &ConvexSet, points: &[&Point]) -> Result<()> {
    let d = set.dim();
    if f.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "bifunction dim {} vs set dim {}",
            f.dim(),
            d
        )));
    }
    for p in points {
        if p.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "point dim {} vs set dim {}",
                p.dim(),
                d
            )));
        }
    }
    Ok(())
}

/// Minimizes phi(y) = lambda * f(base, y) + 0.5 ||y - anchor||^2 over `set`.
///
/// With a declared gradient Lipschitz constant the subproblem is solved by
/// projected gradient steps of size 1/(1 + lambda * Lf); phi is 1-strongly
/// convex, so the iteration contracts and the final step length bounds the
/// distance to the exact minimizer. Without one it falls back to projected
/// subgradient steps with iterate averaging, whose certificate bounds the
/// objective gap instead.
pub fn prox_step(
    f: &dyn Bifunction,
    base: &Point,
    anchor: &Point,
    lambda: f64,
    set: &ConvexSet,
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<ProxResult> {
    check_dims(f, set, &[base, anchor])?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "prox step size {lambda} must be finite and nonnegative"
        )));
    }
    if !(inner_tol.is_finite() && inner_tol > 0.0) || inner_max_iter == 0 {
        return Err(Error::InvalidParameter(
            "inner tolerance must be positive and the iteration budget nonzero".into(),
        ));
    }

    match f.smoothness() {
        Some(lf) if lf.is_finite() && lf >= 0.0 => {
            let l = 1.0 + lambda * lf;
            let mut y = set.project(anchor);
            for k in 1..=inner_max_iter {
                let mut grad = f.partial_subgrad(base, &y).scale(lambda);
                grad = grad + &(&y - anchor);
                let y_next = set.project(&y.add_scaled(-1.0 / l, &grad));
                if !y_next.is_finite() {
                    return Err(Error::NonFinite("prox iteration left finite range".into()));
                }
                let residual = l * y_next.dist(&y);
                if residual <= inner_tol {
                    return Ok(ProxResult {
                        point: y_next,
                        inner_iterations: k,
                        residual,
                        converged: true,
                    });
                }
                y = y_next;
            }
            Ok(ProxResult {
                point: y,
                inner_iterations: inner_max_iter,
                residual: f64::INFINITY,
                converged: false,
            })
        }
        _ => {
            // Subgradient descent with weight-(k+1) averaging; the running
            // certificate 2 G^2 / (k+2) bounds the objective gap of the
            // averaged point under 1-strong convexity.
            let mut y = set.project(anchor);
            let mut avg = Point::zeros(y.dim());
            let mut weight_sum = 0.0;
            let mut g_max = 0.0f64;
            let mut gap = f64::INFINITY;
            for k in 0..inner_max_iter {
                let mut grad = f.partial_subgrad(base, &y).scale(lambda);
                grad = grad + &(&y - anchor);
                let gn = grad.norm();
                if gn == 0.0 {
                    return Ok(ProxResult {
                        point: y,
                        inner_iterations: k + 1,
                        residual: 0.0,
                        converged: true,
                    });
                }
                g_max = g_max.max(gn);
                let w = (k + 1) as f64;
                avg = avg.scale(weight_sum / (weight_sum + w)).add_scaled(w / (weight_sum + w), &y);
                weight_sum += w;
                gap = 2.0 * g_max * g_max / ((k + 2) as f64);
                if gap <= inner_tol {
                    return Ok(ProxResult {
                        point: avg,
                        inner_iterations: k + 1,
                        residual: gap,
                        converged: true,
                    });
                }
                let alpha = 2.0 / ((k + 2) as f64);
                y = set.project(&y.add_scaled(-alpha, &grad));
                if !y.is_finite() {
                    return Err(Error::NonFinite("prox iteration left finite range".into()));
                }
            }
            Ok(ProxResult {
                point: avg,
                inner_iterations: inner_max_iter,
                residual: gap,
                converged: false,
            })
        }
    }
}

/// f(u, v) + (1/r) <v - u, u - x>, the strongly monotone regularization whose
/// equilibrium point on the set is the resolvent value.
struct Regularized<'a> {
    inner: &'a dyn Bifunction,
    x: &'a Point,
    r: f64,
    constants: (f64, f64),
}

impl Bifunction for Regularized<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, u: &Point, v: &Point) -> f64 {
        self.inner.eval(u, v) + (v - u).dot(&(u - self.x)) / self.r
    }

    fn partial_subgrad(&self, u: &Point, v: &Point) -> Point {
        self.inner
            .partial_subgrad(u, v)
            .add_scaled(1.0 / self.r, &(u - self.x))
    }

    fn class(&self) -> BifunctionClass {
        BifunctionClass::Monotone
    }

    fn lipschitz_constants(&self) -> Option<(f64, f64)> {
        Some(self.constants)
    }

    fn smoothness(&self) -> Option<f64> {
        self.inner.smoothness()
    }
}

/// Evaluates z = T_r applied to x for a monotone bifunction on `set`.
///
/// Affine bifunctions get a direct route: the regularized problem is the
/// variational inequality of the strongly monotone affine operator
/// S(z) = (M + I/r) z + (b - x/r). On the whole space it is a linear solve;
/// when the unconstrained solution is feasible it is already the answer;
/// otherwise z = P(z - tau S(z)) is iterated with tau sized from r and an
/// upper bound on ||M||, a contraction with known factor. Everything else
/// runs a double-prox fixed-point loop on the regularized bifunction, a
/// contraction once the prox parameter respects its Lipschitz-type constants.
pub fn resolvent(
    f: &dyn Bifunction,
    x: &Point,
    r: f64,
    set: &ConvexSet,
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<ProxResult> {
    check_dims(f, set, &[x])?;
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "resolvent radius {r} must be finite and positive"
        )));
    }
    if f.class() != BifunctionClass::Monotone {
        return Err(Error::ContractViolation {
            index: 0,
            requirement: "monotone",
            detail: "the resolvent is defined for monotone bifunctions only".into(),
        });
    }
    if !(inner_tol.is_finite() && inner_tol > 0.0) || inner_max_iter == 0 {
        return Err(Error::InvalidParameter(
            "inner tolerance must be positive and the iteration budget nonzero".into(),
        ));
    }

    if let Some(form) = f.affine_form() {
        return affine_resolvent(&form, x, r, set, inner_tol, inner_max_iter);
    }

    let (c1, c2) = f.lipschitz_constants().ok_or_else(|| {
        Error::InvalidParameter(
            "the general resolvent path needs declared Lipschitz-type constants".into(),
        )
    })?;
    if !(c1.is_finite() && c2.is_finite()) || c1 < 0.0 || c2 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Lipschitz-type constants ({c1}, {c2}) must be finite and nonnegative"
        )));
    }

    let gamma = 1.0 / r;
    let reg = Regularized {
        inner: f,
        x,
        r,
        constants: (c1 + 0.5 * gamma, c2 + 0.5 * gamma),
    };
    let rho = 0.25 / reg.constants.0.max(reg.constants.1).max(gamma);
    let q = (1.0 - rho * gamma).sqrt();
    let shrink = q / (1.0 - q);
    let prox_tol = (inner_tol * (1.0 - q) * 0.25).max(f64::MIN_POSITIVE);

    let mut z = set.project(x);
    let mut total_inner = 0usize;
    let mut all_inner_ok = true;
    let mut residual = f64::INFINITY;
    for _ in 0..inner_max_iter {
        let y_res = prox_step(&reg, &z, &z, rho, set, prox_tol, inner_max_iter)?;
        let z_res = prox_step(&reg, &y_res.point, &z, rho, set, prox_tol, inner_max_iter)?;
        total_inner += y_res.inner_iterations + z_res.inner_iterations;
        all_inner_ok &= y_res.converged && z_res.converged;
        let step = z_res.point.dist(&z);
        z = z_res.point;
        residual = shrink * step;
        if residual <= 0.5 * inner_tol {
            return Ok(ProxResult {
                point: z,
                inner_iterations: total_inner,
                residual,
                converged: all_inner_ok,
            });
        }
    }
    Ok(ProxResult {
        point: z,
        inner_iterations: total_inner,
        residual,
        converged: false,
    })
}

fn affine_resolvent(
    form: &AffineForm<'_>,
    x: &Point,
    r: f64,
    set: &ConvexSet,
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<ProxResult> {
    let d = x.dim();
    if form.m.rows() != d || form.m.cols() != d || form.b.dim() != d {
        return Err(Error::DimensionMismatch(
            "affine form does not match the argument dimension".into(),
        ));
    }
    // S(z) = m_g z + b_g with m_g = M + I/r, b_g = b - x/r.
    let m_g = form.m.add(&Matrix::identity(d).scale(1.0 / r));
    let b_g = form.b.add_scaled(-1.0 / r, x);
    let rhs = b_g.scale(-1.0);
    let unconstrained = solve_dense(&m_g, &rhs)?;

    if matches!(set, ConvexSet::WholeSpace { .. }) || set.violation(&unconstrained) == 0.0 {
        return Ok(ProxResult {
            point: unconstrained,
            inner_iterations: 1,
            residual: 0.0,
            converged: true,
        });
    }

    let sigma = match form.norm_hint {
        Some(s) => s,
        None => operator_norm(form.m, NORM_TOL, NORM_MAX_ITER).value * NORM_INFLATION,
    };
    if sigma == 0.0 {
        // S(z) = (z - x)/r + b, and z = P(z - r S(z)) collapses to one projection.
        let z = set.project(&x.add_scaled(-r, form.b));
        return Ok(ProxResult {
            point: z,
            inner_iterations: 1,
            residual: 0.0,
            converged: true,
        });
    }

    let tau = r / ((1.0 + r * sigma) * (1.0 + r * sigma));
    let q = (1.0 - 1.0 / ((1.0 + r * sigma) * (1.0 + r * sigma))).sqrt();
    let shrink = q / (1.0 - q);
    let mut z = set.project(x);
    let mut residual = f64::INFINITY;
    for k in 1..=inner_max_iter {
        let s = m_g.apply(&z) + &b_g;
        let z_next = set.project(&z.add_scaled(-tau, &s));
        if !z_next.is_finite() {
            return Err(Error::NonFinite("resolvent iteration left finite range".into()));
        }
        residual = shrink * z_next.dist(&z);
        z = z_next;
        if residual <= inner_tol {
            return Ok(ProxResult {
                point: z,
                inner_iterations: k,
                residual,
                converged: true,
            });
        }
    }
    Ok(ProxResult {
        point: z,
        inner_iterations: inner_max_iter,
        residual,
        converged: false,
    })
}

/// Samples the inequality ||T x1 - T x2||^2 <= <T x1 - T x2, x1 - x2>.
/// Returns false as soon as one pair breaks it beyond the slack.
pub fn check_firmly_nonexpansive(
    f: &dyn Bifunction,
    set: &ConvexSet,
    r: f64,
    pairs: &[(Point, Point)],
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<bool> {
    for (x1, x2) in pairs {
        let z1 = resolvent(f, x1, r, set, inner_tol, inner_max_iter)?.point;
        let z2 = resolvent(f, x2, r, set, inner_tol, inner_max_iter)?.point;
        let diff = &z1 - &z2;
        if diff.norm_sq() > diff.dot(&(x1 - x2)) + FIRM_NONEXPANSIVE_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Samples the two-radius bound
/// ||T_r x - T_s y|| <= ||x - y|| + (|s - r| / s) ||T_s y - y||.
pub fn check_resolvent_continuity(
    f: &dyn Bifunction,
    set: &ConvexSet,
    samples: &[(Point, f64, Point, f64)],
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<bool> {
    for (x, r, y, s) in samples {
        let tr = resolvent(f, x, *r, set, inner_tol, inner_max_iter)?.point;
        let ts = resolvent(f, y, *s, set, inner_tol, inner_max_iter)?.point;
        let lhs = tr.dist(&ts);
        let rhs = x.dist(y) + ((s - r).abs() / s) * ts.dist(y);
        if lhs > rhs + CONTINUITY_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}
