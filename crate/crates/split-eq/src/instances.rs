//! Concrete bifunction families, a seeded generator whose instances carry a
//! closed-form solution certificate, the JSON problem-file format, and a grid
//! oracle for low-dimensional equilibrium problems.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bifunction::{AffineForm, Bifunction, BifunctionClass};
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigenvalues, operator_norm, Matrix};
use crate::point::Point;
use crate::problem::SplitProblem;
use crate::prox::{prox_step, resolvent};
use crate::sets::ConvexSet;

/// Relative slack for eigenvalue sign decisions.
const EIGEN_TOL: f64 = 1e-10;
/// Attached constants derived from power iteration are inflated by this factor
/// so they remain upper bounds after the estimator's one-sided error.
const CONSTANT_INFLATION: f64 = 1.0 + 1e-6;
const NORM_TOL: f64 = 1e-12;
const NORM_MAX_ITER: usize = 20_000;
/// Strong-monotonicity shift added to each source when a unique solution is
/// requested.
pub const UNIQUE_SHIFT: f64 = 2.0;
/// Tolerance for the fixed-point checks behind a declared known solution.
pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Tolerance for sampled solution certificates.
pub const CERTIFICATE_TOL: f64 = 1e-10;

fn spectrum_summary(sym: &Matrix) -> (f64, f64) {
    let eigs = jacobi_eigenvalues(sym);
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = 1.0 + eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    (min, scale)
}

/// f(x, y) = <P x + Q y + q, y - x> on R^d.
///
/// Lipschitz-type constants c1 = c2 = ||P - Q||_2 / 2 are attached at
/// construction. The monotone tag is earned by the spectrum: f is monotone
/// exactly when the symmetric part of P - Q is positive semidefinite, and
/// only that case is certified here. Anything else carries the weaker
/// pseudomonotone tag, which the samplers can still falsify.
pub struct BilinearBifunction {
    p: Matrix,
    q: Matrix,
    lin: Point,
    class: BifunctionClass,
    constants: (f64, f64),
    smoothness: f64,
    /// Inflated ||P||_2, cached only when Q = 0 and the affine route applies.
    p_norm: Option<f64>,
}

impl BilinearBifunction {
    pub fn new(p: Matrix, q: Matrix, lin: Point) -> Result<Self> {
        let d = lin.dim();
        for (name, m) in [("x-side matrix", &p), ("y-side matrix", &q)] {
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
            if !m.frobenius_norm().is_finite() {
                return Err(Error::NonFinite(format!("{name} entries")));
            }
        }
        if !lin.is_finite() {
            return Err(Error::NonFinite("linear term".into()));
        }

        let diff = p.sub(&q);
        let (lam_min, scale) = spectrum_summary(&diff.symmetric_part());
        let class = if lam_min >= -EIGEN_TOL * scale {
            BifunctionClass::Monotone
        } else {
            BifunctionClass::Pseudomonotone
        };
        let c = 0.5 * operator_norm(&diff, NORM_TOL, NORM_MAX_ITER).value * CONSTANT_INFLATION;
        let hessian = q.add(&q.transpose());
        let smoothness = operator_norm(&hessian, NORM_TOL, NORM_MAX_ITER).value * CONSTANT_INFLATION;
        let q_is_zero = q.frobenius_norm() == 0.0;
        let p_norm = q_is_zero
            .then(|| operator_norm(&p, NORM_TOL, NORM_MAX_ITER).value * CONSTANT_INFLATION);

        Ok(Self { p, q, lin, class, constants: (c, c), smoothness, p_norm })
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn q_matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn linear_term(&self) -> &Point {
        &self.lin
    }
}

impl Bifunction for BilinearBifunction {
    fn dim(&self) -> usize {
        self.lin.dim()
    }

    fn eval(&self, x: &Point, y: &Point) -> f64 {
        let mut u = self.p.apply(x);
        u = u + &self.q.apply(y);
        u = u + &self.lin;
        u.dot(&(y - x))
    }

    fn partial_subgrad(&self, x: &Point, y: &Point) -> Point {
        let mut g = self.q.apply_adjoint(&(y - x));
        g = g + &self.p.apply(x);
        g = g + &self.q.apply(y);
        g + &self.lin
    }

    fn class(&self) -> BifunctionClass {
        self.class
    }

    fn lipschitz_constants(&self) -> Option<(f64, f64)> {
        Some(self.constants)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.smoothness)
    }

    fn affine_form(&self) -> Option<AffineForm<'_>> {
        self.p_norm.map(|norm| AffineForm {
            m: &self.p,
            b: &self.lin,
            norm_hint: Some(norm),
        })
    }
}

/// F(u, v) = <M u + b, v - u> with the symmetric part of M positive
/// semidefinite, checked by cyclic Jacobi at construction. For this family
/// that sign condition is monotonicity, so the tag is certified.
pub struct AffineVIBifunction {
    m: Matrix,
    b: Point,
    constants: (f64, f64),
    norm_bound: f64,
    min_eigenvalue: f64,
}

impl AffineVIBifunction {
    pub fn new(m: Matrix, b: Point) -> Result<Self> {
        let d = b.dim();
        if m.rows() != d || m.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator matrix is {}x{}, expected {d}x{d}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.frobenius_norm().is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("operator matrix or offset entries".into()));
        }
        let (lam_min, scale) = spectrum_summary(&m.symmetric_part());
        if lam_min < -EIGEN_TOL * scale {
            return Err(Error::InvalidParameter(format!(
                "operator's symmetric part has minimum eigenvalue {lam_min:.6e}; \
                 this family requires it to be positive semidefinite"
            )));
        }
        let norm_bound = operator_norm(&m, NORM_TOL, NORM_MAX_ITER).value * CONSTANT_INFLATION;
        Ok(Self {
            m,
            b,
            constants: (0.5 * norm_bound, 0.5 * norm_bound),
            norm_bound,
            min_eigenvalue: lam_min,
        })
    }

    pub fn operator(&self) -> &Matrix {
        &self.m
    }

    pub fn offset(&self) -> &Point {
        &self.b
    }

    /// Smallest eigenvalue of the symmetric part, kept for reports.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

impl Bifunction for AffineVIBifunction {
    fn dim(&self) -> usize {
        self.b.dim()
    }

    fn eval(&self, u: &Point, v: &Point) -> f64 {
        (self.m.apply(u) + &self.b).dot(&(v - u))
    }

    fn partial_subgrad(&self, u: &Point, _v: &Point) -> Point {
        self.m.apply(u) + &self.b
    }

    fn class(&self) -> BifunctionClass {
        BifunctionClass::Monotone
    }

    fn lipschitz_constants(&self) -> Option<(f64, f64)> {
        Some(self.constants)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(0.0)
    }

    fn affine_form(&self) -> Option<AffineForm<'_>> {
        Some(AffineForm {
            m: &self.m,
            b: &self.b,
            norm_hint: Some(self.norm_bound),
        })
    }
}

/// f(x, y) = h(y) - h(x) for a convex h. Equilibrium points minimize h over
/// the set, and prox_step against this family is the proximal map of
/// lambda * h. The telescoping sum makes both Lipschitz-type constants zero.
pub struct DifferenceBifunction<H, G> {
    dim: usize,
    value: H,
    grad: G,
    smoothness: Option<f64>,
}

impl<H, G> DifferenceBifunction<H, G>
where
    H: Fn(&Point) -> f64 + Send + Sync,
    G: Fn(&Point) -> Point + Send + Sync,
{
    pub fn new(dim: usize, value: H, grad: G) -> Self {
        Self { dim, value, grad, smoothness: None }
    }

    /// Declares a gradient Lipschitz constant, unlocking the smooth prox path.
    pub fn with_smoothness(mut self, l: f64) -> Self {
        self.smoothness = Some(l);
        self
    }
}

impl<H, G> Bifunction for DifferenceBifunction<H, G>
where
    H: Fn(&Point) -> f64 + Send + Sync,
    G: Fn(&Point) -> Point + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Point, y: &Point) -> f64 {
        (self.value)(y) - (self.value)(x)
    }

    fn partial_subgrad(&self, _x: &Point, y: &Point) -> Point {
        (self.grad)(y)
    }

    fn class(&self) -> BifunctionClass {
        BifunctionClass::Monotone
    }

    fn lipschitz_constants(&self) -> Option<(f64, f64)> {
        Some((0.0, 0.0))
    }

    fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }
}

/// A problem plus the metadata that makes it a usable fixture: the certified
/// solution when one is known, whether that solution is provably the only
/// one, and the seed that regenerates the instance byte for byte.
#[derive(Clone)]
pub struct InstanceBundle {
    pub problem: SplitProblem,
    /// The same source bifunctions the problem holds, concretely typed so the
    /// bundle can be written back to a file.
    pub sources: Vec<Arc<BilinearBifunction>>,
    /// Concretely typed image bifunctions, mirroring `problem`.
    pub images: Vec<Arc<AffineVIBifunction>>,
    pub known_solution: Option<Point>,
    pub solution_unique: bool,
    pub seed: u64,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_skew(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let b = random_matrix(rng, d, d);
    b.sub(&b.transpose()).scale(0.5)
}

fn random_box(rng: &mut ChaCha8Rng, d: usize) -> Result<ConvexSet> {
    let lo = Point::new((0..d).map(|_| -rng.gen_range(1.0..3.0)).collect())?;
    let hi = Point::new((0..d).map(|_| rng.gen_range(1.0..3.0)).collect())?;
    ConvexSet::box_set(lo, hi)
}

/// Builds a seeded instance with 0 certified to solve every equilibrium
/// problem on both sides.
///
/// Each source gets a PSD y-side matrix Q_i = G^T G / d1 (so f_i(0, y) =
/// <Q_i y, y> >= 0 on all of C) and an x-side matrix P_i = Q_i + H^T H / d1
/// + skew, keeping the symmetric part of P_i - Q_i PSD, which makes f_i
/// monotone. Images use M_j = G^T G / d2 + skew with b_j = 0, so F_j(0, v) =
/// 0. Boxes straddle 0 and A 0 = 0, hence 0 solves the whole split problem.
/// With `make_unique` each P_i is shifted by +2 I; the sources become
/// 2-strongly monotone and 0 is the only solution.
///
/// Matrices are drawn row-major, sources first (G, H, skew base per source),
/// then images (G, skew base), then A, then the C box (lows then highs), then
/// the Q box. That order is part of the format: rerunning with the same seed
/// must reproduce the saved file byte for byte.
pub fn generate_instance(
    n: usize,
    m: usize,
    d1: usize,
    d2: usize,
    seed: u64,
    make_unique: bool,
) -> Result<InstanceBundle> {
    if n == 0 || m == 0 || d1 == 0 || d2 == 0 {
        return Err(Error::InvalidParameter(
            "family sizes and dimensions must all be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut sources = Vec::with_capacity(n);
    for _ in 0..n {
        let q_i = random_matrix(&mut rng, d1, d1).gram().scale(1.0 / d1 as f64);
        let gap = random_matrix(&mut rng, d1, d1).gram().scale(1.0 / d1 as f64);
        let mut p_i = q_i.add(&gap).add(&random_skew(&mut rng, d1));
        if make_unique {
            p_i = p_i.add(&Matrix::identity(d1).scale(UNIQUE_SHIFT));
        }
        sources.push(Arc::new(BilinearBifunction::new(p_i, q_i, Point::zeros(d1))?));
    }

    let mut images = Vec::with_capacity(m);
    for _ in 0..m {
        let psd = random_matrix(&mut rng, d2, d2).gram().scale(1.0 / d2 as f64);
        let m_j = psd.add(&random_skew(&mut rng, d2));
        images.push(Arc::new(AffineVIBifunction::new(m_j, Point::zeros(d2))?));
    }

    let a = random_matrix(&mut rng, d2, d1);
    let c = random_box(&mut rng, d1)?;
    let q = random_box(&mut rng, d2)?;

    let problem = SplitProblem::new(
        sources.iter().map(|s| s.clone() as Arc<dyn Bifunction>).collect(),
        c,
        images.iter().map(|s| s.clone() as Arc<dyn Bifunction>).collect(),
        q,
        a,
    )?;

    Ok(InstanceBundle {
        problem,
        sources,
        images,
        known_solution: Some(Point::zeros(d1)),
        solution_unique: make_unique,
        seed,
    })
}

#[derive(Serialize, Deserialize)]
struct BilinearRecord {
    #[serde(rename = "P")]
    p: Matrix,
    #[serde(rename = "Q")]
    q: Matrix,
    #[serde(rename = "q")]
    lin: Point,
}

#[derive(Serialize, Deserialize)]
struct AffineRecord {
    #[serde(rename = "M")]
    m: Matrix,
    b: Point,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    version: u32,
    d1: usize,
    d2: usize,
    #[serde(rename = "A")]
    a: Matrix,
    #[serde(rename = "C")]
    c: ConvexSet,
    #[serde(rename = "Q")]
    q: ConvexSet,
    f: Vec<BilinearRecord>,
    #[serde(rename = "F")]
    images: Vec<AffineRecord>,
    known_solution: Option<Point>,
    seed: u64,
}

/// Writes the bundle as a single JSON document. Floats use the shortest
/// round-trip decimal representation, so a later load reproduces every matrix
/// bit for bit.
pub fn save_problem(bundle: &InstanceBundle, path: impl AsRef<Path>) -> Result<()> {
    if bundle.sources.len() != bundle.problem.f_c().len()
        || bundle.images.len() != bundle.problem.f_q().len()
    {
        return Err(Error::InvalidParameter(
            "the bundle's concrete family lists must mirror the problem's families".into(),
        ));
    }
    let file = ProblemFile {
        version: 1,
        d1: bundle.problem.d1(),
        d2: bundle.problem.d2(),
        a: bundle.problem.a().clone(),
        c: bundle.problem.c().clone(),
        q: bundle.problem.q().clone(),
        f: bundle
            .sources
            .iter()
            .map(|s| BilinearRecord {
                p: s.p().clone(),
                q: s.q_matrix().clone(),
                lin: s.linear_term().clone(),
            })
            .collect(),
        images: bundle
            .images
            .iter()
            .map(|s| AffineRecord { m: s.operator().clone(), b: s.offset().clone() })
            .collect(),
        known_solution: bundle.known_solution.clone(),
        seed: bundle.seed,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a problem file back into a bundle. Uniqueness is never claimed for
/// loaded instances; the file format does not carry a proof of it.
pub fn load_problem(path: impl AsRef<Path>) -> Result<InstanceBundle> {
    let text = fs::read_to_string(path)?;
    let file: ProblemFile = serde_json::from_str(&text)?;
    bundle_from_file(file)
}

fn bundle_from_file(file: ProblemFile) -> Result<InstanceBundle> {
    if file.version != 1 {
        return Err(Error::ProblemFile(format!("unsupported version {}", file.version)));
    }
    if file.f.is_empty() {
        return Err(Error::ProblemFile(
            "the source family \"f\" is empty; at least one bifunction is required".into(),
        ));
    }
    if file.images.is_empty() {
        return Err(Error::ProblemFile(
            "the image family \"F\" is empty; at least one bifunction is required".into(),
        ));
    }
    if file.a.rows() != file.d2 || file.a.cols() != file.d1 {
        return Err(Error::ProblemFile(format!(
            "\"A\" is {}x{} but d2 = {} and d1 = {}",
            file.a.rows(),
            file.a.cols(),
            file.d2,
            file.d1
        )));
    }
    if file.c.dim() != file.d1 {
        return Err(Error::ProblemFile(format!(
            "\"C\" has dimension {} but d1 = {}",
            file.c.dim(),
            file.d1
        )));
    }
    if file.q.dim() != file.d2 {
        return Err(Error::ProblemFile(format!(
            "\"Q\" has dimension {} but d2 = {}",
            file.q.dim(),
            file.d2
        )));
    }
    if let Some(x) = &file.known_solution {
        if x.dim() != file.d1 {
            return Err(Error::ProblemFile(format!(
                "\"known_solution\" has dimension {} but d1 = {}",
                x.dim(),
                file.d1
            )));
        }
    }

    let mut sources = Vec::with_capacity(file.f.len());
    for (i, rec) in file.f.into_iter().enumerate() {
        let built = BilinearBifunction::new(rec.p, rec.q, rec.lin)
            .map_err(|e| Error::ProblemFile(format!("f[{i}]: {e}")))?;
        if built.dim() != file.d1 {
            return Err(Error::ProblemFile(format!(
                "f[{i}] has dimension {} but d1 = {}",
                built.dim(),
                file.d1
            )));
        }
        sources.push(Arc::new(built));
    }
    let mut images = Vec::with_capacity(file.images.len());
    for (j, rec) in file.images.into_iter().enumerate() {
        let built = AffineVIBifunction::new(rec.m, rec.b)
            .map_err(|e| Error::ProblemFile(format!("F[{j}]: {e}")))?;
        if built.dim() != file.d2 {
            return Err(Error::ProblemFile(format!(
                "F[{j}] has dimension {} but d2 = {}",
                built.dim(),
                file.d2
            )));
        }
        images.push(Arc::new(built));
    }

    let problem = SplitProblem::new(
        sources.iter().map(|s| s.clone() as Arc<dyn Bifunction>).collect(),
        file.c,
        images.iter().map(|s| s.clone() as Arc<dyn Bifunction>).collect(),
        file.q,
        file.a,
    )?;

    Ok(InstanceBundle {
        problem,
        sources,
        images,
        known_solution: file.known_solution,
        solution_unique: false,
        seed: file.seed,
    })
}

/// Exhaustive grid oracle for EP(f, C) on boxes of dimension <= 2.
///
/// Returns the grid points x whose worst grid opponent still satisfies
/// f(x, y) >= -tol_grid with tol_grid = 10 / grid_resolution. Independent of
/// the prox machinery on purpose; it only ever calls `eval`.
pub fn brute_force_ep(
    f: &dyn Bifunction,
    c: &ConvexSet,
    grid_resolution: usize,
) -> Result<Vec<Point>> {
    let ConvexSet::Box { lo, hi } = c else {
        return Err(Error::InvalidParameter("the grid oracle only handles box sets".into()));
    };
    let d = lo.dim();
    if d > 2 {
        return Err(Error::InvalidParameter(format!(
            "the grid oracle only handles dimension <= 2, got {d}"
        )));
    }
    if f.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "bifunction dimension {} does not match the box dimension {d}",
            f.dim()
        )));
    }
    if grid_resolution < 2 {
        return Err(Error::InvalidParameter(
            "the grid needs at least two points per axis".into(),
        ));
    }

    let tol = 10.0 / grid_resolution as f64;
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            (0..grid_resolution)
                .map(|t| lo[k] + (hi[k] - lo[k]) * t as f64 / (grid_resolution - 1) as f64)
                .collect()
        })
        .collect();
    let grid: Vec<Point> = match axes.as_slice() {
        [a] => a.iter().map(|&v| Point::raw(vec![v])).collect(),
        [a, b] => a
            .iter()
            .flat_map(|&u| b.iter().map(move |&v| Point::raw(vec![u, v])))
            .collect(),
        _ => Vec::new(),
    };

    let mut out = Vec::new();
    for x in &grid {
        let worst = grid.iter().map(|y| f.eval(x, y)).fold(f64::INFINITY, f64::min);
        if worst >= -tol {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// Evidence gathered by `verify_certificate`.
pub struct CertificateReport {
    /// False when the bundle declares no known solution.
    pub checked: bool,
    pub issues: Vec<String>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.checked {
            return write!(f, "no known solution declared; nothing to certify");
        }
        if self.issues.is_empty() {
            return write!(f, "known-solution certificate: ok");
        }
        writeln!(f, "known-solution certificate FAILED:")?;
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

/// Prox step size used by the fixed-point checks. Any positive value works;
/// the subproblem minimizer is unique regardless.
const CERT_PROX_LAMBDA: f64 = 0.5;
const CERT_INNER_TOL: f64 = 1e-10;
const CERT_INNER_MAX_ITER: usize = 200_000;

/// Checks the declared known solution: set membership on both sides, prox and
/// resolvent fixed points within 1e-8, and sampled nonnegativity of every
/// bifunction at it within 1e-10.
pub fn verify_certificate(
    bundle: &InstanceBundle,
    samples: usize,
    seed: u64,
) -> Result<CertificateReport> {
    let Some(x_star) = &bundle.known_solution else {
        return Ok(CertificateReport { checked: false, issues: Vec::new() });
    };
    let prob = &bundle.problem;
    let mut issues = Vec::new();
    if x_star.dim() != prob.d1() {
        issues.push(format!(
            "known solution has dimension {}, problem wants {}",
            x_star.dim(),
            prob.d1()
        ));
        return Ok(CertificateReport { checked: true, issues });
    }

    let c_violation = prob.c().violation(x_star);
    if c_violation > CERTIFICATE_TOL {
        issues.push(format!("known solution misses C by {c_violation:.3e}"));
    }
    let ax = prob.a().apply(x_star);
    let q_violation = prob.q().violation(&ax);
    if q_violation > CERTIFICATE_TOL {
        issues.push(format!("image of the known solution misses Q by {q_violation:.3e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, f) in prob.f_c().iter().enumerate() {
        let out = prox_step(
            f.as_ref(),
            x_star,
            x_star,
            CERT_PROX_LAMBDA,
            prob.c(),
            CERT_INNER_TOL,
            CERT_INNER_MAX_ITER,
        )?;
        let drift = out.point.dist(x_star);
        if drift > FIXED_POINT_TOL {
            issues.push(format!(
                "source bifunction {i}: prox fixed-point drift {drift:.3e} exceeds {FIXED_POINT_TOL:.0e}"
            ));
        }
        let mut worst = f64::INFINITY;
        for _ in 0..samples {
            let y = prob.c().sample(&mut rng);
            worst = worst.min(f.eval(x_star, &y));
        }
        if worst < -CERTIFICATE_TOL {
            issues.push(format!(
                "source bifunction {i}: sampled value {worst:.3e} at the known solution falls below -{CERTIFICATE_TOL:.0e}"
            ));
        }
    }
    for (j, f) in prob.f_q().iter().enumerate() {
        let out = resolvent(f.as_ref(), &ax, 1.0, prob.q(), CERT_INNER_TOL, CERT_INNER_MAX_ITER)?;
        let drift = out.point.dist(&ax);
        if drift > FIXED_POINT_TOL {
            issues.push(format!(
                "image bifunction {j}: resolvent fixed-point drift {drift:.3e} exceeds {FIXED_POINT_TOL:.0e}"
            ));
        }
        let mut worst = f64::INFINITY;
        for _ in 0..samples {
            let v = prob.q().sample(&mut rng);
            worst = worst.min(f.eval(&ax, &v));
        }
        if worst < -CERTIFICATE_TOL {
            issues.push(format!(
                "image bifunction {j}: sampled value {worst:.3e} at the known solution's image falls below -{CERTIFICATE_TOL:.0e}"
            ));
        }
    }

    Ok(CertificateReport { checked: true, issues })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::{
        check_lipschitz_type, check_monotone, check_pseudomonotone,
    };
    use crate::config::SolverConfig;
    use crate::solver::{solve, Algorithm};

    fn bilinear_1d(p: f64, q: f64) -> BilinearBifunction {
        BilinearBifunction::new(
            Matrix::from_rows(vec![vec![p]]).unwrap(),
            Matrix::from_rows(vec![vec![q]]).unwrap(),
            Point::zeros(1),
        )
        .unwrap()
    }

    #[test]
    fn scalar_seed_seven_instance_passes_both_fixed_point_checks() {
        let bundle = generate_instance(1, 1, 1, 1, 7, false).unwrap();
        let report = verify_certificate(&bundle, 200, 0).unwrap();
        assert!(report.checked);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn generated_sources_respect_their_attached_constants() {
        let bundle = generate_instance(2, 2, 3, 2, 11, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let triples: Vec<_> = (0..10_000)
            .map(|_| {
                (
                    bundle.problem.c().sample(&mut rng),
                    bundle.problem.c().sample(&mut rng),
                    bundle.problem.c().sample(&mut rng),
                )
            })
            .collect();
        for f in &bundle.sources {
            let (c1, c2) = f.lipschitz_constants().unwrap();
            assert!(check_lipschitz_type(f.as_ref(), c1, c2, &triples));
        }
    }

    #[test]
    fn generated_sources_pass_the_pseudomonotone_sampler_and_certificate() {
        let bundle = generate_instance(2, 1, 3, 2, 13, false).unwrap();
        let zero = Point::zeros(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for f in &bundle.sources {
            assert_eq!(f.class(), BifunctionClass::Monotone);
            assert!(check_pseudomonotone(f.as_ref(), bundle.problem.c(), 10_000, &mut rng));
            for _ in 0..1000 {
                let y = bundle.problem.c().sample(&mut rng);
                assert!(f.eval(&zero, &y) >= -1e-12);
            }
        }
    }

    #[test]
    fn generated_images_pass_the_monotone_sampler() {
        let bundle = generate_instance(1, 3, 2, 4, 17, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in &bundle.images {
            assert_eq!(f.class(), BifunctionClass::Monotone);
            assert!(check_monotone(f.as_ref(), bundle.problem.q(), 10_000, &mut rng));
        }
    }

    #[test]
    fn generator_rejects_zero_sizes() {
        assert!(generate_instance(0, 1, 1, 1, 0, false).is_err());
        assert!(generate_instance(1, 1, 0, 1, 0, false).is_err());
    }

    fn strip_elapsed(csv: &str) -> String {
        csv.lines()
            .map(|line| line.rsplit_once(',').map(|(head, _)| head).unwrap_or(line))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn round_trip_is_bit_exact_and_solves_identically() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("instance.json");
        let second = dir.path().join("again.json");

        let bundle = generate_instance(2, 1, 2, 2, 23, true).unwrap();
        save_problem(&bundle, &first).unwrap();
        let loaded = load_problem(&first).unwrap();
        assert!(!loaded.solution_unique);
        save_problem(&loaded, &second).unwrap();
        assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());

        for (a, b) in bundle.sources.iter().zip(&loaded.sources) {
            assert_eq!(a.p(), b.p());
            assert_eq!(a.q_matrix(), b.q_matrix());
        }
        assert_eq!(bundle.problem.a(), loaded.problem.a());

        let cfg = {
            let mut c = SolverConfig::recommended(&bundle.problem).unwrap();
            c.max_iter = 10;
            c.tol_residual = f64::MIN_POSITIVE;
            c
        };
        let x0 = Point::zeros(2).add_scaled(1.0, &Point::new(vec![0.3, -0.2]).unwrap());
        let (_, trace_a) = solve(&bundle.problem, &cfg, Algorithm::Weak, &x0).unwrap();
        let cfg_b = {
            let mut c = SolverConfig::recommended(&loaded.problem).unwrap();
            c.max_iter = 10;
            c.tol_residual = f64::MIN_POSITIVE;
            c
        };
        let (_, trace_b) = solve(&loaded.problem, &cfg_b, Algorithm::Weak, &x0).unwrap();
        assert_eq!(trace_a.rows.len(), 10);
        assert_eq!(strip_elapsed(&trace_a.to_csv()), strip_elapsed(&trace_b.to_csv()));
    }

    #[test]
    fn regeneration_with_the_same_seed_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.json");
        let second = dir.path().join("b.json");
        save_problem(&generate_instance(3, 2, 4, 3, 99, false).unwrap(), &first).unwrap();
        save_problem(&generate_instance(3, 2, 4, 3, 99, false).unwrap(), &second).unwrap();
        assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    }

    fn minimal_file(f_records: &str, m_entry: f64) -> String {
        format!(
            r#"{{"version":1,"d1":1,"d2":1,"A":[[1.0]],
"C":{{"kind":"box","lo":[-1.0],"hi":[1.0]}},
"Q":{{"kind":"box","lo":[-1.0],"hi":[1.0]}},
"f":[{f_records}],"F":[{{"M":[[{m_entry}]],"b":[0.0]}}],
"known_solution":null,"seed":4}}"#
        )
    }

    #[test]
    fn empty_source_family_in_a_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.json");
        fs::write(&path, minimal_file("", 1.0)).unwrap();
        let err = load_problem(&path).err().unwrap();
        assert!(format!("{err}").contains("source family"), "{err}");
    }

    #[test]
    fn non_psd_image_operator_is_rejected_with_the_eigenvalue() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            minimal_file(r#"{"P":[[1.0]],"Q":[[0.0]],"q":[0.0]}"#, -1.0),
        )
        .unwrap();
        let err = load_problem(&path).err().unwrap();
        let text = format!("{err}");
        assert!(text.contains("F[0]"), "{text}");
        assert!(text.contains("eigenvalue"), "{text}");
        assert!(text.contains("-1"), "{text}");
    }

    #[test]
    fn unknown_fields_are_named_in_the_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.json");
        let mut text = minimal_file(r#"{"P":[[1.0]],"Q":[[0.0]],"q":[0.0]}"#, 1.0);
        text = text.replace("\"seed\":4", "\"seed\":4,\"surprise\":1");
        fs::write(&path, text).unwrap();
        let err = load_problem(&path).err().unwrap();
        assert!(format!("{err}").contains("surprise"), "{err}");
    }

    #[test]
    fn grid_oracle_pins_the_scalar_equilibrium_at_zero() {
        let f = bilinear_1d(1.0, 0.0);
        let c = ConvexSet::box_set(Point::new(vec![-1.0]).unwrap(), Point::new(vec![1.0]).unwrap())
            .unwrap();
        let found = brute_force_ep(&f, &c, 201).unwrap();
        assert!(!found.is_empty());
        assert!(found.iter().any(|x| x[0] == 0.0));
        assert!(found.iter().all(|x| x[0].abs() <= 0.05));
    }

    #[test]
    fn grid_oracle_accepts_every_point_for_the_zero_bifunction() {
        let f = BilinearBifunction::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2), Point::zeros(2))
            .unwrap();
        let c = ConvexSet::box_set(
            Point::new(vec![-1.0, -1.0]).unwrap(),
            Point::new(vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(brute_force_ep(&f, &c, 5).unwrap().len(), 25);
    }

    #[test]
    fn grid_oracle_clusters_near_zero_on_a_unique_planar_instance() {
        let bundle = generate_instance(1, 1, 2, 2, 5, true).unwrap();
        let found =
            brute_force_ep(bundle.sources[0].as_ref(), bundle.problem.c(), 41).unwrap();
        assert!(!found.is_empty());
        assert!(found.iter().all(|x| x.norm() <= 0.6), "spread: {found:?}");
        let closest = found.iter().map(Point::norm).fold(f64::INFINITY, f64::min);
        assert!(closest <= 0.2, "closest survivor at distance {closest}");
    }

    #[test]
    fn grid_oracle_rejects_high_dimensions_and_non_boxes() {
        let f = BilinearBifunction::new(Matrix::zeros(3, 3), Matrix::zeros(3, 3), Point::zeros(3))
            .unwrap();
        let c = ConvexSet::box_set(Point::zeros(3), Point::new(vec![1.0, 1.0, 1.0]).unwrap())
            .unwrap();
        assert!(brute_force_ep(&f, &c, 5).is_err());
        let ball = ConvexSet::Ball { center: Point::zeros(3), radius: 1.0 };
        assert!(brute_force_ep(&f, &ball, 5).is_err());
    }

    #[test]
    fn bilinear_affine_route_needs_a_zero_y_side_matrix() {
        let with_q = bilinear_1d(1.0, 0.5);
        assert!(with_q.affine_form().is_none());
        let without_q = bilinear_1d(1.0, 0.0);
        let form = without_q.affine_form().unwrap();
        assert!(form.norm_hint.unwrap() >= 1.0);
    }

    #[test]
    fn sign_indefinite_difference_earns_only_the_pseudomonotone_tag() {
        let f = bilinear_1d(0.0, 1.0);
        assert_eq!(f.class(), BifunctionClass::Pseudomonotone);
        let (c1, c2) = f.lipschitz_constants().unwrap();
        assert!(c1 >= 0.5 && c2 >= 0.5);
    }

    #[test]
    fn difference_bifunction_is_antisymmetric_with_free_constants() {
        let h = DifferenceBifunction::new(
            2,
            |p: &Point| 0.5 * p.norm_sq(),
            |p: &Point| p.scale(1.0),
        )
        .with_smoothness(1.0);
        let x = Point::new(vec![1.0, -2.0]).unwrap();
        let y = Point::new(vec![0.5, 0.25]).unwrap();
        assert_eq!(h.eval(&x, &y), -h.eval(&y, &x));
        assert_eq!(h.lipschitz_constants(), Some((0.0, 0.0)));
        assert_eq!(h.class(), BifunctionClass::Monotone);
    }
}
