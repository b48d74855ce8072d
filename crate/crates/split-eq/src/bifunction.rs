//! Equilibrium bifunctions.
//!
//! A bifunction f assigns a real value to an ordered pair of points and vanishes on
//! the diagonal; an equilibrium point of f over a set C is an x with f(x, y) >= 0
//! for every y in C. The solver needs, per bifunction: evaluation, a subgradient of
//! the convex second slot, a monotonicity class tag, and (for the step-size bound)
//! Lipschitz-type constants. Structure declarations (`smoothness`, `affine_form`)
//! unlock faster inner solvers but are never required for correctness.

use rand::Rng;

use crate::linalg::Matrix;
use crate::point::Point;

/// Monotonicity class a bifunction certifies for itself.
///
/// `Monotone` means f(x,y) + f(y,x) <= 0 everywhere; it implies `Pseudomonotone`
/// (f(x,y) >= 0 forces f(y,x) <= 0), which is the weakest class the solver accepts
/// on the source side. Resolvents additionally require `Monotone`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BifunctionClass {
    Monotone,
    Pseudomonotone,
}

/// Declared affine structure: f(u, v) = <M u + b, v - u>.
pub struct AffineForm<'a> {
    pub m: &'a Matrix,
    pub b: &'a Point,
    /// Upper bound on the operator norm of `m`, when the owner has one cached.
    pub norm_hint: Option<f64>,
}

pub trait Bifunction: Send + Sync {
    /// Dimension of the space both arguments live in.
    fn dim(&self) -> usize;

    /// f(x, y). Must vanish at y = x and be convex in y.
    fn eval(&self, x: &Point, y: &Point) -> f64;

    /// A subgradient of the convex function y -> f(x, y) at y.
    fn partial_subgrad(&self, x: &Point, y: &Point) -> Point;

    fn class(&self) -> BifunctionClass;

    /// Lipschitz-type constants (c1, c2) with
    /// f(x,y) + f(y,z) >= f(x,z) - c1 ||x-y||^2 - c2 ||y-z||^2.
    fn lipschitz_constants(&self) -> Option<(f64, f64)> {
        None
    }

    /// Lipschitz constant of y -> grad_y f(x, y) when that gradient exists
    /// everywhere; None marks the second slot as merely subdifferentiable.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Present when f(u, v) = <M u + b, v - u> exactly.
    fn affine_form(&self) -> Option<AffineForm<'_>> {
        None
    }
}

/// Slack for the Lipschitz-type falsifier.
pub const LIPSCHITZ_CHECK_SLACK: f64 = 1e-12;

/// Checks f(x,y) + f(y,z) >= f(x,z) - c1||x-y||^2 - c2||y-z||^2 on the given
/// triples. A single violation beyond the fixed slack returns false.
pub fn check_lipschitz_type(
    f: &dyn Bifunction,
    c1: f64,
    c2: f64,
    samples: &[(Point, Point, Point)],
) -> bool {
    samples.iter().all(|(x, y, z)| {
        let lhs = f.eval(x, y) + f.eval(y, z);
        let rhs = f.eval(x, z) - c1 * x.dist(y).powi(2) - c2 * y.dist(z).powi(2);
        lhs >= rhs - LIPSCHITZ_CHECK_SLACK
    })
}

/// f(x, x) = 0 on sampled feasible points.
pub fn check_diagonal_zero(
    f: &dyn Bifunction,
    set: &crate::sets::ConvexSet,
    samples: usize,
    rng: &mut impl Rng,
) -> bool {
    (0..samples).all(|_| {
        let x = set.sample(rng);
        f.eval(&x, &x).abs() <= 1e-12
    })
}

/// Subgradient inequality f(x, z) >= f(x, y) + <g, z - y> on sampled triples,
/// with g = partial_subgrad(x, y).
pub fn check_partial_subgradient(
    f: &dyn Bifunction,
    set: &crate::sets::ConvexSet,
    samples: usize,
    rng: &mut impl Rng,
) -> bool {
    (0..samples).all(|_| {
        let x = set.sample(rng);
        let y = set.sample(rng);
        let z = set.sample(rng);
        let g = f.partial_subgrad(&x, &y);
        let scale = 1.0 + f.eval(&x, &y).abs() + f.eval(&x, &z).abs();
        f.eval(&x, &z) >= f.eval(&x, &y) + g.dot(&(&z - &y)) - 1e-10 * scale
    })
}

/// Pseudomonotonicity sampler: whenever f(x,y) >= 0 on a sampled pair,
/// f(y,x) <= tolerance.
pub fn check_pseudomonotone(
    f: &dyn Bifunction,
    set: &crate::sets::ConvexSet,
    samples: usize,
    rng: &mut impl Rng,
) -> bool {
    (0..samples).all(|_| {
        let x = set.sample(rng);
        let y = set.sample(rng);
        f.eval(&x, &y) < 0.0 || f.eval(&y, &x) <= 1e-10
    })
}

/// Monotonicity sampler: f(x,y) + f(y,x) <= tolerance on sampled pairs.
pub fn check_monotone(
    f: &dyn Bifunction,
    set: &crate::sets::ConvexSet,
    samples: usize,
    rng: &mut impl Rng,
) -> bool {
    (0..samples).all(|_| {
        let x = set.sample(rng);
        let y = set.sample(rng);
        f.eval(&x, &y) + f.eval(&y, &x) <= 1e-10
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::ConvexSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // f(x, y) = <x, y - x>, the linear equilibrium bifunction of the identity map.
    struct IdentityVi;

    impl Bifunction for IdentityVi {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &Point, y: &Point) -> f64 {
            x.dot(&(y - x))
        }
        fn partial_subgrad(&self, x: &Point, _y: &Point) -> Point {
            x.clone()
        }
        fn class(&self) -> BifunctionClass {
            BifunctionClass::Monotone
        }
        fn lipschitz_constants(&self) -> Option<(f64, f64)> {
            Some((0.5, 0.5))
        }
        fn smoothness(&self) -> Option<f64> {
            Some(0.0)
        }
    }

    fn triples(n: usize, seed: u64) -> Vec<(Point, Point, Point)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample = || Point::raw((0..2).map(|_| rng.gen_range(-5.0..5.0)).collect());
        (0..n).map(|_| (sample(), sample(), sample())).collect()
    }

    #[test]
    fn identity_vi_is_lipschitz_type_with_half() {
        // c1 = c2 = 1/2 is exactly tight for this bifunction
        let f = IdentityVi;
        assert!(check_lipschitz_type(&f, 0.5, 0.5, &triples(10_000, 1)));
        assert!(check_lipschitz_type(&f, 2.0, 2.0, &triples(1_000, 2)));
    }

    #[test]
    fn zero_constants_are_falsified() {
        let f = IdentityVi;
        assert!(!check_lipschitz_type(&f, 0.0, 0.0, &triples(10_000, 3)));
    }

    #[test]
    fn samplers_accept_identity_vi() {
        let f = IdentityVi;
        let set =
            ConvexSet::box_set(Point::raw(vec![-3.0, -3.0]), Point::raw(vec![3.0, 3.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(check_diagonal_zero(&f, &set, 500, &mut rng));
        assert!(check_partial_subgradient(&f, &set, 500, &mut rng));
        assert!(check_monotone(&f, &set, 2000, &mut rng));
        assert!(check_pseudomonotone(&f, &set, 2000, &mut rng));
    }
}
