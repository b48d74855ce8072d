//! The split equilibrium problem description.

use std::sync::Arc;

use crate::bifunction::{Bifunction, BifunctionClass};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sets::ConvexSet;

/// A split equilibrium problem: find x in C solving every source equilibrium
/// problem while A x lies in Q and solves every image equilibrium problem.
///
/// Source bifunctions f_1..f_N live on C x C in R^{d1}; image bifunctions
/// F_1..F_M live on Q x Q in R^{d2}; A is the linking operator R^{d1} -> R^{d2}.
#[derive(Clone)]
pub struct SplitProblem {
    f_c: Vec<Arc<dyn Bifunction>>,
    c: ConvexSet,
    f_q: Vec<Arc<dyn Bifunction>>,
    q: ConvexSet,
    a: Matrix,
}

impl SplitProblem {
    /// Structural validation: both families nonempty, dimensions consistent,
    /// image bifunctions tagged monotone (the resolvent requires it).
    /// Lipschitz-type constants are checked later by `validate_config`, which
    /// names the offending index.
    pub fn new(
        f_c: Vec<Arc<dyn Bifunction>>,
        c: ConvexSet,
        f_q: Vec<Arc<dyn Bifunction>>,
        q: ConvexSet,
        a: Matrix,
    ) -> Result<Self> {
        if f_c.is_empty() || f_q.is_empty() {
            return Err(Error::InvalidParameter(
                "a split problem needs at least one bifunction on each side".into(),
            ));
        }
        c.validate()?;
        q.validate()?;
        let d1 = c.dim();
        let d2 = q.dim();
        if a.cols() != d1 || a.rows() != d2 {
            return Err(Error::DimensionMismatch(format!(
                "linking operator is {}x{}, expected {}x{}",
                a.rows(),
                a.cols(),
                d2,
                d1
            )));
        }
        for (i, f) in f_c.iter().enumerate() {
            if f.dim() != d1 {
                return Err(Error::DimensionMismatch(format!(
                    "source bifunction {i} has dim {}, expected {d1}",
                    f.dim()
                )));
            }
        }
        for (j, f) in f_q.iter().enumerate() {
            if f.dim() != d2 {
                return Err(Error::DimensionMismatch(format!(
                    "image bifunction {j} has dim {}, expected {d2}",
                    f.dim()
                )));
            }
            if f.class() != BifunctionClass::Monotone {
                return Err(Error::ContractViolation {
                    index: j,
                    requirement: "monotone",
                    detail: "image bifunctions must be tagged monotone".into(),
                });
            }
        }
        Ok(Self { f_c, c, f_q, q, a })
    }

    pub fn f_c(&self) -> &[Arc<dyn Bifunction>] {
        &self.f_c
    }

    pub fn c(&self) -> &ConvexSet {
        &self.c
    }

    pub fn f_q(&self) -> &[Arc<dyn Bifunction>] {
        &self.f_q
    }

    pub fn q(&self) -> &ConvexSet {
        &self.q
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn d1(&self) -> usize {
        self.c.dim()
    }

    pub fn d2(&self) -> usize {
        self.q.dim()
    }

    /// Largest declared constants across the source family, None when any
    /// bifunction fails to declare them.
    pub fn max_lipschitz_constants(&self) -> Option<(f64, f64)> {
        let mut c1_max: f64 = 0.0;
        let mut c2_max: f64 = 0.0;
        for f in &self.f_c {
            let (c1, c2) = f.lipschitz_constants()?;
            c1_max = c1_max.max(c1);
            c2_max = c2_max.max(c2);
        }
        Some((c1_max, c2_max))
    }
}
