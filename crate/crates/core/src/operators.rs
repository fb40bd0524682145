//! Single-valued maximal monotone operators `A: E -> E*` with computable
//! resolvents `L_r = (J + rA)^{-1} J` and analytically known zero sets.
//!
//! Every variant is continuous and monotone on the whole space, hence
//! maximal monotone.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{dual_blend, duality_map, pairing, DualVector, LpSpace, PrimalVector};
use crate::sets::ConvexSet;
use crate::tolerances::{ARMIJO_C, PSD_TOLERANCE, RESOLVENT_GRADIENT_TOL, RESOLVENT_MAX_ITER, RESOLVENT_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneOperator {
    /// `A x = M x + b` with `M` positive semidefinite (not necessarily
    /// symmetric).
    LinearMonotone { m: DMatrix<f64>, b: Vec<f64> },
    /// `A x = J x - J z`; its only zero is `z`.
    DualityResidual { z: PrimalVector },
    /// `A x = Q x - c`, the gradient of `x^T Q x / 2 - c^T x` with `Q`
    /// symmetric positive semidefinite.
    GradientOfQuadratic { q: DMatrix<f64>, c: Vec<f64> },
}

fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn check_square(m: &DMatrix<f64>, v: &[f64]) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidParameter(format!(
            "operator matrix must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: v.len(),
        });
    }
    if m.iter().chain(v).any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

impl MonotoneOperator {
    pub fn linear(m: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        check_square(&m, &b)?;
        let min_eigenvalue = min_symmetric_eigenvalue(&m);
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        Ok(MonotoneOperator::LinearMonotone { m, b })
    }

    pub fn gradient_of_quadratic(q: DMatrix<f64>, c: Vec<f64>) -> Result<Self> {
        check_square(&q, &c)?;
        let scale = q.amax().max(1.0);
        if (&q - q.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("quadratic form must be symmetric".into()));
        }
        let min_eigenvalue = min_symmetric_eigenvalue(&q);
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        Ok(MonotoneOperator::GradientOfQuadratic { q, c })
    }

    pub fn duality_residual(z: PrimalVector) -> Self {
        MonotoneOperator::DualityResidual { z }
    }

    pub fn dim(&self) -> usize {
        match self {
            MonotoneOperator::LinearMonotone { b, .. } => b.len(),
            MonotoneOperator::DualityResidual { z } => z.dim(),
            MonotoneOperator::GradientOfQuadratic { c, .. } => c.len(),
        }
    }

    fn check_dim(&self, x: &PrimalVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        if let MonotoneOperator::DualityResidual { z } = self {
            if z.space() != x.space() {
                return Err(Error::InvalidParameter(
                    "duality residual anchored in a different space".into(),
                ));
            }
        }
        Ok(())
    }

    /// `A x` as a dual vector.
    pub fn evaluate(&self, x: &PrimalVector) -> Result<DualVector> {
        self.check_dim(x)?;
        let space = x.space();
        match self {
            MonotoneOperator::LinearMonotone { m, b } => {
                let v = m * DVector::from_column_slice(x.coords()) + DVector::from_column_slice(b);
                Ok(DualVector::from_parts(space, v.as_slice().to_vec()))
            }
            MonotoneOperator::DualityResidual { z } => Ok(&duality_map(x) - &duality_map(z)),
            MonotoneOperator::GradientOfQuadratic { q, c } => {
                let v = q * DVector::from_column_slice(x.coords()) - DVector::from_column_slice(c);
                Ok(DualVector::from_parts(space, v.as_slice().to_vec()))
            }
        }
    }

    /// `J z + r A z - J x`.
    pub fn resolvent_residual(&self, r: f64, x: &PrimalVector, z: &PrimalVector) -> Result<DualVector> {
        let az = self.evaluate(z)?;
        Ok(&duality_map(z).add_scaled(r, &az) - &duality_map(x))
    }

    /// Linear part and its symmetric status for the Newton system.
    fn linear_part(&self) -> Option<(&DMatrix<f64>, bool)> {
        match self {
            MonotoneOperator::LinearMonotone { m, .. } => {
                let sym = (m - m.transpose()).amax() <= 1e-14 * m.amax().max(1.0);
                Some((m, sym))
            }
            MonotoneOperator::GradientOfQuadratic { q, .. } => Some((q, true)),
            MonotoneOperator::DualityResidual { .. } => None,
        }
    }

    /// Potential `g` with `A = grad g`, when one exists.
    fn potential(&self, z: &PrimalVector) -> Option<f64> {
        let zv = DVector::from_column_slice(z.coords());
        match self {
            MonotoneOperator::LinearMonotone { m, b } => {
                let (_, sym) = self.linear_part()?;
                sym.then(|| 0.5 * zv.dot(&(m * &zv)) + zv.dot(&DVector::from_column_slice(b)))
            }
            MonotoneOperator::GradientOfQuadratic { q, c } => {
                Some(0.5 * zv.dot(&(q * &zv)) - zv.dot(&DVector::from_column_slice(c)))
            }
            MonotoneOperator::DualityResidual { .. } => None,
        }
    }

    /// The resolvent `L_r x` with default tolerances.
    pub fn resolvent(&self, r: f64, x: &PrimalVector) -> Result<ResolventResult> {
        self.resolvent_with(r, x, &ResolventOptions::default())
    }

    pub fn resolvent_with(&self, r: f64, x: &PrimalVector, opts: &ResolventOptions) -> Result<ResolventResult> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "resolvent parameter r = {r} must be positive"
            )));
        }
        self.check_dim(x)?;
        let space = x.space();

        if let MonotoneOperator::DualityResidual { z } = self {
            // J w + r (J w - J z) = J x  =>  J w = (J x + r J z) / (1 + r)
            let point = dual_blend(1.0 / (1.0 + r), &duality_map(x), &duality_map(z))?;
            return self.finish(r, x, point, 0, opts);
        }

        let (mat, symmetric) = self.linear_part().expect("linear variants");
        if space.is_hilbert() {
            let n = space.dim();
            let lhs = DMatrix::identity(n, n) + mat * r;
            let rhs = match self {
                MonotoneOperator::LinearMonotone { b, .. } => {
                    DVector::from_column_slice(x.coords()) - DVector::from_column_slice(b) * r
                }
                MonotoneOperator::GradientOfQuadratic { c, .. } => {
                    DVector::from_column_slice(x.coords()) + DVector::from_column_slice(c) * r
                }
                MonotoneOperator::DualityResidual { .. } => unreachable!(),
            };
            let sol = lhs
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::InnerSolver("singular resolvent system".into()))?;
            let point = PrimalVector::from_parts(space, sol.as_slice().to_vec());
            return self.finish(r, x, point, 1, opts);
        }

        let jx = duality_map(x);
        let objective = |z: &PrimalVector| -> Option<f64> {
            let g = self.potential(z)?;
            let n = z.norm();
            Some(0.5 * n * n + r * g - pairing(z, &jx).expect("same space"))
        };

        let mut z = opts
            .warm_start
            .clone()
            .filter(|w| w.space() == space)
            .unwrap_or_else(|| x.clone());
        let mut res = self.resolvent_residual(r, x, &z)?;
        let mut res_norm = res.norm();
        let mut iterations = 0;
        while res_norm > opts.gradient_tol && iterations < opts.max_iter {
            iterations += 1;
            let jac = duality_jacobian(&z) + mat * r;
            let neg_res = -DVector::from_column_slice(res.coords());
            let mut dir = jac.lu().solve(&neg_res).filter(|d| d.iter().all(|c| c.is_finite()));
            let slope_of = |d: &DVector<f64>| -d.dot(&neg_res);
            if let Some(d) = &dir {
                if symmetric && slope_of(d) >= 0.0 {
                    dir = None;
                }
            }
            let dir = dir.unwrap_or(neg_res.clone());
            let slope = slope_of(&dir);
            let psi0 = objective(&z);
            let step_dir = PrimalVector::from_parts(space, dir.as_slice().to_vec());

            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-30 {
                let trial = z.add_scaled(t, &step_dir);
                let trial_res = self.resolvent_residual(r, x, &trial)?;
                let trial_norm = trial_res.norm();
                let decrease_ok = match (psi0, objective(&trial)) {
                    (Some(a), Some(b)) => b <= a + ARMIJO_C * t * slope,
                    _ => false,
                };
                if decrease_ok || trial_norm <= (1.0 - ARMIJO_C * t) * res_norm {
                    accepted = Some((trial, trial_res, trial_norm));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((nz, nres, nnorm)) => {
                    z = nz;
                    res = nres;
                    res_norm = nnorm;
                }
                None => break,
            }
        }
        self.finish(r, x, z, iterations, opts)
    }

    fn finish(
        &self,
        r: f64,
        x: &PrimalVector,
        point: PrimalVector,
        inner_iterations: usize,
        opts: &ResolventOptions,
    ) -> Result<ResolventResult> {
        if !point.is_finite() {
            return Err(Error::InnerSolver("resolvent iterate diverged".into()));
        }
        let residual = self.resolvent_residual(r, x, &point)?.norm();
        Ok(ResolventResult {
            converged: residual <= opts.tolerance,
            point,
            residual,
            inner_iterations,
        })
    }

    /// Description of `A^{-1} 0` in the given space.
    pub fn zero_set_reference(&self, space: LpSpace) -> Result<ZeroSet> {
        if space.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: space.dim(),
            });
        }
        let (mat, rhs) = match self {
            MonotoneOperator::DualityResidual { z } => {
                return Ok(ZeroSet::Point(space.primal(z.coords().to_vec())?));
            }
            MonotoneOperator::LinearMonotone { m, b } => (m, -DVector::from_column_slice(b)),
            MonotoneOperator::GradientOfQuadratic { q, c } => (q, DVector::from_column_slice(c)),
        };
        let svd = mat.clone().svd(true, true);
        let (u, v_t) = (svd.u.as_ref().expect("u"), svd.v_t.as_ref().expect("v_t"));
        let sigma_max = svd.singular_values.max();
        let cutoff = 1e-10 * sigma_max.max(1.0);
        let n = space.dim();
        let mut particular = DVector::zeros(n);
        let mut null_basis = Vec::new();
        for (k, &s) in svd.singular_values.iter().enumerate() {
            let v_k = v_t.row(k).transpose();
            if s > cutoff {
                particular += &v_k * (u.column(k).dot(&rhs) / s);
            } else {
                null_basis.push(v_k.as_slice().to_vec());
            }
        }
        let miss = (mat * &particular - &rhs).norm();
        if miss > 1e-8 * (1.0 + rhs.norm()) {
            return Err(Error::EmptyZeroSet(format!(
                "linear system is inconsistent (residual {miss:e})"
            )));
        }
        let particular = space.primal(particular.as_slice().to_vec())?;
        if null_basis.is_empty() {
            Ok(ZeroSet::Point(particular))
        } else {
            Ok(ZeroSet::Affine { particular, null_basis })
        }
    }
}

/// `d(Jz)/dz`, the Hessian of `|z|_p^2 / 2`:
/// `(p-1) diag((|z_i|/N)^{p-2}) + (2-p) Jz Jz^T / N^2` with `N = |z|_p`.
///
/// For `p < 2` coordinates are floored at `1e-8 N` so the diagonal stays finite;
/// this only affects the Newton direction, never the residual test.
pub fn duality_jacobian(z: &PrimalVector) -> DMatrix<f64> {
    let space = z.space();
    let n = space.dim();
    let p = space.p();
    let norm = z.norm();
    if space.is_hilbert() || norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let jz = DVector::from_column_slice(duality_map(z).coords());
    let mut h = &jz * jz.transpose() * ((2.0 - p) / (norm * norm));
    for i in 0..n {
        let a = if p < 2.0 {
            (z[i].abs() / norm).max(1e-8)
        } else {
            z[i].abs() / norm
        };
        h[(i, i)] += (p - 1.0) * a.powf(p - 2.0);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventOptions {
    /// Residual accepted as converged.
    pub tolerance: f64,
    /// Residual at which the Newton loop stops.
    pub gradient_tol: f64,
    pub max_iter: usize,
    pub warm_start: Option<PrimalVector>,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self {
            tolerance: RESOLVENT_TOLERANCE,
            gradient_tol: RESOLVENT_GRADIENT_TOL,
            max_iter: RESOLVENT_MAX_ITER,
            warm_start: None,
        }
    }
}

/// Outcome of `L_r x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventResult {
    pub point: PrimalVector,
    /// `|J(point) + r A(point) - J x|_q`.
    pub residual: f64,
    pub inner_iterations: usize,
    pub converged: bool,
}

/// `A^{-1} 0` as a point or as `particular + span(null_basis)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroSet {
    Point(PrimalVector),
    Affine {
        particular: PrimalVector,
        /// Orthonormal basis of the null space.
        null_basis: Vec<Vec<f64>>,
    },
}

impl ZeroSet {
    pub fn to_set(&self) -> Result<ConvexSet> {
        match self {
            ZeroSet::Point(p) => ConvexSet::point(p.coords().to_vec()),
            ZeroSet::Affine { particular, null_basis } => ConvexSet::affine(particular.coords().to_vec(), null_basis),
        }
    }

    /// A representative element.
    pub fn anchor(&self) -> &PrimalVector {
        match self {
            ZeroSet::Point(p) => p,
            ZeroSet::Affine { particular, .. } => particular,
        }
    }
}
