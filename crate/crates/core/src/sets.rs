//! Closed convex sets with membership, Euclidean projection and the
//! generalized projection `Q_C`.
//!
//! `Q_C(x)` minimizes `phi(y, x)` over `y` in `C`, which up to the constant
//! `|x|^2` is `h(y) = |y|_p^2 - 2 <y, Jx>`. The minimizer is found by projected
//! gradient descent on `h` with Euclidean projections and Armijo backtracking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{duality_map, lp_norm, pairing, PrimalVector};
use crate::tolerances::{ARMIJO_C, PROJECTION_GRADIENT_TOL, PROJECTION_MAX_ITER, VI_TOLERANCE};

/// A nonempty closed convex subset of `R^n`.
///
/// Build values through the associated constructors, which check the
/// variant invariants; [`ConvexSet::validate`] re-checks them for values built
/// by hand.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    WholeSpace,
    /// `{x : <a, x> <= b}` with `a != 0`.
    HalfSpace {
        a: Vec<f64>,
        b: f64,
    },
    /// `{x : lo <= x <= hi}` coordinate-wise.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    EuclideanBall {
        center: Vec<f64>,
        radius: f64,
    },
    /// `origin + span(basis)`; the basis is orthonormal in the Euclidean
    /// inner product. An empty basis describes the singleton `{origin}`.
    Affine {
        origin: Vec<f64>,
        basis: Vec<Vec<f64>>,
    },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|c| c.is_finite())
}

impl ConvexSet {
    pub fn half_space(a: Vec<f64>, b: f64) -> Result<Self> {
        let set = ConvexSet::HalfSpace { a, b };
        set.validate()?;
        Ok(set)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let set = ConvexSet::Box { lo, hi };
        set.validate()?;
        Ok(set)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let set = ConvexSet::EuclideanBall { center, radius };
        set.validate()?;
        Ok(set)
    }

    /// `origin + span(directions)`. The directions are orthonormalized;
    /// linearly dependent ones are dropped.
    pub fn affine(origin: Vec<f64>, directions: &[Vec<f64>]) -> Result<Self> {
        let n = origin.len();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for d in directions {
            if d.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: d.len(),
                });
            }
            let scale = lp_norm(d, 2.0);
            if scale == 0.0 {
                continue;
            }
            let mut v: Vec<f64> = d.iter().map(|c| c / scale).collect();
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&v, b);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let len = lp_norm(&v, 2.0);
            if len > 1e-10 {
                v.iter_mut().for_each(|x| *x /= len);
                basis.push(v);
            }
        }
        let set = ConvexSet::Affine { origin, basis };
        set.validate()?;
        Ok(set)
    }

    pub fn point(origin: Vec<f64>) -> Result<Self> {
        Self::affine(origin, &[])
    }

    /// Dimension fixed by the set data; `None` for the whole space.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConvexSet::WholeSpace => None,
            ConvexSet::HalfSpace { a, .. } => Some(a.len()),
            ConvexSet::Box { lo, .. } => Some(lo.len()),
            ConvexSet::EuclideanBall { center, .. } => Some(center.len()),
            ConvexSet::Affine { origin, .. } => Some(origin.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::WholeSpace => Ok(()),
            ConvexSet::HalfSpace { a, b } => {
                if a.is_empty() || !all_finite(a) || !b.is_finite() {
                    return Err(Error::InvalidSet("half-space data must be finite".into()));
                }
                if a.iter().all(|&c| c == 0.0) {
                    return Err(Error::InvalidSet("half-space normal must be nonzero".into()));
                }
                Ok(())
            }
            ConvexSet::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        found: hi.len(),
                    });
                }
                if lo.is_empty() || !all_finite(lo) || !all_finite(hi) {
                    return Err(Error::InvalidSet("box bounds must be finite".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::InvalidSet("box requires lo <= hi".into()));
                }
                Ok(())
            }
            ConvexSet::EuclideanBall { center, radius } => {
                if center.is_empty() || !all_finite(center) {
                    return Err(Error::InvalidSet("ball center must be finite".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSet("ball radius must be positive".into()));
                }
                Ok(())
            }
            ConvexSet::Affine { origin, basis } => {
                if origin.is_empty() || !all_finite(origin) {
                    return Err(Error::InvalidSet("affine origin must be finite".into()));
                }
                for (i, b) in basis.iter().enumerate() {
                    if b.len() != origin.len() {
                        return Err(Error::DimensionMismatch {
                            expected: origin.len(),
                            found: b.len(),
                        });
                    }
                    for (j, c) in basis.iter().enumerate().take(i + 1) {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        if (dot(b, c) - expected).abs() > 1e-10 {
                            return Err(Error::InvalidSet("affine basis must be orthonormal".into()));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, x: &PrimalVector) -> Result<()> {
        match self.dim() {
            Some(n) if n != x.dim() => Err(Error::DimensionMismatch {
                expected: n,
                found: x.dim(),
            }),
            _ => Ok(()),
        }
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &PrimalVector) -> Result<f64> {
        self.check_dim(x)?;
        if let ConvexSet::HalfSpace { a, b } = self {
            let excess = dot(a, x.coords()) - b;
            return Ok(excess.max(0.0) / lp_norm(a, 2.0));
        }
        let proj = self.project_coords(x.coords());
        Ok(x.coords()
            .iter()
            .zip(&proj)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// True iff `x` is within Euclidean distance `tol` of the set.
    pub fn contains(&self, x: &PrimalVector, tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "membership tolerance {tol} must be nonnegative"
            )));
        }
        Ok(self.distance(x)? <= tol)
    }

    fn project_coords(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexSet::WholeSpace => x.to_vec(),
            ConvexSet::HalfSpace { a, b } => {
                let excess = dot(a, x) - b;
                if excess <= 0.0 {
                    return x.to_vec();
                }
                let t = excess / dot(a, a);
                x.iter().zip(a).map(|(xi, ai)| xi - t * ai).collect()
            }
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(xi, (l, h))| xi.clamp(*l, *h))
                .collect(),
            ConvexSet::EuclideanBall { center, radius } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let len = lp_norm(&d, 2.0);
                if len <= *radius {
                    return x.to_vec();
                }
                let s = radius / len;
                center.iter().zip(&d).map(|(c, di)| c + s * di).collect()
            }
            ConvexSet::Affine { origin, basis } => {
                let d: Vec<f64> = x.iter().zip(origin).map(|(a, o)| a - o).collect();
                let mut out = origin.clone();
                for b in basis {
                    let c = dot(&d, b);
                    out.iter_mut().zip(b).for_each(|(o, bi)| *o += c * bi);
                }
                out
            }
        }
    }

    /// Nearest point of the set in the Euclidean norm.
    pub fn euclidean_project(&self, x: &PrimalVector) -> Result<PrimalVector> {
        self.check_dim(x)?;
        Ok(PrimalVector::from_parts(x.space(), self.project_coords(x.coords())))
    }

    /// A probe point: the Euclidean projection of `around + scale * g` with
    /// `g` standard Gaussian.
    pub fn sample_probe<R: rand::Rng>(&self, around: &PrimalVector, scale: f64, rng: &mut R) -> Result<PrimalVector> {
        self.check_dim(around)?;
        let raw: Vec<f64> = around
            .coords()
            .iter()
            .map(|c| {
                let g: f64 = StandardNormal.sample(rng);
                c + scale * g
            })
            .collect();
        Ok(PrimalVector::from_parts(around.space(), self.project_coords(&raw)))
    }

    /// The generalized projection `Q_C(x)` with default options.
    pub fn generalized_projection(&self, x: &PrimalVector) -> Result<ProjectionResult> {
        self.generalized_projection_with(x, &ProjectionOptions::default())
    }

    pub fn generalized_projection_with(&self, x: &PrimalVector, opts: &ProjectionOptions) -> Result<ProjectionResult> {
        self.check_dim(x)?;
        if matches!(self, ConvexSet::WholeSpace) || self.distance(x)? == 0.0 {
            return Ok(ProjectionResult {
                point: x.clone(),
                vi_residual: 0.0,
                stationarity: 0.0,
                inner_iterations: 0,
                converged: true,
            });
        }

        let jx = duality_map(x);
        let objective = |y: &PrimalVector| -> f64 {
            let n = y.norm();
            n * n - 2.0 * pairing(y, &jx).expect("same space")
        };
        let gradient = |y: &PrimalVector| -> PrimalVector { (&duality_map(y) - &jx).as_primal_coords().scale(2.0) };
        let stationarity = |y: &PrimalVector, g: &PrimalVector| -> f64 {
            let trial: Vec<f64> = y.coords().iter().zip(g.coords()).map(|(a, b)| a - b).collect();
            let proj = self.project_coords(&trial);
            y.coords()
                .iter()
                .zip(&proj)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };

        let mut y = self.euclidean_project(x)?;
        let mut h = objective(&y);
        let mut g = gradient(&y);
        let mut pg = stationarity(&y, &g);
        let mut iterations = 0;
        while pg > opts.gradient_tol && iterations < opts.max_iter {
            iterations += 1;
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-30 {
                let trial_raw: Vec<f64> = y.coords().iter().zip(g.coords()).map(|(a, b)| a - step * b).collect();
                let trial = PrimalVector::from_parts(y.space(), self.project_coords(&trial_raw));
                let decrease = dot(g.coords(), (&trial - &y).coords());
                let h_trial = objective(&trial);
                if h_trial <= h + ARMIJO_C * decrease {
                    accepted = Some((trial, h_trial));
                    break;
                }
                // Near the optimum the objective change drops below rounding;
                // fall back to progress in the stationarity measure.
                if ARMIJO_C * decrease.abs() <= 8.0 * f64::EPSILON * h.abs().max(1.0) {
                    let g_trial = gradient(&trial);
                    if stationarity(&trial, &g_trial) < pg {
                        accepted = Some((trial, h_trial));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((next, h_next)) => {
                    y = next;
                    h = h_next;
                    g = gradient(&y);
                    pg = stationarity(&y, &g);
                }
                None => break,
            }
        }

        let vi_residual = self.vi_residual(x, &y, opts)?;
        Ok(ProjectionResult {
            converged: pg <= opts.vi_tolerance && vi_residual <= opts.vi_tolerance,
            point: y,
            vi_residual,
            stationarity: pg,
            inner_iterations: iterations,
        })
    }

    /// `max_z <z - q, Jx - Jq>` over sampled probe points `z` of the set.
    pub fn vi_residual(&self, x: &PrimalVector, q: &PrimalVector, opts: &ProjectionOptions) -> Result<f64> {
        let gap = &duality_map(x) - &duality_map(q);
        if opts.probes == 0 || gap.is_zero() {
            return Ok(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let scale = 1.0 + q.euclidean_norm();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..opts.probes {
            let z = self.sample_probe(q, scale, &mut rng)?;
            worst = worst.max(pairing(&(&z - q), &gap)?);
        }
        Ok(worst.max(0.0))
    }
}

/// Knobs of the generalized projection solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOptions {
    pub vi_tolerance: f64,
    pub gradient_tol: f64,
    pub max_iter: usize,
    /// Number of probe points used for the variational inequality residual.
    pub probes: usize,
    pub seed: u64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            vi_tolerance: VI_TOLERANCE,
            gradient_tol: PROJECTION_GRADIENT_TOL,
            max_iter: PROJECTION_MAX_ITER,
            probes: 100,
            seed: 0x5e_ed0f_c011,
        }
    }
}

/// Outcome of `Q_C(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: PrimalVector,
    /// Largest sampled value of `<z - Q_C x, Jx - J Q_C x>`.
    pub vi_residual: f64,
    /// Euclidean length of the projected gradient step at the returned point.
    pub stationarity: f64,
    pub inner_iterations: usize,
    pub converged: bool,
}
