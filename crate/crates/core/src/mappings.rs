//! Mappings of type (r) and sequences of them.
//!
//! A mapping `T` is of type (r) when it has a fixed point and
//! `phi(p, Tx) <= phi(p, x)` for every fixed point `p`. Resolvents and
//! generalized projections are of type (r), and so is the blend
//! `S = J^{-1}(beta J + (1 - beta) J T)` of a type (r) mapping `T`, with
//! `F(S) = F(T)` whenever `beta < 1`.

use crate::error::{Error, Result};
use crate::geometry::{dual_blend, duality_map, lyapunov, LpSpace, PrimalVector};
use crate::operators::{MonotoneOperator, ResolventOptions};
use crate::schedule::Schedule;
use crate::sets::{ConvexSet, ProjectionOptions};
use crate::tolerances::{SRNS_EPS_D, SRNS_EPS_E};

#[derive(Debug, Clone, PartialEq)]
pub enum Mapping {
    /// `L_r = (J + rA)^{-1} J`.
    Resolvent { op: MonotoneOperator, r: f64 },
    /// The generalized projection `Q_C`.
    Projection { set: ConvexSet },
    /// `J^{-1}(beta J + (1 - beta) J T)`.
    Blend { inner: Box<Mapping>, beta: f64 },
}

/// Inner solver settings shared by all mapping evaluations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapOptions {
    pub projection: ProjectionOptions,
    pub resolvent: ResolventOptions,
}

/// Quantities of a blend step `Sx = J^{-1}(beta Jx + (1 - beta) J Tx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendDiagnostics {
    pub beta: f64,
    /// `beta |Jx|^2 + (1 - beta) |JTx|^2 - |JSx|^2`, nonnegative by convexity.
    pub convexity_gap: f64,
    /// `|Jx - JTx|_q`.
    pub dual_gap: f64,
}

/// Result of evaluating a mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct MapOutput {
    pub point: PrimalVector,
    pub inner_iterations: usize,
    /// False if any inner solve missed its tolerance.
    pub converged: bool,
    pub blend: Option<BlendDiagnostics>,
}

impl Mapping {
    pub fn resolvent(op: MonotoneOperator, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "resolvent parameter r = {r} must be positive"
            )));
        }
        Ok(Mapping::Resolvent { op, r })
    }

    pub fn projection(set: ConvexSet) -> Result<Self> {
        set.validate()?;
        Ok(Mapping::Projection { set })
    }

    pub fn blend(inner: Mapping, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("blend weight {beta} outside [0, 1]")));
        }
        Ok(Mapping::Blend {
            inner: Box::new(inner),
            beta,
        })
    }

    pub fn identity() -> Self {
        Mapping::Projection {
            set: ConvexSet::WholeSpace,
        }
    }

    pub fn apply(&self, x: &PrimalVector) -> Result<MapOutput> {
        self.apply_with(x, &MapOptions::default())
    }

    pub fn apply_with(&self, x: &PrimalVector, opts: &MapOptions) -> Result<MapOutput> {
        match self {
            Mapping::Resolvent { op, r } => {
                let res = op.resolvent_with(*r, x, &opts.resolvent)?;
                Ok(MapOutput {
                    point: res.point,
                    inner_iterations: res.inner_iterations,
                    converged: res.converged,
                    blend: None,
                })
            }
            Mapping::Projection { set } => {
                let res = set.generalized_projection_with(x, &opts.projection)?;
                Ok(MapOutput {
                    point: res.point,
                    inner_iterations: res.inner_iterations,
                    converged: res.converged,
                    blend: None,
                })
            }
            Mapping::Blend { inner, beta } => blend_step(inner, *beta, x, opts),
        }
    }

    /// The fixed-point set `F(T)` as a convex set.
    pub fn fixed_point_reference(&self, space: LpSpace) -> Result<ConvexSet> {
        match self {
            Mapping::Resolvent { op, .. } => op.zero_set_reference(space)?.to_set(),
            Mapping::Projection { set } => Ok(set.clone()),
            Mapping::Blend { beta, .. } if *beta == 1.0 => Ok(ConvexSet::WholeSpace),
            Mapping::Blend { inner, .. } => inner.fixed_point_reference(space),
        }
    }
}

fn blend_step(inner: &Mapping, beta: f64, x: &PrimalVector, opts: &MapOptions) -> Result<MapOutput> {
    if beta == 1.0 {
        return Ok(MapOutput {
            point: x.clone(),
            inner_iterations: 0,
            converged: true,
            blend: None,
        });
    }
    let tx = inner.apply_with(x, opts)?;
    let jx = duality_map(x);
    let jtx = duality_map(&tx.point);
    let point = dual_blend(beta, &jx, &jtx)?;
    let nx = jx.norm();
    let ntx = jtx.norm();
    let ns = point.norm();
    let diagnostics = BlendDiagnostics {
        beta,
        convexity_gap: beta * nx * nx + (1.0 - beta) * ntx * ntx - ns * ns,
        dual_gap: (&jx - &jtx).norm(),
    };
    Ok(MapOutput {
        point,
        inner_iterations: tx.inner_iterations,
        converged: tx.converged,
        blend: Some(diagnostics),
    })
}

/// A sequence `{S_n}` of type (r) mappings with a common fixed point.
#[derive(Debug, Clone, PartialEq)]
pub enum MappingSequence {
    /// `S_n = L_{r_n}` for a monotone operator `A`.
    Resolvent { op: MonotoneOperator, r: Schedule },
    /// `S_n = J^{-1}(beta_n J + (1 - beta_n) J T)`.
    Blend { base: Mapping, beta: Schedule },
}

impl MappingSequence {
    /// Checks `inf r_n > 0`.
    pub fn resolvent(op: MonotoneOperator, r: Schedule) -> Result<Self> {
        let issues = r.check_resolvent_parameters();
        if !issues.is_empty() {
            return Err(Error::Hypothesis(issues));
        }
        Ok(MappingSequence::Resolvent { op, r })
    }

    /// Checks `0 < liminf beta_n <= limsup beta_n < 1`.
    pub fn blend(base: Mapping, beta: Schedule) -> Result<Self> {
        let issues = beta.check_blend_weights();
        if !issues.is_empty() {
            return Err(Error::Hypothesis(issues));
        }
        Ok(MappingSequence::Blend { base, beta })
    }

    /// The `n`-th mapping, `n >= 1`.
    pub fn mapping_at(&self, n: usize) -> Result<Mapping> {
        match self {
            MappingSequence::Resolvent { op, r } => Mapping::resolvent(op.clone(), r.value(n)),
            MappingSequence::Blend { base, beta } => Mapping::blend(base.clone(), beta.value(n)),
        }
    }

    pub fn apply_indexed(&self, n: usize, x: &PrimalVector) -> Result<MapOutput> {
        self.apply_indexed_with(n, x, &MapOptions::default())
    }

    pub fn apply_indexed_with(&self, n: usize, x: &PrimalVector, opts: &MapOptions) -> Result<MapOutput> {
        if n == 0 {
            return Err(Error::InvalidParameter("mapping sequences are indexed from 1".into()));
        }
        match self {
            MappingSequence::Resolvent { op, r } => {
                let res = op.resolvent_with(r.value(n), x, &opts.resolvent)?;
                Ok(MapOutput {
                    point: res.point,
                    inner_iterations: res.inner_iterations,
                    converged: res.converged,
                    blend: None,
                })
            }
            MappingSequence::Blend { base, beta } => blend_step(base, beta.value(n), x, opts),
        }
    }

    /// `F = intersection of F(S_n)`: `A^{-1} 0` for resolvents, `F(T)` for
    /// blends (valid because `limsup beta_n < 1`).
    pub fn common_fixed_points(&self, space: LpSpace) -> Result<ConvexSet> {
        match self {
            MappingSequence::Resolvent { op, .. } => op.zero_set_reference(space)?.to_set(),
            MappingSequence::Blend { base, .. } => base.fixed_point_reference(space),
        }
    }
}

/// Thresholds for [`srns_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrnsThresholds {
    pub eps_d: f64,
    pub eps_e: f64,
}

impl Default for SrnsThresholds {
    fn default() -> Self {
        Self {
            eps_d: SRNS_EPS_D,
            eps_e: SRNS_EPS_E,
        }
    }
}

/// Finite-sample view of the strongly relatively nonexpansive property.
#[derive(Debug, Clone, PartialEq)]
pub struct SrnsReport {
    /// `d_n = phi(p, x_n) - phi(p, S_n x_n)`.
    pub d: Vec<f64>,
    /// `e_n = phi(S_n x_n, x_n)`.
    pub e: Vec<f64>,
    /// First (0-based) entry of the tail window that the flag inspects.
    pub window_start: usize,
    /// Set when `d_n` stays below `eps_d` over the window while `e_n` stays
    /// above `eps_e`, i.e. the defining implication looks broken.
    pub flagged: bool,
}

/// Evaluates `d_n` and `e_n` along `xs` (where `xs[k]` is `x_{k+1}`) and
/// inspects the second half of the prefix.
pub fn srns_diagnostic(
    seq: &MappingSequence,
    xs: &[PrimalVector],
    fixed_point: &PrimalVector,
    thresholds: SrnsThresholds,
) -> Result<SrnsReport> {
    let mut d = Vec::with_capacity(xs.len());
    let mut e = Vec::with_capacity(xs.len());
    for (k, x) in xs.iter().enumerate() {
        let sx = seq.apply_indexed(k + 1, x)?.point;
        d.push(lyapunov(fixed_point, x)? - lyapunov(fixed_point, &sx)?);
        e.push(lyapunov(&sx, x)?);
    }
    let window_start = xs.len() / 2;
    let flagged = !xs.is_empty()
        && d[window_start..].iter().all(|&v| v < thresholds.eps_d)
        && e[window_start..].iter().all(|&v| v > thresholds.eps_e);
    Ok(SrnsReport {
        d,
        e,
        window_start,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn v(s: LpSpace, c: &[f64]) -> PrimalVector {
        s.primal(c.to_vec()).unwrap()
    }

    fn quad() -> MonotoneOperator {
        MonotoneOperator::gradient_of_quadratic(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
            vec![1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn apply_examples() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let x = v(s, &[0.3, -1.7]);
        let t = Mapping::resolvent(quad(), 1.0).unwrap();
        let out = Mapping::blend(t, 1.0).unwrap().apply(&x).unwrap();
        assert_eq!(out.point, x);
        assert_eq!(Mapping::identity().apply(&x).unwrap().point, x);

        let h = LpSpace::new(2, 2.0).unwrap();
        let id = MonotoneOperator::linear(DMatrix::identity(2, 2), vec![0.0; 2]).unwrap();
        let out = Mapping::resolvent(id, 1.0).unwrap().apply(&v(h, &[2.0, 4.0])).unwrap();
        assert!((&out.point - &v(h, &[1.0, 2.0])).norm() < 1e-15);
    }

    #[test]
    fn constructor_checks() {
        assert!(Mapping::resolvent(quad(), 0.0).is_err());
        assert!(Mapping::blend(Mapping::identity(), 1.5).is_err());
        let e = MappingSequence::resolvent(quad(), Schedule::harmonic()).unwrap_err();
        assert!(e.to_string().contains("inf r_n > 0"));
        let e = MappingSequence::blend(Mapping::identity(), Schedule::offset_power(1.0, -1.0, 1.0)).unwrap_err();
        assert!(e.to_string().contains("limsup beta_n < 1"));
    }

    #[test]
    fn apply_indexed_examples() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let x = v(s, &[0.3, -1.7]);
        let seq = MappingSequence::resolvent(quad(), Schedule::constant(1.0)).unwrap();
        let a = seq.apply_indexed(1, &x).unwrap().point;
        let b = seq.apply_indexed(17, &x).unwrap().point;
        assert_eq!(a, b);
        assert!(seq.apply_indexed(0, &x).is_err());

        let z = quad().zero_set_reference(s).unwrap().anchor().clone();
        let seq = MappingSequence::resolvent(quad(), Schedule::linear(1.0)).unwrap();
        for n in [1, 2, 50] {
            assert!((&seq.apply_indexed(n, &z).unwrap().point - &z).norm() < 1e-10);
        }
    }

    #[test]
    fn blend_sequence_first_index() {
        // beta_n = 1/2 + 1/(4n) gives beta_1 = 3/4
        let s = LpSpace::new(2, 3.0).unwrap();
        let x = v(s, &[1.2, 0.4]);
        let t = Mapping::resolvent(quad(), 1.0).unwrap();
        let seq = MappingSequence::blend(t.clone(), Schedule::offset_power(0.5, 0.25, 1.0)).unwrap();
        let via_seq = seq.apply_indexed(1, &x).unwrap();
        let tx = t.apply(&x).unwrap().point;
        let direct = crate::geometry::dual_convex_combination(0.75, &x, &tx).unwrap();
        assert!((&via_seq.point - &direct).norm() < 1e-14);
        let diag = via_seq.blend.unwrap();
        assert_eq!(diag.beta, 0.75);
        assert!(diag.convexity_gap >= -1e-14);
    }

    #[test]
    fn fixed_point_references() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let t = Mapping::resolvent(quad(), 1.0).unwrap();
        assert!(matches!(t.fixed_point_reference(s).unwrap(), ConvexSet::Affine { .. }));
        let b = Mapping::blend(t.clone(), 1.0).unwrap();
        assert_eq!(b.fixed_point_reference(s).unwrap(), ConvexSet::WholeSpace);
        let b = Mapping::blend(t.clone(), 0.5).unwrap();
        assert_eq!(b.fixed_point_reference(s).unwrap(), t.fixed_point_reference(s).unwrap());
    }

    #[test]
    fn srns_trivial_cases() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let seq = MappingSequence::resolvent(quad(), Schedule::constant(1.0)).unwrap();
        let p = quad().zero_set_reference(s).unwrap().anchor().clone();
        let xs = vec![p.clone(); 20];
        let rep = srns_diagnostic(&seq, &xs, &p, SrnsThresholds::default()).unwrap();
        assert!(rep.d.iter().all(|d| d.abs() < 1e-10));
        assert!(rep.e.iter().all(|e| e.abs() < 1e-10));
        assert!(!rep.flagged);

        let x0 = v(s, &[3.0, -2.0]);
        let xs = vec![x0; 20];
        let rep = srns_diagnostic(&seq, &xs, &p, SrnsThresholds::default()).unwrap();
        assert!(rep.d.iter().all(|&d| d > 1e-2));
        assert!(!rep.flagged);
    }
}
