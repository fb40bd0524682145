//! Geometry of the finite-dimensional space `l^p_n` and its dual `l^q_n`.
//!
//! The duality mapping of `l^p` is single valued with the closed form
//! `(Jx)_i = |x|_p^{2-p} |x_i|^{p-1} sign(x_i)`, and its inverse is the duality
//! mapping of `l^q` with `1/p + 1/q = 1`. Norms are evaluated after rescaling by
//! the largest coordinate so that large exponents do not overflow.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::tolerances::{MAX_EXPONENT, MIN_EXPONENT};

/// The space `R^n` equipped with the `p`-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSpace {
    dim: usize,
    p: f64,
    q: f64,
}

impl LpSpace {
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(MIN_EXPONENT..=MAX_EXPONENT).contains(&p) {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self {
            dim,
            p,
            q: p / (p - 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `q = p / (p - 1)`.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn is_hilbert(&self) -> bool {
        self.p == 2.0
    }

    pub fn primal(&self, coords: Vec<f64>) -> Result<PrimalVector> {
        self.check_coords(&coords)?;
        Ok(PrimalVector { space: *self, coords })
    }

    pub fn dual(&self, coords: Vec<f64>) -> Result<DualVector> {
        self.check_coords(&coords)?;
        Ok(DualVector { space: *self, coords })
    }

    pub fn zero(&self) -> PrimalVector {
        PrimalVector {
            space: *self,
            coords: vec![0.0; self.dim],
        }
    }

    pub fn dual_zero(&self) -> DualVector {
        DualVector {
            space: *self,
            coords: vec![0.0; self.dim],
        }
    }

    fn check_coords(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    fn check_same(&self, other: &LpSpace) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.p != other.p {
            return Err(Error::InvalidParameter(format!(
                "vectors live in different spaces (p = {} vs p = {})",
                self.p, other.p
            )));
        }
        Ok(())
    }
}

/// `(sum |x_i|^p)^(1/p)` computed after dividing by `max |x_i|`.
pub fn lp_norm(coords: &[f64], p: f64) -> f64 {
    let scale = coords.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        let s: f64 = coords.iter().map(|c| (c / scale) * (c / scale)).sum();
        return scale * s.sqrt();
    }
    let s: f64 = coords.iter().map(|c| (c.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

/// Closed-form duality mapping of `l^p` applied to raw coordinates, with the
/// convention `J0 = 0`.
fn duality_coords(coords: &[f64], p: f64) -> Vec<f64> {
    if p == 2.0 {
        return coords.to_vec();
    }
    let norm = lp_norm(coords, p);
    if norm == 0.0 {
        return vec![0.0; coords.len()];
    }
    coords
        .iter()
        .map(|&c| {
            if c == 0.0 {
                0.0
            } else {
                norm * (c.abs() / norm).powf(p - 1.0) * c.signum()
            }
        })
        .collect()
}

macro_rules! vector_type {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            space: LpSpace,
            coords: Vec<f64>,
        }

        impl $name {
            pub fn space(&self) -> LpSpace {
                self.space
            }

            pub fn dim(&self) -> usize {
                self.coords.len()
            }

            pub fn coords(&self) -> &[f64] {
                &self.coords
            }

            pub fn into_coords(self) -> Vec<f64> {
                self.coords
            }

            pub fn is_zero(&self) -> bool {
                self.coords.iter().all(|&c| c == 0.0)
            }

            pub fn scale(&self, factor: f64) -> Self {
                Self {
                    space: self.space,
                    coords: self.coords.iter().map(|c| c * factor).collect(),
                }
            }

            /// Euclidean norm of the coordinates, used by inner solvers.
            pub fn euclidean_norm(&self) -> f64 {
                lp_norm(&self.coords, 2.0)
            }

            /// `self + factor * other`.
            pub fn add_scaled(&self, factor: f64, other: &Self) -> Self {
                assert_eq!(self.dim(), other.dim(), "dimension mismatch");
                Self {
                    space: self.space,
                    coords: self
                        .coords
                        .iter()
                        .zip(&other.coords)
                        .map(|(a, b)| a + factor * b)
                        .collect(),
                }
            }

            pub(crate) fn from_parts(space: LpSpace, coords: Vec<f64>) -> Self {
                debug_assert_eq!(space.dim(), coords.len());
                Self { space, coords }
            }

            pub fn is_finite(&self) -> bool {
                self.coords.iter().all(|c| c.is_finite())
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.coords[i]
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                self.add_scaled(1.0, rhs)
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                self.add_scaled(-1.0, rhs)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                self.scale(-1.0)
            }
        }

        impl Mul<&$name> for f64 {
            type Output = $name;
            fn mul(self, rhs: &$name) -> $name {
                rhs.scale(self)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "(")?;
                for (i, c) in self.coords.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    };
}

vector_type!(PrimalVector);
vector_type!(DualVector);

impl PrimalVector {
    /// `|x|_p`.
    pub fn norm(&self) -> f64 {
        lp_norm(&self.coords, self.space.p)
    }
}

impl DualVector {
    /// `|x*|_q`.
    pub fn norm(&self) -> f64 {
        lp_norm(&self.coords, self.space.q)
    }

    /// Reads the coordinates of a dual vector as a primal one. Only the inner
    /// solvers use this, to take gradient steps in coordinate space.
    pub(crate) fn as_primal_coords(&self) -> PrimalVector {
        PrimalVector::from_parts(self.space, self.coords.clone())
    }
}

pub fn norm_primal(x: &PrimalVector) -> f64 {
    x.norm()
}

pub fn norm_dual(xstar: &DualVector) -> f64 {
    xstar.norm()
}

/// `<x, x*>`.
pub fn pairing(x: &PrimalVector, xstar: &DualVector) -> Result<f64> {
    x.space.check_same(&xstar.space)?;
    Ok(x.coords.iter().zip(&xstar.coords).map(|(a, b)| a * b).sum())
}

/// The normalized duality mapping `J` of `l^p`.
pub fn duality_map(x: &PrimalVector) -> DualVector {
    DualVector {
        space: x.space,
        coords: duality_coords(&x.coords, x.space.p),
    }
}

/// `J^{-1}`, the duality mapping of the dual space `l^q`.
pub fn inverse_duality_map(xstar: &DualVector) -> PrimalVector {
    PrimalVector {
        space: xstar.space,
        coords: duality_coords(&xstar.coords, xstar.space.q),
    }
}

/// `phi(x, y) = |x|^2 - 2 <x, Jy> + |y|^2`.
///
/// Rounding can push the expanded form a few ulps below zero; the result is
/// clamped at zero since `phi >= (|x| - |y|)^2 >= 0`.
pub fn lyapunov(x: &PrimalVector, y: &PrimalVector) -> Result<f64> {
    x.space.check_same(&y.space)?;
    if x.coords == y.coords {
        return Ok(0.0);
    }
    if x.space.is_hilbert() {
        let d: f64 = x.coords.iter().zip(&y.coords).map(|(a, b)| (a - b) * (a - b)).sum();
        return Ok(d);
    }
    let nx = x.norm();
    let ny = y.norm();
    let jy = duality_map(y);
    let cross = pairing(x, &jy)?;
    Ok((nx * nx - 2.0 * cross + ny * ny).max(0.0))
}

/// `J^{-1}(lambda x* + (1 - lambda) y*)`.
pub fn dual_blend(lambda: f64, xstar: &DualVector, ystar: &DualVector) -> Result<PrimalVector> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "convex weight {lambda} outside [0, 1]"
        )));
    }
    xstar.space.check_same(&ystar.space)?;
    let mixed = DualVector {
        space: xstar.space,
        coords: xstar
            .coords
            .iter()
            .zip(&ystar.coords)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect(),
    };
    Ok(inverse_duality_map(&mixed))
}

/// `J^{-1}(lambda Jx + (1 - lambda) Jy)`, the convex combination taken in the
/// dual space.
pub fn dual_convex_combination(lambda: f64, x: &PrimalVector, y: &PrimalVector) -> Result<PrimalVector> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "convex weight {lambda} outside [0, 1]"
        )));
    }
    x.space.check_same(&y.space)?;
    if lambda == 1.0 {
        return Ok(x.clone());
    }
    if lambda == 0.0 {
        return Ok(y.clone());
    }
    dual_blend(lambda, &duality_map(x), &duality_map(y))
}
