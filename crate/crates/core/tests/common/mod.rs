//! Independent reference computations for the integration tests. Nothing here
//! calls into the library's numerical code.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `(sum |v_i|^p)^(1/p)` evaluated directly.
pub fn norm(v: &[f64], p: f64) -> f64 {
    v.iter().map(|c| c.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|v|^(2-p) |v_i|^(p-1) sign(v_i)`.
pub fn jmap(v: &[f64], p: f64) -> Vec<f64> {
    let n = norm(v, p);
    if n == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter()
        .map(|c| n.powf(2.0 - p) * c.abs().powf(p - 1.0) * c.signum() * (*c != 0.0) as u8 as f64)
        .collect()
}

pub fn jinv(v: &[f64], p: f64) -> Vec<f64> {
    jmap(v, conjugate(p))
}

/// `|x|^2 - 2 <x, Jy> + |y|^2`.
pub fn phi(x: &[f64], y: &[f64], p: f64) -> f64 {
    let nx = norm(x, p);
    let ny = norm(y, p);
    nx * nx - 2.0 * dot(x, &jmap(y, p)) + ny * ny
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn gaussian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            scale * g
        })
        .collect()
}

/// Root of a nonincreasing `g` on `[0, inf)` with `g(0) > 0`, by bracketing
/// and bisection.
pub fn bisect_decreasing(g: impl Fn(f64) -> f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        assert!(hi < 1e30, "no bracket");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Generalized projection onto `{y : <a, y> <= b}` in `l^p` from the
/// optimality condition `Jy = Jx - mu a`, `<a, y> = b`.
pub fn halfspace_projection(a: &[f64], b: f64, x: &[f64], p: f64) -> Vec<f64> {
    if dot(a, x) <= b {
        return x.to_vec();
    }
    let jx = jmap(x, p);
    let y_of = |mu: f64| jinv(&jx.iter().zip(a).map(|(j, ai)| j - mu * ai).collect::<Vec<_>>(), p);
    let mu = bisect_decreasing(|mu| dot(a, &y_of(mu)) - b);
    y_of(mu)
}

/// Minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Damped Newton with a central-difference Jacobian and Gaussian elimination.
pub fn newton_fd(f: impl Fn(&[f64]) -> Vec<f64>, z0: &[f64], tol: f64) -> Vec<f64> {
    let n = z0.len();
    let mut z = z0.to_vec();
    let res_norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut fz = f(&z);
    for _ in 0..200 {
        if res_norm(&fz) <= tol {
            break;
        }
        let h = 1e-6;
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let (fp, fm) = (f(&zp), f(&zm));
            for i in 0..n {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let step = solve(jac, fz.iter().map(|c| -c).collect());
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let ft = f(&trial);
            if res_norm(&ft) < res_norm(&fz) || t < 1e-12 {
                z = trial;
                fz = ft;
                break;
            }
            t *= 0.5;
        }
    }
    z
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            let pivot_row = a[k].clone();
            for (aij, akj) in a[i][k..].iter_mut().zip(&pivot_row[k..]) {
                *aij -= m * akj;
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}
