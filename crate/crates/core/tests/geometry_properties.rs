use halpern_core::geometry::{
    dual_convex_combination, duality_map, inverse_duality_map, lyapunov, pairing, DualVector, LpSpace, PrimalVector,
};
use halpern_core::tolerances::{IDENTITY_REL, INEQUALITY_SLACK, PHI_LOWER_SLACK};
use proptest::prelude::*;

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(1.1),
        Just(1.5),
        Just(2.0),
        Just(2.5),
        Just(3.0),
        Just(4.0),
        Just(10.0),
        1.1f64..10.0
    ]
}

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![4 => -10.0f64..10.0, 1 => Just(0.0)], n)
}

/// `(p, x, y, z)` with three vectors of a common random dimension.
fn triple() -> impl Strategy<Value = (f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (exponent(), 1usize..8).prop_flat_map(|(p, n)| (Just(p), coords(n), coords(n), coords(n)))
}

fn primal(p: f64, c: &[f64]) -> PrimalVector {
    LpSpace::new(c.len(), p).unwrap().primal(c.to_vec()).unwrap()
}

fn dual(p: f64, c: &[f64]) -> DualVector {
    LpSpace::new(c.len(), p).unwrap().dual(c.to_vec()).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn duality_map_identities((p, x, _, _) in triple()) {
        let x = primal(p, &x);
        let jx = duality_map(&x);
        let n = x.norm();
        prop_assert!(rel_close(pairing(&x, &jx).unwrap(), n * n, IDENTITY_REL) || n == 0.0);
        prop_assert!(rel_close(jx.norm(), n, IDENTITY_REL) || n == 0.0);
    }

    #[test]
    fn duality_roundtrips((p, x, xs, _) in triple()) {
        let x = primal(p, &x);
        let back = inverse_duality_map(&duality_map(&x));
        prop_assert!((&back - &x).norm() <= IDENTITY_REL * x.norm());
        let xs = dual(p, &xs);
        let back = duality_map(&inverse_duality_map(&xs));
        prop_assert!((&back - &xs).norm() <= IDENTITY_REL * xs.norm());
    }

    #[test]
    fn holder_bound((p, x, xs, _) in triple()) {
        let x = primal(p, &x);
        let xs = dual(p, &xs);
        let lhs = pairing(&x, &xs).unwrap().abs();
        prop_assert!(lhs <= x.norm() * xs.norm() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn phi_lower_bound((p, x, y, _) in triple()) {
        let (x, y) = (primal(p, &x), primal(p, &y));
        let gap = x.norm() - y.norm();
        prop_assert!(lyapunov(&x, &y).unwrap() >= gap * gap - PHI_LOWER_SLACK * (1.0 + gap * gap));
        prop_assert_eq!(lyapunov(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn dual_convexity((p, x, y, w) in triple(), lambda in 0.0f64..=1.0) {
        let (x, y, w) = (primal(p, &x), primal(p, &y), primal(p, &w));
        let z = dual_convex_combination(lambda, &x, &y).unwrap();
        let lhs = lyapunov(&w, &z).unwrap();
        let rhs = lambda * lyapunov(&w, &x).unwrap() + (1.0 - lambda) * lyapunov(&w, &y).unwrap();
        prop_assert!(rhs - lhs >= -INEQUALITY_SLACK * (1.0 + rhs.abs() * 1e-3), "slack {}", rhs - lhs);
    }

    #[test]
    fn dual_shift_inequality((p, x, xs, ys) in triple()) {
        // phi(x, J^{-1} x*) <= phi(x, J^{-1}(x* - y*)) + 2 <J^{-1} x* - x, y*>
        let x = primal(p, &x);
        let (xs, ys) = (dual(p, &xs), dual(p, &ys));
        let a = inverse_duality_map(&xs);
        let b = inverse_duality_map(&(&xs - &ys));
        let lhs = lyapunov(&x, &a).unwrap();
        let rhs = lyapunov(&x, &b).unwrap() + 2.0 * pairing(&(&a - &x), &ys).unwrap();
        prop_assert!(rhs - lhs >= -INEQUALITY_SLACK * (1.0 + rhs.abs() * 1e-3), "slack {}", rhs - lhs);
    }

    #[test]
    fn duality_map_is_monotone((p, x, y, _) in triple()) {
        let (x, y) = (primal(p, &x), primal(p, &y));
        let v = pairing(&(&x - &y), &(&duality_map(&x) - &duality_map(&y))).unwrap();
        prop_assert!(v >= -1e-12 * (1.0 + x.norm() * y.norm()));
    }

    #[test]
    fn hilbert_case_is_euclidean((_, x, y, _) in triple(), lambda in 0.0f64..=1.0) {
        let (x, y) = (primal(2.0, &x), primal(2.0, &y));
        let jx = duality_map(&x);
        prop_assert_eq!(jx.coords(), x.coords());
        let d: f64 = x.coords().iter().zip(y.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
        prop_assert!((lyapunov(&x, &y).unwrap() - d).abs() <= 1e-12 * (1.0 + d));
        let z = dual_convex_combination(lambda, &x, &y).unwrap();
        for i in 0..x.dim() {
            let e = lambda * x[i] + (1.0 - lambda) * y[i];
            prop_assert!((z[i] - e).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }
}

#[test]
fn large_exponent_norm_does_not_overflow() {
    let x = primal(10.0, &[1e40, -2e40, 5e39]);
    let n = x.norm();
    assert!(n.is_finite() && n > 2e40 && n < 3e40);
    let back = inverse_duality_map(&duality_map(&x));
    assert!((&back - &x).norm() <= IDENTITY_REL * n);
}

/// `x_n - y_n -> 0`, `Jx_n - Jy_n -> 0` and `phi(x_n, y_n) -> 0` move together
/// on bounded sequences.
#[test]
fn vanishing_distance_equivalences() {
    for p in [1.5, 2.0, 3.0, 6.0] {
        let base = [1.0, -0.5, 2.0, 0.0];
        let dir = [0.3, 0.7, -0.2, 1.0];
        let at = |t: f64| primal(p, &base.iter().zip(&dir).map(|(b, d)| b + t * d).collect::<Vec<_>>());
        let y = at(0.0);
        let mut last_phi = f64::INFINITY;
        let mut last_dj = f64::INFINITY;
        for k in 1..=30 {
            let x = at(2f64.powi(-k));
            let phi = lyapunov(&x, &y).unwrap();
            let dj = (&duality_map(&x) - &duality_map(&y)).norm();
            // the expanded form of phi bottoms out at rounding level
            assert!(phi <= last_phi + 1e-14 && dj < last_dj);
            last_phi = phi;
            last_dj = dj;
        }
        // J is only Hoelder continuous near zero coordinates when p < 2
        assert!(
            last_phi < 1e-12 && last_dj < 1e-3,
            "p = {p}: phi {last_phi}, dj {last_dj}"
        );
        // bounded pairs at fixed distance keep phi away from zero
        let mut min_phi = f64::INFINITY;
        for k in 0..200 {
            let s = (k as f64 * 0.37).sin() * 3.0;
            let x = at(s);
            let z = at(s + 1.0);
            min_phi = min_phi.min(lyapunov(&x, &z).unwrap());
            assert!((&duality_map(&x) - &duality_map(&z)).norm() > 1e-3);
        }
        assert!(min_phi > 1e-2, "p = {p}: {min_phi}");
    }
}
