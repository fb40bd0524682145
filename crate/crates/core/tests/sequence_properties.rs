use halpern_core::schedule::Schedule;
use halpern_core::sequences::{
    eventually_increasing_tau, mainge_tau, verify_example_claims_for, xu_recursion, MaingeOutcome, RealSequencePrefix,
    TauOutcome,
};
use proptest::prelude::*;

/// Recomputes the defining properties of `tau` straight from the values.
fn check_tau(values: &[f64], tau: impl Fn(usize) -> usize, start: usize) -> Result<(), String> {
    let xi = |n: usize| values[n - 1];
    let len = values.len();
    for n in start..=len {
        let t = tau(n);
        if t > n || t < start.min(n) {
            return Err(format!("tau({n}) = {t} out of range"));
        }
        if n > start && tau(n - 1) > t {
            return Err(format!("tau decreases at {n}"));
        }
        if xi(t) >= xi(t + 1) {
            return Err(format!("no rise at tau({n}) = {t}"));
        }
        if xi(n) > xi(t + 1) {
            return Err(format!("xi_{n} above xi_(tau + 1)"));
        }
    }
    Ok(())
}

proptest! {
    #[test]
    fn mainge_certificates_hold_on_raw_values(values in prop::collection::vec(-5.0f64..5.0, 2..120)) {
        let prefix = RealSequencePrefix::new(values.clone()).unwrap();
        match mainge_tau(&prefix) {
            MaingeOutcome::Certificate(cert) => {
                prop_assert!(check_tau(&values, |n| cert.tau(n), cert.start_index()).is_ok());
            }
            MaingeOutcome::NoRise => {
                prop_assert!(values.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn eventually_increasing_outcomes_match_the_data(
        values in prop::collection::vec(0.0f64..1.0, 8..100),
        tol in 1e-6f64..0.5,
    ) {
        let prefix = RealSequencePrefix::new(values.clone()).unwrap();
        match eventually_increasing_tau(&prefix, tol).unwrap() {
            TauOutcome::Certificate(cert) => {
                prop_assert!(check_tau(&values, |n| cert.tau(n), cert.start_index()).is_ok());
            }
            TauOutcome::Convergent { spread } => prop_assert!(spread <= tol),
            TauOutcome::NoRise => prop_assert!(values.windows(2).all(|w| w[0] >= w[1])),
        }
    }

    #[test]
    fn recursion_orbit_stays_below_its_bound(
        xi1 in 0.0f64..10.0,
        exponent in 0.1f64..1.0,
        gamma_scale in 0.0f64..3.0,
    ) {
        let alpha = Schedule::power(1.0, exponent);
        let gamma = Schedule::power(gamma_scale, 1.0);
        let orbit = xu_recursion(xi1, &alpha, &gamma, 500).unwrap();
        let bound = xi1.max(gamma_scale);
        prop_assert!(orbit.values().iter().all(|&v| v >= 0.0 && v <= bound * (1.0 + 1e-12)));
    }

    #[test]
    fn dominated_sequences_are_caught(n_max in 4usize..300, shift in 0.0f64..1.0) {
        // every odd index rises into a larger even value, so a dominating
        // subsequence exists
        let report = verify_example_claims_for(|n| if n % 2 == 1 { shift } else { shift + 1.0 }, n_max).unwrap();
        prop_assert!(!report.claim_no_dominating_subsequence);
    }
}

#[test]
fn recursion_rejects_nonsummable_weights() {
    let alpha = Schedule::power(1.0, 2.0);
    let err = xu_recursion(1.0, &alpha, &Schedule::harmonic(), 10)
        .unwrap_err()
        .to_string();
    assert!(err.contains("sum of alpha_n = infinity violated"), "{err}");
    let err = xu_recursion(1.0, &Schedule::harmonic(), &Schedule::constant(0.1), 10)
        .unwrap_err()
        .to_string();
    assert!(err.contains("limsup gamma_n <= 0 violated"), "{err}");
}
