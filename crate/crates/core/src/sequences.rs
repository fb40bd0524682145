//! Real-sequence tools behind the strong convergence argument: the
//! `xi_{n+1} <= (1 - alpha_n) xi_n + alpha_n gamma_n` recursion, Maingé's index
//! function `tau`, its eventually increasing variant, and the sequence
//! `0, 1/2, 0, 1/4, ...` showing that `tau` cannot be chosen strictly increasing.
//!
//! Certificates are always re-verified from the raw values before they are
//! returned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schedule::Schedule;

/// Finite prefix `xi_1, ..., xi_N` of a real sequence (1-based access).
#[derive(Debug, Clone, PartialEq)]
pub struct RealSequencePrefix {
    values: Vec<f64>,
}

impl RealSequencePrefix {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn from_fn(len: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((1..=len).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `xi_n` for `1 <= n <= len`.
    pub fn get(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn rises_at(&self, k: usize) -> bool {
        self.get(k) < self.get(k + 1)
    }
}

/// Orbit of the equality case `xi_{n+1} = (1 - alpha_n) xi_n + alpha_n gamma_n`,
/// returned as `xi_1..xi_len`.
pub fn xu_recursion(xi1: f64, alpha: &Schedule, gamma: &Schedule, len: usize) -> Result<RealSequencePrefix> {
    let mut issues = Vec::new();
    if !(xi1 >= 0.0 && xi1.is_finite()) {
        issues.push(format!("xi_1 = {xi1} must be nonnegative"));
    }
    if alpha.infimum() < 0.0 || alpha.supremum() > 1.0 {
        issues.push("alpha_n in [0, 1] violated".to_string());
    }
    if !alpha.sum_diverges() {
        issues.push("sum of alpha_n = infinity violated".to_string());
    }
    if !(gamma.limsup() <= 0.0) {
        issues.push("limsup gamma_n <= 0 violated".to_string());
    }
    if !issues.is_empty() {
        return Err(Error::Hypothesis(issues));
    }
    let mut values = Vec::with_capacity(len);
    let mut xi = xi1;
    for n in 1..=len {
        values.push(xi);
        let a = alpha.value(n);
        xi = (1.0 - a) * xi + a * gamma.value(n);
    }
    RealSequencePrefix::new(values)
}

/// Properties of a `tau` certificate, each recomputable from the raw data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertificateChecks {
    /// `tau(n) <= tau(n+1)` for all `n`.
    pub monotone: bool,
    /// `tau(n) <= n` for `n >= N0`.
    pub bounded_by_index: bool,
    /// `tau(N) > tau(1)`: the prefix shows growth.
    pub divergent_evidence: bool,
    /// `xi_{tau(n)} <= xi_{tau(n)+1}` for `n >= N0`.
    pub rise_from_start: bool,
    /// `xi_{tau(n)} <= xi_{tau(n)+1}` for every `n`.
    pub rise_everywhere: bool,
    /// `xi_n <= xi_{tau(n)+1}` for `n >= N0`.
    pub domination: bool,
}

/// Index function `tau` on `1..=N` together with its start index `N0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauCertificate {
    tau: Vec<usize>,
    start_index: usize,
    checks: CertificateChecks,
}

impl TauCertificate {
    /// `tau(n)` for `1 <= n <= N`.
    pub fn tau(&self, n: usize) -> usize {
        self.tau[n - 1]
    }

    pub fn taus(&self) -> &[usize] {
        &self.tau
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn checks(&self) -> CertificateChecks {
        self.checks
    }

    /// The conclusions of Maingé's lemma on this prefix.
    pub fn is_mainge_valid(&self) -> bool {
        let c = self.checks;
        c.monotone && c.bounded_by_index && c.rise_from_start && c.domination
    }

    /// Maingé's conclusions plus the rise property at every index.
    pub fn is_eventually_increasing_valid(&self) -> bool {
        self.is_mainge_valid() && self.checks.rise_everywhere
    }

    /// Recomputes every property from `prefix` alone.
    pub fn verify(&self, prefix: &RealSequencePrefix) -> CertificateChecks {
        verify_tau(prefix, &self.tau, self.start_index)
    }
}

fn verify_tau(prefix: &RealSequencePrefix, tau: &[usize], start: usize) -> CertificateChecks {
    let n_len = prefix.len();
    let in_range = |t: usize| t >= 1 && t < n_len;
    let rise = |n: usize| {
        let t = tau[n - 1];
        in_range(t) && prefix.get(t) <= prefix.get(t + 1)
    };
    CertificateChecks {
        monotone: tau.len() == n_len && tau.windows(2).all(|w| w[0] <= w[1]),
        bounded_by_index: (start..=n_len).all(|n| tau[n - 1] <= n),
        divergent_evidence: n_len >= 1 && tau[n_len - 1] > tau[0],
        rise_from_start: (start..=n_len).all(rise),
        rise_everywhere: (1..=n_len).all(rise),
        domination: (start..=n_len).all(|n| {
            let t = tau[n - 1];
            in_range(t) && prefix.get(n) <= prefix.get(t + 1)
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaingeOutcome {
    Certificate(TauCertificate),
    /// No index `k < N` with `xi_k < xi_{k+1}`: the lemma's hypothesis is
    /// not visible on this prefix.
    NoRise,
}

/// `tau(n) = max{k <= n : xi_k < xi_{k+1}}` for `n >= N0`, where `N0` is
/// the first rise. Indices below `N0` get `tau(N0)`.
pub fn mainge_tau(prefix: &RealSequencePrefix) -> MaingeOutcome {
    let n_len = prefix.len();
    let Some(first) = (1..n_len).find(|&k| prefix.rises_at(k)) else {
        return MaingeOutcome::NoRise;
    };
    let mut tau = vec![first; n_len];
    let mut last = first;
    for n in first..=n_len {
        if n < n_len && prefix.rises_at(n) {
            last = n;
        }
        tau[n - 1] = last;
    }
    let checks = verify_tau(prefix, &tau, first);
    let cert = TauCertificate {
        tau,
        start_index: first,
        checks,
    };
    // The construction guarantees these; a failure here is a bug.
    assert!(
        cert.is_mainge_valid(),
        "Maingé construction failed to verify: {checks:?}"
    );
    MaingeOutcome::Certificate(cert)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TauOutcome {
    Certificate(TauCertificate),
    /// The last quarter of the prefix varies by at most the tolerance, so the
    /// sequence looks convergent and the lemma does not apply.
    Convergent {
        spread: f64,
    },
    NoRise,
}

/// Eventually increasing `tau` with the rise property at every index, for
/// prefixes whose tail still oscillates by more than `cauchy_tol`.
pub fn eventually_increasing_tau(prefix: &RealSequencePrefix, cauchy_tol: f64) -> Result<TauOutcome> {
    if !(cauchy_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cauchy tolerance {cauchy_tol} must be positive"
        )));
    }
    let n_len = prefix.len();
    if n_len < 2 {
        return Ok(TauOutcome::Convergent { spread: 0.0 });
    }
    let tail = &prefix.values()[n_len - (n_len / 4).max(2)..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let spread = hi - lo;
    if spread <= cauchy_tol {
        return Ok(TauOutcome::Convergent { spread });
    }
    match mainge_tau(prefix) {
        MaingeOutcome::NoRise => Ok(TauOutcome::NoRise),
        MaingeOutcome::Certificate(cert) => {
            assert!(
                cert.is_eventually_increasing_valid(),
                "eventually increasing tau failed to verify: {:?}",
                cert.checks
            );
            Ok(TauOutcome::Certificate(cert))
        }
    }
}

/// `xi_n = 0` for odd `n`, `1/n` for even `n`.
pub fn example_sequence(n: usize) -> f64 {
    assert!(n >= 1, "sequence is indexed from 1");
    if n % 2 == 1 {
        0.0
    } else {
        1.0 / n as f64
    }
}

/// Finite check of the two claims about a sequence like [`example_sequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleReport {
    pub n_max: usize,
    /// `xi_{2i-1} < xi_{2i}` for every `i <= n_max / 2`.
    pub claim_rising_subsequence: bool,
    /// Every `m <= n_max` with `xi_m <= xi_{m+1}` is odd.
    pub rises_only_at_odd: bool,
    /// For every even `k <= n_max` there is no `m` in `[k, n_max]` with
    /// `xi_m <= xi_{m+1}` and `xi_k <= xi_{m+1}`.
    pub claim_no_dominating_subsequence: bool,
    /// First `(k, m)` found that satisfies both constraints.
    pub witness: Option<(usize, usize)>,
}

impl ExampleReport {
    pub fn confirmed(&self) -> bool {
        self.claim_rising_subsequence && self.claim_no_dominating_subsequence
    }
}

/// Checks both claims for [`example_sequence`] up to `n_max`.
///
/// For `m > n_max` the constraint `1/k <= 1/(m+1)` forces `m + 1 <= k`, which is
/// impossible when `m >= k`, so the finite search over `m <= n_max` is
/// complete for this sequence.
pub fn verify_example_claims(n_max: usize) -> Result<ExampleReport> {
    verify_example_claims_for(example_sequence, n_max)
}

pub fn verify_example_claims_for(xi: impl Fn(usize) -> f64, n_max: usize) -> Result<ExampleReport> {
    if n_max < 4 {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} must be at least 4")));
    }
    let vals: Vec<f64> = (0..=n_max + 1).map(|n| if n == 0 { f64::NAN } else { xi(n) }).collect();
    let weak_rise = |m: usize| vals[m] <= vals[m + 1];

    let claim_rising_subsequence = (1..=n_max / 2).all(|i| vals[2 * i - 1] < vals[2 * i]);
    let rises_only_at_odd = (1..=n_max).filter(|&m| weak_rise(m)).all(|m| m % 2 == 1);

    // best[m] = the m' >= m with a weak rise maximizing xi_{m'+1}
    let mut best: Vec<Option<usize>> = vec![None; n_max + 2];
    for m in (1..=n_max).rev() {
        best[m] = best[m + 1];
        if weak_rise(m) && best[m].is_none_or(|b| vals[m + 1] >= vals[b + 1]) {
            best[m] = Some(m);
        }
    }
    let witness = (2..=n_max)
        .step_by(2)
        .find_map(|k| best[k].filter(|&m| vals[k] <= vals[m + 1]).map(|m| (k, m)));

    Ok(ExampleReport {
        n_max,
        claim_rising_subsequence,
        rises_only_at_odd,
        claim_no_dominating_subsequence: witness.is_none(),
        witness,
    })
}

/// Outcome of certificate fuzzing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FuzzReport {
    pub oscillating: usize,
    pub oscillating_certified: usize,
    pub monotone: usize,
    /// Monotone prefixes that correctly produced no certificate.
    pub monotone_rejected: usize,
    /// Certificates that failed re-verification. Must be zero.
    pub false_certificates: usize,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.false_certificates == 0
            && self.oscillating_certified == self.oscillating
            && self.monotone_rejected == self.monotone
    }
}

/// Runs both `tau` constructions on `count` random oscillating prefixes and
/// `count` random nonincreasing prefixes of length `len`.
pub fn fuzz_certificates(count: usize, len: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    let cauchy_tol = 1e-6;
    for _ in 0..count {
        let values: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let prefix = RealSequencePrefix::new(values).expect("finite");
        report.oscillating += 1;
        let mainge_ok = match mainge_tau(&prefix) {
            MaingeOutcome::Certificate(c) => {
                let ok = c.verify(&prefix) == c.checks() && c.is_mainge_valid();
                if !ok {
                    report.false_certificates += 1;
                }
                ok
            }
            MaingeOutcome::NoRise => false,
        };
        let ev_ok = match eventually_increasing_tau(&prefix, cauchy_tol).expect("tol > 0") {
            TauOutcome::Certificate(c) => {
                let checks = c.verify(&prefix);
                let ok = checks == c.checks() && c.is_eventually_increasing_valid();
                if !ok {
                    report.false_certificates += 1;
                }
                ok
            }
            _ => false,
        };
        if mainge_ok && ev_ok {
            report.oscillating_certified += 1;
        }
    }
    for _ in 0..count {
        let mut values: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        let prefix = RealSequencePrefix::new(values).expect("finite");
        report.monotone += 1;
        let m = mainge_tau(&prefix);
        let e = eventually_increasing_tau(&prefix, cauchy_tol).expect("tol > 0");
        if let MaingeOutcome::Certificate(c) = &m {
            if !c.is_mainge_valid() {
                report.false_certificates += 1;
            }
        }
        if let TauOutcome::Certificate(c) = &e {
            if !c.is_eventually_increasing_valid() {
                report.false_certificates += 1;
            }
        }
        if m == MaingeOutcome::NoRise && !matches!(e, TauOutcome::Certificate(_)) {
            report.monotone_rejected += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prefix(v: &[f64]) -> RealSequencePrefix {
        RealSequencePrefix::new(v.to_vec()).unwrap()
    }

    /// Brute-force `max{k <= n : xi_k < xi_{k+1}}`.
    fn brute_tau(p: &RealSequencePrefix, n: usize) -> Option<usize> {
        (1..=n.min(p.len() - 1)).filter(|&k| p.get(k) < p.get(k + 1)).max()
    }

    #[test]
    fn xu_recursion_examples() {
        let s = xu_recursion(5.0, &Schedule::constant(1.0), &Schedule::constant(0.0), 10).unwrap();
        assert_eq!(s.get(1), 5.0);
        assert!((2..=10).all(|n| s.get(n) == 0.0));

        // alpha_n = 1/(n+1), gamma = 0 telescopes to xi_{n+1} = 1/(n+1)
        let n = 1000;
        let s = xu_recursion(1.0, &Schedule::shifted_power(1.0, 1.0, 1), &Schedule::constant(0.0), n).unwrap();
        let mut direct = 1.0;
        for k in 1..n {
            direct *= 1.0 - 1.0 / (k as f64 + 1.0);
            assert!((s.get(k + 1) - direct).abs() < 1e-15);
            assert!((s.get(k + 1) - 1.0 / (k as f64 + 1.0)).abs() < 1e-13);
        }
        // alpha_1 = 1 zeroes the orbit at once
        let s = xu_recursion(1.0, &Schedule::harmonic(), &Schedule::constant(0.0), 5).unwrap();
        assert!((2..=5).all(|n| s.get(n) == 0.0));
    }

    #[test]
    fn xu_recursion_rejects_bad_hypotheses() {
        let e = xu_recursion(1.0, &Schedule::power(1.0, 2.0), &Schedule::constant(0.0), 5).unwrap_err();
        assert!(e.to_string().contains("sum of alpha_n"));
        let e = xu_recursion(1.0, &Schedule::harmonic(), &Schedule::constant(1.0), 5).unwrap_err();
        assert!(e.to_string().contains("limsup gamma_n"));
        assert!(xu_recursion(-1.0, &Schedule::harmonic(), &Schedule::constant(0.0), 5).is_err());
    }

    #[test]
    fn mainge_no_rise() {
        assert_eq!(mainge_tau(&prefix(&[5.0, 4.0, 3.0, 1.0])), MaingeOutcome::NoRise);
        assert_eq!(mainge_tau(&prefix(&[2.0, 2.0, 2.0])), MaingeOutcome::NoRise);
    }

    #[test]
    fn mainge_on_example_prefix() {
        let p = prefix(&[0.0, 0.5, 0.0, 0.25, 0.0, 1.0 / 6.0]);
        let MaingeOutcome::Certificate(c) = mainge_tau(&p) else {
            panic!()
        };
        assert_eq!(c.start_index(), 1);
        assert_eq!(c.tau(4), 3);
        assert!(p.get(c.tau(4)) <= p.get(4));
        assert!(p.get(4) <= p.get(c.tau(4) + 1));
        for n in 1..=6 {
            assert_eq!(Some(c.tau(n)), brute_tau(&p, n));
        }
        assert!(c.is_mainge_valid());
    }

    #[test]
    fn mainge_on_increasing_prefix() {
        let p = prefix(&[1.0, 2.0, 3.0]);
        let MaingeOutcome::Certificate(c) = mainge_tau(&p) else {
            panic!()
        };
        assert_eq!(c.tau(1), 1);
        assert_eq!(c.tau(2), 2);
        assert_eq!(c.tau(3), 2);
        for n in 1..=2 {
            assert!(p.get(n) <= p.get(c.tau(n) + 1));
        }
    }

    #[test]
    fn late_first_rise_is_patched() {
        let p = prefix(&[3.0, 2.0, 1.0, 1.5, 1.2, 1.7, 0.1]);
        let MaingeOutcome::Certificate(c) = mainge_tau(&p) else {
            panic!()
        };
        assert_eq!(c.start_index(), 3);
        assert_eq!(&c.taus()[..3], &[3, 3, 3]);
        assert!(c.checks().rise_everywhere);
        // domination fails before N0, which the lemma does not claim
        assert!(p.get(1) > p.get(c.tau(1) + 1));
    }

    #[test]
    fn tampered_certificate_is_detected() {
        let p = prefix(&[0.0, 0.5, 0.0, 0.25, 0.0, 1.0 / 6.0]);
        let MaingeOutcome::Certificate(mut c) = mainge_tau(&p) else {
            panic!()
        };
        c.tau[3] = 2;
        let checks = c.verify(&p);
        assert!(!checks.rise_from_start || !checks.domination || !checks.monotone);
    }

    #[test]
    fn eventually_increasing_examples() {
        let constant = prefix(&[0.3; 40]);
        assert!(matches!(
            eventually_increasing_tau(&constant, 1e-9).unwrap(),
            TauOutcome::Convergent { .. }
        ));
        assert!(eventually_increasing_tau(&constant, 0.0).is_err());

        let ex = RealSequencePrefix::from_fn(100, example_sequence).unwrap();
        let TauOutcome::Certificate(c) = eventually_increasing_tau(&ex, 1e-3).unwrap() else {
            panic!()
        };
        let checks = c.verify(&ex);
        assert!(checks.rise_everywhere && checks.domination && checks.monotone);
        assert!(checks.divergent_evidence);

        let alt = RealSequencePrefix::from_fn(30, |n| if n % 2 == 1 { 0.0 } else { 1.0 }).unwrap();
        let TauOutcome::Certificate(c) = eventually_increasing_tau(&alt, 0.5).unwrap() else {
            panic!()
        };
        for n in (1..30).step_by(2) {
            assert_eq!(c.tau(n), n);
        }
    }

    #[test]
    fn example_values() {
        assert_eq!(example_sequence(1), 0.0);
        assert_eq!(example_sequence(2), 0.5);
        assert_eq!(example_sequence(1000), 0.001);
        assert_eq!(example_sequence(999), 0.0);
    }

    /// Double loop over all `(k, m)` pairs.
    fn brute_claim2(xi: impl Fn(usize) -> f64, n_max: usize) -> bool {
        (2..=n_max)
            .step_by(2)
            .all(|k| (k..=n_max).all(|m| !(xi(m) <= xi(m + 1) && xi(k) <= xi(m + 1))))
    }

    #[test]
    fn example_claims() {
        for n_max in [4, 10, 57, 200] {
            let r = verify_example_claims(n_max).unwrap();
            assert!(r.confirmed() && r.rises_only_at_odd, "{r:?}");
            assert_eq!(r.claim_no_dominating_subsequence, brute_claim2(example_sequence, n_max));
        }
        assert!(verify_example_claims(3).is_err());
    }

    #[test]
    fn tampered_example_is_detected() {
        let tampered = |n: usize| if n % 2 == 1 { 0.0 } else { 1.0 };
        let r = verify_example_claims_for(tampered, 10).unwrap();
        assert!(r.claim_rising_subsequence);
        assert!(!r.claim_no_dominating_subsequence);
        let (k, m) = r.witness.unwrap();
        assert!(k % 2 == 0 && m >= k);
        assert!(tampered(m) <= tampered(m + 1) && tampered(k) <= tampered(m + 1));
        assert!(!brute_claim2(tampered, 10));
    }

    #[test]
    fn small_fuzz() {
        let r = fuzz_certificates(20, 50, 7);
        assert!(r.passed(), "{r:?}");
    }
}
