//! Trotter interaction kernel and the dense oracles that check it.
//!
//! With `c = beta_eff * gamma`, one site of the transverse-field propagator
//! `exp(-beta_eff * gamma * (E_K - 1_K))` has diagonal `a + b` and
//! off-diagonal `b`, where
//!
//! ```text
//! a = exp(-c),   b = (a / K) (a^-K - 1),   f = ln((a + b) / b)
//! ```
//!
//! so the matrix element between two assignments of `N` points that agree on
//! `s` points is `b^N exp(s f)`. The dense routines here build `H_c` and
//! `H_q` explicitly (at most 81 states) and compute exact traces so the
//! closed form can be checked.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::linalg::{self, Matrix};
use crate::math::{self, LogSumExp};

/// Largest `K^N` accepted by the dense builders.
pub const MAX_DENSE_STATES: usize = 81;
/// Largest `(K^N)^m` accepted by [`brute_trotter_marginal`].
pub const MAX_TROTTER_CONFIGS: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    pub a: f64,
    pub b: f64,
    /// Coupling `ln((a + b) / b)`, in nats.
    pub f: f64,
    /// `ln b`, kept separately because `b` underflows when `beta_eff * gamma`
    /// is tiny.
    pub ln_b: f64,
    pub beta_eff: f64,
    pub gamma: f64,
    pub k: usize,
}

/// Interaction constants for effective inverse temperature `beta_eff`,
/// transverse field `gamma` and `k` classes.
///
/// `gamma = 0` is rejected: the coupling diverges there.
pub fn kernel_constants(beta_eff: f64, gamma: f64, k: usize) -> Result<KernelConstants> {
    if !(beta_eff > 0.0 && beta_eff.is_finite()) {
        return Err(domain(format!("beta_eff must be positive and finite, got {beta_eff}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain(format!("gamma must be positive and finite, got {gamma}")));
    }
    if k < 2 {
        return Err(domain(format!("need at least two classes, got {k}")));
    }
    let c = beta_eff * gamma;
    let kf = k as f64;
    let ln_a = -c;
    // a^-K - 1 = expm1(K c)
    let ln_b = ln_a - math::ln(kf) + math::ln_expm1(kf * c);
    // (a + b) / b = 1 + K / expm1(K c)
    let f = math::ln_1p(kf / math::exp_m1(kf * c));
    Ok(KernelConstants {
        a: math::exp(ln_a),
        b: math::exp(ln_b),
        f,
        ln_b,
        beta_eff,
        gamma,
        k,
    })
}

impl KernelConstants {
    /// `ln(a + b)`, the log of one diagonal site factor.
    pub fn ln_a_plus_b(&self) -> f64 {
        self.ln_b + self.f
    }
}

/// One latent class per data point, each in `[0, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<usize>);

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&z| z >= k) {
            return Err(domain(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self(labels))
    }

    /// Inverse of [`Assignment::index`]. Data point 0 is the most
    /// significant base-`k` digit, matching the Kronecker ordering
    /// `sigma = sigma_1 (x) sigma_2 (x) ...`.
    pub fn from_index(mut index: usize, n: usize, k: usize) -> Self {
        let mut labels = vec![0; n];
        for slot in labels.iter_mut().rev() {
            *slot = index % k;
            index /= k;
        }
        Self(labels)
    }

    pub fn index(&self, k: usize) -> usize {
        self.0.iter().fold(0, |acc, &z| acc * k + z)
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Number of data points on which two assignments agree.
pub fn similarity(sa: &Assignment, sb: &Assignment) -> Result<usize> {
    if sa.len() != sb.len() {
        return Err(Error::LengthMismatch {
            expected: sa.len(),
            actual: sb.len(),
        });
    }
    Ok(sa.0.iter().zip(&sb.0).filter(|(x, y)| x == y).count())
}

/// `ln(sigma_j^T exp(-beta_eff H_q) sigma_{j+1}) = n ln b + s f`.
pub fn edge_log_factor(s: usize, n: usize, kc: &KernelConstants) -> f64 {
    debug_assert!(s <= n);
    n as f64 * kc.ln_b + s as f64 * kc.f
}

/// A tiny model given by its full table of `ln p(x, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    n: usize,
    k: usize,
    log_joint: Vec<f64>,
}

impl DenseSystem {
    /// `log_joint[l]` is `ln p(x, sigma)` for `sigma = Assignment::from_index(l, n, k)`.
    pub fn new(n: usize, k: usize, log_joint: Vec<f64>) -> Result<Self> {
        if n == 0 || n > 4 || !(2..=3).contains(&k) {
            return Err(domain(format!(
                "dense systems need 1 <= n <= 4 and 2 <= k <= 3, got n = {n}, k = {k}"
            )));
        }
        let states = k.pow(n as u32);
        if log_joint.len() != states {
            return Err(Error::LengthMismatch {
                expected: states,
                actual: log_joint.len(),
            });
        }
        if let Some(bad) = log_joint.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("log-joint entries must be finite, found {bad}")));
        }
        Ok(Self { n, k, log_joint })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn states(&self) -> usize {
        self.log_joint.len()
    }

    pub fn log_joint(&self) -> &[f64] {
        &self.log_joint
    }
}

/// Transverse-field Hamiltonian `H_q = sum_i I (x) ... (x) gamma (E_K - 1_K) (x) ... (x) I`.
///
/// Each single-site factor has zero diagonal and `-gamma` off the diagonal,
/// so `H_q[l, l']` is `-gamma` exactly when `l` and `l'` differ in one
/// data point's label.
pub fn transverse_hamiltonian(n: usize, k: usize, gamma: f64) -> Result<Matrix> {
    let states = checked_states(n, k)?;
    let mut h = Matrix::zeros(states);
    for l in 0..states {
        let sigma = Assignment::from_index(l, n, k);
        let mut labels = sigma.labels().to_vec();
        for i in 0..n {
            let orig = labels[i];
            for z in (0..k).filter(|&z| z != orig) {
                labels[i] = z;
                let target = labels.iter().fold(0, |acc, &x| acc * k + x);
                h[(l, target)] = -gamma;
            }
            labels[i] = orig;
        }
    }
    Ok(h)
}

/// `(H_c, H_q)` for the dense system.
pub fn dense_hamiltonians(sys: &DenseSystem, gamma: f64) -> Result<(Matrix, Matrix)> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(domain(format!("gamma must be non-negative, got {gamma}")));
    }
    let hc_diag: Vec<f64> = sys.log_joint.iter().map(|&v| -v).collect();
    let hc = Matrix::from_diagonal(&hc_diag);
    let hq = transverse_hamiltonian(sys.n, sys.k, gamma)?;
    Ok((hc, hq))
}

/// Dense `exp(-beta_eff * H_q)` computed without the closed form.
///
/// `-beta_eff * H_q` is entrywise non-negative, so this uses the
/// cancellation-free series in [`linalg::expm_nonnegative`], which keeps every
/// entry accurate relative to its own size.
pub fn transverse_propagator(n: usize, k: usize, beta_eff: f64, gamma: f64) -> Result<Matrix> {
    if !(beta_eff > 0.0) || !(gamma >= 0.0) {
        return Err(domain("transverse propagator needs beta_eff > 0 and gamma >= 0"));
    }
    let hq = transverse_hamiltonian(n, k, gamma)?;
    Ok(linalg::expm_nonnegative(&hq.scaled(-beta_eff)))
}

/// `ln Tr exp(-beta (H_c + H_q))` by symmetric eigen-decomposition.
pub fn exact_quantum_marginal(sys: &DenseSystem, beta: f64, gamma: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    let (hc, hq) = dense_hamiltonians(sys, gamma)?;
    let generator = hc.add(&hq).scaled(-beta);
    let eig = linalg::symmetric_eigen(&generator);
    Ok(math::log_sum_exp(&eig.values))
}

/// `ln` of the `m`-slice Trotter sum, by enumerating every `(sigma_1, ..., sigma_m)`
/// with periodic boundary `sigma_{m+1} = sigma_1`.
pub fn brute_trotter_marginal(sys: &DenseSystem, beta: f64, gamma: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(domain("Trotter number must be at least 1"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    let states = sys.states();
    let configs = (states as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if configs > MAX_TROTTER_CONFIGS {
        return Err(Error::TooLarge {
            what: "Trotter enumeration",
            needed: configs,
            limit: MAX_TROTTER_CONFIGS,
        });
    }
    let beta_eff = beta / m as f64;
    let kc = kernel_constants(beta_eff, gamma, sys.k)?;

    let assignments: Vec<Assignment> = (0..states)
        .map(|l| Assignment::from_index(l, sys.n, sys.k))
        .collect();
    let slice_weight: Vec<f64> = sys.log_joint.iter().map(|&lj| beta_eff * lj).collect();
    let mut edge = vec![0.0; states * states];
    for (l, sa) in assignments.iter().enumerate() {
        for (r, sb) in assignments.iter().enumerate() {
            let s = similarity(sa, sb)?;
            edge[l * states + r] = edge_log_factor(s, sys.n, &kc);
        }
    }

    let mut digits = vec![0usize; m];
    let mut acc = LogSumExp::default();
    loop {
        let mut term = 0.0;
        for j in 0..m {
            let cur = digits[j];
            let next = digits[(j + 1) % m];
            term += slice_weight[cur] + edge[cur * states + next];
        }
        acc.push(term);

        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == m {
                return Ok(acc.value());
            }
            digits[pos] += 1;
            if digits[pos] < states {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

fn checked_states(n: usize, k: usize) -> Result<usize> {
    let states = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if states > MAX_DENSE_STATES as u128 {
        return Err(Error::TooLarge {
            what: "dense Hamiltonian",
            needed: states,
            limit: MAX_DENSE_STATES as u128,
        });
    }
    Ok(states as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn constants_match_two_state_propagator() {
        // For K = 2 the single-site propagator is [[cosh c, sinh c], [sinh c, cosh c]].
        let kc = kernel_constants(0.1, 1.0, 2).unwrap();
        assert!(close(kc.a, 0.904_837_418_035_959_6, 1e-15));
        assert!(close(kc.b, libm::sinh(0.1), 1e-15));
        assert!(close(kc.a + kc.b, libm::cosh(0.1), 1e-15));
        assert!(close(kc.f, libm::log(libm::cosh(0.1) / libm::sinh(0.1)), 1e-13));
        assert!(close(kc.f, 2.305_85, 1e-4));
    }

    #[test]
    fn constants_for_twenty_topics() {
        let kc = kernel_constants(0.06, 1.0, 20).unwrap();
        // a = e^-0.06, b = (a / 20)(e^1.2 - 1)
        let a = libm::exp(-0.06);
        let b = a / 20.0 * (libm::exp(1.2) - 1.0);
        assert!(close(kc.f, libm::log((a + b) / b), 1e-13));
        assert!(close(kc.f, 2.264, 1e-3));

        // N = 1 dense propagator: diagonal a + b, off-diagonal b (K = 3 stand-in
        // is checked in the acceptance suite; here use the K = 20 closed form).
        let strong = kernel_constants(0.06, 100.0, 2).unwrap();
        assert!(strong.f < 1e-4);
    }

    #[test]
    fn rejects_zero_field_and_temperature() {
        assert!(matches!(kernel_constants(0.1, 0.0, 2), Err(Error::Domain(_))));
        assert!(matches!(kernel_constants(0.0, 1.0, 2), Err(Error::Domain(_))));
        assert!(matches!(kernel_constants(0.1, -1.0, 2), Err(Error::Domain(_))));
        assert!(matches!(kernel_constants(0.1, 1.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn tiny_coupling_keeps_log_b_finite() {
        let kc = kernel_constants(1e-9, 1e-9, 3).unwrap();
        assert!(kc.ln_b.is_finite());
        assert!(kc.f.is_finite() && kc.f > 40.0);
        let huge = kernel_constants(1.0, 800.0, 3).unwrap();
        assert!(huge.ln_b.is_finite());
        assert_eq!(huge.f, 0.0);
    }

    #[test]
    fn similarity_counts_agreements() {
        let a = Assignment::new(vec![0, 1, 1, 0], 2).unwrap();
        let b = Assignment::new(vec![0, 1, 0, 1], 2).unwrap();
        assert_eq!(similarity(&a, &b).unwrap(), 2);
        assert_eq!(similarity(&a, &a).unwrap(), 4);
        let x = Assignment::new(vec![0, 0, 0, 0, 0], 2).unwrap();
        let y = Assignment::new(vec![1, 1, 1, 1, 1], 2).unwrap();
        assert_eq!(similarity(&x, &x).unwrap(), 5);
        assert_eq!(similarity(&x, &y).unwrap(), 0);
        assert!(matches!(
            similarity(&a, &x),
            Err(Error::LengthMismatch { expected: 4, actual: 5 })
        ));
    }

    #[test]
    fn assignment_index_is_big_endian() {
        // K = 2, N = 2, z = (0, 1) is the second basis vector.
        let sigma = Assignment::new(vec![0, 1], 2).unwrap();
        assert_eq!(sigma.index(2), 1);
        assert_eq!(Assignment::from_index(2, 2, 2).labels(), &[1, 0]);
        for l in 0..27 {
            assert_eq!(Assignment::from_index(l, 3, 3).index(3), l);
        }
        assert!(Assignment::new(vec![0, 3], 3).is_err());
    }

    #[test]
    fn edge_factor_single_site() {
        let kc = kernel_constants(0.1, 1.0, 2).unwrap();
        assert!(close(edge_log_factor(0, 1, &kc), libm::log(libm::sinh(0.1)), 1e-13));
        assert!(close(edge_log_factor(0, 1, &kc), -2.301, 1e-3));
        assert!(close(edge_log_factor(1, 1, &kc), libm::log(libm::cosh(0.1)), 1e-13));
        assert!(close(edge_log_factor(1, 1, &kc), 0.004_992, 1e-6));
        for n in 1..5 {
            let v = edge_log_factor(n, n, &kc);
            assert!(close(v, n as f64 * kc.ln_a_plus_b(), 1e-12));
        }
    }

    #[test]
    fn transverse_hamiltonian_shapes() {
        let h = transverse_hamiltonian(1, 2, 1.0).unwrap();
        assert_eq!(h.as_slice(), &[0.0, -1.0, -1.0, 0.0]);

        // Hand enumeration for N = 2, K = 2: states 00, 01, 10, 11.
        let h = transverse_hamiltonian(2, 2, 1.0).unwrap();
        let expected = [
            [0.0, -1.0, -1.0, 0.0],
            [-1.0, 0.0, 0.0, -1.0],
            [-1.0, 0.0, 0.0, -1.0],
            [0.0, -1.0, -1.0, 0.0],
        ];
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(h.row(i), row);
        }
        assert!(transverse_hamiltonian(5, 3, 1.0).is_err());
    }

    #[test]
    fn transverse_rows_have_single_flip_structure() {
        for (n, k) in [(1, 2), (2, 3), (3, 2), (4, 2), (4, 3)] {
            let gamma = 0.7;
            let h = transverse_hamiltonian(n, k, gamma).unwrap();
            assert!(h.is_symmetric(0.0));
            for l in 0..h.dim() {
                let row = h.row(l);
                assert_eq!(row[l], 0.0);
                let flips = row.iter().filter(|&&v| v == -gamma).count();
                let zeros = row.iter().filter(|&&v| v == 0.0).count();
                assert_eq!(flips, n * (k - 1));
                assert_eq!(flips + zeros, row.len());
            }
        }
    }

    #[test]
    fn classical_hamiltonian_is_negated_log_joint() {
        let c = -1.25;
        let sys = DenseSystem::new(2, 2, vec![c; 4]).unwrap();
        let (hc, hq) = dense_hamiltonians(&sys, 0.0).unwrap();
        assert_eq!(hc, Matrix::identity(4).scaled(-c));
        assert!(hq.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_system_validation() {
        assert!(DenseSystem::new(2, 2, vec![0.0; 3]).is_err());
        assert!(DenseSystem::new(5, 2, vec![0.0; 32]).is_err());
        assert!(DenseSystem::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(DenseSystem::new(1, 2, vec![0.0, f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn exact_marginal_classical_limits() {
        let sys = DenseSystem::new(1, 2, vec![libm::log(0.3), libm::log(0.7)]).unwrap();
        assert!(close(exact_quantum_marginal(&sys, 1.0, 0.0).unwrap(), 0.0, 1e-15));
        assert!(close(
            exact_quantum_marginal(&sys, 2.0, 0.0).unwrap(),
            libm::log(0.58),
            1e-15
        ));
    }

    #[test]
    fn exact_marginal_golden_value() {
        // Cross-check the eigen route against the series exponential of -beta * H.
        let sys = DenseSystem::new(2, 2, vec![-1.3, -2.1, -0.4, -3.0]).unwrap();
        let got = exact_quantum_marginal(&sys, 1.0, 0.5).unwrap();

        let (hc, hq) = dense_hamiltonians(&sys, 0.5).unwrap();
        // Shift by the largest diagonal so the generator is non-negative.
        let shift = 3.0;
        let mut g = hc.add(&hq).scaled(-1.0);
        for i in 0..4 {
            g[(i, i)] += shift;
        }
        let e = linalg::expm_nonnegative(&g);
        let trace: f64 = (0..4).map(|i| e[(i, i)]).sum();
        let series = libm::log(trace) - shift;
        assert!(close(got, series, 1e-13), "{got} vs {series}");
        assert!(close(got, EXACT_2X2_GOLDEN, 1e-12), "{got}");
    }

    // 40-digit reference: 0.31540149309225898555...
    const EXACT_2X2_GOLDEN: f64 = 0.315_401_493_092_259;

    #[test]
    fn single_slice_trotter_collapses() {
        let sys = DenseSystem::new(2, 3, (0..9).map(|i| -0.3 * i as f64).collect()).unwrap();
        let (beta, gamma) = (0.8, 0.6);
        let kc = kernel_constants(beta, gamma, 3).unwrap();
        let direct: Vec<f64> = sys
            .log_joint()
            .iter()
            .map(|&lj| beta * lj + edge_log_factor(2, 2, &kc))
            .collect();
        let brute = brute_trotter_marginal(&sys, beta, gamma, 1).unwrap();
        assert!(close(brute, math::log_sum_exp(&direct), 1e-13));
    }

    #[test]
    fn trotter_error_shrinks_with_slices() {
        let sys = DenseSystem::new(1, 2, vec![-0.2, -1.7]).unwrap();
        let exact = exact_quantum_marginal(&sys, 0.5, 1.0).unwrap();
        let errs: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&m| (brute_trotter_marginal(&sys, 0.5, 1.0, m).unwrap() - exact).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");

        let sys = DenseSystem::new(2, 2, vec![-0.9, -2.5, -1.1, -0.3]).unwrap();
        let exact = exact_quantum_marginal(&sys, 0.3, 0.8).unwrap();
        let e2 = (brute_trotter_marginal(&sys, 0.3, 0.8, 2).unwrap() - exact).abs();
        let e8 = (brute_trotter_marginal(&sys, 0.3, 0.8, 8).unwrap() - exact).abs();
        assert!(e8 < e2);
    }

    #[test]
    fn trotter_enumeration_bound() {
        let sys = DenseSystem::new(3, 3, vec![0.0; 27]).unwrap();
        assert!(matches!(
            brute_trotter_marginal(&sys, 1.0, 1.0, 6),
            Err(Error::TooLarge { .. })
        ));
        assert!(brute_trotter_marginal(&sys, 1.0, 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn coupling_decreases_in_field(beta_eff in 0.01f64..2.0, g in 0.01f64..10.0, dg in 0.01f64..5.0, k in 2usize..30) {
            let lo = kernel_constants(beta_eff, g, k).unwrap();
            let hi = kernel_constants(beta_eff, g + dg, k).unwrap();
            prop_assert!(lo.f >= 0.0 && hi.f >= 0.0);
            prop_assert!(hi.f < lo.f || hi.f == 0.0);
            prop_assert!(lo.a > 0.0 && lo.a < 1.0 && lo.b > 0.0);
            let ref_f = libm::log((lo.a + lo.b) / lo.b);
            prop_assert!((lo.f - ref_f).abs() <= 1e-9 * ref_f.max(1.0));
        }

        #[test]
        fn closed_form_matches_propagator(beta_eff in 0.05f64..2.0, gamma in 0.05f64..2.0, n in 1usize..4, k in 2usize..4) {
            let kc = kernel_constants(beta_eff, gamma, k).unwrap();
            let p = transverse_propagator(n, k, beta_eff, gamma).unwrap();
            for l in 0..p.dim() {
                let sl = Assignment::from_index(l, n, k);
                for r in 0..p.dim() {
                    let sr = Assignment::from_index(r, n, k);
                    let closed = libm::exp(edge_log_factor(similarity(&sl, &sr).unwrap(), n, &kc));
                    prop_assert!(((closed - p[(l, r)]) / p[(l, r)]).abs() < 1e-10);
                }
            }
        }
    }
}
