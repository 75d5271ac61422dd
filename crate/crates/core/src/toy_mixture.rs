//! Enumerable multinomial mixture.
//!
//! Each of `n` observed symbols (alphabet `v`) belongs to one of `k` classes.
//! Class proportions carry a `Dir(alpha)` prior and each class emission
//! distribution a `Dir(eta)` prior. Both are integrated out, so
//! `ln p(x, sigma)` has a closed form and the exact marginal is a sum over
//! all `k^n` assignments.
//!
//! This is exactly single-document LDA with one token per data point, which is
//! how the mean-field VB comparison reuses [`crate::lda`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Corpus, WordCount};
use crate::error::{domain, Result};
use crate::lda::{self, LdaHyper};
use crate::math;
use crate::quantum_kernel::{Assignment, DenseSystem};

pub const MAX_POINTS: usize = 8;
pub const MAX_CLASSES: usize = 3;
pub const MAX_SYMBOLS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyInstance {
    k: usize,
    v: usize,
    obs: Vec<usize>,
    alpha: f64,
    eta: f64,
}

impl ToyInstance {
    pub fn new(k: usize, v: usize, obs: Vec<usize>, alpha: f64, eta: f64) -> Result<Self> {
        if obs.is_empty() || obs.len() > MAX_POINTS {
            return Err(domain(format!("need 1..={MAX_POINTS} data points, got {}", obs.len())));
        }
        if !(2..=MAX_CLASSES).contains(&k) {
            return Err(domain(format!("need 2..={MAX_CLASSES} classes, got {k}")));
        }
        if v == 0 || v > MAX_SYMBOLS {
            return Err(domain(format!("need 1..={MAX_SYMBOLS} symbols, got {v}")));
        }
        if let Some(bad) = obs.iter().find(|&&x| x >= v) {
            return Err(domain(format!("symbol {bad} outside alphabet of {v}")));
        }
        if !(alpha > 0.0) || !(eta > 0.0) {
            return Err(domain("priors must be positive"));
        }
        Ok(Self { k, v, obs, alpha, eta })
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn obs(&self) -> &[usize] {
        &self.obs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn num_assignments(&self) -> usize {
        self.k.pow(self.n() as u32)
    }

    /// The instance as a one-document corpus plus matching LDA hyperparameters.
    pub fn as_lda(&self) -> Result<(Corpus, LdaHyper)> {
        let mut counts = vec![0u32; self.v];
        for &x in &self.obs {
            counts[x] += 1;
        }
        let doc = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(word, &count)| WordCount { word, count })
            .collect();
        let corpus = Corpus::new(self.v, vec![doc])?;
        let hyper = LdaHyper::new(self.k, self.v, self.alpha, self.eta)?;
        Ok((corpus, hyper))
    }
}

/// `ln p(x, sigma)` with class proportions and emissions integrated out.
pub fn collapsed_log_joint(inst: &ToyInstance, sigma: &Assignment) -> Result<f64> {
    if sigma.len() != inst.n() {
        return Err(crate::Error::LengthMismatch {
            expected: inst.n(),
            actual: sigma.len(),
        });
    }
    let (k, v) = (inst.k, inst.v);
    let mut class_counts = vec![0usize; k];
    let mut emit_counts = vec![0usize; k * v];
    for (&z, &x) in sigma.labels().iter().zip(&inst.obs) {
        if z >= k {
            return Err(domain(format!("label {z} outside {k} classes")));
        }
        class_counts[z] += 1;
        emit_counts[z * v + x] += 1;
    }

    let (kf, vf, n) = (k as f64, v as f64, inst.n() as f64);
    let (alpha, eta) = (inst.alpha, inst.eta);
    let mut total = math::ln_gamma(kf * alpha) - math::ln_gamma(kf * alpha + n);
    for z in 0..k {
        let nz = class_counts[z] as f64;
        total += math::ln_gamma(alpha + nz) - math::ln_gamma(alpha);
        total += math::ln_gamma(vf * eta) - math::ln_gamma(vf * eta + nz);
        for x in 0..v {
            let nzx = emit_counts[z * v + x] as f64;
            if nzx > 0.0 {
                total += math::ln_gamma(eta + nzx) - math::ln_gamma(eta);
            }
        }
    }
    Ok(total)
}

/// `ln p(x, sigma)` for every assignment, in big-endian lexicographic order.
pub fn log_joint_table(inst: &ToyInstance) -> Vec<f64> {
    (0..inst.num_assignments())
        .map(|l| {
            let sigma = Assignment::from_index(l, inst.n(), inst.k);
            collapsed_log_joint(inst, &sigma).expect("enumerated assignment is valid")
        })
        .collect()
}

/// Exact `ln p(x)`.
pub fn exact_log_marginal(inst: &ToyInstance) -> f64 {
    math::log_sum_exp(&log_joint_table(inst))
}

/// `p(sigma | x)` for every assignment.
pub fn exact_classical_posterior(inst: &ToyInstance) -> Vec<f64> {
    let table = log_joint_table(inst);
    let norm = math::log_sum_exp(&table);
    table.iter().map(|&lj| math::exp(lj - norm)).collect()
}

pub fn build_dense_system(inst: &ToyInstance) -> Result<DenseSystem> {
    DenseSystem::new(inst.n(), inst.k, log_joint_table(inst))
}

/// Final ELBO of plain mean-field VB on the instance.
pub fn mean_field_elbo(inst: &ToyInstance, seed: u64, sweeps: usize) -> Result<f64> {
    let (corpus, hyper) = inst.as_lda()?;
    let (_, trace) = lda::fit_vb(&corpus, &hyper, seed, sweeps)?;
    Ok(*trace.last().expect("trace holds the initial ELBO"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_kernel::exact_quantum_marginal;

    fn sigma(labels: &[usize], k: usize) -> Assignment {
        Assignment::new(labels.to_vec(), k).unwrap()
    }

    /// Pólya-urn chain rule: a second route to `p(x, sigma)` using plain
    /// probability products instead of log-gamma ratios.
    fn sequential_joint(inst: &ToyInstance, labels: &[usize]) -> f64 {
        let (k, v) = (inst.k(), inst.v());
        let mut nz = vec![0.0; k];
        let mut nzx = vec![0.0; k * v];
        let mut p = 1.0;
        for (i, (&z, &x)) in labels.iter().zip(inst.obs()).enumerate() {
            p *= (inst.alpha() + nz[z]) / (k as f64 * inst.alpha() + i as f64);
            p *= (inst.eta() + nzx[z * v + x]) / (v as f64 * inst.eta() + nz[z]);
            nz[z] += 1.0;
            nzx[z * v + x] += 1.0;
        }
        p
    }

    #[test]
    fn single_point_is_label_symmetric() {
        let inst = ToyInstance::new(2, 2, vec![1], 0.5, 0.5).unwrap();
        let a = collapsed_log_joint(&inst, &sigma(&[0], 2)).unwrap();
        let b = collapsed_log_joint(&inst, &sigma(&[1], 2)).unwrap();
        assert!((a - b).abs() < 1e-15);
        let post = exact_classical_posterior(&inst);
        assert!((post[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn repeated_symbol_prefers_shared_class() {
        let inst = ToyInstance::new(2, 3, vec![2, 2], 1.0, 0.3).unwrap();
        let together = collapsed_log_joint(&inst, &sigma(&[0, 0], 2)).unwrap();
        let split = collapsed_log_joint(&inst, &sigma(&[0, 1], 2)).unwrap();
        assert!(together > split);
    }

    #[test]
    fn chain_rule_route_agrees() {
        let inst = ToyInstance::new(2, 3, vec![0, 2, 0], 0.7, 0.4).unwrap();
        let post = exact_classical_posterior(&inst);
        let joints: Vec<f64> = (0..8)
            .map(|l| sequential_joint(&inst, Assignment::from_index(l, 3, 2).labels()))
            .collect();
        let z: f64 = joints.iter().sum();
        for (p, j) in post.iter().zip(&joints) {
            assert!((p - j / z).abs() < 1e-13);
        }
        assert!((exact_log_marginal(&inst) - libm::log(z)).abs() < 1e-12);
    }

    #[test]
    fn posterior_sums_to_one() {
        let inst = ToyInstance::new(3, 4, vec![0, 1, 3, 3, 2, 0, 1, 1], 0.3, 0.2).unwrap();
        let post = exact_classical_posterior(&inst);
        assert_eq!(post.len(), 6561);
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_system_sizes() {
        for (n, k) in [(1, 2), (2, 2), (3, 2), (2, 3)] {
            let inst = ToyInstance::new(k, 2, vec![0; n], 1.0, 1.0).unwrap();
            let sys = build_dense_system(&inst).unwrap();
            assert_eq!(sys.states(), k.pow(n as u32));
        }
        let big = ToyInstance::new(2, 2, vec![0; 5], 1.0, 1.0).unwrap();
        assert!(build_dense_system(&big).is_err());
    }

    #[test]
    fn classical_reduction_through_dense_system() {
        let inst = ToyInstance::new(3, 2, vec![0, 1, 1], 0.5, 0.8).unwrap();
        let sys = build_dense_system(&inst).unwrap();
        let quantum = exact_quantum_marginal(&sys, 1.0, 0.0).unwrap();
        assert!((quantum - exact_log_marginal(&inst)).abs() < 1e-12);
    }

    #[test]
    fn mean_field_is_a_lower_bound() {
        let inst = ToyInstance::new(2, 3, vec![0, 0, 1, 2, 2, 2, 1], 0.5, 0.2).unwrap();
        let exact = exact_log_marginal(&inst);
        for seed in 0..5 {
            let elbo = mean_field_elbo(&inst, seed, 50).unwrap();
            assert!(elbo <= exact + 1e-12, "seed {seed}: {elbo} > {exact}");
        }
    }

    #[test]
    fn validates_instances() {
        assert!(ToyInstance::new(2, 2, vec![], 1.0, 1.0).is_err());
        assert!(ToyInstance::new(2, 2, vec![0; 9], 1.0, 1.0).is_err());
        assert!(ToyInstance::new(4, 2, vec![0], 1.0, 1.0).is_err());
        assert!(ToyInstance::new(2, 2, vec![2], 1.0, 1.0).is_err());
        assert!(ToyInstance::new(2, 5, vec![0], 1.0, 1.0).is_err());
    }
}
