//! Tempered variational updates for latent Dirichlet allocation.
//!
//! Topic-word distributions `phi_k ~ Dir(eta)` and document proportions
//! `theta_d ~ Dir(alpha)` are both symmetric. Raising a `Dir(c)` density to the
//! power `beta_eff` gives a kernel of `Dir(beta_eff (c - 1) + 1)`, which is what
//! the tempered M-step produces. At `beta_eff = 1` every update reduces to
//! standard mean-field VB.
//!
//! Responsibilities are stored per (document, word type) entry of the
//! [`Corpus`]. All tokens of one word type in one document share the same
//! update, so counts simply weight each entry.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::corpus::Corpus;
use crate::error::{domain, Error, Result};
use crate::math;
use crate::seed;

/// Model size and symmetric Dirichlet priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaHyper {
    pub k: usize,
    pub v: usize,
    pub alpha: f64,
    pub eta: f64,
}

impl LdaHyper {
    pub fn new(k: usize, v: usize, alpha: f64, eta: f64) -> Result<Self> {
        if k < 2 {
            return Err(domain(format!("need at least two topics, got {k}")));
        }
        if v == 0 {
            return Err(domain("vocabulary must be non-empty"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) || !(eta > 0.0 && eta.is_finite()) {
            return Err(domain(format!(
                "priors must be positive, got alpha = {alpha}, eta = {eta}"
            )));
        }
        Ok(Self { k, v, alpha, eta })
    }

    /// `alpha = 50 / k`, `eta = 0.1`.
    pub fn with_default_priors(k: usize, v: usize) -> Result<Self> {
        Self::new(k, v, 50.0 / k as f64, 0.1)
    }
}

/// Variational parameters of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaState {
    k: usize,
    /// `entries x k`, each row a probability vector.
    resp: Vec<f64>,
    /// `k x v` topic-word Dirichlet parameters.
    lambda: Vec<f64>,
    /// `docs x k` document-topic Dirichlet parameters.
    gamma_doc: Vec<f64>,
}

impl ReplicaState {
    /// Flat-Dirichlet responsibilities followed by one M-step at `beta_eff`.
    pub fn initialize(
        corpus: &Corpus,
        hyper: &LdaHyper,
        beta_eff: f64,
        rng: &mut impl RngCore,
    ) -> Result<Self> {
        check_corpus(corpus, hyper)?;
        let k = hyper.k;
        let mut resp = vec![0.0; corpus.num_entries() * k];
        for row in resp.chunks_exact_mut(k) {
            seed::flat_dirichlet(rng, row);
        }
        let (lambda, gamma_doc) = m_step(&resp, corpus, hyper, beta_eff)?;
        Ok(Self {
            k,
            resp,
            lambda,
            gamma_doc,
        })
    }

    /// Rebuilds a state from raw arrays, checking every invariant.
    pub fn from_parts(
        corpus: &Corpus,
        hyper: &LdaHyper,
        resp: Vec<f64>,
        lambda: Vec<f64>,
        gamma_doc: Vec<f64>,
    ) -> Result<Self> {
        check_corpus(corpus, hyper)?;
        let k = hyper.k;
        expect_len(resp.len(), corpus.num_entries() * k)?;
        expect_len(lambda.len(), k * hyper.v)?;
        expect_len(gamma_doc.len(), corpus.num_docs() * k)?;
        for row in resp.chunks_exact(k) {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&r| !(r >= 0.0)) || (total - 1.0).abs() > 1e-10 {
                return Err(Error::State(format!("responsibility row {row:?} is not normalized")));
            }
        }
        if lambda.iter().chain(&gamma_doc).any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::State("Dirichlet parameters must be positive".into()));
        }
        Ok(Self {
            k,
            resp,
            lambda,
            gamma_doc,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn resp(&self) -> &[f64] {
        &self.resp
    }

    /// Responsibility vector of one (document, word type) entry.
    pub fn entry_resp(&self, entry: usize) -> &[f64] {
        &self.resp[entry * self.k..(entry + 1) * self.k]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn gamma_doc(&self) -> &[f64] {
        &self.gamma_doc
    }

    pub fn num_entries(&self) -> usize {
        self.resp.len() / self.k
    }

    pub fn expectations(&self, hyper: &LdaHyper) -> Expectations {
        Expectations::new(&self.lambda, &self.gamma_doc, hyper.k, hyper.v)
    }

    pub(crate) fn set_resp(&mut self, resp: Vec<f64>) {
        debug_assert_eq!(resp.len(), self.resp.len());
        self.resp = resp;
    }

    pub(crate) fn set_params(&mut self, lambda: Vec<f64>, gamma_doc: Vec<f64>) {
        self.lambda = lambda;
        self.gamma_doc = gamma_doc;
    }
}

/// `E[ln theta_dk]` and `E[ln phi_kw]` under the current posteriors.
#[derive(Debug, Clone)]
pub struct Expectations {
    k: usize,
    v: usize,
    elog_theta: Vec<f64>,
    elog_phi: Vec<f64>,
}

impl Expectations {
    fn new(lambda: &[f64], gamma_doc: &[f64], k: usize, v: usize) -> Self {
        let mut elog_theta = vec![0.0; gamma_doc.len()];
        for (src, dst) in gamma_doc.chunks_exact(k).zip(elog_theta.chunks_exact_mut(k)) {
            expect_log_into(src, dst);
        }
        let mut elog_phi = vec![0.0; lambda.len()];
        for (src, dst) in lambda.chunks_exact(v).zip(elog_phi.chunks_exact_mut(v)) {
            expect_log_into(src, dst);
        }
        Self {
            k,
            v,
            elog_theta,
            elog_phi,
        }
    }

    pub fn elog_theta(&self, d: usize) -> &[f64] {
        &self.elog_theta[d * self.k..(d + 1) * self.k]
    }

    pub fn elog_phi(&self, topic: usize, word: usize) -> f64 {
        self.elog_phi[topic * self.v + word]
    }

    /// `beta_eff * (E[ln theta_dk] + E[ln phi_kw])` for every topic.
    pub fn local_logits(&self, d: usize, w: usize, beta_eff: f64, out: &mut [f64]) {
        let theta = self.elog_theta(d);
        for (topic, slot) in out.iter_mut().enumerate() {
            *slot = beta_eff * (theta[topic] + self.elog_phi(topic, w));
        }
    }
}

/// `digamma(p_i) - digamma(sum p)` for each component.
pub fn dirichlet_expect_log(params: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = params.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
        return Err(domain(format!("Dirichlet parameters must be positive, found {bad}")));
    }
    let mut out = vec![0.0; params.len()];
    expect_log_into(params, &mut out);
    Ok(out)
}

fn expect_log_into(params: &[f64], out: &mut [f64]) {
    let total = math::digamma(params.iter().sum());
    for (o, &p) in out.iter_mut().zip(params) {
        *o = math::digamma(p) - total;
    }
}

/// Unnormalized log-responsibilities of document `d`, word `w`, before any
/// replica interaction is added.
pub fn e_step_local(state: &ReplicaState, hyper: &LdaHyper, d: usize, w: usize, beta_eff: f64) -> Vec<f64> {
    let k = hyper.k;
    let theta = &state.gamma_doc[d * k..(d + 1) * k];
    let elog_theta = dirichlet_expect_log(theta).expect("state invariant: positive gamma_doc");
    let mut out = vec![0.0; k];
    for (topic, slot) in out.iter_mut().enumerate() {
        let row = &state.lambda[topic * hyper.v..(topic + 1) * hyper.v];
        let elog_phi_w = math::digamma(row[w]) - math::digamma(row.iter().sum());
        *slot = beta_eff * (elog_theta[topic] + elog_phi_w);
    }
    out
}

/// Full VB-E step: for every entry, local logits plus whatever `coupling`
/// adds, then softmax. Returns the new responsibility table.
///
/// `coupling(entry, logits)` may add interaction terms in place; it must
/// only read state other than the table being produced.
pub fn e_step(
    corpus: &Corpus,
    exp: &Expectations,
    beta_eff: f64,
    mut coupling: impl FnMut(usize, &mut [f64]),
) -> Vec<f64> {
    let k = exp.k;
    let mut resp = vec![0.0; corpus.num_entries() * k];
    for ((entry, (d, w, _)), row) in corpus.entries().enumerate().zip(resp.chunks_exact_mut(k)) {
        exp.local_logits(d, w, beta_eff, row);
        coupling(entry, row);
        math::softmax_in_place(row);
    }
    resp
}

/// Tempered VB-M step. Returns `(lambda, gamma_doc)`.
///
/// Each parameter is `beta_eff * prior + (1 - beta_eff) + beta_eff * expected_count`,
/// i.e. `beta_eff (prior - 1) + 1 + beta_eff * expected_count`, written so
/// that `beta_eff = 1` gives exactly `prior + expected_count`.
pub fn m_step(resp: &[f64], corpus: &Corpus, hyper: &LdaHyper, beta_eff: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(beta_eff > 0.0 && beta_eff <= 1.0) {
        return Err(domain(format!("beta_eff must lie in (0, 1], got {beta_eff}")));
    }
    let k = hyper.k;
    expect_len(resp.len(), corpus.num_entries() * k)?;

    let mut lambda_counts = vec![0.0; k * hyper.v];
    let mut doc_counts = vec![0.0; corpus.num_docs() * k];
    for ((d, w, c), row) in corpus.entries().zip(resp.chunks_exact(k)) {
        let c = f64::from(c);
        for (topic, &r) in row.iter().enumerate() {
            let x = c * r;
            lambda_counts[topic * hyper.v + w] += x;
            doc_counts[d * k + topic] += x;
        }
    }

    let base_lambda = beta_eff * hyper.eta + (1.0 - beta_eff);
    let base_gamma = beta_eff * hyper.alpha + (1.0 - beta_eff);
    if !(base_lambda > 0.0) {
        return Err(Error::NonPositiveParameter {
            which: "lambda",
            value: base_lambda,
        });
    }
    if !(base_gamma > 0.0) {
        return Err(Error::NonPositiveParameter {
            which: "gamma_doc",
            value: base_gamma,
        });
    }
    let lambda = lambda_counts.iter().map(|&n| base_lambda + beta_eff * n).collect();
    let gamma_doc = doc_counts.iter().map(|&n| base_gamma + beta_eff * n).collect();
    Ok((lambda, gamma_doc))
}

/// Untempered ELBO of one replica.
pub fn classical_free_energy(state: &ReplicaState, corpus: &Corpus, hyper: &LdaHyper) -> f64 {
    tempered_free_energy(state, corpus, hyper, 1.0)
}

/// ELBO with the joint (likelihood and prior) raised to `beta_eff`:
///
/// `beta_eff * (E[ln p(x, z | theta, phi)] + E[ln p(theta, phi)]) + H[q(z)] + H[q(theta, phi)]`.
pub fn tempered_free_energy(state: &ReplicaState, corpus: &Corpus, hyper: &LdaHyper, beta_eff: f64) -> f64 {
    let k = hyper.k;
    let v = hyper.v;
    let exp = state.expectations(hyper);

    let mut log_lik = 0.0;
    let mut resp_entropy = 0.0;
    for ((d, w, c), row) in corpus.entries().zip(state.resp.chunks_exact(k)) {
        let c = f64::from(c);
        let theta = exp.elog_theta(d);
        for (topic, &r) in row.iter().enumerate() {
            if r > 0.0 {
                log_lik += c * r * (theta[topic] + exp.elog_phi(topic, w));
                resp_entropy -= c * r * math::ln(r);
            }
        }
    }

    let mut log_prior = 0.0;
    let mut param_entropy = 0.0;
    for d in 0..corpus.num_docs() {
        let elog = exp.elog_theta(d);
        log_prior += dirichlet_log_density_expectation(hyper.alpha, elog);
        param_entropy += dirichlet_entropy(&state.gamma_doc[d * k..(d + 1) * k], elog);
    }
    for topic in 0..k {
        let elog = &exp.elog_phi[topic * v..(topic + 1) * v];
        log_prior += dirichlet_log_density_expectation(hyper.eta, elog);
        param_entropy += dirichlet_entropy(&state.lambda[topic * v..(topic + 1) * v], elog);
    }

    beta_eff * (log_lik + log_prior) + resp_entropy + param_entropy
}

/// `E_q[ln Dir(x | c, ..., c)]` given `E_q[ln x_i]`.
fn dirichlet_log_density_expectation(c: f64, elog: &[f64]) -> f64 {
    let dim = elog.len() as f64;
    math::ln_gamma(dim * c) - dim * math::ln_gamma(c) + (c - 1.0) * elog.iter().sum::<f64>()
}

/// `-E_q[ln q(x)]` for `q = Dir(params)` with `E_q[ln x_i] = elog[i]`.
fn dirichlet_entropy(params: &[f64], elog: &[f64]) -> f64 {
    let total: f64 = params.iter().sum();
    let log_norm = math::ln_gamma(total) - params.iter().map(|&p| math::ln_gamma(p)).sum::<f64>();
    let cross: f64 = params.iter().zip(elog).map(|(&p, &e)| (p - 1.0) * e).sum();
    -(log_norm + cross)
}

/// Plain mean-field VB from replica stream 0 of `seed`: initialize, then
/// `sweeps` rounds of (E-step, M-step) at `beta_eff = 1`.
///
/// Returns the final state and the ELBO after initialization and after every
/// sweep.
pub fn fit_vb(corpus: &Corpus, hyper: &LdaHyper, seed: u64, sweeps: usize) -> Result<(ReplicaState, Vec<f64>)> {
    let mut rng = seed::stream_rng(seed, 0);
    let mut state = ReplicaState::initialize(corpus, hyper, 1.0, &mut rng)?;
    let mut trace = Vec::with_capacity(sweeps + 1);
    trace.push(classical_free_energy(&state, corpus, hyper));
    for _ in 0..sweeps {
        let exp = state.expectations(hyper);
        let resp = e_step(corpus, &exp, 1.0, |_, _| {});
        let (lambda, gamma_doc) = m_step(&resp, corpus, hyper, 1.0)?;
        state.set_resp(resp);
        state.set_params(lambda, gamma_doc);
        trace.push(classical_free_energy(&state, corpus, hyper));
    }
    Ok((state, trace))
}

fn check_corpus(corpus: &Corpus, hyper: &LdaHyper) -> Result<()> {
    if corpus.vocab_size() != hyper.v {
        return Err(Error::Corpus(format!(
            "corpus vocabulary {} does not match model vocabulary {}",
            corpus.vocab_size(),
            hyper.v
        )));
    }
    Ok(())
}

fn expect_len(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordCount;
    use crate::seed::stream_rng;
    use proptest::prelude::*;

    fn wc(word: usize, count: u32) -> WordCount {
        WordCount { word, count }
    }

    fn small_corpus() -> Corpus {
        Corpus::new(
            4,
            vec![
                vec![wc(0, 3), wc(1, 1)],
                vec![wc(2, 2), wc(3, 4)],
                vec![wc(0, 1), wc(3, 2)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn expect_log_reference_values() {
        let out = dirichlet_expect_log(&[1.0, 1.0]).unwrap();
        assert!((out[0] + 1.0).abs() < 1e-12 && (out[1] + 1.0).abs() < 1e-12);

        let sym = dirichlet_expect_log(&[0.3; 5]).unwrap();
        assert!(sym.iter().all(|&x| x == sym[0]));

        let any = dirichlet_expect_log(&[0.2, 4.0, 1.5]).unwrap();
        assert!(math::log_sum_exp(&any) <= 0.0);

        assert!(dirichlet_expect_log(&[1.0, 0.0]).is_err());
        assert!(dirichlet_expect_log(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn local_logits_hand_fixture() {
        // K = 2, V = 2, one document. gamma_doc = (1, 1) gives E[ln theta] = (-1, -1).
        // lambda_0 = (2, 1): E[ln phi_0] = (psi(2) - psi(3), psi(1) - psi(3)) = (-0.5, -1.5).
        // lambda_1 = (1, 1): E[ln phi_1] = (-1, -1).
        let corpus = Corpus::new(2, vec![vec![wc(0, 1), wc(1, 1)]]).unwrap();
        let hyper = LdaHyper::new(2, 2, 1.0, 1.0).unwrap();
        let state = ReplicaState::from_parts(
            &corpus,
            &hyper,
            vec![0.5; 4],
            vec![2.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let w0 = e_step_local(&state, &hyper, 0, 0, 1.0);
        let w1 = e_step_local(&state, &hyper, 0, 1, 1.0);
        assert!((w0[0] + 1.5).abs() < 1e-12 && (w0[1] + 2.0).abs() < 1e-12);
        assert!((w1[0] + 2.5).abs() < 1e-12 && (w1[1] + 2.0).abs() < 1e-12);

        let half = e_step_local(&state, &hyper, 0, 0, 0.5);
        for (h, f) in half.iter().zip(&w0) {
            assert_eq!(*h, 0.5 * f);
        }

        let exp = state.expectations(&hyper);
        let mut cached = [0.0; 2];
        exp.local_logits(0, 1, 1.0, &mut cached);
        assert_eq!(cached.to_vec(), w1);
    }

    #[test]
    fn uniform_posteriors_give_uniform_logits() {
        let corpus = small_corpus();
        let hyper = LdaHyper::new(3, 4, 0.5, 0.5).unwrap();
        let state = ReplicaState::from_parts(
            &corpus,
            &hyper,
            vec![1.0 / 3.0; corpus.num_entries() * 3],
            vec![2.0; 12],
            vec![1.5; 9],
        )
        .unwrap();
        let l = e_step_local(&state, &hyper, 1, 2, 1.0);
        assert!(l.iter().all(|&x| x == l[0]));
    }

    #[test]
    fn m_step_reductions() {
        let corpus = small_corpus();
        let hyper = LdaHyper::new(2, 4, 0.7, 0.1).unwrap();
        let mut resp = vec![0.0; corpus.num_entries() * 2];
        for row in resp.chunks_exact_mut(2) {
            row[0] = 1.0;
        }
        let (lambda, gamma) = m_step(&resp, &corpus, &hyper, 1.0).unwrap();
        // topic 0 gets all counts, topic 1 only the prior
        assert_eq!(&lambda[..4], &[0.1 + 4.0, 0.1 + 1.0, 0.1 + 2.0, 0.1 + 6.0]);
        assert_eq!(&lambda[4..], &[0.1; 4]);
        assert_eq!(gamma, vec![0.7 + 4.0, 0.7, 0.7 + 6.0, 0.7, 0.7 + 3.0, 0.7]);

        let flat = LdaHyper::new(2, 4, 1.0, 1.0).unwrap();
        let half = vec![0.5; corpus.num_entries() * 2];
        let (lambda, _) = m_step(&half, &corpus, &flat, 0.5).unwrap();
        assert_eq!(lambda[3], 1.0 + 0.5 * 0.5 * 6.0);

        assert!(m_step(&half, &corpus, &flat, 0.0).is_err());
        assert!(m_step(&half, &corpus, &flat, 1.5).is_err());
        assert!(matches!(
            m_step(&half[1..], &corpus, &flat, 1.0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn empty_corpus_elbo_is_zero_at_prior() {
        let corpus = Corpus::new(5, vec![vec![], vec![]]).unwrap();
        let hyper = LdaHyper::new(3, 5, 0.4, 0.2).unwrap();
        let mut rng = stream_rng(1, 0);
        let state = ReplicaState::initialize(&corpus, &hyper, 1.0, &mut rng).unwrap();
        assert!(state.lambda().iter().all(|&l| l == 0.2));
        let elbo = classical_free_energy(&state, &corpus, &hyper);
        assert!(elbo.abs() < 1e-10, "{elbo}");
    }

    #[test]
    fn plain_vb_is_monotone() {
        let corpus = small_corpus();
        let hyper = LdaHyper::new(2, 4, 0.5, 0.1).unwrap();
        for seed in 0..5 {
            let (_, trace) = fit_vb(&corpus, &hyper, seed, 30).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn from_parts_validates() {
        let corpus = small_corpus();
        let hyper = LdaHyper::new(2, 4, 0.5, 0.1).unwrap();
        let n = corpus.num_entries() * 2;
        assert!(ReplicaState::from_parts(&corpus, &hyper, vec![0.4; n], vec![1.0; 8], vec![1.0; 6]).is_err());
        assert!(ReplicaState::from_parts(&corpus, &hyper, vec![0.5; n], vec![0.0; 8], vec![1.0; 6]).is_err());
        assert!(ReplicaState::from_parts(&corpus, &hyper, vec![0.5; n], vec![1.0; 7], vec![1.0; 6]).is_err());
        let wrong_vocab = LdaHyper::new(2, 5, 0.5, 0.1).unwrap();
        assert!(ReplicaState::from_parts(&corpus, &wrong_vocab, vec![0.5; n], vec![1.0; 10], vec![1.0; 6]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_ignores_shift(shift in -50.0f64..50.0, seed in 0u64..1000) {
            let corpus = small_corpus();
            let hyper = LdaHyper::new(3, 4, 0.5, 0.1).unwrap();
            let mut rng = stream_rng(seed, 0);
            let state = ReplicaState::initialize(&corpus, &hyper, 0.8, &mut rng).unwrap();
            let exp = state.expectations(&hyper);
            let plain = e_step(&corpus, &exp, 0.8, |_, _| {});
            let shifted = e_step(&corpus, &exp, 0.8, |_, row| row.iter_mut().for_each(|x| *x += shift));
            for (a, b) in plain.iter().zip(&shifted) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for row in plain.chunks_exact(3) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }
}
