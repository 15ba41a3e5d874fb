//! Non-contextual policies.
//!
//! Exp3, SoftElim and randomized explore-then-commit are differentiable in
//! their scalar parameter; UCB1, UCB-V, Bernoulli Thompson sampling and the
//! Gittins index are classical baselines. All argmax ties resolve to the
//! lowest arm index.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::env::{argmax, ProblemInstance, RewardTable};
use crate::gittins::GittinsTable;
use crate::policy::BanditPolicy;
use crate::rng::StreamRng;

/// Per-arm sufficient statistics of a non-contextual episode.
#[derive(Debug, Clone)]
pub struct MabStats {
    /// Rounds played so far.
    pub t: usize,
    pub pulls: Vec<usize>,
    pub sums: Vec<f64>,
    pub sums_sq: Vec<f64>,
    /// Inverse-propensity cumulative reward estimates.
    pub ips: Vec<f64>,
    pub successes: Vec<f64>,
    pub failures: Vec<f64>,
}

impl MabStats {
    pub fn new(arms: usize) -> Self {
        Self {
            t: 0,
            pulls: vec![0; arms],
            sums: vec![0.0; arms],
            sums_sq: vec![0.0; arms],
            ips: vec![0.0; arms],
            successes: vec![0.0; arms],
            failures: vec![0.0; arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.pulls.len()
    }

    pub fn mean(&self, arm: usize) -> f64 {
        if self.pulls[arm] == 0 {
            0.0
        } else {
            self.sums[arm] / self.pulls[arm] as f64
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.arms()).map(|i| self.mean(i)).collect()
    }

    /// Record reward `y` of `arm`, pulled with probability `prob`.
    pub fn record(&mut self, arm: usize, y: f64, prob: f64) {
        self.t += 1;
        self.pulls[arm] += 1;
        self.sums[arm] += y;
        self.sums_sq[arm] += y * y;
        self.ips[arm] += y / prob;
    }

    /// The first unpulled arm, if any.
    pub fn warm_up_arm(&self) -> Option<usize> {
        self.pulls.iter().position(|&c| c == 0)
    }
}

/// Max-shifted softmax of `logits`.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Draw an index from the probability vector `probs`.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Exp3 action probabilities with learning rate `eta = w / K`.
pub fn exp3_probs(ips: &[f64], w: f64) -> Vec<f64> {
    let k = ips.len() as f64;
    let logits: Vec<f64> = ips.iter().map(|s| w * s / k).collect();
    softmax(&logits).into_iter().map(|p| (1.0 - w) * p + w / k).collect()
}

/// `d/dw log pi_i` of Exp3 at fixed inverse-propensity scores.
pub fn exp3_grad_log_prob(ips: &[f64], w: f64, arm: usize) -> f64 {
    let k = ips.len() as f64;
    let logits: Vec<f64> = ips.iter().map(|s| w * s / k).collect();
    let rho = softmax(&logits);
    let avg: f64 = rho.iter().zip(ips).map(|(r, s)| r * s / k).sum();
    let pi = (1.0 - w) * rho[arm] + w / k;
    (rho[arm] * ((1.0 - w) * (ips[arm] / k - avg) - 1.0) + 1.0 / k) / pi
}

/// SoftElim scores `2 (max_j mu_j - mu_i)^2 T_i`.
pub fn softelim_scores(means: &[f64], pulls: &[usize]) -> Vec<f64> {
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    means
        .iter()
        .zip(pulls)
        .map(|(m, &t)| 2.0 * (best - m).powi(2) * t as f64)
        .collect()
}

/// `pi_i ∝ exp(-S_i / w^2)`.
pub fn softelim_probs_from_scores(scores: &[f64], w: f64) -> Vec<f64> {
    let logits: Vec<f64> = scores.iter().map(|s| -s / (w * w)).collect();
    softmax(&logits)
}

/// SoftElim probabilities; every arm must have been pulled.
pub fn softelim_probs(stats: &MabStats, w: f64) -> Vec<f64> {
    assert!(
        stats.warm_up_arm().is_none(),
        "internal invariant violated: SoftElim probabilities requested with an unpulled arm"
    );
    softelim_probs_from_scores(&softelim_scores(&stats.means(), &stats.pulls), w)
}

/// `d/dw log pi_i = 2 w^{-3} (S_i - sum_j S_j pi_j)`.
pub fn softelim_grad_log_prob(scores: &[f64], w: f64, arm: usize) -> f64 {
    let probs = softelim_probs_from_scores(scores, w);
    let avg: f64 = scores.iter().zip(&probs).map(|(s, p)| s * p).sum();
    2.0 * (scores[arm] - avg) / (w * w * w)
}

/// Uniformly random arm in every round.
#[derive(Debug, Clone, Copy)]
pub struct Uniform;

impl BanditPolicy for Uniform {
    fn run(&self, _: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, _: Option<&mut Vec<f64>>) -> Vec<usize> {
        (0..table.horizon).map(|_| rng.random_range(0..table.arms)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Exp3 {
    pub w: f64,
}

impl Exp3 {
    pub fn new(w: f64) -> Self {
        Self { w }
    }
}

impl BanditPolicy for Exp3 {
    fn run(&self, _: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, mut scores: Option<&mut Vec<f64>>) -> Vec<usize> {
        let mut stats = MabStats::new(table.arms);
        let mut arms = Vec::with_capacity(table.horizon);
        for t in 0..table.horizon {
            let probs = exp3_probs(&stats.ips, self.w);
            let arm = sample_index(&probs, rng);
            if let Some(s) = scores.as_deref_mut() {
                s.push(exp3_grad_log_prob(&stats.ips, self.w, arm));
            }
            stats.record(arm, table.reward(arm, t), probs[arm]);
            arms.push(arm);
        }
        arms
    }

    fn num_params(&self) -> usize {
        1
    }
}

#[derive(Debug, Clone)]
pub struct SoftElim {
    pub w: f64,
}

impl SoftElim {
    pub fn new(w: f64) -> Self {
        Self { w }
    }
}

impl BanditPolicy for SoftElim {
    fn run(&self, _: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, mut scores: Option<&mut Vec<f64>>) -> Vec<usize> {
        let mut stats = MabStats::new(table.arms);
        let mut arms = Vec::with_capacity(table.horizon);
        for t in 0..table.horizon {
            let (arm, grad) = match stats.warm_up_arm() {
                Some(arm) => (arm, 0.0),
                None => {
                    let s = softelim_scores(&stats.means(), &stats.pulls);
                    let probs = softelim_probs_from_scores(&s, self.w);
                    let arm = sample_index(&probs, rng);
                    let avg: f64 = s.iter().zip(&probs).map(|(a, b)| a * b).sum();
                    (arm, 2.0 * (s[arm] - avg) / self.w.powi(3))
                }
            };
            if let Some(s) = scores.as_deref_mut() {
                s.push(grad);
            }
            stats.record(arm, table.reward(arm, t), 1.0);
            arms.push(arm);
        }
        arms
    }

    fn num_params(&self) -> usize {
        1
    }
}

/// Randomized rounding `floor(h) + Ber(h - floor(h))` and the score
/// `d/dh log P(rounding)`.
pub fn round_horizon<R: Rng + ?Sized>(h: f64, rng: &mut R) -> (usize, f64) {
    let base = h.floor();
    let frac = h - base;
    let up = rng.random::<f64>() < frac;
    let score = if up { 1.0 / frac } else { -1.0 / (1.0 - frac) };
    (base as usize + usize::from(up), score)
}

/// Explore-then-commit state for one stream of observations.
#[derive(Debug, Clone)]
pub struct EtcState {
    pub observations: usize,
    pub pulls: Vec<usize>,
    pub sums: Vec<f64>,
    pub committed: Option<usize>,
}

impl EtcState {
    pub fn new(arms: usize) -> Self {
        Self { observations: 0, pulls: vec![0; arms], sums: vec![0.0; arms], committed: None }
    }

    /// Round-robin over the arms for `arms * rounded_h` observations, then
    /// the empirical best arm at the end of exploration for good.
    pub fn select(&mut self, rounded_h: usize) -> usize {
        let k = self.pulls.len();
        if self.observations < k * rounded_h {
            return self.observations % k;
        }
        *self.committed.get_or_insert_with(|| {
            argmax((0..k).map(|i| if self.pulls[i] == 0 { 0.0 } else { self.sums[i] / self.pulls[i] as f64 }))
        })
    }

    pub fn record(&mut self, arm: usize, y: f64) {
        self.observations += 1;
        self.pulls[arm] += 1;
        self.sums[arm] += y;
    }
}

/// Randomized explore-then-commit with a continuous exploration horizon `h`.
#[derive(Debug, Clone)]
pub struct Etc {
    pub h: f64,
}

impl Etc {
    pub fn new(h: f64) -> Self {
        Self { h }
    }
}

impl BanditPolicy for Etc {
    fn run(&self, _: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, scores: Option<&mut Vec<f64>>) -> Vec<usize> {
        let (rounded, score) = round_horizon(self.h, rng);
        if let Some(s) = scores {
            s.push(score);
            s.extend(std::iter::repeat_n(0.0, table.horizon.saturating_sub(1)));
        }
        let mut state = EtcState::new(table.arms);
        (0..table.horizon)
            .map(|t| {
                let arm = state.select(rounded);
                state.record(arm, table.reward(arm, t));
                arm
            })
            .collect()
    }

    fn num_params(&self) -> usize {
        1
    }
}

/// Shared driver for index policies with a one-pull warm-up.
fn run_index_policy<F>(table: &RewardTable, mut index: F) -> Vec<usize>
where
    F: FnMut(&MabStats, usize) -> usize,
{
    let mut stats = MabStats::new(table.arms);
    (0..table.horizon)
        .map(|t| {
            let arm = stats.warm_up_arm().unwrap_or_else(|| index(&stats, t));
            stats.record(arm, table.reward(arm, t), 1.0);
            arm
        })
        .collect()
}

pub fn ucb1_select(stats: &MabStats, round: usize) -> usize {
    let log_t = ((round + 1) as f64).ln();
    argmax((0..stats.arms()).map(|i| stats.mean(i) + (2.0 * log_t / stats.pulls[i] as f64).sqrt()))
}

pub fn ucbv_select(stats: &MabStats, round: usize, zeta: f64, b: f64) -> usize {
    let log_t = ((round + 1) as f64).ln();
    argmax((0..stats.arms()).map(|i| {
        let n = stats.pulls[i] as f64;
        let mean = stats.mean(i);
        let var = (stats.sums_sq[i] / n - mean * mean).max(0.0);
        mean + (2.0 * var * zeta * log_t / n).sqrt() + 3.0 * b * zeta * log_t / n
    }))
}

/// Draw `Beta(1 + s_i, 1 + f_i)` for every arm and return the argmax.
pub fn bernoulli_ts_select<R: Rng + ?Sized>(stats: &MabStats, rng: &mut R) -> usize {
    let samples: Vec<f64> = (0..stats.arms())
        .map(|i| {
            Beta::new(1.0 + stats.successes[i], 1.0 + stats.failures[i])
                .expect("beta posterior parameters are positive")
                .sample(rng)
        })
        .collect();
    argmax(samples)
}

#[derive(Debug, Clone, Copy)]
pub struct Ucb1;

impl BanditPolicy for Ucb1 {
    fn run(&self, _: &ProblemInstance, table: &RewardTable, _: &mut StreamRng, _: Option<&mut Vec<f64>>) -> Vec<usize> {
        run_index_policy(table, ucb1_select)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UcbV {
    pub zeta: f64,
    pub b: f64,
}

impl UcbV {
    pub fn new(zeta: f64, b: f64) -> Self {
        Self { zeta, b }
    }
}

impl BanditPolicy for UcbV {
    fn run(&self, _: &ProblemInstance, table: &RewardTable, _: &mut StreamRng, _: Option<&mut Vec<f64>>) -> Vec<usize> {
        run_index_policy(table, |s, t| ucbv_select(s, t, self.zeta, self.b))
    }
}

/// Bernoulli Thompson sampling with a `Beta(1, 1)` prior. Rewards in `[0, 1]`
/// are turned into Bernoulli observations by randomized rounding.
#[derive(Debug, Clone, Copy)]
pub struct BernoulliTs;

impl BanditPolicy for BernoulliTs {
    fn run(&self, _: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, _: Option<&mut Vec<f64>>) -> Vec<usize> {
        let mut stats = MabStats::new(table.arms);
        (0..table.horizon)
            .map(|t| {
                let arm = stats.warm_up_arm().unwrap_or_else(|| bernoulli_ts_select(&stats, rng));
                let y = table.reward(arm, t);
                let success = if y <= 0.0 {
                    false
                } else if y >= 1.0 {
                    true
                } else {
                    rng.random::<f64>() < y
                };
                if success {
                    stats.successes[arm] += 1.0;
                } else {
                    stats.failures[arm] += 1.0;
                }
                stats.record(arm, y, 1.0);
                arm
            })
            .collect()
    }
}

/// Greedy on finite-horizon Gittins indices of Bernoulli-rounded observations.
#[derive(Debug, Clone)]
pub struct GittinsPolicy {
    table: Arc<GittinsTable>,
}

impl GittinsPolicy {
    pub fn new(table: Arc<GittinsTable>) -> Self {
        Self { table }
    }
}

impl BanditPolicy for GittinsPolicy {
    fn run(&self, _: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, _: Option<&mut Vec<f64>>) -> Vec<usize> {
        let n = table.horizon;
        assert!(n <= self.table.horizon(), "Gittins table built for a shorter horizon");
        let mut wins = vec![0usize; table.arms];
        let mut losses = vec![0usize; table.arms];
        (0..n)
            .map(|t| {
                let remaining = n - t;
                let arm = argmax((0..table.arms).map(|i| self.table.index(wins[i] + 1, losses[i] + 1, remaining)));
                let y = table.reward(arm, t);
                if y >= 1.0 || (y > 0.0 && rng.random::<f64>() < y) {
                    wins[arm] += 1;
                } else {
                    losses[arm] += 1;
                }
                arm
            })
            .collect()
    }
}

/// Upper bound on SoftElim regret at `w = sqrt(8)` for gaps `Delta_i > 0`.
pub fn softelim_regret_bound(gaps: &[f64], horizon: usize) -> f64 {
    let e = std::f64::consts::E;
    gaps.iter()
        .filter(|&&g| g > 0.0)
        .map(|&g| (2.0 * e + 1.0) * (16.0 / g * (horizon as f64).ln() + g) + 5.0 * g)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{realize_rewards, sample_instance, PriorSpec};
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;

    fn stats_with(means: &[f64], pulls: &[usize]) -> MabStats {
        let mut s = MabStats::new(means.len());
        for (i, (&m, &t)) in means.iter().zip(pulls).enumerate() {
            s.pulls[i] = t;
            s.sums[i] = m * t as f64;
        }
        s.t = pulls.iter().sum();
        s
    }

    fn log_exp3(ips: &[f64], w: f64, arm: usize) -> f64 {
        exp3_probs(ips, w)[arm].ln()
    }

    #[test]
    fn exp3_probability_examples() {
        assert!(exp3_probs(&[3.0, -1.0, 7.0], 1.0).iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(exp3_probs(&[0.0; 4], 0.3).iter().all(|p| (p - 0.25).abs() < 1e-15));
        let p = exp3_probs(&[10.0, 0.0], 0.5);
        let e = 2.5f64.exp();
        assert!((p[0] - (0.5 * e / (e + 1.0) + 0.25)).abs() < 1e-15);
        assert!((p[0] - 0.7121).abs() < 5e-5);
    }

    #[test]
    fn exp3_gradient_symbolic_value() {
        // K = 2, S = (10, 0), w = 0.5, arm 1:
        // rho = (e^2.5, 1) / (e^2.5 + 1), avg = rho_1 * 5
        let e = 2.5f64.exp();
        let rho1 = e / (e + 1.0);
        let pi1 = 0.5 * rho1 + 0.25;
        let expected = (rho1 * (0.5 * (5.0 - rho1 * 5.0) - 1.0) + 0.5) / pi1;
        assert!((exp3_grad_log_prob(&[10.0, 0.0], 0.5, 0) - expected).abs() < 1e-14);
        assert_eq!(exp3_grad_log_prob(&[4.0, 4.0], 0.3, 0), exp3_grad_log_prob(&[4.0, 4.0], 0.3, 1));
    }

    #[test]
    fn exp3_symmetric_scores_give_zero_gradient() {
        for w in [0.1, 0.5, 1.0] {
            for arm in 0..2 {
                assert!(exp3_grad_log_prob(&[3.0, 3.0], w, arm).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn softelim_examples() {
        let stats = stats_with(&[0.8, 0.6], &[5, 10]);
        let w = 8f64.sqrt();
        let s = softelim_scores(&stats.means(), &stats.pulls);
        assert!(s[0] == 0.0 && (s[1] - 0.8).abs() < 1e-12);
        let p = softelim_probs(&stats, w);
        assert!((p[0] - 1.0 / (1.0 + (-0.1f64).exp())).abs() < 1e-12);
        assert!((p[0] - 0.5250).abs() < 5e-5);
        let g = softelim_grad_log_prob(&s, w, 1);
        assert!((g - 2.0 * w.powi(-3) * (s[1] - (s[0] * p[0] + s[1] * p[1]))).abs() < 1e-14);

        let uniform = softelim_probs(&stats_with(&[0.5; 3], &[1, 2, 3]), 0.7);
        assert!(uniform.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(softelim_grad_log_prob(&[0.0; 3], 0.7, 2), 0.0);
    }

    #[test]
    #[should_panic(expected = "unpulled arm")]
    fn softelim_rejects_unpulled_arms() {
        softelim_probs(&stats_with(&[0.5, 0.5], &[1, 0]), 1.0);
    }

    #[test]
    fn epsilon_rounding_frequencies() {
        let mut rng = stream(1, Purpose::Misc, 0, 0);
        assert!((0..100).all(|_| round_horizon(3.0, &mut rng).0 == 3));
        let ups = (0..10_000).filter(|_| round_horizon(2.5, &mut rng).0 == 3).count();
        assert!((ups as f64 / 1e4 - 0.5).abs() < 0.01, "{ups}");
    }

    #[test]
    fn etc_commits_to_empirical_best() {
        let mut state = EtcState::new(2);
        for (arm, y) in [(0, 1.0), (1, 0.0), (0, 0.4), (1, 0.6)] {
            assert_eq!(state.select(2), arm);
            state.record(arm, y);
        }
        assert!((0..10).all(|_| state.select(2) == 0));
        for _ in 0..10 {
            state.record(0, 0.0);
        }
        assert_eq!(state.select(2), 0);
    }

    #[test]
    fn warm_up_pulls_every_arm_once_in_order() {
        let prior = PriorSpec::beta_bernoulli(4, 1.0, 1.0).build().unwrap();
        let mut rng = stream(2, Purpose::Misc, 0, 0);
        let inst = sample_instance(&prior, 20, &mut rng).unwrap();
        let table = realize_rewards(&inst, &prior, &mut rng).unwrap();
        let policies: Vec<Box<dyn BanditPolicy>> =
            vec![Box::new(SoftElim::new(1.0)), Box::new(Ucb1), Box::new(UcbV::new(1.2, 1.0)), Box::new(BernoulliTs)];
        for p in policies {
            assert_eq!(&p.run(&inst, &table, &mut rng, None)[..4], &[0, 1, 2, 3]);
        }
    }

    #[test]
    fn ts_without_data_is_symmetric() {
        let stats = MabStats::new(2);
        let mut rng = stream(3, Purpose::Misc, 0, 0);
        let first = (0..10_000).filter(|_| bernoulli_ts_select(&stats, &mut rng) == 0).count();
        assert!((first as f64 / 1e4 - 0.5).abs() < 0.01, "{first}");
    }

    #[test]
    fn index_rules() {
        let stats = stats_with(&[0.5, 0.4], &[10, 1]);
        // 0.5 + sqrt(2 ln 12 / 10) < 0.4 + sqrt(2 ln 12)
        assert_eq!(ucb1_select(&stats, 11), 1);
        let mut s = stats_with(&[0.5, 0.5], &[4, 4]);
        s.sums_sq = vec![1.0, 2.0];
        // equal means; arm 2 has the larger empirical variance
        assert_eq!(ucbv_select(&s, 8, 1.2, 1.0), 1);
    }

    #[test]
    fn regret_bound_value() {
        let e = std::f64::consts::E;
        let expected = (2.0 * e + 1.0) * (16.0 / 0.5 * 1000f64.ln() + 0.5) + 2.5;
        assert!((softelim_regret_bound(&[0.0, 0.5], 1000) - expected).abs() < 1e-9);
    }

    fn random_state() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (2usize..6).prop_flat_map(|k| (prop::collection::vec(-20.0..60.0f64, k), 0.01..1.0f64))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn exp3_probs_form_a_simplex_and_scores_sum_to_zero((ips, w) in random_state()) {
            let p = exp3_probs(&ips, w);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let identity: f64 = (0..ips.len()).map(|i| p[i] * exp3_grad_log_prob(&ips, w, i)).sum();
            prop_assert!(identity.abs() < 1e-10, "{}", identity);
        }

        #[test]
        fn exp3_gradient_matches_finite_differences((ips, w) in random_state(), arm in 0usize..6) {
            let arm = arm % ips.len();
            let w = w.clamp(1e-3 + 1e-5, 1.0 - 1e-5);
            let h = 1e-5;
            let fd = (log_exp3(&ips, w + h, arm) - log_exp3(&ips, w - h, arm)) / (2.0 * h);
            let g = exp3_grad_log_prob(&ips, w, arm);
            prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "fd {} vs {}", fd, g);
        }

        #[test]
        fn softelim_gradient_matches_finite_differences(
            scores in prop::collection::vec(0.0..20.0f64, 2..6),
            w in 0.3..3.0f64,
            arm in 0usize..6,
            shift in -5.0..5.0f64,
        ) {
            let arm = arm % scores.len();
            let p = softelim_probs_from_scores(&scores, w);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let q = softelim_probs_from_scores(&shifted, w);
            prop_assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12));
            let identity: f64 = (0..scores.len()).map(|i| p[i] * softelim_grad_log_prob(&scores, w, i)).sum();
            prop_assert!(identity.abs() < 1e-10);
            let h = 1e-5;
            let log_p = |w: f64| softelim_probs_from_scores(&scores, w)[arm].ln();
            let fd = (log_p(w + h) - log_p(w - h)) / (2.0 * h);
            let g = softelim_grad_log_prob(&scores, w, arm);
            prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "fd {} vs {}", fd, g);
        }
    }
}
