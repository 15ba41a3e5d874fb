//! Contextual policies over a projection `W`.
//!
//! Each arm keeps ridge-regression statistics of projected contexts `W x`.
//! Given the history, the raw moments `A_i = sum x x^T` and `c_i = sum x y`
//! do not depend on `W`, and every projected quantity is a closed-form
//! function of them:
//!
//! ```text
//! G_i = W A_i W^T + lambda I,   b_i = W c_i,   theta_i = G_i^{-1} b_i
//! mu_i = (W x)^T theta_i,       v_i = (W x)^T G_i^{-1} (W x)
//! ```
//!
//! With `p = G_i^{-1} W x`, `q = theta_i`, `s = A_i W^T p` and `u = A_i W^T q`,
//! the exact derivatives through the whole history are
//!
//! ```text
//! d mu_i / dW = q (x - s)^T + p (c_i - u)^T
//! d v_i / dW  = 2 p (x - s)^T
//! ```
//!
//! so each arm only carries `W A_i` next to its inverse covariance.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand_distr::{Distribution, StandardNormal};

use crate::env::{argmax, ProblemInstance, RewardTable};
use crate::error::{Error, Result};
use crate::linalg::{add_outer, dot, mat_vec_into, spd_inverse, vec_mat_into};
use crate::policy::BanditPolicy;
use crate::policy_mab::{round_horizon, sample_index, softmax, EtcState};
use crate::rng::StreamRng;

const REFACTOR_EVERY: usize = 64;
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Ridge-regression state of one arm in the projected space.
#[derive(Debug, Clone)]
pub struct LinArmState {
    d: usize,
    lambda: f64,
    count: usize,
    /// Raw second moment `sum x x^T`.
    raw_cov: Vec<f64>,
    /// Raw cross moment `sum x y`.
    raw_xy: Vec<f64>,
    /// `W * raw_cov`.
    w_cov: Vec<f64>,
    gram: Vec<f64>,
    inverse: Vec<f64>,
    b: Vec<f64>,
    theta: Vec<f64>,
    since_refactor: usize,
    z: Vec<f64>,
    pz: Vec<f64>,
}

impl LinArmState {
    pub fn new(d: usize, lambda: f64) -> Self {
        let mut gram = vec![0.0; d * d];
        let mut inverse = vec![0.0; d * d];
        for i in 0..d {
            gram[i * d + i] = lambda;
            inverse[i * d + i] = 1.0 / lambda;
        }
        Self {
            d,
            lambda,
            count: 0,
            raw_cov: vec![0.0; d * d],
            raw_xy: vec![0.0; d],
            w_cov: vec![0.0; d * d],
            gram,
            inverse,
            b: vec![0.0; d],
            theta: vec![0.0; d],
            since_refactor: 0,
            z: vec![0.0; d],
            pz: vec![0.0; d],
        }
    }

    /// Add observation `(x, y)` under projection `w`.
    pub fn update(&mut self, w: &[f64], x: &[f64], y: f64) -> Result<()> {
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite context or reward".into()));
        }
        let mut z = std::mem::take(&mut self.z);
        let mut pz = std::mem::take(&mut self.pz);
        mat_vec_into(w, x, &mut z);
        add_outer(&mut self.raw_cov, 1.0, x, x);
        self.raw_xy.iter_mut().zip(x).for_each(|(c, xi)| *c += y * xi);
        add_outer(&mut self.w_cov, 1.0, &z, x);
        add_outer(&mut self.gram, 1.0, &z, &z);
        self.b.iter_mut().zip(&z).for_each(|(b, zi)| *b += y * zi);
        self.count += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        } else {
            mat_vec_into(&self.inverse, &z, &mut pz);
            let denom = 1.0 + dot(&z, &pz);
            add_outer(&mut self.inverse, -1.0 / denom, &pz, &pz);
        }
        mat_vec_into(&self.inverse, &self.b, &mut self.theta);
        self.z = z;
        self.pz = pz;
        Ok(())
    }

    /// Recompute the inverse from the Gram matrix.
    pub fn refactor(&mut self) {
        self.since_refactor = 0;
        if let Some(inv) = spd_inverse(&self.gram, self.d) {
            self.inverse = inv;
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn inverse(&self) -> &[f64] {
        &self.inverse
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Estimated mean `z^T theta`, width `v = z^T G^{-1} z` and `p = G^{-1} z`
    /// for a projected context `z`.
    fn view(&self, z: &[f64]) -> ArmView {
        let mut p = vec![0.0; self.d];
        mat_vec_into(&self.inverse, z, &mut p);
        ArmView { mean: dot(z, &self.theta), width: dot(z, &p), p }
    }

    /// Accumulate `coef_mean * d mu / dW + coef_width * d v / dW` into `grad`.
    fn accumulate_grad(&self, x: &[f64], view: &ArmView, coef_mean: f64, coef_width: f64, grad: &mut [f64], scratch: &mut [f64]) {
        if coef_mean == 0.0 && coef_width == 0.0 {
            return;
        }
        let d = self.d;
        // scratch[..d] = x - s
        vec_mat_into(&view.p, &self.w_cov, &mut scratch[..d]);
        for (s, xi) in scratch[..d].iter_mut().zip(x) {
            *s = xi - *s;
        }
        let (x_minus_s, rest) = scratch.split_at_mut(d);
        let left = &mut rest[..d];
        for i in 0..d {
            left[i] = coef_mean * self.theta[i] + 2.0 * coef_width * view.p[i];
        }
        add_outer(grad, 1.0, left, x_minus_s);
        if coef_mean != 0.0 {
            // c - u with u = (W A)^T theta
            let c_minus_u = &mut rest[d..2 * d];
            vec_mat_into(&self.theta, &self.w_cov, c_minus_u);
            for (u, c) in c_minus_u.iter_mut().zip(&self.raw_xy) {
                *u = c - *u;
            }
            add_outer(grad, coef_mean, &view.p, c_minus_u);
        }
    }
}

#[derive(Debug, Clone)]
struct ArmView {
    mean: f64,
    width: f64,
    p: Vec<f64>,
}

/// CoSoftElim scores `gamma (mu_max - mu_i)^2 / ||z||^2_{G_i^{-1}}` for a
/// projected context `z`; all zero when `z = 0`.
pub fn cosoftelim_scores(states: &[LinArmState], z: &[f64], gamma: f64) -> Vec<f64> {
    if z.iter().all(|&v| v == 0.0) {
        return vec![0.0; states.len()];
    }
    let views: Vec<ArmView> = states.iter().map(|s| s.view(z)).collect();
    let best = views.iter().map(|v| v.mean).fold(f64::NEG_INFINITY, f64::max);
    views.iter().map(|v| gamma * (best - v.mean).powi(2) / v.width).collect()
}

pub fn cosoftelim_probs(states: &[LinArmState], w: &[f64], x: &[f64], gamma: f64) -> Vec<f64> {
    let mut z = vec![0.0; x.len()];
    mat_vec_into(w, x, &mut z);
    let neg: Vec<f64> = cosoftelim_scores(states, &z, gamma).iter().map(|s| -s).collect();
    softmax(&neg)
}

/// `d/dW log pi_arm` of CoSoftElim, row-major `d x d`.
pub fn cosoftelim_grad_log_prob(states: &[LinArmState], w: &[f64], x: &[f64], gamma: f64, arm: usize) -> Vec<f64> {
    let d = x.len();
    let mut z = vec![0.0; d];
    mat_vec_into(w, x, &mut z);
    let mut grad = vec![0.0; d * d];
    if z.iter().all(|&v| v == 0.0) {
        return grad;
    }
    let views: Vec<ArmView> = states.iter().map(|s| s.view(&z)).collect();
    let means: Vec<f64> = views.iter().map(|v| v.mean).collect();
    let leader = argmax(means.iter().copied());
    let best = means[leader];
    let scores: Vec<f64> = views.iter().map(|v| gamma * (best - v.mean).powi(2) / v.width).collect();
    let probs = softmax(&scores.iter().map(|s| -s).collect::<Vec<_>>());
    let mut scratch = vec![0.0; 3 * d];
    let mut leader_coef = 0.0;
    for (j, (state, view)) in states.iter().zip(&views).enumerate() {
        if j == leader {
            continue;
        }
        let beta = probs[j] - f64::from(u8::from(j == arm));
        let gap = best - view.mean;
        let c = 2.0 * gamma * gap / view.width;
        leader_coef += beta * c;
        let coef_width = -beta * gamma * gap * gap / (view.width * view.width);
        state.accumulate_grad(x, view, -beta * c, coef_width, &mut grad, &mut scratch);
    }
    states[leader].accumulate_grad(x, &views[leader], leader_coef, 0.0, &mut grad, &mut scratch);
    grad
}

/// Score scale `c_1^{-2}` with `c_1 = sigma sqrt(K d log((1 + n L^2 / (K d lambda)) / delta)) + sqrt(lambda) L_*`.
#[allow(clippy::too_many_arguments)]
pub fn theory_gamma(k: usize, d: usize, n: usize, sigma: f64, lambda: f64, l: f64, l_star: f64, delta: f64) -> f64 {
    let c1 = theory_constants(k, d, n, sigma, lambda, l, l_star, delta).0;
    1.0 / (c1 * c1)
}

/// The concentration constant `c_1` and width-sum constant
/// `c_2 = 2 K d log(1 + n L^2 / (K d lambda))`.
#[allow(clippy::too_many_arguments)]
pub fn theory_constants(k: usize, d: usize, n: usize, sigma: f64, lambda: f64, l: f64, l_star: f64, delta: f64) -> (f64, f64) {
    let kd = (k * d) as f64;
    let ratio = 1.0 + n as f64 * l * l / (kd * lambda);
    let c1 = sigma * (kd * (ratio / delta).ln()).sqrt() + lambda.sqrt() * l_star;
    (c1, 2.0 * kd * ratio.ln())
}

fn project(w: &[f64], x: &[f64], z: &mut [f64]) {
    mat_vec_into(w, x, z);
}

/// Contextual soft elimination over a learned projection.
#[derive(Debug, Clone)]
pub struct CoSoftElim {
    pub d: usize,
    pub w: Vec<f64>,
    pub gamma: f64,
    pub lambda: f64,
}

impl CoSoftElim {
    pub fn new(d: usize, w: Vec<f64>, gamma: f64, lambda: f64) -> Self {
        Self { d, w, gamma, lambda }
    }
}

impl BanditPolicy for CoSoftElim {
    fn run(&self, instance: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, mut scores: Option<&mut Vec<f64>>) -> Vec<usize> {
        let d = self.d;
        let mut states = vec![LinArmState::new(d, self.lambda); table.arms];
        let mut z = vec![0.0; d];
        let mut arms = Vec::with_capacity(table.horizon);
        for t in 0..table.horizon {
            let x = instance.context(t);
            project(&self.w, x, &mut z);
            let neg: Vec<f64> = cosoftelim_scores(&states, &z, self.gamma).iter().map(|s| -s).collect();
            let probs = softmax(&neg);
            let arm = sample_index(&probs, rng);
            if let Some(s) = scores.as_deref_mut() {
                s.extend(cosoftelim_grad_log_prob(&states, &self.w, x, self.gamma, arm));
            }
            states[arm]
                .update(&self.w, x, table.reward(arm, t))
                .expect("reward tables and contexts are finite");
            arms.push(arm);
        }
        arms
    }

    fn num_params(&self) -> usize {
        self.d * self.d
    }
}

/// Contextual Thompson sampling with Gaussian posteriors in the projected space.
#[derive(Debug)]
pub struct ContextualTs {
    pub d: usize,
    pub w: Vec<f64>,
    pub sigma: f64,
    pub lambda: f64,
    floor_hits: AtomicU64,
}

/// One posterior draw: the sampled means, the pulled arm and, on request,
/// the summed Gaussian score with respect to `W`.
#[derive(Debug, Clone)]
pub struct TsDraw {
    pub arm: usize,
    pub samples: Vec<f64>,
}

/// `sum_i d/dW log N(samples_i; mu_i, sigma^2 v_i)` for the current states.
pub fn cts_grad_log_density(states: &[LinArmState], w: &[f64], x: &[f64], sigma: f64, samples: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut z = vec![0.0; d];
    mat_vec_into(w, x, &mut z);
    let mut grad = vec![0.0; d * d];
    let mut scratch = vec![0.0; 3 * d];
    for (state, &sample) in states.iter().zip(samples) {
        let view = state.view(&z);
        let raw = sigma * sigma * view.width;
        let var = raw.max(VARIANCE_FLOOR);
        let diff = sample - view.mean;
        let d_mean = diff / var;
        let d_var = if raw < VARIANCE_FLOOR { 0.0 } else { -0.5 / var + 0.5 * diff * diff / (var * var) };
        state.accumulate_grad(x, &view, d_mean, sigma * sigma * d_var, &mut grad, &mut scratch);
    }
    grad
}

impl ContextualTs {
    pub fn new(d: usize, w: Vec<f64>, sigma: f64, lambda: f64) -> Self {
        Self { d, w, sigma, lambda, floor_hits: AtomicU64::new(0) }
    }

    /// Number of posterior variances raised to the floor so far.
    pub fn variance_floor_hits(&self) -> u64 {
        self.floor_hits.load(Ordering::Relaxed)
    }

    /// Sample `mu_i ~ N(z^T theta_i, sigma^2 ||z||^2_{G_i^{-1}})` and pull the argmax.
    pub fn sample(&self, states: &[LinArmState], x: &[f64], rng: &mut StreamRng) -> TsDraw {
        let mut z = vec![0.0; self.d];
        project(&self.w, x, &mut z);
        let samples: Vec<f64> = states
            .iter()
            .map(|s| {
                let view = s.view(&z);
                let var = self.sigma * self.sigma * view.width;
                let noise: f64 = StandardNormal.sample(rng);
                if var < VARIANCE_FLOOR {
                    self.floor_hits.fetch_add(1, Ordering::Relaxed);
                    view.mean
                } else {
                    view.mean + var.sqrt() * noise
                }
            })
            .collect();
        TsDraw { arm: argmax(samples.iter().copied()), samples }
    }

    /// Play an episode and also return the posterior draws of every round.
    pub fn run_recorded(
        &self,
        instance: &ProblemInstance,
        table: &RewardTable,
        rng: &mut StreamRng,
        mut scores: Option<&mut Vec<f64>>,
    ) -> (Vec<usize>, Vec<Vec<f64>>) {
        let mut states = vec![LinArmState::new(self.d, self.lambda); table.arms];
        let mut arms = Vec::with_capacity(table.horizon);
        let mut draws = Vec::with_capacity(table.horizon);
        for t in 0..table.horizon {
            let x = instance.context(t);
            let draw = self.sample(&states, x, rng);
            if let Some(s) = scores.as_deref_mut() {
                s.extend(cts_grad_log_density(&states, &self.w, x, self.sigma, &draw.samples));
            }
            states[draw.arm]
                .update(&self.w, x, table.reward(draw.arm, t))
                .expect("reward tables and contexts are finite");
            arms.push(draw.arm);
            draws.push(draw.samples);
        }
        (arms, draws)
    }
}

impl BanditPolicy for ContextualTs {
    fn run(&self, instance: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, scores: Option<&mut Vec<f64>>) -> Vec<usize> {
        self.run_recorded(instance, table, rng, scores).0
    }

    fn num_params(&self) -> usize {
        self.d * self.d
    }
}

/// Probabilities `(1 - eps) 1{i = leader} + eps / K` and `d/deps log pi_i` for every arm.
pub fn eps_greedy_probs_and_grad(means: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>) {
    let k = means.len() as f64;
    let leader = argmax(means.iter().copied());
    let probs: Vec<f64> = (0..means.len())
        .map(|i| (1.0 - eps) * f64::from(u8::from(i == leader)) + eps / k)
        .collect();
    let grads = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| (1.0 / k - f64::from(u8::from(i == leader))) / p)
        .collect();
    (probs, grads)
}

/// Epsilon-greedy over per-arm ridge regression on raw contexts.
#[derive(Debug, Clone)]
pub struct EpsGreedy {
    pub d: usize,
    pub eps: f64,
    pub lambda: f64,
}

impl EpsGreedy {
    pub fn new(d: usize, eps: f64, lambda: f64) -> Self {
        Self { d, eps, lambda }
    }
}

impl BanditPolicy for EpsGreedy {
    fn run(&self, instance: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, mut scores: Option<&mut Vec<f64>>) -> Vec<usize> {
        let identity = crate::linalg::identity(self.d);
        let mut states = vec![LinArmState::new(self.d, self.lambda); table.arms];
        let mut arms = Vec::with_capacity(table.horizon);
        for t in 0..table.horizon {
            let x = instance.context(t);
            let means: Vec<f64> = states.iter().map(|s| dot(x, s.theta())).collect();
            let (probs, grads) = eps_greedy_probs_and_grad(&means, self.eps);
            let arm = sample_index(&probs, rng);
            if let Some(s) = scores.as_deref_mut() {
                s.push(grads[arm]);
            }
            states[arm]
                .update(&identity, x, table.reward(arm, t))
                .expect("reward tables and contexts are finite");
            arms.push(arm);
        }
        arms
    }

    fn num_params(&self) -> usize {
        1
    }
}

/// Randomized explore-then-commit run separately in every discrete context.
/// The context id of round `t` is the first context coordinate, rounded.
#[derive(Debug, Clone)]
pub struct ContextualEtc {
    pub h: f64,
}

impl ContextualEtc {
    pub fn new(h: f64) -> Self {
        Self { h }
    }
}

/// Arm chosen by the per-context explore-then-commit rule and the update of
/// that context's state.
pub fn contextual_etc_step(states: &mut BTreeMap<i64, EtcState>, arms: usize, rounded_h: usize, context: i64) -> usize {
    states.entry(context).or_insert_with(|| EtcState::new(arms)).select(rounded_h)
}

impl BanditPolicy for ContextualEtc {
    fn run(&self, instance: &ProblemInstance, table: &RewardTable, rng: &mut StreamRng, scores: Option<&mut Vec<f64>>) -> Vec<usize> {
        let (rounded, score) = round_horizon(self.h, rng);
        if let Some(s) = scores {
            s.push(score);
            s.extend(std::iter::repeat_n(0.0, table.horizon.saturating_sub(1)));
        }
        let mut states = BTreeMap::new();
        (0..table.horizon)
            .map(|t| {
                let context = instance.context(t)[0].round() as i64;
                let arm = contextual_etc_step(&mut states, table.arms, rounded, context);
                states.get_mut(&context).expect("state created above").record(arm, table.reward(arm, t));
                arm
            })
            .collect()
    }

    fn num_params(&self) -> usize {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, quad_form};
    use crate::rng::{stream, Purpose};
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::Rng;

    #[test]
    fn empty_state_is_the_prior() {
        let s = LinArmState::new(3, 1.0);
        assert_eq!(s.gram(), identity(3).as_slice());
        assert_eq!(s.theta(), &[0.0; 3]);
    }

    #[test]
    fn single_observation_by_hand() {
        let mut s = LinArmState::new(2, 1.0);
        s.update(&identity(2), &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(s.gram(), &[2.0, 0.0, 0.0, 1.0]);
        assert!((s.theta()[0] - 0.5).abs() < 1e-15 && s.theta()[1] == 0.0);
    }

    #[test]
    fn rejects_non_finite_observations() {
        let mut s = LinArmState::new(1, 1.0);
        assert!(matches!(s.update(&[1.0], &[f64::NAN], 1.0), Err(Error::Input(_))));
        assert!(s.update(&[1.0], &[1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn incremental_inverse_tracks_dense_inverse() {
        let d = 4;
        let mut rng = stream(1, Purpose::Misc, 0, 0);
        let w: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut s = LinArmState::new(d, 0.5);
        let mut previous = s.gram().to_vec();
        for step in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            s.update(&w, &x, rng.random_range(-1.0..1.0)).unwrap();
            let dense = spd_inverse(s.gram(), d).unwrap();
            let err = s.inverse().iter().zip(&dense).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * crate::linalg::frobenius(&dense), "step {step}: {err}");
            if step % 97 == 0 {
                let m = DMatrix::from_row_slice(d, d, s.gram());
                let diff = DMatrix::from_row_slice(d, d, s.gram()) - DMatrix::from_row_slice(d, d, &previous);
                assert!(SymmetricEigen::new(m).eigenvalues.min() >= 0.5 * (1.0 - 1e-8));
                assert!(SymmetricEigen::new(diff).eigenvalues.min() >= -1e-9);
            }
            previous = s.gram().to_vec();
        }
    }

    #[test]
    fn cosoftelim_one_dimensional_scores() {
        // T pulls of x = 1 with mean estimate m: theta = T m / (T + 1) under lambda = 1.
        let mut states = Vec::new();
        for (t, target) in [(5usize, 0.8), (10, 0.6)] {
            let mut s = LinArmState::new(1, 1.0);
            let y = target * (t as f64 + 1.0) / t as f64;
            for _ in 0..t {
                s.update(&[1.0], &[1.0], y).unwrap();
            }
            states.push(s);
        }
        let scores = cosoftelim_scores(&states, &[1.0], 1.0);
        assert!(scores[0] == 0.0 && (scores[1] - 0.04 * 11.0).abs() < 1e-12, "{scores:?}");
        let p = cosoftelim_probs(&states, &[1.0], &[1.0], 1.0);
        assert!((p[0] - 1.0 / (1.0 + (-0.44f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn cosoftelim_without_data_is_uniform_with_zero_gradient() {
        let states = vec![LinArmState::new(2, 1.0); 3];
        let w = [0.3, -1.0, 2.0, 0.5];
        let p = cosoftelim_probs(&states, &w, &[1.0, 2.0], 4.0);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(cosoftelim_grad_log_prob(&states, &w, &[1.0, 2.0], 4.0, 1).iter().all(|&g| g == 0.0));
        let null = cosoftelim_probs(&states, &[0.0; 4], &[1.0, 2.0], 4.0);
        assert!(null.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn score_derivative_matches_symbolic_scalar_case() {
        // d = 1, one observation (x, y) on arm 2, none on arm 1, W = w, a = w^2 x^2:
        // mu_2 = a y / (a + 1), mu_1 = 0 and v_1 = a, so S_1 = gamma a y^2 / (a + 1)^2.
        let (x, y, w, gamma) = (1.3, 0.7, 0.9, 2.0);
        let mut states = vec![LinArmState::new(1, 1.0); 2];
        states[1].update(&[w], &[x], y).unwrap();
        let a = w * w * x * x;
        let s1 = gamma * a * y * y / (a + 1.0).powi(2);
        let scores = cosoftelim_scores(&states, &[w * x], gamma);
        assert!((scores[0] - s1).abs() < 1e-13 && scores[1] == 0.0);
        let ds1 = gamma * y * y * (1.0 - a) / (a + 1.0).powi(3) * 2.0 * w * x * x;
        let probs = cosoftelim_probs(&states, &[w], &[x], gamma);
        // log pi_1 = -S_1 - log(e^{-S_1} + 1)
        let expected = -ds1 + probs[0] * ds1;
        let g = cosoftelim_grad_log_prob(&states, &[w], &[x], gamma, 0);
        assert!((g[0] - expected).abs() < 1e-12, "{} vs {expected}", g[0]);
    }

    #[test]
    fn single_arm_ts_score_matches_scalar_formula() {
        let (x, y, w, sigma, sample) = (0.8, 1.1, 1.4, 0.5, 0.3);
        let mut states = vec![LinArmState::new(1, 1.0)];
        states[0].update(&[w], &[x], y).unwrap();
        let a = w * w * x * x;
        let m = a * y / (a + 1.0);
        let var = sigma * sigma * a / (a + 1.0);
        let dm = 2.0 * w * x * x * y / (a + 1.0).powi(2);
        let dvar = sigma * sigma * 2.0 * w * x * x / (a + 1.0).powi(2);
        let diff = sample - m;
        let expected = diff / var * dm + (-0.5 / var + 0.5 * diff * diff / (var * var)) * dvar;
        let g = cts_grad_log_density(&states, &[w], &[x], sigma, &[sample]);
        assert!((g[0] - expected).abs() < 1e-12, "{} vs {expected}", g[0]);
    }

    #[test]
    fn ts_mean_score_vanishes_at_the_mean_before_data() {
        let states = vec![LinArmState::new(2, 1.0); 3];
        let g = cts_grad_log_density(&states, &identity(2), &[1.0, -0.5], 0.5, &[0.0; 3]);
        // only the variance term remains: -1/(2 s^2) * sigma^2 * 2 p x^T with p = z
        let expected = -1.0 / (2.0 * 0.25 * 1.25) * 0.25 * 2.0;
        let x = [1.0, -0.5];
        for r in 0..2 {
            for c in 0..2 {
                assert!((g[r * 2 + c] - 3.0 * expected * x[r] * x[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eps_greedy_examples() {
        let (p, g) = eps_greedy_probs_and_grad(&[0.3, 0.1], 0.2);
        assert!((p[0] - 0.9).abs() < 1e-15 && (g[0] + 0.5 / 0.9).abs() < 1e-12);
        assert!((g[0] + 0.5556).abs() < 1e-4);
        let (p, g) = eps_greedy_probs_and_grad(&[0.0, 1.0, 0.5], 1.0);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!((g[1] - (1.0 / 3.0 - 1.0) * 3.0).abs() < 1e-12);
        for eps in [0.05, 0.3, 1.0] {
            let (p, g) = eps_greedy_probs_and_grad(&[0.2, 0.9, 0.1, 0.4], eps);
            assert!(p.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn ts_with_zero_width_is_greedy() {
        let ts = ContextualTs::new(2, vec![0.0; 4], 0.5, 1.0);
        let states = vec![LinArmState::new(2, 1.0); 2];
        let mut rng = stream(4, Purpose::Misc, 0, 0);
        let draw = ts.sample(&states, &[1.0, 1.0], &mut rng);
        assert_eq!(draw.arm, 0);
        assert_eq!(ts.variance_floor_hits(), 2);
    }

    #[test]
    fn ts_before_data_is_symmetric() {
        let ts = ContextualTs::new(2, identity(2), 0.5, 1.0);
        let states = vec![LinArmState::new(2, 1.0); 2];
        let mut rng = stream(5, Purpose::Misc, 0, 0);
        let first = (0..10_000).filter(|_| ts.sample(&states, &[1.0, 1.0], &mut rng).arm == 0).count();
        assert!((first as f64 / 1e4 - 0.5).abs() < 0.01);
    }

    #[test]
    fn contextual_etc_schedule() {
        let mut states = BTreeMap::new();
        // even observation counts pull arm 1 during exploration
        for s in 0..6 {
            let arm = contextual_etc_step(&mut states, 2, 3, 7);
            assert_eq!(arm, s % 2);
            states.get_mut(&7).unwrap().record(arm, if arm == 0 { 0.9 } else { 0.1 });
        }
        assert_eq!(contextual_etc_step(&mut states, 2, 3, 7), 0);
        assert_eq!(contextual_etc_step(&mut states, 2, 3, 8), 0);
    }

    #[test]
    fn quad_form_matches_width() {
        let mut s = LinArmState::new(2, 1.0);
        s.update(&identity(2), &[1.0, 2.0], 0.5).unwrap();
        let z = [0.3, -0.4];
        let view = s.view(&z);
        assert!((view.width - quad_form(s.inverse(), &z)).abs() < 1e-15);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(1000))]

        #[test]
        fn eps_greedy_gradient_matches_finite_differences(
            means in proptest::collection::vec(-3.0..3.0f64, 2..6),
            eps in 0.01..0.99f64,
            arm in 0usize..6,
        ) {
            let arm = arm % means.len();
            let h = 1e-6;
            let log_p = |e: f64| eps_greedy_probs_and_grad(&means, e).0[arm].ln();
            let fd = (log_p(eps + h) - log_p(eps - h)) / (2.0 * h);
            let g = eps_greedy_probs_and_grad(&means, eps).1[arm];
            proptest::prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "fd {} vs {}", fd, g);
        }
    }
}
