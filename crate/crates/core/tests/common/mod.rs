#![allow(dead_code)]

use gradband_core::env::{realize_rewards, sample_instance, ContextModel, Prior, PriorFamily, PriorSpec, RewardModel};
use gradband_core::estimator::Trajectory;
use gradband_core::linalg::{dot, identity, mat_vec, quad_form};
use gradband_core::policy_ctx::{cosoftelim_probs, ContextualTs, CoSoftElim, LinArmState};
use gradband_core::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;

/// `(arms, d, n)` shapes for the episode gradient checks.
pub const EPISODE_SHAPES: [(usize, usize, usize); 4] = [(2, 1, 6), (3, 2, 10), (3, 3, 10), (4, 3, 8)];

pub fn small_prior(arms: usize, d: usize) -> Prior {
    let eye: Vec<Vec<f64>> = identity(d).chunks(d).map(<[f64]>::to_vec).collect();
    PriorSpec {
        arms,
        dim: d,
        family: PriorFamily::GaussianLinear { mean: vec![0.0; d], cov: eye.clone() },
        reward: RewardModel::Gaussian { sigma: 0.5 },
        context: ContextModel::Gaussian { mean: vec![0.5; d], cov: eye },
    }
    .build()
    .unwrap()
}

pub fn random_projection(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Misc, 1, 0);
    identity(d).iter().map(|v| v + 0.4 * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn central_difference(w: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..w.len())
        .map(|k| {
            let (mut up, mut down) = (w.to_vec(), w.to_vec());
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// `||fd - g|| / max(||g||, 1e-3)`.
pub fn relative_error(fd: &[f64], g: &[f64]) -> f64 {
    let err = fd.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    err / scale.max(1e-3)
}

/// Summed per-round scores of one CoSoftElim episode and the central
/// difference of the replayed log-likelihood of its actions.
pub fn cosoftelim_episode(arms: usize, d: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let prior = small_prior(arms, d);
    let instance = sample_instance(&prior, n, &mut stream(seed, Purpose::EvalInstance, 0, 0)).unwrap();
    let table = realize_rewards(&instance, &prior, &mut stream(seed, Purpose::EvalRewards, 0, 0)).unwrap();
    let w = random_projection(d, seed);
    let gamma = 2.5;
    let policy = CoSoftElim::new(d, w.clone(), gamma, 1.0);
    let traj = Trajectory::record(&policy, &instance, &table, &mut stream(seed, Purpose::EvalPolicy, 0, 0)).unwrap();
    let mut g = vec![0.0; d * d];
    for row in traj.scores.chunks(d * d) {
        g.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    let fd = central_difference(&w, |w| {
        let mut states = vec![LinArmState::new(d, 1.0); arms];
        let mut total = 0.0;
        for (t, &arm) in traj.arms.iter().enumerate() {
            let x = instance.context(t);
            total += cosoftelim_probs(&states, w, x, gamma)[arm].ln();
            states[arm].update(w, x, traj.rewards[t]).unwrap();
        }
        total
    });
    (fd, g)
}

/// Same for contextual TS, replaying the log-density of the posterior draws.
pub fn contextual_ts_episode(arms: usize, d: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let prior = small_prior(arms, d);
    let instance = sample_instance(&prior, n, &mut stream(seed, Purpose::EvalInstance, 0, 0)).unwrap();
    let table = realize_rewards(&instance, &prior, &mut stream(seed, Purpose::EvalRewards, 0, 0)).unwrap();
    let w = random_projection(d, seed);
    let sigma = 0.5;
    let policy = ContextualTs::new(d, w.clone(), sigma, 1.0);
    let mut scores = Vec::new();
    let (pulled, draws) = policy.run_recorded(&instance, &table, &mut stream(seed, Purpose::EvalPolicy, 0, 0), Some(&mut scores));
    assert_eq!(policy.variance_floor_hits(), 0);
    let mut g = vec![0.0; d * d];
    for row in scores.chunks(d * d) {
        g.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    let fd = central_difference(&w, |w| {
        let mut states = vec![LinArmState::new(d, 1.0); arms];
        let mut total = 0.0;
        for (t, &arm) in pulled.iter().enumerate() {
            let x = instance.context(t);
            let z = mat_vec(w, x);
            for (state, &sample) in states.iter().zip(&draws[t]) {
                let mean = dot(&z, state.theta());
                let var = sigma * sigma * quad_form(state.inverse(), &z);
                total += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (sample - mean).powi(2) / (2.0 * var);
            }
            states[arm].update(w, x, table.reward(arm, t)).unwrap();
        }
        total
    });
    (fd, g)
}
