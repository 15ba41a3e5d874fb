mod common;

use common::{contextual_ts_episode, cosoftelim_episode, relative_error, EPISODE_SHAPES};

#[test]
fn cosoftelim_episode_gradient_matches_replayed_finite_differences() {
    for (case, &(arms, d, n)) in EPISODE_SHAPES.iter().enumerate() {
        for episode in 0..10 {
            let (fd, g) = cosoftelim_episode(arms, d, n, 100 * case as u64 + episode);
            let err = relative_error(&fd, &g);
            assert!(err <= 1e-4, "({arms}, {d}, {n}) episode {episode}: {err}\nfd {fd:?}\ng  {g:?}");
        }
    }
}

#[test]
fn contextual_ts_episode_gradient_matches_replayed_finite_differences() {
    for (case, &(arms, d, n)) in EPISODE_SHAPES.iter().enumerate() {
        for episode in 0..10 {
            let (fd, g) = contextual_ts_episode(arms, d, n, 100 * case as u64 + episode);
            let err = relative_error(&fd, &g);
            assert!(err <= 1e-4, "({arms}, {d}, {n}) episode {episode}: {err}\nfd {fd:?}\ng  {g:?}");
        }
    }
}
