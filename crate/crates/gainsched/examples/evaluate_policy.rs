//! Trains briefly, then rolls the greedy policy out on the standard
//! maneuver and reports which gain vectors it scheduled along the way.
//!
//! Run with: cargo run --example evaluate_policy

use anyhow::Result;
use gainsched::dqn::{self, TrainConfig};
use gainsched::dynamics::QuadState;
use gainsched::dynamics::VehicleParams;
use gainsched::env::{EpisodeConfig, QuadEnv};
use gainsched::gains::{
    build_action_table, decode_action, DEFAULT_NOMINAL_POLES, DEFAULT_SCALE_GRID,
    DEFAULT_YAW_GAINS,
};
use nalgebra::Vector3;
use std::sync::Arc;

fn main() -> Result<()> {
    let table = Arc::new(build_action_table(
        DEFAULT_NOMINAL_POLES,
        DEFAULT_SCALE_GRID,
        DEFAULT_YAW_GAINS,
    )?);
    let mut env =
        QuadEnv::new(Arc::clone(&table), VehicleParams::default(), EpisodeConfig::default())?;

    let config = TrainConfig {
        hidden: vec![32, 32],
        batch_size: 16,
        warmup_steps: 500,
        epsilon_decay_steps: 10_000,
        episodes: 10,
        ..TrainConfig::default()
    };
    println!("training {} episodes...", config.episodes);
    let result = dqn::train(&mut env, &config, 3, |_| {})?;

    // Greedy rollout from the origin toward the default hover target.
    env.reset_from(QuadState::hover_at(Vector3::zeros()));
    let outcomes = dqn::greedy_episode(&mut env, &result.net);

    let mut schedule: Vec<(f64, usize)> = Vec::new();
    for out in &outcomes {
        if schedule.last().map(|(_, a)| *a) != Some(out.transition.action) {
            schedule.push((out.info.t, out.transition.action));
        }
    }
    println!("\ngain schedule chosen by the greedy policy:");
    for (t, action) in &schedule {
        println!("  t = {t:>5.2} s: action {action} (levels {:?})", decode_action(*action));
    }
    let return_: f64 = outcomes.iter().map(|o| o.transition.reward).sum();
    let last = outcomes.last().expect("nonempty episode");
    println!("\nepisode return: {return_:.3} over {} steps", outcomes.len());
    println!(
        "final-step reward {:.5}, final position {:?}",
        last.transition.reward,
        last.info.state.r.as_slice()
    );
    Ok(())
}
