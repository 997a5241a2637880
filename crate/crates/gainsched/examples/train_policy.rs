//! Trains a small scheduling policy for a handful of episodes, prints the
//! learning curve, and round-trips the result through a checkpoint file.
//!
//! Run with: cargo run --example train_policy

use anyhow::Result;
use gainsched::dqn::{self, CheckpointMeta, TrainConfig};
use gainsched::dynamics::VehicleParams;
use gainsched::env::{EpisodeConfig, QuadEnv};
use gainsched::gains::{
    build_action_table, DEFAULT_NOMINAL_POLES, DEFAULT_SCALE_GRID, DEFAULT_YAW_GAINS,
};
use std::sync::Arc;

fn main() -> Result<()> {
    let table = Arc::new(build_action_table(
        DEFAULT_NOMINAL_POLES,
        DEFAULT_SCALE_GRID,
        DEFAULT_YAW_GAINS,
    )?);
    let mut env = QuadEnv::new(table, VehicleParams::default(), EpisodeConfig::default())?;

    // Scaled-down settings so the example finishes in seconds; the defaults
    // in TrainConfig are sized for a real run.
    let config = TrainConfig {
        hidden: vec![32, 32],
        batch_size: 16,
        warmup_steps: 500,
        epsilon_decay_steps: 10_000,
        episodes: 15,
        ..TrainConfig::default()
    };
    let seed = 7;

    println!("{:>8} {:>12} {:>10} {:>8} {:>7}", "episode", "return", "loss", "eps", "steps");
    let result = dqn::train(&mut env, &config, seed, |s| {
        println!(
            "{:>8} {:>12.3} {:>10.4} {:>8.3} {:>7}",
            s.episode, s.ret, s.mean_loss, s.epsilon, s.steps
        );
    })?;

    let path = std::env::temp_dir().join("train_policy_example.ckpt");
    dqn::save_checkpoint(
        &path,
        &result.net,
        &CheckpointMeta { seed, train_steps: result.train_steps, train_config: Some(config) },
    )?;
    let (reloaded, meta) = dqn::load_checkpoint(&path)?;
    assert_eq!(reloaded.flat_params(), result.net.flat_params());
    println!(
        "\ncheckpoint round-trip at {} ({} parameters, {} gradient updates)",
        path.display(),
        result.net.num_params(),
        meta.train_steps
    );
    Ok(())
}
