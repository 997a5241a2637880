//! Holds one certified gain vector for a full episode and prints how the
//! closed loop settles onto the hover target.
//!
//! Run with: cargo run --example fixed_gain_rollout

use anyhow::Result;
use gainsched::dqn::fixed_action_episode;
use gainsched::dynamics::{QuadState, VehicleParams};
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
    let params = VehicleParams::default();
    let config = EpisodeConfig::default();
    let mut env = QuadEnv::new(Arc::clone(&table), params, config.clone())?;

    // Start 1 m from the hover target along each horizontal axis.
    let start = config.r_star + Vector3::new(-1.0, -1.0, 0.0) / 2f64.sqrt();
    env.reset_from(QuadState::hover_at(start));

    let action = 407;
    println!(
        "holding action {action} (levels {:?}) from {:?} toward {:?}",
        decode_action(action),
        start.as_slice(),
        config.r_star.as_slice()
    );
    println!("gains: {:?}\n", table.gain(action).as_array());

    let outcomes = fixed_action_episode(&mut env, action);
    println!("{:>6} {:>12} {:>12} {:>12} {:>10}", "t [s]", "|e_r| [m]", "|v| [m/s]", "|w| [rad/s]", "reward");
    for out in outcomes.iter().step_by(100).chain(outcomes.last()) {
        let e_r = out
            .info
            .errors
            .as_ref()
            .map(|e| e.e_r.norm())
            .unwrap_or(f64::NAN);
        println!(
            "{:>6.2} {:>12.6} {:>12.6} {:>12.6} {:>10.5}",
            out.info.t,
            e_r,
            out.info.state.v.norm(),
            out.info.state.omega.norm(),
            out.transition.reward
        );
    }

    let last = outcomes.last().expect("nonempty episode");
    let final_err = last.info.errors.as_ref().map(|e| e.e_r.norm()).unwrap_or(f64::NAN);
    println!(
        "\nsettled: |e_r| = {final_err:.2e} m, |omega| = {:.2e} rad/s after {} steps ({:?})",
        last.info.state.omega.norm(),
        outcomes.len(),
        last.transition.termination
    );
    Ok(())
}
