//! Builds the default gain library, certifies every entry, and prints the
//! stability margins plus the componentwise gain envelope.
//!
//! Run with: cargo run --example certify_table

use anyhow::Result;
use gainsched::gains::{
    build_action_table, decode_action, DEFAULT_NOMINAL_POLES, DEFAULT_SCALE_GRID,
    DEFAULT_YAW_GAINS,
};

fn main() -> Result<()> {
    let table = build_action_table(DEFAULT_NOMINAL_POLES, DEFAULT_SCALE_GRID, DEFAULT_YAW_GAINS)?;
    println!("certified {} gain vectors", table.len());

    let mut worst_margin = f64::NEG_INFINITY;
    let mut worst_index = 0;
    let mut tightest_gap = f64::INFINITY;
    for i in 0..table.len() {
        let cert = table.certificate(i);
        if cert.max_real > worst_margin {
            worst_margin = cert.max_real;
            worst_index = i;
        }
        tightest_gap = tightest_gap.min(cert.min_gap);
    }
    let levels = decode_action(worst_index);
    println!(
        "worst closed-loop margin: max Re(lambda) = {worst_margin:.4} at action {worst_index} \
         (levels jerk/accel/vel/pos = {levels:?})"
    );
    println!("tightest eigenvalue separation: {tightest_gap:.4}");

    println!("\ncomponentwise gain envelope over all actions:");
    let envelope = table.envelope();
    let names = [
        "k1  (jerk x)", "k2  (accel x)", "k3  (vel x)", "k4  (pos x)",
        "k5  (jerk y)", "k6  (accel y)", "k7  (vel y)", "k8  (pos y)",
        "k9  (jerk z)", "k10 (accel z)", "k11 (vel z)", "k12 (pos z)",
        "k13 (yaw rate)", "k14 (yaw angle)",
    ];
    for (name, range) in names.iter().zip(envelope) {
        println!("  {name:<15} [{:>10.4}, {:>10.4}]", range[0], range[1]);
    }

    println!("\nsample entries:");
    for index in [0, 312, 624] {
        let k = table.gain(index).as_array();
        println!("  action {index:>3}: k = {k:?}");
    }
    Ok(())
}
