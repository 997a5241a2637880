//! Samples the quintic-blend reference trajectory and prints the motion
//! profile, then verifies the hand-off into the terminal hover is smooth
//! through the fourth derivative.
//!
//! Run with: cargo run --example reference_profile

use anyhow::Result;
use gainsched::trajectory::ReferenceTrajectory;
use nalgebra::Vector3;

fn main() -> Result<()> {
    let r0 = Vector3::new(0.0, 0.0, 0.0);
    let r_star = Vector3::new(1.0, 1.0, 1.5);
    let t_f = 5.0;
    let traj = ReferenceTrajectory::new(r0, r_star, t_f)?;

    println!("blend from {:?} to {:?} over {t_f} s", r0.as_slice(), r_star.as_slice());
    println!("\n{:>5}  {:>8} {:>8} {:>8} {:>8} {:>8}", "t [s]", "z [m]", "vz", "az", "jz", "sz");
    let mut t = 0.0;
    while t <= 6.0 + 1e-9 {
        let s = traj.sample(t);
        println!(
            "{t:>5.2}  {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            s.pos.z, s.vel.z, s.acc.z, s.jerk.z, s.snap.z
        );
        t += 0.5;
    }

    // Derivatives 1..4 must vanish as the blend meets the hover hold.
    let eps = 1e-7;
    let end = traj.sample(t_f - eps);
    println!("\nderivative magnitudes just before arrival (t = T_f - {eps:.0e}):");
    println!("  |v| = {:.3e} m/s", end.vel.norm());
    println!("  |a| = {:.3e} m/s^2", end.acc.norm());
    println!("  |j| = {:.3e} m/s^3", end.jerk.norm());
    println!("  |s| = {:.3e} m/s^4", end.snap.norm());

    let held = traj.sample(t_f + 3.0);
    println!("\nheld position after arrival: {:?} (target {:?})", held.pos.as_slice(), r_star.as_slice());
    Ok(())
}
