//! Position move of one geared axis under the profile-following controller.

use sr3t::plant::{axis_step, AxisCommand, AxisState, MotorAxis};

fn main() -> sr3t::Result<()> {
    let axis = MotorAxis { a_max: 20_000.0, ..Default::default() };
    println!("{} counts per output revolution", axis.counts_per_output_rev());

    let cmd = AxisCommand::position(2000, 400.0);
    let mut state = AxisState::enabled();
    let mut t = 0.0;
    println!("t(ms)  counts  deg/s");
    while state.encoder_count != 2000 || state.velocity != 0.0 {
        state = axis_step(&state, &cmd, 5.0, &axis)?;
        t += 5.0;
        if (t as i64) % 25 == 0 {
            println!("{t:5.0}  {:6}  {:6.1}", state.encoder_count, state.velocity);
        }
    }
    println!("settled at {} counts after {t} ms", state.encoder_count);
    Ok(())
}
