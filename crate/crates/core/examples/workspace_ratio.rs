//! Angular workspace of the device versus the human thumb by equal-area
//! sphere binning.

use sr3t::analysis::{cap_solid_angle, workspace_from_limits, WorkspaceReport};
use sr3t::synth::{band_sweep, thumb_cap};

fn main() -> sr3t::Result<()> {
    let n = 300_000;
    let device = band_sweep(n, 60.0, 1)?;
    let thumb = thumb_cap(n, 54.9, 2)?;
    let report = WorkspaceReport::compute(&device, &thumb, 40_000)?;
    print!("{}", report.to_text());

    let band = workspace_from_limits(360.0, -60.0, 60.0)?;
    let cap = cap_solid_angle(54.9);
    println!("analytic: band {band:.4} sr, cap {cap:.4} sr, ratio {:.3}", band / cap);
    Ok(())
}
