//! Post-hoc analysis: angular workspace, range increase, latency statistics
//! and design budgets.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::CalibrationSet;
use crate::engine::{LatencyConfig, LatencyRecord};
use crate::error::{Error, Result};
use crate::kinematics::{required_torque, theta_for_key, FingerGeometry, MountPose};
use crate::piano::{KeyColor, KeyboardLayout};
use crate::plant::MotorAxis;

/// Fingertip directions seen from the pivot, one unit vector each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DirectionSet {
    dirs: Vec<[f64; 3]>,
}

pub const DIRECTION_HEADER: &str = "x,y,z";
const NORM_TOLERANCE: f64 = 1e-9;

impl DirectionSet {
    pub fn new(dirs: Vec<[f64; 3]>) -> Result<Self> {
        for (i, d) in dirs.iter().enumerate() {
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if !((norm - 1.0).abs() <= NORM_TOLERANCE) {
                return Err(Error::input(format!("direction {i} has norm {norm}, expected 1")));
            }
        }
        Ok(Self { dirs })
    }

    pub fn dirs(&self) -> &[[f64; 3]] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::input(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["x", "y", "z"] {
            return Err(Error::input(format!("direction header must be `{DIRECTION_HEADER}`")));
        }
        let mut dirs = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| Error::input(format!("row {}: {e}", i + 1)))?;
            let mut d = [0.0; 3];
            for (slot, field) in d.iter_mut().zip(row.iter()) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::input(format!("row {}: `{field}` is not a number", i + 1)))?;
            }
            dirs.push(d);
        }
        Self::new(dirs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Input(reason) => Error::parse(path, reason),
            other => other,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "{DIRECTION_HEADER}")?;
        for d in &self.dirs {
            writeln!(w, "{:.12},{:.12},{:.12}", d[0], d[1], d[2])?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::io(path, e))
    }
}

/// Partition of the unit sphere into `n` cells of equal area.
///
/// Latitude bands are spaced evenly in colatitude, then each band edge is
/// nudged so the band holds a whole number of cells; cells within a band
/// split it evenly in azimuth.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    n_bins: usize,
    /// Band edges in z, descending from 1 to -1.
    z_edges: Vec<f64>,
    /// Index of each band's first cell, plus a final entry equal to `n_bins`.
    offsets: Vec<usize>,
}

impl SphereGrid {
    pub const MIN_BINS: usize = 100;

    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins < Self::MIN_BINS {
            return Err(Error::input(format!("n_bins must be at least {}, got {n_bins}", Self::MIN_BINS)));
        }
        let n = n_bins as f64;
        // An even band count puts an edge on the equator.
        let bands = (2.0 * ((PI * n).sqrt() / 4.0).round()).max(2.0) as usize;
        let mut offsets = Vec::with_capacity(bands + 1);
        let mut z_edges = Vec::with_capacity(bands + 1);
        for i in 0..=bands {
            let colat = PI * i as f64 / bands as f64;
            let below = (n * (1.0 - colat.cos()) / 2.0).round() as usize;
            let below = below.clamp(offsets.last().copied().unwrap_or(0), n_bins);
            offsets.push(below);
            z_edges.push(1.0 - 2.0 * below as f64 / n);
        }
        offsets.dedup();
        z_edges.dedup();
        Ok(Self { n_bins, z_edges, offsets })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_bands(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn cell_area(&self) -> f64 {
        4.0 * PI / self.n_bins as f64
    }

    /// Area of one band in steradians.
    pub fn band_area(&self, band: usize) -> f64 {
        2.0 * PI * (self.z_edges[band] - self.z_edges[band + 1])
    }

    pub fn cells_in_band(&self, band: usize) -> usize {
        self.offsets[band + 1] - self.offsets[band]
    }

    /// Cell containing direction `d`.
    pub fn cell_of(&self, d: [f64; 3]) -> usize {
        let z = d[2].clamp(-1.0, 1.0);
        let interior = &self.z_edges[1..self.z_edges.len() - 1];
        let band = interior.partition_point(|&edge| edge > z);
        let k = self.cells_in_band(band);
        let frac = (d[1].atan2(d[0]) + PI) / (2.0 * PI);
        let j = ((frac * k as f64).floor() as usize).min(k - 1);
        self.offsets[band] + j
    }
}

/// Solid angle covered by `dirs`: occupied cells of an `n_bins` equal-area
/// grid times the cell area.
pub fn solid_angle(dirs: &DirectionSet, n_bins: usize) -> Result<f64> {
    if dirs.is_empty() {
        return Err(Error::input("direction set is empty"));
    }
    let grid = SphereGrid::new(n_bins)?;
    let mut occupied = vec![false; n_bins];
    for &d in dirs.dirs() {
        occupied[grid.cell_of(d)] = true;
    }
    let count = occupied.iter().filter(|&&o| o).count();
    Ok(count as f64 * grid.cell_area())
}

/// Analytic solid angle swept by `azimuth_span` degrees of azimuth between
/// two elevations.
pub fn workspace_from_limits(azimuth_span: f64, elev_min: f64, elev_max: f64) -> Result<f64> {
    if !(0.0..=360.0).contains(&azimuth_span) {
        return Err(Error::input(format!("azimuth span {azimuth_span} outside [0, 360]")));
    }
    for e in [elev_min, elev_max] {
        if !(-90.0..=90.0).contains(&e) {
            return Err(Error::input(format!("elevation {e} outside [-90, 90]")));
        }
    }
    if elev_min > elev_max {
        return Err(Error::input(format!("elevation range [{elev_min}, {elev_max}] is inverted")));
    }
    Ok(azimuth_span.to_radians() * (elev_max.to_radians().sin() - elev_min.to_radians().sin()))
}

/// Area of a spherical cap of `half_angle` degrees.
pub fn cap_solid_angle(half_angle: f64) -> f64 {
    2.0 * PI * (1.0 - half_angle.to_radians().cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceReport {
    pub n_bins: usize,
    pub device_directions: usize,
    pub thumb_directions: usize,
    pub device_sr: f64,
    pub thumb_sr: f64,
}

impl WorkspaceReport {
    pub fn compute(device: &DirectionSet, thumb: &DirectionSet, n_bins: usize) -> Result<Self> {
        Ok(Self {
            n_bins,
            device_directions: device.len(),
            thumb_directions: thumb.len(),
            device_sr: solid_angle(device, n_bins)?,
            thumb_sr: solid_angle(thumb, n_bins)?,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.device_sr / self.thumb_sr
    }

    pub fn to_text(&self) -> String {
        format!(
            "angular workspace ({} equal-area bins)\n  device: {:.4} sr from {} directions\n  thumb:  {:.4} sr from {} directions\n  ratio:  {:.3}\n",
            self.n_bins,
            self.device_sr,
            self.device_directions,
            self.thumb_sr,
            self.thumb_directions,
            self.ratio()
        )
    }

    pub fn to_kv(&self) -> String {
        format!(
            "n_bins = {}\ndevice_directions = {}\nthumb_directions = {}\ndevice_sr = {:.6}\nthumb_sr = {:.6}\nratio = {:.6}\n",
            self.n_bins,
            self.device_directions,
            self.thumb_directions,
            self.device_sr,
            self.thumb_sr,
            self.ratio()
        )
    }
}

/// Where the player's own hand stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandConfig {
    /// mm, keyboard frame: the rightmost point the pinkie can reach
    pub pinkie_x: f64,
}

impl Default for HandConfig {
    fn default() -> Self {
        Self { pinkie_x: 528.75 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeReport {
    pub pinkie_x: f64,
    /// Keys, both colours, whose centre the finger can reach.
    pub reachable: Vec<usize>,
    /// Reachable white keys to the right of the pinkie.
    pub added_white: Vec<usize>,
}

impl RangeReport {
    pub fn whole_notes(&self) -> usize {
        self.added_white.len()
    }

    pub fn to_text(&self, layout: &KeyboardLayout) -> String {
        let names = |keys: &[usize]| {
            keys.iter().filter_map(|&k| layout.key(k)).map(|k| k.note_name()).collect::<Vec<_>>().join(" ")
        };
        format!(
            "range increase\n  pinkie reach: x = {:.2} mm\n  reachable keys: {}\n  added white keys: {}\n  whole notes beyond pinkie: {}\n",
            self.pinkie_x,
            names(&self.reachable),
            names(&self.added_white),
            self.whole_notes()
        )
    }

    pub fn to_kv(&self) -> String {
        let list = |keys: &[usize]| keys.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        format!(
            "pinkie_x = {:.3}\nreachable_keys = {}\nadded_white_keys = {}\nwhole_notes = {}\n",
            self.pinkie_x,
            list(&self.reachable),
            list(&self.added_white),
            self.whole_notes()
        )
    }
}

/// Keys whose centre the hovering finger can reach inside the calibrated
/// horizontal encoder span, and how many white ones lie beyond the pinkie.
pub fn range_increase(
    mount: &MountPose,
    geometry: &FingerGeometry,
    calib: &CalibrationSet,
    layout: &KeyboardLayout,
    axis_h: &MotorAxis,
    hand: &HandConfig,
) -> RangeReport {
    let lo = calib.enc_h_min.min(calib.enc_h_max);
    let hi = calib.enc_h_min.max(calib.enc_h_max);
    let reachable: Vec<usize> = layout
        .keys()
        .iter()
        .filter(|key| {
            theta_for_key(key.center_x, mount, geometry)
                .map(|theta| axis_h.encoder_counts(theta - mount.home_theta_h))
                .is_ok_and(|counts| (lo..=hi).contains(&counts))
        })
        .map(|key| key.index)
        .collect();
    let added_white = reachable
        .iter()
        .copied()
        .filter(|&i| layout.keys()[i].color == KeyColor::White && layout.keys()[i].center_x > hand.pinkie_x)
        .collect();
    RangeReport { pinkie_x: hand.pinkie_x, reachable, added_white }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single record.
    pub stddev: f64,
    pub max: f64,
    pub budget_ms: f64,
}

impl LatencyStats {
    pub fn over_budget(&self) -> bool {
        self.mean > self.budget_ms
    }

    pub fn to_text(&self) -> String {
        format!(
            "intention-to-action latency over {} presses\n  mean:   {:.2} ms\n  stddev: {:.2} ms\n  max:    {:.2} ms\n  budget: {:.2} ms ({})\n",
            self.n,
            self.mean,
            self.stddev,
            self.max,
            self.budget_ms,
            if self.over_budget() { "EXCEEDED" } else { "met" }
        )
    }

    pub fn to_kv(&self) -> String {
        format!(
            "n = {}\nmean_ms = {:.3}\nstddev_ms = {:.3}\nmax_ms = {:.3}\nbudget_ms = {:.3}\nover_budget = {}\n",
            self.n,
            self.mean,
            self.stddev,
            self.max,
            self.budget_ms,
            self.over_budget()
        )
    }
}

pub fn latency_stats(records: &[LatencyRecord], budget_ms: f64) -> Result<LatencyStats> {
    if records.is_empty() {
        return Err(Error::input("no intention-to-action pairs in the log"));
    }
    let n = records.len();
    let delays: Vec<f64> = records.iter().map(LatencyRecord::delay).collect();
    let mean = delays.iter().sum::<f64>() / n as f64;
    let stddev = if n > 1 {
        (delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let max = delays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LatencyStats { n, mean, stddev, max, budget_ms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub latency_ms: f64,
    pub mass_g: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { latency_ms: 80.0, mass_g: 350.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    /// bill-of-materials total
    pub mass_g: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self { mass_g: 310.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub n_bins: usize,
    /// directions per generated workspace fixture
    pub samples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { n_bins: 150_000, samples: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub latency_budget_ms: f64,
    pub measured_mean_ms: f64,
    /// False when the latency is the nominal stage sum rather than a measurement.
    pub latency_measured: bool,
    pub mass_budget_g: f64,
    pub configured_mass_g: f64,
    /// N·m at the vertical joint for the key force at hover
    pub required_torque: f64,
    pub torque_margin: f64,
}

impl BudgetReport {
    pub fn latency_pass(&self) -> bool {
        self.measured_mean_ms <= self.latency_budget_ms
    }

    pub fn mass_pass(&self) -> bool {
        self.configured_mass_g <= self.mass_budget_g
    }

    pub fn torque_pass(&self) -> bool {
        self.torque_margin >= 1.0
    }

    pub fn all_pass(&self) -> bool {
        self.latency_pass() && self.mass_pass() && self.torque_pass()
    }

    pub fn to_text(&self) -> String {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let source = if self.latency_measured { "measured" } else { "nominal" };
        let mut out = String::from("design budget\n");
        let _ = writeln!(
            out,
            "  latency: {:.2} ms {source} vs {:.2} ms budget  {}",
            self.measured_mean_ms,
            self.latency_budget_ms,
            verdict(self.latency_pass())
        );
        let _ = writeln!(
            out,
            "  mass:    {:.1} g vs {:.1} g budget  {}",
            self.configured_mass_g,
            self.mass_budget_g,
            verdict(self.mass_pass())
        );
        let _ = writeln!(
            out,
            "  torque:  {:.2} mN·m required, margin {:.2}  {}",
            self.required_torque * 1000.0,
            self.torque_margin,
            verdict(self.torque_pass())
        );
        out
    }

    pub fn to_kv(&self) -> String {
        format!(
            "latency_budget_ms = {:.3}\nmeasured_mean_ms = {:.3}\nlatency_measured = {}\nlatency_pass = {}\nmass_budget_g = {:.3}\nconfigured_mass_g = {:.3}\nmass_pass = {}\nrequired_torque_mnm = {:.4}\ntorque_margin = {:.4}\ntorque_pass = {}\n",
            self.latency_budget_ms,
            self.measured_mean_ms,
            self.latency_measured,
            self.latency_pass(),
            self.mass_budget_g,
            self.configured_mass_g,
            self.mass_pass(),
            self.required_torque * 1000.0,
            self.torque_margin,
            self.torque_pass()
        )
    }
}

/// Everything the budget check reads.
#[derive(Debug, Clone, Copy)]
pub struct BudgetInputs<'a> {
    pub budget: &'a BudgetConfig,
    pub device: &'a DeviceConfig,
    pub latency: &'a LatencyConfig,
    pub layout: &'a KeyboardLayout,
    pub geometry: &'a FingerGeometry,
    pub mount: &'a MountPose,
    pub axis_v: &'a MotorAxis,
}

/// Check latency, mass and torque against the design budgets. Without a
/// measured mean the nominal stage sum stands in for it.
pub fn budget_check(inputs: BudgetInputs<'_>, measured_mean_ms: Option<f64>) -> Result<BudgetReport> {
    let required = required_torque(inputs.layout.config().press_force, inputs.mount.home_theta_v, inputs.geometry)?;
    Ok(BudgetReport {
        latency_budget_ms: inputs.budget.latency_ms,
        measured_mean_ms: measured_mean_ms.unwrap_or_else(|| inputs.latency.total()),
        latency_measured: measured_mean_ms.is_some(),
        mass_budget_g: inputs.budget.mass_g,
        configured_mass_g: inputs.device.mass_g,
        required_torque: required,
        torque_margin: inputs.axis_v.torque_margin(required)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piano::LayoutConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> [f64; 3] {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        [s * phi.cos(), s * phi.sin(), z]
    }

    fn sample(n: usize, seed: u64, keep: impl Fn(&[f64; 3]) -> bool) -> DirectionSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let d = uniform(&mut rng);
            if keep(&d) {
                out.push(d);
            }
        }
        DirectionSet::new(out).unwrap()
    }

    #[test]
    fn grid_cells_have_equal_area() {
        for n in [100, 1_000, 10_000, 12_345, 100_000] {
            let grid = SphereGrid::new(n).unwrap();
            let total: usize = (0..grid.n_bands()).map(|b| grid.cells_in_band(b)).sum();
            assert_eq!(total, n);
            for b in 0..grid.n_bands() {
                let per_cell = grid.band_area(b) / grid.cells_in_band(b) as f64;
                assert!((per_cell - grid.cell_area()).abs() < 1e-12 * n as f64, "n={n} band {b}");
            }
        }
        assert!(SphereGrid::new(99).is_err());
    }

    #[test]
    fn grid_lookup_is_consistent() {
        let grid = SphereGrid::new(1_000).unwrap();
        assert!(grid.cell_of([0.0, 0.0, 1.0]) < grid.cells_in_band(0));
        let last = grid.n_bands() - 1;
        assert!(grid.cell_of([0.0, 0.0, -1.0]) >= 1_000 - grid.cells_in_band(last));
        assert_eq!(grid.cell_of([-1.0, -1e-12, -1e-9]), grid.offsets[grid.n_bands() / 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let d = uniform(&mut rng);
            let cell = grid.cell_of(d);
            let band = grid.offsets.partition_point(|&o| o <= cell) - 1;
            assert!(d[2] <= grid.z_edges[band] + 1e-15 && d[2] >= grid.z_edges[band + 1] - 1e-15);
        }
    }

    #[test]
    fn full_sphere_and_hemisphere() {
        let full = sample(1_000_000, 1, |_| true);
        let sr = solid_angle(&full, 10_000).unwrap();
        assert!((sr / (4.0 * PI) - 1.0).abs() < 0.02, "{sr}");

        let upper = sample(1_000_000, 2, |d| d[2] >= 0.0);
        let sr = solid_angle(&upper, 10_000).unwrap();
        assert!((sr / (2.0 * PI) - 1.0).abs() < 0.02, "{sr}");
    }

    #[test]
    fn band_matches_analytic_and_monte_carlo() {
        let lim = 60f64.to_radians().sin();
        let band = sample(1_000_000, 4, |d| d[2].abs() <= lim);
        let binned = solid_angle(&band, 10_000).unwrap();

        let analytic = 4.0 * PI * lim;
        assert!((analytic - 10.883).abs() < 5e-4);

        // Membership oracle: fraction of uniform directions inside the band.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hits = (0..1_000_000).filter(|_| uniform(&mut rng)[2].abs() <= lim).count();
        let monte_carlo = 4.0 * PI * hits as f64 / 1e6;

        assert!((binned / analytic - 1.0).abs() < 0.02, "{binned}");
        assert!((binned / monte_carlo - 1.0).abs() < 0.02, "{binned} vs {monte_carlo}");
    }

    #[test]
    fn solid_angle_rejects_empty_and_tiny_grids() {
        assert!(solid_angle(&DirectionSet::default(), 1_000).is_err());
        let one = DirectionSet::new(vec![[1.0, 0.0, 0.0]]).unwrap();
        assert!(solid_angle(&one, 50).is_err());
        assert!((solid_angle(&one, 1_000).unwrap() - 4.0 * PI / 1_000.0).abs() < 1e-15);
    }

    #[test]
    fn direction_set_validation_and_csv() {
        assert!(DirectionSet::new(vec![[1.0, 1e-3, 0.0]]).is_err());
        let s = 0.5f64.sqrt();
        let set = DirectionSet::new(vec![[1.0, 0.0, 0.0], [s, s, 0.0], [0.0, 0.6, -0.8]]).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let back = DirectionSet::read_csv(buf.as_slice()).unwrap();
        for (a, b) in set.dirs().iter().zip(back.dirs()) {
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }
        assert!(DirectionSet::read_csv("a,b,c\n1,0,0\n".as_bytes()).is_err());
        assert!(DirectionSet::read_csv("x,y,z\n2,0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn workspace_limits_examples() {
        assert!((workspace_from_limits(360.0, -90.0, 90.0).unwrap() - 4.0 * PI).abs() < 1e-12);
        let band = workspace_from_limits(360.0, -60.0, 60.0).unwrap();
        assert!((band - 2.0 * PI * 2.0 * 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((band - 10.883).abs() < 1e-3);
        assert_eq!(workspace_from_limits(0.0, -60.0, 60.0).unwrap(), 0.0);
        assert!(workspace_from_limits(360.0, 60.0, -60.0).is_err());
        assert!(workspace_from_limits(400.0, 0.0, 10.0).is_err());
        assert!((cap_solid_angle(54.9) - 2.670).abs() < 1e-3);
    }

    fn calib(h_min: i64, h_max: i64) -> CalibrationSet {
        CalibrationSet {
            flex_min: 2482,
            flex_max: 1869,
            enc_h_min: h_min,
            enc_h_max: h_max,
            y_min: 1229,
            y_max: 1351,
            z_min: 1474,
            z_max: 1720,
            enc_hover: 0,
            enc_pressed: 397,
        }
    }

    fn default_range(c: &CalibrationSet, mount: &MountPose) -> RangeReport {
        let layout = KeyboardLayout::new(LayoutConfig::default()).unwrap();
        range_increase(mount, &FingerGeometry::default(), c, &layout, &MotorAxis::default(), &HandConfig::default())
    }

    #[test]
    fn range_increase_default_fixture() {
        let report = default_range(&calib(-690, -2570), &MountPose::default());
        assert_eq!(report.added_white, vec![39, 41, 43, 44]);
        assert_eq!(report.reachable, vec![39, 40, 41, 42, 43, 44]);
        assert_eq!(report.whole_notes(), 4);
    }

    #[test]
    fn range_increase_collapsed_calibration() {
        let report = default_range(&calib(-690, -690), &MountPose::default());
        assert!(report.whole_notes() <= 1);
    }

    #[test]
    fn range_increase_is_span_limited() {
        // Shifting the mount one white key moves every reachable key with it.
        let shifted = MountPose { base_x: 520.0 + 23.5, ..Default::default() };
        let report = default_range(&calib(-690, -2570), &shifted);
        assert_eq!(report.whole_notes(), 4);
        assert_eq!(report.added_white, vec![41, 43, 44, 46]);
    }

    fn rec(delay: f64) -> LatencyRecord {
        LatencyRecord { intention_t: 1000.0, action_t: 1000.0 + delay }
    }

    #[test]
    fn latency_stats_examples() {
        let one = latency_stats(&[rec(85.0)], 80.0).unwrap();
        assert_eq!((one.mean, one.stddev, one.max), (85.0, 0.0, 85.0));
        assert!(one.over_budget());

        let two = latency_stats(&[rec(80.0), rec(90.0)], 80.0).unwrap();
        assert_eq!(two.mean, 85.0);
        assert!((two.stddev - 50f64.sqrt()).abs() < 1e-12);
        assert!(two.over_budget());

        let under = latency_stats(&[rec(75.0); 5], 80.0).unwrap();
        assert_eq!(under.mean, 75.0);
        assert!(!under.over_budget());

        assert!(latency_stats(&[], 80.0).is_err());
    }

    fn budget(device: &DeviceConfig, latency: &LatencyConfig, measured: Option<f64>) -> BudgetReport {
        let layout = KeyboardLayout::new(LayoutConfig::default()).unwrap();
        let inputs = BudgetInputs {
            budget: &BudgetConfig::default(),
            device,
            latency,
            layout: &layout,
            geometry: &FingerGeometry::default(),
            mount: &MountPose::default(),
            axis_v: &MotorAxis::default(),
        };
        budget_check(inputs, measured).unwrap()
    }

    #[test]
    fn budget_defaults() {
        let r = budget(&DeviceConfig::default(), &LatencyConfig::default(), None);
        assert!((r.required_torque - 0.5 * 0.08225).abs() < 1e-12);
        assert!((r.torque_margin - 3.89).abs() < 0.01);
        assert!(r.torque_pass());
        assert_eq!(r.measured_mean_ms, 85.0);
        assert!(!r.latency_pass());
        assert!(r.mass_pass());
        assert!(!r.all_pass());
        assert!(r.to_text().contains("FAIL"));
    }

    #[test]
    fn budget_mass_and_all_pass() {
        let heavy = budget(&DeviceConfig { mass_g: 400.0 }, &LatencyConfig::default(), None);
        assert!(!heavy.mass_pass());
        let fast = LatencyConfig { mech_motion: 30.0, ..Default::default() };
        let ok = budget(&DeviceConfig::default(), &fast, None);
        assert!(ok.all_pass());
        let measured = budget(&DeviceConfig::default(), &LatencyConfig::default(), Some(79.0));
        assert!(measured.latency_pass() && measured.latency_measured);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn solid_angle_bounded_and_monotone(seed in 0u64..1000, n in 1usize..400, extra in 1usize..400) {
            let base = sample(n, seed, |_| true);
            let more = sample(extra, seed + 10_000, |_| true);
            let mut union = base.dirs().to_vec();
            union.extend_from_slice(more.dirs());
            let union = DirectionSet::new(union).unwrap();
            let a = solid_angle(&base, 1_000).unwrap();
            let b = solid_angle(&union, 1_000).unwrap();
            proptest::prop_assert!(a <= b);
            proptest::prop_assert!(b <= 4.0 * PI + 1e-12);
        }

        #[test]
        fn latency_mean_is_permutation_invariant(delays in proptest::collection::vec(0.0f64..200.0, 1..40), rot in 0usize..40) {
            let recs: Vec<LatencyRecord> = delays.iter().map(|&d| rec(d)).collect();
            let mut rotated = recs.clone();
            rotated.rotate_left(rot % recs.len());
            rotated.reverse();
            let a = latency_stats(&recs, 80.0).unwrap();
            let b = latency_stats(&rotated, 80.0).unwrap();
            proptest::prop_assert!((a.mean - b.mean).abs() < 1e-9);
        }
    }
}
