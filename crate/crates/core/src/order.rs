//! Spatial and temporal order parameters and the four-way phase label.
//!
//! The spatial order parameter `s` is the population standard deviation of the radial
//! distribution function beyond the third-neighbour shell. The temporal order parameter
//! `v_bar` is the mean particle speed measured in rendered-video units: consecutive
//! snapshots are one video frame apart and the video plays at 30 frames per second.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::vec2::min_image;

pub const FRAMES_PER_SECOND: f64 = 30.0;

/// Iterations excluded from order-parameter measurement at the start of every run.
pub const DEFAULT_WARMUP: u64 = 1000;

/// Fewest RDF bins `compute_sdrdf` accepts in its range.
pub const MIN_SDRDF_BINS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelThresholds {
    /// Crystal iff `s > s0`.
    pub s0: f64,
    /// Moving iff `v_bar > v0` (length units per video-second).
    pub v0: f64,
    pub sdrdf_r_start: f64,
    pub rdf_bin_width: f64,
    pub rdf_r_max: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds::for_density(0.1)
    }
}

impl LabelThresholds {
    /// Defaults with the SDRDF window starting at 2.2 triangular-lattice spacings.
    pub fn for_density(rho_s: f64) -> Self {
        let spacing = (2.0 / (3f64.sqrt() * rho_s)).sqrt();
        LabelThresholds {
            s0: 0.4,
            v0: 0.0014,
            sdrdf_r_start: 2.2 * spacing,
            rdf_bin_width: 0.1,
            rdf_r_max: 12.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.v0 > 0.0) {
            return Err(Error::InvalidParameter("s0 and v0 must be > 0".into()));
        }
        if !(self.rdf_bin_width > 0.0 && self.rdf_r_max > self.rdf_bin_width) {
            return Err(Error::InvalidParameter(
                "need 0 < rdf_bin_width < rdf_r_max".into(),
            ));
        }
        Ok(())
    }

    pub fn bins(&self) -> RdfBins {
        RdfBins {
            bin_width: self.rdf_bin_width,
            r_max: self.rdf_r_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdfBins {
    pub bin_width: f64,
    pub r_max: f64,
}

impl RdfBins {
    pub fn count(&self) -> usize {
        (self.r_max / self.bin_width).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdfHistogram {
    pub bin_width: f64,
    pub r_max: f64,
    pub g: Vec<f64>,
    pub n_reference: usize,
}

impl RdfHistogram {
    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width
    }
}

/// Two-dimensional radial distribution function averaged over particles and snapshots.
pub fn compute_rdf(snapshots: &[Snapshot], box_l: f64, bins: RdfBins) -> Result<RdfHistogram> {
    if snapshots.is_empty() {
        return Err(Error::InvalidInput("compute_rdf needs at least one snapshot".into()));
    }
    if !(bins.bin_width > 0.0) || bins.r_max > box_l / 2.0 + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "bad RDF binning (bin_width {}, r_max {}, box_l {box_l})",
            bins.bin_width, bins.r_max
        )));
    }
    let n_bins = bins.count();
    let mut counts = vec![0u64; n_bins];
    let mut n_reference = 0usize;
    let mut density_sum = 0.0;
    for snap in snapshots {
        let pos = &snap.positions;
        if pos.is_empty() {
            return Err(Error::InvalidInput("empty snapshot".into()));
        }
        n_reference += pos.len();
        density_sum += pos.len() as f64 * pos.len() as f64 / (box_l * box_l);
        for (i, &a) in pos.iter().enumerate() {
            for &b in &pos[i + 1..] {
                let d = min_image(a, b, box_l).norm();
                if d < bins.r_max {
                    let k = (d / bins.bin_width) as usize;
                    if k < n_bins {
                        counts[k] += 2;
                    }
                }
            }
        }
    }
    // sum over snapshots of N * rho_0; equals n_reference * rho_0 at fixed N
    let g = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let r = (k as f64 + 0.5) * bins.bin_width;
            c as f64 / (density_sum * 2.0 * PI * r * bins.bin_width)
        })
        .collect();
    Ok(RdfHistogram {
        bin_width: bins.bin_width,
        r_max: bins.r_max,
        g,
        n_reference,
    })
}

/// Population standard deviation of `g` over bins centred in `[sdrdf_r_start, r_max]`.
pub fn compute_sdrdf(rdf: &RdfHistogram, thresholds: &LabelThresholds) -> Result<f64> {
    let values: Vec<f64> = rdf
        .g
        .iter()
        .enumerate()
        .filter(|&(k, _)| {
            let r = rdf.bin_center(k);
            r >= thresholds.sdrdf_r_start && r <= rdf.r_max
        })
        .map(|(_, &g)| g)
        .collect();
    if values.len() < MIN_SDRDF_BINS {
        return Err(Error::InvalidRange(format!(
            "only {} RDF bins in [{}, {}], need {MIN_SDRDF_BINS}",
            values.len(),
            thresholds.sdrdf_r_start,
            rdf.r_max
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Mean per-frame displacement magnitude, converted to length per video-second.
pub fn compute_mean_velocity(snapshots: &[Snapshot]) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidInput(
            "mean velocity needs at least two snapshots".into(),
        ));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for pair in snapshots.windows(2) {
        let (a, b) = (&pair[0].unwrapped, &pair[1].unwrapped);
        if a.len() != b.len() {
            return Err(Error::InvalidInput("particle count changed between snapshots".into()));
        }
        for (p, q) in a.iter().zip(b) {
            sum += (*q - *p).norm();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidInput("no particles".into()));
    }
    Ok(sum / count as f64 * FRAMES_PER_SECOND)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    /// Pinned crystal.
    PC,
    /// Moving crystal.
    MC,
    /// Pinned amorphous glass.
    PG,
    /// Moving liquid.
    ML,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::PC, Phase::MC, Phase::PG, Phase::ML];

    pub fn from_flags(crystal: bool, moving: bool) -> Phase {
        match (crystal, moving) {
            (true, false) => Phase::PC,
            (true, true) => Phase::MC,
            (false, false) => Phase::PG,
            (false, true) => Phase::ML,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn one_hot(self) -> [u8; 4] {
        let mut v = [0; 4];
        v[self.index()] = 1;
        v
    }

    pub fn is_crystal(self) -> bool {
        matches!(self, Phase::PC | Phase::MC)
    }

    pub fn is_moving(self) -> bool {
        matches!(self, Phase::MC | Phase::ML)
    }

    /// Two-class label for the static task: amorphous `(1, 0)`, crystal `(0, 1)`.
    pub fn crystal_one_hot(crystal: bool) -> [u8; 2] {
        if crystal {
            [0, 1]
        } else {
            [1, 0]
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::PC => "PC",
            Phase::MC => "MC",
            Phase::PG => "PG",
            Phase::ML => "ML",
        };
        f.write_str(s)
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PC" => Ok(Phase::PC),
            "MC" => Ok(Phase::MC),
            "PG" => Ok(Phase::PG),
            "ML" => Ok(Phase::ML),
            other => Err(Error::InvalidInput(format!("unknown phase label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParams {
    pub s: f64,
    pub v_bar: f64,
    pub label: Phase,
}

impl OrderParams {
    pub fn one_hot(&self) -> [u8; 4] {
        self.label.one_hot()
    }
}

/// Ties resolve to amorphous and pinned.
pub fn classify_phase(s: f64, v_bar: f64, thresholds: &LabelThresholds) -> Result<OrderParams> {
    if s.is_nan() || v_bar.is_nan() {
        return Err(Error::InvalidInput(format!(
            "cannot classify s={s}, v_bar={v_bar}"
        )));
    }
    let label = Phase::from_flags(s > thresholds.s0, v_bar > thresholds.v0);
    Ok(OrderParams { s, v_bar, label })
}

/// Order parameters of the given snapshots.
pub fn measure_snapshots(
    snapshots: &[Snapshot],
    box_l: f64,
    thresholds: &LabelThresholds,
) -> Result<OrderParams> {
    let rdf = compute_rdf(snapshots, box_l, thresholds.bins())?;
    let s = compute_sdrdf(&rdf, thresholds)?;
    let v_bar = compute_mean_velocity(snapshots)?;
    classify_phase(s, v_bar, thresholds)
}

/// Order parameters of a trajectory with the first `warmup` iterations dropped.
pub fn measure(trajectory: &Trajectory, thresholds: &LabelThresholds, warmup: u64) -> Result<OrderParams> {
    let window = trajectory.after_warmup(warmup);
    measure_snapshots(window, trajectory.box_l, thresholds)
}

/// `s` of a single configuration.
pub fn sdrdf_of_positions(
    positions: &[crate::vec2::Vec2],
    box_l: f64,
    thresholds: &LabelThresholds,
) -> Result<f64> {
    let snap = Snapshot {
        iteration: 0,
        positions: positions.to_vec(),
        unwrapped: Vec::new(),
    };
    let rdf = compute_rdf(std::slice::from_ref(&snap), box_l, thresholds.bins())?;
    compute_sdrdf(&rdf, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;

    fn snap(positions: Vec<Vec2>, unwrapped: Vec<Vec2>) -> Snapshot {
        Snapshot {
            iteration: 0,
            positions,
            unwrapped,
        }
    }

    #[test]
    fn classify_table() {
        let t = LabelThresholds::default();
        let pc = classify_phase(0.6, 0.0001, &t).unwrap();
        assert_eq!(pc.label, Phase::PC);
        assert_eq!(pc.one_hot(), [1, 0, 0, 0]);
        assert_eq!(classify_phase(0.4, 0.0014, &t).unwrap().label, Phase::PG);
        let ml = classify_phase(0.2, 0.01, &t).unwrap();
        assert_eq!(ml.label, Phase::ML);
        assert_eq!(ml.one_hot(), [0, 0, 0, 1]);
        assert_eq!(classify_phase(0.6, 0.01, &t).unwrap().one_hot(), [0, 1, 0, 0]);
        assert!(classify_phase(f64::NAN, 0.0, &t).is_err());
    }

    #[test]
    fn constant_rdf_has_zero_sdrdf() {
        let rdf = RdfHistogram {
            bin_width: 0.1,
            r_max: 12.0,
            g: vec![1.0; 120],
            n_reference: 1,
        };
        assert_eq!(compute_sdrdf(&rdf, &LabelThresholds::default()).unwrap(), 0.0);
    }

    #[test]
    fn sdrdf_needs_enough_bins() {
        let rdf = RdfHistogram {
            bin_width: 0.1,
            r_max: 8.0,
            g: vec![1.0; 80],
            n_reference: 1,
        };
        assert!(matches!(
            compute_sdrdf(&rdf, &LabelThresholds::default()),
            Err(Error::InvalidRange(_))
        ));
    }

    #[test]
    fn rdf_rejects_empty() {
        let bins = LabelThresholds::default().bins();
        assert!(compute_rdf(&[], 36.0, bins).is_err());
        assert!(compute_rdf(&[snap(vec![], vec![])], 36.0, bins).is_err());
    }

    #[test]
    fn mean_velocity_of_uniform_motion() {
        let step = Vec2::new(0.003, -0.004);
        let snaps: Vec<Snapshot> = (0..5)
            .map(|k| {
                let u = vec![Vec2::new(1.0, 1.0) + step * k as f64; 3];
                snap(u.clone(), u)
            })
            .collect();
        let v = compute_mean_velocity(&snaps).unwrap();
        assert!((v - 0.005 * 30.0).abs() < 1e-14);
        assert!(compute_mean_velocity(&snaps[..1]).is_err());
        let still = vec![snaps[0].clone(), snaps[0].clone()];
        assert_eq!(compute_mean_velocity(&still).unwrap(), 0.0);
    }

    #[test]
    fn phase_strings_round_trip() {
        for p in Phase::ALL {
            assert_eq!(p.to_string().parse::<Phase>().unwrap(), p);
        }
    }
}
