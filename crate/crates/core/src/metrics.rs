//! SIR, SINR with noise and diversity combining, illumination statistics
//! and spatial distributions over the room floor.

use crate::channel::{
    compute_gain_matrix, CoverageGate, GainMatrix, IrradianceMap, SurfaceMesh,
};
use crate::geometry::{build_flat_cluster, FlatClusterSpec, ReceiverSpec, RoomSpec, TransmitterBoard};
use crate::partition::{bisector_partition, Partition};
use crate::rng::stream_rng;
use crate::vec::Vec2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Per-receiver SIR outcome; a ratio is only formed when both powers allow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SirOutcome {
    Ratio(f64),
    /// Signal present, zero interference.
    Infinite,
    /// No board of the receiver's own partition covers it.
    ZeroSignal,
}

impl SirOutcome {
    /// dB value with declared clamps; ZeroSignal maps to the floor and
    /// Infinite to the ceiling.
    pub fn db_clamped(self, min_db: f64, max_db: f64) -> f64 {
        match self {
            SirOutcome::Ratio(r) => to_db(r).clamp(min_db, max_db),
            SirOutcome::Infinite => max_db,
            SirOutcome::ZeroSignal => min_db,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SirReport {
    pub receiver_ids: [u32; 2],
    pub sir: [SirOutcome; 2],
    /// S_{i,i}: own-partition received power, watts.
    pub signal_power: [f64; 2],
    /// S_{i,j≠i}: other-partition received power, watts.
    pub interference_power: [f64; 2],
}

/// §IV.A pipeline: LOS gains under the divergence gate, no reflections,
/// no noise. `gains` rows must match `boards`, columns the two receivers'
/// single elements.
pub fn sir_two_receivers(
    partition: &Partition,
    gains: &GainMatrix,
    boards: &[TransmitterBoard],
    receivers: &[ReceiverSpec; 2],
) -> SirReport {
    let ids = [receivers[0].id, receivers[1].id];
    let mut s = [[0.0f64; 2]; 2]; // s[i][j]: at receiver i from partition j
    for (bi, b) in boards.iter().enumerate() {
        let owner = partition.assignment[&b.id];
        let j = if owner == ids[0] { 0 } else { 1 };
        for i in 0..2 {
            s[i][j] += b.power * gains.los(bi, i);
        }
    }
    let outcome = |signal: f64, interference: f64| {
        if signal <= 0.0 {
            SirOutcome::ZeroSignal
        } else if interference <= 0.0 {
            SirOutcome::Infinite
        } else {
            SirOutcome::Ratio(signal / interference)
        }
    };
    SirReport {
        receiver_ids: ids,
        sir: [outcome(s[0][0], s[0][1]), outcome(s[1][1], s[1][0])],
        signal_power: [s[0][0], s[1][1]],
        interference_power: [s[0][1], s[1][0]],
    }
}

/// Arithmetic mean of the two linear SIRs; flags propagate.
pub fn average_sir(report: &SirReport) -> SirOutcome {
    match (report.sir[0], report.sir[1]) {
        (SirOutcome::Ratio(a), SirOutcome::Ratio(b)) => SirOutcome::Ratio((a + b) / 2.0),
        (SirOutcome::ZeroSignal, _) | (_, SirOutcome::ZeroSignal) => SirOutcome::ZeroSignal,
        _ => SirOutcome::Infinite,
    }
}

/// Receiver-front-end noise terms; all artifact defaults, the reference
/// experiments only make ordinal claims.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// PD responsivity, A/W.
    pub responsivity: f64,
    /// Effective shot coefficient 2q·R, A²/(W·Hz).
    pub shot_coefficient: f64,
    /// Thermal noise variance at the configured bandwidth, A².
    pub thermal_variance: f64,
    /// Receiver bandwidth, Hz.
    pub bandwidth: f64,
    /// Ambient optical power reaching the PD, watts.
    pub ambient_power: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        let q = 1.602_176_634e-19;
        let responsivity = 0.54;
        NoiseModel {
            responsivity,
            shot_coefficient: 2.0 * q * responsivity,
            thermal_variance: 1e-17,
            bandwidth: 1e7,
            ambient_power: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> crate::error::Result<()> {
        for (name, v) in [
            ("responsivity", self.responsivity),
            ("shot_coefficient", self.shot_coefficient),
            ("thermal_variance", self.thermal_variance),
            ("bandwidth", self.bandwidth),
            ("ambient_power", self.ambient_power),
        ] {
            if v < 0.0 {
                return Err(crate::error::Error::invalid(name, "must be >= 0"));
            }
        }
        Ok(())
    }

    fn shot_variance(&self, total_optical_w: f64) -> f64 {
        self.shot_coefficient * (total_optical_w + self.ambient_power) * self.bandwidth
    }

    /// Electrical-domain SINR, linear.
    pub fn sinr_linear(&self, signal_w: f64, interferers_w: &[f64]) -> f64 {
        let total: f64 = signal_w + interferers_w.iter().sum::<f64>();
        let mut denom = self.shot_variance(total) + self.thermal_variance;
        for &p in interferers_w {
            let i = self.responsivity * p;
            denom += i * i;
        }
        let s = self.responsivity * signal_w;
        s * s / denom
    }
}

/// Electrical-domain SINR in dB at one PD.
pub fn sinr_at(signal_w: f64, interferers_w: &[f64], noise: &NoiseModel) -> f64 {
    to_db(noise.sinr_linear(signal_w, interferers_w))
}

/// One diversity branch: optical signal power, equivalent optical
/// interference power (electrical variance is (R·interference)²), and
/// additive noise variance in A².
pub type Branch = (f64, f64, f64);

/// Maximal-ratio combining under independent per-branch interference plus
/// noise: combined SINR is the sum of branch SINRs.
pub fn combine_optimal(branches: &[Branch], noise: &NoiseModel) -> f64 {
    assert!(!branches.is_empty(), "at least one branch required");
    let total: f64 = branches
        .iter()
        .map(|&(s, i, n)| {
            let sig = noise.responsivity * s;
            let int = noise.responsivity * i;
            let denom = n + int * int;
            if denom > 0.0 {
                sig * sig / denom
            } else if sig > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    to_db(total)
}

/// Population statistics of an irradiance map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IllumStats {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

pub fn illumination_stats(map: &IrradianceMap) -> IllumStats {
    assert!(!map.values.is_empty(), "empty irradiance map");
    let n = map.values.len() as f64;
    let mean = map.values.iter().sum::<f64>() / n;
    let var = map.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    IllumStats {
        mean,
        std_dev: var.sqrt(),
        min: map.values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: map.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// dB clamps applied when averaging SIR samples: zero-signal placements
/// count as the floor, interference-free ones as the ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbClamp {
    pub min_db: f64,
    pub max_db: f64,
}

impl Default for DbClamp {
    fn default() -> Self {
        DbClamp {
            min_db: -60.0,
            max_db: 60.0,
        }
    }
}

/// Two-receiver SIR at given floor positions: bisector partition, LOS
/// gains under the divergence gate. Returns the two clamped dB values.
pub fn pair_sir_db(
    boards: &[TransmitterBoard],
    room: &RoomSpec,
    r1: Vec2,
    r2: Vec2,
    clamp: DbClamp,
) -> (f64, f64) {
    let receivers = [
        ReceiverSpec::at_floor(1, r1, 90.0),
        ReceiverSpec::at_floor(2, r2, 90.0),
    ];
    let partition = bisector_partition((1, r1), (2, r2), boards, room)
        .expect("distinct receiver positions");
    let gains = compute_gain_matrix(
        boards,
        &receivers,
        CoverageGate::Divergence,
        None,
        String::new(),
    );
    let report = sir_two_receivers(&partition, &gains, boards, &receivers);
    (
        report.sir[0].db_clamped(clamp.min_db, clamp.max_db),
        report.sir[1].db_clamped(clamp.min_db, clamp.max_db),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeRegionBin {
    pub d1: f64,
    pub d2: f64,
    pub mean_sir_db: f64,
}

/// Samples a floor position at the given distance from the floor center,
/// uniform over the admissible angles.
fn sample_at_distance<R: Rng>(room: &RoomSpec, d: f64, rng: &mut R) -> Vec2 {
    let c = room.floor_center();
    for _ in 0..100_000 {
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let p = Vec2::new(c.x + d * a.cos(), c.y + d * a.sin());
        if room.contains_floor_point(p) {
            return p;
        }
    }
    // Unreachable for d below the corner distance.
    c
}

/// Mean SIR per (d1, d2) distance bin; Fig-4-style surface. Deterministic
/// for a fixed seed regardless of parallelism.
pub fn three_region_surface(
    room: &RoomSpec,
    boards: &[TransmitterBoard],
    n_samples: usize,
    seed: u64,
    bin_width: f64,
    clamp: DbClamp,
) -> Vec<ThreeRegionBin> {
    assert!(n_samples >= 1);
    let corner = room.floor_center().distance(Vec2::new(0.0, 0.0));
    let n_bins = ((corner * 0.999) / bin_width).floor() as usize;
    let cells: Vec<(usize, usize)> = (0..n_bins)
        .flat_map(|i| (0..n_bins).map(move |j| (i, j)))
        .collect();
    cells
        .par_iter()
        .map(|&(i, j)| {
            let d1 = (i as f64 + 0.5) * bin_width;
            let d2 = (j as f64 + 0.5) * bin_width;
            let mut acc = 0.0;
            for s in 0..n_samples {
                let mut rng = stream_rng(seed, &[i as u64, j as u64, s as u64]);
                let r1 = sample_at_distance(room, d1, &mut rng);
                let mut r2 = sample_at_distance(room, d2, &mut rng);
                while r2 == r1 {
                    r2 = sample_at_distance(room, d2, &mut rng);
                }
                let (a, b) = pair_sir_db(boards, room, r1, r2, clamp);
                acc += (a + b) / 2.0;
            }
            ThreeRegionBin {
                d1,
                d2,
                mean_sir_db: acc / n_samples as f64,
            }
        })
        .collect()
}

/// Serving rules for the SINR distribution study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrScenario {
    /// All LEDs of one cluster serve the same user.
    S1,
    /// Each LED serves a distinct user; co-located LEDs interfere.
    S2,
    /// Scenario-2 receiver with a 7-PD diversity array and optimal
    /// combining.
    S2Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrCdfOptions {
    /// Floor grid step for receiver positions, meters.
    pub grid_resolution: f64,
    pub receiver_height: f64,
    pub fov_deg: f64,
    pub max_reflection_order: usize,
    pub patch_size: f64,
    /// Tilt of the six ring PDs of the diversity receiver, degrees.
    pub rx_ring_tilt_deg: f64,
    pub clamp: DbClamp,
}

impl Default for SinrCdfOptions {
    fn default() -> Self {
        SinrCdfOptions {
            grid_resolution: 0.5,
            receiver_height: 0.0,
            fov_deg: 40.0,
            max_reflection_order: 4,
            patch_size: 0.5,
            rx_ring_tilt_deg: 40.0,
            clamp: DbClamp {
                min_db: -60.0,
                max_db: 100.0,
            },
        }
    }
}

/// Flat-cluster layout with per-board cluster membership.
#[derive(Debug, Clone)]
pub struct ClusterLayout {
    pub boards: Vec<TransmitterBoard>,
    /// cluster index per board.
    pub cluster_of: Vec<usize>,
}

impl ClusterLayout {
    pub fn build(specs: &[FlatClusterSpec]) -> crate::error::Result<Self> {
        let mut boards = Vec::new();
        let mut cluster_of = Vec::new();
        let mut id = 0u32;
        for (ci, spec) in specs.iter().enumerate() {
            for mut b in build_flat_cluster(spec)? {
                b.id = id;
                id += 1;
                cluster_of.push(ci);
                boards.push(b);
            }
        }
        Ok(ClusterLayout { boards, cluster_of })
    }
}

/// Empirical CDF of SINR over the floor grid: sorted (sinr_db,
/// cumulative_probability) pairs.
pub fn sinr_cdf(
    room: &RoomSpec,
    layout: &ClusterLayout,
    scenario: SinrScenario,
    noise: &NoiseModel,
    opts: &SinrCdfOptions,
) -> Vec<(f64, f64)> {
    let samples = sinr_samples(room, layout, scenario, noise, opts);
    let mut sorted = samples;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i as f64 + 1.0) / n))
        .collect()
}

/// Per-grid-point SINR values (unsorted, row-major over the grid).
pub fn sinr_samples(
    room: &RoomSpec,
    layout: &ClusterLayout,
    scenario: SinrScenario,
    noise: &NoiseModel,
    opts: &SinrCdfOptions,
) -> Vec<f64> {
    let nx = (room.width / opts.grid_resolution).ceil().max(1.0) as usize;
    let ny = (room.depth / opts.grid_resolution).ceil().max(1.0) as usize;
    let sx = room.width / nx as f64;
    let sy = room.depth / ny as f64;
    let receivers: Vec<ReceiverSpec> = (0..nx * ny)
        .map(|idx| {
            let ix = idx % nx;
            let iy = idx / nx;
            let p = crate::vec::Vec3::new(
                (ix as f64 + 0.5) * sx,
                (iy as f64 + 0.5) * sy,
                opts.receiver_height,
            );
            match scenario {
                SinrScenario::S2Combined => ReceiverSpec::multi_element(
                    idx as u32,
                    p,
                    6,
                    opts.rx_ring_tilt_deg,
                    opts.fov_deg,
                ),
                _ => ReceiverSpec {
                    id: idx as u32,
                    position: p,
                    elements: vec![crate::geometry::PdElement::upward(opts.fov_deg)],
                    rf_address: format!("grid:{idx}"),
                },
            }
        })
        .collect();

    let reflections = if opts.max_reflection_order >= 1 {
        Some(SurfaceMesh::build(room, opts.patch_size).expect("valid room/patch size"))
    } else {
        None
    };
    let gains = compute_gain_matrix(
        &layout.boards,
        &receivers,
        CoverageGate::Fov,
        reflections.as_ref().map(|m| (m, opts.max_reflection_order)),
        String::new(),
    );

    let n_elems_per_rx = receivers[0].elements.len();
    (0..receivers.len())
        .into_par_iter()
        .map(|ri| {
            let e0 = ri * n_elems_per_rx;
            // Powers at the upward element.
            let powers: Vec<f64> = layout
                .boards
                .iter()
                .enumerate()
                .map(|(bi, b)| b.power * gains.total(bi, e0))
                .collect();
            let best = powers
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if powers[best] <= 0.0 {
                return opts.clamp.min_db;
            }
            let serving_cluster = layout.cluster_of[best];
            let db = match scenario {
                SinrScenario::S1 => {
                    let signal: f64 = powers
                        .iter()
                        .zip(&layout.cluster_of)
                        .filter(|&(_, &c)| c == serving_cluster)
                        .map(|(p, _)| p)
                        .sum();
                    let interferers: Vec<f64> = powers
                        .iter()
                        .zip(&layout.cluster_of)
                        .filter(|&(_, &c)| c != serving_cluster)
                        .map(|(&p, _)| p)
                        .collect();
                    sinr_at(signal, &interferers, noise)
                }
                SinrScenario::S2 => {
                    let interferers: Vec<f64> = powers
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != best)
                        .map(|(_, &p)| p)
                        .collect();
                    sinr_at(powers[best], &interferers, noise)
                }
                SinrScenario::S2Combined => {
                    let branches: Vec<Branch> = (0..n_elems_per_rx)
                        .map(|e| {
                            let flat = e0 + e;
                            let mut signal = 0.0;
                            let mut interference_sq = 0.0;
                            let mut total = 0.0;
                            for (bi, b) in layout.boards.iter().enumerate() {
                                let p = b.power * gains.total(bi, flat);
                                total += p;
                                if bi == best {
                                    signal = p;
                                } else {
                                    interference_sq += p * p;
                                }
                            }
                            let branch_noise =
                                noise.thermal_variance + noise.shot_variance(total);
                            (signal, interference_sq.sqrt(), branch_noise)
                        })
                        .collect();
                    combine_optimal(&branches, noise)
                }
            };
            db.clamp(opts.clamp.min_db, opts.clamp.max_db)
        })
        .collect()
}

/// Median of an empirical CDF produced by `sinr_cdf`.
pub fn cdf_median(cdf: &[(f64, f64)]) -> f64 {
    cdf.iter()
        .find(|&&(_, p)| p >= 0.5)
        .map(|&(v, _)| v)
        .unwrap_or(f64::NAN)
}

/// Writes a CDF as CSV: sinr_db, cumulative_probability.
pub fn write_cdf_csv<W: std::io::Write>(w: &mut W, cdf: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "sinr_db,cumulative_probability")?;
    for &(v, p) in cdf {
        writeln!(w, "{v:.4},{p:.6}")?;
    }
    Ok(())
}

/// Brute-force SINR maximization over a logarithmic grid of combining
/// weight vectors. Reference oracle for `combine_optimal`; intentionally
/// kept on a separate code path.
pub fn weight_grid_oracle(branches: &[Branch], noise: &NoiseModel) -> f64 {
    let r = noise.responsivity;
    let a: Vec<f64> = branches.iter().map(|&(s, _, _)| r * s).collect();
    let v: Vec<f64> = branches
        .iter()
        .map(|&(_, i, n)| n + (r * i) * (r * i))
        .collect();
    // Per-axis weights: zero plus a log-spaced sweep over eight decades.
    let n_steps = 120usize;
    let axis: Vec<f64> = std::iter::once(0.0)
        .chain((0..=n_steps).map(|k| 10f64.powf(-8.0 + 8.0 * k as f64 / n_steps as f64)))
        .collect();
    assert_eq!(branches.len(), 3, "oracle is written for 3-branch sets");
    let mut best = f64::NEG_INFINITY;
    for &w0 in &axis {
        for &w1 in &axis {
            for &w2 in &axis {
                let num = w0 * a[0] + w1 * a[1] + w2 * a[2];
                let den = w0 * w0 * v[0] + w1 * w1 * v[1] + w2 * w2 * v[2];
                if den > 0.0 {
                    let s = num * num / den;
                    if s > best {
                        best = s;
                    }
                }
            }
        }
    }
    to_db(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_bulb, BulbDesign, ClusterType, LayerSpec};
    use crate::vec::Vec3;
    use approx::assert_relative_eq;

    fn room() -> RoomSpec {
        RoomSpec::square(6.0, 3.0, 0.25)
    }

    fn bulb_boards(divergence: f64) -> Vec<TransmitterBoard> {
        build_bulb(&BulbDesign {
            center: room().ceiling_center(),
            radius: 0.4,
            layers: vec![
                LayerSpec::new(30.0, 8),
                LayerSpec::new(45.0, 8),
                LayerSpec::new(70.0, 8),
            ],
            board_radius: 0.0375,
            divergence_deg: divergence,
            half_intensity_deg: 30.0,
            power_per_board: 0.02,
        })
        .unwrap()
    }

    #[test]
    fn db_round_trip() {
        for x in [1e-6, 0.5, 1.0, 42.0, 1e9] {
            assert_relative_eq!(from_db(to_db(x)), x, max_relative = 1e-12);
        }
    }

    #[test]
    fn symmetric_receivers_equal_sir() {
        let boards = bulb_boards(30.0);
        let rm = room();
        let (a, b) = pair_sir_db(
            &boards,
            &rm,
            Vec2::new(2.0, 3.0),
            Vec2::new(4.0, 3.0),
            DbClamp::default(),
        );
        assert_relative_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn two_board_hand_expansion() {
        // Two straight-down boards over each receiver; expand every gain
        // by hand and compare at 1e-12 relative.
        let rm = room();
        let mk = |id: u32, x: f64| TransmitterBoard {
            id,
            position: Vec3::new(x, 3.0, 3.0),
            orientation: Vec3::new(0.0, 0.0, -1.0),
            divergence_deg: 60.0,
            half_intensity_deg: 60.0,
            power: 0.02,
            led_positions: vec![],
        };
        let boards = vec![mk(0, 2.0), mk(1, 4.0)];
        let r1 = Vec2::new(2.0, 3.0);
        let r2 = Vec2::new(4.0, 3.0);
        let receivers = [
            ReceiverSpec::at_floor(1, r1, 90.0),
            ReceiverSpec::at_floor(2, r2, 90.0),
        ];
        let partition = bisector_partition((1, r1), (2, r2), &boards, &rm).unwrap();
        let gains = compute_gain_matrix(
            &boards,
            &receivers,
            CoverageGate::Divergence,
            None,
            String::new(),
        );
        let report = sir_two_receivers(&partition, &gains, &boards, &receivers);

        // Hand expansion, m = 1.
        let a = std::f64::consts::PI * 0.0375 * 0.0375;
        let gain = |dx: f64| {
            let d2 = dx * dx + 9.0;
            let d = d2.sqrt();
            let cos = 3.0 / d;
            // Divergence gate: 60° cone.
            if cos < 60f64.to_radians().cos() {
                0.0
            } else {
                2.0 / (2.0 * std::f64::consts::PI * d2) * cos * cos * a
            }
        };
        let s11 = 0.02 * gain(0.0);
        let s12 = 0.02 * gain(2.0);
        match report.sir[0] {
            SirOutcome::Ratio(g) => assert_relative_eq!(g, s11 / s12, max_relative = 1e-12),
            other => panic!("expected ratio, got {other:?}"),
        }
    }

    #[test]
    fn zero_signal_flagged() {
        // Both boards aim at receiver 1's half; receiver 2 far outside any
        // cone ends up with no own-partition signal.
        let rm = room();
        let mk = |id: u32, x: f64| TransmitterBoard {
            id,
            position: Vec3::new(x, 3.0, 3.0),
            orientation: Vec3::new(0.0, 0.0, -1.0),
            divergence_deg: 5.0,
            half_intensity_deg: 30.0,
            power: 0.02,
            led_positions: vec![],
        };
        let boards = vec![mk(0, 1.0), mk(1, 1.2)];
        let r1 = Vec2::new(1.0, 3.0);
        let r2 = Vec2::new(5.5, 3.0);
        let receivers = [
            ReceiverSpec::at_floor(1, r1, 90.0),
            ReceiverSpec::at_floor(2, r2, 90.0),
        ];
        let partition = bisector_partition((1, r1), (2, r2), &boards, &rm).unwrap();
        let gains = compute_gain_matrix(
            &boards,
            &receivers,
            CoverageGate::Divergence,
            None,
            String::new(),
        );
        let report = sir_two_receivers(&partition, &gains, &boards, &receivers);
        assert_eq!(report.sir[1], SirOutcome::ZeroSignal);
    }

    #[test]
    fn average_sir_cases() {
        let mk = |a, b| SirReport {
            receiver_ids: [1, 2],
            sir: [a, b],
            signal_power: [1.0, 1.0],
            interference_power: [1.0, 1.0],
        };
        assert_eq!(
            average_sir(&mk(SirOutcome::Ratio(2.0), SirOutcome::Ratio(4.0))),
            SirOutcome::Ratio(3.0)
        );
        assert_eq!(
            average_sir(&mk(SirOutcome::Ratio(5.0), SirOutcome::Ratio(5.0))),
            SirOutcome::Ratio(5.0)
        );
        assert_eq!(
            average_sir(&mk(SirOutcome::Infinite, SirOutcome::Ratio(5.0))),
            SirOutcome::Infinite
        );
        assert_eq!(
            average_sir(&mk(SirOutcome::ZeroSignal, SirOutcome::Infinite)),
            SirOutcome::ZeroSignal
        );
    }

    #[test]
    fn sir_invariant_under_power_scaling() {
        let rm = room();
        let boards = bulb_boards(25.0);
        let scaled: Vec<_> = boards
            .iter()
            .map(|b| TransmitterBoard {
                power: b.power * 37.0,
                ..b.clone()
            })
            .collect();
        let r1 = Vec2::new(1.7, 2.1);
        let r2 = Vec2::new(4.3, 4.6);
        let a = pair_sir_db(&boards, &rm, r1, r2, DbClamp::default());
        let b = pair_sir_db(&scaled, &rm, r1, r2, DbClamp::default());
        assert_relative_eq!(a.0, b.0, epsilon = 1e-9);
        assert_relative_eq!(a.1, b.1, epsilon = 1e-9);
    }

    #[test]
    fn sinr_at_thermal_only() {
        let noise = NoiseModel {
            responsivity: 1.0,
            shot_coefficient: 0.0,
            thermal_variance: 1e-14,
            bandwidth: 1e7,
            ambient_power: 0.0,
        };
        // R·P = 1e-6 A, σ² = 1e-14 A² → 20 dB.
        assert_relative_eq!(sinr_at(1e-6, &[], &noise), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn sinr_equal_power_interferer_near_zero_db() {
        let noise = NoiseModel {
            responsivity: 1.0,
            shot_coefficient: 0.0,
            thermal_variance: 1e-30,
            bandwidth: 1e7,
            ambient_power: 0.0,
        };
        assert_relative_eq!(sinr_at(1e-6, &[1e-6], &noise), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn sinr_brute_force_small_instances() {
        let noise = NoiseModel::default();
        let mut rng = stream_rng(11, &[0]);
        for _ in 0..50 {
            let signal = rng.gen_range(1e-9..1e-5);
            let interferers: Vec<f64> =
                (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0.0..1e-5)).collect();
            let got = noise.sinr_linear(signal, &interferers);
            // Term-by-term accumulation.
            let r = noise.responsivity;
            let total = signal + interferers.iter().sum::<f64>();
            let mut denom =
                noise.shot_coefficient * total * noise.bandwidth + noise.thermal_variance;
            for &p in &interferers {
                denom += (r * p) * (r * p);
            }
            let want = (r * signal) * (r * signal) / denom;
            assert_relative_eq!(got, want, max_relative = 1e-9);
        }
    }

    #[test]
    fn sinr_monotone_in_interference_set() {
        let noise = NoiseModel::default();
        let interferers = [1e-6, 2e-6, 5e-7];
        let full = noise.sinr_linear(1e-6, &interferers);
        let reduced = noise.sinr_linear(1e-6, &interferers[..2]);
        assert!(reduced >= full);
    }

    #[test]
    fn combine_equal_branches() {
        let noise = NoiseModel::default();
        let branch = (1e-6, 0.0, 1e-14);
        let single = combine_optimal(&[branch], &noise);
        let seven = combine_optimal(&vec![branch; 7], &noise);
        assert_relative_eq!(seven - single, to_db(7.0), epsilon = 1e-9);
    }

    #[test]
    fn combine_shadowed_branches_contribute_nothing() {
        let noise = NoiseModel::default();
        let live = (1e-6, 2e-7, 1e-14);
        let dead = (0.0, 3e-7, 1e-14);
        let mut branches = vec![live];
        branches.extend(vec![dead; 6]);
        assert_relative_eq!(
            combine_optimal(&branches, &noise),
            combine_optimal(&[live], &noise),
            epsilon = 1e-12
        );
    }

    #[test]
    fn combine_permutation_invariant() {
        let noise = NoiseModel::default();
        let a = vec![(1e-6, 1e-7, 1e-14), (5e-7, 0.0, 2e-14), (2e-6, 4e-7, 1e-15)];
        let mut b = a.clone();
        b.reverse();
        assert_relative_eq!(
            combine_optimal(&a, &noise),
            combine_optimal(&b, &noise),
            epsilon = 1e-12
        );
    }

    #[test]
    fn combine_matches_weight_grid_search() {
        // Brute-force maximization of SINR over combining weights.
        let noise = NoiseModel::default();
        let mut rng = stream_rng(5, &[1]);
        for _ in 0..20 {
            let branches: Vec<Branch> = (0..3)
                .map(|_| {
                    (
                        rng.gen_range(1e-7..1e-5),
                        rng.gen_range(0.0..1e-5),
                        rng.gen_range(1e-16..1e-13),
                    )
                })
                .collect();
            let got = combine_optimal(&branches, &noise);
            let best = weight_grid_oracle(&branches, &noise);
            // MRC upper-bounds any weight choice; the grid comes close.
            assert!(got + 1e-9 >= best);
            assert!(got - best < 0.1, "got {got}, grid best {best}");
        }
    }

    #[test]
    fn illumination_stats_examples() {
        let uniform = IrradianceMap {
            nx: 2,
            ny: 2,
            cell_x: 1.0,
            cell_y: 1.0,
            values: vec![3.0; 4],
        };
        let s = illumination_stats(&uniform);
        assert_eq!((s.mean, s.std_dev, s.min, s.max), (3.0, 0.0, 3.0, 3.0));

        let two = IrradianceMap {
            nx: 2,
            ny: 1,
            cell_x: 1.0,
            cell_y: 1.0,
            values: vec![1.0, 3.0],
        };
        let s = illumination_stats(&two);
        assert_eq!((s.mean, s.std_dev), (2.0, 1.0));
    }

    #[test]
    fn illumination_stats_match_two_pass_oracle() {
        let mut rng = stream_rng(3, &[9]);
        let values: Vec<f64> = (0..257).map(|_| rng.gen_range(0.0..10.0)).collect();
        let map = IrradianceMap {
            nx: 257,
            ny: 1,
            cell_x: 1.0,
            cell_y: 1.0,
            values: values.clone(),
        };
        let s = illumination_stats(&map);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        assert_relative_eq!(s.mean, mean, max_relative = 1e-12);
        assert_relative_eq!(s.std_dev, var.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn three_region_symmetric_in_swap() {
        let rm = room();
        let boards = bulb_boards(45.0);
        let bins = three_region_surface(&rm, &boards, 200, 7, 0.5, DbClamp::default());
        let n = (bins.len() as f64).sqrt() as usize;
        let mut max_diff = 0.0f64;
        let mut mean_diff = 0.0f64;
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                let a = bins[i * n + j].mean_sir_db;
                let b = bins[j * n + i].mean_sir_db;
                max_diff = max_diff.max((a - b).abs());
                if i < j {
                    mean_diff += a - b;
                    count += 1;
                }
            }
        }
        eprintln!("swap asymmetry: max {max_diff:.3} dB, mean {:.3} dB", mean_diff / count as f64);
        // Per-bin values are sample means of a heavy-tailed clamped
        // distribution; symmetry holds in expectation, so bound the
        // worst bin loosely and the triangle-averaged bias tightly.
        assert!(max_diff < 10.0, "swap asymmetry too large: {max_diff}");
        assert!((mean_diff / count as f64).abs() < 1.5);
    }

    #[test]
    fn three_region_single_sample_matches_pair_sir() {
        let rm = room();
        let boards = bulb_boards(45.0);
        let clamp = DbClamp::default();
        let bins = three_region_surface(&rm, &boards, 1, 99, 0.5, clamp);
        // Recompute bin (2, 3) with the same RNG stream derivation.
        let n = ((rm.floor_center().distance(Vec2::new(0.0, 0.0)) * 0.999) / 0.5).floor() as usize;
        let (i, j) = (2usize, 3usize);
        let mut rng = stream_rng(99, &[i as u64, j as u64, 0]);
        let r1 = sample_at_distance(&rm, (i as f64 + 0.5) * 0.5, &mut rng);
        let r2 = sample_at_distance(&rm, (j as f64 + 0.5) * 0.5, &mut rng);
        let (a, b) = pair_sir_db(&boards, &rm, r1, r2, clamp);
        assert_relative_eq!(bins[i * n + j].mean_sir_db, (a + b) / 2.0, epsilon = 1e-12);
    }

    fn tiny_layout(cluster_type: ClusterType) -> ClusterLayout {
        let specs = vec![
            FlatClusterSpec {
                per_led_power: 1.0,
                ..FlatClusterSpec::new(cluster_type, Vec3::new(2.0, 2.0, 4.0))
            },
            FlatClusterSpec {
                per_led_power: 1.0,
                ..FlatClusterSpec::new(cluster_type, Vec3::new(6.0, 6.0, 4.0))
            },
        ];
        ClusterLayout::build(&specs).unwrap()
    }

    fn cdf_opts() -> SinrCdfOptions {
        SinrCdfOptions {
            grid_resolution: 1.0,
            max_reflection_order: 0,
            ..SinrCdfOptions::default()
        }
    }

    #[test]
    fn cdf_monotone_zero_to_one() {
        let rm = RoomSpec::square(8.0, 4.0, 0.5);
        let cdf = sinr_cdf(
            &rm,
            &tiny_layout(ClusterType::ThreeLed),
            SinrScenario::S1,
            &NoiseModel::default(),
            &cdf_opts(),
        );
        let mut last = 0.0;
        for &(_, p) in &cdf {
            assert!(p >= last);
            last = p;
        }
        assert_relative_eq!(last, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn s2_dominated_by_s1_pointwise() {
        let rm = RoomSpec::square(8.0, 4.0, 0.5);
        let layout = tiny_layout(ClusterType::SevenLed);
        let noise = NoiseModel::default();
        let opts = cdf_opts();
        let s1 = sinr_samples(&rm, &layout, SinrScenario::S1, &noise, &opts);
        let s2 = sinr_samples(&rm, &layout, SinrScenario::S2, &noise, &opts);
        for (a, b) in s1.iter().zip(&s2) {
            assert!(b <= a, "S2 sample {b} exceeds S1 sample {a}");
        }
    }

    #[test]
    fn s2_combined_at_least_s2() {
        let rm = RoomSpec::square(8.0, 4.0, 0.5);
        let layout = tiny_layout(ClusterType::SevenLed);
        let noise = NoiseModel::default();
        let opts = cdf_opts();
        let s2 = sinr_samples(&rm, &layout, SinrScenario::S2, &noise, &opts);
        let s2c = sinr_samples(&rm, &layout, SinrScenario::S2Combined, &noise, &opts);
        for (a, b) in s2.iter().zip(&s2c) {
            assert!(b + 1e-9 >= *a, "combined {b} below single-PD {a}");
        }
    }

    #[test]
    fn s2_equals_s1_for_singleton_clusters() {
        // One LED per cluster: the scenarios coincide.
        let specs: Vec<FlatClusterSpec> = [(2.0, 2.0), (6.0, 2.0), (4.0, 6.0)]
            .iter()
            .map(|&(x, y)| FlatClusterSpec {
                tilt_deg: 0.0,
                element_spacing: 0.0,
                ..FlatClusterSpec::new(ClusterType::SevenLed, Vec3::new(x, y, 4.0))
            })
            .collect();
        // SEVEN_LED with zero spacing and tilt collapses to co-located
        // identical LEDs, so build singleton clusters by hand instead.
        let mut boards = Vec::new();
        let mut cluster_of = Vec::new();
        for (ci, s) in specs.iter().enumerate() {
            let mut b = build_flat_cluster(s).unwrap().swap_remove(0);
            b.id = ci as u32;
            boards.push(b);
            cluster_of.push(ci);
        }
        let layout = ClusterLayout { boards, cluster_of };
        let rm = RoomSpec::square(8.0, 4.0, 0.5);
        let noise = NoiseModel::default();
        let opts = cdf_opts();
        let s1 = sinr_samples(&rm, &layout, SinrScenario::S1, &noise, &opts);
        let s2 = sinr_samples(&rm, &layout, SinrScenario::S2, &noise, &opts);
        for (a, b) in s1.iter().zip(&s2) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }
}
