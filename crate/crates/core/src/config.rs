//! Scenario configuration: one TOML document bundling the room, the
//! light source, and the per-experiment sections, plus the named presets
//! shipped with the binary.

use crate::error::{Error, Result};
use crate::geometry::{BulbDesign, ClusterType, FlatClusterSpec, LayerSpec, RoomSpec};
use crate::metrics::{DbClamp, NoiseModel, SinrCdfOptions};
use crate::optimizer::{DesignSpace, EvalProtocol, Objective};
use crate::protocol::{LeaveMode, MobilityTrace, ProtocolConfig};
use crate::vec::{Vec2, Vec3};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn default_grid_resolution() -> f64 {
    0.25
}
fn default_wall_reflectivity() -> f64 {
    0.8
}
fn default_floor_reflectivity() -> f64 {
    0.3
}
fn default_bulb_radius() -> f64 {
    0.4
}
fn default_board_radius() -> f64 {
    0.0375
}
fn default_half_intensity() -> f64 {
    30.0
}
fn default_n_placements() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: f64,
    #[serde(default = "default_wall_reflectivity")]
    pub wall_reflectivity: f64,
    #[serde(default = "default_wall_reflectivity")]
    pub ceiling_reflectivity: f64,
    #[serde(default = "default_floor_reflectivity")]
    pub floor_reflectivity: f64,
}

impl RoomConfig {
    pub fn to_room(&self) -> Result<RoomSpec> {
        let room = RoomSpec {
            width: self.width,
            depth: self.depth,
            height: self.height,
            wall_reflectivity: self.wall_reflectivity,
            ceiling_reflectivity: self.ceiling_reflectivity,
            floor_reflectivity: self.floor_reflectivity,
            floor_grid_resolution: self.grid_resolution,
        };
        room.validate()?;
        Ok(room)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BulbConfig {
    /// Defaults to the ceiling center of the scenario room.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec3>,
    #[serde(default = "default_bulb_radius")]
    pub radius: f64,
    #[serde(default = "default_board_radius")]
    pub board_radius: f64,
    pub divergence_deg: f64,
    #[serde(default = "default_half_intensity")]
    pub half_intensity_deg: f64,
    pub power_per_board: f64,
    pub layers: Vec<LayerSpec>,
}

impl BulbConfig {
    pub fn to_design(&self, room: &RoomSpec) -> Result<BulbDesign> {
        let design = BulbDesign {
            center: self.center.unwrap_or_else(|| room.ceiling_center()),
            radius: self.radius,
            layers: self.layers.clone(),
            board_radius: self.board_radius,
            divergence_deg: self.divergence_deg,
            half_intensity_deg: self.half_intensity_deg,
            power_per_board: self.power_per_board,
        };
        design.validate()?;
        Ok(design)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_n_placements")]
    pub n_placements: usize,
    #[serde(default)]
    pub clamp: DbClamp,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_placements: default_n_placements(),
            clamp: DbClamp::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRoomConfig {
    /// Square floor dimensions to evaluate, meters.
    pub floor_dims: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDivergenceConfig {
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_step_deg: f64,
    /// Total source powers averaged over, watts.
    pub total_powers_w: Vec<f64>,
}

impl SweepDivergenceConfig {
    pub fn angles(&self) -> Vec<f64> {
        let mut angles = Vec::new();
        let mut a = self.angle_min_deg;
        while a <= self.angle_max_deg + 1e-9 {
            angles.push(a);
            a += self.angle_step_deg;
        }
        angles
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeRegionConfig {
    pub n_samples: usize,
    pub bin_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Inclusive (min, max) board-count range per template layer.
    pub boards_per_layer: Vec<(usize, usize)>,
    /// (min, max, step) divergence grid, degrees.
    pub divergence_deg: (f64, f64, f64),
    pub per_board_power: f64,
    /// Ascending power budgets, watts.
    pub budgets_w: Vec<f64>,
}

impl OptimizeConfig {
    pub fn to_space(&self, budget: f64, objective: Objective) -> DesignSpace {
        DesignSpace {
            boards_per_layer: self.boards_per_layer.clone(),
            divergence_deg: self.divergence_deg,
            power_constraint: budget,
            per_board_power: self.per_board_power,
            objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub cluster_type: ClusterType,
    pub x: f64,
    pub y: f64,
    pub per_led_power: f64,
    #[serde(default = "default_half_intensity")]
    pub half_intensity_deg: f64,
    #[serde(default = "ClusterConfig::default_tilt")]
    pub tilt_deg: f64,
    #[serde(default = "ClusterConfig::default_spacing")]
    pub element_spacing: f64,
}

impl ClusterConfig {
    fn default_tilt() -> f64 {
        25.0
    }
    fn default_spacing() -> f64 {
        0.1
    }

    pub fn to_spec(&self, room: &RoomSpec) -> FlatClusterSpec {
        FlatClusterSpec {
            tilt_deg: self.tilt_deg,
            element_spacing: self.element_spacing,
            per_led_power: self.per_led_power,
            half_intensity_deg: self.half_intensity_deg,
            ..FlatClusterSpec::new(
                self.cluster_type,
                Vec3::new(self.x, self.y, room.height),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrLayoutConfig {
    pub name: String,
    pub clusters: Vec<ClusterConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrConfig {
    pub layouts: Vec<SinrLayoutConfig>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub options: SinrCdfOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointConfig {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub receiver_id: u32,
    pub rf_address: String,
    pub join_time: f64,
    pub leave_time: f64,
    pub leave_mode: LeaveMode,
    pub waypoints: Vec<WaypointConfig>,
}

impl TraceConfig {
    pub fn to_trace(&self) -> MobilityTrace {
        MobilityTrace {
            receiver_id: self.receiver_id,
            rf_address: self.rf_address.clone(),
            waypoints: self
                .waypoints
                .iter()
                .map(|w| (w.t, Vec2::new(w.x, w.y)))
                .collect(),
            join_time: self.join_time,
            leave_time: self.leave_time,
            leave_mode: self.leave_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSection {
    #[serde(flatten)]
    pub config: ProtocolConfig,
    pub traces: Vec<TraceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Mandatory for any stochastic scenario; CLI `--seed` overrides.
    pub seed: u64,
    pub room: RoomConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bulb: Option<BulbConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_room: Option<SweepRoomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_divergence: Option<SweepDivergenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub three_region: Option<ThreeRegionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr: Option<SinrConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    fn validate(&self, origin: &str) -> Result<()> {
        let room = self.room.to_room()?;
        if let Some(bulb) = &self.bulb {
            bulb.to_design(&room)?;
        }
        if self.eval.n_placements == 0 {
            return Err(Error::Config {
                path: origin.to_string(),
                reason: "eval.n_placements must be >= 1".into(),
            });
        }
        if let Some(p) = &self.protocol {
            p.config.validate()?;
        }
        Ok(())
    }

    pub fn room_spec(&self) -> Result<RoomSpec> {
        self.room.to_room()
    }

    pub fn bulb_design(&self, room: &RoomSpec) -> Result<BulbDesign> {
        self.bulb
            .as_ref()
            .ok_or_else(|| Error::invalid("bulb", "scenario requires a [bulb] section"))?
            .to_design(room)
    }

    pub fn eval_protocol(&self) -> EvalProtocol {
        EvalProtocol {
            n_placements: self.eval.n_placements,
            seed: self.seed,
            clamp: self.eval.clamp,
        }
    }
}

/// Named presets, one per shipped experiment.
pub const PRESET_NAMES: &[&str] = &["fig3a", "fig3b", "fig4", "fig5", "fig6", "protocol"];

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = match name {
        "fig3a" => include_str!("../presets/fig3a.toml"),
        "fig3b" => include_str!("../presets/fig3b.toml"),
        "fig4" => include_str!("../presets/fig4.toml"),
        "fig5" => include_str!("../presets/fig5.toml"),
        "fig6" => include_str!("../presets/fig6.toml"),
        "protocol" => include_str!("../presets/protocol.toml"),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    ScenarioConfig::from_toml_str(text, &format!("preset:{name}"))
}
