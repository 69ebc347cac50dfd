//! Rooms, hemispherical multi-layer bulbs, flat ceiling LED clusters and
//! receivers, all in one coordinate frame: floor at z = 0, ceiling at
//! z = room height, bulb center on the ceiling plane.

use crate::error::{Error, Result};
use crate::vec::{Vec2, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// x extent in meters.
    pub width: f64,
    /// y extent in meters.
    pub depth: f64,
    /// z extent in meters; floor at z = 0, ceiling at z = height.
    pub height: f64,
    pub wall_reflectivity: f64,
    pub ceiling_reflectivity: f64,
    pub floor_reflectivity: f64,
    /// Edge length of one floor evaluation grid cell, meters.
    pub floor_grid_resolution: f64,
}

impl RoomSpec {
    /// Square-floor room with the common indoor reflectivity defaults.
    pub fn square(floor_dim: f64, height: f64, grid_resolution: f64) -> Self {
        RoomSpec {
            width: floor_dim,
            depth: floor_dim,
            height,
            wall_reflectivity: 0.8,
            ceiling_reflectivity: 0.8,
            floor_reflectivity: 0.3,
            floor_grid_resolution: grid_resolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width <= 0.0 || self.depth <= 0.0 || self.height <= 0.0 {
            return Err(Error::invalid("room", "dimensions must be positive"));
        }
        for (name, r) in [
            ("wall_reflectivity", self.wall_reflectivity),
            ("ceiling_reflectivity", self.ceiling_reflectivity),
            ("floor_reflectivity", self.floor_reflectivity),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(name, "must be in [0, 1]"));
            }
        }
        if self.floor_grid_resolution <= 0.0
            || self.floor_grid_resolution > self.width.min(self.depth)
        {
            return Err(Error::invalid(
                "floor_grid_resolution",
                "must be positive and no larger than min(width, depth)",
            ));
        }
        Ok(())
    }

    pub fn ceiling_center(&self) -> Vec3 {
        Vec3::new(self.width / 2.0, self.depth / 2.0, self.height)
    }

    pub fn floor_center(&self) -> Vec2 {
        Vec2::new(self.width / 2.0, self.depth / 2.0)
    }

    pub fn contains_floor_point(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.depth
    }
}

/// One ring of boards on the hemisphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Elevation from the downward bulb normal, degrees; (0, 90].
    pub elevation_deg: f64,
    pub board_count: usize,
    /// Azimuth of the first board, degrees.
    pub azimuth_offset_deg: f64,
}

impl LayerSpec {
    pub fn new(elevation_deg: f64, board_count: usize) -> Self {
        LayerSpec {
            elevation_deg,
            board_count,
            azimuth_offset_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulbDesign {
    /// Bulb center, on the ceiling plane.
    pub center: Vec3,
    /// Hemisphere radius, meters.
    pub radius: f64,
    pub layers: Vec<LayerSpec>,
    /// Transmitter board disk radius, meters.
    pub board_radius: f64,
    /// Coverage cone half-angle, degrees.
    pub divergence_deg: f64,
    /// Lambertian half-intensity angle, degrees.
    pub half_intensity_deg: f64,
    /// Transmit power of each board, watts.
    pub power_per_board: f64,
}

impl BulbDesign {
    pub fn validate(&self) -> Result<()> {
        if self.radius <= 0.0 {
            return Err(Error::invalid("bulb.radius", "must be positive"));
        }
        if self.board_radius <= 0.0 {
            return Err(Error::invalid("bulb.board_radius", "must be positive"));
        }
        if !(0.0..=90.0).contains(&self.divergence_deg) || self.divergence_deg == 0.0 {
            return Err(Error::invalid("bulb.divergence_deg", "must be in (0, 90]"));
        }
        if self.half_intensity_deg <= 0.0 || self.half_intensity_deg >= 90.0 {
            return Err(Error::invalid(
                "bulb.half_intensity_deg",
                "must be in (0, 90)",
            ));
        }
        if self.power_per_board < 0.0 {
            return Err(Error::invalid("bulb.power_per_board", "must be >= 0"));
        }
        if self.layers.is_empty() {
            return Err(Error::invalid("bulb.layers", "at least one layer required"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.elevation_deg <= 0.0 || layer.elevation_deg > 90.0 {
                return Err(Error::invalid(
                    &format!("bulb.layers[{i}].elevation_deg"),
                    "must be in (0, 90]",
                ));
            }
            if layer.board_count < 1 {
                return Err(Error::invalid(
                    &format!("bulb.layers[{i}].board_count"),
                    "must be >= 1",
                ));
            }
            if !(0.0..360.0).contains(&layer.azimuth_offset_deg) {
                return Err(Error::invalid(
                    &format!("bulb.layers[{i}].azimuth_offset_deg"),
                    "must be in [0, 360)",
                ));
            }
        }
        Ok(())
    }

    pub fn total_boards(&self) -> usize {
        self.layers.iter().map(|l| l.board_count).sum()
    }

    /// Stable parameter fingerprint for gain-matrix cache validation.
    pub fn fingerprint(&self) -> String {
        format!(
            "bulb:c=({:.9},{:.9},{:.9});r={:.9};br={:.9};div={:.9};hi={:.9};p={:.9};layers={}",
            self.center.x,
            self.center.y,
            self.center.z,
            self.radius,
            self.board_radius,
            self.divergence_deg,
            self.half_intensity_deg,
            self.power_per_board,
            self.layers
                .iter()
                .map(|l| format!("({:.9},{},{:.9})", l.elevation_deg, l.board_count, l.azimuth_offset_deg))
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

/// One LED board: a group of identically modulated LEDs acting as a single
/// directional beam source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterBoard {
    /// Local ID `k` carried in SEARCH frames.
    pub id: u32,
    pub position: Vec3,
    /// Boresight unit vector.
    pub orientation: Vec3,
    pub divergence_deg: f64,
    pub half_intensity_deg: f64,
    /// Transmit power, watts.
    pub power: f64,
    /// LED positions within the board disk; collapsed to the board center
    /// for channel computation, kept for rendering.
    pub led_positions: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterType {
    ThreeLed,
    SevenLed,
}

/// Flat multi-LED ceiling transmitter (scenario study layouts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatClusterSpec {
    pub cluster_type: ClusterType,
    /// Cluster center on the ceiling plane.
    pub center: Vec3,
    /// Outer-element tilt from the downward normal, degrees.
    pub tilt_deg: f64,
    /// Ring radius of the outer elements, meters.
    pub element_spacing: f64,
    pub per_led_power: f64,
    pub half_intensity_deg: f64,
    /// Coverage half-angle; wide by default since the scenario experiments
    /// gate on receiver FOV instead.
    pub divergence_deg: f64,
}

impl FlatClusterSpec {
    pub fn new(cluster_type: ClusterType, center: Vec3) -> Self {
        FlatClusterSpec {
            cluster_type,
            center,
            tilt_deg: 25.0,
            element_spacing: 0.1,
            per_led_power: 1.0,
            half_intensity_deg: 30.0,
            divergence_deg: 90.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=90.0).contains(&self.tilt_deg) {
            return Err(Error::invalid("cluster.tilt_deg", "must be in [0, 90]"));
        }
        if self.element_spacing < 0.0 {
            return Err(Error::invalid("cluster.element_spacing", "must be >= 0"));
        }
        if self.per_led_power < 0.0 {
            return Err(Error::invalid("cluster.per_led_power", "must be >= 0"));
        }
        if self.half_intensity_deg <= 0.0 || self.half_intensity_deg >= 90.0 {
            return Err(Error::invalid(
                "cluster.half_intensity_deg",
                "must be in (0, 90)",
            ));
        }
        Ok(())
    }

    pub fn led_count(&self) -> usize {
        match self.cluster_type {
            ClusterType::ThreeLed => 3,
            ClusterType::SevenLed => 7,
        }
    }
}

/// Photodetector element of a receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdElement {
    pub normal: Vec3,
    /// Detector aperture radius, meters.
    pub aperture_radius: f64,
    /// Field-of-view half-angle, degrees.
    pub fov_deg: f64,
}

impl PdElement {
    /// Upward-facing detector with the default 3.75 cm aperture.
    pub fn upward(fov_deg: f64) -> Self {
        PdElement {
            normal: Vec3::new(0.0, 0.0, 1.0),
            aperture_radius: 0.0375,
            fov_deg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.normal.is_unit(1e-9) {
            return Err(Error::invalid("pd.normal", "must be a unit vector"));
        }
        if self.aperture_radius <= 0.0 {
            return Err(Error::invalid("pd.aperture_radius", "must be positive"));
        }
        if self.fov_deg <= 0.0 || self.fov_deg > 90.0 {
            return Err(Error::invalid("pd.fov_deg", "must be in (0, 90]"));
        }
        Ok(())
    }

    pub fn aperture_area(&self) -> f64 {
        std::f64::consts::PI * self.aperture_radius * self.aperture_radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSpec {
    pub id: u32,
    pub position: Vec3,
    pub elements: Vec<PdElement>,
    /// MAC-like address used by the association protocol.
    pub rf_address: String,
}

impl ReceiverSpec {
    /// Single upward PD at a floor position.
    pub fn at_floor(id: u32, p: Vec2, fov_deg: f64) -> Self {
        ReceiverSpec {
            id,
            position: Vec3::new(p.x, p.y, 0.0),
            elements: vec![PdElement::upward(fov_deg)],
            rf_address: format!("rx:{id:02}"),
        }
    }

    /// One upward element plus `ring` elements tilted toward evenly spaced
    /// azimuths (diversity receiver).
    pub fn multi_element(id: u32, position: Vec3, ring: usize, tilt_deg: f64, fov_deg: f64) -> Self {
        let mut elements = vec![PdElement::upward(fov_deg)];
        let tilt = tilt_deg.to_radians();
        for i in 0..ring {
            let az = (i as f64) * 2.0 * std::f64::consts::PI / ring as f64;
            elements.push(PdElement {
                normal: Vec3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), tilt.cos()),
                aperture_radius: 0.0375,
                fov_deg,
            });
        }
        ReceiverSpec {
            id,
            position,
            elements,
            rf_address: format!("rx:{id:02}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::invalid("receiver.elements", "at least one element"));
        }
        for e in &self.elements {
            e.validate()?;
        }
        Ok(())
    }

    pub fn floor_position(&self) -> Vec2 {
        self.position.xy()
    }
}

/// Result of intersecting a board boresight ray with the floor plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorProjection {
    pub point: Vec2,
    /// False when the intersection lies outside the floor rectangle.
    pub in_room: bool,
}

fn spherical_direction(elevation_rad: f64, azimuth_rad: f64) -> Vec3 {
    Vec3::new(
        elevation_rad.sin() * azimuth_rad.cos(),
        elevation_rad.sin() * azimuth_rad.sin(),
        -elevation_rad.cos(),
    )
}

/// Places the boards of a hemispherical bulb; ids run sequentially
/// layer by layer.
pub fn build_bulb(design: &BulbDesign) -> Result<Vec<TransmitterBoard>> {
    design.validate()?;
    let mut boards = Vec::with_capacity(design.total_boards());
    let mut id = 0u32;
    for layer in &design.layers {
        let theta = layer.elevation_deg.to_radians();
        for i in 0..layer.board_count {
            let phi = (layer.azimuth_offset_deg
                + (i as f64) * 360.0 / layer.board_count as f64)
                .to_radians();
            let dir = spherical_direction(theta, phi);
            let position = design.center + dir * design.radius;
            boards.push(TransmitterBoard {
                id,
                position,
                orientation: dir,
                divergence_deg: design.divergence_deg,
                half_intensity_deg: design.half_intensity_deg,
                power: design.power_per_board,
                led_positions: vec![position],
            });
            id += 1;
        }
    }
    // Overlap check over all pairs; board counts stay in the hundreds.
    for i in 0..boards.len() {
        for j in (i + 1)..boards.len() {
            let dist = (boards[i].position - boards[j].position).norm();
            if dist < 2.0 * design.board_radius {
                return Err(Error::BoardOverlap {
                    a: boards[i].id,
                    b: boards[j].id,
                    dist,
                    min: 2.0 * design.board_radius,
                });
            }
        }
    }
    Ok(boards)
}

/// Builds a flat ceiling cluster; every LED becomes its own board since the
/// scenario experiments modulate them independently.
pub fn build_flat_cluster(spec: &FlatClusterSpec) -> Result<Vec<TransmitterBoard>> {
    spec.validate()?;
    let tilt = spec.tilt_deg.to_radians();
    let mut boards = Vec::new();
    let mut push = |id: u32, position: Vec3, orientation: Vec3| {
        boards.push(TransmitterBoard {
            id,
            position,
            orientation,
            divergence_deg: spec.divergence_deg,
            half_intensity_deg: spec.half_intensity_deg,
            power: spec.per_led_power,
            led_positions: vec![position],
        });
    };
    match spec.cluster_type {
        ClusterType::ThreeLed => {
            for i in 0..3u32 {
                let az = (i as f64) * 120f64.to_radians();
                let position = spec.center
                    + Vec3::new(az.cos(), az.sin(), 0.0) * spec.element_spacing;
                let orientation =
                    Vec3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), -tilt.cos());
                push(i, position, orientation);
            }
        }
        ClusterType::SevenLed => {
            push(0, spec.center, Vec3::new(0.0, 0.0, -1.0));
            for i in 0..6u32 {
                let az = (i as f64) * 60f64.to_radians();
                let position = spec.center
                    + Vec3::new(az.cos(), az.sin(), 0.0) * spec.element_spacing;
                let orientation =
                    Vec3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), -tilt.cos());
                push(i + 1, position, orientation);
            }
        }
    }
    Ok(boards)
}

/// Intersects the boresight ray with the floor plane; `None` when the ray
/// never reaches the floor.
pub fn boresight_floor_projection(
    board: &TransmitterBoard,
    room: &RoomSpec,
) -> Option<FloorProjection> {
    if board.orientation.z >= 0.0 {
        return None;
    }
    let t = board.position.z / (-board.orientation.z);
    let point = Vec2::new(
        board.position.x + t * board.orientation.x,
        board.position.y + t * board.orientation.y,
    );
    Some(FloorProjection {
        point,
        in_room: room.contains_floor_point(point),
    })
}
