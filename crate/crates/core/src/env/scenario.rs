//! Scenario descriptions and their TOML file format.
//!
//! ```toml
//! name = "lane_change"
//! road_length = 100.0      # m
//! lane_width = 3.5         # m
//! lane_count = 2
//! target_lon = 95.0        # episode succeeds once the ego passes this
//! target_lat = 5.25        # preferred lateral position (lane cost)
//!
//! [ego_spawn]
//! x_lon = 0.0
//! x_lat = 1.75
//! v_lon = 10.0             # optional: yaw, yaw_rate (default 0)
//!
//! [[obstacles]]
//! kind = "car"             # "car" | "pedestrian"
//! x_lon = 35.0
//! x_lat = 1.75
//! radius = 1.2
//!
//! [[obstacles]]
//! kind = "pedestrian"
//! x_lon = 50.0
//! x_lat = -0.5
//! radius = 0.4
//! lat_speed_max = 0.5      # per-episode lateral speed ~ U[-max, max]
//! lat_range = [-1.5, 1.0]  # the pedestrian stops at the ends of this band
//! ```
//!
//! Coordinates: `x_lon` runs along the road, `x_lat` is measured from the
//! right road boundary (0) towards the left boundary (`lane_count * lane_width`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Car,
    Pedestrian,
}

/// Spawn record for one obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub kind: ObstacleKind,
    pub x_lon: f64,
    pub x_lat: f64,
    pub radius: f64,
    #[serde(default)]
    pub lat_speed_max: f64,
    #[serde(default)]
    pub lat_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpawn {
    pub x_lon: f64,
    pub x_lat: f64,
    pub v_lon: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub road_length: f64,
    pub lane_width: f64,
    #[serde(default = "default_lane_count")]
    pub lane_count: u32,
    pub target_lon: f64,
    pub target_lat: f64,
    pub ego_spawn: EgoSpawn,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
}

fn default_lane_count() -> u32 {
    2
}

const PRESET_A: &str = include_str!("../../scenarios/scenario_a.toml");
const PRESET_B: &str = include_str!("../../scenarios/scenario_b.toml");
const PRESET_C: &str = include_str!("../../scenarios/scenario_c.toml");
const PRESET_STRAIGHT: &str = include_str!("../../scenarios/straight.toml");

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            what: "scenario",
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Loads a scenario file, or one of the bundled presets when `path` is
    /// `builtin:a`, `builtin:b`, `builtin:c` or `builtin:straight`.
    pub fn load(path: &str) -> Result<Self> {
        if let Some(name) = path.strip_prefix("builtin:") {
            return Self::preset(name);
        }
        let text = std::fs::read_to_string(Path::new(path))?;
        Self::from_toml_str(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "a" => PRESET_A,
            "b" => PRESET_B,
            "c" => PRESET_C,
            "straight" => PRESET_STRAIGHT,
            other => {
                return Err(Error::Precondition(format!("unknown builtin scenario `{other}`")))
            }
        };
        Self::from_toml_str(text)
    }

    pub fn road_width(&self) -> f64 {
        self.lane_width * self.lane_count as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("scenario.{key}"), msg));
        if !(self.road_length > 0.0) {
            return bad("road_length", "must be > 0");
        }
        if !(self.lane_width > 0.0) {
            return bad("lane_width", "must be > 0");
        }
        if self.lane_count == 0 {
            return bad("lane_count", "must be >= 1");
        }
        if !(self.target_lon <= self.road_length) {
            return bad("target_lon", "must not exceed road_length");
        }
        if !(self.target_lon > self.ego_spawn.x_lon) {
            return bad("target_lon", "must lie ahead of the ego spawn");
        }
        let sp = &self.ego_spawn;
        if !(sp.x_lat > 0.0 && sp.x_lat < self.road_width()) {
            return bad("ego_spawn.x_lat", "must lie on the road");
        }
        if !(sp.yaw.abs() < std::f64::consts::PI) {
            return bad("ego_spawn.yaw", "must satisfy |yaw| < pi");
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return bad(&format!("obstacles[{i}].radius"), "must be > 0");
            }
            if o.lat_speed_max < 0.0 {
                return bad(&format!("obstacles[{i}].lat_speed_max"), "must be >= 0");
            }
            if let Some([lo, hi]) = o.lat_range {
                if !(lo <= o.x_lat && o.x_lat <= hi) {
                    return bad(&format!("obstacles[{i}].lat_range"), "must contain x_lat");
                }
            }
            let dist = (o.x_lon - sp.x_lon).hypot(o.x_lat - sp.x_lat);
            // ego footprint radius is fixed by EnvConfig; 1 m is the default and the
            // smallest sensible value, so require clearance against that.
            if dist <= o.radius + 1.0 {
                return bad(&format!("obstacles[{i}]"), "overlaps the ego spawn");
            }
        }
        Ok(())
    }
}
