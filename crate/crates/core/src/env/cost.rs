//! Driving cost terms and the unshaped reward.

use serde::{Deserialize, Serialize};

use super::{EgoState, EnvConfig, Obstacle};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostTerms {
    pub collision: f64,
    pub jerk: f64,
    pub lane: f64,
}

/// Frontal and side parts of the collision cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionCost {
    pub frontal: f64,
    pub side: f64,
}

impl CollisionCost {
    pub fn total(&self) -> f64 {
        self.frontal + self.side
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Frontal risk for a longitudinal gap: `sig((d0 - gap) / l)` with `d0 = l`.
/// An infinite gap gives exactly 0.
pub fn frontal_risk(gap: f64, length_scale: f64) -> f64 {
    if gap == f64::INFINITY {
        return 0.0;
    }
    sigmoid((length_scale - gap) / length_scale)
}

/// Side risk for a lateral gap: `exp(-gap^2 / lambda^2)`.
pub fn side_risk(gap: f64, lambda: f64) -> f64 {
    (-(gap * gap) / (lambda * lambda)).exp()
}

/// Longitudinal gap to the nearest obstacle ahead whose footprint overlaps the
/// ego's lateral footprint; `+inf` when the path is clear.
pub fn frontal_gap(ego: &EgoState, obstacles: &[Obstacle], ego_radius: f64) -> f64 {
    obstacles
        .iter()
        .filter(|o| o.x_lon > ego.x_lon && (o.x_lat - ego.x_lat).abs() < ego_radius + o.radius)
        .map(|o| (o.x_lon - ego.x_lon - ego_radius - o.radius).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

/// Lateral gaps to the side entities: both road boundaries (measured from the
/// ego centre, since leaving the road means the centre crossing a boundary)
/// and every obstacle that is longitudinally abreast of the ego (edge-to-edge).
pub fn side_gaps(
    ego: &EgoState,
    obstacles: &[Obstacle],
    road_width: f64,
    config: &EnvConfig,
) -> Vec<f64> {
    let mut gaps = vec![ego.x_lat.max(0.0), (road_width - ego.x_lat).max(0.0)];
    for o in obstacles {
        let reach = config.ego_radius + o.radius;
        if (o.x_lon - ego.x_lon).abs() < reach + config.side_lon_margin {
            gaps.push(((o.x_lat - ego.x_lat).abs() - reach).max(0.0));
        }
    }
    gaps
}

pub fn cost_collision(
    ego: &EgoState,
    obstacles: &[Obstacle],
    road_width: f64,
    config: &EnvConfig,
) -> CollisionCost {
    let frontal = frontal_risk(
        frontal_gap(ego, obstacles, config.ego_radius),
        config.collision_length_scale,
    );
    let side = side_gaps(ego, obstacles, road_width, config)
        .into_iter()
        .map(|g| side_risk(g, config.side_length_scale))
        .fold(0.0, f64::max);
    CollisionCost { frontal, side }
}

pub fn cost_jerk(yaw_rate_now: f64, yaw_rate_prev: f64, dt: f64) -> f64 {
    debug_assert!(dt > 0.0);
    (yaw_rate_now - yaw_rate_prev).abs() / dt
}

pub fn cost_lane(ego: &EgoState, target_lat: f64) -> f64 {
    let d = ego.x_lat - target_lat;
    d * d
}

/// `b - (w1 * C_coll + w2 * C_jerk + w3 * C_lane)`.
pub fn base_reward(costs: &CostTerms, config: &EnvConfig) -> f64 {
    config.reward_bias
        - (config.w_collision * costs.collision
            + config.w_jerk * costs.jerk
            + config.w_lane * costs.lane)
}
