//! Deterministic kinematic lane-driving simulator.
//!
//! The agent controls only the steering-wheel angle; a PI controller owns the
//! longitudinal speed. Vehicle motion follows a kinematic bicycle model
//! integrated with explicit Euler steps.

mod cost;
mod scenario;

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use cost::{
    base_reward, cost_collision, cost_jerk, cost_lane, frontal_gap, frontal_risk, side_gaps,
    side_risk, CollisionCost, CostTerms,
};
pub use scenario::{EgoSpawn, ObstacleKind, ObstacleSpec, Scenario};

use crate::error::{Error, Result};
use crate::rng;

/// Obstacles reported in each observation.
pub const OBSERVED_OBSTACLES: usize = 4;
/// Ego block (5) + 4 features per observed obstacle + 2 boundary distances.
pub const OBS_DIM: usize = 5 + 4 * OBSERVED_OBSTACLES + 2;
pub const ACTION_DIM: usize = 1;
/// Steering-wheel range is `[-STEER_LIMIT, STEER_LIMIT]`.
pub const STEER_LIMIT: f64 = FRAC_PI_2;

/// Ego vehicle state.
///
/// `v_lon` is the forward speed along the vehicle heading (the quantity the PI
/// controller regulates); `v_lat` is the resulting lateral velocity in road
/// coordinates, `v_lon * sin(yaw)`. Positive yaw turns towards larger `x_lat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub x_lon: f64,
    pub x_lat: f64,
    pub v_lon: f64,
    pub v_lat: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub kind: ObstacleKind,
    pub x_lon: f64,
    pub x_lat: f64,
    pub v_lon: f64,
    pub v_lat: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Control period in seconds (20 Hz).
    pub dt: f64,
    pub k_p: f64,
    pub k_i: f64,
    pub v_target: f64,
    pub w_collision: f64,
    pub w_jerk: f64,
    pub w_lane: f64,
    pub reward_bias: f64,
    /// Length scale `l` of the frontal risk sigmoid (`kappa = 1/l`, `d0 = l`).
    pub collision_length_scale: f64,
    /// `lambda` of the side risk `exp(-d^2 / lambda^2)`.
    pub side_length_scale: f64,
    /// Extra longitudinal reach within which an obstacle counts as "beside" the ego.
    pub side_lon_margin: f64,
    pub wheelbase: f64,
    /// Road-wheel angle per unit steering-wheel angle.
    pub steering_ratio: f64,
    pub ego_radius: f64,
    pub max_episode_steps: usize,
    /// Longitudinal distance that maps to 1.0 in the agent-facing observation scaling.
    pub obs_lon_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            k_p: 1.0,
            k_i: 0.1,
            v_target: 10.0,
            w_collision: 1.0,
            w_jerk: 0.05,
            w_lane: 0.05,
            reward_bias: 0.1,
            collision_length_scale: 5.0,
            side_length_scale: 1.0,
            side_lon_margin: 1.0,
            wheelbase: 2.5,
            steering_ratio: 0.5,
            ego_radius: 1.0,
            max_episode_steps: 400,
            obs_lon_scale: 20.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.dt", self.dt),
            ("env.v_target", self.v_target),
            ("env.collision_length_scale", self.collision_length_scale),
            ("env.side_length_scale", self.side_length_scale),
            ("env.wheelbase", self.wheelbase),
            ("env.steering_ratio", self.steering_ratio),
            ("env.ego_radius", self.ego_radius),
            ("env.obs_lon_scale", self.obs_lon_scale),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be a finite value > 0"));
            }
        }
        for (key, v) in [
            ("env.w_collision", self.w_collision),
            ("env.w_jerk", self.w_jerk),
            ("env.w_lane", self.w_lane),
            ("env.k_p", self.k_p),
            ("env.k_i", self.k_i),
            ("env.side_lon_margin", self.side_lon_margin),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be a finite value >= 0"));
            }
        }
        if self.max_episode_steps == 0 {
            return Err(Error::config("env.max_episode_steps", "must be >= 1"));
        }
        Ok(())
    }

    /// Per-feature multipliers that bring raw observations to order one
    /// before they reach any network.
    pub fn observation_scale(&self, scenario: &Scenario) -> Vec<f64> {
        let lat = 1.0 / scenario.lane_width;
        let lon = 1.0 / self.obs_lon_scale;
        let speed = 1.0 / self.v_target;
        let mut s = vec![lat, 0.5, 1.0, 0.5, speed];
        for _ in 0..OBSERVED_OBSTACLES {
            s.extend([lon, lat, speed, 0.5]);
        }
        s.extend([lat, lat]);
        s
    }
}

/// Fixed-length feature vector, see [`OBS_DIM`].
///
/// Layout: `x_lat, v_lat, yaw, yaw_rate, v_lon`, then for each of the
/// [`OBSERVED_OBSTACLES`] nearest obstacles (zero padded) the relative
/// `dx_lon, dx_lat, dv_lon, dv_lat`, then distances to the right and left road
/// boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn ego_block(&self) -> &[f64] {
        &self.0[..5]
    }

    pub fn obstacle_block(&self) -> &[f64] {
        &self.0[5..5 + 4 * OBSERVED_OBSTACLES]
    }

    pub fn boundary_block(&self) -> &[f64] {
        &self.0[OBS_DIM - 2..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepInfo {
    pub collision: bool,
    /// Left the road laterally or turned to face against the direction of travel.
    pub out_of_bounds: bool,
    pub reached_goal: bool,
    /// Episode hit `max_episode_steps`.
    pub truncated: bool,
    /// The requested steering was outside the admissible range and was clamped.
    pub action_clamped: bool,
    pub cost_terms: CostTerms,
}

impl StepInfo {
    /// The episode ended for a reason other than the step limit.
    pub fn terminal(&self) -> bool {
        self.collision || self.out_of_bounds || self.reached_goal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a;
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// One simulator instance; single-threaded state machine.
#[derive(Debug, Clone)]
pub struct DrivingEnv {
    scenario: Scenario,
    config: EnvConfig,
    ego: EgoState,
    obstacles: Vec<Obstacle>,
    speed_error_integral: f64,
    steps: usize,
    done: bool,
}

impl DrivingEnv {
    pub fn new(scenario: Scenario, config: EnvConfig) -> Result<Self> {
        scenario.validate()?;
        config.validate()?;
        let mut env = Self {
            ego: EgoState {
                x_lon: 0.0,
                x_lat: 0.0,
                v_lon: 0.0,
                v_lat: 0.0,
                yaw: 0.0,
                yaw_rate: 0.0,
            },
            obstacles: Vec::new(),
            scenario,
            config,
            speed_error_integral: 0.0,
            steps: 0,
            done: true,
        };
        env.reset(0);
        env.done = true;
        Ok(env)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn ego(&self) -> &EgoState {
        &self.ego
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Starts a new episode. Pedestrian lateral speeds are drawn from a ChaCha
    /// stream keyed by `episode_seed`, so the same seed replays the same episode.
    pub fn reset(&mut self, episode_seed: u64) -> Observation {
        let sp = &self.scenario.ego_spawn;
        self.ego = EgoState {
            x_lon: sp.x_lon,
            x_lat: sp.x_lat,
            v_lon: sp.v_lon,
            v_lat: sp.v_lon * sp.yaw.sin(),
            yaw: sp.yaw,
            yaw_rate: sp.yaw_rate,
        };
        let mut ped_rng = rng::stream(episode_seed, 0x7065_6473);
        self.obstacles = self
            .scenario
            .obstacles
            .iter()
            .map(|spec| {
                let v_lat = if spec.lat_speed_max > 0.0 {
                    ped_rng.random_range(-spec.lat_speed_max..=spec.lat_speed_max)
                } else {
                    0.0
                };
                Obstacle {
                    kind: spec.kind,
                    x_lon: spec.x_lon,
                    x_lat: spec.x_lat,
                    v_lon: 0.0,
                    v_lat,
                    radius: spec.radius,
                }
            })
            .collect();
        self.speed_error_integral = 0.0;
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        let e = &self.ego;
        let mut f = Vec::with_capacity(OBS_DIM);
        f.extend([e.x_lat, e.v_lat, e.yaw, e.yaw_rate, e.v_lon]);
        let mut order: Vec<(f64, usize)> = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| ((o.x_lon - e.x_lon).hypot(o.x_lat - e.x_lat), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for slot in 0..OBSERVED_OBSTACLES {
            match order.get(slot) {
                Some(&(_, i)) => {
                    let o = &self.obstacles[i];
                    f.extend([
                        o.x_lon - e.x_lon,
                        o.x_lat - e.x_lat,
                        o.v_lon - e.v_lon * e.yaw.cos(),
                        o.v_lat - e.v_lat,
                    ]);
                }
                None => f.extend([0.0; 4]),
            }
        }
        f.extend([e.x_lat, self.scenario.road_width() - e.x_lat]);
        Observation(f)
    }

    /// Cost terms for the current state given the previous yaw rate.
    fn costs(&self, prev_yaw_rate: f64) -> CostTerms {
        CostTerms {
            collision: cost_collision(
                &self.ego,
                &self.obstacles,
                self.scenario.road_width(),
                &self.config,
            )
            .total(),
            jerk: cost_jerk(self.ego.yaw_rate, prev_yaw_rate, self.config.dt),
            lane: cost_lane(&self.ego, self.scenario.target_lat),
        }
    }

    /// PI longitudinal acceleration; accumulates the speed-error integral.
    fn pi_acceleration(&mut self) -> f64 {
        let err = self.config.v_target - self.ego.v_lon;
        self.speed_error_integral += err * self.config.dt;
        self.config.k_p * err + self.config.k_i * self.speed_error_integral
    }

    pub fn step(&mut self, steering: f64) -> Result<StepResult> {
        if self.done {
            return Err(Error::Precondition("step() called on a finished episode; call reset()".into()));
        }
        if !steering.is_finite() {
            return Err(Error::NonFinite("DrivingEnv::step action"));
        }
        let delta = steering.clamp(-STEER_LIMIT, STEER_LIMIT);
        let action_clamped = delta != steering;
        let cfg = &self.config;
        let dt = cfg.dt;

        let prev_yaw_rate = self.ego.yaw_rate;
        let acc = self.pi_acceleration();
        let cfg = &self.config;
        let wheel = cfg.steering_ratio * delta;
        let e = self.ego;
        let yaw_rate = e.v_lon * wheel.tan() / cfg.wheelbase;
        let v_next = e.v_lon + acc * dt;
        let yaw_next = wrap_angle(e.yaw + yaw_rate * dt);
        self.ego = EgoState {
            x_lon: e.x_lon + e.v_lon * e.yaw.cos() * dt,
            x_lat: e.x_lat + e.v_lon * e.yaw.sin() * dt,
            v_lon: v_next,
            v_lat: v_next * yaw_next.sin(),
            yaw: yaw_next,
            yaw_rate,
        };

        for (o, spec) in self.obstacles.iter_mut().zip(&self.scenario.obstacles) {
            o.x_lon += o.v_lon * dt;
            o.x_lat += o.v_lat * dt;
            if let Some([lo, hi]) = spec.lat_range {
                if o.x_lat <= lo || o.x_lat >= hi {
                    o.x_lat = o.x_lat.clamp(lo, hi);
                    o.v_lat = 0.0;
                }
            }
        }
        self.steps += 1;

        let cost_terms = self.costs(prev_yaw_rate);
        let reward = base_reward(&cost_terms, &self.config);
        let ego = self.ego;
        let collision = self
            .obstacles
            .iter()
            .any(|o| (o.x_lon - ego.x_lon).hypot(o.x_lat - ego.x_lat) < self.config.ego_radius + o.radius);
        let out_of_bounds = ego.x_lat < 0.0
            || ego.x_lat > self.scenario.road_width()
            || ego.yaw.abs() > std::f64::consts::FRAC_PI_2;
        let reached_goal = ego.x_lon >= self.scenario.target_lon;
        let truncated = self.steps >= self.config.max_episode_steps;
        let info = StepInfo {
            collision,
            out_of_bounds,
            reached_goal,
            truncated,
            action_clamped,
            cost_terms,
        };
        self.done = info.terminal() || truncated;
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done: self.done,
            info,
        })
    }
}
