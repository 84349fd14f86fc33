//! Kinematic two-phase retraction task.
//!
//! The end-effector starts in the upper part of a cylindrical safe workspace,
//! moves to the tumour (the gripper closes automatically within
//! `grasp_threshold`), then lifts to the target. Each action moves the tip by
//! `step_size` millimetres along any subset of the three axes. Leaving the
//! cylinder or entering an obstacle is a collision; penalized collisions cost
//! `collision_penalty` reward.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

/// Length of the observation vector.
pub const OBS_DIM: usize = 8;
/// Number of joint actions, `3^3`.
pub const NUM_ACTIONS: usize = 27;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("episode already finished after {steps} steps")]
    EpisodeFinished { steps: usize },
    #[error("action index {0} out of range 0..27")]
    BadAction(usize),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    /// Direction of outward motion through this side.
    pub fn outward_sign(self) -> i8 {
        match self {
            Side::Lower => -1,
            Side::Upper => 1,
        }
    }
}

/// A face of the workspace's axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Face {
    pub axis: Axis,
    pub side: Side,
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = match self.axis {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        let side = match self.side {
            Side::Lower => "lower",
            Side::Upper => "upper",
        };
        write!(f, "{axis}_{side}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Gripper open, heading for the tumour.
    Approach,
    /// Gripper closed, lifting to the target.
    Retract,
}

impl Phase {
    pub fn from_gripper(g: u8) -> Self {
        if g == 0 {
            Phase::Approach
        } else {
            Phase::Retract
        }
    }

    pub fn gripper(self) -> u8 {
        match self {
            Phase::Approach => 0,
            Phase::Retract => 1,
        }
    }
}

/// A workspace face in a given task phase. Collisions are attributed to these
/// so that penalties can be restricted to a subset of faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhasedFace {
    pub phase: Phase,
    pub face: Face,
}

/// Which phased faces incur the collision penalty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PenaltyScope {
    faces: BTreeSet<PhasedFace>,
}

impl PenaltyScope {
    pub fn all() -> Self {
        let mut faces = BTreeSet::new();
        for phase in [Phase::Approach, Phase::Retract] {
            for axis in Axis::ALL {
                for side in [Side::Lower, Side::Upper] {
                    faces.insert(PhasedFace {
                        phase,
                        face: Face { axis, side },
                    });
                }
            }
        }
        Self { faces }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn from_faces(faces: impl IntoIterator<Item = PhasedFace>) -> Self {
        Self {
            faces: faces.into_iter().collect(),
        }
    }

    pub fn contains(&self, f: &PhasedFace) -> bool {
        self.faces.contains(f)
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

/// Safe workspace: a closed cylinder whose axis is parallel to y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    /// Centre of the cylinder (mid-height), mm.
    pub center: Vec3,
    pub radius: f64,
    pub height: f64,
}

impl Cylinder {
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let [cx, cy, cz] = self.center;
        let h = 0.5 * self.height;
        (
            [cx - self.radius, cy - h, cz - self.radius],
            [cx + self.radius, cy + h, cz + self.radius],
        )
    }

    fn radial(&self, p: Vec3) -> (f64, f64) {
        (p[0] - self.center[0], p[2] - self.center[2])
    }

    /// Closed membership: boundary points are inside.
    pub fn contains(&self, p: Vec3) -> bool {
        let (dx, dz) = self.radial(p);
        (dx * dx + dz * dz).sqrt() <= self.radius && (p[1] - self.center[1]).abs() <= 0.5 * self.height
    }

    /// Euclidean distance from `p` to the solid cylinder (0 inside).
    pub fn distance(&self, p: Vec3) -> f64 {
        let (dx, dz) = self.radial(p);
        let dr = ((dx * dx + dz * dz).sqrt() - self.radius).max(0.0);
        let dy = ((p[1] - self.center[1]).abs() - 0.5 * self.height).max(0.0);
        (dr * dr + dy * dy).sqrt()
    }

    /// Faces crossed by a point outside the cylinder. Radial exits are
    /// attributed to the x or z face with the dominant outward component.
    pub fn exit_faces(&self, p: Vec3) -> Vec<Face> {
        let mut faces = Vec::new();
        let h = 0.5 * self.height;
        if p[1] < self.center[1] - h {
            faces.push(Face {
                axis: Axis::Y,
                side: Side::Lower,
            });
        } else if p[1] > self.center[1] + h {
            faces.push(Face {
                axis: Axis::Y,
                side: Side::Upper,
            });
        }
        let (dx, dz) = self.radial(p);
        if (dx * dx + dz * dz).sqrt() > self.radius {
            faces.push(dominant_face(dx, dz));
        }
        faces
    }
}

fn dominant_face(dx: f64, dz: f64) -> Face {
    let side = |v: f64| if v < 0.0 { Side::Lower } else { Side::Upper };
    if dx.abs() >= dz.abs() {
        Face {
            axis: Axis::X,
            side: side(dx),
        }
    } else {
        Face {
            axis: Axis::Z,
            side: side(dz),
        }
    }
}

/// Analytic stand-in for a rigid anatomical structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Obstacle {
    Sphere { center: Vec3, radius: f64 },
    Capsule { a: Vec3, b: Vec3, radius: f64 },
}

impl Obstacle {
    fn closest_point(&self, p: Vec3) -> Vec3 {
        match *self {
            Obstacle::Sphere { center, .. } => center,
            Obstacle::Capsule { a, b, .. } => {
                let ab = sub(b, a);
                let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
                let t = if len2 > 0.0 {
                    let ap = sub(p, a);
                    ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]]
            }
        }
    }

    fn radius(&self) -> f64 {
        match *self {
            Obstacle::Sphere { radius, .. } | Obstacle::Capsule { radius, .. } => radius,
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        dist(p, self.closest_point(p)) <= self.radius()
    }

    fn centroid(&self) -> Vec3 {
        match *self {
            Obstacle::Sphere { center, .. } => center,
            Obstacle::Capsule { a, b, .. } => [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])],
        }
    }
}

/// Line segment on the tissue's fixed edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec3,
    pub b: Vec3,
}

fn default_margin() -> f64 {
    5.0
}

fn default_start_fraction() -> f64 {
    1.0 / 3.0
}

fn default_penalty() -> f64 {
    1.0
}

/// Geometry and dynamics of the task. All lengths in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub workspace: Cylinder,
    /// The tip is clamped to the workspace bounding box grown by this margin.
    #[serde(default = "default_margin")]
    pub arena_margin: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub tumour_pos: Vec3,
    pub target_pos: Vec3,
    /// Where the fat tissue is attached. Informational; the kinematic model
    /// does not simulate the tissue.
    pub attachment: Segment,
    pub grasp_threshold: f64,
    pub success_threshold: f64,
    pub step_size: f64,
    pub max_steps: usize,
    /// Distance normalization factor `k` (1/mm). Defaults to the reciprocal
    /// of the arena diagonal so every observation entry lies in `[0, 1]`.
    #[serde(default)]
    pub distance_scale: Option<f64>,
    #[serde(default = "default_penalty")]
    pub collision_penalty: f64,
    /// Episodes start uniformly inside the top fraction of the cylinder.
    #[serde(default = "default_start_fraction")]
    pub start_region_fraction: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            workspace: Cylinder {
                center: [0.0, 20.0, 0.0],
                radius: 25.0,
                height: 40.0,
            },
            arena_margin: default_margin(),
            obstacles: vec![
                // Spinal-column proxy on the -x side, tangent to the cylinder.
                Obstacle::Sphere {
                    center: [-33.0, 12.0, 0.0],
                    radius: 8.0,
                },
                // Rib proxy on the -z side.
                Obstacle::Sphere {
                    center: [0.0, 12.0, -33.0],
                    radius: 8.0,
                },
            ],
            tumour_pos: [0.0, 6.0, 0.0],
            target_pos: [0.0, 26.0, 0.0],
            attachment: Segment {
                a: [-20.0, 8.0, 15.0],
                b: [20.0, 8.0, 15.0],
            },
            grasp_threshold: 1.5,
            success_threshold: 1.5,
            step_size: 0.5,
            max_steps: 300,
            distance_scale: None,
            collision_penalty: default_penalty(),
            start_region_fraction: default_start_fraction(),
        }
    }
}

impl EnvConfig {
    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let cfg: EnvConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        let ws = &self.workspace;
        if !(ws.radius > 0.0 && ws.height > 0.0) {
            return bad("workspace radius and height must be positive".into());
        }
        if !(self.step_size > 0.0 && self.grasp_threshold > 0.0 && self.success_threshold > 0.0) {
            return bad("step_size and thresholds must be positive".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if !(self.arena_margin >= 0.0) {
            return bad("arena_margin must be non-negative".into());
        }
        if !(self.start_region_fraction > 0.0 && self.start_region_fraction <= 1.0) {
            return bad("start_region_fraction must lie in (0, 1]".into());
        }
        if let Some(k) = self.distance_scale {
            if !(k > 0.0 && k.is_finite()) {
                return bad("distance_scale must be positive".into());
            }
        }
        if !ws.contains(self.tumour_pos) {
            return bad("tumour_pos lies outside the workspace".into());
        }
        if !ws.contains(self.target_pos) {
            return bad("target_pos lies outside the workspace".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.radius() <= 0.0 {
                return bad(format!("obstacle {i} has non-positive radius"));
            }
            // Outside or tangent: the core may not reach into the workspace.
            let intrudes = match *o {
                Obstacle::Sphere { center, radius } => ws.distance(center) < radius - 1e-9,
                Obstacle::Capsule { a, b, radius } => (0..=256).any(|s| {
                    let t = s as f64 / 256.0;
                    let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])];
                    ws.distance(p) < radius - 1e-9
                }),
            };
            if intrudes {
                return bad(format!("obstacle {i} intrudes into the workspace"));
            }
        }
        Ok(())
    }

    /// Box the tip is confined to: the workspace bounding box plus margin.
    pub fn arena(&self) -> (Vec3, Vec3) {
        let (lo, hi) = self.workspace.bounding_box();
        let m = self.arena_margin;
        ([lo[0] - m, lo[1] - m, lo[2] - m], [hi[0] + m, hi[1] + m, hi[2] + m])
    }

    /// The factor `k` converting millimetres to normalized units.
    pub fn k(&self) -> f64 {
        self.distance_scale.unwrap_or_else(|| {
            let (lo, hi) = self.arena();
            1.0 / dist(hi, lo)
        })
    }

    /// Normalized coordinate of a physical position.
    pub fn normalize_position(&self, p: Vec3) -> Vec3 {
        let (lo, _) = self.arena();
        let k = self.k();
        [(p[0] - lo[0]) * k, (p[1] - lo[1]) * k, (p[2] - lo[2]) * k]
    }

    pub fn goal(&self, phase: Phase) -> Vec3 {
        match phase {
            Phase::Approach => self.tumour_pos,
            Phase::Retract => self.target_pos,
        }
    }

    pub fn collision_check(&self, p: Vec3) -> CollisionStatus {
        CollisionStatus {
            inside_workspace: self.workspace.contains(p),
            obstacle_hit: self.obstacles.iter().any(|o| o.contains(p)),
        }
    }

    /// Faces a point at `p` collides through: workspace exits plus the
    /// faces nearest to any obstacle containing `p`.
    pub fn collision_faces(&self, p: Vec3) -> Vec<Face> {
        let mut faces = self.workspace.exit_faces(p);
        for o in self.obstacles.iter().filter(|o| o.contains(p)) {
            let c = o.centroid();
            let rel = sub(c, self.workspace.center);
            let h = 0.5 * self.workspace.height;
            let face = if rel[1].abs() > h && rel[1].abs() - h > rel[0].hypot(rel[2]) - self.workspace.radius {
                Face {
                    axis: Axis::Y,
                    side: if rel[1] < 0.0 { Side::Lower } else { Side::Upper },
                }
            } else {
                dominant_face(rel[0], rel[2])
            };
            if !faces.contains(&face) {
                faces.push(face);
            }
        }
        faces
    }

    pub fn observe(&self, state: &EnvState) -> Observation {
        let goal = self.goal(state.phase());
        let p = self.normalize_position(state.position);
        let pi = self.normalize_position(goal);
        let d = norm(sub(p, pi));
        Observation([f64::from(state.gripper), p[0], p[1], p[2], pi[0], pi[1], pi[2], d])
    }

    /// Starts an episode. The initial tip position is uniform over the top
    /// `start_region_fraction` of the cylinder and fully determined by `seed`.
    pub fn reset(&self, seed: u64) -> (EnvState, Observation) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws = &self.workspace;
        let top = ws.center[1] + 0.5 * ws.height;
        let band = self.start_region_fraction * ws.height;
        let r = ws.radius * rng.random::<f64>().sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let y = top - band * rng.random::<f64>();
        let state = EnvState {
            gripper: 0,
            position: [ws.center[0] + r * theta.cos(), y, ws.center[2] + r * theta.sin()],
            steps_taken: 0,
            grasp_point: None,
            done: false,
        };
        let obs = self.observe(&state);
        (state, obs)
    }

    /// Advances one step. The penalty is charged when a collision is
    /// attributed to at least one face in `scope` for the pre-step phase.
    pub fn step(&self, state: &EnvState, action: Action, scope: &PenaltyScope) -> Result<Transition, EnvError> {
        if state.done {
            return Err(EnvError::EpisodeFinished {
                steps: state.steps_taken,
            });
        }
        let phase = state.phase();
        let delta = action.displacement(self.step_size);
        let (lo, hi) = self.arena();
        let mut p = state.position;
        for a in 0..3 {
            p[a] = (p[a] + delta[a]).clamp(lo[a], hi[a]);
        }
        let mut next = EnvState {
            gripper: state.gripper,
            position: p,
            steps_taken: state.steps_taken + 1,
            grasp_point: state.grasp_point,
            done: false,
        };
        let mut grasped = false;
        if next.gripper == 0 && dist(p, self.tumour_pos) <= self.grasp_threshold {
            next.gripper = 1;
            next.grasp_point = Some(p);
            grasped = true;
        }
        let status = self.collision_check(p);
        let faces = if status.inside_workspace && !status.obstacle_hit {
            Vec::new()
        } else {
            self.collision_faces(p)
        };
        let penalized = faces.iter().any(|&face| scope.contains(&PhasedFace { phase, face }));
        let reward = reward_fn(&next, penalized, self);
        let success = next.gripper == 1 && dist(p, self.target_pos) <= self.success_threshold;
        let truncated = !success && next.steps_taken >= self.max_steps;
        next.done = success || truncated;
        let observation = self.observe(&next);
        Ok(Transition {
            state: next,
            observation,
            reward,
            done: success || truncated,
            info: StepInfo {
                collision: status.obstacle_hit,
                out_of_workspace: !status.inside_workspace,
                grasped,
                success,
                truncated,
                penalized,
                faces,
            },
        })
    }
}

/// Shaped reward of the post-step state.
///
/// With `d = ‖p − p_i‖·k` clamped to `[0, 1]`, the collision-free reward is
/// `−0.5·d − 0.5` with the gripper open (range `[−1, −0.5]`) and `−0.5·d`
/// once grasped (range `[−0.5, 0]`). A penalized collision subtracts
/// `collision_penalty`.
pub fn reward_fn(state: &EnvState, penalized: bool, config: &EnvConfig) -> f64 {
    let goal = config.goal(state.phase());
    let d = (dist(state.position, goal) * config.k()).clamp(0.0, 1.0);
    let base = if state.gripper == 0 { -0.5 * d - 0.5 } else { -0.5 * d };
    if penalized {
        base - config.collision_penalty
    } else {
        base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionStatus {
    pub inside_workspace: bool,
    pub obstacle_hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// 0 = open, 1 = closed. Only ever goes 0 → 1.
    pub gripper: u8,
    pub position: Vec3,
    pub steps_taken: usize,
    pub grasp_point: Option<Vec3>,
    pub done: bool,
}

impl EnvState {
    pub fn phase(&self) -> Phase {
        Phase::from_gripper(self.gripper)
    }
}

/// `[g, p (3), p_i (3), ‖p − p_i‖]` in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Joint action: base-3 digits `(α_x, α_y, α_z)` each in `{−1, 0, +1}`,
/// x most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(u8);

impl Action {
    pub fn new(index: usize) -> Result<Self, EnvError> {
        if index < NUM_ACTIONS {
            Ok(Self(index as u8))
        } else {
            Err(EnvError::BadAction(index))
        }
    }

    pub fn encode(alpha: [i8; 3]) -> Self {
        assert!(alpha.iter().all(|a| (-1..=1).contains(a)), "alpha components must be -1, 0 or 1");
        let d = |a: i8| (a + 1) as u8;
        Self(d(alpha[0]) * 9 + d(alpha[1]) * 3 + d(alpha[2]))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn alpha(self) -> [i8; 3] {
        let i = self.0;
        [(i / 9) as i8 - 1, ((i / 3) % 3) as i8 - 1, (i % 3) as i8 - 1]
    }

    pub fn displacement(self, step: f64) -> Vec3 {
        let a = self.alpha();
        [step * f64::from(a[0]), step * f64::from(a[1]), step * f64::from(a[2])]
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..NUM_ACTIONS as u8).map(Action)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Tip is inside an obstacle.
    pub collision: bool,
    pub out_of_workspace: bool,
    /// The gripper closed on this step.
    pub grasped: bool,
    pub success: bool,
    /// Episode ended by the step limit.
    pub truncated: bool,
    /// The collision penalty was charged.
    pub penalized: bool,
    /// Faces the collision is attributed to.
    pub faces: Vec<Face>,
}

impl StepInfo {
    pub fn any_collision(&self) -> bool {
        self.collision || self.out_of_workspace
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Stateful wrapper: one config, one penalty scope, one running episode.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    scope: PenaltyScope,
    state: EnvState,
}

impl Environment {
    pub fn new(config: EnvConfig, scope: PenaltyScope, seed: u64) -> Self {
        let (state, _) = config.reset(seed);
        Self { config, scope, state }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn observation(&self) -> Observation {
        self.config.observe(&self.state)
    }

    pub fn reset(&mut self, seed: u64) -> Observation {
        let (state, obs) = self.config.reset(seed);
        self.state = state;
        obs
    }

    pub fn step(&mut self, action: Action) -> Result<Transition, EnvError> {
        let t = self.config.step(&self.state, action, &self.scope)?;
        self.state = t.state.clone();
        Ok(t)
    }
}

/// Writes a trajectory as CSV:
/// `step,g,px,py,pz,action,reward,collision,out_of_workspace,penalized`.
pub struct TrajectoryLog<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryLog<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "step,g,px,py,pz,action,reward,collision,out_of_workspace,penalized")?;
        Ok(Self { out })
    }

    pub fn record(&mut self, action: Action, t: &Transition) -> io::Result<()> {
        let p = t.state.position;
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{}",
            t.state.steps_taken,
            t.state.gripper,
            p[0],
            p[1],
            p[2],
            action.index(),
            t.reward,
            u8::from(t.info.collision),
            u8::from(t.info.out_of_workspace),
            u8::from(t.info.penalized)
        )
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
