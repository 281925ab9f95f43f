//! The jam / unjam / propagate cycle, the conserved path it builds, the
//! steering law, and the tendon-only baseline.
//!
//! One cycle (steps 0 to 8):
//!
//! | step | action |
//! |------|--------|
//! | 0 | hold, all FJMs jammed |
//! | 1 | unjam the first FJM |
//! | 2 | propagate: base and unjammed FJM advance together |
//! | 3 | steer the head joint with the tendons |
//! | 4 | jam the first FJM, commit the new shape |
//! | 5–7 | unjam, extend and jam the second FJM |
//! | 8 | same for every remaining FJM |
//!
//! Arc lengths are measured along the body from the base outlet. A joint at arc
//! `u` is locked onto the conserved path when `u` lies inside the region held
//! by the deepest jammed FJM; everything distal to that is the steering zone.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::environment::{Checkpoint, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{
    bend_from_tendon_lengths, bend_towards, chain_frames, fjm_azimuth, channel_length, joint_channel_lengths,
    joint_rotation, ChainFrames, ChainLayout, JointState, Pose, RobotConfig, N_TENDONS,
};
use crate::statics::{
    checkpoint_forces, solve_equilibrium, CheckpointReading, EquilibriumProblem, JointTerm, StiffnessModel,
};

const ARC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FjmState {
    pub jammed: bool,
    /// Arc length of the FJM tip from the base outlet, mm.
    pub insertion_depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    /// Inter-segment joints of the inserted body, base to tip.
    pub joints: Vec<JointState>,
    pub fjms: Vec<FjmState>,
    /// Body length fed out of the base, mm.
    pub base_insertion: f64,
    /// Tendon lengths across one steered joint, mm.
    pub tendon_commands: [f64; N_TENDONS],
}

impl RobotState {
    /// One segment out, every FJM jammed up to its tip.
    pub fn initial(cfg: &RobotConfig) -> Result<Self> {
        Self::with_fjms(cfg, true, cfg.seg_length)
    }

    /// Tendon-only start: FJMs stay unjammed at the outlet.
    pub fn tdcr_initial(cfg: &RobotConfig) -> Result<Self> {
        Self::with_fjms(cfg, false, 0.0)
    }

    fn with_fjms(cfg: &RobotConfig, jammed: bool, depth: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            joints: Vec::new(),
            fjms: vec![
                FjmState {
                    jammed,
                    insertion_depth: depth,
                };
                cfg.n_fjms
            ],
            base_insertion: cfg.seg_length,
            tendon_commands: joint_channel_lengths(&JointState::straight(), cfg)?.tendon,
        })
    }

    pub fn n_segments(&self) -> usize {
        self.joints.len() + 1
    }

    /// All FJMs jammed at one common depth.
    pub fn at_cycle_boundary(&self) -> bool {
        let Some(first) = self.fjms.first() else {
            return false;
        };
        self.fjms
            .iter()
            .all(|f| f.jammed && (f.insertion_depth - first.insertion_depth).abs() <= ARC_EPS)
    }

}

/// Which FJM advances first each cycle; the rest follow clockwise, which is
/// decreasing channel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionStrategy {
    pub first_fjm: usize,
}

impl ExtensionStrategy {
    /// Strategy `ES<n>`, `n` counted from 1.
    pub fn es(n: usize) -> Self {
        Self {
            first_fjm: n.saturating_sub(1),
        }
    }

    pub fn order(&self, n_fjms: usize) -> Vec<usize> {
        (0..n_fjms).map(|i| (self.first_fjm + n_fjms - i) % n_fjms).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub arclength: f64,
    pub position: Vector3<f64>,
    /// Orientation of the piece that ends at this sample.
    pub orientation: nalgebra::Rotation3<f64>,
    /// Bend at the vertex where that piece starts.
    pub entry_bend: Vector2<f64>,
}

/// The curve held by the jammed FJMs: one sample per committed vertex.
/// Samples are only ever appended.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedPath {
    seg_length: f64,
    samples: Vec<PathSample>,
}

impl ConservedPath {
    /// A single straight segment leaving `base`.
    pub fn new(base: &Pose, seg_length: f64) -> Self {
        let start = PathSample {
            arclength: 0.0,
            position: base.position,
            orientation: base.orientation,
            entry_bend: Vector2::zeros(),
        };
        let first = PathSample {
            arclength: seg_length,
            position: base.position + base.orientation * Vector3::z() * seg_length,
            ..start
        };
        Self {
            seg_length,
            samples: vec![start, first],
        }
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn total_arclength(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.arclength)
    }

    pub fn end_pose(&self) -> Pose {
        let last = self.samples.last().expect("path has samples");
        Pose::new(last.position, last.orientation)
    }

    /// Committed bend at vertex `k`; zero at the outlet and at the open end.
    pub fn vertex_bend(&self, k: usize) -> Vector2<f64> {
        if k == 0 {
            return Vector2::zeros();
        }
        self.samples.get(k + 1).map_or(Vector2::zeros(), |s| s.entry_bend)
    }

    pub fn vertex_bends(&self) -> Vec<Vector2<f64>> {
        (1..self.samples.len() - 1).map(|k| self.vertex_bend(k)).collect()
    }

    /// Rest bend for a joint sitting at arc `u`, linear between vertices.
    pub fn rest_at(&self, u: f64) -> Vector2<f64> {
        let x = (u / self.seg_length).max(0.0);
        let k = (x + ARC_EPS).floor();
        let tau = (x - k).max(0.0);
        let k = k as usize;
        if tau < 1e-12 {
            self.vertex_bend(k)
        } else {
            self.vertex_bend(k) * (1.0 - tau) + self.vertex_bend(k + 1) * tau
        }
    }

    fn commit(&mut self, bend: Vector2<f64>) {
        let last = *self.samples.last().expect("path has samples");
        let orientation = last.orientation * joint_rotation(&bend);
        self.samples.push(PathSample {
            arclength: last.arclength + self.seg_length,
            position: last.position + orientation * Vector3::z() * self.seg_length,
            orientation,
            entry_bend: bend,
        });
    }

    /// Vertices of the committed polyline.
    pub fn points(&self) -> Vec<Vector3<f64>> {
        self.samples.iter().map(|s| s.position).collect()
    }
}

/// Nominal durations of the sub-steps, s. Reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timing {
    pub jam: f64,
    pub unjam: f64,
    pub propagate: f64,
    pub steer: f64,
    pub extend: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            jam: 2.0,
            unjam: 2.0,
            propagate: 3.0,
            steer: 1.0,
            extend: 3.0,
        }
    }
}

/// Number of recorded frames per continuous motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub propagate: usize,
    pub steer: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            propagate: 10,
            steer: 5,
        }
    }
}

/// Everything a cycle needs besides the robot state.
#[derive(Debug, Clone, Copy)]
pub struct Plant<'a> {
    pub cfg: &'a RobotConfig,
    pub stiffness: &'a StiffnessModel,
    pub checkpoints: &'a [Checkpoint],
    pub timing: Timing,
    pub sampling: Sampling,
    pub load: Option<Vector3<f64>>,
}

impl<'a> Plant<'a> {
    pub fn new(cfg: &'a RobotConfig, stiffness: &'a StiffnessModel, checkpoints: &'a [Checkpoint]) -> Self {
        Self {
            cfg,
            stiffness,
            checkpoints,
            timing: Timing::default(),
            sampling: Sampling::default(),
            load: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Hold,
    Unjam,
    Propagate,
    Steer,
    Jam,
    Extend,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::Hold => "hold",
            Action::Unjam => "unjam",
            Action::Propagate => "propagate",
            Action::Steer => "steer",
            Action::Jam => "jam",
            Action::Extend => "extend",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time_s: f64,
    pub step_id: u8,
    pub fjm_index: Option<usize>,
    pub action: Action,
    pub base_insertion: f64,
}

/// Equilibrium snapshot at the end of a sub-step, weighted by its duration.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time_s: f64,
    pub duration: f64,
    pub step_id: u8,
    pub base_insertion: f64,
    pub layout: ChainLayout,
    pub angles: Vec<Vector2<f64>>,
    pub readings: Vec<CheckpointReading>,
}

impl Frame {
    pub fn chain(&self) -> ChainFrames {
        chain_frames(&self.layout, &self.angles)
    }

    /// Segment id counted from the tip (tip segment = 0).
    pub fn segment_from_tip(&self, chain_segment: usize) -> usize {
        self.angles.len() - chain_segment
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleRecord {
    pub events: Vec<Event>,
    pub frames: Vec<Frame>,
    pub end_time: f64,
}

/// Joint positions of a body with `s` mm fed out.
fn body_layout(s: f64, cfg: &RobotConfig) -> (ChainLayout, Vec<f64>) {
    let l = cfg.seg_length;
    let n = ((s / l) - ARC_EPS).ceil().max(1.0) as usize;
    let first_length = s - (n - 1) as f64 * l;
    let layout = ChainLayout {
        base: Pose::identity(),
        first_length,
        seg_length: l,
    };
    let arcs = (0..n - 1).map(|j| first_length + j as f64 * l).collect();
    (layout, arcs)
}

struct Recorder<'p, 'a> {
    plant: &'p Plant<'a>,
    record: CycleRecord,
    clock: f64,
    previous: Vec<Vector2<f64>>,
}

impl<'p, 'a> Recorder<'p, 'a> {
    fn new(plant: &'p Plant<'a>, t0: f64, previous: Vec<Vector2<f64>>) -> Self {
        Self {
            plant,
            record: CycleRecord::default(),
            clock: t0,
            previous,
        }
    }

    fn event(&mut self, step_id: u8, fjm_index: Option<usize>, action: Action, s: f64) {
        self.record.events.push(Event {
            time_s: self.clock,
            step_id,
            fjm_index,
            action,
            base_insertion: s,
        });
    }

    /// Solves the equilibrium for `joints` and records it as a frame lasting `duration`.
    fn settle(&mut self, step_id: u8, s: f64, layout: ChainLayout, joints: Vec<JointTerm>, duration: f64) -> Result<()> {
        let p = self.plant;
        let mut problem = EquilibriumProblem::new(
            layout,
            joints,
            p.checkpoints.to_vec(),
            p.stiffness,
            p.cfg.body_radius(),
            p.cfg.sharp_limit,
        );
        problem.load = p.load;
        let rest = problem.rest();
        // new joints emerge at the base
        let initial: Vec<_> = if self.previous.len() <= rest.len() {
            let fresh = rest.len() - self.previous.len();
            rest[..fresh].iter().chain(&self.previous).copied().collect()
        } else {
            rest.clone()
        };
        let sol = solve_equilibrium(&problem, &initial)?;
        let readings = checkpoint_forces(&sol.angles, &problem);
        self.previous = sol.angles.clone();
        self.record.frames.push(Frame {
            time_s: self.clock,
            duration,
            step_id,
            base_insertion: s,
            layout,
            angles: sol.angles,
            readings,
        });
        self.clock += duration;
        Ok(())
    }

    fn finish(mut self) -> (CycleRecord, Vec<Vector2<f64>>) {
        self.record.end_time = self.clock;
        (self.record, self.previous)
    }
}

/// Joint terms for a body at `s` held by FJMs jammed up to `jam_depth`.
/// `head` overrides the rest bend of the free joint at the given arc.
fn path_joints(
    path: &ConservedPath,
    arcs: &[f64],
    jam_depth: f64,
    head: Option<(f64, Vector2<f64>)>,
) -> Vec<JointTerm> {
    arcs.iter()
        .map(|&u| {
            if u < jam_depth - ARC_EPS {
                JointTerm::locked(path.rest_at(u))
            } else {
                match head {
                    Some((h, q)) if (u - h).abs() <= ARC_EPS => JointTerm::free(q),
                    _ => JointTerm::free(path.rest_at(u)),
                }
            }
        })
        .collect()
}

fn check_advance(advance: f64, s: f64, cfg: &RobotConfig) -> Result<usize> {
    let k = advance / cfg.seg_length;
    let n = k.round();
    if !(advance > 0.0) || (k - n).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "advance must be a positive multiple of the {} mm segment length, got {advance}",
            cfg.seg_length
        )));
    }
    if s + advance > cfg.body_length() + ARC_EPS {
        return Err(Error::LimitExceeded {
            requested: s + advance,
            limit: cfg.body_length(),
        });
    }
    Ok(n as usize)
}

/// Fraction of a commanded head bend lost when `fjm` is the unjammed FJM in the
/// head joint: proportional to that channel's strain relative to the mean.
pub fn tracking_loss(steer: &JointState, fjm: usize, stiffness: &StiffnessModel, cfg: &RobotConfig) -> Result<f64> {
    if steer.bend == 0.0 || stiffness.tracking_error == 0.0 {
        return Ok(0.0);
    }
    let r = cfg.joint_sphere_radius;
    let straight = channel_length(0.0, 0.0, cfg.beta, r)?;
    let strain = |k: usize| -> Result<f64> {
        Ok((channel_length(steer.bend, fjm_azimuth(k) - steer.plane, cfg.beta, r)? - straight).abs())
    };
    let mean = (0..cfg.n_fjms).map(strain).sum::<Result<f64>>()? / cfg.n_fjms as f64;
    let share = if mean > 0.0 { strain(fjm)? / mean } else { 1.0 };
    let friction = if steer.bend.abs() > cfg.gentle_limit + 1e-12 {
        stiffness.sharp_friction
    } else {
        1.0
    };
    Ok((stiffness.tracking_error * share * friction).min(1.0))
}

/// Runs steps 0 to 8 once. `t0` is the clock at step 0.
pub fn execute_cycle(
    state: &RobotState,
    path: &ConservedPath,
    steer: &JointState,
    advance: f64,
    strategy: &ExtensionStrategy,
    plant: &Plant,
    t0: f64,
) -> Result<(RobotState, ConservedPath, CycleRecord)> {
    let cfg = plant.cfg;
    if !steer.within(cfg.sharp_limit) {
        return Err(Error::LimitExceeded {
            requested: steer.bend.abs(),
            limit: cfg.sharp_limit,
        });
    }
    if !state.at_cycle_boundary() {
        return Err(Error::CycleState("every FJM must be jammed at one depth".into()));
    }
    let s0 = state.base_insertion;
    if (state.fjms[0].insertion_depth - s0).abs() > ARC_EPS || (path.total_arclength() - s0).abs() > ARC_EPS {
        return Err(Error::CycleState(format!(
            "FJM depth {} and path length {} must both equal the inserted length {s0}",
            state.fjms[0].insertion_depth,
            path.total_arclength()
        )));
    }
    if strategy.first_fjm >= cfg.n_fjms {
        return Err(Error::InvalidConfig(format!(
            "first FJM {} out of range for {} FJMs",
            strategy.first_fjm, cfg.n_fjms
        )));
    }
    let n_new = check_advance(advance, s0, cfg)?;
    let order = strategy.order(cfg.n_fjms);
    let first = order[0];
    let timing = plant.timing;
    let sampling = plant.sampling;

    let mut fjms = state.fjms.clone();
    let previous: Vec<_> = state.joints.iter().map(JointState::bend_vector).collect();
    let mut rec = Recorder::new(plant, t0, previous);
    let s1 = s0 + advance;

    // 0: hold
    rec.event(0, None, Action::Hold, s0);

    // 1: unjam the first FJM
    rec.event(1, Some(first), Action::Unjam, s0);
    fjms[first].jammed = false;
    let (layout, arcs) = body_layout(s0, cfg);
    let depth = jammed_depth(&fjms);
    rec.settle(1, s0, layout, path_joints(path, &arcs, depth, None), timing.unjam)?;

    // 2: propagate; the unjammed FJM rides along with the body
    let n = sampling.propagate.max(1);
    for i in 1..=n {
        let s = s0 + advance * i as f64 / n as f64;
        rec.event(2, Some(first), Action::Propagate, s);
        fjms[first].insertion_depth = s;
        let (layout, arcs) = body_layout(s, cfg);
        let depth = jammed_depth(&fjms);
        rec.settle(2, s, layout, path_joints(path, &arcs, depth, None), timing.propagate / n as f64)?;
    }
    let s = s1;
    fjms[first].insertion_depth = s1;

    // 3: steer the head joint, which now sits at the open end of the path
    let head_arc = s1 - cfg.seg_length;
    let loss = tracking_loss(steer, first, plant.stiffness, cfg)?;
    let target = steer.bend_vector() * (1.0 - loss);
    let (layout, arcs) = body_layout(s, cfg);
    let depth = jammed_depth(&fjms);
    let n = sampling.steer.max(1);
    for i in 1..=n {
        rec.event(3, None, Action::Steer, s);
        let q = target * (i as f64 / n as f64);
        rec.settle(3, s, layout, path_joints(path, &arcs, depth, Some((head_arc, q))), timing.steer / n as f64)?;
    }

    // 4: jam and commit every vertex the body moved past
    rec.event(4, Some(first), Action::Jam, s);
    fjms[first].jammed = true;
    let solved = rec.previous.clone();
    let mut new_path = path.clone();
    for v in 0..n_new {
        let u = s0 + v as f64 * cfg.seg_length;
        let j = arcs
            .iter()
            .position(|&a| (a - u).abs() <= ARC_EPS)
            .expect("a joint sits on every new vertex");
        new_path.commit(solved[j]);
    }
    let depth = jammed_depth(&fjms);
    rec.settle(4, s, layout, path_joints(&new_path, &arcs, depth, None), timing.jam)?;

    // 5..8: bring the other FJMs up to the first one
    for (i, &f) in order.iter().enumerate().skip(1) {
        let (unjam, extend, jam) = if i == 1 { (5, 6, 7) } else { (8, 8, 8) };
        rec.event(unjam, Some(f), Action::Unjam, s);
        fjms[f].jammed = false;
        let depth = jammed_depth(&fjms);
        rec.settle(unjam, s, layout, path_joints(&new_path, &arcs, depth, None), timing.unjam)?;

        rec.event(extend, Some(f), Action::Extend, s);
        fjms[f].insertion_depth = fjms[first].insertion_depth;
        rec.settle(extend, s, layout, path_joints(&new_path, &arcs, depth, None), timing.extend)?;

        rec.event(jam, Some(f), Action::Jam, s);
        fjms[f].jammed = true;
        let depth = jammed_depth(&fjms);
        rec.settle(jam, s, layout, path_joints(&new_path, &arcs, depth, None), timing.jam)?;
    }

    let (record, angles) = rec.finish();
    let next = RobotState {
        joints: angles.into_iter().map(JointState::from_bend_vector).collect(),
        fjms,
        base_insertion: s1,
        tendon_commands: joint_channel_lengths(steer, cfg)?.tendon,
    };
    Ok((next, new_path, record))
}

fn jammed_depth(fjms: &[FjmState]) -> f64 {
    fjms.iter()
        .filter(|f| f.jammed)
        .map(|f| f.insertion_depth)
        .fold(0.0, f64::max)
}

/// Head-joint command that turns the next segment onto the trajectory tangent
/// at the middle of that segment. `tip` is the frame at the open end of the
/// path, `tip_arc` its arc length.
pub fn plan_steering(
    trajectory: &Trajectory,
    tip: &Pose,
    tip_arc: f64,
    slack: f64,
    cfg: &RobotConfig,
) -> Result<JointState> {
    let target = trajectory.tangent_at(tip_arc + 0.5 * cfg.seg_length);
    let q = bend_towards(&(tip.orientation.inverse() * target));
    let required = q.norm();
    if required > cfg.sharp_limit + slack + 1e-12 {
        return Err(Error::TargetUnreachable {
            required,
            limit: cfg.sharp_limit,
            slack,
        });
    }
    let q = if required > cfg.sharp_limit {
        q * (cfg.sharp_limit / required)
    } else {
        q
    };
    Ok(JointState::from_bend_vector(q))
}

/// Per-joint rest bend of the tendon-only body: a single constant-curvature
/// section whose tip turns by `section_bend`. Rotations about one fixed axis
/// compose, so `m` equal joints share the bend evenly.
pub fn tdcr_joint_bend(section_bend: &Vector2<f64>, n_joints: usize, cfg: &RobotConfig) -> Vector2<f64> {
    if n_joints == 0 {
        return Vector2::zeros();
    }
    let q = section_bend / n_joints as f64;
    let n = q.norm();
    if n > cfg.sharp_limit {
        q * (cfg.sharp_limit / n)
    } else {
        q
    }
}

/// One tendon-only advance: every FJM stays unjammed, the base feeds `advance`
/// mm while the tendons move from the previous per-joint bend to the one for
/// `section_bend`.
pub fn tdcr_baseline_step(
    state: &RobotState,
    section_bend: &Vector2<f64>,
    advance: f64,
    plant: &Plant,
    t0: f64,
) -> Result<(RobotState, CycleRecord)> {
    let cfg = plant.cfg;
    if state.fjms.iter().any(|f| f.jammed) {
        return Err(Error::CycleState("the tendon-only body runs with every FJM unjammed".into()));
    }
    let s0 = state.base_insertion;
    check_advance(advance, s0, cfg)?;
    let s1 = s0 + advance;
    let (_, final_arcs) = body_layout(s1, cfg);
    let from = bend_from_tendon_lengths(&state.tendon_commands, cfg)?.bend_vector();
    let to = tdcr_joint_bend(section_bend, final_arcs.len(), cfg);

    let previous: Vec<_> = state.joints.iter().map(JointState::bend_vector).collect();
    let mut rec = Recorder::new(plant, t0, previous);
    let n = plant.sampling.propagate.max(1);
    for i in 1..=n {
        let sigma = i as f64 / n as f64;
        let s = s0 + advance * sigma;
        rec.event(2, None, Action::Propagate, s);
        let rest = from * (1.0 - sigma) + to * sigma;
        let (layout, arcs) = body_layout(s, cfg);
        let joints = arcs.iter().map(|_| JointTerm::free(rest)).collect();
        rec.settle(2, s, layout, joints, plant.timing.propagate / n as f64)?;
    }
    let (record, angles) = rec.finish();
    let next = RobotState {
        joints: angles.into_iter().map(JointState::from_bend_vector).collect(),
        fjms: state.fjms.clone(),
        base_insertion: s1,
        tendon_commands: joint_channel_lengths(&JointState::from_bend_vector(to), cfg)?.tendon,
    };
    Ok((next, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_trajectory, BendClass, TrajectoryKind, TrajectoryOptions};
    use crate::geometry::forward_kinematics;
    use approx::assert_relative_eq;

    fn plant<'a>(cfg: &'a RobotConfig, stiffness: &'a StiffnessModel) -> Plant<'a> {
        Plant::new(cfg, stiffness, &[])
    }

    fn start(cfg: &RobotConfig) -> (RobotState, ConservedPath) {
        (
            RobotState::initial(cfg).unwrap(),
            ConservedPath::new(&Pose::identity(), cfg.seg_length),
        )
    }

    #[test]
    fn straight_cycle_advances_one_segment() {
        let cfg = RobotConfig::default();
        let stiff = StiffnessModel::ideal();
        let p = plant(&cfg, &stiff);
        let (state, path) = start(&cfg);
        let (next, path, rec) = execute_cycle(
            &state,
            &path,
            &JointState::straight(),
            15.0,
            &ExtensionStrategy::es(1),
            &p,
            0.0,
        )
        .unwrap();
        assert_eq!(next.base_insertion, 30.0);
        assert!(next.joints.iter().all(|j| j.bend == 0.0));
        let tip = rec.frames.last().unwrap().chain().tip();
        assert_relative_eq!(tip, Vector3::new(0.0, 0.0, 30.0), epsilon = 1e-12);
        assert_eq!(path.samples().len(), 3);
        assert_relative_eq!(path.end_pose().position, Vector3::new(0.0, 0.0, 30.0), epsilon = 1e-12);
    }

    #[test]
    fn steered_head_is_committed_exactly() {
        let cfg = RobotConfig::default();
        let stiff = StiffnessModel::ideal();
        let p = plant(&cfg, &stiff);
        let (mut state, mut path) = start(&cfg);
        let es = ExtensionStrategy::es(2);
        for _ in 0..2 {
            (state, path, _) = execute_cycle(&state, &path, &JointState::new(0.05, 1.0), 15.0, &es, &p, 0.0).unwrap();
        }
        let before = path.samples().to_vec();
        let steer = JointState::new(10f64.to_radians(), 0.0);
        let (next, after, _) = execute_cycle(&state, &path, &steer, 15.0, &es, &p, 0.0).unwrap();
        assert_eq!(&after.samples()[..before.len()], &before[..]);
        assert_eq!(next.joints.last().unwrap().bend_vector(), steer.bend_vector());
        assert_eq!(after.vertex_bend(3), steer.bend_vector());
        for (a, b) in next.joints.iter().zip(&state.joints) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ideal_cycles_reproduce_forward_kinematics() {
        let cfg = RobotConfig::default();
        let stiff = StiffnessModel::ideal();
        let p = plant(&cfg, &stiff);
        let (mut state, mut path) = start(&cfg);
        let steer = JointState::new(10f64.to_radians(), 0.0);
        for _ in 0..4 {
            (state, path, _) = execute_cycle(&state, &path, &steer, 15.0, &ExtensionStrategy::es(1), &p, 0.0).unwrap();
        }
        let fk = forward_kinematics(&[steer; 4], &cfg).unwrap();
        let body = forward_kinematics(&state.joints, &cfg).unwrap();
        assert_eq!(fk.len(), body.len());
        let tip = path.end_pose().position;
        let want = fk[4].position + fk[4].orientation * Vector3::z() * cfg.seg_length;
        assert!((tip - want).norm() < 1e-9);
        for (a, b) in fk.iter().zip(&body) {
            assert!((a.position - b.position).norm() < 1e-9);
        }
    }

    #[test]
    fn cycle_restores_boundary_and_unjams_one_at_a_time() {
        let cfg = RobotConfig::default();
        let stiff = StiffnessModel::default();
        let p = plant(&cfg, &stiff);
        for es in 1..=4 {
            let (state, path) = start(&cfg);
            let strategy = ExtensionStrategy::es(es);
            let (next, _, rec) =
                execute_cycle(&state, &path, &JointState::new(0.1, 0.3), 30.0, &strategy, &p, 0.0).unwrap();
            assert!(next.at_cycle_boundary());
            assert!(next.fjms.iter().all(|f| (f.insertion_depth - 45.0).abs() < 1e-9));
            let mut unjammed = 0i32;
            let mut seen = vec![0; cfg.n_fjms];
            for e in &rec.events {
                match e.action {
                    Action::Unjam => {
                        unjammed += 1;
                        seen[e.fjm_index.unwrap()] += 1;
                    }
                    Action::Jam => unjammed -= 1,
                    _ => {}
                }
                assert!((0..=1).contains(&unjammed));
            }
            assert_eq!(unjammed, 0);
            assert!(seen.iter().all(|&c| c == 1));
            let first = rec.events.iter().find(|e| e.action == Action::Unjam).unwrap();
            assert_eq!(first.fjm_index, Some(es - 1));
            assert!(rec.events.windows(2).all(|w| w[0].time_s <= w[1].time_s));
        }
    }

    #[test]
    fn strategy_order_is_clockwise_permutation() {
        assert_eq!(ExtensionStrategy::es(1).order(4), vec![0, 3, 2, 1]);
        assert_eq!(ExtensionStrategy::es(3).order(4), vec![2, 1, 0, 3]);
    }

    #[test]
    fn cycle_preconditions() {
        let cfg = RobotConfig::default();
        let stiff = StiffnessModel::default();
        let p = plant(&cfg, &stiff);
        let (state, path) = start(&cfg);
        let es = ExtensionStrategy::es(1);
        let too_sharp = JointState::new(20f64.to_radians(), 0.0);
        assert!(matches!(
            execute_cycle(&state, &path, &too_sharp, 15.0, &es, &p, 0.0),
            Err(Error::LimitExceeded { .. })
        ));
        let mut off = state.clone();
        off.fjms[1].jammed = false;
        assert!(matches!(
            execute_cycle(&off, &path, &JointState::straight(), 15.0, &es, &p, 0.0),
            Err(Error::CycleState(_))
        ));
        assert!(execute_cycle(&state, &path, &JointState::straight(), 10.0, &es, &p, 0.0).is_err());
    }

    #[test]
    fn rest_interpolates_between_vertices() {
        let cfg = RobotConfig::default();
        let mut path = ConservedPath::new(&Pose::identity(), 15.0);
        path.commit(Vector2::new(0.1, 0.0));
        path.commit(Vector2::new(0.0, 0.2));
        assert_eq!(path.rest_at(15.0), Vector2::new(0.1, 0.0));
        assert_eq!(path.rest_at(30.0), Vector2::new(0.0, 0.2));
        assert_relative_eq!(path.rest_at(22.5), Vector2::new(0.05, 0.1), epsilon = 1e-15);
        // open end and beyond are straight
        assert_eq!(path.rest_at(45.0), Vector2::zeros());
        assert_relative_eq!(path.rest_at(37.5), Vector2::new(0.0, 0.1), epsilon = 1e-15);
        assert_eq!(path.total_arclength(), 3.0 * cfg.seg_length);
    }

    #[test]
    fn steering_examples() {
        let cfg = RobotConfig::default();
        let opts = TrajectoryOptions::default();
        let straight = build_trajectory(TrajectoryKind::Straight, BendClass::Gentle, &cfg, &opts).unwrap();
        let tip = Pose::new(Vector3::new(0.0, 0.0, 30.0), Default::default());
        let cmd = plan_steering(&straight, &tip, 30.0, 0.0, &cfg).unwrap();
        assert_eq!(cmd.bend, 0.0);

        let c = build_trajectory(TrajectoryKind::C, BendClass::Gentle, &cfg, &opts).unwrap();
        // aligned with the piece before vertex 4
        let tip = Pose::new(c.vertex_point(4), c.piece_orientation(3));
        let cmd = plan_steering(&c, &tip, 60.0, 0.0, &cfg).unwrap();
        assert_relative_eq!(cmd.bend, 10f64.to_radians(), epsilon = 1e-12);
        assert_relative_eq!(cmd.plane, 0.0, epsilon = 1e-12);

        // 20 degrees needed
        let tip = Pose::new(c.vertex_point(4), c.piece_orientation(2));
        assert!(matches!(
            plan_steering(&c, &tip, 60.0, 0.0, &cfg),
            Err(Error::TargetUnreachable { .. })
        ));
        let clamped = plan_steering(&c, &tip, 60.0, 6f64.to_radians(), &cfg).unwrap();
        assert_relative_eq!(clamped.bend, cfg.sharp_limit, epsilon = 1e-12);
    }

    #[test]
    fn tracking_loss_depends_on_fjm_and_sharpness() {
        let cfg = RobotConfig::default();
        let stiff = StiffnessModel::default();
        let gentle = JointState::new(cfg.gentle_limit, 0.0);
        let sharp = JointState::new(cfg.sharp_limit, 0.0);
        let g0 = tracking_loss(&gentle, 0, &stiff, &cfg).unwrap();
        let g1 = tracking_loss(&gentle, 1, &stiff, &cfg).unwrap();
        assert!(g0 > 0.0 && g1 > 0.0 && g0 != g1);
        let mean = (0..4).map(|k| tracking_loss(&gentle, k, &stiff, &cfg).unwrap()).sum::<f64>() / 4.0;
        assert_relative_eq!(mean, stiff.tracking_error, epsilon = 1e-12);
        let s0 = tracking_loss(&sharp, 0, &stiff, &cfg).unwrap();
        let mean_sharp = (0..4).map(|k| tracking_loss(&sharp, k, &stiff, &cfg).unwrap()).sum::<f64>() / 4.0;
        assert!(s0 > g0);
        assert_relative_eq!(mean_sharp, stiff.tracking_error * stiff.sharp_friction, epsilon = 1e-12);
    }

    #[test]
    fn tdcr_straight_has_no_force() {
        let cfg = RobotConfig::default();
        let stiff = StiffnessModel::default();
        let opts = TrajectoryOptions::default();
        let straight = build_trajectory(TrajectoryKind::Straight, BendClass::Gentle, &cfg, &opts).unwrap();
        let rings = crate::environment::place_checkpoints(&straight, &cfg, &Default::default()).unwrap();
        let p = Plant::new(&cfg, &stiff, &rings);
        let mut state = RobotState::tdcr_initial(&cfg).unwrap();
        let mut t = 0.0;
        for _ in 1..cfg.n_segments {
            let (next, rec) = tdcr_baseline_step(&state, &Vector2::zeros(), 15.0, &p, t).unwrap();
            t = rec.end_time;
            assert!(rec.frames.iter().flat_map(|f| &f.readings).all(|r| r.force == 0.0));
            state = next;
        }
        assert_eq!(state.base_insertion, cfg.body_length());
        assert!(state.joints.iter().all(|j| j.bend == 0.0));
    }

    #[test]
    fn tdcr_bends_uniformly() {
        let cfg = RobotConfig::default();
        let stiff = StiffnessModel::default();
        let p = plant(&cfg, &stiff);
        let state = RobotState::tdcr_initial(&cfg).unwrap();
        let bend = Vector2::new(0.3, 0.0);
        let (next, _) = tdcr_baseline_step(&state, &bend, 45.0, &p, 0.0).unwrap();
        assert_eq!(next.joints.len(), 3);
        for j in &next.joints {
            assert_relative_eq!(j.bend_vector(), Vector2::new(0.1, 0.0), epsilon = 1e-12);
        }
        assert!(next.fjms.iter().all(|f| !f.jammed));
    }
}
