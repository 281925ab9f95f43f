//! Reference trajectories, checkpoint rings and tip-phase classification.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chain_frames, ChainFrames, ChainLayout, JointState, RobotConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrajectoryKind {
    #[serde(rename = "C")]
    C,
    #[serde(rename = "S")]
    S,
    #[serde(rename = "spiral")]
    Spiral,
    #[serde(rename = "straight")]
    Straight,
    #[serde(rename = "custom")]
    Custom,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 5] = [
        TrajectoryKind::C,
        TrajectoryKind::S,
        TrajectoryKind::Spiral,
        TrajectoryKind::Straight,
        TrajectoryKind::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TrajectoryKind::C => "C",
            TrajectoryKind::S => "S",
            TrajectoryKind::Spiral => "spiral",
            TrajectoryKind::Straight => "straight",
            TrajectoryKind::Custom => "custom",
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrajectoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidTrajectory(format!(
                    "unknown trajectory kind {s:?}; expected one of C, S, spiral, straight, custom"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BendClass {
    Gentle,
    Sharp,
}

impl BendClass {
    pub fn angle(&self, cfg: &RobotConfig) -> f64 {
        match self {
            BendClass::Gentle => cfg.gentle_limit,
            BendClass::Sharp => cfg.sharp_limit,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BendClass::Gentle => "gentle",
            BendClass::Sharp => "sharp",
        }
    }
}

impl fmt::Display for BendClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shape parameters that [`build_trajectory`] does not take from the kind/class pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryOptions {
    /// Bent joints per section (C has one section, S two).
    pub section_joints: usize,
    /// Straight vertices before the first bend.
    pub lead_in: usize,
    /// Azimuth increment between consecutive spiral joints, rad.
    pub spiral_azimuth_step: f64,
    /// Per-vertex bends for the custom kind, `[Δθ, Δγ]` in rad.
    pub bends: Vec<[f64; 2]>,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            section_joints: 4,
            lead_in: 2,
            spiral_azimuth_step: 30f64.to_radians(),
            bends: Vec::new(),
        }
    }
}

/// A path made of `n_segments` straight pieces of one segment length each,
/// joined at vertices `1..n_segments` by joint-model bends. Vertex `k` sits at
/// arc length `k·seg_length`; vertex 0 is the base outlet.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub bend_class: BendClass,
    pub seg_length: f64,
    /// Bend at vertices `1..n_segments`.
    pub bends: Vec<JointState>,
    frames: ChainFrames,
}

impl Trajectory {
    pub fn from_bends(
        kind: TrajectoryKind,
        bend_class: BendClass,
        bends: Vec<JointState>,
        cfg: &RobotConfig,
    ) -> Result<Self> {
        if bends.len() + 1 != cfg.n_segments {
            return Err(Error::InvalidTrajectory(format!(
                "{} vertex bends given for a {}-segment path",
                bends.len(),
                cfg.n_segments
            )));
        }
        if let Some((k, b)) = bends
            .iter()
            .enumerate()
            .find(|(_, b)| !b.within(cfg.sharp_limit))
        {
            return Err(Error::InvalidTrajectory(format!(
                "vertex {} bends {:.4} rad, beyond the {:.4} rad limit",
                k + 1,
                b.bend.abs(),
                cfg.sharp_limit
            )));
        }
        let vectors: Vec<_> = bends.iter().map(JointState::bend_vector).collect();
        let frames = chain_frames(&ChainLayout::uniform(cfg.seg_length), &vectors);
        Ok(Self {
            kind,
            bend_class,
            seg_length: cfg.seg_length,
            bends,
            frames,
        })
    }

    pub fn n_pieces(&self) -> usize {
        self.bends.len() + 1
    }

    pub fn total_length(&self) -> f64 {
        self.n_pieces() as f64 * self.seg_length
    }

    /// Bend vector at vertex `k`; zero at the outlet and past the end.
    pub fn vertex_bend(&self, k: usize) -> Vector2<f64> {
        if k == 0 || k > self.bends.len() {
            Vector2::zeros()
        } else {
            self.bends[k - 1].bend_vector()
        }
    }

    pub fn vertex_point(&self, k: usize) -> Vector3<f64> {
        let n = self.n_pieces();
        if k <= n {
            self.frames.points[k]
        } else {
            self.frames.points[n] + self.piece_orientation(n) * Vector3::z() * ((k - n) as f64 * self.seg_length)
        }
    }

    /// Orientation of piece `i` (from vertex `i` to `i + 1`); pieces past the
    /// end continue straight.
    pub fn piece_orientation(&self, i: usize) -> Rotation3<f64> {
        self.frames.orientations[i.min(self.n_pieces() - 1)]
    }

    fn locate(&self, arclength: f64) -> (usize, f64) {
        let s = arclength.max(0.0) / self.seg_length;
        let i = s.floor();
        (i as usize, (s - i) * self.seg_length)
    }

    pub fn point_at(&self, arclength: f64) -> Vector3<f64> {
        let (i, rem) = self.locate(arclength);
        self.vertex_point(i) + self.piece_orientation(i) * Vector3::z() * rem
    }

    /// Unit tangent of the piece that contains `arclength` (the distal piece at a vertex).
    pub fn tangent_at(&self, arclength: f64) -> Vector3<f64> {
        let (i, _) = self.locate(arclength);
        self.piece_orientation(i) * Vector3::z()
    }

    /// Vertex indices with a non-zero bend.
    pub fn bent_vertices(&self) -> Vec<usize> {
        self.bends
            .iter()
            .enumerate()
            .filter(|(_, b)| b.bend != 0.0)
            .map(|(k, _)| k + 1)
            .collect()
    }

    /// Points along the path every `step` mm, end point included.
    pub fn sample(&self, step: f64) -> Vec<Vector3<f64>> {
        let n = (self.total_length() / step).ceil() as usize;
        (0..=n)
            .map(|i| self.point_at((i as f64 * step).min(self.total_length())))
            .collect()
    }
}

pub fn build_trajectory(
    kind: TrajectoryKind,
    bend_class: BendClass,
    cfg: &RobotConfig,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    let n_vertices = cfg.n_segments - 1;
    let angle = bend_class.angle(cfg);
    let mut bends = vec![JointState::straight(); n_vertices];
    let sections = match kind {
        TrajectoryKind::C => 1,
        TrajectoryKind::S => 2,
        _ => 0,
    };
    if sections > 0 {
        let needed = opts.lead_in + sections * opts.section_joints;
        if opts.section_joints == 0 || needed > n_vertices {
            return Err(Error::InvalidTrajectory(format!(
                "{kind} needs {needed} vertices ({} lead-in + {sections}×{}) but the body has {n_vertices}",
                opts.lead_in, opts.section_joints
            )));
        }
    }
    match kind {
        TrajectoryKind::Straight => {}
        TrajectoryKind::C | TrajectoryKind::S => {
            for s in 0..sections {
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                for j in 0..opts.section_joints {
                    bends[opts.lead_in + s * opts.section_joints + j] = JointState::new(sign * angle, 0.0);
                }
            }
        }
        TrajectoryKind::Spiral => {
            if opts.lead_in >= n_vertices {
                return Err(Error::InvalidTrajectory(format!(
                    "spiral lead-in {} leaves no bent vertices",
                    opts.lead_in
                )));
            }
            for (i, b) in bends.iter_mut().enumerate().skip(opts.lead_in) {
                let step = (i - opts.lead_in) as f64;
                *b = JointState::new(angle, step * opts.spiral_azimuth_step);
            }
        }
        TrajectoryKind::Custom => {
            if opts.bends.len() > n_vertices {
                return Err(Error::InvalidTrajectory(format!(
                    "{} custom bends for {n_vertices} vertices",
                    opts.bends.len()
                )));
            }
            for (b, [theta, gamma]) in bends.iter_mut().zip(&opts.bends) {
                *b = JointState::new(*theta, *gamma);
            }
        }
    }
    Trajectory::from_bends(kind, bend_class, bends, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointLabel {
    Bottom,
    Middle,
    Top,
}

impl CheckpointLabel {
    pub const ALL: [CheckpointLabel; 3] = [CheckpointLabel::Bottom, CheckpointLabel::Middle, CheckpointLabel::Top];

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckpointLabel::Bottom => "bottom",
            CheckpointLabel::Middle => "middle",
            CheckpointLabel::Top => "top",
        }
    }
}

impl fmt::Display for CheckpointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Instrumented ring the body passes through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub label: CheckpointLabel,
    pub center: Vector3<f64>,
    /// Ring normal, pointing along the direction of travel.
    pub axis: Vector3<f64>,
    /// mm
    pub inner_diameter: f64,
    /// Unit vector in the ring plane along which the single-axis sensor reads.
    pub sensor_axis: Vector3<f64>,
    /// Arc length of the ring center along the reference trajectory, mm.
    pub arclength: f64,
}

impl Checkpoint {
    /// Radial play between a body of `body_radius` and the ring.
    pub fn clearance(&self, body_radius: f64) -> f64 {
        0.5 * self.inner_diameter - body_radius
    }

    pub fn rotated_by(&self, rot: &Rotation3<f64>) -> Self {
        Self {
            center: rot * self.center,
            axis: rot * self.axis,
            sensor_axis: rot * self.sensor_axis,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckpointLayout {
    /// Arc fractions of the bottom, middle and top rings.
    pub fractions: [f64; 3],
    /// mm
    pub inner_diameter: f64,
}

impl Default for CheckpointLayout {
    fn default() -> Self {
        Self {
            fractions: [0.1, 0.5, 0.9],
            inner_diameter: 20.0,
        }
    }
}

pub fn place_checkpoints(
    traj: &Trajectory,
    cfg: &RobotConfig,
    layout: &CheckpointLayout,
) -> Result<Vec<Checkpoint>> {
    let total = traj.total_length();
    let required = 3.0 * cfg.seg_length;
    if total < required {
        return Err(Error::TrajectoryTooShort { length: total, required });
    }
    if layout.inner_diameter <= cfg.seg_diameter {
        return Err(Error::InvalidConfig(format!(
            "ring inner diameter {} must exceed the body diameter {}",
            layout.inner_diameter, cfg.seg_diameter
        )));
    }
    let f = layout.fractions;
    if !(0.0 < f[0] && f[0] < f[1] && f[1] < f[2] && f[2] < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "checkpoint fractions must be increasing inside (0, 1), got {f:?}"
        )));
    }
    let bent = traj.bent_vertices();
    Ok(CheckpointLabel::ALL
        .iter()
        .zip(f)
        .map(|(&label, frac)| {
            let u = frac * total;
            let axis = ring_axis(traj, u);
            let sensor_axis = outer_side(traj, &bent, u, &axis);
            Checkpoint {
                label,
                center: traj.point_at(u),
                axis,
                inner_diameter: layout.inner_diameter,
                sensor_axis,
                arclength: u,
            }
        })
        .collect())
}

/// Tangent at `u`, bisecting the two adjacent pieces when `u` is a vertex.
fn ring_axis(traj: &Trajectory, u: f64) -> Vector3<f64> {
    let s = u / traj.seg_length;
    let k = s.round();
    if (s - k).abs() < 1e-9 && k >= 1.0 {
        let k = k as usize;
        (traj.piece_orientation(k - 1) * Vector3::z() + traj.piece_orientation(k) * Vector3::z()).normalize()
    } else {
        traj.tangent_at(u)
    }
}

/// Unit vector in the ring plane pointing away from the centre of curvature of
/// the nearest bend.
fn outer_side(traj: &Trajectory, bent: &[usize], u: f64, axis: &Vector3<f64>) -> Vector3<f64> {
    let in_plane = |v: Vector3<f64>| {
        let p = v - axis * axis.dot(&v);
        (p.norm() > 1e-9).then(|| p.normalize())
    };
    let nearest = bent.iter().copied().min_by(|a, b| {
        let da = (*a as f64 * traj.seg_length - u).abs();
        let db = (*b as f64 * traj.seg_length - u).abs();
        da.total_cmp(&db)
    });
    if let Some(k) = nearest {
        let q = traj.vertex_bend(k);
        let dir = traj.piece_orientation(k - 1) * Vector3::new(q.x, q.y, 0.0);
        if let Some(v) = in_plane(-dir) {
            return v;
        }
    }
    in_plane(Vector3::x())
        .or_else(|| in_plane(Vector3::y()))
        .expect("x and y cannot both be parallel to the ring axis")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseLabel {
    I,
    II,
    III,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 3] = [PhaseLabel::I, PhaseLabel::II, PhaseLabel::III];

    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::I => "I",
            PhaseLabel::II => "II",
            PhaseLabel::III => "III",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Phase I while only the bottom ring can be reached, II once the tip is at or
/// past the middle ring, III once it reaches the top ring.
pub fn classify_phase(tip_arclength: f64, checkpoints: &[Checkpoint]) -> PhaseLabel {
    let arc = |label| {
        checkpoints
            .iter()
            .find(|c| c.label == label)
            .map_or(f64::INFINITY, |c| c.arclength)
    };
    let eps = 1e-9;
    if tip_arclength + eps >= arc(CheckpointLabel::Top) {
        PhaseLabel::III
    } else if tip_arclength + eps >= arc(CheckpointLabel::Middle) {
        PhaseLabel::II
    } else {
        PhaseLabel::I
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::forward_kinematics;
    use approx::assert_relative_eq;

    fn cfg() -> RobotConfig {
        RobotConfig::default()
    }

    fn build(kind: TrajectoryKind, class: BendClass) -> Trajectory {
        build_trajectory(kind, class, &cfg(), &TrajectoryOptions::default()).unwrap()
    }

    #[test]
    fn c_gentle_has_four_ten_degree_joints() {
        let t = build(TrajectoryKind::C, BendClass::Gentle);
        let bent: Vec<_> = t.bends.iter().filter(|b| b.bend != 0.0).collect();
        assert_eq!(bent.len(), 4);
        for b in bent {
            assert_relative_eq!(b.bend, 10f64.to_radians(), epsilon = 1e-15);
        }
        assert_eq!(t.bent_vertices(), vec![3, 4, 5, 6]);
    }

    #[test]
    fn s_sharp_has_opposing_sections() {
        let t = build(TrajectoryKind::S, BendClass::Sharp);
        let signs: Vec<f64> = t.bends.iter().map(|b| b.bend.signum() * (b.bend != 0.0) as u8 as f64).collect();
        assert_eq!(&signs[2..10], &[1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]);
        for b in &t.bends[2..10] {
            assert_relative_eq!(b.bend.abs(), 15f64.to_radians(), epsilon = 1e-15);
        }
        // net heading returns to the base axis
        assert_relative_eq!(t.tangent_at(t.total_length() - 1.0), Vector3::z(), epsilon = 1e-12);
    }

    #[test]
    fn straight_is_all_zero() {
        let t = build(TrajectoryKind::Straight, BendClass::Gentle);
        assert!(t.bends.iter().all(|b| b.bend == 0.0));
        assert_relative_eq!(t.point_at(100.0), Vector3::z() * 100.0, epsilon = 1e-12);
    }

    #[test]
    fn spiral_is_non_planar() {
        let t = build(TrajectoryKind::Spiral, BendClass::Gentle);
        let pts = t.sample(1.0);
        let n = pts.len() as f64;
        let mean = pts.iter().sum::<Vector3<f64>>() / n;
        let cov = pts
            .iter()
            .map(|p| (p - mean) * (p - mean).transpose())
            .sum::<nalgebra::Matrix3<f64>>()
            / n;
        let eig = cov.symmetric_eigenvalues();
        assert!(eig.min() > 1e-3, "spiral samples lie in a plane: {eig:?}");
    }

    #[test]
    fn oversized_sections_rejected() {
        let opts = TrajectoryOptions {
            section_joints: 6,
            ..Default::default()
        };
        assert!(build_trajectory(TrajectoryKind::S, BendClass::Gentle, &cfg(), &opts).is_err());
        let opts = TrajectoryOptions {
            bends: vec![[0.5, 0.0]],
            ..Default::default()
        };
        assert!(matches!(
            build_trajectory(TrajectoryKind::Custom, BendClass::Gentle, &cfg(), &opts),
            Err(Error::InvalidTrajectory(_))
        ));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("spiral".parse::<TrajectoryKind>().unwrap(), TrajectoryKind::Spiral);
        assert_eq!("c".parse::<TrajectoryKind>().unwrap(), TrajectoryKind::C);
        assert!("zigzag".parse::<TrajectoryKind>().is_err());
    }

    #[test]
    fn straight_checkpoints_on_axis() {
        let c = cfg();
        let t = build(TrajectoryKind::Straight, BendClass::Gentle);
        let cps = place_checkpoints(&t, &c, &CheckpointLayout::default()).unwrap();
        let l = t.total_length();
        for (cp, f) in cps.iter().zip([0.1, 0.5, 0.9]) {
            assert_relative_eq!(cp.center, Vector3::z() * (f * l), epsilon = 1e-12);
            assert_relative_eq!(cp.axis, Vector3::z(), epsilon = 1e-12);
            assert_relative_eq!(cp.sensor_axis.dot(&cp.axis), 0.0, epsilon = 1e-12);
        }
        assert_relative_eq!(cps[0].clearance(c.body_radius()), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn c_gentle_middle_ring_tilt() {
        let c = cfg();
        let t = build(TrajectoryKind::C, BendClass::Gentle);
        let cps = place_checkpoints(&t, &c, &CheckpointLayout::default()).unwrap();
        // Middle ring at 90 mm = vertex 6, the last bent vertex: its axis bisects
        // the 30° and 40° pieces. Oracle: forward kinematics of the bends.
        let poses = forward_kinematics(&t.bends, &c).unwrap();
        let expected = (poses[5].axis() + poses[6].axis()).normalize();
        assert_relative_eq!(cps[1].axis, expected, epsilon = 1e-12);
        assert_relative_eq!(cps[1].axis.dot(&Vector3::z()).acos(), 35f64.to_radians(), epsilon = 1e-12);
        assert_relative_eq!(cps[1].center, poses[6].position, epsilon = 1e-12);
        // the bend turns towards +x, so the outer side points towards -x
        assert!(cps[1].sensor_axis.x < 0.0);
        assert_relative_eq!(cps[1].sensor_axis.dot(&cps[1].axis), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ring_must_clear_body() {
        let t = build(TrajectoryKind::Straight, BendClass::Gentle);
        let layout = CheckpointLayout {
            inner_diameter: 15.0,
            ..Default::default()
        };
        assert!(place_checkpoints(&t, &cfg(), &layout).is_err());
    }

    #[test]
    fn short_trajectory_rejected() {
        let mut c = cfg();
        c.n_segments = 2;
        let t = build_trajectory(TrajectoryKind::Straight, BendClass::Gentle, &c, &TrajectoryOptions::default()).unwrap();
        assert!(matches!(
            place_checkpoints(&t, &c, &CheckpointLayout::default()),
            Err(Error::TrajectoryTooShort { .. })
        ));
    }

    #[test]
    fn phases() {
        let c = cfg();
        let t = build(TrajectoryKind::Straight, BendClass::Gentle);
        let cps = place_checkpoints(&t, &c, &CheckpointLayout::default()).unwrap();
        assert_eq!(classify_phase(0.0, &cps), PhaseLabel::I);
        assert_eq!(classify_phase(30.0, &cps), PhaseLabel::I);
        assert_eq!(classify_phase(90.5, &cps), PhaseLabel::II);
        assert_eq!(classify_phase(180.0, &cps), PhaseLabel::III);
        let mut prev = PhaseLabel::I;
        for i in 0..=180 {
            let p = classify_phase(i as f64, &cps);
            assert!(p >= prev);
            prev = p;
        }
    }
}
