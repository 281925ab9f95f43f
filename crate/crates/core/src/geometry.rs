//! Robot configuration, joint model, the channel-length law and chain kinematics.
//!
//! Segments are rigid cylinders joined by sphere-contact joints. Each joint is a
//! pure two-degree-of-freedom bend: a magnitude `Δθ` and a bend-plane azimuth
//! `Δγ` measured in the proximal segment's cross-section frame. There is no
//! axial torsion, so a chain of joints is fully described by one bend vector
//! `q = Δθ·(cos Δγ, sin Δγ)` per joint.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of tendons routed through every segment.
pub const N_TENDONS: usize = 4;

/// Geometry and limits of the segmented body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RobotConfigFile")]
pub struct RobotConfig {
    pub n_segments: usize,
    /// mm
    pub seg_length: f64,
    /// mm
    pub seg_diameter: f64,
    /// Radius `r` of the joint contact sphere, mm.
    pub joint_sphere_radius: f64,
    /// mm
    pub tendon_pitch_radius: f64,
    /// mm
    pub fjm_pitch_radius: f64,
    /// Angular position of the tendon outlets on the joint sphere, rad.
    pub alpha: f64,
    /// Angular position of the FJM channel outlets on the joint sphere, rad.
    pub beta: f64,
    /// rad
    pub gentle_limit: f64,
    /// Mechanical bend limit per joint, rad.
    pub sharp_limit: f64,
    pub n_tendons: usize,
    pub n_fjms: usize,
}

/// On-disk form: `alpha` and `beta` default to values derived from the pitch
/// radii actually given in the same file.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RobotConfigFile {
    n_segments: usize,
    seg_length: f64,
    seg_diameter: f64,
    joint_sphere_radius: f64,
    tendon_pitch_radius: f64,
    fjm_pitch_radius: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    gentle_limit: f64,
    sharp_limit: f64,
    n_tendons: usize,
    n_fjms: usize,
}

impl Default for RobotConfigFile {
    fn default() -> Self {
        let d = RobotConfig::default();
        Self {
            n_segments: d.n_segments,
            seg_length: d.seg_length,
            seg_diameter: d.seg_diameter,
            joint_sphere_radius: d.joint_sphere_radius,
            tendon_pitch_radius: d.tendon_pitch_radius,
            fjm_pitch_radius: d.fjm_pitch_radius,
            alpha: None,
            beta: None,
            gentle_limit: d.gentle_limit,
            sharp_limit: d.sharp_limit,
            n_tendons: d.n_tendons,
            n_fjms: d.n_fjms,
        }
    }
}

impl From<RobotConfigFile> for RobotConfig {
    fn from(f: RobotConfigFile) -> Self {
        let r = f.joint_sphere_radius;
        Self {
            n_segments: f.n_segments,
            seg_length: f.seg_length,
            seg_diameter: f.seg_diameter,
            joint_sphere_radius: r,
            tendon_pitch_radius: f.tendon_pitch_radius,
            fjm_pitch_radius: f.fjm_pitch_radius,
            alpha: f
                .alpha
                .unwrap_or_else(|| (f.tendon_pitch_radius / r).clamp(-1.0, 1.0).asin()),
            beta: f
                .beta
                .unwrap_or_else(|| (f.fjm_pitch_radius / r).clamp(-1.0, 1.0).asin()),
            gentle_limit: f.gentle_limit,
            sharp_limit: f.sharp_limit,
            n_tendons: f.n_tendons,
            n_fjms: f.n_fjms,
        }
    }
}

impl Default for RobotConfig {
    fn default() -> Self {
        let r = 7.5;
        let tendon_pitch_radius = 6.0;
        let fjm_pitch_radius = 4.5;
        Self {
            n_segments: 12,
            seg_length: 15.0,
            seg_diameter: 15.0,
            joint_sphere_radius: r,
            tendon_pitch_radius,
            fjm_pitch_radius,
            alpha: (tendon_pitch_radius / r).asin(),
            beta: (fjm_pitch_radius / r).asin(),
            gentle_limit: 10f64.to_radians(),
            sharp_limit: 15f64.to_radians(),
            n_tendons: N_TENDONS,
            n_fjms: 4,
        }
    }
}

impl RobotConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_segments < 2 {
            return fail(format!("n_segments must be >= 2, got {}", self.n_segments));
        }
        for (name, v) in [
            ("seg_length", self.seg_length),
            ("seg_diameter", self.seg_diameter),
            ("joint_sphere_radius", self.joint_sphere_radius),
            ("tendon_pitch_radius", self.tendon_pitch_radius),
            ("fjm_pitch_radius", self.fjm_pitch_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < FRAC_PI_2) {
            return fail(format!("alpha must lie in (0, π/2), got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < FRAC_PI_2) {
            return fail(format!("beta must lie in (0, π/2), got {}", self.beta));
        }
        if self.beta >= self.alpha {
            return fail(format!(
                "beta ({}) must be smaller than alpha ({})",
                self.beta, self.alpha
            ));
        }
        if !(self.gentle_limit > 0.0 && self.gentle_limit <= self.sharp_limit) {
            return fail(format!(
                "limits must satisfy 0 < gentle_limit ({}) <= sharp_limit ({})",
                self.gentle_limit, self.sharp_limit
            ));
        }
        if self.sharp_limit >= FRAC_PI_2 {
            return fail(format!("sharp_limit must be below π/2, got {}", self.sharp_limit));
        }
        if self.n_tendons != N_TENDONS {
            return fail(format!("n_tendons must be {N_TENDONS}, got {}", self.n_tendons));
        }
        if !(2..=4).contains(&self.n_fjms) {
            return fail(format!(
                "n_fjms must be between 2 and 4 (FTL needs at least two), got {}",
                self.n_fjms
            ));
        }
        Ok(())
    }

    /// Body radius, mm.
    pub fn body_radius(&self) -> f64 {
        0.5 * self.seg_diameter
    }

    /// Full body length, mm.
    pub fn body_length(&self) -> f64 {
        self.n_segments as f64 * self.seg_length
    }
}

/// Inter-segment bend.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    /// Signed bend magnitude `Δθ`, rad.
    pub bend: f64,
    /// Bend-plane azimuth `Δγ` in `[0, 2π)`, rad.
    pub plane: f64,
}

impl JointState {
    pub fn new(bend: f64, plane: f64) -> Self {
        Self {
            bend,
            plane: normalize_angle(plane),
        }
    }

    pub fn straight() -> Self {
        Self::default()
    }

    /// Inverse of [`JointState::bend_vector`]; the magnitude is returned non-negative.
    pub fn from_bend_vector(q: Vector2<f64>) -> Self {
        let bend = q.norm();
        if bend == 0.0 {
            return Self::straight();
        }
        Self::new(bend, q.y.atan2(q.x))
    }

    /// `Δθ·(cos Δγ, sin Δγ)`.
    pub fn bend_vector(&self) -> Vector2<f64> {
        Vector2::new(self.plane.cos(), self.plane.sin()) * self.bend
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        joint_rotation(&self.bend_vector())
    }

    /// `|Δθ| <= limit` (with a few ulps of slack for round-tripped values).
    pub fn within(&self, limit: f64) -> bool {
        self.bend.abs() <= limit * (1.0 + 1e-12)
    }
}

/// Wrap to `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Position and orientation in the world frame. The local `z` axis is the
/// segment axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Rotation3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: Rotation3::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: Rotation3<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    /// Proper rotation check: orthonormal to `tol` and `det = +1`.
    pub fn is_proper(&self, tol: f64) -> bool {
        let m = self.orientation.matrix();
        let gram = m.transpose() * m - Matrix3::identity();
        gram.abs().max() <= tol && (m.determinant() - 1.0).abs() <= tol
    }

    pub fn rotated_by(&self, rot: &Rotation3<f64>) -> Self {
        Self {
            position: rot * self.position,
            orientation: rot * self.orientation,
        }
    }
}

/// Adjustable inter-segment lengths at one joint.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLengths {
    /// Tendons at azimuths `0, π/2, π, 3π/2` of the proximal cross-section.
    pub tendon: [f64; N_TENDONS],
    /// FJM channels at azimuths `π/4, 3π/4, 5π/4, 7π/4`, truncated to `n_fjms`.
    pub fjm: Vec<f64>,
}

/// Azimuth of tendon `k` in the segment cross-section.
pub fn tendon_azimuth(k: usize) -> f64 {
    k as f64 * FRAC_PI_2
}

/// Azimuth of FJM channel `k` in the segment cross-section.
pub fn fjm_azimuth(k: usize) -> f64 {
    FRAC_PI_4 + k as f64 * FRAC_PI_2
}

/// Length between the outlets of a channel at angular position `psi` on a
/// joint sphere of radius `r`, for a bend `bend` whose plane makes the angle
/// `plane` with the channel.
pub fn channel_length(bend: f64, plane: f64, psi: f64, r: f64) -> Result<f64> {
    if !(psi > 0.0 && psi < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "channel angle ψ = {psi} rad must lie in (0, π/2)"
        )));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("sphere radius must be positive, got {r}")));
    }
    if !(bend.abs() <= FRAC_PI_2) {
        return Err(Error::Domain(format!("|Δθ| = {} exceeds π/2", bend.abs())));
    }
    let phi = (psi.tan() * plane.cos()).atan();
    Ok(2.0 * r * (1.0 - psi.cos() / phi.cos() * (phi - 0.5 * bend).cos()))
}

pub fn joint_channel_lengths(joint: &JointState, cfg: &RobotConfig) -> Result<ChannelLengths> {
    let r = cfg.joint_sphere_radius;
    let mut tendon = [0.0; N_TENDONS];
    for (k, l) in tendon.iter_mut().enumerate() {
        *l = channel_length(joint.bend, tendon_azimuth(k) - joint.plane, cfg.alpha, r)?;
    }
    let fjm = (0..cfg.n_fjms.min(4))
        .map(|k| channel_length(joint.bend, fjm_azimuth(k) - joint.plane, cfg.beta, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelLengths { tendon, fjm })
}

/// Recovers the joint bend from the four tendon lengths (inverse of the
/// tendon half of [`joint_channel_lengths`]).
///
/// Opposite tendons differ by `4r·sin α·sin(Δθ/2)·cos` of the plane angle, which
/// gives the bend in closed form.
pub fn bend_from_tendon_lengths(lengths: &[f64; N_TENDONS], cfg: &RobotConfig) -> Result<JointState> {
    let scale = 4.0 * cfg.joint_sphere_radius * cfg.alpha.sin();
    let x = (lengths[2] - lengths[0]) / scale;
    let y = (lengths[3] - lengths[1]) / scale;
    let s = x.hypot(y);
    if s > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "tendon lengths imply sin(Δθ/2) = {s} > 1"
        )));
    }
    if s == 0.0 {
        return Ok(JointState::straight());
    }
    Ok(JointState::new(2.0 * s.min(1.0).asin(), y.atan2(x)))
}

/// Rotation of a joint with bend vector `q`: a turn of `|q|` about the
/// cross-section axis perpendicular to the bend direction.
pub fn joint_rotation(q: &Vector2<f64>) -> Rotation3<f64> {
    Rotation3::new(bend_axis_angle(q))
}

/// Scaled rotation axis of a joint, `ω = (−q_y, q_x, 0)`.
pub(crate) fn bend_axis_angle(q: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(-q.y, q.x, 0.0)
}

/// Right Jacobian of the SO(3) exponential map: `exp(ω + δ) ≈ exp(ω)·exp(J_r(ω)·δ)`.
pub(crate) fn right_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let w = omega.cross_matrix();
    let (a, b) = if theta2 < 1e-8 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() - w * a + w * w * b
}

/// Where a chain starts and how long its segments are.
///
/// The first segment may be shorter than the others: during propagation part of
/// it is still inside the base outlet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainLayout {
    pub base: Pose,
    pub first_length: f64,
    pub seg_length: f64,
}

impl ChainLayout {
    pub fn uniform(seg_length: f64) -> Self {
        Self {
            base: Pose::identity(),
            first_length: seg_length,
            seg_length,
        }
    }

    pub fn segment_length(&self, k: usize) -> f64 {
        if k == 0 {
            self.first_length
        } else {
            self.seg_length
        }
    }
}

/// World-frame sample of a chain with `m` joints: `m + 2` points (base, every
/// joint, tip) and `m + 1` segment orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFrames {
    pub points: Vec<Vector3<f64>>,
    pub orientations: Vec<Rotation3<f64>>,
}

impl ChainFrames {
    pub fn tip(&self) -> Vector3<f64> {
        *self.points.last().expect("chain has a base point")
    }

    pub fn tip_pose(&self) -> Pose {
        Pose::new(self.tip(), *self.orientations.last().expect("chain has a segment"))
    }

    pub fn n_segments(&self) -> usize {
        self.orientations.len()
    }

    /// Proximal pose of every segment.
    pub fn segment_poses(&self) -> Vec<Pose> {
        self.orientations
            .iter()
            .zip(&self.points)
            .map(|(o, p)| Pose::new(*p, *o))
            .collect()
    }
}

pub fn chain_frames(layout: &ChainLayout, bends: &[Vector2<f64>]) -> ChainFrames {
    let mut points = Vec::with_capacity(bends.len() + 2);
    let mut orientations = Vec::with_capacity(bends.len() + 1);
    let mut rot = layout.base.orientation;
    let mut pos = layout.base.position;
    points.push(pos);
    orientations.push(rot);
    pos += rot * Vector3::z() * layout.first_length;
    points.push(pos);
    for q in bends {
        rot *= joint_rotation(q);
        orientations.push(rot);
        pos += rot * Vector3::z() * layout.seg_length;
        points.push(pos);
    }
    ChainFrames {
        points,
        orientations,
    }
}

/// Proximal pose of every segment of a chain whose base sits at the origin
/// along `+z`. `joints` are the inter-segment joints, so the result has
/// `joints.len() + 1` poses.
pub fn forward_kinematics(joints: &[JointState], cfg: &RobotConfig) -> Result<Vec<Pose>> {
    if joints.len() >= cfg.n_segments {
        return Err(Error::InvalidConfig(format!(
            "{} joints given but a {}-segment body has only {}",
            joints.len(),
            cfg.n_segments,
            cfg.n_segments - 1
        )));
    }
    let bends: Vec<_> = joints.iter().map(JointState::bend_vector).collect();
    Ok(chain_frames(&ChainLayout::uniform(cfg.seg_length), &bends).segment_poses())
}

/// Tip position of a uniform chain (distal end of the last segment).
pub fn tip_position(joints: &[JointState], cfg: &RobotConfig) -> Vector3<f64> {
    let bends: Vec<_> = joints.iter().map(JointState::bend_vector).collect();
    chain_frames(&ChainLayout::uniform(cfg.seg_length), &bends).tip()
}

/// Bend vector that turns the local `+z` axis onto `direction` (expressed in
/// the same local frame).
pub fn bend_towards(direction: &Vector3<f64>) -> Vector2<f64> {
    let d = direction.normalize();
    let lateral = d.xy().norm();
    let theta = lateral.atan2(d.z);
    if lateral == 0.0 {
        return if d.z >= 0.0 {
            Vector2::zeros()
        } else {
            Vector2::new(PI, 0.0)
        };
    }
    d.xy() / lateral * theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> RobotConfig {
        RobotConfig::default()
    }

    #[test]
    fn default_config_is_valid() {
        let c = cfg();
        c.validate().unwrap();
        assert_relative_eq!(c.alpha, (0.8f64).asin(), epsilon = 1e-15);
        assert_relative_eq!(c.beta, (0.6f64).asin(), epsilon = 1e-15);
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut c = cfg();
        c.n_fjms = 1;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let mut c = cfg();
        c.beta = c.alpha + 0.01;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.gentle_limit = c.sharp_limit * 2.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_bend_is_independent_of_plane() {
        let r = 7.5;
        let a = cfg().alpha;
        for g in [0.0, 0.3, 1.7, 4.0] {
            let l = channel_length(0.0, g, a, r).unwrap();
            assert_relative_eq!(l, 2.0 * r * (1.0 - a.cos()), epsilon = 1e-14);
        }
    }

    #[test]
    fn closed_form_reference_value() {
        // 2r(1 − cos(ψ − Δθ/2)) at Δθ = 10°, ψ = asin 0.8, r = 7.5,
        // evaluated independently to 40 digits: 4.98837880420239212664...
        let l = channel_length(10f64.to_radians(), 0.0, 0.8f64.asin(), 7.5).unwrap();
        assert_relative_eq!(l, 4.988_378_804_202_392, epsilon = 1e-12);
    }

    #[test]
    fn channel_angle_out_of_domain() {
        assert!(matches!(channel_length(0.1, 0.0, 0.0, 7.5), Err(Error::Domain(_))));
        assert!(matches!(channel_length(0.1, 0.0, FRAC_PI_2, 7.5), Err(Error::Domain(_))));
        assert!(matches!(channel_length(0.1, 0.0, -0.2, 7.5), Err(Error::Domain(_))));
    }

    #[test]
    fn straight_joint_lengths_are_uniform() {
        let c = cfg();
        let l = joint_channel_lengths(&JointState::straight(), &c).unwrap();
        let r = c.joint_sphere_radius;
        for t in l.tendon {
            assert_relative_eq!(t, 2.0 * r * (1.0 - c.alpha.cos()), epsilon = 1e-14);
        }
        assert_eq!(l.fjm.len(), 4);
        for f in l.fjm {
            assert_relative_eq!(f, 2.0 * r * (1.0 - c.beta.cos()), epsilon = 1e-14);
        }
    }

    #[test]
    fn fjm_channels_mirror_about_the_bend_plane() {
        // Brute-force values of the general law at ±π/4 and ±3π/4 offsets for
        // Δθ = 15° (r = 7.5, β = asin 0.6): 2.27199806274296 and 3.93332526428559.
        let c = cfg();
        let l = joint_channel_lengths(&JointState::new(15f64.to_radians(), 0.0), &c).unwrap();
        assert_relative_eq!(l.fjm[0], 2.271_998_062_742_96, epsilon = 1e-12);
        assert_relative_eq!(l.fjm[3], 2.271_998_062_742_96, epsilon = 1e-12);
        assert_relative_eq!(l.fjm[1], 3.933_325_264_285_59, epsilon = 1e-12);
        assert_relative_eq!(l.fjm[2], 3.933_325_264_285_59, epsilon = 1e-12);
    }

    #[test]
    fn fjm_count_truncates() {
        let mut c = cfg();
        c.n_fjms = 2;
        let l = joint_channel_lengths(&JointState::new(0.1, 0.2), &c).unwrap();
        assert_eq!(l.fjm.len(), 2);
    }

    #[test]
    fn tendon_inverse_round_trips() {
        let c = cfg();
        for (b, g) in [(0.0, 0.0), (0.1, 0.0), (0.2, 1.0), (0.26, 4.5), (0.05, 6.2)] {
            let j = JointState::new(b, g);
            let l = joint_channel_lengths(&j, &c).unwrap();
            let back = bend_from_tendon_lengths(&l.tendon, &c).unwrap();
            assert_relative_eq!(back.bend_vector(), j.bend_vector(), epsilon = 1e-12);
        }
    }

    #[test]
    fn tendon_inverse_rejects_impossible_lengths() {
        let c = cfg();
        assert!(bend_from_tendon_lengths(&[0.0, 0.0, 100.0, 0.0], &c).is_err());
    }

    #[test]
    fn straight_chain_is_collinear() {
        let c = cfg();
        let joints = vec![JointState::straight(); c.n_segments - 1];
        let poses = forward_kinematics(&joints, &c).unwrap();
        assert_eq!(poses.len(), c.n_segments);
        for (k, p) in poses.iter().enumerate() {
            assert_relative_eq!(p.position, Vector3::z() * (k as f64 * 15.0), epsilon = 1e-12);
        }
        assert_relative_eq!(tip_position(&joints, &c), Vector3::z() * 180.0, epsilon = 1e-12);
    }

    #[test]
    fn quarter_turn_is_orthogonal() {
        let c = cfg();
        let poses = forward_kinematics(&[JointState::new(FRAC_PI_2, 0.0)], &c).unwrap();
        assert_relative_eq!(poses[0].axis().dot(&poses[1].axis()), 0.0, epsilon = 1e-15);
        assert_relative_eq!(poses[1].axis(), Vector3::x(), epsilon = 1e-15);
    }

    #[test]
    fn four_ten_degree_joints_turn_the_tip_forty_degrees() {
        let c = cfg();
        let joints = vec![JointState::new(10f64.to_radians(), 0.0); 4];
        let poses = forward_kinematics(&joints, &c).unwrap();
        // Independent oracle: explicit y-axis rotation matrices.
        let t = 10f64.to_radians();
        let ry = Matrix3::new(t.cos(), 0.0, t.sin(), 0.0, 1.0, 0.0, -t.sin(), 0.0, t.cos());
        let mut m = Matrix3::identity();
        let mut p = Vector3::zeros();
        p += m * Vector3::z() * 15.0;
        for _ in 0..4 {
            m *= ry;
            p += m * Vector3::z() * 15.0;
        }
        let tip = poses.last().unwrap();
        assert_relative_eq!(tip.axis(), m * Vector3::z(), epsilon = 1e-14);
        assert_relative_eq!(tip.axis().dot(&Vector3::z()).acos(), 40f64.to_radians(), epsilon = 1e-12);
        assert_relative_eq!(tip_position(&joints, &c), p, epsilon = 1e-12);
        assert!(tip.is_proper(1e-9));
    }

    #[test]
    fn too_many_joints_rejected() {
        let c = cfg();
        let joints = vec![JointState::straight(); c.n_segments];
        assert!(forward_kinematics(&joints, &c).is_err());
    }

    #[test]
    fn negative_bend_equals_flipped_plane() {
        let a = JointState::new(-0.2, 0.4).rotation();
        let b = JointState::new(0.2, 0.4 + PI).rotation();
        assert_relative_eq!(a.matrix(), b.matrix(), epsilon = 1e-15);
    }

    #[test]
    fn plane_normalization() {
        assert_relative_eq!(JointState::new(0.1, -FRAC_PI_2).plane, 1.5 * PI, epsilon = 1e-15);
        assert_relative_eq!(JointState::new(0.1, 5.0 * PI).plane, PI, epsilon = 1e-12);
        assert!(JointState::new(0.1, TAU).plane < TAU);
    }

    #[test]
    fn right_jacobian_matches_finite_differences() {
        let w = Vector3::new(0.1, -0.2, 0.05);
        let jr = right_jacobian(&w);
        let base = Rotation3::new(w);
        let h = 1e-6;
        for i in 0..3 {
            let mut d = Vector3::zeros();
            d[i] = h;
            // R(w)ᵀ·dR/dw_i = [J_r·e_i]×
            let dr = (Rotation3::new(w + d).matrix() - Rotation3::new(w - d).matrix()) / (2.0 * h);
            let m = base.matrix().transpose() * dr;
            let got = Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]);
            assert_relative_eq!(got, jr.column(i).into_owned(), epsilon = 1e-8);
        }
    }

    #[test]
    fn bend_towards_inverts_rotation() {
        for q in [Vector2::new(0.1, 0.2), Vector2::new(-0.25, 0.01), Vector2::zeros()] {
            let dir = joint_rotation(&q) * Vector3::z();
            assert_relative_eq!(bend_towards(&dir), q, epsilon = 1e-14);
        }
    }
}
