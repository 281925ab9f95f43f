//! Quasi-static equilibrium of the joint chain.
//!
//! Each joint is a quadratic spring on its bend vector; jammed (locked) joints
//! are `jam_ratio` times stiffer than free ones. Checkpoint rings push on the
//! body through a one-sided quadratic penalty on the radial overlap between
//! the body surface and the ring bore at the point where the centreline
//! crosses the ring plane. Joint bends are bounded by `|Δθ| <= bend_limit`,
//! a disk in bend-vector space.
//!
//! [`solve_equilibrium`] is a projected Gauss-Newton method with an Armijo
//! backtracking search along the projection arc. When the Newton step fails to
//! decrease the energy it falls back to a diagonally scaled projected gradient
//! step, so every accepted iterate lowers the energy.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::environment::{Checkpoint, CheckpointLabel};
use crate::error::{Error, Result};
use crate::geometry::{bend_axis_angle, chain_frames, right_jacobian, ChainFrames, ChainLayout};

/// Joint and contact stiffnesses, plus the steering losses of the free zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StiffnessModel {
    /// Unjammed joint stiffness, mN·mm/rad².
    pub k_soft: f64,
    /// Jammed-to-unjammed stiffness ratio. `inf` pins locked joints exactly.
    pub jam_ratio: f64,
    /// Ring contact penalty, mN/mm.
    pub k_contact: f64,
    /// Fraction of a tendon-commanded head bend lost to the unjammed FJM
    /// running through the head joint.
    pub tracking_error: f64,
    /// Multiplier on `tracking_error` for bends sharper than the gentle limit.
    pub sharp_friction: f64,
}

impl Default for StiffnessModel {
    fn default() -> Self {
        Self {
            k_soft: 100_000.0,
            jam_ratio: 34.0,
            k_contact: 100.0,
            tracking_error: 0.03,
            sharp_friction: 1.5,
        }
    }
}

impl StiffnessModel {
    /// Rigid jamming and lossless steering.
    pub fn ideal() -> Self {
        Self {
            jam_ratio: f64::INFINITY,
            tracking_error: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(self.k_soft > 0.0 && self.k_soft.is_finite()) {
            return fail(format!("k_soft must be positive, got {}", self.k_soft));
        }
        if !(self.jam_ratio >= 1.0) {
            return fail(format!("jam_ratio must be >= 1, got {}", self.jam_ratio));
        }
        if !(self.k_contact > 0.0 && self.k_contact.is_finite()) {
            return fail(format!("k_contact must be positive, got {}", self.k_contact));
        }
        if !(0.0..1.0).contains(&self.tracking_error) {
            return fail(format!("tracking_error must lie in [0, 1), got {}", self.tracking_error));
        }
        if !(self.sharp_friction >= 1.0 && self.sharp_friction.is_finite()) {
            return fail(format!("sharp_friction must be >= 1, got {}", self.sharp_friction));
        }
        if self.tracking_error * self.sharp_friction >= 1.0 {
            return fail("tracking_error × sharp_friction must stay below 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    /// Steering zone: stiffness `k_soft`, rest at the tendon command.
    Free,
    /// Held by jammed FJMs: stiffness `k_soft·jam_ratio`, rest on the conserved path.
    Locked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTerm {
    pub rest: Vector2<f64>,
    pub kind: JointKind,
}

impl JointTerm {
    pub fn free(rest: Vector2<f64>) -> Self {
        Self {
            rest,
            kind: JointKind::Free,
        }
    }

    pub fn locked(rest: Vector2<f64>) -> Self {
        Self {
            rest,
            kind: JointKind::Locked,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProblem {
    pub layout: ChainLayout,
    /// Base to tip; every inserted joint appears exactly once.
    pub joints: Vec<JointTerm>,
    pub checkpoints: Vec<Checkpoint>,
    pub k_soft: f64,
    pub jam_ratio: f64,
    pub k_contact: f64,
    pub body_radius: f64,
    pub bend_limit: f64,
    /// Uniform load per segment (e.g. weight), mN, applied at segment midpoints.
    pub load: Option<Vector3<f64>>,
}

impl EquilibriumProblem {
    pub fn new(
        layout: ChainLayout,
        joints: Vec<JointTerm>,
        checkpoints: Vec<Checkpoint>,
        stiffness: &StiffnessModel,
        body_radius: f64,
        bend_limit: f64,
    ) -> Self {
        Self {
            layout,
            joints,
            checkpoints,
            k_soft: stiffness.k_soft,
            jam_ratio: stiffness.jam_ratio,
            k_contact: stiffness.k_contact,
            body_radius,
            bend_limit,
            load: None,
        }
    }

    pub fn stiffness(&self, j: usize) -> f64 {
        match self.joints[j].kind {
            JointKind::Free => self.k_soft,
            JointKind::Locked => self.k_soft * self.jam_ratio,
        }
    }

    /// Locked joints under infinite jam stiffness are not degrees of freedom.
    pub fn is_pinned(&self, j: usize) -> bool {
        self.joints[j].kind == JointKind::Locked && self.jam_ratio.is_infinite()
    }

    /// Typical gradient magnitude, used to make solver tolerances relative.
    pub fn scale(&self) -> f64 {
        self.k_soft * self.bend_limit
    }

    pub fn rest(&self) -> Vec<Vector2<f64>> {
        self.joints.iter().map(|j| j.rest).collect()
    }

    pub fn frames(&self, angles: &[Vector2<f64>]) -> ChainFrames {
        chain_frames(&self.layout, angles)
    }

    fn project(&self, angles: &mut [Vector2<f64>]) {
        for (j, q) in angles.iter_mut().enumerate() {
            if self.is_pinned(j) {
                *q = self.joints[j].rest;
            } else {
                let n = q.norm();
                if n > self.bend_limit {
                    *q *= self.bend_limit / n;
                }
            }
        }
    }
}

/// Where the contact centreline passes a ring plane.
///
/// The contact centreline is the segment polyline with every joint rounded off
/// by a quadratic Bézier running from the middle of one segment to the middle
/// of the next, with the joint as control point. It is C¹, so penetration
/// depths vary smoothly as the crossing moves over a joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingCrossing {
    /// Chain segment (base = 0) the crossing lies on.
    pub segment: usize,
    pub point: Vector3<f64>,
    /// Derivative of the centreline at the crossing.
    pub tangent: Vector3<f64>,
    /// `point = Σ w·P[i]` over the chain points.
    weights: [(usize, f64); 6],
}

/// Control points of each contact piece, as two-term combinations of chain
/// points, and the segments covering its first and second half.
fn contact_pieces(n_points: usize) -> impl Iterator<Item = ([[(usize, f64); 2]; 3], (usize, usize))> {
    let m = n_points - 2;
    let first = ([[(0, 1.0), (1, 0.0)], [(0, 0.75), (1, 0.25)], [(0, 0.5), (1, 0.5)]], (0, 0));
    let last = (
        [[(m, 0.5), (m + 1, 0.5)], [(m, 0.25), (m + 1, 0.75)], [(m + 1, 1.0), (m + 1, 0.0)]],
        (m, m),
    );
    let joints = (0..m).map(|j| {
        (
            [[(j, 0.5), (j + 1, 0.5)], [(j + 1, 1.0), (j + 1, 0.0)], [(j + 1, 0.5), (j + 2, 0.5)]],
            (j, j + 1),
        )
    });
    std::iter::once(first).chain(joints).chain(std::iter::once(last))
}

/// Smallest root in `(0, 1]` of `a·t² + b·t + e` given `e < 0 <= a + b + e`.
fn first_root(a: f64, b: f64, e: f64) -> f64 {
    if a.abs() <= 1e-12 * (b.abs() + e.abs()) {
        return -e / b;
    }
    let disc = (b * b - 4.0 * a * e).max(0.0).sqrt();
    let q = -0.5 * (b + b.signum() * disc);
    let mut best = f64::INFINITY;
    for t in [q / a, if q != 0.0 { e / q } else { f64::INFINITY }] {
        if t > 0.0 && t <= 1.0 + 1e-12 && t < best {
            best = t;
        }
    }
    if best.is_finite() {
        best.min(1.0)
    } else {
        -e / (a + b)
    }
}

/// First forward crossing of the ring plane along the contact centreline, if any.
pub fn ring_crossing(frames: &ChainFrames, ring: &Checkpoint) -> Option<RingCrossing> {
    let n = ring.axis;
    let pts = &frames.points;
    let ctrl_point = |c: &[(usize, f64); 2]| pts[c[0].0] * c[0].1 + pts[c[1].0] * c[1].1;
    contact_pieces(pts.len()).find_map(|(ctrl, (seg_a, seg_b))| {
        let c0 = ctrl_point(&ctrl[0]);
        let c1 = ctrl_point(&ctrl[1]);
        let c2 = ctrl_point(&ctrl[2]);
        let sa = n.dot(&(c0 - ring.center));
        let sb = n.dot(&(c2 - ring.center));
        if !(sa < 0.0 && sb >= 0.0) {
            return None;
        }
        let a = n.dot(&(c0 - c1 * 2.0 + c2));
        let b = 2.0 * n.dot(&(c1 - c0));
        let t = first_root(a, b, sa);
        let bern = [(1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t];
        let point = c0 * bern[0] + c1 * bern[1] + c2 * bern[2];
        let tangent = (c1 - c0) * (2.0 * (1.0 - t)) + (c2 - c1) * (2.0 * t);
        let mut weights = [(0, 0.0); 6];
        for (k, c) in ctrl.iter().enumerate() {
            weights[2 * k] = (c[0].0, c[0].1 * bern[k]);
            weights[2 * k + 1] = (c[1].0, c[1].1 * bern[k]);
        }
        Some(RingCrossing {
            segment: if t < 0.5 { seg_a } else { seg_b },
            point,
            tangent,
            weights,
        })
    })
}

/// A ring crossing and how far the body overlaps the bore there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingContact {
    pub checkpoint: usize,
    pub crossing: RingCrossing,
    /// Unit radial direction from the ring centre to the crossing point.
    pub radial: Vector3<f64>,
    /// Radial offset of the centreline from the ring centre, mm.
    pub offset: f64,
    /// Overlap between body surface and ring bore, mm (0 when clear).
    pub depth: f64,
    /// Entrance weight in `[0, 1]`: contact fades in while the tip is within
    /// one body radius past the ring plane, so a tip arriving off-centre meets
    /// a steep but continuous face rather than a jump.
    pub entry: f64,
    /// Derivative of `entry` with respect to the tip's distance past the plane.
    pub entry_slope: f64,
}

impl RingContact {
    /// Contact energy `½·k·d²·entry`.
    fn energy(&self, k_contact: f64) -> f64 {
        0.5 * k_contact * self.depth * self.depth * self.entry
    }

    /// Force the ring exerts on the body, mN.
    pub fn force(&self, k_contact: f64) -> f64 {
        k_contact * self.depth * self.entry
    }
}

/// `smoothstep` ramp over `[0, width]` and its derivative.
fn entry_ramp(s: f64, width: f64) -> (f64, f64) {
    let x = s / width;
    if x >= 1.0 {
        (1.0, 0.0)
    } else if x <= 0.0 {
        (0.0, 0.0)
    } else {
        (x * x * (3.0 - 2.0 * x), 6.0 * x * (1.0 - x) / width)
    }
}

fn ring_contacts(frames: &ChainFrames, problem: &EquilibriumProblem) -> Vec<RingContact> {
    problem
        .checkpoints
        .iter()
        .enumerate()
        .filter_map(|(c, ring)| {
            let crossing = ring_crossing(frames, ring)?;
            let r = crossing.point - ring.center;
            let offset = r.norm();
            let depth = (offset - ring.clearance(problem.body_radius)).max(0.0);
            let radial = if offset > 0.0 { r / offset } else { Vector3::zeros() };
            let tip = frames.points[frames.points.len() - 1];
            let (entry, entry_slope) = entry_ramp(ring.axis.dot(&(tip - ring.center)), problem.body_radius);
            Some(RingContact {
                checkpoint: c,
                crossing,
                radial,
                offset,
                depth,
                entry,
                entry_slope,
            })
        })
        .collect()
}

/// Spreads a gradient on the crossing point onto the chain points. The
/// crossing slides along the centreline as the points move, which is the
/// oblique projection `I − B'·nᵀ / n·B'`.
fn scatter_crossing(ring: &Checkpoint, contact: &RingContact, g_point: Vector3<f64>, out: &mut [Vector3<f64>]) {
    let d = contact.crossing.tangent;
    let n = ring.axis;
    let mg = g_point - n * (d.dot(&g_point) / n.dot(&d));
    for &(i, w) in &contact.crossing.weights {
        out[i] += mg * w;
    }
}

/// Maps gradients on the chain points to gradients on the joint bend vectors.
fn pullback(frames: &ChainFrames, angles: &[Vector2<f64>], g_points: &[Vector3<f64>]) -> Vec<Vector2<f64>> {
    let m = angles.len();
    let mut out = vec![Vector2::zeros(); m];
    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for j in (0..m).rev() {
        let p = frames.points[j + 2];
        force += g_points[j + 2];
        moment += p.cross(&g_points[j + 2]);
        let torque = moment - frames.points[j + 1].cross(&force);
        let omega = bend_axis_angle(&angles[j]);
        let g_omega = right_jacobian(&omega).transpose() * (frames.orientations[j + 1].inverse() * torque);
        out[j] = Vector2::new(g_omega.y, -g_omega.x);
    }
    out
}

fn spring_energy(angles: &[Vector2<f64>], problem: &EquilibriumProblem) -> f64 {
    angles
        .iter()
        .enumerate()
        .filter(|(j, _)| !problem.is_pinned(*j))
        .map(|(j, q)| 0.5 * problem.stiffness(j) * (q - problem.joints[j].rest).norm_squared())
        .sum()
}

fn load_energy(frames: &ChainFrames, problem: &EquilibriumProblem) -> f64 {
    problem.load.map_or(0.0, |w| {
        -frames
            .points
            .windows(2)
            .map(|s| w.dot(&(0.5 * (s[0] + s[1]))))
            .sum::<f64>()
    })
}

/// `Σ ½·k_j·‖q_j − q̄_j‖² + Σ ½·k_contact·d_c²` (plus the optional load
/// potential). Pinned joints contribute nothing.
pub fn total_energy(angles: &[Vector2<f64>], problem: &EquilibriumProblem) -> f64 {
    let frames = problem.frames(angles);
    let contact: f64 = ring_contacts(&frames, problem)
        .iter()
        .map(|c| c.energy(problem.k_contact))
        .sum();
    spring_energy(angles, problem) + contact + load_energy(&frames, problem)
}

/// Energy and its analytic gradient with respect to every joint bend vector.
pub fn energy_gradient(angles: &[Vector2<f64>], problem: &EquilibriumProblem) -> (f64, Vec<Vector2<f64>>) {
    let frames = problem.frames(angles);
    let contacts = ring_contacts(&frames, problem);
    let mut g_points = vec![Vector3::zeros(); frames.points.len()];
    let mut energy = spring_energy(angles, problem) + load_energy(&frames, problem);
    for c in &contacts {
        if c.depth > 0.0 {
            energy += c.energy(problem.k_contact);
            let ring = &problem.checkpoints[c.checkpoint];
            scatter_crossing(ring, c, c.radial * c.force(problem.k_contact), &mut g_points);
            let tip = g_points.len() - 1;
            g_points[tip] += ring.axis * (0.5 * problem.k_contact * c.depth * c.depth * c.entry_slope);
        }
    }
    if let Some(w) = problem.load {
        for k in 0..frames.points.len() - 1 {
            g_points[k] -= 0.5 * w;
            g_points[k + 1] -= 0.5 * w;
        }
    }
    let mut grad = pullback(&frames, angles, &g_points);
    for (j, g) in grad.iter_mut().enumerate() {
        if problem.is_pinned(j) {
            *g = Vector2::zeros();
        } else {
            *g += (angles[j] - problem.joints[j].rest) * problem.stiffness(j);
        }
    }
    (energy, grad)
}

/// Gauss-Newton Hessian over the unpinned coordinates (`vars` lists the joints,
/// two coordinates each).
fn gauss_newton_hessian(angles: &[Vector2<f64>], problem: &EquilibriumProblem, vars: &[usize]) -> DMatrix<f64> {
    let n = 2 * vars.len();
    let mut h = DMatrix::zeros(n, n);
    for (i, &j) in vars.iter().enumerate() {
        let k = problem.stiffness(j);
        h[(2 * i, 2 * i)] = k;
        h[(2 * i + 1, 2 * i + 1)] = k;
    }
    let frames = problem.frames(angles);
    for c in ring_contacts(&frames, problem) {
        if c.depth <= 0.0 || c.entry <= 0.0 {
            continue;
        }
        let ring = &problem.checkpoints[c.checkpoint];
        let mut g_points = vec![Vector3::zeros(); frames.points.len()];
        // residual d·√entry
        let root = c.entry.sqrt();
        scatter_crossing(ring, &c, c.radial * root, &mut g_points);
        let tip = g_points.len() - 1;
        g_points[tip] += ring.axis * (0.5 * c.depth * c.entry_slope / root);
        let jac = pullback(&frames, angles, &g_points);
        let row = DVector::from_iterator(n, vars.iter().flat_map(|&j| [jac[j].x, jac[j].y]));
        h += problem.k_contact * &row * row.transpose();
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the projected-gradient norm, relative to the problem scale.
    pub tolerance: f64,
    /// Projected-gradient norm (relative) above which a stalled or capped run is a failure.
    pub failure_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-8,
            failure_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub angles: Vec<Vector2<f64>>,
    pub energy: f64,
    pub iterations: usize,
    /// Energy of every accepted iterate, starting with the projected initial guess.
    pub energy_trace: Vec<f64>,
    pub projected_gradient_norm: f64,
}

fn on_boundary(q: &Vector2<f64>, limit: f64) -> bool {
    q.norm() >= limit * (1.0 - 1e-12)
}

fn projected_gradient_norm(angles: &[Vector2<f64>], grad: &[Vector2<f64>], problem: &EquilibriumProblem) -> f64 {
    grad.iter()
        .zip(angles)
        .enumerate()
        .filter(|(j, _)| !problem.is_pinned(*j))
        .map(|(_, (g, q))| {
            if on_boundary(q, problem.bend_limit) && g.dot(q) < 0.0 {
                let u = q.normalize();
                (g - u * g.dot(&u)).norm_squared()
            } else {
                g.norm_squared()
            }
        })
        .sum::<f64>()
        .sqrt()
}

pub fn solve_equilibrium(problem: &EquilibriumProblem, initial: &[Vector2<f64>]) -> Result<Equilibrium> {
    solve_equilibrium_with(problem, initial, &SolverOptions::default())
}

pub fn solve_equilibrium_with(
    problem: &EquilibriumProblem,
    initial: &[Vector2<f64>],
    opts: &SolverOptions,
) -> Result<Equilibrium> {
    assert_eq!(initial.len(), problem.joints.len(), "one initial bend per joint");
    // Without contact or load the springs decouple: the minimiser is the
    // projected rest configuration.
    if problem.checkpoints.is_empty() && problem.load.is_none() {
        let mut x = problem.rest();
        problem.project(&mut x);
        let energy = total_energy(&x, problem);
        return Ok(Equilibrium {
            angles: x,
            energy,
            iterations: 0,
            energy_trace: vec![energy],
            projected_gradient_norm: 0.0,
        });
    }

    let vars: Vec<usize> = (0..problem.joints.len()).filter(|&j| !problem.is_pinned(j)).collect();
    let tol = opts.tolerance * problem.scale();
    let fail_tol = opts.failure_tolerance * problem.scale();

    let mut x = initial.to_vec();
    problem.project(&mut x);
    let (mut energy, mut grad) = energy_gradient(&x, problem);
    let mut trace = vec![energy];
    let mut pg = projected_gradient_norm(&x, &grad, problem);
    let mut iterations = 0;

    while pg > tol && iterations < opts.max_iterations {
        iterations += 1;
        let newton = newton_direction(&x, &grad, problem, &vars);
        let step = newton
            .and_then(|d| line_search(problem, &x, energy, &grad, &d))
            .or_else(|| {
                let d = scaled_gradient_direction(&x, &grad, problem, &vars);
                line_search(problem, &x, energy, &grad, &d)
            });
        let Some((x_new, e_new)) = step else {
            // no representable decrease left
            break;
        };
        x = x_new;
        energy = e_new;
        trace.push(energy);
        let (_, g) = energy_gradient(&x, problem);
        grad = g;
        pg = projected_gradient_norm(&x, &grad, problem);
    }

    if pg > fail_tol {
        return Err(Error::SolverFailure {
            iterations,
            gradient_norm: pg,
            threshold: fail_tol,
        });
    }
    Ok(Equilibrium {
        angles: x,
        energy,
        iterations,
        energy_trace: trace,
        projected_gradient_norm: pg,
    })
}

/// Gauss-Newton step restricted to the tangent of the bound for joints pressed
/// against it.
fn newton_direction(
    x: &[Vector2<f64>],
    grad: &[Vector2<f64>],
    problem: &EquilibriumProblem,
    vars: &[usize],
) -> Option<Vec<Vector2<f64>>> {
    let h = gauss_newton_hessian(x, problem, vars);
    let n = 2 * vars.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    for (i, &j) in vars.iter().enumerate() {
        let q = x[j];
        let active = on_boundary(&q, problem.bend_limit) && grad[j].dot(&q) < 0.0;
        if active {
            let u = q.normalize();
            let mut col = DVector::zeros(n);
            col[2 * i] = -u.y;
            col[2 * i + 1] = u.x;
            basis.push(col);
        } else {
            for c in 0..2 {
                let mut col = DVector::zeros(n);
                col[2 * i + c] = 1.0;
                basis.push(col);
            }
        }
    }
    if basis.is_empty() {
        return None;
    }
    let z = DMatrix::from_columns(&basis);
    let g = DVector::from_iterator(n, vars.iter().flat_map(|&j| [grad[j].x, grad[j].y]));
    let hr = z.transpose() * &h * &z;
    let gr = z.transpose() * g;
    let dr = hr.cholesky()?.solve(&(-gr));
    let d = z * dr;
    let mut dir = vec![Vector2::zeros(); x.len()];
    for (i, &j) in vars.iter().enumerate() {
        dir[j] = Vector2::new(d[2 * i], d[2 * i + 1]);
    }
    Some(dir)
}

fn scaled_gradient_direction(
    x: &[Vector2<f64>],
    grad: &[Vector2<f64>],
    problem: &EquilibriumProblem,
    vars: &[usize],
) -> Vec<Vector2<f64>> {
    let h = gauss_newton_hessian(x, problem, vars);
    let mut dir = vec![Vector2::zeros(); x.len()];
    for (i, &j) in vars.iter().enumerate() {
        let scale = h[(2 * i, 2 * i)].max(h[(2 * i + 1, 2 * i + 1)]);
        dir[j] = -grad[j] / scale;
    }
    dir
}

/// Armijo backtracking along `t ↦ P(x + t·d)`.
fn line_search(
    problem: &EquilibriumProblem,
    x: &[Vector2<f64>],
    energy: f64,
    grad: &[Vector2<f64>],
    dir: &[Vector2<f64>],
) -> Option<(Vec<Vector2<f64>>, f64)> {
    const ARMIJO: f64 = 1e-4;
    let mut t = 1.0;
    for _ in 0..60 {
        let mut trial: Vec<_> = x.iter().zip(dir).map(|(q, d)| q + d * t).collect();
        problem.project(&mut trial);
        let slope: f64 = trial.iter().zip(x).zip(grad).map(|((a, b), g)| g.dot(&(a - b))).sum();
        if slope < 0.0 {
            let e = total_energy(&trial, problem);
            if e <= energy + ARMIJO * slope && e < energy {
                return Some((trial, e));
            }
        } else if slope == 0.0 {
            return None;
        }
        t *= 0.5;
    }
    None
}

/// Reading of one checkpoint's single-axis sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointReading {
    pub label: CheckpointLabel,
    /// Force along the sensor axis, mN (0 = no touch).
    pub force: f64,
    /// Full contact force magnitude, mN.
    pub contact_force: f64,
    /// Chain segment (base = 0) passing the ring, if the body reaches it.
    pub segment: Option<usize>,
    pub penetration: f64,
}

impl CheckpointReading {
    pub fn touching(&self) -> bool {
        self.penetration > 0.0
    }
}

/// Per-checkpoint sensor readings, in the problem's checkpoint order.
pub fn checkpoint_forces(angles: &[Vector2<f64>], problem: &EquilibriumProblem) -> Vec<CheckpointReading> {
    let frames = problem.frames(angles);
    let contacts = ring_contacts(&frames, problem);
    problem
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, ring)| match contacts.iter().find(|c| c.checkpoint == i) {
            Some(c) => {
                let contact_force = c.force(problem.k_contact);
                CheckpointReading {
                    label: ring.label,
                    force: (contact_force * c.radial.dot(&ring.sensor_axis)).abs(),
                    contact_force,
                    segment: Some(c.crossing.segment),
                    penetration: c.depth,
                }
            }
            None => CheckpointReading {
                label: ring.label,
                force: 0.0,
                contact_force: 0.0,
                segment: None,
                penetration: 0.0,
            },
        })
        .collect()
}
