//! Reproduction suite: the eight acceptance checks behind `verify --suite paper`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::rc::Rc;
use std::time::{Duration, Instant};

use jamsnake_core::environment::{BendClass, Checkpoint, CheckpointLabel, PhaseLabel, TrajectoryKind};
use jamsnake_core::ftl::{execute_cycle, ConservedPath, ExtensionStrategy, Plant, RobotState};
use jamsnake_core::geometry::{channel_length, forward_kinematics, ChainLayout, JointState, Pose, RobotConfig};
use jamsnake_core::metrics::{format_sig, ftl_error, sweep_error, OccupancyGrid, SummaryCell};
use jamsnake_core::statics::{
    checkpoint_forces, energy_gradient, ring_crossing, solve_equilibrium, total_energy, EquilibriumProblem,
    JointTerm, StiffnessModel,
};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compare::{relative_spread, FORCE_RATIO, LAMBDA_BAND, LAMBDA_LIMIT, STRATEGY_SPREAD};
use crate::run::{run_scenario, ScenarioResult};
use crate::scenario::{Controller, Scenario, StrategySelection};
use crate::SimError;

pub const SUITE_NAME: &str = "paper";
const SEED: u64 = 0x6a61_6d73;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} [{}] {}: {} ({:.2} s)",
            self.id,
            if self.passed { "pass" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

pub const TITLES: [&str; 8] = [
    "kinetic-model equivalence",
    "FTL sweep error band",
    "no-touch reproduction",
    "force ordering",
    "strategy invariance",
    "solver properties",
    "oracle equivalence",
    "metric properties",
];

/// Runs the checks, sharing simulated scenarios between them.
#[derive(Default)]
pub struct Suite {
    cache: RefCell<BTreeMap<(TrajectoryKind, BendClass, Controller), Rc<ScenarioResult>>>,
}

fn scenario(kind: TrajectoryKind, class: BendClass, controller: Controller) -> Scenario {
    let mut s = Scenario::new(kind, class);
    s.controller = controller;
    s.strategy = StrategySelection::All;
    s
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every strategy (FTL) or the single tendon-only run, with default parameters.
    fn result(
        &self,
        kind: TrajectoryKind,
        class: BendClass,
        controller: Controller,
    ) -> Result<Rc<ScenarioResult>, SimError> {
        let key = (kind, class, controller);
        if let Some(r) = self.cache.borrow().get(&key) {
            return Ok(r.clone());
        }
        let r = Rc::new(run_scenario(&scenario(kind, class, controller))?);
        self.cache.borrow_mut().insert(key, r.clone());
        Ok(r)
    }

    pub fn check(&self, id: u8) -> CriterionResult {
        let start = Instant::now();
        let outcome = match id {
            1 => kinetic_model(),
            2 => self.lambda_band(),
            3 => self.no_touch(),
            4 => self.force_ordering(),
            5 => self.strategy_invariance(),
            6 => solver_properties(),
            7 => oracle_equivalence(),
            8 => self.metric_properties(),
            _ => Err(SimError::Validation(format!("no criterion {id}"))),
        };
        let (passed, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionResult {
            id,
            title: TITLES.get(usize::from(id).wrapping_sub(1)).copied().unwrap_or("unknown"),
            passed,
            detail,
            elapsed: start.elapsed(),
        }
    }

    pub fn run_all(&self) -> Vec<CriterionResult> {
        (1..=8).map(|id| self.check(id)).collect()
    }

    fn lambda_band(&self) -> Result<(bool, String), SimError> {
        let mut ok = true;
        let mut parts = Vec::new();
        for kind in [TrajectoryKind::C, TrajectoryKind::S, TrajectoryKind::Spiral] {
            let mut s = scenario(kind, BendClass::Gentle, Controller::Ftl);
            s.strategy = StrategySelection::One(1);
            let t = Instant::now();
            let r = run_scenario(&s)?;
            let secs = t.elapsed().as_secs_f64();
            let lambda = r.strategies[0].mean_lambda();
            let pass = lambda <= LAMBDA_LIMIT && secs < 10.0;
            let band = if lambda < LAMBDA_BAND.0 {
                "below band"
            } else if lambda > LAMBDA_BAND.1 {
                "above band"
            } else {
                "in band"
            };
            ok &= pass;
            parts.push(format!("{} λ={} ({band}) in {:.1} s", s.name, format_sig(lambda, 3), secs));
        }
        Ok((ok, parts.join(", ")))
    }

    fn no_touch(&self) -> Result<(bool, String), SimError> {
        let r = self.result(TrajectoryKind::C, BendClass::Gentle, Controller::Ftl)?;
        let mut touched = Vec::new();
        let mut nt = 0;
        for st in &r.strategies {
            for c in CheckpointLabel::ALL {
                for p in PhaseLabel::ALL {
                    match st.summary.cell(c, p) {
                        SummaryCell::NoTouch => nt += 1,
                        SummaryCell::NoData => {}
                        v => touched.push(format!("{} {c} {p} = {}", st.label, v.render(3))),
                    }
                }
            }
        }
        let ok = touched.is_empty() && nt > 0;
        let detail = if ok {
            format!("{nt} cells NT over {} strategies, the rest never reached", r.strategies.len())
        } else {
            format!("touching cells: {}", touched.join("; "))
        };
        Ok((ok, detail))
    }

    fn force_ordering(&self) -> Result<(bool, String), SimError> {
        let mut ok = true;
        let mut parts = Vec::new();
        for (kind, class) in [
            (TrajectoryKind::C, BendClass::Gentle),
            (TrajectoryKind::S, BendClass::Gentle),
            (TrajectoryKind::S, BendClass::Sharp),
        ] {
            let ftl = self.result(kind, class, Controller::Ftl)?;
            let tdcr = self.result(kind, class, Controller::Tdcr)?;
            let fjm = ftl
                .strategies
                .iter()
                .map(|st| st.peak_mean(PhaseLabel::II, CheckpointLabel::Middle))
                .fold(0.0, f64::max);
            let tendon = tdcr.strategies[0].peak_mean(PhaseLabel::II, CheckpointLabel::Middle);
            let r = crate::compare::ratio(tendon, fjm);
            ok &= r >= FORCE_RATIO;
            parts.push(format!(
                "{} {} vs {} mN ratio {}",
                ftl.scenario.name,
                format_sig(tendon, 3),
                format_sig(fjm, 3),
                format_sig(r, 3)
            ));
        }
        Ok((ok, parts.join(", ")))
    }

    fn strategy_invariance(&self) -> Result<(bool, String), SimError> {
        let mut ok = true;
        let mut parts = Vec::new();
        for class in [BendClass::Gentle, BendClass::Sharp] {
            let r = self.result(TrajectoryKind::S, class, Controller::Ftl)?;
            let lambdas: Vec<f64> = r.strategies.iter().map(|s| s.mean_lambda()).collect();
            let mut worst = (relative_spread(&lambdas), "λ".to_string());
            for c in CheckpointLabel::ALL {
                for p in PhaseLabel::ALL {
                    let cells: Vec<_> = r.strategies.iter().map(|s| s.summary.cell(c, p)).collect();
                    let means: Vec<f64> = cells.iter().filter_map(SummaryCell::mean).collect();
                    let spread = if means.is_empty() {
                        0.0
                    } else if means.len() < cells.len() {
                        f64::INFINITY
                    } else {
                        relative_spread(&means)
                    };
                    if spread > worst.0 {
                        worst = (spread, format!("{c} {p}"));
                    }
                }
            }
            ok &= worst.0 <= STRATEGY_SPREAD;
            parts.push(format!(
                "{} max spread {} ({}) over ES1-ES{}",
                r.scenario.name,
                format_sig(worst.0, 3),
                worst.1,
                r.strategies.len()
            ));
        }
        Ok((ok, parts.join(", ")))
    }

    fn metric_properties(&self) -> Result<(bool, String), SimError> {
        let mut parts = Vec::new();
        let mut ok = true;
        let mut worst: f64 = 0.0;
        for (kind, class) in [
            (TrajectoryKind::C, BendClass::Gentle),
            (TrajectoryKind::C, BendClass::Sharp),
            (TrajectoryKind::S, BendClass::Gentle),
            (TrajectoryKind::S, BendClass::Sharp),
            (TrajectoryKind::Spiral, BendClass::Gentle),
        ] {
            let r = self.result(kind, class, Controller::Ftl)?;
            let run = &r.strategies[0].runs[0];
            let chains = run.window_chains();
            let d = r.scenario.robot.seg_diameter;
            let coarse = sweep_error(&chains, d, r.environment.projection, 0.1)?;
            let fine = sweep_error(&chains, d, r.environment.projection, 0.05)?;
            worst = worst.max((coarse - fine).abs() / fine);
        }
        ok &= worst < 0.05;
        parts.push(format!("grid 0.1 vs 0.05 worst relative change {}", format_sig(worst, 3)));

        let r = self.result(TrajectoryKind::C, BendClass::Gentle, Controller::Ftl)?;
        let last = r.strategies[0].runs[0].window_chains().pop().expect("window has frames");
        let single = sweep_error(&[last], r.scenario.robot.seg_diameter, r.environment.projection, 0.1)?;
        ok &= single == 0.0;
        parts.push(format!("single frame λ={}", format_sig(single, 3)));

        let square = |x0: f64| -> Result<OccupancyGrid, SimError> {
            let mut g = OccupancyGrid::new(Vector2::new(-5.0, -5.0), 0.1, 300, 200)?;
            g.fill_band(Vector2::new(x0, 5.0), Vector2::new(x0 + 10.0, 5.0), 10.0)?;
            Ok(g)
        };
        let moved = ftl_error(&[square(0.0)?, square(10.0)?])?;
        ok &= (moved - 1.0).abs() < 1e-12;
        parts.push(format!("translated square λ={}", format_sig(moved, 6)));
        Ok((ok, parts.join(", ")))
    }
}

/// Closed forms of the bend plane through a channel (`+`), opposite to it
/// (`-`) and perpendicular to it, and of the diagonal FJM channels.
fn kinetic_model() -> Result<(bool, String), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let lim = 15f64.to_radians();
    let mut worst: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let start = Instant::now();
    for _ in 0..10_000 {
        let bend = rng.random_range(-lim..=lim);
        let psi = loop {
            let p: f64 = rng.random_range(0.0..FRAC_PI_2);
            if p > 0.0 {
                break p;
            }
        };
        let r = rng.random_range(5.0..=10.0);
        let half = 0.5 * bend;
        let right = 2.0 * r * (1.0 - (psi - half).cos());
        let left = 2.0 * r * (1.0 - (psi + half).cos());
        let side = 2.0 * r * (1.0 - psi.cos() * half.cos());
        let tilt = (psi.tan() * FRAC_PI_4.cos()).atan();
        let diag_right = 2.0 * r * (1.0 - psi.cos() / tilt.cos() * (tilt - half).cos());
        let diag_left = 2.0 * r * (1.0 - psi.cos() / tilt.cos() * (tilt + half).cos());
        let general = |plane: f64| channel_length(bend, plane, psi, r);
        let lr = general(0.0)?;
        let ll = general(PI)?;
        let ls = general(FRAC_PI_2)?;
        for (got, want) in [
            (lr, right),
            (ll, left),
            (ls, side),
            (general(-FRAC_PI_2)?, side),
            (general(FRAC_PI_4)?, diag_right),
            (general(3.0 * FRAC_PI_4)?, diag_left),
        ] {
            worst = worst.max((got - want).abs());
        }
        worst_sum = worst_sum.max((ll + lr - 2.0 * ls).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-12 && worst_sum <= 1e-12 && secs < 1.0;
    Ok((
        ok,
        format!(
            "10000 samples, max specialisation error {worst:.1e} mm, max sum-identity error {worst_sum:.1e} mm, {secs:.3}s"
        ),
    ))
}

fn ring(center: Vector3<f64>) -> Checkpoint {
    Checkpoint {
        label: CheckpointLabel::Middle,
        center,
        axis: Vector3::z(),
        inner_diameter: 20.0,
        sensor_axis: Vector3::x(),
        arclength: center.z,
    }
}

fn random_problem(rng: &mut ChaCha8Rng, planar: bool, bend_limit: f64) -> EquilibriumProblem {
    let cfg = RobotConfig::default();
    let n = if planar { 6 } else { rng.random_range(3..=8) };
    let amp = 0.8 * bend_limit;
    let joints: Vec<JointTerm> = (0..n)
        .map(|_| {
            let rest = if planar {
                Vector2::new(rng.random_range(-amp..=amp), 0.0)
            } else {
                let r = rng.random_range(0.0..=amp);
                let a = rng.random_range(0.0..2.0 * PI);
                Vector2::new(r * a.cos(), r * a.sin())
            };
            if !planar && rng.random_bool(0.4) {
                JointTerm::locked(rest)
            } else {
                JointTerm::free(rest)
            }
        })
        .collect();
    let layout = ChainLayout {
        base: Pose::identity(),
        first_length: rng.random_range(5.0..=cfg.seg_length),
        seg_length: cfg.seg_length,
    };
    EquilibriumProblem::new(layout, joints, vec![], &StiffnessModel::default(), cfg.body_radius(), bend_limit)
}

/// Rings across the chain at `x`, pushed sideways so that each overlaps the body.
fn place_touching_rings(p: &mut EquilibriumProblem, x: &[Vector2<f64>], rng: &mut ChaCha8Rng, planar: bool) {
    let frames = p.frames(x);
    let tip_z = frames.tip().z;
    let count = if planar { 2 } else { rng.random_range(1..=3) };
    for k in 0..count {
        let z = if !planar && k == 0 && rng.random_bool(0.3) {
            // the tip is just entering this ring
            tip_z - rng.random_range(0.2..p.body_radius)
        } else {
            rng.random_range(0.15..0.85) * tip_z
        };
        let probe = ring(Vector3::new(0.0, 0.0, z));
        let Some(c) = ring_crossing(&frames, &probe) else { continue };
        let dir = if planar {
            Vector3::x() * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            let a = rng.random_range(0.0..2.0 * PI);
            Vector3::new(a.cos(), a.sin(), 0.0)
        };
        let clearance = probe.clearance(p.body_radius);
        let push = clearance + rng.random_range(0.3..2.0);
        p.checkpoints.push(ring(Vector3::new(c.point.x, c.point.y, z) - dir * push));
    }
}

fn solver_properties() -> Result<(bool, String), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let limit = RobotConfig::default().sharp_limit;
    let mut worst_rel: f64 = 0.0;
    let mut rising = 0;
    let mut failures = 0;
    let mut touching = 0;
    let h = 1e-6;
    for _ in 0..100 {
        let mut p = random_problem(&mut rng, false, limit);
        let x: Vec<Vector2<f64>> = p
            .rest()
            .iter()
            .map(|q| {
                let d = Vector2::new(rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03));
                let y = q + d;
                if y.norm() > limit {
                    y * (limit / y.norm())
                } else {
                    y
                }
            })
            .collect();
        place_touching_rings(&mut p, &x, &mut rng, false);
        touching += checkpoint_forces(&x, &p).iter().filter(|r| r.touching()).count();
        let (_, g) = energy_gradient(&x, &p);
        let mut diff: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for j in 0..x.len() {
            for c in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j][c] += h;
                xm[j][c] -= h;
                let fd = (total_energy(&xp, &p) - total_energy(&xm, &p)) / (2.0 * h);
                diff = diff.max((g[j][c] - fd).abs());
                norm = norm.max(fd.abs());
            }
        }
        worst_rel = worst_rel.max(diff / norm.max(1e-12));
        match solve_equilibrium(&p, &p.rest()) {
            Ok(sol) => {
                if sol.energy_trace.windows(2).any(|w| w[1] > w[0]) {
                    rising += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }

    let deviation = |jam_ratio: f64| -> Result<f64, SimError> {
        let mut p = fixed_contact_problem();
        p.jam_ratio = jam_ratio;
        let sol = solve_equilibrium(&p, &p.rest())?;
        Ok((0..2)
            .map(|j| (sol.angles[j] - p.joints[j].rest).norm())
            .fold(0.0, f64::max))
    };
    let halving = deviation(2e9)? / deviation(1e9)?;
    let ok = worst_rel <= 1e-6 && rising == 0 && failures == 0 && (0.45..=0.55).contains(&halving);
    Ok((
        ok,
        format!(
            "100 problems with {touching} ring contacts: worst gradient error {worst_rel:.1e} relative, {rising} non-monotone and {failures} failed solves; \
             locked deviation ratio at doubled jam ratio {}",
            format_sig(halving, 4)
        ),
    ))
}

/// Two locked joints under two free ones, pressed sideways by two rings.
fn fixed_contact_problem() -> EquilibriumProblem {
    let cfg = RobotConfig::default();
    let joints = vec![
        JointTerm::locked(Vector2::new(0.02, 0.01)),
        JointTerm::locked(Vector2::new(0.0, -0.03)),
        JointTerm::free(Vector2::new(0.1, 0.05)),
        JointTerm::free(Vector2::new(-0.05, 0.1)),
    ];
    let rings = vec![
        ring(Vector3::new(3.0, 1.5, 25.0)),
        ring(Vector3::new(7.0, -2.0, 55.0)),
    ];
    EquilibriumProblem::new(
        ChainLayout::uniform(cfg.seg_length),
        joints,
        rings,
        &StiffnessModel::default(),
        cfg.body_radius(),
        cfg.sharp_limit,
    )
}

fn oracle_equivalence() -> Result<(bool, String), SimError> {
    let cfg = RobotConfig::default();
    let ideal = StiffnessModel::ideal();
    let plant = Plant::new(&cfg, &ideal, &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let mut state = RobotState::initial(&cfg)?;
    let mut path = ConservedPath::new(&Pose::identity(), cfg.seg_length);
    let mut commands = Vec::new();
    let cycles = cfg.n_segments - 1;
    for i in 0..cycles {
        let cmd = JointState::new(
            rng.random_range(0.0..=cfg.gentle_limit),
            rng.random_range(-PI..PI),
        );
        let strategy = ExtensionStrategy::es(1 + i % cfg.n_fjms);
        (state, path, _) = execute_cycle(&state, &path, &cmd, cfg.seg_length, &strategy, &plant, 0.0)?;
        commands.push(cmd);
    }
    let fk = forward_kinematics(&commands, &cfg)?;
    let last = fk.last().expect("poses");
    let want = last.position + last.orientation * Vector3::z() * cfg.seg_length;
    let tip_error = (path.end_pose().position - want).norm();
    let body = forward_kinematics(&state.joints, &cfg)?;
    let body_error = fk
        .iter()
        .zip(&body)
        .map(|(a, b)| (a.position - b.position).norm())
        .fold(0.0, f64::max);
    let fk_ok = tip_error <= 1e-9 && body_error <= 1e-9 && fk.len() == body.len();

    let step = 2f64.to_radians();
    let limit = 10f64.to_radians();
    let mut lattice_ok = true;
    let mut worst_gap: f64 = 0.0;
    let problems = 3;
    for _ in 0..problems {
        let mut p = random_problem(&mut rng, true, limit);
        let rest = p.rest();
        place_touching_rings(&mut p, &rest, &mut rng, true);
        let sol = solve_equilibrium(&p, &rest)?;
        let (best, arg) = lattice_minimum(&p, step, limit);
        let gap = sol
            .angles
            .iter()
            .zip(&arg)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let planar = sol.angles.iter().all(|q| q.y.abs() < 1e-9);
        worst_gap = worst_gap.max(gap);
        lattice_ok &= planar && sol.energy <= best + 1e-9 && gap <= step;
    }
    Ok((
        fk_ok && lattice_ok,
        format!(
            "{cycles} ideal cycles: tip error {tip_error:.1e} mm, body error {body_error:.1e} mm; \
             {problems} six-joint problems: solver never above the 2° lattice, worst distance to lattice minimum {:.2}°",
            worst_gap.to_degrees()
        ),
    ))
}

/// Brute-force minimum of a planar problem over the lattice `−limit..=limit` in `step`s.
fn lattice_minimum(p: &EquilibriumProblem, step: f64, limit: f64) -> (f64, Vec<Vector2<f64>>) {
    let k = (limit / step).round() as i32;
    let values: Vec<f64> = (-k..=k).map(|i| i as f64 * step).collect();
    let n = p.joints.len();
    let mut idx = vec![0usize; n];
    let mut x = vec![Vector2::new(values[0], 0.0); n];
    let mut best = (f64::INFINITY, x.clone());
    loop {
        let e = total_energy(&x, p);
        if e < best.0 {
            best = (e, x.clone());
        }
        let mut j = 0;
        loop {
            if j == n {
                return best;
            }
            idx[j] += 1;
            if idx[j] < values.len() {
                x[j].x = values[idx[j]];
                break;
            }
            idx[j] = 0;
            x[j].x = values[0];
            j += 1;
        }
    }
}

/// Runs every check and fails with exit code 3 semantics if any is red.
pub fn verify(suite: &str) -> Result<Vec<CriterionResult>, SimError> {
    if suite != SUITE_NAME {
        return Err(SimError::Validation(format!("unknown suite {suite:?}, expected \"{SUITE_NAME}\"")));
    }
    Ok(Suite::new().run_all())
}
