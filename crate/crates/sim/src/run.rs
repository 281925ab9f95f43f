//! Runs a scenario: controller loop, force traces, sweep error.

use std::ops::Range;

use jamsnake_core::environment::{
    build_trajectory, classify_phase, place_checkpoints, Checkpoint, CheckpointLabel, PhaseLabel, Trajectory,
};
use jamsnake_core::ftl::{
    execute_cycle, plan_steering, tdcr_baseline_step, ConservedPath, Event, ExtensionStrategy, Frame, Plant,
    RobotState,
};
use jamsnake_core::geometry::{bend_towards, ChainFrames, JointState, Pose};
use jamsnake_core::metrics::{
    summarize_forces, sweep_error, ForceSample, ForceSummary, ForceTrace, Projection, RunMeta,
};
use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::scenario::{strategy_label, Controller, Scenario};
use crate::SimError;

/// Trajectory, rings and camera plane of a scenario.
#[derive(Debug, Clone)]
pub struct Environment {
    pub trajectory: Trajectory,
    pub checkpoints: Vec<Checkpoint>,
    pub projection: Projection,
}

pub fn build_environment(s: &Scenario) -> Result<Environment, SimError> {
    let trajectory = build_trajectory(
        s.trajectory.kind,
        s.trajectory.bend_class,
        &s.robot,
        &s.trajectory.options(),
    )?;
    let checkpoints = place_checkpoints(&trajectory, &s.robot, &s.checkpoints)?;
    let projection = match &s.simulation.projection {
        Some(p) => Projection::new(Vector3::zeros(), Vector3::from(p.u), Vector3::from(p.v))
            .map_err(|e| SimError::Validation(format!("simulation.projection: {e}")))?,
        None => Projection::dominant_plane(&trajectory.sample(s.robot.seg_length / 4.0))?,
    };
    Ok(Environment {
        trajectory,
        checkpoints,
        projection,
    })
}

/// Frames of one cycle; `head_vertex` is the path vertex the head joint steers at.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSpan {
    pub head_vertex: usize,
    pub frames: Range<usize>,
    pub command: JointState,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub strategy: usize,
    pub run: usize,
    pub events: Vec<Event>,
    pub frames: Vec<Frame>,
    pub cycles: Vec<CycleSpan>,
    pub path: Option<ConservedPath>,
    pub final_state: RobotState,
    pub trace: ForceTrace,
    pub lambda: f64,
    /// First and last head vertex of the sweep window.
    pub window: (usize, usize),
}

impl RunRecord {
    /// Chains of every frame in the sweep window, in time order.
    pub fn window_chains(&self) -> Vec<ChainFrames> {
        self.cycles
            .iter()
            .filter(|c| (self.window.0..=self.window.1).contains(&c.head_vertex))
            .flat_map(|c| self.frames[c.frames.clone()].iter().map(Frame::chain))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub strategy: usize,
    pub label: String,
    pub runs: Vec<RunRecord>,
    pub summary: ForceSummary,
}

impl StrategyResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.lambda).collect()
    }

    pub fn mean_lambda(&self) -> f64 {
        let l = self.lambdas();
        l.iter().sum::<f64>() / l.len() as f64
    }

    /// Mean over runs of the peak segment force, counting untouched runs as zero.
    pub fn peak_mean(&self, phase: PhaseLabel, checkpoint: CheckpointLabel) -> f64 {
        let total: f64 = self
            .runs
            .iter()
            .map(|r| r.trace.phase_peak(phase, checkpoint).unwrap_or(0.0))
            .sum();
        total / self.runs.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub environment: Environment,
    pub strategies: Vec<StrategyResult>,
}

/// Window of `width` cycles centred on the bent vertices, clamped to the
/// cycles that exist (head vertices `1..=last`).
pub fn sweep_window(trajectory: &Trajectory, width: usize, last: usize) -> (usize, usize) {
    let bent = trajectory.bent_vertices();
    let width = width.min(last).max(1);
    let start = match (bent.first(), bent.last()) {
        (Some(&a), Some(&b)) => {
            let centre = 0.5 * (a + b) as f64;
            (centre - 0.5 * (width as f64 - 1.0) + 0.5).floor().max(1.0) as usize
        }
        _ => 1,
    };
    let start = start.min(last + 1 - width);
    (start, start + width - 1)
}

fn perturbed(cmd: JointState, noise: Option<(&Normal<f64>, &mut ChaCha8Rng)>, limit: f64) -> JointState {
    let Some((dist, rng)) = noise else {
        return cmd;
    };
    let q = cmd.bend_vector() + Vector2::new(dist.sample(rng), dist.sample(rng));
    let n = q.norm();
    JointState::from_bend_vector(if n > limit { q * (limit / n) } else { q })
}

/// One run of one strategy (`strategy` is ignored by the tendon-only controller).
pub fn simulate(s: &Scenario, env: &Environment, strategy: usize, run: usize) -> Result<RunRecord, SimError> {
    let cfg = &s.robot;
    let sim = &s.simulation;
    let mut plant = Plant::new(cfg, &s.stiffness, &env.checkpoints);
    plant.timing = sim.timing;
    plant.sampling = sim.sampling;
    plant.load = sim.load.map(Vector3::from);

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(run as u64);
    let normal = Normal::new(0.0, sim.perturbation).map_err(|e| SimError::Validation(e.to_string()))?;
    let noisy = sim.perturbation > 0.0;

    let total = cfg.body_length();
    let l = cfg.seg_length;
    let mut events = Vec::new();
    let mut frames: Vec<Frame> = Vec::new();
    let mut cycles = Vec::new();
    let mut clock = 0.0;
    let mut path = None;

    let final_state = match s.controller {
        Controller::Ftl => {
            let es = ExtensionStrategy::es(strategy);
            let mut state = RobotState::initial(cfg)?;
            let mut p = ConservedPath::new(&Pose::identity(), l);
            while state.base_insertion < total - 1e-9 {
                let advance = sim.advance.min(total - state.base_insertion);
                let head_vertex = (state.base_insertion / l).round() as usize;
                let cmd = plan_steering(&env.trajectory, &p.end_pose(), p.total_arclength(), sim.steer_slack, cfg)?;
                let cmd = perturbed(cmd, noisy.then_some((&normal, &mut rng)), cfg.sharp_limit);
                let (next, next_path, rec) = execute_cycle(&state, &p, &cmd, advance, &es, &plant, clock)?;
                let start = frames.len();
                frames.extend(rec.frames);
                events.extend(rec.events);
                cycles.push(CycleSpan {
                    head_vertex,
                    frames: start..frames.len(),
                    command: cmd,
                });
                clock = rec.end_time;
                state = next;
                p = next_path;
            }
            path = Some(p);
            state
        }
        Controller::Tdcr => {
            let mut state = RobotState::tdcr_initial(cfg)?;
            while state.base_insertion < total - 1e-9 {
                let advance = sim.advance.min(total - state.base_insertion);
                let head_vertex = (state.base_insertion / l).round() as usize;
                let tip_arc = state.base_insertion + advance;
                let tangent = env.trajectory.tangent_at(tip_arc - 0.5 * l);
                let section = bend_towards(&tangent);
                let cmd = perturbed(JointState::from_bend_vector(section), noisy.then_some((&normal, &mut rng)), f64::INFINITY);
                let (next, rec) = tdcr_baseline_step(&state, &cmd.bend_vector(), advance, &plant, clock)?;
                let start = frames.len();
                frames.extend(rec.frames);
                events.extend(rec.events);
                cycles.push(CycleSpan {
                    head_vertex,
                    frames: start..frames.len(),
                    command: cmd,
                });
                clock = rec.end_time;
                state = next;
            }
            state
        }
    };

    let meta = RunMeta {
        scenario: s.name.clone(),
        controller: s.controller.as_str().into(),
        strategy: strategy_label(s.controller, strategy),
    };
    let mut trace = ForceTrace::new(meta);
    for f in &frames {
        let phase = classify_phase(f.base_insertion, &env.checkpoints);
        for r in &f.readings {
            if let Some(seg) = r.segment {
                trace.push(
                    r.label,
                    f.segment_from_tip(seg),
                    ForceSample {
                        time_s: f.time_s,
                        duration: f.duration,
                        phase,
                        force: r.force,
                    },
                )?;
            }
        }
    }

    let last = cycles.last().map_or(1, |c| c.head_vertex);
    let window = sweep_window(&env.trajectory, sim.sweep_cycles, last);
    let mut record = RunRecord {
        strategy,
        run,
        events,
        frames,
        cycles,
        path,
        final_state,
        trace,
        lambda: 0.0,
        window,
    };
    record.lambda = sweep_error(
        &record.window_chains(),
        cfg.seg_diameter,
        env.projection,
        sim.grid_resolution,
    )?;
    Ok(record)
}

/// All strategies and runs of a scenario. Without perturbation every run is
/// identical, so the first is simulated and copied.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioResult, SimError> {
    s.validate()?;
    let env = build_environment(s)?;
    let mut strategies = Vec::new();
    for strategy in s.strategies() {
        let mut runs: Vec<RunRecord> = Vec::with_capacity(s.runs);
        for run in 1..=s.runs {
            if s.simulation.perturbation == 0.0 && run > 1 {
                let mut copy = runs[0].clone();
                copy.run = run;
                runs.push(copy);
            } else {
                runs.push(simulate(s, &env, strategy, run)?);
            }
        }
        let traces: Vec<_> = runs.iter().map(|r| r.trace.clone()).collect();
        let summary = summarize_forces(&traces, s.simulation.touch_threshold)?;
        strategies.push(StrategyResult {
            strategy,
            label: strategy_label(s.controller, strategy),
            runs,
            summary,
        });
    }
    Ok(ScenarioResult {
        scenario: s.clone(),
        environment: env,
        strategies,
    })
}
